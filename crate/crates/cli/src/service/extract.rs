//! Minimal, tolerant article extraction from page markup.
//!
//! Headline: `og:title` meta content, else `<title>`, else the first `<h1>`.
//! Paragraphs: text of `<p>` elements with at least [`MIN_PARAGRAPH_TOKENS`]
//! tokens, in document order. Tags are stripped and entities decoded.

use incongruity_core::textcorpus::tokenize;

pub const MIN_PARAGRAPH_TOKENS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub headline: String,
    pub paragraphs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("extraction failed: {0}")]
pub struct ExtractionError(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
enum Event {
    Start { name: String, attrs: Vec<(String, String)> },
    End(String),
    Text(String),
}

/// Elements whose contents are never markup.
const RAW_TEXT: [&str; 4] = ["script", "style", "textarea", "title"];

/// Elements whose start or end closes an open paragraph.
const BLOCKS: [&str; 28] = [
    "p", "div", "section", "article", "main", "aside", "header", "footer", "nav", "h1", "h2", "h3", "h4", "h5", "h6",
    "ul", "ol", "li", "table", "tr", "td", "blockquote", "pre", "form", "figure", "hr", "body", "html",
];

fn parse_attrs(s: &str) -> Vec<(String, String)> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        while i < b.len() && (b[i].is_ascii_whitespace() || b[i] == b'/') {
            i += 1;
        }
        let start = i;
        while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'=' && b[i] != b'/' {
            i += 1;
        }
        if start == i {
            i += 1;
            continue;
        }
        let name = s[start..i].to_ascii_lowercase();
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        let mut value = String::new();
        if i < b.len() && b[i] == b'=' {
            i += 1;
            while i < b.len() && b[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < b.len() && (b[i] == b'"' || b[i] == b'\'') {
                let q = b[i];
                let vs = i + 1;
                i = vs;
                while i < b.len() && b[i] != q {
                    i += 1;
                }
                value = decode_entities(&s[vs..i]);
                i += 1;
            } else {
                let vs = i;
                while i < b.len() && !b[i].is_ascii_whitespace() {
                    i += 1;
                }
                value = decode_entities(&s[vs..i]);
            }
        }
        out.push((name, value));
    }
    out
}

/// Finds `</name` case-insensitively at or after `from`.
fn find_close(html: &str, from: usize, name: &str) -> Option<usize> {
    let needle = format!("</{name}");
    let hay = html.as_bytes();
    let n = needle.len();
    (from..hay.len().saturating_sub(n - 1)).find(|&i| hay[i..i + n].eq_ignore_ascii_case(needle.as_bytes()))
}

fn events(html: &str) -> Vec<Event> {
    let mut out = Vec::new();
    let mut i = 0;
    let mut text_start = 0;
    let b = html.as_bytes();
    let flush = |out: &mut Vec<Event>, from: usize, to: usize| {
        if from < to {
            out.push(Event::Text(html[from..to].to_string()));
        }
    };
    while i < b.len() {
        if b[i] != b'<' {
            i += 1;
            continue;
        }
        if html[i..].starts_with("<!--") {
            flush(&mut out, text_start, i);
            i = html[i + 4..].find("-->").map_or(b.len(), |e| i + 4 + e + 3);
            text_start = i;
            continue;
        }
        let next = b.get(i + 1).copied().unwrap_or(b' ');
        if !(next.is_ascii_alphabetic() || next == b'/' || next == b'!' || next == b'?') {
            i += 1;
            continue;
        }
        flush(&mut out, text_start, i);
        let Some(end) = tag_end(b, i + 1) else {
            text_start = b.len();
            break;
        };
        let inner = &html[i + 1..end];
        i = end + 1;
        text_start = i;
        if let Some(rest) = inner.strip_prefix('/') {
            let name: String = rest.trim().split(|c: char| c.is_whitespace()).next().unwrap_or("").to_ascii_lowercase();
            out.push(Event::End(name));
            continue;
        }
        if inner.starts_with('!') || inner.starts_with('?') {
            continue;
        }
        let split = inner.find(|c: char| c.is_whitespace() || c == '/').unwrap_or(inner.len());
        let name = inner[..split].to_ascii_lowercase();
        let attrs = parse_attrs(&inner[split..]);
        let self_closing = inner.trim_end().ends_with('/');
        out.push(Event::Start { name: name.clone(), attrs });
        if RAW_TEXT.contains(&name.as_str()) && !self_closing {
            let close = find_close(html, i, &name).unwrap_or(b.len());
            if close > i {
                out.push(Event::Text(html[i..close].to_string()));
            }
            out.push(Event::End(name));
            i = b[close..].iter().position(|&c| c == b'>').map_or(b.len(), |p| close + p + 1);
            text_start = i;
        }
    }
    flush(&mut out, text_start, b.len());
    out
}

/// Position of the `>` closing a tag that starts at `from`, skipping quoted
/// attribute values.
fn tag_end(b: &[u8], from: usize) -> Option<usize> {
    let mut quote = None;
    for (j, &c) in b.iter().enumerate().skip(from) {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == b'"' || c == b'\'' => quote = Some(c),
            None if c == b'>' => return Some(j),
            None => {}
        }
    }
    None
}

fn named_entity(name: &str) -> Option<char> {
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => '\u{a0}',
        "ndash" => '\u{2013}',
        "mdash" => '\u{2014}',
        "hellip" => '\u{2026}',
        "lsquo" => '\u{2018}',
        "rsquo" => '\u{2019}',
        "ldquo" => '\u{201c}',
        "rdquo" => '\u{201d}',
        "laquo" => '\u{ab}',
        "raquo" => '\u{bb}',
        "middot" => '\u{b7}',
        "bull" => '\u{2022}',
        "copy" => '\u{a9}',
        "reg" => '\u{ae}',
        "trade" => '\u{2122}',
        "eacute" => '\u{e9}',
        "euro" => '\u{20ac}',
        _ => return None,
    })
}

/// Decodes numeric and common named character references; anything else is
/// left as written.
pub fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let decoded = rest[1..].find(';').filter(|&e| e <= 10).and_then(|e| {
            let body = &rest[1..1 + e];
            let c = if let Some(num) = body.strip_prefix('#') {
                let v = match num.strip_prefix(['x', 'X']) {
                    Some(h) => u32::from_str_radix(h, 16).ok(),
                    None => num.parse().ok(),
                };
                v.and_then(char::from_u32)
            } else {
                named_entity(body)
            };
            c.map(|c| (c, e + 2))
        });
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &rest[len..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn clean(raw: &str) -> String {
    decode_entities(raw).split_whitespace().collect::<Vec<_>>().join(" ")
}

fn attr<'a>(attrs: &'a [(String, String)], name: &str) -> Option<&'a str> {
    attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
}

pub fn extract_article(html: &str) -> Result<Extracted, ExtractionError> {
    let mut og_title = None;
    let mut title = None;
    let mut h1 = None;
    let mut paragraphs = Vec::new();
    // open capture: (element, text so far)
    let mut open: Option<(&'static str, String)> = None;
    let mut in_title = false;
    let mut skip_depth = 0usize;

    let close = |open: &mut Option<(&'static str, String)>, h1: &mut Option<String>, paragraphs: &mut Vec<String>| {
        if let Some((el, text)) = open.take() {
            let text = clean(&text);
            match el {
                "p" if tokenize(&text).len() >= MIN_PARAGRAPH_TOKENS => paragraphs.push(text),
                "h1" if h1.is_none() && !text.is_empty() => *h1 = Some(text),
                _ => {}
            }
        }
    };

    for ev in events(html) {
        match ev {
            Event::Start { name, attrs } => match name.as_str() {
                "script" | "style" | "textarea" => skip_depth += 1,
                "title" => in_title = true,
                "meta" => {
                    let key = attr(&attrs, "property").or_else(|| attr(&attrs, "name"));
                    if og_title.is_none() && key.is_some_and(|k| k.eq_ignore_ascii_case("og:title")) {
                        og_title = attr(&attrs, "content").map(clean).filter(|t| !t.is_empty());
                    }
                }
                "br" => {
                    if let Some((_, t)) = open.as_mut() {
                        t.push(' ');
                    }
                }
                n if BLOCKS.contains(&n) => {
                    close(&mut open, &mut h1, &mut paragraphs);
                    if n == "p" {
                        open = Some(("p", String::new()));
                    } else if n == "h1" {
                        open = Some(("h1", String::new()));
                    }
                }
                _ => {}
            },
            Event::End(name) => match name.as_str() {
                "script" | "style" | "textarea" => skip_depth = skip_depth.saturating_sub(1),
                "title" => in_title = false,
                n if BLOCKS.contains(&n) => close(&mut open, &mut h1, &mut paragraphs),
                _ => {}
            },
            Event::Text(t) => {
                if skip_depth > 0 {
                    continue;
                }
                if in_title {
                    if title.is_none() {
                        title = Some(clean(&t)).filter(|t| !t.is_empty());
                    }
                } else if let Some((_, buf)) = open.as_mut() {
                    buf.push_str(&t);
                }
            }
        }
    }
    close(&mut open, &mut h1, &mut paragraphs);

    let headline = og_title
        .or(title)
        .or(h1)
        .ok_or_else(|| ExtractionError("no headline found".into()))?;
    if paragraphs.is_empty() {
        return Err(ExtractionError(format!(
            "no paragraph with at least {MIN_PARAGRAPH_TOKENS} tokens"
        )));
    }
    Ok(Extracted { headline, paragraphs })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BODY: &str = "<p>one two three four five</p><p>six seven eight nine ten eleven</p>";

    #[test]
    fn og_title_wins() {
        let html = format!(
            r#"<html><head><meta property="og:title" content="A"><title>B</title></head><body><h1>C</h1>{BODY}</body></html>"#
        );
        assert_eq!(extract_article(&html).unwrap().headline, "A");
    }

    #[test]
    fn title_then_h1() {
        let html = "<title>B</title><p>x y z w v</p><p>a b c d e</p><p>f g h i j</p>";
        let e = extract_article(html).unwrap();
        assert_eq!(e.headline, "B");
        assert_eq!(e.paragraphs.len(), 3);
        let html = format!("<body><h1>Big <em>news</em></h1>{BODY}</body>");
        assert_eq!(extract_article(&html).unwrap().headline, "Big news");
    }

    #[test]
    fn short_paragraphs_and_noise_are_dropped() {
        let html = "<title>T</title><p>too short</p><script>var p = '<p>not a paragraph at all here</p>';</script>\
                    <!-- <p>commented out paragraph text here</p> --><style>p{}</style>\
                    <p>Caf&eacute; &amp; bar &lt;open&gt; &#8220;late&#x201D;&nbsp;now</p>";
        let e = extract_article(html).unwrap();
        assert_eq!(e.paragraphs, vec!["Caf\u{e9} & bar <open> \u{201c}late\u{201d} now"]);
    }

    #[test]
    fn implicit_paragraph_close() {
        let html = "<title>T</title><div><p>first paragraph has five words<p>second one <b>also</b> has five</div>";
        let e = extract_article(html).unwrap();
        assert_eq!(e.paragraphs, vec!["first paragraph has five words", "second one also has five"]);
    }

    #[test]
    fn failures() {
        let e = extract_article("<p>one two three four five</p>").unwrap_err();
        assert!(e.to_string().starts_with("extraction failed"));
        assert!(extract_article("<title>T</title><p>short</p>").is_err());
        assert!(extract_article("").is_err());
        assert!(extract_article("<title>T</title><p unterminated").is_err());
    }

    #[test]
    fn attribute_quoting() {
        let html = r#"<meta content='It&#39;s "here"' name=og:title><p data-x="a>b">one two three four five</p>"#;
        let e = extract_article(html).unwrap();
        assert_eq!(e.headline, "It's \"here\"");
        assert_eq!(e.paragraphs, vec!["one two three four five"]);
    }

    #[test]
    fn unknown_entities_survive() {
        assert_eq!(decode_entities("a &bogus; b & c &#xZZ;"), "a &bogus; b & c &#xZZ;");
    }
}
