use super::{Article, Vocabulary};
use crate::Result;

/// Encodes raw headline and body text. Each non-blank body line is one
/// paragraph.
pub fn article_from_text(id: &str, headline: &str, body: &str, vocab: &Vocabulary) -> Result<Article> {
    let paragraphs: Vec<&str> = body.lines().filter(|l| !l.trim().is_empty()).collect();
    article_from_paragraphs(id, headline, &paragraphs, vocab)
}

pub fn article_from_paragraphs<S: AsRef<str>>(
    id: &str,
    headline: &str,
    paragraphs: &[S],
    vocab: &Vocabulary,
) -> Result<Article> {
    let article = Article {
        id: id.to_string(),
        category: String::new(),
        headline: vocab.encode_text(headline),
        paragraphs: paragraphs
            .iter()
            .map(|p| vocab.encode_text(p.as_ref()))
            .filter(|p| !p.is_empty())
            .collect(),
        label: None,
        provenance: None,
    };
    article.validate()?;
    Ok(article)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textcorpus::Token;
    use crate::Error;

    #[test]
    fn lines_become_paragraphs() {
        let v = Vocabulary::from_words(["yoga", "is", "good", "."]);
        let a = article_from_text("x", "Yoga is good", "yoga .\n\n   \nis good\n", &v).unwrap();
        assert_eq!(a.headline, vec![Token(2), Token(3), Token(4)]);
        assert_eq!(a.paragraphs, vec![vec![Token(2), Token(5)], vec![Token(3), Token(4)]]);
        assert!(matches!(article_from_text("x", "  ", "a", &v), Err(Error::InvalidArticle { .. })));
        assert!(article_from_text("x", "yoga", "\n\n", &v).is_err());
    }
}
