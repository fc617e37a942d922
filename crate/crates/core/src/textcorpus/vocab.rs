use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::tokenize::tokenize;
use super::Token;
use crate::{Error, Result};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD: Token = Token::PAD;
pub const UNK: Token = Token::UNK;

/// Bijection between token strings and contiguous ids `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::reserved_only()
    }
}

impl Vocabulary {
    pub fn reserved_only() -> Self {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        v.push(PAD_TOKEN.to_string());
        v.push(UNK_TOKEN.to_string());
        v
    }

    /// Builds a vocabulary from words listed in id order, starting at id 2.
    /// Duplicates are ignored.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Self::reserved_only();
        for w in words {
            let w = w.into();
            if !v.index.contains_key(&w) {
                v.push(w);
            }
        }
        v
    }

    fn push(&mut self, word: String) -> Token {
        let id = self.tokens.len() as u32;
        self.index.insert(word.clone(), id);
        self.tokens.push(word);
        Token(id)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<Token> {
        self.index.get(word).map(|&id| Token(id))
    }

    pub fn word(&self, token: Token) -> Option<&str> {
        self.tokens.get(token.index()).map(String::as_str)
    }

    /// Maps token strings to ids; unknown strings become [`UNK`].
    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> Vec<Token> {
        words
            .iter()
            .map(|w| self.get(w.as_ref()).unwrap_or(UNK))
            .collect()
    }

    /// Tokenizes and encodes raw text.
    pub fn encode_text(&self, text: &str) -> Vec<Token> {
        self.encode(&tokenize(text))
    }

    /// Maps ids back to strings; out-of-range ids decode to [`UNK_TOKEN`].
    pub fn decode(&self, tokens: &[Token]) -> Vec<String> {
        tokens
            .iter()
            .map(|&t| self.word(t).unwrap_or(UNK_TOKEN).to_string())
            .collect()
    }

    /// Writes one `token<TAB>id` line per entry in id order.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (id, tok) in self.tokens.iter().enumerate() {
            writeln!(w, "{tok}\t{id}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = n + 1;
            let malformed = |message: String| Error::Malformed {
                line: lineno,
                message,
            };
            let (tok, id) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected token<TAB>id".into()))?;
            let id: usize = id
                .trim()
                .parse()
                .map_err(|_| malformed(format!("bad id {id:?}")))?;
            if id != v.tokens.len() {
                return Err(malformed(format!("ids must be contiguous, expected {}, got {id}", v.tokens.len())));
            }
            let expected = match id {
                0 => Some(PAD_TOKEN),
                1 => Some(UNK_TOKEN),
                _ => None,
            };
            if let Some(expected) = expected {
                if tok != expected {
                    return Err(malformed(format!("id {id} must be {expected}")));
                }
            }
            if v.index.contains_key(tok) {
                return Err(malformed(format!("duplicate token {tok:?}")));
            }
            v.push(tok.to_string());
        }
        if v.tokens.len() < 2 {
            return Err(Error::Malformed {
                line: v.tokens.len() + 1,
                message: "missing reserved entries".into(),
            });
        }
        Ok(v)
    }
}

/// Assigns ids (from 2) to tokens occurring at least `min_count` times, in
/// descending frequency with lexicographic tie-breaking.
pub fn build_vocabulary<I, S>(texts: I, min_count: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for text in texts {
        for tok in tokenize(text.as_ref()) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_count && t != PAD_TOKEN && t != UNK_TOKEN)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(Vocabulary::from_words(ranked.into_iter().map(|(t, _)| t)))
}

/// Splits token runs into sentences after `.`, `!` and `?`.
#[derive(Debug, Clone, Default)]
pub struct SentenceSplitter {
    delimiters: HashSet<Token>,
}

impl SentenceSplitter {
    pub fn new(vocab: &Vocabulary) -> Self {
        let delimiters = [".", "!", "?"]
            .iter()
            .filter_map(|d| vocab.get(d))
            .collect();
        SentenceSplitter { delimiters }
    }

    pub fn from_delimiters(delimiters: impl IntoIterator<Item = Token>) -> Self {
        SentenceSplitter {
            delimiters: delimiters.into_iter().collect(),
        }
    }

    pub fn split(&self, paragraph: &[Token]) -> Vec<Vec<Token>> {
        let mut sentences = Vec::new();
        let mut current = Vec::new();
        for &tok in paragraph {
            current.push(tok);
            if self.delimiters.contains(&tok) {
                sentences.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            sentences.push(current);
        }
        sentences
    }
}

pub fn split_sentences(paragraph: &[Token], vocab: &Vocabulary) -> Vec<Vec<Token>> {
    SentenceSplitter::new(vocab).split(paragraph)
}
