use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Index into a [`Vocabulary`](super::Vocabulary). Ids 0 and 1 are reserved
/// for padding and unknown words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(pub u32);

impl Token {
    pub const PAD: Token = Token(0);
    pub const UNK: Token = Token(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_pad(self) -> bool {
        self == Token::PAD
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Congruent,
    Incongruent,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Congruent => 0.0,
            Label::Incongruent => 1.0,
        }
    }

    pub fn is_incongruent(self) -> bool {
        self == Label::Incongruent
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::Congruent),
            1 => Ok(Label::Incongruent),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        match l {
            Label::Congruent => 0,
            Label::Incongruent => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InsertionMode {
    #[default]
    Insert,
    Replace,
}

/// Where the implanted paragraphs of a generated article came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub donor_id: String,
    /// Index of the first borrowed paragraph in the donor.
    pub donor_start: usize,
    /// Index in the generated article where the borrowed run begins.
    pub position: usize,
    pub count: usize,
    pub mode: InsertionMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub category: String,
    pub headline: Vec<Token>,
    pub paragraphs: Vec<Vec<Token>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Article {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidArticle {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.headline.is_empty() {
            return fail("empty headline");
        }
        if self.paragraphs.is_empty() {
            return fail("no paragraphs");
        }
        if self.paragraphs.iter().any(Vec::is_empty) {
            return fail("empty paragraph");
        }
        Ok(())
    }

    pub fn body_len(&self) -> usize {
        self.paragraphs.iter().map(Vec::len).sum()
    }

    /// All body tokens in paragraph order.
    pub fn flat_body(&self) -> Vec<Token> {
        self.paragraphs.iter().flatten().copied().collect()
    }
}
