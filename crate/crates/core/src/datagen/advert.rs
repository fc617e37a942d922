use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::textcorpus::{tokenize, Article, Token, Vocabulary};
use crate::{Error, Result};

/// Token n-grams whose presence marks an article as advertising.
#[derive(Debug, Clone, Default)]
pub struct Blocklist {
    by_len: BTreeMap<usize, HashSet<Vec<Token>>>,
}

impl Blocklist {
    pub fn new<I: IntoIterator<Item = Vec<Token>>>(ngrams: I) -> Result<Self> {
        let mut by_len: BTreeMap<usize, HashSet<Vec<Token>>> = BTreeMap::new();
        for g in ngrams {
            if g.is_empty() {
                return Err(Error::Config("blocklist n-grams must be non-empty".into()));
            }
            by_len.entry(g.len()).or_default().insert(g);
        }
        Ok(Blocklist { by_len })
    }

    /// One space-separated n-gram per line; blank lines are skipped. N-grams
    /// containing a word outside `vocab` cannot occur and are dropped.
    pub fn parse(text: &str, vocab: &Vocabulary) -> Result<Self> {
        let grams = text
            .lines()
            .map(tokenize)
            .filter(|words| !words.is_empty())
            .filter_map(|words| words.iter().map(|w| vocab.get(w)).collect::<Option<Vec<_>>>());
        Blocklist::new(grams)
    }

    pub fn read(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Blocklist::parse(&text, vocab)
    }

    pub fn len(&self) -> usize {
        self.by_len.values().map(HashSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_len.is_empty()
    }

    pub fn matches(&self, tokens: &[Token]) -> bool {
        self.by_len
            .iter()
            .any(|(&n, set)| tokens.windows(n).any(|w| set.contains(w)))
    }
}

/// True when any blocked n-gram occurs in the headline or a paragraph.
pub fn filter_advert(article: &Article, blocklist: &Blocklist) -> bool {
    blocklist.matches(&article.headline) || article.paragraphs.iter().any(|p| blocklist.matches(p))
}
