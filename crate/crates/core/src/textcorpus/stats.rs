use serde::{Deserialize, Serialize};

use super::Article;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    /// Sample standard deviation divided by `sqrt(n)`; zero when `n == 1`.
    pub stderr: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub articles: usize,
    pub headline_tokens: MeanStderr,
    pub body_tokens: MeanStderr,
    pub paragraphs_per_body: MeanStderr,
    pub tokens_per_paragraph: MeanStderr,
}

/// Welford accumulator.
#[derive(Default)]
struct Running {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn finish(&self) -> MeanStderr {
        let stderr = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt()
        } else {
            0.0
        };
        MeanStderr {
            mean: self.mean,
            stderr,
            n: self.n,
        }
    }
}

/// Single pass over the corpus.
pub fn corpus_stats<'a, I>(corpus: I) -> Result<CorpusStats>
where
    I: IntoIterator<Item = &'a Article>,
{
    let mut headline = Running::default();
    let mut body = Running::default();
    let mut paragraphs = Running::default();
    let mut per_paragraph = Running::default();
    for a in corpus {
        headline.push(a.headline.len() as f64);
        body.push(a.body_len() as f64);
        paragraphs.push(a.paragraphs.len() as f64);
        for p in &a.paragraphs {
            per_paragraph.push(p.len() as f64);
        }
    }
    if headline.n == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(CorpusStats {
        articles: headline.n,
        headline_tokens: headline.finish(),
        body_tokens: body.finish(),
        paragraphs_per_body: paragraphs.finish(),
        tokens_per_paragraph: per_paragraph.finish(),
    })
}
