//! Similarity-feature baseline scored by logistic regression.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::encoders::argmax;
use crate::textcorpus::{Article, Token};
use crate::{Error, Result};

pub const FEATURE_NAMES: [&str; 8] = [
    "tf_cosine",
    "tfidf_cosine",
    "unigram_overlap",
    "bigram_overlap",
    "headline_len",
    "body_len",
    "paragraphs",
    "missing_headline_tokens",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; 8]);

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|&n| n == name).map(|i| self.0[i])
    }
}

/// Smoothed inverse document frequency, `ln((1 + N) / (1 + df)) + 1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    pub documents: usize,
    pub df: BTreeMap<Token, usize>,
}

impl IdfTable {
    /// Each article (headline and body) counts as one document.
    pub fn fit<'a, I: IntoIterator<Item = &'a Article>>(articles: I) -> Self {
        let mut t = IdfTable::default();
        for a in articles {
            t.documents += 1;
            let mut seen: Vec<Token> = a.headline.iter().chain(a.paragraphs.iter().flatten()).copied().collect();
            seen.sort_unstable();
            seen.dedup();
            for tok in seen {
                *t.df.entry(tok).or_default() += 1;
            }
        }
        t
    }

    pub fn idf(&self, t: Token) -> f64 {
        let df = self.df.get(&t).copied().unwrap_or(0);
        ((1 + self.documents) as f64 / (1 + df) as f64).ln() + 1.0
    }
}

/// Term counts in token order, so sums are reproducible.
fn counts(tokens: &[Token]) -> BTreeMap<Token, f64> {
    let mut c = BTreeMap::new();
    for &t in tokens {
        *c.entry(t).or_insert(0.0) += 1.0;
    }
    c
}

fn cosine(a: &BTreeMap<Token, f64>, b: &BTreeMap<Token, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(t, x)| b.get(t).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

pub fn extract_features(headline: &[Token], paragraphs: &[Vec<Token>], idf: &IdfTable) -> Result<FeatureVector> {
    let body: Vec<Token> = paragraphs.concat();
    if headline.is_empty() || body.is_empty() {
        return Err(Error::EmptySequence);
    }
    let (h, b) = (counts(headline), counts(&body));
    let weigh = |c: &BTreeMap<Token, f64>| c.iter().map(|(&t, &x)| (t, x * idf.idf(t))).collect();
    let tfidf = cosine(&weigh(&h), &weigh(&b));
    let present = headline.iter().filter(|t| b.contains_key(t)).count();
    let body_bigrams: HashSet<&[Token]> = paragraphs.iter().flat_map(|p| p.windows(2)).collect();
    let bigrams = headline.windows(2).filter(|w| body_bigrams.contains(w)).count();
    let hl = headline.len() as f64;
    Ok(FeatureVector([
        cosine(&h, &b),
        tfidf,
        present as f64 / hl,
        bigrams as f64 / hl,
        hl,
        body.len() as f64,
        paragraphs.len() as f64,
        (headline.len() - present) as f64,
    ]))
}

/// Logistic regression over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub mean: [f64; 8],
    pub scale: [f64; 8],
    pub weights: [f64; 8],
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LinearModel {
    fn standardize(&self, x: &FeatureVector) -> [f64; 8] {
        std::array::from_fn(|i| (x.0[i] - self.mean[i]) / self.scale[i])
    }

    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let z = self.standardize(x);
        sigmoid(self.bias + z.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>())
    }

    /// Mean binary cross-entropy.
    pub fn loss(&self, xs: &[FeatureVector], labels: &[f64]) -> f64 {
        let eps = 1e-12;
        xs.iter()
            .zip(labels)
            .map(|(x, &y)| {
                let p = self.predict(x).clamp(eps, 1.0 - eps);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / xs.len() as f64
    }
}

/// Full-batch gradient descent on cross-entropy, starting from the
/// prior-only solution.
pub fn train_linear(xs: &[FeatureVector], labels: &[f64], epochs: usize, lr: f64) -> Result<LinearModel> {
    if xs.len() != labels.len() {
        return Err(Error::shape("train_linear", format!("{} rows vs {} labels", xs.len(), labels.len())));
    }
    let positives = labels.iter().filter(|&&y| y >= 0.5).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Metric("logistic regression needs both classes".into()));
    }
    let n = xs.len() as f64;
    let mean: [f64; 8] = std::array::from_fn(|i| xs.iter().map(|x| x.0[i]).sum::<f64>() / n);
    let scale: [f64; 8] = std::array::from_fn(|i| {
        let var = xs.iter().map(|x| (x.0[i] - mean[i]).powi(2)).sum::<f64>() / n;
        if var > 0.0 {
            var.sqrt()
        } else {
            1.0
        }
    });
    let prior = positives as f64 / n;
    let mut m = LinearModel {
        mean,
        scale,
        weights: [0.0; 8],
        bias: (prior / (1.0 - prior)).ln(),
    };
    let zs: Vec<[f64; 8]> = xs.iter().map(|x| m.standardize(x)).collect();
    for _ in 0..epochs {
        let mut gw = [0.0; 8];
        let mut gb = 0.0;
        for (z, &y) in zs.iter().zip(labels) {
            let p = sigmoid(m.bias + z.iter().zip(&m.weights).map(|(a, w)| a * w).sum::<f64>());
            let d = p - y;
            gb += d;
            gw.iter_mut().zip(z).for_each(|(g, a)| *g += d * a);
        }
        m.bias -= lr * gb / n;
        m.weights.iter_mut().zip(&gw).for_each(|(w, g)| *w -= lr * g / n);
    }
    Ok(m)
}

/// Features plus classifier, scoring whole articles or paragraphs with the
/// max rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBaseline {
    pub ip: bool,
    pub idf: IdfTable,
    pub model: LinearModel,
}

/// Feature rows for an article: one row, or one per paragraph.
pub fn article_features(article: &Article, idf: &IdfTable, ip: bool) -> Result<Vec<FeatureVector>> {
    if ip {
        article
            .paragraphs
            .iter()
            .map(|p| extract_features(&article.headline, std::slice::from_ref(p), idf))
            .collect()
    } else {
        Ok(vec![extract_features(&article.headline, &article.paragraphs, idf)?])
    }
}

impl LinearBaseline {
    /// Fits idf and weights on labeled training articles.
    pub fn fit(train: &[Article], ip: bool, epochs: usize, lr: f64) -> Result<Self> {
        let idf = IdfTable::fit(train);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for a in train {
            let y = a
                .label
                .ok_or_else(|| Error::InvalidArticle {
                    id: a.id.clone(),
                    reason: "missing label".into(),
                })?
                .as_f64();
            for x in article_features(a, &idf, ip)? {
                xs.push(x);
                ys.push(y);
            }
        }
        let model = train_linear(&xs, &ys, epochs, lr)?;
        Ok(LinearBaseline { ip, idf, model })
    }

    /// Article score and per-paragraph scores (empty without IP).
    pub fn score(&self, headline: &[Token], paragraphs: &[Vec<Token>]) -> Result<(f64, Vec<f64>, Option<usize>)> {
        if !self.ip {
            let x = extract_features(headline, paragraphs, &self.idf)?;
            return Ok((self.model.predict(&x), Vec::new(), None));
        }
        let scores = paragraphs
            .iter()
            .map(|p| extract_features(headline, std::slice::from_ref(p), &self.idf).map(|x| self.model.predict(&x)))
            .collect::<Result<Vec<_>>>()?;
        let top = argmax(&scores).ok_or(Error::EmptySequence)?;
        Ok((scores[top], scores.clone(), Some(top)))
    }
}

/// CSV with header `id,label,<feature names>`.
pub fn write_features_csv<W: Write>(mut w: W, rows: &[(String, Option<f64>, FeatureVector)]) -> std::io::Result<()> {
    writeln!(w, "id,label,{}", FEATURE_NAMES.join(","))?;
    for (id, label, x) in rows {
        let label = label.map(|l| l.to_string()).unwrap_or_default();
        let vals: Vec<String> = x.0.iter().map(f64::to_string).collect();
        writeln!(w, "{id},{label},{}", vals.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn t(ids: &[u32]) -> Vec<Token> {
        ids.iter().map(|&i| Token(i)).collect()
    }

    #[test]
    fn identical_text_has_unit_cosines() {
        let idf = IdfTable::default();
        let x = extract_features(&t(&[2, 3, 4]), &[t(&[2, 3, 4])], &idf).unwrap();
        assert!((x.get("tf_cosine").unwrap() - 1.0).abs() < 1e-12);
        assert!((x.get("tfidf_cosine").unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(x.get("unigram_overlap"), Some(1.0));
        assert_eq!(x.get("missing_headline_tokens"), Some(0.0));
    }

    #[test]
    fn disjoint_text() {
        let x = extract_features(&t(&[2, 3, 4]), &[t(&[5, 6]), t(&[7])], &IdfTable::default()).unwrap();
        assert_eq!(x.0[..4], [0.0; 4]);
        assert_eq!(x.0[4..], [3.0, 3.0, 2.0, 3.0]);
    }

    #[test]
    fn half_overlap_cosine() {
        // (1,1,0)·(1,0,1) / (√2 √2)
        let x = extract_features(&t(&[2, 3]), &[t(&[2, 4])], &IdfTable::default()).unwrap();
        assert!((x.0[0] - 0.5).abs() < 1e-12);
        assert!(extract_features(&[], &[t(&[2])], &IdfTable::default()).is_err());
        assert!(extract_features(&t(&[2]), &[], &IdfTable::default()).is_err());
    }

    #[test]
    fn bigram_overlap_within_paragraphs() {
        let x = extract_features(&t(&[2, 3, 4]), &[t(&[9, 2, 3]), t(&[4])], &IdfTable::default()).unwrap();
        assert!((x.get("bigram_overlap").unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn invariances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let docs: Vec<Article> = (0..20)
            .map(|i| Article {
                id: i.to_string(),
                category: "c".into(),
                headline: (0..5).map(|_| Token(rng.random_range(2..30))).collect(),
                paragraphs: (0..3).map(|_| (0..8).map(|_| Token(rng.random_range(2..30))).collect()).collect(),
                label: None,
                provenance: None,
            })
            .collect();
        let idf = IdfTable::fit(&docs);
        for a in &docs {
            let x = extract_features(&a.headline, &a.paragraphs, &idf).unwrap();
            let mut rev = a.paragraphs.clone();
            rev.reverse();
            let y = extract_features(&a.headline, &rev, &idf).unwrap();
            for i in [0, 1, 2, 4, 5, 6, 7] {
                assert!((x.0[i] - y.0[i]).abs() < 1e-12);
            }
            let doubled: Vec<_> = a.paragraphs.iter().chain(&a.paragraphs).cloned().collect();
            let z = extract_features(&a.headline, &doubled, &idf).unwrap();
            assert!((x.0[0] - z.0[0]).abs() < 1e-12 && (x.0[1] - z.0[1]).abs() < 1e-12);
            assert!(x.0.iter().all(|v| v.is_finite()));
            assert!((0.0..=1.0).contains(&x.0[0]) && (0.0..=1.0).contains(&x.0[1]));
        }
    }

    #[test]
    fn idf_smoothing() {
        let a = Article {
            id: "a".into(),
            category: "c".into(),
            headline: t(&[2, 2]),
            paragraphs: vec![t(&[3])],
            label: None,
            provenance: None,
        };
        let idf = IdfTable::fit([&a, &a]);
        assert_eq!(idf.df[&Token(2)], 2);
        assert!((idf.idf(Token(2)) - 1.0).abs() < 1e-12);
        assert!((idf.idf(Token(9)) - (3.0f64).ln() - 1.0).abs() < 1e-12);
    }

    fn fv(a: f64, b: f64) -> FeatureVector {
        let mut x = [0.0; 8];
        x[0] = a;
        x[1] = b;
        FeatureVector(x)
    }

    #[test]
    fn separable_set_is_learned() {
        let xs: Vec<_> = (0..20).map(|i| fv(i as f64, (i % 3) as f64)).collect();
        let ys: Vec<f64> = (0..20).map(|i| (i >= 10) as u8 as f64).collect();
        let m = train_linear(&xs, &ys, 2000, 1.0).unwrap();
        let acc = xs.iter().zip(&ys).filter(|(x, &y)| (m.predict(x) >= 0.5) == (y == 1.0)).count();
        assert_eq!(acc, 20);
    }

    #[test]
    fn zero_features_predict_prior() {
        let xs = vec![FeatureVector([0.0; 8]); 10];
        let ys: Vec<f64> = (0..10).map(|i| (i < 3) as u8 as f64).collect();
        let m = train_linear(&xs, &ys, 100, 0.5).unwrap();
        assert_eq!(m.weights, [0.0; 8]);
        assert!((m.predict(&xs[0]) - 0.3).abs() < 1e-12);
        assert!(train_linear(&xs, &[1.0; 10], 10, 0.1).is_err());
    }

    #[test]
    fn loss_decreases_over_first_epochs() {
        let mut rng = ChaCha8Rng::seed_from_u64(500);
        let xs: Vec<_> = (0..500).map(|_| fv(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| (x.0[0] + 0.5 * x.0[1] + rng.random_range(-1.0..1.0) > 0.0) as u8 as f64)
            .collect();
        let losses: Vec<f64> = (0..=10).map(|e| train_linear(&xs, &ys, e, 0.5).unwrap().loss(&xs, &ys)).collect();
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    }

    #[test]
    fn ip_baseline_takes_max_over_paragraphs() {
        let mk = |id: &str, h: &[u32], ps: &[&[u32]], l: u8| Article {
            id: id.into(),
            category: "c".into(),
            headline: t(h),
            paragraphs: ps.iter().map(|p| t(p)).collect(),
            label: Some(l.try_into().unwrap()),
            provenance: None,
        };
        let train = vec![
            mk("a", &[2, 3], &[&[2, 3, 4], &[2, 5]], 0),
            mk("b", &[2, 3], &[&[2, 3], &[7, 8, 9]], 1),
            mk("c", &[4, 5], &[&[4, 5, 6]], 0),
            mk("d", &[4, 5], &[&[4, 6], &[10, 11]], 1),
        ];
        let base = LinearBaseline::fit(&train, true, 200, 0.5).unwrap();
        let (score, per, top) = base.score(&train[1].headline, &train[1].paragraphs).unwrap();
        assert_eq!(per.len(), 2);
        assert_eq!(score, per.iter().cloned().fold(f64::MIN, f64::max));
        assert_eq!(top, argmax(&per));
        let flat = LinearBaseline::fit(&train, false, 200, 0.5).unwrap();
        assert!(flat.score(&train[0].headline, &train[0].paragraphs).unwrap().1.is_empty());
    }

    #[test]
    fn csv_has_fixed_header() {
        let mut out = Vec::new();
        write_features_csv(&mut out, &[("x".into(), Some(1.0), fv(0.5, 0.25))]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "id,label,tf_cosine,tfidf_cosine,unigram_overlap,bigram_overlap,headline_len,body_len,paragraphs,missing_headline_tokens"
        );
        assert_eq!(lines.next().unwrap(), "x,1,0.5,0.25,0,0,0,0,0,0");
    }
}
