use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    attention_pool, bilinear_logit, conv_encode_tokens, encode_rows, encode_tokens, lookup, mean_embedding, Attention,
    Conv, Gru, Scorer,
};
use crate::autodiff::{check_gradients_with, GradCheckConfig, GradCheckReport, Graph, ParamStore, Real, Tensor, Var};
use crate::textcorpus::{SentenceSplitter, Token};
use crate::{sha256_hex, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Recurrent dual encoder over flat word sequences.
    Rde,
    /// Convolutional dual encoder.
    Cde,
    /// Hierarchical recurrent dual encoder.
    Hrde,
    /// Hierarchical dual encoder with a bidirectional paragraph level and
    /// headline-conditioned attention.
    Ahde,
    /// Mean word embeddings per unit, one recurrent layer over units.
    Hre,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::Rde, ModelKind::Cde, ModelKind::Hrde, ModelKind::Ahde, ModelKind::Hre];

    pub fn tag(self) -> u8 {
        match self {
            ModelKind::Rde => 0,
            ModelKind::Cde => 1,
            ModelKind::Hrde => 2,
            ModelKind::Ahde => 3,
            ModelKind::Hre => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rde => "rde",
            ModelKind::Cde => "cde",
            ModelKind::Hrde => "hrde",
            ModelKind::Ahde => "ahde",
            ModelKind::Hre => "hre",
        }
    }

    /// Whether the model has a lower (word) and upper (unit) level. With
    /// independent paragraphs the lower units of these models are sentences.
    pub fn is_hierarchical(self) -> bool {
        matches!(self, ModelKind::Hrde | ModelKind::Ahde | ModelKind::Hre)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}")))
    }
}

/// Architecture hyperparameters. Fields a kind does not use are zero after
/// [`ModelConfig::canonical`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Score every (headline, paragraph) pair and take the maximum.
    pub ip: bool,
    pub vocab_size: usize,
    pub d_emb: usize,
    /// Word-level recurrent width (RDE, HRDE, AHDE).
    pub d_word: usize,
    /// Unit-level recurrent width per direction (HRDE, AHDE, HRE).
    pub d_para: usize,
    /// Attention width (AHDE); 0 means the attended state width.
    pub d_attn: usize,
    /// Filters per width (CDE).
    pub conv_filters: usize,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, vocab_size: usize) -> Self {
        ModelConfig {
            kind,
            ip: false,
            vocab_size,
            d_emb: 300,
            d_word: 64,
            d_para: 64,
            d_attn: 0,
            conv_filters: 64,
        }
    }

    pub fn canonical(mut self) -> Self {
        let (word, para, attn, conv) = match self.kind {
            ModelKind::Rde => (true, false, false, false),
            ModelKind::Cde => (false, false, false, true),
            ModelKind::Hrde => (true, true, false, false),
            ModelKind::Ahde => (true, true, true, false),
            ModelKind::Hre => (false, true, false, false),
        };
        if !word {
            self.d_word = 0;
        }
        if !para {
            self.d_para = 0;
        }
        if !conv {
            self.conv_filters = 0;
        }
        self.d_attn = if !attn {
            0
        } else if self.d_attn == 0 {
            2 * self.d_para
        } else {
            self.d_attn
        };
        self
    }

    fn validate(&self) -> Result<()> {
        let c = self.canonical();
        let needed = match c.kind {
            ModelKind::Rde => vec![c.d_word],
            ModelKind::Cde => vec![c.conv_filters],
            ModelKind::Hrde => vec![c.d_word, c.d_para],
            ModelKind::Ahde => vec![c.d_word, c.d_para, c.d_attn],
            ModelKind::Hre => vec![c.d_para],
        };
        if c.vocab_size < 2 || c.d_emb == 0 || needed.contains(&0) {
            return Err(Error::Config(format!("dimensions must be positive: {c:?}")));
        }
        Ok(())
    }

    /// Width of the encoded headline and body vectors.
    pub fn output_dims(&self) -> (usize, usize) {
        let c = self.canonical();
        match c.kind {
            ModelKind::Rde => (c.d_word, c.d_word),
            ModelKind::Cde => (3 * c.conv_filters, 3 * c.conv_filters),
            ModelKind::Hrde => (c.d_para, c.d_para),
            ModelKind::Ahde => (2 * c.d_para, 2 * c.d_para),
            ModelKind::Hre => (c.d_emb, c.d_para),
        }
    }

    /// Parameter names and shapes, in storage order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let c = self.canonical();
        let mut out = vec![("embedding".to_string(), vec![c.vocab_size, c.d_emb])];
        match c.kind {
            ModelKind::Rde => {
                out.extend(Gru::shapes("head.gru", c.d_emb, c.d_word));
                out.extend(Gru::shapes("body.gru", c.d_emb, c.d_word));
            }
            ModelKind::Cde => {
                out.extend(Conv::shapes("head.conv", c.d_emb, c.conv_filters));
                out.extend(Conv::shapes("body.conv", c.d_emb, c.conv_filters));
            }
            ModelKind::Hrde => {
                for side in ["head", "body"] {
                    out.extend(Gru::shapes(&format!("{side}.word"), c.d_emb, c.d_word));
                    out.extend(Gru::shapes(&format!("{side}.para"), c.d_word, c.d_para));
                }
            }
            ModelKind::Ahde => {
                for side in ["head", "body"] {
                    out.extend(Gru::shapes(&format!("{side}.word"), c.d_emb, c.d_word));
                    out.extend(Gru::shapes(&format!("{side}.para_fwd"), c.d_word, c.d_para));
                    out.extend(Gru::shapes(&format!("{side}.para_bwd"), c.d_word, c.d_para));
                }
                out.extend(Attention::shapes("attn", 2 * c.d_para, c.d_attn));
            }
            ModelKind::Hre => out.extend(Gru::shapes("body.para", c.d_emb, c.d_para)),
        }
        let (dh, db) = c.output_dims();
        out.extend(Scorer::shapes(dh, db));
        out
    }

    /// Splits a headline into model units.
    pub fn headline_units(&self, headline: &[Token], splitter: &SentenceSplitter) -> Vec<Vec<Token>> {
        if self.ip && self.kind.is_hierarchical() {
            splitter.split(headline)
        } else {
            vec![headline.to_vec()]
        }
    }

    /// Units of one body paragraph under independent-paragraph scoring.
    pub fn paragraph_units(&self, paragraph: &[Token], splitter: &SentenceSplitter) -> Vec<Vec<Token>> {
        if self.kind.is_hierarchical() {
            splitter.split(paragraph)
        } else {
            vec![paragraph.to_vec()]
        }
    }
}

/// One (headline, body) pair split into model units, with its 0/1 label.
#[derive(Debug, Clone, PartialEq)]
pub struct PairInstance {
    pub headline: Vec<Vec<Token>>,
    pub body: Vec<Vec<Token>>,
    pub label: f64,
}

impl ModelConfig {
    /// Training instances for one article: a single pair, or one pair per
    /// paragraph with independent paragraphs.
    pub fn article_instances(
        &self,
        headline: &[Token],
        paragraphs: &[Vec<Token>],
        label: f64,
        splitter: &SentenceSplitter,
    ) -> Vec<PairInstance> {
        let head = self.headline_units(headline, splitter);
        if self.ip {
            paragraphs
                .iter()
                .map(|p| PairInstance {
                    headline: head.clone(),
                    body: self.paragraph_units(p, splitter),
                    label,
                })
                .collect()
        } else {
            vec![PairInstance {
                headline: head,
                body: paragraphs.to_vec(),
                label,
            }]
        }
    }
}

/// Parameters bound to one graph.
pub struct Bound {
    vars: Vec<Var>,
    embedding: Var,
    scorer: Scorer,
    parts: Parts,
}

enum Parts {
    Rde { head: Gru, body: Gru },
    Cde { head: Conv, body: Conv },
    Hrde { head: [Gru; 2], body: [Gru; 2] },
    Ahde { head: [Gru; 3], body: [Gru; 3], attn: Attention },
    Hre { body: Gru },
}

impl Bound {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Model output for one article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub score: f64,
    /// Per-paragraph scores under independent-paragraph scoring; empty
    /// otherwise.
    pub paragraph_scores: Vec<f64>,
    /// Highest-scoring paragraph (lowest index on ties), or the most attended
    /// paragraph for AHDE without independent paragraphs.
    pub top_paragraph_index: Option<usize>,
    pub model_version: String,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Index of the maximum, lowest index on ties.
pub fn argmax(xs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        if best.is_none_or(|b| x > xs[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters<T> {
    config: ModelConfig,
    params: ParamStore<T>,
}

impl<T: Real> ModelParameters<T> {
    /// Random initialization, deterministic in `seed`. The padding row of
    /// the embedding table starts at zero.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let config = config.canonical();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, shape) in config.param_shapes() {
            let n: usize = shape.iter().product();
            let leaf = name.rsplit('.').next().unwrap_or_default();
            let bound = if name == "embedding" {
                0.5
            } else if leaf.starts_with('b') {
                0.0
            } else {
                1.0 / (shape[0] as f64).sqrt()
            };
            let mut data: Vec<f64> = (0..n)
                .map(|_| if bound > 0.0 { rng.random_range(-bound..bound) } else { 0.0 })
                .collect();
            if name == "embedding" {
                data[..config.d_emb].iter_mut().for_each(|x| *x = 0.0);
            }
            params.insert(name, Tensor::from_f64_slice(&shape, &data)?);
        }
        Ok(ModelParameters { config, params })
    }

    /// Wraps existing tensors after checking names and shapes against the
    /// kind's layout.
    pub fn from_parts(config: ModelConfig, params: ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let config = config.canonical();
        let expected = config.param_shapes();
        if expected.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "{} expects {} tensors, found {}",
                config.kind,
                expected.len(),
                params.len()
            )));
        }
        for (name, shape) in &expected {
            match params.get(name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => {
                    return Err(Error::Checkpoint(format!("{name}: expected shape {shape:?}, found {:?}", t.shape())))
                }
                None => return Err(Error::Checkpoint(format!("missing tensor {name}"))),
            }
        }
        // reorder into canonical storage order
        let mut ordered = ParamStore::new();
        for (name, _) in &expected {
            ordered.insert(name.clone(), params.get(name).expect("checked").clone());
        }
        Ok(ModelParameters {
            config,
            params: ordered,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn ip(&self) -> bool {
        self.config.ip
    }

    pub fn set_ip(&mut self, ip: bool) {
        self.config.ip = ip;
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn cast<U: Real>(&self) -> ModelParameters<U> {
        ModelParameters {
            config: self.config,
            params: self.params.cast(),
        }
    }

    /// Content-derived version string; changes whenever any tensor value
    /// changes.
    pub fn version(&self) -> String {
        let mut bytes = Vec::with_capacity(self.params.numel() * 8 + 64);
        bytes.push(self.config.kind.tag());
        bytes.push(self.config.ip as u8);
        for (name, t) in self.params.iter() {
            bytes.extend_from_slice(name.as_bytes());
            for &d in t.shape() {
                bytes.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in t.data() {
                bytes.extend_from_slice(&x.as_f64().to_bits().to_le_bytes());
            }
        }
        let digest = sha256_hex(&bytes);
        format!("{}{}-{}", self.config.kind, if self.config.ip { "-ip" } else { "" }, &digest[..12])
    }

    pub fn bind<'a>(&'a self, g: &mut Graph<'a, T>, requires_grad: bool) -> Result<Bound> {
        let vars = self.params.bind(g, requires_grad);
        let p = &self.params;
        let gru = |prefix: &str| Gru::bind(g, p, &vars, prefix);
        let parts = match self.config.kind {
            ModelKind::Rde => Parts::Rde {
                head: gru("head.gru")?,
                body: gru("body.gru")?,
            },
            ModelKind::Cde => Parts::Cde {
                head: Conv::bind(p, &vars, "head.conv")?,
                body: Conv::bind(p, &vars, "body.conv")?,
            },
            ModelKind::Hrde => Parts::Hrde {
                head: [gru("head.word")?, gru("head.para")?],
                body: [gru("body.word")?, gru("body.para")?],
            },
            ModelKind::Ahde => Parts::Ahde {
                head: [gru("head.word")?, gru("head.para_fwd")?, gru("head.para_bwd")?],
                body: [gru("body.word")?, gru("body.para_fwd")?, gru("body.para_bwd")?],
                attn: Attention::bind(p, &vars, "attn")?,
            },
            ModelKind::Hre => Parts::Hre {
                body: gru("body.para")?,
            },
        };
        Ok(Bound {
            embedding: lookup(p, &vars, "embedding")?,
            scorer: Scorer::bind(p, &vars)?,
            vars,
            parts,
        })
    }

    /// Encodes headline units into the headline vector `u_H`.
    pub fn encode_headline(&self, g: &mut Graph<'_, T>, b: &Bound, units: &[Vec<Token>]) -> Result<Var> {
        match &b.parts {
            Parts::Rde { head, .. } => Ok(encode_tokens(g, head, b.embedding, &flatten(units))?.0),
            Parts::Cde { head, .. } => conv_encode_tokens(g, head, b.embedding, &flatten(units)),
            Parts::Hrde { head, .. } => {
                let lower = word_level(g, &head[0], b.embedding, units)?;
                Ok(encode_rows(g, &head[1], lower)?.0)
            }
            Parts::Ahde { head, .. } => {
                let lower = word_level(g, &head[0], b.embedding, units)?;
                let (fwd, bwd) = bidirectional(g, &head[1], &head[2], lower)?;
                // last state of each direction
                g.concat(&[*fwd.last().expect("non-empty"), bwd[0]])
            }
            Parts::Hre { .. } => mean_embedding(g, b.embedding, &flatten(units)),
        }
    }

    /// Logit of incongruence between an encoded headline and body units.
    /// Also returns AHDE's attention weights over the units.
    pub fn body_logit(
        &self,
        g: &mut Graph<'_, T>,
        b: &Bound,
        head: Var,
        units: &[Vec<Token>],
    ) -> Result<(Var, Option<Var>)> {
        let mut attention = None;
        let body = match &b.parts {
            Parts::Rde { body, .. } => encode_tokens(g, body, b.embedding, &flatten(units))?.0,
            Parts::Cde { body, .. } => conv_encode_tokens(g, body, b.embedding, &flatten(units))?,
            Parts::Hrde { body, .. } => {
                let lower = word_level(g, &body[0], b.embedding, units)?;
                encode_rows(g, &body[1], lower)?.0
            }
            Parts::Ahde { body, attn, .. } => {
                let lower = word_level(g, &body[0], b.embedding, units)?;
                let (fwd, bwd) = bidirectional(g, &body[1], &body[2], lower)?;
                let states = fwd
                    .iter()
                    .zip(&bwd)
                    .map(|(&f, &r)| g.concat(&[f, r]))
                    .collect::<Result<Vec<_>>>()?;
                let (weights, context) = attention_pool(g, attn, &states, head)?;
                attention = Some(weights);
                context
            }
            Parts::Hre { body } => {
                let means = units
                    .iter()
                    .map(|u| mean_embedding(g, b.embedding, u))
                    .collect::<Result<Vec<_>>>()?;
                let rows = stack(g, &means)?;
                encode_rows(g, body, rows)?.0
            }
        };
        Ok((bilinear_logit(g, &b.scorer, head, body)?, attention))
    }

    /// Logit for one (headline units, body units) pair.
    pub fn pair_logit(&self, g: &mut Graph<'_, T>, b: &Bound, headline: &[Vec<Token>], body: &[Vec<Token>]) -> Result<Var> {
        let head = self.encode_headline(g, b, headline)?;
        Ok(self.body_logit(g, b, head, body)?.0)
    }

    /// Binary cross-entropy of one training instance.
    pub fn pair_loss(
        &self,
        g: &mut Graph<'_, T>,
        b: &Bound,
        headline: &[Vec<Token>],
        body: &[Vec<Token>],
        label: f64,
    ) -> Result<Var> {
        let z = self.pair_logit(g, b, headline, body)?;
        g.bce_with_logits(z, T::from_f64(label))
    }

    /// Mean binary cross-entropy over a batch.
    pub fn batch_loss(&self, g: &mut Graph<'_, T>, b: &Bound, batch: &[PairInstance]) -> Result<Var> {
        if batch.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut total = self.pair_loss(g, b, &batch[0].headline, &batch[0].body, batch[0].label)?;
        for inst in &batch[1..] {
            let l = self.pair_loss(g, b, &inst.headline, &inst.body, inst.label)?;
            total = g.add(total, l)?;
        }
        Ok(g.scale(total, T::from_f64(1.0 / batch.len() as f64)))
    }

    /// Scores an article; dispatches to [`Self::ip_score`] when the model
    /// uses independent paragraphs.
    pub fn score_article(
        &self,
        headline: &[Token],
        paragraphs: &[Vec<Token>],
        splitter: &SentenceSplitter,
    ) -> Result<ScoredPrediction> {
        if self.config.ip {
            return self.ip_score(headline, paragraphs, splitter);
        }
        if paragraphs.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut g = Graph::new();
        let b = self.bind(&mut g, false)?;
        let head = self.encode_headline(&mut g, &b, &[headline.to_vec()])?;
        let (z, attn) = self.body_logit(&mut g, &b, head, paragraphs)?;
        let top = attn.and_then(|a| argmax(&g.value(a).to_f64_vec()));
        Ok(ScoredPrediction {
            score: sigmoid(g.value(z).data()[0].as_f64()),
            paragraph_scores: Vec::new(),
            top_paragraph_index: top,
            model_version: self.version(),
        })
    }

    /// Scores each (headline, paragraph) pair independently; the article
    /// score is the maximum.
    pub fn ip_score(
        &self,
        headline: &[Token],
        paragraphs: &[Vec<Token>],
        splitter: &SentenceSplitter,
    ) -> Result<ScoredPrediction> {
        if paragraphs.is_empty() {
            return Err(Error::EmptySequence);
        }
        let cfg = ModelConfig { ip: true, ..self.config };
        let mut g = Graph::new();
        let b = self.bind(&mut g, false)?;
        let head = self.encode_headline(&mut g, &b, &cfg.headline_units(headline, splitter))?;
        let mut scores = Vec::with_capacity(paragraphs.len());
        for p in paragraphs {
            let (z, _) = self.body_logit(&mut g, &b, head, &cfg.paragraph_units(p, splitter))?;
            scores.push(sigmoid(g.value(z).data()[0].as_f64()));
        }
        let top = argmax(&scores).expect("non-empty");
        Ok(ScoredPrediction {
            score: scores[top],
            top_paragraph_index: Some(top),
            paragraph_scores: scores,
            model_version: self.version(),
        })
    }
}

fn flatten(units: &[Vec<Token>]) -> Vec<Token> {
    units.concat()
}

fn stack<T: Real>(g: &mut Graph<'_, T>, rows: &[Var]) -> Result<Var> {
    if rows.is_empty() {
        return Err(Error::EmptySequence);
    }
    g.stack_rows(rows)
}

/// Last word-level state of every unit, stacked as `[units, d_word]`.
fn word_level<T: Real>(g: &mut Graph<'_, T>, gru: &Gru, embedding: Var, units: &[Vec<Token>]) -> Result<Var> {
    let finals = units
        .iter()
        .map(|u| encode_tokens(g, gru, embedding, u).map(|(h, _)| h))
        .collect::<Result<Vec<_>>>()?;
    stack(g, &finals)
}

/// Forward and backward recurrences over the rows of `inputs`; both state
/// lists are in input order.
fn bidirectional<T: Real>(g: &mut Graph<'_, T>, fwd: &Gru, bwd: &Gru, inputs: Var) -> Result<(Vec<Var>, Vec<Var>)> {
    let n = g.shape(inputs)[0];
    let (_, forward) = encode_rows(g, fwd, inputs)?;
    let rows = (0..n).rev().map(|i| g.row(inputs, i)).collect::<Result<Vec<_>>>()?;
    let reversed = g.stack_rows(&rows)?;
    let (_, mut backward) = encode_rows(g, bwd, reversed)?;
    backward.reverse();
    Ok((forward, backward))
}

/// Finite-difference check of the mean batch loss with respect to every
/// model parameter.
pub fn check_model_gradients(
    model: &ModelParameters<f64>,
    batch: &[PairInstance],
    cfg: GradCheckConfig,
) -> Result<GradCheckReport> {
    let config = *model.config();
    let mut params = model.params().clone();
    let analytic = |p: &ParamStore<f64>| -> Result<Vec<Tensor<f64>>> {
        let m = ModelParameters::from_parts(config, p.clone())?;
        let mut g = Graph::new();
        let b = m.bind(&mut g, true)?;
        let loss = m.batch_loss(&mut g, &b, batch)?;
        let mut grads = g.backward(loss)?;
        Ok(b.vars()
            .iter()
            .zip(m.params().tensors())
            .map(|(&v, t)| grads.take(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
            .collect())
    };
    let loss = |p: &ParamStore<f64>| -> Result<f64> {
        let m = ModelParameters::from_parts(config, p.clone())?;
        let mut g = Graph::new();
        let b = m.bind(&mut g, false)?;
        let l = m.batch_loss(&mut g, &b, batch)?;
        Ok(g.value(l).data()[0])
    };
    check_gradients_with(&mut params, analytic, loss, cfg)
}
