use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::auroc;
use crate::autodiff::{clip_global_norm, Adam, AdamConfig, Graph, Real, Tensor};
use crate::autodiff::Var;
use crate::encoders::{Bound, ModelConfig, ModelParameters, PairInstance};
use crate::textcorpus::{Article, SentenceSplitter, Token};
use crate::{Error, Result};

/// How article labels reach the per-pair scores during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Every (headline, unit) pair is an instance carrying the article label.
    #[default]
    Paragraph,
    /// One instance per article whose logit is the maximum over its pairs.
    Max,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paragraph" => Ok(Objective::Paragraph),
            "max" => Ok(Objective::Max),
            other => Err(Error::Config(format!("objective must be paragraph or max, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Tokens kept per paragraph (and headline).
    pub max_paragraph_tokens: usize,
    pub max_paragraphs: usize,
    /// Evaluate on the dev split every this many epochs, and after the last.
    pub eval_every: usize,
    pub clip_norm: f64,
    #[serde(default)]
    pub objective: Objective,
    /// Decoupled weight decay; zero disables it.
    #[serde(default)]
    pub weight_decay: f64,
}

impl TrainConfig {
    pub fn new(model: ModelConfig, seed: u64) -> Self {
        TrainConfig {
            model,
            batch_size: 32,
            epochs: 5,
            lr: AdamConfig::default().lr,
            seed,
            max_paragraph_tokens: 200,
            max_paragraphs: 40,
            eval_every: 1,
            clip_norm: 5.0,
            objective: Objective::Paragraph,
            weight_decay: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.batch_size, self.max_paragraph_tokens, self.max_paragraphs, self.eval_every];
        if positive.contains(&0) || !(self.lr > 0.0) || !(self.clip_norm > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("training settings must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Headline and paragraphs cut to the training limits.
    pub fn truncate(&self, article: &Article) -> (Vec<Token>, Vec<Vec<Token>>) {
        let cut = |s: &[Token]| s[..s.len().min(self.max_paragraph_tokens)].to_vec();
        let paragraphs = article.paragraphs.iter().take(self.max_paragraphs).map(|p| cut(p)).collect();
        (cut(&article.headline), paragraphs)
    }
}

/// Instances of each labeled article, grouped per article.
pub fn training_instances(
    cfg: &TrainConfig,
    articles: &[Article],
    splitter: &SentenceSplitter,
) -> Result<Vec<Vec<PairInstance>>> {
    articles
        .iter()
        .map(|a| {
            let label = a.label.ok_or_else(|| Error::InvalidArticle {
                id: a.id.clone(),
                reason: "missing label".into(),
            })?;
            let (h, ps) = cfg.truncate(a);
            Ok(cfg.model.article_instances(&h, &ps, label.as_f64(), splitter))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: Option<f64>,
    pub dev_auroc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Best-dev-AUROC parameters, or the final ones without dev evaluation.
    pub model: ModelParameters<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    /// Set when a non-finite loss or gradient stopped training; `model` is
    /// then the last good state.
    pub diverged: Option<String>,
}

/// Mean loss over instances, and each article's score (its maximum
/// instance probability).
pub fn evaluate_instances<T: Real>(model: &ModelParameters<T>, groups: &[Vec<PairInstance>]) -> Result<(f64, Vec<f64>)> {
    let mut total = 0.0;
    let mut count = 0usize;
    let mut scores = Vec::with_capacity(groups.len());
    for group in groups {
        let mut best = f64::NEG_INFINITY;
        for inst in group {
            let mut g = Graph::new();
            let b = model.bind(&mut g, false)?;
            let z = model.pair_logit(&mut g, &b, &inst.headline, &inst.body)?;
            let loss = g.bce_with_logits(z, T::from_f64(inst.label))?;
            total += g.value(loss).data()[0].as_f64();
            count += 1;
            best = best.max(g.value(z).data()[0].as_f64());
        }
        scores.push(1.0 / (1.0 + (-best).exp()));
    }
    if count == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok((total / count as f64, scores))
}

/// Mean over units of the cross-entropy of each unit's largest logit. A
/// unit of one pair is an ordinary pair loss.
fn units_loss<T: Real>(
    model: &ModelParameters<T>,
    g: &mut Graph<'_, T>,
    b: &Bound,
    units: &[&[PairInstance]],
) -> Result<Var> {
    let mut total = None;
    for unit in units {
        let mut top: Option<(Var, f64)> = None;
        for inst in unit.iter() {
            let z = model.pair_logit(g, b, &inst.headline, &inst.body)?;
            let v = g.value(z).data()[0].as_f64();
            if top.is_none_or(|(_, best)| v > best) {
                top = Some((z, v));
            }
        }
        let (z, _) = top.ok_or(Error::EmptySequence)?;
        let label = unit[0].label;
        let l = g.bce_with_logits(z, T::from_f64(label))?;
        total = Some(match total {
            Some(t) => g.add(t, l)?,
            None => l,
        });
    }
    let total = total.ok_or(Error::EmptySequence)?;
    Ok(g.scale(total, T::from_f64(1.0 / units.len() as f64)))
}

/// One optimizer step on a batch; returns the batch's mean loss.
fn train_step<T: Real>(
    model: &mut ModelParameters<T>,
    adam: &mut Adam<T>,
    batch: &[&[PairInstance]],
    clip_norm: f64,
) -> Result<f64> {
    let (loss, mut grads) = {
        let mut g = Graph::new();
        let b = model.bind(&mut g, true)?;
        let loss = units_loss(model, &mut g, &b, batch)?;
        let value = g.value(loss).data()[0].as_f64();
        if !value.is_finite() {
            return Err(Error::Divergence(format!("loss is {value}")));
        }
        let mut gr = g.backward(loss)?;
        let grads: Vec<Tensor<T>> = b
            .vars()
            .iter()
            .zip(model.params().tensors())
            .map(|(&v, t)| gr.take(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
            .collect();
        (value, grads)
    };
    // the padding row never moves
    if let Some(i) = model.params().position("embedding") {
        let d = model.config().d_emb;
        grads[i].data_mut()[..d].iter_mut().for_each(|x| *x = T::zero());
    }
    clip_global_norm(&mut grads, clip_norm);
    adam.step(model.params_mut().tensors_mut(), &grads)?;
    if let Some((name, _)) = model.params().iter().find(|(_, t)| !t.is_finite()) {
        return Err(Error::Divergence(format!("{name} became non-finite")));
    }
    Ok(loss)
}

/// Minimizes binary cross-entropy with Adam; keeps the checkpoint with the
/// best dev AUROC. `on_epoch` sees every history record as it is produced.
pub fn train<T: Real>(
    cfg: &TrainConfig,
    train_set: &[Article],
    dev_set: &[Article],
    splitter: &SentenceSplitter,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let mut model = ModelParameters::<T>::init(cfg.model, cfg.seed)?;
    let mut history = Vec::new();
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            model,
            history,
            best_epoch: None,
            diverged: None,
        });
    }
    let groups = training_instances(cfg, train_set, splitter)?;
    let units: Vec<&[PairInstance]> = match cfg.objective {
        Objective::Paragraph => groups.iter().flatten().map(std::slice::from_ref).collect(),
        Objective::Max => groups.iter().filter(|g| !g.is_empty()).map(Vec::as_slice).collect(),
    };
    if units.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let dev = training_instances(cfg, dev_set, splitter)?;
    let dev_labels: Vec<bool> = dev_set.iter().map(|a| a.label.is_some_and(|l| l.is_incongruent())).collect();

    let adam_cfg = AdamConfig {
        lr: cfg.lr,
        weight_decay: cfg.weight_decay,
        ..Default::default()
    };
    let mut adam = Adam::new(adam_cfg, model.params().tensors());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..units.len()).collect();
    let mut best: Option<(f64, usize, ModelParameters<T>)> = None;
    let mut diverged = None;

    'epochs: for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&[PairInstance]> = chunk.iter().map(|&i| units[i]).collect();
            let before = model.clone();
            match train_step(&mut model, &mut adam, &batch, cfg.clip_norm) {
                Ok(l) => sum += l * batch.len() as f64,
                Err(Error::Divergence(msg)) => {
                    model = before;
                    diverged = Some(format!("divergence in epoch {epoch}: {msg}"));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let mut record = EpochRecord {
            epoch,
            train_loss: sum / units.len() as f64,
            dev_loss: None,
            dev_auroc: None,
        };
        if !dev.is_empty() && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            let (loss, scores) = evaluate_instances(&model, &dev)?;
            let a = auroc(&scores, &dev_labels)?;
            record.dev_loss = Some(loss);
            record.dev_auroc = Some(a);
            if best.as_ref().is_none_or(|(b, _, _)| a > *b) {
                best = Some((a, epoch, model.clone()));
            }
        }
        on_epoch(&record);
        history.push(record);
    }
    let (model, best_epoch) = match best {
        Some((_, e, m)) => (m, Some(e)),
        None => (model, None),
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        diverged,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV with columns `epoch,train_loss,dev_loss,dev_auroc`; missing dev
/// values are empty.
pub fn write_history_csv<W: Write>(mut w: W, history: &[EpochRecord]) -> std::io::Result<()> {
    writeln!(w, "epoch,train_loss,dev_loss,dev_auroc")?;
    for r in history {
        writeln!(w, "{},{},{},{}", r.epoch, r.train_loss, opt(r.dev_loss), opt(r.dev_auroc))?;
    }
    Ok(())
}

/// Scores articles in full (no truncation).
pub fn score_articles<T: Real>(
    model: &ModelParameters<T>,
    articles: &[Article],
    splitter: &SentenceSplitter,
) -> Result<Vec<f64>> {
    articles
        .iter()
        .map(|a| model.score_article(&a.headline, &a.paragraphs, splitter).map(|s| s.score))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{build_dataset, make_synthetic_corpus, Blocklist, DonorCategory, GenConfig};
    use crate::encoders::{checkpoint_bytes, ModelKind};

    fn toy(n: usize, seed: u64) -> Vec<Article> {
        let (corpus, _) = make_synthetic_corpus(n, 3, 30, seed).unwrap();
        let mut g = GenConfig::new(seed);
        g.donor_category = DonorCategory::Different;
        g.split_fractions = [0.6, 0.2, 0.2];
        let d = build_dataset(&corpus, &g, &Blocklist::default()).unwrap();
        d.train.into_iter().chain(d.dev).chain(d.test).collect()
    }

    fn tiny(kind: ModelKind, ip: bool) -> ModelConfig {
        ModelConfig {
            kind,
            ip,
            vocab_size: 2 + 3 * 30,
            d_emb: 8,
            d_word: 8,
            d_para: 8,
            d_attn: 0,
            conv_filters: 4,
        }
    }

    fn quick(kind: ModelKind, ip: bool, epochs: usize) -> TrainConfig {
        let mut c = TrainConfig::new(tiny(kind, ip), 7);
        c.epochs = epochs;
        c.lr = 1e-2;
        c.batch_size = 8;
        c.max_paragraph_tokens = 12;
        c.max_paragraphs = 4;
        c
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let data = toy(20, 1);
        let cfg = quick(ModelKind::Rde, false, 0);
        let out = train::<f32>(&cfg, &data, &[], &SentenceSplitter::default(), |_| {}).unwrap();
        assert!(out.history.is_empty());
        assert_eq!(out.model, ModelParameters::init(cfg.model, cfg.seed).unwrap());
    }

    #[test]
    fn first_epoch_lowers_training_loss() {
        let data = toy(50, 2);
        let cfg = quick(ModelKind::Ahde, true, 1);
        let split = SentenceSplitter::default();
        let groups = training_instances(&cfg, &data, &split).unwrap();
        let init = ModelParameters::<f64>::init(cfg.model, cfg.seed).unwrap();
        let (before, _) = evaluate_instances(&init, &groups).unwrap();
        let out = train::<f64>(&cfg, &data, &[], &split, |_| {}).unwrap();
        let (after, _) = evaluate_instances(&out.model, &groups).unwrap();
        assert!(after < before, "{after} >= {before}");
        assert_eq!(out.history.len(), 1);
    }

    fn pair_logit_value(model: &ModelParameters<f64>, inst: &PairInstance) -> f64 {
        let mut g = Graph::new();
        let b = model.bind(&mut g, false).unwrap();
        let z = model.pair_logit(&mut g, &b, &inst.headline, &inst.body).unwrap();
        g.value(z).data()[0]
    }

    #[test]
    fn max_objective_uses_largest_logit() {
        let data = toy(12, 5);
        let cfg = quick(ModelKind::Ahde, true, 1);
        let split = SentenceSplitter::default();
        let groups = training_instances(&cfg, &data, &split).unwrap();
        let model = ModelParameters::<f64>::init(cfg.model, 3).unwrap();
        let bce = |z: f64, y: f64| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();

        let units: Vec<&[PairInstance]> = groups.iter().map(Vec::as_slice).collect();
        let mut g = Graph::new();
        let b = model.bind(&mut g, false).unwrap();
        let l = units_loss(&model, &mut g, &b, &units).unwrap();
        let got = g.value(l).data()[0];
        let want = groups
            .iter()
            .map(|grp| {
                let z = grp.iter().map(|i| pair_logit_value(&model, i)).fold(f64::NEG_INFINITY, f64::max);
                bce(z, grp[0].label)
            })
            .sum::<f64>()
            / groups.len() as f64;
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");

        let single: Vec<&[PairInstance]> = groups.iter().flatten().map(std::slice::from_ref).collect();
        let flat: Vec<PairInstance> = groups.iter().flatten().cloned().collect();
        let mut g = Graph::new();
        let b = model.bind(&mut g, false).unwrap();
        let a = units_loss(&model, &mut g, &b, &single).unwrap();
        let c = model.batch_loss(&mut g, &b, &flat).unwrap();
        assert!((g.value(a).data()[0] - g.value(c).data()[0]).abs() < 1e-12);
    }

    #[test]
    fn max_objective_trains() {
        let data = toy(50, 2);
        let mut cfg = quick(ModelKind::Ahde, true, 1);
        cfg.objective = Objective::Max;
        let split = SentenceSplitter::default();
        let groups = training_instances(&cfg, &data, &split).unwrap();
        let units: Vec<&[PairInstance]> = groups.iter().map(Vec::as_slice).collect();
        let loss = |m: &ModelParameters<f64>| {
            let mut g = Graph::new();
            let b = m.bind(&mut g, false).unwrap();
            let l = units_loss(m, &mut g, &b, &units).unwrap();
            g.value(l).data()[0]
        };
        let before = loss(&ModelParameters::init(cfg.model, cfg.seed).unwrap());
        let out = train::<f64>(&cfg, &data, &[], &split, |_| {}).unwrap();
        assert!(loss(&out.model) < before);
        assert_eq!("max".parse::<Objective>().unwrap(), Objective::Max);
        assert!("mean".parse::<Objective>().is_err());
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let data = toy(30, 3);
        let (train_set, dev_set) = data.split_at(20);
        let cfg = quick(ModelKind::Hrde, false, 2);
        let split = SentenceSplitter::default();
        let a = train::<f64>(&cfg, train_set, dev_set, &split, |_| {}).unwrap();
        let b = train::<f64>(&cfg, train_set, dev_set, &split, |_| {}).unwrap();
        let bits = |h: &[EpochRecord]| {
            h.iter()
                .map(|r| (r.train_loss.to_bits(), r.dev_loss.map(f64::to_bits), r.dev_auroc.map(f64::to_bits)))
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a.history), bits(&b.history));
        assert_eq!(checkpoint_bytes(&a.model), checkpoint_bytes(&b.model));
        assert!(a.history.iter().all(|r| r.dev_auroc.is_some()));
    }

    #[test]
    fn keeps_best_dev_checkpoint() {
        let data = toy(40, 4);
        let (train_set, dev_set) = data.split_at(28);
        let mut cfg = quick(ModelKind::Cde, false, 3);
        cfg.lr = 0.05;
        let split = SentenceSplitter::default();
        let out = train::<f64>(&cfg, train_set, dev_set, &split, |_| {}).unwrap();
        let best = out.best_epoch.unwrap();
        let best_auroc = out.history[best - 1].dev_auroc.unwrap();
        assert!(out.history.iter().all(|r| r.dev_auroc.unwrap() <= best_auroc));
        let groups = training_instances(&cfg, dev_set, &split).unwrap();
        let labels: Vec<bool> = dev_set.iter().map(|a| a.label.unwrap().is_incongruent()).collect();
        let (_, scores) = evaluate_instances(&out.model, &groups).unwrap();
        assert_eq!(auroc(&scores, &labels).unwrap(), best_auroc);
    }

    #[test]
    fn divergence_keeps_last_good_state() {
        let data = toy(20, 5);
        let mut cfg = quick(ModelKind::Rde, false, 2);
        cfg.lr = f64::MAX;
        cfg.clip_norm = f64::MAX;
        let out = train::<f32>(&cfg, &data, &[], &SentenceSplitter::default(), |_| {}).unwrap();
        let msg = out.diverged.expect("diverges");
        assert!(msg.contains("divergence"), "{msg}");
        assert!(out.model.params().tensors().iter().all(|t| t.is_finite()));
    }

    #[test]
    fn padding_row_stays_zero() {
        let mut data = toy(20, 6);
        for a in &mut data {
            a.paragraphs[0].insert(0, Token::PAD);
        }
        let cfg = quick(ModelKind::Hre, false, 1);
        let out = train::<f32>(&cfg, &data, &[], &SentenceSplitter::default(), |_| {}).unwrap();
        let e = out.model.params().get("embedding").unwrap();
        assert!(e.data()[..8].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn truncation_limits() {
        let mut cfg = quick(ModelKind::Rde, false, 1);
        cfg.max_paragraphs = 2;
        cfg.max_paragraph_tokens = 3;
        let a = &toy(10, 7)[0];
        let (h, ps) = cfg.truncate(a);
        assert_eq!(h.len(), 3);
        assert_eq!(ps.len(), 2);
        assert!(ps.iter().all(|p| p.len() == 3));
    }

    #[test]
    fn history_csv_format() {
        let mut out = Vec::new();
        let h = vec![
            EpochRecord { epoch: 1, train_loss: 0.5, dev_loss: None, dev_auroc: None },
            EpochRecord { epoch: 2, train_loss: 0.25, dev_loss: Some(0.3), dev_auroc: Some(0.75) },
        ];
        write_history_csv(&mut out, &h).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "epoch,train_loss,dev_loss,dev_auroc\n1,0.5,,\n2,0.25,0.3,0.75\n");
    }
}
