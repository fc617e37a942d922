use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use incongruity_core::datagen::{build_dataset, ip_transform, make_synthetic_corpus, write_dataset_splits, Blocklist, GenConfig};
use incongruity_core::encoders::save_checkpoint;
use incongruity_core::features::LinearBaseline;
use incongruity_core::pipeline::{auroc, train, write_history_csv, EvalReport, TrainConfig, TrainOutcome};
use incongruity_core::textcorpus::{
    article_from_paragraphs, build_vocabulary, corpus_stats, read_corpus_vec, write_corpus, Label, SentenceSplitter,
};
use incongruity_core::{Article, Error, ModelConfig, Real, Vocabulary};

use crate::args::{
    Command, EvalArgs, GenerateArgs, IpExpandArgs, Precision, PrepArgs, ScoreArgs, ServeArgs, StatsArgs, SynthArgs,
    TrainArgs,
};
use crate::manifest::RunManifest;
use crate::predict::{LoadedModel, Scorer};
use crate::service::{router, watch_checkpoint, AppState, ServiceConfig};
use crate::{CliError, CliResult};

pub fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Prep(a) => prep(a, err),
        Command::Stats(a) => stats(a, out),
        Command::Generate(a) => generate(a, err),
        Command::IpExpand(a) => ip_expand(a, err),
        Command::Train(a) => train_cmd(a, err),
        Command::Eval(a) => eval(a, out),
        Command::Score(a) => score(a, out),
        Command::Serve(a) => serve(a, err),
        Command::SynthCorpus(a) => synth(a, err),
    }
}

fn mkdir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn say(w: &mut dyn Write, msg: impl std::fmt::Display) {
    let _ = writeln!(w, "{msg}");
}

fn print_json(out: &mut dyn Write, v: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(Error::from)?;
    writeln!(out, "{text}").map_err(|e| CliError::Failed(format!("writing output: {e}")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArticle {
    id: String,
    #[serde(default)]
    category: String,
    headline: String,
    body: Option<String>,
    paragraphs: Option<Vec<String>>,
    label: Option<Label>,
}

impl RawArticle {
    fn paragraphs(&self) -> Vec<&str> {
        match (&self.body, &self.paragraphs) {
            (Some(b), _) => b.lines().filter(|l| !l.trim().is_empty()).collect(),
            (None, Some(ps)) => ps.iter().map(String::as_str).collect(),
            (None, None) => Vec::new(),
        }
    }
}

fn read_raw(path: &Path) -> CliResult<Vec<RawArticle>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawArticle = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        if raw.body.is_some() && raw.paragraphs.is_some() {
            return Err(Error::Malformed {
                line: i + 1,
                message: "give either body or paragraphs, not both".into(),
            }
            .into());
        }
        out.push(raw);
    }
    Ok(out)
}

fn prep(a: PrepArgs, err: &mut dyn Write) -> CliResult<()> {
    let raw = read_raw(&a.input)?;
    let vocab = match &a.vocab {
        Some(p) => Vocabulary::read_tsv(p)?,
        None => {
            let texts = raw.iter().flat_map(|r| std::iter::once(r.headline.as_str()).chain(r.paragraphs()));
            build_vocabulary(texts, a.min_count)?
        }
    };
    let mut articles = Vec::with_capacity(raw.len());
    let mut skipped = Vec::new();
    for r in &raw {
        match article_from_paragraphs(&r.id, &r.headline, &r.paragraphs(), &vocab) {
            Ok(mut article) => {
                article.category = r.category.clone();
                article.label = r.label;
                articles.push(article);
            }
            Err(Error::InvalidArticle { id, reason }) => skipped.push(json!({ "id": id, "reason": reason })),
            Err(e) => return Err(e.into()),
        }
    }
    mkdir(&a.out_dir)?;
    let corpus = a.out_dir.join("corpus.jsonl");
    write_corpus(&corpus, &articles)?;
    let vocab_path = a.out_dir.join("vocab.tsv");
    vocab.write_tsv(&vocab_path)?;
    let mut m = RunManifest::new("prep", None, json!({ "min_count": a.min_count }));
    m.input("raw", &a.input)?;
    if let Some(v) = &a.vocab {
        m.input("vocab", v)?;
    }
    m.output(&corpus)?.output(&vocab_path)?;
    m.details = json!({ "articles": articles.len(), "vocab_size": vocab.len(), "skipped": skipped });
    m.write(&a.out_dir)?;
    say(
        err,
        format_args!(
            "wrote {} articles ({} skipped), vocabulary of {}",
            articles.len(),
            skipped.len(),
            vocab.len()
        ),
    );
    Ok(())
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> CliResult<()> {
    let corpus = read_corpus_vec(&a.corpus)?;
    print_json(out, &corpus_stats(&corpus)?)
}

fn synth(a: SynthArgs, err: &mut dyn Write) -> CliResult<()> {
    let (corpus, vocab) = make_synthetic_corpus(a.articles, a.topics, a.words_per_topic, a.seed)?;
    mkdir(&a.out_dir)?;
    let corpus_path = a.out_dir.join("corpus.jsonl");
    write_corpus(&corpus_path, &corpus)?;
    let vocab_path = a.out_dir.join("vocab.tsv");
    vocab.write_tsv(&vocab_path)?;
    let settings = json!({ "articles": a.articles, "topics": a.topics, "words_per_topic": a.words_per_topic });
    let mut m = RunManifest::new("synth-corpus", Some(a.seed), settings);
    m.output(&corpus_path)?.output(&vocab_path)?;
    m.write(&a.out_dir)?;
    say(err, format_args!("wrote {} synthetic articles to {}", corpus.len(), a.out_dir.display()));
    Ok(())
}

fn generate(a: GenerateArgs, err: &mut dyn Write) -> CliResult<()> {
    let [train, dev, test] = a.split[..] else {
        return Err(CliError::Usage("--split takes three fractions".into()));
    };
    let config = GenConfig {
        seed: a.seed,
        donor_min: a.donor_min,
        donor_max: a.donor_max,
        mode: a.mode.into(),
        donor_category: a.donor_category.into(),
        split_fractions: [train, dev, test],
        per_class: a.per_class,
        advert_blocklist: a.blocklist.clone(),
    };
    config.validate()?;
    let corpus = read_corpus_vec(&a.corpus)?;
    let blocklist = match (&a.blocklist, &a.vocab) {
        (Some(b), Some(v)) => Blocklist::read(b, &Vocabulary::read_tsv(v)?)?,
        _ => Blocklist::default(),
    };
    let dataset = build_dataset(&corpus, &config, &blocklist)?;
    mkdir(&a.out_dir)?;
    let dm = write_dataset_splits(&a.out_dir, &dataset, &config)?;
    let mut m = RunManifest::new("generate", Some(a.seed), serde_json::to_value(&config).map_err(Error::from)?);
    m.input("corpus", &a.corpus)?;
    if let Some(b) = &a.blocklist {
        m.input("blocklist", b)?;
    }
    if let Some(v) = &a.vocab {
        m.input("vocab", v)?;
    }
    for name in ["train", "dev", "test"] {
        m.output(a.out_dir.join(format!("{name}.jsonl")))?;
    }
    m.details = serde_json::to_value(&dm).map_err(Error::from)?;
    m.write(&a.out_dir)?;
    for (name, c) in &dm.counts {
        say(err, format_args!("{name}: {} articles, {} incongruent", c.total, c.incongruent));
    }
    say(err, format_args!("content hash {}", dm.content_hash));
    Ok(())
}

fn ip_expand(a: IpExpandArgs, err: &mut dyn Write) -> CliResult<()> {
    let splitter = match (&a.vocab, a.sentences) {
        (Some(v), true) => Some(SentenceSplitter::new(&Vocabulary::read_tsv(v)?)),
        _ => None,
    };
    let mut names = BTreeSet::new();
    for p in &a.input {
        let name = p.file_name().ok_or_else(|| CliError::Usage(format!("{} is not a file", p.display())))?;
        if !names.insert(name.to_owned()) {
            return Err(CliError::Usage(format!("two inputs are named {}", name.to_string_lossy())));
        }
    }
    mkdir(&a.out_dir)?;
    let mut m = RunManifest::new("ip-expand", None, json!({ "sentences": a.sentences }));
    for p in &a.input {
        let articles = read_corpus_vec(p)?;
        let expanded = ip_transform(&articles, splitter.as_ref());
        let target = a.out_dir.join(p.file_name().expect("checked"));
        if target.canonicalize().ok() == p.canonicalize().ok() {
            return Err(CliError::Usage(format!("output would overwrite input {}", p.display())));
        }
        write_corpus(&target, &expanded)?;
        m.input(&p.display().to_string(), p)?;
        m.output(&target)?;
        say(err, format_args!("{}: {} articles -> {}", p.display(), articles.len(), expanded.len()));
    }
    m.write(&a.out_dir)?;
    Ok(())
}

fn train_cmd(a: TrainArgs, err: &mut dyn Write) -> CliResult<()> {
    let vocab = Vocabulary::read_tsv(&a.vocab)?;
    let train_set = read_corpus_vec(&a.train)?;
    let dev_set = match &a.dev {
        Some(p) => read_corpus_vec(p)?,
        None => Vec::new(),
    };
    mkdir(&a.out_dir)?;
    let Some(kind) = a.model.kind() else {
        return train_linear(&a, &train_set, &dev_set, err);
    };
    let model = ModelConfig {
        kind,
        ip: a.ip,
        vocab_size: vocab.len(),
        d_emb: a.d_emb,
        d_word: a.d_word.unwrap_or(a.d_h),
        d_para: a.d_para.unwrap_or(a.d_h),
        d_attn: a.d_attn,
        conv_filters: a.conv_filters,
    };
    let mut cfg = TrainConfig::new(model, a.seed);
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.lr = a.lr.unwrap_or(cfg.lr);
    cfg.batch_size = a.batch_size;
    cfg.max_paragraph_tokens = a.max_paragraph_tokens;
    cfg.max_paragraphs = a.max_paragraphs;
    cfg.eval_every = a.eval_every;
    cfg.clip_norm = a.clip_norm;
    cfg.objective = a.objective.into();
    cfg.weight_decay = a.weight_decay;
    cfg.validate()?;
    let splitter = SentenceSplitter::new(&vocab);
    let checkpoint = a.out_dir.join("model.bwck");
    let summary = match a.precision {
        Precision::F32 => run_training::<f32>(&cfg, &train_set, &dev_set, &splitter, &checkpoint, err)?,
        Precision::F64 => run_training::<f64>(&cfg, &train_set, &dev_set, &splitter, &checkpoint, err)?,
    };
    let history_path = a.out_dir.join("history.csv");
    let mut csv = Vec::new();
    write_history_csv(&mut csv, &summary.history).map_err(|e| Error::io(&history_path, e))?;
    std::fs::write(&history_path, csv).map_err(|e| Error::io(&history_path, e))?;

    let version = LoadedModel::load(&checkpoint)?.version();
    let mut m = RunManifest::new("train", Some(a.seed), serde_json::to_value(&cfg).map_err(Error::from)?);
    m.input("train", &a.train)?.input("vocab", &a.vocab)?;
    if let Some(d) = &a.dev {
        m.input("dev", d)?;
    }
    m.output(&checkpoint)?.output(&history_path)?;
    m.details = json!({
        "model_version": version,
        "precision": format!("{:?}", a.precision).to_lowercase(),
        "best_epoch": summary.best_epoch,
        "history": summary.history,
        "diverged": summary.diverged,
    });
    m.write(&a.out_dir)?;
    say(err, format_args!("wrote {} (version {version})", checkpoint.display()));
    match summary.diverged {
        Some(msg) => Err(CliError::Failed(format!(
            "{msg}; the last good state was saved; try lowering the learning rate"
        ))),
        None => Ok(()),
    }
}

struct Summary {
    history: Vec<incongruity_core::pipeline::EpochRecord>,
    best_epoch: Option<usize>,
    diverged: Option<String>,
}

fn run_training<T: Real>(
    cfg: &TrainConfig,
    train_set: &[Article],
    dev_set: &[Article],
    splitter: &SentenceSplitter,
    checkpoint: &Path,
    err: &mut dyn Write,
) -> CliResult<Summary> {
    let started = std::time::Instant::now();
    let outcome: TrainOutcome<T> = train(cfg, train_set, dev_set, splitter, |r| {
        let dev = match (r.dev_loss, r.dev_auroc) {
            (Some(l), Some(a)) => format!(" dev_loss {l:.4} dev_auroc {a:.4}"),
            _ => String::new(),
        };
        say(
            err,
            format_args!(
                "epoch {} train_loss {:.4}{dev} ({:.1}s)",
                r.epoch,
                r.train_loss,
                started.elapsed().as_secs_f64()
            ),
        );
    })?;
    save_checkpoint(&outcome.model, checkpoint)?;
    Ok(Summary {
        history: outcome.history,
        best_epoch: outcome.best_epoch,
        diverged: outcome.diverged,
    })
}

fn labels_of(articles: &[Article]) -> CliResult<Vec<bool>> {
    articles
        .iter()
        .map(|a| {
            a.label.map(Label::is_incongruent).ok_or_else(|| {
                Error::InvalidArticle {
                    id: a.id.clone(),
                    reason: "missing label".into(),
                }
                .into()
            })
        })
        .collect()
}

fn train_linear(a: &TrainArgs, train_set: &[Article], dev_set: &[Article], err: &mut dyn Write) -> CliResult<()> {
    let epochs = a.epochs.unwrap_or(300);
    let lr = a.lr.unwrap_or(0.5);
    let model = LinearBaseline::fit(train_set, a.ip, epochs, lr)?;
    let path = a.out_dir.join("model.json");
    let json = serde_json::to_string_pretty(&model).map_err(Error::from)?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    let dev_auroc = if dev_set.is_empty() {
        None
    } else {
        let scores = dev_set
            .iter()
            .map(|d| model.score(&d.headline, &d.paragraphs).map(|s| s.0))
            .collect::<Result<Vec<_>, _>>()?;
        Some(auroc(&scores, &labels_of(dev_set)?)?)
    };
    let loaded = LoadedModel::load(&path)?;
    let settings = json!({ "model": "linear", "ip": a.ip, "epochs": epochs, "lr": lr });
    let mut m = RunManifest::new("train", Some(a.seed), settings);
    m.input("train", &a.train)?.input("vocab", &a.vocab)?;
    if let Some(d) = &a.dev {
        m.input("dev", d)?;
    }
    m.output(&path)?;
    m.details = json!({ "model_version": loaded.version(), "dev_auroc": dev_auroc });
    m.write(&a.out_dir)?;
    say(err, format_args!("wrote {}", path.display()));
    Ok(())
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let scorer = Scorer::load(&a.model, &a.vocab)?;
    let data = read_corpus_vec(&a.data)?;
    let labels = labels_of(&data)?;
    let scores = data
        .iter()
        .map(|d| scorer.model.score_article(d, &scorer.splitter).map(|p| p.score))
        .collect::<Result<Vec<_>, _>>()?;
    let report = EvalReport::compute(&scores, &labels)?;
    if let Some(dir) = &a.out_dir {
        mkdir(dir)?;
        let report_path = dir.join("report.json");
        let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
        std::fs::write(&report_path, text + "\n").map_err(|e| Error::io(&report_path, e))?;
        let scores_path = dir.join("scores.csv");
        let mut csv = String::from("id,label,score\n");
        for ((d, l), s) in data.iter().zip(&labels).zip(&scores) {
            csv.push_str(&format!("{},{},{s}\n", d.id, u8::from(*l)));
        }
        std::fs::write(&scores_path, csv).map_err(|e| Error::io(&scores_path, e))?;
        let mut m = RunManifest::new("eval", None, json!({}));
        m.input("model", &a.model)?.input("vocab", &a.vocab)?.input("data", &a.data)?;
        m.output(&report_path)?.output(&scores_path)?;
        m.details = json!({ "model_version": scorer.model.version() });
        m.write(dir)?;
    }
    print_json(out, &report)
}

fn read_text(path: &PathBuf) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e).into())
}

fn score(a: ScoreArgs, out: &mut dyn Write) -> CliResult<()> {
    let scorer = Scorer::load(&a.model, &a.vocab)?;
    let headline = read_text(&a.headline)?;
    let body = read_text(&a.body)?;
    let prediction = scorer.score_body(headline.trim(), &body)?;
    print_json(out, &prediction)
}

fn serve(a: ServeArgs, err: &mut dyn Write) -> CliResult<()> {
    let scorer = Scorer::load(&a.model, &a.vocab)?;
    let mut config = ServiceConfig::new(&a.feedback_log);
    config.fetch_enabled = a.fetch;
    let state = Arc::new(
        AppState::new(scorer, config)
            .map_err(|e| CliError::Failed(format!("feedback log {}: {e}", a.feedback_log.display())))?,
    );
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Failed(format!("starting runtime: {e}")))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .map_err(|e| CliError::Failed(format!("binding {}:{}: {e}", a.host, a.port)))?;
        let addr = listener.local_addr().map_err(|e| CliError::Failed(e.to_string()))?;
        say(
            err,
            format_args!(
                "serving {} (version {}) on http://{addr}",
                state.scorer().model.name(),
                state.scorer().model.version()
            ),
        );
        if a.reload_secs > 0 {
            let every = Duration::from_secs(a.reload_secs);
            tokio::spawn(watch_checkpoint(state.clone(), a.model.clone(), a.vocab.clone(), every));
        }
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Failed(format!("server error: {e}")))
    })
}
