use proptest::prelude::*;

use incongruity_core::autodiff::{Adam, AdamConfig, Tensor};
use incongruity_core::datagen::{build_dataset, make_synthetic_corpus, Blocklist, DonorCategory, GenConfig};
use incongruity_core::features::{extract_features, IdfTable};
use incongruity_core::pipeline::{train, EvalReport, TrainConfig};
use incongruity_core::textcorpus::{corpus_stats, SentenceSplitter};
use incongruity_core::{Article, ModelConfig, ModelKind, ModelParameters, Token};

const KINDS: [ModelKind; 5] = [ModelKind::Rde, ModelKind::Cde, ModelKind::Hrde, ModelKind::Ahde, ModelKind::Hre];

fn tiny(kind: ModelKind, ip: bool, vocab_size: usize) -> ModelConfig {
    ModelConfig {
        ip,
        d_emb: 6,
        d_word: 5,
        d_para: 5,
        conv_filters: 3,
        ..ModelConfig::new(kind, vocab_size)
    }
}

fn tokens(max_len: usize) -> impl Strategy<Value = Vec<Token>> {
    prop::collection::vec((2u32..30).prop_map(Token), 1..max_len)
}

fn article() -> impl Strategy<Value = Article> {
    (tokens(8), prop::collection::vec(tokens(12), 1..6)).prop_map(|(headline, paragraphs)| Article {
        id: String::new(),
        category: "c".into(),
        headline,
        paragraphs,
        label: None,
        provenance: None,
    })
}

// two-pass mean and sample deviation, independent of the streaming code
fn oracle(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt() / n.sqrt())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stats_match_two_pass_oracle(corpus in prop::collection::vec(article(), 1..20)) {
        let s = corpus_stats(&corpus).unwrap();
        let heads: Vec<f64> = corpus.iter().map(|a| a.headline.len() as f64).collect();
        let bodies: Vec<f64> = corpus.iter().map(|a| a.body_len() as f64).collect();
        let paras: Vec<f64> = corpus.iter().map(|a| a.paragraphs.len() as f64).collect();
        let per_para: Vec<f64> = corpus.iter().flat_map(|a| a.paragraphs.iter().map(|p| p.len() as f64)).collect();
        for (got, xs) in [
            (s.headline_tokens, &heads),
            (s.body_tokens, &bodies),
            (s.paragraphs_per_body, &paras),
            (s.tokens_per_paragraph, &per_para),
        ] {
            let (mean, se) = oracle(xs);
            prop_assert_eq!(got.n, xs.len());
            prop_assert!(got.mean >= 0.0);
            prop_assert!((got.mean - mean).abs() <= 1e-9 * mean.max(1.0));
            prop_assert!((got.stderr - se).abs() <= 1e-9 * se.max(1.0));
        }
    }

    #[test]
    fn features_are_finite_with_cosines_in_unit_range(a in article(), others in prop::collection::vec(article(), 0..5)) {
        let idf = IdfTable::fit(others.iter().chain([&a]));
        let f = extract_features(&a.headline, &a.paragraphs, &idf).unwrap();
        prop_assert!(f.0.iter().all(|x| x.is_finite()));
        for name in ["tf_cosine", "tfidf_cosine"] {
            let c = f.get(name).unwrap();
            prop_assert!((0.0..=1.0).contains(&c), "{} = {}", name, c);
        }
    }

    #[test]
    fn report_counts_cover_the_dataset(pairs in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 2..80)) {
        prop_assume!(pairs.iter().any(|p| p.1) && pairs.iter().any(|p| !p.1));
        let (scores, labels): (Vec<f64>, Vec<bool>) = pairs.into_iter().unzip();
        let r = EvalReport::compute(&scores, &labels).unwrap();
        prop_assert_eq!(r.n, scores.len());
        prop_assert!((0.0..=1.0).contains(&r.accuracy));
        prop_assert!((0.0..=1.0).contains(&r.auroc));
        for row in &r.confusion {
            prop_assert_eq!(row.confusion.total(), scores.len());
        }
    }

    #[test]
    fn any_weight_change_changes_the_version(kind in 0usize..5, ip: bool, seed in 0u64..1000, pick in any::<prop::sample::Index>(), delta in 1e-3f64..1.0) {
        let mut m = ModelParameters::<f64>::init(tiny(KINDS[kind], ip, 30), seed).unwrap();
        let before = m.version();
        let total = m.params().numel();
        let mut k = pick.index(total);
        for t in m.params_mut().tensors_mut() {
            if k < t.numel() {
                t.data_mut()[k] += delta;
                break;
            }
            k -= t.numel();
        }
        prop_assert_ne!(before, m.version());
    }

    #[test]
    fn adam_keeps_shapes_and_counts_steps(shapes in prop::collection::vec(prop::collection::vec(1usize..4, 1..3), 1..4), steps in 1u64..5) {
        let mut params: Vec<Tensor<f64>> = shapes.iter().map(|s| Tensor::filled(s, 0.5)).collect();
        let grads: Vec<Tensor<f64>> = shapes.iter().map(|s| Tensor::filled(s, 0.1)).collect();
        let mut adam = Adam::new(AdamConfig::default(), &params);
        for _ in 0..steps {
            adam.step(&mut params, &grads).unwrap();
        }
        prop_assert_eq!(adam.steps(), steps);
        for (p, s) in params.iter().zip(&shapes) {
            prop_assert_eq!(p.shape(), s.as_slice());
            prop_assert!(p.is_finite());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn splits_are_disjoint_balanced_and_valid(n in 40usize..160, seed in 0u64..1000, donor in 0usize..3) {
        let (corpus, _) = make_synthetic_corpus(n, 3, 30, seed).unwrap();
        let mut config = GenConfig::new(seed);
        config.donor_category = [DonorCategory::Same, DonorCategory::Any, DonorCategory::Different][donor];
        let data = build_dataset(&corpus, &config, &Blocklist::default()).unwrap();
        let mut ids = std::collections::HashSet::new();
        for split in data.splits() {
            let pos = split.iter().filter(|a| a.label.is_some_and(|l| l.is_incongruent())).count();
            prop_assert!(pos.abs_diff(split.len() - pos) <= 1);
            for a in split {
                prop_assert!(a.label.is_some());
                prop_assert!(a.validate().is_ok());
                prop_assert!(ids.insert(a.id.clone()), "duplicate id {}", a.id);
            }
        }
    }
}

#[test]
fn training_leaves_the_padding_row_at_zero() {
    let (corpus, vocab) = make_synthetic_corpus(40, 2, 20, 4).unwrap();
    let data = build_dataset(&corpus, &GenConfig::new(4), &Blocklist::default()).unwrap();
    let splitter = SentenceSplitter::new(&vocab);
    for kind in KINDS {
        let mut cfg = TrainConfig::new(tiny(kind, false, vocab.len()), 1);
        cfg.epochs = 2;
        cfg.batch_size = 4;
        cfg.lr = 1e-2;
        let out = train::<f64>(&cfg, &data.train, &[], &splitter, |_| {}).unwrap();
        let emb = out.model.params().get("embedding").unwrap();
        let d = emb.shape()[1];
        assert!(emb.data()[..d].iter().all(|&x| x == 0.0), "{kind:?}");
        assert_ne!(out.model.version(), ModelParameters::<f64>::init(cfg.model, 1).unwrap().version());
    }
}
