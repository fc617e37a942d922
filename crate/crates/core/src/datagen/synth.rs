use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::textcorpus::{Article, Token, Vocabulary};
use crate::{Error, Result};

pub const HEADLINE_TOKENS: (usize, usize) = (5, 15);
pub const PARAGRAPHS: (usize, usize) = (4, 12);
pub const PARAGRAPH_TOKENS: (usize, usize) = (20, 80);

pub fn topic_word(topic: usize, i: usize) -> String {
    format!("t{topic}w{i}")
}

/// Corpus where every topic owns a disjoint word list with Zipf-like
/// frequencies. Each article draws its headline and paragraphs from one
/// topic; the category is the topic name.
pub fn make_synthetic_corpus(
    n_articles: usize,
    n_topics: usize,
    words_per_topic: usize,
    seed: u64,
) -> Result<(Vec<Article>, Vocabulary)> {
    if n_topics < 2 || words_per_topic == 0 {
        return Err(Error::Config(format!(
            "need at least 2 topics and 1 word per topic, got {n_topics} and {words_per_topic}"
        )));
    }
    let vocab = Vocabulary::from_words((0..n_topics).flat_map(|t| (0..words_per_topic).map(move |i| topic_word(t, i))));
    let ids: Vec<Vec<Token>> = (0..n_topics)
        .map(|t| {
            (0..words_per_topic)
                .map(|i| vocab.get(&topic_word(t, i)).expect("inserted"))
                .collect()
        })
        .collect();
    let zipf = WeightedIndex::new((1..=words_per_topic).map(|r| 1.0 / r as f64)).expect("positive weights");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, topic: usize, (lo, hi): (usize, usize)| -> Vec<Token> {
        let n = rng.random_range(lo..=hi);
        (0..n).map(|_| ids[topic][zipf.sample(rng)]).collect()
    };
    let articles = (0..n_articles)
        .map(|i| {
            let topic = rng.random_range(0..n_topics);
            let headline = draw(&mut rng, topic, HEADLINE_TOKENS);
            let n_paras = rng.random_range(PARAGRAPHS.0..=PARAGRAPHS.1);
            let paragraphs = (0..n_paras).map(|_| draw(&mut rng, topic, PARAGRAPH_TOKENS)).collect();
            Article {
                id: format!("synth-{i:06}"),
                category: format!("topic{topic}"),
                headline,
                paragraphs,
                label: None,
                provenance: None,
            }
        })
        .collect();
    Ok((articles, vocab))
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn topics_are_disjoint_and_articles_stay_in_topic() {
        let (corpus, vocab) = make_synthetic_corpus(300, 5, 200, 9).unwrap();
        assert_eq!(vocab.len(), 2 + 5 * 200);
        let topic_of = |t: Token| {
            let w = vocab.word(t).unwrap();
            w[1..w.find('w').unwrap()].parse::<usize>().unwrap()
        };
        let sets: Vec<HashSet<Token>> = (0..5)
            .map(|t| (0..200).map(|i| vocab.get(&topic_word(t, i)).unwrap()).collect())
            .collect();
        for a in 0..5 {
            for b in a + 1..5 {
                assert!(sets[a].is_disjoint(&sets[b]));
            }
        }
        for a in &corpus {
            let topic: usize = a.category["topic".len()..].parse().unwrap();
            assert!(a.headline.iter().chain(a.paragraphs.iter().flatten()).all(|&t| topic_of(t) == topic));
        }
    }

    #[test]
    fn counts_within_bounds() {
        let (corpus, _) = make_synthetic_corpus(500, 3, 50, 1).unwrap();
        assert_eq!(corpus.len(), 500);
        for a in &corpus {
            a.validate().unwrap();
            assert!((5..=15).contains(&a.headline.len()));
            assert!((4..=12).contains(&a.paragraphs.len()));
            assert!(a.paragraphs.iter().all(|p| (20..=80).contains(&p.len())));
        }
        let cats: HashSet<_> = corpus.iter().map(|a| a.category.as_str()).collect();
        assert_eq!(cats.len(), 3);
    }

    #[test]
    fn deterministic_in_seed() {
        let a = make_synthetic_corpus(50, 2, 20, 5).unwrap();
        let b = make_synthetic_corpus(50, 2, 20, 5).unwrap();
        let c = make_synthetic_corpus(50, 2, 20, 6).unwrap();
        assert_eq!(a.0, b.0);
        assert_ne!(a.0, c.0);
        assert!(make_synthetic_corpus(10, 1, 20, 0).is_err());
    }
}
