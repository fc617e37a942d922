//! Article data model, tokenization, vocabularies, corpus files and corpus
//! statistics.

mod article;
mod io;
mod stats;
mod text;
mod tokenize;
mod vocab;

pub use article::{Article, InsertionMode, Label, Provenance, Token};
pub use io::{read_corpus, read_corpus_vec, write_corpus, write_corpus_to, CorpusReader};
pub use stats::{corpus_stats, CorpusStats, MeanStderr};
pub use text::{article_from_paragraphs, article_from_text};
pub use tokenize::{join_tokens, tokenize};
pub use vocab::{build_vocabulary, split_sentences, SentenceSplitter, Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};
