use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::path::{Path, PathBuf};

use super::Article;
use crate::{Error, Result};

/// Streaming JSON Lines reader; yields articles in file order.
pub struct CorpusReader {
    path: PathBuf,
    lines: Lines<BufReader<File>>,
    line: usize,
}

impl Iterator for CorpusReader {
    type Item = Result<Article>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            if line.trim().is_empty() {
                continue;
            }
            let lineno = self.line;
            let parsed = serde_json::from_str::<Article>(&line)
                .map_err(|e| Error::Malformed {
                    line: lineno,
                    message: e.to_string(),
                })
                .and_then(|a| {
                    a.validate().map_err(|e| Error::Malformed {
                        line: lineno,
                        message: e.to_string(),
                    })?;
                    Ok(a)
                });
            return Some(parsed);
        }
    }
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<CorpusReader> {
    let path = path.as_ref().to_path_buf();
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    Ok(CorpusReader {
        lines: BufReader::new(file).lines(),
        path,
        line: 0,
    })
}

pub fn read_corpus_vec(path: impl AsRef<Path>) -> Result<Vec<Article>> {
    read_corpus(path)?.collect()
}

/// Serializes articles as canonical JSON Lines into any writer.
pub fn write_corpus_to<'a, W, I>(mut w: W, articles: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Article>,
{
    for a in articles {
        serde_json::to_writer(&mut w, a)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_corpus<'a, I>(path: impl AsRef<Path>, articles: I) -> Result<()>
where
    I: IntoIterator<Item = &'a Article>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus_to(BufWriter::new(file), articles).map_err(|e| Error::io(path, e))
}
