use rand::Rng;

use crate::textcorpus::{Article, InsertionMode, Label, Provenance};
use crate::{Error, Result};

/// Places `run` into `paragraphs` at `position`. In replace mode up to
/// `run.len()` paragraphs starting at `position` are dropped first.
pub fn implant<T: Clone>(paragraphs: &[T], run: &[T], position: usize, mode: InsertionMode) -> Vec<T> {
    let removed = match mode {
        InsertionMode::Insert => 0,
        InsertionMode::Replace => run.len().min(paragraphs.len() - position),
    };
    let mut out = Vec::with_capacity(paragraphs.len() + run.len() - removed);
    out.extend_from_slice(&paragraphs[..position]);
    out.extend_from_slice(run);
    out.extend_from_slice(&paragraphs[position + removed..]);
    out
}

/// Builds a label-1 article by borrowing a contiguous run of `k` donor
/// paragraphs, `k` uniform in `[min, min(max, donor length)]`.
pub fn generate_incongruent<R: Rng + ?Sized>(
    target: &Article,
    donor: &Article,
    rng: &mut R,
    donor_min: usize,
    donor_max: usize,
    mode: InsertionMode,
) -> Result<Article> {
    if donor.id == target.id {
        return Err(Error::Config(format!("article {} cannot donate to itself", target.id)));
    }
    if donor.paragraphs.len() < donor_min {
        return Err(Error::DonorExhausted(format!(
            "{} has {} paragraphs, need {donor_min}",
            donor.id,
            donor.paragraphs.len()
        )));
    }
    let k = rng.random_range(donor_min..=donor_max.min(donor.paragraphs.len()));
    let donor_start = rng.random_range(0..=donor.paragraphs.len() - k);
    let n = target.paragraphs.len();
    let position = match mode {
        InsertionMode::Insert => rng.random_range(0..=n),
        InsertionMode::Replace => rng.random_range(0..=n - k.min(n)),
    };
    let run = &donor.paragraphs[donor_start..donor_start + k];
    Ok(Article {
        id: target.id.clone(),
        category: target.category.clone(),
        headline: target.headline.clone(),
        paragraphs: implant(&target.paragraphs, run, position, mode),
        label: Some(Label::Incongruent),
        provenance: Some(Provenance {
            donor_id: donor.id.clone(),
            donor_start,
            position,
            count: k,
            mode,
        }),
    })
}
