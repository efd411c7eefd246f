//! Corpus and output builders shared by the CLI tests and the acceptance
//! suite.
#![allow(dead_code)]

use std::path::Path;

use storyground::fixtures::{self, EntitySpec, FixtureRng};
use storyground::StorySample;
use storyground_cli::commands::GeneratedOutput;

/// `n` valid real samples with 2 to 6 frames and random casts.
pub fn real_corpus(n: usize, seed: u64) -> Vec<(StorySample, Vec<EntitySpec>)> {
    let mut rng = FixtureRng::new(seed);
    (0..n)
        .map(|i| {
            let frames = 2 + rng.below(5);
            let cast = fixtures::random_entities(&mut rng, frames);
            (
                fixtures::sample(&format!("real_{i:04}"), true, frames, &cast),
                cast,
            )
        })
        .collect()
}

/// Three outputs for one sample: a copy whose pronouns are left
/// ungrounded (candidate 0), a fully grounded one (1) and one missing a
/// narrative phase (2, invalid).
pub fn outputs_for(
    sample_id: &str,
    frame_count: usize,
    cast: &[EntitySpec],
) -> Vec<GeneratedOutput> {
    let full_cot =
        storyground::story::render_cot(&fixtures::cot_document(frame_count, cast), frame_count);
    let full_story = fixtures::story_text(frame_count, cast);
    let mut partial = full_story.clone();
    for e in cast {
        partial = partial
            .replace(&format!("<gdo {}>She</gdo>", e.id), "She")
            .replace(&format!("<gdo {}>it</gdo>", e.id), "it");
    }
    let broken_cot = full_cot.replace("- Conflict: ...\n", "");
    [
        (partial, full_cot.clone()),
        (full_story.clone(), full_cot),
        (full_story, broken_cot),
    ]
    .into_iter()
    .enumerate()
    .map(|(k, (story, cot))| GeneratedOutput {
        sample_id: sample_id.to_string(),
        candidate: Some(k),
        cot_text: cot,
        story_text: story,
    })
    .collect()
}

/// Outputs for synthetic samples: a random cast over the sequence's frames.
pub fn synthetic_outputs(samples: &[StorySample], seed: u64) -> Vec<GeneratedOutput> {
    let mut rng = FixtureRng::new(seed);
    samples
        .iter()
        .flat_map(|s| {
            let frames = s.images.len();
            let cast = fixtures::random_entities(&mut rng, frames);
            outputs_for(&s.sample_id, frames, &cast)
        })
        .collect()
}

pub fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) {
    let file = std::fs::File::create(path).unwrap();
    storyground::io::write_jsonl(std::io::BufWriter::new(file), rows).unwrap();
}

pub fn read_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}
