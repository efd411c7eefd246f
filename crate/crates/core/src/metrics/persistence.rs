use serde::{Deserialize, Serialize};

use crate::story::CotDocument;

/// Percentage of entities appearing in at least N frames, for N from 1 to
/// `max_frames`. Entities are pooled across all stories.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PersistenceCurve {
    pub max_frames: usize,
    pub characters: Vec<f64>,
    pub objects: Vec<f64>,
    pub total: Vec<f64>,
}

impl PersistenceCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,characters,objects,total\n");
        for i in 0..self.max_frames {
            out.push_str(&format!(
                "{},{},{},{}\n",
                i + 1,
                self.characters[i],
                self.objects[i],
                self.total[i]
            ));
        }
        out
    }
}

fn series(frame_counts: &[usize], max_frames: usize) -> Vec<f64> {
    (1..=max_frames)
        .map(|n| {
            if frame_counts.is_empty() {
                0.0
            } else {
                let at_least = frame_counts.iter().filter(|&&c| c >= n).count();
                100.0 * at_least as f64 / frame_counts.len() as f64
            }
        })
        .collect()
}

pub fn persistence_curve(corpus: &[CotDocument]) -> PersistenceCurve {
    let max_frames = corpus
        .iter()
        .map(CotDocument::frame_span)
        .max()
        .unwrap_or(0);
    let chars: Vec<usize> = corpus
        .iter()
        .flat_map(|d| d.characters().map(|e| e.frame_count()))
        .collect();
    let objs: Vec<usize> = corpus
        .iter()
        .flat_map(|d| d.objects().map(|e| e.frame_count()))
        .collect();
    let all: Vec<usize> = chars.iter().chain(&objs).copied().collect();
    PersistenceCurve {
        max_frames,
        characters: series(&chars, max_frames),
        objects: series(&objs, max_frames),
        total: series(&all, max_frames),
    }
}
