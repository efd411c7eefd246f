//! Synthetic negative stories: image sequences stitched together from
//! unrelated real stories with fixed integer arithmetic, so the same index
//! always yields the same sequence.
//!
//! Frame `i` of synthetic story `s` comes from story
//! `(17 s + 31 i) mod N`, image `(s + 7 i) mod |images of that story|`.
//! Sequence length is `5 + (s mod 11)`, covering 5..=15 frames.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::story::{ImageMeta, StorySample};

pub const MIN_FRAMES: usize = 5;
pub const MAX_FRAMES: usize = 15;

/// Story count and per-story image counts of the real corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusIndex {
    image_counts: Vec<usize>,
}

impl CorpusIndex {
    pub fn new(image_counts: Vec<usize>) -> Result<Self> {
        if image_counts.is_empty() {
            return Err(Error::InvalidInput(
                "corpus index needs at least one story".into(),
            ));
        }
        if let Some(j) = image_counts.iter().position(|&n| n == 0) {
            return Err(Error::InvalidInput(format!("story {j} has no images")));
        }
        Ok(Self { image_counts })
    }

    pub fn from_samples(samples: &[StorySample]) -> Result<Self> {
        Self::new(samples.iter().map(|s| s.images.len()).collect())
    }

    /// Number of real stories, `N`.
    pub fn story_count(&self) -> usize {
        self.image_counts.len()
    }

    pub fn image_count(&self, story_idx: usize) -> usize {
        self.image_counts[story_idx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pick {
    pub story_idx: usize,
    pub img_idx: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub synthetic_index: usize,
    pub frame_count: usize,
    pub picks: Vec<Pick>,
}

pub fn frame_count_for(s: usize) -> usize {
    MIN_FRAMES + s % (MAX_FRAMES - MIN_FRAMES + 1)
}

/// Source of frame `i` of synthetic story `s`.
pub fn sample_pick(s: usize, i: usize, idx: &CorpusIndex) -> Pick {
    // reduce before multiplying; identical result modulo N without overflow
    let n = idx.story_count() as u128;
    let story_idx = (((s as u128 % n) * 17 + (i as u128 % n) * 31) % n) as usize;
    let m = idx.image_count(story_idx) as u128;
    let img_idx = ((s as u128 % m + (i as u128 % m) * 7) % m) as usize;
    Pick { story_idx, img_idx }
}

pub fn synthetic_spec(s: usize, idx: &CorpusIndex) -> SyntheticSpec {
    let frame_count = frame_count_for(s);
    SyntheticSpec {
        synthetic_index: s,
        frame_count,
        picks: (0..frame_count).map(|i| sample_pick(s, i, idx)).collect(),
    }
}

/// How many synthetic stories to add to a corpus of `N` real ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// One synthetic story per real story.
    #[default]
    Double,
    /// 2:1 real to synthetic, `ceil(N / 2)`.
    Half,
    Count(usize),
}

impl Extension {
    pub fn count(self, n: usize) -> usize {
        match self {
            Extension::Double => n,
            Extension::Half => n.div_ceil(2),
            Extension::Count(c) => c,
        }
    }
}

pub fn extend_corpus(idx: &CorpusIndex, extension: Extension) -> Vec<SyntheticSpec> {
    (0..extension.count(idx.story_count()))
        .map(|s| synthetic_spec(s, idx))
        .collect()
}

/// Read access to real stories by position.
pub trait StoryAccessor {
    fn story_id(&self, story_idx: usize) -> Option<&str>;
    fn image(&self, story_idx: usize, img_idx: usize) -> Option<&ImageMeta>;
}

impl StoryAccessor for [StorySample] {
    fn story_id(&self, story_idx: usize) -> Option<&str> {
        self.get(story_idx).map(|s| s.sample_id.as_str())
    }

    fn image(&self, story_idx: usize, img_idx: usize) -> Option<&ImageMeta> {
        self.get(story_idx)?.images.get(img_idx)
    }
}

impl StoryAccessor for Vec<StorySample> {
    fn story_id(&self, story_idx: usize) -> Option<&str> {
        self.as_slice().story_id(story_idx)
    }

    fn image(&self, story_idx: usize, img_idx: usize) -> Option<&ImageMeta> {
        self.as_slice().image(story_idx, img_idx)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameProvenance {
    pub frame: usize,
    pub story_idx: usize,
    pub img_idx: usize,
    pub source_story_id: String,
    pub image_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticStory {
    pub sample: StorySample,
    pub synthetic_index: usize,
    pub provenance: Vec<FrameProvenance>,
}

impl SyntheticStory {
    pub fn distinct_sources(&self) -> usize {
        let mut ids: Vec<&str> = self
            .provenance
            .iter()
            .map(|p| p.source_story_id.as_str())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

pub fn synthetic_sample_id(s: usize) -> String {
    format!("synthetic_{s:06}")
}

/// Assembles synthetic story `s`. Reference texts are empty: the sequence
/// has no coherent story by construction.
pub fn build_synthetic_story(
    s: usize,
    idx: &CorpusIndex,
    corpus: &(impl StoryAccessor + ?Sized),
) -> Result<SyntheticStory> {
    let spec = synthetic_spec(s, idx);
    let mut images = Vec::with_capacity(spec.frame_count);
    let mut provenance = Vec::with_capacity(spec.frame_count);
    for (frame, pick) in spec.picks.iter().enumerate() {
        let lookup = || Error::CorpusLookup {
            story_idx: pick.story_idx,
            img_idx: pick.img_idx,
        };
        let image = corpus
            .image(pick.story_idx, pick.img_idx)
            .ok_or_else(lookup)?;
        let story_id = corpus.story_id(pick.story_idx).ok_or_else(lookup)?;
        let source_story_id = if image.source_story_id.is_empty() {
            story_id.to_string()
        } else {
            image.source_story_id.clone()
        };
        provenance.push(FrameProvenance {
            frame,
            story_idx: pick.story_idx,
            img_idx: pick.img_idx,
            source_story_id: source_story_id.clone(),
            image_id: image.image_id.clone(),
        });
        images.push(ImageMeta {
            source_story_id,
            ..image.clone()
        });
    }
    Ok(SyntheticStory {
        sample: StorySample {
            sample_id: synthetic_sample_id(s),
            is_real: false,
            images,
            cot_text: String::new(),
            story_text: String::new(),
        },
        synthetic_index: s,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn corpus(n: usize) -> Vec<StorySample> {
        (0..n)
            .map(|j| fixtures::sample(&format!("story{j:03}"), true, 3 + j % 5, &[]))
            .collect()
    }

    #[test]
    fn pick_examples() {
        let idx = CorpusIndex::new(vec![3; 4178]).unwrap();
        assert_eq!(
            sample_pick(0, 0, &idx),
            Pick {
                story_idx: 0,
                img_idx: 0
            }
        );
        assert_eq!(sample_pick(1, 2, &idx).story_idx, 79);

        let mut counts = vec![4; 100];
        counts[48] = 7;
        let idx = CorpusIndex::new(counts).unwrap();
        // s=3, i=1: story (51 + 31) mod 100 = 82; check the image formula on story 48 directly
        let s = 3;
        let i = 1;
        assert_eq!((s + i * 7) % idx.image_count(48), 3);
        let pick = sample_pick(s, i, &idx);
        assert_eq!(pick.story_idx, 82);
        assert_eq!(pick.img_idx, (3 + 7) % 4);
    }

    #[test]
    fn pick_matches_unreduced_formula() {
        let idx = CorpusIndex::new((1..=37).collect()).unwrap();
        for s in 0..200 {
            for i in 0..15 {
                let story = (s * 17 + i * 31) % 37;
                let img = (s + i * 7) % idx.image_count(story);
                assert_eq!(
                    sample_pick(s, i, &idx),
                    Pick {
                        story_idx: story,
                        img_idx: img
                    }
                );
            }
        }
    }

    #[test]
    fn frame_counts_cover_range() {
        let counts: Vec<usize> = (0..10_001).map(frame_count_for).collect();
        assert!(counts.iter().all(|n| (MIN_FRAMES..=MAX_FRAMES).contains(n)));
        assert_eq!(*counts.iter().min().unwrap(), 5);
        assert_eq!(*counts.iter().max().unwrap(), 15);
    }

    #[test]
    fn extension_counts() {
        let idx = CorpusIndex::new(vec![1; 4178]).unwrap();
        assert_eq!(extend_corpus(&idx, Extension::Double).len(), 4178);
        assert_eq!(extend_corpus(&idx, Extension::Count(0)).len(), 0);
        let idx = CorpusIndex::new(vec![1; 10]).unwrap();
        assert_eq!(extend_corpus(&idx, Extension::Half).len(), 5);
        assert_eq!(Extension::Half.count(11), 6);
    }

    #[test]
    fn invalid_index() {
        assert!(CorpusIndex::new(vec![]).is_err());
        assert!(CorpusIndex::new(vec![2, 0]).is_err());
    }

    #[test]
    fn build_is_deterministic_with_provenance() {
        let real = corpus(50);
        let idx = CorpusIndex::from_samples(&real).unwrap();
        for s in 0..50 {
            let a = build_synthetic_story(s, &idx, real.as_slice()).unwrap();
            let b = build_synthetic_story(s, &idx, real.as_slice()).unwrap();
            assert_eq!(
                serde_json::to_string(&a).unwrap(),
                serde_json::to_string(&b).unwrap()
            );
            assert!(!a.sample.is_real);
            assert_eq!(a.sample.images.len(), frame_count_for(s));
            assert!(a.distinct_sources() >= 2);
            for p in &a.provenance {
                let expected = &real[p.story_idx].images[p.img_idx];
                assert_eq!(a.sample.images[p.frame].image_id, expected.image_id);
            }
        }
    }

    #[test]
    fn consecutive_frames_change_story() {
        let real = corpus(50);
        let idx = CorpusIndex::from_samples(&real).unwrap();
        assert_ne!(31 % idx.story_count(), 0);
        for spec in extend_corpus(&idx, Extension::Double) {
            for w in spec.picks.windows(2) {
                assert_ne!(w[0].story_idx, w[1].story_idx);
            }
        }
    }

    #[test]
    fn lookup_failure_reports_indices() {
        let real = corpus(5);
        let idx = CorpusIndex::new(vec![10; 5]).unwrap();
        let err = (0..20)
            .find_map(|s| build_synthetic_story(s, &idx, real.as_slice()).err())
            .unwrap();
        assert!(matches!(err, Error::CorpusLookup { .. }));
    }
}
