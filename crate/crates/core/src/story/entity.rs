use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Category of a tracked entity, encoded by the id prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityClass {
    Character,
    Object,
    Landmark,
    Background,
}

impl EntityClass {
    pub const ALL: [EntityClass; 4] = [
        EntityClass::Character,
        EntityClass::Object,
        EntityClass::Landmark,
        EntityClass::Background,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            EntityClass::Character => "char",
            EntityClass::Object => "obj",
            EntityClass::Landmark => "lm",
            EntityClass::Background => "bg",
        }
    }

    /// Characters versus everything else (objects, landmarks, backgrounds).
    pub fn is_character(self) -> bool {
        matches!(self, EntityClass::Character)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EntityIdError {
    #[error("empty entity id")]
    Empty,
    #[error("unknown entity id prefix in {0:?}")]
    UnknownPrefix(String),
    #[error("malformed ordinal in entity id {0:?}")]
    BadOrdinal(String),
}

/// Persistent entity identifier such as `char1` or `obj12`.
///
/// The canonical form is `prefix + ordinal` with `ordinal >= 1` and no
/// leading zeros. Anything else is rejected by [`EntityId::from_str`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId {
    class: EntityClass,
    ordinal: u32,
}

impl EntityId {
    pub fn new(class: EntityClass, ordinal: u32) -> Option<Self> {
        (ordinal >= 1).then_some(Self { class, ordinal })
    }

    pub fn class(&self) -> EntityClass {
        self.class
    }

    pub fn ordinal(&self) -> u32 {
        self.ordinal
    }
}

impl FromStr for EntityId {
    type Err = EntityIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(EntityIdError::Empty);
        }
        let split = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
        let (prefix, digits) = s.split_at(split);
        let class = EntityClass::ALL
            .into_iter()
            .find(|c| c.prefix() == prefix)
            .ok_or_else(|| EntityIdError::UnknownPrefix(s.to_string()))?;
        if digits.is_empty()
            || digits.starts_with('0')
            || !digits.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(EntityIdError::BadOrdinal(s.to_string()));
        }
        let ordinal = digits
            .parse::<u32>()
            .map_err(|_| EntityIdError::BadOrdinal(s.to_string()))?;
        Ok(Self { class, ordinal })
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.class.prefix(), self.ordinal)
    }
}

impl Serialize for EntityId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Pixel-space box, corners inclusive-exclusive: `x1 < x2`, `y1 < y2`.
///
/// Coordinates are signed so that out-of-frame values survive parsing and
/// are reported by validation instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x1: i64,
    pub y1: i64,
    pub x2: i64,
    pub y2: i64,
}

impl BoundingBox {
    pub fn new(x1: i64, y1: i64, x2: i64, y2: i64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn fits(&self, image: &ImageMeta) -> bool {
        0 <= self.x1
            && self.x1 < self.x2
            && self.x2 <= i64::from(image.width)
            && 0 <= self.y1
            && self.y1 < self.y2
            && self.y2 <= i64::from(image.height)
    }

    pub fn area(&self) -> f64 {
        let w = (self.x2 - self.x1).max(0) as f64;
        let h = (self.y2 - self.y1).max(0) as f64;
        w * h
    }

    /// Intersection over union, 0.0 when the union is empty.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let iw = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0) as f64;
        let ih = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0) as f64;
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x1, self.y1, self.x2, self.y2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub source_story_id: String,
}

impl ImageMeta {
    pub fn new(
        image_id: impl Into<String>,
        width: u32,
        height: u32,
        source_story_id: impl Into<String>,
    ) -> Self {
        Self {
            image_id: image_id.into(),
            width,
            height,
            source_story_id: source_story_id.into(),
        }
    }
}

/// One corpus item: an image sequence plus its reference chain-of-thought
/// and story. Field names are the JSONL wire format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorySample {
    pub sample_id: String,
    pub is_real: bool,
    pub images: Vec<ImageMeta>,
    pub cot_text: String,
    pub story_text: String,
}
