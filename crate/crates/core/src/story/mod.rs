//! Domain types and parsers for chain-of-thought documents and grounded
//! stories.

mod cot;
mod entity;
mod markup;

pub use cot::{
    parse_cot, render_cot, CotDocument, EntityRecord, FrameAnalysis, RawTable, TableCategory,
};
pub use entity::{BoundingBox, EntityClass, EntityId, EntityIdError, ImageMeta, StorySample};
pub use markup::{parse_story, render_story, GroundedStory, GroundingTag, Segment, TagKind};
