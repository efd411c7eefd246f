//! Chain-of-thought document parser.
//!
//! The wire format is markdown: one `## Frame k` section per image, three
//! entity tables (`## Characters`, `## Objects`, `## Setting`) and a
//! `## Narrative Phases` list.
//!
//! ```text
//! ## Frame 1
//! Entities: char1, obj1
//! A woman holds a cup.
//!
//! ## Characters
//! | ID | Name | Description | frame_1 | frame_2 |
//! |----|------|-------------|---------|---------|
//! | char1 | Ana | woman in red | 10,20,110,220 | - |
//!
//! ## Narrative Phases
//! - Introduction: Ana arrives.
//! ```
//!
//! Table cells under `frame_k` columns hold `x1,y1,x2,y2` or are empty
//! (`-` also means absent). Columns other than `ID`, `Name`,
//! `Description` and `frame_k` are kept as free-form attributes.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::entity::{BoundingBox, EntityClass, EntityId, ImageMeta};
use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableCategory {
    Characters,
    Objects,
    Setting,
}

impl TableCategory {
    pub const ALL: [TableCategory; 3] = [
        TableCategory::Characters,
        TableCategory::Objects,
        TableCategory::Setting,
    ];

    pub fn heading(self) -> &'static str {
        match self {
            TableCategory::Characters => "Characters",
            TableCategory::Objects => "Objects",
            TableCategory::Setting => "Setting",
        }
    }

    /// Entity classes that belong in this table.
    pub fn admits(self, class: EntityClass) -> bool {
        match self {
            TableCategory::Characters => class == EntityClass::Character,
            TableCategory::Objects => class == EntityClass::Object,
            TableCategory::Setting => {
                matches!(class, EntityClass::Landmark | EntityClass::Background)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameAnalysis {
    pub frame_index: usize,
    pub referenced_entity_ids: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: EntityId,
    pub display_name: String,
    pub attributes: BTreeMap<String, String>,
    /// frame index -> box in that frame
    pub appearances: BTreeMap<usize, BoundingBox>,
    /// Table the row was found in.
    pub table: TableCategory,
}

impl EntityRecord {
    pub fn frame_count(&self) -> usize {
        self.appearances.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTable {
    pub category: TableCategory,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CotDocument {
    pub frame_analyses: Vec<FrameAnalysis>,
    pub entities: Vec<EntityRecord>,
    pub narrative_phases: Vec<String>,
    pub raw_tables: Vec<RawTable>,
}

impl CotDocument {
    pub fn entity(&self, id: EntityId) -> Option<&EntityRecord> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn characters(&self) -> impl Iterator<Item = &EntityRecord> {
        self.entities.iter().filter(|e| e.id.class().is_character())
    }

    /// Objects, landmarks and backgrounds.
    pub fn objects(&self) -> impl Iterator<Item = &EntityRecord> {
        self.entities
            .iter()
            .filter(|e| !e.id.class().is_character())
    }

    pub fn table(&self, category: TableCategory) -> Option<&RawTable> {
        self.raw_tables.iter().find(|t| t.category == category)
    }

    /// Number of frames the document covers: analysis sections or the
    /// highest frame an entity appears in, whichever is larger.
    pub fn frame_span(&self) -> usize {
        let from_entities = self
            .entities
            .iter()
            .filter_map(|e| e.appearances.keys().next_back())
            .map(|&f| f + 1)
            .max()
            .unwrap_or(0);
        self.frame_analyses.len().max(from_entities)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Frame,
    Table(TableCategory),
    Phases,
}

fn parse_heading(line: usize, title: &str) -> Result<(Section, Option<usize>), ParseError> {
    let lower = title.trim().to_ascii_lowercase();
    if let Some(rest) = lower.strip_prefix("frame") {
        let k: usize = rest
            .trim()
            .parse()
            .map_err(|_| ParseError::cot(line, format!("bad frame heading {title:?}")))?;
        if k == 0 {
            return Err(ParseError::cot(line, "frame numbers start at 1"));
        }
        return Ok((Section::Frame, Some(k - 1)));
    }
    let section = match lower.as_str() {
        "characters" => Section::Table(TableCategory::Characters),
        "objects" => Section::Table(TableCategory::Objects),
        "setting" => Section::Table(TableCategory::Setting),
        "narrative phases" => Section::Phases,
        _ => return Err(ParseError::cot(line, format!("unknown section {title:?}"))),
    };
    Ok((section, None))
}

fn split_row(line: &str) -> Vec<String> {
    let inner = line.trim();
    let inner = inner.strip_prefix('|').unwrap_or(inner);
    let inner = inner.strip_suffix('|').unwrap_or(inner);
    inner.split('|').map(|c| c.trim().to_string()).collect()
}

fn is_separator_row(cells: &[String]) -> bool {
    !cells.is_empty()
        && cells
            .iter()
            .all(|c| !c.is_empty() && c.chars().all(|ch| matches!(ch, '-' | ':' | ' ')))
}

fn parse_ids(line: usize, list: &str) -> Result<Vec<EntityId>, ParseError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<EntityId>()
                .map_err(|e| ParseError::cot(line, e.to_string()))
        })
        .collect()
}

fn parse_box(line: usize, cell: &str) -> Result<Option<BoundingBox>, ParseError> {
    if cell.is_empty() || cell == "-" {
        return Ok(None);
    }
    let coords: Vec<i64> = cell
        .split(',')
        .map(|c| {
            c.trim()
                .parse::<i64>()
                .map_err(|_| ParseError::cot(line, format!("non-numeric coordinate in {cell:?}")))
        })
        .collect::<Result<_, _>>()?;
    match coords[..] {
        [x1, y1, x2, y2] => Ok(Some(BoundingBox::new(x1, y1, x2, y2))),
        _ => Err(ParseError::cot(
            line,
            format!("expected 4 coordinates, got {cell:?}"),
        )),
    }
}

#[derive(Debug, Clone, Copy)]
enum Column {
    Id,
    Name,
    Description,
    Frame(usize),
    Attribute,
}

fn classify_column(name: &str) -> Column {
    let lower = name.to_ascii_lowercase();
    match lower.as_str() {
        "id" => Column::Id,
        "name" => Column::Name,
        "description" => Column::Description,
        _ => match lower.strip_prefix("frame_").map(str::parse::<usize>) {
            Some(Ok(k)) if k >= 1 => Column::Frame(k - 1),
            _ => Column::Attribute,
        },
    }
}

struct TableBuilder {
    category: TableCategory,
    line: usize,
    columns: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
    separator_seen: bool,
}

impl TableBuilder {
    fn push(&mut self, line: usize, cells: Vec<String>) -> Result<(), ParseError> {
        if !self.separator_seen {
            if !is_separator_row(&cells) {
                return Err(ParseError::cot(
                    line,
                    "table header must be followed by a separator row",
                ));
            }
            self.separator_seen = true;
            return Ok(());
        }
        if cells.len() != self.columns.len() {
            return Err(ParseError::cot(
                line,
                format!(
                    "row has {} cells, header has {}",
                    cells.len(),
                    self.columns.len()
                ),
            ));
        }
        self.rows.push((line, cells));
        Ok(())
    }

    fn finish(self, frame_count: usize) -> Result<(RawTable, Vec<EntityRecord>), ParseError> {
        if !self.separator_seen {
            return Err(ParseError::cot(self.line, "table has no separator row"));
        }
        let kinds: Vec<Column> = self.columns.iter().map(|c| classify_column(c)).collect();
        for kind in &kinds {
            if let Column::Frame(f) = kind {
                if *f >= frame_count {
                    return Err(ParseError::cot(
                        self.line,
                        format!(
                            "column frame_{} exceeds the {frame_count} input images",
                            f + 1
                        ),
                    ));
                }
            }
        }
        let id_col = kinds.iter().position(|k| matches!(k, Column::Id));
        let mut entities = Vec::new();
        if let Some(id_col) = id_col {
            for (line, cells) in &self.rows {
                let id: EntityId =
                    cells[id_col]
                        .parse()
                        .map_err(|e: super::entity::EntityIdError| {
                            ParseError::cot(*line, e.to_string())
                        })?;
                let mut name = None;
                let mut description = None;
                let mut attributes = BTreeMap::new();
                let mut appearances = BTreeMap::new();
                for ((kind, header), cell) in kinds.iter().zip(&self.columns).zip(cells) {
                    match kind {
                        Column::Id => {}
                        Column::Name => name = Some(cell.clone()),
                        Column::Description => description = Some(cell.clone()),
                        Column::Frame(f) => {
                            if let Some(b) = parse_box(*line, cell)? {
                                appearances.insert(*f, b);
                            }
                        }
                        Column::Attribute => {
                            attributes.insert(header.clone(), cell.clone());
                        }
                    }
                }
                let display_name = match (name, description) {
                    (Some(n), Some(d)) => {
                        attributes.insert("Description".to_string(), d);
                        n
                    }
                    (Some(n), None) => n,
                    (None, Some(d)) => d,
                    (None, None) => String::new(),
                };
                entities.push(EntityRecord {
                    id,
                    display_name,
                    attributes,
                    appearances,
                    table: self.category,
                });
            }
        }
        let table = RawTable {
            category: self.category,
            columns: self.columns,
            rows: self.rows.into_iter().map(|(_, r)| r).collect(),
            line: self.line,
        };
        Ok((table, entities))
    }
}

fn phase_name(line: &str) -> String {
    let mut s = line.trim();
    for marker in ["- ", "* ", "+ "] {
        if let Some(rest) = s.strip_prefix(marker) {
            s = rest;
        }
    }
    let digits = s.len() - s.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits > 0 {
        let rest = &s[digits..];
        if let Some(rest) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            s = rest;
        }
    }
    let head = s.split(':').next().unwrap_or(s);
    head.replace("**", "").trim().to_string()
}

/// Parses chain-of-thought text against the input image list.
pub fn parse_cot(cot_text: &str, images: &[ImageMeta]) -> Result<CotDocument, ParseError> {
    if cot_text.trim().is_empty() {
        return Err(ParseError::cot(0, "empty chain-of-thought"));
    }
    let mut doc = CotDocument::default();
    let mut section = Section::Preamble;
    let mut table: Option<TableBuilder> = None;
    let mut seen_tables: HashSet<TableCategory> = HashSet::new();
    let mut phases_seen = false;

    let close_table = |table: &mut Option<TableBuilder>, doc: &mut CotDocument| {
        if let Some(builder) = table.take() {
            let (raw, entities) = builder.finish(images.len())?;
            doc.raw_tables.push(raw);
            doc.entities.extend(entities);
        }
        Ok::<(), ParseError>(())
    };

    for (i, raw_line) in cot_text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();

        if let Some(title) = line.strip_prefix("##") {
            close_table(&mut table, &mut doc)?;
            let title = title.trim_start_matches('#');
            let (next, frame) = parse_heading(line_no, title)?;
            match next {
                Section::Frame => doc.frame_analyses.push(FrameAnalysis {
                    frame_index: frame.unwrap_or_default(),
                    referenced_entity_ids: Vec::new(),
                }),
                Section::Table(cat) => {
                    if !seen_tables.insert(cat) {
                        return Err(ParseError::cot(
                            line_no,
                            format!("duplicate {} section", cat.heading()),
                        ));
                    }
                }
                Section::Phases => {
                    if phases_seen {
                        return Err(ParseError::cot(
                            line_no,
                            "duplicate narrative phases section",
                        ));
                    }
                    phases_seen = true;
                }
                Section::Preamble => unreachable!(),
            }
            section = next;
            continue;
        }

        match section {
            Section::Preamble => {}
            Section::Frame => {
                let lower = line.to_ascii_lowercase();
                if lower.starts_with("entities:") {
                    let ids = parse_ids(line_no, &line["entities:".len()..])?;
                    if let Some(fa) = doc.frame_analyses.last_mut() {
                        fa.referenced_entity_ids.extend(ids);
                    }
                }
            }
            Section::Table(category) => {
                if line.starts_with('|') {
                    let cells = split_row(line);
                    match table.as_mut() {
                        Some(builder) => builder.push(line_no, cells)?,
                        None => {
                            if doc.table(category).is_some() {
                                return Err(ParseError::cot(
                                    line_no,
                                    format!("second table in {} section", category.heading()),
                                ));
                            }
                            table = Some(TableBuilder {
                                category,
                                line: line_no,
                                columns: cells,
                                rows: Vec::new(),
                                separator_seen: false,
                            });
                        }
                    }
                } else if !line.is_empty() {
                    close_table(&mut table, &mut doc)?;
                }
            }
            Section::Phases => {
                if !line.is_empty() {
                    doc.narrative_phases.push(phase_name(line));
                }
            }
        }
    }
    close_table(&mut table, &mut doc)?;

    let mut ids = HashSet::new();
    for e in &doc.entities {
        if !ids.insert(e.id) {
            return Err(ParseError::cot(0, format!("duplicate entity id {}", e.id)));
        }
    }
    Ok(doc)
}

/// Renders a document in the canonical wire format: one section per frame
/// analysis, the three entity tables with `ID | Name | frame_1..frame_n`
/// columns, then the phase list.
pub fn render_cot(doc: &CotDocument, frame_count: usize) -> String {
    let mut out = String::new();
    for fa in &doc.frame_analyses {
        let ids: Vec<String> = fa
            .referenced_entity_ids
            .iter()
            .map(ToString::to_string)
            .collect();
        out.push_str(&format!(
            "## Frame {}\nEntities: {}\n\n",
            fa.frame_index + 1,
            ids.join(", ")
        ));
    }
    for category in TableCategory::ALL {
        out.push_str(&format!("## {}\n| ID | Name |", category.heading()));
        for f in 0..frame_count {
            out.push_str(&format!(" frame_{} |", f + 1));
        }
        out.push_str("\n|---|---|");
        out.push_str(&"---|".repeat(frame_count));
        out.push('\n');
        for e in doc.entities.iter().filter(|e| e.table == category) {
            out.push_str(&format!("| {} | {} |", e.id, e.display_name));
            for f in 0..frame_count {
                match e.appearances.get(&f) {
                    Some(b) => out.push_str(&format!(" {b} |")),
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out.push_str("## Narrative Phases\n");
    for phase in &doc.narrative_phases {
        out.push_str(&format!("- {phase}: ...\n"));
    }
    out
}
