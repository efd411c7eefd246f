use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::json;
use storyground::io::{read_jsonl, write_jsonl, JsonlRead, LineError};
use storyground::metrics::{evaluate, EvalItem, EvalReport};
use storyground::preference::{build_corpus_pairs, CandidateResponse, PairRecord};
use storyground::reward::{Lexicon, Scorer};
use storyground::synthetic::{
    build_synthetic_story, extend_corpus, CorpusIndex, Extension, FrameProvenance,
};
use storyground::validate::{
    check_output, well_structured_rate, RuleId, ValidationReport, Violation,
};
use storyground::{RewardBreakdown, StorySample};

use crate::args::{Command, RewardFlags};
use crate::config::{apply_reward_flags, match_config, min_margin, FileConfig};
use crate::CliError;

/// One generated output for a sample. `candidate` distinguishes several
/// outputs for the same sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedOutput {
    pub sample_id: String,
    #[serde(default)]
    pub candidate: Option<usize>,
    pub cot_text: String,
    pub story_text: String,
}

/// One line of `validate` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub sample_id: String,
    #[serde(flatten)]
    pub report: ValidationReport,
}

/// Sidecar written next to the synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceFile {
    pub extension: Extension,
    pub real_count: usize,
    pub synthetic_count: usize,
    pub stories: Vec<ProvenanceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub sample_id: String,
    pub synthetic_index: usize,
    pub distinct_sources: usize,
    pub frames: Vec<FrameProvenance>,
}

/// The Table 1 columns of an evaluation, in order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub char_precision: f64,
    pub obj_precision: f64,
    pub total_precision: f64,
    pub map: Option<f64>,
    pub char_recall: f64,
    pub obj_recall: f64,
    pub total_recall: f64,
    pub f1: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
}

impl From<&EvalReport> for MetricsRow {
    fn from(r: &EvalReport) -> Self {
        let g = &r.grounding;
        MetricsRow {
            char_precision: g.character.precision,
            obj_precision: g.object.precision,
            total_precision: g.total.precision,
            map: r.map,
            char_recall: g.character.recall,
            obj_recall: g.object.recall,
            total_recall: g.total.recall,
            f1: r.f1,
            bleu4: r.language.bleu4,
            rouge_l: r.language.rouge_l,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsFile {
    pub metrics: MetricsRow,
    pub report: EvalReport,
}

pub fn dispatch(command: Command) -> Result<(), CliError> {
    let file = FileConfig::from_env()?;
    match command {
        Command::Validate { input, out } => cmd_validate(&input, out.as_deref()),
        Command::Score {
            input,
            outputs,
            out,
            reward,
        } => cmd_score(&input, &outputs, &out, &file, &reward),
        Command::Synth { input, out, ratio } => cmd_synth(&input, &out, ratio.into()),
        Command::Pairs {
            input,
            out,
            min_margin: flag,
        } => cmd_pairs(&input, &out, min_margin(&file, flag)?),
        Command::Eval {
            input,
            outputs,
            out,
            iou,
        } => cmd_eval(&input, &outputs, &out, &file, iou),
        Command::Serve { port, reward } => {
            let cfg = apply_reward_flags(file.reward, &reward)?;
            crate::server::serve_blocking(port, Arc::new(Scorer::new(cfg)))
        }
    }
}

/// Collects per-line and per-record problems; any entry makes the command
/// exit with a data error after its outputs are written.
#[derive(Debug, Default)]
struct Problems(Vec<String>);

impl Problems {
    fn lines(&mut self, path: &Path, errors: &[LineError]) {
        for e in errors {
            self.push(format!("{}:{}: {}", path.display(), e.line, e.message));
        }
    }

    fn push(&mut self, message: String) {
        eprintln!("{message}");
        self.0.push(message);
    }

    fn finish(self) -> Result<(), CliError> {
        match self.0.len() {
            0 => Ok(()),
            n => Err(CliError::Data(format!(
                "{n} problem(s), see messages above"
            ))),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", path.display())))
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn read<T: DeserializeOwned>(
    path: &Path,
    problems: &mut Problems,
) -> Result<Vec<(usize, T)>, CliError> {
    let read: JsonlRead<T> = read_jsonl(open(path)?).map_err(data_err)?;
    problems.lines(path, &read.errors);
    Ok(read.records)
}

fn read_samples(path: &Path, problems: &mut Problems) -> Result<Vec<StorySample>, CliError> {
    let mut out = Vec::new();
    for (line, s) in read::<StorySample>(path, problems)? {
        if s.images.is_empty() {
            problems.push(format!(
                "{}:{line}: sample {} has no images",
                path.display(),
                s.sample_id
            ));
        } else if let Some(img) = s.images.iter().find(|i| i.width == 0 || i.height == 0) {
            problems.push(format!(
                "{}:{line}: image {} has zero size",
                path.display(),
                img.image_id
            ));
        } else {
            out.push(s);
        }
    }
    Ok(out)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(data_err)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(data_err)
}

fn print_summary(value: &serde_json::Value) {
    println!("{value}");
}

pub fn cmd_validate(input: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let mut problems = Problems::default();
    let samples = read_samples(input, &mut problems)?;
    let reports: Vec<SampleReport> = samples
        .iter()
        .map(|s| SampleReport {
            sample_id: s.sample_id.clone(),
            report: check_output(&s.images, &s.cot_text, &s.story_text).0,
        })
        .collect();
    match out {
        Some(path) => write_jsonl(create(path)?, &reports).map_err(data_err)?,
        None => write_jsonl(std::io::stdout().lock(), &reports).map_err(data_err)?,
    }
    let rate = well_structured_rate(&samples).ok();
    let valid = reports.iter().filter(|r| r.report.valid).count();
    let mut by_rule: BTreeMap<RuleId, usize> = BTreeMap::new();
    for r in &reports {
        for rule in r.report.rules() {
            *by_rule.entry(rule).or_default() += 1;
        }
    }
    let summary = json!({
        "samples": samples.len(),
        "valid": valid,
        "well_structured_rate": rate,
        "samples_violating": by_rule,
        "line_errors": problems.0.len(),
    });
    if out.is_some() {
        print_summary(&summary);
    } else {
        eprintln!("{summary}");
    }
    problems.finish()
}

fn missing_output_row(sample: &StorySample, scorer: &Scorer) -> CandidateResponse {
    CandidateResponse {
        sample_id: sample.sample_id.clone(),
        candidate: None,
        is_real: sample.is_real,
        images: sample.images.clone(),
        cot_text: String::new(),
        story_text: String::new(),
        reward: RewardBreakdown::invalid(
            &scorer.config,
            vec![Violation::new(
                RuleId::MissingOutput,
                "no generated output for this sample",
            )],
        ),
    }
}

pub fn cmd_score(
    inputs: &[PathBuf],
    outputs: &Path,
    out: &Path,
    file: &FileConfig,
    flags: &RewardFlags,
) -> Result<(), CliError> {
    let scorer = Scorer::new(apply_reward_flags(file.reward, flags)?);
    let mut problems = Problems::default();
    let mut samples: BTreeMap<String, StorySample> = BTreeMap::new();
    for path in inputs {
        for s in read_samples(path, &mut problems)? {
            if samples.contains_key(&s.sample_id) {
                problems.push(format!(
                    "{}: duplicate sample {}",
                    path.display(),
                    s.sample_id
                ));
            } else {
                samples.insert(s.sample_id.clone(), s);
            }
        }
    }

    let mut grouped: BTreeMap<String, BTreeMap<Option<usize>, GeneratedOutput>> = BTreeMap::new();
    for (line, o) in read::<GeneratedOutput>(outputs, &mut problems)? {
        if !samples.contains_key(&o.sample_id) {
            problems.push(format!(
                "{}:{line}: unknown sample {}",
                outputs.display(),
                o.sample_id
            ));
            continue;
        }
        let slot = grouped.entry(o.sample_id.clone()).or_default();
        if slot.contains_key(&o.candidate) {
            problems.push(format!(
                "{}:{line}: duplicate output for {} candidate {:?}",
                outputs.display(),
                o.sample_id,
                o.candidate
            ));
            continue;
        }
        slot.insert(o.candidate, o);
    }

    let mut rows = Vec::new();
    let mut missing = 0;
    for (id, sample) in &samples {
        match grouped.get(id) {
            None => {
                missing += 1;
                rows.push(missing_output_row(sample, &scorer));
            }
            Some(cands) => {
                for o in cands.values() {
                    let reward =
                        scorer.score(&sample.images, sample.is_real, &o.cot_text, &o.story_text);
                    rows.push(CandidateResponse {
                        sample_id: id.clone(),
                        candidate: o.candidate,
                        is_real: sample.is_real,
                        images: sample.images.clone(),
                        cot_text: o.cot_text.clone(),
                        story_text: o.story_text.clone(),
                        reward,
                    });
                }
            }
        }
    }
    write_jsonl(create(out)?, &rows).map_err(data_err)?;
    let valid = rows.iter().filter(|r| r.reward.valid).count();
    print_summary(&json!({
        "samples": samples.len(),
        "rows": rows.len(),
        "valid": valid,
        "invalid": rows.len() - valid,
        "missing_outputs": missing,
    }));
    problems.finish()
}

pub fn provenance_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".provenance.json");
    PathBuf::from(name)
}

pub fn cmd_synth(input: &Path, out: &Path, extension: Extension) -> Result<(), CliError> {
    let mut problems = Problems::default();
    let real = read_samples(input, &mut problems)?;
    problems.finish()?;
    let idx = CorpusIndex::from_samples(&real).map_err(data_err)?;
    let specs = extend_corpus(&idx, extension);
    let mut samples = Vec::with_capacity(specs.len());
    let mut entries = Vec::with_capacity(specs.len());
    for spec in &specs {
        let story = build_synthetic_story(spec.synthetic_index, &idx, &real).map_err(data_err)?;
        entries.push(ProvenanceEntry {
            sample_id: story.sample.sample_id.clone(),
            synthetic_index: story.synthetic_index,
            distinct_sources: story.distinct_sources(),
            frames: story.provenance.clone(),
        });
        samples.push(story.sample);
    }
    write_jsonl(create(out)?, &samples).map_err(data_err)?;
    let sidecar = provenance_path(out);
    write_json(
        &sidecar,
        &ProvenanceFile {
            extension,
            real_count: real.len(),
            synthetic_count: samples.len(),
            stories: entries,
        },
    )?;
    print_summary(&json!({
        "real": real.len(),
        "synthetic": samples.len(),
        "provenance": sidecar.display().to_string(),
    }));
    Ok(())
}

pub fn cmd_pairs(input: &Path, out: &Path, min_margin: f64) -> Result<(), CliError> {
    let mut problems = Problems::default();
    let scored: Vec<CandidateResponse> = read(input, &mut problems)?
        .into_iter()
        .map(|(_, c)| c)
        .collect();
    let (pairs, summary) = build_corpus_pairs(scored, min_margin);
    let records: Vec<PairRecord> = pairs.iter().map(PairRecord::from).collect();
    write_jsonl(create(out)?, &records).map_err(data_err)?;
    print_summary(&serde_json::to_value(&summary).map_err(data_err)?);
    problems.finish()
}

pub fn cmd_eval(
    input: &Path,
    outputs: &Path,
    out: &Path,
    file: &FileConfig,
    iou: Option<f64>,
) -> Result<(), CliError> {
    let cfg = match_config(file, iou)?;
    let mut problems = Problems::default();
    let gold = read_samples(input, &mut problems)?;
    let ids: BTreeSet<&str> = gold.iter().map(|s| s.sample_id.as_str()).collect();

    // lowest candidate index per sample
    let mut chosen: BTreeMap<String, GeneratedOutput> = BTreeMap::new();
    for (line, o) in read::<GeneratedOutput>(outputs, &mut problems)? {
        if !ids.contains(o.sample_id.as_str()) {
            continue;
        }
        match chosen.get(&o.sample_id) {
            Some(prev) if prev.candidate <= o.candidate => {
                if prev.candidate == o.candidate {
                    problems.push(format!(
                        "{}:{line}: duplicate output for {}",
                        outputs.display(),
                        o.sample_id
                    ));
                }
            }
            _ => {
                chosen.insert(o.sample_id.clone(), o);
            }
        }
    }

    let items: Vec<EvalItem> = gold
        .iter()
        .map(|s| {
            let pred = chosen.get(&s.sample_id);
            EvalItem {
                sample_id: s.sample_id.clone(),
                images: s.images.clone(),
                gold_cot: s.cot_text.clone(),
                gold_story: s.story_text.clone(),
                pred_cot: pred.map(|p| p.cot_text.clone()),
                pred_story: pred.map(|p| p.story_text.clone()),
            }
        })
        .collect();
    let report = evaluate(&items, &cfg, &Lexicon::default()).map_err(data_err)?;

    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out.display())))?;
    let metrics = MetricsFile {
        metrics: MetricsRow::from(&report),
        report,
    };
    write_json(&out.join("metrics.json"), &metrics)?;
    let write_csv = |name: &str, text: String| {
        std::fs::write(out.join(name), text)
            .map_err(|e| CliError::Usage(format!("cannot write {name}: {e}")))
    };
    write_csv("persistence.csv", metrics.report.persistence.to_csv())?;
    write_csv("pronouns.csv", metrics.report.pronouns.to_csv())?;
    print_summary(&serde_json::to_value(metrics.metrics).map_err(data_err)?);
    problems.finish()
}
