//! Python bindings: reward scoring, validation, synthetic sampling, DPO
//! loss and the evaluation metrics.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use storyground::metrics;
use storyground::preference::{self, DpoInputs, DEFAULT_DPO_BETA};
use storyground::reward::Scorer;
use storyground::story;
use storyground::synthetic::{self, CorpusIndex, Extension};
use storyground::validate::check_output;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "ImageMeta", get_all, set_all, from_py_object)]
#[derive(Clone)]
pub struct PyImageMeta {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub source_story_id: String,
}

#[pymethods]
impl PyImageMeta {
    #[new]
    #[pyo3(signature = (image_id, width, height, source_story_id = String::new()))]
    fn new(image_id: String, width: u32, height: u32, source_story_id: String) -> PyResult<Self> {
        if width == 0 || height == 0 {
            return Err(value_err("image width and height must be positive"));
        }
        Ok(Self {
            image_id,
            width,
            height,
            source_story_id,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "ImageMeta({:?}, {}, {}, {:?})",
            self.image_id, self.width, self.height, self.source_story_id
        )
    }
}

impl From<&PyImageMeta> for story::ImageMeta {
    fn from(m: &PyImageMeta) -> Self {
        story::ImageMeta::new(
            m.image_id.clone(),
            m.width,
            m.height,
            m.source_story_id.clone(),
        )
    }
}

fn images(list: &[PyImageMeta]) -> Vec<story::ImageMeta> {
    list.iter().map(Into::into).collect()
}

#[pyclass(name = "RewardConfig", get_all, set_all, from_py_object)]
#[derive(Clone)]
pub struct PyRewardConfig {
    pub w_reid: f64,
    pub w_ground: f64,
    pub alpha: f64,
    pub beta_reid: f64,
    pub gamma: f64,
    pub delta: f64,
    pub invalid_penalty: f64,
}

impl From<storyground::RewardConfig> for PyRewardConfig {
    fn from(c: storyground::RewardConfig) -> Self {
        Self {
            w_reid: c.w_reid,
            w_ground: c.w_ground,
            alpha: c.alpha,
            beta_reid: c.beta_reid,
            gamma: c.gamma,
            delta: c.delta,
            invalid_penalty: c.invalid_penalty,
        }
    }
}

impl From<&PyRewardConfig> for storyground::RewardConfig {
    fn from(c: &PyRewardConfig) -> Self {
        Self {
            w_reid: c.w_reid,
            w_ground: c.w_ground,
            alpha: c.alpha,
            beta_reid: c.beta_reid,
            gamma: c.gamma,
            delta: c.delta,
            invalid_penalty: c.invalid_penalty,
        }
    }
}

#[pymethods]
impl PyRewardConfig {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut cfg = PyRewardConfig::from(storyground::RewardConfig::default());
        if let Some(kw) = overrides {
            for (key, value) in kw.iter() {
                let key: String = key.extract()?;
                let value: f64 = value.extract()?;
                let slot = match key.as_str() {
                    "w_reid" => &mut cfg.w_reid,
                    "w_ground" => &mut cfg.w_ground,
                    "alpha" => &mut cfg.alpha,
                    "beta_reid" => &mut cfg.beta_reid,
                    "gamma" => &mut cfg.gamma,
                    "delta" => &mut cfg.delta,
                    "invalid_penalty" => &mut cfg.invalid_penalty,
                    other => return Err(value_err(format!("unknown config field {other:?}"))),
                };
                *slot = value;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> PyResult<()> {
        storyground::RewardConfig::from(self)
            .validate()
            .map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", storyground::RewardConfig::from(self))
    }
}

#[pyclass(name = "RewardBreakdown", get_all, frozen)]
pub struct PyRewardBreakdown {
    pub valid: bool,
    pub r_char: Option<f64>,
    pub r_obj: Option<f64>,
    pub r_reid: Option<f64>,
    pub r_ground: Option<f64>,
    pub total: f64,
    /// `(rule_id, message)` pairs.
    pub violations: Vec<(String, String)>,
    json: String,
}

impl From<storyground::RewardBreakdown> for PyRewardBreakdown {
    fn from(b: storyground::RewardBreakdown) -> Self {
        let json = serde_json::to_string(&b).expect("breakdown serializes");
        Self {
            valid: b.valid,
            r_char: b.r_char,
            r_obj: b.r_obj,
            r_reid: b.r_reid,
            r_ground: b.r_ground,
            total: b.total,
            violations: b
                .violations
                .into_iter()
                .map(|v| (v.rule_id.as_str().to_string(), v.message))
                .collect(),
            json,
        }
    }
}

#[pymethods]
impl PyRewardBreakdown {
    /// JSON identical to the CLI and HTTP service output.
    fn to_json(&self) -> String {
        self.json.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "RewardBreakdown(valid={}, total={})",
            self.valid, self.total
        )
    }
}

/// Scores a generated chain-of-thought and story for an image sequence.
#[pyfunction]
#[pyo3(signature = (images, is_real, cot_text, story_text, config = None))]
fn compute_reward(
    images: Vec<PyImageMeta>,
    is_real: bool,
    cot_text: &str,
    story_text: &str,
    config: Option<PyRewardConfig>,
) -> PyResult<PyRewardBreakdown> {
    let cfg = config.as_ref().map(Into::into).unwrap_or_default();
    storyground::RewardConfig::validate(&cfg).map_err(value_err)?;
    let metas = crate::images(&images);
    Ok(Scorer::new(cfg)
        .score(&metas, is_real, cot_text, story_text)
        .into())
}

/// Returns `(valid, [(rule_id, message), ...])`.
#[pyfunction]
fn validate(
    images: Vec<PyImageMeta>,
    cot_text: &str,
    story_text: &str,
) -> (bool, Vec<(String, String)>) {
    let (report, _) = check_output(&crate::images(&images), cot_text, story_text);
    let violations = report
        .violations
        .into_iter()
        .map(|v| (v.rule_id.as_str().to_string(), v.message))
        .collect();
    (report.valid, violations)
}

/// Returns `(plain_text, [(kind, [ids], inner_text, frame_index), ...])`.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn parse_story(text: &str) -> PyResult<(String, Vec<(String, Vec<String>, String, usize)>)> {
    let story = story::parse_story(text).map_err(value_err)?;
    let tags = story
        .tags
        .iter()
        .map(|t| {
            let ids = t.entity_ids.iter().map(ToString::to_string).collect();
            (
                t.kind.name().to_string(),
                ids,
                t.inner_text.clone(),
                t.frame_index,
            )
        })
        .collect();
    Ok((story.plain_text, tags))
}

/// Round-trips story markup to its canonical form.
#[pyfunction]
fn render_story(text: &str) -> PyResult<String> {
    story::parse_story(text)
        .map(|s| story::render_story(&s))
        .map_err(value_err)
}

fn corpus_index(image_counts: Vec<usize>) -> PyResult<CorpusIndex> {
    CorpusIndex::new(image_counts).map_err(value_err)
}

/// `(story_idx, img_idx)` for frame `i` of synthetic story `s`.
#[pyfunction]
fn sample_pick(s: usize, i: usize, image_counts: Vec<usize>) -> PyResult<(usize, usize)> {
    let p = synthetic::sample_pick(s, i, &corpus_index(image_counts)?);
    Ok((p.story_idx, p.img_idx))
}

/// Picks for every synthetic story; `ratio` is "double", "half" or a count.
#[pyfunction]
#[pyo3(signature = (image_counts, ratio = "double"))]
fn extend_corpus(image_counts: Vec<usize>, ratio: &str) -> PyResult<Vec<Vec<(usize, usize)>>> {
    let extension = match ratio {
        "double" => Extension::Double,
        "half" => Extension::Half,
        n => Extension::Count(
            n.parse()
                .map_err(|_| value_err(format!("bad ratio {n:?}")))?,
        ),
    };
    let idx = corpus_index(image_counts)?;
    Ok(synthetic::extend_corpus(&idx, extension)
        .into_iter()
        .map(|spec| {
            spec.picks
                .iter()
                .map(|p| (p.story_idx, p.img_idx))
                .collect()
        })
        .collect())
}

#[pyfunction]
#[pyo3(signature = (logp_policy_chosen, logp_policy_rejected, logp_ref_chosen, logp_ref_rejected, beta = DEFAULT_DPO_BETA))]
fn dpo_loss(
    logp_policy_chosen: f64,
    logp_policy_rejected: f64,
    logp_ref_chosen: f64,
    logp_ref_rejected: f64,
    beta: f64,
) -> PyResult<f64> {
    preference::dpo_loss(&DpoInputs {
        logp_policy_chosen,
        logp_policy_rejected,
        logp_ref_chosen,
        logp_ref_rejected,
        beta,
    })
    .map_err(value_err)
}

#[pyfunction]
fn average_precision_11pt(outcomes: Vec<bool>, gold_count: usize) -> f64 {
    metrics::average_precision_11pt(&outcomes, gold_count)
}

#[pyfunction]
fn bleu4(candidate: Vec<String>, references: Vec<Vec<String>>) -> f64 {
    metrics::bleu4(&candidate, &references)
}

/// Returns `(precision, recall, f)`.
#[pyfunction]
fn rouge_l(candidate: Vec<String>, reference: Vec<String>) -> (f64, f64, f64) {
    let s = metrics::rouge_l(&candidate, &reference);
    (s.p, s.r, s.f)
}

#[pymodule]
fn storyground_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImageMeta>()?;
    m.add_class::<PyRewardConfig>()?;
    m.add_class::<PyRewardBreakdown>()?;
    m.add_function(wrap_pyfunction!(compute_reward, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(parse_story, m)?)?;
    m.add_function(wrap_pyfunction!(render_story, m)?)?;
    m.add_function(wrap_pyfunction!(sample_pick, m)?)?;
    m.add_function(wrap_pyfunction!(extend_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(dpo_loss, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision_11pt, m)?)?;
    m.add_function(wrap_pyfunction!(bleu4, m)?)?;
    m.add_function(wrap_pyfunction!(rouge_l, m)?)?;
    Ok(())
}
