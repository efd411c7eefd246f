//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use storyground::fixtures::{self, golden_corpus, single_rule_fixtures, EntitySpec, FixtureRng};
use storyground::metrics::{average_precision_11pt, bleu4, lcs_len, rouge_l, PersistenceCurve};
use storyground::preference::{
    build_corpus_pairs, dpo_loss, CandidateResponse, DpoInputs, PairRecord,
};
use storyground::reward::{combine, Scorer};
use storyground::story::{render_cot, EntityClass};
use storyground::synthetic::{extend_corpus, sample_pick, synthetic_spec, CorpusIndex, Extension};
use storyground::validate::Violation;
use storyground::{
    compute_reward, parse_cot, parse_story, render_story, RewardBreakdown, RewardConfig,
    StorySample,
};
use storyground_cli::commands::{MetricsFile, ProvenanceFile};
use storyground_cli::ScoreRequest;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 -----------------------------------------------------------------------

fn reward_gate() -> Outcome {
    let start = Instant::now();
    let cfg = RewardConfig::default();
    let all = single_rule_fixtures();
    ensure(all.len() >= 8, || format!("only {} fixtures", all.len()))?;
    let mut rules = Vec::new();
    for f in &all {
        let bad = compute_reward(
            &f.violating,
            &f.violating.cot_text,
            &f.violating.story_text,
            &cfg,
        );
        ensure(bad.total == -1.0, || {
            format!("{}: total {}", f.rule, bad.total)
        })?;
        ensure(bad.violations.iter().any(|v| v.rule_id == f.rule), || {
            format!("{}: report names {:?}", f.rule, bad.violations)
        })?;
        let good = compute_reward(
            &f.conforming,
            &f.conforming.cot_text,
            &f.conforming.story_text,
            &cfg,
        );
        ensure(good.valid && (0.0..=1.0).contains(&good.total), || {
            format!("{} twin scored {}", f.rule, good.total)
        })?;
        rules.push(f.rule.as_str());
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{} rules gated to -1.0 in {elapsed:?}: {}",
        rules.len(),
        rules.join(", ")
    ))
}

// 2 -----------------------------------------------------------------------

/// Persistence oracle from the cast alone: frames present over
/// (entities x frames).
fn persistence_oracle(cast: &[EntitySpec], frames: usize, want: fn(EntityClass) -> bool) -> f64 {
    let picked: Vec<&EntitySpec> = cast.iter().filter(|e| want(e.id.class())).collect();
    if picked.is_empty() {
        return 0.0;
    }
    let seen: usize = picked.iter().map(|e| e.frames.len()).sum();
    (seen as f64 / (picked.len() * frames) as f64).min(1.0)
}

fn inversion_symmetry() -> Outcome {
    let cfg = RewardConfig::default();
    let mut rng = FixtureRng::new(0xC0FFEE);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let frames = 1 + rng.below(8);
        let cast = fixtures::random_entities(&mut rng, frames);
        let real = fixtures::sample(&format!("inv{k}"), true, frames, &cast);
        let synth = StorySample {
            is_real: false,
            ..real.clone()
        };
        let a = compute_reward(&real, &real.cot_text, &real.story_text, &cfg);
        let b = compute_reward(&synth, &real.cot_text, &real.story_text, &cfg);
        let (Some(ra), Some(rb)) = (a.r_reid, b.r_reid) else {
            return Err(format!("fixture {k} invalid: {:?}", a.violations));
        };
        worst = worst.max((ra + rb - 1.0).abs());
        ensure((ra + rb - 1.0).abs() <= 1e-12, || {
            format!("fixture {k}: {ra} + {rb}")
        })?;
        let c = persistence_oracle(&cast, frames, EntityClass::is_character);
        let o = persistence_oracle(&cast, frames, |c| c == EntityClass::Object);
        ensure(a.r_char == Some(c) && a.r_obj == Some(o), || {
            format!(
                "fixture {k}: r_char {:?} vs {c}, r_obj {:?} vs {o}",
                a.r_char, a.r_obj
            )
        })?;
    }
    Ok(format!("100 random casts, max |sum - 1| = {worst:e}"))
}

// 3 -----------------------------------------------------------------------

fn weighted_total() -> Outcome {
    let total = combine(0.34, 0.15, &RewardConfig::default());
    ensure((total - 0.245).abs() <= 1e-12, || format!("total {total}"))?;
    Ok(format!("0.5 * 0.34 + 0.5 * 0.15 = {total}"))
}

// 4 -----------------------------------------------------------------------

fn synthetic_determinism() -> Outcome {
    let mut rng = FixtureRng::new(50);
    let counts: Vec<usize> = (0..50).map(|_| 1 + rng.below(12)).collect();
    let idx = CorpusIndex::new(counts).map_err(|e| e.to_string())?;
    let a = extend_corpus(&idx, Extension::Double);
    let b = extend_corpus(&idx, Extension::Double);
    ensure(a == b && a.len() == 50, || "spec lists differ".into())?;
    ensure(extend_corpus(&idx, Extension::Half).len() == 25, || {
        "half ratio".into()
    })?;

    let big = CorpusIndex::new(vec![10; 4178]).map_err(|e| e.to_string())?;
    let pick = sample_pick(1, 2, &big);
    ensure(pick.story_idx == 79, || {
        format!("story_idx {}", pick.story_idx)
    })?;
    for s in 0..=10_000 {
        let n = synthetic_spec(s, &big).frame_count;
        ensure((5..=15).contains(&n), || format!("s={s}: n={n}"))?;
    }
    Ok("N=50 spec lists identical; (s=1, i=2, N=4178) -> 79; n in [5, 15] for s <= 10000".into())
}

// 5 -----------------------------------------------------------------------

fn dpo() -> Outcome {
    let at = |z: f64| {
        dpo_loss(&DpoInputs {
            logp_policy_chosen: z / 0.1,
            logp_policy_rejected: 0.0,
            logp_ref_chosen: 0.0,
            logp_ref_rejected: 0.0,
            beta: 0.1,
        })
        .map_err(|e| e.to_string())
    };
    let identity = dpo_loss(&DpoInputs {
        logp_policy_chosen: -12.5,
        logp_policy_rejected: -30.25,
        logp_ref_chosen: -12.5,
        logp_ref_rejected: -30.25,
        beta: 0.1,
    })
    .map_err(|e| e.to_string())?;
    ensure((identity - std::f64::consts::LN_2).abs() <= 1e-9, || {
        format!("identity {identity}")
    })?;
    let one = at(1.0)?;
    ensure((one - 0.313262).abs() <= 1e-6, || {
        format!("z=1 gives {one}")
    })?;
    let mut prev = f64::INFINITY;
    for k in 0..=4000 {
        let z = -20.0 + k as f64 * 0.01;
        let l = at(z)?;
        ensure(l < prev, || format!("not decreasing at z={z}"))?;
        prev = l;
    }
    Ok(format!(
        "identity {identity:.12}, z=1 {one:.9}, strictly decreasing on 4001 grid points"
    ))
}

// 6 -----------------------------------------------------------------------

fn random_candidates(rng: &mut FixtureRng, n: usize) -> Vec<CandidateResponse> {
    let cfg = RewardConfig::default();
    (0..n)
        .map(|k| {
            let sample = rng.below(200);
            let reward = match rng.below(6) {
                0 => RewardBreakdown::invalid(
                    &cfg,
                    vec![Violation::new(storyground::RuleId::Phases, "x")],
                ),
                // coarse grid so ties and near-margin gaps occur
                _ => {
                    let total = rng.below(41) as f64 * 0.025;
                    RewardBreakdown {
                        valid: true,
                        r_char: None,
                        r_obj: None,
                        r_reid: None,
                        r_ground: None,
                        total,
                        violations: Vec::new(),
                    }
                }
            };
            CandidateResponse {
                sample_id: format!("s{sample:03}"),
                candidate: Some(k),
                is_real: !sample.is_multiple_of(3),
                images: Vec::new(),
                cot_text: format!("cot{}", rng.below(3)),
                story_text: format!("story{}", rng.below(3)),
                reward,
            }
        })
        .collect()
}

fn pair_margin() -> Outcome {
    let mut rng = FixtureRng::new(6);
    let cands = random_candidates(&mut rng, 1000);
    let (pairs, summary) = build_corpus_pairs(cands.clone(), 0.05);
    for p in &pairs {
        ensure(p.margin >= 0.05, || {
            format!("{} margin {}", p.sample_id, p.margin)
        })?;
    }
    // oracle: a pair exists exactly where max - min >= 0.05
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for c in &cands {
        groups.entry(&c.sample_id).or_default().push(c.reward.total);
    }
    let expected = groups
        .values()
        .filter(|t| {
            let max = t.iter().copied().fold(f64::MIN, f64::max);
            let min = t.iter().copied().fold(f64::MAX, f64::min);
            t.len() >= 2 && max - min >= 0.05
        })
        .count();
    ensure(expected == pairs.len(), || {
        format!("{} pairs, oracle {expected}", pairs.len())
    })?;

    for round in 0..5 {
        let mut shuffled = cands.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.below(i + 1));
        }
        let (again, _) = build_corpus_pairs(shuffled, 0.05);
        ensure(again == pairs, || {
            format!("shuffle {round} changed the pairs")
        })?;
    }
    let min = summary.margin.map(|m| m.min).unwrap_or(f64::NAN);
    Ok(format!(
        "{} pairs from 1000 candidates, min margin {min}, stable under 5 shuffles",
        pairs.len()
    ))
}

// 7 -----------------------------------------------------------------------

fn brute_force_ap(outcomes: &[bool], gold: usize) -> f64 {
    if gold == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for level in 0..=10usize {
        let mut best = 0.0f64;
        for k in 1..=outcomes.len() {
            let tp = outcomes[..k].iter().filter(|&&b| b).count();
            if 10 * tp >= level * gold {
                best = best.max(tp as f64 / k as f64);
            }
        }
        total += best;
    }
    total / 11.0
}

fn ap_oracle() -> Outcome {
    let mut checked = 0;
    for len in 0..=10usize {
        for mask in 0u32..(1 << len) {
            let outcomes: Vec<bool> = (0..len).map(|i| mask >> i & 1 == 1).collect();
            let tps = outcomes.iter().filter(|&&b| b).count();
            for gold in tps..=tps + 3 {
                let got = average_precision_11pt(&outcomes, gold);
                let want = brute_force_ap(&outcomes, gold);
                ensure(got == want, || {
                    format!("{outcomes:?}/{gold}: {got} vs {want}")
                })?;
                checked += 1;
            }
        }
    }
    let worked = average_precision_11pt(&[true, false, true], 2);
    ensure((worked - 0.84848).abs() <= 1e-5, || {
        format!("worked example {worked}")
    })?;
    Ok(format!(
        "{checked} rankings equal brute force; [TP, FP, TP]/2 = {worked:.5}"
    ))
}

// 8 -----------------------------------------------------------------------

/// Values from NLTK BLEU (default weights) and the rouge-score package
/// (ROUGE-L against the first reference).
const LANGUAGE_FIXTURES: [(&str, &[&str], f64, [f64; 3]); 5] = [
    (
        "the cat sat on the mat today",
        &["the cat sat on the mat"],
        0.809106711570,
        [0.857142857143, 1.0, 0.923076923077],
    ),
    (
        "a man walks his dog in the park at noon",
        &[
            "a man walks his dog in the park",
            "the man walked a dog in a park at noon",
        ],
        0.889139705019,
        [0.8, 1.0, 0.888888888889],
    ),
    (
        "she opens the old door and steps into the dark hall",
        &["she opens the old wooden door and steps into the hall"],
        0.603414899242,
        [0.909090909091, 0.909090909091, 0.909090909091],
    ),
    (
        "they ride their bikes down the long hill to the river",
        &["the kids ride their bikes down the hill to the river bank"],
        0.536655197919,
        [0.818181818182, 0.75, 0.782608695652],
    ),
    (
        "the detective reads the letter and frowns at the signature on the letter",
        &[
            "the detective reads a letter and frowns at the signature",
            "frowning the detective reads the letter",
        ],
        0.637542212013,
        [0.692307692308, 0.9, 0.782608695652],
    ),
];

fn toks(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

fn language_metrics() -> Outcome {
    let mut worst = 0.0f64;
    for (cand, refs, bleu, [p, r, f]) in LANGUAGE_FIXTURES {
        let c = toks(cand);
        let rs: Vec<Vec<&str>> = refs.iter().map(|x| toks(x)).collect();
        let b = bleu4(&c, &rs);
        let rl = rouge_l(&c, &rs[0]);
        for (got, want) in [(b, bleu), (rl.p, p), (rl.r, r), (rl.f, f)] {
            worst = worst.max((got - want).abs());
            ensure((got - want).abs() <= 1e-4, || {
                format!("{cand:?}: {got} vs {want}")
            })?;
        }
        ensure(bleu4(&c, std::slice::from_ref(&c)) == 1.0, || {
            "bleu identity".into()
        })?;
        ensure(rouge_l(&c, &c).f == 1.0, || "rouge identity".into())?;
        ensure(
            lcs_len(&c, &rs[0]) as f64 == (rl.r * rs[0].len() as f64).round(),
            || "lcs".into(),
        )?;
    }
    Ok(format!(
        "5 fixtures within {worst:.1e} of reference values; identities exactly 1.0"
    ))
}

// 9 -----------------------------------------------------------------------

fn parser_round_trip() -> Outcome {
    let corpus = golden_corpus();
    ensure(corpus.len() == 50, || format!("{} stories", corpus.len()))?;
    for s in &corpus {
        let parsed = parse_story(&s.story_text).map_err(|e| format!("{}: {e}", s.sample_id))?;
        let rendered = render_story(&parsed);
        let reparsed = parse_story(&rendered).map_err(|e| format!("{}: {e}", s.sample_id))?;
        ensure(parsed.same_structure(&reparsed), || {
            format!("{}: structure changed", s.sample_id)
        })?;
        let markup: usize = parsed
            .tags
            .iter()
            .map(|t| {
                s.story_text[t.char_span.clone()].find('>').unwrap() + 1 + t.kind.name().len() + 3
            })
            .sum();
        ensure(
            parsed.plain_text.len() + markup == s.story_text.len(),
            || format!("{}: plain text length not conserved", s.sample_id),
        )?;
        let doc = parse_cot(&s.cot_text, &s.images).map_err(|e| format!("{}: {e}", s.sample_id))?;
        let again =
            parse_cot(&render_cot(&doc, s.images.len()), &s.images).map_err(|e| e.to_string())?;
        ensure(again == doc, || {
            format!("{}: chain-of-thought changed", s.sample_id)
        })?;
    }
    Ok("50 golden stories: parse -> render -> parse equal, plain text length conserved".into())
}

// 10 ----------------------------------------------------------------------

fn run_bin(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_storyground"))
        .args(args)
        .current_dir(dir)
        .env_remove("GROUND_REWARD_CONFIG")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn parse_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, String> {
    common::read_lines(path)
        .iter()
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))
        })
        .collect()
}

fn check_csv(path: &Path, header: &str, columns: usize) -> Result<usize, String> {
    let lines = common::read_lines(path);
    ensure(lines.first().map(String::as_str) == Some(header), || {
        format!("{} header", path.display())
    })?;
    for l in &lines[1..] {
        let cells: Vec<&str> = l.split(',').collect();
        ensure(cells.len() == columns, || {
            format!("{}: {l}", path.display())
        })?;
        ensure(cells[1..].iter().all(|c| c.parse::<f64>().is_ok()), || {
            format!("{}: {l}", path.display())
        })?;
    }
    Ok(lines.len() - 1)
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let corpus = common::real_corpus(50, 10);
    let real: Vec<StorySample> = corpus.iter().map(|(s, _)| s.clone()).collect();
    common::write_jsonl(&d.join("real.jsonl"), &real);

    let start = Instant::now();
    run_bin(
        d,
        &[
            "synth",
            "--input",
            "real.jsonl",
            "--out",
            "synth.jsonl",
            "--ratio",
            "double",
        ],
    )?;
    let synthetic: Vec<StorySample> = parse_rows(&d.join("synth.jsonl"))?;
    let provenance: ProvenanceFile = serde_json::from_str(
        &std::fs::read_to_string(d.join("synth.jsonl.provenance.json"))
            .map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        synthetic.len() == 50 && provenance.stories.len() == 50,
        || "synthetic count".into(),
    )?;

    let mut outputs: Vec<_> = corpus
        .iter()
        .flat_map(|(s, cast)| common::outputs_for(&s.sample_id, s.images.len(), cast))
        .collect();
    outputs.extend(common::synthetic_outputs(&synthetic, 11));
    common::write_jsonl(&d.join("outputs.jsonl"), &outputs);

    run_bin(
        d,
        &[
            "score",
            "--input",
            "real.jsonl",
            "synth.jsonl",
            "--outputs",
            "outputs.jsonl",
            "--out",
            "scored.jsonl",
        ],
    )?;
    let scored: Vec<CandidateResponse> = parse_rows(&d.join("scored.jsonl"))?;
    ensure(scored.len() == 300, || {
        format!("{} scored rows", scored.len())
    })?;

    run_bin(
        d,
        &["pairs", "--input", "scored.jsonl", "--out", "pairs.jsonl"],
    )?;
    let pairs: Vec<PairRecord> = parse_rows(&d.join("pairs.jsonl"))?;
    ensure(
        !pairs.is_empty() && pairs.iter().all(|p| p.margin >= 0.05),
        || "pair margins".into(),
    )?;

    run_bin(
        d,
        &[
            "eval",
            "--input",
            "real.jsonl",
            "--outputs",
            "outputs.jsonl",
            "--out",
            "eval",
        ],
    )?;
    let metrics: MetricsFile = serde_json::from_str(
        &std::fs::read_to_string(d.join("eval/metrics.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let curve: &PersistenceCurve = &metrics.report.persistence;
    let rows = check_csv(
        &d.join("eval/persistence.csv"),
        "n,characters,objects,total",
        4,
    )?;
    ensure(rows == curve.max_frames, || "persistence rows".into())?;
    check_csv(
        &d.join("eval/pronouns.csv"),
        "pronoun,total,grounded,ungrounded_pct",
        4,
    )?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || {
        format!("pipeline took {elapsed:?}")
    })?;

    // CLI rows versus the HTTP service on 20 payloads, mixing valid and invalid
    let by_sample: BTreeMap<&str, &StorySample> = real
        .iter()
        .chain(&synthetic)
        .map(|s| (s.sample_id.as_str(), s))
        .collect();
    let chosen: Vec<&CandidateResponse> = scored.iter().step_by(14).take(20).collect();
    ensure(chosen.len() == 20, || "payload count".into())?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let mismatches = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
            .await
            .map_err(|e| e.to_string())?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        tokio::spawn(storyground_cli::server::serve(
            listener,
            Arc::new(Scorer::default()),
        ));
        let client = reqwest::Client::new();
        let mut mismatches = Vec::new();
        for row in &chosen {
            let sample = by_sample[row.sample_id.as_str()];
            let req = ScoreRequest {
                images: sample.images.clone(),
                cot_text: row.cot_text.clone(),
                story_text: row.story_text.clone(),
                is_real: sample.is_real,
                config: None,
            };
            let body = serde_json::to_vec(&req).map_err(|e| e.to_string())?;
            let resp = client
                .post(format!("http://{addr}/v1/score"))
                .header("content-type", "application/json")
                .body(body)
                .send()
                .await
                .map_err(|e| e.to_string())?;
            let bytes = resp.bytes().await.map_err(|e| e.to_string())?;
            let http: RewardBreakdown =
                serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
            let bits = |b: &RewardBreakdown| {
                [b.r_char, b.r_obj, b.r_reid, b.r_ground, Some(b.total)]
                    .map(|v| v.map(f64::to_bits))
            };
            let same_bytes =
                bytes.as_ref() == serde_json::to_vec(&row.reward).map_err(|e| e.to_string())?;
            if http != row.reward || bits(&http) != bits(&row.reward) || !same_bytes {
                mismatches.push(row.sample_id.clone());
            }
        }
        Ok::<_, String>(mismatches)
    })?;
    ensure(mismatches.is_empty(), || {
        format!("CLI and HTTP differ on {mismatches:?}")
    })?;
    let invalid = chosen.iter().filter(|r| !r.reward.valid).count();
    Ok(format!(
        "synth -> score -> pairs -> eval in {elapsed:.2?} ({} pairs, F1 {:.3}); 20 payloads ({invalid} invalid) bit-identical over HTTP",
        pairs.len(),
        metrics.metrics.f1
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("reward gate", reward_gate),
        ("inversion symmetry", inversion_symmetry),
        ("weighted total", weighted_total),
        ("synthetic determinism", synthetic_determinism),
        ("DPO loss", dpo),
        ("pair margin", pair_margin),
        ("AP oracle", ap_oracle),
        ("metric cross-checks", language_metrics),
        ("parser round-trip", parser_round_trip),
        ("end-to-end", end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {:>2} {name}: panicked", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
