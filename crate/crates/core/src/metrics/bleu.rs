//! BLEU-4 with uniform weights and brevity penalty.
//!
//! Clipped n-gram matches and candidate n-gram totals are summed over the
//! corpus before taking precisions. An order with zero matches uses
//! `(0 + 1) / (total + 1)` instead of zero; orders with matches are not
//! smoothed, so well-matched inputs give plain BLEU. Reference length is
//! the closest reference length per candidate, shorter on ties.

use std::collections::HashMap;

const MAX_ORDER: usize = 4;

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            let key: Vec<&str> = w.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    matches: [usize; MAX_ORDER],
    totals: [usize; MAX_ORDER],
    cand_len: usize,
    ref_len: usize,
}

fn sentence_stats<T: AsRef<str>>(candidate: &[T], references: &[Vec<T>]) -> Stats {
    let mut stats = Stats {
        cand_len: candidate.len(),
        ..Default::default()
    };
    for n in 1..=MAX_ORDER {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
        for r in references {
            for (gram, count) in ngram_counts(r, n) {
                let slot = max_ref.entry(gram).or_insert(0);
                *slot = (*slot).max(count);
            }
        }
        stats.totals[n - 1] = cand.values().sum();
        stats.matches[n - 1] = cand
            .iter()
            .map(|(gram, &c)| c.min(max_ref.get(gram).copied().unwrap_or(0)))
            .sum();
    }
    stats.ref_len = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(candidate.len()), len))
        .unwrap_or(0);
    stats
}

fn score(stats: &Stats) -> f64 {
    if stats.cand_len == 0 {
        return 0.0;
    }
    let log_sum: f64 = (0..MAX_ORDER)
        .map(|i| {
            let (m, t) = (stats.matches[i], stats.totals[i]);
            let p = if m > 0 {
                m as f64 / t as f64
            } else {
                1.0 / (t as f64 + 1.0)
            };
            p.ln()
        })
        .sum();
    let bp = if stats.cand_len > stats.ref_len {
        1.0
    } else {
        (1.0 - stats.ref_len as f64 / stats.cand_len as f64).exp()
    };
    bp * (log_sum / MAX_ORDER as f64).exp()
}

/// Sentence-level BLEU-4 of one candidate against its references.
pub fn bleu4<T: AsRef<str>>(candidate: &[T], references: &[Vec<T>]) -> f64 {
    score(&sentence_stats(candidate, references))
}

/// Corpus BLEU-4 over `(candidate, references)` pairs.
pub fn corpus_bleu4<T: AsRef<str>>(pairs: &[(Vec<T>, Vec<Vec<T>>)]) -> f64 {
    let mut total = Stats::default();
    for (cand, refs) in pairs {
        let s = sentence_stats(cand, refs);
        for i in 0..MAX_ORDER {
            total.matches[i] += s.matches[i];
            total.totals[i] += s.totals[i];
        }
        total.cand_len += s.cand_len;
        total.ref_len += s.ref_len;
    }
    score(&total)
}
