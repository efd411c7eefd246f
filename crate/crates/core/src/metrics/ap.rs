use crate::error::{Error, Result};

/// 11-point interpolated average precision.
///
/// `outcomes` are predictions in rank order (true = matched). For each
/// recall level r in {0, 0.1, ..., 1.0} the interpolated precision is the
/// best precision over all prefixes whose recall reaches r, or 0 if none
/// does. Recall comparisons are done in integers (`10 * tp >= r * gold`) so
/// the levels are exact.
pub fn average_precision_11pt(outcomes: &[bool], gold_count: usize) -> f64 {
    if gold_count == 0 {
        return 0.0;
    }
    // best precision reached at each cumulative TP count
    let mut best_at_tp = vec![0.0f64; gold_count.min(outcomes.len()) + 1];
    let mut tp = 0usize;
    for (k, &hit) in outcomes.iter().enumerate() {
        if hit {
            tp += 1;
        }
        let precision = tp as f64 / (k + 1) as f64;
        let slot = &mut best_at_tp[tp.min(gold_count)];
        if precision > *slot {
            *slot = precision;
        }
    }
    // suffix maximum: precision over prefixes with at least t true positives
    for t in (0..best_at_tp.len().saturating_sub(1)).rev() {
        best_at_tp[t] = best_at_tp[t].max(best_at_tp[t + 1]);
    }
    let sum: f64 = (0..=10usize)
        .map(|level| {
            // smallest tp with 10 * tp >= level * gold_count
            let needed = (level * gold_count).div_ceil(10);
            best_at_tp.get(needed).copied().unwrap_or(0.0)
        })
        .sum();
    sum / 11.0
}

/// Mean of per-story average precisions.
pub fn map_over_stories(per_story_ap: &[f64]) -> Result<f64> {
    if per_story_ap.is_empty() {
        return Err(Error::InvalidInput("no stories to average".into()));
    }
    Ok(per_story_ap.iter().sum::<f64>() / per_story_ap.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(average_precision_11pt(&[true, true], 2), 1.0);
        assert_eq!(average_precision_11pt(&[false, false], 2), 0.0);
        assert_eq!(average_precision_11pt(&[], 3), 0.0);
        assert_eq!(average_precision_11pt(&[true], 0), 0.0);
        let ap = average_precision_11pt(&[true, false, true], 2);
        assert!((ap - (6.0 + 5.0 * 2.0 / 3.0) / 11.0).abs() < 1e-15);
        assert!((ap - 0.84848).abs() < 1e-5);
    }

    #[test]
    fn partial_recall_only_counts_reached_levels() {
        // one of four found at rank 1: recall 0.25 reaches levels 0, 0.1, 0.2
        let ap = average_precision_11pt(&[true, false], 4);
        assert!((ap - 3.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn map_examples() {
        assert_eq!(map_over_stories(&[1.0]).unwrap(), 1.0);
        assert_eq!(map_over_stories(&[1.0, 0.0]).unwrap(), 0.5);
        assert!(map_over_stories(&[]).is_err());
    }
}
