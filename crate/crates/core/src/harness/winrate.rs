//! Win-rate selection of a combination over validation LLMs.

use crate::error::{Error, Result};

/// Win rate of every entry of one LLM's AUC column against the others,
/// with half credit for ties.
pub fn win_rates(aucs: &[f64]) -> Vec<f64> {
    let k = aucs.len();
    if k < 2 {
        return vec![0.5; k];
    }
    aucs.iter()
        .enumerate()
        .map(|(c, &a)| {
            let mut score = 0.0;
            for (o, &b) in aucs.iter().enumerate() {
                if o != c {
                    if b < a {
                        score += 1.0;
                    } else if b == a {
                        score += 0.5;
                    }
                }
            }
            score / (k - 1) as f64
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct WinRateSelection {
    pub winner: usize,
    /// Mean win rate of each combination over the used LLMs.
    pub mean_win_rates: Vec<f64>,
    /// Columns of the table that entered the average.
    pub used_llms: Vec<usize>,
    /// Columns dropped because some AUC was undefined.
    pub dropped_llms: Vec<usize>,
}

/// Pick the combination with the highest mean win rate.
///
/// `table[c][m]` is the AUC of combination `c` on validation LLM `m`; LLM
/// columns with any undefined entry are dropped. Final ties go to the
/// lexicographically lowest id. A single combination wins with rate 0.5.
pub fn win_rate_select(combo_ids: &[String], table: &[Vec<Option<f64>>]) -> Result<WinRateSelection> {
    if combo_ids.len() != table.len() {
        return Err(Error::Dimension {
            expected: combo_ids.len(),
            got: table.len(),
        });
    }
    if table.is_empty() {
        return Err(Error::Invalid("empty win-rate table".into()));
    }
    let n_llms = table[0].len();
    if n_llms == 0 || table.iter().any(|r| r.len() != n_llms) {
        return Err(Error::Invalid("win-rate table must be rectangular with at least one LLM".into()));
    }
    let (used_llms, dropped_llms): (Vec<usize>, Vec<usize>) =
        (0..n_llms).partition(|&m| table.iter().all(|r| r[m].is_some_and(f64::is_finite)));
    if used_llms.is_empty() {
        return Err(Error::Degenerate("no validation LLM has a defined AUC".into()));
    }
    let mut sums = vec![0.0; table.len()];
    for &m in &used_llms {
        let column: Vec<f64> = table.iter().map(|r| r[m].expect("checked")).collect();
        for (s, w) in sums.iter_mut().zip(win_rates(&column)) {
            *s += w;
        }
    }
    let mean_win_rates: Vec<f64> = sums.iter().map(|s| s / used_llms.len() as f64).collect();
    let mut winner = 0;
    for c in 1..table.len() {
        let (a, b) = (mean_win_rates[c], mean_win_rates[winner]);
        if a > b || (a == b && combo_ids[c] < combo_ids[winner]) {
            winner = c;
        }
    }
    Ok(WinRateSelection {
        winner,
        mean_win_rates,
        used_llms,
        dropped_llms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn two_by_two_example_ties_to_lowest_id() {
        let table = vec![vec![Some(0.9), Some(0.4)], vec![Some(0.8), Some(0.6)]];
        let sel = win_rate_select(&["b".into(), "a".into()], &table).unwrap();
        assert_eq!(sel.mean_win_rates, vec![0.5, 0.5]);
        assert_eq!(sel.winner, 1);
    }

    #[test]
    fn dominating_combination_wins_with_rate_one() {
        let table = vec![vec![Some(0.6), Some(0.7)], vec![Some(0.9), Some(0.8)], vec![Some(0.5), Some(0.75)]];
        let sel = win_rate_select(&ids(3), &table).unwrap();
        assert_eq!(sel.winner, 1);
        assert_eq!(sel.mean_win_rates[1], 1.0);
    }

    #[test]
    fn all_equal_gives_one_half_everywhere() {
        let table = vec![vec![Some(0.7); 3]; 4];
        let sel = win_rate_select(&["d".into(), "b".into(), "c".into(), "e".into()], &table).unwrap();
        assert!(sel.mean_win_rates.iter().all(|&w| w == 0.5));
        assert_eq!(sel.winner, 1);
    }

    #[test]
    fn undefined_columns_are_dropped() {
        let table = vec![vec![Some(0.6), None], vec![Some(0.7), None]];
        let sel = win_rate_select(&ids(2), &table).unwrap();
        assert_eq!(sel.used_llms, vec![0]);
        assert_eq!(sel.dropped_llms, vec![1]);
        assert_eq!(sel.winner, 1);
        assert!(win_rate_select(&ids(2), &[vec![None], vec![None]]).is_err());
        assert!(win_rate_select(&[], &[]).is_err());
        // a lone combination wins with the neutral rate
        assert_eq!(win_rate_select(&ids(1), &[vec![Some(0.5)]]).unwrap().mean_win_rates, vec![0.5]);
        assert!(win_rate_select(&ids(2), &[vec![], vec![]]).is_err());
    }

    proptest! {
        #[test]
        fn mean_win_rate_is_one_half(seed in 0u64..10_000, k in 2usize..12) {
            let mut rng = seeded_rng(seed);
            // coarse grid forces ties
            let column: Vec<f64> = (0..k).map(|_| rng.random_range(0..5) as f64 / 4.0).collect();
            let w = win_rates(&column);
            prop_assert!((w.iter().sum::<f64>() / k as f64 - 0.5).abs() < 1e-12);
        }
    }
}
