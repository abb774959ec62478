use std::collections::BTreeMap;

use super::types::{Observation, Quarter};

/// Average monthly observations within calendar quarters.
///
/// A quarter's value is the arithmetic mean of its observed months; a
/// quarter with no observed month is missing. Quarters are returned
/// contiguously from the first to the last quarter touched by the input.
pub fn aggregate_to_quarterly(observations: &[Observation]) -> Vec<(Quarter, Option<f64>)> {
    let mut sums: BTreeMap<Quarter, (f64, usize)> = BTreeMap::new();
    for o in observations {
        let entry = sums.entry(Quarter::from_date(o.date)).or_insert((0.0, 0));
        if let Some(v) = o.value {
            entry.0 += v;
            entry.1 += 1;
        }
    }
    let (Some(first), Some(last)) = (sums.keys().next().copied(), sums.keys().last().copied())
    else {
        return Vec::new();
    };
    Quarter::range(first, last)
        .into_iter()
        .map(|q| {
            let value = sums
                .get(&q)
                .and_then(|&(s, n)| if n > 0 { Some(s / n as f64) } else { None });
            (q, value)
        })
        .collect()
}

/// Map already-quarterly observations onto their quarters.
pub fn quarterly_values(observations: &[Observation]) -> Vec<(Quarter, Option<f64>)> {
    observations.iter().map(|o| (Quarter::from_date(o.date), o.value)).collect()
}
