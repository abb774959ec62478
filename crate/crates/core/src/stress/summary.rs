use serde::Serialize;

use super::engine::CountryStress;

/// Time-averaged absolute factor deviations: one row per factor, one column
/// per scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationTable {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

pub fn deviation_summary(stress: &CountryStress) -> DeviationTable {
    let d = stress.labels.len();
    let columns: Vec<String> = stress.scenarios.iter().map(|(n, _)| n.clone()).collect();
    let mut values = vec![vec![0.0; columns.len()]; d];
    for (j, (_, res)) in stress.scenarios.iter().enumerate() {
        if res.is_empty() {
            continue;
        }
        for r in res {
            for (i, v) in r.abs_deviations.iter().enumerate() {
                values[i][j] += v;
            }
        }
        for row in values.iter_mut() {
            row[j] /= res.len() as f64;
        }
    }
    DeviationTable { rows: stress.labels.clone(), columns, values }
}

impl DeviationTable {
    pub fn get(&self, row: &str, column: &str) -> Option<f64> {
        let i = self.rows.iter().position(|r| r == row)?;
        let j = self.columns.iter().position(|c| c == column)?;
        Some(self.values[i][j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Country, Sector};
    use crate::stress::covariance::AnalyticCov;
    use crate::stress::engine::{run_country, QuantileModel};
    use crate::stress::scenario::default_scenarios;
    use crate::stress::CountryFactors;
    use nalgebra::DMatrix;

    #[test]
    fn averages_over_periods_and_respects_frozen_factors() {
        let make = |c: f64| vec![c, 0.2, 0.3, -0.4, 0.1];
        let model = QuantileModel {
            q05: make(-1.6),
            levels: vec![(0.25, make(-0.6)), (0.5, make(0.0)), (0.75, make(0.6)), (0.95, make(1.7))],
        };
        let cf = CountryFactors {
            country: Country::DE,
            indices: vec![0, 1, 2],
            labels: vec!["a".into(), "b".into(), "c".into()],
            sectors: vec![Sector::F, Sector::M, Sector::F],
        };
        let factors = DMatrix::from_fn(6, 3, |t, i| (t as f64 * 0.3 + i as f64).sin());
        let growth = vec![None, Some(0.1), Some(0.5), Some(-0.2), Some(0.0), Some(0.3)];
        let cov = AnalyticCov(DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.2 }));
        let scen = default_scenarios(3);
        let s = run_country(&model, &cf, &growth, &factors, &cov, &scen, 0.95, 8).unwrap();
        assert_eq!(s.periods, vec![1, 2, 3, 4, 5]);
        let t = deviation_summary(&s);
        assert_eq!(t.columns, vec!["joint", "macro_only", "univariate:0", "univariate:1", "univariate:2"]);
        assert_eq!(t.get("a", "macro_only"), Some(0.0));
        assert_eq!(t.get("c", "macro_only"), Some(0.0));
        assert_eq!(t.get("a", "univariate:1"), Some(0.0));
        // univariate move is 1.6449 marginal standard deviations
        assert!((t.get("b", "univariate:1").unwrap() - 1.644_853_626_951_472_2).abs() < 1e-12);
        // joint deviations bounded by the contour radius in each coordinate
        let r = crate::stress::chi2_radius2(3, 0.95).sqrt();
        for i in 0..3 {
            assert!(t.values[i][0] <= r + 1e-12);
        }
    }
}
