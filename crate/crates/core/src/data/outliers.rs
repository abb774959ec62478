use crate::linalg::sorted_quantile;

use super::PipelineError;

/// Multiple of the interquartile range beyond which an observation is an outlier.
pub const IQR_MULTIPLE: f64 = 10.0;
/// Size of the local neighbourhood used for replacement.
pub const NEIGHBOURHOOD: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierReport {
    pub cleaned: Vec<Option<f64>>,
    /// Zero-based positions that were flagged and replaced.
    pub flagged: Vec<usize>,
    pub median: f64,
    pub iqr: f64,
}

/// Flag observations further than ten IQRs from the median and replace each
/// with the median of its ten nearest non-flagged neighbours in time.
///
/// Median and IQR come from the original series in a single pass. The
/// neighbourhood takes five observations on each side, borrowing from the
/// other side near the sample edges. Missing entries are left untouched.
pub fn clean_outliers(column: &[Option<f64>]) -> Result<OutlierReport, PipelineError> {
    let mut observed: Vec<f64> = column.iter().flatten().copied().collect();
    if observed.len() < NEIGHBOURHOOD + 1 {
        return Err(PipelineError::InsufficientLength {
            series: "<outlier column>".into(),
            needed: NEIGHBOURHOOD + 1,
            got: observed.len(),
        });
    }
    observed.sort_by(|a, b| a.total_cmp(b));
    let median = sorted_quantile(&observed, 0.5);
    let iqr = sorted_quantile(&observed, 0.75) - sorted_quantile(&observed, 0.25);
    let limit = IQR_MULTIPLE * iqr;

    let is_flagged: Vec<bool> = column
        .iter()
        .map(|v| v.is_some_and(|x| (x - median).abs() > limit))
        .collect();
    let flagged: Vec<usize> = (0..column.len()).filter(|&i| is_flagged[i]).collect();
    let clean_idx: Vec<usize> = (0..column.len())
        .filter(|&i| column[i].is_some() && !is_flagged[i])
        .collect();

    let mut cleaned = column.to_vec();
    for &t in &flagged {
        let split = clean_idx.partition_point(|&i| i < t);
        let (left, right) = clean_idx.split_at(split);
        let half = NEIGHBOURHOOD / 2;
        let mut n_left = half.min(left.len());
        let mut n_right = half.min(right.len());
        if n_left < half {
            n_right = (NEIGHBOURHOOD - n_left).min(right.len());
        }
        if n_right < half {
            n_left = (NEIGHBOURHOOD - n_right).min(left.len());
        }
        let mut neighbours: Vec<f64> = left[left.len() - n_left..]
            .iter()
            .chain(&right[..n_right])
            .map(|&i| column[i].expect("clean index is observed"))
            .collect();
        neighbours.sort_by(|a, b| a.total_cmp(b));
        cleaned[t] = Some(sorted_quantile(&neighbours, 0.5));
    }

    Ok(OutlierReport { cleaned, flagged, median, iqr })
}
