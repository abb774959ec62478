use super::types::{Observation, RawSeries};
use super::PipelineError;

/// Apply the series' stationarity transformation.
///
/// The leading observations consumed by differencing are dropped, so the
/// output is shorter than the input by the code's differencing order.
/// Missing inputs propagate to every output that depends on them.
pub fn apply_transform(series: &RawSeries) -> Result<Vec<Observation>, PipelineError> {
    let code = series.transform;
    let order = code.differencing_order();
    let obs = &series.observations;
    if obs.len() < 1 + order {
        return Err(PipelineError::InsufficientLength {
            series: series.id.clone(),
            needed: 1 + order,
            got: obs.len(),
        });
    }

    let level: Vec<Option<f64>> = if code.uses_log() {
        obs.iter()
            .map(|o| match o.value {
                Some(v) if v > 0.0 => Ok(Some(v.ln())),
                Some(_) => Err(PipelineError::NonPositiveLog {
                    series: series.id.clone(),
                    date: o.date,
                }),
                None => Ok(None),
            })
            .collect::<Result<_, _>>()?
    } else {
        obs.iter().map(|o| o.value).collect()
    };

    let mut values = level;
    for _ in 0..order {
        values = difference(&values);
    }
    let scale = match code.code() {
        1 | 2 => 100.0,
        _ => 1.0,
    };

    Ok(obs[order..]
        .iter()
        .zip(values)
        .map(|(o, v)| Observation { date: o.date, value: v.map(|x| x * scale) })
        .collect())
}

fn difference(values: &[Option<f64>]) -> Vec<Option<f64>> {
    values
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        })
        .collect()
}
