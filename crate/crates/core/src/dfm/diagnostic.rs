use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub name: String,
    pub members: Vec<usize>,
    /// Mean absolute off-diagonal residual correlation within the group.
    pub mean_abs_corr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdioDiagnostic {
    /// N x N correlation of the idiosyncratic residuals.
    pub corr: DMatrix<f64>,
    pub groups: Vec<GroupSummary>,
    /// Mean absolute correlation over pairs not sharing any group.
    pub background: f64,
}

/// Correlation structure of `X - F Λ'` with per-group summaries.
pub fn idio_correlation_diagnostic(
    x: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    factors: &DMatrix<f64>,
    groups: &[(String, Vec<usize>)],
) -> IdioDiagnostic {
    let resid = x - factors * lambda.transpose();
    let (t, n) = resid.shape();
    let mut centred = resid.clone();
    let mut sd = vec![0.0; n];
    for j in 0..n {
        let m = resid.column(j).mean();
        centred.column_mut(j).add_scalar_mut(-m);
        sd[j] = (centred.column(j).norm_squared() / t as f64).sqrt();
    }
    let cov = centred.transpose() * &centred / t as f64;
    let corr = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else if sd[i] > 0.0 && sd[j] > 0.0 {
            cov[(i, j)] / (sd[i] * sd[j])
        } else {
            0.0
        }
    });
    // enforce exact symmetry
    let corr = DMatrix::from_fn(n, n, |i, j| if i <= j { corr[(i, j)] } else { corr[(j, i)] });

    let mean_abs = |pairs: &mut dyn Iterator<Item = (usize, usize)>| {
        let (mut s, mut k) = (0.0, 0usize);
        for (i, j) in pairs {
            s += corr[(i, j)].abs();
            k += 1;
        }
        if k == 0 {
            0.0
        } else {
            s / k as f64
        }
    };
    let summaries = groups
        .iter()
        .map(|(name, members)| {
            let mut pairs = members
                .iter()
                .enumerate()
                .flat_map(|(a, &i)| members[a + 1..].iter().map(move |&j| (i, j)));
            GroupSummary { name: name.clone(), members: members.clone(), mean_abs_corr: mean_abs(&mut pairs) }
        })
        .collect();
    let shares_group = |i: usize, j: usize| groups.iter().any(|(_, m)| m.contains(&i) && m.contains(&j));
    let mut bg = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| !shares_group(i, j));
    let background = mean_abs(&mut bg);
    IdioDiagnostic { corr, groups: summaries, background }
}
