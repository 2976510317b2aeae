use serde::{Deserialize, Serialize};

use super::{check_finite, columns, BaselineError, Regressor};
use crate::dataset::{Dataset, Targets};

/// Per-target polynomial in the normalized input `u = (x - shift) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyModel {
    pub degree: usize,
    /// Ascending powers of `u`, one vector per target.
    pub coefficients: [Vec<f64>; 3],
    pub shift: f64,
    pub scale: f64,
    pub x_range: (f64, f64),
}

impl PolyModel {
    fn normalize(&self, x: f64) -> f64 {
        (x - self.shift) / self.scale
    }

    /// Coefficients expanded into ascending powers of raw `x`.
    pub fn raw_coefficients(&self, target: usize) -> Vec<f64> {
        let c = &self.coefficients[target];
        let n = c.len();
        let mut out = vec![0.0; n];
        // (x - s)^j / a^j expanded binomially.
        for (j, &cj) in c.iter().enumerate() {
            let a = self.scale.powi(j as i32);
            let mut binom = 1.0;
            for i in 0..=j {
                out[i] += cj * binom * (-self.shift).powi((j - i) as i32) / a;
                binom = binom * (j - i) as f64 / (i + 1) as f64;
            }
        }
        out
    }
}

impl Regressor for PolyModel {
    fn predict(&self, x: f64) -> Targets {
        let u = self.normalize(x);
        Targets::from_array(std::array::from_fn(|t| {
            self.coefficients[t].iter().rev().fold(0.0, |acc, &c| acc * u + c)
        }))
    }

    fn train_range(&self) -> (f64, f64) {
        self.x_range
    }
}

/// Least-squares solution of `a x = b` for a tall `m x n` row-major `a` via
/// Householder QR. `None` when a diagonal of `R` vanishes relative to the
/// largest one.
fn qr_solve(a: &[f64], m: usize, n: usize, rhs: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let mut r = a.to_vec();
    let mut q: Vec<Vec<f64>> = rhs.to_vec();
    for k in 0..n {
        let norm = (k..m).map(|i| r[i * n + k].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[k * n + k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| r[i * n + k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * r[i * n + j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                r[i * n + j] -= f * v[i - k];
            }
        }
        for b in q.iter_mut() {
            let dot: f64 = (k..m).map(|i| v[i - k] * b[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                b[i] -= f * v[i - k];
            }
        }
    }
    let dmax = (0..n).map(|k| r[k * n + k].abs()).fold(0.0, f64::max);
    if dmax == 0.0 || (0..n).any(|k| r[k * n + k].abs() <= 1e-12 * dmax) {
        return None;
    }
    Some(
        q.iter()
            .map(|b| {
                let mut x = vec![0.0; n];
                for k in (0..n).rev() {
                    let s: f64 = (k + 1..n).map(|j| r[k * n + j] * x[j]).sum();
                    x[k] = (b[k] - s) / r[k * n + k];
                }
                x
            })
            .collect(),
    )
}

/// Fits each target by least squares on `x` mapped to `[-1, 1]`.
pub fn fit_poly_xy(xs: &[f64], ys: &[[f64; 3]], degree: usize) -> Result<PolyModel, BaselineError> {
    let n = degree + 1;
    if xs.len() < n {
        return Err(BaselineError::TooFewPoints { what: "polynomial fit", needed: n, have: xs.len() });
    }
    check_finite(xs, ys)?;
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shift = 0.5 * (lo + hi);
    let scale = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
    let m = xs.len();
    let mut a = vec![0.0; m * n];
    for (i, &x) in xs.iter().enumerate() {
        let u = (x - shift) / scale;
        let mut p = 1.0;
        for j in 0..n {
            a[i * n + j] = p;
            p *= u;
        }
    }
    let rhs: Vec<Vec<f64>> = (0..3).map(|t| ys.iter().map(|y| y[t]).collect()).collect();
    let sol = qr_solve(&a, m, n, &rhs).ok_or(BaselineError::Degenerate { degree })?;
    let coefficients: [Vec<f64>; 3] = std::array::from_fn(|t| sol[t].clone());
    if coefficients.iter().flatten().any(|v| !v.is_finite()) {
        return Err(BaselineError::Degenerate { degree });
    }
    Ok(PolyModel { degree, coefficients, shift, scale, x_range: (lo, hi) })
}

pub fn fit_poly(train: &Dataset, degree: usize) -> Result<PolyModel, BaselineError> {
    let (xs, ys) = columns(train);
    fit_poly_xy(&xs, &ys, degree)
}

/// Leave-one-out cross-validation summary for one degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyCv {
    pub degree: usize,
    /// Per-target LOO MAPE in percent.
    pub loo_mape: [f64; 3],
    pub score: f64,
}

/// Picks the degree in `degrees` with the lowest LOO MAPE averaged over
/// targets, then refits on all points. Ties go to the lower degree.
pub fn select_poly_degree(
    train: &Dataset,
    degrees: std::ops::RangeInclusive<usize>,
) -> Result<(PolyModel, Vec<PolyCv>), BaselineError> {
    let (xs, ys) = columns(train);
    let mut table = Vec::new();
    for degree in degrees {
        if xs.len() < degree + 3 {
            break;
        }
        let mut ape_sum = [0.0; 3];
        let mut ok = true;
        for hold in 0..xs.len() {
            let (tx, ty): (Vec<f64>, Vec<[f64; 3]>) =
                xs.iter().zip(&ys).enumerate().filter(|(i, _)| *i != hold).map(|(_, (x, y))| (*x, *y)).unzip();
            let Ok(m) = fit_poly_xy(&tx, &ty, degree) else {
                ok = false;
                break;
            };
            let pred = m.predict(xs[hold]).as_array();
            for t in 0..3 {
                ape_sum[t] += 100.0 * (ys[hold][t] - pred[t]).abs() / ys[hold][t].abs();
            }
        }
        if !ok {
            continue;
        }
        let loo_mape = ape_sum.map(|s| s / xs.len() as f64);
        let score = loo_mape.iter().sum::<f64>() / 3.0;
        table.push(PolyCv { degree, loo_mape, score });
    }
    let best = table
        .iter()
        .filter(|c| c.score.is_finite())
        .min_by(|a, b| a.score.total_cmp(&b.score).then(a.degree.cmp(&b.degree)))
        .ok_or(BaselineError::TooFewPoints { what: "degree cross-validation", needed: 4, have: xs.len() })?;
    Ok((fit_poly_xy(&xs, &ys, best.degree)?, table))
}
