//! Classical regression baselines: polynomial least squares and
//! gradient-boosted regression trees, one independent model per target.

mod gbt;
mod poly;

pub use gbt::{fit_gbt, fit_gbt_xy, GbtModel, GbtParams, Tree};
pub use poly::{fit_poly, fit_poly_xy, select_poly_degree, PolyCv, PolyModel};

use thiserror::Error;

use crate::dataset::{Dataset, Targets};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("{what} needs at least {needed} training points, have {have}")]
    TooFewPoints { what: &'static str, needed: usize, have: usize },
    #[error("degree-{degree} polynomial fit is rank deficient")]
    Degenerate { degree: usize },
    #[error("invalid baseline parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite training value at index {0}")]
    NonFinite(usize),
}

/// Inputs and the three target columns of a dataset.
pub(crate) fn columns(d: &Dataset) -> (Vec<f64>, Vec<[f64; 3]>) {
    (d.points.iter().map(|p| p.x).collect(), d.points.iter().map(|p| p.targets().as_array()).collect())
}

pub(crate) fn check_finite(xs: &[f64], ys: &[[f64; 3]]) -> Result<(), BaselineError> {
    for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(BaselineError::NonFinite(i));
        }
    }
    Ok(())
}

/// A fitted regression model over the three targets.
pub trait Regressor {
    fn predict(&self, x: f64) -> Targets;
    /// Training input range, used to flag extrapolation.
    fn train_range(&self) -> (f64, f64);

    fn extrapolates(&self, x: f64) -> bool {
        let (lo, hi) = self.train_range();
        x < lo || x > hi
    }
}
