use serde::{Deserialize, Serialize};

use super::{check_finite, columns, BaselineError, Regressor};
use crate::dataset::{Dataset, Targets};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Tree {
    Leaf(f64),
    Split { threshold: f64, left: Box<Tree>, right: Box<Tree> },
}

impl Tree {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Tree::Leaf(v) => *v,
            Tree::Split { threshold, left, right } => {
                if x < *threshold {
                    left.eval(x)
                } else {
                    right.eval(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or hold a single distinct x.
    pub max_depth: Option<usize>,
    pub shrinkage: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams { n_trees: 100, max_depth: Some(3), shrinkage: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub params: GbtParams,
    pub base: [f64; 3],
    pub trees: [Vec<Tree>; 3],
    pub x_range: (f64, f64),
}

impl Regressor for GbtModel {
    fn predict(&self, x: f64) -> Targets {
        Targets::from_array(std::array::from_fn(|t| {
            self.base[t] + self.params.shrinkage * self.trees[t].iter().map(|tr| tr.eval(x)).sum::<f64>()
        }))
    }

    fn train_range(&self) -> (f64, f64) {
        self.x_range
    }
}

/// Builds one squared-error regression tree on points sorted by x.
fn grow(xs: &[f64], r: &[f64], depth: usize, max_depth: Option<usize>) -> Tree {
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    if max_depth.is_some_and(|d| depth >= d) || xs.len() < 2 || xs[0] == xs[xs.len() - 1] {
        return Tree::Leaf(mean);
    }
    let total: f64 = r.iter().sum();
    let sse_parent: f64 = r.iter().map(|v| (v - mean).powi(2)).sum();
    if sse_parent == 0.0 {
        return Tree::Leaf(mean);
    }
    let total_sq: f64 = r.iter().map(|v| v * v).sum();
    let mut best: Option<(f64, usize)> = None;
    let (mut ls, mut lsq) = (0.0, 0.0);
    for i in 1..xs.len() {
        ls += r[i - 1];
        lsq += r[i - 1] * r[i - 1];
        if xs[i] == xs[i - 1] {
            continue;
        }
        let (nl, nr) = (i as f64, n - i as f64);
        let rs = total - ls;
        let sse = (lsq - ls * ls / nl) + (total_sq - lsq - rs * rs / nr);
        if best.is_none_or(|(b, _)| sse < b) {
            best = Some((sse, i));
        }
    }
    match best {
        Some((sse, i)) if sse < sse_parent => Tree::Split {
            threshold: 0.5 * (xs[i - 1] + xs[i]),
            left: Box::new(grow(&xs[..i], &r[..i], depth + 1, max_depth)),
            right: Box::new(grow(&xs[i..], &r[i..], depth + 1, max_depth)),
        },
        _ => Tree::Leaf(mean),
    }
}

/// Stage-wise boosting: every tree fits the residuals of the running
/// prediction, which then moves by `shrinkage` times the tree's output.
pub fn fit_gbt_xy(xs: &[f64], ys: &[[f64; 3]], params: GbtParams) -> Result<GbtModel, BaselineError> {
    if xs.len() < 4 {
        return Err(BaselineError::TooFewPoints { what: "gradient boosting", needed: 4, have: xs.len() });
    }
    if !(params.shrinkage > 0.0 && params.shrinkage <= 1.0) {
        return Err(BaselineError::InvalidParams(format!("shrinkage {} outside (0, 1]", params.shrinkage)));
    }
    check_finite(xs, ys)?;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let sx: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
    let n = xs.len() as f64;
    let mut base = [0.0; 3];
    let mut trees: [Vec<Tree>; 3] = Default::default();
    for t in 0..3 {
        let sy: Vec<f64> = order.iter().map(|&i| ys[i][t]).collect();
        base[t] = sy.iter().sum::<f64>() / n;
        let mut pred = vec![base[t]; sy.len()];
        for _ in 0..params.n_trees {
            let resid: Vec<f64> = sy.iter().zip(&pred).map(|(y, p)| y - p).collect();
            let tree = grow(&sx, &resid, 0, params.max_depth);
            for (p, x) in pred.iter_mut().zip(&sx) {
                *p += params.shrinkage * tree.eval(*x);
            }
            trees[t].push(tree);
        }
    }
    Ok(GbtModel { params, base, trees, x_range: (sx[0], sx[sx.len() - 1]) })
}

pub fn fit_gbt(train: &Dataset, params: GbtParams) -> Result<GbtModel, BaselineError> {
    let (xs, ys) = columns(train);
    fit_gbt_xy(&xs, &ys, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sse(m: &GbtModel, xs: &[f64], ys: &[[f64; 3]]) -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(x, y)| {
                let p = m.predict(*x).as_array();
                (0..3).map(|t| (p[t] - y[t]).powi(2)).sum::<f64>()
            })
            .sum()
    }

    fn wavy(n: usize) -> (Vec<f64>, Vec<[f64; 3]>) {
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 7.3) % 13.0).collect();
        let ys = xs.iter().map(|&x| [x.sin() + 3.0, (0.4 * x).cos() + 2.0, 0.1 * x * x]).collect();
        (xs, ys)
    }

    #[test]
    fn zero_trees_predict_means() {
        let (xs, ys) = wavy(10);
        let m = fit_gbt_xy(&xs, &ys, GbtParams { n_trees: 0, ..Default::default() }).unwrap();
        let mean: [f64; 3] = std::array::from_fn(|t| ys.iter().map(|y| y[t]).sum::<f64>() / 10.0);
        for x in [-100.0, 5.0] {
            let p = m.predict(x).as_array();
            assert!((0..3).all(|t| (p[t] - mean[t]).abs() < 1e-12));
        }
    }

    #[test]
    fn unbounded_trees_memorize() {
        let (xs, ys) = wavy(20);
        let m = fit_gbt_xy(&xs, &ys, GbtParams { n_trees: 3, max_depth: None, shrinkage: 1.0 }).unwrap();
        assert!(sse(&m, &xs, &ys) < 1e-20);
    }

    #[test]
    fn stump_finds_step_threshold() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<[f64; 3]> = xs.iter().map(|&x| if x < 5.0 { [0.0; 3] } else { [1.0; 3] }).collect();
        let m = fit_gbt_xy(&xs, &ys, GbtParams { n_trees: 1, max_depth: Some(1), shrinkage: 1.0 }).unwrap();
        // Exhaustive oracle over midpoints.
        let mut best = (f64::INFINITY, 0.0);
        for i in 1..10 {
            let thr = 0.5 * (xs[i - 1] + xs[i]);
            let (l, r): (Vec<f64>, Vec<f64>) = (xs.iter().filter(|x| **x < thr).map(|x| ys[*x as usize][0]).collect(), xs.iter().filter(|x| **x >= thr).map(|x| ys[*x as usize][0]).collect());
            let ml = l.iter().sum::<f64>() / l.len() as f64;
            let mr = r.iter().sum::<f64>() / r.len() as f64;
            let s: f64 = l.iter().map(|v| (v - ml).powi(2)).sum::<f64>() + r.iter().map(|v| (v - mr).powi(2)).sum::<f64>();
            if s < best.0 {
                best = (s, thr);
            }
        }
        match &m.trees[0][0] {
            Tree::Split { threshold, .. } => assert_eq!(*threshold, best.1),
            t => panic!("expected a split, got {t:?}"),
        }
        assert_eq!(best.1, 4.5);
        assert_eq!(m.predict(2.0).rms, 0.0);
        assert_eq!(m.predict(7.0).rms, 1.0);
    }

    #[test]
    fn rejects_bad_params() {
        let (xs, ys) = wavy(10);
        assert!(fit_gbt_xy(&xs[..3], &ys[..3], GbtParams::default()).is_err());
        assert!(fit_gbt_xy(&xs, &ys, GbtParams { shrinkage: 0.0, ..Default::default() }).is_err());
        assert!(fit_gbt_xy(&xs, &ys, GbtParams { shrinkage: 1.5, ..Default::default() }).is_err());
    }

    proptest! {
        #[test]
        fn training_error_non_increasing(n in 4usize..30, depth in 1usize..4, shrink in 0.05f64..1.0) {
            let (xs, ys) = wavy(n);
            let mut prev = f64::INFINITY;
            for k in [0usize, 1, 2, 5, 10, 20] {
                let m = fit_gbt_xy(&xs, &ys, GbtParams { n_trees: k, max_depth: Some(depth), shrinkage: shrink }).unwrap();
                prop_assert!(m.trees.iter().flatten().all(|t| t.depth() <= depth));
                let e = sse(&m, &xs, &ys);
                prop_assert!(e <= prev * (1.0 + 1e-12) + 1e-12);
                prev = e;
            }
        }
    }
}
