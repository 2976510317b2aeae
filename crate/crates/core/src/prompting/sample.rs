use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Example, PromptError, PromptInstance};
use crate::dataset::{Dataset, SamplePoint};

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Above this many subsets, sample by rejection instead of enumerating.
const ENUMERATION_LIMIT: u128 = 100_000;

fn example(p: &SamplePoint) -> Example {
    Example { x: p.x, targets: p.targets() }
}

fn all_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Draws `n_instances` distinct `(k+1)`-subsets of the training points. In
/// each subset the order is shuffled, the last point becomes the query and
/// the rest the prefix.
pub fn sample_instances(
    train: &Dataset,
    k: usize,
    n_instances: usize,
    seed: u64,
) -> Result<Vec<PromptInstance>, PromptError> {
    let size = train.len();
    if k == 0 || size < k + 1 {
        return Err(PromptError::NotEnoughPoints { k, needed: k + 1, have: size });
    }
    let available = binomial(size, k + 1);
    if n_instances as u128 > available {
        return Err(PromptError::InsufficientCombinations {
            requested: n_instances,
            available,
            size: k + 1,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subsets: Vec<Vec<usize>> = if available <= ENUMERATION_LIMIT {
        let mut all = all_subsets(size, k + 1);
        all.shuffle(&mut rng);
        all.truncate(n_instances);
        all
    } else {
        let mut seen = HashSet::with_capacity(n_instances);
        let mut picked = Vec::with_capacity(n_instances);
        while picked.len() < n_instances {
            let mut s = index::sample(&mut rng, size, k + 1).into_vec();
            s.sort_unstable();
            if seen.insert(s.clone()) {
                picked.push(s);
            }
        }
        picked
    };
    Ok(subsets
        .into_iter()
        .map(|mut s| {
            s.shuffle(&mut rng);
            let q = s.pop().expect("k + 1 >= 2");
            PromptInstance {
                prefix: s.iter().map(|&i| example(&train.points[i])).collect(),
                query_x: train.points[q].x,
                target: Some(train.points[q].targets()),
            }
        })
        .collect())
}

/// Evaluation prompt: the `k` training points closest to `k` equally spaced
/// positions across the training x-range, in ascending x.
///
/// Points are matched to positions by a monotone assignment minimizing the
/// total distance, so selections never collide even when the training set is
/// clustered. Training points equal to `query_x` are never selected.
pub fn build_eval_instance(train: &Dataset, query_x: f64, k: usize) -> Result<PromptInstance, PromptError> {
    if k == 0 || train.len() < k {
        return Err(PromptError::NotEnoughPoints { k, needed: k, have: train.len() });
    }
    let mut cand: Vec<&SamplePoint> = train.points.iter().filter(|p| p.x != query_x).collect();
    cand.sort_by(|a, b| a.x.total_cmp(&b.x));
    cand.dedup_by(|a, b| a.x == b.x);
    let m = cand.len();
    if m < k {
        return Err(PromptError::DegeneratePrefix {
            k,
            reason: format!("only {m} distinct candidates besides the query"),
        });
    }
    let (lo, hi) = (cand[0].x, cand[m - 1].x);
    let anchors: Vec<f64> = if k == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        (0..k).map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64).collect()
    };

    // cost[j][i]: best total distance placing anchor j on candidate i with
    // anchors 0..j on strictly smaller candidates.
    let inf = f64::INFINITY;
    let mut cost = vec![vec![inf; m]; k];
    let mut from = vec![vec![usize::MAX; m]; k];
    for i in 0..m {
        cost[0][i] = (cand[i].x - anchors[0]).abs();
    }
    for j in 1..k {
        let (mut best, mut arg) = (inf, usize::MAX);
        for i in j..m {
            if cost[j - 1][i - 1] < best {
                best = cost[j - 1][i - 1];
                arg = i - 1;
            }
            cost[j][i] = best + (cand[i].x - anchors[j]).abs();
            from[j][i] = arg;
        }
    }
    let mut i = (k - 1..m)
        .min_by(|&a, &b| cost[k - 1][a].total_cmp(&cost[k - 1][b]))
        .expect("m >= k");
    let mut chosen = vec![0usize; k];
    for j in (0..k).rev() {
        chosen[j] = i;
        i = from[j][i];
    }
    Ok(PromptInstance {
        prefix: chosen.iter().map(|&i| example(cand[i])).collect(),
        query_x,
        target: None,
    })
}
