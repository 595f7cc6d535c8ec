//! Kraskov k-nearest-neighbor mutual information, estimator 1.
//!
//! Margins are rank-transformed before the neighbor search; this is what
//! makes the estimate exactly invariant under strictly monotone margin
//! transformations, which the raw estimator is not. Ties (in the data and
//! in the integer rank distances) are broken by deterministic seeded
//! jitter. Estimates can be slightly negative; no clamping is applied.

use super::dist::digamma;
use crate::rng;
use crate::{Error, Result};
use rand::Rng;

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let mut r = vec![0.0; values.len()];
    for (rank, &idx) in order.iter().enumerate() {
        r[idx] = rank as f64;
    }
    r
}

/// Mutual information of `x` and `y` in nats:
/// `psi(k) + psi(n) - <psi(nx + 1) + psi(ny + 1)>` with max-norm joint
/// neighborhoods and strictly-closer marginal counts.
pub fn kraskov_mi(x: &[f64], y: &[f64], k: usize, seed: u64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Domain("kraskov_mi: length mismatch".into()));
    }
    let n = x.len();
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    let range = |v: &[f64]| {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &t in v {
            lo = lo.min(t);
            hi = hi.max(t);
        }
        hi - lo
    };
    let (rx, ry) = (range(x), range(y));
    if !(rx > 0.0) || !(ry > 0.0) {
        return Err(Error::ConstantInput);
    }

    // Jitter raw values to break data ties, rank, then jitter the integer
    // ranks to break distance ties. Same seed, same streams.
    let mut rng = rng::stream(seed, &[0x6d69]);
    let jx: Vec<f64> = x.iter().map(|&v| v + rng.gen::<f64>() * 1e-10 * rx).collect();
    let jy: Vec<f64> = y.iter().map(|&v| v + rng.gen::<f64>() * 1e-10 * ry).collect();
    let mut u = ranks(&jx);
    let mut v = ranks(&jy);
    let scale = 1e-10 * n as f64;
    for t in u.iter_mut() {
        *t += rng.gen::<f64>() * scale;
    }
    for t in v.iter_mut() {
        *t += rng.gen::<f64>() * scale;
    }

    // eps[i] = distance to the k-th nearest neighbor in the max norm
    let mut eps = vec![0.0; n];
    let mut kbest = vec![f64::INFINITY; k];
    for i in 0..n {
        for slot in kbest.iter_mut() {
            *slot = f64::INFINITY;
        }
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = (u[i] - u[j]).abs().max((v[i] - v[j]).abs());
            // insert into the k smallest seen so far
            if d < kbest[k - 1] {
                let mut pos = k - 1;
                while pos > 0 && kbest[pos - 1] > d {
                    kbest[pos] = kbest[pos - 1];
                    pos -= 1;
                }
                kbest[pos] = d;
            }
        }
        eps[i] = kbest[k - 1];
    }

    // marginal counts strictly inside eps, via sorted margins
    let count_within = |sorted: &[f64], center: f64, e: f64| -> usize {
        let lo = sorted.partition_point(|&t| t <= center - e);
        let hi = sorted.partition_point(|&t| t < center + e);
        hi - lo - 1 // exclude the point itself
    };
    let mut su = u.clone();
    su.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sv = v.clone();
    sv.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut acc = 0.0;
    for i in 0..n {
        let nx = count_within(&su, u[i], eps[i]);
        let ny = count_within(&sv, v[i], eps[i]);
        acc += digamma(nx as f64 + 1.0)? + digamma(ny as f64 + 1.0)?;
    }
    Ok(digamma(k as f64)? + digamma(n as f64)? - acc / n as f64)
}
