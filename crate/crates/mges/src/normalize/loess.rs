//! Intensity-dependent bias removal: locally weighted degree-1 regression
//! of W on A (tricube weights, bisquare robustness passes), fitted per
//! chip or per print-tip block on the selected spots and subtracted from
//! every spot of the unit. The repeated variant refits on random spot
//! subsets to estimate a per-spot SD and confidence interval.

use super::NormalizedDataset;
use crate::matrix::{finite_median, Matrix};
use crate::rng;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

const MIN_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoessScope {
    Global,
    PrintTip,
}

impl LoessScope {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "global" => LoessScope::Global,
            "printTip" | "printtip" => LoessScope::PrintTip,
            other => return Err(Error::Usage(format!("unknown loess scope `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LoessScope::Global => "global",
            LoessScope::PrintTip => "printTip",
        }
    }
}

/// Fitted local regression over one unit's selected spots.
struct Lowess {
    xs: Vec<f64>,
    ys: Vec<f64>,
    weights: Vec<f64>, // robustness weights
    q: usize,
}

impl Lowess {
    fn fit(x: &[f64], y: &[f64], span: f64, iterations: usize) -> Lowess {
        let n = x.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap().then(a.cmp(&b)));
        let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
        let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        let q = ((span * n as f64).ceil() as usize).clamp(2, n);
        let mut model = Lowess { xs, ys, weights: vec![1.0; n], q };
        for _ in 0..iterations {
            let residuals: Vec<f64> =
                (0..n).map(|i| model.ys[i] - model.predict(model.xs[i])).collect();
            let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
            let s = finite_median(&abs);
            if !(s > 0.0) {
                break; // perfect fit, nothing to reweight
            }
            let cutoff = 6.0 * s;
            for (w, r) in model.weights.iter_mut().zip(&residuals) {
                let u = r / cutoff;
                *w = if u.abs() < 1.0 { (1.0 - u * u) * (1.0 - u * u) } else { 0.0 };
            }
        }
        model
    }

    /// Local degree-1 weighted fit evaluated at `x0`.
    fn predict(&self, x0: f64) -> f64 {
        if x0.is_nan() {
            return f64::NAN;
        }
        let n = self.xs.len();
        let mut hi = self.xs.partition_point(|&v| v < x0);
        let mut lo = hi;
        while hi - lo < self.q {
            if lo == 0 {
                hi += 1;
            } else if hi == n {
                lo -= 1;
            } else if x0 - self.xs[lo - 1] <= self.xs[hi] - x0 {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        let h = (x0 - self.xs[lo]).abs().max((self.xs[hi - 1] - x0).abs());
        let mut sw = 0.0;
        let mut swx = 0.0;
        let mut swy = 0.0;
        for i in lo..hi {
            let w = if h > 0.0 {
                let u = (self.xs[i] - x0).abs() / h;
                if u < 1.0 {
                    let t = 1.0 - u * u * u;
                    t * t * t * self.weights[i]
                } else {
                    0.0
                }
            } else {
                self.weights[i]
            };
            sw += w;
            swx += w * self.xs[i];
            swy += w * self.ys[i];
        }
        if sw <= 0.0 {
            // all tricube or robustness weights vanished; fall back to the
            // plain window mean
            let m: f64 = self.ys[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
            return m;
        }
        let mx = swx / sw;
        let my = swy / sw;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for i in lo..hi {
            let w = if h > 0.0 {
                let u = (self.xs[i] - x0).abs() / h;
                if u < 1.0 {
                    let t = 1.0 - u * u * u;
                    t * t * t * self.weights[i]
                } else {
                    0.0
                }
            } else {
                self.weights[i]
            };
            let dx = self.xs[i] - mx;
            sxx += w * dx * dx;
            sxy += w * dx * (self.ys[i] - my);
        }
        if sxx > 0.0 {
            my + sxy / sxx * (x0 - mx)
        } else {
            my
        }
    }
}

/// Fitting units: spot index lists per (chip, unit). Global scope is one
/// unit per chip; printTip is one per print-tip block and needs geometry.
fn units_of(ds: &NormalizedDataset, scope: LoessScope) -> Result<Vec<(usize, String, Vec<usize>)>> {
    let spots = ds.genes();
    let mut units = Vec::new();
    match scope {
        LoessScope::Global => {
            for c in 0..ds.chips() {
                units.push((c, format!("chip {c}"), (0..spots).collect()));
            }
        }
        LoessScope::PrintTip => {
            let grid = ds.grid.ok_or_else(|| {
                Error::InvalidParam(
                    "printTip scope needs chip geometry; this dataset has none".to_string(),
                )
            })?;
            for c in 0..ds.chips() {
                let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); grid.block_count()];
                for s in 0..spots {
                    blocks[grid.block_of(s)].push(s);
                }
                for (b, list) in blocks.into_iter().enumerate() {
                    units.push((c, format!("chip {c} block {b}"), list));
                }
            }
        }
    }
    Ok(units)
}

fn check_span(span: f64) -> Result<()> {
    if !(span > 0.0 && span <= 1.0) {
        return Err(Error::SpanOutOfRange { span });
    }
    Ok(())
}

fn usable_points(
    ds: &NormalizedDataset,
    chip: usize,
    spots: &[usize],
) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &s in spots {
        if *ds.use_spot.get(s, chip) {
            let a = ds.a.at(s, chip);
            let w = ds.w.at(s, chip);
            if a.is_finite() && w.is_finite() {
                xs.push(a);
                ys.push(w);
            }
        }
    }
    (xs, ys)
}

/// Remove intensity-dependent bias. Only selected spots shape the curve;
/// every spot of the unit is corrected by it.
pub fn normalize_loess(
    ds: &NormalizedDataset,
    span: f64,
    scope: LoessScope,
    iterations: usize,
) -> Result<NormalizedDataset> {
    check_span(span)?;
    let units = units_of(ds, scope)?;
    // per-unit corrected columns, computed independently and in order
    let corrections: Vec<Result<Vec<(usize, f64)>>> = units
        .par_iter()
        .map(|(chip, unit_name, spots)| {
            let (xs, ys) = usable_points(ds, *chip, spots);
            if xs.len() < MIN_POINTS {
                return Err(Error::TooFewPoints {
                    unit: unit_name.clone(),
                    needed: MIN_POINTS,
                    found: xs.len(),
                });
            }
            let model = Lowess::fit(&xs, &ys, span, iterations);
            let mut out = Vec::with_capacity(spots.len());
            for &s in spots {
                let w = ds.w.at(s, *chip);
                let a = ds.a.at(s, *chip);
                let corrected =
                    if w.is_finite() && a.is_finite() { w - model.predict(a) } else { w };
                out.push((s, corrected));
            }
            Ok(out)
        })
        .collect();

    let mut w = ds.w.clone();
    for ((chip, _, _), corr) in units.iter().zip(corrections) {
        for (s, v) in corr? {
            w.set(s, *chip, v);
        }
    }
    let mut out = ds.clone();
    out.w = w;
    out.push_log(
        "loess",
        &[
            ("span", format!("{span}")),
            ("scope", scope.name().to_string()),
            ("iterations", iterations.to_string()),
        ],
    );
    Ok(out)
}

/// Repeat the loess fit on random subsets of the selected spots to get a
/// per-spot SD (`sw`) and normal-quantile confidence bounds; W becomes
/// the mean of the replicate corrections.
#[allow(clippy::too_many_arguments)]
pub fn normalize_repeated_loess(
    ds: &NormalizedDataset,
    span: f64,
    scope: LoessScope,
    iterations: usize,
    repeats: usize,
    fraction: f64,
    alpha: f64,
    seed: u64,
) -> Result<NormalizedDataset> {
    check_span(span)?;
    if repeats < 2 {
        return Err(Error::InvalidParam(format!("repeats = {repeats} must be >= 2")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParam(format!("fraction = {fraction} must be in (0, 1)")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParam(format!("alpha = {alpha} must be in (0, 1)")));
    }
    let units = units_of(ds, scope)?;

    // per unit: accumulate replicate corrections per spot
    type UnitStats = Vec<(usize, f64, f64)>; // (spot, sum, sum of squares)
    let unit_stats: Vec<Result<UnitStats>> = units
        .par_iter()
        .enumerate()
        .map(|(unit_idx, (chip, unit_name, spots))| {
            let (xs, ys) = usable_points(ds, *chip, spots);
            let n_usable = xs.len();
            let take = ((fraction * n_usable as f64).ceil() as usize).min(n_usable);
            if take < MIN_POINTS {
                return Err(Error::TooFewPoints {
                    unit: format!("{unit_name} (subsampled)"),
                    needed: MIN_POINTS,
                    found: take,
                });
            }
            let mut acc: Vec<(usize, f64, f64)> =
                spots.iter().map(|&s| (s, 0.0, 0.0)).collect();
            for r in 0..repeats {
                let mut stream = rng::stream(seed, &[unit_idx as u64, r as u64]);
                let picked = rng::sample_indices(n_usable, take, &mut stream);
                let sub_x: Vec<f64> = picked.iter().map(|&i| xs[i]).collect();
                let sub_y: Vec<f64> = picked.iter().map(|&i| ys[i]).collect();
                let model = Lowess::fit(&sub_x, &sub_y, span, iterations);
                for (slot, &s) in acc.iter_mut().zip(spots.iter()) {
                    let w = ds.w.at(s, *chip);
                    let a = ds.a.at(s, *chip);
                    if w.is_finite() && a.is_finite() {
                        let v = w - model.predict(a);
                        slot.1 += v;
                        slot.2 += v * v;
                    } else {
                        slot.1 = f64::NAN;
                        slot.2 = f64::NAN;
                    }
                }
            }
            Ok(acc)
        })
        .collect();

    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - alpha / 2.0);
    let mut w = ds.w.clone();
    let mut sw = Matrix::nan(ds.genes(), ds.chips());
    let mut w_lo = Matrix::nan(ds.genes(), ds.chips());
    let mut w_hi = Matrix::nan(ds.genes(), ds.chips());
    let rf = repeats as f64;
    for ((chip, _, _), stats) in units.iter().zip(unit_stats) {
        for (s, sum, sumsq) in stats? {
            if sum.is_nan() {
                continue; // missing cell stays missing
            }
            let mean = sum / rf;
            let var = ((sumsq - sum * sum / rf) / (rf - 1.0)).max(0.0);
            let sd = var.sqrt();
            w.set(s, *chip, mean);
            sw.set(s, *chip, sd);
            w_lo.set(s, *chip, mean - z * sd);
            w_hi.set(s, *chip, mean + z * sd);
        }
    }
    let mut out = ds.clone();
    out.w = w;
    out.sw = Some(sw);
    out.w_lo = Some(w_lo);
    out.w_hi = Some(w_hi);
    out.push_log(
        "repeatedLoess",
        &[
            ("span", format!("{span}")),
            ("scope", scope.name().to_string()),
            ("iterations", iterations.to_string()),
            ("repeats", repeats.to_string()),
            ("fraction", format!("{fraction}")),
            ("alpha", format!("{alpha}")),
            ("seed", seed.to_string()),
        ],
    );
    Ok(out)
}
