//! Brute-force optimality oracles.
//!
//! * [`control_objective`] evaluates the reduced control problem for any
//!   access path by composite quadrature; [`search_optimal_control`] maximizes
//!   it over switch times or over every level pattern on a bin grid.
//! * [`discrete_relaxed_oracle`] enumerates discretized direct mechanisms
//!   (on/off access per time bin, upgrade thresholds on a value grid) with
//!   envelope payments and binding participation, and compares the best one
//!   with the analytic optimum.

use crate::error::{Error, Result};
use crate::mechanism::StepFunction;
use crate::numerics::{composite_gl, exp_integral, lin_exp_integral, linspace};
use crate::par::Exec;
use crate::primitives::{ModelParams, ValueDistribution};
use crate::trial_solver::{solve_trial, solve_t0};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Minimum number of quadrature subintervals in [`control_objective`].
pub const CONTROL_SUBINTERVALS: usize = 1000;

fn ex_ante_weight(mu0: f64, wl: f64) -> f64 {
    mu0 * (1.0 + wl).max(0.0)
}

/// Control objective
/// `∫_0^T (π₀λ(T − t − (X(T) − X(t)))e^{−λX(t)} + μ₀(1+w_L)₊)·λU(t) dt`
/// with `X(t) = ∫_0^t U`, by composite Gauss–Legendre quadrature.
pub fn control_objective(u: &StepFunction, params: &ModelParams, pi0: f64, wl: f64) -> f64 {
    let (l, tt) = (params.lambda, params.horizon);
    let c = ex_ante_weight(params.mu0, wl);
    let x_t = u.cumulative(tt);
    let f = |t: f64| {
        let x = u.cumulative(t);
        (pi0 * l * (tt - t - (x_t - x)) * (-l * x).exp() + c) * l * u.value_at(t)
    };
    composite_gl(f, 0.0, tt, u.interior_breaks(), CONTROL_SUBINTERVALS)
}

/// Closed-form version of [`control_objective`] (exact per segment).
pub fn control_objective_exact(u: &StepFunction, params: &ModelParams, pi0: f64, wl: f64) -> f64 {
    let (l, tt) = (params.lambda, params.horizon);
    let c = ex_ante_weight(params.mu0, wl);
    let x_t = u.cumulative(tt);
    let b = u.breaks();
    let mut x_a = 0.0;
    let mut acc = 0.0;
    for (i, &val) in u.values().iter().enumerate() {
        let (a, d) = (b[i], b[i + 1] - b[i]);
        if val != 0.0 {
            let h_a = tt - a - x_t + x_a;
            let g = lin_exp_integral(h_a, val - 1.0, l * val, d);
            acc += l * val * (pi0 * l * (-l * x_a).exp() * g + c * d);
        }
        x_a += val * d;
    }
    acc
}

/// Bang-bang value: `π₀λ(T − t)(1 − e^{−λt}) + μ₀(1+w_L)₊λt`.
pub fn bang_bang_value(params: &ModelParams, pi0: f64, wl: f64, t: f64) -> f64 {
    let (l, tt) = (params.lambda, params.horizon);
    pi0 * l * (tt - t) * (-(-l * t).exp_m1()) + ex_ante_weight(params.mu0, wl) * l * t
}

/// Search space for [`search_optimal_control`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ControlSearch {
    /// Bang-bang controls switching at `jT/K`, `j = 0..=K` (`K ≤ 400`).
    SwitchScan,
    /// Every assignment of `levels` to the `K` bins (`K ≤ 14`, at most
    /// `3^14` candidates).
    Exhaustive {
        /// Admissible control levels in `[0, 1]`.
        levels: Vec<f64>,
    },
}

/// Largest bin count for the switch scan.
pub const MAX_SWITCH_BINS: usize = 400;
/// Largest bin count for exhaustive level enumeration.
pub const MAX_EXHAUSTIVE_BINS: usize = 14;
const MAX_CANDIDATES: u64 = 4_782_969; // 3^14

/// Result of [`search_optimal_control`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSearchResult {
    /// Control level per bin.
    pub levels: Vec<f64>,
    /// Best control as a step function.
    pub control: StepFunction,
    /// Objective value of the best control.
    pub value: f64,
    /// Total access `X(T)` of the best control.
    pub total_access: f64,
    /// Bin width `T/K`.
    pub bin_width: f64,
    /// Analytic switch time.
    pub analytic_t0: f64,
    /// Analytic optimal value.
    pub analytic_value: f64,
    /// Levels are nonincreasing over time.
    pub monotone: bool,
    /// Monotone and every level is 0 or 1.
    pub bang_bang: bool,
    /// Candidates evaluated.
    pub candidates: u64,
}

fn bins_to_step(horizon: f64, levels: &[f64]) -> StepFunction {
    let k = levels.len();
    let mut breaks = linspace(0.0, horizon, k + 1);
    breaks[k] = horizon;
    StepFunction::new(breaks, levels.to_vec()).expect("bin partition is valid")
}

/// Exact objective of a binned control (faster than building a step function).
fn binned_value(params: &ModelParams, pi0: f64, c: f64, levels: &[f64], h: f64) -> (f64, f64) {
    let (l, tt) = (params.lambda, params.horizon);
    let x_t: f64 = levels.iter().sum::<f64>() * h;
    let mut x_a = 0.0;
    let mut acc = 0.0;
    for (i, &val) in levels.iter().enumerate() {
        if val != 0.0 {
            let a = i as f64 * h;
            let h_a = tt - a - x_t + x_a;
            let g = lin_exp_integral(h_a, val - 1.0, l * val, h);
            acc += l * val * (pi0 * l * (-l * x_a).exp() * g + c * h);
        }
        x_a += val * h;
    }
    (acc, x_t)
}

/// Larger value first; near-ties go to less total access, then to the earlier candidate.
fn better(a: (f64, f64, u64), b: (f64, f64, u64)) -> Ordering {
    let tol = 1e-13 * a.0.abs().max(b.0.abs()).max(1.0);
    if (a.0 - b.0).abs() > tol {
        return a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal);
    }
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(b.2.cmp(&a.2))
}

/// Brute-force maximization of the control objective on a `K`-bin grid.
pub fn search_optimal_control(params: &ModelParams, pi0: f64, wl: f64, k: usize, search: &ControlSearch) -> Result<ControlSearchResult> {
    search_optimal_control_with(params, pi0, wl, k, search, Exec::default())
}

/// [`search_optimal_control`] with an explicit execution policy.
pub fn search_optimal_control_with(
    params: &ModelParams,
    pi0: f64,
    wl: f64,
    k: usize,
    search: &ControlSearch,
    exec: Exec,
) -> Result<ControlSearchResult> {
    params.validate()?;
    if k == 0 {
        return Err(Error::InvalidParams("at least one bin is required".into()));
    }
    let tt = params.horizon;
    let h = tt / k as f64;
    let c = ex_ante_weight(params.mu0, wl);
    let (levels, candidates) = match search {
        ControlSearch::SwitchScan => {
            if k > MAX_SWITCH_BINS {
                return Err(Error::BudgetExceeded(format!("switch scan allows at most {MAX_SWITCH_BINS} bins, got {k}")));
            }
            let vals = exec.map_range(k + 1, |j| {
                let lv: Vec<f64> = (0..k).map(|i| if i < j { 1.0 } else { 0.0 }).collect();
                let (v, x) = binned_value(params, pi0, c, &lv, h);
                (v, x, j as u64)
            });
            let best = vals.into_iter().max_by(|a, b| better(*a, *b)).unwrap();
            let lv = (0..k).map(|i| if (i as u64) < best.2 { 1.0 } else { 0.0 }).collect();
            (lv, k as u64 + 1)
        }
        ControlSearch::Exhaustive { levels } => {
            if levels.is_empty() || levels.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::InvalidParams("control levels must lie in [0, 1]".into()));
            }
            let n = levels.len() as u64;
            let total = (0..k).try_fold(1u64, |acc, _| acc.checked_mul(n).filter(|&x| x <= MAX_CANDIDATES));
            let total = match total {
                Some(t) if k <= MAX_EXHAUSTIVE_BINS => t,
                _ => {
                    return Err(Error::BudgetExceeded(format!(
                        "exhaustive search allows at most {MAX_EXHAUSTIVE_BINS} bins and {MAX_CANDIDATES} candidates"
                    )))
                }
            };
            let decode = |mut idx: u64| -> Vec<f64> {
                let mut lv = vec![0.0; k];
                for slot in lv.iter_mut() {
                    *slot = levels[(idx % n) as usize];
                    idx /= n;
                }
                lv
            };
            // Chunked argmax keeps memory flat and the winner deterministic.
            let chunk = 1u64 << 14;
            let n_chunks = total.div_ceil(chunk);
            let bests = exec.map_range(n_chunks as usize, |ci| {
                let lo = ci as u64 * chunk;
                let hi = (lo + chunk).min(total);
                (lo..hi)
                    .map(|idx| {
                        let (v, x) = binned_value(params, pi0, c, &decode(idx), h);
                        (v, x, idx)
                    })
                    .max_by(|a, b| better(*a, *b))
                    .unwrap()
            });
            let best = bests.into_iter().max_by(|a, b| better(*a, *b)).unwrap();
            (decode(best.2), total)
        }
    };
    let control = bins_to_step(tt, &levels);
    let (value, total_access) = binned_value(params, pi0, c, &levels, h);
    let analytic_t0 = solve_t0(params, pi0, params.mu0, wl)?;
    let analytic_value = bang_bang_value(params, pi0, wl, analytic_t0);
    let monotone = levels.windows(2).all(|w| w[1] <= w[0]);
    let bang_bang = monotone && levels.iter().all(|&x| x == 0.0 || x == 1.0);
    Ok(ControlSearchResult { levels, control, value, total_access, bin_width: h, analytic_t0, analytic_value, monotone, bang_bang, candidates })
}

/// Search space for [`discrete_relaxed_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// One upgrade threshold for all report times (`M·2^K` candidates).
    Common,
    /// A threshold per time bin (`M^K·2^K` candidates, `K ≤ 4`).
    PerBin,
}

/// Largest bin count of the relaxed oracle.
pub const MAX_ORACLE_BINS: usize = 8;
/// Largest value-grid size of the relaxed oracle.
pub const MAX_ORACLE_VALUES: usize = 6;
/// Largest bin count with per-bin thresholds.
pub const MAX_PER_BIN_BINS: usize = 4;

/// A discretized direct mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMechanism {
    /// Uninformed access per bin (0 or 1).
    pub access: Vec<u8>,
    /// Upgrade threshold per bin.
    pub thresholds: Vec<f64>,
    /// Total uninformed access `X(T)`.
    pub total_access: f64,
    /// Threshold of the first bin with access (the common threshold in common mode).
    pub threshold: f64,
    /// Uninformed buyer's price (binding participation; 0 for `w_L ≤ −1`).
    pub price_uninformed: f64,
    /// High-type payoff.
    pub payoff_h: f64,
    /// Weighted objective `w_L·π_L + π_H`.
    pub value: f64,
}

/// Result of [`discrete_relaxed_oracle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Time bins.
    pub k: usize,
    /// Value-grid points.
    pub m: usize,
    /// Threshold restriction used.
    pub mode: ThresholdMode,
    /// Analytic optimum `w_L·π_L + π_H`.
    pub analytic_value: f64,
    /// Analytic trial length.
    pub analytic_t0: f64,
    /// Analytic threshold.
    pub analytic_v0: f64,
    /// Best discrete mechanism.
    pub argmax: DiscreteMechanism,
    /// `analytic_value − argmax.value`.
    pub gap: f64,
    /// `gap / |analytic_value|`.
    pub relative_gap: f64,
    /// `T/K`.
    pub bin_width: f64,
    /// Value-grid spacing.
    pub value_step: f64,
    /// `|X(T) − t₀| ≤ T/K`.
    pub t0_within_one_bin: bool,
    /// `|threshold − v₀| ≤` grid spacing.
    pub v0_within_one_step: bool,
    /// Candidates evaluated.
    pub candidates: u64,
}

/// Per-bin factor `G_j = ∫_{bin} (T − t − I(U,t)) λ e^{−λX(t)} dt` for an on/off pattern.
fn bin_factors(params: &ModelParams, pattern: u32, k: usize, h: f64) -> (Vec<f64>, f64) {
    let (l, tt) = (params.lambda, params.horizon);
    let on = |i: usize| pattern >> i & 1 == 1;
    let x_t = (0..k).filter(|&i| on(i)).count() as f64 * h;
    let mut x_a = 0.0;
    let mut g = vec![0.0; k];
    for (i, gi) in g.iter_mut().enumerate() {
        if on(i) {
            // With full access, T − t − I(U,t) is constant on the bin.
            let h_a = tt - i as f64 * h - x_t + x_a;
            *gi = l * h_a * (-l * x_a).exp() * exp_integral(l, h);
            x_a += h;
        }
    }
    (g, x_t)
}

/// Exhaustive search over discretized mechanisms: on/off uninformed access per
/// time bin, upgrade thresholds on an `M`-point value grid, envelope payments
/// and binding participation, scored by `w_L·π_L + π_H` in closed form.
pub fn discrete_relaxed_oracle(
    params: &ModelParams,
    dist: &ValueDistribution,
    wl: f64,
    k: usize,
    m: usize,
    mode: ThresholdMode,
) -> Result<OracleReport> {
    discrete_relaxed_oracle_with(params, dist, wl, k, m, mode, Exec::default())
}

/// [`discrete_relaxed_oracle`] with an explicit execution policy.
pub fn discrete_relaxed_oracle_with(
    params: &ModelParams,
    dist: &ValueDistribution,
    wl: f64,
    k: usize,
    m: usize,
    mode: ThresholdMode,
    exec: Exec,
) -> Result<OracleReport> {
    params.validate()?;
    if k == 0 || m < 2 {
        return Err(Error::InvalidParams("need at least one bin and two value points".into()));
    }
    if k > MAX_ORACLE_BINS || m > MAX_ORACLE_VALUES || (mode == ThresholdMode::PerBin && k > MAX_PER_BIN_BINS) {
        return Err(Error::BudgetExceeded(format!(
            "relaxed oracle allows K ≤ {MAX_ORACLE_BINS} (≤ {MAX_PER_BIN_BINS} per-bin), M ≤ {MAX_ORACLE_VALUES}; got K={k}, M={m}"
        )));
    }
    let analytic = solve_trial(params, dist, wl)?;
    let (l, tt, mu0) = (params.lambda, params.horizon, params.mu0);
    let c = ex_ante_weight(mu0, wl);
    let h = tt / k as f64;
    let grid = linspace(dist.lo(), dist.hi(), m);
    // Per-threshold coefficients: buyer rent share and seller upgrade revenue.
    let rent: Vec<f64> = grid.iter().map(|&v| dist.tail_excess(v)).collect();
    let sale: Vec<f64> = grid.iter().map(|&v| v * dist.tail_mass(v)).collect();
    let score: Vec<f64> = (0..m).map(|j| l * (c * rent[j] + sale[j])).collect();
    let mean = dist.mean();

    let per_pattern = |pattern: u32| -> (f64, f64, Vec<usize>) {
        let (g, x_t) = bin_factors(params, pattern, k, h);
        let base = c * l * mean * x_t;
        match mode {
            ThresholdMode::Common => {
                // Best common threshold; ties to the smaller value.
                let gs: f64 = g.iter().sum();
                let mut best = (f64::NEG_INFINITY, 0usize);
                for j in 0..m {
                    let v = base + score[j] * gs;
                    if v > best.0 + 1e-15 * v.abs().max(1.0) {
                        best = (v, j);
                    }
                }
                (best.0, x_t, vec![best.1; k])
            }
            ThresholdMode::PerBin => {
                // Enumerate all M^K threshold vectors.
                let total = (m as u64).pow(k as u32);
                let mut best = (f64::NEG_INFINITY, vec![0usize; k]);
                for mut idx in 0..total {
                    let mut js = vec![0usize; k];
                    let mut v = base;
                    for (i, slot) in js.iter_mut().enumerate() {
                        *slot = (idx % m as u64) as usize;
                        idx /= m as u64;
                        v += score[*slot] * g[i];
                    }
                    // Lexicographically smaller threshold vectors win near-ties.
                    if v > best.0 + 1e-15 * v.abs().max(1.0) {
                        best = (v, js);
                    }
                }
                (best.0, x_t, best.1)
            }
        }
    };

    let n_patterns = 1usize << k;
    let results = exec.map_range(n_patterns, |p| per_pattern(p as u32));
    let mut best_idx = 0usize;
    for (p, r) in results.iter().enumerate() {
        let b = &results[best_idx];
        let tol = 1e-13 * r.0.abs().max(b.0.abs()).max(1.0);
        let first_active = |r: &(f64, f64, Vec<usize>), pat: usize| (0..k).find(|&i| pat >> i & 1 == 1).map_or(0, |i| r.2[i]);
        let take = if (r.0 - b.0).abs() > tol {
            r.0 > b.0
        } else if (r.1 - b.1).abs() > 1e-12 {
            r.1 < b.1
        } else {
            first_active(r, p) < first_active(b, best_idx)
        };
        if take {
            best_idx = p;
        }
    }
    let (value, x_t, js) = results[best_idx].clone();
    let (g, _) = bin_factors(params, best_idx as u32, k, h);
    let access: Vec<u8> = (0..k).map(|i| (best_idx >> i & 1) as u8).collect();
    let thresholds: Vec<f64> = js.iter().map(|&j| grid[j]).collect();
    let threshold = (0..k).find(|&i| access[i] == 1).map_or(grid[js[0]], |i| thresholds[i]);
    let p_u = if wl > -1.0 { mu0 * l * (mean * x_t + (0..k).map(|i| rent[js[i]] * g[i]).sum::<f64>()) } else { 0.0 };
    let payoff_h = p_u + (0..k).map(|i| l * sale[js[i]] * g[i]).sum::<f64>();

    let analytic_value = bang_bang_value(params, analytic.pi0, wl, analytic.mechanism.t0);
    let gap = analytic_value - value;
    let value_step = grid[1] - grid[0];
    let candidates = match mode {
        ThresholdMode::Common => (n_patterns * m) as u64,
        ThresholdMode::PerBin => n_patterns as u64 * (m as u64).pow(k as u32),
    };
    Ok(OracleReport {
        k,
        m,
        mode,
        analytic_value,
        analytic_t0: analytic.mechanism.t0,
        analytic_v0: analytic.mechanism.v0,
        argmax: DiscreteMechanism { access, thresholds, total_access: x_t, threshold, price_uninformed: p_u, payoff_h, value },
        gap,
        relative_gap: gap / analytic_value.abs().max(f64::MIN_POSITIVE),
        bin_width: h,
        value_step,
        t0_within_one_bin: (x_t - analytic.mechanism.t0).abs() <= h * (1.0 + 1e-12),
        v0_within_one_step: (threshold - analytic.mechanism.v0).abs() <= value_step * (1.0 + 1e-12),
        candidates,
    })
}
