//! The seller-payoff frontier, equilibrium-payoff membership and the
//! refinement-surviving free-trial segment.

use crate::error::{Error, Result};
use crate::numerics::{bisect, integrate_split, linspace};
use crate::par::Exec;
use crate::primitives::{ModelParams, ValueDistribution};
use crate::trial_solver::{free_trial, solve_trial, solve_trial_with_selection, TrialMechanism};
use serde::{Deserialize, Serialize};

/// Named frontier points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointLabel {
    /// First best: sell everything ex ante, `w_L = (1−μ₀)/μ₀`.
    B,
    /// Myersonian free trial, `w_L = −1`, `p₀ = 0`.
    F,
    /// High-type optimum, `w_L = 0`.
    H,
    /// Upper end of the refinement-surviving segment.
    D,
    /// Any other point.
    #[serde(rename = "generic")]
    Generic,
}

impl PointLabel {
    /// Short text label used in tables.
    pub fn as_str(self) -> &'static str {
        match self {
            PointLabel::B => "B",
            PointLabel::F => "F",
            PointLabel::H => "H",
            PointLabel::D => "D",
            PointLabel::Generic => "generic",
        }
    }
}

/// A seller payoff pair `(π_L, π_H)` with its generating mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffPoint {
    /// Low-type payoff.
    pub pi_l: f64,
    /// High-type payoff.
    pub pi_h: f64,
    /// Generating weight, if on the frontier.
    pub wl: Option<f64>,
    /// Name of the point.
    pub label: PointLabel,
    /// Trial that achieves the point.
    pub mechanism: Option<TrialMechanism>,
}

fn label_for(wl: f64, cap: f64) -> PointLabel {
    if (wl - cap).abs() <= 1e-12 * cap.max(1.0) {
        PointLabel::B
    } else if wl == -1.0 {
        PointLabel::F
    } else if wl == 0.0 {
        PointLabel::H
    } else {
        PointLabel::Generic
    }
}

/// `n` weights evenly spaced on `[−1, (1−μ₀)/μ₀]`, with `0` inserted if absent.
pub fn default_weight_grid(params: &ModelParams, n: usize) -> Vec<f64> {
    let mut g = linspace(-1.0, params.weight_cap(), n.max(2));
    if !g.contains(&0.0) {
        g.push(0.0);
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    g
}

/// One frontier point per weight (canonical price at `w_L ≤ −1`).
pub fn trace_frontier(params: &ModelParams, dist: &ValueDistribution, wl_grid: &[f64]) -> Result<Vec<PayoffPoint>> {
    trace_frontier_with(params, dist, wl_grid, Exec::default())
}

/// [`trace_frontier`] with an explicit execution policy.
pub fn trace_frontier_with(params: &ModelParams, dist: &ValueDistribution, wl_grid: &[f64], exec: Exec) -> Result<Vec<PayoffPoint>> {
    if wl_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParams("weight grid must be sorted".into()));
    }
    let cap = params.weight_cap();
    let pts = exec.map_slice(wl_grid, |&wl| {
        solve_trial(params, dist, wl).map(|r| PayoffPoint {
            pi_l: r.payoff_l,
            pi_h: r.payoff_h,
            wl: Some(wl),
            label: label_for(wl, cap),
            mechanism: Some(r.mechanism),
        })
    });
    pts.into_iter().collect()
}

/// Frontier point with the binding participation price, continuous on `[−1, cap]`
/// (at `w_L = −1` this is point D).
fn upper_point(params: &ModelParams, dist: &ValueDistribution, wl: f64) -> Result<(f64, f64)> {
    let r = solve_trial_with_selection(params, dist, wl, 1.0)?;
    Ok((r.payoff_l, r.payoff_h))
}

/// Equilibrium-payoff membership for a reasonable pair (`π_H ≥ π_L ≥ 0`):
/// `π_H ≥ π_F` and some frontier point lies on the 45° ray above `(π_L, π_H)`.
pub fn is_equilibrium_payoff(pi_l: f64, pi_h: f64, params: &ModelParams, dist: &ValueDistribution) -> Result<bool> {
    if !(pi_l >= 0.0 && pi_h >= pi_l) {
        return Err(Error::NotReasonable);
    }
    let tol = 1e-9 * (params.lambda * params.horizon).max(1.0);
    let ft = free_trial(params, dist)?;
    if pi_h < ft.pi_f - tol {
        return Ok(false);
    }
    let diff = pi_h - pi_l;
    if diff > ft.pi_f + tol {
        return Ok(false);
    }
    let cap = params.weight_cap();
    // g(w) = (π_L* − π_L) − (π_H* − π_H) is nondecreasing in w.
    let g = |wl: f64| upper_point(params, dist, wl).map(|(l, h)| (l - pi_l) - (h - pi_h)).unwrap_or(f64::NAN);
    let wl = if g(-1.0) >= 0.0 {
        -1.0
    } else if g(cap) <= 0.0 {
        cap
    } else {
        bisect(g, -1.0, cap, 1e-12)?
    };
    let (l_star, h_star) = upper_point(params, dist, wl)?;
    let on_ray = ((l_star - pi_l) - (h_star - pi_h)).abs() <= tol.max(1e-7 * params.lambda * params.horizon);
    Ok(on_ray && l_star - pi_l >= -tol)
}

/// The refinement-surviving segment from F to D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D1Segment {
    /// Upper endpoint `(π_L^D, π_L^D + π_F)`.
    pub d: PayoffPoint,
    /// Lower endpoint `(0, π_F)`.
    pub f: PayoffPoint,
    /// Free-trial length.
    pub t_m: f64,
    /// Monopoly price.
    pub v_m: f64,
    /// Free-trial high-type payoff; constant payoff difference along the segment.
    pub pi_f: f64,
    /// Maximal ex-ante price of the free-trial shape.
    pub pi_l_d: f64,
}

impl D1Segment {
    /// Trial on the segment with ex-ante price `p ∈ [0, π_L^D]`.
    pub fn mechanism_at(&self, p: f64, params: &ModelParams) -> Result<TrialMechanism> {
        if !(0.0..=self.pi_l_d).contains(&p) {
            return Err(Error::InvalidParams(format!("price {p} outside [0, {}]", self.pi_l_d)));
        }
        Ok(TrialMechanism::new(p, self.t_m, self.v_m, params))
    }

    /// Payoff pair `(p, p + π_F)`.
    pub fn payoff_at(&self, p: f64) -> (f64, f64) {
        (p, p + self.pi_f)
    }
}

/// The refinement-surviving payoff segment: free-trial shape `(t_M, v_M)` with
/// ex-ante price in `[0, π_L^D]`, where
/// `π_L^D = λμ₀t_M + μ₀(1−e^{−λt_M})λ(T−t_M)∫_{v_M}^{v̄}(v − v_M) f(v) dv`.
pub fn d1_payoffs(params: &ModelParams, dist: &ValueDistribution) -> Result<D1Segment> {
    let ft = free_trial(params, dist)?;
    let (l, tt, mu0) = (params.lambda, params.horizon, params.mu0);
    let excess = integrate_split(|v| (v - ft.v_m) * dist.pdf(v), ft.v_m, dist.hi(), dist.breakpoints(), 1e-14);
    let pi_l_d = l * mu0 * ft.t_m + mu0 * (-(-l * ft.t_m).exp_m1()) * l * (tt - ft.t_m) * excess;
    let f = PayoffPoint {
        pi_l: 0.0,
        pi_h: ft.pi_f,
        wl: Some(-1.0),
        label: PointLabel::F,
        mechanism: Some(TrialMechanism::new(0.0, ft.t_m, ft.v_m, params)),
    };
    let d = PayoffPoint {
        pi_l: pi_l_d,
        pi_h: pi_l_d + ft.pi_f,
        wl: Some(-1.0),
        label: PointLabel::D,
        mechanism: Some(TrialMechanism::new(pi_l_d, ft.t_m, ft.v_m, params)),
    };
    Ok(D1Segment { d, f, t_m: ft.t_m, v_m: ft.v_m, pi_f: ft.pi_f, pi_l_d })
}

/// Whether the intuitive criterion selects the same payoffs as D1:
/// `f(1) − (1 − μ₀)(1 − F(1)) ≤ 0`.
pub fn intuitive_criterion_equivalent(dist: &ValueDistribution, mu0: f64) -> bool {
    dist.pdf(1.0) - (1.0 - mu0) * (1.0 - dist.cdf(1.0)) <= 0.0
}
