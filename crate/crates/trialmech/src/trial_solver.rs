//! Optimal trial mechanisms on the seller-payoff frontier.
//!
//! For a frontier weight `w_L` the optimal mechanism is a trial `(p₀, t₀, v₀)`:
//! full access until `t₀`, then a premium continuation at
//! `λ·v₀·(T − t₀)` bought by every buyer who learned a value `v ≥ v₀`.

use crate::error::{Error, Result};
use crate::numerics::{bisect, integrate_split, ROOT_TOL};
use crate::primitives::{hazard_weight, ModelParams, ValueDistribution};
use serde::{Deserialize, Serialize};

/// A trial mechanism `(p₀, t₀, v₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMechanism {
    /// Ex-ante price.
    pub p0: f64,
    /// Trial length.
    pub t0: f64,
    /// Post-trial value threshold.
    pub v0: f64,
    /// Price of the premium continuation, `λ·v₀·(T − t₀)`.
    pub post_trial_price: f64,
}

impl TrialMechanism {
    /// Assemble a trial and derive its post-trial price.
    pub fn new(p0: f64, t0: f64, v0: f64, params: &ModelParams) -> Self {
        let post_trial_price = params.lambda * v0 * (params.horizon - t0);
        Self { p0, t0, v0, post_trial_price }
    }
}

/// Which branch of the characterization produced the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCase {
    /// `t₀ ∈ (0, T)` solves the first-order condition.
    InteriorT0,
    /// The first-order condition has no interior root; `t₀ = T` (sell ex ante).
    CornerT0EqualsT,
    /// `w_L ≤ −1`: the ex-ante price is any value in an interval.
    WlLeqMinus1PriceInterval,
}

/// Full output of [`solve_trial`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// The optimal trial.
    pub mechanism: TrialMechanism,
    /// Expected virtual surplus `π₀`.
    pub pi0: f64,
    /// Low-type seller payoff `π_L = p₀`.
    pub payoff_l: f64,
    /// High-type seller payoff.
    pub payoff_h: f64,
    /// Weight that generated this point.
    pub wl: f64,
    /// Characterization branch.
    pub boundary_case: BoundaryCase,
    /// Admissible ex-ante prices when `w_L ≤ −1`.
    pub price_interval: Option<(f64, f64)>,
}

impl SolveReport {
    /// Frontier objective `w_L·π_L + π_H`.
    pub fn weighted_value(&self) -> f64 {
        self.wl * self.payoff_l + self.payoff_h
    }
}

/// Ex-ante price choice produced by [`solve_p0`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceChoice {
    /// Selected price.
    pub p0: f64,
    /// Admissible interval (only when `w_L ≤ −1`).
    pub interval: Option<(f64, f64)>,
}

fn check_weight(mu0: f64, wl: f64) -> Result<()> {
    let cap = (1.0 - mu0) / mu0;
    if !wl.is_finite() {
        return Err(Error::InvalidParams(format!("weight must be finite, got {wl}")));
    }
    if wl > cap + 1e-12 * cap.max(1.0) {
        return Err(Error::WeightOutOfRange { wl, cap });
    }
    Ok(())
}

/// Post-trial threshold `v₀ = max{v̲, root of v − A(1−F(v))/f(v)}`,
/// `A = 1 − μ₀(w_L+1)₊`.
pub fn solve_v0(dist: &ValueDistribution, mu0: f64, wl: f64) -> Result<f64> {
    check_weight(mu0, wl)?;
    dist.threshold(hazard_weight(mu0, wl))
}

/// Expected virtual surplus `π₀ = ∫_{v₀}^{v̄} (v − A(1−F)/f) f dv` by adaptive quadrature.
pub fn expected_virtual_surplus(dist: &ValueDistribution, mu0: f64, wl: f64, v0: f64) -> f64 {
    let a = hazard_weight(mu0, wl);
    // (v − A(1−F)/f)·f = v f − A(1 − F)
    let tol = 1e-13 * dist.hi().max(1.0);
    integrate_split(|v| v * dist.pdf(v) - a * (1.0 - dist.cdf(v)), v0, dist.hi(), dist.breakpoints(), tol)
}

/// Root of `λe^{−λt}(T − t) − (1 − e^{−λt}) + k = 0` on `[0, T]`, or `T` when
/// `1 − e^{−λT} ≤ k`.
pub fn trial_length(params: &ModelParams, k: f64) -> Result<f64> {
    let (l, tt) = (params.lambda, params.horizon);
    if -(-l * tt).exp_m1() <= k {
        return Ok(tt);
    }
    let resid = |t: f64| l * (-l * t).exp() * (tt - t) + (-l * t).exp_m1() + k;
    bisect(resid, 0.0, tt, ROOT_TOL)
}

/// Trial length `t₀` for a frontier weight (first-order condition of the control problem
/// with constant `μ₀(1+w_L)₊/π₀`).
pub fn solve_t0(params: &ModelParams, pi0: f64, mu0: f64, wl: f64) -> Result<f64> {
    if !(pi0 > 0.0) {
        return Err(Error::InvalidParams(format!("virtual surplus must be positive, got {pi0}")));
    }
    trial_length(params, mu0 * (1.0 + wl).max(0.0) / pi0)
}

/// Largest ex-ante price a buyer accepts for the trial `(t₀, v₀)`:
/// `λμ₀t₀ + μ₀λ(T − t₀)(1 − e^{−λt₀})·E[(v − v₀)₊]`.
pub fn buyer_reservation_price(params: &ModelParams, dist: &ValueDistribution, t0: f64, v0: f64) -> f64 {
    let (l, tt, mu0) = (params.lambda, params.horizon, params.mu0);
    l * mu0 * t0 * dist.mean() + mu0 * l * (tt - t0) * (-(-l * t0).exp_m1()) * dist.tail_excess(v0)
}

/// Ex-ante price: the binding participation price for `w_L > −1`; for
/// `w_L ≤ −1` any price in `[0, reservation]` is optimal and `selection ∈ [0,1]`
/// interpolates (0 selects the free trial convention `p₀ = 0`).
pub fn solve_p0(params: &ModelParams, dist: &ValueDistribution, t0: f64, v0: f64, wl: f64, selection: f64) -> PriceChoice {
    let max = buyer_reservation_price(params, dist, t0, v0);
    if wl <= -1.0 {
        let s = selection.clamp(0.0, 1.0);
        PriceChoice { p0: s * max, interval: Some((0.0, max)) }
    } else {
        PriceChoice { p0: max, interval: None }
    }
}

/// High-type payoff `p₀ + (1 − e^{−λt₀})(1 − F(v₀))λv₀(T − t₀)`.
pub fn high_type_payoff(params: &ModelParams, dist: &ValueDistribution, m: &TrialMechanism) -> f64 {
    let l = params.lambda;
    m.p0 + (-(-l * m.t0).exp_m1()) * dist.tail_mass(m.v0) * l * m.v0 * (params.horizon - m.t0)
}

/// Optimal trial for weight `w_L` (canonical price selection).
pub fn solve_trial(params: &ModelParams, dist: &ValueDistribution, wl: f64) -> Result<SolveReport> {
    solve_trial_with_selection(params, dist, wl, 0.0)
}

/// Optimal trial with an explicit price selection for `w_L ≤ −1`.
pub fn solve_trial_with_selection(params: &ModelParams, dist: &ValueDistribution, wl: f64, selection: f64) -> Result<SolveReport> {
    params.validate()?;
    let mu0 = params.mu0;
    let v0 = solve_v0(dist, mu0, wl)?;
    let pi0 = expected_virtual_surplus(dist, mu0, wl, v0);
    let t0 = solve_t0(params, pi0, mu0, wl)?;
    let price = solve_p0(params, dist, t0, v0, wl, selection);
    let mechanism = TrialMechanism::new(price.p0, t0, v0, params);
    let boundary_case = if wl <= -1.0 {
        BoundaryCase::WlLeqMinus1PriceInterval
    } else if t0 >= params.horizon {
        BoundaryCase::CornerT0EqualsT
    } else {
        BoundaryCase::InteriorT0
    };
    Ok(SolveReport {
        payoff_l: price.p0,
        payoff_h: high_type_payoff(params, dist, &mechanism),
        mechanism,
        pi0,
        wl,
        boundary_case,
        price_interval: price.interval,
    })
}

/// The Myersonian free trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeTrial {
    /// Trial length `t_M = argmax (1 − e^{−λt})(T − t)`.
    pub t_m: f64,
    /// Monopoly price `v_M`.
    pub v_m: f64,
    /// High-type payoff `π_F`.
    pub pi_f: f64,
}

/// Free trial `(t_M, v_M, π_F)`.
pub fn free_trial(params: &ModelParams, dist: &ValueDistribution) -> Result<FreeTrial> {
    params.validate()?;
    let t_m = trial_length(params, 0.0)?;
    let v_m = dist.monopoly_price();
    let l = params.lambda;
    let pi_f = (-(-l * t_m).exp_m1()) * dist.tail_mass(v_m) * l * v_m * (params.horizon - t_m);
    Ok(FreeTrial { t_m, v_m, pi_f })
}

/// Whether the first-best (selling everything ex ante at `λμ₀T`) is an
/// equilibrium outcome: `π_F ≤ λμ₀T`.
pub fn first_best_attainable(params: &ModelParams, dist: &ValueDistribution) -> Result<bool> {
    let ft = free_trial(params, dist)?;
    Ok(ft.pi_f <= params.lambda * params.mu0 * params.horizon)
}
