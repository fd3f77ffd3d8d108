//! Model extensions: infinite horizon with discounting, cancellable trials
//! (partial seller information, flow utility and service cost), and the
//! bad-news and mixed-news learning models with their refund schedules.

use crate::error::{Error, Result};
use crate::mechanism::StepFunction;
use crate::numerics::{bisect, integrate, integrate_split, lin_exp_integral, scan_golden_max, ROOT_TOL};
use crate::primitives::{ModelParams, ValueDistribution};
use crate::trial_solver::{expected_virtual_surplus, solve_v0};
use serde::{Deserialize, Serialize};

/// Tolerance for the belief and normalization consistency equations.
pub const CONSISTENCY_TOL: f64 = 1e-10;
/// Number of grid points of a stored refund schedule.
pub const REFUND_GRID: usize = 256;
/// Grid size for the mixed-news no-falsification check.
pub const FALSIFICATION_GRID: usize = 64;
/// Slack allowed in the no-falsification inequalities.
pub const FALSIFICATION_TOL: f64 = 1e-8;
/// Width tolerance of every golden-section search over a switch time.
pub const SWITCH_TOL: f64 = 1e-9;

/// Relative slack when deciding `K ≥ 1` for the infinite-horizon trial.
pub const K_ONE_TOL: f64 = 1e-12;

const QUAD_TOL: f64 = 1e-13;

/// Parameters of the extended models. Fields that a given extension does not
/// use are ignored by it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendedParams {
    /// Discount rate.
    #[serde(default)]
    pub r: f64,
    /// Type-independent flow utility of access.
    #[serde(default)]
    pub u: f64,
    /// Flow cost of providing access.
    #[serde(default)]
    pub c: f64,
    /// Size of a bad-news loss.
    #[serde(default)]
    pub l: f64,
    /// Buyer belief after the favourable seller signal.
    #[serde(default = "one")]
    pub mu_h: f64,
    /// Buyer belief after the unfavourable seller signal.
    #[serde(default)]
    pub mu_l: f64,
    /// Probability of the favourable signal; derived from the beliefs when absent.
    #[serde(default)]
    pub p_h: Option<f64>,
    /// Probability of the unfavourable signal; derived from the beliefs when absent.
    #[serde(default)]
    pub p_l: Option<f64>,
    /// Mixed-news reward under a good match.
    #[serde(default)]
    pub vbar_mixed: Option<f64>,
    /// Mixed-news reward under a bad match.
    #[serde(default)]
    pub vlow_mixed: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl ExtendedParams {
    /// Parameters under which every extension collapses to the baseline model:
    /// no discounting, flow utility, cost or loss and perfectly informative signals.
    pub fn baseline(mu0: f64) -> Self {
        Self {
            r: 0.0,
            u: 0.0,
            c: 0.0,
            l: 0.0,
            mu_h: 1.0,
            mu_l: 0.0,
            p_h: Some(mu0),
            p_l: Some(1.0 - mu0),
            vbar_mixed: None,
            vlow_mixed: None,
        }
    }

    /// Signal probabilities `(p_H, p_L)`, solved from `p_H μ_H + p_L μ_L = μ₀`
    /// when not given.
    pub fn signal_probabilities(&self, mu0: f64) -> (f64, f64) {
        match (self.p_h, self.p_l) {
            (Some(h), Some(l)) => (h, l),
            (Some(h), None) => (h, 1.0 - h),
            (None, Some(l)) => (1.0 - l, l),
            (None, None) => {
                let h = (mu0 - self.mu_l) / (self.mu_h - self.mu_l);
                (h, 1.0 - h)
            }
        }
    }

    /// Mixed-news rewards `(v̄, v̲)` if both are set.
    pub fn mixed_rewards(&self) -> Option<(f64, f64)> {
        self.vbar_mixed.zip(self.vlow_mixed)
    }

    /// Check ranges and the consistency equations against prior `μ₀`.
    pub fn validate(&self, mu0: f64) -> Result<()> {
        for (name, x) in [("r", self.r), ("u", self.u), ("c", self.c), ("l", self.l)] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be finite and nonnegative, got {x}")));
            }
        }
        if !(0.0..=1.0).contains(&self.mu_l) || !(0.0..=1.0).contains(&self.mu_h) || self.mu_h <= self.mu_l {
            return Err(Error::InvalidParams(format!(
                "signal beliefs must satisfy 0 <= mu_l < mu_h <= 1, got mu_l = {}, mu_h = {}",
                self.mu_l, self.mu_h
            )));
        }
        let (ph, pl) = self.signal_probabilities(mu0);
        if !(0.0..=1.0).contains(&ph) || !(0.0..=1.0).contains(&pl) {
            return Err(Error::PreconditionFailed(format!("signal probabilities ({ph}, {pl}) outside [0, 1]")));
        }
        if (ph + pl - 1.0).abs() > CONSISTENCY_TOL {
            return Err(Error::PreconditionFailed(format!("p_h + p_l = {} != 1", ph + pl)));
        }
        let resid = ph * self.mu_h + pl * self.mu_l - mu0;
        if resid.abs() > CONSISTENCY_TOL {
            return Err(Error::PreconditionFailed(format!("p_h*mu_h + p_l*mu_l - mu0 = {resid:e}")));
        }
        match (self.vbar_mixed, self.vlow_mixed) {
            (None, None) => Ok(()),
            (Some(vb), Some(vl)) => check_mixed_rewards(mu0, vb, vl),
            _ => Err(Error::InvalidParams("vbar_mixed and vlow_mixed must be given together".into())),
        }
    }
}

fn check_mixed_rewards(mu0: f64, vbar: f64, vlow: f64) -> Result<()> {
    if !(vbar > 0.0 && vlow < 0.0) {
        return Err(Error::PreconditionFailed(format!("mixed news needs vbar > 0 > vlow, got {vbar}, {vlow}")));
    }
    let resid = mu0 * vbar + (1.0 - mu0) * vlow - 1.0;
    if resid.abs() > CONSISTENCY_TOL {
        return Err(Error::PreconditionFailed(format!("mixed-news mean reward differs from 1 by {resid:e}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Refund schedules
// ---------------------------------------------------------------------------

/// A net-payment schedule `t ↦ Δ_t` sampled on a uniform grid, queried by
/// monotone (Fritsch–Carlson) cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefundSchedule {
    times: Vec<f64>,
    values: Vec<f64>,
    #[serde(skip)]
    slopes: Vec<f64>,
}

impl RefundSchedule {
    /// Sample `f` on `n ≥ 2` uniform points of `[0, horizon]`.
    pub fn sample<F: Fn(f64) -> f64>(horizon: f64, n: usize, f: F) -> Self {
        let n = n.max(2);
        let times: Vec<f64> =
            (0..n).map(|i| if i + 1 == n { horizon } else { horizon * i as f64 / (n - 1) as f64 }).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::from_samples(times, values).expect("uniform grid is strictly increasing")
    }

    /// Build from explicit samples on a strictly increasing grid.
    pub fn from_samples(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::InvalidParams("refund schedule needs at least two matching samples".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams("refund grid must be strictly increasing".into()));
        }
        let slopes = fritsch_carlson(&times, &values);
        Ok(Self { times, values, slopes })
    }

    /// Grid times.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Sampled values `Δ_t`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at the end of the grid, `Δ_T`.
    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Interpolated `Δ_t`; `t` is clamped to the grid.
    pub fn at(&self, t: f64) -> f64 {
        let n = self.times.len();
        let t = t.clamp(self.times[0], self.times[n - 1]);
        let k = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        let h = self.times[k + 1] - self.times[k];
        let s = (t - self.times[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[k] + h10 * h * self.slopes[k] + h01 * self.values[k + 1] + h11 * h * self.slopes[k + 1]
    }

    /// CSV text with header `t,delta`, numbers rendered by `fmt`.
    pub fn to_csv<F: Fn(f64) -> String>(&self, fmt: F) -> String {
        let mut out = String::from("t,delta\n");
        for (t, d) in self.times.iter().zip(&self.values) {
            out.push_str(&fmt(*t));
            out.push(',');
            out.push_str(&fmt(*d));
            out.push('\n');
        }
        out
    }
}

fn fritsch_carlson(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let d: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k])).collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for k in 1..n - 1 {
        m[k] = if d[k - 1] * d[k] <= 0.0 { 0.0 } else { 0.5 * (d[k - 1] + d[k]) };
    }
    for k in 0..n - 1 {
        if d[k] == 0.0 {
            m[k] = 0.0;
            m[k + 1] = 0.0;
            continue;
        }
        let a = m[k] / d[k];
        let b = m[k + 1] / d[k];
        let r2 = a * a + b * b;
        if r2 > 9.0 {
            let tau = 3.0 / r2.sqrt();
            m[k] = tau * a * d[k];
            m[k + 1] = tau * b * d[k];
        }
    }
    m
}

/// Outcome of a grid no-falsification check: an uninformed buyer must not
/// gain by reporting a bad signal that did not arrive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalsificationCheck {
    /// Number of grid times checked.
    pub grid_points: usize,
    /// `max_t (falsification payoff − truthful continuation)`.
    pub max_excess: f64,
    /// Grid time attaining `max_excess`.
    pub worst_t: f64,
    /// `max_excess ≤ 10⁻⁸`.
    pub pass: bool,
}

fn falsification_check<F: Fn(f64) -> f64>(horizon: f64, n: usize, excess: F) -> FalsificationCheck {
    let mut worst = (0.0, f64::NEG_INFINITY);
    for i in 0..n {
        let t = if i + 1 == n { horizon } else { horizon * i as f64 / (n - 1) as f64 };
        let e = excess(t);
        if e > worst.1 {
            worst = (t, e);
        }
    }
    FalsificationCheck { grid_points: n, max_excess: worst.1, worst_t: worst.0, pass: worst.1 <= FALSIFICATION_TOL }
}

// ---------------------------------------------------------------------------
// Infinite horizon with discounting
// ---------------------------------------------------------------------------

/// Optimal trial when the horizon is infinite and payoffs are discounted at `r`.
/// Prices are time-zero discounted totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfiniteHorizonTrial {
    /// Trial length; `f64::INFINITY` when the trial never ends.
    pub t0: f64,
    /// Post-trial threshold.
    pub v0: f64,
    /// Expected virtual surplus.
    pub pi0: f64,
    /// Control constant `μ₀(1+w_L)₊/π₀`.
    pub k: f64,
    /// Ex-ante price.
    pub p_u: f64,
    /// Upgrade price for values above `v₀` reported during the trial.
    pub upgrade_price: f64,
    /// Low-type seller payoff.
    pub pi_l: f64,
    /// High-type seller payoff.
    pub pi_h: f64,
    /// Admissible ex-ante price interval when `w_L ≤ −1`.
    pub price_interval: Option<(f64, f64)>,
}

impl InfiniteHorizonTrial {
    /// Whether the trial never ends.
    pub fn is_infinite(&self) -> bool {
        self.t0.is_infinite()
    }
}

/// Closed-form discounted trial: `t₀ = (1/λ)ln((λ/r + 1)/(1 − K))` for `K < 1`,
/// `t₀ = ∞` otherwise, with `K = μ₀(1+w_L)₊/π₀`.
pub fn infinite_horizon_trial(lambda: f64, r: f64, mu0: f64, wl: f64, dist: &ValueDistribution) -> Result<InfiniteHorizonTrial> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParams(format!("lambda must be positive, got {lambda}")));
    }
    if !(mu0 > 0.0 && mu0 < 1.0) {
        return Err(Error::InvalidParams(format!("mu0 must lie in (0, 1), got {mu0}")));
    }
    if !(r > 0.0) {
        return Err(Error::UseFiniteHorizon);
    }
    let v0 = solve_v0(dist, mu0, wl)?;
    let pi0 = expected_virtual_surplus(dist, mu0, wl, v0);
    let weight = mu0 * (1.0 + wl).max(0.0);
    let k = weight / pi0;
    // K ≥ 1 up to rounding (K = 1 exactly at the weight cap when E[v] = 1).
    let t0 = if k >= 1.0 - K_ONE_TOL { f64::INFINITY } else { ((lambda / r).ln_1p() - (-k).ln_1p()) / lambda };
    let disc = (-r * t0).exp();
    let learned = -(-lambda * t0).exp_m1();
    let scale = lambda / r;
    let reservation = mu0 * scale * ((1.0 - disc) * dist.mean() + disc * learned * dist.tail_excess(v0));
    let (p_u, price_interval) = if wl <= -1.0 { (0.0, Some((0.0, reservation))) } else { (reservation, None) };
    let upgrade_price = scale * v0 * disc;
    let pi_h = p_u + scale * disc * learned * v0 * dist.tail_mass(v0);
    Ok(InfiniteHorizonTrial { t0, v0, pi0, k, p_u, upgrade_price, pi_l: p_u, pi_h, price_interval })
}

/// Discounted control objective of the trial that switches access off at `t`:
/// `∫_0^t e^{−rs}((λ/r + 1)e^{−λs} + k − 1)λ ds`, by adaptive quadrature
/// (`t = ∞` allowed).
pub fn discounted_objective(lambda: f64, r: f64, k: f64, t: f64) -> f64 {
    let g = |s: f64| (-r * s).exp() * ((lambda / r + 1.0) * (-lambda * s).exp() + k - 1.0) * lambda;
    let end = if t.is_finite() { t } else { 60.0 / r.min(lambda) };
    // Split the range so each piece spans a bounded number of decay lengths.
    let pieces = ((end * r.max(lambda)) / 4.0).ceil().max(1.0) as usize;
    let h = end / pieces as f64;
    (0..pieces).map(|i| integrate(g, h * i as f64, if i + 1 == pieces { end } else { h * (i + 1) as f64 }, QUAD_TOL)).sum()
}

/// Direct numerical maximization of [`discounted_objective`] over switch
/// times in `[0, t_max]` (uniform scan then golden section).
/// Returns `(argmax, max)`.
pub fn discounted_switch_search(lambda: f64, r: f64, k: f64, t_max: f64) -> (f64, f64) {
    scan_golden_max(|t| discounted_objective(lambda, r, k, t), 0.0, t_max, 400, SWITCH_TOL)
}

// ---------------------------------------------------------------------------
// Cancellable trials
// ---------------------------------------------------------------------------

/// Cancellable trial: values below `v_c` stop service at once, values above
/// `v₀` upgrade, the trial lasts `t₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CancellableTrial {
    /// Efficient cancellation value `(c − u)/λ` (unclamped).
    pub v_c: f64,
    /// Whether `v_c` lies above the bottom of the support.
    pub early_cancellation: bool,
    /// Upgrade threshold, root of the virtual value (or a support corner).
    pub v0: f64,
    /// Trial length.
    pub t0: f64,
    /// Rent coefficient `μ_H − μ₀ − w_L(μ₀ − μ_L)`.
    pub b1: f64,
    /// Weight `μ_H + w_L μ_L`.
    pub b2: f64,
    /// Normalized ex-ante value of access.
    pub b3: f64,
    /// Share of the upgrade surplus in the total virtual surplus.
    pub b4: f64,
    /// Virtual surplus of upgrading values.
    pub pi_v: f64,
    /// Surplus of values below `v_c`.
    pub pi_w: f64,
    /// Service is never worth providing after a bad fit (`c > u + λv̄`) or the
    /// total virtual surplus is not positive.
    pub degenerate: bool,
}

/// Optimal cancellable trial for weight `w_L` (weights below −1 act as −1).
pub fn cancellable_trial(params: &ModelParams, ext: &ExtendedParams, dist: &ValueDistribution, wl: f64) -> Result<CancellableTrial> {
    params.validate()?;
    ext.validate(params.mu0)?;
    let (lambda, tt, mu0) = (params.lambda, params.horizon, params.mu0);
    let (u, c) = (ext.u, ext.c);
    let (ph, pl) = ext.signal_probabilities(mu0);
    let cap = if ph > 0.0 { pl / ph } else { f64::INFINITY };
    if !wl.is_finite() {
        return Err(Error::InvalidParams(format!("weight must be finite, got {wl}")));
    }
    if wl > cap + 1e-12 * cap.max(1.0) {
        return Err(Error::WeightOutOfRange { wl, cap });
    }
    let w = wl.max(-1.0);
    let b1 = ext.mu_h - mu0 - w * (mu0 - ext.mu_l);
    let b2 = ext.mu_h + w * ext.mu_l;
    if !(b2 > 0.0) {
        return Err(Error::WeightOutOfRange { wl, cap });
    }
    let rent = lambda * b1.max(0.0) / b2;
    let (lo, hi) = (dist.lo(), dist.hi());
    let phi = |v: f64| u + lambda * v - c - rent * dist.inverse_hazard(v).unwrap_or(f64::NAN);
    let v0 = if phi(lo) >= 0.0 {
        lo
    } else if u + lambda * hi - c <= 0.0 {
        hi
    } else {
        bisect(phi, lo, hi, ROOT_TOL)?
    };
    let v_c = (c - u) / lambda;
    let vc_clamped = v_c.clamp(lo, hi);
    let breaks = dist.breakpoints();
    let pi_v =
        integrate_split(|v| (u + lambda * v - c) * dist.pdf(v) - rent * (1.0 - dist.cdf(v)), v0, hi, breaks, QUAD_TOL);
    let pi_w = integrate_split(|v| (u + lambda * v - c) * dist.pdf(v), lo, vc_clamped, breaks, QUAD_TOL);
    let total = pi_v + pi_w;
    let degenerate = c > u + lambda * hi || !(total > 0.0);
    let (b3, b4) = if total > 0.0 {
        ((1.0 + w) * (mu0 * (u + lambda * dist.mean()) - c) / (b2 * total), pi_v / total)
    } else {
        (0.0, 0.0)
    };
    let t0 = if degenerate || b4 < 0.0 { tt } else { cancellable_trial_length(lambda, tt, b3, b4)? };
    Ok(CancellableTrial { v_c, early_cancellation: v_c > lo, v0, t0, b1, b2, b3, b4, pi_v, pi_w, degenerate })
}

/// Reduced bang-bang objective of a cancellable trial that ends at `t`:
/// `λ∫_0^t (b₄(T−s) − (t−s))e^{−λs} ds + b₃t`.
pub fn cancellable_objective(lambda: f64, horizon: f64, b3: f64, b4: f64, t: f64) -> f64 {
    lambda * lin_exp_integral(b4 * horizon - t, 1.0 - b4, lambda, t) + b3 * t
}

/// Golden-section maximization of [`cancellable_objective`] over `[0, T]`,
/// polished by bisecting its (decreasing) first-order condition.
fn cancellable_trial_length(lambda: f64, tt: f64, b3: f64, b4: f64) -> Result<f64> {
    let (tg, _) = scan_golden_max(|t| cancellable_objective(lambda, tt, b3, b4, t), 0.0, tt, 64, SWITCH_TOL);
    let foc = |t: f64| lambda * b4 * (tt - t) * (-lambda * t).exp() + (-lambda * t).exp_m1() + b3;
    if foc(tt) >= 0.0 {
        return Ok(tt);
    }
    if foc(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let h = 1e-5 * tt;
    let (a, b) = ((tg - h).max(0.0), (tg + h).min(tt));
    bisect(foc, a, b, ROOT_TOL).or_else(|_| bisect(foc, 0.0, tt, ROOT_TOL))
}

// ---------------------------------------------------------------------------
// Bad news
// ---------------------------------------------------------------------------

/// Optimal mechanism in the bad-news model: full access until a loss is
/// reported, then service stops and the buyer receives a refund.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadNewsMechanism {
    /// Access of a buyer who has reported nothing (≡ 1).
    pub access_uninformed: StepFunction,
    /// Access after a loss is reported (≡ 0).
    pub access_after_news: StepFunction,
    /// Net payment `Δ_t` on reporting a loss at `t` (negative = refund).
    pub refund: RefundSchedule,
    /// Whether refunds are paid (`w_L` below the cap); otherwise `Δ ≡ 0`.
    pub refund_active: bool,
    /// Ex-ante price (binding participation).
    pub p_u: f64,
    /// Low-type seller payoff.
    pub pi_l: f64,
    /// High-type seller payoff.
    pub pi_h: f64,
    /// Uninformed buyer cannot profit by reporting a fake loss.
    pub no_falsification: FalsificationCheck,
}

/// Posterior of a good match after `s` units of access without a loss:
/// `μ₀/(μ₀ + (1−μ₀)e^{−λs})`.
pub fn bad_news_posterior(lambda: f64, mu0: f64, s: f64) -> f64 {
    mu0 / (mu0 + (1.0 - mu0) * (-lambda * s).exp())
}

/// Refund-schedule value `Δ_t = −∫_t^T (u − λl(1 − μ_s)) ds` under full access,
/// in closed form.
pub fn bad_news_delta(lambda: f64, l: f64, u: f64, mu0: f64, horizon: f64, t: f64) -> f64 {
    let t = t.clamp(0.0, horizon);
    let m = |s: f64| (mu0 + (1.0 - mu0) * (-lambda * s).exp()).ln();
    -(u * (horizon - t) - l * (m(t) - m(horizon)))
}

fn check_unit_weight(mu0: f64, wl: f64) -> Result<f64> {
    let cap = (1.0 - mu0) / mu0;
    if !wl.is_finite() || wl < -1.0 {
        return Err(Error::InvalidParams(format!("weight must lie in [-1, {cap}], got {wl}")));
    }
    if wl > cap + 1e-12 * cap.max(1.0) {
        return Err(Error::WeightOutOfRange { wl, cap });
    }
    Ok(cap)
}

/// Optimal bad-news mechanism for weight `w_L ∈ [−1, (1−μ₀)/μ₀]`.
pub fn bad_news_mechanism(lambda: f64, l: f64, u: f64, mu0: f64, wl: f64, horizon: f64) -> Result<BadNewsMechanism> {
    ModelParams::new(lambda, horizon, mu0)?;
    if !(l.is_finite() && u.is_finite()) {
        return Err(Error::InvalidParams("loss and flow utility must be finite".into()));
    }
    if !(lambda * l > u && u > (1.0 - mu0) * lambda * l) {
        return Err(Error::PreconditionFailed(format!(
            "bad news needs lambda*l > u > (1-mu0)*lambda*l, got lambda*l = {}, u = {u}, (1-mu0)*lambda*l = {}",
            lambda * l,
            (1.0 - mu0) * lambda * l
        )));
    }
    let cap = check_unit_weight(mu0, wl)?;
    let refund_active = wl < cap - 1e-12 * cap.max(1.0);
    let delta = |t: f64| if refund_active { bad_news_delta(lambda, l, u, mu0, horizon, t) } else { 0.0 };
    // Truthful value of a buyer with no loss by time t.
    let continuation = |t: f64| {
        let rem = horizon - t;
        let mu_t = bad_news_posterior(lambda, mu0, t);
        let after_loss =
            integrate(|s| lambda * (-lambda * (s - t)).exp() * (u * (s - t) - l - delta(s)), t, horizon, QUAD_TOL);
        mu_t * u * rem + (1.0 - mu_t) * (after_loss + (-lambda * rem).exp() * u * rem)
    };
    let p_u = continuation(0.0);
    let expected_delta = integrate(|s| lambda * (-lambda * s).exp() * delta(s), 0.0, horizon, QUAD_TOL);
    let no_falsification = falsification_check(horizon, REFUND_GRID, |t| -delta(t) - continuation(t));
    Ok(BadNewsMechanism {
        access_uninformed: StepFunction::constant(horizon, 1.0),
        access_after_news: StepFunction::constant(horizon, 0.0),
        refund: RefundSchedule::sample(horizon, REFUND_GRID, delta),
        refund_active,
        p_u,
        pi_l: p_u + expected_delta,
        pi_h: p_u,
        no_falsification,
    })
}

// ---------------------------------------------------------------------------
// Mixed news
// ---------------------------------------------------------------------------

/// Optimal mechanism in the mixed-news model: a trial of length `t₀`; a
/// high reward report buys permanent access, a low reward report stops
/// service against a refund.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedNewsMechanism {
    /// Trial length.
    pub t0: f64,
    /// Net payment `Δ^{v̄}_t` after reporting a high reward at `t`.
    pub high_refund: RefundSchedule,
    /// Net payment `Δ^{v̲}_t` after reporting a low reward at `t` (negative = refund).
    pub low_refund: RefundSchedule,
    /// Ex-ante price (binding participation).
    pub p_u: f64,
    /// Low-type seller payoff.
    pub pi_l: f64,
    /// High-type seller payoff.
    pub pi_h: f64,
    /// Weighted objective `w_L π_L + π_H`.
    pub objective: f64,
    /// Uninformed buyer cannot profit by reporting a fake low reward.
    pub no_falsification: FalsificationCheck,
}

/// `Δ^{v̄}_t = λv̄(T − t − (t₀ − t)₊)`.
pub fn mixed_high_delta(lambda: f64, vbar: f64, horizon: f64, t0: f64, t: f64) -> f64 {
    lambda * vbar * (horizon - t - (t0 - t).max(0.0))
}

/// `Δ^{v̲}_t = −∫_t^{t₀} λ(1 + μ₀λv̄(t₀ − s))e^{−μ₀λ(s − t)} ds` (zero after `t₀`).
pub fn mixed_low_delta(lambda: f64, mu0: f64, vbar: f64, t0: f64, t: f64) -> f64 {
    let d = (t0 - t).max(0.0);
    let a = mu0 * lambda * vbar;
    -lambda * lin_exp_integral(1.0 + a * d, -a, mu0 * lambda, d)
}

/// Payoffs of the mixed-news trial of length `t₀`.
struct MixedPayoffs {
    p_u: f64,
    pi_l: f64,
    pi_h: f64,
}

fn mixed_continuation(lambda: f64, mu0: f64, vbar: f64, t0: f64, t: f64) -> f64 {
    if t >= t0 {
        return 0.0;
    }
    let g = |s: f64| {
        lambda
            * (-lambda * (s - t)).exp()
            * (1.0 + mu0 * lambda * vbar * (t0 - s) - (1.0 - mu0) * mixed_low_delta(lambda, mu0, vbar, t0, s))
    };
    integrate(g, t, t0, QUAD_TOL)
}

fn mixed_payoffs(lambda: f64, mu0: f64, horizon: f64, vbar: f64, t0: f64) -> MixedPayoffs {
    let p_u = mixed_continuation(lambda, mu0, vbar, t0, 0.0);
    let learned = -(-lambda * t0).exp_m1();
    let pi_h = p_u + learned * lambda * vbar * (horizon - t0);
    let low = integrate(|s| lambda * (-lambda * s).exp() * mixed_low_delta(lambda, mu0, vbar, t0, s), 0.0, t0, QUAD_TOL);
    MixedPayoffs { p_u, pi_l: p_u + low, pi_h }
}

/// Weighted objective `w_L π_L + π_H` of the mixed-news trial of length `t₀`.
pub fn mixed_news_objective(lambda: f64, mu0: f64, wl: f64, horizon: f64, vbar: f64, t0: f64) -> f64 {
    let p = mixed_payoffs(lambda, mu0, horizon, vbar, t0);
    wl * p.pi_l + p.pi_h
}

/// Optimal mixed-news mechanism for weight `w_L ∈ [−1, (1−μ₀)/μ₀]`.
pub fn mixed_news_mechanism(lambda: f64, mu0: f64, wl: f64, horizon: f64, vbar: f64, vlow: f64) -> Result<MixedNewsMechanism> {
    ModelParams::new(lambda, horizon, mu0)?;
    check_mixed_rewards(mu0, vbar, vlow)?;
    check_unit_weight(mu0, wl)?;
    let (t0, objective) =
        scan_golden_max(|t| mixed_news_objective(lambda, mu0, wl, horizon, vbar, t), 0.0, horizon, 128, SWITCH_TOL);
    let pay = mixed_payoffs(lambda, mu0, horizon, vbar, t0);
    let no_falsification = falsification_check(horizon, FALSIFICATION_GRID, |t| {
        -mixed_low_delta(lambda, mu0, vbar, t0, t) - mixed_continuation(lambda, mu0, vbar, t0, t)
    });
    Ok(MixedNewsMechanism {
        t0,
        high_refund: RefundSchedule::sample(horizon, REFUND_GRID, |t| mixed_high_delta(lambda, vbar, horizon, t0, t)),
        low_refund: RefundSchedule::sample(horizon, REFUND_GRID, |t| mixed_low_delta(lambda, mu0, vbar, t0, t)),
        p_u: pay.p_u,
        pi_l: pay.pi_l,
        pi_h: pay.pi_h,
        objective,
        no_falsification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trial_solver::solve_trial;

    fn unif() -> ValueDistribution {
        ValueDistribution::uniform(0.9, 1.1).unwrap()
    }

    #[test]
    fn extended_params_consistency() {
        let e = ExtendedParams::baseline(0.3);
        e.validate(0.3).unwrap();
        let mut bad = e;
        bad.p_h = Some(0.31);
        assert!(matches!(bad.validate(0.3), Err(Error::PreconditionFailed(_))));
        let mut mixed = e;
        mixed.vbar_mixed = Some(3.0);
        mixed.vlow_mixed = Some(-1.0);
        assert!(mixed.validate(0.5).is_err()); // probabilities are for mu0 = 0.3
        let mut m2 = ExtendedParams::baseline(0.5);
        m2.vbar_mixed = Some(3.0);
        m2.vlow_mixed = Some(-1.0);
        m2.validate(0.5).unwrap();
        m2.vlow_mixed = Some(-0.9);
        assert!(matches!(m2.validate(0.5), Err(Error::PreconditionFailed(_))));
        let parsed: ExtendedParams = serde_json::from_str(r#"{"u":0.2,"c":0.5,"mu_h":0.9,"mu_l":0.1}"#).unwrap();
        assert!((parsed.signal_probabilities(0.5).0 - 0.5).abs() < 1e-15);
        parsed.validate(0.5).unwrap();
    }

    #[test]
    fn refund_schedule_interpolation() {
        let s = RefundSchedule::sample(2.0, REFUND_GRID, |t| -(2.0 - t) * (2.0 - t));
        assert_eq!(s.times().len(), REFUND_GRID);
        assert_eq!(s.terminal(), 0.0);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1000 {
            let t = 2.0 * i as f64 / 1000.0;
            let v = s.at(t);
            assert!(v >= prev - 1e-15, "interpolant not monotone at {t}");
            assert!((v + (2.0 - t) * (2.0 - t)).abs() < 1e-5);
            prev = v;
        }
        // Monotone data with a flat stretch stays flat and never overshoots.
        let k = RefundSchedule::from_samples(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 1.0, 3.0]).unwrap();
        assert!((k.at(1.5) - 1.0).abs() < 1e-15);
        assert!(k.at(2.5) <= 3.0 && k.at(0.5) <= 1.0);
        let csv = k.to_csv(|x| format!("{x}"));
        assert!(csv.starts_with("t,delta\n0,0\n"));
    }

    #[test]
    fn infinite_horizon_examples() {
        let d = unif();
        assert!(matches!(infinite_horizon_trial(1.0, 0.0, 0.3, 0.0, &d), Err(Error::UseFiniteHorizon)));
        let m = infinite_horizon_trial(1.0, 0.1, 0.3, -1.0, &d).unwrap();
        assert!((m.t0 - 11f64.ln()).abs() < 1e-14);
        assert_eq!(m.p_u, 0.0);
        let m = infinite_horizon_trial(1.0, 0.1, 0.3, 0.0, &d).unwrap();
        assert!(m.t0.is_finite());
        let (t, _) = discounted_switch_search(1.0, 0.1, m.k, 200.0);
        assert!((t - m.t0).abs() < 1e-4, "oracle {t} vs closed form {}", m.t0);
        // Near the weight cap the weight term outgrows the virtual surplus.
        let m = infinite_horizon_trial(1.0, 0.1, 0.3, 7.0 / 3.0, &d).unwrap();
        assert!(m.is_infinite() && m.k >= 1.0);
        assert!((m.p_u - 0.3 * 10.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_horizon_decreasing_in_r() {
        let d = unif();
        let mut prev = f64::INFINITY;
        for r in [0.01, 0.05, 0.1, 0.5, 1.0, 5.0] {
            let m = infinite_horizon_trial(1.0, r, 0.4, 0.2, &d).unwrap();
            assert!(m.t0 < prev);
            prev = m.t0;
        }
    }

    #[test]
    fn cancellable_degenerates_to_baseline() {
        let p = ModelParams::new(1.3, 4.0, 0.35).unwrap();
        let d = ValueDistribution::uniform(0.7, 1.3).unwrap();
        let e = ExtendedParams::baseline(p.mu0);
        for wl in [-1.0, -0.4, 0.0, 0.8, p.weight_cap()] {
            let c = cancellable_trial(&p, &e, &d, wl).unwrap();
            let b = solve_trial(&p, &d, wl).unwrap();
            assert!(!c.early_cancellation && !c.degenerate);
            assert!((c.b4 - 1.0).abs() < 1e-12);
            assert!((c.v0 - b.mechanism.v0).abs() < 1e-8, "v0 at {wl}");
            assert!((c.t0 - b.mechanism.t0).abs() < 1e-8, "t0 at {wl}: {} vs {}", c.t0, b.mechanism.t0);
        }
    }

    #[test]
    fn cancellable_examples() {
        let p = ModelParams::new(1.0, 5.0, 0.5).unwrap();
        let d = ValueDistribution::uniform(0.0, 2.0).unwrap();
        let mut e = ExtendedParams::baseline(0.5);
        e.u = 0.2;
        e.c = 0.5;
        let m = cancellable_trial(&p, &e, &d, 0.0).unwrap();
        assert!((m.v_c - 0.3).abs() < 1e-15);
        assert!(m.early_cancellation && m.v0 >= m.v_c);
        e.c = 2.5;
        let m = cancellable_trial(&p, &e, &d, 0.0).unwrap();
        assert!(m.degenerate && m.v_c > d.hi());
        // Imperfect signals: the admissible weight range is [−1, p_L/p_H].
        let e = ExtendedParams { mu_h: 0.8, mu_l: 0.2, p_h: None, p_l: None, ..ExtendedParams::baseline(0.5) };
        assert!(matches!(cancellable_trial(&p, &e, &d, 1.01), Err(Error::WeightOutOfRange { .. })));
        let m = cancellable_trial(&p, &e, &d, 0.5).unwrap();
        assert!(m.t0 > 0.0 && m.t0 <= p.horizon);
        // The polished trial length maximizes the reduced objective.
        let f = |t| cancellable_objective(1.0, 5.0, m.b3, m.b4, t);
        for dt in [-1e-3, 1e-3] {
            let t = (m.t0 + dt).clamp(0.0, 5.0);
            assert!(f(t) <= f(m.t0) + 1e-14);
        }
    }

    #[test]
    fn bad_news_examples() {
        assert!(matches!(bad_news_mechanism(1.0, 1.0, 0.4, 0.5, 0.0, 2.0), Err(Error::PreconditionFailed(_))));
        let m = bad_news_mechanism(1.0, 1.0, 0.6, 0.5, 0.0, 2.0).unwrap();
        assert_eq!(m.refund.terminal(), 0.0);
        let q = integrate(|s| 0.6 - (1.0 - bad_news_posterior(1.0, 0.5, s)), 0.0, 2.0, 1e-14);
        assert!((m.refund.values()[0] + q).abs() < 1e-12);
        assert!(m.no_falsification.pass, "{:?}", m.no_falsification);
        // The binding falsification constraint at t = 0 is the participation price.
        assert!((m.p_u + m.refund.values()[0]).abs() < 1e-9);
        assert!(m.refund.values().windows(2).all(|w| w[1].abs() <= w[0].abs() + 1e-15));
        assert!((m.pi_h - m.p_u).abs() == 0.0 && m.pi_l < m.pi_h);
        // At the cap no refunds are paid and the good is sold ex ante.
        let m = bad_news_mechanism(1.0, 1.0, 0.6, 0.5, 1.0, 2.0).unwrap();
        assert!(!m.refund_active && m.refund.values().iter().all(|&x| x == 0.0));
        assert!(m.no_falsification.pass);
        // Knife edge: a perfectly confident buyer with zero flow utility.
        assert_eq!(bad_news_delta(1.0, 1.0, 0.0, 1.0, 2.0, 0.3), 0.0);
    }

    #[test]
    fn mixed_news_examples() {
        let m = mixed_news_mechanism(1.0, 0.5, 0.0, 3.0, 3.0, -1.0).unwrap();
        assert!(m.t0 > 0.0 && m.t0 <= 3.0);
        assert_eq!(m.low_refund.terminal(), 0.0);
        assert!(m.no_falsification.pass, "{:?}", m.no_falsification);
        for (t, d) in m.high_refund.times().iter().zip(m.high_refund.values()) {
            if *t >= m.t0 {
                assert!((d - 3.0 * (3.0 - t)).abs() < 1e-12);
            } else {
                assert!(*d >= 0.0);
            }
        }
        // ±grid perturbation does not improve the objective.
        let f = |t| mixed_news_objective(1.0, 0.5, 0.0, 3.0, 3.0, t);
        for dt in [-3.0 / 256.0, 3.0 / 256.0] {
            let t = (m.t0 + dt).clamp(0.0, 3.0);
            assert!(f(t) <= m.objective + 1e-12);
        }
        // A trial covering the whole horizon leaves no upgrade payment.
        assert!((0..=10).all(|i| mixed_high_delta(1.0, 3.0, 0.5, 0.5, 0.05 * i as f64).abs() < 1e-15));
        // The low-signal refund matches its ODE derivative.
        let (t, h) = (0.7, 1e-6);
        let deriv = (mixed_low_delta(1.0, 0.5, 3.0, 2.0, t + h) - mixed_low_delta(1.0, 0.5, 3.0, 2.0, t - h)) / (2.0 * h);
        let rhs = 1.0 * (1.0 + 0.5 * 3.0 * (2.0 - t) + 0.5 * mixed_low_delta(1.0, 0.5, 3.0, 2.0, t));
        assert!((deriv - rhs).abs() < 1e-6);
        assert!(matches!(mixed_news_mechanism(1.0, 0.5, 0.0, 3.0, 3.0, -0.5), Err(Error::PreconditionFailed(_))));
    }
}
