//! Direct mechanisms and exhaustive grid verification of incentive
//! compatibility and participation.
//!
//! A [`DirectMechanism`] is described by the uninformed buyer's access and
//! quality paths, an upgrade threshold `v₀` (reports `v ≥ v₀` receive full
//! access at full quality for the rest of the horizon, lower reports stay on
//! the uninformed path), the uninformed buyer's total price `p_U` and the
//! extra payment `Δ_{v,t}` owed by a buyer who reports `v` at time `t`.

use crate::error::{Error, Result};
use crate::numerics::{integrate_split, linspace};
use crate::par::Exec;
use crate::primitives::{ModelParams, ValueDistribution};
use crate::trial_solver::TrialMechanism;
use serde::{Deserialize, Serialize};

/// Right-continuous piecewise-constant function on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    /// `0 = b₀ < b₁ < … < b_n = T`.
    breaks: Vec<f64>,
    /// Value on `[b_i, b_{i+1})`.
    values: Vec<f64>,
    /// `∫_0^{b_i}`.
    cum: Vec<f64>,
}

impl StepFunction {
    /// Build from breakpoints (starting at 0, strictly increasing) and one value per segment.
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 || values.len() + 1 != breaks.len() {
            return Err(Error::InvalidParams("step function needs n+1 breakpoints for n values".into()));
        }
        if breaks[0] != 0.0 || breaks.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("step function breakpoints must start at 0 and increase".into()));
        }
        let mut cum = vec![0.0; breaks.len()];
        for i in 0..values.len() {
            cum[i + 1] = cum[i] + values[i] * (breaks[i + 1] - breaks[i]);
        }
        Ok(Self { breaks, values, cum })
    }

    /// Constant function on `[0, T]`.
    pub fn constant(horizon: f64, value: f64) -> Self {
        Self::new(vec![0.0, horizon], vec![value]).expect("valid constant step function")
    }

    /// `1` on `[0, t₀)`, `0` on `[t₀, T]`.
    pub fn bang_bang(horizon: f64, t0: f64) -> Self {
        if t0 <= 0.0 {
            Self::constant(horizon, 0.0)
        } else if t0 >= horizon {
            Self::constant(horizon, 1.0)
        } else {
            Self::new(vec![0.0, t0, horizon], vec![1.0, 0.0]).expect("valid bang-bang step function")
        }
    }

    /// Build from segment lengths and values, dropping empty segments.
    pub fn from_segments(segments: &[(f64, f64)]) -> Result<Self> {
        let mut breaks = vec![0.0];
        let mut values = vec![];
        for &(len, val) in segments {
            if len > 0.0 {
                breaks.push(breaks.last().unwrap() + len);
                values.push(val);
            }
        }
        Self::new(breaks, values)
    }

    /// Right end of the domain.
    pub fn horizon(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    /// All breakpoints including 0 and `T`.
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Segment values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Interior breakpoints.
    pub fn interior_breaks(&self) -> &[f64] {
        &self.breaks[1..self.breaks.len() - 1]
    }

    fn segment(&self, t: f64) -> usize {
        let i = self.breaks.partition_point(|&b| b <= t);
        i.saturating_sub(1).min(self.values.len() - 1)
    }

    /// Value at `t` (right-continuous, last value at `T`).
    pub fn value_at(&self, t: f64) -> f64 {
        self.values[self.segment(t)]
    }

    /// `∫_0^t`.
    pub fn cumulative(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon());
        let i = self.segment(t);
        self.cum[i] + self.values[i] * (t - self.breaks[i])
    }

    /// `∫_a^b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.cumulative(b) - self.cumulative(a)
    }

    /// Smallest `t` with `∫_0^t ≥ target`, or `None` if the total is smaller.
    /// The function must be nonnegative.
    pub fn inverse_cumulative(&self, target: f64) -> Option<f64> {
        if target <= 0.0 {
            return Some(0.0);
        }
        if target > *self.cum.last().unwrap() {
            return None;
        }
        let i = self.cum.partition_point(|&c| c < target).clamp(1, self.cum.len() - 1) - 1;
        // cum[i] < target ≤ cum[i+1], so values[i] > 0.
        Some((self.breaks[i] + (target - self.cum[i]) / self.values[i]).min(self.breaks[i + 1]))
    }

    /// Pointwise product on the merged partition.
    pub fn product(&self, other: &StepFunction) -> StepFunction {
        let mut b: Vec<f64> = self.breaks.iter().chain(other.breaks.iter()).copied().collect();
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.dedup();
        let vals = b.windows(2).map(|w| self.value_at(w[0]) * other.value_at(w[0])).collect();
        StepFunction::new(b, vals).expect("merged partition is valid")
    }
}

/// Rule for the extra payment `Δ_{v,t}` owed after reporting `v` at `t`.
///
/// The envelope rule charges reports `v ≥ v₀` the value of the extra
/// quality-weighted access at the threshold type:
/// `Δ = λ·v₀·((T − t) − Q_U(t))`, where `Q_U(t) = ∫_t^T I_U q_U`. `scale` and
/// `top_bump` perturb it for robustness tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaRule {
    /// Multiplier on the envelope payment (1 for the optimal mechanism).
    pub scale: f64,
    /// Additional lump sum charged to reports `v ≥ from`.
    pub top_bump: Option<TopBump>,
}

/// Extra charge on high reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopBump {
    /// Lowest report that pays the bump.
    pub from: f64,
    /// Size of the bump.
    pub amount: f64,
}

impl Default for DeltaRule {
    fn default() -> Self {
        Self { scale: 1.0, top_bump: None }
    }
}

/// Full direct-mechanism representation used by checkers, simulators and oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectMechanism {
    /// Arrival rate.
    pub lambda: f64,
    /// Horizon `T`.
    pub horizon: f64,
    /// Uninformed access path `I_U`.
    pub access: StepFunction,
    /// Uninformed quality path `q_U`.
    pub quality: StepFunction,
    /// Quality-weighted access `I_U·q_U`.
    flow: StepFunction,
    /// Upgrade threshold `v₀`.
    pub v0: f64,
    /// Total price paid by a buyer who never reports, `p_U(T)`.
    pub price_uninformed: f64,
    /// Payment rule for reports.
    pub delta: DeltaRule,
}

impl DirectMechanism {
    /// Mechanism from an uninformed path and an upgrade threshold.
    pub fn from_path(params: &ModelParams, access: StepFunction, quality: StepFunction, v0: f64, price_uninformed: f64) -> Result<Self> {
        let tt = params.horizon;
        if (access.horizon() - tt).abs() > 1e-12 || (quality.horizon() - tt).abs() > 1e-12 {
            return Err(Error::InvalidParams("paths must span [0, T]".into()));
        }
        if access.values().iter().chain(quality.values()).any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidParams("access and quality must lie in [0, 1]".into()));
        }
        let flow = access.product(&quality);
        Ok(Self { lambda: params.lambda, horizon: tt, access, quality, flow, v0, price_uninformed, delta: DeltaRule::default() })
    }

    /// Direct representation of a trial mechanism.
    pub fn from_trial(trial: &TrialMechanism, params: &ModelParams) -> Self {
        let access = StepFunction::bang_bang(params.horizon, trial.t0);
        let quality = StepFunction::constant(params.horizon, 1.0);
        Self::from_path(params, access, quality, trial.v0, trial.p0).expect("trial paths are valid")
    }

    /// Replace the payment rule.
    pub fn with_delta(mut self, delta: DeltaRule) -> Self {
        self.delta = delta;
        self
    }

    /// Quality-weighted access path `I_U q_U`.
    pub fn flow(&self) -> &StepFunction {
        &self.flow
    }

    /// Cumulative learning exposure `X(t) = ∫_0^t I_U`.
    pub fn exposure(&self, t: f64) -> f64 {
        self.access.cumulative(t)
    }

    /// Remaining access `I(U,t) = ∫_t^T I_U`.
    pub fn remaining_access(&self, t: f64) -> f64 {
        self.access.integral(t, self.horizon)
    }

    /// Remaining quality-weighted access `Q_U(t) = ∫_t^T I_U q_U`.
    pub fn remaining_flow(&self, t: f64) -> f64 {
        self.flow.integral(t, self.horizon)
    }

    /// Extra quality-weighted access bought by upgrading at `t`: `(T − t) − Q_U(t)`.
    pub fn upgrade_gain(&self, t: f64) -> f64 {
        ((self.horizon - t) - self.remaining_flow(t)).max(0.0)
    }

    /// Quality-weighted remaining allocation `I(v,t)` after reporting `v` at `t`.
    pub fn allocation(&self, v: f64, t: f64) -> f64 {
        if v >= self.v0 {
            self.horizon - t
        } else {
            self.remaining_flow(t)
        }
    }

    /// Extra payment `Δ_{v,t}`.
    pub fn delta_at(&self, v: f64, t: f64) -> f64 {
        if v < self.v0 {
            return 0.0;
        }
        let mut d = self.delta.scale * self.lambda * self.v0 * self.upgrade_gain(t);
        if let Some(b) = self.delta.top_bump {
            if v >= b.from {
                d += b.amount;
            }
        }
        d
    }

    /// `E_v[Δ_{v,t}]` under `dist`.
    pub fn expected_delta(&self, dist: &ValueDistribution, t: f64) -> f64 {
        let mut d = self.delta.scale * self.lambda * self.v0 * self.upgrade_gain(t) * dist.tail_mass(self.v0);
        if let Some(b) = self.delta.top_bump {
            d += b.amount * dist.tail_mass(b.from.max(self.v0));
        }
        d
    }

    /// Expected report surplus `R(t) = E_v[u(v,t) − λ v Q_U(t)]`.
    pub fn expected_report_surplus(&self, dist: &ValueDistribution, t: f64) -> f64 {
        self.lambda * self.upgrade_gain(t) * dist.tail_mean(self.v0) - self.expected_delta(dist, t)
    }

    /// Posterior belief in a good match after no arrival by `t`.
    pub fn posterior_no_news(&self, mu0: f64, t: f64) -> f64 {
        posterior_after_exposure(mu0, self.lambda * self.exposure(t))
    }

    /// Density of the first arrival under a good match, `λ I_U(t) e^{−λX(t)}`.
    pub fn arrival_density(&self, t: f64) -> f64 {
        self.lambda * self.access.value_at(t) * (-self.lambda * self.exposure(t)).exp()
    }

    /// Continuation value of a truthful uninformed buyer at `t` (belief `μ_t`),
    /// gross of `p_U`.
    pub fn uninformed_value(&self, dist: &ValueDistribution, mu0: f64, t: f64) -> f64 {
        let l = self.lambda;
        let x_t = self.exposure(t);
        let tail = integrate_split(
            |s| l * self.access.value_at(s) * (-l * (self.exposure(s) - x_t)).exp() * self.expected_report_surplus(dist, s),
            t,
            self.horizon,
            self.flow.interior_breaks(),
            1e-14,
        );
        self.posterior_no_news(mu0, t) * (l * dist.mean() * self.remaining_flow(t) + tail)
    }

    /// Analytic seller payoffs `(π_L, π_H)` under truthful play.
    pub fn seller_payoffs(&self, dist: &ValueDistribution) -> (f64, f64) {
        let extra = integrate_split(
            |s| self.arrival_density(s) * self.expected_delta(dist, s),
            0.0,
            self.horizon,
            self.flow.interior_breaks(),
            1e-14,
        );
        (self.price_uninformed, self.price_uninformed + extra)
    }

    /// Ex-ante buyer surplus `V(0) − p_U`.
    pub fn buyer_surplus(&self, dist: &ValueDistribution, mu0: f64) -> f64 {
        self.uninformed_value(dist, mu0, 0.0) - self.price_uninformed
    }
}

/// `μ₀e^{−z}/(μ₀e^{−z} + 1 − μ₀)` for cumulative intensity `z = λX(t)`.
pub fn posterior_after_exposure(mu0: f64, z: f64) -> f64 {
    let a = mu0 * (-z).exp();
    a / (a + 1.0 - mu0)
}

/// Interim utility `u(v,t) = λ v I(v,t) − Δ_{v,t}`.
pub fn interim_utility(mech: &DirectMechanism, v: f64, t: f64) -> f64 {
    mech.lambda * v * mech.allocation(v, t) - mech.delta_at(v, t)
}

/// Posterior belief after no arrival by `t` under `mech`.
pub fn posterior_no_news(mech: &DirectMechanism, mu0: f64, t: f64) -> f64 {
    mech.posterior_no_news(mu0, t)
}

/// Grid sizes for [`check_ic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcGrid {
    /// Value grid size.
    pub values: usize,
    /// Report-time grid size.
    pub times: usize,
    /// Deviation-time grid size for joint deviations.
    pub deviation_times: usize,
}

impl Default for IcGrid {
    fn default() -> Self {
        Self { values: 64, times: 64, deviation_times: 16 }
    }
}

/// Worst cell of one constraint family. `magnitude` is the largest gain from
/// deviating (negative values are slack).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Deviation gain at the worst cell.
    pub magnitude: f64,
    /// True value at the worst cell.
    pub v: Option<f64>,
    /// True report time at the worst cell.
    pub t: Option<f64>,
    /// Deviating report.
    pub v_dev: Option<f64>,
    /// Deviating report time.
    pub t_dev: Option<f64>,
}

impl Violation {
    fn none() -> Self {
        Self { magnitude: f64::NEG_INFINITY, v: None, t: None, v_dev: None, t_dev: None }
    }

    fn at(magnitude: f64, v: Option<f64>, t: Option<f64>, v_dev: Option<f64>, t_dev: Option<f64>) -> Self {
        Self { magnitude, v, t, v_dev, t_dev }
    }

    fn max(self, other: Self) -> Self {
        if other.magnitude > self.magnitude {
            other
        } else {
            self
        }
    }
}

/// Result of [`check_ic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcReport {
    /// Silent misreport: `λ v Q_U(t) − u(v,t)`.
    pub ic_u: Violation,
    /// Value misreport at the same time.
    pub ic_v: Violation,
    /// Informed buyer delaying to `t′ > t` and reporting `v′`.
    pub joint: Violation,
    /// Uninformed buyer claiming a reward: `μ_t λ E[v] I(v′,t) − Δ_{v′,t} − V(t)`.
    pub uninformed_upgrade: Violation,
    /// Negative part of the ex-ante participation residual.
    pub ir0: Violation,
    /// Participation residual `V(0) − p_U` (0 when binding).
    pub ir0_residual: f64,
    /// Seller truth-telling (uninformed payments pool, so always slack).
    pub ic_s: Violation,
    /// Posterior after the last access instant.
    pub posterior_at_horizon: f64,
    /// Sufficient condition `μ_T ≤ v₀` for the uninformed-upgrade constraint after access ends.
    pub posterior_bound_holds: bool,
    /// Absolute tolerance `10⁻⁸·λT`.
    pub tolerance: f64,
    /// All families within tolerance.
    pub pass: bool,
}

/// Relative tolerance of the IC checker (multiplied by `λT`).
pub const IC_TOL: f64 = 1e-8;

fn value_grid(mech: &DirectMechanism, dist: &ValueDistribution, n: usize) -> Vec<f64> {
    let mut g = linspace(dist.lo(), dist.hi(), n.max(3));
    if mech.v0 >= dist.lo() && mech.v0 <= dist.hi() {
        g.push(mech.v0);
    }
    if let Some(b) = mech.delta.top_bump {
        if b.from >= dist.lo() && b.from <= dist.hi() {
            g.push(b.from);
        }
    }
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g.dedup();
    g
}

fn time_grid(mech: &DirectMechanism, n: usize) -> Vec<f64> {
    let mut g = linspace(0.0, mech.horizon, n.max(3));
    g.extend_from_slice(mech.access.interior_breaks());
    g.extend_from_slice(mech.quality.interior_breaks());
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g.dedup();
    g
}

/// Exhaustive grid check of IC-U, IC-V, joint delayed deviations, the
/// uninformed upgrade, IR-0 and IC-S.
pub fn check_ic(mech: &DirectMechanism, dist: &ValueDistribution, params: &ModelParams, grid: IcGrid) -> Result<IcReport> {
    check_ic_with(mech, dist, params, grid, Exec::default())
}

/// [`check_ic`] with an explicit execution policy.
pub fn check_ic_with(mech: &DirectMechanism, dist: &ValueDistribution, params: &ModelParams, grid: IcGrid, exec: Exec) -> Result<IcReport> {
    if grid.values < 3 || grid.times < 3 || grid.deviation_times < 3 {
        return Err(Error::InvalidParams("IC grids need at least 3 points each".into()));
    }
    let mu0 = params.mu0;
    let l = mech.lambda;
    let vs = value_grid(mech, dist, grid.values);
    let ts = time_grid(mech, grid.times);
    let tds = time_grid(mech, grid.deviation_times);

    // Best payoff from reporting some v′ at time s, for every true v.
    let best_report = |v: f64, s: f64| -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        for &vp in &vs {
            let g = l * v * mech.allocation(vp, s) - mech.delta_at(vp, s);
            if g > best.0 {
                best = (g, vp);
            }
        }
        best
    };

    let per_v = exec.map_slice(&vs, |&v| {
        let mut ic_u = Violation::none();
        let mut ic_v = Violation::none();
        let mut joint = Violation::none();
        for &t in &ts {
            let u = interim_utility(mech, v, t);
            let silent = l * v * mech.remaining_flow(t);
            ic_u = ic_u.max(Violation::at(silent - u, Some(v), Some(t), None, None));
            let (b, vp) = best_report(v, t);
            ic_v = ic_v.max(Violation::at(b - u, Some(v), Some(t), Some(vp), Some(t)));
            for &td in tds.iter().filter(|&&td| td > t) {
                let wait = l * v * (mech.remaining_flow(t) - mech.remaining_flow(td));
                let (b, vp) = best_report(v, td);
                joint = joint.max(Violation::at(wait + b - u, Some(v), Some(t), Some(vp), Some(td)));
            }
        }
        (ic_u, ic_v, joint)
    });
    let (mut ic_u, mut ic_v, mut joint) = (Violation::none(), Violation::none(), Violation::none());
    for (a, b, c) in per_v {
        ic_u = ic_u.max(a);
        ic_v = ic_v.max(b);
        joint = joint.max(c);
    }

    let mean = dist.mean();
    let upgrades = exec.map_slice(&ts, |&t| {
        let value = mech.uninformed_value(dist, mu0, t);
        let mu_t = mech.posterior_no_news(mu0, t);
        let mut w = Violation::none();
        for &vp in &vs {
            let gain = mu_t * l * mean * mech.allocation(vp, t) - mech.delta_at(vp, t) - value;
            w = w.max(Violation::at(gain, None, Some(t), Some(vp), Some(t)));
        }
        w
    });
    let uninformed_upgrade = upgrades.into_iter().fold(Violation::none(), Violation::max);

    let ir0_residual = mech.buyer_surplus(dist, mu0);
    let ir0 = Violation::at(-ir0_residual, None, Some(0.0), None, None);
    let ic_s = Violation::at(0.0, None, None, None, None);
    let posterior_at_horizon = mech.posterior_no_news(mu0, mech.horizon);
    let tolerance = IC_TOL * params.lambda * params.horizon;
    let pass = [ic_u, ic_v, joint, uninformed_upgrade, ir0, ic_s].iter().all(|x| x.magnitude <= tolerance);
    Ok(IcReport {
        ic_u,
        ic_v,
        joint,
        uninformed_upgrade,
        ir0,
        ir0_residual,
        ic_s,
        posterior_at_horizon,
        posterior_bound_holds: posterior_at_horizon <= mech.v0,
        tolerance,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trial_solver::solve_trial;

    fn base() -> (ModelParams, ValueDistribution) {
        (ModelParams::new(1.0, 5.0, 0.5).unwrap(), ValueDistribution::uniform(0.9, 1.1).unwrap())
    }

    #[test]
    fn step_function_integrals() {
        let s = StepFunction::new(vec![0.0, 1.0, 3.0], vec![1.0, 0.5]).unwrap();
        assert_eq!(s.cumulative(2.0), 1.5);
        assert_eq!(s.integral(0.5, 3.0), 1.5);
        assert_eq!(s.inverse_cumulative(1.5), Some(2.0));
        assert_eq!(s.inverse_cumulative(2.5), None);
        assert_eq!(s.value_at(1.0), 0.5);
        assert_eq!(s.value_at(3.0), 0.5);
    }

    #[test]
    fn posterior_examples() {
        let (p, _) = base();
        let t = TrialMechanism::new(0.0, 5.0, 0.9, &p);
        let m = DirectMechanism::from_trial(&t, &p);
        assert_eq!(m.posterior_no_news(0.5, 0.0), 0.5);
        assert!((m.posterior_no_news(0.5, 2f64.ln()) - 1.0 / 3.0).abs() < 1e-12);
        let z = DirectMechanism::from_trial(&TrialMechanism::new(0.0, 0.0, 0.9, &p), &p);
        assert_eq!(z.posterior_no_news(0.5, 4.0), 0.5);
    }

    #[test]
    fn interim_utility_examples() {
        let (p, d) = base();
        let r = solve_trial(&p, &d, 0.0).unwrap();
        let m = DirectMechanism::from_trial(&r.mechanism, &p);
        let t0 = r.mechanism.t0;
        let t = 0.5 * t0;
        assert!((interim_utility(&m, r.mechanism.v0, t) - r.mechanism.v0 * m.remaining_flow(t)).abs() < 1e-12);
        let top = interim_utility(&m, 1.1, t);
        assert!((top - (1.1 * (5.0 - t) - 0.9 * (5.0 - t0))).abs() < 1e-12);
        assert!((m.delta_at(1.0, t) - r.mechanism.post_trial_price).abs() < 1e-12);
    }

    #[test]
    fn solved_trial_passes_and_binds_ir() {
        let (p, d) = base();
        let r = solve_trial(&p, &d, 0.0).unwrap();
        let m = DirectMechanism::from_trial(&r.mechanism, &p);
        let rep = check_ic(&m, &d, &p, IcGrid { values: 16, times: 16, deviation_times: 8 }).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.ir0_residual.abs() < 1e-9);
        let (pl, ph) = m.seller_payoffs(&d);
        assert!((pl - r.payoff_l).abs() < 1e-12 && (ph - r.payoff_h).abs() < 1e-9);
    }

    #[test]
    fn low_threshold_short_horizon_fails_upgrade() {
        let p = ModelParams::new(1.0, 0.5, 0.95).unwrap();
        let d = ValueDistribution::uniform(0.0, 2.0).unwrap();
        let t = TrialMechanism::new(0.0, 0.25, 0.3, &p);
        let m = DirectMechanism::from_trial(&t, &p);
        let rep = check_ic(&m, &d, &p, IcGrid { values: 16, times: 16, deviation_times: 8 }).unwrap();
        assert!(!rep.pass);
        assert!(rep.uninformed_upgrade.magnitude > rep.tolerance);
        assert!(!rep.posterior_bound_holds);
    }
}
