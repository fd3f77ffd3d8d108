//! General screening technologies: dynamic tiered pricing and the welfare
//! comparison between the free trial and freemium-premium pricing.
//!
//! A screening set `D` lists feasible (access, quality) pairs. The seller's
//! problem only depends on the image `D̃ = {(I, qI)}` (learning rate, flow
//! utility), and only the extreme points `D*` of its lower convex envelope are
//! used. The uninformed buyer's budget path visits `D*` in order of decreasing
//! access, optionally after a full-service prefix; the switch times are the
//! only unknowns.

use crate::error::{Error, Result};
use crate::mechanism::{DirectMechanism, StepFunction};
use crate::numerics::{bisect, exp_integral, lin_exp_integral, scan_golden_max};
use crate::par::Exec;
use crate::primitives::{ModelParams, ValueDistribution};
use crate::simulate::{simulate_game_with, Estimate, SimConfig};
use crate::trial_solver::{expected_virtual_surplus, free_trial, solve_v0, TrialMechanism};
use serde::{Deserialize, Serialize};

/// Feasible (access, quality) options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningSet {
    options: Vec<(f64, f64)>,
}

impl ScreeningSet {
    /// Validate and deduplicate: every option in `[0,1]²`, `(1,1)` present,
    /// and some option with `I = 0`.
    pub fn new(options: &[(f64, f64)]) -> Result<Self> {
        if options.iter().any(|&(i, q)| !(0.0..=1.0).contains(&i) || !(0.0..=1.0).contains(&q)) {
            return Err(Error::InvalidParams("screening options must lie in [0,1]²".into()));
        }
        if !options.contains(&(1.0, 1.0)) {
            return Err(Error::InvalidParams("screening set must contain (1,1)".into()));
        }
        if !options.iter().any(|&(i, _)| i == 0.0) {
            return Err(Error::InvalidParams("screening set must contain an option with no access".into()));
        }
        let mut o = options.to_vec();
        o.sort_by(|a, b| a.partial_cmp(b).unwrap());
        o.dedup();
        Ok(Self { options: o })
    }

    /// The trial technology `{(0,0), (1,1)}`.
    pub fn baseline() -> Self {
        Self { options: vec![(0.0, 0.0), (1.0, 1.0)] }
    }

    /// Trial technology plus a free, zero-quality tier `(1, 0)`.
    pub fn freemium() -> Self {
        Self { options: vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)] }
    }

    /// Options, sorted and deduplicated.
    pub fn options(&self) -> &[(f64, f64)] {
        &self.options
    }

    /// Quality of an option producing image point `(i, u)`.
    fn quality_for(&self, i: f64, u: f64) -> f64 {
        if i > 0.0 {
            (u / i).clamp(0.0, 1.0)
        } else {
            self.options.iter().find(|o| o.0 == 0.0).map_or(0.0, |o| o.1)
        }
    }
}

/// Image `D̃ = {(I, qI)}`, sorted and deduplicated.
pub fn image_set(d: &ScreeningSet) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = d.options.iter().map(|&(i, q)| (i, q * i)).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Extreme points of the lower convex envelope, sorted by `I`; collinear
/// interior points are dropped.
pub fn lower_envelope_extremes(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Keep the lowest u for each I.
    pts.dedup_by(|later, earlier| later.0 == earlier.0);
    if pts.len() < 2 {
        return Err(Error::DegenerateSet(format!("need at least 2 distinct access levels, got {}", pts.len())));
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    Ok(hull)
}

/// Whether the intermediate option `(I₂, q₂)` lies on the envelope next to
/// `(I₁, q₁)`: `I₂(1 − q₂) > I₁(1 − q₁)`.
pub fn uses_intermediate(i1: f64, q1: f64, i2: f64, q2: f64) -> bool {
    i2 * (1.0 - q2) > i1 * (1.0 - q1)
}

/// Horizon condition `λT > ((2s + 1 − v̲)/(I̲ s))·(μ₀ − v̲)₊/((1 − μ₀)v̲)`,
/// `s = ∫_{μ₀}^{v̄}(v − μ₀) f(v) dv`.
pub fn horizon_condition(params: &ModelParams, dist: &ValueDistribution, i_min: f64) -> Result<bool> {
    let vlo = dist.lo();
    if vlo <= 0.0 {
        return Err(Error::UnsupportedSupport("horizon condition needs a positive lower support bound".into()));
    }
    let gap = (params.mu0 - vlo).max(0.0);
    if gap == 0.0 {
        return Ok(true);
    }
    let s = dist.tail_excess(params.mu0);
    if !(s > 0.0 && i_min > 0.0) {
        return Ok(false);
    }
    let rhs = (2.0 * s + 1.0 - vlo) / (i_min * s) * gap / ((1.0 - params.mu0) * vlo);
    Ok(params.lambda * params.horizon > rhs)
}

/// One budget-path segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSegment {
    /// Segment start.
    pub start: f64,
    /// Segment end.
    pub end: f64,
    /// Access `I`.
    pub access: f64,
    /// Quality `q`.
    pub quality: f64,
}

/// Dynamic tiered pricing mechanism with its payoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TieredMechanism {
    /// Uninformed buyer's path (nonempty segments, access nonincreasing).
    pub budget_path: Vec<BudgetSegment>,
    /// Switch times between consecutive planned tiers (including empty tiers).
    pub switch_times: Vec<f64>,
    /// Planned tiers `(I, u)` in visiting order.
    pub tiers: Vec<(f64, f64)>,
    /// Extreme points of the envelope.
    pub extremes: Vec<(f64, f64)>,
    /// Upgrade threshold.
    pub v0: f64,
    /// Ex-ante price.
    pub p0: f64,
    /// Low-type payoff.
    pub pi_l: f64,
    /// High-type payoff.
    pub pi_h: f64,
    /// Weight used.
    pub wl: f64,
    /// Expected virtual surplus above `v₀`.
    pub pi0: f64,
    /// Reduced objective `K·Q(T) + G`.
    pub objective: f64,
    /// Horizon condition for the incentive guarantee.
    pub horizon_condition_holds: bool,
    /// Warning when the guarantee is void.
    pub warning: Option<String>,
    lambda: f64,
    horizon: f64,
}

impl TieredMechanism {
    fn flow_between(&self, s: f64, t: f64) -> f64 {
        self.budget_path
            .iter()
            .map(|g| (g.end.min(t) - g.start.max(s)).max(0.0) * g.access * g.quality)
            .sum()
    }

    /// Upgrade price `v₀λ∫_s^t (1 − I_U q_U) dx` for a report at `s`, paid up to `t`.
    pub fn upgrade_price(&self, s: f64, t: f64) -> f64 {
        if t <= s {
            return 0.0;
        }
        self.v0 * self.lambda * ((t - s) - self.flow_between(s, t))
    }

    /// Access and quality step functions.
    pub fn paths(&self) -> (StepFunction, StepFunction) {
        let segs_i: Vec<(f64, f64)> = self.budget_path.iter().map(|g| (g.end - g.start, g.access)).collect();
        let segs_q: Vec<(f64, f64)> = self.budget_path.iter().map(|g| (g.end - g.start, g.quality)).collect();
        (
            StepFunction::from_segments(&segs_i).expect("budget path is a partition"),
            StepFunction::from_segments(&segs_q).expect("budget path is a partition"),
        )
    }

    /// Direct-mechanism representation for checkers and simulation.
    pub fn to_direct(&self, params: &ModelParams) -> Result<DirectMechanism> {
        let (a, q) = self.paths();
        DirectMechanism::from_path(params, a, q, self.v0, self.p0)
    }
}

/// Nonempty pieces `(start, length, I, u)` of a planned path.
fn pieces(tiers: &[(f64, f64)], switches: &[f64], horizon: f64) -> Vec<(f64, f64, f64, f64)> {
    let mut out = Vec::with_capacity(tiers.len());
    let mut a = 0.0;
    for (j, &(i, u)) in tiers.iter().enumerate() {
        let b = if j < switches.len() { switches[j].clamp(a, horizon) } else { horizon };
        if b > a {
            out.push((a, b - a, i, u));
        }
        a = b;
    }
    out
}

/// `(K·Q(T) + G, Q(T), G)` with `G = ∫(T − t − (Q(T) − Q(t)))λI e^{−λX}`.
fn evaluate(tiers: &[(f64, f64)], switches: &[f64], lambda: f64, horizon: f64, k: f64) -> (f64, f64, f64) {
    let ps = pieces(tiers, switches, horizon);
    let q_t: f64 = ps.iter().map(|p| p.1 * p.3).sum();
    let (mut x_a, mut q_a, mut g) = (0.0, 0.0, 0.0);
    for &(a, d, i, u) in &ps {
        if i > 0.0 {
            let h_a = horizon - a - (q_t - q_a);
            g += lambda * i * (-lambda * x_a).exp() * lin_exp_integral(h_a, -(1.0 - u), lambda * i, d);
        }
        x_a += i * d;
        q_a += u * d;
    }
    (k * q_t + g, q_t, g)
}

/// `∂J/∂s_j = A_I(s)(I_j − I_{j+1}) + ρ_Q(s)(u_j − u_{j+1})` with
/// `A_I(s) = λ∫_s^T(1 − u)e^{−λX}` and `ρ_Q(s) = K − 1 + e^{−λX(s)}`.
fn switch_gradient(tiers: &[(f64, f64)], switches: &[f64], j: usize, lambda: f64, horizon: f64, k: f64) -> f64 {
    let s = switches[j];
    let ps = pieces(tiers, switches, horizon);
    let mut x_a = 0.0;
    let mut x_s = None;
    let mut a_i = 0.0;
    for &(a, d, i, u) in &ps {
        if a >= s {
            x_s.get_or_insert(x_a);
            a_i += (1.0 - u) * (-lambda * x_a).exp() * exp_integral(lambda * i, d);
        }
        x_a += i * d;
    }
    let x_s = x_s.unwrap_or(x_a);
    let a_i = lambda * a_i;
    let rho = k - 1.0 + (-lambda * x_s).exp();
    let (i0, u0) = tiers[j];
    let (i1, u1) = tiers[j + 1];
    a_i * (i0 - i1) + rho * (u0 - u1)
}

const SCAN: usize = 24;
const TIME_TOL: f64 = 1e-8;
const NESTED_DEPTH: usize = 3;

/// Nested golden-section over switch times `s_j ≥ lo`, outer to inner.
fn nested(f: &dyn Fn(&[f64]) -> f64, prefix: &[f64], n: usize, lo: f64, horizon: f64) -> (f64, Vec<f64>) {
    if prefix.len() == n {
        return (f(prefix), prefix.to_vec());
    }
    let inner = |x: f64| {
        let mut p = prefix.to_vec();
        p.push(x);
        nested(f, &p, n, x, horizon)
    };
    let (x, _) = scan_golden_max(|x| inner(x).0, lo, horizon, SCAN, TIME_TOL);
    inner(x)
}

fn optimize_switches(tiers: &[(f64, f64)], lambda: f64, horizon: f64, k: f64) -> Vec<f64> {
    let n = tiers.len() - 1;
    if n == 0 {
        return vec![];
    }
    let f = |s: &[f64]| evaluate(tiers, s, lambda, horizon, k).0;
    let mut s = if n <= NESTED_DEPTH {
        nested(&f, &[], n, 0.0, horizon).1
    } else {
        // Gauss–Seidel coordinate ascent from the all-late plan.
        let mut s = vec![horizon; n];
        for _ in 0..50 {
            let before = s.clone();
            for j in 0..n {
                let lo = if j == 0 { 0.0 } else { s[j - 1] };
                let hi = if j + 1 < n { s[j + 1] } else { horizon };
                let (x, _) = scan_golden_max(
                    |x| {
                        let mut trial = s.clone();
                        trial[j] = x;
                        f(&trial)
                    },
                    lo,
                    hi,
                    SCAN,
                    TIME_TOL,
                );
                s[j] = x;
            }
            if s.iter().zip(&before).all(|(a, b)| (a - b).abs() < 1e-12) {
                break;
            }
        }
        s
    };
    // Polish each switch on its first-order condition.
    for _ in 0..50 {
        let before = s.clone();
        for j in 0..n {
            let lo = if j == 0 { 0.0 } else { s[j - 1] };
            let hi = if j + 1 < n { s[j + 1] } else { horizon };
            if hi <= lo {
                continue;
            }
            let grad = |x: f64| {
                let mut t = s.clone();
                t[j] = x;
                switch_gradient(tiers, &t, j, lambda, horizon, k)
            };
            let (g_lo, g_hi) = (grad(lo), grad(hi));
            let cand = if g_lo > 0.0 && g_hi < 0.0 {
                match bisect(grad, lo, hi, 1e-12) {
                    Ok(x) => x,
                    Err(_) => continue,
                }
            } else if g_lo >= 0.0 && g_hi >= 0.0 {
                hi
            } else if g_lo <= 0.0 && g_hi <= 0.0 {
                lo
            } else {
                continue;
            };
            let mut t = s.clone();
            t[j] = cand;
            if f(&t) >= f(&s) - 1e-15 {
                s = t;
            }
        }
        if s.iter().zip(&before).all(|(a, b)| (a - b).abs() < 1e-13) {
            break;
        }
    }
    s
}

/// Planned tiers: full service, then envelope vertices with positive access
/// in decreasing access order, then no access.
fn plan_tiers(extremes: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut tiers = vec![(1.0, 1.0)];
    for &p in extremes.iter().rev() {
        if p.0 > 0.0 && p != (1.0, 1.0) {
            tiers.push(p);
        }
    }
    tiers.push((0.0, 0.0));
    tiers
}

/// Optimal dynamic tiered pricing for weight `w_L` and screening set `D`.
pub fn solve_tiered(params: &ModelParams, dist: &ValueDistribution, wl: f64, d: &ScreeningSet) -> Result<TieredMechanism> {
    params.validate()?;
    let (l, tt, mu0) = (params.lambda, params.horizon, params.mu0);
    let extremes = lower_envelope_extremes(&image_set(d))?;
    let v0 = solve_v0(dist, mu0, wl)?;
    let pi0 = expected_virtual_surplus(dist, mu0, wl, v0);
    if !(pi0 > 0.0) {
        return Err(Error::InvalidParams(format!("virtual surplus must be positive, got {pi0}")));
    }
    let k = mu0 * (1.0 + wl).max(0.0) * dist.mean() / pi0;
    let tiers = plan_tiers(&extremes);
    let switches = optimize_switches(&tiers, l, tt, k);
    let (objective, q_t, g) = evaluate(&tiers, &switches, l, tt, k);

    let p0 = if wl > -1.0 { mu0 * l * (dist.mean() * q_t + dist.tail_excess(v0) * g) } else { 0.0 };
    let pi_h = p0 + l * v0 * dist.tail_mass(v0) * g;
    let budget_path = pieces(&tiers, &switches, tt)
        .into_iter()
        .map(|(a, len, i, u)| BudgetSegment { start: a, end: a + len, access: i, quality: if (i, u) == (1.0, 1.0) { 1.0 } else { d.quality_for(i, u) } })
        .collect();
    let i_min = extremes.iter().filter(|p| p.0 > 0.0).map(|p| p.0).fold(f64::INFINITY, f64::min);
    let holds = horizon_condition(params, dist, i_min)?;
    Ok(TieredMechanism {
        budget_path,
        switch_times: switches,
        tiers,
        extremes,
        v0,
        p0,
        pi_l: p0,
        pi_h,
        wl,
        pi0,
        objective,
        horizon_condition_holds: holds,
        warning: (!holds).then(|| "horizon condition fails: incentive compatibility is not guaranteed".to_string()),
        lambda: l,
        horizon: tt,
    })
}

/// Largest improvement of the reduced objective from moving any single switch
/// time by `±step` (within its ordering bounds).
pub fn perturbation_gain(m: &TieredMechanism, params: &ModelParams, dist: &ValueDistribution, step: f64) -> f64 {
    let (l, tt) = (params.lambda, params.horizon);
    let k = params.mu0 * (1.0 + m.wl).max(0.0) * dist.mean() / m.pi0;
    let base = evaluate(&m.tiers, &m.switch_times, l, tt, k).0;
    let n = m.switch_times.len();
    let mut worst = f64::NEG_INFINITY;
    for j in 0..n {
        let lo = if j == 0 { 0.0 } else { m.switch_times[j - 1] };
        let hi = if j + 1 < n { m.switch_times[j + 1] } else { tt };
        for dir in [-1.0, 1.0] {
            let mut s = m.switch_times.clone();
            s[j] = (s[j] + dir * step).clamp(lo, hi);
            worst = worst.max(evaluate(&m.tiers, &s, l, tt, k).0 - base);
        }
    }
    worst
}

/// Reduced objective of an arbitrary planned path (for certification tests).
pub fn reduced_objective(m: &TieredMechanism, params: &ModelParams, dist: &ValueDistribution, switches: &[f64]) -> f64 {
    let k = params.mu0 * (1.0 + m.wl).max(0.0) * dist.mean() / m.pi0;
    evaluate(&m.tiers, switches, params.lambda, params.horizon, k).0
}

/// One row of the welfare comparison (fractions of `λμ₀T`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareRow {
    /// Prior.
    pub mu0: f64,
    /// Free-trial welfare fraction.
    pub free_trial_frac: f64,
    /// Freemium welfare fraction.
    pub freemium_frac: f64,
}

/// Closed-form welfare of the free trial and of freemium pricing for each prior.
pub fn welfare_compare(params: &ModelParams, dist: &ValueDistribution, mu0_grid: &[f64]) -> Result<Vec<WelfareRow>> {
    welfare_compare_with(params, dist, mu0_grid, Exec::default())
}

/// [`welfare_compare`] with an explicit execution policy.
pub fn welfare_compare_with(params: &ModelParams, dist: &ValueDistribution, mu0_grid: &[f64], exec: Exec) -> Result<Vec<WelfareRow>> {
    let rows = exec.map_slice(mu0_grid, |&mu0| {
        let p = ModelParams::new(params.lambda, params.horizon, mu0)?;
        let (l, tt) = (p.lambda, p.horizon);
        let ft = free_trial(&p, dist)?;
        let w_ft = mu0 * l * (ft.t_m * dist.mean() + (-(-l * ft.t_m).exp_m1()) * (tt - ft.t_m) * dist.tail_mean(ft.v_m));
        let v0 = solve_v0(dist, mu0, -1.0)?;
        // ∫_0^T (T − t)λe^{−λt} dt
        let wait = tt - exp_integral(l, tt);
        let w_fm = mu0 * l * dist.tail_mean(v0) * wait;
        let norm = l * mu0 * tt;
        Ok(WelfareRow { mu0, free_trial_frac: w_ft / norm, freemium_frac: w_fm / norm })
    });
    rows.into_iter().collect()
}

/// Free-trial and freemium direct mechanisms at prior `mu0` (weight `−1`, free entry).
pub fn welfare_mechanisms(params: &ModelParams, dist: &ValueDistribution) -> Result<(DirectMechanism, DirectMechanism)> {
    let ft = free_trial(params, dist)?;
    let trial = DirectMechanism::from_trial(&TrialMechanism::new(0.0, ft.t_m, ft.v_m, params), params);
    let v0 = solve_v0(dist, params.mu0, -1.0)?;
    let tt = params.horizon;
    let freemium = DirectMechanism::from_path(params, StepFunction::constant(tt, 1.0), StepFunction::constant(tt, 0.0), v0, 0.0)?;
    Ok((trial, freemium))
}

/// Monte Carlo welfare fractions `(free trial, freemium)` under truthful play.
pub fn welfare_monte_carlo(params: &ModelParams, dist: &ValueDistribution, paths: u64, seed: u64, exec: Exec) -> Result<(Estimate, Estimate)> {
    let (trial, freemium) = welfare_mechanisms(params, dist)?;
    let norm = params.lambda * params.mu0 * params.horizon;
    let cfg = SimConfig::truthful(paths, seed);
    let scale = |e: Estimate| Estimate { mean: e.mean / norm, se: e.se / norm, n: e.n };
    let a = simulate_game_with(&trial, params, dist, &cfg, exec)?;
    let b = simulate_game_with(&freemium, params, dist, &cfg, exec)?;
    Ok((scale(a.surplus), scale(b.surplus)))
}
