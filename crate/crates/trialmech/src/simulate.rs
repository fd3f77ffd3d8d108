//! Monte Carlo simulation of the selling game under a [`DirectMechanism`].
//!
//! Each path draws the match quality, the value, and the buyer's reward
//! arrivals (an inhomogeneous Poisson process with rate `λ·I(t)`), executes a
//! buyer strategy, and records the seller's revenue, the buyer's payoff and the
//! realized surplus. Every path owns a ChaCha stream keyed by the path index,
//! and the reduction runs in fixed chunk order, so results are bit-identical
//! across thread counts and execution policies.

use crate::error::{Error, Result};
use crate::mechanism::{DirectMechanism, StepFunction};
use crate::par::Exec;
use crate::primitives::{ModelParams, ValueDistribution};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Map from true value to reported value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueMap {
    /// `v′ = k·v`.
    Scale(f64),
    /// `v′ = v + c`.
    Shift(f64),
    /// `v′ = c`.
    Constant(f64),
}

impl ValueMap {
    /// Apply the map.
    pub fn apply(self, v: f64) -> f64 {
        match self {
            ValueMap::Scale(k) => k * v,
            ValueMap::Shift(c) => v + c,
            ValueMap::Constant(c) => c,
        }
    }
}

/// Buyer behaviour in the game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuyerStrategy {
    /// Report the true value at the first arrival.
    Truthful,
    /// Never report.
    SilentForever,
    /// Report the true value `offset` after the first arrival (if before `T`).
    DelayedReport {
        /// Delay after the first arrival.
        offset: f64,
    },
    /// Report a transformed value at the first arrival.
    MisreportValue {
        /// Reported value as a function of the true value.
        map: ValueMap,
    },
    /// Without news by `t`, claim value `report` (default `v₀`) at `t`;
    /// with earlier news, report truthfully.
    UninformedUpgradeAt {
        /// Claim time.
        t: f64,
        /// Claimed value; `None` means the threshold `v₀`.
        report: Option<f64>,
    },
}

impl BuyerStrategy {
    /// Short description for tables.
    pub fn label(&self) -> String {
        match self {
            BuyerStrategy::Truthful => "truthful".into(),
            BuyerStrategy::SilentForever => "silent_forever".into(),
            BuyerStrategy::DelayedReport { offset } => format!("delayed_report({offset})"),
            BuyerStrategy::MisreportValue { map } => match map {
                ValueMap::Scale(k) => format!("misreport_value(scale {k})"),
                ValueMap::Shift(c) => format!("misreport_value(shift {c})"),
                ValueMap::Constant(c) => format!("misreport_value(constant {c})"),
            },
            BuyerStrategy::UninformedUpgradeAt { t, report } => match report {
                Some(r) => format!("uninformed_upgrade_at({t}, report {r})"),
                None => format!("uninformed_upgrade_at({t})"),
            },
        }
    }
}

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Number of paths (≥ 1).
    pub paths: u64,
    /// Master seed.
    pub seed: u64,
    /// Buyer strategy.
    pub strategy: BuyerStrategy,
    /// Pair path `2k+1` with the mirrored uniforms of path `2k`.
    pub antithetic: bool,
}

impl SimConfig {
    /// Truthful play without antithetic pairing.
    pub fn truthful(paths: u64, seed: u64) -> Self {
        Self { paths, seed, strategy: BuyerStrategy::Truthful, antithetic: false }
    }
}

/// Sample mean with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Sample mean (NaN when no observations).
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
    /// Number of observations.
    pub n: u64,
}

impl Estimate {
    /// Whether `target` lies within `k` standard errors (exact match when `se = 0`).
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se + 1e-12 * target.abs().max(1.0)
    }
}

/// Running mean and sum of squared deviations (Welford, with Chan's merge).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(mut self, x: f64) -> Self {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        self
    }

    fn merge(self, o: Self) -> Self {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let w = o.n as f64 / n as f64;
        Self { n, mean: self.mean + d * w, m2: self.m2 + o.m2 + d * d * self.n as f64 * w }
    }

    fn estimate(self) -> Estimate {
        if self.n == 0 {
            return Estimate { mean: f64::NAN, se: f64::NAN, n: 0 };
        }
        let n = self.n as f64;
        let var = if self.n > 1 { self.m2.max(0.0) / (n - 1.0) } else { 0.0 };
        Estimate { mean: self.mean, se: (var / n).sqrt(), n: self.n }
    }
}

/// Aggregate simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// Paths simulated.
    pub paths: u64,
    /// Seed used.
    pub seed: u64,
    /// Strategy simulated.
    pub strategy: BuyerStrategy,
    /// Seller revenue conditional on a good match.
    pub revenue_h: Estimate,
    /// Seller revenue conditional on a bad match.
    pub revenue_l: Estimate,
    /// Buyer payoff (rewards minus payments), unconditional.
    pub buyer_payoff: Estimate,
    /// Realized surplus (sum of rewards), unconditional.
    pub surplus: Estimate,
    /// Share of paths with a good match.
    pub share_h: f64,
}

/// Per-path record for debugging traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    /// Good match.
    pub good: bool,
    /// Drawn value.
    pub v: f64,
    /// First arrival (∞ if none by `T`).
    pub tau: f64,
    /// Total paid to the seller.
    pub revenue: f64,
    /// Rewards minus payments.
    pub buyer_payoff: f64,
    /// Sum of rewards.
    pub surplus: f64,
}

/// Uniform source with optional mirroring, plus the unused remainder of the
/// last unit-exponential clock (memorylessness lets it carry over when the
/// arrival rate changes, so equal-rate strategies see identical arrivals).
struct Draws {
    rng: ChaCha8Rng,
    mirror: bool,
    pending: Option<f64>,
}

impl Draws {
    fn new(seed: u64, stream: u64, mirror: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, mirror, pending: None }
    }

    /// Uniform on the open interval `(0, 1)`.
    fn uniform(&mut self) -> f64 {
        let u = ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        if self.mirror {
            1.0 - u
        } else {
            u
        }
    }

    /// Unit-exponential clock (the carried remainder if any).
    fn clock(&mut self) -> f64 {
        match self.pending.take() {
            Some(c) => c,
            None => -self.uniform().ln(),
        }
    }
}

/// First arrival of a Poisson process with rate `λ·I_U(t)` on `[0, T]`, by
/// inversion of the cumulative intensity; `∞` if there is none.
pub fn sample_arrival<R: RngCore>(access: &StepFunction, lambda: f64, rng: &mut R) -> f64 {
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    arrival_after(access, lambda, 0.0, -u.ln())
}

/// Arrival after `s` given a unit-exponential clock `e`.
fn arrival_after(access: &StepFunction, lambda: f64, s: f64, e: f64) -> f64 {
    if lambda <= 0.0 {
        return f64::INFINITY;
    }
    access.inverse_cumulative(access.cumulative(s) + e / lambda).unwrap_or(f64::INFINITY)
}

/// Rewards of a value-`v` buyer on the uninformed path over `(s, e]`.
fn pooled_rewards(mech: &DirectMechanism, v: f64, s: f64, e: f64, d: &mut Draws) -> f64 {
    let mut total = 0.0;
    if !(s < e) || mech.lambda <= 0.0 {
        return total;
    }
    let access = &mech.access;
    let end = access.cumulative(e);
    let mut pos = access.cumulative(s);
    loop {
        let target = pos + d.clock() / mech.lambda;
        if target > end {
            d.pending = Some((target - end) * mech.lambda);
            return total;
        }
        let t = access.inverse_cumulative(target).unwrap_or(e);
        total += v * mech.quality.value_at(t);
        pos = target;
    }
}

/// Rewards under full access at full quality over `(s, e]`.
fn full_rewards(lambda: f64, v: f64, s: f64, e: f64, d: &mut Draws) -> f64 {
    let mut total = 0.0;
    if !(s < e) || lambda <= 0.0 {
        return total;
    }
    let mut t = s;
    loop {
        let next = t + d.clock() / lambda;
        if next > e {
            d.pending = Some((next - e) * lambda);
            return total;
        }
        total += v;
        t = next;
    }
}

fn post_report_rewards(mech: &DirectMechanism, v: f64, report: f64, r: f64, d: &mut Draws) -> f64 {
    if report >= mech.v0 {
        full_rewards(mech.lambda, v, r, mech.horizon, d)
    } else {
        pooled_rewards(mech, v, r, mech.horizon, d)
    }
}

fn simulate_path(mech: &DirectMechanism, dist: &ValueDistribution, mu0: f64, strategy: &BuyerStrategy, mut d: Draws) -> PathOutcome {
    let tt = mech.horizon;
    let good = d.uniform() < mu0;
    let v = dist.quantile(d.uniform());
    let c0 = if good { d.clock() } else { f64::INFINITY };
    let tau = if good { arrival_after(&mech.access, mech.lambda, 0.0, c0) } else { f64::INFINITY };
    let tau = if tau <= tt { tau } else { f64::INFINITY };

    // (report time, reported value), or None for no report.
    let informed_report = |r: f64, report: f64| if r <= tt { Some((r, report)) } else { None };
    let (report, informed) = match *strategy {
        BuyerStrategy::Truthful => (informed_report(tau, v), true),
        BuyerStrategy::SilentForever => (None, true),
        BuyerStrategy::DelayedReport { offset } => (informed_report(tau + offset.max(0.0), v), true),
        BuyerStrategy::MisreportValue { map } => (informed_report(tau, map.apply(v)), true),
        BuyerStrategy::UninformedUpgradeAt { t, report } => {
            if tau <= t {
                (informed_report(tau, v), true)
            } else {
                (informed_report(t.max(0.0), report.unwrap_or(mech.v0)), false)
            }
        }
    };

    let mut rewards = 0.0;
    if good && informed && tau.is_finite() {
        rewards += v * mech.quality.value_at(tau);
        match report {
            Some((r, rv)) => {
                rewards += pooled_rewards(mech, v, tau, r, &mut d);
                rewards += post_report_rewards(mech, v, rv, r, &mut d);
            }
            None => rewards += pooled_rewards(mech, v, tau, tt, &mut d),
        }
    } else if good {
        // No news before the (uninformed) report time: arrivals after it follow
        // the post-report allocation.
        if let Some((r, rv)) = report {
            d.pending = Some((c0 - mech.lambda * mech.exposure(r)).max(0.0));
            rewards += post_report_rewards(mech, v, rv, r, &mut d);
        }
    }
    let revenue = mech.price_uninformed + report.map_or(0.0, |(r, rv)| mech.delta_at(rv, r));
    PathOutcome { good, v, tau, revenue, buyer_payoff: rewards - revenue, surplus: rewards }
}

fn path_draws(config: &SimConfig, i: u64) -> Draws {
    if config.antithetic {
        Draws::new(config.seed, i / 2, i % 2 == 1)
    } else {
        Draws::new(config.seed, i, false)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    rev_h: Moments,
    rev_l: Moments,
    buyer: Moments,
    surplus: Moments,
}

const CHUNK: usize = 4096;

/// Monte Carlo estimates of conditional revenues, buyer payoff and surplus.
pub fn simulate_game(mech: &DirectMechanism, params: &ModelParams, dist: &ValueDistribution, config: &SimConfig) -> Result<SimReport> {
    simulate_game_with(mech, params, dist, config, Exec::default())
}

/// [`simulate_game`] with an explicit execution policy.
pub fn simulate_game_with(mech: &DirectMechanism, params: &ModelParams, dist: &ValueDistribution, config: &SimConfig, exec: Exec) -> Result<SimReport> {
    if config.paths == 0 {
        return Err(Error::InvalidParams("paths must be at least 1".into()));
    }
    let mu0 = params.mu0;
    let acc = exec.fold_chunks(
        config.paths as usize,
        CHUNK,
        Acc::default(),
        |mut a, i| {
            let o = simulate_path(mech, dist, mu0, &config.strategy, path_draws(config, i as u64));
            if o.good {
                a.rev_h = a.rev_h.push(o.revenue);
            } else {
                a.rev_l = a.rev_l.push(o.revenue);
            }
            a.buyer = a.buyer.push(o.buyer_payoff);
            a.surplus = a.surplus.push(o.surplus);
            a
        },
        |a, b| Acc {
            rev_h: a.rev_h.merge(b.rev_h),
            rev_l: a.rev_l.merge(b.rev_l),
            buyer: a.buyer.merge(b.buyer),
            surplus: a.surplus.merge(b.surplus),
        },
    );
    Ok(SimReport {
        paths: config.paths,
        seed: config.seed,
        strategy: config.strategy,
        revenue_h: acc.rev_h.estimate(),
        revenue_l: acc.rev_l.estimate(),
        buyer_payoff: acc.buyer.estimate(),
        surplus: acc.surplus.estimate(),
        share_h: acc.rev_h.n as f64 / config.paths as f64,
    })
}

/// Per-path outcomes of the first `n` paths (for debugging traces).
pub fn simulate_trace(mech: &DirectMechanism, params: &ModelParams, dist: &ValueDistribution, config: &SimConfig, n: u64) -> Vec<PathOutcome> {
    (0..n.min(config.paths)).map(|i| simulate_path(mech, dist, params.mu0, &config.strategy, path_draws(config, i))).collect()
}

/// One row of a best-response table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    /// Strategy description.
    pub strategy: String,
    /// Mean buyer payoff under the strategy.
    pub payoff: Estimate,
    /// Mean gain over truthful play.
    pub gain: f64,
    /// `√(se_truthful² + se_deviation²)`.
    pub pooled_se: f64,
    /// Standard error of the paired per-path difference.
    pub paired_se: f64,
    /// `gain > 3·pooled_se`.
    pub profitable: bool,
}

/// Buyer payoffs of truthful play and each deviation on common random numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponseTable {
    /// Truthful payoff.
    pub truthful: Estimate,
    /// One row per deviation.
    pub rows: Vec<DeviationRow>,
    /// Largest `gain − 3·pooled_se` (≤ 0 when no deviation is detectably profitable).
    pub worst_excess: f64,
}

/// Compare truthful play with each deviation using common random numbers.
pub fn best_response_scan(
    mech: &DirectMechanism,
    params: &ModelParams,
    dist: &ValueDistribution,
    config: &SimConfig,
    deviations: &[BuyerStrategy],
) -> Result<BestResponseTable> {
    best_response_scan_with(mech, params, dist, config, deviations, Exec::default())
}

/// [`best_response_scan`] with an explicit execution policy.
pub fn best_response_scan_with(
    mech: &DirectMechanism,
    params: &ModelParams,
    dist: &ValueDistribution,
    config: &SimConfig,
    deviations: &[BuyerStrategy],
    exec: Exec,
) -> Result<BestResponseTable> {
    if config.paths == 0 {
        return Err(Error::InvalidParams("paths must be at least 1".into()));
    }
    let k = deviations.len();
    let mu0 = params.mu0;
    // Slot 0: truthful; slots 1..=k: deviations; slots k+1..=2k: differences.
    let init = vec![Moments::default(); 2 * k + 1];
    let acc = exec.fold_chunks(
        config.paths as usize,
        CHUNK,
        init,
        |mut a, i| {
            let base = simulate_path(mech, dist, mu0, &BuyerStrategy::Truthful, path_draws(config, i as u64)).buyer_payoff;
            a[0] = a[0].push(base);
            for (j, s) in deviations.iter().enumerate() {
                let x = simulate_path(mech, dist, mu0, s, path_draws(config, i as u64)).buyer_payoff;
                a[1 + j] = a[1 + j].push(x);
                a[1 + k + j] = a[1 + k + j].push(x - base);
            }
            a
        },
        |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
    );
    let truthful = acc[0].estimate();
    let rows: Vec<DeviationRow> = deviations
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let payoff = acc[1 + j].estimate();
            let diff = acc[1 + k + j].estimate();
            let pooled_se = (truthful.se.powi(2) + payoff.se.powi(2)).sqrt();
            DeviationRow { strategy: s.label(), payoff, gain: diff.mean, pooled_se, paired_se: diff.se, profitable: diff.mean > 3.0 * pooled_se }
        })
        .collect();
    let worst_excess = rows.iter().map(|r| r.gain - 3.0 * r.pooled_se).fold(f64::NEG_INFINITY, f64::max);
    Ok(BestResponseTable { truthful, rows, worst_excess })
}

/// The deviation families used by default: silence, delays, misreports and
/// uninformed upgrades at several times.
pub fn default_deviations(mech: &DirectMechanism) -> Vec<BuyerStrategy> {
    let tt = mech.horizon;
    let mut out = vec![
        BuyerStrategy::SilentForever,
        BuyerStrategy::DelayedReport { offset: 0.1 * tt },
        BuyerStrategy::DelayedReport { offset: 0.5 * tt },
        BuyerStrategy::MisreportValue { map: ValueMap::Scale(0.9) },
        BuyerStrategy::MisreportValue { map: ValueMap::Scale(1.1) },
        BuyerStrategy::MisreportValue { map: ValueMap::Constant(mech.v0) },
    ];
    // Last instant with positive access.
    let t_end = mech
        .access
        .breaks()
        .windows(2)
        .zip(mech.access.values())
        .filter(|(_, &a)| a > 0.0)
        .map(|(w, _)| w[1])
        .fold(0.0, f64::max);
    for t in [0.0, 0.5 * t_end, t_end, 0.5 * (t_end + tt)] {
        out.push(BuyerStrategy::UninformedUpgradeAt { t, report: None });
    }
    out
}
