//! Model primitives: the buyer's value distribution, weighted virtual values,
//! the monopoly price and the model's regularity and horizon conditions.

use crate::error::{Error, Result};
use crate::numerics::{bisect, ROOT_TOL};
use serde::{Deserialize, Serialize};

/// Number of grid points used by the regularity check.
pub const REGULARITY_GRID: usize = 1024;
/// Slack allowed in the regularity check.
pub const REGULARITY_TOL: f64 = 1e-10;
/// Allowed deviation of the mean from 1 for a normalized distribution.
pub const MEAN_TOL: f64 = 1e-8;

/// Family of a value law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Piecewise-linear CDF through `points = [[v, F(v)], …]`, with F = 0 at
    /// the first point and F = 1 at the last.
    Tabulated { points: Vec<[f64; 2]> },
}

/// Construction switches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistOptions {
    /// Rescale the support so that the mean becomes exactly 1.
    pub normalize: bool,
    /// Accept a mean different from 1 (used by extensions with other normalizations).
    pub allow_unnormalized: bool,
    /// Skip the regularity check.
    pub allow_irregular: bool,
}

/// Buyer value distribution `F` on `[v̲, v̄]` with a density that is positive
/// on the interior.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueDistribution {
    family: Family,
    lo: f64,
    hi: f64,
    scale: f64,
    /// Tabulated family: breakpoints and the constant density on each segment.
    knots: Vec<f64>,
    cdf_knots: Vec<f64>,
    dens: Vec<f64>,
}

impl ValueDistribution {
    /// Uniform law on `[lo, hi]`; the mean must already be 1.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Family::Uniform { lo, hi }, DistOptions::default())
    }

    /// Uniform on `[1−δ, 1+δ]`.
    pub fn uniform_around_one(delta: f64) -> Result<Self> {
        Self::uniform(1.0 - delta, 1.0 + delta)
    }

    /// General constructor with validation, optional normalization and the
    /// regularity check.
    pub fn new(family: Family, opts: DistOptions) -> Result<Self> {
        let mut d = Self::build(family)?;
        let mean = d.mean();
        if (mean - 1.0).abs() > MEAN_TOL {
            if opts.normalize {
                if mean <= 0.0 {
                    return Err(Error::InvalidDistribution("mean must be positive to normalize".into()));
                }
                d = d.scaled(1.0 / mean)?;
            } else if !opts.allow_unnormalized {
                return Err(Error::NotNormalized { mean });
            }
        }
        if !opts.allow_irregular {
            if let Some(at) = d.first_irregularity() {
                return Err(Error::IrregularDistribution { at });
            }
        }
        Ok(d)
    }

    fn build(family: Family) -> Result<Self> {
        match &family {
            Family::Uniform { lo, hi } => {
                let (lo, hi) = (*lo, *hi);
                if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi <= lo {
                    return Err(Error::InvalidDistribution(format!("uniform needs 0 ≤ lo < hi, got [{lo}, {hi}]")));
                }
                Ok(Self { family, lo, hi, scale: 1.0, knots: vec![lo, hi], cdf_knots: vec![0.0, 1.0], dens: vec![1.0 / (hi - lo)] })
            }
            Family::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidDistribution("tabulated CDF needs at least two points".into()));
                }
                let knots: Vec<f64> = points.iter().map(|p| p[0]).collect();
                let cdf: Vec<f64> = points.iter().map(|p| p[1]).collect();
                if knots.iter().chain(cdf.iter()).any(|x| !x.is_finite()) || knots[0] < 0.0 {
                    return Err(Error::InvalidDistribution("breakpoints must be finite and nonnegative".into()));
                }
                if cdf[0] != 0.0 || (cdf[cdf.len() - 1] - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidDistribution("tabulated CDF must start at 0 and end at 1".into()));
                }
                let mut dens = Vec::with_capacity(knots.len() - 1);
                for i in 0..knots.len() - 1 {
                    let dv = knots[i + 1] - knots[i];
                    let df = cdf[i + 1] - cdf[i];
                    if dv <= 0.0 {
                        return Err(Error::InvalidDistribution("breakpoints must be strictly increasing".into()));
                    }
                    if df <= 0.0 {
                        return Err(Error::InvalidDistribution(format!(
                            "density must be positive on the support; CDF is flat on [{}, {}]",
                            knots[i],
                            knots[i + 1]
                        )));
                    }
                    dens.push(df / dv);
                }
                let mut cdf_knots = cdf;
                let last = cdf_knots.len() - 1;
                cdf_knots[last] = 1.0;
                Ok(Self { lo: knots[0], hi: knots[knots.len() - 1], family, scale: 1.0, knots, cdf_knots, dens })
            }
        }
    }

    fn scaled(&self, c: f64) -> Result<Self> {
        let family = match &self.family {
            Family::Uniform { lo, hi } => Family::Uniform { lo: lo * c, hi: hi * c },
            Family::Tabulated { points } => Family::Tabulated { points: points.iter().map(|p| [p[0] * c, p[1]]).collect() },
        };
        let mut d = Self::build(family)?;
        d.scale = self.scale * c;
        Ok(d)
    }

    /// The (possibly rescaled) family description.
    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Lower end of the support, `v̲`.
    pub fn lo(&self) -> f64 {
        self.lo
    }

    /// Upper end of the support, `v̄`.
    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Factor applied to the input support during normalization (1 if none).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Interior points where the density may jump.
    pub fn breakpoints(&self) -> &[f64] {
        &self.knots[1..self.knots.len() - 1]
    }

    fn segment(&self, v: f64) -> usize {
        // Segment i covers [knots[i], knots[i+1]); the last segment is closed.
        match self.knots.partition_point(|&k| k <= v) {
            0 => 0,
            i => (i - 1).min(self.dens.len() - 1),
        }
    }

    /// CDF `F(v)`.
    pub fn cdf(&self, v: f64) -> f64 {
        if v <= self.lo {
            return 0.0;
        }
        if v >= self.hi {
            return 1.0;
        }
        let i = self.segment(v);
        (self.cdf_knots[i] + self.dens[i] * (v - self.knots[i])).min(1.0)
    }

    /// Density `f(v)`; right-continuous at breakpoints and left-continuous at `v̄`.
    pub fn pdf(&self, v: f64) -> f64 {
        if v < self.lo || v > self.hi {
            return 0.0;
        }
        self.dens[self.segment(v)]
    }

    /// Inverse CDF for `u ∈ [0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.lo;
        }
        if u >= 1.0 {
            return self.hi;
        }
        let i = self.cdf_knots.partition_point(|&c| c <= u).clamp(1, self.knots.len() - 1) - 1;
        (self.knots[i] + (u - self.cdf_knots[i]) / self.dens[i]).clamp(self.lo, self.hi)
    }

    /// `∫_x^{v̄} v^k f(v) dv` for `k ∈ {0, 1}`, exact for the piecewise-constant density.
    fn tail_moment(&self, x: f64, k: i32) -> f64 {
        let x = x.clamp(self.lo, self.hi);
        let mut acc = 0.0;
        for i in 0..self.dens.len() {
            let a = self.knots[i].max(x);
            let b = self.knots[i + 1];
            if b <= a {
                continue;
            }
            acc += self.dens[i] * if k == 0 { b - a } else { 0.5 * (b * b - a * a) };
        }
        acc
    }

    /// Mean `E[v]`.
    pub fn mean(&self) -> f64 {
        self.tail_moment(self.lo, 1)
    }

    /// `1 − F(x)`, computed without cancellation.
    pub fn tail_mass(&self, x: f64) -> f64 {
        self.tail_moment(x, 0)
    }

    /// `∫_x^{v̄} v f(v) dv`.
    pub fn tail_mean(&self, x: f64) -> f64 {
        self.tail_moment(x, 1)
    }

    /// Expected excess `s_x = E[(v − x)₊] = ∫_x^{v̄} (v − x) f(v) dv`.
    pub fn tail_excess(&self, x: f64) -> f64 {
        let x = x.clamp(self.lo, self.hi);
        let mut acc = 0.0;
        for i in 0..self.dens.len() {
            let a = self.knots[i].max(x);
            let b = self.knots[i + 1];
            if b <= a {
                continue;
            }
            acc += self.dens[i] * 0.5 * ((b - x) * (b - x) - (a - x) * (a - x));
        }
        acc
    }

    /// Inverse hazard `(1 − F(v))/f(v)`.
    pub fn inverse_hazard(&self, v: f64) -> Result<f64> {
        if v >= self.hi {
            return Ok(0.0);
        }
        let f = self.pdf(v);
        if f <= 0.0 {
            return Err(Error::DegenerateDensity { v });
        }
        Ok(self.tail_mass(v) / f)
    }

    /// Weighted virtual value `v − A·(1 − F(v))/f(v)`.
    pub fn virtual_value(&self, v: f64, a: f64) -> Result<f64> {
        if !(self.lo..=self.hi).contains(&v) {
            return Err(Error::InvalidParams(format!("value {v} outside support [{}, {}]", self.lo, self.hi)));
        }
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidParams(format!("virtual-value weight {a} outside [0, 1]")));
        }
        if v == self.hi {
            return Ok(self.hi);
        }
        Ok(v - a * self.inverse_hazard(v)?)
    }

    /// `max{v̲, root of v − A(1−F(v))/f(v)}` by bracketed bisection.
    pub fn threshold(&self, a: f64) -> Result<f64> {
        let phi = |v: f64| self.virtual_value(v, a).unwrap_or(f64::NAN);
        if phi(self.lo) >= 0.0 {
            return Ok(self.lo);
        }
        // φ(v̄) = v̄ > 0, so the bracket is valid.
        bisect(phi, self.lo, self.hi, ROOT_TOL)
    }

    /// Monopoly price `v_M = argmax v(1 − F(v))`.
    pub fn monopoly_price(&self) -> f64 {
        self.threshold(1.0).expect("virtual value changes sign on a regular support")
    }

    /// First grid point where the unweighted virtual value decreases, if any.
    pub fn first_irregularity(&self) -> Option<f64> {
        let n = REGULARITY_GRID;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..n {
            let v = if i + 1 == n { self.hi } else { self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64 };
            let phi = self.virtual_value(v, 1.0).ok()?;
            if phi < prev - REGULARITY_TOL {
                return Some(v);
            }
            prev = phi;
        }
        None
    }

    /// True when Myerson regularity holds on the check grid.
    pub fn is_regular(&self) -> bool {
        self.first_irregularity().is_none()
    }
}

/// Core model parameters `(λ, T, μ₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Arrival rate of rewards under a good match.
    pub lambda: f64,
    /// Length of the service horizon.
    pub horizon: f64,
    /// Prior probability of a good match.
    pub mu0: f64,
}

impl ModelParams {
    /// Validated constructor.
    pub fn new(lambda: f64, horizon: f64, mu0: f64) -> Result<Self> {
        let p = Self { lambda, horizon, mu0 };
        p.validate()?;
        Ok(p)
    }

    /// Check `λ, T > 0` and `μ₀ ∈ (0, 1)`.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParams(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidParams(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.mu0 > 0.0 && self.mu0 < 1.0) {
            return Err(Error::InvalidParams(format!("mu0 must lie in (0, 1), got {}", self.mu0)));
        }
        Ok(())
    }

    /// Largest admissible frontier weight `(1 − μ₀)/μ₀`.
    pub fn weight_cap(&self) -> f64 {
        (1.0 - self.mu0) / self.mu0
    }
}

/// Hazard weight `A = 1 − μ₀(w_L + 1)₊`, clamped to `[0, 1]`.
pub fn hazard_weight(mu0: f64, wl: f64) -> f64 {
    (1.0 - mu0 * (wl + 1.0).max(0.0)).clamp(0.0, 1.0)
}

/// Horizon condition `λT ≥ 2(μ₀ − v̲)₊ / ((1 − μ₀) v̲)`.
pub fn check_horizon(params: &ModelParams, dist: &ValueDistribution) -> Result<bool> {
    let vlo = dist.lo();
    if vlo <= 0.0 {
        return Err(Error::UnsupportedSupport("horizon condition needs a positive lower support bound".into()));
    }
    let rhs = 2.0 * (params.mu0 - vlo).max(0.0) / ((1.0 - params.mu0) * vlo);
    Ok(params.lambda * params.horizon >= rhs)
}
