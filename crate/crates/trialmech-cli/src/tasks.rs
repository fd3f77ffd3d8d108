//! One function per subcommand. Each returns an [`Outcome`] holding every
//! artifact in memory; nothing touches the disk until the task succeeded.

use crate::config::{ExtensionKind, RunConfig};
use crate::format::{g12, json_f64, round_json};
use crate::{exit, Failure};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::Path;
use trialmech::extensions::{
    bad_news_mechanism, cancellable_objective, cancellable_trial, discounted_switch_search, infinite_horizon_trial,
    mixed_news_mechanism, mixed_news_objective, ExtendedParams,
};
use trialmech::frontier::{d1_payoffs, default_weight_grid, intuitive_criterion_equivalent, trace_frontier};
use trialmech::mechanism::{check_ic, DirectMechanism, IcGrid, IcReport};
use trialmech::oracle::{discrete_relaxed_oracle, search_optimal_control, ControlSearch, ThresholdMode};
use trialmech::primitives::check_horizon;
use trialmech::simulate::{best_response_scan, default_deviations, simulate_game, Estimate, SimConfig};
use trialmech::tiered::{perturbation_gain, solve_tiered, welfare_compare, welfare_monte_carlo, ScreeningSet};
use trialmech::trial_solver::{first_best_attainable, free_trial as solve_free_trial, solve_trial, TrialMechanism};
use trialmech::{Exec, ModelParams, ValueDistribution};

/// Paths used when neither `--paths` nor `[task] paths` is given.
pub const DEFAULT_PATHS: u64 = 100_000;
/// Standard errors allowed between Monte Carlo and closed forms.
const SE_BAND: f64 = 3.0;

/// Command-line switches shared by every task.
pub struct Options {
    pub seed: u64,
    pub paths: Option<u64>,
    pub strict: bool,
    pub check: bool,
}

impl Options {
    fn paths(&self) -> u64 {
        self.paths.unwrap_or(DEFAULT_PATHS)
    }
}

/// Validated model inputs.
pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub dist: ValueDistribution,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Self, Failure> {
        let m = &cfg.model;
        if !(m.lambda.is_finite() && m.lambda > 0.0) {
            return Err(trialmech::Error::InvalidParams(format!("lambda must be positive, got {}", m.lambda)).into());
        }
        if !(m.mu0 > 0.0 && m.mu0 < 1.0) {
            return Err(trialmech::Error::InvalidParams(format!("mu0 must lie in (0, 1), got {}", m.mu0)).into());
        }
        if let Some(t) = m.horizon {
            ModelParams::new(m.lambda, t, m.mu0)?;
        }
        if let Some(ext) = &cfg.extension {
            ext.validate(m.mu0)?;
        }
        let dist = ValueDistribution::new(cfg.distribution.family.clone(), cfg.distribution.options)?;
        Ok(Self { cfg, dist })
    }

    fn params(&self) -> Result<ModelParams, Failure> {
        let m = &self.cfg.model;
        let t = m.horizon.ok_or_else(|| Failure::validation("missing_horizon", "[model] T is required for this task"))?;
        Ok(ModelParams::new(m.lambda, t, m.mu0)?)
    }

    fn ext(&self) -> ExtendedParams {
        self.cfg.extension.unwrap_or_else(|| ExtendedParams::baseline(self.cfg.model.mu0))
    }
}

/// Artifacts and status of one run.
pub struct Outcome {
    main_name: &'static str,
    report: Value,
    csv: Vec<(String, String)>,
    warnings: Vec<Value>,
    checks: Option<Value>,
    check_pass: Option<bool>,
}

impl Outcome {
    fn new(main_name: &'static str, report: Value) -> Self {
        Self { main_name, report, csv: vec![], warnings: vec![], checks: None, check_pass: None }
    }

    fn warn(&mut self, reason: &str, message: impl Into<String>) {
        self.warnings.push(json!({ "reason": reason, "message": message.into() }));
    }

    fn set_checks(&mut self, pass: bool, detail: Value) {
        self.check_pass = Some(pass);
        self.checks = Some(json!({ "pass": pass, "detail": detail }));
    }

    fn full_report(&self) -> Value {
        let mut v = self.report.clone();
        let obj = v.as_object_mut().expect("reports are JSON objects");
        obj.insert("warnings".into(), Value::Array(self.warnings.clone()));
        if let Some(c) = &self.checks {
            obj.insert("checks".into(), c.clone());
        }
        round_json(v)
    }

    /// Main JSON report text.
    pub fn main_report(&self) -> String {
        serde_json::to_string_pretty(&self.full_report()).unwrap()
    }

    /// Write every artifact into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), Failure> {
        let io = |e: std::io::Error| Failure::validation("output_unwritable", format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join(format!("{}.json", self.main_name)), self.main_report() + "\n").map_err(io)?;
        for (name, text) in &self.csv {
            std::fs::write(dir.join(name), text).map_err(io)?;
        }
        Ok(())
    }

    /// Exit status after a successful run.
    pub fn exit_code(&self, opts: &Options) -> u8 {
        if self.check_pass == Some(false) {
            exit::CHECK_FAILED
        } else if opts.strict && !self.warnings.is_empty() {
            exit::STRICT
        } else {
            exit::OK
        }
    }
}

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn horizon_warning(out: &mut Outcome, params: &ModelParams, dist: &ValueDistribution) {
    match check_horizon(params, dist) {
        Ok(true) => {}
        Ok(false) => out.warn("horizon_condition", "lambda*T is below the bound that guarantees incentive compatibility"),
        Err(e) => out.warn(e.reason(), e.to_string()),
    }
}

fn ic_summary(r: &IcReport) -> Value {
    json!({
        "pass": r.pass,
        "tolerance": r.tolerance,
        "ic_u": r.ic_u.magnitude,
        "ic_v": r.ic_v.magnitude,
        "joint": r.joint.magnitude,
        "uninformed_upgrade": r.uninformed_upgrade.magnitude,
        "ir0": r.ir0.magnitude,
        "ir0_residual": r.ir0_residual,
    })
}

fn estimate_json(e: &Estimate, target: f64) -> Value {
    json!({ "mean": e.mean, "se": e.se, "n": e.n, "analytic": target, "within_3se": e.within(target, SE_BAND) })
}

/// Monte Carlo of a trial against its closed-form payoffs.
fn monte_carlo(mech: &DirectMechanism, params: &ModelParams, dist: &ValueDistribution, opts: &Options) -> Result<(bool, Value), Failure> {
    let sim = simulate_game(mech, params, dist, &SimConfig::truthful(opts.paths(), opts.seed))?;
    let (pi_l, pi_h) = mech.seller_payoffs(dist);
    let surplus = mech.buyer_surplus(dist, params.mu0);
    let pass = sim.revenue_h.within(pi_h, SE_BAND) && sim.revenue_l.within(pi_l, SE_BAND) && sim.buyer_payoff.within(surplus, SE_BAND);
    Ok((
        pass,
        json!({
            "paths": sim.paths,
            "seed": sim.seed,
            "pi_H": estimate_json(&sim.revenue_h, pi_h),
            "pi_L": estimate_json(&sim.revenue_l, pi_l),
            "buyer_surplus": estimate_json(&sim.buyer_payoff, surplus),
        }),
    ))
}

fn solve_json(r: &trialmech::SolveReport) -> Value {
    json!({
        "wl": r.wl,
        "v0": r.mechanism.v0,
        "t0": r.mechanism.t0,
        "p0": r.mechanism.p0,
        "post_trial_price": r.mechanism.post_trial_price,
        "pi0": r.pi0,
        "pi_L": r.payoff_l,
        "pi_H": r.payoff_h,
        "weighted_value": r.weighted_value(),
        "boundary_case": r.boundary_case,
        "price_interval": r.price_interval,
    })
}

pub fn solve(ctx: &Context, wl: f64, opts: &Options) -> Result<Outcome, Failure> {
    let params = ctx.params()?;
    let r = solve_trial(&params, &ctx.dist, wl)?;
    let mut out = Outcome::new("solve", json!({ "task": "solve", "solution": solve_json(&r) }));
    horizon_warning(&mut out, &params, &ctx.dist);
    if opts.check {
        let mech = DirectMechanism::from_trial(&r.mechanism, &params);
        let ic = check_ic(&mech, &ctx.dist, &params, IcGrid::default())?;
        let ctl = search_optimal_control(&params, r.pi0, wl, 400, &ControlSearch::SwitchScan)?;
        let ctl_pass = (ctl.total_access - r.mechanism.t0).abs() <= ctl.bin_width
            && (ctl.value - ctl.analytic_value).abs() <= 1e-3 * ctl.analytic_value.abs().max(1e-300);
        let (mc_pass, mc) = monte_carlo(&mech, &params, &ctx.dist, opts)?;
        out.set_checks(
            ic.pass && ctl_pass && mc_pass,
            json!({
                "ic": ic_summary(&ic),
                "control_search": { "pass": ctl_pass, "switch": ctl.total_access, "value": ctl.value, "analytic_value": ctl.analytic_value, "bin_width": ctl.bin_width },
                "monte_carlo": mc,
            }),
        );
    }
    Ok(out)
}

pub fn free_trial(ctx: &Context, opts: &Options) -> Result<Outcome, Failure> {
    let params = ctx.params()?;
    let ft = solve_free_trial(&params, &ctx.dist)?;
    let seg = d1_payoffs(&params, &ctx.dist)?;
    let mut out = Outcome::new(
        "free_trial",
        json!({
            "task": "free-trial",
            "t_M": ft.t_m,
            "v_M": ft.v_m,
            "pi_F": ft.pi_f,
            "d1_segment": { "pi_L_D": seg.pi_l_d, "D": [seg.d.pi_l, seg.d.pi_h], "F": [seg.f.pi_l, seg.f.pi_h] },
            "first_best_attainable": first_best_attainable(&params, &ctx.dist)?,
            "intuitive_criterion_equivalent": intuitive_criterion_equivalent(&ctx.dist, params.mu0),
        }),
    );
    if opts.check {
        let mech = DirectMechanism::from_trial(&TrialMechanism::new(0.0, ft.t_m, ft.v_m, &params), &params);
        let ic = check_ic(&mech, &ctx.dist, &params, IcGrid::default())?;
        out.set_checks(ic.pass, json!({ "ic": ic_summary(&ic) }));
    }
    Ok(out)
}

pub fn frontier(ctx: &Context, grid: Option<usize>, opts: &Options) -> Result<Outcome, Failure> {
    let params = ctx.params()?;
    let weights = match &ctx.cfg.task.weights {
        Some(w) if grid.is_none() => w.clone(),
        _ => default_weight_grid(&params, grid.unwrap_or(64)),
    };
    let pts = trace_frontier(&params, &ctx.dist, &weights)?;
    let mut csv = String::from("wl,t0,v0,p0,pi_L,pi_H,label\n");
    for p in &pts {
        let m = p.mechanism.expect("frontier points carry their trial");
        let row = [p.wl.unwrap_or(f64::NAN), m.t0, m.v0, m.p0, p.pi_l, p.pi_h].map(g12).join(",");
        csv.push_str(&format!("{row},{}\n", p.label.as_str()));
    }
    let seg = d1_payoffs(&params, &ctx.dist)?;
    let mut out = Outcome::new(
        "frontier",
        json!({
            "task": "frontier",
            "points": pts.len(),
            "csv": "frontier.csv",
            "pi_F": seg.pi_f,
            "pi_L_D": seg.pi_l_d,
            "first_best_attainable": first_best_attainable(&params, &ctx.dist)?,
        }),
    );
    out.csv.push(("frontier.csv".into(), csv));
    if opts.check {
        let t_ok = pts.windows(2).all(|w| w[1].mechanism.unwrap().t0 >= w[0].mechanism.unwrap().t0 - 1e-8);
        let v_ok = pts.windows(2).all(|w| w[1].mechanism.unwrap().v0 <= w[0].mechanism.unwrap().v0 + 1e-8);
        out.set_checks(t_ok && v_ok, json!({ "t0_nondecreasing": t_ok, "v0_nonincreasing": v_ok }));
    }
    Ok(out)
}

pub fn check(ctx: &Context, wl: f64, _opts: &Options) -> Result<Outcome, Failure> {
    let params = ctx.params()?;
    let r = solve_trial(&params, &ctx.dist, wl)?;
    let mech = DirectMechanism::from_trial(&r.mechanism, &params);
    let ic = check_ic(&mech, &ctx.dist, &params, IcGrid::default())?;
    let mut out = Outcome::new("check", json!({ "task": "check", "solution": solve_json(&r), "report": to_json(&ic) }));
    horizon_warning(&mut out, &params, &ctx.dist);
    out.set_checks(ic.pass, ic_summary(&ic));
    Ok(out)
}

pub fn simulate(ctx: &Context, wl: f64, opts: &Options) -> Result<Outcome, Failure> {
    let params = ctx.params()?;
    let r = solve_trial(&params, &ctx.dist, wl)?;
    let mech = DirectMechanism::from_trial(&r.mechanism, &params);
    let (mc_pass, mc) = monte_carlo(&mech, &params, &ctx.dist, opts)?;
    let cfg = SimConfig::truthful(opts.paths(), opts.seed);
    let br = best_response_scan(&mech, &params, &ctx.dist, &cfg, &default_deviations(&mech))?;
    let mut out = Outcome::new(
        "simulate",
        json!({ "task": "simulate", "solution": solve_json(&r), "monte_carlo": mc, "best_response": to_json(&br) }),
    );
    horizon_warning(&mut out, &params, &ctx.dist);
    if opts.check {
        let br_pass = br.worst_excess <= 0.0;
        out.set_checks(mc_pass && br_pass, json!({ "within_3se": mc_pass, "no_profitable_deviation": br_pass }));
    }
    Ok(out)
}

pub fn oracle(ctx: &Context, wl: f64, k: usize, m: usize, opts: &Options) -> Result<Outcome, Failure> {
    let params = ctx.params()?;
    let mode = ctx.cfg.task.mode.unwrap_or(ThresholdMode::Common);
    let bins = ctx.cfg.task.switch_bins.unwrap_or(400);
    let r = solve_trial(&params, &ctx.dist, wl)?;
    let rep = discrete_relaxed_oracle(&params, &ctx.dist, wl, k, m, mode)?;
    let ctl = search_optimal_control(&params, r.pi0, wl, bins, &ControlSearch::SwitchScan)?;
    let mut out = Outcome::new(
        "oracle",
        json!({ "task": "oracle", "solution": solve_json(&r), "relaxed_oracle": to_json(&rep), "control_search": to_json(&ctl) }),
    );
    if opts.check {
        let relaxed = rep.t0_within_one_bin && rep.v0_within_one_step && rep.relative_gap <= 0.05;
        let control = (ctl.total_access - r.mechanism.t0).abs() <= ctl.bin_width
            && (ctl.value - ctl.analytic_value).abs() <= 1e-3 * ctl.analytic_value.abs().max(1e-300);
        out.set_checks(relaxed && control, json!({ "relaxed_oracle": relaxed, "control_search": control }));
    }
    Ok(out)
}

pub fn tiered(ctx: &Context, wl: f64, opts: &Options) -> Result<Outcome, Failure> {
    let params = ctx.params()?;
    let set = match &ctx.cfg.task.screening {
        Some(opts) => ScreeningSet::new(&opts.iter().map(|o| (o[0], o[1])).collect::<Vec<_>>())?,
        None => ScreeningSet::baseline(),
    };
    let m = solve_tiered(&params, &ctx.dist, wl, &set)?;
    let mut out = Outcome::new("tiered", json!({ "task": "tiered", "screening_set": set.options(), "mechanism": to_json(&m) }));
    if let Some(w) = &m.warning {
        out.warn("horizon_condition", w.clone());
    }
    if opts.check {
        let gain = perturbation_gain(&m, &params, &ctx.dist, params.horizon / 1000.0);
        let pert = gain <= 1e-8 * params.lambda * params.horizon;
        let ic = if m.horizon_condition_holds {
            Some(check_ic(&m.to_direct(&params)?, &ctx.dist, &params, IcGrid::default())?)
        } else {
            None
        };
        let ic_pass = ic.as_ref().is_none_or(|r| r.pass);
        out.set_checks(
            pert && ic_pass,
            json!({ "perturbation_gain": gain, "ic": ic.as_ref().map(ic_summary), "ic_skipped": ic.is_none() }),
        );
    }
    Ok(out)
}

pub fn welfare(ctx: &Context, opts: &Options) -> Result<Outcome, Failure> {
    let params = ctx.params()?;
    let grid = ctx.cfg.task.mu0_grid.clone().unwrap_or_else(|| (1..=19).map(|i| i as f64 / 20.0).collect());
    let rows = welfare_compare(&params, &ctx.dist, &grid)?;
    let mut csv = String::from("mu0,free_trial_frac,freemium_frac\n");
    for r in &rows {
        csv.push_str(&[r.mu0, r.free_trial_frac, r.freemium_frac].map(g12).join(","));
        csv.push('\n');
    }
    let ordered = rows.iter().all(|r| r.free_trial_frac >= r.freemium_frac);
    let mut report = json!({ "task": "welfare", "csv": "welfare.csv", "rows": to_json(&rows), "free_trial_dominates": ordered });
    let mut mc_pass = true;
    if opts.check || opts.paths.is_some() {
        let mut mc = Vec::new();
        for r in &rows {
            let p = ModelParams::new(params.lambda, params.horizon, r.mu0)?;
            let (a, b) = welfare_monte_carlo(&p, &ctx.dist, opts.paths(), opts.seed, Exec::default())?;
            mc_pass &= a.within(r.free_trial_frac, SE_BAND) && b.within(r.freemium_frac, SE_BAND);
            mc.push(json!({ "mu0": r.mu0, "free_trial": estimate_json(&a, r.free_trial_frac), "freemium": estimate_json(&b, r.freemium_frac) }));
        }
        report["monte_carlo"] = Value::Array(mc);
    }
    let mut out = Outcome::new("welfare", report);
    out.csv.push(("welfare.csv".into(), csv));
    if opts.check {
        out.set_checks(ordered && mc_pass, json!({ "ordering": ordered, "monte_carlo_within_3se": mc_pass }));
    }
    Ok(out)
}

pub fn extension(ctx: &Context, kind: ExtensionKind, wl: f64, opts: &Options) -> Result<Outcome, Failure> {
    let model = &ctx.cfg.model;
    let ext = ctx.ext();
    match kind {
        ExtensionKind::InfiniteHorizon => {
            let r = model.r.unwrap_or(ext.r);
            let m = infinite_horizon_trial(model.lambda, r, model.mu0, wl, &ctx.dist)?;
            let mut report = to_json(&m);
            report["t0"] = json_f64(m.t0);
            report["t0_infinite"] = Value::Bool(m.is_infinite());
            let mut out = Outcome::new("extension", json!({ "task": "extension", "extension": "infinite_horizon", "wl": wl, "r": r, "mechanism": report }));
            if opts.check {
                let horizon = 50.0 * (1.0 / model.lambda + 1.0 / r);
                let t_max = if m.is_infinite() { horizon } else { horizon.max(2.0 * m.t0) };
                let (t, v) = discounted_switch_search(model.lambda, r, m.k, t_max);
                let pass = if m.is_infinite() { t >= t_max - 1e-6 } else { (t - m.t0).abs() <= 1e-4 };
                out.set_checks(pass, json!({ "search_t0": t, "search_value": v, "search_limit": t_max }));
            }
            Ok(out)
        }
        ExtensionKind::Cancellable => {
            let params = ctx.params()?;
            let m = cancellable_trial(&params, &ext, &ctx.dist, wl)?;
            let mut out = Outcome::new("extension", json!({ "task": "extension", "extension": "cancellable", "wl": wl, "mechanism": to_json(&m) }));
            if m.degenerate {
                out.warn("degenerate_mechanism", "service is never worth providing after a bad fit");
            }
            if opts.check {
                let (l, tt) = (params.lambda, params.horizon);
                let f = |t: f64| cancellable_objective(l, tt, m.b3, m.b4, t);
                let base = f(m.t0);
                let gain = [-tt / 256.0, tt / 256.0].iter().map(|d| f((m.t0 + d).clamp(0.0, tt)) - base).fold(f64::NEG_INFINITY, f64::max);
                out.set_checks(gain <= 1e-12 * base.abs().max(1.0), json!({ "perturbation_gain": gain }));
            }
            Ok(out)
        }
        ExtensionKind::BadNews => {
            let params = ctx.params()?;
            let m = bad_news_mechanism(params.lambda, ext.l, ext.u, params.mu0, wl, params.horizon)?;
            let mut out = Outcome::new(
                "extension",
                json!({
                    "task": "extension",
                    "extension": "bad_news",
                    "wl": wl,
                    "p_U": m.p_u,
                    "pi_L": m.pi_l,
                    "pi_H": m.pi_h,
                    "refund_active": m.refund_active,
                    "delta_0": m.refund.values()[0],
                    "delta_T": m.refund.terminal(),
                    "no_falsification": to_json(&m.no_falsification),
                    "csv": "refunds.csv",
                }),
            );
            out.csv.push(("refunds.csv".into(), m.refund.to_csv(g12)));
            if opts.check {
                out.set_checks(m.no_falsification.pass && m.refund.terminal() == 0.0, json!({ "no_falsification": m.no_falsification.pass }));
            }
            Ok(out)
        }
        ExtensionKind::MixedNews => {
            let params = ctx.params()?;
            let (vbar, vlow) = ext.mixed_rewards().ok_or_else(|| {
                Failure::validation("missing_mixed_rewards", "[extension] vbar_mixed and vlow_mixed are required")
            })?;
            let m = mixed_news_mechanism(params.lambda, params.mu0, wl, params.horizon, vbar, vlow)?;
            let mut out = Outcome::new(
                "extension",
                json!({
                    "task": "extension",
                    "extension": "mixed_news",
                    "wl": wl,
                    "t0": m.t0,
                    "p_U": m.p_u,
                    "pi_L": m.pi_l,
                    "pi_H": m.pi_h,
                    "objective": m.objective,
                    "no_falsification": to_json(&m.no_falsification),
                    "csv": ["refunds_high.csv", "refunds_low.csv"],
                }),
            );
            out.csv.push(("refunds_high.csv".into(), m.high_refund.to_csv(g12)));
            out.csv.push(("refunds_low.csv".into(), m.low_refund.to_csv(g12)));
            if opts.check {
                let tt = params.horizon;
                let f = |t: f64| mixed_news_objective(params.lambda, params.mu0, wl, tt, vbar, t);
                let gain = [-tt / 256.0, tt / 256.0].iter().map(|d| f((m.t0 + d).clamp(0.0, tt)) - m.objective).fold(f64::NEG_INFINITY, f64::max);
                let pass = m.no_falsification.pass && m.low_refund.terminal() == 0.0 && gain <= 1e-12 * m.objective.abs().max(1.0);
                out.set_checks(pass, json!({ "no_falsification": m.no_falsification.pass, "perturbation_gain": gain }));
            }
            Ok(out)
        }
    }
}
