//! Brute-force oracles against the analytic trial.

use trialmech::oracle::{discrete_relaxed_oracle, search_optimal_control, ControlSearch, ThresholdMode};
use trialmech::trial_solver::solve_trial;
use trialmech::{ModelParams, ValueDistribution};

fn instances() -> Vec<(ModelParams, ValueDistribution, f64)> {
    [(1.0, 5.0, 0.5, 0.1, 0.0), (0.8, 4.0, 0.3, 0.3, 0.5), (1.5, 3.0, 0.6, 0.2, -0.5), (1.0, 6.0, 0.4, 0.4, 0.8)]
        .iter()
        .map(|&(l, t, mu, d, wl)| (ModelParams::new(l, t, mu).unwrap(), ValueDistribution::uniform_around_one(d).unwrap(), wl))
        .collect()
}

#[test]
fn relaxed_oracle_brackets_the_analytic_trial() {
    for (p, d, wl) in instances() {
        let o = discrete_relaxed_oracle(&p, &d, wl, 6, 5, ThresholdMode::Common).unwrap();
        assert!(o.t0_within_one_bin && o.v0_within_one_step, "{o:?}");
        assert!(o.gap >= -1e-12, "discrete mechanism beats the analytic optimum: {}", o.gap);
        assert!(o.relative_gap <= 0.05);
    }
}

#[test]
fn exhaustive_three_level_search_is_monotone_and_bang_bang_off_the_switch_bin() {
    for (p, d, wl) in instances() {
        let s = solve_trial(&p, &d, wl).unwrap();
        let k = 10;
        let r = search_optimal_control(&p, s.pi0, wl, k, &ControlSearch::Exhaustive { levels: vec![0.0, 0.5, 1.0] }).unwrap();
        assert!(r.monotone);
        let h = p.horizon / k as f64;
        for (i, &lv) in r.levels.iter().enumerate() {
            let contains_t0 = (i as f64 * h..=(i + 1) as f64 * h).contains(&s.mechanism.t0);
            assert!(lv == 0.0 || lv == 1.0 || contains_t0, "interior level {lv} in bin {i}");
        }
        assert!((r.total_access - s.mechanism.t0).abs() <= h);
        assert!(r.value <= r.analytic_value * (1.0 + 1e-12));
    }
}

/// Doubling the bin count should halve the relaxed-oracle gap (within ±30%).
/// It does not: the K=4 switch grid is contained in the K=8 grid, so when t0
/// sits near a K=4 node the best switch is unchanged and the ratio is 1, and
/// elsewhere the loss is second order in the distance to the nearest node, so
/// the ratio is typically near one quarter.
#[test]
#[ignore = "unattainable: gap ratio from K=4 to K=8 is not one half"]
fn relaxed_oracle_gap_halves_when_bins_double() {
    for (p, d, wl) in instances() {
        let g4 = discrete_relaxed_oracle(&p, &d, wl, 4, 5, ThresholdMode::Common).unwrap().gap;
        let g8 = discrete_relaxed_oracle(&p, &d, wl, 8, 5, ThresholdMode::Common).unwrap().gap;
        let ratio = g8 / g4;
        assert!((0.35..=0.65).contains(&ratio), "gap ratio {ratio}");
    }
}
