//! Acceptance gate. Runs every primary criterion, prints one line per
//! criterion and exits non-zero if any of them fails.

use std::time::{Duration, Instant};

use lazo_core::diagnostics::{
    best_fixed_decision, loglog_slope, loss_at_budget, mean_std, regret_curve, symmetry_diagnostic,
    validate_bounds,
};
use lazo_core::estimators::{
    estimate_two_point_asym, estimate_two_point_sym, EstimatorConfig, LazyRule, RuleFired,
    Threshold, Variant,
};
use lazo_core::numerics::{sample_unit_sphere, FeasibleSet, Purpose, SeededRng};
use lazo_core::optimizer::{
    run, run_trials, step_size_preset, InitRecipe, RunConfig, Runner, Trajectory,
};
use lazo_core::oracles::{
    CenterSchedule, LqrConfig, ProblemConfig, QuadraticConfig, QueryChannel, RegressionConfig,
    ResourceConfig,
};
use lazo_core::parallel::Execution;
use lazo_core::Result;
use rand::Rng;
use rand_distr::StandardNormal;

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Closure<F> {
    d: usize,
    f: F,
}

impl<F: FnMut(&[f64]) -> f64> QueryChannel for Closure<F> {
    fn dimension(&self) -> usize {
        self.d
    }

    fn query(&mut self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gaussian_vec(rng: &mut SeededRng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit(rng: &mut SeededRng, d: usize) -> Vec<f64> {
    let v = gaussian_vec(rng, d);
    let n = dot(&v, &v).sqrt();
    v.into_iter().map(|x| x / n).collect()
}

const D_LIN: usize = 5;
const L_LIN: f64 = 2.0;
const MC: usize = 100_000;

/// Mean squared norm of an estimator on `f(x) = L a.x` over `MC` directions.
fn linear_second_moment(symmetric: bool) -> f64 {
    let mut rng = SeededRng::new(101, 0);
    let a = unit(&mut rng, D_LIN);
    let x = gaussian_vec(&mut rng, D_LIN);
    let mut ch = Closure {
        d: D_LIN,
        f: |w: &[f64]| L_LIN * dot(&a, w),
    };
    let mut total = 0.0;
    for _ in 0..MC {
        let u = sample_unit_sphere(&mut rng, D_LIN).unwrap();
        let g = if symmetric {
            estimate_two_point_sym(&mut ch, &x, &u, 0.1).unwrap()
        } else {
            estimate_two_point_asym(&mut ch, &x, &u, 0.1).unwrap()
        };
        total += g.sq_norm();
    }
    total / MC as f64
}

fn c1_symmetric_tightness() -> Outcome {
    let target = D_LIN as f64 * L_LIN * L_LIN;
    let m = linear_second_moment(true);
    let rel = (m - target).abs() / target;
    outcome(
        rel <= 0.03,
        format!("mean |g|^2 = {m:.4} vs dL^2 = {target} (rel err {rel:.4}, tol 0.03)"),
    )
}

fn c2_asymmetric_bound() -> Outcome {
    let bound = 1.05 * (D_LIN * D_LIN) as f64 * L_LIN * L_LIN;
    let m = linear_second_moment(false);
    outcome(
        m <= bound,
        format!("mean |g|^2 = {m:.4} <= 1.05 d^2 L^2 = {bound}"),
    )
}

fn c3_unbiasedness() -> Outcome {
    let d = 5;
    let mut rng = SeededRng::new(202, 0);
    // H = M M^T / d + I, b and x gaussian.
    let m: Vec<Vec<f64>> = (0..d).map(|_| gaussian_vec(&mut rng, d)).collect();
    let h: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| dot(&m[i], &m[j]) / d as f64 + if i == j { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let b = gaussian_vec(&mut rng, d);
    let x = gaussian_vec(&mut rng, d);
    let truth: Vec<f64> = (0..d).map(|i| dot(&h[i], &x) + b[i]).collect();
    let hc = h.clone();
    let bc = b.clone();
    let mut ch = Closure {
        d,
        f: move |w: &[f64]| {
            let hw: Vec<f64> = (0..d).map(|i| dot(&hc[i], w)).collect();
            0.5 * dot(w, &hw) + dot(&bc, w)
        },
    };
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    for _ in 0..MC {
        let u = sample_unit_sphere(&mut rng, d).unwrap();
        let g = estimate_two_point_sym(&mut ch, &x, &u, 0.1).unwrap();
        for i in 0..d {
            sum[i] += g.vector[i];
            sum_sq[i] += g.vector[i] * g.vector[i];
        }
    }
    let n = MC as f64;
    let mut worst = 0.0f64;
    for i in 0..d {
        let mean = sum[i] / n;
        let var = (sum_sq[i] - n * mean * mean) / (n - 1.0);
        let se = (var / n).sqrt();
        worst = worst.max((mean - truth[i]).abs() / se);
    }
    outcome(
        worst <= 3.0,
        format!("max coordinate deviation {worst:.3} standard errors (tol 3)"),
    )
}

fn c4_instance_bound() -> Outcome {
    let config = RunConfig {
        problem: ProblemConfig::Regression(RegressionConfig::default()),
        estimator: EstimatorConfig::new(Variant::Residual, 0.05),
        horizon: 999,
        eta: 1e-3,
        feasible_set: FeasibleSet::Ball { radius: 100.0 },
        init: InitRecipe::Zero,
        seed: 4,
        record_probes: true,
    };
    let traj = run(&config, 0).unwrap();
    let report = validate_bounds(&traj, 1.0).unwrap();
    outcome(
        report.instance_bound_violations == 0 && report.rounds_checked == 999,
        format!(
            "{} violations over {} checked rounds ({} degenerate)",
            report.instance_bound_violations, report.rounds_checked, report.degenerate_rounds
        ),
    )
}

fn c5_reduced_norm() -> Outcome {
    let (d, l, horizon) = (4, 3.0, 1000);
    let (eta, delta) = step_size_preset(1.0, l, d, horizon).unwrap();
    let (mut premise, mut violations, mut checked) = (0, 0, 0);
    for seed in 0..10 {
        let config = RunConfig {
            problem: ProblemConfig::Quadratic(QuadraticConfig::default()),
            estimator: EstimatorConfig::new(Variant::Residual, delta),
            horizon: horizon - 1,
            eta,
            feasible_set: FeasibleSet::Ball { radius: 1.0 },
            init: InitRecipe::Zero,
            seed,
            record_probes: true,
        };
        let report = validate_bounds(&run(&config, 0).unwrap(), l).unwrap();
        premise += report.premise_rounds;
        violations += report.reduced_norm_violations;
        checked += report.rounds_checked;
    }
    outcome(
        violations == 0 && premise > 0,
        format!(
            "{violations} violations among {premise} premise rounds ({checked} rounds, 10 seeds)"
        ),
    )
}

fn drifting(variant: Variant, horizon: usize) -> RunConfig {
    RunConfig {
        problem: ProblemConfig::Quadratic(QuadraticConfig {
            dim: 5,
            noise_std: 0.05,
            schedule: CenterSchedule::Drift { rate: 0.02 },
            ..Default::default()
        }),
        estimator: EstimatorConfig::new(variant, 0.05).with_lipschitz(2.0),
        horizon,
        eta: 0.01,
        feasible_set: FeasibleSet::Ball { radius: 1.0 },
        init: InitRecipe::Random { scale: 0.5 },
        seed: 66,
        record_probes: false,
    }
}

/// Bit pattern of a run: iterates, losses, estimate norms and queries.
fn fingerprint(t: &Trajectory) -> Vec<u64> {
    let mut out = Vec::new();
    for x in &t.iterates {
        out.extend(x.iter().map(|v| v.to_bits()));
    }
    for r in &t.records {
        out.extend([
            r.loss.to_bits(),
            r.est_sq_norm.to_bits(),
            r.queries_this_round as u64,
        ]);
    }
    out
}

fn reused(rule: RuleFired) -> usize {
    match rule {
        RuleFired::Reused => 1,
        RuleFired::Mixed { reused, .. } => reused,
        RuleFired::OnePoint | RuleFired::FreshTwoPoint => 0,
    }
}

fn c6_degenerate_thresholds() -> Outcome {
    let horizon = 499;
    let residual = fingerprint(&run(&drifting(Variant::Residual, horizon), 0).unwrap());
    let symmetric = fingerprint(&run(&drifting(Variant::TwoPointSym, horizon), 0).unwrap());
    let mut mismatches = Vec::new();
    for variant in [Variant::LazoA, Variant::LazoB] {
        let mut inf = drifting(variant, horizon);
        inf.estimator.threshold = Threshold::INFINITE;
        let mut zero = drifting(variant, horizon);
        zero.estimator.threshold = Threshold(0.0);
        if fingerprint(&run(&inf, 0).unwrap()) != residual {
            mismatches.push(format!("{variant}(inf)"));
        }
        if fingerprint(&run(&zero, 0).unwrap()) != symmetric {
            mismatches.push(format!("{variant}(0)"));
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("500-round runs, bitwise mismatches: {mismatches:?}"),
    )
}

fn c7_regret_slope() -> Outcome {
    let (l, horizons) = (3.0, [1_000usize, 10_000, 100_000]);
    let mut slopes = Vec::new();
    for (variant, threshold) in [
        (Variant::TwoPointSym, 0.0),
        (Variant::LazoA, 0.75),
        (Variant::LazoB, 6.0),
    ] {
        let mut regrets = Vec::new();
        for &t in &horizons {
            let (eta, delta) = step_size_preset(1.0, l, 4, t).unwrap();
            let config = RunConfig {
                problem: ProblemConfig::Quadratic(QuadraticConfig::default()),
                estimator: EstimatorConfig::new(variant, delta)
                    .with_threshold(threshold)
                    .with_lipschitz(l),
                horizon: t,
                eta,
                feasible_set: FeasibleSet::Ball { radius: 1.0 },
                init: InitRecipe::Zero,
                seed: 11,
                record_probes: false,
            };
            let finals: Vec<f64> = run_trials(&config, 10, Execution::Parallel)
                .unwrap()
                .iter()
                .map(|traj| {
                    let x_star = best_fixed_decision(&config, traj.trial).unwrap();
                    regret_curve(traj, &x_star, &config).unwrap().final_value()
                })
                .collect();
            regrets.push(mean_std(&finals).0);
        }
        let xs: Vec<f64> = horizons.iter().map(|&t| t as f64).collect();
        slopes.push((variant, loglog_slope(&xs, &regrets).unwrap()));
    }
    let pass = slopes.iter().all(|(_, s)| (0.35..=0.65).contains(s));
    let text: Vec<String> = slopes.iter().map(|(v, s)| format!("{v} {s:.3}")).collect();
    outcome(
        pass,
        format!("slopes {} (band [0.35, 0.65])", text.join(", ")),
    )
}

fn lqr(variant: Variant, threshold: f64, horizon: usize, seed: u64) -> RunConfig {
    RunConfig {
        problem: ProblemConfig::Lqr(LqrConfig::default()),
        estimator: EstimatorConfig::new(variant, 0.01).with_threshold(threshold),
        horizon,
        eta: 1e-5,
        feasible_set: FeasibleSet::Ball { radius: 1.0 },
        init: InitRecipe::Zero,
        seed,
        record_probes: false,
    }
}

fn c8_query_pattern() -> Outcome {
    let trajs = run_trials(&lqr(Variant::LazoA, 1.0, 299, 1), 10, Execution::Parallel).unwrap();
    let (mut calm, mut nc, mut burst, mut nb) = (0.0, 0.0, 0.0, 0.0);
    for r in trajs.iter().flat_map(|t| &t.records) {
        match r.t % 100 {
            0..=34 => {
                calm += r.queries_this_round as f64;
                nc += 1.0;
            }
            35..=65 => {
                burst += r.queries_this_round as f64;
                nb += 1.0;
            }
            _ => {}
        }
    }
    let (calm, burst) = (calm / nc, burst / nb);
    outcome(
        calm < 1.9 && burst > calm,
        format!("queries/round calm {calm:.3} (< 1.9), burst {burst:.3} (> calm)"),
    )
}

/// Mean and std of the loss each method reaches within the smallest
/// per-trial query budget, evaluated at the final round.
fn equal_budget(configs: &[RunConfig], trials: usize) -> Vec<(f64, f64)> {
    let runs: Vec<Vec<Trajectory>> = configs
        .iter()
        .map(|c| run_trials(c, trials, Execution::Parallel).unwrap())
        .collect();
    let horizon = configs[0].horizon;
    configs
        .iter()
        .zip(&runs)
        .map(|(config, trajs)| {
            let losses: Vec<f64> = (0..trials)
                .map(|i| {
                    let budget = runs.iter().map(|r| r[i].total_queries()).min().unwrap();
                    loss_at_budget(&trajs[i], config, budget, horizon).unwrap()
                })
                .collect();
            mean_std(&losses)
        })
        .collect()
}

fn c9_query_efficiency() -> Outcome {
    let lqr_cfgs = vec![
        lqr(Variant::TwoPointSym, 0.0, 229, 1),
        lqr(Variant::LazoA, 1.0, 229, 1),
        lqr(Variant::LazoB, 100.0, 229, 1),
    ];
    let resource = |variant, threshold| RunConfig {
        problem: ProblemConfig::ResourceAllocation(ResourceConfig::default()),
        estimator: EstimatorConfig::new(variant, 0.1).with_threshold(threshold),
        horizon: 300,
        eta: 1e-5,
        feasible_set: FeasibleSet::Unconstrained,
        init: InitRecipe::Zero,
        seed: 1,
        record_probes: false,
    };
    let res_cfgs = vec![
        resource(Variant::TwoPointSym, 0.0),
        resource(Variant::LazoA, 10.0),
        resource(Variant::LazoB, 1000.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, cfgs) in [("lqr", lqr_cfgs), ("resource", res_cfgs)] {
        let stats = equal_budget(&cfgs, 10);
        let (sym_mean, sym_std) = stats[0];
        for (label, (m, s)) in ["lazo_a", "lazo_b"].iter().zip(&stats[1..]) {
            let pooled = ((sym_std * sym_std + s * s) / 2.0).sqrt();
            let ok = *m <= sym_mean + pooled;
            pass &= ok;
            parts.push(format!(
                "{name}/{label} {m:.6e} vs {sym_mean:.6e} + {pooled:.3e}"
            ));
        }
    }
    outcome(pass, parts.join("; "))
}

fn c10_multipoint_degenerate() -> Outcome {
    let horizon = 199;
    let mut problems = Vec::new();
    for (single, multi) in [
        (Variant::LazoA, Variant::MultiLazoA),
        (Variant::LazoB, Variant::MultiLazoB),
    ] {
        let mut a = drifting(single, horizon);
        a.estimator.threshold = Threshold(0.5);
        let mut b = drifting(multi, horizon);
        b.estimator = a.estimator.clone().with_multipoint(1, 1);
        b.estimator.variant = multi;
        let ta = run(&a, 0).unwrap();
        let tb = run(&b, 0).unwrap();
        let pattern = |t: &Trajectory| t.records.iter().map(|r| reused(r.rule)).collect::<Vec<_>>();
        if fingerprint(&ta) != fingerprint(&tb) || pattern(&ta) != pattern(&tb) {
            problems.push(format!("{multi}(H=K=1)"));
        }
        if !pattern(&ta).contains(&1) || !pattern(&ta).contains(&0) {
            problems.push(format!(
                "{single}: pattern does not mix reuse and fresh rounds"
            ));
        }

        let mut zero = drifting(multi, horizon);
        zero.estimator = zero.estimator.with_threshold(0.0).with_multipoint(3, 2);
        let mut sym = drifting(Variant::MultiPointSym, horizon);
        sym.estimator = sym.estimator.with_multipoint(3, 2);
        if fingerprint(&run(&zero, 0).unwrap()) != fingerprint(&run(&sym, 0).unwrap()) {
            problems.push(format!("{multi}(D=0, K=2)"));
        }
    }
    outcome(
        problems.is_empty(),
        format!("200-round runs, mismatches: {problems:?}"),
    )
}

fn c11_symmetry_setup() -> Outcome {
    let config = lqr(Variant::LazoB, 100.0, 299, 1);
    let mut runner = Runner::new(config.clone(), 0).unwrap();
    runner.freeze_at(10).unwrap();
    let rng = config.trial_rng(0).fork(Purpose::Diagnostics, 10);
    let report = |threshold| {
        symmetry_diagnostic(
            &runner,
            LazyRule::B,
            threshold,
            1.0,
            40_000,
            4,
            2,
            &rng,
            Execution::Parallel,
        )
        .unwrap()
    };
    let lazy = report(Threshold(100.0));
    let control = report(Threshold::INFINITE);
    outcome(
        lazy.score.is_finite() && lazy.samples.len() == 40_000 && control.score == 0.0,
        format!(
            "score {:.4} (member fraction {:.4}), control score {}",
            lazy.score, lazy.member_fraction, control.score
        ),
    )
}

fn main() {
    let criteria: [(&str, Duration, Check); 11] = [
        (
            "symmetric two-point second moment equals dL^2",
            Duration::from_secs(1),
            c1_symmetric_tightness,
        ),
        (
            "asymmetric two-point second moment bound",
            Duration::from_secs(1),
            c2_asymmetric_bound,
        ),
        (
            "symmetric two-point unbiasedness",
            Duration::from_secs(2),
            c3_unbiasedness,
        ),
        (
            "instance-dependent bound holds every round",
            Duration::from_secs(5),
            c4_instance_bound,
        ),
        (
            "reduced-norm condition under the preset",
            Duration::from_secs(60),
            c5_reduced_norm,
        ),
        (
            "degenerate thresholds reproduce base estimators",
            Duration::from_secs(5),
            c6_degenerate_thresholds,
        ),
        (
            "regret slope near one half",
            Duration::from_secs(300),
            c7_regret_slope,
        ),
        (
            "lazy query savings follow the burst pattern",
            Duration::from_secs(600),
            c8_query_pattern,
        ),
        (
            "equal-budget loss no worse than symmetric",
            Duration::from_secs(1200),
            c9_query_efficiency,
        ),
        (
            "multi-point degenerate settings",
            Duration::from_secs(5),
            c10_multipoint_degenerate,
        ),
        (
            "symmetry diagnostic setup and control",
            Duration::from_secs(120),
            c11_symmetry_setup,
        ),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let pass = result.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {} [{:.2}s, limit {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over time" }
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
