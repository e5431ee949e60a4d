//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Run with `cargo test --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use tot::commands::{execute, Command};
use tot::config::Overrides;
use tot::knothe::{knothe_rearrangement, potentials_from_map};
use tot::linearized::{
    apply_t0, solve_duf, solve_duf_split, solve_smallt, solve_t0, EllipticCoefficients,
};
use tot::monge_ampere::Geometry;
use tot::{
    apply_duf, knothe_potentials, newton_correct, pushforward_residual, residual_f, rhs_daf,
    ContinuationOptions, CostMatrix, CostSchedule, DensityPair,
    PeriodicGrid, Steps, Trajectory,
};

use common::{pair, rng, smooth_field};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sup_rel(a: &tot::ScalarField, b: &tot::ScalarField) -> f64 {
    a.add_scaled(b, -1.0).sup_norm() / b.sup_norm().max(f64::MIN_POSITIVE)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Product densities: `u¹₀ + λ_t u²₀` solves the equation at every `t`.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let p = pair("product_pair", 128);
    let k = knothe_potentials(&p).unwrap();
    let mut worst: f64 = 0.0;
    for t in [1e-3, 1e-2, 0.1, 1.0] {
        let a = CostSchedule::Linear.matrix(t);
        let r = residual_f(&a, &k.combined(a.a22), &p).unwrap();
        worst = worst.max(r.sup_norm());
    }
    let el = start.elapsed();
    outcome(
        worst <= 1e-8 && el < Duration::from_secs(10),
        format!("max sup|F| = {worst:.2e} (≤ 1e-8), {:.2} s (< 10 s)", el.as_secs_f64()),
    )
}

/// Linearizations against central differences.
fn criterion_2() -> Outcome {
    let grid = PeriodicGrid::square(64).unwrap();
    let p = pair("standard_pair", 64);
    let mut r = rng(2);
    let h = 1e-5;
    let (mut worst_u, mut worst_a): (f64, f64) = (0.0, 0.0);
    for i in 0..20 {
        let t = 0.1 + 0.9 * (i as f64 / 19.0);
        let sched = CostSchedule::Linear;
        let a = sched.matrix(t);
        let u = smooth_field(grid, &mut r, 3, 1.0);
        let hess = Geometry::full(1.0, &u);
        let size = [&hess.h11, &hess.h12, &hess.h22a]
            .iter()
            .fold(0.0f64, |m, f| m.max(f.sup_norm()));
        let u = u.scale(0.3 * a.a22 / size);
        let v = smooth_field(grid, &mut r, 4, 1.0);
        let hv = Geometry::full(1.0, &v);
        let v = v.scale(1.0 / hv.h11.sup_norm().max(hv.h22a.sup_norm()));
        assert!(Geometry::full(a.a22, &u).margin() > 0.0);
        let fp = residual_f(&a, &u.add_scaled(&v, h), &p).unwrap();
        let fm = residual_f(&a, &u.add_scaled(&v, -h), &p).unwrap();
        let fd = fp.add_scaled(&fm, -1.0).scale(0.5 / h);
        worst_u = worst_u.max(sup_rel(&fd, &apply_duf(&a, &u, &p, &v).unwrap()));

        let fp = residual_f(&sched.matrix(t + h), &u, &p).unwrap();
        let fm = residual_f(&sched.matrix(t - h), &u, &p).unwrap();
        let fd = fp.add_scaled(&fm, -1.0).scale(-0.5 / h);
        worst_a = worst_a.max(sup_rel(&fd, &rhs_daf(&a, &u, &p).unwrap()));
    }
    outcome(
        worst_u <= 1e-7 && worst_a <= 1e-7,
        format!("D_uF rel err {worst_u:.2e}, D_AF rel err {worst_a:.2e} (≤ 1e-7, 20 draws)"),
    )
}

/// PCG convergence, symmetry and coercivity of `D_uF`.
fn criterion_3() -> Outcome {
    let n = 128;
    let grid = PeriodicGrid::square(n).unwrap();
    let p = pair("standard_pair", n);
    let k = knothe_potentials(&p).unwrap();
    let mut r = rng(3);
    let delta = p.g_poly().sampled_min(4 * n);
    let (mut worst_res, mut worst_its, mut worst_sym, mut worst_coer) = (0.0f64, 0usize, 0.0f64, f64::INFINITY);
    for lambda in [1.0, 0.3, 0.1, 0.03, 0.01] {
        let a = CostMatrix::new(lambda, lambda, 1.0);
        let u = k.combined(lambda);
        let q = smooth_field(grid, &mut r, 6, 1.0);
        let rep = solve_duf(&a, &u, &p, &q, 1e-10).unwrap();
        worst_res = worst_res.max(rep.relative_residual);
        worst_its = worst_its.max(rep.iterations);

        let c = EllipticCoefficients::new(&a, &u, &p).unwrap();
        let eps = Geometry::full(lambda, &u).margin() / lambda.max(1.0);
        for _ in 0..20 {
            let v = smooth_field(grid, &mut r, 8, 1.0);
            let w = smooth_field(grid, &mut r, 8, 1.0);
            let (a1, a2) = (w.dot(&c.apply(&v)), v.dot(&c.apply(&w)));
            worst_sym = worst_sym.max((a1 - a2).abs() / a1.abs().max(a2.abs()));
            let energy = -v.dot(&c.apply(&v));
            let grad = tot::linearized::gradient_energy(&v) * grid.len() as f64;
            worst_coer = worst_coer.min(energy / (delta * eps * grad));
        }
    }
    outcome(
        worst_res <= 1e-10 && worst_its <= 400 && worst_sym <= 1e-10 && worst_coer >= 1.0,
        format!(
            "rel residual {worst_res:.2e} in ≤ {worst_its} its; symmetry {worst_sym:.1e}; \
             coercivity ratio ≥ {worst_coer:.3} (need ≥ 1)"
        ),
    )
}

/// Degenerate solvers near `t = 0`.
fn criterion_4() -> Outcome {
    let n = 128;
    let grid = PeriodicGrid::square(n).unwrap();
    let p = pair("standard_pair", n);
    let k = knothe_potentials(&p).unwrap();
    let mut r = rng(4);
    let mut forward: f64 = 0.0;
    for _ in 0..5 {
        let q = smooth_field(grid, &mut r, 6, 1.0);
        let (v1, v2) = solve_t0(&k.u1, &k.u2, &p, &q).unwrap();
        let back = apply_t0(&k.u1, &k.u2, &p, &v1, &v2).unwrap();
        forward = forward.max(back.add_scaled(&q, -1.0).sup_norm());
    }
    let sched = CostSchedule::Linear;
    let q = smooth_field(grid, &mut r, 6, 1.0);
    let mut agree: f64 = 0.0;
    let mut paths = Vec::new();
    for t in [1e-4, 3e-4, 1e-3, 3e-3, 1e-2] {
        let s = solve_smallt(t, &sched, &k.u1, &k.u2, &p, &q, 1e-8).unwrap();
        // the combined unknown v¹ + λv² has a residual floor near ε(πn)²/(4π²λ)
        let (c1, c2, _) = solve_duf_split(t, &sched, &k.u1, &k.u2, &p, &q, 1e-8).unwrap();
        let scale = c2.sup_norm().max(c1.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        agree = agree.max(max_abs_diff(&c1, &s.v1).max(c2.add_scaled(&s.v2, -1.0).sup_norm()) / scale);
        paths.push(if s.fell_back { "pcg" } else { "gs" });
    }
    outcome(
        forward <= 1e-8 && agree <= 1e-6,
        format!(
            "solve_t0 forward err {forward:.2e} (≤ 1e-8); smallt vs split PCG {agree:.2e} (≤ 1e-6), paths {}",
            paths.join("/")
        ),
    )
}

/// Cold Newton at `A = I`.
fn criterion_5() -> Outcome {
    let p = pair("standard_pair", 128);
    let a = CostMatrix::identity();
    let cold = newton_correct(&a, &p.grid().zeros(), &p, 1e-10, 20).unwrap();
    let again = newton_correct(&a, &cold.solution, &p, 1e-10, 20).unwrap();
    outcome(
        cold.sup_residual <= 1e-10 && cold.iterations <= 12 && again.iterations == 0,
        format!(
            "sup|F| = {:.2e} in {} its (≤ 12); restart from solution: {} its",
            cold.sup_residual, cold.iterations, again.iterations
        ),
    )
}

fn trajectory(p: &DensityPair, steps: usize) -> Trajectory {
    let opts = ContinuationOptions {
        steps: Steps::Fixed(steps),
        ..Default::default()
    };
    tot::run(p, &CostSchedule::Linear, &opts).unwrap()
}

/// Residual and margin along the path; step-count independence.
fn criterion_6(t32: &Trajectory, t64: &Trajectory) -> Outcome {
    let all = t32.records.iter().chain(&t64.records);
    let worst = all.clone().map(|r| r.sup_residual).fold(0.0, f64::max);
    let margin = all.map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let diff = t32
        .last()
        .unwrap()
        .psi
        .add_scaled(&t64.last().unwrap().psi, -1.0)
        .sup_norm();
    outcome(
        worst <= 1e-9 && margin > 0.0 && diff <= 1e-7,
        format!("max sup|F| {worst:.2e} (≤ 1e-9), min margin {margin:.2e}, 32 vs 64 steps {diff:.2e} (≤ 1e-7)"),
    )
}

/// Continuation endpoint equals cold Newton; the compare command is fast.
fn criterion_7() -> Outcome {
    let mut cfg = common::config("standard_pair");
    let dir = tempfile::tempdir().unwrap();
    Overrides {
        grid: Some(128),
        out: Some(dir.path().to_path_buf()),
        ..Default::default()
    }
    .apply(&mut cfg)
    .unwrap();
    let start = Instant::now();
    let lines = execute(Command::Compare, &cfg).unwrap();
    let el = start.elapsed();
    let diff: f64 = lines
        .iter()
        .find_map(|l| l.strip_prefix("sup_diff="))
        .unwrap()
        .parse()
        .unwrap();
    outcome(
        diff <= 1e-8 && el < Duration::from_secs(120),
        format!("sup|ψ_cont − ψ_cold| = {diff:.2e} (≤ 1e-8), compare took {:.1} s (< 120 s)", el.as_secs_f64()),
    )
}

/// Distance to the Knothe map shrinks like `λ_t`.
fn criterion_8(t32: &Trajectory) -> Outcome {
    let recs = &t32.records;
    let monotone = recs
        .windows(2)
        .all(|w| w[0].l2_dist_to_knothe <= w[1].l2_dist_to_knothe + 1e-10);
    let ratios: Vec<f64> = recs
        .iter()
        .filter(|r| r.t <= 10.0 * t32.t0 * (1.0 + 1e-12))
        .map(|r| r.l2_dist_to_knothe / r.lambda)
        .collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    outcome(
        monotone && hi / lo < 3.0,
        format!(
            "monotone: {monotone}; dist/λ over last decade in [{lo:.5}, {hi:.5}], spread ×{:.4} (< 3)",
            hi / lo
        ),
    )
}

/// Fourier pushforward certification at 256².
fn criterion_9() -> Outcome {
    let p = pair("standard_pair", 256);
    let traj = trajectory(&p, 32);
    let last = traj.last().unwrap();
    let brenier = pushforward_residual(&Geometry::full(1.0, &last.psi).map(), &p, 8);
    let map = knothe_rearrangement(&p).unwrap();
    let _ = potentials_from_map(&map).unwrap();
    let knothe = pushforward_residual(&map.positions(), &p, 8);
    outcome(
        brenier <= 1e-7 && knothe <= 1e-6,
        format!("Brenier {brenier:.2e} (≤ 1e-7), Knothe {knothe:.2e} (≤ 1e-6), K = 8"),
    )
}

fn main() -> ExitCode {
    let p128 = pair("standard_pair", 128);
    let mut failed = 0;
    let mut report = |id: usize, name: &str, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("{tag} [{id}] {name}: {}", o.detail);
    };
    report(1, "product densities solve every A_t", criterion_1());
    report(2, "linearizations match finite differences", criterion_2());
    report(3, "D_uF solver, symmetry, coercivity", criterion_3());
    report(4, "t = 0 and small-t solvers", criterion_4());
    report(5, "cold Newton at A = I", criterion_5());
    let t32 = trajectory(&p128, 32);
    let t64 = trajectory(&p128, 64);
    report(6, "trajectory residuals and step independence", criterion_6(&t32, &t64));
    report(7, "continuation endpoint equals cold Newton", criterion_7());
    report(8, "distance to Knothe scales with λ_t", criterion_8(&t32));
    report(9, "pushforward certification at 256²", criterion_9());
    if failed == 0 {
        println!("acceptance: all 9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
