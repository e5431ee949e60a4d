//! The four front-end commands. Each writes its files into the configured
//! output directory and returns the diagnostic lines it also stores in
//! `diagnostics.txt`.

use std::fs;
use std::path::Path;

use crate::config::RunConfig;
use crate::continuation::{newton_correct, run_from_knothe, Trajectory};
use crate::error::Result;
use crate::field_io::{fmt17, write_binary, write_csv};
use crate::grid::ScalarField;
use crate::knothe::{fiber_pushforward_error, knothe_rearrangement, potentials_from_map};
use crate::monge_ampere::{pushforward_residual, CostMatrix, Geometry};

/// Frequency cutoff for the certification residuals written by the commands.
pub const CERTIFY_K: i32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Knothe,
    Brenier,
    Continue,
    Compare,
}

pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Vec<String>> {
    fs::create_dir_all(&cfg.output.dir)?;
    let lines = match cmd {
        Command::Knothe => cmd_knothe(cfg)?,
        Command::Brenier => cmd_brenier(cfg)?,
        Command::Continue => cmd_continue(cfg)?,
        Command::Compare => cmd_compare(cfg)?,
    };
    let mut text = lines.join("\n");
    text.push('\n');
    fs::write(cfg.output.dir.join("diagnostics.txt"), text)?;
    Ok(lines)
}

fn emit(cfg: &RunConfig, name: &str, field: &ScalarField) -> Result<()> {
    let dir: &Path = &cfg.output.dir;
    if cfg.output.binary {
        write_binary(dir.join(format!("{name}.bin")), field)?;
    }
    if cfg.output.csv {
        write_csv(dir.join(format!("{name}.csv")), field)?;
    }
    Ok(())
}

fn kv(key: &str, v: f64) -> String {
    format!("{key}={}", fmt17(v))
}

pub fn cmd_knothe(cfg: &RunConfig) -> Result<Vec<String>> {
    let pair = cfg.pair()?;
    let map = knothe_rearrangement(&pair)?;
    let pots = potentials_from_map(&map)?;
    let disp = map.displacement();
    emit(cfg, "knothe_r1", &disp.c1)?;
    emit(cfg, "knothe_r2", &disp.c2)?;
    let grid = pair.grid();
    emit(cfg, "u1_0", &grid.broadcast_x1(&pots.u1))?;
    emit(cfg, "u2_0", &pots.u2)?;
    // spread of u² along x1, zero for product densities
    let spread = (0..grid.n2())
        .map(|j| {
            let col = (0..grid.n1()).map(|i| pots.u2.at(i, j));
            let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            hi - lo
        })
        .fold(0.0, f64::max);
    Ok(vec![
        kv("fiber_pushforward_error", fiber_pushforward_error(&map, CERTIFY_K as u32)),
        kv("pushforward_residual", pushforward_residual(&map.positions(), &pair, CERTIFY_K)),
        kv("u2_x1_spread", spread),
        kv("min_one_minus_u1_11", pots.min_one_minus_u1_11()),
        kv("min_one_minus_u2_22", pots.min_one_minus_u2_22()),
    ])
}

struct BrenierSolve {
    psi: ScalarField,
    lines: Vec<String>,
}

fn brenier(cfg: &RunConfig) -> Result<BrenierSolve> {
    let pair = cfg.pair()?;
    let opts = &cfg.continuation;
    let a = CostMatrix::identity();
    let rep = newton_correct(&a, &pair.grid().zeros(), &pair, opts.newton_tol, opts.max_newton)?;
    let geo = Geometry::full(1.0, &rep.solution);
    emit(cfg, "psi", &rep.solution)?;
    emit(cfg, "brenier_d1", &geo.d1)?;
    emit(cfg, "brenier_d2", &geo.d2)?;
    emit(cfg, "residual", &geo.residual(&pair))?;
    let lines = vec![
        format!("newton_iters={}", rep.iterations),
        kv("sup_F", rep.sup_residual),
        kv("margin", geo.margin()),
        kv("pushforward_residual", pushforward_residual(&geo.map(), &pair, CERTIFY_K)),
    ];
    Ok(BrenierSolve {
        psi: rep.solution,
        lines,
    })
}

pub fn cmd_brenier(cfg: &RunConfig) -> Result<Vec<String>> {
    Ok(brenier(cfg)?.lines)
}

fn continuation(cfg: &RunConfig) -> Result<(Trajectory, Vec<String>)> {
    let pair = cfg.pair()?;
    let map = knothe_rearrangement(&pair)?;
    let pots = potentials_from_map(&map)?;
    let traj = run_from_knothe(&pair, &pots, &cfg.schedule, &cfg.continuation)?;
    traj.write_summary(cfg.output.dir.join("trajectory.csv"))?;
    let last = traj.last().expect("trajectory has its initial record");
    emit(cfg, "psi_final", &last.psi)?;
    emit(cfg, "psi1_final", &pair.grid().broadcast_x1(&last.psi1))?;
    emit(cfg, "psi2_final", &last.psi2)?;
    if cfg.output.per_step {
        for (k, r) in traj.records.iter().enumerate() {
            write_binary(cfg.output.dir.join(format!("step_{k:04}_psi.bin")), &r.psi)?;
        }
    }
    let final_map = Geometry::full(last.lambda, &last.psi).map();
    let lines = vec![
        format!("records={}", traj.records.len()),
        kv("t0", traj.t0),
        kv("t_final", last.t),
        kv("max_sup_F", traj.records.iter().map(|r| r.sup_residual).fold(0.0, f64::max)),
        kv("min_margin", traj.records.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)),
        kv("final_pushforward_residual", pushforward_residual(&final_map, &pair, CERTIFY_K)),
        format!("newton_iters_total={}", traj.records.iter().map(|r| r.newton_iters).sum::<usize>()),
    ];
    Ok((traj, lines))
}

pub fn cmd_continue(cfg: &RunConfig) -> Result<Vec<String>> {
    Ok(continuation(cfg)?.1)
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<Vec<String>> {
    let cold = brenier(cfg)?;
    let (traj, mut lines) = continuation(cfg)?;
    let last = traj.last().expect("trajectory has its initial record");
    let diff = last.psi.add_scaled(&cold.psi, -1.0);
    let l2 = (diff.dot(&diff) / diff.grid().len() as f64).sqrt();
    let mut table = String::from("t,lambda,l2_dist_to_knothe,ratio_to_lambda\n");
    for r in &traj.records {
        table.push_str(&format!(
            "{},{},{},{}\n",
            fmt17(r.t),
            fmt17(r.lambda),
            fmt17(r.l2_dist_to_knothe),
            fmt17(r.l2_dist_to_knothe / r.lambda)
        ));
    }
    fs::write(cfg.output.dir.join("compare.csv"), table)?;
    lines.extend(cold.lines.into_iter().map(|l| format!("cold_{l}")));
    lines.push(kv("sup_diff", diff.sup_norm()));
    lines.push(kv("l2_diff", l2));
    Ok(lines)
}
