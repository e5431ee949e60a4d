// The three linear solvers on one right-hand side near t = 0.

use tot::knothe_potentials;
use tot::linearized::{solve_duf, solve_smallt, split_solution};
use tot::{CostSchedule, CosineMode, DensityPair, PeriodicGrid, TrigPoly2};

pub struct SolverSummary {
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub smallt_sweeps: usize,
    pub smallt_fell_back: bool,
    /// `sup |v¹_cg − v¹_split|` and `sup |v²_cg − v²_split|`.
    pub agreement: (f64, f64),
}

pub fn run_example() -> tot::Result<SolverSummary> {
    let f = TrigPoly2::normalized_density([
        CosineMode::new(1, 0, 0.3, 0.0),
        CosineMode::new(1, 1, 0.15, 0.0),
    ]);
    let g = TrigPoly2::normalized_density([CosineMode::new(0, 1, 0.25, 0.0)]);
    let pair = DensityPair::new(PeriodicGrid::square(64)?, f, g)?;
    let k = knothe_potentials(&pair)?;
    let t = 1e-3;
    let schedule = CostSchedule::Linear;
    let psi = k.combined(schedule.lambda(t));
    let q = pair.grid().sample(|x, y| {
        (std::f64::consts::TAU * (x + 2.0 * y)).sin() + 0.5 * (std::f64::consts::TAU * x).cos()
    });
    let cg = solve_duf(&schedule.matrix(t), &psi, &pair, &q, 1e-10)?;
    let (c1, c2) = split_solution(&cg.solution, schedule.lambda(t));
    let st = solve_smallt(t, &schedule, &k.u1, &k.u2, &pair, &q, 1e-10)?;
    let d1 = c1.iter().zip(&st.v1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let d2 = c2.add_scaled(&st.v2, -1.0).sup_norm();
    Ok(SolverSummary {
        cg_iterations: cg.iterations,
        cg_residual: cg.relative_residual,
        smallt_sweeps: st.sweeps,
        smallt_fell_back: st.fell_back,
        agreement: (d1, d2),
    })
}

fn main() -> tot::Result<()> {
    let s = run_example()?;
    println!("PCG: {} iterations, relative residual {:.2e}", s.cg_iterations, s.cg_residual);
    println!(
        "block Gauss–Seidel: {} sweeps{}",
        s.smallt_sweeps,
        if s.smallt_fell_back { " (fell back to PCG)" } else { "" }
    );
    println!("agreement: v¹ {:.2e}, v² {:.2e}", s.agreement.0, s.agreement.1);
    Ok(())
}
