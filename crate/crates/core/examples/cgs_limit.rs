// As t → 0 the optimal maps approach the Knothe rearrangement at rate λ_t.

use tot::{run, ContinuationOptions, CostSchedule, CosineMode, DensityPair, PeriodicGrid, TrigPoly2};

/// `(t, ‖T_t − R‖ / λ_t)` along the trajectory.
pub fn run_example() -> tot::Result<Vec<(f64, f64)>> {
    let f = TrigPoly2::normalized_density([
        CosineMode::new(1, 0, 0.3, 0.0),
        CosineMode::new(1, 1, 0.15, 0.0),
    ]);
    let g = TrigPoly2::normalized_density([
        CosineMode::new(0, 1, 0.25, 0.0),
        CosineMode::new(1, 1, 0.05, 0.0),
        CosineMode::new(1, -1, 0.05, 0.0),
    ]);
    let pair = DensityPair::new(PeriodicGrid::square(64)?, f, g)?;
    let opts = ContinuationOptions {
        t1: 0.1,
        steps: tot::Steps::Fixed(12),
        ..Default::default()
    };
    let traj = run(&pair, &CostSchedule::Linear, &opts)?;
    Ok(traj
        .records
        .iter()
        .map(|r| (r.t, r.l2_dist_to_knothe / r.lambda))
        .collect())
}

fn main() -> tot::Result<()> {
    for (t, ratio) in run_example()? {
        println!("t = {t:10.4e}   dist / λ = {ratio:.6}");
    }
    Ok(())
}
