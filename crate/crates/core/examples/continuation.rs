// Follow the potential from the Knothe limit to the Brenier map.

use tot::{run, ContinuationOptions, CostSchedule, CosineMode, DensityPair, PeriodicGrid, Trajectory, TrigPoly2};

pub fn run_example() -> tot::Result<Trajectory> {
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
        steps: tot::Steps::Fixed(16),
        ..Default::default()
    };
    run(&pair, &CostSchedule::Linear, &opts)
}

fn main() -> tot::Result<()> {
    let traj = run_example()?;
    println!("{:>12} {:>10} {:>10} {:>12} {:>6}", "t", "sup|F|", "margin", "dist(T,R)", "newton");
    for r in &traj.records {
        println!(
            "{:12.4e} {:10.2e} {:10.4} {:12.4e} {:6}",
            r.t, r.sup_residual, r.margin, r.l2_dist_to_knothe, r.newton_iters
        );
    }
    Ok(())
}
