// Brenier potential of the standard pair by damped Newton from zero.

use tot::monge_ampere::Geometry;
use tot::{newton_correct, pushforward_residual, CostMatrix, CosineMode, DensityPair, PeriodicGrid, TrigPoly2};

pub struct BrenierSummary {
    pub iterations: usize,
    pub sup_residual: f64,
    pub margin: f64,
    pub pushforward_residual: f64,
}

pub fn run_example() -> tot::Result<BrenierSummary> {
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
    let rep = newton_correct(&CostMatrix::identity(), &pair.grid().zeros(), &pair, 1e-10, 20)?;
    let geo = Geometry::full(1.0, &rep.solution);
    Ok(BrenierSummary {
        iterations: rep.iterations,
        sup_residual: rep.sup_residual,
        margin: geo.margin(),
        pushforward_residual: pushforward_residual(&geo.map(), &pair, 8),
    })
}

fn main() -> tot::Result<()> {
    let s = run_example()?;
    println!("Newton iterations        {}", s.iterations);
    println!("sup |F|                  {:.3e}", s.sup_residual);
    println!("c-concavity margin       {:.4}", s.margin);
    println!("pushforward residual     {:.3e}", s.pushforward_residual);
    Ok(())
}
