// Knothe–Rosenblatt rearrangement of the standard pair and its potentials.

use tot::knothe::{fiber_pushforward_error, knothe_rearrangement, potentials_from_map};
use tot::{pushforward_residual, CosineMode, DensityPair, PeriodicGrid, TrigPoly2};

pub struct KnotheSummary {
    pub fiber_error: f64,
    pub pushforward_residual: f64,
    pub epsilon: f64,
}

pub fn standard_pair(n: usize) -> tot::Result<DensityPair> {
    let f = TrigPoly2::normalized_density([
        CosineMode::new(1, 0, 0.3, 0.0),
        CosineMode::new(1, 1, 0.15, 0.0),
    ]);
    let g = TrigPoly2::normalized_density([
        CosineMode::new(0, 1, 0.25, 0.0),
        CosineMode::new(1, 1, 0.05, 0.0),
        CosineMode::new(1, -1, 0.05, 0.0),
    ]);
    DensityPair::new(PeriodicGrid::square(n)?, f, g)
}

pub fn run_example() -> tot::Result<KnotheSummary> {
    let pair = standard_pair(64)?;
    let map = knothe_rearrangement(&pair)?;
    let pots = potentials_from_map(&map)?;
    Ok(KnotheSummary {
        fiber_error: fiber_pushforward_error(&map, 8),
        pushforward_residual: pushforward_residual(&map.positions(), &pair, 8),
        epsilon: pots.epsilon(),
    })
}

fn main() -> tot::Result<()> {
    let s = run_example()?;
    println!("1D pushforward error (marginal + fibers)  {:.3e}", s.fiber_error);
    println!("2D pushforward residual, K = 8            {:.3e}", s.pushforward_residual);
    println!("admissibility ε                            {:.4}", s.epsilon);
    Ok(())
}
