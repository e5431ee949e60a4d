// Optimal transport between two densities on the circle.

use tot::transport1d::{monotone_circle_map, potential_from_map, CircleDensity};
use tot::trig::{CircleMode, TrigPoly1};

pub struct CircleSummary {
    pub theta: f64,
    pub sup_displacement: f64,
    pub pushforward_error: f64,
    pub min_convexity: f64,
}

pub fn run_example() -> tot::Result<CircleSummary> {
    let m = 256;
    let f = CircleDensity::from_poly(TrigPoly1::new(1.0, [CircleMode::new(1, 0.4, 0.0)]), m)?;
    let g = CircleDensity::from_poly(
        TrigPoly1::new(1.0, [CircleMode::new(1, 0.3, 2.0), CircleMode::new(2, 0.1, 0.0)]),
        m,
    )?;
    let map = monotone_circle_map(&f, &g)?;
    let psi = potential_from_map(&map);
    let psi2 = tot::grid::derivative_1d(&psi, 2);
    Ok(CircleSummary {
        theta: map.theta(),
        sup_displacement: map.sup_displacement(),
        pushforward_error: map.pushforward_error(8),
        min_convexity: psi2.iter().map(|v| 1.0 - v).fold(f64::INFINITY, f64::min),
    })
}

fn main() -> tot::Result<()> {
    let s = run_example()?;
    println!("shift θ*            {:+.12}", s.theta);
    println!("sup |x − T(x)|      {:.6}", s.sup_displacement);
    println!("pushforward error   {:.3e}", s.pushforward_error);
    println!("min 1 − ψ″          {:.6}", s.min_convexity);
    Ok(())
}
