//! Continuation of the Kantorovich potential from the Knothe rearrangement
//! (`t → 0`) to the Brenier map (`t = 1`), and the standalone Newton solver.
//!
//! Along the path the state is kept in the split form
//! `ψ_t = ψ¹_t(x1) + λ_t ψ²_t(x1, x2)` with `ψ²_t` fiberwise zero-mean. The
//! residual is evaluated from the split pair, so second derivatives of `ψ²`
//! never pass through a division by `λ_t`.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field_io::fmt17;
use crate::grid::{without_nyquist_1d, ScalarField, VectorField};
use crate::knothe::{knothe_potentials, l2_map_distance, KnothePotentials};
use crate::linearized::{
    default_max_iter, rhs_daf, solve_duf, solve_elliptic, solve_split, split_solution,
    EllipticCoefficients, SplitCoefficients, DEFAULT_TOL,
};
use crate::monge_ampere::{
    check_positive_cost, pushforward_residual, CostMatrix, CostSchedule, DensityPair, Geometry,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Predictor {
    Euler,
    #[default]
    Heun,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Grading {
    /// `t_k = t0 (t1/t0)^{k/steps}`.
    #[default]
    Geometric,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Steps {
    Fixed(usize),
    Adaptive,
}

#[derive(Clone, Debug)]
pub struct ContinuationOptions {
    pub t0: f64,
    pub t1: f64,
    pub steps: Steps,
    pub grading: Grading,
    pub predictor: Predictor,
    /// Target for `sup|F|` at every accepted state.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Below this `t` the linear solves use the split (`U + V/λ`) solver.
    pub t_switch: f64,
    /// Tightest relative tolerance asked of the inner linear solves. Newton
    /// loosens it while the residual is large.
    pub linear_tol: f64,
    /// Frequency cutoff of the recorded pushforward residual.
    pub pushforward_k: i32,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            t0: 1e-3,
            t1: 1.0,
            steps: Steps::Fixed(32),
            grading: Grading::Geometric,
            predictor: Predictor::Heun,
            newton_tol: 1e-10,
            max_newton: 20,
            t_switch: 1e-2,
            linear_tol: DEFAULT_TOL,
            pushforward_k: 4,
        }
    }
}

impl ContinuationOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.t0 > 0.0 && self.t0 < self.t1) {
            return bad(format!("need 0 < t0 < t1 (got t0 = {}, t1 = {})", self.t0, self.t1));
        }
        if let Steps::Fixed(0) = self.steps {
            return bad("steps must be positive".into());
        }
        if !(self.newton_tol > 0.0) || self.max_newton == 0 {
            return bad("newton_tol and max_newton must be positive".into());
        }
        Ok(())
    }

    /// Grading ratio `t_{k+1}/t_k` of a fixed geometric schedule.
    pub fn ratio(&self) -> Option<f64> {
        match (self.steps, self.grading) {
            (Steps::Fixed(n), Grading::Geometric) => Some((self.t1 / self.t0).powf(1.0 / n as f64)),
            _ => None,
        }
    }

    fn schedule_points(&self, n: usize) -> Vec<f64> {
        let mut pts: Vec<f64> = (1..=n)
            .map(|k| {
                let s = k as f64 / n as f64;
                match self.grading {
                    Grading::Geometric => self.t0 * (self.t1 / self.t0).powf(s),
                    Grading::Uniform => self.t0 + (self.t1 - self.t0) * s,
                }
            })
            .collect();
        *pts.last_mut().unwrap() = self.t1;
        pts
    }
}

/// A point on the path in split form.
#[derive(Clone, Debug)]
pub struct SplitPotential {
    pub t: f64,
    pub lambda: f64,
    pub u1: Vec<f64>,
    pub u2: ScalarField,
}

impl SplitPotential {
    pub fn geometry(&self) -> Geometry {
        Geometry::split(self.lambda, &self.u1, &self.u2)
    }

    /// `ψ = u¹ + λ u²` on the grid.
    pub fn combined(&self) -> ScalarField {
        self.u2
            .grid()
            .broadcast_x1(&self.u1)
            .add_scaled(&self.u2, self.lambda)
            .with_zero_mean_flag(true)
    }

    pub fn residual(&self, pair: &DensityPair) -> ScalarField {
        self.geometry().residual(pair)
    }
}

/// `ψ¹ = ∫ψ dx2` (shifted to zero mean) and `ψ² = (ψ − ∫ψ dx2)/λ_t`.
pub fn decompose(t: f64, schedule: &CostSchedule, psi: &ScalarField) -> Result<(Vec<f64>, ScalarField)> {
    if t == 0.0 {
        return Err(Error::InvalidArgument(
            "decompose is undefined at t = 0; the t = 0 state is the Knothe pair".into(),
        ));
    }
    let lambda = schedule.lambda(t);
    let (mut a, b) = split_solution(psi, lambda);
    let m = a.iter().sum::<f64>() / a.len() as f64;
    a.iter_mut().for_each(|v| *v -= m);
    Ok((a, b))
}

/// One recorded state of a trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub lambda: f64,
    pub psi: ScalarField,
    pub psi1: Vec<f64>,
    pub psi2: ScalarField,
    pub margin: f64,
    pub sup_residual: f64,
    pub pushforward_residual: f64,
    pub l2_dist_to_knothe: f64,
    pub newton_iters: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    /// `t0` actually used after any initialization fallback.
    pub t0: f64,
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trajectory with {} records from t = {:.3e}", self.records.len(), self.t0)
    }
}

impl Trajectory {
    pub fn last(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("t,sup_F,margin,pushforward_residual,l2_dist_to_knothe,newton_iters\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt17(r.t),
                fmt17(r.sup_residual),
                fmt17(r.margin),
                fmt17(r.pushforward_residual),
                fmt17(r.l2_dist_to_knothe),
                r.newton_iters
            ));
        }
        s
    }

    pub fn write_summary(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.summary_csv())?;
        Ok(())
    }
}

/// Outcome of a Newton solve.
#[derive(Clone, Debug)]
pub struct NewtonReport {
    pub solution: ScalarField,
    pub iterations: usize,
    pub sup_residual: f64,
}

const MIN_STEP: f64 = 1.0 / (1u64 << 20) as f64;

/// Velocities only feed the predictor.
const VELOCITY_TOL: f64 = 1e-8;

/// Relative linear tolerance for a Newton step at residual `sup`: small enough
/// that the linear error stays below both the quadratic term and `newton_tol`.
fn forcing(sup: f64, newton_tol: f64, linear_tol: f64) -> f64 {
    let eta = (0.1 * sup).max(0.1 * newton_tol / sup).min(1e-2);
    eta.max(linear_tol)
}

/// Damped Newton for `F(A, ψ) = 0`: `δ` solves `D_uF δ = F` on zero-mean
/// functions and `ψ ← ψ − s δ` with `s` halved until `sup|F|` decreases and
/// the c-concavity margin stays positive.
pub fn newton_correct(
    a: &CostMatrix,
    psi_init: &ScalarField,
    pair: &DensityPair,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonReport> {
    check_positive_cost(a)?;
    let geo = Geometry::full(a.a22, psi_init);
    if geo.margin() > 0.0 {
        let sup = geo.residual(pair).sup_norm();
        if sup <= tol {
            return Ok(NewtonReport {
                solution: psi_init.clone(),
                iterations: 0,
                sup_residual: sup,
            });
        }
    }
    let mut psi = psi_init.project_zero_mean().without_nyquist();
    let mut geo = Geometry::full(a.a22, &psi);
    if !(geo.margin() > 0.0) {
        return Err(Error::NotCConcave { margin: geo.margin() });
    }
    let mut res = geo.residual(pair);
    let mut sup = res.sup_norm();
    let mut it = 0;
    while sup > tol {
        if it >= max_iter {
            return Err(newton_error(it, sup, "iteration limit reached"));
        }
        let c = EllipticCoefficients::from_geometry(&geo, pair);
        let eta = forcing(sup, tol, DEFAULT_TOL);
        let delta = solve_elliptic(&c, &res, eta, default_max_iter(psi.grid()), None)?
            .solution
            .without_nyquist();
        let mut s = 1.0;
        loop {
            let trial = psi.add_scaled(&delta, -s);
            let g = Geometry::full(a.a22, &trial);
            if g.margin() > 0.0 {
                let r = g.residual(pair);
                let rs = r.sup_norm();
                if rs < sup {
                    psi = trial;
                    geo = g;
                    res = r;
                    sup = rs;
                    break;
                }
            }
            s *= 0.5;
            if s < MIN_STEP {
                return Err(newton_error(it, sup, "line search stalled"));
            }
        }
        it += 1;
    }
    Ok(NewtonReport {
        solution: psi.with_zero_mean_flag(true),
        iterations: it,
        sup_residual: sup,
    })
}

fn newton_error(iterations: usize, sup_residual: f64, reason: &str) -> Error {
    Error::Newton {
        iterations,
        sup_residual,
        reason: reason.into(),
    }
}

/// Solve `D_uF v = q` at a split state and return `v` in split form.
fn solve_at(
    state: &SplitPotential,
    geo: &Geometry,
    pair: &DensityPair,
    q: &ScalarField,
    tol: f64,
    use_split_solver: bool,
) -> Result<(Vec<f64>, ScalarField)> {
    let sc = SplitCoefficients::from_geometry(geo, pair);
    let (v1, v2) = if use_split_solver {
        let s = solve_split(&sc, q, tol)?;
        (s.v1, s.v2)
    } else {
        let rep = solve_elliptic(&sc.recombine(), q, tol, default_max_iter(q.grid()), None)?;
        split_solution(&rep.solution, state.lambda)
    };
    Ok((without_nyquist_1d(&v1), v2.without_nyquist()))
}

fn admissible(geo: &Geometry) -> bool {
    geo.margin() > 0.0 && geo.min_one_minus_h11() > 0.0
}

/// Newton on the split pair at fixed `t`.
pub fn newton_split(
    state: &SplitPotential,
    pair: &DensityPair,
    opts: &ContinuationOptions,
) -> Result<(SplitPotential, usize, f64)> {
    let mut cur = state.clone();
    let mut geo = cur.geometry();
    if !admissible(&geo) {
        return Err(Error::NotCConcave { margin: geo.margin() });
    }
    let use_split = cur.t <= opts.t_switch;
    let mut res = geo.residual(pair);
    let mut sup = res.sup_norm();
    let mut it = 0;
    while sup > opts.newton_tol {
        if it >= opts.max_newton {
            return Err(newton_error(it, sup, "iteration limit reached"));
        }
        let eta = forcing(sup, opts.newton_tol, opts.linear_tol);
        let (d1, d2) = solve_at(&cur, &geo, pair, &res, eta, use_split)?;
        let mut s = 1.0;
        loop {
            let trial = SplitPotential {
                u1: cur.u1.iter().zip(&d1).map(|(u, d)| u - s * d).collect(),
                u2: cur.u2.add_scaled(&d2, -s),
                ..cur.clone()
            };
            let g = trial.geometry();
            if admissible(&g) {
                let r = g.residual(pair);
                let rs = r.sup_norm();
                if rs < sup {
                    cur = trial;
                    geo = g;
                    res = r;
                    sup = rs;
                    break;
                }
            }
            s *= 0.5;
            if s < MIN_STEP {
                return Err(newton_error(it, sup, "line search stalled"));
            }
        }
        it += 1;
    }
    Ok((cur, it, sup))
}

/// `(u̇¹, u̇²)` along the path at a split state.
///
/// With `ψ̇ = λ̇ u² + w`, the velocity equation becomes
/// `D_uF w = −λ̇ Div(B (∂1u², 0))`, which has no `1/λ` factor.
pub fn velocity_split(
    state: &SplitPotential,
    pair: &DensityPair,
    schedule: &CostSchedule,
    opts: &ContinuationOptions,
) -> Result<(Vec<f64>, ScalarField)> {
    let geo = state.geometry();
    if !admissible(&geo) {
        return Err(Error::NotCConcave { margin: geo.margin() });
    }
    let ldot = schedule.lambda_dot(state.t);
    let d1u2 = state.u2.derivative(crate::grid::Axis::X1, 1);
    let b = EllipticCoefficients::from_geometry(&geo, pair);
    let q = b
        .apply_to_gradient(&d1u2, &state.u2.grid().zeros())
        .scale(-ldot);
    let tol = opts.linear_tol.max(VELOCITY_TOL);
    solve_at(state, &geo, pair, &q, tol, state.t <= opts.t_switch)
}

/// `ψ̇_t` for a plain potential: `solve_DuF(A_t, ψ, rhs_DAF)` above `t_switch`,
/// the split assembly below.
pub fn velocity(
    t: f64,
    psi: &ScalarField,
    pair: &DensityPair,
    schedule: &CostSchedule,
    opts: &ContinuationOptions,
) -> Result<ScalarField> {
    let a = schedule.matrix(t);
    if t > opts.t_switch {
        let q = rhs_daf(&a, psi, pair)?;
        let tol = opts.linear_tol.max(VELOCITY_TOL);
        return Ok(solve_duf(&a, psi, pair, &q, tol)?.solution.without_nyquist());
    }
    let (u1, u2) = decompose(t, schedule, psi)?;
    let state = SplitPotential {
        t,
        lambda: a.a22,
        u1,
        u2,
    };
    let (w1, w2) = velocity_split(&state, pair, schedule, opts)?;
    Ok(state
        .u2
        .grid()
        .broadcast_x1(&w1)
        .add_scaled(&w2, a.a22)
        .add_scaled(&state.u2, a.a22dot)
        .project_zero_mean())
}

#[derive(Clone, Debug)]
pub struct InitReport {
    pub state: SplitPotential,
    pub t0: f64,
    pub newton_iters: usize,
    pub sup_residual: f64,
}

/// Newton at `t0` from the predictor `u¹₀ + λ_{t0} u²₀`; on failure `t0` is
/// halved, at most 8 times.
pub fn init_from_knothe(
    pair: &DensityPair,
    knothe: &KnothePotentials,
    schedule: &CostSchedule,
    opts: &ContinuationOptions,
) -> Result<InitReport> {
    let mut t0 = opts.t0;
    let mut last = String::new();
    for _ in 0..=8 {
        let state = SplitPotential {
            t: t0,
            lambda: schedule.lambda(t0),
            u1: without_nyquist_1d(&knothe.u1),
            u2: knothe.u2.without_nyquist(),
        };
        match newton_split(&state, pair, opts) {
            Ok((state, newton_iters, sup_residual)) => {
                return Ok(InitReport {
                    state,
                    t0,
                    newton_iters,
                    sup_residual,
                })
            }
            Err(e) => last = e.to_string(),
        }
        t0 *= 0.5;
    }
    Err(Error::Initialization { t0: opts.t0, reason: last })
}

struct Recorder<'a> {
    pair: &'a DensityPair,
    knothe_map: VectorField,
    k: i32,
}

impl Recorder<'_> {
    fn record(&self, s: &SplitPotential, newton_iters: usize, sup: f64) -> TrajectoryRecord {
        let geo = s.geometry();
        let map = geo.map();
        TrajectoryRecord {
            t: s.t,
            lambda: s.lambda,
            psi: s.combined(),
            psi1: s.u1.clone(),
            psi2: s.u2.clone(),
            margin: geo.margin(),
            sup_residual: sup,
            pushforward_residual: pushforward_residual(&map, self.pair, self.k),
            l2_dist_to_knothe: l2_map_distance(&map, &self.knothe_map, self.pair.f()),
            newton_iters,
        }
    }
}

/// Predictor–corrector continuation from `t0` to `t1`.
pub fn run(pair: &DensityPair, schedule: &CostSchedule, opts: &ContinuationOptions) -> Result<Trajectory> {
    opts.validate()?;
    let knothe = knothe_potentials(pair)?;
    run_from_knothe(pair, &knothe, schedule, opts)
}

pub fn run_from_knothe(
    pair: &DensityPair,
    knothe: &KnothePotentials,
    schedule: &CostSchedule,
    opts: &ContinuationOptions,
) -> Result<Trajectory> {
    opts.validate()?;
    let init = init_from_knothe(pair, knothe, schedule, opts)?;
    let recorder = Recorder {
        pair,
        knothe_map: Geometry::split(0.0, &knothe.u1, &knothe.u2).map(),
        k: opts.pushforward_k,
    };
    let mut traj = Trajectory {
        records: vec![recorder.record(&init.state, init.newton_iters, init.sup_residual)],
        t0: init.t0,
    };
    let mut state = init.state;
    let stepper = Stepper { pair, schedule, opts };

    match opts.steps {
        Steps::Fixed(n) => {
            let mut points = opts.schedule_points(n);
            if init.t0 < opts.t0 {
                // initialization fell back below t0: bridge to the first point
                points.insert(0, opts.t0);
            }
            for target in points {
                reach(&stepper, &recorder, &mut state, target, &mut traj)?;
            }
        }
        Steps::Adaptive => {
            let geometric = opts.grading == Grading::Geometric;
            let to_param = |t: f64| if geometric { t.ln() } else { t };
            let from_param = |s: f64| if geometric { s.exp() } else { s };
            let s1 = to_param(opts.t1);
            let mut h = (s1 - to_param(state.t)) / 32.0;
            let mut easy = 0;
            while state.t < opts.t1 {
                let s_next = (to_param(state.t) + h).min(s1);
                let t_next = if s_next >= s1 { opts.t1 } else { from_param(s_next) };
                match stepper.step(&state, t_next) {
                    Some((next, iters, sup)) => {
                        traj.records.push(recorder.record(&next, iters, sup));
                        state = next;
                        if iters <= 3 {
                            easy += 1;
                            if easy == 3 {
                                h *= 2.0;
                                easy = 0;
                            }
                        } else {
                            easy = 0;
                        }
                    }
                    None => {
                        h *= 0.5;
                        easy = 0;
                        let dt = from_param(to_param(state.t) + h) - state.t;
                        if dt < 1e-8 {
                            return Err(Error::StepCollapse {
                                t: state.t,
                                dt,
                                partial: Box::new(traj),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(traj)
}

/// Advance to `target`, bisecting the interval on rejection.
fn reach(
    stepper: &Stepper<'_>,
    recorder: &Recorder<'_>,
    state: &mut SplitPotential,
    target: f64,
    traj: &mut Trajectory,
) -> Result<()> {
    let mut goals = vec![target];
    while let Some(&goal) = goals.last() {
        match stepper.step(state, goal) {
            Some((next, iters, sup)) => {
                traj.records.push(recorder.record(&next, iters, sup));
                *state = next;
                goals.pop();
            }
            None => {
                let mid = match stepper.opts.grading {
                    Grading::Geometric => (state.t * goal).sqrt(),
                    Grading::Uniform => 0.5 * (state.t + goal),
                };
                let dt = mid - state.t;
                if dt < 1e-8 {
                    return Err(Error::StepCollapse {
                        t: state.t,
                        dt,
                        partial: Box::new(traj.clone()),
                    });
                }
                goals.push(mid);
            }
        }
    }
    Ok(())
}

struct Stepper<'a> {
    pair: &'a DensityPair,
    schedule: &'a CostSchedule,
    opts: &'a ContinuationOptions,
}

impl Stepper<'_> {
    /// One predictor–corrector step; `None` means rejected.
    fn step(&self, s: &SplitPotential, t_next: f64) -> Option<(SplitPotential, usize, f64)> {
        let dt = t_next - s.t;
        let advance = |from: &SplitPotential, w: &(Vec<f64>, ScalarField), h: f64| SplitPotential {
            t: t_next,
            lambda: self.schedule.lambda(t_next),
            u1: from.u1.iter().zip(&w.0).map(|(u, d)| u + h * d).collect(),
            u2: from.u2.add_scaled(&w.1, h),
        };
        let v0 = velocity_split(s, self.pair, self.schedule, self.opts).ok()?;
        let euler = advance(s, &v0, dt);
        let predicted = match self.opts.predictor {
            Predictor::Euler => euler,
            Predictor::Heun => match velocity_split(&euler, self.pair, self.schedule, self.opts) {
                Ok(v1) => {
                    let avg = (
                        v0.0.iter().zip(&v1.0).map(|(a, b)| 0.5 * (a + b)).collect(),
                        v0.1.add_scaled(&v1.1, 1.0).scale(0.5),
                    );
                    advance(s, &avg, dt)
                }
                Err(_) => euler,
            },
        };
        let (next, iters, sup) = newton_split(&predicted, self.pair, self.opts).ok()?;
        if next.geometry().margin() > 0.0 {
            Some((next, iters, sup))
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::trig::{CosineMode, TrigPoly2};
    use std::f64::consts::TAU;

    fn pair(n: usize, f: TrigPoly2, g: TrigPoly2) -> DensityPair {
        DensityPair::new(PeriodicGrid::square(n).unwrap(), f, g).unwrap()
    }

    #[test]
    fn decompose_inverts_assembly() {
        let grid = PeriodicGrid::square(16).unwrap();
        let a: Vec<f64> = (0..16).map(|i| 0.1 + (TAU * grid.x1(i)).sin()).collect();
        let b = grid.sample(|x, y| (TAU * y).cos() * (1.0 + x));
        let t = 0.25;
        let psi = grid.broadcast_x1(&a).add_scaled(&b, t);
        let (p1, p2) = decompose(t, &CostSchedule::Linear, &psi).unwrap();
        for (i, v) in p1.iter().enumerate() {
            assert!((v - (a[i] - 0.1)).abs() < 1e-14);
        }
        assert!(p2.add_scaled(&b, -1.0).sup_norm() < 1e-13);
        assert!(decompose(0.0, &CostSchedule::Linear, &psi).is_err());
    }

    #[test]
    fn newton_returns_exact_input_untouched() {
        let p = pair(16, TrigPoly2::constant(1.0), TrigPoly2::constant(1.0));
        let z = p.grid().zeros();
        let rep = newton_correct(&CostMatrix::identity(), &z, &p, 1e-12, 5).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.solution.sup_norm(), 0.0);
    }

    #[test]
    fn newton_equal_densities_goes_to_zero() {
        let f = TrigPoly2::normalized_density([CosineMode::new(1, 1, 0.2, 0.3)]);
        let p = pair(32, f.clone(), f);
        let u0 = p.grid().sample(|x, y| 0.01 * (TAU * x).sin() * (TAU * y).cos());
        let rep = newton_correct(&CostMatrix::identity(), &u0, &p, 1e-12, 20).unwrap();
        assert!(rep.solution.sup_norm() <= 1e-10);
    }

    #[test]
    fn options_validation() {
        let mut o = ContinuationOptions::default();
        assert!(o.validate().is_ok());
        o.t0 = 2.0;
        assert!(o.validate().is_err());
        let o = ContinuationOptions::default();
        let pts = o.schedule_points(32);
        assert_eq!(pts.len(), 32);
        assert_eq!(*pts.last().unwrap(), 1.0);
        assert!((pts[0] / 1e-3 - o.ratio().unwrap()).abs() < 1e-12);
    }
}
