//! Brute-force distance estimates.
//!
//! [`shoot`] inverts `c ↦ γ(1; c)` by Levenberg-Marquardt from random
//! covectors. [`direct_minimize`] never touches the extremal formulas: it
//! minimizes the energy of piecewise-constant controls subject to the
//! endpoint constraint. Both return upper bounds on the distance that are
//! sharp when the global minimizer is found, which multistart makes likely
//! for `q, p ≤ 3`.
//!
//! Both methods first dilate the target to unit homogeneous size and scale
//! the answer back, so tolerances act on comparable numbers.

use std::cell::RefCell;
use std::f64::consts::PI;

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::extremal::{cut_time, geodesic, Covector, CutTime};
use crate::group::{dilate, GroupPoint, GroupShape, PiecewiseControl};
use crate::matlin::{HorizontalPair, Mat, Vector};
use crate::{Error, Result};

/// Scales applied to `τ` of random shooting starts, in units of `π`.
pub const TAU_SCALES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
/// Default slack of [`lower_bound_check`].
pub const LOWER_BOUND_TOL: f64 = 1e-3;
/// Augmented-Lagrangian outer iterations of [`direct_minimize`].
const AL_OUTER: usize = 40;
/// Coarsest piece count of the refinement ladder in [`direct_minimize`].
const COARSEST: usize = 8;
/// Endpoint defect accepted below the finest level of the ladder.
const COARSE_TOL: f64 = 1e-6;
/// Coarse solutions carried to the finer levels.
const REFINE_KEEP: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub seed: u64,
    pub starts: usize,
    /// Levenberg-Marquardt steps per start, or L-BFGS steps per
    /// augmented-Lagrangian round.
    pub max_iterations: usize,
    pub endpoint_tol: f64,
    /// Number of constant pieces for [`direct_minimize`].
    pub segments: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            starts: 16,
            max_iterations: 200,
            endpoint_tol: 1e-9,
            segments: 16,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.endpoint_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "endpoint_tol must be positive, got {}",
                self.endpoint_tol
            )));
        }
        if self.starts == 0 || self.max_iterations == 0 || self.segments == 0 {
            return Err(Error::InvalidArgument(
                "starts, max_iterations and segments must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one start.
#[derive(Debug, Clone, PartialEq)]
pub struct StartLog {
    pub index: usize,
    pub converged: bool,
    /// Length of the curve found, converged or not.
    pub distance: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Piece count the entry refers to, for [`direct_minimize`]. Starts
    /// that were not carried to `cfg.segments` are never marked converged.
    pub segments: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    Covector(Covector),
    Control(PiecewiseControl),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub distance: f64,
    pub witness: Witness,
    /// `max |endpoint − target|` over all coordinates.
    pub residual: f64,
    pub log: Vec<StartLog>,
    /// Covectors of the converged shooting starts, in start order. Empty
    /// for [`direct_minimize`].
    pub candidates: Vec<Covector>,
}

impl OracleResult {
    /// Converged starts, shortest first.
    pub fn converged(&self) -> impl Iterator<Item = &StartLog> {
        self.log.iter().filter(|l| l.converged)
    }
}

/// `max(|(x, y)|, √|t|)`, the scale that [`dilate`] by its inverse maps to 1.
fn homogeneous_size(g: &GroupPoint) -> f64 {
    g.horizontal().norm().max(g.t.norm().sqrt())
}

fn check_target(target: &GroupPoint, cfg: &OracleConfig) -> Result<f64> {
    cfg.validate()?;
    if !target.is_finite() {
        return Err(Error::InvalidArgument("non-finite target".into()));
    }
    if target.is_identity() {
        return Err(Error::OriginPoint);
    }
    Ok(homogeneous_size(target))
}

fn start_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Picks the shortest converged start, ties broken by index.
fn merge<T>(runs: Vec<(StartLog, T)>) -> Result<(StartLog, T, Vec<StartLog>)> {
    let log: Vec<StartLog> = runs.iter().map(|(l, _)| l.clone()).collect();
    let best = runs
        .into_iter()
        .filter(|(l, _)| l.converged)
        .min_by(|(a, _), (b, _)| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)));
    match best {
        Some((l, w)) => Ok((l, w, log)),
        None => Err(Error::NoConvergence {
            best_residual: log.iter().map(|l| l.residual).fold(f64::INFINITY, f64::min),
        }),
    }
}

fn max_abs(v: &Vector) -> f64 {
    v.amax()
}

/// Start index, control, multipliers, energy and iterations after the
/// coarsest level.
type CoarseRun = (usize, Vec<f64>, Vec<f64>, f64, usize);

/// Multistart Levenberg-Marquardt on `γ(1; c) = target`.
///
/// Returns the smallest `|(ξ, η)|` among starts whose endpoint lies within
/// `endpoint_tol` of the target.
pub fn shoot(target: &GroupPoint, cfg: &OracleConfig) -> Result<OracleResult> {
    let size = check_target(target, cfg)?;
    let shape = target.shape();
    let unit_target = dilate(1.0 / size, target)?.to_flat();
    let runs: Vec<(StartLog, Covector)> = (0..cfg.starts)
        .into_par_iter()
        .map(|index| {
            let mut rng = start_rng(cfg.seed, index);
            let scale = TAU_SCALES[index % TAU_SCALES.len()] * PI;
            let mut start = Covector::from_flat(
                shape,
                &(0..shape.dim())
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect::<Vec<_>>(),
            );
            start.tau *= scale;
            let inner_tol = 0.5 * cfg.endpoint_tol / size.max(size * size);
            let (unit, iterations) = levenberg_marquardt(&unit_target, start, cfg.max_iterations, inner_tol);
            let cov = Covector {
                xi: &unit.xi * size,
                eta: &unit.eta * size,
                tau: unit.tau,
            };
            let residual = max_abs(&(geodesic(1.0, &cov).to_flat() - target.to_flat()));
            let distance = cov.speed();
            let converged = residual <= cfg.endpoint_tol && distance.is_finite();
            (
                StartLog {
                    index,
                    converged,
                    distance,
                    residual,
                    iterations,
                    segments: None,
                },
                cov,
            )
        })
        .collect();
    let candidates = runs.iter().filter(|(l, _)| l.converged).map(|(_, c)| c.clone()).collect();
    let (best, cov, log) = merge(runs)?;
    Ok(OracleResult {
        distance: best.distance,
        witness: Witness::Covector(cov),
        residual: best.residual,
        log,
        candidates,
    })
}

fn shoot_residual(target: &Vector, c: &Vector, shape: GroupShape) -> Vector {
    geodesic(1.0, &Covector::from_flat(shape, c.as_slice())).to_flat() - target
}

fn levenberg_marquardt(target: &Vector, start: Covector, max_iterations: usize, tol: f64) -> (Covector, usize) {
    let shape = start.shape();
    let n = shape.dim();
    let mut c = start.to_flat();
    let mut r = shoot_residual(target, &c, shape);
    let mut damping = 1e-3;
    let mut iterations = 0;
    while iterations < max_iterations && max_abs(&r) > tol {
        iterations += 1;
        let mut jac = Mat::zeros(n, n);
        for j in 0..n {
            let h = 1e-6 * c[j].abs().max(1.0);
            let mut plus = c.clone();
            plus[j] += h;
            let mut minus = c.clone();
            minus[j] -= h;
            let col = (shoot_residual(target, &plus, shape) - shoot_residual(target, &minus, shape)) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let cost = r.norm_squared();
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += damping * jtj[(k, k)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                damping *= 4.0;
                continue;
            };
            let trial = &c - chol.solve(&grad);
            let r_trial = shoot_residual(target, &trial, shape);
            if r_trial.iter().all(|v| v.is_finite()) && r_trial.norm_squared() < cost {
                c = trial;
                r = r_trial;
                damping = (damping / 3.0).max(1e-15);
                improved = true;
                break;
            }
            damping *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (Covector::from_flat(shape, c.as_slice()), iterations)
}

/// Endpoint of the piecewise-constant control `z` (pieces of `m = qp + p`
/// entries each, duration 1 in total), flattened like [`GroupPoint::to_flat`].
///
/// On piece `i` the curve moves by `c_i/N`, and `t` gains
/// `Q(Σ_{j<i} c_j, c_i)/N²`, exactly.
fn control_endpoint(shape: GroupShape, z: &[f64]) -> Vec<f64> {
    let GroupShape { q, p } = shape;
    let m = q * p + p;
    let n_seg = z.len() / m;
    let dt = 1.0 / n_seg as f64;
    let mut prefix = vec![0.0; m];
    let mut t = vec![0.0; q];
    for c in z.chunks_exact(m) {
        q_form_add(q, p, &prefix, c, dt * dt, &mut t);
        for (a, b) in prefix.iter_mut().zip(c) {
            *a += b;
        }
    }
    let mut out: Vec<f64> = prefix.iter().map(|v| v * dt).collect();
    out.extend(t);
    out
}

/// `out += scale·½(a_ξ b_η − b_ξ a_η)` on flat pairs.
fn q_form_add(q: usize, p: usize, a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
    let qp = q * p;
    for k in 0..p {
        let (ae, be) = (a[qp + k], b[qp + k]);
        for alpha in 0..q {
            out[alpha] += 0.5 * scale * (a[k * q + alpha] * be - b[k * q + alpha] * ae);
        }
    }
}

/// `Jᵀw` for the endpoint map of [`control_endpoint`].
///
/// The `t` part of the endpoint is `Σ_{j<i} Q(c_j, c_i)/N²`, whose
/// derivative in `c_k` is `Q(Σ_{j<k} c_j − Σ_{j>k} c_j, ·)/N²`.
fn control_endpoint_vjp(shape: GroupShape, z: &[f64], w: &[f64]) -> Vec<f64> {
    let GroupShape { q, p } = shape;
    let m = q * p + p;
    let qp = q * p;
    let n_seg = z.len() / m;
    let dt = 1.0 / n_seg as f64;
    let (wh, wt) = w.split_at(m);
    let mut total = vec![0.0; m];
    for c in z.chunks_exact(m) {
        for (a, b) in total.iter_mut().zip(c) {
            *a += b;
        }
    }
    let mut before = vec![0.0; m];
    let mut out = Vec::with_capacity(z.len());
    for c in z.chunks_exact(m) {
        // a = before − after = 2·before + c − total.
        let a: Vec<f64> = (0..m).map(|i| 2.0 * before[i] + c[i] - total[i]).collect();
        let mut g: Vec<f64> = wh.iter().map(|v| v * dt).collect();
        for k in 0..p {
            let mut dot = 0.0;
            for alpha in 0..q {
                g[k * q + alpha] -= 0.5 * dt * dt * wt[alpha] * a[qp + k];
                dot += a[k * q + alpha] * wt[alpha];
            }
            g[qp + k] += 0.5 * dt * dt * dot;
        }
        out.extend(g);
        for (b, v) in before.iter_mut().zip(c) {
            *b += v;
        }
    }
    out
}

/// `½∫|c|² + λ·h + ½μ|h|²` with `h` the endpoint defect.
struct AugmentedLagrangian<'a> {
    shape: GroupShape,
    target: &'a [f64],
    lambda: Vec<f64>,
    mu: f64,
    track: &'a RefCell<Track>,
}

/// Best point seen and an evaluation budget. The line search can cycle at
/// round-off level without terminating; running out of budget stops it and
/// the best point is kept.
struct Track {
    evaluations: usize,
    budget: usize,
    best: f64,
    best_z: Vec<f64>,
}

impl AugmentedLagrangian<'_> {
    fn defect(&self, z: &[f64]) -> Vec<f64> {
        control_endpoint(self.shape, z)
            .iter()
            .zip(self.target)
            .map(|(a, b)| a - b)
            .collect()
    }
}

impl CostFunction for AugmentedLagrangian<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, z: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let dt = (self.shape.horizontal_dim() as f64) / z.len() as f64;
        let energy = 0.5 * dt * z.iter().map(|v| v * v).sum::<f64>();
        let h = self.defect(z);
        let lin: f64 = h.iter().zip(&self.lambda).map(|(a, b)| a * b).sum();
        let quad: f64 = h.iter().map(|v| v * v).sum();
        let value = energy + lin + 0.5 * self.mu * quad;
        let mut track = self.track.borrow_mut();
        track.evaluations += 1;
        if value < track.best {
            track.best = value;
            track.best_z.clone_from(z);
        }
        if track.evaluations > track.budget {
            return Err(argmin::core::Error::msg("evaluation budget exhausted"));
        }
        Ok(value)
    }
}

impl Gradient for AugmentedLagrangian<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, z: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let dt = (self.shape.horizontal_dim() as f64) / z.len() as f64;
        let h = self.defect(z);
        let w: Vec<f64> = h.iter().zip(&self.lambda).map(|(a, b)| b + self.mu * a).collect();
        let mut g = control_endpoint_vjp(self.shape, z, &w);
        for (gi, zi) in g.iter_mut().zip(z) {
            *gi += dt * zi;
        }
        Ok(g)
    }
}

fn lbfgs(problem: AugmentedLagrangian<'_>, z: Vec<f64>, iterations: usize) -> (Vec<f64>, usize) {
    let track = problem.track;
    {
        let mut t = track.borrow_mut();
        t.evaluations = 0;
        t.budget = 20 * iterations;
        t.best = f64::INFINITY;
        t.best_z.clone_from(&z);
    }
    let solver = LBFGS::new(MoreThuenteLineSearch::new(), 10)
        .with_tolerance_grad(1e-12)
        .and_then(|s| s.with_tolerance_cost(0.0));
    let Ok(solver) = solver else {
        return (z, 0);
    };
    let used = Executor::new(problem, solver)
        .configure(|st| st.param(z).max_iters(iterations as u64))
        .run()
        .map(|res| res.state.get_iter() as usize)
        .unwrap_or(iterations);
    let best = std::mem::take(&mut track.borrow_mut().best_z);
    (best, used)
}

/// Piece counts visited by [`direct_minimize`]: `segments` halved while it
/// stays even and at least [`COARSEST`], in increasing order.
fn refinement_levels(segments: usize) -> Vec<usize> {
    let mut levels = vec![segments];
    let mut n = segments;
    while n.is_multiple_of(2) && n / 2 >= COARSEST {
        n /= 2;
        levels.push(n);
    }
    levels.reverse();
    levels
}

/// Runs augmented-Lagrangian rounds on `z` until the endpoint defect is
/// below `tol`. Returns the number of L-BFGS iterations used.
fn defect_norm(shape: GroupShape, z: &[f64], target: &[f64]) -> f64 {
    control_endpoint(shape, z)
        .iter()
        .zip(target)
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
}

fn augmented_lagrangian(
    shape: GroupShape,
    target: &[f64],
    z: &mut Vec<f64>,
    lambda: &mut [f64],
    tol: f64,
    max_iterations: usize,
) -> usize {
    let track = RefCell::new(Track {
        evaluations: 0,
        budget: 0,
        best: f64::INFINITY,
        best_z: Vec::new(),
    });
    let mut mu = 10.0;
    let mut previous = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..AL_OUTER {
        let problem = AugmentedLagrangian {
            shape,
            target,
            lambda: lambda.to_vec(),
            mu,
            track: &track,
        };
        let (next, used) = lbfgs(problem, std::mem::take(z), max_iterations);
        *z = next;
        iterations += used;
        let h: Vec<f64> = control_endpoint(shape, z).iter().zip(target).map(|(a, b)| a - b).collect();
        let defect = h.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if defect <= tol {
            break;
        }
        for (l, hv) in lambda.iter_mut().zip(&h) {
            *l += mu * hv;
        }
        if defect > 0.25 * previous {
            mu = (mu * 10.0).min(1e12);
        }
        previous = defect;
    }
    iterations
}

/// Random initial control: a constant plus one Fourier mode.
fn random_control(rng: &mut ChaCha8Rng, m: usize, n_seg: usize) -> Vec<f64> {
    let mut draw = |s: f64| -> Vec<f64> { (0..m).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect() };
    let a = draw(1.0);
    let b = draw(2.0);
    let c = draw(2.0);
    let mut z = Vec::with_capacity(m * n_seg);
    for i in 0..n_seg {
        let phase = 2.0 * PI * (i as f64 + 0.5) / n_seg as f64;
        z.extend((0..m).map(|k| a[k] + b[k] * phase.cos() + c[k] * phase.sin()));
    }
    z
}

fn to_control(shape: GroupShape, z: &[f64], scale: f64) -> Result<PiecewiseControl> {
    let m = shape.horizontal_dim();
    let segments = z
        .chunks_exact(m)
        .map(|c| HorizontalPair::from_flat(shape.q, shape.p, c).scale(scale))
        .collect();
    PiecewiseControl::new(segments, 1.0)
}

/// Multistart minimization of the energy of `cfg.segments`-piece controls
/// on `[0, 1]` reaching `target`, reported as the length of the best one.
pub fn direct_minimize(target: &GroupPoint, cfg: &OracleConfig) -> Result<OracleResult> {
    let size = check_target(target, cfg)?;
    let shape = target.shape();
    let m = shape.horizontal_dim();
    let unit_target: Vec<f64> = dilate(1.0 / size, target)?.to_flat().as_slice().to_vec();
    let target_flat = target.to_flat();
    let inner_tol = 0.5 * cfg.endpoint_tol / size.max(size * size);
    let levels = refinement_levels(cfg.segments);
    let coarse_tol = if levels.len() == 1 { inner_tol } else { inner_tol.max(COARSE_TOL) };
    let finish = |index: usize, z: Vec<f64>, n_seg: usize, iterations: usize, final_level: bool| {
        let scaled: Vec<f64> = z.iter().map(|v| v * size).collect();
        let end = Vector::from_vec(control_endpoint(shape, &scaled));
        let residual = max_abs(&(end - &target_flat));
        let dt = 1.0 / n_seg as f64;
        let distance = scaled.chunks_exact(m).map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).sum::<f64>() * dt;
        let converged = final_level && residual <= cfg.endpoint_tol && distance.is_finite();
        (
            StartLog {
                index,
                converged,
                distance,
                residual,
                iterations,
                segments: Some(n_seg),
            },
            scaled,
        )
    };
    let coarse: Vec<CoarseRun> = (0..cfg.starts)
        .into_par_iter()
        .map(|index| {
            let mut rng = start_rng(cfg.seed, index);
            let mut z = random_control(&mut rng, m, levels[0]);
            let mut lambda = vec![0.0; shape.dim()];
            let iterations =
                augmented_lagrangian(shape, &unit_target, &mut z, &mut lambda, coarse_tol, cfg.max_iterations);
            let defect = defect_norm(shape, &z, &unit_target);
            (index, z, lambda, defect, iterations)
        })
        .collect();
    let runs: Vec<(StartLog, Vec<f64>)> = if levels.len() == 1 {
        coarse
            .into_iter()
            .map(|(index, z, _, _, iterations)| finish(index, z, levels[0], iterations, true))
            .collect()
    } else {
        // Refine the most promising coarse solutions: feasible first, then
        // by energy, then by index.
        let energy = |z: &[f64]| z.iter().map(|v| v * v).sum::<f64>();
        let mut order: Vec<usize> = (0..coarse.len()).collect();
        order.sort_by(|&a, &b| {
            let (ca, cb) = (&coarse[a], &coarse[b]);
            (ca.3 > coarse_tol)
                .cmp(&(cb.3 > coarse_tol))
                .then(energy(&ca.1).total_cmp(&energy(&cb.1)))
                .then(ca.0.cmp(&cb.0))
        });
        let keep: Vec<usize> = order.into_iter().take(REFINE_KEEP).collect();
        let mut runs: Vec<Option<(StartLog, Vec<f64>)>> = vec![None; coarse.len()];
        let refined: Vec<(StartLog, Vec<f64>)> = keep
            .par_iter()
            .map(|&i| {
                let (index, z, lambda, _, iterations) = &coarse[i];
                let (mut z, mut lambda, mut iterations) = (z.clone(), lambda.clone(), *iterations);
                for (k, &n_seg) in levels.iter().enumerate().skip(1) {
                    z = z.chunks_exact(m).flat_map(|c| c.iter().chain(c).copied().collect::<Vec<_>>()).collect();
                    debug_assert_eq!(z.len(), n_seg * m);
                    let tol = if k + 1 == levels.len() { inner_tol } else { coarse_tol };
                    iterations += augmented_lagrangian(shape, &unit_target, &mut z, &mut lambda, tol, cfg.max_iterations);
                }
                finish(*index, z, cfg.segments, iterations, true)
            })
            .collect();
        for (&i, run) in keep.iter().zip(refined) {
            runs[i] = Some(run);
        }
        runs.into_iter()
            .zip(coarse)
            .map(|(run, (index, z, _, _, iterations))| run.unwrap_or_else(|| finish(index, z, levels[0], iterations, false)))
            .collect()
    };
    let (best, z, log) = merge(runs)?;
    Ok(OracleResult {
        distance: best.distance,
        witness: Witness::Control(to_control(shape, &z, 1.0)?),
        residual: best.residual,
        log,
        candidates: Vec::new(),
    })
}

/// One time of a [`lower_bound_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundEntry {
    pub s: f64,
    /// `s·|(ξ, η)|`.
    pub geodesic_length: f64,
    pub shoot: Option<f64>,
    pub direct: Option<f64>,
    /// `min(shoot, direct) − geodesic_length`.
    pub margin: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport {
    pub tol_abs: f64,
    pub entries: Vec<LowerBoundEntry>,
}

impl LowerBoundReport {
    pub fn violations(&self) -> impl Iterator<Item = &LowerBoundEntry> {
        self.entries.iter().filter(|e| e.violation)
    }
}

/// Checks that no curve found by either oracle reaches `γ(s; cov)` with
/// length below `s·|(ξ, η)| − tol_abs`, for each `s` before the cut time.
pub fn lower_bound_check(cov: &Covector, times: &[f64], tol_abs: f64, cfg: &OracleConfig) -> Result<LowerBoundReport> {
    let CutTime::Finite(t_cut) = cut_time(cov)? else {
        return Err(Error::InfiniteCutTime);
    };
    if let Some(&s) = times.iter().find(|&&s| !(s > 0.0 && s < t_cut)) {
        return Err(Error::InvalidArgument(format!("time {s} is not in (0, {t_cut})")));
    }
    if !(tol_abs >= 0.0) {
        return Err(Error::InvalidArgument(format!("tol_abs must be nonnegative, got {tol_abs}")));
    }
    let mut entries = Vec::with_capacity(times.len());
    for &s in times {
        let target = geodesic(s, cov);
        let shot = shoot(&target, cfg);
        let direct = direct_minimize(&target, cfg);
        if let (Err(e), Err(_)) = (&shot, &direct) {
            return Err(e.clone());
        }
        let shoot = shot.ok().map(|r| r.distance);
        let direct = direct.ok().map(|r| r.distance);
        let best = shoot.unwrap_or(f64::INFINITY).min(direct.unwrap_or(f64::INFINITY));
        let geodesic_length = s * cov.speed();
        let margin = best - geodesic_length;
        entries.push(LowerBoundEntry {
            s,
            geodesic_length,
            shoot,
            direct,
            margin,
            violation: margin < -tol_abs,
        });
    }
    Ok(LowerBoundReport { tol_abs, entries })
}

/// Shooting past the cut time.
#[derive(Debug, Clone, PartialEq)]
pub struct PastCutReport {
    pub s: f64,
    pub geodesic_length: f64,
    pub competitor: f64,
    pub covector: Covector,
}

impl PastCutReport {
    /// How much shorter the competitor is.
    pub fn gain(&self) -> f64 {
        self.geodesic_length - self.competitor
    }
}

/// Shoots at `γ(factor·2π/|τ|; cov)` for `factor > 1`. A positive
/// [`PastCutReport::gain`] shows the extremal has stopped minimizing.
pub fn past_cut_check(cov: &Covector, factor: f64, cfg: &OracleConfig) -> Result<PastCutReport> {
    let CutTime::Finite(t_cut) = cut_time(cov)? else {
        return Err(Error::InfiniteCutTime);
    };
    if !(factor > 1.0) {
        return Err(Error::InvalidArgument(format!("factor must exceed 1, got {factor}")));
    }
    let s = factor * t_cut;
    let res = shoot(&geodesic(s, cov), cfg)?;
    let Witness::Covector(covector) = res.witness else {
        unreachable!("shoot returns a covector")
    };
    Ok(PastCutReport {
        s,
        geodesic_length: s * cov.speed(),
        competitor: res.distance,
        covector,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::integrate_control;

    fn v(a: &[f64]) -> Vector {
        Vector::from_column_slice(a)
    }

    fn point(q: usize, p: usize, x: &[f64], y: &[f64], t: &[f64]) -> GroupPoint {
        GroupPoint::new(Mat::from_column_slice(q, p, x), v(y), v(t)).unwrap()
    }

    fn rand_flat(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn control_endpoint_matches_integration() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        for (q, p) in [(1, 1), (2, 1), (2, 3), (3, 2)] {
            let shape = GroupShape::new(q, p).unwrap();
            let z = rand_flat(&mut rng, 7 * shape.horizontal_dim());
            let ctrl = to_control(shape, &z, 1.0).unwrap();
            let end = integrate_control(&ctrl, 1).unwrap().pop().unwrap().to_flat();
            let fast = Vector::from_vec(control_endpoint(shape, &z));
            assert!((end - fast).amax() < 1e-13);
        }
    }

    #[test]
    fn control_endpoint_vjp_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for (q, p) in [(1, 1), (2, 2), (3, 1)] {
            let shape = GroupShape::new(q, p).unwrap();
            let z = rand_flat(&mut rng, 5 * shape.horizontal_dim());
            let w = rand_flat(&mut rng, shape.dim());
            let g = control_endpoint_vjp(shape, &z, &w);
            let f = |z: &[f64]| -> f64 { control_endpoint(shape, z).iter().zip(&w).map(|(a, b)| a * b).sum() };
            for i in 0..z.len() {
                let h = 1e-6;
                let mut zp = z.clone();
                zp[i] += h;
                let mut zm = z.clone();
                zm[i] -= h;
                assert!(((f(&zp) - f(&zm)) / (2.0 * h) - g[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn config_validation() {
        let t = point(2, 1, &[0.0, 0.0], &[0.0], &[0.0, 1.0]);
        let bad = OracleConfig {
            endpoint_tol: 0.0,
            ..Default::default()
        };
        assert!(matches!(shoot(&t, &bad), Err(Error::InvalidArgument(_))));
        let bad = OracleConfig {
            starts: 0,
            ..Default::default()
        };
        assert!(matches!(direct_minimize(&t, &bad), Err(Error::InvalidArgument(_))));
        let origin = GroupPoint::identity(GroupShape::new(2, 1).unwrap());
        assert_eq!(shoot(&origin, &OracleConfig::default()), Err(Error::OriginPoint));
    }

    #[test]
    fn shoot_vertical_target() {
        let t = point(2, 1, &[0.0, 0.0], &[0.0], &[0.0, 1.0]);
        let res = shoot(&t, &OracleConfig::default()).unwrap();
        assert!((res.distance - (4.0 * PI).sqrt()).abs() < 1e-6, "{}", res.distance);
        assert!(res.residual <= 1e-9);
    }

    #[test]
    fn shoot_straight_line() {
        let t = point(2, 1, &[1.0, 0.0], &[0.0], &[0.0, 0.0]);
        let res = shoot(&t, &OracleConfig::default()).unwrap();
        assert!((res.distance - 1.0).abs() < 1e-6, "{}", res.distance);
    }

    #[test]
    fn shoot_is_deterministic() {
        let t = point(2, 2, &[0.3, -0.2, 0.5, 0.1], &[0.4, 0.0], &[0.2, -0.7]);
        let cfg = OracleConfig {
            starts: 8,
            ..Default::default()
        };
        let a = shoot(&t, &cfg).unwrap();
        let b = shoot(&t, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn direct_heisenberg_vertical() {
        let t = point(1, 1, &[0.0], &[0.0], &[PI]);
        let cfg = OracleConfig {
            segments: 64,
            starts: 8,
            ..Default::default()
        };
        let res = direct_minimize(&t, &cfg).unwrap();
        assert!((res.distance - 2.0 * PI).abs() < 2e-3 * 2.0 * PI, "{}", res.distance);
        assert!(res.distance >= 2.0 * PI - 1e-9);
    }

    #[test]
    fn direct_single_segment_line() {
        let t = point(2, 1, &[0.3, -0.4], &[1.2], &[0.0, 0.0]);
        let cfg = OracleConfig {
            segments: 1,
            starts: 4,
            ..Default::default()
        };
        let res = direct_minimize(&t, &cfg).unwrap();
        assert!((res.distance - 1.3).abs() < 1e-9, "{}", res.distance);
    }
}
