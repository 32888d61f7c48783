//! Conjugate times.
//!
//! A time `s̄` is conjugate for `γ(·; ξ̄, η̄, τ̄)` when the differential of
//! `(ξ, η, τ) ↦ γ(s̄; ξ, η, τ)` is singular. Equivalently, with
//! `Λ = {|ξ|² + |η|² = const}`, the square matrix `[∂_s γ, d_Λ γ]` is
//! singular. [`numeric_conjugate_test`] evaluates that matrix by finite
//! differences; the remaining functions are the closed-form facts at the
//! cut time `2π/|τ|`.

use std::f64::consts::PI;

use crate::cutlocus::{CutData, CUT_ATOL};
use crate::extremal::{abnormal_test, control, cut_time, geodesic, Covector};
use crate::group::{q_form, GroupShape};
use crate::matlin::{Mat, Vector};
use crate::{Error, Result, DEFAULT_SV_TOL};

/// Base step of the Richardson-extrapolated central differences.
pub const DEFAULT_FD_STEP: f64 = 1e-4;
/// Normalized determinants below this are conjugate.
pub const DET_TOL: f64 = 1e-6;
/// Normalized determinants in `[DET_TOL, DET_UNDECIDED]` are undecided.
pub const DET_UNDECIDED: f64 = 1e-4;
/// Relative floor on column norms in [`conjugate_matrix`].
pub const COLUMN_FLOOR: f64 = 1e-6;
/// Candidates with a smaller residual are skipped during Gram-Schmidt.
const GS_SKIP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Conjugate,
    NotConjugate,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Determinant,
    ClosedFormP1,
    AbnormalTrivial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateReport {
    pub time_tested: f64,
    /// Determinant of [`conjugate_matrix`], or the closed-form
    /// indicator for [`Method::ClosedFormP1`].
    pub determinant_value: f64,
    pub verdict: Verdict,
    pub method: Method,
}

fn verdict_for(det: f64) -> Verdict {
    let d = det.abs();
    if d < DET_TOL {
        Verdict::Conjugate
    } else if d <= DET_UNDECIDED {
        Verdict::Undecided
    } else {
        Verdict::NotConjugate
    }
}

/// Orthonormal basis (Gram-Schmidt over the canonical basis, in index order)
/// of the complement of `seeds` in `R^n`. The seeds themselves are
/// orthonormalized first and are not returned.
fn complete_basis(n: usize, seeds: &[Vector]) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::with_capacity(n);
    let push = |v: &Vector, basis: &mut Vec<Vector>| -> bool {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in basis.iter() {
                let c = b.dot(&w);
                w -= b * c;
            }
        }
        let norm = w.norm();
        if norm > GS_SKIP * v.norm().max(1.0) {
            basis.push(w / norm);
            true
        } else {
            false
        }
    };
    for s in seeds {
        push(s, &mut basis);
    }
    let n_seeds = basis.len();
    for i in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = Vector::zeros(n);
        e[i] = 1.0;
        push(&e, &mut basis);
    }
    basis.split_off(n_seeds)
}

/// Orthonormal tangent directions to `Λ` at a covector.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderFrame {
    pub base: Covector,
    pub directions: Vec<Covector>,
}

impl CylinderFrame {
    pub fn new(base: &Covector) -> Result<Self> {
        let shape = base.shape();
        if base.speed() == 0.0 {
            return Err(Error::ZeroHorizontal);
        }
        let mut radial = base.to_flat();
        radial.rows_mut(shape.horizontal_dim(), shape.q).fill(0.0);
        let directions = complete_basis(shape.dim(), &[radial])
            .into_iter()
            .map(|v| Covector::from_flat(shape, v.as_slice()))
            .collect();
        Ok(Self {
            base: base.clone(),
            directions,
        })
    }
}

fn velocity(s: f64, cov: &Covector) -> Vector {
    let g = geodesic(s, cov);
    let u = control(s, cov);
    let mut out = u.to_flat().as_slice().to_vec();
    out.extend_from_slice(q_form(&g.horizontal(), &u).as_slice());
    Vector::from_vec(out)
}

/// Richardson-extrapolated central difference of `γ(s; ·)` along `dir`.
fn directional_derivative(s: f64, cov: &Covector, dir: &Covector, h: f64) -> Vector {
    let central = |h: f64| {
        let plus = geodesic(s, &add(cov, dir, h)).to_flat();
        let minus = geodesic(s, &add(cov, dir, -h)).to_flat();
        (plus - minus) / (2.0 * h)
    };
    (central(0.5 * h) * 4.0 - central(h)) / 3.0
}

fn add(a: &Covector, b: &Covector, h: f64) -> Covector {
    Covector {
        xi: &a.xi + &b.xi * h,
        eta: &a.eta + &b.eta * h,
        tau: &a.tau + &b.tau * h,
    }
}

/// Unit-speed covector at unit time equivalent to `(s, cov)`.
///
/// From `γ(s; c) = γ(1; s c)` and `γ(1; λξ, λη, τ) = δ_λ γ(1; ξ, η, τ)`,
/// `s` is conjugate for `cov` iff `1` is conjugate for
/// `(ξ/|(ξ,η)|, η/|(ξ,η)|, sτ)`.
pub fn normalized_covector(s: f64, cov: &Covector) -> Result<Covector> {
    let speed = cov.speed();
    if speed == 0.0 {
        return Err(Error::ZeroHorizontal);
    }
    Ok(Covector {
        xi: &cov.xi / speed,
        eta: &cov.eta / speed,
        tau: &cov.tau * s,
    })
}

/// `[∂_σ γ, d_Λ γ]` at `σ = 1` and the normalized covector of `(s, cov)`.
///
/// The `t` rows are weighted by `max(1, θ)`, `θ = s|τ|`, which measures
/// displacements in units of the loop scale `1/θ` of the normalized
/// geodesic (`t` has dilation weight 2). Each column is then divided by its
/// norm, floored at [`COLUMN_FLOOR`] times the largest column norm so that
/// columns which vanish in exact arithmetic are not inflated to unit-length
/// noise.
pub fn conjugate_matrix(s: f64, cov: &Covector, fd_step: f64) -> Result<Mat> {
    conjugate_matrix_with_floor(s, cov, fd_step, COLUMN_FLOOR)
}

#[doc(hidden)]
pub fn conjugate_matrix_with_floor(s: f64, cov: &Covector, fd_step: f64, floor: f64) -> Result<Mat> {
    let base = normalized_covector(s, cov)?;
    let frame = CylinderFrame::new(&base)?;
    let n = base.shape().dim();
    let h = fd_step * base.to_flat().norm().max(1.0);
    let mut m = Mat::zeros(n, n);
    m.set_column(0, &velocity(1.0, &base));
    for (j, dir) in frame.directions.iter().enumerate() {
        m.set_column(j + 1, &directional_derivative(1.0, &base, dir, h));
    }
    let theta = base.tau.norm().max(1.0);
    let q = base.shape().q;
    m.rows_mut(n - q, q).scale_mut(theta);
    let largest = m.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        col /= norm.max(floor * largest);
    }
    Ok(m)
}

/// Determinant test for `s` being a conjugate time of `γ(·; cov)`.
///
/// Abnormal extremals are reported conjugate at every time without
/// computing anything.
pub fn numeric_conjugate_test(s: f64, cov: &Covector, fd_step: f64) -> Result<ConjugateReport> {
    if cov.speed() == 0.0 {
        return Err(Error::ZeroHorizontal);
    }
    if !(s > 0.0) || !(fd_step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need s > 0 and fd_step > 0, got s = {s}, fd_step = {fd_step}"
        )));
    }
    if abnormal_test(cov, DEFAULT_SV_TOL)?.is_some() {
        return Ok(ConjugateReport {
            time_tested: s,
            determinant_value: 0.0,
            verdict: Verdict::Conjugate,
            method: Method::AbnormalTrivial,
        });
    }
    let det = conjugate_matrix(s, cov, fd_step)?.determinant();
    Ok(ConjugateReport {
        time_tested: s,
        determinant_value: det,
        verdict: verdict_for(det),
        method: Method::Determinant,
    })
}

/// Normalized determinants at each of `times`.
pub fn determinant_profile(cov: &Covector, times: &[f64], fd_step: f64) -> Result<Vec<(f64, f64)>> {
    times
        .iter()
        .map(|&s| Ok((s, conjugate_matrix(s, cov, fd_step)?.determinant())))
        .collect()
}

fn check_p1_cov(cov: &Covector) -> Result<()> {
    let GroupShape { p, .. } = cov.shape();
    if p != 1 {
        return Err(Error::WrongP(p));
    }
    if cov.tau.norm() == 0.0 {
        return Err(Error::ZeroTau);
    }
    if !cut_time(cov)?.is_finite() {
        return Err(Error::InfiniteCutTime);
    }
    Ok(())
}

/// `|η|·|P⊥_τ ξ| / |(ξ, η)|²`, scale-free.
fn p1_product(cov: &Covector) -> f64 {
    cov.eta[0].abs() * cov.xi_perp().norm() / cov.horizontal().norm_squared()
}

/// For `p = 1`: whether `2π/|τ|` is a conjugate time, i.e. `η P⊥_τ ξ = 0`.
pub fn p1_criterion(cov: &Covector) -> Result<bool> {
    check_p1_cov(cov)?;
    Ok(p1_product(cov) < CUT_ATOL)
}

/// [`p1_criterion`] packaged as a report at `s = 2π/|τ|`.
pub fn p1_report(cov: &Covector) -> Result<ConjugateReport> {
    let conj = p1_criterion(cov)?;
    Ok(ConjugateReport {
        time_tested: 2.0 * PI / cov.tau.norm(),
        determinant_value: p1_product(cov),
        verdict: if conj { Verdict::Conjugate } else { Verdict::NotConjugate },
        method: Method::ClosedFormP1,
    })
}

/// The `(2q−1)×(2q−1)` matrix whose invertibility is equivalent to
/// `2π/|τ|` not being conjugate for `p = 1`, `η P⊥_τ ξ ≠ 0`:
///
/// ```text
/// ┌ Ω                   P⊥ξ   −2(⟨ξ,τ⟩I + τξᵀ)    ┐
/// │ 0                   0      τᵀ                 │
/// └ −⟨ξ,τ⟩/|τ|² ΩᵀΩ     0      (η² + 3|P_τξ|²) Ωᵀ ┘
/// ```
///
/// where the columns of `Ω` complete `{τ, P⊥_τ ξ}` to an orthogonal basis.
pub fn build_mhat(cov: &Covector) -> Result<Mat> {
    let GroupShape { q, p } = cov.shape();
    if p != 1 {
        return Err(Error::WrongP(p));
    }
    if q < 2 {
        return Err(Error::WrongQ(q));
    }
    if cov.tau.norm() == 0.0 {
        return Err(Error::ZeroTau);
    }
    if p1_product(cov) < CUT_ATOL {
        return Err(Error::DegenerateFrame);
    }
    let tau = &cov.tau;
    let xi = cov.xi.column(0).into_owned();
    let eta = cov.eta[0];
    let xt = xi.dot(tau);
    let t2 = tau.norm_squared();
    let perp: Vector = cov.xi_perp().column(0).into_owned();
    let along2 = xt * xt / t2;
    let completion = complete_basis(q, &[tau.clone(), perp.clone()]);
    debug_assert_eq!(completion.len(), q - 2);
    let omega = Mat::from_fn(q, q - 2, |i, j| completion[j][i]);

    let n = 2 * q - 1;
    let mut m = Mat::zeros(n, n);
    let k = q - 2;
    // Top block rows 0..q.
    m.view_mut((0, 0), (q, k)).copy_from(&omega);
    m.view_mut((0, k), (q, 1)).copy_from(&perp);
    let top_right = (Mat::identity(q, q) * xt + tau * xi.transpose()) * (-2.0);
    m.view_mut((0, k + 1), (q, q)).copy_from(&top_right);
    // Row q.
    m.view_mut((q, k + 1), (1, q)).copy_from(&tau.transpose());
    // Bottom block rows q+1..2q−1.
    if k > 0 {
        let gram = omega.transpose() * &omega * (-xt / t2);
        m.view_mut((q + 1, 0), (k, k)).copy_from(&gram);
        let br = omega.transpose() * (eta * eta + 3.0 * along2);
        m.view_mut((q + 1, k + 1), (k, q)).copy_from(&br);
    }
    Ok(m)
}

/// Whether the cut point `(x, 0, t)` is conjugate: always for `p ≥ 2`, and
/// iff `|x|·(|P⊥_{Im x} t| − π|x†t|²) = 0` for `p = 1`.
pub fn cutpoint_conjugate(x: &Mat, t: &Vector, shape: GroupShape) -> Result<bool> {
    if x.shape() != (shape.q, shape.p) || t.len() != shape.q {
        return Err(Error::ShapeMismatch {
            expected: format!("x ∈ R^{}×{}, t ∈ R^{}", shape.q, shape.p, shape.q),
            found: format!("x ∈ R^{}×{}, t ∈ R^{}", x.nrows(), x.ncols(), t.len()),
        });
    }
    let data = CutData::new(x, t, DEFAULT_SV_TOL);
    if !data.is_cut() {
        return Err(Error::NotACutPoint);
    }
    if shape.p >= 2 {
        return Ok(true);
    }
    Ok((x.norm() * data.gap).abs() <= data.atol)
}

/// For `p = 1`: the direction `Z = −⟨ξ,τ⟩∂_η + η D_τ`, tangent to `Λ`,
/// along which `γ(2π/|τ|; ·)` moves only in `t`, by `−(2πη/|τ|) P⊥_τ ξ`.
pub fn z_direction(cov: &Covector) -> Result<Covector> {
    let GroupShape { p, .. } = cov.shape();
    if p != 1 {
        return Err(Error::WrongP(p));
    }
    let xt = cov.xi.column(0).dot(&cov.tau);
    Ok(Covector {
        xi: Mat::from_column_slice(cov.tau.len(), 1, (&cov.tau * cov.eta[0]).as_slice()),
        eta: Vector::from_element(1, -xt),
        tau: Vector::zeros(cov.tau.len()),
    })
}
