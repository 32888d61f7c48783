//! The cut locus of the origin.
//!
//! A point `(x, y, t) ≠ 0` is a cut point exactly when
//!
//! ```text
//! y = 0,   t ∉ Im x,   |P⊥_{Im x} t| ≥ π |x† t|²,
//! ```
//!
//! and then its distance from the origin is `√(|x|² + 4π|P⊥_{Im x} t|)`.
//! The minimizer is unique iff the inequality is an equality. All equality
//! tests use `atol = 1e-9·max(1, |t|)`.

use std::f64::consts::PI;

use crate::extremal::{cut_time, endpoint_at_cut, Covector};
use crate::group::GroupPoint;
use crate::matlin::{self, Mat, Vector};
use crate::{Error, Result};

/// Relative band used for every equality test in this module.
pub const CUT_ATOL: f64 = 1e-9;

/// Absolute tolerance for a point whose `t` has norm `t_norm`.
pub fn atol_for(t_norm: f64) -> f64 {
    CUT_ATOL * t_norm.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Multiplicity {
    Unique,
    Multiple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjugateFlag {
    Yes,
    No,
    /// Near the `p = 1` boundary, within ten times the tolerance band.
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutClassification {
    NotCut,
    Cut {
        multiplicity: Multiplicity,
        conjugate: ConjugateFlag,
        distance: f64,
    },
}

impl CutClassification {
    pub fn is_cut(&self) -> bool {
        matches!(self, CutClassification::Cut { .. })
    }

    pub fn multiplicity(&self) -> Option<Multiplicity> {
        match self {
            CutClassification::Cut { multiplicity, .. } => Some(*multiplicity),
            CutClassification::NotCut => None,
        }
    }

    pub fn conjugate(&self) -> Option<ConjugateFlag> {
        match self {
            CutClassification::Cut { conjugate, .. } => Some(*conjugate),
            CutClassification::NotCut => None,
        }
    }

    pub fn distance(&self) -> Option<f64> {
        match self {
            CutClassification::Cut { distance, .. } => Some(*distance),
            CutClassification::NotCut => None,
        }
    }
}

/// Quantities entering the membership test for `(x, ·, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutData {
    /// `P_{Im x} t`.
    pub t_along: Vector,
    /// `P⊥_{Im x} t`.
    pub t_across: Vector,
    /// `x† t`.
    pub lambda: Vector,
    /// `|P⊥_{Im x} t| − π|x† t|²`.
    pub gap: f64,
    pub atol: f64,
}

impl CutData {
    pub fn new(x: &Mat, t: &Vector, sv_tol: f64) -> Self {
        let (t_along, t_across) = matlin::proj_image(x, t, sv_tol);
        let lambda = matlin::pinv(x, sv_tol) * t;
        let gap = t_across.norm() - PI * lambda.norm_squared();
        Self {
            t_along,
            t_across,
            lambda,
            gap,
            atol: atol_for(t.norm()),
        }
    }

    /// `t ∉ Im x` and the gap is nonnegative, both within `atol`.
    pub fn is_cut(&self) -> bool {
        self.t_across.norm() > self.atol && self.gap >= -self.atol
    }

    pub fn multiplicity(&self) -> Multiplicity {
        if self.gap.abs() <= self.atol {
            Multiplicity::Unique
        } else {
            Multiplicity::Multiple
        }
    }
}

fn check_xt(x: &Mat, t: &Vector) -> Result<()> {
    if x.nrows() != t.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("t ∈ R^{}", x.nrows()),
            found: format!("t ∈ R^{}", t.len()),
        });
    }
    Ok(())
}

/// Decides whether `g` lies in the cut locus of the origin.
pub fn classify(g: &GroupPoint, sv_tol: f64) -> Result<CutClassification> {
    if g.is_identity() {
        return Err(Error::OriginPoint);
    }
    let data = CutData::new(&g.x, &g.t, sv_tol);
    if g.y.norm() > data.atol || !data.is_cut() {
        return Ok(CutClassification::NotCut);
    }
    let multiplicity = data.multiplicity();
    let conjugate = if g.x.ncols() >= 2 {
        ConjugateFlag::Yes
    } else {
        let watts = (g.x.norm() * data.gap).abs();
        if watts <= data.atol {
            ConjugateFlag::Yes
        } else if watts <= 10.0 * data.atol {
            ConjugateFlag::Undecided
        } else {
            ConjugateFlag::No
        }
    };
    let distance = (g.x.norm_squared() + 4.0 * PI * data.t_across.norm()).sqrt();
    Ok(CutClassification::Cut {
        multiplicity,
        conjugate,
        distance,
    })
}

/// `√(|x|² + 4π|P⊥_{Im x} t|)` for a cut point `(x, 0, t)`.
pub fn cut_distance(x: &Mat, t: &Vector, sv_tol: f64) -> Result<f64> {
    check_xt(x, t)?;
    let data = CutData::new(x, t, sv_tol);
    if !data.is_cut() {
        return Err(Error::NotACutPoint);
    }
    Ok((x.norm_squared() + 4.0 * PI * data.t_across.norm()).sqrt())
}

/// All covectors `(ξ, η, τ)` with `|τ| = 1` whose extremal reaches a cut
/// point `(x, 0, t)` at time `2π`.
///
/// They are `ξ = ξ_base − τμᵀ` with `μ ∈ ker x` and any `η` such that
/// `π(|η|² + |μ|²) = ρ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredFamily {
    pub x: Mat,
    pub tau: Vector,
    pub xi_base: Mat,
    /// `x† t`.
    pub lambda_base: Vector,
    pub rho: f64,
    pub kernel_dim: usize,
    atol: f64,
}

impl RecoveredFamily {
    pub fn multiplicity(&self) -> Multiplicity {
        if self.rho * self.rho <= self.atol {
            Multiplicity::Unique
        } else {
            Multiplicity::Multiple
        }
    }

    /// The representative `μ = 0`, `η = ρ/√π·e₁`.
    pub fn canonical_covector(&self) -> Covector {
        let mut eta = Vector::zeros(self.x.ncols());
        eta[0] = self.rho / PI.sqrt();
        Covector {
            xi: self.xi_base.clone(),
            eta,
            tau: self.tau.clone(),
        }
    }

    /// Family member for given `(η, μ)`; `μ` must lie in `ker x` and the pair
    /// must satisfy `π(|η|² + |μ|²) = ρ²` up to the family tolerance.
    pub fn member(&self, eta: &Vector, mu: &Vector) -> Result<Covector> {
        let p = self.x.ncols();
        if eta.len() != p || mu.len() != p {
            return Err(Error::ShapeMismatch {
                expected: format!("η, μ ∈ R^{p}"),
                found: format!("η ∈ R^{}, μ ∈ R^{}", eta.len(), mu.len()),
            });
        }
        let tol = self.atol.sqrt().max(self.atol);
        if (&self.x * mu).norm() > tol * mu.norm().max(1.0) {
            return Err(Error::InvalidArgument("μ is not in ker x".into()));
        }
        let residual = PI * (eta.norm_squared() + mu.norm_squared()) - self.rho * self.rho;
        if residual.abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "π(|η|² + |μ|²) differs from ρ² by {residual:e}"
            )));
        }
        Ok(Covector {
            xi: &self.xi_base - &self.tau * mu.transpose(),
            eta: eta.clone(),
            tau: self.tau.clone(),
        })
    }
}

/// Recovers the minimizing covectors of the cut point `(x, 0, t)`.
pub fn recover_covectors(x: &Mat, t: &Vector, sv_tol: f64) -> Result<RecoveredFamily> {
    check_xt(x, t)?;
    let data = CutData::new(x, t, sv_tol);
    if !data.is_cut() {
        return Err(Error::NotACutPoint);
    }
    let tau = &data.t_across / data.t_across.norm();
    // ξᵀτ = −λ, so that the endpoint's t picks up x·λ = P_{Im x} t.
    let xi_base = -&tau * data.lambda.transpose() + x / (2.0 * PI);
    Ok(RecoveredFamily {
        x: x.clone(),
        tau,
        xi_base,
        lambda_base: data.lambda,
        rho: data.gap.max(0.0).sqrt(),
        kernel_dim: matlin::kernel_dim(x, sv_tol),
        atol: data.atol,
    })
}

/// Multiplicity of the minimizers reaching `endpoint_at_cut(cov)`, read off
/// the covector: multiple iff `η ≠ 0` or `ξᵀτ` has a component in
/// `ker P⊥_τ ξ`.
pub fn multiplicity_from_covector(cov: &Covector, sv_tol: f64) -> Result<Multiplicity> {
    if !cut_time(cov)?.is_finite() {
        return Err(Error::InfiniteCutTime);
    }
    let cov = cov.unit_speed()?;
    let tn = cov.tau.norm();
    let alpha = cov.xi.transpose() * &cov.tau / tn;
    let xi_perp = cov.xi_perp();
    let kernel_part = matlin::proj_kernel(&xi_perp, &alpha, sv_tol);
    // Same gap |P⊥t| − π|x†t|² that classify sees at the cut endpoint.
    let gap = PI / (tn * tn) * (cov.eta.norm_squared() + kernel_part.norm_squared());
    let t_norm = endpoint_at_cut(&cov)?.t.norm();
    Ok(if gap <= atol_for(t_norm) {
        Multiplicity::Unique
    } else {
        Multiplicity::Multiple
    })
}

/// `(x, 0, P_{Im x} t + (1 + ε) P⊥_{Im x} t)`: a cut point with several
/// minimizers arbitrarily close to the unique-minimizer cut point `(x, 0, t)`.
pub fn density_witness(x: &Mat, t: &Vector, eps: f64, sv_tol: f64) -> Result<GroupPoint> {
    check_xt(x, t)?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    let data = CutData::new(x, t, sv_tol);
    if !data.is_cut() || data.multiplicity() != Multiplicity::Unique {
        return Err(Error::NotUniqueCutPoint);
    }
    Ok(GroupPoint {
        x: x.clone(),
        y: Vector::zeros(x.ncols()),
        t: &data.t_along + &data.t_across * (1.0 + eps),
    })
}

fn check_sigma_args(x: &Vector, t: &Vector) -> Result<()> {
    if x.len() != t.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("t ∈ R^{}", x.len()),
            found: format!("t ∈ R^{}", t.len()),
        });
    }
    if x.norm() == 0.0 {
        return Err(Error::ZeroX);
    }
    if t.norm() == 0.0 {
        return Err(Error::ZeroT);
    }
    Ok(())
}

/// `ψ(x, t) = |t|² − ⟨x,t⟩²/|x|² − π²⟨x,t⟩⁴/|x|⁸` for `p = 1`.
///
/// Where `⟨x, t⟩ ≠ 0`, `ψ = 0` is the set of cut points `(x, 0, t)` reached
/// by a unique minimizer.
pub fn sigma_psi(x: &Vector, t: &Vector) -> Result<f64> {
    check_sigma_args(x, t)?;
    let xx = x.norm_squared();
    let xt = x.dot(t);
    let pi2 = PI * PI;
    Ok(t.norm_squared() - xt * xt / xx - pi2 * xt.powi(4) / xx.powi(4))
}

/// Gradients of [`sigma_psi`] and the discriminant of their coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaGradients {
    pub grad_x: Vector,
    pub grad_t: Vector,
    /// `ac − b²` for `∇_t ψ = a t + b x`, `∇_x ψ = b t + c x`.
    pub discriminant: f64,
    /// `|ac| + b²`, the scale against which the discriminant is compared.
    pub discriminant_scale: f64,
}

impl SigmaGradients {
    /// `(∇_x ψ, ∇_t ψ)` has full rank unless `x ∥ t`; here that is judged by
    /// the discriminant against its own scale.
    pub fn discriminant_is_zero(&self, rel_tol: f64) -> bool {
        self.discriminant.abs() <= rel_tol * self.discriminant_scale
    }
}

pub fn sigma_gradients(x: &Vector, t: &Vector) -> Result<SigmaGradients> {
    check_sigma_args(x, t)?;
    let xx = x.norm_squared();
    let xt = x.dot(t);
    let pi2 = PI * PI;
    let k = xt * xt / xx.powi(3);
    let a = 2.0;
    let b = -2.0 * xt / xx * (1.0 + 2.0 * pi2 * k);
    let c = 2.0 * xt * xt / (xx * xx) * (1.0 + 4.0 * pi2 * k);
    Ok(SigmaGradients {
        grad_x: t * b + x * c,
        grad_t: t * a + x * b,
        discriminant: a * c - b * b,
        discriminant_scale: (a * c).abs() + b * b,
    })
}

/// Closed form `−16π⁴⟨x,t⟩⁶/|x|¹⁶` of the discriminant.
pub fn sigma_discriminant_closed_form(x: &Vector, t: &Vector) -> Result<f64> {
    check_sigma_args(x, t)?;
    let pi4 = PI.powi(4);
    Ok(-16.0 * pi4 * x.dot(t).powi(6) / x.norm_squared().powi(8))
}

/// The positive root `r` of `ψ(x, r d) = 0`, if the ray meets the zero set.
///
/// From `ψ(x, r d) = r²(|d|² − ⟨x,d⟩²/|x|²) − r⁴π²⟨x,d⟩⁴/|x|⁸`.
pub fn sigma_ray_root(x: &Vector, d: &Vector) -> Result<Option<f64>> {
    check_sigma_args(x, d)?;
    let xx = x.norm_squared();
    let xd = x.dot(d);
    let across = d.norm_squared() - xd * xd / xx;
    if xd == 0.0 || across <= 0.0 {
        return Ok(None);
    }
    let r2 = across * xx.powi(4) / (PI * PI * xd.powi(4));
    Ok(Some(r2.sqrt()))
}
