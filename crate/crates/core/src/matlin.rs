//! Small dense linear algebra for the operators that appear in `G_qp`:
//! projections along `τ` and onto `Im x`, the Moore-Penrose inverse, and the
//! skew map `A_τ(ξ, η) = (τηᵀ, −ξᵀτ)` with its exponential.
//!
//! Matrices are `nalgebra` dynamic matrices, which store entries column by
//! column. Shapes are small (`q, p ≤ 16`). Singular value decompositions are
//! delegated to `faer`.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Dense real matrix, column-major.
pub type Mat = DMatrix<f64>;
/// Dense real column vector.
pub type Vector = DVector<f64>;

/// Below this value of `|τ|s` the sinc factor of [`exp_a`] is evaluated by
/// its Taylor series.
const SINC_SERIES_BELOW: f64 = 1e-4;

/// An element `(ξ, η)` of the horizontal layer `V₁ = R^{q×p} × R^p`.
///
/// Used both for the horizontal part of covectors and for controls `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalPair {
    pub xi: Mat,
    pub eta: Vector,
}

impl HorizontalPair {
    /// Builds a pair, checking that `eta` has one entry per column of `xi`.
    pub fn new(xi: Mat, eta: Vector) -> Result<Self> {
        if xi.ncols() != eta.len() || xi.nrows() == 0 || xi.ncols() == 0 {
            return Err(Error::ShapeMismatch {
                expected: format!("q×p matrix with p = {}", eta.len()),
                found: format!("{}×{}", xi.nrows(), xi.ncols()),
            });
        }
        Ok(Self { xi, eta })
    }

    pub fn zeros(q: usize, p: usize) -> Self {
        Self {
            xi: Mat::zeros(q, p),
            eta: Vector::zeros(p),
        }
    }

    pub fn q(&self) -> usize {
        self.xi.nrows()
    }

    pub fn p(&self) -> usize {
        self.xi.ncols()
    }

    /// Hilbert-Schmidt inner product `trace(ξᵀξ') + ηᵀη'`.
    pub fn dot(&self, other: &Self) -> f64 {
        self.xi.dot(&other.xi) + self.eta.dot(&other.eta)
    }

    pub fn norm_squared(&self) -> f64 {
        self.xi.norm_squared() + self.eta.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            xi: &self.xi * factor,
            eta: &self.eta * factor,
        }
    }

    /// `self + factor·other`.
    pub fn axpy(&self, factor: f64, other: &Self) -> Self {
        Self {
            xi: &self.xi + &other.xi * factor,
            eta: &self.eta + &other.eta * factor,
        }
    }

    /// Flattens to `qp + p` entries: `ξ` column by column, then `η`.
    pub fn to_flat(&self) -> Vector {
        let mut out = Vector::zeros(self.xi.len() + self.eta.len());
        out.rows_mut(0, self.xi.len())
            .copy_from_slice(self.xi.as_slice());
        out.rows_mut(self.xi.len(), self.eta.len())
            .copy_from(&self.eta);
        out
    }

    /// Inverse of [`HorizontalPair::to_flat`].
    pub fn from_flat(q: usize, p: usize, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), q * p + p, "flat pair has wrong length");
        Self {
            xi: Mat::from_column_slice(q, p, &flat[..q * p]),
            eta: Vector::from_column_slice(&flat[q * p..]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.xi.iter().chain(self.eta.iter()).all(|v| v.is_finite())
    }
}

/// Orthogonal projection `ττᵀ/|τ|²` onto `Span{τ}`.
pub fn proj_tau(tau: &Vector) -> Result<Mat> {
    let norm = tau.norm();
    if norm == 0.0 {
        return Err(Error::ZeroTau);
    }
    let unit = tau / norm;
    Ok(&unit * unit.transpose())
}

/// Orthogonal projection `I − ττᵀ/|τ|²` onto `τ⊥`.
pub fn proj_tau_perp(tau: &Vector) -> Result<Mat> {
    let p = proj_tau(tau)?;
    Ok(Mat::identity(tau.len(), tau.len()) - p)
}

struct Spectrum {
    u: Mat,
    sigma: Vector,
    v_t: Mat,
    cutoff: f64,
}

/// Thin SVD `x = U diag(σ) Vᵀ` with `min(q, p)` singular triples.
fn thin_svd(x: &Mat) -> (Mat, Vector, Mat) {
    let (q, p) = x.shape();
    let k = q.min(p);
    if k == 0 {
        return (Mat::zeros(q, 0), Vector::zeros(0), Mat::zeros(p, 0));
    }
    let fx = faer::Mat::<f64>::from_fn(q, p, |i, j| x[(i, j)]);
    let svd = fx.thin_svd().expect("SVD of a finite matrix");
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    (
        Mat::from_fn(q, k, |i, j| u[(i, j)]),
        Vector::from_fn(k, |i, _| s[i]),
        Mat::from_fn(p, k, |i, j| v[(i, j)]),
    )
}

fn spectrum(x: &Mat, sv_tol: f64) -> Spectrum {
    let (u, sigma, v) = thin_svd(x);
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    Spectrum {
        u,
        sigma,
        v_t: v.transpose(),
        cutoff: sv_tol * sigma_max,
    }
}

impl Spectrum {
    fn kept(&self) -> impl Iterator<Item = usize> + '_ {
        let cutoff = self.cutoff;
        self.sigma
            .iter()
            .enumerate()
            .filter(move |(_, &s)| s > cutoff && s > 0.0)
            .map(|(i, _)| i)
    }
}

/// Moore-Penrose inverse `x†` (a `p×q` matrix for `x` of size `q×p`).
///
/// Singular values at or below `sv_tol·σ_max` are treated as zero, so the
/// zero matrix maps to the zero matrix.
pub fn pinv(x: &Mat, sv_tol: f64) -> Mat {
    let sp = spectrum(x, sv_tol);
    let mut out = Mat::zeros(x.ncols(), x.nrows());
    for i in sp.kept() {
        let u = sp.u.column(i);
        let v = sp.v_t.row(i).transpose();
        out += (v * u.transpose()) / sp.sigma[i];
    }
    out
}

/// Rank of `x` with the relative cutoff `sv_tol`.
pub fn rank(x: &Mat, sv_tol: f64) -> usize {
    spectrum(x, sv_tol).kept().count()
}

/// Splits `t` into `(P_{Im x} t, P⊥_{Im x} t)`.
pub fn proj_image(x: &Mat, t: &Vector, sv_tol: f64) -> (Vector, Vector) {
    let sp = spectrum(x, sv_tol);
    let mut along = Vector::zeros(t.len());
    for i in sp.kept() {
        let u = sp.u.column(i);
        along += u * u.dot(t);
    }
    let across = t - &along;
    (along, across)
}

/// Orthogonal projection of `a ∈ R^p` onto `ker x`.
pub fn proj_kernel(x: &Mat, a: &Vector, sv_tol: f64) -> Vector {
    let sp = spectrum(x, sv_tol);
    let mut row_part = Vector::zeros(a.len());
    for i in sp.kept() {
        let v = sp.v_t.row(i).transpose();
        row_part += &v * v.dot(a);
    }
    a - row_part
}

/// Dimension of `ker x` with the relative cutoff `sv_tol`.
pub fn kernel_dim(x: &Mat, sv_tol: f64) -> usize {
    x.ncols() - rank(x, sv_tol)
}

/// Smallest singular value of `x` counted with the `q - p` implicit zeros
/// when `x` is wide in `R^q`, together with a unit left singular vector and
/// the largest singular value.
///
/// The returned vector spans `(Im x)⊥` whenever `Im x ≠ R^q`. Its sign is
/// fixed so that the first entry of largest magnitude is positive.
pub fn smallest_left_singular(x: &Mat) -> (f64, f64, Vector) {
    let q = x.nrows();
    let cols = x.ncols().max(q);
    let mut padded = Mat::zeros(q, cols);
    padded.columns_mut(0, x.ncols()).copy_from(x);
    let (u, sigma, _) = thin_svd(&padded);
    let (imin, smin) = sigma
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| if s < acc.1 { (i, s) } else { acc });
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let mut vec: Vector = u.column(imin).into_owned();
    let lead = vec.iamax();
    if vec[lead] < 0.0 {
        vec.neg_mut();
    }
    (smin, smax, vec)
}

/// The skew map `A_τ(ξ, η) = (τηᵀ, −ξᵀτ)`.
pub fn apply_a(tau: &Vector, pair: &HorizontalPair) -> HorizontalPair {
    HorizontalPair {
        xi: tau * pair.eta.transpose(),
        eta: -(pair.xi.transpose() * tau),
    }
}

/// `sin φ / φ`, by series near zero.
pub(crate) fn sinc(phi: f64) -> f64 {
    if phi.abs() < SINC_SERIES_BELOW {
        let p2 = phi * phi;
        1.0 - p2 / 6.0 * (1.0 - p2 / 20.0)
    } else {
        phi.sin() / phi
    }
}

/// `e^{−sA_τ}(ξ, η)` in closed form.
///
/// Uses `A_τ³ = −|τ|²A_τ`, which gives
/// `(ξ,η) − sin(|τ|s)/|τ|·A_τ(ξ,η) − (1−cos(|τ|s))/|τ|²·(ττᵀξ, |τ|²η)`.
/// The two coefficients are written as `s·sinc(|τ|s)` and
/// `½s²·sinc(|τ|s/2)²` so nothing is divided by `|τ|`.
pub fn exp_a(s: f64, tau: &Vector, pair: &HorizontalPair) -> HorizontalPair {
    let norm = tau.norm();
    if norm == 0.0 {
        return pair.clone();
    }
    let phi = norm * s;
    let c1 = s * sinc(phi);
    let half = sinc(0.5 * phi);
    let c2 = 0.5 * s * s * half * half;
    let a = apply_a(tau, pair);
    let a2 = HorizontalPair {
        xi: tau * (tau.transpose() * &pair.xi),
        eta: &pair.eta * (norm * norm),
    };
    pair.axpy(-c1, &a).axpy(-c2, &a2)
}
