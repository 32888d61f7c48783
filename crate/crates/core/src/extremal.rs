//! Normal extremals from the origin.
//!
//! A covector `(ξ, η, τ) ∈ T*_0 G_qp` determines the control
//! `(u, v)(s) = e^{−sA_τ}(ξ, η)` and hence the curve `γ(s; ξ, η, τ)`, which
//! has a closed form in terms of
//!
//! ```text
//! T(φ) = sin φ / φ,   U(φ) = (φ − sin φ cos φ)/(4φ²),   V(φ) = (sin φ − φ cos φ)/(2φ²)
//! ```
//!
//! evaluated at `φ = |τ|s/2`. The curve minimizes length up to `2π/|τ|`
//! unless it is a Euclidean line, in which case it minimizes forever.

use std::f64::consts::PI;

use crate::group::{q_form, GroupPoint, GroupShape};
use crate::matlin::{self, apply_a, exp_a, HorizontalPair, Mat, Vector};
use crate::{Error, Result};

/// Relative threshold on `|η|² + |P_τ ξ|²` (against `|(ξ,η)|²`) below which
/// an extremal with `τ ≠ 0` is treated as a Euclidean line.
pub const LINE_TOL: f64 = 1e-12;

/// Below this `φ` the functions `U` and `V` are summed from their series.
const TUV_SERIES_BELOW: f64 = 0.5;

/// A covector `(ξ, η, τ)` at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Covector {
    pub xi: Mat,
    pub eta: Vector,
    pub tau: Vector,
}

impl Covector {
    pub fn new(xi: Mat, eta: Vector, tau: Vector) -> Result<Self> {
        let shape = GroupShape::new(xi.nrows(), xi.ncols())?;
        if eta.len() != shape.p || tau.len() != shape.q {
            return Err(Error::ShapeMismatch {
                expected: format!("η ∈ R^{}, τ ∈ R^{}", shape.p, shape.q),
                found: format!("η ∈ R^{}, τ ∈ R^{}", eta.len(), tau.len()),
            });
        }
        let cov = Self { xi, eta, tau };
        if !cov.to_flat().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite covector entry".into()));
        }
        Ok(cov)
    }

    pub fn zeros(shape: GroupShape) -> Self {
        Self {
            xi: Mat::zeros(shape.q, shape.p),
            eta: Vector::zeros(shape.p),
            tau: Vector::zeros(shape.q),
        }
    }

    pub fn shape(&self) -> GroupShape {
        GroupShape {
            q: self.xi.nrows(),
            p: self.xi.ncols(),
        }
    }

    pub fn horizontal(&self) -> HorizontalPair {
        HorizontalPair {
            xi: self.xi.clone(),
            eta: self.eta.clone(),
        }
    }

    /// Horizontal speed `|(ξ, η)|` of the extremal.
    pub fn speed(&self) -> f64 {
        self.horizontal().norm()
    }

    /// `H(0, ξ, η, τ) = ½|(ξ, η)|²`.
    pub fn hamiltonian_at_origin(&self) -> f64 {
        0.5 * self.horizontal().norm_squared()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            xi: &self.xi * factor,
            eta: &self.eta * factor,
            tau: &self.tau * factor,
        }
    }

    /// Same extremal reparametrized to unit speed (`τ` scaled along).
    pub fn unit_speed(&self) -> Result<Self> {
        let speed = self.speed();
        if speed == 0.0 {
            return Err(Error::ZeroHorizontal);
        }
        Ok(self.scaled(1.0 / speed))
    }

    /// Entries `ξ` (column-major), `η`, `τ`.
    pub fn to_flat(&self) -> Vector {
        let mut out = Vec::with_capacity(self.shape().dim());
        out.extend_from_slice(self.xi.as_slice());
        out.extend_from_slice(self.eta.as_slice());
        out.extend_from_slice(self.tau.as_slice());
        Vector::from_vec(out)
    }

    pub fn from_flat(shape: GroupShape, flat: &[f64]) -> Self {
        let GroupShape { q, p } = shape;
        assert_eq!(flat.len(), shape.dim(), "flat covector has wrong length");
        Self {
            xi: Mat::from_column_slice(q, p, &flat[..q * p]),
            eta: Vector::from_column_slice(&flat[q * p..q * p + p]),
            tau: Vector::from_column_slice(&flat[q * p + p..]),
        }
    }

    /// `|η|² + |P_τ ξ|²`, the part of the horizontal energy that rotates.
    pub fn rotating_energy(&self) -> f64 {
        let tn = self.tau.norm();
        let along = if tn == 0.0 {
            0.0
        } else {
            (self.xi.transpose() * &self.tau).norm_squared() / (tn * tn)
        };
        self.eta.norm_squared() + along
    }

    /// `P⊥_τ ξ`; equals `ξ` when `τ = 0`.
    pub fn xi_perp(&self) -> Mat {
        let tn = self.tau.norm();
        if tn == 0.0 {
            return self.xi.clone();
        }
        let n = &self.tau / tn;
        &self.xi - &n * (n.transpose() * &self.xi)
    }
}

/// First time after which the extremal stops minimizing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutTime {
    Finite(f64),
    Infinite,
}

impl CutTime {
    pub fn value(self) -> f64 {
        match self {
            CutTime::Finite(v) => v,
            CutTime::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, CutTime::Finite(_))
    }
}

/// A covector together with an end time.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalArc {
    pub cov: Covector,
    pub s_end: f64,
}

impl ExtremalArc {
    pub fn new(cov: Covector, s_end: f64) -> Result<Self> {
        if cov.speed() == 0.0 {
            return Err(Error::ZeroHorizontal);
        }
        if !(s_end > 0.0) {
            return Err(Error::InvalidArgument(format!("s_end must be positive, got {s_end}")));
        }
        Ok(Self { cov, s_end })
    }

    pub fn point(&self, s: f64) -> GroupPoint {
        geodesic(s, &self.cov)
    }

    pub fn control(&self, s: f64) -> HorizontalPair {
        control(s, &self.cov)
    }

    pub fn endpoint(&self) -> GroupPoint {
        geodesic(self.s_end, &self.cov)
    }

    pub fn length(&self) -> f64 {
        self.s_end * self.cov.speed()
    }

    /// `n + 1` equally spaced samples on `[0, s_end]`.
    pub fn sample(&self, n: usize) -> Vec<GroupPoint> {
        let n = n.max(1);
        (0..=n)
            .map(|i| geodesic(self.s_end * i as f64 / n as f64, &self.cov))
            .collect()
    }
}

fn u_series(phi: f64) -> f64 {
    // Σ_{k≥1} (−1)^{k+1} 4^{k−1} φ^{2k−1} / (2k+1)!
    let p2 = phi * phi;
    let mut term = phi / 6.0;
    let mut sum = term;
    for k in 1..14 {
        let k = k as f64;
        term *= -4.0 * p2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
        sum += term;
    }
    sum
}

fn v_series(phi: f64) -> f64 {
    // Σ_{k≥1} (−1)^{k+1} k φ^{2k−1} / (2k+1)!
    let p2 = phi * phi;
    let mut fact_term = phi / 6.0; // φ^{2k−1}/(2k+1)! at k = 1
    let mut sum = fact_term;
    for k in 1..14 {
        let kf = k as f64;
        fact_term *= -p2 / ((2.0 * kf + 2.0) * (2.0 * kf + 3.0));
        sum += (kf + 1.0) * fact_term;
    }
    sum
}

/// The functions `(T, U, V)` at `φ ≥ 0`, with their limits `(1, 0, 0)` at 0.
pub fn tuv(phi: f64) -> Result<(f64, f64, f64)> {
    if !(phi >= 0.0) {
        return Err(Error::NegativePhi(phi));
    }
    Ok(tuv_unchecked(phi))
}

fn tuv_unchecked(phi: f64) -> (f64, f64, f64) {
    let t = matlin::sinc(phi);
    if phi < TUV_SERIES_BELOW {
        return (t, u_series(phi), v_series(phi));
    }
    let (s, c) = phi.sin_cos();
    let p2 = phi * phi;
    (t, (phi - s * c) / (4.0 * p2), (s - phi * c) / (2.0 * p2))
}

/// `γ(s; ξ, η, τ)`, the extremal from the origin at time `s`.
///
/// Negative times use `γ(−s; c) = γ(s; −c)`.
pub fn geodesic(s: f64, cov: &Covector) -> GroupPoint {
    if s < 0.0 {
        return geodesic(-s, &cov.scaled(-1.0));
    }
    let tn = cov.tau.norm();
    if tn == 0.0 {
        return GroupPoint {
            x: &cov.xi * s,
            y: &cov.eta * s,
            t: Vector::zeros(cov.tau.len()),
        };
    }
    let n = &cov.tau / tn;
    let alpha = cov.xi.transpose() * &n; // ξᵀτ/|τ|
    let xi_perp = &cov.xi - &n * alpha.transpose();
    let phi = 0.5 * tn * s;
    let (tf, uf, vf) = tuv_unchecked(phi);
    let (sn, cs) = phi.sin_cos();
    let st = s * tf;
    let x = &n * (alpha.transpose() * (st * cs) - cov.eta.transpose() * (st * sn)) + &xi_perp * s;
    let y = &cov.eta * (st * cs) + &alpha * (st * sn);
    let rot = alpha.norm_squared() + cov.eta.norm_squared();
    let mix = &cov.eta * (-sn) + &alpha * cs;
    let t = &n * (s * s * uf * rot) + &xi_perp * mix * (s * s * vf);
    GroupPoint { x, y, t }
}

/// The control `e^{−sA_τ}(ξ, η)` of the extremal.
pub fn control(s: f64, cov: &Covector) -> HorizontalPair {
    exp_a(s, &cov.tau, &cov.horizontal())
}

fn ensure_horizontal(cov: &Covector) -> Result<f64> {
    let speed2 = cov.horizontal().norm_squared();
    if speed2 == 0.0 {
        return Err(Error::ZeroHorizontal);
    }
    Ok(speed2)
}

/// Whether the extremal is a Euclidean line `s ↦ (sξ', sη', 0)`.
pub fn is_line(cov: &Covector) -> Result<bool> {
    let speed2 = ensure_horizontal(cov)?;
    if cov.tau.norm() == 0.0 {
        return Ok(true);
    }
    Ok(cov.rotating_energy() <= LINE_TOL * speed2)
}

/// Cut time: `2π/|τ|`, or infinite for Euclidean lines.
pub fn cut_time(cov: &Covector) -> Result<CutTime> {
    if is_line(cov)? {
        return Ok(CutTime::Infinite);
    }
    Ok(CutTime::Finite(2.0 * PI / cov.tau.norm()))
}

/// `γ(2π/|τ|)` from the closed form
/// `x = (2π/|τ|)P⊥ξ`, `y = 0`,
/// `t = (π/|τ|²)(|P_τξ|² + |η|²)τ/|τ| − (2π/|τ|²)P⊥ξ ξᵀτ/|τ|`.
pub fn endpoint_at_cut(cov: &Covector) -> Result<GroupPoint> {
    if !cut_time(cov)?.is_finite() {
        return Err(Error::InfiniteCutTime);
    }
    let tn = cov.tau.norm();
    let n = &cov.tau / tn;
    let alpha = cov.xi.transpose() * &n;
    let xi_perp = &cov.xi - &n * alpha.transpose();
    let rot = alpha.norm_squared() + cov.eta.norm_squared();
    let t = &n * (PI / (tn * tn) * rot) - &xi_perp * &alpha * (2.0 * PI / (tn * tn));
    Ok(GroupPoint {
        x: xi_perp * (2.0 * PI / tn),
        y: Vector::zeros(cov.eta.len()),
        t,
    })
}

/// Abnormality test.
///
/// Returns a unit `σ` with `A_σ e^{−sA_τ}(ξ, η) ≡ 0` when the extremal is
/// abnormal: `η = 0`, `ξᵀτ = 0` and `Im ξ ≠ R^q`. The certificate is the
/// left singular vector of `ξ` with the smallest singular value.
pub fn abnormal_test(cov: &Covector, sv_tol: f64) -> Result<Option<Vector>> {
    let speed2 = ensure_horizontal(cov)?;
    let shape = cov.shape();
    if shape.q == 1 {
        return Ok(None);
    }
    // Abnormal curves are exactly the lines (sξ, 0, 0).
    if cov.rotating_energy() > LINE_TOL * speed2 {
        return Ok(None);
    }
    let (smin, smax, sigma) = matlin::smallest_left_singular(&cov.xi);
    if smin > sv_tol * smax {
        return Ok(None);
    }
    Ok(Some(sigma))
}

/// Right-hand side of the canonical equations of
/// `H = ½Σ u_αk² + ½Σ v_j²`, `u = ξ − ½τyᵀ`, `v = η + ½xᵀτ`.
fn hamiltonian_rhs(g: &GroupPoint, c: &Covector) -> (GroupPoint, Covector) {
    let u = &c.xi - &c.tau * g.y.transpose() * 0.5;
    let v = &c.eta + g.x.transpose() * &c.tau * 0.5;
    let ctrl = HorizontalPair { xi: u, eta: v };
    let tdot = q_form(&g.horizontal(), &ctrl);
    let dxi = &c.tau * ctrl.eta.transpose() * (-0.5);
    let deta = ctrl.xi.transpose() * &c.tau * 0.5;
    (
        GroupPoint {
            x: ctrl.xi,
            y: ctrl.eta,
            t: tdot,
        },
        Covector {
            xi: dxi,
            eta: deta,
            tau: Vector::zeros(c.tau.len()),
        },
    )
}

/// Value of the Hamiltonian at a point of the cotangent bundle.
pub fn hamiltonian(g: &GroupPoint, c: &Covector) -> f64 {
    let u = &c.xi - &c.tau * g.y.transpose() * 0.5;
    let v = &c.eta + g.x.transpose() * &c.tau * 0.5;
    0.5 * (u.norm_squared() + v.norm_squared())
}

fn step_state(g: &GroupPoint, c: &Covector, dg: &GroupPoint, dc: &Covector, h: f64) -> (GroupPoint, Covector) {
    (
        GroupPoint {
            x: &g.x + &dg.x * h,
            y: &g.y + &dg.y * h,
            t: &g.t + &dg.t * h,
        },
        Covector {
            xi: &c.xi + &dc.xi * h,
            eta: &c.eta + &dc.eta * h,
            tau: &c.tau + &dc.tau * h,
        },
    )
}

/// Integrates the Hamiltonian system from `(origin, cov)` with `steps` RK4
/// steps on `[0, s_end]`. Returns `steps + 1` states.
pub fn hamiltonian_flow(s_end: f64, cov: &Covector, steps: usize) -> Result<Vec<(GroupPoint, Covector)>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be ≥ 1".into()));
    }
    let h = s_end / steps as f64;
    let mut g = GroupPoint::identity(cov.shape());
    let mut c = cov.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push((g.clone(), c.clone()));
    for _ in 0..steps {
        let (k1g, k1c) = hamiltonian_rhs(&g, &c);
        let (g2, c2) = step_state(&g, &c, &k1g, &k1c, 0.5 * h);
        let (k2g, k2c) = hamiltonian_rhs(&g2, &c2);
        let (g3, c3) = step_state(&g, &c, &k2g, &k2c, 0.5 * h);
        let (k3g, k3c) = hamiltonian_rhs(&g3, &c3);
        let (g4, c4) = step_state(&g, &c, &k3g, &k3c, h);
        let (k4g, k4c) = hamiltonian_rhs(&g4, &c4);
        let w = h / 6.0;
        g = GroupPoint {
            x: &g.x + (&k1g.x + &k2g.x * 2.0 + &k3g.x * 2.0 + &k4g.x) * w,
            y: &g.y + (&k1g.y + &k2g.y * 2.0 + &k3g.y * 2.0 + &k4g.y) * w,
            t: &g.t + (&k1g.t + &k2g.t * 2.0 + &k3g.t * 2.0 + &k4g.t) * w,
        };
        c = Covector {
            xi: &c.xi + (&k1c.xi + &k2c.xi * 2.0 + &k3c.xi * 2.0 + &k4c.xi) * w,
            eta: &c.eta + (&k1c.eta + &k2c.eta * 2.0 + &k3c.eta * 2.0 + &k4c.eta) * w,
            tau: c.tau.clone(),
        };
        out.push((g.clone(), c.clone()));
    }
    Ok(out)
}

/// Step in `σ` for the central differences of [`liouville_residual`].
pub const LIOUVILLE_SIGMA_STEP: f64 = 1e-5;
/// RK4 steps per unit time used by [`liouville_residual`].
const LIOUVILLE_STEPS_PER_UNIT: f64 = 400.0;
/// Allowed deviation of the family from `H = ½`.
const LEVEL_SET_TOL: f64 = 1e-10;

/// `max |Σ_j P_j ∂_σ X_j|` over the sampled `(t, σ)` for a family of
/// covectors on the level set `H = ½`.
///
/// `∂_σ X` is taken by central differences of the numerical flow.
pub fn liouville_residual<F>(family: F, sigmas: &[f64], times: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> Covector,
{
    let h = LIOUVILLE_SIGMA_STEP;
    let mut worst: f64 = 0.0;
    for &sigma in sigmas {
        let base = family(sigma);
        let plus = family(sigma + h);
        let minus = family(sigma - h);
        for c in [&base, &plus, &minus] {
            let off = (c.hamiltonian_at_origin() - 0.5).abs();
            if off > LEVEL_SET_TOL {
                return Err(Error::OffLevelSet(off));
            }
        }
        for &t in times {
            let steps = ((t.abs() * LIOUVILLE_STEPS_PER_UNIT).ceil() as usize).max(16);
            let end = |c: &Covector| hamiltonian_flow(t, c, steps).map(|mut v| v.pop().expect("nonempty flow"));
            let (_, p0) = end(&base)?;
            let (gp, _) = end(&plus)?;
            let (gm, _) = end(&minus)?;
            let dx = (gp.to_flat() - gm.to_flat()) / (2.0 * h);
            let residual = p0.to_flat().dot(&dx).abs();
            worst = worst.max(residual);
        }
    }
    Ok(worst)
}

/// `|A_σ e^{−sA_τ}(ξ, η)|`, which vanishes identically for an abnormal certificate `σ`.
pub fn abnormal_residual(sigma: &Vector, s: f64, cov: &Covector) -> f64 {
    apply_a(sigma, &control(s, cov)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn cov(q: usize, p: usize, xi: &[f64], eta: &[f64], tau: &[f64]) -> Covector {
        Covector::new(
            Mat::from_column_slice(q, p, xi),
            Vector::from_column_slice(eta),
            Vector::from_column_slice(tau),
        )
        .unwrap()
    }

    fn rand_cov(rng: &mut ChaCha8Rng, q: usize, p: usize) -> Covector {
        Covector {
            xi: Mat::from_fn(q, p, |_, _| rng.sample(StandardNormal)),
            eta: Vector::from_fn(p, |_, _| rng.sample(StandardNormal)),
            tau: Vector::from_fn(q, |_, _| rng.sample(StandardNormal)),
        }
    }

    /// Degree-7 Taylor polynomials of T, U, V.
    fn tuv_taylor7(phi: f64) -> (f64, f64, f64) {
        let p2 = phi * phi;
        let t = 1.0 - p2 / 6.0 + p2 * p2 / 120.0 - p2 * p2 * p2 / 5040.0;
        let u = phi / 6.0 - phi * p2 / 30.0 + phi * p2 * p2 / 315.0 - phi * p2 * p2 * p2 * 64.0 / 362880.0;
        let v = phi / 6.0 - phi * p2 / 60.0 + phi * p2 * p2 / 1680.0 - phi * p2 * p2 * p2 * 4.0 / 362880.0;
        (t, u, v)
    }

    #[test]
    fn tuv_examples() {
        let (t, u, v) = tuv(PI).unwrap();
        assert!(t.abs() < 1e-15);
        assert_relative_eq!(u, 1.0 / (4.0 * PI), max_relative = 1e-14);
        assert_relative_eq!(v, 1.0 / (2.0 * PI), max_relative = 1e-14);
        assert_eq!(tuv(0.0).unwrap(), (1.0, 0.0, 0.0));
        let (t, u, v) = tuv(1e-6).unwrap();
        let (tt, ut, vt) = tuv_taylor7(1e-6);
        assert!((t - tt).abs() < 1e-14);
        assert!((u - ut).abs() < 1e-14 * ut);
        assert!((v - vt).abs() < 1e-14 * vt);
        assert_eq!(tuv(-1.0), Err(Error::NegativePhi(-1.0)));
    }

    #[test]
    fn tuv_series_and_closed_form_agree_near_switch() {
        for &phi in &[0.3, 0.45, 0.5, 0.55, 0.8] {
            let (s, c) = f64::sin_cos(phi);
            let p2 = phi * phi;
            let u_direct = (phi - s * c) / (4.0 * p2);
            let v_direct = (s - phi * c) / (2.0 * p2);
            assert_relative_eq!(u_series(phi), u_direct, max_relative = 1e-13);
            assert_relative_eq!(v_series(phi), v_direct, max_relative = 1e-13);
        }
    }

    #[test]
    fn geodesic_examples() {
        let c = cov(1, 1, &[1.0], &[0.0], &[1.0]);
        let g = geodesic(2.0 * PI, &c);
        assert!(g.x[(0, 0)].abs() < 1e-14 && g.y[0].abs() < 1e-14);
        assert_relative_eq!(g.t[0], PI, max_relative = 1e-14);

        let c = cov(2, 1, &[1.0, 1.0], &[0.0], &[0.0, 1.0]);
        let g = geodesic(2.0 * PI, &c);
        assert_relative_eq!(g.x[(0, 0)], 2.0 * PI, max_relative = 1e-14);
        assert!(g.x[(1, 0)].abs() < 1e-14 && g.y[0].abs() < 1e-14);
        assert_relative_eq!(g.t[0], -2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(g.t[1], PI, max_relative = 1e-14);

        let c = cov(2, 2, &[1.0, 2.0, 3.0, 4.0], &[0.5, -1.0], &[0.0, 0.0]);
        let g = geodesic(1.5, &c);
        assert_eq!(g.x, &c.xi * 1.5);
        assert_eq!(g.y, &c.eta * 1.5);
        assert_eq!(g.t, Vector::zeros(2));
        assert!(geodesic(0.0, &c).is_identity());
    }

    #[test]
    fn geodesic_solves_horizontal_ode() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let h = 1e-5;
        for _ in 0..200 {
            let q = rng.random_range(1..=4);
            let p = rng.random_range(1..=4);
            let c = rand_cov(&mut rng, q, p);
            for i in 1..=20 {
                let s = 3.0 * i as f64 / 21.0;
                let fd = (geodesic(s + h, &c).to_flat() - geodesic(s - h, &c).to_flat()) / (2.0 * h);
                let g = geodesic(s, &c);
                let u = control(s, &c);
                let mut expect = u.to_flat().as_slice().to_vec();
                expect.extend_from_slice(q_form(&g.horizontal(), &u).as_slice());
                let err = (fd - Vector::from_vec(expect)).amax();
                assert!(err < 1e-6, "ODE residual {err}");
            }
        }
    }

    #[test]
    fn geodesic_homogeneity_and_negative_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let c = rand_cov(&mut rng, 3, 2);
            let s = rng.random_range(0.1..2.0);
            for &lambda in &[0.5, 2.0, 10.0] {
                let a = geodesic(lambda * s, &c);
                let b = geodesic(s, &c.scaled(lambda));
                let scale = a.to_flat().amax().max(1.0);
                assert!(a.max_abs_diff(&b) < 1e-11 * scale);
            }
            let back = geodesic(-s, &c);
            assert_eq!(back.max_abs_diff(&geodesic(s, &c.scaled(-1.0))), 0.0);
        }
    }

    #[test]
    fn geodesic_small_tau_is_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let c = rand_cov(&mut rng, 3, 2);
        let line = geodesic(1.0, &Covector { tau: Vector::zeros(3), ..c.clone() });
        for &eps in &[1e-3, 1e-5, 1e-8, 1e-12] {
            let small = Covector { tau: &c.tau * eps, ..c.clone() };
            let g = geodesic(1.0, &small);
            assert!(g.max_abs_diff(&line) < 10.0 * eps);
        }
    }

    #[test]
    fn control_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let c = rand_cov(&mut rng, 2, 3);
        assert_eq!(control(0.0, &c), c.horizontal());
        let period = 2.0 * PI / c.tau.norm();
        assert!(control(period, &c).axpy(-1.0, &c.horizontal()).norm() < 1e-13);
        for i in 0..30 {
            let s = i as f64 * 0.37;
            assert!((control(s, &c).norm() - c.speed()).abs() < 1e-12);
        }
        let h = 1e-6;
        for &s in &[0.3, 1.1, 2.5] {
            let fd = (geodesic(s + h, &c).to_flat() - geodesic(s - h, &c).to_flat()) / (2.0 * h);
            let n = c.shape().horizontal_dim();
            let u = control(s, &c).to_flat();
            assert!((fd.rows(0, n) - u).amax() < 1e-6);
        }
    }

    #[test]
    fn cut_time_examples() {
        let c = cov(2, 1, &[0.3, 0.1], &[1.0], &[0.0, 2.0]);
        assert_eq!(cut_time(&c).unwrap(), CutTime::Finite(PI));
        let c = cov(2, 1, &[0.3, 0.1], &[1.0], &[0.0, 0.0]);
        assert_eq!(cut_time(&c).unwrap(), CutTime::Infinite);
        let c = cov(2, 1, &[1.0, 0.0], &[0.0], &[0.0, 1.0]);
        assert_eq!(cut_time(&c).unwrap(), CutTime::Infinite);
        let c = cov(2, 1, &[0.0, 0.0], &[0.0], &[0.0, 1.0]);
        assert_eq!(cut_time(&c), Err(Error::ZeroHorizontal));
        assert_eq!(CutTime::Infinite.value(), f64::INFINITY);
    }

    #[test]
    fn endpoint_at_cut_examples() {
        let g = endpoint_at_cut(&cov(1, 1, &[1.0], &[0.0], &[1.0])).unwrap();
        assert_eq!(g.x[(0, 0)], 0.0);
        assert_eq!(g.y[0], 0.0);
        assert_relative_eq!(g.t[0], PI, max_relative = 1e-15);
        let g = endpoint_at_cut(&cov(2, 1, &[1.0, 1.0], &[0.0], &[0.0, 1.0])).unwrap();
        assert_relative_eq!(g.x[(0, 0)], 2.0 * PI);
        assert_eq!(g.x[(1, 0)], 0.0);
        assert_relative_eq!(g.t[0], -2.0 * PI);
        assert_relative_eq!(g.t[1], PI);
        assert_eq!(
            endpoint_at_cut(&cov(2, 1, &[1.0, 0.0], &[0.0], &[0.0, 1.0])),
            Err(Error::InfiniteCutTime)
        );
    }

    #[test]
    fn endpoint_at_cut_matches_geodesic_and_eta_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..500 {
            let q = rng.random_range(1..=4);
            let p = rng.random_range(1..=4);
            let c = rand_cov(&mut rng, q, p);
            let s = cut_time(&c).unwrap().value();
            let closed = endpoint_at_cut(&c).unwrap();
            let scale = closed.to_flat().amax().max(1.0);
            assert!(closed.max_abs_diff(&geodesic(s, &c)) < 1e-12 * scale);
            assert!(closed.y.iter().all(|v| *v == 0.0));
            let flipped = Covector { eta: -&c.eta, ..c.clone() };
            assert!(geodesic(s, &flipped).max_abs_diff(&geodesic(s, &c)) < 1e-12 * scale);
        }
    }

    #[test]
    fn line_cases() {
        assert!(is_line(&cov(2, 1, &[1.0, 0.0], &[0.5], &[0.0, 0.0])).unwrap());
        let c = cov(2, 1, &[1.0, 0.0], &[0.0], &[0.0, 1.0]);
        assert!(is_line(&c).unwrap());
        let g = geodesic(2.5, &c);
        assert!(g.max_abs_diff(&GroupPoint {
            x: c.xi_perp() * 2.5,
            y: Vector::zeros(1),
            t: Vector::zeros(2)
        }) < 1e-15);
        assert!(!is_line(&cov(2, 1, &[1.0, 0.0], &[0.5], &[0.0, 1.0])).unwrap());
        assert_eq!(is_line(&cov(1, 1, &[0.0], &[0.0], &[1.0])), Err(Error::ZeroHorizontal));
    }

    #[test]
    fn abnormal_examples() {
        let c = cov(2, 1, &[1.0, 0.0], &[0.0], &[0.0, 0.0]);
        let sigma = abnormal_test(&c, 1e-10).unwrap().unwrap();
        assert_relative_eq!(sigma, Vector::from_vec(vec![0.0, 1.0]), epsilon = 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..50 {
            let c = rand_cov(&mut rng, 1, 3);
            assert_eq!(abnormal_test(&c, 1e-10).unwrap(), None);
            let c = rand_cov(&mut rng, 3, 2);
            assert_eq!(abnormal_test(&c, 1e-10).unwrap(), None);
        }
        // Full image: ξ invertible, η = 0, τ = 0 is a normal line.
        let c = cov(2, 2, &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(abnormal_test(&c, 1e-10).unwrap(), None);
        // Line with τ ⊥ Im ξ.
        let c = cov(3, 1, &[1.0, 2.0, 0.0], &[0.0], &[0.0, 0.0, 3.0]);
        let sigma = abnormal_test(&c, 1e-10).unwrap().unwrap();
        for i in 0..50 {
            assert!(abnormal_residual(&sigma, i as f64 * 0.2, &c) < 1e-12);
        }
    }

    #[test]
    fn flow_matches_closed_form_and_conserves_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for _ in 0..20 {
            let q = rng.random_range(1..=3);
            let p = rng.random_range(1..=3);
            let c = rand_cov(&mut rng, q, p);
            let flow = hamiltonian_flow(3.0, &c, 3000).unwrap();
            let h0 = c.hamiltonian_at_origin();
            for (g, p) in flow.iter().step_by(300) {
                assert!((hamiltonian(g, p) - h0).abs() < 1e-10 * h0.max(1.0));
            }
            let (end, _) = flow.last().unwrap();
            assert!(end.max_abs_diff(&geodesic(3.0, &c)) < 1e-8);
        }
    }

    #[test]
    fn heisenberg_flow_traces_circles() {
        let c = cov(1, 1, &[0.8], &[-0.6], &[1.7]);
        let flow = hamiltonian_flow(2.0 * PI / 1.7, &c, 2000).unwrap();
        // (x, y) runs on a circle through the origin of radius 1/|τ|.
        let theta: f64 = f64::atan2(-0.6, 0.8);
        let center = (-(theta.sin()) / 1.7, theta.cos() / 1.7);
        let r = 1.0 / 1.7;
        for (g, _) in &flow {
            let d = ((g.x[(0, 0)] - center.0).powi(2) + (g.y[0] - center.1).powi(2)).sqrt();
            assert!((d - r).abs() < 1e-8);
        }
    }

    #[test]
    fn liouville_examples() {
        let base = cov(2, 2, &[0.6, 0.0, 0.0, 0.0], &[0.8, 0.0], &[0.3, -1.1]);
        let constant = |_: f64| base.clone();
        let r = liouville_residual(constant, &[0.0], &[0.5, 2.0]).unwrap();
        assert!(r < 1e-15);
        let rotating = |s: f64| Covector {
            tau: Vector::from_vec(vec![1.2 * s.cos(), 1.2 * s.sin()]),
            ..base.clone()
        };
        let r = liouville_residual(rotating, &[0.0, 0.7], &[0.5, 1.5, 3.0]).unwrap();
        assert!(r < 1e-7, "residual {r}");
        let off = |_: f64| base.scaled(2.0);
        assert!(matches!(liouville_residual(off, &[0.0], &[1.0]), Err(Error::OffLevelSet(_))));
    }
}
