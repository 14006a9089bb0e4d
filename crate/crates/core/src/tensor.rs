//! Closed-form algebra on 2x2 matrices: spectral functions of symmetric
//! matrices, the trace inequalities used by the energy estimates, and the
//! rotation/stretch decomposition of a velocity gradient relative to an SPD
//! matrix.

use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("matrix is not positive definite (eigenvalue {eigenvalue:e})")]
    NotSpd { eigenvalue: f64 },
    #[error("matrix exponential overflows (eigenvalue {eigenvalue:e})")]
    Overflow { eigenvalue: f64 },
    #[error("non-finite matrix entry")]
    NonFinite,
}

/// Symmetric 2x2 matrix stored as `[[a11, a12], [a12, a22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymMat {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

/// General 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2(pub [[f64; 2]; 2]);

/// Orthonormal eigendecomposition `s = l1 v1 v1^T + l2 v2 v2^T` with
/// `v1 = (c, s)`, `v2 = (-s, c)` and `l1 >= l2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen {
    pub l1: f64,
    pub l2: f64,
    pub cos: f64,
    pub sin: f64,
}

impl Eigen {
    /// Rotation whose columns are the eigenvectors.
    pub fn frame(&self) -> Mat2 {
        Mat2([[self.cos, -self.sin], [self.sin, self.cos]])
    }

    /// Reassemble `f(l1) v1 v1^T + f(l2) v2 v2^T`.
    pub fn compose(&self, f1: f64, f2: f64) -> SymMat {
        let (c, s) = (self.cos, self.sin);
        SymMat {
            a11: f1 * c * c + f2 * s * s,
            a12: (f1 - f2) * c * s,
            a22: f1 * s * s + f2 * c * c,
        }
    }
}

impl SymMat {
    pub const ZERO: SymMat = SymMat { a11: 0.0, a12: 0.0, a22: 0.0 };
    pub const IDENTITY: SymMat = SymMat { a11: 1.0, a12: 0.0, a22: 1.0 };

    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        SymMat { a11, a12, a22 }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        SymMat { a11: a, a12: 0.0, a22: b }
    }

    pub fn scalar(a: f64) -> Self {
        SymMat::diag(a, a)
    }

    /// Components in storage order `(a11, a12, a22)`.
    pub fn to_array(self) -> [f64; 3] {
        [self.a11, self.a12, self.a22]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        SymMat { a11: a[0], a12: a[1], a22: a[2] }
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    /// Double contraction `self : other`.
    pub fn ddot(&self, other: &SymMat) -> f64 {
        self.a11 * other.a11 + 2.0 * self.a12 * other.a12 + self.a22 * other.a22
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn to_mat(self) -> Mat2 {
        Mat2([[self.a11, self.a12], [self.a12, self.a22]])
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a22.is_finite()
    }

    pub fn eigen(&self) -> Eigen {
        let m = 0.5 * (self.a11 + self.a22);
        let d = 0.5 * (self.a11 - self.a22);
        let r = d.hypot(self.a12);
        let theta = 0.5 * (2.0 * self.a12).atan2(self.a11 - self.a22);
        Eigen { l1: m + r, l2: m - r, cos: theta.cos(), sin: theta.sin() }
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        let e = self.eigen();
        (e.l1, e.l2)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().l2
    }

    /// Apply a scalar function spectrally.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMat {
        let e = self.eigen();
        e.compose(f(e.l1), f(e.l2))
    }

    /// Inverse, without any positivity requirement.
    pub fn inverse(&self) -> SymMat {
        let det = self.det();
        SymMat { a11: self.a22 / det, a12: -self.a12 / det, a22: self.a11 / det }
    }

    /// Check positive definiteness with the threshold `1e-14 (1 + rho)`.
    pub fn to_spd(self) -> Result<SpdMat, TensorError> {
        SpdMat::new(self)
    }

    /// `q^T self q` for a general matrix `q`.
    pub fn congruence_t(&self, q: &Mat2) -> SymMat {
        let m = q.transpose().mul_mat(&self.to_mat()).mul_mat(q);
        m.sym()
    }

    /// `q self q^T` for a general matrix `q`.
    pub fn congruence(&self, q: &Mat2) -> SymMat {
        let m = q.mul_mat(&self.to_mat()).mul_mat(&q.transpose());
        m.sym()
    }
}

impl Add for SymMat {
    type Output = SymMat;
    fn add(self, o: SymMat) -> SymMat {
        SymMat::new(self.a11 + o.a11, self.a12 + o.a12, self.a22 + o.a22)
    }
}

impl Sub for SymMat {
    type Output = SymMat;
    fn sub(self, o: SymMat) -> SymMat {
        SymMat::new(self.a11 - o.a11, self.a12 - o.a12, self.a22 - o.a22)
    }
}

impl Neg for SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        SymMat::new(-self.a11, -self.a12, -self.a22)
    }
}

impl Mul<SymMat> for f64 {
    type Output = SymMat;
    fn mul(self, s: SymMat) -> SymMat {
        SymMat::new(self * s.a11, self * s.a12, self * s.a22)
    }
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0; 2]; 2]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    /// Antisymmetric matrix `[[0, w], [-w, 0]]`.
    pub fn antisym_from(w: f64) -> Mat2 {
        Mat2([[0.0, w], [-w, 0.0]])
    }

    pub fn transpose(&self) -> Mat2 {
        let m = self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn mul_mat(&self, o: &Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(c)
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        let m = self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn inverse(&self) -> Mat2 {
        let d = self.det();
        let m = self.0;
        Mat2([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
    }

    /// Symmetric part.
    pub fn sym(&self) -> SymMat {
        let m = self.0;
        SymMat::new(m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1])
    }

    /// Scalar `w` of the antisymmetric part `[[0, w], [-w, 0]]`.
    pub fn antisym(&self) -> f64 {
        0.5 * (self.0[0][1] - self.0[1][0])
    }

    pub fn ddot(&self, o: &Mat2) -> f64 {
        let (a, b) = (self.0, o.0);
        a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn scale(&self, a: f64) -> Mat2 {
        let m = self.0;
        Mat2([[a * m[0][0], a * m[0][1]], [a * m[1][0], a * m[1][1]]])
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + o.scale(-1.0)
    }
}

impl From<SymMat> for Mat2 {
    fn from(s: SymMat) -> Mat2 {
        s.to_mat()
    }
}

/// Symmetric positive definite 2x2 matrix. Constructed only through a
/// positivity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdMat(SymMat);

impl SpdMat {
    pub fn new(s: SymMat) -> Result<SpdMat, TensorError> {
        if !s.is_finite() {
            return Err(TensorError::NonFinite);
        }
        let (l1, l2) = s.eigenvalues();
        let threshold = 1e-14 * (1.0 + l1.abs().max(l2.abs()));
        if l2 <= threshold || s.trace() <= 0.0 {
            return Err(TensorError::NotSpd { eigenvalue: l2 });
        }
        Ok(SpdMat(s))
    }

    pub fn identity() -> SpdMat {
        SpdMat(SymMat::IDENTITY)
    }

    pub fn sym(&self) -> SymMat {
        self.0
    }

    pub fn inverse(&self) -> SpdMat {
        SpdMat(self.0.inverse())
    }
}

impl std::ops::Deref for SpdMat {
    type Target = SymMat;
    fn deref(&self) -> &SymMat {
        &self.0
    }
}

/// Matrix logarithm `R^T ln(L) R`.
pub fn spd_log(s: &SpdMat) -> SymMat {
    let e = s.eigen();
    e.compose(e.l1.ln(), e.l2.ln())
}

/// Matrix logarithm with the positivity check folded in.
pub fn try_log(s: &SymMat) -> Result<SymMat, TensorError> {
    Ok(spd_log(&s.to_spd()?))
}

/// Matrix exponential of a symmetric matrix.
pub fn spd_exp(s: &SymMat) -> Result<SpdMat, TensorError> {
    if !s.is_finite() {
        return Err(TensorError::NonFinite);
    }
    let e = s.eigen();
    if e.l1 > 700.0 {
        return Err(TensorError::Overflow { eigenvalue: e.l1 });
    }
    let m = e.compose(e.l1.exp(), e.l2.exp());
    SpdMat::new(m)
}

/// First divided difference of `exp`, stable when `a` and `b` are close.
fn exp_divided_difference(a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    let d = 0.5 * (a - b);
    let ratio = if d.abs() < 1e-5 {
        1.0 + d * d / 6.0 + d.powi(4) / 120.0
    } else {
        d.sinh() / d
    };
    m.exp() * ratio
}

/// Frechet derivative `D exp(s)[h]` of the matrix exponential at a
/// symmetric matrix, by divided differences in the eigenframe of `s`.
pub fn exp_derivative(s: &SymMat, h: &SymMat) -> SymMat {
    let e = s.eigen();
    let q = e.frame();
    let hp = h.congruence_t(&q);
    let d11 = e.l1.exp() * hp.a11;
    let d22 = e.l2.exp() * hp.a22;
    let d12 = exp_divided_difference(e.l1, e.l2) * hp.a12;
    SymMat::new(d11, d12, d22).congruence(&q)
}

/// Returns `(tr(s - ln s - I), tr(s + s^-1 - 2I))`.
pub fn entropy_terms(s: &SpdMat) -> (f64, f64) {
    let (l1, l2) = s.eigenvalues();
    let a = (l1 - l1.ln() - 1.0) + (l2 - l2.ln() - 1.0);
    let b = (l1 + 1.0 / l1 - 2.0) + (l2 + 1.0 / l2 - 2.0);
    (a, b)
}

/// Exponential counterparts `(tr(e^p - p - I), tr(e^p + e^-p - 2I))` for a
/// symmetric `p`.
pub fn log_entropy_terms(p: &SymMat) -> (f64, f64) {
    let (l1, l2) = p.eigenvalues();
    let a = (l1.exp() - l1 - 1.0) + (l2.exp() - l2 - 1.0);
    let b = (l1.exp() + (-l1).exp() - 2.0) + (l2.exp() + (-l2).exp() - 2.0);
    (a, b)
}

/// Slacks of the pairwise trace inequalities. Every `*_slack` field is
/// non-negative in exact arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairReport {
    /// `ln det s - tr ln s` (an identity, reported as an absolute residual).
    pub trln_residual: f64,
    /// `tr(s - ln s - I)`.
    pub entropy_slack: f64,
    /// `tr(s + s^-1 - 2I)`.
    pub inverse_slack: f64,
    /// `tr(s t)`.
    pub product_slack: f64,
    /// `tr(s t^-1 - I) - tr(ln s - ln t)`.
    pub logdet_slack: f64,
    /// `|ln det(s t^-1) - tr(ln s - ln t)|`.
    pub logdet_residual: f64,
    /// `tr((ln s - ln t) s) - tr(s - t)`.
    pub relative_entropy_slack: f64,
}

impl PairReport {
    /// Smallest inequality slack.
    pub fn worst_slack(&self) -> f64 {
        self.entropy_slack
            .min(self.inverse_slack)
            .min(self.product_slack)
            .min(self.logdet_slack)
            .min(self.relative_entropy_slack)
    }
}

pub fn verify_pair_inequalities(s: &SpdMat, t: &SpdMat) -> PairReport {
    let ls = spd_log(s);
    let lt = spd_log(t);
    let tinv = t.inverse();
    let st = s.to_mat().mul_mat(&t.to_mat());
    let stinv = s.to_mat().mul_mat(&tinv.to_mat());
    let (entropy_slack, inverse_slack) = entropy_terms(s);
    let tr_diff = ls.trace() - lt.trace();
    let logdet_slack = if *s == *t { 0.0 } else { stinv.trace() - 2.0 - tr_diff };
    let relative_entropy_slack =
        if *s == *t { 0.0 } else { (ls - lt).ddot(s) - (s.trace() - t.trace()) };
    PairReport {
        trln_residual: (s.det().ln() - ls.trace()).abs(),
        entropy_slack,
        inverse_slack,
        product_slack: st.trace(),
        logdet_slack,
        logdet_residual: (stinv.det().ln() - tr_diff).abs(),
        relative_entropy_slack,
    }
}

/// `grad = omega J + b + n J s^-1` with `J = [[0, 1], [-1, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradDecomposition {
    pub omega: f64,
    pub b: SymMat,
    pub n: f64,
}

impl GradDecomposition {
    pub fn omega_mat(&self) -> Mat2 {
        Mat2::antisym_from(self.omega)
    }

    pub fn n_mat(&self) -> Mat2 {
        Mat2::antisym_from(self.n)
    }

    /// `Omega + B + N s^-1`, with `s^-1` taken in the eigenframe of `s`;
    /// the adjugate inverse loses `cond(s)` digits.
    pub fn reconstruct(&self, s: &SpdMat) -> Mat2 {
        let e = s.eigen();
        let q = e.frame();
        // Rotations commute in 2D, so Omega is the same in the frame.
        let off = Mat2([[0.0, self.omega + self.n / e.l2], [-self.omega - self.n / e.l1, 0.0]]);
        q.mul_mat(&off).mul_mat(&q.transpose()) + self.b.to_mat()
    }
}

/// Rotation/stretch decomposition of a velocity gradient relative to `s`.
///
/// In the eigenframe of `s`, `B` is the diagonal of the rotated gradient and
/// the off-diagonal part is split between `Omega` and `N s^-1`. When the
/// eigenvalue gap is below `degeneracy_tol` times the spectral radius the
/// frame is undefined and `B` takes the whole symmetric part.
pub fn decompose_gradient(g: &Mat2, s: &SpdMat, degeneracy_tol: f64) -> GradDecomposition {
    decompose_in_frame(g, &s.eigen(), degeneracy_tol)
}

/// Same as [`decompose_gradient`] for a precomputed eigendecomposition. The
/// result is linear in `g`.
pub fn decompose_in_frame(g: &Mat2, e: &Eigen, degeneracy_tol: f64) -> GradDecomposition {
    let gap = e.l1 - e.l2;
    if gap <= degeneracy_tol * e.l1.abs().max(e.l2.abs()) {
        return GradDecomposition { omega: g.antisym(), b: g.sym(), n: 0.0 };
    }
    let q = e.frame();
    let gp = q.transpose().mul_mat(g).mul_mat(&q).0;
    let n = (gp[0][1] + gp[1][0]) * e.l1 * e.l2 / gap;
    let omega = gp[0][1] - n / e.l2;
    let b = SymMat::diag(gp[0][0], gp[1][1]).congruence(&q);
    GradDecomposition { omega, b, n }
}

/// Finite-difference residuals of the two Jacobi formulas along a path:
/// `|d/dt tr ln s - s' : s^-1|` and `|d/dt tr s - (ln s)' : s|`.
pub fn jacobi_check(
    path: impl Fn(f64) -> SymMat,
    t0: f64,
    h: f64,
) -> Result<(f64, f64), TensorError> {
    let sp = path(t0 + h).to_spd()?;
    let sm = path(t0 - h).to_spd()?;
    let s0 = path(t0).to_spd()?;
    let lp = spd_log(&sp);
    let lm = spd_log(&sm);
    let inv = 1.0 / (2.0 * h);
    let dtrln = (lp.trace() - lm.trace()) * inv;
    let ds = inv * (sp.sym() - sm.sym());
    let r1 = (dtrln - ds.ddot(&s0.inverse())).abs();
    let dtr = (sp.trace() - sm.trace()) * inv;
    let dlog = inv * (lp - lm);
    let r2 = (dtr - dlog.ddot(&s0)).abs();
    Ok((r1, r2))
}

/// Rotation matrix by angle `a`.
pub fn rotation(a: f64) -> Mat2 {
    let (s, c) = a.sin_cos();
    Mat2([[c, -s], [s, c]])
}
