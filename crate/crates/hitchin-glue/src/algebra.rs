//! 2x2 complex matrix algebra for sl(2,C), su(2) and i su(2).

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Absolute tolerance for the trace-free and hermitian checks at construction.
pub const STRUCTURE_TOL: f64 = 1e-12;

/// Relative singular-value threshold used for kernel detection.
pub const KERNEL_THRESHOLD: f64 = 1e-8;

/// General complex 2x2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Mat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self { a, b, c, d }
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::new(a.into(), b.into(), c.into(), d.into())
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::real(1.0, 0.0, 0.0, 1.0)
    }

    pub fn diag(x: C64, y: C64) -> Self {
        Self::new(x, C64::default(), C64::default(), y)
    }

    /// `diag(x, -x)`.
    pub fn diag_traceless(x: C64) -> Self {
        Self::diag(x, -x)
    }

    pub fn sigma3() -> Self {
        Self::real(1.0, 0.0, 0.0, -1.0)
    }

    pub fn sigma1() -> Self {
        Self::real(0.0, 1.0, 1.0, 0.0)
    }

    pub fn sigma2() -> Self {
        Self::new(C64::default(), -I, I, C64::default())
    }

    pub fn trace(&self) -> C64 {
        self.a + self.d
    }

    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::new(self.a.conj(), self.c.conj(), self.b.conj(), self.d.conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    /// Inverse through the adjugate; the caller guarantees a nonzero determinant.
    pub fn inverse(&self) -> Self {
        let inv_det = self.det().inv();
        Self::new(self.d, -self.b, -self.c, self.a).scale(inv_det)
    }

    pub fn entries(&self) -> [C64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn from_entries(e: [C64; 4]) -> Self {
        Self::new(e[0], e[1], e[2], e[3])
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr() + self.c.norm_sqr() + self.d.norm_sqr()
    }

    /// Real Frobenius inner product `Re tr(x y^*)`.
    pub fn inner(&self, other: &Self) -> f64 {
        (self.a * other.a.conj()
            + self.b * other.b.conj()
            + self.c * other.c.conj()
            + self.d * other.d.conj())
        .re
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Distance from being hermitian, `|x - x^*|`.
    pub fn hermitian_defect(&self) -> f64 {
        (*self - self.adjoint()).max_abs()
    }

    /// Distance from being anti-hermitian, `|x + x^*|`.
    pub fn antihermitian_defect(&self) -> f64 {
        (*self + self.adjoint()).max_abs()
    }

    /// Hermitian part `(x + x^*)/2`.
    pub fn hermitian_part(&self) -> Self {
        (*self + self.adjoint()).scale_re(0.5)
    }

    /// Coordinates of the hermitian trace-free part in the fixed i su(2) basis.
    pub fn herm_coords(&self) -> [f64; 3] {
        let basis = herm_basis();
        [0, 1, 2].map(|k| 0.5 * (*self * basis[k]).trace().re)
    }

    pub fn from_herm_coords(x: [f64; 3]) -> Self {
        Self::new(
            x[0].into(),
            C64::new(x[1], -x[2]),
            C64::new(x[1], x[2]),
            (-x[0]).into(),
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, o: Mat2) {
        *self = *self + o;
    }
}

impl SubAssign for Mat2 {
    fn sub_assign(&mut self, o: Mat2) {
        *self = *self - o;
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        Mat2::new(-self.a, -self.b, -self.c, -self.d)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl Mul<Mat2> for f64 {
    type Output = Mat2;
    fn mul(self, m: Mat2) -> Mat2 {
        m.scale_re(self)
    }
}

impl Mul<Mat2> for C64 {
    type Output = Mat2;
    fn mul(self, m: Mat2) -> Mat2 {
        m.scale(self)
    }
}

/// `xy - yx`.
pub fn bracket(x: &Mat2, y: &Mat2) -> Mat2 {
    *x * *y - *y * *x
}

/// Fixed ordered basis of i su(2): sigma3, sigma1, sigma2.
pub fn herm_basis() -> [Mat2; 3] {
    [Mat2::sigma3(), Mat2::sigma1(), Mat2::sigma2()]
}

/// A trace-free complex 2x2 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Mat2", into = "Mat2")]
pub struct MatSL2(Mat2);

impl MatSL2 {
    pub fn new(m: Mat2) -> Result<Self> {
        if m.trace().norm() > STRUCTURE_TOL {
            return Err(Error::Structure(format!(
                "matrix is not trace-free (|tr| = {:e})",
                m.trace().norm()
            )));
        }
        Ok(Self(m))
    }

    pub fn from_entries(a: C64, b: C64, c: C64, d: C64) -> Result<Self> {
        Self::new(Mat2::new(a, b, c, d))
    }

    pub fn zero() -> Self {
        Self(Mat2::zero())
    }

    pub fn mat(&self) -> &Mat2 {
        &self.0
    }
}

impl TryFrom<Mat2> for MatSL2 {
    type Error = Error;
    fn try_from(m: Mat2) -> Result<Self> {
        Self::new(m)
    }
}

impl From<MatSL2> for Mat2 {
    fn from(m: MatSL2) -> Mat2 {
        m.0
    }
}

/// A hermitian trace-free complex 2x2 matrix, an element of i su(2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Mat2", into = "Mat2")]
pub struct MatISU2(Mat2);

impl MatISU2 {
    pub fn new(m: Mat2) -> Result<Self> {
        if m.trace().norm() > STRUCTURE_TOL {
            return Err(Error::Structure(format!(
                "matrix is not trace-free (|tr| = {:e})",
                m.trace().norm()
            )));
        }
        if m.hermitian_defect() > STRUCTURE_TOL {
            return Err(Error::Structure(format!(
                "matrix is not hermitian (defect {:e})",
                m.hermitian_defect()
            )));
        }
        Ok(Self(m))
    }

    pub fn from_coords(x: [f64; 3]) -> Self {
        Self(Mat2::from_herm_coords(x))
    }

    pub fn coords(&self) -> [f64; 3] {
        self.0.herm_coords()
    }

    pub fn mat(&self) -> &Mat2 {
        &self.0
    }
}

impl TryFrom<Mat2> for MatISU2 {
    type Error = Error;
    fn try_from(m: Mat2) -> Result<Self> {
        Self::new(m)
    }
}

impl From<MatISU2> for Mat2 {
    fn from(m: MatISU2) -> Mat2 {
        m.0
    }
}

pub fn commutator(x: &MatSL2, y: &MatSL2) -> MatSL2 {
    MatSL2(bracket(&x.0, &y.0))
}

/// `[phi^*, [phi, gamma]] + [phi, [phi^*, gamma]]` on raw matrices.
pub fn m_phi(phi: &Mat2, gamma: &Mat2) -> Mat2 {
    let phi_adj = phi.adjoint();
    bracket(&phi_adj, &bracket(phi, gamma)) + bracket(phi, &bracket(&phi_adj, gamma))
}

pub fn m_phi_apply(phi: &MatSL2, gamma: &MatISU2) -> MatISU2 {
    MatISU2(m_phi(&phi.0, &gamma.0))
}

/// Matrix of `M_phi` on i su(2) in the fixed basis. Symmetric since the basis is orthogonal
/// with uniform norm.
pub fn m_phi_matrix(phi: &Mat2) -> Matrix3<f64> {
    let basis = herm_basis();
    let mut m = Matrix3::zeros();
    for (col, e) in basis.iter().enumerate() {
        let image = m_phi(phi, e).herm_coords();
        for row in 0..3 {
            m[(row, col)] = image[row];
        }
    }
    m
}

/// Number of singular values of `m` below `KERNEL_THRESHOLD` times the largest one.
pub fn numerical_kernel_dim(singular_values: &[f64]) -> usize {
    let largest = singular_values.iter().cloned().fold(0.0, f64::max);
    if largest == 0.0 {
        return singular_values.len();
    }
    singular_values
        .iter()
        .filter(|&&s| s <= KERNEL_THRESHOLD * largest)
        .count()
}

/// Kernel dimension of `M_phi` on i su(2): 0 for non-normal phi, 1 for normal nonzero phi,
/// 3 for phi = 0.
pub fn m_phi_kernel_dim(phi: &MatSL2) -> usize {
    let m = m_phi_matrix(&phi.0);
    let sv = m.singular_values();
    numerical_kernel_dim(sv.as_slice())
}

/// `cosh(sqrt(mu))` and `sinh(sqrt(mu))/sqrt(mu)` as entire functions of complex `mu`.
pub fn cosh_sinhc(mu: C64) -> (C64, C64) {
    if mu.norm() < 1e-4 {
        let mu2 = mu * mu;
        let c = 1.0 + mu / 2.0 + mu2 / 24.0 + mu2 * mu / 720.0 + mu2 * mu2 / 40320.0;
        let s = 1.0 + mu / 6.0 + mu2 / 120.0 + mu2 * mu / 5040.0 + mu2 * mu2 / 362880.0;
        (c, s)
    } else {
        let root = mu.sqrt();
        (root.cosh(), root.sinh() / root)
    }
}

/// Exponential of a trace-free matrix. Uses `x^2 = mu I` with `mu = -det x`, so
/// `exp(x) = cosh(sqrt mu) I + sinh(sqrt mu)/sqrt(mu) x`.
pub fn exp_traceless(x: &Mat2) -> Mat2 {
    let mu = -x.det();
    let (c, s) = cosh_sinhc(mu);
    Mat2::identity().scale(c) + x.scale(s)
}

pub fn mat_exp(gamma: &MatISU2) -> Mat2 {
    exp_traceless(&gamma.0)
}

/// Exponential together with its directional derivatives along `dx[k]`.
pub fn exp_traceless_with_derivatives<const K: usize>(x: &Mat2, dx: &[Mat2; K]) -> (Mat2, [Mat2; K]) {
    let mu = -x.det();
    let (c, s) = cosh_sinhc(mu);
    // d/dmu of c and s: c' = s/2 and s' = (c - s)/(2 mu), the latter via series near 0.
    let ds = if mu.norm() < 1e-3 {
        let mu2 = mu * mu;
        1.0 / 6.0 + mu / 60.0 + mu2 / 1680.0 + mu2 * mu / 90720.0
    } else {
        (c - s) / (2.0 * mu)
    };
    let ds = C64::from(ds);
    let dc = s / 2.0;
    let value = Mat2::identity().scale(c) + x.scale(s);
    let derivs = dx.map(|d| {
        // mu = tr(x^2)/2 so d mu = tr(x d).
        let dmu = (*x * d).trace();
        Mat2::identity().scale(dc * dmu) + x.scale(ds * dmu) + d.scale(s)
    });
    (value, derivs)
}

/// Principal logarithm of a positive definite hermitian matrix of determinant 1,
/// returned as a hermitian trace-free matrix.
pub fn log_positive_unimodular(p: &Mat2) -> Mat2 {
    // p = cosh(l) I + sinh(l)/l x with x^2 = l^2 I; the trace-free part squares to sinh(l)^2 I.
    let half_trace = 0.5 * p.trace().re;
    let traceless = *p - Mat2::identity().scale_re(half_trace);
    let sinh_l = (-traceless.det().re).max(0.0).sqrt();
    let l = sinh_l.asinh();
    let factor = if l < 1e-8 { 1.0 - l * l / 6.0 } else { l / sinh_l };
    traceless.scale_re(factor).hermitian_part()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn commutator_of_raising_and_lowering() {
        let x = MatSL2::new(Mat2::real(0.0, 1.0, 0.0, 0.0)).unwrap();
        let y = MatSL2::new(Mat2::real(0.0, 0.0, 1.0, 0.0)).unwrap();
        assert_eq!(*commutator(&x, &y).mat(), Mat2::sigma3());
    }

    #[test]
    fn m_phi_nilpotent_example() {
        let phi = MatSL2::new(Mat2::real(0.0, 1.0, 0.0, 0.0)).unwrap();
        let gamma = MatISU2::new(Mat2::sigma3()).unwrap();
        let out = m_phi_apply(&phi, &gamma);
        assert!((*out.mat() - Mat2::sigma3().scale_re(4.0)).max_abs() < 1e-15);
    }

    #[test]
    fn kernel_dims() {
        let nilpotent = MatSL2::new(Mat2::real(0.0, 1.0, 0.0, 0.0)).unwrap();
        let normal = MatSL2::new(Mat2::sigma3()).unwrap();
        assert_eq!(m_phi_kernel_dim(&nilpotent), 0);
        assert_eq!(m_phi_kernel_dim(&normal), 1);
        assert_eq!(m_phi_kernel_dim(&MatSL2::zero()), 3);
    }

    #[test]
    fn exp_examples() {
        let gamma = MatISU2::new(Mat2::sigma1()).unwrap();
        let e = mat_exp(&gamma);
        let expected = Mat2::real(1f64.cosh(), 1f64.sinh(), 1f64.sinh(), 1f64.cosh());
        assert!((e - expected).max_abs() < 1e-14);
        let d = mat_exp(&MatISU2::new(Mat2::sigma3().scale_re(0.7)).unwrap());
        assert!((d - Mat2::real(0.7f64.exp(), 0.0, 0.0, (-0.7f64).exp())).max_abs() < 1e-14);
    }

    #[test]
    fn rejects_trace() {
        assert!(MatSL2::new(Mat2::identity()).is_err());
        assert!(MatISU2::new(Mat2::new(c(1.0, 0.0), I, I, c(-1.0, 0.0))).is_err());
    }

    #[test]
    fn derivative_of_exp_matches_difference_quotient() {
        let x = Mat2::from_herm_coords([0.3, -0.2, 0.5]);
        let d = Mat2::from_herm_coords([0.1, 0.4, -0.3]);
        let (_, [dexp]) = exp_traceless_with_derivatives(&x, &[d]);
        let h = 1e-6;
        let fd = (exp_traceless(&(x + d.scale_re(h))) - exp_traceless(&(x - d.scale_re(h))))
            .scale_re(0.5 / h);
        assert!((dexp - fd).max_abs() < 1e-8);
    }

    #[test]
    fn log_inverts_exp() {
        let x = Mat2::from_herm_coords([0.3, -0.2, 0.5]);
        let back = log_positive_unimodular(&exp_traceless(&x).scale_re(1.0));
        assert!((back - x).max_abs() < 1e-12);
    }
}
