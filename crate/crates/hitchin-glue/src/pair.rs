//! Connection/Higgs pairs in neck coordinates and the pointwise Hitchin operator.
//!
//! A pair is stored by its coefficients in `A = A_tau dtau + A_theta dvartheta` and
//! `Phi = phi dzeta`. The (0,1) part of the connection is `a = (A_tau + i A_theta)/2`
//! and `d/dzetabar = (d_tau + i d_theta)/2`.

use std::path::Path;

use crate::algebra::{bracket, Mat2, I};
use crate::error::Result;
use crate::geometry::{ComponentTag, Field2D, NeckField, NeckGrid};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairValue {
    pub a_tau: Mat2,
    pub a_theta: Mat2,
    pub phi: Mat2,
}

impl PairValue {
    /// The (0,1) coefficient `a`.
    pub fn a01(&self) -> Mat2 {
        (self.a_tau + self.a_theta.scale(I)).scale_re(0.5)
    }

    pub fn from_a01(a: Mat2, phi: Mat2) -> Self {
        let a_adj = a.adjoint();
        Self { a_tau: a - a_adj, a_theta: (a + a_adj).scale(-I), phi }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            a_tau: self.a_tau - other.a_tau,
            a_theta: self.a_theta - other.a_theta,
            phi: self.phi - other.phi,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.a_tau.max_abs().max(self.a_theta.max_abs()).max(self.phi.max_abs())
    }

    /// Complex gauge action of `g` given its derivatives `g_tau`, `g_theta`:
    /// `a -> g^-1 a g + g^-1 dbar g`, `phi -> g^-1 phi g`.
    pub fn gauge(&self, g: &Mat2, g_tau: &Mat2, g_theta: &Mat2) -> Self {
        let g_inv = g.inverse();
        let dbar_g = (*g_tau + g_theta.scale(I)).scale_re(0.5);
        let a = g_inv * self.a01() * *g + g_inv * dbar_g;
        Self::from_a01(a, g_inv * self.phi * *g)
    }
}

/// Value plus first derivatives in `tau` and `vartheta`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairJet {
    pub value: PairValue,
    pub d_tau: PairValue,
    pub d_theta: PairValue,
}

/// First Hitchin equation written as a hermitian section:
/// `-i (dA_theta/dtau - dA_tau/dtheta + [A_tau, A_theta]) - 2 [phi, phi^*]`.
pub fn first_equation(jet: &PairJet) -> Mat2 {
    let v = &jet.value;
    let curvature = jet.d_tau.a_theta - jet.d_theta.a_tau + bracket(&v.a_tau, &v.a_theta);
    curvature.scale(-I) - bracket(&v.phi, &v.phi.adjoint()).scale_re(2.0)
}

/// Second Hitchin equation: coefficient of `dzetabar ^ dzeta` in `dbar_A Phi`.
pub fn second_equation(jet: &PairJet) -> Mat2 {
    let v = &jet.value;
    (jet.d_tau.phi + jet.d_theta.phi.scale(I)).scale_re(0.5) + bracket(&v.a01(), &v.phi)
}

/// A pair sampled on the neck grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HiggsPair {
    pub a_tau: NeckField,
    pub a_theta: NeckField,
    pub phi: NeckField,
}

impl HiggsPair {
    pub fn from_fn(grid: &NeckGrid, f: impl Fn(f64, f64) -> PairValue) -> Self {
        let n = grid.n_tau() * grid.n_theta;
        let mut values = Vec::with_capacity(n);
        for i in 0..grid.n_tau() {
            for k in 0..grid.n_theta {
                values.push(f(grid.tau_nodes[i], grid.theta(k)));
            }
        }
        Self::from_values(grid, &values)
    }

    pub fn from_values(grid: &NeckGrid, values: &[PairValue]) -> Self {
        Self::from_values_sized(grid.n_tau(), grid.n_theta, values)
    }

    /// Node-major samples on any `n_nodes x n_theta` grid.
    pub fn from_values_sized(n_nodes: usize, n_theta: usize, values: &[PairValue]) -> Self {
        let field = |sel: fn(&PairValue) -> Mat2| NeckField {
            n_tau: n_nodes,
            n_theta,
            values: values.iter().map(sel).collect(),
        };
        Self { a_tau: field(|v| v.a_tau), a_theta: field(|v| v.a_theta), phi: field(|v| v.phi) }
    }

    pub fn value(&self, idx: usize) -> PairValue {
        PairValue { a_tau: self.a_tau.values[idx], a_theta: self.a_theta.values[idx], phi: self.phi.values[idx] }
    }

    pub fn len(&self) -> usize {
        self.phi.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.values.is_empty()
    }

    pub fn max_difference(&self, other: &Self) -> f64 {
        (0..self.len()).map(|i| self.value(i).sub(&other.value(i)).max_abs()).fold(0.0, f64::max)
    }

    pub fn is_theta_independent(&self, tol: f64) -> bool {
        self.a_tau.theta_independent(tol) && self.a_theta.theta_independent(tol) && self.phi.theta_independent(tol)
    }

    /// Fourier coefficients in the z-disk conventions: `dtau`, `dtheta` and `dz/z` coefficients.
    /// Since `dtheta = -dvartheta` and `dz/z = -dzeta` on the z-side, two of them flip sign.
    pub fn to_fields(&self) -> [Field2D; 3] {
        [
            Field2D::from_physical(&self.a_tau, ComponentTag::ConnectionDtau),
            Field2D::from_physical(&self.a_theta.map(|m| -*m), ComponentTag::ConnectionDtheta),
            Field2D::from_physical(&self.phi.map(|m| -*m), ComponentTag::HiggsDzOverZ),
        ]
    }

    pub fn from_fields(fields: &[Field2D; 3]) -> Result<Self> {
        fields[0].expect_tag(ComponentTag::ConnectionDtau)?;
        fields[1].expect_tag(ComponentTag::ConnectionDtheta)?;
        fields[2].expect_tag(ComponentTag::HiggsDzOverZ)?;
        Ok(Self {
            a_tau: fields[0].to_physical(),
            a_theta: fields[1].to_physical().map(|m| -*m),
            phi: fields[2].to_physical().map(|m| -*m),
        })
    }

    pub fn write_dir(&self, dir: &Path, prefix: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let [a_tau, a_theta, phi] = self.to_fields();
        a_tau.write_json(&dir.join(format!("{prefix}_a_tau.json")))?;
        a_theta.write_json(&dir.join(format!("{prefix}_a_theta.json")))?;
        phi.write_json(&dir.join(format!("{prefix}_phi.json")))?;
        Ok(())
    }
}
