//! Plumbing coordinates, the neck grid, and Fourier/finite-difference discretization.
//!
//! The neck carries the global coordinate `zeta = tau + i vartheta` with flat metric
//! `dtau^2 + dvartheta^2` and `tau` in `[-(T + L), T + L]`. The seam `|z| = |w| = R/2`
//! sits at `tau = 0`; `tau <= 0` is the z-side (the plus point) and `tau > 0` the w-side.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::algebra::{Mat2, C64};
use crate::error::{Error, Result};

pub const DEFAULT_CAP_LENGTH: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlumbingConfig {
    /// Gluing parameter of `zw = t`.
    pub t: C64,
    /// `|t|`.
    pub rho: f64,
    /// Cutoff radius `R`.
    pub cutoff_radius: f64,
    /// Collar length `L` standing in for the thick part.
    pub cap_length: f64,
    pub n_tau: usize,
    pub n_theta_modes: usize,
}

impl PlumbingConfig {
    /// Config with `|t| = (R/2)^2`, so the cut locus `|z| = |w| = R/2` is the middle of the neck.
    pub fn new(cutoff_radius: f64, n_tau: usize, n_theta_modes: usize) -> Result<Self> {
        let rho = 0.25 * cutoff_radius * cutoff_radius;
        Self::with_parameters(C64::new(rho, 0.0), cutoff_radius, DEFAULT_CAP_LENGTH, n_tau, n_theta_modes)
    }

    pub fn with_parameters(
        t: C64,
        cutoff_radius: f64,
        cap_length: f64,
        n_tau: usize,
        n_theta_modes: usize,
    ) -> Result<Self> {
        let cfg = Self { t, rho: t.norm(), cutoff_radius, cap_length, n_tau, n_theta_modes };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_cap_length(mut self, cap_length: f64) -> Result<Self> {
        self.cap_length = cap_length;
        self.validate()?;
        Ok(self)
    }

    pub fn with_resolution(mut self, n_tau: usize, n_theta_modes: usize) -> Result<Self> {
        self.n_tau = n_tau;
        self.n_theta_modes = n_theta_modes;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.cutoff_radius;
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Config(format!("cutoff radius R = {r} must lie in (0, 1)")));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("|t| = {} must lie in (0, 1)", self.rho)));
        }
        if (self.rho - self.t.norm()).abs() > 1e-12 {
            return Err(Error::Config("rho must equal |t|".into()));
        }
        if r <= 2.0 * self.rho {
            return Err(Error::Config(format!("R = {r} must exceed 2|t| = {}", 2.0 * self.rho)));
        }
        if !(self.cap_length >= 0.0) {
            return Err(Error::Config("cap length must be nonnegative".into()));
        }
        if self.n_tau < 16 {
            return Err(Error::Config(format!("n_tau = {} must be at least 16", self.n_tau)));
        }
        if self.n_theta_modes < 4 {
            return Err(Error::Config(format!(
                "n_theta_modes = {} must be at least 4",
                self.n_theta_modes
            )));
        }
        Ok(())
    }

    /// `T = -log R`.
    pub fn neck_length(&self) -> f64 {
        -self.cutoff_radius.ln()
    }

    /// Half-length `T + L` of the computational neck.
    pub fn half_extent(&self) -> f64 {
        self.neck_length() + self.cap_length
    }

    /// Radius of the cut locus, `sqrt|t|`.
    pub fn seam_radius(&self) -> f64 {
        self.rho.sqrt()
    }

    /// Distance from the node in the local disk coordinate of the side containing `tau`.
    pub fn radius_at(&self, tau: f64) -> f64 {
        self.seam_radius() * tau.abs().exp()
    }

    /// Global `tau` of a point at radius `r` on the given side.
    pub fn tau_at_radius(&self, r: f64, side: Side) -> f64 {
        let s = (r / self.seam_radius()).ln();
        match side {
            Side::Plus => -s,
            Side::Minus => s,
        }
    }

    pub fn grid(&self) -> NeckGrid {
        NeckGrid::new(self.half_extent(), self.n_tau, self.n_theta_modes)
    }
}

/// Side of the neck: `Plus` is the z-disk (`tau <= 0`), `Minus` the w-disk (`tau > 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn of_tau(tau: f64) -> Side {
        if tau > 0.0 {
            Side::Minus
        } else {
            Side::Plus
        }
    }

    /// `d tau = sign * (r d/dr)` along the neck.
    pub fn radial_sign(self) -> f64 {
        match self {
            Side::Plus => -1.0,
            Side::Minus => 1.0,
        }
    }
}

/// `(tau, theta) = (-log|z|, -arg z)`.
pub fn coord_z_to_cyl(z: C64) -> Result<(f64, f64)> {
    if z == C64::default() {
        return Err(Error::OutOfDomain("z = 0 is the node".into()));
    }
    Ok((-z.norm().ln(), -z.arg()))
}

pub fn coord_cyl_to_z(tau: f64, theta: f64) -> C64 {
    C64::from_polar((-tau).exp(), -theta)
}

/// The plumbing identification `w = t/z`.
pub fn glue_map(z: C64, t: C64) -> Result<C64> {
    if z == C64::default() {
        return Err(Error::OutOfDomain("z = 0 is the node".into()));
    }
    Ok(t / z)
}

/// Uniform grid in `tau` with `2N + 1` equispaced samples in `vartheta`.
#[derive(Clone, Debug)]
pub struct NeckGrid {
    pub tau_nodes: Vec<f64>,
    pub theta_modes: Vec<i64>,
    pub quadrature_weights: Vec<f64>,
    pub half_extent: f64,
    pub n_theta: usize,
    fft: FourierPlan,
}

impl NeckGrid {
    pub fn new(half_extent: f64, n_tau: usize, n_theta_modes: usize) -> Self {
        let h = 2.0 * half_extent / (n_tau - 1) as f64;
        let tau_nodes: Vec<f64> = (0..n_tau).map(|i| -half_extent + h * i as f64).collect();
        let mut quadrature_weights = vec![h; n_tau];
        quadrature_weights[0] = 0.5 * h;
        quadrature_weights[n_tau - 1] = 0.5 * h;
        let n = n_theta_modes as i64;
        let n_theta = 2 * n_theta_modes + 1;
        Self {
            tau_nodes,
            theta_modes: (-n..=n).collect(),
            quadrature_weights,
            half_extent,
            n_theta,
            fft: FourierPlan::new(n_theta),
        }
    }

    pub fn n_tau(&self) -> usize {
        self.tau_nodes.len()
    }

    pub fn n_modes(&self) -> usize {
        (self.n_theta - 1) / 2
    }

    pub fn spacing(&self) -> f64 {
        self.tau_nodes[1] - self.tau_nodes[0]
    }

    pub fn theta(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_theta as f64
    }

    /// Area element of one physical sample at node `i`.
    pub fn cell_area(&self, i: usize) -> f64 {
        self.quadrature_weights[i] * 2.0 * PI / self.n_theta as f64
    }

    pub fn fourier(&self) -> &FourierPlan {
        &self.fft
    }

    /// Number of nodes on the z-side, `tau <= 0`.
    pub fn seam_split(&self) -> usize {
        self.tau_nodes.iter().filter(|&&t| t <= 0.0).count()
    }

    pub fn index(&self, node: usize, k: usize) -> usize {
        node * self.n_theta + k
    }
}

/// FFT plans for one angular size.
#[derive(Clone)]
pub struct FourierPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FourierPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierPlan").field("n", &self.n).finish()
    }
}

impl FourierPlan {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Signed frequency of FFT bin `q`.
    pub fn frequency(&self, q: usize) -> i64 {
        if q <= self.n / 2 {
            q as i64
        } else {
            q as i64 - self.n as i64
        }
    }

    /// Samples to coefficients `c_j = (1/n) sum_k v_k e^{-i j theta_k}`, in FFT bin order.
    pub fn analyze(&self, samples: &mut [Complex64]) {
        self.forward.process(samples);
        let scale = 1.0 / self.n as f64;
        samples.iter_mut().for_each(|z| *z *= scale);
    }

    /// Coefficients in FFT bin order to samples.
    pub fn synthesize(&self, coeffs: &mut [Complex64]) {
        self.inverse.process(coeffs);
    }

    /// Spectral derivative of periodic samples, in place.
    pub fn differentiate(&self, samples: &mut [Complex64]) {
        self.analyze(samples);
        for (q, z) in samples.iter_mut().enumerate() {
            let j = self.frequency(q);
            if 2 * j.unsigned_abs() as usize == self.n {
                *z = Complex64::default();
            } else {
                *z *= Complex64::new(0.0, j as f64);
            }
        }
        self.synthesize(samples);
    }

    /// Dense real differentiation matrix acting on real samples.
    pub fn derivative_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut d = vec![vec![0.0; n]; n];
        for col in 0..n {
            let mut e = vec![Complex64::default(); n];
            e[col] = 1.0.into();
            self.differentiate(&mut e);
            for row in 0..n {
                d[row][col] = e[row].re;
            }
        }
        d
    }
}

/// Matrix-valued field sampled at every (tau node, vartheta sample), node-major.
#[derive(Clone, Debug, PartialEq)]
pub struct NeckField {
    pub n_tau: usize,
    pub n_theta: usize,
    pub values: Vec<Mat2>,
}

impl NeckField {
    pub fn zeros(n_tau: usize, n_theta: usize) -> Self {
        Self { n_tau, n_theta, values: vec![Mat2::zero(); n_tau * n_theta] }
    }

    pub fn from_fn(grid: &NeckGrid, mut f: impl FnMut(f64, f64) -> Mat2) -> Self {
        let mut out = Self::zeros(grid.n_tau(), grid.n_theta);
        for i in 0..grid.n_tau() {
            for k in 0..grid.n_theta {
                out.values[i * grid.n_theta + k] = f(grid.tau_nodes[i], grid.theta(k));
            }
        }
        out
    }

    pub fn at(&self, node: usize, k: usize) -> Mat2 {
        self.values[node * self.n_theta + k]
    }

    pub fn at_mut(&mut self, node: usize, k: usize) -> &mut Mat2 {
        &mut self.values[node * self.n_theta + k]
    }

    pub fn map(&self, f: impl Fn(&Mat2) -> Mat2) -> Self {
        Self { n_tau: self.n_tau, n_theta: self.n_theta, values: self.values.iter().map(f).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(&Mat2, &Mat2) -> Mat2) -> Self {
        Self {
            n_tau: self.n_tau,
            n_theta: self.n_theta,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(Mat2::norm).fold(0.0, f64::max)
    }

    /// Sup norm over nodes `range`.
    pub fn sup_norm_on(&self, range: std::ops::Range<usize>) -> f64 {
        range
            .flat_map(|i| (0..self.n_theta).map(move |k| (i, k)))
            .map(|(i, k)| self.at(i, k).norm())
            .fold(0.0, f64::max)
    }

    pub fn l2_norm(&self, grid: &NeckGrid) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.n_tau {
            let w = grid.cell_area(i);
            for k in 0..self.n_theta {
                sum += w * self.at(i, k).norm_sqr();
            }
        }
        sum.sqrt()
    }

    /// Centered second-order derivative in `tau`, one-sided second order at the ends.
    pub fn d_tau(&self, h: f64) -> Self {
        let n = self.n_tau;
        let mut out = Self::zeros(n, self.n_theta);
        for k in 0..self.n_theta {
            for i in 0..n {
                let v = if i == 0 {
                    (self.at(0, k).scale_re(-3.0) + self.at(1, k).scale_re(4.0) - self.at(2, k))
                        .scale_re(0.5 / h)
                } else if i == n - 1 {
                    (self.at(n - 1, k).scale_re(3.0) - self.at(n - 2, k).scale_re(4.0)
                        + self.at(n - 3, k))
                    .scale_re(0.5 / h)
                } else {
                    (self.at(i + 1, k) - self.at(i - 1, k)).scale_re(0.5 / h)
                };
                *out.at_mut(i, k) = v;
            }
        }
        out
    }

    /// Fourth-order derivative in `tau`, one-sided fourth order near the ends.
    pub fn d_tau4(&self, h: f64) -> Self {
        let n = self.n_tau;
        let mut out = Self::zeros(n, self.n_theta);
        for k in 0..self.n_theta {
            let column: Vec<Mat2> = (0..n).map(|i| self.at(i, k)).collect();
            for (i, v) in fourth_order_derivative(&column, h).into_iter().enumerate() {
                *out.at_mut(i, k) = v;
            }
        }
        out
    }

    /// Fourth-order derivative on `[0, split)` and `[split, n)` separately, so that a field
    /// built from two disks is never differenced across the seam.
    pub fn d_tau4_split(&self, h: f64, split: usize) -> Self {
        let n = self.n_tau;
        let mut out = Self::zeros(n, self.n_theta);
        for k in 0..self.n_theta {
            for range in [0..split, split..n] {
                let start = range.start;
                let column: Vec<Mat2> = range.map(|i| self.at(i, k)).collect();
                for (i, v) in fourth_order_derivative(&column, h).into_iter().enumerate() {
                    *out.at_mut(start + i, k) = v;
                }
            }
        }
        out
    }

    /// Centered derivative treating the field as zero beyond both ends.
    pub fn d_tau_zero_padded(&self, h: f64) -> Self {
        let n = self.n_tau;
        let mut out = Self::zeros(n, self.n_theta);
        for k in 0..self.n_theta {
            for i in 0..n {
                let ahead = if i + 1 < n { self.at(i + 1, k) } else { Mat2::zero() };
                let behind = if i > 0 { self.at(i - 1, k) } else { Mat2::zero() };
                *out.at_mut(i, k) = (ahead - behind).scale_re(0.5 / h);
            }
        }
        out
    }

    /// Spectral derivative in `vartheta`.
    pub fn d_theta(&self, plan: &FourierPlan) -> Self {
        let mut out = self.clone();
        let mut buf = vec![Complex64::default(); self.n_theta];
        for i in 0..self.n_tau {
            for entry in 0..4 {
                for k in 0..self.n_theta {
                    buf[k] = self.at(i, k).entries()[entry];
                }
                plan.differentiate(&mut buf);
                for k in 0..self.n_theta {
                    let mut e = out.at(i, k).entries();
                    e[entry] = buf[k];
                    *out.at_mut(i, k) = Mat2::from_entries(e);
                }
            }
        }
        out
    }

    /// Whether every node has the same value at all angular samples.
    pub fn theta_independent(&self, tol: f64) -> bool {
        (0..self.n_tau).all(|i| (1..self.n_theta).all(|k| (self.at(i, k) - self.at(i, 0)).max_abs() <= tol))
    }
}

/// Fourth-order finite-difference derivative of uniformly spaced samples (at least 5).
pub fn fourth_order_derivative(f: &[Mat2], h: f64) -> Vec<Mat2> {
    let n = f.len();
    let combine = |coeffs: &[(usize, f64)]| {
        coeffs.iter().fold(Mat2::zero(), |acc, &(i, c)| acc + f[i].scale_re(c)).scale_re(1.0 / (12.0 * h))
    };
    (0..n)
        .map(|i| match i {
            0 => combine(&[(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)]),
            1 => combine(&[(0, -3.0), (1, -10.0), (2, 18.0), (3, -6.0), (4, 1.0)]),
            _ if i == n - 2 => combine(&[(n - 1, 3.0), (n - 2, 10.0), (n - 3, -18.0), (n - 4, 6.0), (n - 5, -1.0)]),
            _ if i == n - 1 => combine(&[(n - 1, 25.0), (n - 2, -48.0), (n - 3, 36.0), (n - 4, -16.0), (n - 5, 3.0)]),
            _ => combine(&[(i - 2, 1.0), (i - 1, -8.0), (i + 1, 8.0), (i + 2, -1.0)]),
        })
        .collect()
}

/// What a `Field2D` coefficient represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentTag {
    /// Coefficient of `dtau` of an anti-hermitian connection.
    ConnectionDtau,
    /// Coefficient of `dtheta` of an anti-hermitian connection.
    ConnectionDtheta,
    /// Coefficient of `dz/z` of a Higgs field.
    HiggsDzOverZ,
    /// A section of End E, or a scalar stored as `diag(u, -u)`.
    ScalarSection,
    /// Coefficient of `dr ^ dtheta` of a 2-form.
    TwoFormDrDtheta,
}

impl fmt::Display for ComponentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ComponentTag::ConnectionDtau => "connection_dtau",
            ComponentTag::ConnectionDtheta => "connection_dtheta",
            ComponentTag::HiggsDzOverZ => "higgs_dz_over_z",
            ComponentTag::ScalarSection => "scalar_section",
            ComponentTag::TwoFormDrDtheta => "two_form_dr_dtheta",
        };
        f.write_str(s)
    }
}

/// Fourier coefficients per (mode, node); modes run `-N..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field2D {
    pub n_tau: usize,
    pub n_theta_modes: usize,
    pub tag: ComponentTag,
    /// Row-major `(mode index, node)`, mode index `j + N`.
    pub coefficients: Vec<Mat2>,
}

#[derive(Serialize, Deserialize)]
struct Field2DFile {
    n_tau: usize,
    n_theta_modes: usize,
    component_tag: ComponentTag,
    /// Four `[re, im]` pairs per coefficient, entries in the order a, b, c, d.
    data: Vec<[f64; 2]>,
}

impl Field2D {
    pub fn zeros(n_tau: usize, n_theta_modes: usize, tag: ComponentTag) -> Self {
        Self { n_tau, n_theta_modes, tag, coefficients: vec![Mat2::zero(); (2 * n_theta_modes + 1) * n_tau] }
    }

    pub fn n_modes_total(&self) -> usize {
        2 * self.n_theta_modes + 1
    }

    pub fn coefficient(&self, mode: i64, node: usize) -> Mat2 {
        let m = (mode + self.n_theta_modes as i64) as usize;
        self.coefficients[m * self.n_tau + node]
    }

    pub fn coefficient_mut(&mut self, mode: i64, node: usize) -> &mut Mat2 {
        let m = (mode + self.n_theta_modes as i64) as usize;
        &mut self.coefficients[m * self.n_tau + node]
    }

    pub fn expect_tag(&self, tag: ComponentTag) -> Result<()> {
        if self.tag != tag {
            return Err(Error::TagMismatch { expected: tag.to_string(), found: self.tag.to_string() });
        }
        Ok(())
    }

    /// Fourier analysis of physical samples with `2N + 1` angular points.
    pub fn from_physical(field: &NeckField, tag: ComponentTag) -> Self {
        let n_theta = field.n_theta;
        let n_modes = (n_theta - 1) / 2;
        let plan = FourierPlan::new(n_theta);
        let mut out = Self::zeros(field.n_tau, n_modes, tag);
        let mut buf = vec![Complex64::default(); n_theta];
        for node in 0..field.n_tau {
            for entry in 0..4 {
                for k in 0..n_theta {
                    buf[k] = field.at(node, k).entries()[entry];
                }
                plan.analyze(&mut buf);
                for (q, z) in buf.iter().enumerate() {
                    let j = plan.frequency(q);
                    let c = out.coefficient_mut(j, node);
                    let mut e = c.entries();
                    e[entry] = *z;
                    *c = Mat2::from_entries(e);
                }
            }
        }
        out
    }

    /// Fourier synthesis onto `2N + 1` angular samples.
    pub fn to_physical(&self) -> NeckField {
        let n_theta = self.n_modes_total();
        let plan = FourierPlan::new(n_theta);
        let mut out = NeckField::zeros(self.n_tau, n_theta);
        let mut buf = vec![Complex64::default(); n_theta];
        for node in 0..self.n_tau {
            for entry in 0..4 {
                for (q, z) in buf.iter_mut().enumerate() {
                    *z = self.coefficient(plan.frequency(q), node).entries()[entry];
                }
                plan.synthesize(&mut buf);
                for k in 0..n_theta {
                    let mut e = out.at(node, k).entries();
                    e[entry] = buf[k];
                    *out.at_mut(node, k) = Mat2::from_entries(e);
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let data = self
            .coefficients
            .iter()
            .flat_map(|m| m.entries())
            .map(|z| [z.re, z.im])
            .collect();
        let file = Field2DFile {
            n_tau: self.n_tau,
            n_theta_modes: self.n_theta_modes,
            component_tag: self.tag,
            data,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Field2DFile = serde_json::from_str(text)?;
        let expected = 4 * (2 * file.n_theta_modes + 1) * file.n_tau;
        if file.data.len() != expected {
            return Err(Error::Config(format!(
                "Field2D data has {} complex entries, header implies {expected}",
                file.data.len()
            )));
        }
        let coefficients = file
            .data
            .chunks_exact(4)
            .map(|c| Mat2::from_entries([0, 1, 2, 3].map(|e| C64::new(c[e][0], c[e][1]))))
            .collect();
        Ok(Self {
            n_tau: file.n_tau,
            n_theta_modes: file.n_theta_modes,
            tag: file.component_tag,
            coefficients,
        })
    }

    /// Write the field, creating parent directories.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        crate::report::write_text(path, &self.to_json()?)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Hodge star of a `dr ^ dtheta` coefficient: multiplication by `r` at each node.
pub fn hodge_star_2form(f: &Field2D, radius: &[f64]) -> Result<Field2D> {
    f.expect_tag(ComponentTag::TwoFormDrDtheta)?;
    if radius.len() != f.n_tau {
        return Err(Error::Config("radius array does not match the field".into()));
    }
    let mut out = f.clone();
    out.tag = ComponentTag::ScalarSection;
    for (idx, c) in out.coefficients.iter_mut().enumerate() {
        *c = c.scale_re(radius[idx % f.n_tau]);
    }
    Ok(out)
}

/// `*(dzbar ^ dz / |z|^2)` for the neck metric `|dz|^2/|z|^2`.
pub fn hodge_star_dzbar_dz() -> C64 {
    // dzbar ^ dz / |z|^2 = 2i dtau ^ dvartheta and the star of the area form is 1.
    C64::new(0.0, 2.0)
}
