//! Poisson equation `Delta_0 u = h` on the punctured unit disk, one Fourier mode at a time.
//!
//! With `x = log r` each mode solves `(-(d/dx)^2 + j^2) u_j = h_j`. The solutions are the
//! explicit integral kernels
//! `u_0 = -log r int_0^r h ds/s + int_0^r h log s ds/s` and, for `j >= 1`,
//! `u_j = (r^-j/2j) int_0^r h s^j ds/s - (r^j/2j) int_1^r h s^-j ds/s`, with `u_-j = K_j h_-j`.
//! For `j != 0` the two integrals are carried as exponentially damped running sums so no
//! factor `r^{+-j}` is ever formed.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{Mat2, C64};
use crate::error::{Error, Result};
use crate::geometry::{ComponentTag, Field2D};

pub const DEFAULT_R_MIN: f64 = 1e-6;
pub const DEFAULT_RADIAL_NODES: usize = 4001;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub delta: f64,
    pub delta_prime: f64,
    pub delta_dprime: f64,
}

impl WeightConfig {
    pub fn new(delta: f64, delta_prime: f64, delta_dprime: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Config(format!("delta = {delta} must be positive")));
        }
        if !(delta_prime > 0.0 && delta_prime < delta.min(0.5)) {
            return Err(Error::Config(format!(
                "delta' = {delta_prime} must lie in (0, min(1/2, delta))"
            )));
        }
        if !(delta_dprime > 0.0 && delta_dprime < delta_prime) {
            return Err(Error::Config(format!("delta'' = {delta_dprime} must lie in (0, delta')")));
        }
        Ok(Self { delta, delta_prime, delta_dprime })
    }
}

/// Log-uniform radial grid on `[r_min, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    pub r_min: f64,
    /// Nodes in `x = log r`, from `log r_min` to 0.
    pub x: Vec<f64>,
}

impl RadialGrid {
    pub fn new(r_min: f64, n: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_min < 1.0) {
            return Err(Error::Config(format!("r_min = {r_min} must lie in (0, 1)")));
        }
        if n < 8 {
            return Err(Error::Config("radial grid needs at least 8 nodes".into()));
        }
        let x0 = r_min.ln();
        let dx = -x0 / (n - 1) as f64;
        let x = (0..n).map(|i| if i == n - 1 { 0.0 } else { x0 + dx * i as f64 }).collect();
        Ok(Self { r_min, x })
    }

    pub fn default_grid() -> Self {
        Self::new(DEFAULT_R_MIN, DEFAULT_RADIAL_NODES).expect("default radial grid is valid")
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.x[i].exp()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.x.iter().map(|x| x.exp()).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> C64) -> RadialFunction {
        RadialFunction { grid: self.clone(), values: self.x.iter().map(|x| f(x.exp())).collect() }
    }

    /// Fourth-order quadrature weights for `int dx` over the whole grid.
    pub(crate) fn cell_integral(&self, f: &[C64], i: usize) -> C64 {
        let n = f.len();
        let h = self.spacing() / 24.0;
        if i == 0 {
            (f[0] * 9.0 + f[1] * 19.0 - f[2] * 5.0 + f[3]) * h
        } else if i == n - 2 {
            (f[n - 4] - f[n - 3] * 5.0 + f[n - 2] * 19.0 + f[n - 1] * 9.0) * h
        } else {
            (-f[i - 1] + f[i] * 13.0 + f[i + 1] * 13.0 - f[i + 2]) * h
        }
    }

    pub fn integrate(&self, f: &[C64]) -> C64 {
        (0..f.len() - 1).map(|i| self.cell_integral(f, i)).sum()
    }
}

/// Samples of one Fourier mode on a radial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialFunction {
    pub grid: RadialGrid,
    pub values: Vec<C64>,
}

impl RadialFunction {
    pub fn zeros(grid: &RadialGrid) -> Self {
        Self { grid: grid.clone(), values: vec![C64::default(); grid.len()] }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn linear_combination(a: C64, f: &Self, b: C64, g: &Self) -> Self {
        Self {
            grid: f.grid.clone(),
            values: f.values.iter().zip(&g.values).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    /// Local power-law exponent near `r_min`, from the first two nodes.
    fn endpoint_exponent(&self) -> Option<f64> {
        let (h0, h1) = (self.values[0].norm(), self.values[1].norm());
        if h0 == 0.0 || h1 == 0.0 {
            return None;
        }
        Some((h1 / h0).ln() / self.grid.spacing())
    }
}

/// Solution of one mode together with `r du/dr`.
#[derive(Clone, Debug)]
pub struct ModeSolution {
    pub u: RadialFunction,
    pub r_du: RadialFunction,
}

/// Mode `j = 0`.
pub fn solve_mode_zero(h0: &RadialFunction) -> Result<ModeSolution> {
    let grid = &h0.grid;
    let n = grid.len();
    let h = &h0.values;
    let x = &grid.x;
    // Tail over (0, r_min) from the power law h ~ h(r_min) (r/r_min)^p.
    let (mut i0, mut j0) = (C64::default(), C64::default());
    if let Some(p) = h0.endpoint_exponent() {
        if p <= 0.0 {
            return Err(Error::QuadratureDivergence(format!(
                "mode 0 right-hand side behaves like r^{p:.3} at r_min"
            )));
        }
        i0 = h[0] / p;
        j0 = h[0] * (x[0] / p - 1.0 / (p * p));
    }
    let hx: Vec<C64> = h.iter().zip(x).map(|(v, x)| v * x).collect();
    let mut u = vec![C64::default(); n];
    let mut r_du = vec![C64::default(); n];
    for i in 0..n {
        u[i] = -i0 * x[i] + j0;
        r_du[i] = -i0;
        if i + 1 < n {
            i0 += grid.cell_integral(h, i);
            j0 += grid.cell_integral(&hx, i);
        }
    }
    Ok(ModeSolution {
        u: RadialFunction { grid: grid.clone(), values: u },
        r_du: RadialFunction { grid: grid.clone(), values: r_du },
    })
}

/// Mode `j != 0`; negative modes use the kernel of `|j|`.
pub fn solve_mode_j(j: i64, hj: &RadialFunction) -> Result<ModeSolution> {
    if j == 0 {
        return Err(Error::ZeroMode);
    }
    let k = j.unsigned_abs() as f64;
    let grid = &hj.grid;
    let n = grid.len();
    let h = &hj.values;
    let x = &grid.x;
    let dx = grid.spacing();
    let decay = (-k * dx).exp();
    // lower(x) = int_{-inf}^x h(y) e^{-k(x-y)} dy, upper(x) = int_x^0 h(y) e^{-k(y-x)} dy.
    let mut lower = vec![C64::default(); n];
    if let Some(p) = hj.endpoint_exponent() {
        if p + k <= 0.0 {
            return Err(Error::QuadratureDivergence(format!(
                "mode {j} right-hand side behaves like r^{p:.3} at r_min"
            )));
        }
        lower[0] = h[0] / (p + k);
    }
    let mut weighted = vec![C64::default(); n];
    for i in 0..n - 1 {
        // Integrand h(y) e^{-k (x_{i+1} - y)} on the stencil of cell i.
        let lo = i.saturating_sub(1).min(n - 4);
        for m in lo..lo + 4 {
            weighted[m] = h[m] * (-k * (x[i + 1] - x[m])).exp();
        }
        lower[i + 1] = lower[i] * decay + grid.cell_integral(&weighted, i);
    }
    let mut upper = vec![C64::default(); n];
    for i in (0..n - 1).rev() {
        let lo = i.saturating_sub(1).min(n - 4);
        for m in lo..lo + 4 {
            weighted[m] = h[m] * (-k * (x[m] - x[i])).exp();
        }
        upper[i] = upper[i + 1] * decay + grid.cell_integral(&weighted, i);
    }
    let scale = 0.5 / k;
    let u = lower.iter().zip(&upper).map(|(l, r)| (l + r) * scale).collect();
    let r_du = lower.iter().zip(&upper).map(|(l, r)| (r - l) * 0.5).collect();
    Ok(ModeSolution {
        u: RadialFunction { grid: grid.clone(), values: u },
        r_du: RadialFunction { grid: grid.clone(), values: r_du },
    })
}

pub fn solve_mode(j: i64, hj: &RadialFunction) -> Result<ModeSolution> {
    if j == 0 {
        solve_mode_zero(hj)
    } else {
        solve_mode_j(j, hj)
    }
}

/// Sixth-order centered second derivative in `x`; zero on the three nodes at each end.
fn second_derivative(f: &RadialFunction) -> Vec<C64> {
    const W: [f64; 7] = [1.0 / 90.0, -3.0 / 20.0, 1.5, -49.0 / 18.0, 1.5, -3.0 / 20.0, 1.0 / 90.0];
    let n = f.values.len();
    let inv = 1.0 / (f.grid.spacing() * f.grid.spacing());
    let mut out = vec![C64::default(); n];
    for i in 3..n.saturating_sub(3) {
        out[i] = (0..7).map(|s| f.values[i + s - 3] * W[s]).sum::<C64>() * inv;
    }
    out
}

/// `sup |(-(r d/dr)^2 + j^2) u - h| / sup |h|` over interior nodes, with an independent
/// finite-difference second derivative.
pub fn mode_residual(j: i64, u: &RadialFunction, h: &RadialFunction) -> f64 {
    let d2 = second_derivative(u);
    let n = u.values.len();
    let j2 = (j * j) as f64;
    let scale = h.sup_norm().max(u.sup_norm() * j2.max(1.0)).max(f64::MIN_POSITIVE);
    (3..n - 3)
        .map(|i| (-d2[i] + u.values[i] * j2 - h.values[i]).norm())
        .fold(0.0, f64::max)
        / scale
}

/// Absolute version of [`mode_residual`] restricted to `r >= r_from`.
pub fn mode_residual_abs(j: i64, u: &RadialFunction, h: &RadialFunction, r_from: f64) -> f64 {
    let d2 = second_derivative(u);
    let n = u.values.len();
    let j2 = (j * j) as f64;
    (3..n - 3)
        .filter(|&i| u.grid.radius(i) >= r_from)
        .map(|i| (-d2[i] + u.values[i] * j2 - h.values[i]).norm())
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    RDr,
    RInvDr,
}

/// A weighted norm over `[r_min, 1]` with a flag for a non-integrable contribution at the node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedNorm {
    pub value: f64,
    /// True when `|r^-weight u|^2` does not decay at `r_min`, so the norm diverges as `r_min -> 0`.
    pub divergent: bool,
}

/// `(int |r^{-weight-1} u|^2 r dr)^{1/2}` or `(int |r^{-weight} u|^2 r^-1 dr)^{1/2}`. Both reduce
/// to `int |r^-weight u|^2 dx` in `x = log r`.
pub fn weighted_norm(u: &RadialFunction, weight: f64, measure: Measure) -> WeightedNorm {
    let _ = measure;
    let density: Vec<C64> = u
        .values
        .iter()
        .zip(&u.grid.x)
        .map(|(v, x)| C64::from(v.norm_sqr() * (-2.0 * weight * x).exp()))
        .collect();
    let value = u.grid.integrate(&density).re.max(0.0).sqrt();
    let divergent = match (density[0].re, density[1].re) {
        (0.0, _) => false,
        (a, b) => (b / a).ln() / u.grid.spacing() <= 1e-3,
    };
    WeightedNorm { value, divergent }
}

/// Weighted `L^2` norm of a whole angular field, `sum_j 2 pi int |r^-weight u_j|^2 dx`.
pub fn weighted_norm_field(modes: &[RadialFunction], weight: f64) -> f64 {
    modes
        .iter()
        .map(|m| {
            let w = weighted_norm(m, weight, Measure::RInvDr).value;
            2.0 * std::f64::consts::PI * w * w
        })
        .sum::<f64>()
        .sqrt()
}

/// Per-mode diagnostics of a disk solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: i64,
    pub residual: f64,
    pub norm_ratio: f64,
    pub schur_bound: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub u: Vec<RadialFunction>,
    pub r_du: Vec<RadialFunction>,
    pub modes: Vec<i64>,
    pub reports: Vec<ModeReport>,
    /// `||u||_{H^2_{-1+delta'}} / ||h||_{L^2_{-1+delta}}`.
    pub h2_constant: f64,
    pub max_residual: f64,
}

/// Weighted `H^2` norm of a modal field given `u`, `r du/dr` and `h = Delta_0 u`.
pub fn weighted_h2_norm(u: &[RadialFunction], r_du: &[RadialFunction], h: &[RadialFunction], modes: &[i64], weight: f64) -> f64 {
    let mut total = 0.0;
    for (idx, &j) in modes.iter().enumerate() {
        let j2 = (j * j) as f64;
        let ddu = RadialFunction {
            grid: u[idx].grid.clone(),
            values: u[idx].values.iter().zip(&h[idx].values).map(|(u, h)| u * j2 - h).collect(),
        };
        let n0 = weighted_norm(&u[idx], weight, Measure::RInvDr).value;
        let n1 = weighted_norm(&r_du[idx], weight, Measure::RInvDr).value;
        let n2 = weighted_norm(&ddu, weight, Measure::RInvDr).value;
        let sum = n0 * n0 * (1.0 + j2 + j2 * j2) + n1 * n1 * (1.0 + j2) + n2 * n2;
        total += 2.0 * std::f64::consts::PI * sum;
    }
    total.sqrt()
}

/// Solve `Delta_0 u = h` mode by mode; modes are independent and processed in parallel.
pub fn solve_poisson_modes(h: &[RadialFunction], modes: &[i64], w: &WeightConfig) -> Result<PoissonSolution> {
    let solved: Vec<Result<(ModeSolution, ModeReport)>> = modes
        .par_iter()
        .zip(h.par_iter())
        .map(|(&j, hj)| {
            let sol = solve_mode(j, hj)?;
            let residual = mode_residual(j, &sol.u, hj);
            let nh = weighted_norm(hj, w.delta, Measure::RInvDr).value;
            let nu = weighted_norm(&sol.u, w.delta_prime, Measure::RInvDr).value;
            let norm_ratio = if nh > 0.0 { nu / nh } else { 0.0 };
            let schur_bound = (j != 0).then(|| 4.0 / (j * j) as f64);
            Ok((sol, ModeReport { mode: j, residual, norm_ratio, schur_bound }))
        })
        .collect();
    let mut u = Vec::with_capacity(modes.len());
    let mut r_du = Vec::with_capacity(modes.len());
    let mut reports = Vec::with_capacity(modes.len());
    for item in solved {
        let (sol, report) = item?;
        u.push(sol.u);
        r_du.push(sol.r_du);
        reports.push(report);
    }
    let nh = weighted_norm_field(h, w.delta);
    let nu = weighted_h2_norm(&u, &r_du, h, modes, w.delta_prime);
    let h2_constant = if nh > 0.0 { nu / nh } else { 0.0 };
    let max_residual = reports.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(PoissonSolution { u, r_du, modes: modes.to_vec(), reports, h2_constant, max_residual })
}

/// Split a scalar `Field2D` on a radial grid (scalar stored as `diag(u, -u)`) into modes.
pub fn field_to_modes(f: &Field2D, grid: &RadialGrid) -> Result<(Vec<i64>, Vec<RadialFunction>)> {
    f.expect_tag(ComponentTag::ScalarSection)?;
    if f.n_tau != grid.len() {
        return Err(Error::Config(format!(
            "field has {} radial nodes, grid has {}",
            f.n_tau,
            grid.len()
        )));
    }
    let n = f.n_theta_modes as i64;
    let modes: Vec<i64> = (-n..=n).collect();
    let values = modes
        .iter()
        .map(|&j| RadialFunction {
            grid: grid.clone(),
            values: (0..f.n_tau).map(|i| f.coefficient(j, i).a).collect(),
        })
        .collect();
    Ok((modes, values))
}

pub fn modes_to_field(modes: &[i64], values: &[RadialFunction]) -> Field2D {
    let n_modes = modes.iter().map(|j| j.unsigned_abs()).max().unwrap_or(0) as usize;
    let n_r = values.first().map_or(0, |v| v.values.len());
    let mut f = Field2D::zeros(n_r, n_modes, ComponentTag::ScalarSection);
    for (&j, v) in modes.iter().zip(values) {
        for (i, z) in v.values.iter().enumerate() {
            *f.coefficient_mut(j, i) = Mat2::diag_traceless(*z);
        }
    }
    f
}

/// Disk solve on `Field2D` input and output.
pub fn solve_poisson_disk(h: &Field2D, grid: &RadialGrid, w: &WeightConfig) -> Result<(Field2D, PoissonSolution)> {
    let (modes, hs) = field_to_modes(h, grid)?;
    let sol = solve_poisson_modes(&hs, &modes, w)?;
    Ok((modes_to_field(&modes, &sol.u), sol))
}

/// Largest change of `u` on `[1e-3, 1]` when `r_min` drops by a factor of ten.
pub fn tail_sensitivity(j: i64, h: impl Fn(f64) -> C64, r_min: f64, n: usize) -> Result<f64> {
    let coarse = RadialGrid::new(r_min, n)?;
    let fine_n = n + ((n - 1) as f64 * 10f64.ln() / -r_min.ln()).round() as usize;
    let fine = RadialGrid::new(r_min / 10.0, fine_n)?;
    let u_coarse = solve_mode(j, &coarse.sample(&h))?.u;
    let u_fine = solve_mode(j, &fine.sample(&h))?.u;
    let offset = fine_n - n;
    let mut diff: f64 = 0.0;
    for i in 0..n {
        if coarse.radius(i) >= 1e-3 {
            let z: Complex64 = u_coarse.values[i] - u_fine.values[i + offset];
            diff = diff.max(z.norm());
        }
    }
    Ok(diff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_zero_square() {
        let grid = RadialGrid::default_grid();
        let h = grid.sample(|s| (s * s).into());
        let sol = solve_mode_zero(&h).unwrap();
        for (i, u) in sol.u.values.iter().enumerate() {
            let r = grid.radius(i);
            assert!((u.re + r * r / 4.0).abs() < 1e-10, "r = {r}: {}", u.re + r * r / 4.0);
        }
    }

    #[test]
    fn mode_j_power() {
        let grid = RadialGrid::default_grid();
        for j in [1i64, 3, -2] {
            let k = j.abs() as f64;
            let h = grid.sample(|s| s.powf(k).into());
            let sol = solve_mode_j(j, &h).unwrap();
            for (i, u) in sol.u.values.iter().enumerate() {
                let r = grid.radius(i);
                let exact = r.powf(k) / (4.0 * k * k) - r.powf(k) * r.ln() / (2.0 * k);
                assert!((u.re - exact).abs() < 1e-10, "j = {j}, r = {r}");
            }
        }
    }

    #[test]
    fn zero_mode_rejected_and_divergence_flagged() {
        let grid = RadialGrid::new(1e-4, 200).unwrap();
        let h = grid.sample(|_| 1.0.into());
        assert!(matches!(solve_mode_j(0, &h), Err(Error::ZeroMode)));
        assert!(matches!(solve_mode_zero(&h), Err(Error::QuadratureDivergence(_))));
    }

    #[test]
    fn borderline_norm_is_flagged() {
        let grid = RadialGrid::default_grid();
        let u = grid.sample(|r| r.powf(0.5).into());
        assert!(weighted_norm(&u, 0.5, Measure::RInvDr).divergent);
        let v = grid.sample(|r| r.powf(1.5).into());
        let n = weighted_norm(&v, 0.5, Measure::RInvDr);
        assert!(!n.divergent);
        // int_{r_min}^1 r^{2(1.5-0.5)-1} dr = (1 - r_min^2)/2.
        assert!((n.value * n.value - 0.5 * (1.0 - 1e-12)).abs() < 1e-10);
    }
}
