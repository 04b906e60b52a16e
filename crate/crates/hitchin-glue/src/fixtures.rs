//! Exact radial solutions near a node, used as the inputs of the gluing construction.
//!
//! The pair `exp(sigma)^*(model)` with `sigma = f(r) N(vartheta)` solves the self-duality
//! equations when `N` is off-diagonal, covariantly constant for the model connection, and
//! `(r d/dr)^2 f = 4|C|^2 sinh(4 f)`. The decaying solution is `f = -artanh(kappa r^delta)`
//! with `delta = 4|C|`; Wolf's family is the case `alpha = 0`, `C = ell/(4i)`.

use serde::{Deserialize, Serialize};

use crate::algebra::{Mat2, C64, I};
use crate::error::{Error, Result};
use crate::gauge::{CutoffProfile, PerturbedInput, RadialJet};
use crate::poisson::RadialGrid;
use crate::geometry::{NeckGrid, PlumbingConfig, Side};
use crate::model::{ModelParams, WolfParams};
use crate::pair::{HiggsPair, PairJet, PairValue};

/// Largest `kappa r^delta` allowed on the computational domain.
pub const MAX_PROFILE_AMPLITUDE: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialFixture {
    /// Model parameters on the z-side; the w-side carries the matching partner.
    pub model: ModelParams,
    /// `kappa` in `b(r) = kappa r^delta`.
    pub amplitude: f64,
}

impl RadialFixture {
    pub fn new(model: ModelParams, amplitude: f64) -> Result<Self> {
        if model.side != Side::Plus {
            return Err(Error::Config("fixture parameters are given on the plus side".into()));
        }
        let frequency = 4.0 * model.alpha;
        if (frequency - frequency.round()).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "alpha = {} must be a multiple of 1/4 for a periodic perturbation",
                model.alpha
            )));
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::Config(format!("amplitude {amplitude} must be nonnegative")));
        }
        Ok(Self { model, amplitude })
    }

    /// Radial fixture with decay exponent `delta`, `C = -i delta/4` and `alpha = 0`.
    pub fn with_decay(delta: f64, amplitude: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Config(format!("decay exponent {delta} must be positive")));
        }
        let model = ModelParams::new(0.0, C64::new(0.0, -delta / 4.0), Side::Plus)?;
        Self::new(model, amplitude)
    }

    /// Wolf's solution with its unit circle placed at radius `r_outer`.
    pub fn from_wolf(wolf: &WolfParams, r_outer: f64) -> Result<Self> {
        Self::new(wolf.limiting_model(), wolf.amplitude() * r_outer.powf(-wolf.ell))
    }

    pub fn delta(&self) -> f64 {
        4.0 * self.model.c.norm()
    }

    pub fn check_domain(&self, r_max: f64) -> Result<()> {
        let b = self.amplitude * r_max.powf(self.delta());
        if b >= MAX_PROFILE_AMPLITUDE {
            return Err(Error::OutOfDomain(format!(
                "fixture amplitude reaches {b:.3} at r = {r_max:.3}; lower the amplitude"
            )));
        }
        Ok(())
    }

    /// `f = -artanh(kappa r^delta)` with its log-radial derivatives.
    pub fn profile(&self, r: f64) -> RadialJet {
        let d = self.delta();
        let b = self.amplitude * r.powf(d);
        let one_minus = 1.0 - b * b;
        RadialJet {
            value: -b.atanh(),
            r_d: -d * b / one_minus,
            r_d2: -d * d * b * (1.0 + b * b) / (one_minus * one_minus),
        }
    }

    /// `(1 - chi) f` with its log-radial derivatives.
    pub fn cut_profile(&self, r: f64, cutoff: &CutoffProfile) -> RadialJet {
        let f = self.profile(r);
        let chi = cutoff.jet(r);
        let keep = 1.0 - chi.value;
        RadialJet {
            value: keep * f.value,
            r_d: keep * f.r_d - chi.r_d * f.value,
            r_d2: keep * f.r_d2 - 2.0 * chi.r_d * f.r_d - chi.r_d2 * f.value,
        }
    }

    /// The direction `N(vartheta)` and its derivative.
    pub fn direction(&self, vartheta: f64) -> (Mat2, Mat2) {
        let omega = 4.0 * self.model.alpha;
        let e = C64::from_polar(1.0, omega * vartheta);
        let n = Mat2::new(C64::default(), e, e.conj(), C64::default());
        let dn = Mat2::new(C64::default(), I * omega * e, -I * omega * e.conj(), C64::default());
        (n, dn)
    }

    /// Jet of `exp(F N)^*(model)` in neck coordinates for a radial profile `F`.
    fn jet_from_profile(&self, profile: RadialJet, side: Side, vartheta: f64) -> PairJet {
        let model = self.model.neck_value();
        let (n, dn) = self.direction(vartheta);
        let sign = side.radial_sign();
        let f = profile.value;
        let f_tau = sign * profile.r_d;
        let f_tautau = profile.r_d2;
        let (ch, sh) = ((2.0 * f).cosh(), (2.0 * f).sinh());
        let rotation = Mat2::identity().scale_re(ch) + n.scale_re(sh);
        let value = PairValue {
            a_tau: Mat2::zero(),
            a_theta: model.a_theta - n.scale(I * f_tau),
            phi: model.phi * rotation,
        };
        let d_tau = PairValue {
            a_tau: Mat2::zero(),
            a_theta: n.scale(-I * f_tautau),
            phi: model.phi * (Mat2::identity().scale_re(sh) + n.scale_re(ch)).scale_re(2.0 * f_tau),
        };
        let d_theta = PairValue {
            a_tau: Mat2::zero(),
            a_theta: dn.scale(-I * f_tau),
            phi: model.phi * dn.scale_re(sh),
        };
        PairJet { value, d_tau, d_theta }
    }

    pub fn exact_jet(&self, cfg: &PlumbingConfig, tau: f64, vartheta: f64) -> PairJet {
        self.jet_from_profile(self.profile(cfg.radius_at(tau)), Side::of_tau(tau), vartheta)
    }

    /// `exp(-chi sigma)^*` of the exact pair, that is `exp((1 - chi) sigma)^*(model)`.
    pub fn approximate_jet(&self, cfg: &PlumbingConfig, cutoff: &CutoffProfile, tau: f64, vartheta: f64) -> PairJet {
        let r = cfg.radius_at(tau);
        self.jet_from_profile(self.cut_profile(r, cutoff), Side::of_tau(tau), vartheta)
    }

    /// The gauge generator `gamma = -sigma` taking the exact pair to the model.
    pub fn gauge_generator(&self, cfg: &PlumbingConfig, tau: f64, vartheta: f64) -> Mat2 {
        let f = self.profile(cfg.radius_at(tau)).value;
        self.direction(vartheta).0.scale_re(-f)
    }

    pub fn exact_pair(&self, cfg: &PlumbingConfig, grid: &NeckGrid) -> Result<HiggsPair> {
        self.check_domain(cfg.radius_at(grid.half_extent))?;
        Ok(HiggsPair::from_fn(grid, |tau, th| self.exact_jet(cfg, tau, th).value))
    }

    pub fn approximate_pair(&self, cfg: &PlumbingConfig, cutoff: &CutoffProfile, grid: &NeckGrid) -> Result<HiggsPair> {
        self.check_domain(cfg.radius_at(grid.half_extent))?;
        Ok(HiggsPair::from_fn(grid, |tau, th| self.approximate_jet(cfg, cutoff, tau, th).value))
    }

    /// The exact pair on one disk in its coordinates `x = log r` and `theta`, with components
    /// `(r A_r, A_theta, Phi per dz/z)`. On the z-side all three flip sign relative to the
    /// neck and `vartheta = -theta`; on the w-side they agree with the neck.
    pub fn disk_value(&self, side: Side, r: f64, theta: f64) -> PairValue {
        match side {
            Side::Plus => {
                let v = self.jet_from_profile(self.profile(r), Side::Plus, -theta).value;
                PairValue { a_tau: -v.a_tau, a_theta: -v.a_theta, phi: -v.phi }
            }
            Side::Minus => self.jet_from_profile(self.profile(r), Side::Minus, theta).value,
        }
    }

    /// The exact pair on one disk as a perturbation of that side's model.
    pub fn disk_input(&self, side: Side, grid: RadialGrid, n_theta_modes: usize) -> Result<PerturbedInput> {
        self.check_domain(1.0)?;
        let base = match side {
            Side::Plus => self.model,
            Side::Minus => self.model.matching_partner(),
        };
        PerturbedInput::from_fn(base, grid, n_theta_modes, true, |r, th| self.disk_value(side, r, th))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pair::{first_equation, second_equation};

    #[test]
    fn profile_solves_the_radial_equation() {
        let fx = RadialFixture::with_decay(0.5, 0.3).unwrap();
        let c2 = fx.model.c.norm_sqr();
        for r in [1e-4, 0.01, 0.3, 2.0] {
            let p = fx.profile(r);
            assert!((p.r_d2 - 4.0 * c2 * (4.0 * p.value).sinh()).abs() < 1e-13);
        }
    }

    #[test]
    fn exact_jet_solves_both_equations() {
        let cfg = PlumbingConfig::new(0.1, 64, 4).unwrap();
        for alpha in [0.0, 0.25, 0.5] {
            let model = ModelParams::new(alpha, C64::new(0.05, -0.1), Side::Plus).unwrap();
            let fx = RadialFixture::new(model, 0.3).unwrap();
            for (tau, th) in [(-3.0, 0.1), (-0.5, 2.0), (0.7, 4.0), (3.5, 5.5)] {
                let jet = fx.exact_jet(&cfg, tau, th);
                assert!(first_equation(&jet).max_abs() < 1e-13, "alpha {alpha} tau {tau}");
                assert!(second_equation(&jet).max_abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_non_periodic_direction() {
        let model = ModelParams::new(0.3, C64::new(0.0, 1.0), Side::Plus).unwrap();
        assert!(RadialFixture::new(model, 0.1).is_err());
    }
}
