//! Spin oscillator state, its complex susceptibility, and the single-frequency
//! noise budget of the detected light in shot-noise units.
//!
//! All rates are angular (rad/s). The Larmor frequency `omega_s` is signed; a
//! negative value is the negative-mass configuration. The detected quadrature
//! is `Q(φ) = P cos φ + X sin φ`, so `φ = 0` reads the phase quadrature and
//! `φ = π/2` the (QND, spin-free) amplitude quadrature.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{lit, quadrant_sin_cos, to_f64, Real};
use crate::spectrum::{validate_grid, Spectrum};

/// State of the spin oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams<T> {
    /// Signed Larmor frequency Ω_S (rad/s).
    pub omega_s: T,
    /// Intrinsic damping γ_S,0 (rad/s).
    pub gamma_s0: T,
    /// Probe power broadening γ_S,pb (rad/s).
    pub gamma_s_pb: T,
    /// Readout rate Γ_S (rad/s).
    pub readout_rate: T,
    /// Thermal occupancy n_S.
    pub n_s: T,
}

impl<T: Real> OscillatorParams<T> {
    /// Total damping γ_S = γ_S,0 + γ_S,pb.
    pub fn gamma_s(&self) -> T {
        self.gamma_s0 + self.gamma_s_pb
    }

    /// Same oscillator with total damping set to `gamma`, keeping the
    /// intrinsic/power-broadened split ratio.
    pub fn with_gamma_s(mut self, gamma: T) -> Self {
        let total = self.gamma_s();
        if total > T::zero() {
            let k = gamma / total;
            self.gamma_s0 *= k;
            self.gamma_s_pb *= k;
        } else {
            self.gamma_s0 = gamma;
            self.gamma_s_pb = T::zero();
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_s", self.omega_s),
            ("gamma_s0", self.gamma_s0),
            ("gamma_s_pb", self.gamma_s_pb),
            ("readout_rate", self.readout_rate),
            ("n_s", self.n_s),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} is not finite")));
            }
        }
        for (name, v) in &fields[1..] {
            if *v < T::zero() {
                return Err(Error::Domain(format!("{name} must be non-negative")));
            }
        }
        if self.readout_rate > T::zero() && self.gamma_s() <= T::zero() {
            return Err(Error::Domain(
                "total damping must be positive when the readout rate is".into(),
            ));
        }
        Ok(())
    }
}

/// Measurement channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig<T> {
    /// Homodyne quadrature phase φ (rad).
    pub phi: T,
    /// Overall detection efficiency η ∈ [0, 1].
    pub eta: T,
    /// Input polarization angle α (rad).
    pub alpha: T,
    /// Optical detuning Δ (rad/s).
    pub delta: T,
}

impl<T: Real> ProbeConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= T::zero() && self.eta <= T::one()) {
            return Err(Error::Domain("eta must lie in [0, 1]".into()));
        }
        if !(self.delta > T::zero()) || !self.delta.is_finite() {
            return Err(Error::Domain("detuning must be positive".into()));
        }
        if !self.phi.is_finite() || !self.alpha.is_finite() {
            return Err(Error::Domain("phase angles must be finite".into()));
        }
        Ok(())
    }
}

/// Quadrature weighting of the near-DC tensor noise.
///
/// The observed DC noise is strongest in the amplitude quadrature and absent in
/// the phase quadrature, which a `cos²φ` weight does not reproduce. Both
/// weightings are available; `Cos2` is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DcPhaseWeight {
    #[default]
    Cos2,
    Sin2,
}

impl DcPhaseWeight {
    pub fn weight<T: Real>(self, phi: T) -> T {
        match self {
            DcPhaseWeight::Cos2 => quadrant_sin_cos(phi).1.powi(2),
            DcPhaseWeight::Sin2 => quadrant_sin_cos(phi).0.powi(2),
        }
    }
}

/// Tensor (alignment) coupling and the near-DC noise it produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorConfig<T> {
    /// a₂/a₁ at the working detuning.
    pub a2_over_a1: T,
    /// Prefactor of the DC term, units (rad/s)⁻² so that
    /// `dc_weight·(a₂/a₁)²·Γ_S²·|χ_DC|²` is dimensionless.
    pub dc_weight: T,
    /// Detuning exponent r of `S_DC = D/Δ^r`, in [4, 6].
    pub dc_exponent: T,
    /// Half-width κ of the zero-centred DC Lorentzian (rad/s).
    pub dc_halfwidth: T,
    pub dc_phase_weight: DcPhaseWeight,
}

impl<T: Real> Default for TensorConfig<T> {
    fn default() -> Self {
        Self {
            a2_over_a1: T::zero(),
            dc_weight: T::zero(),
            dc_exponent: lit(5.0),
            dc_halfwidth: T::TAU() * lit(5.0e3),
            dc_phase_weight: DcPhaseWeight::Cos2,
        }
    }
}

impl<T: Real> TensorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dc_exponent >= lit(4.0) && self.dc_exponent <= lit(6.0)) {
            return Err(Error::Domain("dc_exponent must lie in [4, 6]".into()));
        }
        if !(self.dc_halfwidth > T::zero()) || !self.dc_halfwidth.is_finite() {
            return Err(Error::Domain("dc_halfwidth must be positive".into()));
        }
        if !self.a2_over_a1.is_finite() || !(self.dc_weight >= T::zero()) {
            return Err(Error::Domain("dc_weight must be non-negative".into()));
        }
        Ok(())
    }

    /// Normalized amplitude response `κ/(κ − iΩ)` of the DC noise, `|χ_DC(0)| = 1`.
    pub fn dc_response(&self, omega: T) -> Complex<T> {
        let k = self.dc_halfwidth;
        Complex::new(k, T::zero()) / Complex::new(k, -omega)
    }
}

/// Per-frequency decomposition of the detected PSD (shot-noise units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBudget<T> {
    pub sn: T,
    pub qban: T,
    pub corr: T,
    pub tn: T,
    pub bb: T,
    pub dc: T,
}

impl<T: Real> NoiseBudget<T> {
    pub fn total(&self) -> T {
        self.sn + self.qban + self.corr + self.tn + self.bb + self.dc
    }

    /// Shot noise, back-action and their cross-correlation only.
    pub fn quantum(&self) -> T {
        self.sn + self.qban + self.corr
    }
}

/// `χ(Ω) = Ω₀/[(γ/2 − iΩ)² + Ω₀²]` for an arbitrary resonance.
#[inline]
pub fn lorentz_susceptibility<T: Real>(omega_s: T, gamma: T, omega: T) -> Complex<T> {
    let half = lit::<T>(0.5);
    let d = Complex::new(gamma * half, -omega);
    Complex::new(omega_s, T::zero()) / (d * d + Complex::new(omega_s * omega_s, T::zero()))
}

/// Spin susceptibility `χ_S(Ω)` (units 1/(rad/s)).
pub fn susceptibility<T: Real>(params: &OscillatorParams<T>, omega: T) -> Result<Complex<T>> {
    let gamma = params.gamma_s();
    if !params.omega_s.is_finite() || !gamma.is_finite() || !omega.is_finite() {
        return Err(Error::Domain("susceptibility inputs must be finite".into()));
    }
    if gamma < T::zero() {
        return Err(Error::Domain("damping must be non-negative".into()));
    }
    let chi = lorentz_susceptibility(params.omega_s, gamma, omega);
    if !(chi.re.is_finite() && chi.im.is_finite()) {
        return Err(Error::Domain(format!(
            "susceptibility diverges at Ω = {} rad/s",
            to_f64(omega)
        )));
    }
    Ok(chi)
}

/// Noise budget at angular frequency `omega`; `s_bb` is the flat broadband
/// floor in shot-noise units.
pub fn budget_terms<T: Real>(
    params: &OscillatorParams<T>,
    probe: &ProbeConfig<T>,
    tensor: &TensorConfig<T>,
    s_bb: T,
    omega: T,
) -> Result<NoiseBudget<T>> {
    let chi = susceptibility(params, omega)?;
    Ok(budget_from_chi(params, probe, tensor, s_bb, omega, chi))
}

pub(crate) fn budget_from_chi<T: Real>(
    params: &OscillatorParams<T>,
    probe: &ProbeConfig<T>,
    tensor: &TensorConfig<T>,
    s_bb: T,
    omega: T,
    chi: Complex<T>,
) -> NoiseBudget<T> {
    let two = lit::<T>(2.0);
    let four = lit::<T>(4.0);
    let eta = probe.eta;
    let g = params.readout_rate;
    let cos2 = quadrant_sin_cos(probe.phi).1.powi(2);
    let sin2phi = quadrant_sin_cos(two * probe.phi).0;
    let chi2 = chi.norm_sqr();

    let s_qban = g * g * chi2;
    let s_corr = g * chi.re;
    let s_tn = two * params.gamma_s() * g * chi2 * (params.n_s + lit(0.5));
    let dc_shape = tensor.dc_response(omega).norm_sqr();
    let s_dc = tensor.dc_weight * tensor.a2_over_a1 * tensor.a2_over_a1 * g * g * dc_shape;

    NoiseBudget {
        sn: T::one(),
        qban: four * eta * s_qban * cos2,
        corr: two * eta * s_corr * sin2phi,
        tn: four * eta * s_tn * cos2,
        bb: eta * s_bb * cos2,
        dc: eta * s_dc * tensor.dc_phase_weight.weight(probe.phi),
    }
}

/// Total PSD over a grid of ordinary frequencies (Hz).
pub fn psd_total<T: Real>(
    params: &OscillatorParams<T>,
    probe: &ProbeConfig<T>,
    tensor: &TensorConfig<T>,
    s_bb: T,
    freqs_hz: &[T],
) -> Result<Spectrum<T>> {
    psd_budget(params, probe, tensor, s_bb, freqs_hz)
        .and_then(|b| Spectrum::new(freqs_hz.to_vec(), b.iter().map(|t| t.total()).collect()))
}

/// Full per-frequency budget over a grid of ordinary frequencies (Hz).
pub fn psd_budget<T: Real>(
    params: &OscillatorParams<T>,
    probe: &ProbeConfig<T>,
    tensor: &TensorConfig<T>,
    s_bb: T,
    freqs_hz: &[T],
) -> Result<Vec<NoiseBudget<T>>> {
    validate_grid(freqs_hz)?;
    freqs_hz
        .iter()
        .map(|&f| budget_terms(params, probe, tensor, s_bb, T::TAU() * f))
        .collect()
}

/// Tensor alignment coupling `ℰ_S = −14 (a₂/a₁) cos 2α`.
pub fn tensor_coupling<T: Real>(alpha: T, a2_over_a1: T) -> T {
    -lit::<T>(14.0) * a2_over_a1 * (lit::<T>(2.0) * alpha).cos()
}

/// Damping including the dynamic tensor contribution, `γ'_S = γ_S + 2ℰ_S Γ_S`.
///
/// A non-positive result is the self-oscillation regime and is reported as
/// [`Error::Instability`] rather than clamped.
pub fn modified_damping<T: Real>(params: &OscillatorParams<T>, e_s: T) -> Result<T> {
    let gamma = params.gamma_s() + lit::<T>(2.0) * e_s * params.readout_rate;
    if gamma <= T::zero() {
        return Err(Error::Instability {
            gamma_eff: to_f64(gamma),
        });
    }
    Ok(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

    fn reference() -> OscillatorParams<f64> {
        let readout = TAU * 3.8e3;
        OscillatorParams {
            omega_s: TAU * 18e3,
            gamma_s0: readout / 24.0,
            gamma_s_pb: 0.0,
            readout_rate: readout,
            n_s: 3.5,
        }
    }

    fn probe(phi: f64, eta: f64) -> ProbeConfig<f64> {
        ProbeConfig {
            phi,
            eta,
            alpha: FRAC_PI_4,
            delta: TAU * 1.6e9,
        }
    }

    #[test]
    fn susceptibility_on_resonance_is_imaginary_over_gamma() {
        let mut p = reference();
        p.gamma_s0 = TAU * 1e3;
        let chi = susceptibility(&p, p.omega_s).unwrap();
        // direct evaluation of the denominator γ²/4 − iγΩ_S
        let g = p.gamma_s();
        let direct = Complex::new(p.omega_s, 0.0) / Complex::new(g * g / 4.0, -g * p.omega_s);
        assert!((chi - direct).norm() < 1e-15 * direct.norm());
        let rel = (g / p.omega_s).powi(2);
        assert!((chi.norm() * g - 1.0).abs() < rel);
        assert!((chi.im * g - 1.0).abs() < rel);
    }

    #[test]
    fn susceptibility_static_limit_and_sign() {
        let p = OscillatorParams {
            omega_s: 2.5e4f64,
            gamma_s0: 0.0,
            gamma_s_pb: 0.0,
            readout_rate: 0.0,
            n_s: 0.0,
        };
        let chi = susceptibility(&p, 0.0).unwrap();
        assert!((chi.re - 1.0 / 2.5e4).abs() < 1e-18 && chi.im == 0.0);
        let q = OscillatorParams {
            omega_s: -2.5e4,
            ..p
        };
        assert_eq!(susceptibility(&q, 0.0).unwrap(), -chi);
    }

    #[test]
    fn susceptibility_rejects_non_finite() {
        let mut p = reference();
        p.omega_s = f64::NAN;
        assert!(matches!(susceptibility(&p, 1.0), Err(Error::Domain(_))));
        assert!(susceptibility(&reference(), f64::INFINITY).is_err());
    }

    #[test]
    fn amplitude_quadrature_is_shot_noise() {
        let b = budget_terms(
            &reference(),
            &probe(FRAC_PI_2, 0.92),
            &TensorConfig::default(),
            0.2,
            1.1e5,
        )
        .unwrap();
        assert!((b.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_atoms_is_shot_noise() {
        let mut p = reference();
        p.readout_rate = 0.0;
        for w in [0.0, 1e3, 1.13e5, 1e6] {
            let b = budget_terms(&p, &probe(0.3, 0.92), &TensorConfig::default(), 0.0, w).unwrap();
            assert_eq!(b.total(), 1.0);
        }
    }

    #[test]
    fn qban_to_tn_ratio_is_cooperativity() {
        let p = reference();
        let b = budget_terms(
            &p,
            &probe(0.0, 0.92),
            &TensorConfig::default(),
            0.0,
            p.omega_s,
        )
        .unwrap();
        assert!((b.qban / b.tn - 3.0).abs() < 1e-12);
    }

    #[test]
    fn budget_fields_follow_formulas() {
        let p = reference();
        let pr = probe(-0.3, 0.8);
        let tensor = TensorConfig {
            a2_over_a1: 0.02,
            dc_weight: 1.0 / (TAU * 2e3f64).powi(2),
            dc_halfwidth: TAU * 4e3,
            ..TensorConfig::default()
        };
        let w = TAU * 17e3;
        let b = budget_terms(&p, &pr, &tensor, 0.25, w).unwrap();
        let chi = susceptibility(&p, w).unwrap();
        let g = p.readout_rate;
        let c2 = pr.phi.cos().powi(2);
        assert!((b.qban - 4.0 * 0.8 * g * g * chi.norm_sqr() * c2).abs() < 1e-12);
        assert!((b.corr - 2.0 * 0.8 * g * chi.re * (2.0 * pr.phi).sin()).abs() < 1e-12);
        let tn = 4.0 * 0.8 * 2.0 * p.gamma_s() * g * chi.norm_sqr() * 4.0 * c2;
        assert!((b.tn - tn).abs() < 1e-12);
        assert!((b.bb - 0.8 * 0.25 * c2).abs() < 1e-15);
        let k = TAU * 4e3;
        let dc = 0.8 * tensor.dc_weight * 0.02f64.powi(2) * g * g * k * k / (k * k + w * w) * c2;
        assert!((b.dc - dc).abs() < 1e-12 * dc.max(1.0));
    }

    #[test]
    fn dc_sin2_weight_vanishes_in_phase_quadrature() {
        let tensor = TensorConfig {
            a2_over_a1: 0.05,
            dc_weight: 1e-8,
            dc_phase_weight: DcPhaseWeight::Sin2,
            ..TensorConfig::default()
        };
        let b = budget_terms(&reference(), &probe(0.0, 0.9), &tensor, 0.0, 100.0).unwrap();
        assert_eq!(b.dc, 0.0);
        let b = budget_terms(&reference(), &probe(FRAC_PI_2, 0.9), &tensor, 0.0, 100.0).unwrap();
        assert!(b.dc > 0.0);
    }

    #[test]
    fn psd_flat_without_detection() {
        let grid: Vec<f64> = (1..200).map(|i| i as f64 * 250.0).collect();
        let s = psd_total(
            &reference(),
            &probe(0.0, 0.0),
            &TensorConfig::default(),
            0.3,
            &grid,
        )
        .unwrap();
        assert!(s.values().iter().all(|v| *v == 1.0));
        assert!(psd_total(
            &reference(),
            &probe(0.0, 0.9),
            &TensorConfig::default(),
            0.0,
            &[]
        )
        .is_err());
    }

    #[test]
    fn psd_peaks_at_larmor() {
        let grid: Vec<f64> = (1..=4000).map(|i| i as f64 * 10.0).collect();
        let s = psd_total(
            &reference(),
            &probe(0.0, 0.92),
            &TensorConfig::default(),
            0.0,
            &grid,
        )
        .unwrap();
        let (i, _) = s.argmax();
        assert!((s.freqs()[i] - 18e3).abs() <= 10.0);
    }

    #[test]
    fn tensor_coupling_values() {
        assert!(tensor_coupling(FRAC_PI_4, 0.3f64).abs() < 1e-15);
        assert!((tensor_coupling(0.0, 0.01f64) + 0.14).abs() < 1e-15);
        assert!((tensor_coupling(FRAC_PI_2, 0.01f64) - 0.14).abs() < 1e-15);
        assert!((tensor_coupling(PI, 0.01f64) + 0.14).abs() < 1e-15);
    }

    #[test]
    fn modified_damping_cases() {
        let p = OscillatorParams {
            omega_s: TAU * 18e3,
            gamma_s0: TAU * 1e3,
            gamma_s_pb: 0.0,
            readout_rate: TAU * 3.8e3,
            n_s: 0.0,
        };
        assert_eq!(modified_damping(&p, 0.0).unwrap(), p.gamma_s());
        let g = modified_damping(&p, 0.05).unwrap();
        assert!((g / TAU - 1.38e3).abs() < 1e-9);
        let e = -p.gamma_s() / (2.0 * p.readout_rate);
        assert!(matches!(
            modified_damping(&p, e),
            Err(Error::Instability { .. })
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let p = OscillatorParams::<f32> {
            omega_s: 1.13e5,
            gamma_s0: 995.0,
            gamma_s_pb: 0.0,
            readout_rate: 2.39e4,
            n_s: 3.5,
        };
        let pr = ProbeConfig::<f32> {
            phi: std::f32::consts::FRAC_PI_2,
            eta: 0.92,
            alpha: 0.0,
            delta: 1.0e10,
        };
        let b = budget_terms(&p, &pr, &TensorConfig::default(), 0.0, 1.1e5).unwrap();
        assert!((b.total() - 1.0).abs() < 1e-5);
    }
}
