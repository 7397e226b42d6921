//! Strain-referenced quantum noise of an interferometer alone, with squeezed
//! input, and jointly with a negative-mass spin oscillator.
//!
//! This is a simplified lossless model: free-mass K-factor
//! `K_I = (Ω_qI/Ω)²`, ideal broadband entanglement suppression `e^{−2r}` of the
//! matched joint noise, a spin thermal penalty `1/C_q` with the same spectral
//! shape, and an anti-squeezed (`cosh 2r`) penalty on unmatched back-action.
//! Outputs are normalized to the SQL (`S_SQL ≡ 1`).

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::squeeze::EffectiveOscillator;

/// Bare spin frequency (Hz) suited to the virtual shift for Ω_qI/2π = 100 Hz.
pub const OPTIMAL_BARE_SPIN_HZ: f64 = 76.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GwdConfig<T> {
    /// Interferometer coupling rate Ω_qI (rad/s).
    pub omega_qi: T,
    /// Squeezing (single- or two-mode) in dB.
    pub squeeze_db: T,
    /// Spin quantum cooperativity.
    pub c_q: T,
    /// Spin occupancy, informational once folded into `c_q`.
    pub n_s: T,
    /// Effective spin oscillator; `None` means perfectly matched to the
    /// interferometer.
    pub spin: Option<EffectiveOscillator<T>>,
}

impl<T: Real> GwdConfig<T> {
    /// Matched configuration with `C_q = (Γ_S/γ_S)/(1 + 2 n_S)`.
    pub fn from_rates(omega_qi: T, squeeze_db: T, readout_over_damping: T, n_s: T) -> Self {
        let c_q = readout_over_damping / (T::one() + lit::<T>(2.0) * n_s);
        Self {
            omega_qi,
            squeeze_db,
            c_q,
            n_s,
            spin: None,
        }
    }

    /// `e^{−2r}`.
    pub fn squeeze_factor(&self) -> T {
        lit::<T>(10.0).powf(-self.squeeze_db / lit(10.0))
    }

    fn validate(&self) -> Result<()> {
        if !(self.omega_qi > T::zero()) {
            return Err(Error::Domain("omega_qi must be positive".into()));
        }
        if !(self.squeeze_db >= T::zero()) {
            return Err(Error::Domain("squeeze_db must be non-negative".into()));
        }
        if !(self.c_q >= T::zero()) {
            return Err(Error::Domain("c_q must be non-negative".into()));
        }
        Ok(())
    }
}

/// `K_I = (Ω_qI/Ω)²`.
pub fn k_interferometer<T: Real>(omega: T, omega_qi: T) -> Result<T> {
    if omega == T::zero() {
        return Err(Error::Division("K-factor diverges at Ω = 0"));
    }
    Ok((omega_qi / omega).powi(2))
}

/// `½(e^{2r} K_I + e^{−2r}/K_I)`; phase-squeezed input lowers the shot-noise
/// branch and raises back-action.
pub fn interferometer_noise<T: Real>(omega: T, config: &GwdConfig<T>) -> Result<T> {
    config.validate()?;
    let k = k_interferometer(omega, config.omega_qi)?;
    let sq = config.squeeze_factor();
    Ok(lit::<T>(0.5) * (k / sq + sq / k))
}

/// Spin K-factor `Γ̃_S |Ω_S| / |Ω̃_S² − Ω² − iγ_S Ω|`.
pub fn k_spin<T: Real>(omega: T, spin: &EffectiveOscillator<T>) -> T {
    let re = spin.omega_eff * spin.omega_eff - omega * omega;
    let im = spin.gamma_s * omega;
    spin.readout_eff * spin.omega_s.abs() / re.hypot(im)
}

/// Joint interferometer + spin noise.
///
/// Matched: `½(K_I + 1/K_I)(e^{−2r} + 1/C_q)`. With a spin set:
/// `½[e^{−2r}(K_I + 1/K_I) + cosh 2r (√K_I − √K_S)² + (K_S + 1/K_S)/C_q]`,
/// which reduces to the matched value wherever `K_S = K_I`.
pub fn joint_noise<T: Real>(omega: T, config: &GwdConfig<T>) -> Result<T> {
    config.validate()?;
    if config.c_q == T::zero() {
        return Err(Error::Division("joint noise needs C_q > 0"));
    }
    let k_i = k_interferometer(omega, config.omega_qi)?;
    let sq = config.squeeze_factor();
    let thermal = T::one() / config.c_q;
    let half = lit::<T>(0.5);
    Ok(match &config.spin {
        None => half * (k_i + T::one() / k_i) * (sq + thermal),
        Some(spin) => {
            let k_s = k_spin(omega, spin);
            let cosh2r = half * (T::one() / sq + sq);
            let mismatch = (k_i.sqrt() - k_s.sqrt()).powi(2);
            half * ((sq * (k_i + T::one() / k_i))
                + cosh2r * mismatch
                + (k_s + T::one() / k_s) * thermal)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn cfg(db: f64, c_q: f64) -> GwdConfig<f64> {
        GwdConfig {
            omega_qi: TAU * 100.0,
            squeeze_db: db,
            c_q,
            n_s: 0.0,
            spin: None,
        }
    }

    #[test]
    fn k_factor_values() {
        let w = TAU * 100.0;
        assert_eq!(k_interferometer(w, w).unwrap(), 1.0);
        assert_eq!(k_interferometer(2.0 * w, w).unwrap(), 0.25);
        assert!(k_interferometer(1e12, w).unwrap() < 1e-15);
        assert!(matches!(k_interferometer(0.0, w), Err(Error::Division(_))));
    }

    #[test]
    fn quantum_limited_touches_sql() {
        let c = cfg(0.0, 1.0);
        assert!((interferometer_noise(c.omega_qi, &c).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn squeezed_branch_limits() {
        let c = cfg(10.0, 1.0);
        let hi = c.omega_qi * 1e4;
        let plain = cfg(0.0, 1.0);
        let r = interferometer_noise(hi, &c).unwrap() / interferometer_noise(hi, &plain).unwrap();
        assert!((r - 0.1).abs() < 1e-6);
        let lo = c.omega_qi * 1e-4;
        let r = interferometer_noise(lo, &c).unwrap() / interferometer_noise(lo, &plain).unwrap();
        assert!((r - 10.0).abs() < 1e-5);
    }

    #[test]
    fn matched_joint_value_at_coupling_rate() {
        let c = cfg(10.0, 40.0);
        let v = joint_noise(c.omega_qi, &c).unwrap();
        assert!((v - 0.125).abs() < 1e-12);
        assert!(joint_noise(c.omega_qi, &cfg(10.0, 0.0)).is_err());
    }

    #[test]
    fn mismatch_vanishes_when_responses_agree() {
        let c = cfg(10.0, 40.0);
        let w = TAU * 80.0;
        let k_i = k_interferometer(w, c.omega_qi).unwrap();
        // free-mass spin: Ω̃ = 0, γ = 0, readout chosen so K_S(w) = K_I(w)
        let spin = EffectiveOscillator {
            omega_s: 1.0,
            omega_eff: 0.0,
            gamma_s: 0.0,
            readout_eff: k_i * w * w,
        };
        assert!((k_spin(w, &spin) - k_i).abs() < 1e-12);
        let mixed = GwdConfig {
            spin: Some(spin),
            ..c
        };
        let a = joint_noise(w, &mixed).unwrap();
        let matched = joint_noise(w, &c).unwrap();
        assert!((a - matched).abs() < 1e-12);
    }
}
