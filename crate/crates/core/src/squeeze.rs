//! Ponderomotive squeezing, the virtual frequency shift, and force-referenced
//! spectra.

use crate::error::{Error, Result};
use crate::optim::golden_section;
use crate::scalar::{lit, quadrant_sin_cos, to_f64, Real};
use crate::spectrum::{validate_grid, Spectrum};
use crate::spin::{budget_terms, susceptibility, OscillatorParams, ProbeConfig, TensorConfig};

/// Quantum cooperativity `C_q = Γ_S / (γ_S (1 + 2 n_S))`.
pub fn cooperativity<T: Real>(params: &OscillatorParams<T>) -> Result<T> {
    let gamma = params.gamma_s();
    if gamma == T::zero() {
        return Err(Error::Division(
            "cooperativity needs a non-zero damping rate",
        ));
    }
    let two = lit::<T>(2.0);
    Ok(params.readout_rate / (gamma * (T::one() + two * params.n_s)))
}

/// Largest attainable squeezing `1 − η C_q/(C_q + 1)` in the `γ_S ≪ Γ_S, Ω_S` limit.
pub fn max_squeezing<T: Real>(c_q: T, eta: T) -> T {
    if c_q.is_infinite() {
        return T::one() - eta;
    }
    T::one() - eta * c_q / (c_q + T::one())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeResult<T> {
    pub phi_opt: T,
    pub omega_opt: T,
    pub s_min: T,
    pub analytic_bound: T,
}

/// Rectangle in (φ, Ω) searched by [`optimize_squeezing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchDomain<T> {
    pub phi: (T, T),
    /// Angular frequency window (rad/s).
    pub omega: (T, T),
    /// Points of the coarse frequency scan.
    pub points: usize,
    /// Relative tolerance of the frequency refinement.
    pub tolerance: T,
}

impl<T: Real> SearchDomain<T> {
    /// φ ∈ [−π/2, π/2], Ω ∈ |Ω_S| ± `half_width`, 2001-point frequency scan.
    pub fn around(params: &OscillatorParams<T>, half_width: T) -> Self {
        let centre = params.omega_s.abs();
        let lo = (centre - half_width).max(centre * lit(1e-3));
        Self {
            phi: (-T::FRAC_PI_2(), T::FRAC_PI_2()),
            omega: (lo, centre + half_width),
            points: 2001,
            tolerance: lit(1e-12),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |a: (T, T)| a.0.is_finite() && a.1.is_finite() && a.1 >= a.0;
        if !ok(self.phi) || !ok(self.omega) || self.omega.1 == self.omega.0 || self.points < 2 {
            return Err(Error::Usage("empty squeezing search domain".into()));
        }
        Ok(())
    }
}

/// Minimizes the total PSD over quadrature phase and analysis frequency.
///
/// Every budget term is a combination of `cos²φ`, `sin²φ` and `sin 2φ`, so at
/// fixed Ω the PSD is `c₀ + c₁ cos 2φ + c₂ sin 2φ` and its minimum over φ is
/// located in closed form from three evaluations. The remaining
/// one-dimensional problem in Ω is scanned and refined by golden section.
pub fn optimize_squeezing<T: Real>(
    params: &OscillatorParams<T>,
    probe: &ProbeConfig<T>,
    tensor: &TensorConfig<T>,
    s_bb: T,
    domain: &SearchDomain<T>,
) -> Result<SqueezeResult<T>> {
    domain.validate()?;
    params.validate()?;
    probe.validate()?;

    let eval = |phi: T, omega: T| -> T {
        let pr = ProbeConfig { phi, ..*probe };
        match budget_terms(params, &pr, tensor, s_bb, omega) {
            Ok(b) => b.total(),
            Err(_) => T::infinity(),
        }
    };
    let half = lit::<T>(0.5);
    let pi = T::PI();
    let best_phase = |omega: T| -> (T, T) {
        let s0 = eval(T::zero(), omega);
        let s90 = eval(T::FRAC_PI_2(), omega);
        let s45 = eval(T::FRAC_PI_4(), omega);
        let c0 = half * (s0 + s90);
        let c1 = half * (s0 - s90);
        let c2 = s45 - c0;
        let mut phi = half * (-c2).atan2(-c1);
        // bring into [lo, lo + π)
        phi = phi - ((phi - domain.phi.0) / pi).floor() * pi;
        if phi <= domain.phi.1 {
            return (phi, eval(phi, omega));
        }
        // a sinusoid without its minimum in the window is lowest at an end
        let a = eval(domain.phi.0, omega);
        let b = eval(domain.phi.1, omega);
        if a <= b {
            (domain.phi.0, a)
        } else {
            (domain.phi.1, b)
        }
    };

    let n = domain.points;
    let dw = (domain.omega.1 - domain.omega.0) / lit((n - 1) as f64);
    let mut best = (domain.omega.0, T::infinity());
    for j in 0..n {
        let omega = domain.omega.0 + dw * lit(j as f64);
        let (_, s) = best_phase(omega);
        if s < best.1 {
            best = (omega, s);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Domain(
            "PSD not finite anywhere in the search domain".into(),
        ));
    }
    let lo = (best.0 - dw).max(domain.omega.0);
    let hi = (best.0 + dw).min(domain.omega.1);
    let xtol = domain.tolerance * best.0.abs().max(T::one());
    let (omega, s) = golden_section(|w| best_phase(w).1, lo, hi, xtol);
    let omega = if s < best.1 { omega } else { best.0 };
    let (phi, s_min) = best_phase(omega);

    let c_q = if params.readout_rate == T::zero() {
        T::zero()
    } else {
        cooperativity(params)?
    };
    Ok(SqueezeResult {
        phi_opt: phi,
        omega_opt: omega,
        s_min,
        analytic_bound: max_squeezing(c_q, probe.eta),
    })
}

/// Oscillator as seen through the detected quadrature after the SN–QBA
/// cross-correlation has been absorbed into its response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveOscillator<T> {
    /// Bare signed Larmor frequency Ω_S (rad/s).
    pub omega_s: T,
    /// Effective frequency Ω̃_S, same sign as Ω_S (rad/s).
    pub omega_eff: T,
    pub gamma_s: T,
    /// Effective readout rate Γ̃_S = Γ_S cos²φ (rad/s).
    pub readout_eff: T,
}

impl<T: Real> EffectiveOscillator<T> {
    /// Ω̃_S − Ω_S in magnitude terms (negative for a downshift).
    pub fn shift(&self) -> T {
        self.omega_eff.abs() - self.omega_s.abs()
    }
}

/// Effective frequency `Ω̃_S = Ω_S √(1 + Γ_S sin 2φ / Ω_S)` and readout `Γ_S cos²φ`.
pub fn effective_oscillator<T: Real>(
    params: &OscillatorParams<T>,
    phi: T,
) -> Result<EffectiveOscillator<T>> {
    if params.omega_s == T::zero() {
        return Err(Error::Division("effective oscillator needs Ω_S ≠ 0"));
    }
    let two = lit::<T>(2.0);
    let g = params.readout_rate;
    let radicand = T::one() + g * quadrant_sin_cos(two * phi).0 / params.omega_s;
    if radicand < T::zero() {
        let x = -params.omega_s / g;
        let critical_phi = (x.abs() <= T::one()).then(|| to_f64(x.asin() / two));
        return Err(Error::OverSoftened {
            radicand: to_f64(radicand),
            critical_phi,
        });
    }
    Ok(EffectiveOscillator {
        omega_s: params.omega_s,
        omega_eff: params.omega_s * radicand.sqrt(),
        gamma_s: params.gamma_s(),
        readout_eff: g * quadrant_sin_cos(phi).1.powi(2),
    })
}

/// Which budget terms are referred to the spin force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForceNormalization<T> {
    /// Shot noise, back-action and their correlation.
    QuantumOnly,
    /// Every term of the budget.
    FullBudget { tensor: TensorConfig<T>, s_bb: T },
}

/// Detected PSD divided by `|N_TN(Ω)|² = 2 Γ_S γ_S |χ_S|² cos²φ`, the
/// response of the light to a unit thermal force on the oscillator.
///
/// The minimum over Ω sits at |Ω̃_S| for lossless detection.
pub fn force_normalized_spectrum<T: Real>(
    params: &OscillatorParams<T>,
    probe: &ProbeConfig<T>,
    normalization: ForceNormalization<T>,
    freqs_hz: &[T],
) -> Result<Spectrum<T>> {
    validate_grid(freqs_hz)?;
    let cos = quadrant_sin_cos(probe.phi).1;
    if cos.abs() < lit(1e-12) {
        return Err(Error::DivergentNormalization("cos φ = 0"));
    }
    let two = lit::<T>(2.0);
    let scale = two * params.readout_rate * params.gamma_s() * cos * cos;
    if scale == T::zero() {
        return Err(Error::DivergentNormalization("Γ_S γ_S = 0"));
    }
    let (tensor, s_bb) = match normalization {
        ForceNormalization::QuantumOnly => (TensorConfig::default(), T::zero()),
        ForceNormalization::FullBudget { tensor, s_bb } => (tensor, s_bb),
    };
    let values = freqs_hz
        .iter()
        .map(|&f| {
            let omega = T::TAU() * f;
            let b = budget_terms(params, probe, &tensor, s_bb, omega)?;
            let chi2 = susceptibility(params, omega)?.norm_sqr();
            let num = match normalization {
                ForceNormalization::QuantumOnly => b.quantum(),
                ForceNormalization::FullBudget { .. } => b.total(),
            };
            Ok(num / (scale * chi2))
        })
        .collect::<Result<Vec<T>>>()?;
    Spectrum::new(freqs_hz.to_vec(), values)
}
