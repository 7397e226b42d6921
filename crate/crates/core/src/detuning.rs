//! Detuning dependence of readout, damping and noise areas, and the search for
//! the probe detuning that gives the best squeezing against tensor DC noise.
//!
//! Each scaling law is an equality with an explicit coefficient:
//! `Γ_S = A/Δ²`, `γ_S = γ_S,0 + C/Δ²`, `S_DC = D/Δ^r`. Only ratios and trends
//! of the areas are physically anchored; their absolute scale is arbitrary.

use crate::error::{Error, Result};
use crate::optim::golden_section;
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningScaling<T> {
    /// A in Γ_S = A/Δ² ((rad/s)³).
    pub a_coeff: T,
    /// C in γ_S = γ_S,0 + C/Δ² ((rad/s)³).
    pub c_coeff: T,
    /// Intrinsic damping γ_S,0 (rad/s).
    pub gamma_s0: T,
    /// D in S_DC = D/Δ^r.
    pub d_coeff: T,
    /// r ∈ [4, 6].
    pub r_exp: T,
    pub eta: T,
}

impl<T: Real> DetuningScaling<T> {
    /// Builds the coefficients from values observed at a reference detuning.
    ///
    /// `readout_ref` and `gamma_pb_ref` are Γ_S and γ_S,pb at `delta_ref`;
    /// `dc_ref` is S_DC there (shot-noise units).
    pub fn from_reference(
        delta_ref: T,
        readout_ref: T,
        gamma_pb_ref: T,
        gamma_s0: T,
        dc_ref: T,
        r_exp: T,
        eta: T,
    ) -> Self {
        let d2 = delta_ref * delta_ref;
        Self {
            a_coeff: readout_ref * d2,
            c_coeff: gamma_pb_ref * d2,
            gamma_s0,
            d_coeff: dc_ref * delta_ref.powf(r_exp),
            r_exp,
            eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let coeffs = [self.a_coeff, self.c_coeff, self.gamma_s0, self.d_coeff];
        if coeffs.iter().any(|c| !(*c >= T::zero()) || !c.is_finite()) {
            return Err(Error::Domain(
                "detuning coefficients must be finite and non-negative".into(),
            ));
        }
        if !(self.r_exp >= lit(4.0) && self.r_exp <= lit(6.0)) {
            return Err(Error::Domain("r must lie in [4, 6]".into()));
        }
        if !(self.eta >= T::zero() && self.eta <= T::one()) {
            return Err(Error::Domain("eta must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Quantum cooperativity `A/(C + γ_S,0 Δ²)` (thermal occupancy neglected).
    pub fn cooperativity_at(&self, delta: T) -> Result<T> {
        check_delta(delta)?;
        let den = self.c_coeff + self.gamma_s0 * delta * delta;
        if den == T::zero() {
            return Ok(if self.a_coeff == T::zero() {
                T::zero()
            } else {
                T::infinity()
            });
        }
        Ok(self.a_coeff / den)
    }
}

fn check_delta<T: Real>(delta: T) -> Result<()> {
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(Error::Domain("detuning must be positive and finite".into()));
    }
    Ok(())
}

pub fn readout_at<T: Real>(s: &DetuningScaling<T>, delta: T) -> Result<T> {
    check_delta(delta)?;
    Ok(s.a_coeff / (delta * delta))
}

pub fn damping_at<T: Real>(s: &DetuningScaling<T>, delta: T) -> Result<T> {
    check_delta(delta)?;
    Ok(s.gamma_s0 + s.c_coeff / (delta * delta))
}

/// Integrated back-action noise `A²/[Δ²(γ_S,0 Δ² + C)]`.
pub fn area_qban<T: Real>(s: &DetuningScaling<T>, delta: T) -> Result<T> {
    check_delta(delta)?;
    let d2 = delta * delta;
    Ok(s.a_coeff * s.a_coeff / (d2 * (s.gamma_s0 * d2 + s.c_coeff)))
}

/// Integrated thermal noise, proportional to Γ_S.
pub fn area_tn<T: Real>(s: &DetuningScaling<T>, delta: T) -> Result<T> {
    readout_at(s, delta)
}

/// Integrated DC noise `D/[Δ⁴(γ_S,0 Δ² + C)]`.
pub fn area_dc<T: Real>(s: &DetuningScaling<T>, delta: T) -> Result<T> {
    check_delta(delta)?;
    let d2 = delta * delta;
    Ok(s.d_coeff / (d2 * d2 * (s.gamma_s0 * d2 + s.c_coeff)))
}

/// `1 − η C_q(Δ)/(C_q(Δ) + 1) + D/Δ^r`.
pub fn squeezing_vs_detuning<T: Real>(s: &DetuningScaling<T>, delta: T) -> Result<T> {
    let c_q = s.cooperativity_at(delta)?;
    let quantum = if c_q.is_infinite() {
        T::one() - s.eta
    } else {
        T::one() - s.eta * c_q / (c_q + T::one())
    };
    Ok(quantum + s.d_coeff / delta.powf(s.r_exp))
}

/// Minimizes [`squeezing_vs_detuning`] on `range`: a 256-point bracketing scan,
/// then golden-section refinement to relative tolerance 1e−6 or better.
pub fn optimal_detuning<T: Real>(s: &DetuningScaling<T>, range: (T, T)) -> Result<(T, T)> {
    let (lo, hi) = range;
    if !(lo > T::zero()) || !(hi > lo) || !hi.is_finite() {
        return Err(Error::Usage(
            "detuning range must satisfy 0 < lo < hi".into(),
        ));
    }
    s.validate()?;
    let f = |d: T| squeezing_vs_detuning(s, d).unwrap_or(T::infinity());
    let n = 256;
    let step = (hi - lo) / lit((n - 1) as f64);
    let mut best = (0usize, f(lo));
    for i in 1..n {
        let v = f(lo + step * lit(i as f64));
        if v < best.1 {
            best = (i, v);
        }
    }
    let a = (lo + step * lit(best.0.saturating_sub(1) as f64)).max(lo);
    let b = (lo + step * lit((best.0 + 1).min(n - 1) as f64)).min(hi);
    let (x, v) = golden_section(f, a, b, lit::<T>(1e-9) * hi);
    Ok((x, v))
}
