//! Flat `key = value` configuration with unit-suffixed keys.
//!
//! ```text
//! omega_s_khz = -18.0     # signed Larmor frequency
//! readout_khz = 3.8
//! gamma_s0_hz = 158.3
//! n_s = 3.5
//! eta = 0.92
//! phi_rad = 0.0
//! ```
//!
//! Every key is optional; omitted keys take the defaults of [`Config::default`].
//! Frequencies are ordinary (Hz, kHz, GHz) and converted to angular units here.

use std::path::Path;

use serde::Deserialize;

use crate::detuning::DetuningScaling;
use crate::error::{Error, Result};
use crate::fit::SpinModel;
use crate::gwd::GwdConfig;
use crate::mors::ZeemanLadder;
use crate::spin::{DcPhaseWeight, OscillatorParams, ProbeConfig, TensorConfig};
use crate::squeeze::{cooperativity, effective_oscillator};

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub omega_s_khz: f64,
    pub readout_khz: f64,
    pub gamma_s0_hz: f64,
    pub gamma_s_pb_hz: f64,
    pub n_s: f64,
    pub eta: f64,
    pub phi_rad: f64,
    pub alpha_rad: f64,
    pub delta_ghz: f64,
    pub s_bb: f64,

    pub a2_over_a1: f64,
    /// Prefactor of the DC term, (rad/s)⁻².
    pub dc_weight: f64,
    pub dc_halfwidth_khz: f64,
    pub dc_exponent: f64,
    /// `"cos2"` or `"sin2"`.
    pub dc_phase_weight: String,

    /// Weights (shot-noise units) and half-widths of extra broadband Lorentzians.
    pub bb_weights: Vec<f64>,
    pub bb_widths_khz: Vec<f64>,

    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub points: usize,

    /// Half-width of the squeezing search window around |Ω_S|.
    pub squeeze_halfwidth_khz: f64,

    /// S_DC at `delta_ghz`, shot-noise units.
    pub dc_ref: f64,
    pub detune_min_ghz: f64,
    pub detune_max_ghz: f64,
    pub detune_points: usize,

    pub mors_omega_qzs_hz: f64,
    pub mors_linewidth_hz: f64,
    pub mass_threshold: f64,

    pub gwd_omega_qi_hz: f64,
    pub gwd_squeeze_db: f64,
    /// Overrides the cooperativity derived from the oscillator.
    pub gwd_c_q: Option<f64>,
    /// Bare spin frequency of a detuned (mismatched) spin; matched when absent.
    pub gwd_spin_hz: Option<f64>,
}

impl Default for Config {
    /// Phase-quadrature operating point with `C_q = 3`: Ω_S/2π = 18 kHz,
    /// Γ_S/2π = 3.8 kHz, γ_S = Γ_S/24, n_S = 3.5, η = 0.92.
    fn default() -> Self {
        Self {
            omega_s_khz: 18.0,
            readout_khz: 3.8,
            gamma_s0_hz: 3800.0 / 24.0,
            gamma_s_pb_hz: 0.0,
            n_s: 3.5,
            eta: 0.92,
            phi_rad: 0.0,
            alpha_rad: std::f64::consts::FRAC_PI_4,
            delta_ghz: 1.6,
            s_bb: 0.0,
            a2_over_a1: 0.0,
            dc_weight: 0.0,
            dc_halfwidth_khz: 5.0,
            dc_exponent: 5.0,
            dc_phase_weight: "cos2".into(),
            bb_weights: Vec::new(),
            bb_widths_khz: Vec::new(),
            fmin_hz: 1.0e3,
            fmax_hz: 40.0e3,
            points: 2000,
            squeeze_halfwidth_khz: 10.0,
            dc_ref: 0.0,
            detune_min_ghz: 1.0,
            detune_max_ghz: 6.0,
            detune_points: 256,
            mors_omega_qzs_hz: 1.0e3,
            mors_linewidth_hz: 150.0,
            mass_threshold: crate::mors::DEFAULT_MASS_THRESHOLD,
            gwd_omega_qi_hz: 100.0,
            gwd_squeeze_db: 10.0,
            gwd_c_q: None,
            gwd_spin_hz: None,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn oscillator(&self) -> Result<OscillatorParams<f64>> {
        let p = OscillatorParams {
            omega_s: TAU * self.omega_s_khz * 1e3,
            gamma_s0: TAU * self.gamma_s0_hz,
            gamma_s_pb: TAU * self.gamma_s_pb_hz,
            readout_rate: TAU * self.readout_khz * 1e3,
            n_s: self.n_s,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn probe(&self) -> Result<ProbeConfig<f64>> {
        let p = ProbeConfig {
            phi: self.phi_rad,
            eta: self.eta,
            alpha: self.alpha_rad,
            delta: TAU * self.delta_ghz * 1e9,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn tensor(&self) -> Result<TensorConfig<f64>> {
        let weight = match self.dc_phase_weight.as_str() {
            "cos2" => DcPhaseWeight::Cos2,
            "sin2" => DcPhaseWeight::Sin2,
            other => {
                return Err(Error::Config(format!(
                    "dc_phase_weight must be \"cos2\" or \"sin2\", got \"{other}\""
                )))
            }
        };
        let t = TensorConfig {
            a2_over_a1: self.a2_over_a1,
            dc_weight: self.dc_weight,
            dc_exponent: self.dc_exponent,
            dc_halfwidth: TAU * self.dc_halfwidth_khz * 1e3,
            dc_phase_weight: weight,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn bb_components(&self) -> Result<Vec<(f64, f64)>> {
        if self.bb_weights.len() != self.bb_widths_khz.len() {
            return Err(Error::Config(
                "bb_weights and bb_widths_khz differ in length".into(),
            ));
        }
        Ok(self
            .bb_weights
            .iter()
            .zip(&self.bb_widths_khz)
            .map(|(&w, &k)| (w, TAU * k * 1e3))
            .collect())
    }

    pub fn spin_model(&self) -> Result<SpinModel> {
        Ok(SpinModel {
            oscillator: self.oscillator()?,
            eta: self.probe()?.eta,
            s_bb: self.s_bb,
            tensor: self.tensor()?,
            bb_components: self.bb_components()?,
        })
    }

    pub fn detuning(&self) -> Result<DetuningScaling<f64>> {
        let s = DetuningScaling::from_reference(
            TAU * self.delta_ghz * 1e9,
            TAU * self.readout_khz * 1e3,
            TAU * self.gamma_s_pb_hz,
            TAU * self.gamma_s0_hz,
            self.dc_ref,
            self.dc_exponent,
            self.eta,
        );
        s.validate()?;
        Ok(s)
    }

    pub fn ladder(&self) -> ZeemanLadder<f64> {
        ZeemanLadder {
            omega_s: TAU * self.omega_s_khz * 1e3,
            omega_qzs: TAU * self.mors_omega_qzs_hz,
            linewidth: TAU * self.mors_linewidth_hz,
        }
    }

    pub fn gwd(&self) -> Result<GwdConfig<f64>> {
        let osc = self.oscillator()?;
        let c_q = match self.gwd_c_q {
            Some(c) => c,
            None => cooperativity(&osc)?,
        };
        let spin = match self.gwd_spin_hz {
            Some(f) => {
                let bare = OscillatorParams {
                    omega_s: -TAU * f,
                    ..osc
                };
                Some(effective_oscillator(&bare, self.phi_rad)?)
            }
            None => None,
        };
        Ok(GwdConfig {
            omega_qi: TAU * self.gwd_omega_qi_hz,
            squeeze_db: self.gwd_squeeze_db,
            c_q,
            n_s: self.n_s,
            spin,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = Config::parse("omega_s_khz = -18.0\nphi_rad = -0.7854\n").unwrap();
        assert_eq!(c.readout_khz, 3.8);
        let o = c.oscillator().unwrap();
        assert!((o.omega_s + TAU * 18e3).abs() < 1e-9);
        assert!((cooperativity(&o).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            Config::parse("omega_s = 1.0"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Config::parse("eta = \"high\""),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dc_phase_weight_choice() {
        let c = Config::parse("dc_phase_weight = \"sin2\"").unwrap();
        assert_eq!(c.tensor().unwrap().dc_phase_weight, DcPhaseWeight::Sin2);
        let c = Config::parse("dc_phase_weight = \"tan\"").unwrap();
        assert!(c.tensor().is_err());
    }

    #[test]
    fn broadband_lists_must_pair() {
        let c = Config::parse("bb_weights = [0.1, 0.2]\nbb_widths_khz = [5.0]").unwrap();
        assert!(c.bb_components().is_err());
    }
}
