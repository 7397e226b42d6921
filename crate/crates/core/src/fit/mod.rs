//! Fitting measured spin-noise spectra.
//!
//! A [`FitProblem`] bundles one or more spectra (typically several homodyne
//! phases of the same oscillator), a model selector, the free parameters with
//! their bounds and a starting point. [`fit_spectrum`] runs the damped
//! least-squares engine in [`lm`] and reports values with local one-sigma
//! uncertainties from the curvature at the optimum (not a full posterior).
//!
//! A single `φ = 0` spectrum only constrains `ηΓ_S(Γ_S + γ_S(2n_S + 1))` in
//! amplitude, so Γ_S, n_S and η cannot be separated from it; a second
//! quadrature with `sin 2φ ≠ 0` breaks the degeneracy.

pub mod lm;

use std::fmt;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::mors::{self, ZeemanLadder};
use crate::spectrum::Spectrum;
use crate::spin::{
    budget_from_chi, lorentz_susceptibility, OscillatorParams, ProbeConfig, TensorConfig,
};

pub use lm::LmOptions;

/// Model selector.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// Shot noise, back-action, correlations, thermal noise and a flat floor.
    Eq1,
    /// [`ModelKind::Eq1`] plus the near-DC tensor noise.
    Eq1Dc,
    /// [`ModelKind::Eq1`] with the broadband floor extended by zero-centred
    /// Lorentzians, parameters `bb_weight_k`, `bb_width_k`.
    MultiLorentzianBb { components: usize },
    /// Zeeman-resolved MORS spectrum starting from `ladder`; every ladder
    /// parameter and population is free.
    Mors { ladder: ZeemanLadder<f64> },
}

impl ModelKind {
    pub fn parse(
        name: &str,
        bb_components: usize,
        ladder: Option<ZeemanLadder<f64>>,
    ) -> Result<Self> {
        match name {
            "eq1" => Ok(ModelKind::Eq1),
            "eq1+dc" | "eq1-dc" => Ok(ModelKind::Eq1Dc),
            "multi-lorentzian-bb" => Ok(ModelKind::MultiLorentzianBb {
                components: bb_components,
            }),
            "mors" => ladder
                .map(|ladder| ModelKind::Mors { ladder })
                .ok_or_else(|| Error::Usage("mors model needs an initial ladder".into())),
            other => Err(Error::Usage(format!(
                "unknown model '{other}' (expected eq1, eq1+dc, multi-lorentzian-bb, mors)"
            ))),
        }
    }
}

/// All spectral parameters of the spin model, angular units.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinModel {
    pub oscillator: OscillatorParams<f64>,
    pub eta: f64,
    /// Flat broadband floor (shot-noise units).
    pub s_bb: f64,
    pub tensor: TensorConfig<f64>,
    /// `(weight, half-width in rad/s)` of extra broadband Lorentzians.
    pub bb_components: Vec<(f64, f64)>,
}

impl SpinModel {
    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(match ParamId::parse(name)? {
            ParamId::OmegaS => self.oscillator.omega_s,
            ParamId::GammaS => self.oscillator.gamma_s(),
            ParamId::Readout => self.oscillator.readout_rate,
            ParamId::NS => self.oscillator.n_s,
            ParamId::Eta => self.eta,
            ParamId::SBb => self.s_bb,
            ParamId::A2 => self.tensor.a2_over_a1,
            ParamId::DcWeight => self.tensor.dc_weight,
            ParamId::DcHalfwidth => self.tensor.dc_halfwidth,
            ParamId::BbWeight(k) => self.component(k)?.0,
            ParamId::BbWidth(k) => self.component(k)?.1,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        self.set_id(ParamId::parse(name)?, value)
    }

    fn component(&self, k: usize) -> Result<(f64, f64)> {
        self.bb_components
            .get(k)
            .copied()
            .ok_or_else(|| Error::Usage(format!("no broadband component {k}")))
    }

    fn set_id(&mut self, id: ParamId, v: f64) -> Result<()> {
        match id {
            ParamId::OmegaS => self.oscillator.omega_s = v,
            ParamId::GammaS => self.oscillator = self.oscillator.with_gamma_s(v),
            ParamId::Readout => self.oscillator.readout_rate = v,
            ParamId::NS => self.oscillator.n_s = v,
            ParamId::Eta => self.eta = v,
            ParamId::SBb => self.s_bb = v,
            ParamId::A2 => self.tensor.a2_over_a1 = v,
            ParamId::DcWeight => self.tensor.dc_weight = v,
            ParamId::DcHalfwidth => self.tensor.dc_halfwidth = v,
            ParamId::BbWeight(k) | ParamId::BbWidth(k) => {
                let c = self
                    .bb_components
                    .get_mut(k)
                    .ok_or_else(|| Error::Usage(format!("no broadband component {k}")))?;
                if matches!(id, ParamId::BbWeight(_)) {
                    c.0 = v;
                } else {
                    c.1 = v;
                }
            }
        }
        Ok(())
    }

    /// Model PSD at angular frequency `omega` and homodyne phase `phi`.
    pub fn evaluate(&self, phi: f64, omega: f64) -> f64 {
        let probe = ProbeConfig {
            phi,
            eta: self.eta,
            alpha: std::f64::consts::FRAC_PI_4,
            delta: 1.0,
        };
        let chi = lorentz_susceptibility(self.oscillator.omega_s, self.oscillator.gamma_s(), omega);
        let b = budget_from_chi(
            &self.oscillator,
            &probe,
            &self.tensor,
            self.s_bb,
            omega,
            chi,
        );
        let extra: f64 = self
            .bb_components
            .iter()
            .map(|&(w, k)| w * (Complex::new(k, 0.0) / Complex::new(k, -omega)).norm_sqr())
            .sum();
        b.total() + self.eta * extra * phi.cos().powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ParamId {
    OmegaS,
    GammaS,
    Readout,
    NS,
    Eta,
    SBb,
    A2,
    DcWeight,
    DcHalfwidth,
    BbWeight(usize),
    BbWidth(usize),
}

impl ParamId {
    fn parse(name: &str) -> Result<Self> {
        let indexed = |prefix: &str| {
            name.strip_prefix(prefix)
                .and_then(|k| k.parse::<usize>().ok())
        };
        Ok(match name {
            "omega_s" => ParamId::OmegaS,
            "gamma_s" => ParamId::GammaS,
            "readout" => ParamId::Readout,
            "n_s" => ParamId::NS,
            "eta" => ParamId::Eta,
            "s_bb" => ParamId::SBb,
            "a2_over_a1" => ParamId::A2,
            "dc_weight" => ParamId::DcWeight,
            "dc_halfwidth" => ParamId::DcHalfwidth,
            _ => {
                if let Some(k) = indexed("bb_weight_") {
                    ParamId::BbWeight(k)
                } else if let Some(k) = indexed("bb_width_") {
                    ParamId::BbWidth(k)
                } else {
                    return Err(Error::Usage(format!("unknown parameter '{name}'")));
                }
            }
        })
    }

    fn default_bounds(self) -> (f64, f64) {
        let inf = f64::INFINITY;
        match self {
            ParamId::OmegaS | ParamId::A2 => (-inf, inf),
            ParamId::Eta => (0.0, 1.0),
            ParamId::GammaS | ParamId::DcHalfwidth | ParamId::BbWidth(_) => (1e-9, inf),
            _ => (0.0, inf),
        }
    }

    fn allowed_in(self, model: &ModelKind) -> bool {
        match self {
            ParamId::A2 | ParamId::DcWeight | ParamId::DcHalfwidth => {
                matches!(model, ModelKind::Eq1Dc)
            }
            ParamId::BbWeight(k) | ParamId::BbWidth(k) => {
                matches!(model, ModelKind::MultiLorentzianBb { components } if k < *components)
            }
            _ => true,
        }
    }
}

/// A free parameter and its box bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeParam {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl FreeParam {
    /// Free parameter with its natural bounds (rates positive, η ∈ [0, 1], …).
    pub fn new(name: &str) -> Result<Self> {
        let (lower, upper) = ParamId::parse(name)?.default_bounds();
        Ok(Self {
            name: name.to_string(),
            lower,
            upper,
        })
    }

    pub fn bounded(name: &str, lower: f64, upper: f64) -> Result<Self> {
        ParamId::parse(name)?;
        if !(lower <= upper) {
            return Err(Error::Usage(format!("empty bounds for {name}")));
        }
        Ok(Self {
            name: name.to_string(),
            lower,
            upper,
        })
    }

    /// Parses a comma list of names, each optionally `name:lo:hi`.
    pub fn parse_list(list: &str) -> Result<Vec<Self>> {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|item| {
                let parts: Vec<&str> = item.split(':').collect();
                match parts.as_slice() {
                    [name] => Self::new(name),
                    [name, lo, hi] => {
                        let num = |s: &str| {
                            s.parse::<f64>()
                                .map_err(|_| Error::Usage(format!("bad bound '{s}' for {name}")))
                        };
                        Self::bounded(name, num(lo)?, num(hi)?)
                    }
                    _ => Err(Error::Usage(format!("bad free parameter '{item}'"))),
                }
            })
            .collect()
    }
}

/// One measured spectrum and the homodyne phase it was taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub spectrum: Spectrum<f64>,
    pub phi: f64,
    /// Per-point weights; uniform when `None`.
    pub weights: Option<Vec<f64>>,
}

impl Observation {
    pub fn new(spectrum: Spectrum<f64>, phi: f64) -> Self {
        Self {
            spectrum,
            phi,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub data: Vec<Observation>,
    pub model: ModelKind,
    pub free: Vec<FreeParam>,
    pub init: SpinModel,
    /// Frequency windows (Hz, inclusive) excluded from the objective.
    pub mask: Vec<(f64, f64)>,
    pub options: LmOptions,
}

impl FitProblem {
    pub fn new(
        data: Vec<Observation>,
        model: ModelKind,
        free: Vec<FreeParam>,
        init: SpinModel,
    ) -> Self {
        Self {
            data,
            model,
            free,
            init,
            mask: Vec::new(),
            options: LmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedParam {
    pub name: String,
    pub value: f64,
    /// Local one-sigma estimate.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: Vec<FittedParam>,
    pub residual_rss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Scaled gradient at the returned point.
    pub gradient: f64,
    /// Parameters that were clipped onto a bound during the iteration.
    pub projected: Vec<String>,
    pub warnings: Vec<String>,
    /// Number of residuals that entered the objective.
    pub points: usize,
}

impl FitReport {
    pub fn get(&self, name: &str) -> Option<&FittedParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.value)
    }
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.params {
            writeln!(f, "{} = {} ± {}", p.name, p.value, p.sigma)?;
        }
        write!(
            f,
            "rss = {:e}, iterations = {}, converged = {}",
            self.residual_rss, self.iterations, self.converged
        )
    }
}

struct Point {
    obs: usize,
    omega: f64,
    y: f64,
    sw: f64,
}

struct Eq1Problem<'a> {
    points: Vec<Point>,
    phis: Vec<f64>,
    ids: Vec<ParamId>,
    names: &'a [FreeParam],
    base: &'a SpinModel,
}

impl Eq1Problem<'_> {
    fn model_at(&self, x: &[f64]) -> SpinModel {
        let mut m = self.base.clone();
        for (&id, &v) in self.ids.iter().zip(x) {
            // ids were validated against the model when the problem was built
            let _ = m.set_id(id, v);
        }
        m
    }
}

impl lm::LeastSquares for Eq1Problem<'_> {
    fn residual_count(&self) -> usize {
        self.points.len()
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        let m = self.model_at(x);
        for (o, p) in out.iter_mut().zip(&self.points) {
            *o = p.sw * (m.evaluate(self.phis[p.obs], p.omega) - p.y);
        }
    }

    fn param_name(&self, i: usize) -> String {
        self.names[i].name.clone()
    }
}

fn masked(mask: &[(f64, f64)], f: f64) -> bool {
    mask.iter().any(|&(lo, hi)| f >= lo && f <= hi)
}

/// Damped least-squares fit of the selected model.
///
/// Deterministic in its input. Singular normal equations at the starting point
/// are reported as [`Error::RankDeficient`] naming the parameters involved.
/// Steps leaving the bounds are projected back and listed in
/// [`FitReport::projected`]. Negative PSD values in the data are fitted as
/// they are and flagged in [`FitReport::warnings`].
pub fn fit_spectrum(problem: &FitProblem) -> Result<FitReport> {
    if problem.data.is_empty() || problem.data.iter().any(|o| o.spectrum.is_empty()) {
        return Err(Error::Empty);
    }
    let mut warnings = Vec::new();
    for (k, o) in problem.data.iter().enumerate() {
        if o.spectrum.has_negative() {
            warnings.push(format!("spectrum {k} contains negative PSD values"));
        }
    }
    if let ModelKind::Mors { ladder } = &problem.model {
        return fit_mors_report(problem, ladder, warnings);
    }
    if problem.free.is_empty() {
        return Err(Error::Usage(
            "at least one free parameter is required".into(),
        ));
    }

    let mut ids = Vec::with_capacity(problem.free.len());
    for p in &problem.free {
        let id = ParamId::parse(&p.name)?;
        if !id.allowed_in(&problem.model) {
            return Err(Error::Usage(format!(
                "parameter '{}' is not part of the selected model",
                p.name
            )));
        }
        if ids.contains(&id) {
            return Err(Error::Usage(format!("parameter '{}' listed twice", p.name)));
        }
        ids.push(id);
    }
    if let ModelKind::MultiLorentzianBb { components } = problem.model {
        if problem.init.bb_components.len() != components {
            return Err(Error::Usage(format!(
                "initial model has {} broadband components, selector asks for {components}",
                problem.init.bb_components.len()
            )));
        }
    }
    problem.init.oscillator.validate()?;

    let mut points = Vec::new();
    for (k, o) in problem.data.iter().enumerate() {
        if let Some(w) = &o.weights {
            if w.len() != o.spectrum.len() || w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(Error::Usage(format!(
                    "weights of spectrum {k} must be finite, non-negative and match its length"
                )));
            }
        }
        for (i, (f, y)) in o.spectrum.iter().enumerate() {
            if masked(&problem.mask, f) {
                continue;
            }
            let w = o.weights.as_ref().map_or(1.0, |w| w[i]);
            points.push(Point {
                obs: k,
                omega: o.spectrum.angular(i),
                y,
                sw: w.sqrt(),
            });
        }
    }
    if points.is_empty() {
        return Err(Error::Usage("mask removes every data point".into()));
    }

    let lsq = Eq1Problem {
        points,
        phis: problem.data.iter().map(|o| o.phi).collect(),
        ids,
        names: &problem.free,
        base: &problem.init,
    };
    let init: Vec<f64> = problem
        .free
        .iter()
        .map(|p| problem.init.get(&p.name))
        .collect::<Result<_>>()?;
    let lower: Vec<f64> = problem.free.iter().map(|p| p.lower).collect();
    let upper: Vec<f64> = problem.free.iter().map(|p| p.upper).collect();
    let out = lm::minimize(&lsq, &init, &lower, &upper, &problem.options)?;

    Ok(FitReport {
        params: problem
            .free
            .iter()
            .zip(out.params.iter().zip(&out.sigmas))
            .map(|(p, (&value, &sigma))| FittedParam {
                name: p.name.clone(),
                value,
                sigma,
            })
            .collect(),
        residual_rss: out.rss,
        iterations: out.iterations,
        converged: out.converged,
        gradient: out.gradient,
        projected: out
            .projected
            .iter()
            .map(|&i| problem.free[i].name.clone())
            .collect(),
        warnings,
        points: lsq.points.len(),
    })
}

fn fit_mors_report(
    problem: &FitProblem,
    ladder: &ZeemanLadder<f64>,
    mut warnings: Vec<String>,
) -> Result<FitReport> {
    let [obs] = problem.data.as_slice() else {
        return Err(Error::Usage(
            "the mors model fits exactly one spectrum".into(),
        ));
    };
    if !problem.free.is_empty() {
        warnings.push("free-parameter list ignored: every mors parameter is fitted".into());
    }
    if !problem.mask.is_empty() {
        warnings.push("mask ignored by the mors model".into());
    }
    let fit = mors::fit_mors_with(
        &obs.spectrum,
        ladder,
        &mors::MorsModel::default(),
        &problem.options,
    )?;
    let mut params = vec![
        FittedParam {
            name: "omega_s".into(),
            value: fit.ladder.omega_s,
            sigma: fit.ladder_sigmas[0],
        },
        FittedParam {
            name: "omega_qzs".into(),
            value: fit.ladder.omega_qzs,
            sigma: fit.ladder_sigmas[1],
        },
        FittedParam {
            name: "linewidth".into(),
            value: fit.ladder.linewidth,
            sigma: fit.ladder_sigmas[2],
        },
    ];
    for (i, (&p, &s)) in fit.pops.as_array().iter().zip(&fit.pop_sigmas).enumerate() {
        params.push(FittedParam {
            name: format!("p{}", i as i32 - mors::F),
            value: p,
            sigma: s,
        });
    }
    Ok(FitReport {
        params,
        residual_rss: fit.residual,
        iterations: fit.iterations,
        converged: true,
        gradient: fit.gradient,
        projected: Vec::new(),
        warnings,
        points: obs.spectrum.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::linear_grid;
    use std::f64::consts::{FRAC_PI_4, TAU};

    fn truth() -> SpinModel {
        SpinModel {
            oscillator: OscillatorParams {
                omega_s: TAU * 18e3,
                gamma_s0: TAU * 1e3,
                gamma_s_pb: 0.0,
                readout_rate: TAU * 3.8e3,
                n_s: 3.5,
            },
            eta: 0.92,
            s_bb: 0.0,
            tensor: TensorConfig::default(),
            bb_components: Vec::new(),
        }
    }

    fn synth(m: &SpinModel, phi: f64) -> Observation {
        let f = linear_grid(8e3, 28e3, 801);
        let y = f.iter().map(|&f| m.evaluate(phi, TAU * f)).collect();
        Observation::new(Spectrum::new(f, y).unwrap(), phi)
    }

    fn start() -> SpinModel {
        let mut m = truth();
        m.set("readout", TAU * 3.3e3).unwrap();
        m.set("gamma_s", TAU * 1.2e3).unwrap();
        m.set("n_s", 2.5).unwrap();
        m
    }

    #[test]
    fn exact_recovery_from_two_quadratures() {
        let t = truth();
        let data = vec![synth(&t, 0.0), synth(&t, -FRAC_PI_4)];
        let free = FreeParam::parse_list("readout,gamma_s,n_s").unwrap();
        let r = fit_spectrum(&FitProblem::new(data, ModelKind::Eq1, free, start())).unwrap();
        assert!(r.converged);
        assert!(r.residual_rss < 1e-12, "{r}");
        for name in ["readout", "gamma_s", "n_s"] {
            let rel = r.value(name).unwrap() / t.get(name).unwrap() - 1.0;
            assert!(rel.abs() < 1e-6, "{name}: {rel}");
        }
    }

    #[test]
    fn single_phase_quadrature_degeneracies() {
        let t = truth();
        for list in ["eta,readout", "readout,gamma_s,n_s"] {
            let free = FreeParam::parse_list(list).unwrap();
            let err = fit_spectrum(&FitProblem::new(
                vec![synth(&t, 0.0)],
                ModelKind::Eq1,
                free,
                start(),
            ))
            .unwrap_err();
            match err {
                Error::RankDeficient { params } => assert!(params.contains(&"readout".to_string())),
                e => panic!("{e}"),
            }
        }
    }

    #[test]
    fn model_selector_guards_parameters() {
        let free = FreeParam::parse_list("dc_weight").unwrap();
        let p = FitProblem::new(vec![synth(&truth(), 0.0)], ModelKind::Eq1, free, truth());
        assert!(matches!(fit_spectrum(&p), Err(Error::Usage(_))));
        assert!(FreeParam::parse_list("bogus").is_err());
        assert_eq!(
            FreeParam::parse_list("eta:0.5:1").unwrap()[0],
            FreeParam::bounded("eta", 0.5, 1.0).unwrap()
        );
    }

    #[test]
    fn broadband_lorentzian_component() {
        let mut t = truth();
        t.bb_components = vec![(0.2, TAU * 6e3)];
        let data = vec![synth(&t, 0.0), synth(&t, -FRAC_PI_4)];
        let mut init = t.clone();
        init.bb_components = vec![(0.1, TAU * 4e3)];
        let free = FreeParam::parse_list("bb_weight_0,bb_width_0").unwrap();
        let r = fit_spectrum(&FitProblem::new(
            data,
            ModelKind::MultiLorentzianBb { components: 1 },
            free,
            init,
        ))
        .unwrap();
        assert!((r.value("bb_weight_0").unwrap() - 0.2).abs() < 1e-6);
        assert!((r.value("bb_width_0").unwrap() / (TAU * 6e3) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mask_and_negative_flag() {
        let t = truth();
        let mut obs = synth(&t, 0.0);
        let (f, mut y) = obs.spectrum.clone().into_parts();
        y[0] = -0.01;
        obs.spectrum = Spectrum::new(f, y).unwrap();
        let free = FreeParam::parse_list("gamma_s").unwrap();
        let mut p = FitProblem::new(vec![obs], ModelKind::Eq1, free, t);
        p.mask = vec![(0.0, 8.5e3)];
        let r = fit_spectrum(&p).unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert!(r.points < 801);
        assert!(r.residual_rss < 1e-12);
    }
}
