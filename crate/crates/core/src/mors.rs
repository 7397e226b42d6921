//! Zeeman-resolved magneto-optical resonance spectra of the F = 4 manifold:
//! synthesis from sublevel populations, and the inverse fit that recovers
//! polarization, occupancy and the sign of the effective mass.
//!
//! Adjacent-sublevel transition `m → m+1` sits at `Ω_S + Ω_QZS(2m + 1)` and
//! carries a complex Lorentzian of amplitude `w_m (p_m − p_{m+1})` with
//! `w_m = F(F+1) − m(m+1)`. The spectrum is the squared magnitude of the sum,
//! evaluated at the line centres' absolute frequencies.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fit::lm::{self, LeastSquares, LmOptions};
use crate::scalar::{lit, to_f64, Real};
use crate::spectrum::{validate_grid, Spectrum};

/// Total angular momentum of the manifold.
pub const F: i32 = 4;
/// Number of sublevels, m = −4..=4.
pub const LEVELS: usize = 9;
/// Number of adjacent-sublevel transitions, m = −4..=3.
pub const TRANSITIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeemanPopulations<T> {
    p: [T; LEVELS],
}

impl<T: Real> ZeemanPopulations<T> {
    /// Populations `p_{−4} .. p_{+4}`; each must be ≥ 0 and they must sum to 1
    /// within 1e−9.
    pub fn new(p: [T; LEVELS]) -> Result<Self> {
        if p.iter().any(|x| !(*x >= T::zero()) || !x.is_finite()) {
            return Err(Error::Domain(
                "populations must be finite and non-negative".into(),
            ));
        }
        let sum = p.iter().fold(T::zero(), |a, b| a + *b);
        if (sum - T::one()).abs() > lit(1e-9) {
            return Err(Error::Domain(format!(
                "populations sum to {} instead of 1",
                to_f64(sum)
            )));
        }
        Ok(Self { p })
    }

    /// Normalizes non-negative weights onto the simplex.
    pub fn from_weights(w: [T; LEVELS]) -> Result<Self> {
        let sum = w.iter().fold(T::zero(), |a, b| a + *b);
        if !(sum > T::zero()) {
            return Err(Error::Domain("population weights sum to zero".into()));
        }
        Self::new(w.map(|x| x / sum))
    }

    /// Fully stretched state `m = ±4`.
    pub fn stretched(top: bool) -> Self {
        let mut p = [T::zero(); LEVELS];
        p[if top { LEVELS - 1 } else { 0 }] = T::one();
        Self { p }
    }

    pub fn uniform() -> Self {
        Self {
            p: [T::one() / lit(LEVELS as f64); LEVELS],
        }
    }

    /// Population of sublevel `m` ∈ −4..=4.
    pub fn get(&self, m: i32) -> T {
        self.p[(m + F) as usize]
    }

    pub fn as_array(&self) -> &[T; LEVELS] {
        &self.p
    }

    /// Reflection `m → −m`.
    pub fn mirrored(&self) -> Self {
        let mut p = self.p;
        p.reverse();
        Self { p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeemanLadder<T> {
    /// Signed Larmor frequency (rad/s).
    pub omega_s: T,
    /// Quadratic Zeeman coefficient Ω_QZS (rad/s).
    pub omega_qzs: T,
    /// Per-transition FWHM (rad/s).
    pub linewidth: T,
}

/// Transition weights and overall gain of the MORS response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorsModel<T> {
    pub weights: [T; TRANSITIONS],
    pub gain: T,
}

impl<T: Real> Default for MorsModel<T> {
    fn default() -> Self {
        let mut weights = [T::zero(); TRANSITIONS];
        for (k, w) in weights.iter_mut().enumerate() {
            let m = k as i32 - F;
            *w = lit((F * (F + 1) - m * (m + 1)) as f64);
        }
        Self {
            weights,
            gain: T::one(),
        }
    }
}

/// Line centres for m = −4..=3, ordered by m.
pub fn transition_frequencies<T: Real>(ladder: &ZeemanLadder<T>) -> [T; TRANSITIONS] {
    let mut out = [T::zero(); TRANSITIONS];
    for (k, f) in out.iter_mut().enumerate() {
        let m = k as i32 - F;
        *f = ladder.omega_s + ladder.omega_qzs * lit((2 * m + 1) as f64);
    }
    out
}

/// Signed amplitude `w_m (p_m − p_{m+1})` of each transition.
pub fn transition_amplitudes<T: Real>(
    pops: &ZeemanPopulations<T>,
    model: &MorsModel<T>,
) -> [T; TRANSITIONS] {
    let mut out = [T::zero(); TRANSITIONS];
    for (k, a) in out.iter_mut().enumerate() {
        let m = k as i32 - F;
        *a = model.gain * model.weights[k] * (pops.get(m) - pops.get(m + 1));
    }
    out
}

/// Complex response at angular frequency `omega`; linear in the populations.
pub fn mors_response<T: Real>(
    ladder: &ZeemanLadder<T>,
    pops: &ZeemanPopulations<T>,
    model: &MorsModel<T>,
    omega: T,
) -> Complex<T> {
    response_from(ladder, &transition_amplitudes(pops, model), omega)
}

fn response_from<T: Real>(
    ladder: &ZeemanLadder<T>,
    amps: &[T; TRANSITIONS],
    omega: T,
) -> Complex<T> {
    let hw = ladder.linewidth * lit(0.5);
    transition_frequencies(ladder)
        .iter()
        .zip(amps)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (&c, &a)| {
            acc + Complex::new(a * hw, T::zero()) / Complex::new(hw, c.abs() - omega)
        })
}

/// Power spectrum `|Σ_m a_m L_m(Ω)|²` on a grid of ordinary frequencies (Hz).
pub fn mors_spectrum<T: Real>(
    ladder: &ZeemanLadder<T>,
    pops: &ZeemanPopulations<T>,
    freqs_hz: &[T],
) -> Result<Spectrum<T>> {
    mors_spectrum_with(ladder, pops, &MorsModel::default(), freqs_hz)
}

pub fn mors_spectrum_with<T: Real>(
    ladder: &ZeemanLadder<T>,
    pops: &ZeemanPopulations<T>,
    model: &MorsModel<T>,
    freqs_hz: &[T],
) -> Result<Spectrum<T>> {
    validate_grid(freqs_hz)?;
    if !(ladder.linewidth > T::zero()) {
        return Err(Error::Domain("linewidth must be positive".into()));
    }
    let amps = transition_amplitudes(pops, model);
    let values = freqs_hz
        .iter()
        .map(|&f| response_from(ladder, &amps, T::TAU() * f).norm_sqr())
        .collect();
    Spectrum::new(freqs_hz.to_vec(), values)
}

/// Spin polarization `Σ m p_m / F`.
pub fn polarization<T: Real>(pops: &ZeemanPopulations<T>) -> T {
    (-F..=F).fold(T::zero(), |acc, m| acc + lit::<T>(m as f64) * pops.get(m)) / lit(F as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassSign {
    Positive,
    Negative,
}

impl std::fmt::Display for MassSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MassSign::Positive => "positive",
            MassSign::Negative => "negative",
        })
    }
}

/// Mean excitation above the stretched state of the given orientation:
/// `Σ (4 − m) p_m` for negative mass (majority in m = +4), `Σ (4 + m) p_m`
/// for positive mass.
pub fn thermal_occupancy<T: Real>(pops: &ZeemanPopulations<T>, mass: MassSign) -> T {
    (-F..=F).fold(T::zero(), |acc, m| {
        let k = match mass {
            MassSign::Negative => F - m,
            MassSign::Positive => F + m,
        };
        acc + lit::<T>(k as f64) * pops.get(m)
    })
}

pub const DEFAULT_MASS_THRESHOLD: f64 = 0.05;

pub fn classify_mass<T: Real>(pops: &ZeemanPopulations<T>) -> Result<MassSign> {
    classify_mass_with(pops, lit(DEFAULT_MASS_THRESHOLD))
}

/// Negative mass when the upper half of the ladder dominates the orientation.
pub fn classify_mass_with<T: Real>(pops: &ZeemanPopulations<T>, threshold: T) -> Result<MassSign> {
    let pol = polarization(pops);
    if pol.abs() <= threshold {
        return Err(Error::IndeterminateMass {
            polarization: to_f64(pol),
            threshold: to_f64(threshold),
        });
    }
    let upper = (1..=F).fold(T::zero(), |a, m| a + lit::<T>(m as f64) * pops.get(m));
    let lower = (-F..0).fold(T::zero(), |a, m| a + lit::<T>(m as f64) * pops.get(m));
    Ok(if upper > lower.abs() {
        MassSign::Negative
    } else {
        MassSign::Positive
    })
}

#[derive(Debug, Clone)]
pub struct MorsFit {
    pub ladder: ZeemanLadder<f64>,
    pub pops: ZeemanPopulations<f64>,
    /// One-sigma uncertainties of Ω_S, Ω_QZS and the linewidth.
    pub ladder_sigmas: [f64; 3],
    /// One-sigma uncertainties of the populations (linearized).
    pub pop_sigmas: [f64; LEVELS],
    /// Residual sum of squares.
    pub residual: f64,
    pub iterations: usize,
    /// Scaled gradient at the optimum.
    pub gradient: f64,
}

impl MorsFit {
    pub fn polarization(&self) -> f64 {
        polarization(&self.pops)
    }
}

struct MorsProblem<'a> {
    omega: Vec<f64>,
    data: &'a [f64],
    model: MorsModel<f64>,
    reference: usize,
}

impl MorsProblem<'_> {
    fn unpack(&self, x: &[f64]) -> (ZeemanLadder<f64>, ZeemanPopulations<f64>) {
        let ladder = ZeemanLadder {
            omega_s: x[0],
            omega_qzs: x[1],
            linewidth: x[2],
        };
        let mut q = [0.0; LEVELS];
        let mut k = 3;
        for (i, slot) in q.iter_mut().enumerate() {
            if i == self.reference {
                *slot = 1.0;
            } else {
                *slot = x[k];
                k += 1;
            }
        }
        let sum: f64 = q.iter().sum();
        (
            ladder,
            ZeemanPopulations {
                p: q.map(|v| v / sum),
            },
        )
    }
}

impl LeastSquares for MorsProblem<'_> {
    fn residual_count(&self) -> usize {
        self.data.len()
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        let (ladder, pops) = self.unpack(x);
        let amps = transition_amplitudes(&pops, &self.model);
        for ((o, &w), &y) in out.iter_mut().zip(&self.omega).zip(self.data) {
            *o = response_from(&ladder, &amps, w).norm_sqr() - y;
        }
    }

    fn param_name(&self, i: usize) -> String {
        match i {
            0 => "omega_s".into(),
            1 => "omega_qzs".into(),
            2 => "linewidth".into(),
            _ => {
                let mut idx = i - 3;
                if idx >= self.reference {
                    idx += 1;
                }
                format!("p{}", idx as i32 - F)
            }
        }
    }
}

/// Population estimate from the line heights at the initial ladder, assuming
/// populations vary monotonically towards the stronger end of the ladder.
fn initial_populations(
    spectrum: &Spectrum<f64>,
    ladder: &ZeemanLadder<f64>,
    model: &MorsModel<f64>,
) -> [f64; LEVELS] {
    let centres = transition_frequencies(ladder);
    let mut diffs = [0.0; TRANSITIONS];
    for (k, c) in centres.iter().enumerate() {
        let target = c.abs();
        let i = (0..spectrum.len())
            .min_by(|&a, &b| {
                (spectrum.angular(a) - target)
                    .abs()
                    .total_cmp(&(spectrum.angular(b) - target).abs())
            })
            .unwrap_or(0);
        let h = spectrum.values()[i].max(0.0);
        diffs[k] = h.sqrt() / (model.gain * model.weights[k]).abs();
    }
    let top_heavy = diffs[TRANSITIONS - 1] >= diffs[0];
    // cumulative steps from the depleted end
    let mut p = [0.0; LEVELS];
    if top_heavy {
        for k in 0..TRANSITIONS {
            p[k + 1] = p[k] + diffs[k];
        }
    } else {
        for k in (0..TRANSITIONS).rev() {
            p[k] = p[k + 1] + diffs[k];
        }
    }
    let sum: f64 = p.iter().sum();
    let offset = ((1.0 - sum) / LEVELS as f64).max(0.0);
    for v in p.iter_mut() {
        *v += offset;
    }
    let sum: f64 = p.iter().sum();
    if sum > 0.0 {
        p.map(|v| v / sum)
    } else {
        [1.0 / LEVELS as f64; LEVELS]
    }
}

/// Damped least-squares fit of [`mors_spectrum`] to a measured spectrum over
/// the ladder and the populations (kept on the simplex by fitting ratios to the
/// majority sublevel).
pub fn fit_mors(spectrum: &Spectrum<f64>, ladder_init: &ZeemanLadder<f64>) -> Result<MorsFit> {
    fit_mors_with(
        spectrum,
        ladder_init,
        &MorsModel::default(),
        &LmOptions::default(),
    )
}

pub fn fit_mors_with(
    spectrum: &Spectrum<f64>,
    ladder_init: &ZeemanLadder<f64>,
    model: &MorsModel<f64>,
    opts: &LmOptions,
) -> Result<MorsFit> {
    if !(ladder_init.linewidth > 0.0) {
        return Err(Error::Domain("initial linewidth must be positive".into()));
    }
    let lo = spectrum.angular(0);
    let hi = spectrum.angular(spectrum.len() - 1);
    if transition_frequencies(ladder_init)
        .iter()
        .any(|c| c.abs() < lo || c.abs() > hi)
    {
        return Err(Error::Usage(
            "spectrum does not cover all eight transitions of the initial ladder".into(),
        ));
    }

    let p0 = initial_populations(spectrum, ladder_init, model);
    let reference = (0..LEVELS)
        .max_by(|&a, &b| p0[a].total_cmp(&p0[b]))
        .unwrap_or(LEVELS - 1);
    let mut x0 = vec![
        ladder_init.omega_s,
        ladder_init.omega_qzs,
        ladder_init.linewidth,
    ];
    x0.extend(
        (0..LEVELS)
            .filter(|&i| i != reference)
            .map(|i| p0[i] / p0[reference]),
    );

    let inf = f64::INFINITY;
    let mut lower = vec![-inf, -inf, 1e-9 * ladder_init.linewidth];
    let mut upper = vec![inf, inf, inf];
    lower.extend(std::iter::repeat_n(0.0, LEVELS - 1));
    upper.extend(std::iter::repeat_n(inf, LEVELS - 1));

    let problem = MorsProblem {
        omega: (0..spectrum.len()).map(|i| spectrum.angular(i)).collect(),
        data: spectrum.values(),
        model: *model,
        reference,
    };
    let out = lm::minimize(&problem, &x0, &lower, &upper, opts)?;
    if !out.converged {
        return Err(Error::NonConvergence {
            iterations: out.iterations,
            rss: out.rss,
            gradient: out.gradient,
        });
    }
    let (ladder, pops) = problem.unpack(&out.params);
    let ladder_sigmas = [out.sigmas[0], out.sigmas[1], out.sigmas[2]];
    let pop_sigmas = population_sigmas(&problem, &out.params, out.covariance.as_ref());
    Ok(MorsFit {
        ladder,
        pops,
        ladder_sigmas,
        pop_sigmas,
        residual: out.rss,
        iterations: out.iterations,
        gradient: out.gradient,
    })
}

/// Propagates the covariance of the population ratios `q` through
/// `p_i = q_i / Σq`.
fn population_sigmas(
    problem: &MorsProblem<'_>,
    x: &[f64],
    cov: Option<&DMatrix<f64>>,
) -> [f64; LEVELS] {
    let Some(cov) = cov else {
        return [f64::INFINITY; LEVELS];
    };
    let (_, pops) = problem.unpack(x);
    let p = pops.as_array();
    let sum: f64 = 1.0 + x[3..].iter().sum::<f64>();
    let free: Vec<usize> = (0..LEVELS).filter(|&i| i != problem.reference).collect();
    let mut out = [0.0; LEVELS];
    for (i, o) in out.iter_mut().enumerate() {
        let g: Vec<f64> = free
            .iter()
            .map(|&j| (if i == j { 1.0 } else { 0.0 } - p[i]) / sum)
            .collect();
        let mut var = 0.0;
        for (a, ga) in g.iter().enumerate() {
            for (b, gb) in g.iter().enumerate() {
                var += ga * cov[(3 + a, 3 + b)] * gb;
            }
        }
        *o = var.max(0.0).sqrt();
    }
    out
}
