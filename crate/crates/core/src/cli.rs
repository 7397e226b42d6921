//! Command line front end.
//!
//! Every subcommand writes a CSV table to stdout (or `--out`) and a
//! `key = value` summary to stderr (or `--summary`). Exit status: 0 success,
//! 2 usage/input error, 3 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::Config;
use crate::detuning::{
    area_dc, area_qban, area_tn, damping_at, optimal_detuning, readout_at, squeezing_vs_detuning,
};
use crate::error::{Error, Result};
use crate::fit::{fit_spectrum, FitProblem, FitReport, FreeParam, ModelKind, Observation};
use crate::gwd::{interferometer_noise, joint_noise, k_interferometer};
use crate::io::{fmt_num, load_spectrum, write_table, SpectrumFormat};
use crate::mors;
use crate::spectrum::{linear_grid, log_grid, Spectrum};
use crate::spin::psd_budget;
use crate::squeeze::{
    cooperativity, effective_oscillator, force_normalized_spectrum, max_squeezing,
    optimize_squeezing, ForceNormalization, SearchDomain,
};

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Parser)]
#[command(
    name = "spinq",
    version,
    about = "Spin-oscillator noise spectra, squeezing and fits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (flat key = value)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the CSV table here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the key = value summary here instead of stderr
    #[arg(long, global = true)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Grid {
    /// Lowest frequency (Hz)
    #[arg(long)]
    fmin: Option<f64>,
    /// Highest frequency (Hz)
    #[arg(long)]
    fmax: Option<f64>,
    /// Number of grid points
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the noise spectrum and its budget
    Psd {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
        /// Homodyne phase (rad)
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<f64>,
        /// Relative Gaussian noise added to the spectrum
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Seed of the synthetic noise
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit measured spectra
    Fit {
        #[command(flatten)]
        common: Common,
        /// Spectrum files (freq_hz, psd)
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Homodyne phase of each file (rad), comma separated
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        phi: Vec<f64>,
        /// eq1, eq1+dc, multi-lorentzian-bb or mors
        #[arg(long, default_value = "eq1")]
        model: String,
        /// Free parameters, comma separated, each `name` or `name:lo:hi`
        #[arg(long, default_value = "readout,gamma_s,n_s")]
        free: String,
        /// Excluded windows `lo:hi` (Hz), comma separated
        #[arg(long)]
        mask: Option<String>,
        /// `uniform`, or `relative` (1/psd², suited to multiplicative noise)
        #[arg(long, default_value = "uniform")]
        weights: String,
    },
    /// Optimize quadrature phase and frequency for maximal squeezing
    Squeeze {
        #[command(flatten)]
        common: Common,
    },
    /// Effective oscillator and force-normalized spectrum
    Shift {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
        /// Homodyne phase (rad)
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<f64>,
    },
    /// Squeezing versus probe detuning and its optimum
    Detune {
        #[command(flatten)]
        common: Common,
        /// Number of scan points
        #[arg(long)]
        points: Option<usize>,
    },
    /// Fit a Zeeman-resolved MORS spectrum
    Mors {
        #[command(flatten)]
        common: Common,
        /// Spectrum file (freq_hz, psd)
        file: PathBuf,
    },
    /// Interferometer noise with and without the spin oscillator
    Gwd {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
    },
}

/// Summary lines in insertion order.
#[derive(Default)]
struct Summary(Vec<(String, String)>);

impl Summary {
    fn num(&mut self, key: &str, v: f64) {
        self.0.push((key.into(), fmt_num(v)));
    }

    fn text(&mut self, key: &str, v: impl ToString) {
        self.0.push((key.into(), v.to_string()));
    }

    fn write(&self, w: &mut dyn Write) -> Result<()> {
        for (k, v) in &self.0 {
            writeln!(w, "{k} = {v}")?;
        }
        Ok(())
    }
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

struct Output {
    table: Table,
    summary: Summary,
    /// Reported after the outputs are written.
    failure: Option<Error>,
}

/// Parses `args` (including the program name) and runs one subcommand.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(None) => 0,
        // downstream closed early (e.g. `| head`)
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Ok(Some(e)) | Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<Option<Error>> {
    let (common, output) = match cmd {
        Command::Psd {
            common,
            grid,
            phi,
            noise,
            seed,
        } => {
            let cfg = load_config(&common)?;
            let out = psd(&cfg, &grid, phi, noise, seed)?;
            (common, out)
        }
        Command::Fit {
            common,
            files,
            phi,
            model,
            free,
            mask,
            weights,
        } => {
            let cfg = load_config(&common)?;
            let opts = FitArgs {
                model: &model,
                free: &free,
                mask: mask.as_deref(),
                weights: &weights,
            };
            let out = fit(&cfg, &files, &phi, &opts)?;
            (common, out)
        }
        Command::Squeeze { common } => {
            let cfg = load_config(&common)?;
            (common, squeeze(&cfg)?)
        }
        Command::Shift { common, grid, phi } => {
            let cfg = load_config(&common)?;
            (common, shift(&cfg, &grid, phi)?)
        }
        Command::Detune { common, points } => {
            let cfg = load_config(&common)?;
            (common, detune(&cfg, points)?)
        }
        Command::Mors { common, file } => {
            let cfg = load_config(&common)?;
            (common, mors_cmd(&cfg, &file)?)
        }
        Command::Gwd { common, grid } => {
            let cfg = load_config(&common)?;
            (common, gwd(&cfg, &grid)?)
        }
    };

    match &common.out {
        Some(path) => write_table(
            BufWriter::new(create(path)?),
            &output.table.header,
            output.table.rows,
        )?,
        None => write_table(&mut *stdout, &output.table.header, output.table.rows)?,
    }
    match &common.summary {
        Some(path) => {
            let mut w = BufWriter::new(create(path)?);
            output.summary.write(&mut w)?;
            w.flush()?;
        }
        None => output.summary.write(stderr)?,
    }
    Ok(output.failure)
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn load_config(common: &Common) -> Result<Config> {
    match &common.config {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn grid_from(grid: &Grid, defaults: (f64, f64, usize), log: bool) -> Result<Vec<f64>> {
    let fmin = grid.fmin.unwrap_or(defaults.0);
    let fmax = grid.fmax.unwrap_or(defaults.1);
    let n = grid.points.unwrap_or(defaults.2);
    if !(fmin > 0.0 && fmax > fmin) || n < 2 {
        return Err(Error::Usage(format!(
            "grid needs 0 < fmin < fmax and at least 2 points (got {fmin}, {fmax}, {n})"
        )));
    }
    Ok(if log {
        log_grid(fmin, fmax, n)
    } else {
        linear_grid(fmin, fmax, n)
    })
}

fn cfg_grid(cfg: &Config) -> (f64, f64, usize) {
    (cfg.fmin_hz, cfg.fmax_hz, cfg.points)
}

fn psd(cfg: &Config, grid: &Grid, phi: Option<f64>, noise: f64, seed: u64) -> Result<Output> {
    if !(noise >= 0.0) {
        return Err(Error::Usage("--noise must be non-negative".into()));
    }
    let params = cfg.oscillator()?;
    let mut probe = cfg.probe()?;
    if let Some(phi) = phi {
        probe.phi = phi;
    }
    let tensor = cfg.tensor()?;
    let model = cfg.spin_model()?;
    let freqs = grid_from(grid, cfg_grid(cfg), false)?;
    let budget = psd_budget(&params, &probe, &tensor, cfg.s_bb, &freqs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = freqs
        .iter()
        .zip(&budget)
        .map(|(&f, b)| {
            let total = model.evaluate(probe.phi, TAU * f);
            let xi: f64 = StandardNormal.sample(&mut rng);
            vec![
                f,
                total * (1.0 + noise * xi),
                b.sn,
                b.qban,
                b.corr,
                b.tn,
                b.bb,
                b.dc,
            ]
        })
        .collect();
    let mut s = Summary::default();
    s.num("points", freqs.len() as f64);
    s.num("phi_rad", probe.phi);
    s.num("c_q", cooperativity(&params)?);
    s.num("noise", noise);
    s.num("seed", seed as f64);
    let (imin, vmin) = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r[1]))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    s.num("psd_min", vmin);
    s.num("psd_min_freq_hz", rows[imin][0]);
    Ok(Output {
        table: Table {
            header: vec!["freq_hz", "psd", "sn", "qban", "corr", "tn", "bb", "dc"],
            rows,
        },
        summary: s,
        failure: None,
    })
}

fn parse_mask(spec: &str) -> Result<Vec<(f64, f64)>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|w| {
            let (lo, hi) = w
                .split_once(':')
                .ok_or_else(|| Error::Usage(format!("mask window '{w}' is not lo:hi")))?;
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Usage(format!("bad mask bound '{s}'")))
            };
            let (lo, hi) = (num(lo)?, num(hi)?);
            if !(lo <= hi) {
                return Err(Error::Usage(format!("empty mask window '{w}'")));
            }
            Ok((lo, hi))
        })
        .collect()
}

struct FitArgs<'a> {
    model: &'a str,
    free: &'a str,
    mask: Option<&'a str>,
    weights: &'a str,
}

fn fit(cfg: &Config, files: &[PathBuf], phis: &[f64], args: &FitArgs<'_>) -> Result<Output> {
    let relative = match args.weights {
        "uniform" => false,
        "relative" => true,
        other => {
            return Err(Error::Usage(format!(
                "--weights must be uniform or relative, got '{other}'"
            )))
        }
    };
    let phis: Vec<f64> = match phis.len() {
        0 => vec![cfg.phi_rad; files.len()],
        n if n == files.len() => phis.to_vec(),
        n => {
            return Err(Error::Usage(format!(
                "{} files but {n} phases given with --phi",
                files.len()
            )))
        }
    };
    let mut warnings = Vec::new();
    let mut data = Vec::with_capacity(files.len());
    for (path, &phi) in files.iter().zip(&phis) {
        let loaded = load_spectrum(path, SpectrumFormat::from_path(path))?;
        warnings.extend(
            loaded
                .warnings
                .iter()
                .map(|w| format!("{}: {w}", path.display())),
        );
        let mut obs = Observation::new(loaded.spectrum, phi);
        if relative {
            if obs.spectrum.values().iter().any(|&y| y <= 0.0) {
                return Err(Error::Usage(format!(
                    "{}: relative weights need a strictly positive PSD",
                    path.display()
                )));
            }
            obs.weights = Some(
                obs.spectrum
                    .values()
                    .iter()
                    .map(|y| 1.0 / (y * y))
                    .collect(),
            );
        }
        data.push(obs);
    }
    let init = cfg.spin_model()?;
    let kind = ModelKind::parse(args.model, init.bb_components.len(), Some(cfg.ladder()))?;
    let free = if matches!(kind, ModelKind::Mors { .. }) {
        Vec::new()
    } else {
        FreeParam::parse_list(args.free)?
    };
    let mut problem = FitProblem::new(data, kind, free, init);
    if let Some(m) = args.mask {
        problem.mask = parse_mask(m)?;
    }
    let report = fit_spectrum(&problem)?;

    let mut fitted = problem.init.clone();
    let is_mors = matches!(problem.model, ModelKind::Mors { .. });
    if !is_mors {
        for p in &report.params {
            fitted.set(&p.name, p.value)?;
        }
    }
    let mut rows = Vec::new();
    for (k, obs) in problem.data.iter().enumerate() {
        let model_vals: Vec<f64> = if is_mors {
            mors_model_values(&report, &obs.spectrum)?
        } else {
            (0..obs.spectrum.len())
                .map(|i| fitted.evaluate(obs.phi, obs.spectrum.angular(i)))
                .collect()
        };
        for ((f, y), m) in obs.spectrum.iter().zip(model_vals) {
            rows.push(vec![k as f64, f, y, m, y - m]);
        }
    }

    let mut s = Summary::default();
    s.text("model", args.model);
    s.text("weights", args.weights);
    write_report(&mut s, &report);
    for w in &warnings {
        s.text("warning", w);
    }
    let failure = (!report.converged).then_some(Error::NonConvergence {
        iterations: report.iterations,
        rss: report.residual_rss,
        gradient: report.gradient,
    });
    Ok(Output {
        table: Table {
            header: vec!["spectrum", "freq_hz", "psd", "model", "residual"],
            rows,
        },
        summary: s,
        failure,
    })
}

fn mors_model_values(report: &FitReport, spectrum: &Spectrum<f64>) -> Result<Vec<f64>> {
    let v = |n: &str| {
        report
            .value(n)
            .ok_or_else(|| Error::Domain(format!("missing {n}")))
    };
    let ladder = mors::ZeemanLadder {
        omega_s: v("omega_s")?,
        omega_qzs: v("omega_qzs")?,
        linewidth: v("linewidth")?,
    };
    let mut p = [0.0; mors::LEVELS];
    for (i, slot) in p.iter_mut().enumerate() {
        *slot = v(&format!("p{}", i as i32 - mors::F))?;
    }
    let pops = mors::ZeemanPopulations::from_weights(p)?;
    Ok(mors::mors_spectrum(&ladder, &pops, spectrum.freqs())?
        .values()
        .to_vec())
}

fn write_report(s: &mut Summary, r: &FitReport) {
    for p in &r.params {
        s.num(&p.name, p.value);
        s.num(&format!("{}_sigma", p.name), p.sigma);
    }
    s.num("residual_rss", r.residual_rss);
    s.num("points", r.points as f64);
    s.num("iterations", r.iterations as f64);
    s.text("converged", r.converged);
    s.num("gradient", r.gradient);
    if !r.projected.is_empty() {
        s.text("projected", r.projected.join(","));
    }
    for w in &r.warnings {
        s.text("warning", w);
    }
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn squeeze(cfg: &Config) -> Result<Output> {
    let params = cfg.oscillator()?;
    let probe = cfg.probe()?;
    let tensor = cfg.tensor()?;
    let domain = SearchDomain::around(&params, TAU * cfg.squeeze_halfwidth_khz * 1e3);
    let res = optimize_squeezing(&params, &probe, &tensor, cfg.s_bb, &domain)?;
    let c_q = cooperativity(&params)?;

    let mut at_opt = probe;
    at_opt.phi = res.phi_opt;
    let freqs = linear_grid(domain.omega.0 / TAU, domain.omega.1 / TAU, 1001);
    let budget = psd_budget(&params, &at_opt, &tensor, cfg.s_bb, &freqs)?;
    let rows = freqs
        .iter()
        .zip(&budget)
        .map(|(&f, b)| vec![f, b.total()])
        .collect();

    let mut s = Summary::default();
    s.num("c_q", c_q);
    s.num("phi_opt_rad", res.phi_opt);
    s.num("freq_opt_khz", res.omega_opt / TAU / 1e3);
    s.num("s_min", res.s_min);
    s.num("s_min_db", db(res.s_min));
    s.num("analytic_bound", max_squeezing(c_q, probe.eta));
    s.num("analytic_bound_db", db(max_squeezing(c_q, probe.eta)));
    Ok(Output {
        table: Table {
            header: vec!["freq_hz", "psd"],
            rows,
        },
        summary: s,
        failure: None,
    })
}

fn shift(cfg: &Config, grid: &Grid, phi: Option<f64>) -> Result<Output> {
    let params = cfg.oscillator()?;
    let mut probe = cfg.probe()?;
    if let Some(phi) = phi {
        probe.phi = phi;
    }
    let eff = effective_oscillator(&params, probe.phi)?;
    let freqs = grid_from(grid, cfg_grid(cfg), false)?;
    let tensor = cfg.tensor()?;
    let budget = psd_budget(&params, &probe, &tensor, cfg.s_bb, &freqs)?;
    let force =
        force_normalized_spectrum(&params, &probe, ForceNormalization::QuantumOnly, &freqs)?;
    let rows = freqs
        .iter()
        .zip(&budget)
        .zip(force.values())
        .map(|((&f, b), &n)| vec![f, b.total(), n])
        .collect();
    let (imin, _) = force.argmin();

    let mut s = Summary::default();
    s.num("phi_rad", probe.phi);
    s.num("omega_s_khz", params.omega_s.abs() / TAU / 1e3);
    s.num("omega_eff_khz", eff.omega_eff.abs() / TAU / 1e3);
    s.num("shift_khz", eff.shift() / TAU / 1e3);
    s.num("readout_eff_khz", eff.readout_eff / TAU / 1e3);
    s.num("force_min_freq_khz", force.freqs()[imin] / 1e3);
    Ok(Output {
        table: Table {
            header: vec!["freq_hz", "psd", "force_normalized"],
            rows,
        },
        summary: s,
        failure: None,
    })
}

fn detune(cfg: &Config, points: Option<usize>) -> Result<Output> {
    let scaling = cfg.detuning()?;
    let lo = TAU * cfg.detune_min_ghz * 1e9;
    let hi = TAU * cfg.detune_max_ghz * 1e9;
    let n = points.unwrap_or(cfg.detune_points);
    if n < 2 {
        return Err(Error::Usage("--points must be at least 2".into()));
    }
    let (d_opt, s_opt) = optimal_detuning(&scaling, (lo, hi))?;
    let rows = linear_grid(lo, hi, n)
        .into_iter()
        .map(|d| {
            Ok(vec![
                d / TAU / 1e9,
                readout_at(&scaling, d)? / TAU,
                damping_at(&scaling, d)? / TAU,
                scaling.cooperativity_at(d)?,
                area_qban(&scaling, d)?,
                area_tn(&scaling, d)?,
                area_dc(&scaling, d)?,
                squeezing_vs_detuning(&scaling, d)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let rel = 1e-6 * (hi - lo);
    let interior = d_opt - lo > rel && hi - d_opt > rel;

    let mut s = Summary::default();
    s.num("delta_opt_ghz", d_opt / TAU / 1e9);
    s.num("s_opt", s_opt);
    s.num("s_opt_db", db(s_opt));
    s.num("c_q_opt", scaling.cooperativity_at(d_opt)?);
    s.text("interior", interior);
    Ok(Output {
        table: Table {
            header: vec![
                "delta_ghz",
                "readout_hz",
                "damping_hz",
                "c_q",
                "area_qban",
                "area_tn",
                "area_dc",
                "squeezing",
            ],
            rows,
        },
        summary: s,
        failure: None,
    })
}

fn mors_cmd(cfg: &Config, file: &Path) -> Result<Output> {
    let loaded = load_spectrum(file, SpectrumFormat::from_path(file))?;
    let fit = mors::fit_mors(&loaded.spectrum, &cfg.ladder())?;
    let model = mors::mors_spectrum(&fit.ladder, &fit.pops, loaded.spectrum.freqs())?;
    let rows = loaded
        .spectrum
        .iter()
        .zip(model.values())
        .map(|((f, y), &m)| vec![f, y, m, y - m])
        .collect();

    let mut s = Summary::default();
    s.num("omega_s_khz", fit.ladder.omega_s / TAU / 1e3);
    s.num("omega_qzs_hz", fit.ladder.omega_qzs / TAU);
    s.num("linewidth_hz", fit.ladder.linewidth / TAU);
    for (i, p) in fit.pops.as_array().iter().enumerate() {
        s.num(&format!("p{}", i as i32 - mors::F), *p);
    }
    s.num("polarization", fit.polarization());
    s.num("residual_rss", fit.residual);
    s.num("iterations", fit.iterations as f64);
    for w in &loaded.warnings {
        s.text("warning", w);
    }
    let failure = match mors::classify_mass_with(&fit.pops, cfg.mass_threshold) {
        Ok(mass) => {
            s.text("mass", mass);
            s.num("n_s", mors::thermal_occupancy(&fit.pops, mass));
            None
        }
        Err(e) => {
            s.text("mass", "indeterminate");
            Some(e)
        }
    };
    Ok(Output {
        table: Table {
            header: vec!["freq_hz", "psd", "model", "residual"],
            rows,
        },
        summary: s,
        failure,
    })
}

fn gwd(cfg: &Config, grid: &Grid) -> Result<Output> {
    let g = cfg.gwd()?;
    let qi = cfg.gwd_omega_qi_hz;
    let freqs = grid_from(grid, (qi / 100.0, qi * 100.0, 401), true)?;
    let mut below: Option<(f64, f64)> = None;
    let mut min_joint = (f64::INFINITY, 0.0);
    let rows = freqs
        .iter()
        .map(|&f| {
            let w = TAU * f;
            let joint = joint_noise(w, &g)?;
            if joint < 1.0 {
                below = Some(below.map_or((f, f), |(lo, _)| (lo, f)));
            }
            if joint < min_joint.0 {
                min_joint = (joint, f);
            }
            Ok(vec![
                f,
                k_interferometer(w, g.omega_qi)?,
                interferometer_noise(w, &g)?,
                joint,
                1.0,
            ])
        })
        .collect::<Result<Vec<_>>>()?;

    let mut s = Summary::default();
    s.num("omega_qi_hz", qi);
    s.num("squeeze_db", g.squeeze_db);
    s.num("c_q", g.c_q);
    s.text("matched", g.spin.is_none());
    s.num("joint_min", min_joint.0);
    s.num("joint_min_freq_hz", min_joint.1);
    if let Some((lo, hi)) = below {
        s.num("below_sql_from_hz", lo);
        s.num("below_sql_to_hz", hi);
    }
    Ok(Output {
        table: Table {
            header: vec![
                "freq_hz",
                "k_interferometer",
                "interferometer",
                "joint",
                "sql",
            ],
            rows,
        },
        summary: s,
        failure: None,
    })
}
