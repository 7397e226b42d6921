use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use spinq::mors::{mors_spectrum, ZeemanLadder, ZeemanPopulations};
use spinq::spectrum::linear_grid;

const BIN: &str = env!("CARGO_BIN_EXE_spinq");

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn spinq(args: &[&str]) -> Run {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn summary(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn num(map: &HashMap<String, String>, key: &str) -> f64 {
    map.get(key)
        .unwrap_or_else(|| panic!("summary lacks {key}: {map:?}"))
        .parse()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const EXAMPLE: &str = "\
omega_s_khz = 18.0
readout_khz = 3.8
gamma_s0_hz = 158.333333333
n_s = 3.5
eta = 0.92
";

#[test]
fn psd_emits_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "example.cfg", EXAMPLE);
    let r = spinq(&[
        "psd",
        "--config",
        cfg.to_str().unwrap(),
        "--fmin",
        "100",
        "--fmax",
        "40000",
        "--points",
        "2000",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rows: Vec<&str> = r.stdout.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2000);
    assert!(r.stdout.starts_with("#freq_hz,psd,"));
    assert_eq!(rows[0].split(',').next(), Some("100"));
    assert_eq!(num(&summary(&r.stderr), "points"), 2000.0);
}

#[test]
fn squeeze_reports_model_minimum_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "example.cfg", EXAMPLE);
    let r = spinq(&["squeeze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s = summary(&r.stderr);
    assert!((num(&s, "c_q") - 3.0).abs() < 1e-6);
    assert!((num(&s, "analytic_bound_db") + 5.0864).abs() < 1e-3);
    // the finite-linewidth optimum sits ~0.27 dB above the asymptote
    assert!((num(&s, "s_min_db") + 4.8124).abs() < 2e-3);
    assert!(num(&s, "s_min") > num(&s, "analytic_bound"));
}

#[test]
fn shift_reports_effective_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "example.cfg", EXAMPLE);
    let phi = "-0.7854";
    let r = spinq(&["shift", "--config", cfg.to_str().unwrap(), "--phi", phi]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s = summary(&r.stderr);
    let phi: f64 = phi.parse().unwrap();
    let expected = 18.0 * (1.0 + 3.8 * (2.0 * phi).sin() / 18.0).sqrt();
    assert!((num(&s, "omega_eff_khz") - expected).abs() < 1e-6);
    assert!((num(&s, "omega_eff_khz") - 15.99).abs() < 0.01);
    assert!((num(&s, "shift_khz") / -2.1 - 1.0).abs() < 0.05);
    assert!(r.stdout.starts_with("#freq_hz,psd,force_normalized"));
}

#[test]
fn psd_output_fits_back_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write(dir.path(), "truth.cfg", "gamma_s0_hz = 1000.0\n");
    let start = write(
        dir.path(),
        "start.cfg",
        "gamma_s0_hz = 1200.0\nreadout_khz = 3.3\nn_s = 2.8\n",
    );
    let mut files = Vec::new();
    for (name, phi) in [("p0.csv", "0"), ("p45.csv", "-0.785398163")] {
        let out = dir.path().join(name);
        let r = spinq(&[
            "psd",
            "--config",
            truth.to_str().unwrap(),
            "--phi",
            phi,
            "--fmin",
            "2000",
            "--fmax",
            "40000",
            "--points",
            "1500",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        files.push(out);
    }
    let sum = dir.path().join("fit.txt");
    let r = spinq(&[
        "fit",
        files[0].to_str().unwrap(),
        files[1].to_str().unwrap(),
        "--phi",
        "0,-0.785398163",
        "--config",
        start.to_str().unwrap(),
        "--free",
        "readout,gamma_s,n_s",
        "--summary",
        sum.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s = summary(&fs::read_to_string(&sum).unwrap());
    assert_eq!(s["converged"], "true");
    assert!((num(&s, "readout") / (TAU * 3.8e3) - 1.0).abs() < 1e-6);
    assert!((num(&s, "gamma_s") / (TAU * 1e3) - 1.0).abs() < 1e-6);
    assert!((num(&s, "n_s") / 3.5 - 1.0).abs() < 1e-6);
    assert!(r.stdout.starts_with("#spectrum,freq_hz,psd,model,residual"));
}

#[test]
fn detune_with_example_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "detune.cfg",
        "delta_ghz = 1.6\ngamma_s0_hz = 150.0\ngamma_s_pb_hz = 95.0\ndc_ref = 1.43\ndc_exponent = 5.0\n",
    );
    let r = spinq(&[
        "detune",
        "--config",
        cfg.to_str().unwrap(),
        "--points",
        "11",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s = summary(&r.stderr);
    assert_eq!(s["interior"], "true");
    assert!((3.0..=4.0).contains(&num(&s, "delta_opt_ghz")));
    assert_eq!(r.stdout.lines().count(), 12);
}

#[test]
fn gwd_curves_stay_below_sql_around_coupling_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "gwd.cfg",
        "gwd_c_q = 40.0\ngwd_squeeze_db = 10.0\n",
    );
    let r = spinq(&["gwd", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s = summary(&r.stderr);
    assert!(num(&s, "below_sql_from_hz") < 100.0 / 10f64.sqrt());
    assert!(num(&s, "below_sql_to_hz") > 100.0 * 10f64.sqrt());
    assert!((num(&s, "joint_min") - 0.125).abs() < 1e-9);
}

#[test]
fn mors_fit_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let ladder = ZeemanLadder {
        omega_s: TAU * 1.0e6,
        omega_qzs: TAU * 1.0e3,
        linewidth: TAU * 150.0,
    };
    let mut p = [0.0; 9];
    p[8] = 0.92;
    p[7] = 0.08;
    let pops = ZeemanPopulations::new(p).unwrap();
    let spec = mors_spectrum(&ladder, &pops, &linear_grid(0.991e6, 1.009e6, 1801)).unwrap();
    let file = dir.path().join("mors.csv");
    spinq::io::write_spectrum(fs::File::create(&file).unwrap(), &spec).unwrap();
    let cfg = write(
        dir.path(),
        "mors.cfg",
        "omega_s_khz = 1000.03\nmors_omega_qzs_hz = 1010.0\nmors_linewidth_hz = 180.0\n",
    );
    let r = spinq(&[
        "mors",
        file.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s = summary(&r.stderr);
    assert!((num(&s, "polarization") - 0.98).abs() < 1e-6);
    assert_eq!(s["mass"], "negative");
    assert!((num(&s, "n_s") - 0.08).abs() < 1e-6);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let r = spinq(&["psd", "--bogus"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("Usage"));

    let r = spinq(&[
        "psd",
        "--config",
        dir.path().join("missing.cfg").to_str().unwrap(),
    ]);
    assert_eq!(r.code, 2);

    let bad = write(dir.path(), "bad.cfg", "omega_s = 3\n");
    assert_eq!(spinq(&["psd", "--config", bad.to_str().unwrap()]).code, 2);

    let nm = write(dir.path(), "nm.csv", "#f,psd\n100,1\n300,1\n200,1\n");
    let r = spinq(&["fit", nm.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 4"), "{}", r.stderr);

    let soft = write(dir.path(), "soft.cfg", "omega_s_khz = 3.0\n");
    let r = spinq(&[
        "shift",
        "--config",
        soft.to_str().unwrap(),
        "--phi",
        "-0.7854",
    ]);
    assert_eq!(r.code, 3);

    let flat = dir.path().join("flat.csv");
    assert_eq!(
        spinq(&["psd", "--points", "300", "--out", flat.to_str().unwrap()]).code,
        0
    );
    let r = spinq(&["fit", flat.to_str().unwrap(), "--free", "eta,readout"]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("unidentifiable"), "{}", r.stderr);
}

#[test]
fn negative_values_are_flagged_in_fit_summary() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean.csv");
    assert_eq!(
        spinq(&["psd", "--points", "400", "--out", clean.to_str().unwrap()]).code,
        0
    );
    let text = fs::read_to_string(&clean).unwrap();
    let mut lines: Vec<String> = text
        .lines()
        .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
        .collect();
    let first: Vec<&str> = lines[1].split(',').collect();
    lines[1] = format!("{},-0.01", first[0]);
    let neg = write(dir.path(), "neg.csv", &lines.join("\n"));
    let r = spinq(&["fit", neg.to_str().unwrap(), "--free", "gamma_s"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("warning = "), "{}", r.stderr);
    assert!(r.stderr.contains("negative"));
    let r = spinq(&[
        "fit",
        neg.to_str().unwrap(),
        "--free",
        "gamma_s",
        "--weights",
        "relative",
    ]);
    assert_eq!(r.code, 2);
}
