//! Spectrum files and number formatting.
//!
//! Files hold `frequency_hz, psd` records, comma- or tab-separated. Lines
//! starting with `#` are comments (a `#freq_hz,psd` header is the usual one).
//! Additional numeric columns are allowed and ignored on load.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumFormat {
    #[default]
    Csv,
    Tsv,
}

impl SpectrumFormat {
    fn delimiter(self) -> u8 {
        match self {
            SpectrumFormat::Csv => b',',
            SpectrumFormat::Tsv => b'\t',
        }
    }

    /// Guesses from the file extension; anything but `.tsv`/`.tab` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => SpectrumFormat::Tsv,
            _ => SpectrumFormat::Csv,
        }
    }
}

/// A loaded spectrum plus non-fatal findings about its content.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSpectrum {
    pub spectrum: Spectrum<f64>,
    pub warnings: Vec<String>,
}

impl LoadedSpectrum {
    pub fn has_negative(&self) -> bool {
        self.spectrum.has_negative()
    }
}

pub fn load_spectrum(path: &Path, format: SpectrumFormat) -> Result<LoadedSpectrum> {
    let file = File::open(path)?;
    read_spectrum(file, format)
}

pub fn read_spectrum<R: Read>(reader: R, format: SpectrumFormat) -> Result<LoadedSpectrum> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .delimiter(format.delimiter())
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut freqs: Vec<f64> = Vec::new();
    let mut values = Vec::new();
    let mut negative_lines = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() < 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected two columns, found {}", rec.len()),
            });
        }
        let field = |i: usize, what: &str| -> Result<f64> {
            let s = &rec[i];
            let v: f64 = s.parse().map_err(|_| Error::Parse {
                line,
                message: format!("{what} '{s}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("{what} '{s}' is not finite"),
                });
            }
            Ok(v)
        };
        let f = field(0, "frequency")?;
        let y = field(1, "psd")?;
        if freqs.last().is_some_and(|&prev| f <= prev) {
            return Err(Error::NonMonotonic { line });
        }
        if y < 0.0 {
            negative_lines.push(line);
        }
        freqs.push(f);
        values.push(y);
    }
    if freqs.is_empty() {
        return Err(Error::Empty);
    }
    let mut warnings = Vec::new();
    if !negative_lines.is_empty() {
        warnings.push(format!(
            "{} negative PSD value(s), first at line {}",
            negative_lines.len(),
            negative_lines[0]
        ));
    }
    Ok(LoadedSpectrum {
        spectrum: Spectrum::new(freqs, values)?,
        warnings,
    })
}

/// Writes a table with a `#`-prefixed header line; numbers use [`fmt_num`].
pub fn write_table<W: Write>(
    out: W,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    let mut head: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    if let Some(first) = head.first_mut() {
        first.insert(0, '#');
    }
    w.write_record(&head).map_err(csv_io)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt_num(x)))
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectrum<W: Write>(out: W, spectrum: &Spectrum<f64>) -> Result<()> {
    write_table(
        out,
        &["freq_hz", "psd"],
        spectrum.iter().map(|(f, y)| vec![f, y]),
    )
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// `%.9g`: nine significant digits, trailing zeros removed, exponent form
/// outside `[1e−5, 1e9)`.
pub fn fmt_num(x: f64) -> String {
    const SIG: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (SIG - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIG).contains(&exp) {
        let decimals = (SIG - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str) -> Result<LoadedSpectrum> {
        read_spectrum(s.as_bytes(), SpectrumFormat::Csv)
    }

    #[test]
    fn two_point_file() {
        let l = load("#freq_hz,psd\n100,1.0\n200,1.1").unwrap();
        assert_eq!(l.spectrum.freqs(), &[100.0, 200.0]);
        assert_eq!(l.spectrum.values(), &[1.0, 1.1]);
        assert!(l.warnings.is_empty());
    }

    #[test]
    fn non_monotonic_names_line() {
        match load("#h\n100,1\n300,1\n200,1\n") {
            Err(Error::NonMonotonic { line }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load("100,1\n100,1\n"),
            Err(Error::NonMonotonic { line: 2 })
        ));
    }

    #[test]
    fn parse_errors_carry_line() {
        match load("100,1\n200,abc\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(load("100\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            load("freq,psd\n100,1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_and_comment_only() {
        assert!(matches!(load(""), Err(Error::Empty)));
        assert!(matches!(load("#freq_hz,psd\n"), Err(Error::Empty)));
    }

    #[test]
    fn negative_values_warn() {
        let l = load("100,1\n200,-0.02\n300,0.9\n").unwrap();
        assert!(l.has_negative());
        assert_eq!(l.warnings.len(), 1);
        assert!(l.warnings[0].contains("line 2"));
    }

    #[test]
    fn tab_separated() {
        let l = read_spectrum("# f\tpsd\n1\t2\n3\t4\n".as_bytes(), SpectrumFormat::Tsv).unwrap();
        assert_eq!(l.spectrum.values(), &[2.0, 4.0]);
    }

    #[test]
    fn emit_load_round_trip() {
        let src = "#freq_hz,psd\n100,1\n150.5,0.330186\n2e+10,-3.5e-07\n";
        let l = load(src).unwrap();
        let mut out = Vec::new();
        write_spectrum(&mut out, &l.spectrum).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), src);
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-2.5), "-2.5");
        assert_eq!(fmt_num(std::f64::consts::PI), "3.14159265");
        assert_eq!(fmt_num(15.9917), "15.9917");
        assert_eq!(fmt_num(123456789.0), "123456789");
        assert_eq!(fmt_num(1234567890.0), "1.23456789e+09");
        assert_eq!(fmt_num(1.0e-4), "0.0001");
        assert_eq!(fmt_num(1.5e-7), "1.5e-07");
        assert_eq!(fmt_num(0.999999999951), "1");
        assert_eq!(fmt_num(f64::NAN), "nan");
    }
}
