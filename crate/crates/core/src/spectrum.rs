//! Frequency-grid spectra: the record passed between every stage.

use crate::error::{Error, Result};
use crate::scalar::{hz_to_angular, lit, Real};

/// PSD samples on a strictly increasing grid of ordinary frequencies (Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    freqs: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn new(freqs: Vec<T>, values: Vec<T>) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::Domain(format!(
                "grid has {} points but {} values",
                freqs.len(),
                values.len()
            )));
        }
        if freqs.is_empty() {
            return Err(Error::Empty);
        }
        validate_grid(&freqs)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite PSD value at index {i}")));
        }
        Ok(Self { freqs, values })
    }

    /// Frequencies in Hz.
    pub fn freqs(&self) -> &[T] {
        &self.freqs
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Angular frequency of sample `i` (rad/s).
    pub fn angular(&self, i: usize) -> T {
        hz_to_angular(self.freqs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.freqs.iter().copied().zip(self.values.iter().copied())
    }

    pub fn has_negative(&self) -> bool {
        self.values.iter().any(|v| *v < T::zero())
    }

    /// Index and value of the smallest sample.
    pub fn argmin(&self) -> (usize, T) {
        let mut best = (0, self.values[0]);
        for (i, v) in self.values.iter().enumerate().skip(1) {
            if *v < best.1 {
                best = (i, *v);
            }
        }
        best
    }

    pub fn argmax(&self) -> (usize, T) {
        let mut best = (0, self.values[0]);
        for (i, v) in self.values.iter().enumerate().skip(1) {
            if *v > best.1 {
                best = (i, *v);
            }
        }
        best
    }

    pub fn into_parts(self) -> (Vec<T>, Vec<T>) {
        (self.freqs, self.values)
    }
}

pub(crate) fn validate_grid<T: Real>(freqs: &[T]) -> Result<()> {
    if freqs.is_empty() {
        return Err(Error::Usage("frequency grid is empty".into()));
    }
    if let Some(i) = freqs.iter().position(|f| !f.is_finite()) {
        return Err(Error::Domain(format!(
            "non-finite grid frequency at index {i}"
        )));
    }
    if let Some(i) = freqs.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Domain(format!(
            "frequency grid not strictly increasing at index {}",
            i + 1
        )));
    }
    Ok(())
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linear_grid<T: Real>(start: T, stop: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / lit::<T>((n - 1) as f64);
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        stop
                    } else {
                        start + step * lit::<T>(i as f64)
                    }
                })
                .collect()
        }
    }
}

/// `n` logarithmically spaced points from `start` to `stop` inclusive (both > 0).
pub fn log_grid<T: Real>(start: T, stop: T, n: usize) -> Vec<T> {
    linear_grid(start.ln(), stop.ln(), n)
        .into_iter()
        .map(|x| x.exp())
        .collect()
}
