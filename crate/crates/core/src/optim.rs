//! One-dimensional minimization helpers.

use crate::scalar::{lit, Real};

/// Golden-section search for a minimum of `f` on `[lo, hi]`; returns the best
/// abscissa seen (endpoints included) and its value.
pub fn golden_section<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T, xtol: T) -> (T, T) {
    let inv_phi = lit::<T>(0.618_033_988_749_894_8);
    let (mut a, mut b) = (lo, hi);
    let mut best = {
        let fa = f(a);
        let fb = f(b);
        if fb < fa {
            (b, fb)
        } else {
            (a, fa)
        }
    };
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_vertex() {
        let (x, v) = golden_section(|x: f64| (x - 0.3).powi(2) + 2.0, -1.0, 4.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn returns_endpoint_for_monotone() {
        let (x, _) = golden_section(|x: f64| x, 1.0, 2.0, 1e-12);
        assert_eq!(x, 1.0);
    }
}
