//! Faddeeva function `w(z) = exp(-z²) erfc(-iz)` via Weideman's rational
//! expansion.
//!
//! The expansion coefficients are computed once per [`Faddeeva`] instance by a
//! direct discrete Fourier transform; with 40 terms the relative error stays
//! near 1e-13 in the closed upper half plane, which is the only region the
//! Voigt line shapes need.

use num_complex::Complex64;
use std::f64::consts::PI;

const DEFAULT_TERMS: usize = 40;

#[derive(Debug, Clone)]
pub struct Faddeeva {
    scale: f64,
    coefficients: Vec<f64>,
}

impl Default for Faddeeva {
    fn default() -> Self {
        Self::new(DEFAULT_TERMS)
    }
}

impl Faddeeva {
    pub fn new(terms: usize) -> Self {
        let n = terms.max(8);
        let m = 2 * n;
        let m2 = 2 * m;
        let scale = (n as f64 / std::f64::consts::SQRT_2).sqrt();
        // samples f(t(θ)) on θ_k = kπ/M, k = -M+1..M-1, with f = 0 prepended
        let mut f = Vec::with_capacity(m2);
        f.push(0.0);
        for k in (-(m as i64) + 1)..(m as i64) {
            let theta = k as f64 * PI / m as f64;
            let t = scale * (theta / 2.0).tan();
            f.push((-t * t).exp() * (scale * scale + t * t));
        }
        // fftshift: rotate left by M
        f.rotate_left(m);
        // real part of the DFT, only indices 1..=N are needed
        let mut a = Vec::with_capacity(n);
        for j in 1..=n {
            let mut acc = 0.0;
            for (k, fk) in f.iter().enumerate() {
                acc += fk * (2.0 * PI * (j * k) as f64 / m2 as f64).cos();
            }
            a.push(acc / m2 as f64);
        }
        a.reverse();
        Self {
            scale,
            coefficients: a,
        }
    }

    /// `w(z)` for any complex `z`; the lower half plane uses the reflection
    /// `w(z) = 2 exp(-z²) - w(-z)`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        if z.im >= 0.0 {
            self.upper(z)
        } else {
            2.0 * (-z * z).exp() - self.upper(-z)
        }
    }

    fn upper(&self, z: Complex64) -> Complex64 {
        let i = Complex64::i();
        let l = Complex64::new(self.scale, 0.0);
        let denom = l - i * z;
        let big_z = (l + i * z) / denom;
        let mut p = Complex64::new(0.0, 0.0);
        for &c in &self.coefficients {
            p = p * big_z + c;
        }
        2.0 * p / (denom * denom) + (1.0 / PI.sqrt()) / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Voigt profile with Lorentzian HWHM `gamma` and Gaussian sigma, unit area.
    fn voigt(w: &Faddeeva, x: f64, gamma: f64, sigma: f64) -> f64 {
        let z = Complex64::new(x, gamma) / (sigma * std::f64::consts::SQRT_2);
        w.eval(z).re / (sigma * (2.0 * PI).sqrt())
    }

    #[test]
    fn matches_reference_voigt_values() {
        // reference values from a double-precision wofz implementation,
        // x on a 1024-point grid over [0, 5], gamma = sigma = 0.5
        let w = Faddeeva::default();
        let dx = 5.0 / 1023.0;
        let reference = [
            (0usize, 4.17418561040735436e-01),
            (1, 4.17409090948306805e-01),
            (7, 4.16954843520911000e-01),
            (63, 3.81870067048370398e-01),
            (127, 2.94541176272260508e-01),
            (255, 1.26062625829457348e-01),
            (1023, 6.49746971953819082e-03),
        ];
        for (i, expected) in reference {
            let got = voigt(&w, i as f64 * dx, 0.5, 0.5);
            assert!(
                ((got - expected) / expected).abs() < 1e-12,
                "i={i}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn known_values() {
        let w = Faddeeva::default();
        // w(0) = 1
        assert!((w.eval(Complex64::new(0.0, 0.0)) - 1.0).norm() < 1e-13);
        // w(iy) = exp(y²) erfc(y); erfc(1) = 0.157299207050285
        let v = w.eval(Complex64::new(0.0, 1.0));
        assert!((v.re - 1f64.exp() * 0.157_299_207_050_285_13).abs() < 1e-13);
        assert!(v.im.abs() < 1e-14);
        // asymptotic i/(√π z) far from the origin
        let z = Complex64::new(40.0, 3.0);
        let asym = Complex64::i() / (PI.sqrt() * z) * (1.0 + 0.5 / (z * z));
        assert!(((w.eval(z) - asym) / asym).norm() < 1e-5);
    }

    #[test]
    fn lower_half_plane_reflection() {
        let w = Faddeeva::default();
        let z = Complex64::new(0.7, -0.3);
        // w(conj z) = conj(w(-z))
        let lhs = w.eval(z);
        let rhs = w.eval(-z.conj()).conj();
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
