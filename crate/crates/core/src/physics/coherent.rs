use super::CoherentStateSpec;

/// Fock amplitudes `cₙ = e^{-n̄/2} (√n̄)ⁿ / √(n!)` for `n = 0..=cutoff`.
pub fn coherent_amplitudes(spec: &CoherentStateSpec) -> Vec<f64> {
    let nbar = spec.mean_photon_number();
    let root = nbar.sqrt();
    let mut amplitudes = Vec::with_capacity(spec.cutoff() + 1);
    let mut c = (-0.5 * nbar).exp();
    amplitudes.push(c);
    for n in 1..=spec.cutoff() {
        c *= root / (n as f64).sqrt();
        amplitudes.push(c);
    }
    amplitudes
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_expansion() {
        let spec = CoherentStateSpec::new(0.00223, 4).unwrap();
        let c = coherent_amplitudes(&spec);
        assert_eq!(c.len(), 5);
        let rounded: Vec<f64> = c.iter().take(3).map(|x| (x * 1e4).round() / 1e4).collect();
        assert_eq!(rounded, vec![0.9989, 0.0472, 0.0016]);
    }

    #[test]
    fn vacuum() {
        let c = coherent_amplitudes(&CoherentStateSpec::new(0.0, 4).unwrap());
        assert_eq!(c, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn mean_photon_number_from_distribution() {
        let spec = CoherentStateSpec::new(0.00223, 6).unwrap();
        let c = coherent_amplitudes(&spec);
        let mass: f64 = c.iter().map(|x| x * x).sum();
        let mean: f64 = c.iter().enumerate().map(|(n, x)| n as f64 * x * x).sum();
        assert!(mass <= 1.0 + 1e-15 && mass >= 1.0 - 1e-9);
        assert!((mean - 0.00223).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn successive_ratio(nbar in 1e-6f64..0.1) {
            let spec = CoherentStateSpec::with_auto_cutoff(nbar).unwrap();
            let c = coherent_amplitudes(&spec);
            for n in 0..c.len() - 1 {
                let ratio = (c[n + 1] * c[n + 1]) / (c[n] * c[n]);
                prop_assert!((ratio - nbar / (n + 1) as f64).abs() <= 1e-12 * nbar);
            }
            let mass: f64 = c.iter().map(|x| x * x).sum();
            prop_assert!(mass <= 1.0 + 1e-15);
            prop_assert!(mass >= 1.0 - CoherentStateSpec::MASS_TOLERANCE);
        }
    }
}
