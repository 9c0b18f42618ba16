use super::{domain, CouplingFigures, Estimate, PhysicsError};

/// Cooperativity from the on-resonance relative transmission, using the
/// low-power relation `T = (1 + C)⁻²`.
///
/// Uncertainties are propagated to first order: `σ_C = σ_T / (2 T^{3/2})`
/// and `σ_β = σ_C / (1 + C)²`.
pub fn cooperativity_from_transmission(
    transmission: f64,
    sigma_transmission: f64,
) -> Result<CouplingFigures, PhysicsError> {
    if !(transmission > 0.0 && transmission <= 1.0) {
        return Err(domain(format!(
            "transmission must lie in (0, 1], got {transmission}"
        )));
    }
    if !(sigma_transmission >= 0.0 && sigma_transmission.is_finite()) {
        return Err(domain(format!(
            "transmission uncertainty must be non-negative, got {sigma_transmission}"
        )));
    }
    let c = transmission.powf(-0.5) - 1.0;
    let sigma_c = sigma_transmission / (2.0 * transmission.powf(1.5));
    let beta = beta_factor(c)?;
    let sigma_beta = sigma_c / ((1.0 + c) * (1.0 + c));
    Ok(CouplingFigures {
        transmission_on_resonance: Estimate::new(transmission, sigma_transmission),
        cooperativity: Estimate::new(c, sigma_c),
        beta: Estimate::new(beta, sigma_beta),
        qe_lower_bound: Estimate::new(c, sigma_c),
    })
}

/// `β = C / (1 + C)`.
pub fn beta_factor(cooperativity: f64) -> Result<f64, PhysicsError> {
    if !(cooperativity >= 0.0) || !cooperativity.is_finite() {
        return Err(domain(format!(
            "cooperativity must be non-negative, got {cooperativity}"
        )));
    }
    Ok(cooperativity / (1.0 + cooperativity))
}

/// Ratio of a lifetime-limited line width to a broadened one.
pub fn lifetime_linewidth_ratio(narrow_fwhm_hz: f64, broad_fwhm_hz: f64) -> Result<f64, PhysicsError> {
    if !(narrow_fwhm_hz > 0.0 && broad_fwhm_hz > 0.0) {
        return Err(domain("line widths must be positive"));
    }
    Ok(narrow_fwhm_hz / broad_fwhm_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn measured_transmission_chain() {
        let f = cooperativity_from_transmission(0.752, 0.017).unwrap();
        assert!((f.cooperativity.value - 0.153).abs() < 5e-4);
        assert!((f.cooperativity.sigma - 0.013).abs() < 5e-4);
        assert!((f.beta.value - 0.1328).abs() < 1e-4);
        assert!((beta_factor(0.153).unwrap() - 0.1327).abs() < 1e-4);
        assert!((f.beta.sigma - 0.0098).abs() < 1e-4);
        assert_eq!(f.qe_lower_bound, f.cooperativity);
    }

    #[test]
    fn trivial_points() {
        let f = cooperativity_from_transmission(1.0, 0.0).unwrap();
        assert_eq!(f.cooperativity.value, 0.0);
        assert_eq!(f.beta.value, 0.0);
        let f = cooperativity_from_transmission(0.25, 0.0).unwrap();
        assert!((f.cooperativity.value - 1.0).abs() < 1e-15);
        assert!((f.beta.value - 0.5).abs() < 1e-15);
        assert_eq!(beta_factor(0.0).unwrap(), 0.0);
        assert_eq!(beta_factor(1.0).unwrap(), 0.5);
    }

    #[test]
    fn rejects_out_of_range() {
        for t in [0.0, -0.1, 1.0001, f64::NAN] {
            assert!(cooperativity_from_transmission(t, 0.01).is_err());
        }
        assert!(beta_factor(-1e-3).is_err());
    }

    #[test]
    fn lifetime_ratio() {
        let r = lifetime_linewidth_ratio(154e6, 360e6).unwrap();
        assert!((r - 0.43).abs() < 0.005);
    }

    proptest! {
        #[test]
        fn transmission_round_trip(c in 0.0f64..10.0) {
            let t = (1.0 + c).powi(-2);
            let f = cooperativity_from_transmission(t, 0.0).unwrap();
            prop_assert!((f.cooperativity.value - c).abs() < 1e-10);
            prop_assert!((f.beta.value - c / (1.0 + c)).abs() < 1e-12);
            prop_assert!(((1.0 + f.cooperativity.value).powi(-2) - t).abs() < 1e-12);
            // 1 - β = 1 / (1 + C), hence (1 - β)² = T
            prop_assert!(((1.0 - f.beta.value).powi(2) - t).abs() < 1e-10);
        }

        #[test]
        fn beta_inverts_odds(beta in 0.0f64..0.9) {
            let c = beta / (1.0 - beta);
            prop_assert!((beta_factor(c).unwrap() - beta).abs() < 1e-14);
        }

        #[test]
        fn beta_is_increasing(c in 0.0f64..100.0, dc in 1e-6f64..1.0) {
            let b0 = beta_factor(c).unwrap();
            let b1 = beta_factor(c + dc).unwrap();
            prop_assert!(b1 > b0);
            prop_assert!(b1 < 1.0);
        }
    }
}
