//! Coupling figures from extinction fits, and the phase-sweep family.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::physics::faddeeva::Faddeeva;
use crate::physics::{
    cooperativity_from_transmission, diffused_response, extinction_intensity, CouplingFigures, EmitterParams,
    Estimate, InterferenceModel, PhysicsError,
};

use super::models::ModelId;
use super::{FitError, FitResult};

/// Beyond this distance from π the absorptive transmission is an extrapolation.
const PHASE_WARNING_RAD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedCoupling {
    pub figures: CouplingFigures,
    /// Fitted interference weight.
    pub alpha: Estimate,
    /// `β` read directly as the fitted `α`, for comparison with `figures.beta`.
    pub beta_from_alpha: Estimate,
    pub warnings: Vec<String>,
}

/// On-resonance transmission of the fitted line with the phase set to π,
/// then cooperativity, `β` and the quantum-efficiency bound from it.
pub fn derive_coupling(fit: &FitResult) -> Result<DerivedCoupling, FitError> {
    if !matches!(fit.model, ModelId::Extinction | ModelId::ExtinctionDiffused) {
        return Err(FitError::Precondition(format!(
            "coupling needs an extinction fit, got {}",
            fit.model.name()
        )));
    }
    if !fit.converged {
        return Err(FitError::Precondition("the fit did not converge".into()));
    }
    let mut warnings = Vec::new();
    let phase = fit.value("phase").expect("extinction models have a phase");
    let offset = (phase - PI).abs();
    if offset > PHASE_WARNING_RAD {
        warnings.push(format!(
            "fitted phase {phase:.3} rad is {offset:.3} rad from π; the absorptive transmission is extrapolated"
        ));
    }
    let faddeeva = Faddeeva::default();
    let model = fit.model;
    let transmission = fit.propagate(|p| match model {
        ModelId::Extinction => Ok((1.0 - p[0]) * (1.0 - p[0])),
        _ => {
            let s = diffused_response(&faddeeva, 0.0, p[2], p[3]).re;
            Ok(1.0 - 2.0 * p[0] * s + p[0] * p[0] * s)
        }
    })?;
    let t = transmission.value.min(1.0);
    let figures = if t >= 1.0 {
        CouplingFigures::uncoupled()
    } else {
        cooperativity_from_transmission(t, transmission.sigma)?
    };
    let alpha = fit.estimate("alpha").expect("extinction models have alpha");
    Ok(DerivedCoupling {
        figures,
        alpha,
        beta_from_alpha: alpha,
        warnings,
    })
}

/// How the relative coupling efficiency is formed from the two peak areas.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficiencyConvention {
    /// `A_T / (A_T + A_R)`
    #[default]
    Fraction,
    /// `A_T / A_R`
    Ratio,
}

/// Relative coupling efficiency from the transmission and reflection PLE
/// areas, with first-order error propagation.
pub fn relative_coupling_efficiency(
    transmission_area: Estimate,
    reflection_area: Estimate,
    convention: EfficiencyConvention,
) -> Result<Estimate, PhysicsError> {
    let (a, r) = (transmission_area, reflection_area);
    for (e, what) in [(a, "transmission"), (r, "reflection")] {
        if !(e.value >= 0.0 && e.value.is_finite() && e.sigma >= 0.0 && e.sigma.is_finite()) {
            return Err(PhysicsError::Domain(format!(
                "{what} area must be non-negative with a non-negative error, got {} ± {}",
                e.value, e.sigma
            )));
        }
    }
    match convention {
        EfficiencyConvention::Fraction => {
            let total = a.value + r.value;
            if total <= 0.0 {
                return Err(PhysicsError::Domain("total area is zero".into()));
            }
            let value = a.value / total;
            let da = r.value / (total * total);
            let dr = -a.value / (total * total);
            Ok(Estimate::new(value, (da * a.sigma).hypot(dr * r.sigma)))
        }
        EfficiencyConvention::Ratio => {
            if r.value <= 0.0 {
                return Err(PhysicsError::Domain("reflection area is zero".into()));
            }
            let value = a.value / r.value;
            let sigma = (a.sigma / r.value).hypot(value * r.sigma / r.value);
            Ok(Estimate::new(value, sigma))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSweepRow {
    pub phase_rad: f64,
    pub detuning_hz: f64,
    pub intensity: f64,
}

/// Extinction curves for a set of phases on a common detuning grid, in long
/// form: phase-major, detuning-minor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSweep {
    pub alpha: f64,
    pub rows: Vec<PhaseSweepRow>,
}

impl PhaseSweep {
    pub const CSV_HEADER: &'static str = "phase_rad,detuning_hz,intensity";

    pub fn curve(&self, phase_rad: f64) -> Vec<PhaseSweepRow> {
        self.rows.iter().copied().filter(|r| r.phase_rad == phase_rad).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut out = String::with_capacity(32 * (self.rows.len() + 1));
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{:e},{:e},{:e}\n", r.phase_rad, r.detuning_hz, r.intensity));
        }
        w.write_all(out.as_bytes())
    }
}

/// Evaluates the extinction line shape over `detunings_hz` for each phase,
/// keeping the weight of `base`.
///
/// Phases are expected in `[π, 2π]`; others are accepted and reduced
/// modulo 2π when evaluated, but the table keeps them as given.
pub fn phase_sweep(
    base: &InterferenceModel,
    emitter: &EmitterParams,
    phases_rad: &[f64],
    detunings_hz: &[f64],
) -> Result<PhaseSweep, PhysicsError> {
    if phases_rad.is_empty() || detunings_hz.is_empty() {
        return Err(PhysicsError::Config("phase and detuning grids must be nonempty".into()));
    }
    if let Some(d) = detunings_hz.iter().find(|d| !d.is_finite()) {
        return Err(PhysicsError::Domain(format!("detuning must be finite, got {d}")));
    }
    let mut rows = Vec::with_capacity(phases_rad.len() * detunings_hz.len());
    for &phase in phases_rad {
        let model = InterferenceModel::new(base.alpha(), phase)?;
        for &detuning in detunings_hz {
            rows.push(PhaseSweepRow {
                phase_rad: phase,
                detuning_hz: detuning,
                intensity: extinction_intensity(detuning, &model, emitter)?,
            });
        }
    }
    Ok(PhaseSweep {
        alpha: base.alpha(),
        rows,
    })
}

/// `|1 + α e^{iφ} / (1 − 2iΔ/γ)|²`, evaluated directly.
#[cfg(test)]
fn direct_extinction(detuning: f64, gamma: f64, alpha: f64, phase: f64) -> f64 {
    use num_complex::Complex64;
    let s = Complex64::new(1.0, 0.0) / Complex64::new(1.0, -2.0 * detuning / gamma);
    (Complex64::new(1.0, 0.0) + alpha * Complex64::from_polar(1.0, phase) * s).norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{fit, FitSpec, FittedParameter, ModelFunction, SpectrumData};

    fn fake_fit(model: ModelId, values: &[f64], sigmas: &[f64]) -> FitResult {
        let n = values.len();
        let mut covariance = vec![vec![0.0; n]; n];
        for i in 0..n {
            covariance[i][i] = sigmas[i] * sigmas[i];
        }
        FitResult {
            model,
            parameters: model
                .parameters()
                .iter()
                .enumerate()
                .map(|(i, p)| FittedParameter {
                    name: p.name.into(),
                    unit: p.unit.into(),
                    value: values[i],
                    sigma: sigmas[i],
                    fixed: sigmas[i] == 0.0,
                })
                .collect(),
            covariance,
            chi_square: 0.0,
            reduced_chi_square: 0.0,
            degrees_of_freedom: 10,
            iterations: 1,
            converged: true,
            weighted: true,
            message: String::new(),
            cost_history: vec![0.0],
            provenance: None,
        }
    }

    #[test]
    fn measured_transmission_gives_measured_cooperativity() {
        // α chosen so (1 − α)² = 0.752; σ_α so that σ_T = 2(1 − α)σ_α = 0.017
        let alpha = 1.0 - 0.752f64.sqrt();
        let sigma_alpha = 0.017 / (2.0 * 0.752f64.sqrt());
        let f = fake_fit(ModelId::Extinction, &[alpha, PI, 360e6, 0.0, 1.0, 0.0], &[sigma_alpha, 0.05, 1e7, 1e6, 0.01, 0.0]);
        let d = derive_coupling(&f).unwrap();
        let t = d.figures.transmission_on_resonance;
        assert!((t.value - 0.752).abs() < 1e-12);
        assert!((t.sigma - 0.017).abs() < 1e-8);
        assert!((d.figures.cooperativity.value - 0.153).abs() < 5e-4);
        assert!((d.figures.cooperativity.sigma - 0.013).abs() < 5e-4);
        assert!((d.figures.beta.value - 0.1327).abs() < 2e-4);
        assert_eq!(d.figures.qe_lower_bound.value, d.figures.cooperativity.value);
        let one_minus_beta = 1.0 - d.figures.beta.value;
        assert!((one_minus_beta * one_minus_beta - 0.752).abs() < 1e-10);
        assert!(d.warnings.is_empty());
    }

    #[test]
    fn no_coupling_gives_zeros() {
        let f = fake_fit(ModelId::Extinction, &[0.0, PI, 360e6, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let d = derive_coupling(&f).unwrap();
        assert_eq!(d.figures, CouplingFigures::uncoupled());
    }

    #[test]
    fn off_pi_phase_warns() {
        let f = fake_fit(ModelId::Extinction, &[0.1, 4.0, 360e6, 0.0, 1.0, 0.0], &[0.01, 0.1, 1e7, 1e6, 0.01, 0.0]);
        let d = derive_coupling(&f).unwrap();
        assert_eq!(d.warnings.len(), 1);
        assert!((d.figures.transmission_on_resonance.value - 0.81).abs() < 1e-12);
    }

    #[test]
    fn derive_rejects_other_models_and_unconverged() {
        let f = fake_fit(ModelId::Malus, &[1.0, 0.0, 0.0], &[0.1, 0.1, 0.1]);
        assert!(derive_coupling(&f).is_err());
        let mut f = fake_fit(ModelId::Extinction, &[0.1, PI, 360e6, 0.0, 1.0, 0.0], &[0.01; 6]);
        f.converged = false;
        assert!(derive_coupling(&f).is_err());
    }

    #[test]
    fn diffused_transmission_matches_model_at_resonance() {
        let values = [0.13, PI, 154e6, 60e6, 0.0, 1.0, 0.0];
        let f = fake_fit(ModelId::ExtinctionDiffused, &values, &[0.01, 0.05, 5e6, 5e6, 1e6, 0.01, 0.0]);
        let d = derive_coupling(&f).unwrap();
        let direct = ModelFunction::new(ModelId::ExtinctionDiffused).evaluate(&values, 0.0).unwrap();
        assert!((d.figures.transmission_on_resonance.value - direct).abs() < 1e-12);
    }

    #[test]
    fn fitted_chain_end_to_end() {
        let truth = [0.13, PI, 360e6, 0.0, 1.0, 0.0];
        let x: Vec<f64> = (0..21).map(|i| -1.5e9 + 1.5e8 * i as f64).collect();
        let f = ModelFunction::new(ModelId::Extinction);
        let y: Vec<f64> = x.iter().map(|&v| f.evaluate(&truth, v).unwrap()).collect();
        let e = vec![0.01; 21];
        let data = SpectrumData::new(x, y, Some(e)).unwrap();
        let r = fit(&data, &FitSpec::from_data(ModelId::Extinction, &data)).unwrap();
        let d = derive_coupling(&r).unwrap();
        assert!((d.figures.transmission_on_resonance.value - 0.87 * 0.87).abs() < 1e-6);
    }

    #[test]
    fn efficiency_conventions() {
        let e = |v| Estimate::new(v, 0.0);
        let eta = relative_coupling_efficiency(e(115.0), e(885.0), EfficiencyConvention::Fraction).unwrap();
        assert!((eta.value - 0.115).abs() < 1e-12);
        assert_eq!(relative_coupling_efficiency(e(0.0), e(5.0), EfficiencyConvention::Fraction).unwrap().value, 0.0);
        assert_eq!(relative_coupling_efficiency(e(3.0), e(3.0), EfficiencyConvention::Fraction).unwrap().value, 0.5);
        assert!(relative_coupling_efficiency(e(0.0), e(0.0), EfficiencyConvention::Fraction).is_err());
        let ratio = relative_coupling_efficiency(e(115.0), e(885.0), EfficiencyConvention::Ratio).unwrap();
        assert!((ratio.value - 115.0 / 885.0).abs() < 1e-12);
        assert!(relative_coupling_efficiency(e(-1.0), e(2.0), EfficiencyConvention::Fraction).is_err());
    }

    #[test]
    fn efficiency_error_matches_finite_difference() {
        let (a, r) = (Estimate::new(230.0, 12.0), Estimate::new(1770.0, 40.0));
        let got = relative_coupling_efficiency(a, r, EfficiencyConvention::Fraction).unwrap();
        let f = |x: f64, y: f64| x / (x + y);
        let h = 1e-3;
        let da = (f(a.value + h, r.value) - f(a.value - h, r.value)) / (2.0 * h);
        let dr = (f(a.value, r.value + h) - f(a.value, r.value - h)) / (2.0 * h);
        let expected = ((da * a.sigma).powi(2) + (dr * r.sigma).powi(2)).sqrt();
        assert!((got.sigma - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn sweep_family_identities() {
        let alpha = 0.13;
        let gamma = 360e6;
        let emitter = EmitterParams::lifetime_limited(gamma, 0.0).unwrap();
        let base = InterferenceModel::absorptive(alpha).unwrap();
        let grid: Vec<f64> = (-40..=40).map(|k| k as f64 * 2.5e7).collect();
        let phases = [PI, 1.5 * PI, 2.0 * PI];
        let sweep = phase_sweep(&base, &emitter, &phases, &grid).unwrap();
        assert_eq!(sweep.rows.len(), 3 * grid.len());
        let at = |phase: f64, d: f64| {
            sweep
                .rows
                .iter()
                .find(|r| r.phase_rad == phase && r.detuning_hz == d)
                .unwrap()
                .intensity
        };
        let dip = sweep.curve(PI);
        let min = dip.iter().map(|r| r.intensity).fold(f64::INFINITY, f64::min);
        assert!((min - (1.0 - alpha) * (1.0 - alpha)).abs() < 1e-12);
        assert!((at(PI, 0.0) - min).abs() == 0.0);
        let peak = sweep.curve(2.0 * PI);
        let max = peak.iter().map(|r| r.intensity).fold(0.0, f64::max);
        assert!((max - (1.0 + alpha) * (1.0 + alpha)).abs() < 1e-12);
        assert!((at(1.5 * PI, 0.0) - (1.0 + alpha * alpha)).abs() < 1e-12);
        for &d in &grid {
            assert!((at(PI, d) - at(PI, -d)).abs() < 1e-14);
            assert!((at(2.0 * PI, d) - at(2.0 * PI, -d)).abs() < 1e-14);
            for &phase in &phases {
                assert!((at(phase, d) - direct_extinction(d, gamma, alpha, phase)).abs() < 1e-12);
            }
        }
        let asym = at(1.5 * PI, 1.75e8) - at(1.5 * PI, -1.75e8);
        let direct = direct_extinction(1.75e8, gamma, alpha, 1.5 * PI) - direct_extinction(-1.75e8, gamma, alpha, 1.5 * PI);
        assert!(asym.abs() > 0.05);
        assert!((asym - direct).abs() < 1e-12);
    }

    #[test]
    fn sweep_csv_and_empty_grids() {
        let emitter = EmitterParams::lifetime_limited(360e6, 0.0).unwrap();
        let base = InterferenceModel::absorptive(0.1).unwrap();
        assert!(phase_sweep(&base, &emitter, &[], &[0.0]).is_err());
        assert!(phase_sweep(&base, &emitter, &[PI], &[]).is_err());
        let s = phase_sweep(&base, &emitter, &[PI], &[0.0, 1e8]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(PhaseSweep::CSV_HEADER));
        assert_eq!(lines.count(), 2);
    }
}
