//! Weighted nonlinear least squares for every line-shape and correlation
//! model, and the coupling figures derived from the fits.

pub mod data;
mod derive;
mod models;
mod solver;

pub use data::SpectrumData;
pub use derive::{
    derive_coupling, phase_sweep, relative_coupling_efficiency, DerivedCoupling, EfficiencyConvention, PhaseSweep,
    PhaseSweepRow,
};
pub use models::{Bound, ModelFunction, ModelId, ParamInfo, ParamKind};
pub use solver::{FitProblem, Stencil, COST_TOLERANCE, RANK_TOLERANCE, RELATIVE_STEP, STEP_TOLERANCE};

use std::f64::consts::{PI, TAU};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::{Estimate, PhysicsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("invalid fit input: {0}")]
    Precondition(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("singular normal equations; unidentifiable parameter combinations: {}", .combinations.join("; "))]
    RankDeficient { combinations: Vec<String> },
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Also start from an 8-point lattice around the initial values and keep
    /// the best converged fit.
    pub multistart: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            multistart: false,
        }
    }
}

/// Initial values, fixed flags and bounds for one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub model: ModelId,
    pub init: Vec<f64>,
    pub fixed: Vec<bool>,
    pub bounds: Vec<Bound>,
    pub options: FitOptions,
}

impl FitSpec {
    /// Model defaults for the fixed flags and bounds.
    pub fn new(model: ModelId, init: Vec<f64>) -> Self {
        Self {
            model,
            init,
            fixed: model.default_fixed(),
            bounds: model.parameters().iter().map(|p| p.bound).collect(),
            options: FitOptions::default(),
        }
    }

    /// Starting values read off the data.
    pub fn from_data(model: ModelId, data: &SpectrumData) -> Self {
        Self::new(model, model.default_init(data))
    }

    fn index(&self, name: &str) -> Result<usize, FitError> {
        self.model.index_of(name).ok_or_else(|| {
            FitError::Precondition(format!("model {} has no parameter {name:?}", self.model.name()))
        })
    }

    pub fn set(mut self, name: &str, value: f64) -> Result<Self, FitError> {
        let i = self.index(name)?;
        self.init[i] = value;
        Ok(self)
    }

    pub fn fix(mut self, name: &str, value: f64) -> Result<Self, FitError> {
        let i = self.index(name)?;
        self.init[i] = value;
        self.fixed[i] = true;
        Ok(self)
    }

    pub fn free(mut self, name: &str) -> Result<Self, FitError> {
        let i = self.index(name)?;
        self.fixed[i] = false;
        Ok(self)
    }

    pub fn bound(mut self, name: &str, bound: Bound) -> Result<Self, FitError> {
        let i = self.index(name)?;
        self.bounds[i] = bound;
        Ok(self)
    }

    pub fn with_options(mut self, options: FitOptions) -> Self {
        self.options = options;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedParameter {
    pub name: String,
    pub unit: String,
    pub value: f64,
    pub sigma: f64,
    pub fixed: bool,
}

/// Hashes tying a result to its inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub input_sha256: String,
    pub config_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelId,
    pub parameters: Vec<FittedParameter>,
    /// Covariance in the physical parameters, model order; zero for fixed ones.
    pub covariance: Vec<Vec<f64>>,
    pub chi_square: f64,
    pub reduced_chi_square: f64,
    pub degrees_of_freedom: usize,
    pub iterations: usize,
    pub converged: bool,
    pub weighted: bool,
    pub message: String,
    /// Cost after each accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl FitResult {
    pub fn values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.value).collect()
    }

    fn find(&self, name: &str) -> Option<&FittedParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.find(name).map(|p| p.value)
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.find(name).map(|p| p.sigma)
    }

    pub fn estimate(&self, name: &str) -> Option<Estimate> {
        self.find(name).map(|p| Estimate::new(p.value, p.sigma))
    }

    /// Model prediction at `x` with the fitted parameters.
    pub fn evaluate(&self, x: f64) -> Result<f64, PhysicsError> {
        ModelFunction::new(self.model).evaluate(&self.values(), x)
    }

    /// First-order propagation of the covariance through `f`, with central
    /// differences of relative step 1e-6.
    pub fn propagate<F>(&self, f: F) -> Result<Estimate, PhysicsError>
    where
        F: Fn(&[f64]) -> Result<f64, PhysicsError>,
    {
        let p = self.values();
        let value = f(&p)?;
        let n = p.len();
        let mut grad = vec![0.0; n];
        for (i, g) in grad.iter_mut().enumerate() {
            if self.parameters[i].fixed || self.covariance[i][i] == 0.0 {
                continue;
            }
            let h = RELATIVE_STEP * p[i].abs().max(self.covariance[i][i].sqrt());
            let mut up = p.clone();
            let mut down = p.clone();
            up[i] += h;
            down[i] -= h;
            *g = (f(&up)? - f(&down)?) / (2.0 * h);
        }
        let mut var = 0.0;
        for i in 0..n {
            for j in 0..n {
                var += grad[i] * self.covariance[i][j] * grad[j];
            }
        }
        Ok(Estimate::new(value, var.max(0.0).sqrt()))
    }
}

/// Fits `spec.model` to `data`.
///
/// Non-convergence within the iteration budget is not an error: the result
/// comes back with `converged = false` for inspection.
pub fn fit(data: &SpectrumData, spec: &FitSpec) -> Result<FitResult, FitError> {
    let problem = FitProblem::new(spec.model, data, &spec.init, &spec.fixed, &spec.bounds)?;
    let mut best = solver::levenberg_marquardt(&problem, &spec.init, spec.options.max_iterations)?;
    if spec.options.multistart {
        let u0 = problem.to_internal(&spec.init);
        let dims = u0.len().min(3);
        for corner in 0..(1usize << dims) {
            let mut u = u0.clone();
            for d in 0..dims {
                u[d] += if corner >> d & 1 == 1 { 0.5 } else { -0.5 };
            }
            let start = problem.to_physical(&u);
            if let Ok(s) = solver::levenberg_marquardt(&problem, &start, spec.options.max_iterations) {
                if s.converged && (!best.converged || s.cost < best.cost) {
                    best = s;
                }
            }
        }
    }
    finish(&problem, spec, data, best)
}

fn finish(problem: &FitProblem, spec: &FitSpec, data: &SpectrumData, s: solver::Solution) -> Result<FitResult, FitError> {
    let info = spec.model.parameters();
    let n = info.len();
    let free = problem.free_indices();
    let dof = data.len() - free.len();
    let reduced = s.cost / dof as f64;
    let j = problem.jacobian(&s.internal, Stencil::Central)?;
    let a = j.transpose() * &j;
    // a stalled fit may sit where some parameter has no effect; it is still
    // returned for inspection, with a pseudo-inverse covariance
    let cov_u = match problem.check_rank(&a) {
        Ok(()) => a.clone().try_inverse().ok_or_else(|| FitError::RankDeficient {
            combinations: vec!["normal matrix could not be inverted".into()],
        })?,
        Err(e) if s.converged => return Err(e),
        Err(_) => a.clone().pseudo_inverse(RANK_TOLERANCE).map_err(|m| FitError::Precondition(m.into()))?,
    };
    let d = problem.transform_derivatives(&s.internal);
    // unweighted data carry no error scale, so the residual scatter sets it
    let inflate = if !data.is_weighted() || reduced > 1.0 { reduced } else { 1.0 };
    let mut covariance = vec![vec![0.0; n]; n];
    for (a_idx, &i) in free.iter().enumerate() {
        for (b_idx, &k) in free.iter().enumerate() {
            covariance[i][k] = d[a_idx] * cov_u[(a_idx, b_idx)] * d[b_idx] * inflate;
        }
    }
    let mut values = s.params.clone();
    for (i, p) in info.iter().enumerate() {
        if spec.fixed[i] {
            continue;
        }
        match p.name {
            "phase" => values[i] = values[i].rem_euclid(TAU),
            "axis" if spec.model == ModelId::Malus => values[i] = values[i].rem_euclid(PI),
            _ => {}
        }
    }
    let parameters = info
        .iter()
        .enumerate()
        .map(|(i, p)| FittedParameter {
            name: p.name.to_string(),
            unit: p.unit.to_string(),
            value: values[i],
            sigma: covariance[i][i].max(0.0).sqrt(),
            fixed: spec.fixed[i],
        })
        .collect();
    Ok(FitResult {
        model: spec.model,
        parameters,
        covariance,
        chi_square: s.cost,
        reduced_chi_square: reduced,
        degrees_of_freedom: dof,
        iterations: s.iterations,
        converged: s.converged,
        weighted: data.is_weighted(),
        message: s.message,
        cost_history: s.cost_history,
        provenance: None,
    })
}

/// Internal coordinates of `values` for the free parameters of `spec`.
pub fn internal_coordinates(data: &SpectrumData, spec: &FitSpec, values: &[f64]) -> Result<DVector<f64>, FitError> {
    let problem = FitProblem::new(spec.model, data, &spec.init, &spec.fixed, &spec.bounds)?;
    Ok(problem.to_internal(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from_seed;
    use rand_distr::{Distribution, Normal};

    fn grid(n: usize, half_span: f64) -> Vec<f64> {
        (0..n).map(|i| -half_span + 2.0 * half_span * i as f64 / (n - 1) as f64).collect()
    }

    fn synthetic(model: ModelId, truth: &[f64], x: Vec<f64>, rel_noise: f64, seed: u64) -> SpectrumData {
        let f = ModelFunction::new(model);
        let mut rng = rng_from_seed(seed);
        let clean: Vec<f64> = x.iter().map(|&v| f.evaluate(truth, v).unwrap()).collect();
        let err: Vec<f64> = clean.iter().map(|c| rel_noise.max(1e-3) * c.abs().max(1e-3)).collect();
        let y = clean
            .iter()
            .zip(&err)
            .map(|(c, e)| if rel_noise > 0.0 { c + Normal::new(0.0, *e).unwrap().sample(&mut rng) } else { *c })
            .collect();
        SpectrumData::new(x, y, Some(err)).unwrap()
    }

    #[test]
    fn fixed_point_returns_init_in_one_iteration() {
        let truth = [0.13, PI, 360e6, 0.0, 1.0, 0.0];
        let data = synthetic(ModelId::Extinction, &truth, grid(21, 1.5e9), 0.0, 0);
        let spec = FitSpec::new(ModelId::Extinction, truth.to_vec());
        let r = fit(&data, &spec).unwrap();
        assert_eq!(r.values(), truth.to_vec());
        assert_eq!(r.chi_square, 0.0);
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
    }

    #[test]
    fn extinction_round_trip() {
        let truth = [0.13, PI, 360e6, 0.0, 1.0, 0.0];
        let data = synthetic(ModelId::Extinction, &truth, grid(21, 1.5e9), 0.01, 1);
        let r = fit(&data, &FitSpec::from_data(ModelId::Extinction, &data)).unwrap();
        assert!(r.converged, "{}", r.message);
        for (name, truth) in [("alpha", 0.13), ("phase", PI), ("gamma_fwhm", 360e6)] {
            let e = r.estimate(name).unwrap();
            assert!((e.value - truth).abs() < 3.0 * e.sigma, "{name} {e:?}");
        }
    }

    #[test]
    fn extinction_with_fixed_width() {
        let truth = [0.13, PI, 360e6, 0.0, 1.0, 0.0];
        let data = synthetic(ModelId::Extinction, &truth, grid(21, 1.5e9), 0.01, 1);
        let spec = FitSpec::from_data(ModelId::Extinction, &data).fix("gamma_fwhm", 360e6).unwrap();
        let r = fit(&data, &spec).unwrap();
        assert!(r.converged, "{}", r.message);
        assert_eq!(r.value("gamma_fwhm"), Some(360e6));
        assert_eq!(r.sigma("gamma_fwhm"), Some(0.0));
        let floating = fit(&data, &FitSpec::from_data(ModelId::Extinction, &data)).unwrap();
        let (fixed, free) = (r.estimate("alpha").unwrap(), floating.estimate("alpha").unwrap());
        assert!((fixed.value - 0.13).abs() < 3.0 * fixed.sigma);
        assert!(fixed.sigma < free.sigma);
    }

    #[test]
    fn cost_never_increases() {
        let truth = [0.13, PI, 360e6, 2e7, 1.0, 0.0];
        let data = synthetic(ModelId::Extinction, &truth, grid(31, 1.5e9), 0.02, 2);
        let spec = FitSpec::new(ModelId::Extinction, vec![0.3, 2.5, 200e6, -5e7, 0.9, 0.0]);
        let r = fit(&data, &spec).unwrap();
        assert!(r.cost_history.len() > 2);
        assert!(r.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let truth = [2.0, 154e6, 0.0, 0.1];
        let data = synthetic(ModelId::LorentzianPle, &truth, grid(41, 8e8), 0.02, 3);
        let r = fit(&data, &FitSpec::from_data(ModelId::LorentzianPle, &data)).unwrap();
        let n = r.covariance.len();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| r.covariance[i][j]);
        assert!((&m - m.transpose()).abs().max() <= 1e-12 * m.abs().max());
        let eig = nalgebra::SymmetricEigen::new(m.clone());
        assert!(eig.eigenvalues.iter().all(|v| *v >= -1e-12 * m.abs().max()));
    }

    #[test]
    fn rank_deficiency_names_parameters() {
        // scale and offset cannot both float when alpha is pinned at zero
        let x = grid(21, 1e9);
        let y = vec![1.0; 21];
        let data = SpectrumData::new(x, y, None).unwrap();
        let spec = FitSpec::new(ModelId::Extinction, vec![0.1, PI, 360e6, 0.0, 1.0, 0.0])
            .fix("alpha", 0.0)
            .unwrap()
            .free("offset")
            .unwrap();
        match fit(&data, &spec) {
            Err(FitError::RankDeficient { combinations }) => {
                let joined = combinations.join(" ");
                assert!(joined.contains("phase") || joined.contains("scale"), "{joined}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn preconditions() {
        let data = SpectrumData::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 1.0], None).unwrap();
        assert!(matches!(
            fit(&data, &FitSpec::new(ModelId::LorentzianPle, vec![1.0, 1.0, 1.0, 0.0])),
            Err(FitError::Precondition(_))
        ));
        let big = SpectrumData::new(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0], vec![1.0; 6], None).unwrap();
        let out_of_bounds = FitSpec::new(ModelId::LorentzianPle, vec![-1.0, 1.0, 1.0, 0.0]);
        assert!(matches!(fit(&big, &out_of_bounds), Err(FitError::Precondition(_))));
        assert!(FitSpec::new(ModelId::Malus, vec![1.0, 0.0, 0.0]).fix("nope", 1.0).is_err());
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let truth = [0.13, PI, 360e6, 0.0, 1.0, 0.0];
        let data = synthetic(ModelId::Extinction, &truth, grid(21, 1.5e9), 0.01, 4);
        let spec = FitSpec::new(ModelId::Extinction, vec![0.4, 2.0, 150e6, 3e8, 0.5, 0.0]).with_options(FitOptions {
            max_iterations: 2,
            multistart: false,
        });
        let r = fit(&data, &spec).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn multistart_keeps_best() {
        let truth = [0.13, PI, 360e6, 0.0, 1.0, 0.0];
        let data = synthetic(ModelId::Extinction, &truth, grid(21, 1.5e9), 0.01, 5);
        let spec = FitSpec::from_data(ModelId::Extinction, &data);
        let single = fit(&data, &spec).unwrap();
        let multi = fit(
            &data,
            &spec.clone().with_options(FitOptions {
                multistart: true,
                ..FitOptions::default()
            }),
        )
        .unwrap();
        assert!(multi.chi_square <= single.chi_square * (1.0 + 1e-9));
    }

    #[test]
    fn propagate_matches_linear_case() {
        let truth = [3.0, 1.2, 0.5];
        let x: Vec<f64> = (0..36).map(|i| i as f64 * 0.1).collect();
        let data = synthetic(ModelId::Malus, &truth, x, 0.01, 6);
        let r = fit(&data, &FitSpec::from_data(ModelId::Malus, &data)).unwrap();
        let e = r.propagate(|p| Ok(p[0] + p[2])).unwrap();
        let expected = (r.covariance[0][0] + r.covariance[2][2] + 2.0 * r.covariance[0][2]).sqrt();
        assert!((e.sigma - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn result_json_round_trip() {
        let truth = [3.0, 1.2, 0.5];
        let x: Vec<f64> = (0..36).map(|i| i as f64 * 0.1).collect();
        let data = synthetic(ModelId::Malus, &truth, x, 0.01, 7);
        let mut r = fit(&data, &FitSpec::from_data(ModelId::Malus, &data)).unwrap();
        r.provenance = Some(Provenance {
            tool_version: "0.1.0".into(),
            input_sha256: "ab".into(),
            config_sha256: "cd".into(),
        });
        let json = serde_json::to_string(&r).unwrap();
        let back: FitResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
