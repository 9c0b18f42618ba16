//! Damped Gauss-Newton (Levenberg-Marquardt) on transformed parameters.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::data::SpectrumData;
use super::models::{Bound, ModelFunction, ModelId, ParamKind};
use super::FitError;

/// Finite-difference stencil for the Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// `(r(u+h) − r(u−h)) / 2h`
    Central,
    /// `(−r(u+2h) + 8r(u+h) − 8r(u−h) + r(u−2h)) / 12h`
    FourPoint,
}

/// Relative finite-difference step on the internal parameters.
pub const RELATIVE_STEP: f64 = 1e-6;
/// Convergence when an accepted step lowers the cost by less than this fraction.
pub const COST_TOLERANCE: f64 = 1e-10;
/// Convergence when the internal step is shorter than this.
pub const STEP_TOLERANCE: f64 = 1e-12;
/// Normalised normal-matrix eigenvalue ratio below which parameters count as unidentifiable.
pub const RANK_TOLERANCE: f64 = 1e-14;

/// Weighted least-squares problem over the free parameters of one model.
///
/// Free parameters are mapped to unconstrained internal coordinates by
/// their [`Bound`]; positions on the abscissa are measured in units of the
/// data span so that all coordinates are of order one.
#[derive(Debug, Clone)]
pub struct FitProblem<'a> {
    function: ModelFunction,
    data: &'a SpectrumData,
    bounds: Vec<Bound>,
    base: Vec<f64>,
    free: Vec<usize>,
    scales: Vec<f64>,
}

impl<'a> FitProblem<'a> {
    pub fn new(
        model: ModelId,
        data: &'a SpectrumData,
        values: &[f64],
        fixed: &[bool],
        bounds: &[Bound],
    ) -> Result<Self, FitError> {
        let info = model.parameters();
        let n = info.len();
        if values.len() != n || fixed.len() != n || bounds.len() != n {
            return Err(FitError::Precondition(format!(
                "model {} has {n} parameters; got {} values, {} fixed flags, {} bounds",
                model.name(),
                values.len(),
                fixed.len(),
                bounds.len()
            )));
        }
        for i in 0..n {
            let ok = if fixed[i] {
                bounds[i].contains_closed(values[i])
            } else {
                bounds[i].contains_open(values[i])
            };
            if !ok {
                return Err(FitError::Precondition(format!(
                    "initial {} = {} lies outside its bounds {:?}",
                    info[i].name, values[i], bounds[i]
                )));
            }
            if let Bound::Interval { lower, upper } = bounds[i] {
                if !(lower < upper && lower.is_finite() && upper.is_finite()) {
                    return Err(FitError::Precondition(format!("empty interval for {}", info[i].name)));
                }
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
        if free.is_empty() {
            return Err(FitError::Precondition("all parameters are fixed".into()));
        }
        if data.len() < free.len() + 1 {
            return Err(FitError::Precondition(format!(
                "{} data points cannot constrain {} free parameters",
                data.len(),
                free.len()
            )));
        }
        let span = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s = hi - lo;
            if s > 0.0 {
                s
            } else {
                lo.abs().max(1.0)
            }
        };
        let x_span = span(&data.x);
        let y_span = span(&data.y);
        let scales = info
            .iter()
            .map(|p| match p.kind {
                ParamKind::Abscissa => x_span,
                ParamKind::Ordinate => y_span,
                ParamKind::Other => 1.0,
            })
            .collect();
        Ok(Self {
            function: ModelFunction::new(model),
            data,
            bounds: bounds.to_vec(),
            base: values.to_vec(),
            free,
            scales,
        })
    }

    pub fn model(&self) -> ModelId {
        self.function.id()
    }

    pub fn free_indices(&self) -> &[usize] {
        &self.free
    }

    pub fn to_internal(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.free.len(),
            self.free.iter().map(|&i| self.bounds[i].to_internal(p[i], self.scales[i])),
        )
    }

    pub fn to_physical(&self, u: &DVector<f64>) -> Vec<f64> {
        let mut p = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            p[i] = self.bounds[i].to_physical(u[k], self.scales[i]);
        }
        p
    }

    /// `dp/du` for each free parameter.
    pub fn transform_derivatives(&self, u: &DVector<f64>) -> Vec<f64> {
        self.free
            .iter()
            .enumerate()
            .map(|(k, &i)| self.bounds[i].derivative(u[k], self.scales[i]))
            .collect()
    }

    /// Weighted residuals `(y − f(x; p)) / σ`.
    pub fn residuals(&self, p: &[f64]) -> Result<DVector<f64>, FitError> {
        let mut r = DVector::zeros(self.data.len());
        for i in 0..self.data.len() {
            let f = self.function.evaluate(p, self.data.x[i])?;
            let w = self.data.yerr.as_ref().map_or(1.0, |e| e[i]);
            r[i] = (self.data.y[i] - f) / w;
            if !r[i].is_finite() {
                return Err(FitError::Physics(crate::physics::PhysicsError::Domain(format!(
                    "model is not finite at x = {}",
                    self.data.x[i]
                ))));
            }
        }
        Ok(r)
    }

    /// Jacobian of the residuals with respect to the internal coordinates.
    pub fn jacobian(&self, u: &DVector<f64>, stencil: Stencil) -> Result<DMatrix<f64>, FitError> {
        let mut j = DMatrix::zeros(self.data.len(), u.len());
        for k in 0..u.len() {
            let h = RELATIVE_STEP * u[k].abs().max(1.0);
            let at = |shift: f64| -> Result<DVector<f64>, FitError> {
                let mut v = u.clone();
                v[k] += shift;
                self.residuals(&self.to_physical(&v))
            };
            let col = match stencil {
                Stencil::Central => (at(h)? - at(-h)?) / (2.0 * h),
                Stencil::FourPoint => (at(-2.0 * h)? - at(2.0 * h)? + (at(h)? - at(-h)?) * 8.0) / (12.0 * h),
            };
            j.set_column(k, &col);
        }
        Ok(j)
    }

    /// Fails with the unidentifiable combinations when the normal matrix is
    /// singular.
    pub fn check_rank(&self, jtj: &DMatrix<f64>) -> Result<(), FitError> {
        let names: Vec<&str> = self.free.iter().map(|&i| self.model().parameters()[i].name).collect();
        let n = jtj.nrows();
        let mut combos = Vec::new();
        let mut norm = DVector::zeros(n);
        for k in 0..n {
            let d = jtj[(k, k)];
            if !(d > 0.0) {
                combos.push(format!("{} (no effect on the model)", names[k]));
            } else {
                norm[k] = 1.0 / d.sqrt();
            }
        }
        if !combos.is_empty() {
            return Err(FitError::RankDeficient { combinations: combos });
        }
        let scaled = DMatrix::from_fn(n, n, |r, c| jtj[(r, c)] * norm[r] * norm[c]);
        let eig = SymmetricEigen::new(scaled);
        let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        for (k, &value) in eig.eigenvalues.iter().enumerate() {
            if value <= RANK_TOLERANCE * max {
                let v = eig.eigenvectors.column(k);
                let terms: Vec<String> = v
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.abs() > 0.1)
                    .map(|(i, c)| format!("{c:+.3}·{}", names[i]))
                    .collect();
                combos.push(terms.join(" "));
            }
        }
        if combos.is_empty() {
            Ok(())
        } else {
            Err(FitError::RankDeficient { combinations: combos })
        }
    }
}

/// Outcome of one minimisation.
#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub params: Vec<f64>,
    pub internal: DVector<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
    pub cost_history: Vec<f64>,
}

fn solve_damped(a: &DMatrix<f64>, g: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let n = a.nrows();
    let floor = 1e-12 * (0..n).map(|k| a[(k, k)]).fold(0.0, f64::max);
    let mut m = a.clone();
    for k in 0..n {
        m[(k, k)] += lambda * a[(k, k)].max(floor);
    }
    m.cholesky().map(|c| -c.solve(g))
}

/// Minimises the weighted cost from `start`. The start values are returned
/// bit-for-bit unless a step is accepted.
pub(crate) fn levenberg_marquardt(problem: &FitProblem, start: &[f64], max_iterations: usize) -> Result<Solution, FitError> {
    let mut p = start.to_vec();
    let mut u = problem.to_internal(&p);
    let mut r = problem.residuals(&p)?;
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut history = vec![cost];
    let mut iterations = 0;
    let mut converged = false;
    let mut message = String::from("maximum iterations reached");
    while iterations < max_iterations {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            message = "zero cost".into();
            break;
        }
        let j = problem.jacobian(&u, Stencil::Central)?;
        let g = j.transpose() * &r;
        let a = j.transpose() * &j;
        if iterations == 1 {
            problem.check_rank(&a)?;
        }
        if g.norm() == 0.0 {
            converged = true;
            message = "zero gradient".into();
            break;
        }
        let mut accepted = false;
        loop {
            let Some(step) = solve_damped(&a, &g, lambda) else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    break;
                }
                continue;
            };
            let step_norm = step.norm();
            let trial_u = &u + &step;
            let trial_p = problem.to_physical(&trial_u);
            let trial = problem.residuals(&trial_p).ok().map(|tr| {
                let c = tr.norm_squared();
                (tr, c)
            });
            match trial {
                Some((tr, c)) if c < cost => {
                    let relative = (cost - c) / cost;
                    u = trial_u;
                    p = trial_p;
                    r = tr;
                    cost = c;
                    history.push(cost);
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if relative < COST_TOLERANCE {
                        converged = true;
                        message = "relative cost change below tolerance".into();
                    } else if step_norm < STEP_TOLERANCE {
                        converged = true;
                        message = "step below tolerance".into();
                    }
                    break;
                }
                _ => {
                    if step_norm < STEP_TOLERANCE {
                        converged = true;
                        message = "step below tolerance".into();
                        break;
                    }
                    lambda *= 10.0;
                    if lambda > 1e16 {
                        break;
                    }
                }
            }
        }
        if converged {
            break;
        }
        if !accepted {
            // no downhill step at any damping: a numerical minimum
            converged = true;
            message = "no further decrease at any damping".into();
            break;
        }
    }
    Ok(Solution {
        params: p,
        internal: u,
        cost,
        iterations,
        converged,
        message,
        cost_history: history,
    })
}
