//! Optical Bloch equations and quantum-regression two-time correlations.
//!
//! States are 2×2 density matrices in the `{|g⟩, |e⟩}` basis, frame rotating
//! at the laser frequency. Superoperators act on the row-major vectorisation
//! `[ρ_gg, ρ_ge, ρ_eg, ρ_ee]`.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{domain, EmitterParams, InterferenceModel, PhysicsError};
use crate::units;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Which field the intensity correlation is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionChannel {
    /// The dipole field `σ⁻` alone.
    Emitted,
    /// Drive plus scattered field, `ε + cσ⁻`.
    Transmitted,
}

/// Integration controls for the steady-state search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Laser detuning from the transition, Hz.
    pub detuning_hz: f64,
    /// Longest evolution time before giving up, in units of `1/Γ`.
    pub horizon_lifetimes: f64,
    /// Largest entry-wise change between successive checkpoints accepted as converged.
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            detuning_hz: 0.0,
            horizon_lifetimes: 1e4,
            tolerance: 1e-13,
        }
    }
}

impl OracleConfig {
    pub fn at_detuning(detuning_hz: f64) -> Self {
        Self {
            detuning_hz,
            ..Self::default()
        }
    }
}

/// Converged density matrix with integration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub rho: Matrix2<C>,
    pub elapsed: f64,
    pub last_change: f64,
}

impl SteadyState {
    pub fn excited_population(&self) -> f64 {
        self.rho[(1, 1)].re
    }

    /// `⟨σ⁻⟩ = ρ_eg`.
    pub fn coherence(&self) -> C {
        self.rho[(1, 0)]
    }
}

fn lowering() -> Matrix2<C> {
    Matrix2::new(ZERO, ONE, ZERO, ZERO)
}

fn excited_projector() -> Matrix2<C> {
    Matrix2::new(ZERO, ZERO, ZERO, ONE)
}

fn kron(a: &Matrix2<C>, b: &Matrix2<C>) -> Matrix4<C> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

fn vec_rho(rho: &Matrix2<C>) -> Vector4<C> {
    Vector4::new(rho[(0, 0)], rho[(0, 1)], rho[(1, 0)], rho[(1, 1)])
}

fn unvec(v: &Vector4<C>) -> Matrix2<C> {
    Matrix2::new(v[0], v[1], v[2], v[3])
}

fn dissipator(op: &Matrix2<C>) -> Matrix4<C> {
    let id = Matrix2::<C>::identity();
    let n = op.adjoint() * op;
    kron(op, &op.conjugate()) - kron(&n, &id) * C::new(0.5, 0.0) - kron(&id, &n.transpose()) * C::new(0.5, 0.0)
}

/// Liouvillian of the driven, decaying and dephasing two-level system.
///
/// `H = −Δ|e⟩⟨e| + (Ω/2)(σ⁺ + σ⁻)`, collapse operators `√Γ σ⁻` and
/// `√(2γ*) |e⟩⟨e|`.
pub fn liouvillian(emitter: &EmitterParams, detuning_hz: f64) -> Matrix4<C> {
    let delta = units::hz_to_rad_per_s(detuning_hz);
    let sm = lowering();
    let pe = excited_projector();
    let h = pe * C::new(-delta, 0.0) + (sm + sm.adjoint()) * C::new(0.5 * emitter.rabi_frequency(), 0.0);
    let id = Matrix2::<C>::identity();
    let coherent = (kron(&h, &id) - kron(&id, &h.transpose())) * C::new(0.0, -1.0);
    let decay = dissipator(&(sm * C::new(emitter.decay_rate().sqrt(), 0.0)));
    let dephasing = dissipator(&(pe * C::new((2.0 * emitter.pure_dephasing_rate()).sqrt(), 0.0)));
    coherent + decay + dephasing
}

fn max_abs(v: &Vector4<C>) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Steady state reached from the ground state by propagating with
/// successively squared propagators `exp(L·2ᵏh)`.
pub fn steady_state(emitter: &EmitterParams, config: &OracleConfig) -> Result<SteadyState, PhysicsError> {
    if !(config.tolerance > 0.0) || !(config.horizon_lifetimes > 0.0) {
        return Err(PhysicsError::Config(
            "oracle tolerance and horizon must be positive".into(),
        ));
    }
    if !config.detuning_hz.is_finite() {
        return Err(domain("detuning must be finite"));
    }
    let l = liouvillian(emitter, config.detuning_hz);
    let horizon = config.horizon_lifetimes / emitter.decay_rate();
    let mut step = 0.25 / emitter.decay_rate();
    let mut propagator = (l * C::new(step, 0.0)).exp();
    let mut state = Vector4::new(ONE, ZERO, ZERO, ZERO);
    let mut elapsed = 0.0;
    let mut last_change = f64::INFINITY;
    // the trace is conserved exactly; renormalising stops rounding in the
    // squared propagators from accumulating
    let renorm = |v: Vector4<C>| v / (v[0] + v[3]);
    while elapsed < horizon {
        let next = renorm(propagator * state);
        elapsed += step;
        last_change = max_abs(&(next - state));
        state = next;
        if last_change < config.tolerance {
            // one more full-length check guards against a stationary point of a slow oscillation
            let probe = renorm(propagator * state);
            let probe_change = max_abs(&(probe - state));
            if probe_change < config.tolerance {
                let mut rho = unvec(&probe);
                let trace = rho[(0, 0)] + rho[(1, 1)];
                rho /= trace;
                return Ok(SteadyState {
                    rho,
                    elapsed: elapsed + step,
                    last_change: probe_change,
                });
            }
        }
        propagator = propagator * propagator;
        step *= 2.0;
    }
    Err(PhysicsError::Convergence {
        horizon,
        last_change,
        tolerance: config.tolerance,
    })
}

/// Coefficient `c/ε` of the scattered field in the transmitted mode.
///
/// Chosen so that at steady state `c⟨σ⁻⟩ = α e^{iφ} ε S(Δ)` in the weak-drive
/// limit, which makes the mean transmitted intensity follow the extinction
/// line shape.
pub fn transmitted_field_ratio(emitter: &EmitterParams, model: &InterferenceModel) -> Result<C, PhysicsError> {
    if model.alpha() == 0.0 {
        return Ok(ZERO);
    }
    if emitter.rabi_frequency() <= 0.0 {
        return Err(domain("transmitted field needs a nonzero Rabi frequency when alpha > 0"));
    }
    let magnitude = 2.0 * emitter.coherence_decay_rate() * model.alpha() / emitter.rabi_frequency();
    Ok(C::i() * C::from_polar(magnitude, model.phase()))
}

fn field_operator(emitter: &EmitterParams, model: &InterferenceModel, channel: DetectionChannel) -> Result<Matrix2<C>, PhysicsError> {
    Ok(match channel {
        DetectionChannel::Emitted => lowering(),
        DetectionChannel::Transmitted => {
            Matrix2::identity() + lowering() * transmitted_field_ratio(emitter, model)?
        }
    })
}

/// Normalised `g²(τ)` of the selected field by the quantum regression theorem:
/// `G²(τ) = Tr[a†a · e^{Lτ}(aρa†)] / Tr[a†aρ]²`.
pub fn bloch_g2_oracle(
    emitter: &EmitterParams,
    model: &InterferenceModel,
    channel: DetectionChannel,
    tau_grid: &[f64],
    config: &OracleConfig,
) -> Result<Vec<f64>, PhysicsError> {
    if tau_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(domain("tau grid must be finite and nonnegative"));
    }
    if tau_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(domain("tau grid must be sorted"));
    }
    let ss = steady_state(emitter, config)?;
    let a = field_operator(emitter, model, channel)?;
    let n = a.adjoint() * a;
    let mean = (n * ss.rho).trace().re;
    if !(mean > 0.0) {
        return Err(domain("detected field has zero mean intensity"));
    }
    let conditioned = vec_rho(&(a * ss.rho * a.adjoint()));
    let l = liouvillian(emitter, config.detuning_hz);
    let norm = mean * mean;
    let values = tau_grid
        .iter()
        .map(|&tau| {
            let evolved = unvec(&((l * C::new(tau, 0.0)).exp() * conditioned));
            let g = (n * evolved).trace().re / norm;
            if g < 0.0 && g > -1e-12 {
                0.0
            } else {
                g
            }
        })
        .collect();
    Ok(values)
}
