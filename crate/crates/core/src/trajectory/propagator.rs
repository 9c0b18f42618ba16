//! No-jump evolution of the conditional two-level state and jump-time search.

use num_complex::Complex64;

type C = Complex64;

/// Conditional amplitudes `(c_g, c_e)`, not normalised between jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelState {
    pub g: C,
    pub e: C,
}

impl TwoLevelState {
    pub fn ground() -> Self {
        Self {
            g: C::new(1.0, 0.0),
            e: C::new(0.0, 0.0),
        }
    }

    pub fn excited() -> Self {
        Self {
            g: C::new(0.0, 0.0),
            e: C::new(1.0, 0.0),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.g.norm_sqr() + self.e.norm_sqr()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm_sqr().sqrt();
        Self {
            g: self.g / n,
            e: self.e / n,
        }
    }

    pub fn excited_population(&self) -> f64 {
        self.e.norm_sqr() / self.norm_sqr()
    }
}

/// Jump channels of the unravelling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channels {
    /// Drive amplitude in the transmitted mode, `√Hz`.
    pub epsilon: C,
    /// Emitter amplitude in the transmitted mode, `√Hz`.
    pub c: C,
    /// Phonon-sideband decay rate.
    pub psb_rate: f64,
    /// Remaining unmonitored radiative decay, `Γ − |c|² − psb_rate`.
    pub lost_rate: f64,
    /// Rate of the `√(2γ*) |e⟩⟨e|` dephasing channel, i.e. `2γ*`.
    pub dephasing_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Jump {
    Transmission,
    Psb,
    Lost,
    Dephasing,
}

impl Channels {
    /// Instantaneous rates of each channel for an (unnormalised) state.
    pub fn rates(&self, s: &TwoLevelState) -> [f64; 4] {
        let pe = s.e.norm_sqr();
        let t = (self.epsilon * s.g + self.c * s.e).norm_sqr() + (self.epsilon * s.e).norm_sqr();
        [t, self.psb_rate * pe, self.lost_rate * pe, self.dephasing_rate * pe]
    }

    pub fn apply(&self, jump: Jump, s: &TwoLevelState) -> TwoLevelState {
        match jump {
            Jump::Transmission => TwoLevelState {
                g: self.epsilon * s.g + self.c * s.e,
                e: self.epsilon * s.e,
            }
            .normalized(),
            Jump::Psb | Jump::Lost => TwoLevelState::ground(),
            Jump::Dephasing => TwoLevelState::excited(),
        }
    }
}

/// Generator `M = −iH_eff` of the no-jump evolution `ψ̇ = Mψ`.
///
/// `H_eff = −Δ|e⟩⟨e| + (Ω/2)(σ⁺ + σ⁻) − (i/2)(|ε|² + (Γ + 2γ*)|e⟩⟨e|) − iε*cσ⁻`;
/// the last term is what remains of the monitored transmitted channel
/// `ε + cσ⁻` once its constant part is compensated in the Hamiltonian.
#[derive(Debug, Clone, Copy)]
pub struct Generator {
    m: [[C; 2]; 2],
    mu: C,
    delta: C,
}

impl Generator {
    pub fn new(detuning: f64, rabi: f64, decay: f64, channels: &Channels) -> Self {
        let half_eps = 0.5 * channels.epsilon.norm_sqr();
        let m00 = C::new(-half_eps, 0.0);
        let m01 = C::new(0.0, -0.5 * rabi) - channels.epsilon.conj() * channels.c;
        let m10 = C::new(0.0, -0.5 * rabi);
        let m11 = C::new(-half_eps - 0.5 * decay - 0.5 * channels.dephasing_rate, detuning);
        let mu = 0.5 * (m00 + m11);
        let half_diff = 0.5 * (m00 - m11);
        let delta = (half_diff * half_diff + m01 * m10).sqrt();
        Self {
            m: [[m00, m01], [m10, m11]],
            mu,
            delta,
        }
    }

    /// `e^{Mt} ψ` written as `e^{μt}[cosh(δt) ψ + sinh(δt)/δ (M − μ)ψ]`,
    /// evaluated through the eigenvalue exponentials so that nothing overflows.
    pub fn propagate(&self, s: &TwoLevelState, t: f64) -> TwoLevelState {
        let a = [
            (self.m[0][0] - self.mu) * s.g + self.m[0][1] * s.e,
            self.m[1][0] * s.g + (self.m[1][1] - self.mu) * s.e,
        ];
        let dt = self.delta * t;
        let (ch, sh) = if dt.norm() < 1e-4 {
            let base = (self.mu * t).exp();
            let d2 = dt * dt;
            (base * (1.0 + d2 / 2.0), base * t * (1.0 + d2 / 6.0))
        } else {
            let e1 = ((self.mu + self.delta) * t).exp();
            let e2 = ((self.mu - self.delta) * t).exp();
            (0.5 * (e1 + e2), (e1 - e2) / (2.0 * self.delta))
        };
        TwoLevelState {
            g: ch * s.g + sh * a[0],
            e: ch * s.e + sh * a[1],
        }
    }
}

impl Generator {
    /// Component of `ψ` along the slowly decaying eigenmode, and that mode's
    /// eigenvalue. Once the fast mode has died out `ψ(t) ≈ e^{λt} v`.
    fn slow_mode(&self, s: &TwoLevelState) -> (TwoLevelState, C) {
        let a = [
            (self.m[0][0] - self.mu) * s.g + self.m[0][1] * s.e,
            self.m[1][0] * s.g + (self.m[1][1] - self.mu) * s.e,
        ];
        // principal square root, so Re δ ≥ 0 and μ + δ decays slowest
        let v = TwoLevelState {
            g: 0.5 * (s.g + a[0] / self.delta),
            e: 0.5 * (s.e + a[1] / self.delta),
        };
        (v, self.mu + self.delta)
    }
}

/// Time at which `‖e^{Mt}ψ‖²` falls to `u`, if before `t_max`.
///
/// The norm is monotone. The first guess comes from the slow eigenmode
/// alone, falling back to `−ln u / rate(0)`; safeguarded Newton iterations
/// on `ln‖ψ‖²` then refine it, the derivative being minus the summed channel
/// rates. Without an upper bracket a failed step doubles `t`.
pub fn jump_time(
    gen: &Generator,
    channels: &Channels,
    psi: &TwoLevelState,
    u: f64,
    t_max: f64,
    initial_step: f64,
) -> Option<f64> {
    let target = u.ln();
    let mut guess = f64::NAN;
    if gen.delta.norm() > 0.0 {
        let (v, lambda) = gen.slow_mode(psi);
        let w = v.norm_sqr();
        if w > 0.0 && lambda.re < 0.0 {
            guess = (w.ln() - target) / (-2.0 * lambda.re);
        }
    }
    if !(guess > 0.0 && guess.is_finite()) {
        let rate0: f64 = channels.rates(psi).iter().sum::<f64>() / psi.norm_sqr();
        guess = if rate0 > 0.0 { -target / rate0 } else { initial_step };
    }
    let mut t = guess.max(initial_step.min(t_max)).min(t_max);
    let mut lo = 0.0;
    let mut hi: Option<f64> = None;
    for _ in 0..200 {
        let s = gen.propagate(psi, t);
        let n = s.norm_sqr();
        if n > u {
            if t >= t_max {
                return None;
            }
            lo = t;
        } else {
            hi = Some(t);
        }
        let tol = 1e-15_f64.max(1e-13 * t);
        if let Some(h) = hi {
            if h - lo <= tol {
                break;
            }
        }
        let rate: f64 = channels.rates(&s).iter().sum();
        let mut next = if n > 0.0 && rate > 0.0 {
            t + (n.ln() - target) * n / rate
        } else {
            f64::NAN
        };
        if (next - t).abs() <= tol {
            t = next;
            break;
        }
        match hi {
            Some(h) => {
                if !(next > lo && next < h) {
                    next = 0.5 * (lo + h);
                }
            }
            None => {
                if !(next > lo) {
                    next = 2.0 * lo.max(initial_step);
                }
                next = next.min(t_max);
            }
        }
        t = next;
    }
    if hi.is_none() && t > t_max {
        return None;
    }
    Some(t.clamp(lo, hi.unwrap_or(t_max)))
}

/// Crossing located on a fixed grid of `step`, for cross-checks.
pub fn jump_time_fixed_step(
    gen: &Generator,
    psi: &TwoLevelState,
    u: f64,
    t_max: f64,
    step: f64,
) -> Option<f64> {
    let basis_g = gen.propagate(&TwoLevelState::ground(), step);
    let basis_e = gen.propagate(&TwoLevelState::excited(), step);
    let mut s = *psi;
    let mut t = 0.0;
    while t + step <= t_max {
        s = TwoLevelState {
            g: basis_g.g * s.g + basis_e.g * s.e,
            e: basis_g.e * s.g + basis_e.e * s.e,
        };
        t += step;
        if s.norm_sqr() <= u {
            return Some(t);
        }
    }
    None
}
