//! Quantum-jump simulation of the driven emitter and its photon counters.
//!
//! The conditional state evolves under the exact no-jump propagator of
//! [`propagator::Generator`]; jump times are drawn by the waiting-time method
//! (the norm falls to a uniform variate). Four jump channels exist:
//!
//! - the transmitted waveguide mode `L_T = ε + cσ⁻`, whose clicks form the
//!   transmission stream. `c/ε` is fixed by the interference weight so that
//!   the mean transmitted rate follows the extinction line shape;
//! - phonon-sideband decay, a fraction `psb_branching` of `Γ`, collected
//!   into the reflection detector with probability `psb_collection`;
//! - the remaining radiative decay, unobserved;
//! - pure dephasing `√(2γ*)|e⟩⟨e|`, unobserved.
//!
//! A run of length `duration` is cut into contiguous shards, each warmed up
//! from the ground state, simulated on its own random stream and merged.

mod detector;
pub mod propagator;

pub use detector::{finalize_clicks, DetectorModel};
pub use propagator::{Channels, Generator, Jump, TwoLevelState};

use std::collections::HashSet;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlator::{CountRate, TimeTagStream};
use crate::physics::{transmitted_field_ratio, EmitterParams, InterferenceModel, PhysicsError};
use crate::seeds::SeedTree;
use crate::units::{self, PS_PER_S};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("simulation error: {0}")]
    Runtime(String),
}

/// Output channels and their stream ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickChannel {
    ReflectionPsb,
    Transmission,
    TransmissionHbtA,
    TransmissionHbtB,
}

impl ClickChannel {
    pub const ALL: [ClickChannel; 4] = [
        ClickChannel::ReflectionPsb,
        ClickChannel::Transmission,
        ClickChannel::TransmissionHbtA,
        ClickChannel::TransmissionHbtB,
    ];

    pub fn id(self) -> u16 {
        match self {
            ClickChannel::ReflectionPsb => 0,
            ClickChannel::Transmission => 1,
            ClickChannel::TransmissionHbtA => 2,
            ClickChannel::TransmissionHbtB => 3,
        }
    }

    pub fn from_id(id: u16) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.id() == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            ClickChannel::ReflectionPsb => "reflection_psb",
            ClickChannel::Transmission => "transmission",
            ClickChannel::TransmissionHbtA => "transmission_hbt_a",
            ClickChannel::TransmissionHbtB => "transmission_hbt_b",
        }
    }

    pub fn is_transmission(self) -> bool {
        !matches!(self, ClickChannel::ReflectionPsb)
    }
}

/// One detector click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClickRecord {
    pub timestamp_ps: u64,
    pub channel: ClickChannel,
}

/// Which detectors are connected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelWiring {
    pub reflection: bool,
    pub transmission: bool,
    /// Split the transmitted light onto two detectors instead of one.
    pub hbt: bool,
    /// Probability that a transmitted photon goes to detector A.
    pub hbt_split: f64,
}

impl Default for ChannelWiring {
    fn default() -> Self {
        Self {
            reflection: true,
            transmission: true,
            hbt: false,
            hbt_split: 0.5,
        }
    }
}

impl ChannelWiring {
    pub fn channels(&self) -> Vec<ClickChannel> {
        let mut out = Vec::new();
        if self.reflection {
            out.push(ClickChannel::ReflectionPsb);
        }
        if self.transmission {
            if self.hbt {
                out.push(ClickChannel::TransmissionHbtA);
                out.push(ClickChannel::TransmissionHbtB);
            } else {
                out.push(ClickChannel::Transmission);
            }
        }
        out
    }
}

/// How jump times are located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    /// Root-finding on the closed-form propagator; `time_step` seeds the bracket.
    #[default]
    Exact,
    /// Norm checked on a fixed grid of `time_step`; slow, for cross-checks.
    FixedStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integration step, s. At most `0.01/Γ`.
    pub time_step_s: f64,
    pub duration_s: f64,
    pub rng_seed: u64,
    /// Laser minus transition frequency, Hz.
    pub detuning_hz: f64,
    /// Photon flux `|ε|²` of the drive in the transmitted mode, Hz.
    pub laser_flux_hz: f64,
    pub psb_branching: f64,
    pub psb_collection: f64,
    pub shards: usize,
    /// Per-shard warm-up from the ground state, in units of `1/Γ`.
    pub warmup_lifetimes: f64,
    /// Explicit per-shard seeds, replacing the ones derived from `rng_seed`.
    pub shard_seeds: Option<Vec<u64>>,
    pub wiring: ChannelWiring,
    pub propagation: Propagation,
}

impl SimConfig {
    /// Defaults for a given emitter: step `0.01/Γ`, 16 shards, PSB branching 0.3.
    pub fn new(emitter: &EmitterParams, duration_s: f64, laser_flux_hz: f64, rng_seed: u64) -> Self {
        Self {
            time_step_s: 0.01 / emitter.decay_rate(),
            duration_s,
            rng_seed,
            detuning_hz: 0.0,
            laser_flux_hz,
            psb_branching: 0.3,
            psb_collection: 0.1,
            shards: 16,
            warmup_lifetimes: 100.0,
            shard_seeds: None,
            wiring: ChannelWiring::default(),
            propagation: Propagation::Exact,
        }
    }

    fn validate(&self, emitter: &EmitterParams) -> Result<(), SimError> {
        let cfg = |m: String| Err(SimError::Config(m));
        let limit = 0.01 / emitter.decay_rate();
        if !(self.time_step_s > 0.0) {
            return cfg(format!("time_step must be positive, got {}", self.time_step_s));
        }
        if self.time_step_s > limit * (1.0 + 1e-12) {
            return cfg(format!(
                "time_step {:.3e} s exceeds 0.01/Γ = {limit:.3e} s",
                self.time_step_s
            ));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return cfg(format!("duration must be positive, got {}", self.duration_s));
        }
        if self.duration_s * PS_PER_S > 9.0e18 {
            return cfg("duration exceeds the picosecond timestamp range".into());
        }
        if !(self.laser_flux_hz >= 0.0 && self.laser_flux_hz.is_finite()) {
            return cfg(format!("laser_flux must be non-negative, got {}", self.laser_flux_hz));
        }
        if !(0.0..=1.0).contains(&self.psb_branching) {
            return cfg(format!("psb_branching must lie in [0, 1], got {}", self.psb_branching));
        }
        if !(0.0..=1.0).contains(&self.psb_collection) {
            return cfg(format!("psb_collection must lie in [0, 1], got {}", self.psb_collection));
        }
        if !(0.0..=1.0).contains(&self.wiring.hbt_split) {
            return cfg(format!("hbt_split must lie in [0, 1], got {}", self.wiring.hbt_split));
        }
        if self.shards == 0 {
            return cfg("at least one shard is required".into());
        }
        if !(self.warmup_lifetimes >= 0.0 && self.warmup_lifetimes.is_finite()) {
            return cfg("warmup must be non-negative".into());
        }
        if let Some(seeds) = &self.shard_seeds {
            if seeds.len() != self.shards {
                return cfg(format!("{} shard seeds given for {} shards", seeds.len(), self.shards));
            }
        }
        if !self.detuning_hz.is_finite() {
            return cfg("detuning must be finite".into());
        }
        Ok(())
    }

    /// One seed tree per shard. Reusing a seed across shards would make them
    /// identical copies, so it is rejected.
    fn shard_trees(&self) -> Result<Vec<SeedTree>, SimError> {
        let seeds: Vec<u64> = match &self.shard_seeds {
            Some(s) => s.clone(),
            None => {
                let root = SeedTree::new(self.rng_seed);
                (0..self.shards).map(|i| root.seed(&format!("sim/shard/{i}"))).collect()
            }
        };
        let mut seen = HashSet::new();
        for (i, s) in seeds.iter().enumerate() {
            if !seen.insert(*s) {
                return Err(SimError::Config(format!("seed {s} reused by shard {i}")));
            }
        }
        Ok(seeds.into_iter().map(SeedTree::new).collect())
    }
}

/// Largest drive flux for which the transmitted mode's share `|c|²` of the
/// decay fits into the non-sideband part `(1 − p_psb)Γ`.
pub fn max_laser_flux_hz(emitter: &EmitterParams, model: &InterferenceModel, psb_branching: f64) -> Result<f64, SimError> {
    let r = transmitted_field_ratio(emitter, model)?.norm_sqr();
    if r == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 - psb_branching) * emitter.decay_rate() / r)
}

/// Drive flux `Ω²/(4αΓ₂)` whose own coupling to the emitter produces the
/// emitter's Rabi frequency; the transmitted mode then carries `|c|² = αΓ₂`.
///
/// Below this flux the transmitted stream has fewer photons than the Rabi
/// frequency implies, which leaves the normalised `g²` unchanged.
pub fn matched_laser_flux_hz(emitter: &EmitterParams, model: &InterferenceModel) -> Result<f64, SimError> {
    if !(model.alpha() > 0.0) {
        return Err(SimError::Config("matched flux needs alpha > 0".into()));
    }
    Ok(emitter.rabi_frequency().powi(2) / (4.0 * model.alpha() * emitter.coherence_decay_rate()))
}

/// Jump channels for a run.
pub fn channels_for(config: &SimConfig, emitter: &EmitterParams, model: &InterferenceModel) -> Result<Channels, SimError> {
    let eps = config.laser_flux_hz.sqrt();
    let ratio = transmitted_field_ratio(emitter, model)?;
    let c = ratio * eps;
    let decay = emitter.decay_rate();
    let psb_rate = config.psb_branching * decay;
    let lost_rate = decay - psb_rate - c.norm_sqr();
    if lost_rate < -1e-9 * decay {
        let max_flux = max_laser_flux_hz(emitter, model, config.psb_branching)?;
        return Err(SimError::Config(format!(
            "transmitted-mode decay |c|² = {:.4e} s⁻¹ exceeds (1 − psb_branching)Γ; \
             reduce laser_flux to at most {max_flux:.4e} Hz or the interference weight",
            c.norm_sqr()
        )));
    }
    Ok(Channels {
        epsilon: Complex64::new(eps, 0.0),
        c,
        psb_rate,
        lost_rate: lost_rate.max(0.0),
        dephasing_rate: 2.0 * emitter.pure_dephasing_rate(),
    })
}

/// Counts of the jumps taken inside the recorded window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub transmission_jumps: u64,
    pub psb_jumps: u64,
    pub lost_jumps: u64,
    pub dephasing_jumps: u64,
    pub psb_collected: u64,
}

impl SimStats {
    fn add(&mut self, o: &SimStats) {
        self.transmission_jumps += o.transmission_jumps;
        self.psb_jumps += o.psb_jumps;
        self.lost_jumps += o.lost_jumps;
        self.dephasing_jumps += o.dephasing_jumps;
        self.psb_collected += o.psb_collected;
    }

    pub fn emitted_photons(&self) -> u64 {
        self.psb_jumps + self.lost_jumps
    }
}

/// Click streams of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub span_ps: u64,
    pub streams: Vec<(ClickChannel, TimeTagStream)>,
    pub stats: SimStats,
    pub warnings: Vec<String>,
}

impl SimOutput {
    pub fn stream(&self, channel: ClickChannel) -> Option<&TimeTagStream> {
        self.streams.iter().find(|(c, _)| *c == channel).map(|(_, s)| s)
    }

    pub fn duration_s(&self) -> f64 {
        self.span_ps as f64 / PS_PER_S
    }

    /// All clicks merged in time order.
    pub fn records(&self) -> Vec<ClickRecord> {
        let mut out: Vec<ClickRecord> = self
            .streams
            .iter()
            .flat_map(|(c, s)| {
                s.timestamps().iter().map(move |&t| ClickRecord {
                    timestamp_ps: t,
                    channel: *c,
                })
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Clicks of all transmission detectors.
    pub fn transmission_counts(&self) -> u64 {
        self.streams
            .iter()
            .filter(|(c, _)| c.is_transmission())
            .map(|(_, s)| s.len() as u64)
            .sum()
    }

    pub fn reflection_counts(&self) -> u64 {
        self.stream(ClickChannel::ReflectionPsb).map_or(0, |s| s.len() as u64)
    }
}

struct ShardPhotons {
    transmission: Vec<f64>,
    psb: Vec<f64>,
    stats: SimStats,
}

struct RunContext {
    gen: Generator,
    channels: Channels,
    step: f64,
    propagation: Propagation,
    psb_collection: f64,
}

fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u = 1.0 - rng.random::<f64>();
        if u < 1.0 {
            return u;
        }
    }
}

fn run_shard(ctx: &RunContext, start: f64, end: f64, warmup: f64, rng: &mut ChaCha8Rng) -> ShardPhotons {
    let mut out = ShardPhotons {
        transmission: Vec::new(),
        psb: Vec::new(),
        stats: SimStats::default(),
    };
    let mut t = start - warmup;
    let mut psi = TwoLevelState::ground();
    loop {
        let u = uniform_open(rng);
        let remaining = end - t;
        let wait = match ctx.propagation {
            Propagation::Exact => propagator::jump_time(&ctx.gen, &ctx.channels, &psi, u, remaining, ctx.step),
            Propagation::FixedStep => propagator::jump_time_fixed_step(&ctx.gen, &psi, u, remaining, ctx.step),
        };
        let Some(wait) = wait else { break };
        t += wait;
        let evolved = ctx.gen.propagate(&psi, wait);
        let rates = ctx.channels.rates(&evolved);
        let total: f64 = rates.iter().sum();
        let mut pick = rng.random::<f64>() * total;
        let mut jump = Jump::Dephasing;
        for (r, j) in rates.iter().zip([Jump::Transmission, Jump::Psb, Jump::Lost, Jump::Dephasing]) {
            if pick < *r {
                jump = j;
                break;
            }
            pick -= r;
        }
        psi = ctx.channels.apply(jump, &evolved);
        let recorded = t >= start;
        match jump {
            Jump::Transmission => {
                if recorded {
                    out.transmission.push(t);
                    out.stats.transmission_jumps += 1;
                }
            }
            Jump::Psb => {
                let collected = rng.random::<f64>() < ctx.psb_collection;
                if recorded {
                    out.stats.psb_jumps += 1;
                    if collected {
                        out.psb.push(t);
                        out.stats.psb_collected += 1;
                    }
                }
            }
            Jump::Lost => {
                if recorded {
                    out.stats.lost_jumps += 1;
                }
            }
            Jump::Dephasing => {
                if recorded {
                    out.stats.dephasing_jumps += 1;
                }
            }
        }
    }
    out
}

fn simulate(
    config: &SimConfig,
    emitter: &EmitterParams,
    model: &InterferenceModel,
    detectors: &DetectorModel,
) -> Result<SimOutput, SimError> {
    config.validate(emitter)?;
    detectors.validate().map_err(SimError::Config)?;
    let channels = channels_for(config, emitter, model)?;
    let trees = config.shard_trees()?;
    let mut warnings = Vec::new();
    if !emitter.is_weak_drive() {
        warnings.push(format!(
            "drive Ω/Γ = {:.4} is outside the weak-drive regime; the transmitted line shape saturates",
            emitter.rabi_over_decay()
        ));
    }
    let ctx = RunContext {
        gen: Generator::new(
            units::hz_to_rad_per_s(config.detuning_hz),
            emitter.rabi_frequency(),
            emitter.decay_rate(),
            &channels,
        ),
        channels,
        step: config.time_step_s,
        propagation: config.propagation,
        psb_collection: config.psb_collection,
    };
    let warmup = config.warmup_lifetimes / emitter.decay_rate();
    let n = config.shards;
    let span_ps = (config.duration_s * PS_PER_S).round() as u64;
    let wiring = config.wiring;

    // per shard: raw photons, then each detector on its own stream
    let detected: Vec<(Vec<Vec<i64>>, SimStats)> = trees
        .par_iter()
        .enumerate()
        .map(|(i, tree)| {
            let start = config.duration_s * i as f64 / n as f64;
            let end = config.duration_s * (i + 1) as f64 / n as f64;
            let mut rng = tree.rng("trajectory");
            let photons = run_shard(&ctx, start, end, warmup, &mut rng);
            let mut per_channel = Vec::new();
            for ch in wiring.channels() {
                let mut det_rng = tree.rng(&format!("detector/{}", ch.name()));
                let clicks = match ch {
                    ClickChannel::ReflectionPsb => detectors.detect(&photons.psb, start, end, &mut det_rng),
                    ClickChannel::Transmission => detectors.detect(&photons.transmission, start, end, &mut det_rng),
                    ClickChannel::TransmissionHbtA | ClickChannel::TransmissionHbtB => {
                        // the splitter stream is replayed identically for both arms
                        let mut split_rng = tree.rng("splitter");
                        let to_a = ch == ClickChannel::TransmissionHbtA;
                        let arm: Vec<f64> = photons
                            .transmission
                            .iter()
                            .copied()
                            .filter(|_| (split_rng.random::<f64>() < wiring.hbt_split) == to_a)
                            .collect();
                        detectors.detect(&arm, start, end, &mut det_rng)
                    }
                };
                per_channel.push(clicks);
            }
            (per_channel, photons.stats)
        })
        .collect();

    let mut stats = SimStats::default();
    let channels_out = wiring.channels();
    let mut merged: Vec<Vec<i64>> = vec![Vec::new(); channels_out.len()];
    for (per_channel, s) in detected {
        stats.add(&s);
        for (dst, src) in merged.iter_mut().zip(per_channel) {
            dst.extend(src);
        }
    }
    let dead = detectors.dead_time_ps();
    let mut streams = Vec::new();
    for (ch, clicks) in channels_out.into_iter().zip(merged) {
        let ts = finalize_clicks(clicks, span_ps, dead);
        let stream = TimeTagStream::new(ch.id(), ts, span_ps).map_err(|e| SimError::Runtime(e.to_string()))?;
        streams.push((ch, stream));
    }
    Ok(SimOutput {
        span_ps,
        streams,
        stats,
        warnings,
    })
}

/// Simulates one run and returns the detector click streams.
///
/// Runs meant for statistics must last at least `10⁴/Γ`.
pub fn evolve_trajectory(
    config: &SimConfig,
    emitter: &EmitterParams,
    model: &InterferenceModel,
    detectors: &DetectorModel,
) -> Result<SimOutput, SimError> {
    let minimum = 1e4 / emitter.decay_rate();
    if config.duration_s < minimum {
        return Err(SimError::Config(format!(
            "duration {:.3e} s is shorter than 10⁴/Γ = {minimum:.3e} s",
            config.duration_s
        )));
    }
    simulate(config, emitter, model, detectors)
}

/// Mean rates at one laser detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub detuning_hz: f64,
    pub transmission: CountRate,
    pub reflection: CountRate,
}

/// Runs [`evolve_trajectory`] for `dwell` at every detuning. Each point gets
/// its own seed, derived from the run seed under `"sim/sweep/{k}"`.
pub fn frequency_sweep(
    config: &SimConfig,
    emitter: &EmitterParams,
    model: &InterferenceModel,
    detectors: &DetectorModel,
    detuning_grid: &[f64],
    dwell_s: f64,
) -> Result<Vec<SweepPoint>, SimError> {
    if detuning_grid.is_empty() {
        return Err(SimError::Config("detuning grid is empty".into()));
    }
    let minimum = 1e3 / emitter.decay_rate();
    if !(dwell_s >= minimum) {
        return Err(SimError::Config(format!(
            "dwell {dwell_s:.3e} s is shorter than 10³/Γ = {minimum:.3e} s"
        )));
    }
    let root = SeedTree::new(config.rng_seed);
    detuning_grid
        .par_iter()
        .enumerate()
        .map(|(k, &detuning_hz)| {
            let cfg = SimConfig {
                detuning_hz,
                duration_s: dwell_s,
                rng_seed: root.seed(&format!("sim/sweep/{k}")),
                shard_seeds: None,
                ..config.clone()
            };
            let out = simulate(&cfg, emitter, model, detectors)?;
            let window = out.duration_s();
            Ok(SweepPoint {
                detuning_hz,
                transmission: CountRate::from_counts(out.transmission_counts(), window),
                reflection: CountRate::from_counts(out.reflection_counts(), window),
            })
        })
        .collect()
}
