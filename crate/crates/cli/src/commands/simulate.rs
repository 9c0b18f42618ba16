use std::path::Path;

use serde::Serialize;

use wgqed_core::correlator::write_ttag;
use wgqed_core::correlator::CountRate;
use wgqed_core::inference::SpectrumData;
use wgqed_core::physics::Estimate;
use wgqed_core::trajectory::{
    evolve_trajectory, frequency_sweep, matched_laser_flux_hz, ChannelWiring, SimConfig, SimStats, SweepPoint,
};

use super::{output_dir, Overrides};
use crate::artifacts::{config_hash, Artifacts};
use crate::config::{load, SimulateConfig};
use crate::error::CliError;

#[derive(Serialize)]
struct ChannelSummary {
    channel: &'static str,
    id: u16,
    file: String,
    clicks: usize,
    rate: CountRate,
}

#[derive(Serialize)]
struct TrajectorySummary {
    duration_s: f64,
    span_ps: u64,
    channels: Vec<ChannelSummary>,
    stats: SimStats,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct SweepSummary {
    points: Vec<SweepPoint>,
    /// Transmission at the detuning closest to resonance over the one
    /// farthest from it.
    on_off_transmission_ratio: Estimate,
}

#[derive(Serialize)]
struct Summary {
    rng_seed: u64,
    laser_flux_hz: f64,
    alpha: f64,
    phase_rad: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory: Option<TrajectorySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepSummary>,
}

fn ratio(on: CountRate, off: CountRate) -> Estimate {
    if off.rate_hz <= 0.0 {
        return Estimate::new(f64::NAN, f64::NAN);
    }
    let r = on.rate_hz / off.rate_hz;
    let rel = (on.sigma_hz / on.rate_hz.max(f64::MIN_POSITIVE)).hypot(off.sigma_hz / off.rate_hz);
    Estimate::new(r, r * rel)
}

pub fn run(config_path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let mut config: SimulateConfig = load(config_path)?;
    if let Some(seed) = overrides.seed {
        config.rng_seed = seed;
    }
    if config.trajectory.is_none() && config.sweep.is_none() {
        return Err(CliError::Input(format!(
            "{}: nothing to run; add a \"trajectory\" or \"sweep\" block",
            config_path.display()
        )));
    }
    let dir = output_dir(config_path, config.output_dir.as_deref(), overrides)?;
    let emitter = config.emitter.build()?;
    let model = config.interference.build(&emitter)?;
    let detectors = config.detectors.build()?;
    let flux = match config.sim.laser_flux_hz {
        Some(f) => f,
        None => matched_laser_flux_hz(&emitter, &model)
            .map_err(|_| CliError::Input("sim.laser_flux_hz: required when interference.alpha is 0".into()))?,
    };
    let mut sim = SimConfig::new(&emitter, 1.0, flux, config.rng_seed);
    sim.detuning_hz = config.sim.detuning_mhz * 1e6;
    sim.shards = config.sim.shards;
    sim.psb_branching = config.sim.psb_branching;
    sim.psb_collection = config.sim.psb_collection;
    sim.warmup_lifetimes = config.sim.warmup_lifetimes;
    sim.propagation = config.sim.propagation;
    if let Some(step) = config.sim.time_step_ps {
        sim.time_step_s = step * 1e-12;
    }
    let hash = config_hash(&config);
    let mut artifacts = Artifacts::create(&dir)?;

    let trajectory = match &config.trajectory {
        None => None,
        Some(t) => {
            let mut run = sim.clone();
            run.duration_s = t.duration_s;
            run.wiring = ChannelWiring {
                reflection: t.reflection,
                transmission: t.transmission,
                hbt: t.hbt,
                hbt_split: t.hbt_split,
            };
            let out = evolve_trajectory(&run, &emitter, &model, &detectors)?;
            let mut channels = Vec::new();
            for (channel, stream) in &out.streams {
                let file = format!("{}.ttag", channel.name());
                let mut bytes = Vec::new();
                write_ttag(&mut bytes, stream)?;
                artifacts.write(&file, &bytes)?;
                channels.push(ChannelSummary {
                    channel: channel.name(),
                    id: channel.id(),
                    file,
                    clicks: stream.len(),
                    rate: CountRate::from_counts(stream.len() as u64, out.duration_s()),
                });
            }
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            Some(TrajectorySummary {
                duration_s: t.duration_s,
                span_ps: out.span_ps,
                channels,
                stats: out.stats,
                warnings: out.warnings.clone(),
            })
        }
    };

    let sweep = match &config.sweep {
        None => None,
        Some(s) => {
            let grid: Vec<f64> = s.detunings_mhz.iter().map(|d| d * 1e6).collect();
            let points = frequency_sweep(&sim, &emitter, &model, &detectors, &grid, s.dwell_s)?;
            let as_csv = |data: SpectrumData| -> Result<Vec<u8>, CliError> {
                let mut bytes = Vec::new();
                data.write_csv(&mut bytes)?;
                Ok(bytes)
            };
            let spectrum = |rate: fn(&SweepPoint) -> CountRate| {
                let x = points.iter().map(|p| p.detuning_hz).collect();
                let y = points.iter().map(|p| rate(p).rate_hz).collect();
                let e: Vec<f64> = points.iter().map(|p| rate(p).sigma_hz).collect();
                let yerr = e.iter().all(|v| *v > 0.0).then_some(e);
                SpectrumData::new(x, y, yerr).map(|d| d.with_units("hz", "counts_per_s"))
            };
            artifacts.write("sweep_transmission.csv", &as_csv(spectrum(|p| p.transmission)?)?)?;
            artifacts.write("sweep_reflection.csv", &as_csv(spectrum(|p| p.reflection)?)?)?;
            let by_distance = |far: bool| {
                let mut best = &points[0];
                for p in &points {
                    let (d, b) = (p.detuning_hz.abs(), best.detuning_hz.abs());
                    if (far && d > b) || (!far && d < b) {
                        best = p;
                    }
                }
                best.transmission
            };
            Some(SweepSummary {
                on_off_transmission_ratio: ratio(by_distance(false), by_distance(true)),
                points,
            })
        }
    };

    let summary = Summary {
        rng_seed: config.rng_seed,
        laser_flux_hz: flux,
        alpha: model.alpha(),
        phase_rad: model.phase(),
        trajectory,
        sweep,
    };
    if let Some(t) = &summary.trajectory {
        for c in &t.channels {
            println!("{}: {} clicks, {:.6e} ± {:.1e} Hz", c.channel, c.clicks, c.rate.rate_hz, c.rate.sigma_hz);
        }
    }
    if let Some(s) = &summary.sweep {
        let r = s.on_off_transmission_ratio;
        println!("on/off-resonance transmission ratio: {:.4} ± {:.4}", r.value, r.sigma);
    }
    artifacts.finish("summary.json", &hash, Vec::new(), &summary)?;
    Ok(())
}
