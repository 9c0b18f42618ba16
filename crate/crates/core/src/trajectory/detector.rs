//! Single-photon detector model.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::units::PS_PER_S;

/// Imperfections shared by every physical detector of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub dark_count_rate_hz: f64,
    /// Non-paralysable dead time, s.
    pub dead_time_s: f64,
    /// Standard deviation of the Gaussian timing jitter, s.
    pub timing_jitter_sigma_s: f64,
}

impl Default for DetectorModel {
    /// Order-of-magnitude values for silicon avalanche photodiodes; the
    /// reference experiment does not report its detector figures.
    fn default() -> Self {
        Self {
            efficiency: 0.65,
            dark_count_rate_hz: 25.0,
            dead_time_s: 22e-9,
            timing_jitter_sigma_s: 150e-12,
        }
    }
}

impl DetectorModel {
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_count_rate_hz: 0.0,
            dead_time_s: 0.0,
            timing_jitter_sigma_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(format!("detector efficiency must lie in [0, 1], got {}", self.efficiency));
        }
        for (name, v) in [
            ("dark_count_rate", self.dark_count_rate_hz),
            ("dead_time", self.dead_time_s),
            ("timing_jitter_sigma", self.timing_jitter_sigma_s),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("detector {name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }

    pub fn dead_time_ps(&self) -> u64 {
        (self.dead_time_s * PS_PER_S).round() as u64
    }

    /// Efficiency thinning, dark counts over `[start, end)` and jitter, all
    /// before quantisation to integer picoseconds. Output is unsorted and
    /// may spill outside the segment.
    pub fn detect<R: Rng>(&self, photons: &[f64], start: f64, end: f64, rng: &mut R) -> Vec<i64> {
        let mut clicks: Vec<f64> = photons
            .iter()
            .copied()
            .filter(|_| self.efficiency >= 1.0 || rng.random::<f64>() < self.efficiency)
            .collect();
        if self.dark_count_rate_hz > 0.0 && end > start {
            let gap = Exp::new(self.dark_count_rate_hz).expect("positive rate");
            let mut t = start + gap.sample(rng);
            while t < end {
                clicks.push(t);
                t += gap.sample(rng);
            }
        }
        if self.timing_jitter_sigma_s > 0.0 {
            let jitter = Normal::new(0.0, self.timing_jitter_sigma_s).expect("finite sigma");
            for c in clicks.iter_mut() {
                *c += jitter.sample(rng);
            }
        }
        clicks.into_iter().map(|t| (t * PS_PER_S).round() as i64).collect()
    }
}

/// Clips to `[0, span]`, sorts, and applies the dead time. Clicks sharing a
/// picosecond are merged, so the result is strictly increasing.
pub fn finalize_clicks(mut clicks: Vec<i64>, span_ps: u64, dead_time_ps: u64) -> Vec<u64> {
    clicks.retain(|&t| t >= 0 && t as u64 <= span_ps);
    clicks.sort_unstable();
    let min_gap = dead_time_ps.max(1);
    let mut out: Vec<u64> = Vec::with_capacity(clicks.len());
    for t in clicks {
        let t = t as u64;
        match out.last() {
            Some(&last) if t - last < min_gap => {}
            _ => out.push(t),
        }
    }
    out
}
