//! Time-tag streams, HBT correlation histograms and count-trace reduction.
//!
//! Timestamps are integer picoseconds. A histogram bin `k` is centred on
//! `k·w` and collects the delays `τ = t_b − t_a` that round to it, halves
//! rounded away from zero so that the binning is exactly odd in `τ`. Only
//! delays with `|τ| ≤ tau_max` are counted; the two outermost bins are
//! therefore half bins, and every bin is normalised by its own number of
//! integer lags.

mod io;

pub use io::{
    read_histogram_csv, read_tag_csv, read_ttag, write_histogram_csv, write_tag_csv, write_ttag,
    TTAG_HEADER_LEN, TTAG_MAGIC, TTAG_VERSION,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::PS_PER_S;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelatorError {
    #[error("timestamps not sorted: index {index} ({value} ps) follows {previous} ps")]
    Unsorted { index: usize, previous: u64, value: u64 },
    #[error("timestamp {value} ps at index {index} lies beyond the span {span} ps")]
    OutOfSpan { index: usize, value: u64, span: u64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("malformed input at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CorrelatorError {
    fn from(e: std::io::Error) -> Self {
        CorrelatorError::Io(e.to_string())
    }
}

/// Sorted picosecond timestamps of one channel over the acquisition `[0, span]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeTagStream {
    channel: u16,
    timestamps: Vec<u64>,
    span_ps: u64,
}

impl TimeTagStream {
    pub fn new(channel: u16, timestamps: Vec<u64>, span_ps: u64) -> Result<Self, CorrelatorError> {
        check_sorted(&timestamps)?;
        if let Some(&last) = timestamps.last() {
            if last > span_ps {
                let index = timestamps.partition_point(|&t| t <= span_ps);
                return Err(CorrelatorError::OutOfSpan {
                    index,
                    value: timestamps[index],
                    span: span_ps,
                });
            }
        }
        Ok(Self {
            channel,
            timestamps,
            span_ps,
        })
    }

    /// Stream whose span ends at its last tag.
    pub fn spanning(channel: u16, timestamps: Vec<u64>) -> Result<Self, CorrelatorError> {
        let span = timestamps.last().copied().unwrap_or(0);
        Self::new(channel, timestamps, span)
    }

    pub fn channel(&self) -> u16 {
        self.channel
    }

    pub fn timestamps(&self) -> &[u64] {
        &self.timestamps
    }

    pub fn into_timestamps(self) -> Vec<u64> {
        self.timestamps
    }

    pub fn span_ps(&self) -> u64 {
        self.span_ps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Mean rate over the span, Hz.
    pub fn rate_hz(&self) -> f64 {
        if self.span_ps == 0 {
            return 0.0;
        }
        self.timestamps.len() as f64 / self.span_ps as f64 * PS_PER_S
    }

    /// Keep each tag independently with probability `p`.
    pub fn thinned<R: rand::Rng>(&self, p: f64, rng: &mut R) -> Self {
        let timestamps = self
            .timestamps
            .iter()
            .copied()
            .filter(|_| rng.random::<f64>() < p)
            .collect();
        Self {
            channel: self.channel,
            timestamps,
            span_ps: self.span_ps,
        }
    }
}

/// First index that breaks nondecreasing order.
pub fn check_sorted(timestamps: &[u64]) -> Result<(), CorrelatorError> {
    match timestamps.windows(2).position(|w| w[1] < w[0]) {
        Some(i) => Err(CorrelatorError::Unsorted {
            index: i + 1,
            previous: timestamps[i],
            value: timestamps[i + 1],
        }),
        None => Ok(()),
    }
}

/// Normalised coincidence histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub bin_width_ps: u64,
    pub tau_max_ps: u64,
    /// Bin centres, ps.
    pub tau_ps: Vec<i64>,
    pub counts: Vec<u64>,
    pub g2: Vec<f64>,
    pub g2_err: Vec<f64>,
    /// Integer lags covered by each bin.
    pub lags: Vec<u64>,
    pub rate_a_hz: f64,
    pub rate_b_hz: f64,
    /// Overlap of the two acquisitions minus `tau_max`, ps.
    pub effective_span_ps: u64,
    pub symmetrized: bool,
}

impl CorrelationHistogram {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Index of the `τ = 0` bin.
    pub fn zero_bin(&self) -> usize {
        self.counts.len() / 2
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin centres in seconds.
    pub fn tau_seconds(&self) -> Vec<f64> {
        self.tau_ps.iter().map(|&t| t as f64 / PS_PER_S).collect()
    }

    /// Expected coincidences of uncorrelated streams in each bin.
    pub fn normalization(&self) -> Vec<f64> {
        self.lags
            .iter()
            .map(|&l| pair_density(self.rate_a_hz, self.rate_b_hz) * l as f64 * self.effective_span_ps as f64)
            .collect()
    }

    /// Even-symmetrised copy: bins `k` and `−k` are pooled.
    pub fn symmetrized(&self) -> Self {
        let n = self.counts.len();
        let mut out = self.clone();
        let norm = self.normalization();
        for k in 0..n {
            let m = n - 1 - k;
            let counts = if k == m { self.counts[k] } else { self.counts[k] + self.counts[m] };
            let expected = if k == m { norm[k] } else { norm[k] + norm[m] };
            out.counts[k] = counts;
            out.lags[k] = if k == m { self.lags[k] } else { self.lags[k] + self.lags[m] };
            let (g, e) = normalize(counts, expected);
            out.g2[k] = g;
            out.g2_err[k] = e;
        }
        out.symmetrized = true;
        out
    }
}

fn pair_density(rate_a_hz: f64, rate_b_hz: f64) -> f64 {
    (rate_a_hz / PS_PER_S) * (rate_b_hz / PS_PER_S)
}

fn normalize(counts: u64, expected: f64) -> (f64, f64) {
    if expected <= 0.0 {
        return (f64::NAN, f64::NAN);
    }
    // an empty bin still carries the uncertainty of one count
    let err = (counts.max(1) as f64).sqrt() / expected;
    (counts as f64 / expected, err)
}

/// Bin index of a delay, rounding half-integers away from zero.
#[inline]
pub fn bin_index(tau: i64, bin_width: u64) -> i64 {
    let w = bin_width as i64;
    let mag = (2 * tau.abs() + w) / (2 * w);
    if tau < 0 {
        -mag
    } else {
        mag
    }
}

/// Number of integer lags `τ` with `|τ| ≤ tau_max` falling into each bin.
pub fn lag_counts(bin_width: u64, tau_max: u64) -> Vec<u64> {
    let k_max = (tau_max / bin_width) as i64;
    let mut lags = vec![0u64; (2 * k_max + 1) as usize];
    let w = bin_width as i64;
    for (slot, k) in lags.iter_mut().zip(-k_max..=k_max) {
        // τ ≥ 0 part of bin |k|: [lo, hi] inclusive
        let a = k.abs();
        let lo = if a == 0 { 0 } else { (2 * a * w - w + 1) / 2 };
        let hi = ((2 * a * w + w + 1) / 2 - 1).min(tau_max as i64);
        let positive = (hi - lo + 1).max(0) as u64;
        *slot = if a == 0 { 2 * positive - 1 } else { positive };
    }
    lags
}

fn validate_binning(bin_width_ps: u64, tau_max_ps: u64) -> Result<(), CorrelatorError> {
    if bin_width_ps < 1 {
        return Err(CorrelatorError::Parameter("bin width must be at least 1 ps".into()));
    }
    if tau_max_ps % bin_width_ps != 0 {
        return Err(CorrelatorError::Parameter(format!(
            "tau_max {tau_max_ps} ps is not a multiple of the bin width {bin_width_ps} ps"
        )));
    }
    if tau_max_ps > i64::MAX as u64 / 4 {
        return Err(CorrelatorError::Parameter("tau_max too large".into()));
    }
    Ok(())
}

/// Raw coincidence counts of `b` relative to `a`.
///
/// Self-pairs (same index) are skipped when the two streams share a
/// channel id, which is how an autocorrelation is requested.
pub fn coincidence_counts(
    a: &TimeTagStream,
    b: &TimeTagStream,
    bin_width_ps: u64,
    tau_max_ps: u64,
) -> Result<Vec<u64>, CorrelatorError> {
    validate_binning(bin_width_ps, tau_max_ps)?;
    check_sorted(&a.timestamps)?;
    check_sorted(&b.timestamps)?;
    let exclude_self = a.channel == b.channel;
    let k_max = (tau_max_ps / bin_width_ps) as i64;
    let nbins = (2 * k_max + 1) as usize;
    let ta = &a.timestamps;
    let tb = &b.timestamps;
    const CHUNK: usize = 1 << 14;
    let partial: Vec<Vec<u64>> = ta
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(chunk, slice)| {
            let mut hist = vec![0u64; nbins];
            let base = chunk * CHUNK;
            let first = slice[0];
            let mut lo = tb.partition_point(|&t| t + tau_max_ps < first);
            for (offset, &t) in slice.iter().enumerate() {
                while lo < tb.len() && tb[lo] + tau_max_ps < t {
                    lo += 1;
                }
                let i = base + offset;
                let mut j = lo;
                while j < tb.len() && tb[j] <= t + tau_max_ps {
                    if !(exclude_self && i == j) {
                        let tau = tb[j] as i64 - t as i64;
                        hist[(bin_index(tau, bin_width_ps) + k_max) as usize] += 1;
                    }
                    j += 1;
                }
            }
            hist
        })
        .collect();
    let mut counts = vec![0u64; nbins];
    for h in partial {
        for (c, v) in counts.iter_mut().zip(h) {
            *c += v;
        }
    }
    Ok(counts)
}

/// Normalised `g²(τ)` of `b` against `a`.
///
/// `g² = counts / (r_a · r_b · lags · effective_span)` where the rates are
/// the mean rates over each stream's own span and the effective span is the
/// overlap of the two acquisitions less `tau_max`.
pub fn correlate_streams(
    a: &TimeTagStream,
    b: &TimeTagStream,
    bin_width_ps: u64,
    tau_max_ps: u64,
) -> Result<CorrelationHistogram, CorrelatorError> {
    let counts = coincidence_counts(a, b, bin_width_ps, tau_max_ps)?;
    let overlap = a.span_ps.min(b.span_ps);
    if overlap <= tau_max_ps {
        return Err(CorrelatorError::Parameter(format!(
            "acquisition overlap {overlap} ps does not exceed tau_max {tau_max_ps} ps"
        )));
    }
    let effective_span_ps = overlap - tau_max_ps;
    let lags = lag_counts(bin_width_ps, tau_max_ps);
    let k_max = (tau_max_ps / bin_width_ps) as i64;
    let tau_ps = (-k_max..=k_max).map(|k| k * bin_width_ps as i64).collect();
    let mut hist = CorrelationHistogram {
        bin_width_ps,
        tau_max_ps,
        tau_ps,
        g2: Vec::new(),
        g2_err: Vec::new(),
        lags,
        rate_a_hz: a.rate_hz(),
        rate_b_hz: b.rate_hz(),
        effective_span_ps,
        symmetrized: false,
        counts,
    };
    let norm = hist.normalization();
    let (g2, g2_err) = hist.counts.iter().zip(&norm).map(|(&c, &n)| normalize(c, n)).unzip();
    hist.g2 = g2;
    hist.g2_err = g2_err;
    Ok(hist)
}

/// Mean count rate over a window with its Poisson error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRate {
    pub rate_hz: f64,
    pub sigma_hz: f64,
    pub counts: u64,
    /// True when no tag fell into the window.
    pub degenerate: bool,
}

impl CountRate {
    pub fn from_counts(counts: u64, window_s: f64) -> Self {
        Self {
            rate_hz: counts as f64 / window_s,
            sigma_hz: (counts as f64).sqrt() / window_s,
            counts,
            degenerate: counts == 0,
        }
    }
}

/// Counts in `[0, window)` divided by the window.
pub fn reduce_count_trace(stream: &TimeTagStream, window_s: f64) -> Result<CountRate, CorrelatorError> {
    if !(window_s > 0.0) {
        return Err(CorrelatorError::Parameter("window must be positive".into()));
    }
    let window_ps = window_s * PS_PER_S;
    if window_ps > stream.span_ps as f64 * (1.0 + 1e-12) {
        return Err(CorrelatorError::Parameter(format!(
            "window {window_s} s exceeds the stream span {} s",
            stream.span_ps as f64 / PS_PER_S
        )));
    }
    let counts = stream.timestamps.partition_point(|&t| (t as f64) < window_ps) as u64;
    Ok(CountRate::from_counts(counts, window_s))
}

/// O(N²) pair counter with the same binning rules, for cross-checks.
pub fn brute_force_counts(a: &TimeTagStream, b: &TimeTagStream, bin_width_ps: u64, tau_max_ps: u64) -> Vec<u64> {
    let k_max = (tau_max_ps / bin_width_ps) as i64;
    let mut counts = vec![0u64; (2 * k_max + 1) as usize];
    let exclude_self = a.channel == b.channel;
    for (i, &ta) in a.timestamps.iter().enumerate() {
        for (j, &tb) in b.timestamps.iter().enumerate() {
            if exclude_self && i == j {
                continue;
            }
            let tau = tb as i64 - ta as i64;
            if tau.unsigned_abs() <= tau_max_ps {
                counts[(bin_index(tau, bin_width_ps) + k_max) as usize] += 1;
            }
        }
    }
    counts
}
