//! Time-tag and histogram file formats.
//!
//! Binary `TTAG`: a 16-byte little-endian header
//! `{magic "TTAG", version u16, channel u16, reserved u64 = 0}` followed by
//! strictly increasing `u64` picosecond timestamps.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use super::{CorrelationHistogram, CorrelatorError, TimeTagStream};

pub const TTAG_MAGIC: &[u8; 4] = b"TTAG";
pub const TTAG_VERSION: u16 = 1;
pub const TTAG_HEADER_LEN: usize = 16;

fn format_error(offset: u64, message: impl Into<String>) -> CorrelatorError {
    CorrelatorError::Format {
        offset,
        message: message.into(),
    }
}

/// Writes a stream in the binary format. Timestamps must be strictly increasing.
pub fn write_ttag<W: Write>(mut w: W, stream: &TimeTagStream) -> Result<(), CorrelatorError> {
    if let Some(i) = stream.timestamps().windows(2).position(|p| p[1] <= p[0]) {
        return Err(CorrelatorError::Unsorted {
            index: i + 1,
            previous: stream.timestamps()[i],
            value: stream.timestamps()[i + 1],
        });
    }
    let mut buf = Vec::with_capacity(TTAG_HEADER_LEN + 8 * stream.len());
    buf.extend_from_slice(TTAG_MAGIC);
    buf.extend_from_slice(&TTAG_VERSION.to_le_bytes());
    buf.extend_from_slice(&stream.channel().to_le_bytes());
    buf.extend_from_slice(&0u64.to_le_bytes());
    for t in stream.timestamps() {
        buf.extend_from_slice(&t.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a binary stream. The format carries no span; the caller supplies
/// one, or the last timestamp is used.
pub fn read_ttag<R: Read>(mut r: R, span_ps: Option<u64>) -> Result<TimeTagStream, CorrelatorError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < TTAG_HEADER_LEN {
        return Err(format_error(bytes.len() as u64, "truncated header"));
    }
    if &bytes[0..4] != TTAG_MAGIC {
        return Err(format_error(0, "bad magic, expected \"TTAG\""));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != TTAG_VERSION {
        return Err(format_error(4, format!("unsupported version {version}")));
    }
    let channel = u16::from_le_bytes([bytes[6], bytes[7]]);
    let body = &bytes[TTAG_HEADER_LEN..];
    if body.len() % 8 != 0 {
        let offset = (TTAG_HEADER_LEN + body.len() / 8 * 8) as u64;
        return Err(format_error(offset, "trailing partial timestamp"));
    }
    let mut timestamps = Vec::with_capacity(body.len() / 8);
    for (i, chunk) in body.chunks_exact(8).enumerate() {
        let t = u64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if let Some(&prev) = timestamps.last() {
            if t <= prev {
                let offset = (TTAG_HEADER_LEN + 8 * i) as u64;
                return Err(format_error(
                    offset,
                    format!("timestamp {t} ps does not exceed the previous {prev} ps"),
                ));
            }
        }
        timestamps.push(t);
    }
    let span = span_ps.unwrap_or_else(|| timestamps.last().copied().unwrap_or(0));
    TimeTagStream::new(channel, timestamps, span)
}

/// Writes `channel,timestamp_ps` rows, merged in time order.
pub fn write_tag_csv<W: Write>(mut w: W, streams: &[&TimeTagStream]) -> Result<(), CorrelatorError> {
    let mut rows: Vec<(u64, u16)> = streams
        .iter()
        .flat_map(|s| s.timestamps().iter().map(move |&t| (t, s.channel())))
        .collect();
    rows.sort_unstable();
    let mut out = String::from("channel,timestamp_ps\n");
    for (t, c) in rows {
        out.push_str(&format!("{c},{t}\n"));
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads `channel,timestamp_ps` rows into one sorted stream per channel.
pub fn read_tag_csv<R: BufRead>(r: R, span_ps: Option<u64>) -> Result<Vec<TimeTagStream>, CorrelatorError> {
    let mut per_channel: BTreeMap<u16, Vec<u64>> = BTreeMap::new();
    let mut offset = 0u64;
    let mut header_seen = false;
    for line in r.split(b'\n') {
        let raw = line?;
        let start = offset;
        offset += raw.len() as u64 + 1;
        let text = std::str::from_utf8(&raw)
            .map_err(|_| format_error(start, "line is not valid UTF-8"))?
            .trim_end_matches('\r');
        if text.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if text.trim() != "channel,timestamp_ps" {
                return Err(format_error(start, "expected header \"channel,timestamp_ps\""));
            }
            header_seen = true;
            continue;
        }
        let mut fields = text.split(',');
        let (Some(c), Some(t), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(format_error(start, "expected two fields"));
        };
        let channel: u16 = c
            .trim()
            .parse()
            .map_err(|_| format_error(start, format!("bad channel {c:?}")))?;
        let t: u64 = t
            .trim()
            .parse()
            .map_err(|_| format_error(start, format!("bad timestamp {t:?}")))?;
        let list = per_channel.entry(channel).or_default();
        if let Some(&prev) = list.last() {
            if t < prev {
                return Err(format_error(
                    start,
                    format!("timestamp {t} ps on channel {channel} precedes {prev} ps"),
                ));
            }
        }
        list.push(t);
    }
    if !header_seen {
        return Err(format_error(0, "empty file"));
    }
    let global_last = per_channel.values().filter_map(|v| v.last()).copied().max().unwrap_or(0);
    per_channel
        .into_iter()
        .map(|(c, t)| TimeTagStream::new(c, t, span_ps.unwrap_or(global_last)))
        .collect()
}

pub fn write_histogram_csv<W: Write>(mut w: W, h: &CorrelationHistogram) -> Result<(), CorrelatorError> {
    let mut out = String::from("tau_ps,counts,g2,g2_err\n");
    for i in 0..h.len() {
        out.push_str(&format!("{},{},{},{}\n", h.tau_ps[i], h.counts[i], h.g2[i], h.g2_err[i]));
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

/// Rows of a histogram CSV as `(tau_ps, counts, g2, g2_err)`.
pub fn read_histogram_csv<R: BufRead>(r: R) -> Result<Vec<(i64, u64, f64, f64)>, CorrelatorError> {
    let mut rows = Vec::new();
    let mut offset = 0u64;
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let start = offset;
        offset += line.len() as u64 + 1;
        if n == 0 {
            if line.trim() != "tau_ps,counts,g2,g2_err" {
                return Err(format_error(0, "expected header \"tau_ps,counts,g2,g2_err\""));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 4 {
            return Err(format_error(start, "expected four fields"));
        }
        let bad = |what: &str| format_error(start, format!("bad {what}"));
        rows.push((
            f[0].parse().map_err(|_| bad("tau_ps"))?,
            f[1].parse().map_err(|_| bad("counts"))?,
            f[2].parse().map_err(|_| bad("g2"))?,
            f[3].parse().map_err(|_| bad("g2_err"))?,
        ));
    }
    Ok(rows)
}
