//! Spectra and histograms as fit input, and their CSV form.
//!
//! ```text
//! # x_unit=hz,y_unit=counts_per_s
//! x,y,yerr
//! -1e9,1020.5,31.9
//! ```
//!
//! The `yerr` column is optional; without it the fit is unweighted.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::correlator::CorrelationHistogram;
use crate::trajectory::SweepPoint;

use super::FitError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Standard errors of `y`; `None` for unweighted fits.
    pub yerr: Option<Vec<f64>>,
    pub x_unit: String,
    pub y_unit: String,
}

impl SpectrumData {
    pub fn new(x: Vec<f64>, y: Vec<f64>, yerr: Option<Vec<f64>>) -> Result<Self, FitError> {
        if x.len() != y.len() {
            return Err(FitError::Data(format!("{} abscissae for {} ordinates", x.len(), y.len())));
        }
        if x.is_empty() {
            return Err(FitError::Data("no data points".into()));
        }
        if let Some(i) = x.iter().zip(&y).position(|(a, b)| !(a.is_finite() && b.is_finite())) {
            return Err(FitError::Data(format!("non-finite value at point {i}")));
        }
        if let Some(e) = &yerr {
            if e.len() != y.len() {
                return Err(FitError::Data(format!("{} errors for {} points", e.len(), y.len())));
            }
            if let Some(i) = e.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(FitError::Data(format!("error at point {i} must be positive, got {}", e[i])));
            }
        }
        Ok(Self {
            x,
            y,
            yerr,
            x_unit: String::new(),
            y_unit: String::new(),
        })
    }

    pub fn with_units(mut self, x_unit: &str, y_unit: &str) -> Self {
        self.x_unit = x_unit.to_string();
        self.y_unit = y_unit.to_string();
        self
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_weighted(&self) -> bool {
        self.yerr.is_some()
    }

    /// `g²` against delay in seconds, weighted by the Poisson errors.
    pub fn from_histogram(h: &CorrelationHistogram) -> Result<Self, FitError> {
        Ok(Self::new(h.tau_seconds(), h.g2.clone(), Some(h.g2_err.clone()))?.with_units("s", "g2"))
    }

    /// Transmission rate against detuning.
    pub fn from_sweep_transmission(points: &[SweepPoint]) -> Result<Self, FitError> {
        let x = points.iter().map(|p| p.detuning_hz).collect();
        let y = points.iter().map(|p| p.transmission.rate_hz).collect();
        let e: Vec<f64> = points.iter().map(|p| p.transmission.sigma_hz).collect();
        let yerr = e.iter().all(|v| *v > 0.0).then_some(e);
        Ok(Self::new(x, y, yerr)?.with_units("hz", "counts_per_s"))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), FitError> {
        let mut out = format!("# x_unit={},y_unit={}\n", self.x_unit, self.y_unit);
        match &self.yerr {
            Some(e) => {
                out.push_str("x,y,yerr\n");
                for i in 0..self.len() {
                    out.push_str(&format!("{:e},{:e},{:e}\n", self.x[i], self.y[i], e[i]));
                }
            }
            None => {
                out.push_str("x,y\n");
                for i in 0..self.len() {
                    out.push_str(&format!("{:e},{:e}\n", self.x[i], self.y[i]));
                }
            }
        }
        w.write_all(out.as_bytes()).map_err(|e| FitError::Data(e.to_string()))
    }

    /// Reads the CSV form; errors name the 1-based line.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, FitError> {
        let bad = |line: usize, msg: String| FitError::Data(format!("line {line}: {msg}"));
        let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next_nonempty = || -> Result<Option<(usize, String)>, FitError> {
            for (n, l) in lines.by_ref() {
                let l = l.map_err(|e| FitError::Data(e.to_string()))?;
                if !l.trim().is_empty() {
                    return Ok(Some((n, l)));
                }
            }
            Ok(None)
        };
        let (n, units) = next_nonempty()?.ok_or_else(|| FitError::Data("empty file".into()))?;
        let (x_unit, y_unit) = parse_units(&units).ok_or_else(|| {
            bad(n, "expected a unit line like \"# x_unit=hz,y_unit=counts_per_s\"".into())
        })?;
        let (n, header) = next_nonempty()?.ok_or_else(|| bad(n + 1, "missing column header".into()))?;
        let with_err = match header.trim() {
            "x,y,yerr" => true,
            "x,y" => false,
            other => return Err(bad(n, format!("expected header \"x,y,yerr\" or \"x,y\", got {other:?}"))),
        };
        let (mut x, mut y, mut e) = (Vec::new(), Vec::new(), Vec::new());
        while let Some((n, row)) = next_nonempty()? {
            let fields: Vec<&str> = row.trim().split(',').map(str::trim).collect();
            let want = if with_err { 3 } else { 2 };
            if fields.len() != want {
                return Err(bad(n, format!("expected {want} fields, got {}", fields.len())));
            }
            let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(n, format!("bad {what} {s:?}")));
            x.push(num(fields[0], "x")?);
            y.push(num(fields[1], "y")?);
            if with_err {
                e.push(num(fields[2], "yerr")?);
            }
        }
        let data = Self::new(x, y, with_err.then_some(e))?;
        Ok(data.with_units(&x_unit, &y_unit))
    }
}

fn parse_units(line: &str) -> Option<(String, String)> {
    let body = line.trim().strip_prefix('#')?.trim();
    let mut x_unit = None;
    let mut y_unit = None;
    for part in body.split(',') {
        let (k, v) = part.split_once('=')?;
        match k.trim() {
            "x_unit" => x_unit = Some(v.trim().to_string()),
            "y_unit" => y_unit = Some(v.trim().to_string()),
            _ => return None,
        }
    }
    Some((x_unit?, y_unit?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let d = SpectrumData::new(vec![-1e9, 0.0, 2.5e8], vec![1.0, 0.75, 0.9], Some(vec![0.01, 0.02, 0.01]))
            .unwrap()
            .with_units("hz", "counts_per_s");
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("# x_unit=hz,y_unit=counts_per_s\nx,y,yerr\n"));
        assert_eq!(SpectrumData::read_csv(&buf[..]).unwrap(), d);

        let u = SpectrumData::new(vec![1.0, 2.0], vec![3.0, 4.0], None).unwrap().with_units("rad", "counts");
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        assert_eq!(SpectrumData::read_csv(&buf[..]).unwrap(), u);
    }

    #[test]
    fn csv_errors_name_lines() {
        let text = "# x_unit=hz,y_unit=counts\nx,y,yerr\n1,2,0.1\n2,x,0.1\n";
        let err = SpectrumData::read_csv(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        let text = "x,y\n1,2\n";
        assert!(SpectrumData::read_csv(text.as_bytes()).is_err());
        let text = "# x_unit=hz,y_unit=counts\nx,y,yerr\n1,2,0\n";
        assert!(SpectrumData::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn validation() {
        assert!(SpectrumData::new(vec![1.0], vec![f64::NAN], None).is_err());
        assert!(SpectrumData::new(vec![1.0, 2.0], vec![1.0], None).is_err());
        assert!(SpectrumData::new(vec![], vec![], None).is_err());
        assert!(SpectrumData::new(vec![1.0], vec![1.0], Some(vec![-1.0])).is_err());
    }
}
