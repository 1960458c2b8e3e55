use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::tables::{self, PropertyTable};
use crate::error::{Error, Result};
use crate::sequence_io::residue_index;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseConfig {
    pub max_len: usize,
}

impl Default for SparseConfig {
    fn default() -> Self {
        SparseConfig { max_len: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseAacConfig {
    pub lambda: usize,
    pub weight: f64,
    pub properties: Vec<PropertyTable>,
}

impl Default for PseAacConfig {
    fn default() -> Self {
        PseAacConfig {
            lambda: 5,
            weight: 0.05,
            properties: tables::default_pseaac_tables(),
        }
    }
}

impl PseAacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::Config(format!(
                "pseaac weight must be > 0, got {}",
                self.weight
            )));
        }
        if self.lambda > 0 && self.properties.is_empty() {
            return Err(Error::Config(
                "pseaac needs at least one property table when lambda > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierConfig {
    pub table: PropertyTable,
    pub n_fft: usize,
    pub normalize_by_length: bool,
}

impl Default for FourierConfig {
    fn default() -> Self {
        FourierConfig {
            table: tables::bundled::eiip(),
            n_fft: 128,
            normalize_by_length: true,
        }
    }
}

#[inline]
fn idx(r: u8) -> usize {
    residue_index(r).expect("validated sequence")
}

/// One-hot blocks of 20, zero-padded or truncated to `max_len` residues.
pub fn encode_sparse(seq: &str, cfg: &SparseConfig) -> Vec<f64> {
    let mut out = vec![0.0; 20 * cfg.max_len];
    for (pos, &r) in seq.as_bytes().iter().take(cfg.max_len).enumerate() {
        out[pos * 20 + idx(r)] = 1.0;
    }
    out
}

fn counts(seq: &str) -> [usize; 20] {
    let mut c = [0usize; 20];
    for &r in seq.as_bytes() {
        c[idx(r)] += 1;
    }
    c
}

/// Residue frequencies.
pub fn encode_aac(seq: &str) -> Vec<f64> {
    let len = seq.len() as f64;
    counts(seq).iter().map(|&c| c as f64 / len).collect()
}

/// Property tables standardized over the 20 residues (zero mean, unit
/// population standard deviation).
fn standardized(properties: &[PropertyTable]) -> Result<Vec<[f64; 20]>> {
    properties
        .iter()
        .map(|t| {
            let mean = t.values.iter().sum::<f64>() / 20.0;
            let var = t.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 20.0;
            if var <= 0.0 {
                return Err(Error::Config(format!(
                    "property table '{}' is constant and cannot be standardized",
                    t.id
                )));
            }
            let sd = var.sqrt();
            let mut s = [0.0; 20];
            for (o, v) in s.iter_mut().zip(&t.values) {
                *o = (v - mean) / sd;
            }
            Ok(s)
        })
        .collect()
}

/// Type-1 pseudo amino acid composition, `20 + lambda` components.
pub fn encode_pseaac(seq: &str, cfg: &PseAacConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let len = seq.len();
    if len <= cfg.lambda {
        return Err(Error::Precondition(format!(
            "pseaac needs sequence length > lambda (length {len}, lambda {})",
            cfg.lambda
        )));
    }
    let aac = encode_aac(seq);
    if cfg.lambda == 0 {
        return Ok(aac);
    }
    let props = standardized(&cfg.properties)?;
    let residues: Vec<usize> = seq.bytes().map(idx).collect();
    let n_props = props.len() as f64;
    let correlation = |a: usize, b: usize| -> f64 {
        props.iter().map(|h| (h[a] - h[b]).powi(2)).sum::<f64>() / n_props
    };
    let thetas: Vec<f64> = (1..=cfg.lambda)
        .map(|j| {
            let s: f64 = (0..len - j)
                .map(|i| correlation(residues[i], residues[i + j]))
                .sum();
            s / (len - j) as f64
        })
        .collect();
    let denom = 1.0 + cfg.weight * thetas.iter().sum::<f64>();
    let mut out: Vec<f64> = aac.iter().map(|f| f / denom).collect();
    out.extend(thetas.iter().map(|t| cfg.weight * t / denom));
    Ok(out)
}

/// Mean of each table over the sequence residues.
pub fn encode_physicochemical(seq: &str, tables: &[PropertyTable]) -> Vec<f64> {
    let len = seq.len() as f64;
    tables
        .iter()
        .map(|t| seq.bytes().map(|r| t.get(r)).sum::<f64>() / len)
        .collect()
}

/// Magnitude spectrum of a residue-property signal.
#[derive(Clone)]
pub struct FourierEncoder {
    cfg: FourierConfig,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FourierEncoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierEncoder").field("cfg", &self.cfg).finish()
    }
}

impl FourierEncoder {
    pub fn new(cfg: FourierConfig) -> Result<Self> {
        if cfg.n_fft < 2 || !cfg.n_fft.is_power_of_two() {
            return Err(Error::Config(format!(
                "n_fft must be a power of two >= 2, got {}",
                cfg.n_fft
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(cfg.n_fft);
        Ok(FourierEncoder { cfg, fft })
    }

    pub fn output_len(&self) -> usize {
        self.cfg.n_fft / 2 + 1
    }

    /// Full two-sided DFT of `series` zero-padded to `n_fft`.
    pub fn spectrum(&self, series: &[f64]) -> Result<Vec<Complex64>> {
        if series.len() > self.cfg.n_fft {
            return Err(Error::Config(format!(
                "sequence length {} exceeds n_fft {}; choose a larger n_fft",
                series.len(),
                self.cfg.n_fft
            )));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.cfg.n_fft];
        for (b, &x) in buf.iter_mut().zip(series) {
            b.re = x;
        }
        self.fft.process(&mut buf);
        Ok(buf)
    }

    pub fn encode(&self, seq: &str) -> Result<Vec<f64>> {
        let series: Vec<f64> = seq.bytes().map(|r| self.cfg.table.get(r)).collect();
        let spec = self.spectrum(&series)?;
        let scale = if self.cfg.normalize_by_length {
            1.0 / seq.len() as f64
        } else {
            1.0
        };
        Ok(spec[..self.output_len()]
            .iter()
            .map(|c| c.norm() * scale)
            .collect())
    }
}

pub fn encode_fourier(seq: &str, cfg: &FourierConfig) -> Result<Vec<f64>> {
    FourierEncoder::new(cfg.clone())?.encode(seq)
}
