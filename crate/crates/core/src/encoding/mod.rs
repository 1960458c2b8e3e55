//! Fixed-length sequence encodings and their concatenation into a
//! block-structured feature matrix.

mod sequence_encoders;
pub mod tables;

use std::fmt::{self, Write as _};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use sequence_encoders::{
    encode_aac, encode_fourier, encode_physicochemical, encode_pseaac, encode_sparse,
    FourierConfig, FourierEncoder, PseAacConfig, SparseConfig,
};
pub use tables::{load_property_table, PropertyTable};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::sequence_io::Dataset;

/// The five encoders, in concatenation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Sparse,
    Aac,
    Pseaac,
    Physchem,
    Fourier,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 5] = [
        EncoderKind::Sparse,
        EncoderKind::Aac,
        EncoderKind::Pseaac,
        EncoderKind::Physchem,
        EncoderKind::Fourier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Sparse => "sparse",
            EncoderKind::Aac => "aac",
            EncoderKind::Pseaac => "pseaac",
            EncoderKind::Physchem => "physchem",
            EncoderKind::Fourier => "fourier",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-encoder settings used by [`encode_dataset`].
#[derive(Debug, Clone)]
pub struct EncoderConfigs {
    pub sparse: SparseConfig,
    pub pseaac: PseAacConfig,
    pub physchem: Vec<PropertyTable>,
    pub fourier: FourierConfig,
}

impl Default for EncoderConfigs {
    fn default() -> Self {
        EncoderConfigs {
            sparse: SparseConfig::default(),
            pseaac: PseAacConfig::default(),
            physchem: tables::default_physchem_tables(),
            fourier: FourierConfig::default(),
        }
    }
}

impl EncoderConfigs {
    pub fn width(&self, kind: EncoderKind) -> usize {
        match kind {
            EncoderKind::Sparse => 20 * self.sparse.max_len,
            EncoderKind::Aac => 20,
            EncoderKind::Pseaac => 20 + self.pseaac.lambda,
            EncoderKind::Physchem => self.physchem.len(),
            EncoderKind::Fourier => self.fourier.n_fft / 2 + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BlockSchema {
    pub blocks: Vec<Block>,
}

impl BlockSchema {
    pub fn push(&mut self, name: impl Into<String>, width: usize) {
        let offset = self.width();
        self.blocks.push(Block {
            name: name.into(),
            offset,
            width,
        });
    }

    pub fn width(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.width)
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Contiguous, non-overlapping, strictly increasing offsets.
    pub fn is_consistent(&self) -> bool {
        let mut next = 0;
        for b in &self.blocks {
            if b.offset != next || b.width == 0 {
                return false;
            }
            next += b.width;
        }
        true
    }

    pub fn column_names(&self) -> Vec<String> {
        self.blocks
            .iter()
            .flat_map(|b| (0..b.width).map(move |i| format!("{}_{}", b.name, i)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Array2<f64>,
    pub schema: BlockSchema,
    pub row_ids: Vec<String>,
    pub labels: Vec<u8>,
}

impl FeatureMatrix {
    pub fn n_samples(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    /// Subset of rows in the given order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: self.rows.select(ndarray::Axis(0), indices),
            schema: self.schema.clone(),
            row_ids: indices.iter().map(|&i| self.row_ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// CSV with header `id,label,<block>_<index>,...` and optional extra
    /// trailing string column (used for balanced-set provenance).
    pub fn to_csv_with(&self, extra: Option<(&str, &[&str])>) -> String {
        let mut out = String::from("id,label");
        for c in self.schema.column_names() {
            out.push(',');
            out.push_str(&c);
        }
        if let Some((name, _)) = extra {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, row) in self.rows.outer_iter().enumerate() {
            let _ = write!(out, "{},{}", self.row_ids[i], self.labels[i]);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            if let Some((_, vals)) = extra {
                let _ = write!(out, ",{}", vals[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        self.to_csv_with(None)
    }

    /// Parse a feature CSV. Returns the matrix and, if present, the values of
    /// a trailing non-numeric `provenance` column.
    pub fn from_csv(text: &str) -> Result<(FeatureMatrix, Option<Vec<String>>)> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Schema("empty feature CSV".into()))?
            .trim_end_matches('\r')
            .split(',')
            .collect();
        if header.len() < 2 || header[0] != "id" || header[1] != "label" {
            return Err(Error::Schema("feature CSV must start with 'id,label'".into()));
        }
        let has_prov = header.last() == Some(&"provenance");
        let feat_cols = &header[2..header.len() - usize::from(has_prov)];

        let mut schema = BlockSchema::default();
        for col in feat_cols {
            let (block, index) = col
                .rsplit_once('_')
                .ok_or_else(|| Error::Schema(format!("bad feature column '{col}'")))?;
            let index: usize = index
                .parse()
                .map_err(|_| Error::Schema(format!("bad feature column '{col}'")))?;
            match schema.blocks.last_mut() {
                Some(b) if b.name == block && b.width == index => b.width += 1,
                _ if index == 0 => schema.push(block, 1),
                _ => return Err(Error::Schema(format!("feature column '{col}' out of order"))),
            }
        }

        let d = feat_cols.len();
        let mut data = Vec::new();
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut prov = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
            if f.len() != header.len() {
                return Err(Error::Parse {
                    line: i + 2,
                    msg: format!("expected {} fields, found {}", header.len(), f.len()),
                });
            }
            ids.push(f[0].to_string());
            labels.push(match f[1] {
                "0" => 0,
                "1" => 1,
                v => {
                    return Err(Error::LabelDomain {
                        line: i + 2,
                        value: v.into(),
                    })
                }
            });
            for v in &f[2..2 + d] {
                data.push(v.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 2,
                    msg: format!("non-numeric value '{v}'"),
                })?);
            }
            if has_prov {
                prov.push(f[f.len() - 1].to_string());
            }
        }
        let rows = Array2::from_shape_vec((ids.len(), d), data)
            .map_err(|e| Error::Schema(e.to_string()))?;
        Ok((
            FeatureMatrix {
                rows,
                schema,
                row_ids: ids,
                labels,
            },
            has_prov.then_some(prov),
        ))
    }
}

/// Bound encoder set ready to encode sequences.
#[derive(Debug, Clone)]
pub struct Encoder {
    enabled: Vec<EncoderKind>,
    configs: EncoderConfigs,
    fourier: Option<FourierEncoder>,
    schema: BlockSchema,
}

impl Encoder {
    pub fn new(configs: EncoderConfigs, enabled: &[EncoderKind]) -> Result<Self> {
        let mut kinds: Vec<EncoderKind> = enabled.to_vec();
        kinds.sort();
        kinds.dedup();
        if kinds.is_empty() {
            return Err(Error::Config("at least one encoder must be enabled".into()));
        }
        if configs.sparse.max_len == 0 {
            return Err(Error::Config("sparse max_len must be >= 1".into()));
        }
        if kinds.contains(&EncoderKind::Pseaac) {
            configs.pseaac.validate()?;
        }
        if kinds.contains(&EncoderKind::Physchem) && configs.physchem.is_empty() {
            return Err(Error::Config("physchem needs at least one table".into()));
        }
        let fourier = if kinds.contains(&EncoderKind::Fourier) {
            Some(FourierEncoder::new(configs.fourier.clone())?)
        } else {
            None
        };
        let mut schema = BlockSchema::default();
        for &k in &kinds {
            schema.push(k.name(), configs.width(k));
        }
        Ok(Encoder {
            enabled: kinds,
            configs,
            fourier,
            schema,
        })
    }

    pub fn schema(&self) -> &BlockSchema {
        &self.schema
    }

    pub fn encode(&self, seq: &str) -> Result<Vec<f64>> {
        let mut row = Vec::with_capacity(self.schema.width());
        for k in &self.enabled {
            match k {
                EncoderKind::Sparse => row.extend(encode_sparse(seq, &self.configs.sparse)),
                EncoderKind::Aac => row.extend(encode_aac(seq)),
                EncoderKind::Pseaac => row.extend(encode_pseaac(seq, &self.configs.pseaac)?),
                EncoderKind::Physchem => {
                    row.extend(encode_physicochemical(seq, &self.configs.physchem))
                }
                EncoderKind::Fourier => {
                    row.extend(self.fourier.as_ref().expect("fourier planned").encode(seq)?)
                }
            }
        }
        debug_assert_eq!(row.len(), self.schema.width());
        Ok(row)
    }

    pub fn encode_dataset(&self, ds: &Dataset, exec: Exec) -> Result<FeatureMatrix> {
        let width = self.schema.width();
        let rows = exec.map_slice(&ds.records, |r| {
            self.encode(&r.sequence).map_err(|e| e.in_record(&r.id))
        });
        let mut data = Vec::with_capacity(ds.len() * width);
        for r in rows {
            data.extend(r?);
        }
        let rows = Array2::from_shape_vec((ds.len(), width), data)
            .expect("row widths match schema");
        Ok(FeatureMatrix {
            rows,
            schema: self.schema.clone(),
            row_ids: ds.records.iter().map(|r| r.id.clone()).collect(),
            labels: ds.labels(),
        })
    }
}

/// Encode every record with the enabled encoders, blocks in the fixed
/// order sparse, aac, pseaac, physchem, fourier.
pub fn encode_dataset(
    ds: &Dataset,
    configs: &EncoderConfigs,
    enabled: &[EncoderKind],
) -> Result<FeatureMatrix> {
    Encoder::new(configs.clone(), enabled)?.encode_dataset(ds, Exec::default())
}
