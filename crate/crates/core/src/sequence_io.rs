//! Labeled peptide datasets: FASTA / CSV parsing, residue validation and
//! the registry of published dataset sizes.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical residue alphabet, in the column order used by every encoder.
pub const AMINO_ACIDS: [u8; 20] = *b"ACDEFGHIKLMNPQRSTVWY";

/// Column index of a canonical residue, or `None` for anything else.
#[inline]
pub fn residue_index(r: u8) -> Option<usize> {
    match r {
        b'A' => Some(0),
        b'C' => Some(1),
        b'D' => Some(2),
        b'E' => Some(3),
        b'F' => Some(4),
        b'G' => Some(5),
        b'H' => Some(6),
        b'I' => Some(7),
        b'K' => Some(8),
        b'L' => Some(9),
        b'M' => Some(10),
        b'N' => Some(11),
        b'P' => Some(12),
        b'Q' => Some(13),
        b'R' => Some(14),
        b'S' => Some(15),
        b'T' => Some(16),
        b'V' => Some(17),
        b'W' => Some(18),
        b'Y' => Some(19),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeptideRecord {
    pub id: String,
    pub sequence: String,
    pub label: u8,
}

/// Uppercase `raw` and check it only uses the 20 canonical residues.
pub fn validate_sequence(raw: &str) -> Result<String> {
    if raw.is_empty() {
        return Err(Error::EmptySequence(None));
    }
    let mut out = String::with_capacity(raw.len());
    for (index, ch) in raw.chars().enumerate() {
        let up = ch.to_ascii_uppercase();
        if !up.is_ascii() || residue_index(up as u8).is_none() {
            return Err(Error::IllegalResidue {
                record: None,
                residue: ch,
                index,
            });
        }
        out.push(up);
    }
    Ok(out)
}

fn make_record(id: &str, raw_seq: &str, label: u8) -> Result<PeptideRecord> {
    let sequence = validate_sequence(raw_seq).map_err(|e| match e {
        Error::IllegalResidue { residue, index, .. } => Error::IllegalResidue {
            record: Some(id.to_string()),
            residue,
            index,
        },
        Error::EmptySequence(_) => Error::EmptySequence(Some(id.to_string())),
        other => other,
    })?;
    Ok(PeptideRecord {
        id: id.to_string(),
        sequence,
        label,
    })
}

fn check_unique(records: &[PeptideRecord]) -> Result<()> {
    let mut seen = HashSet::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::DuplicateId(r.id.clone()));
        }
    }
    Ok(())
}

fn parse_label(token: &str, line: usize) -> Result<u8> {
    match token.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::LabelDomain {
            line,
            value: other.to_string(),
        }),
    }
}

/// Parse FASTA whose headers look like `>id|label`.
pub fn parse_fasta(text: &str) -> Result<Vec<PeptideRecord>> {
    let mut records = Vec::new();
    let mut current: Option<(String, u8, String)> = None;

    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            if let Some((id, label, seq)) = current.take() {
                records.push(make_record(&id, &seq, label)?);
            }
            let (id, label) = header.rsplit_once('|').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("header '{header}' has no trailing '|0' or '|1' label token"),
            })?;
            let id = id.trim();
            if id.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "empty record id".into(),
                });
            }
            let label = match label.trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("label token '{other}' is not 0 or 1"),
                    })
                }
            };
            current = Some((id.to_string(), label, String::new()));
        } else {
            match current.as_mut() {
                Some((_, _, seq)) => seq.push_str(line),
                None => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "sequence data before first header".into(),
                    })
                }
            }
        }
    }
    if let Some((id, label, seq)) = current.take() {
        records.push(make_record(&id, &seq, label)?);
    }
    check_unique(&records)?;
    Ok(records)
}

/// Parse a headed `id,sequence,label` CSV. Column order is free.
pub fn parse_labeled_csv(text: &str) -> Result<Vec<PeptideRecord>> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break l.trim_end_matches('\r'),
            None => return Err(Error::Schema("missing header row".into())),
        }
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let (id_col, seq_col, label_col) = (find("id")?, find("sequence")?, find("label")?);

    let mut records = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} fields, found {}", cols.len(), fields.len()),
            });
        }
        let label = parse_label(fields[label_col], line_no)?;
        records.push(make_record(fields[id_col].trim(), fields[seq_col].trim(), label)?);
    }
    check_unique(&records)?;
    Ok(records)
}

/// Published `(total, positive, negative)` sizes per dataset name.
///
/// Several names appear more than once with different sizes; a dataset
/// matches the registry if it agrees with any of its rows.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DatasetRegistry {
    pub entries: Vec<(String, usize, usize, usize)>,
}

impl DatasetRegistry {
    pub fn published() -> Self {
        let rows: [(&str, usize, usize, usize); 10] = [
            ("acp_mlacp", 585, 398, 187),
            ("aip_antiinfam", 2124, 1261, 863),
            ("amp_antibp2", 1993, 994, 999),
            ("cpp_mlcpp", 492, 246, 246),
            ("hem_hemopi", 1478, 739, 739),
            ("isp_il10pred", 1903, 1165, 738),
            ("pip_pipel", 1104, 582, 522),
            ("acp_mlacp", 1242, 848, 394),
            ("aip_antiinfam", 1750, 875, 875),
            ("amp_antibp2", 3228, 2395, 833),
        ];
        DatasetRegistry {
            entries: rows
                .iter()
                .map(|&(n, t, p, q)| (n.to_string(), t, p, q))
                .collect(),
        }
    }

    pub fn lookup(&self, name: &str) -> Vec<(usize, usize, usize)> {
        self.entries
            .iter()
            .filter(|e| e.0 == name)
            .map(|e| (e.1, e.2, e.3))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub records: Vec<PeptideRecord>,
    pub n_pos: usize,
    pub n_neg: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, records: Vec<PeptideRecord>) -> Result<Self> {
        check_unique(&records)?;
        let n_pos = records.iter().filter(|r| r.label == 1).count();
        let n_neg = records.len() - n_pos;
        Ok(Dataset {
            name: name.into(),
            records,
            n_pos,
            n_neg,
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Recount classes from the records.
    pub fn recount(&self) -> (usize, usize) {
        let p = self.records.iter().filter(|r| r.label == 1).count();
        (p, self.records.len() - p)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,sequence,label\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{}", r.id, r.sequence, r.label);
        }
        out
    }

    pub fn to_fasta(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(out, ">{}|{}\n{}", r.id, r.label, r.sequence);
        }
        out
    }

    fn check_registry(&mut self, registry: &DatasetRegistry) {
        let rows = registry.lookup(&self.name);
        if rows.is_empty() {
            return;
        }
        let actual = (self.len(), self.n_pos, self.n_neg);
        if !rows.contains(&actual) {
            let expected: Vec<String> = rows
                .iter()
                .map(|(t, p, n)| format!("{t} ({p}, {n})"))
                .collect();
            self.warnings.push(format!(
                "class counts {} ({}, {}) do not match registry entry for '{}': {}",
                actual.0,
                actual.1,
                actual.2,
                self.name,
                expected.join(" or ")
            ));
        }
    }
}

/// Load a dataset file; `.csv` is parsed as CSV, anything else as FASTA.
pub fn load_dataset(name: &str, path: &Path, registry: &DatasetRegistry) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let records = if is_csv {
        parse_labeled_csv(&text)?
    } else {
        parse_fasta(&text)?
    };
    let mut ds = Dataset::new(name, records)?;
    ds.check_registry(registry);
    for w in &ds.warnings {
        log::warn!("{w}");
    }
    Ok(ds)
}
