use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence_io::{residue_index, AMINO_ACIDS};

/// A per-residue numeric index (AAindex-style), stored in alphabetical
/// residue order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyTable {
    pub id: String,
    pub values: [f64; 20],
}

impl PropertyTable {
    pub fn new(id: impl Into<String>, values: [f64; 20]) -> Result<Self> {
        let id = id.into();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Schema(format!(
                "table '{id}': non-finite value for '{}'",
                AMINO_ACIDS[i] as char
            )));
        }
        Ok(PropertyTable { id, values })
    }

    /// Value for a canonical residue byte. Panics on non-canonical input,
    /// which validated sequences never contain.
    #[inline]
    pub fn get(&self, residue: u8) -> f64 {
        self.values[residue_index(residue).expect("canonical residue")]
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        load_property_table(&text)
    }
}

/// Parse the table format: first line is the id, then one
/// `<residue>\t<value>` line per residue in any order.
pub fn load_property_table(text: &str) -> Result<PropertyTable> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, id) = lines
        .next()
        .ok_or_else(|| Error::Schema("empty property table".into()))?;
    let id = id.trim().to_string();

    let mut values = [f64::NAN; 20];
    let mut seen = [false; 20];
    for (line, l) in lines {
        let mut parts = l.split('\t');
        let (Some(res), Some(val), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse {
                line,
                msg: format!("expected '<residue>\\t<value>', got '{l}'"),
            });
        };
        let res = res.trim();
        let idx = match res.as_bytes() {
            [b] => residue_index(b.to_ascii_uppercase()),
            _ => None,
        }
        .ok_or_else(|| Error::Schema(format!("table '{id}': unknown residue '{res}'")))?;
        if seen[idx] {
            return Err(Error::Schema(format!(
                "table '{id}': duplicate residue '{}'",
                AMINO_ACIDS[idx] as char
            )));
        }
        values[idx] = val.trim().parse::<f64>().map_err(|_| Error::Parse {
            line,
            msg: format!("non-numeric value '{}'", val.trim()),
        })?;
        seen[idx] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Schema(format!(
            "table '{id}': missing residue '{}'",
            AMINO_ACIDS[missing] as char
        )));
    }
    PropertyTable::new(id, values)
}

macro_rules! bundled {
    ($($name:ident => $file:literal),* $(,)?) => {
        /// Tables shipped with the crate under `data/tables/`.
        pub mod bundled {
            use super::*;
            $(
                pub fn $name() -> PropertyTable {
                    load_property_table(include_str!(concat!("../../data/tables/", $file)))
                        .expect(concat!("bundled table ", $file))
                }
            )*

            pub fn by_name(name: &str) -> Option<PropertyTable> {
                match name {
                    $(stringify!($name) => Some($name()),)*
                    _ => None,
                }
            }

            pub const NAMES: &[&str] = &[$(stringify!($name)),*];
        }
    };
}

bundled! {
    hydrophobicity_kyte_doolittle => "hydrophobicity_kyte_doolittle.tsv",
    hydrophilicity_hopp_woods => "hydrophilicity_hopp_woods.tsv",
    side_chain_mass => "side_chain_mass.tsv",
    eiip => "eiip.tsv",
    hydrophobicity_eisenberg => "hydrophobicity_eisenberg.tsv",
    residue_mass => "residue_mass.tsv",
    isoelectric_point => "isoelectric_point.tsv",
    net_charge => "net_charge.tsv",
    polarity_grantham => "polarity_grantham.tsv",
    volume_grantham => "volume_grantham.tsv",
    helix_propensity_chou_fasman => "helix_propensity_chou_fasman.tsv",
    sheet_propensity_chou_fasman => "sheet_propensity_chou_fasman.tsv",
}

/// Hydrophobicity, hydrophilicity and side-chain mass.
pub fn default_pseaac_tables() -> Vec<PropertyTable> {
    vec![
        bundled::hydrophobicity_kyte_doolittle(),
        bundled::hydrophilicity_hopp_woods(),
        bundled::side_chain_mass(),
    ]
}

pub fn default_physchem_tables() -> Vec<PropertyTable> {
    vec![
        bundled::hydrophobicity_kyte_doolittle(),
        bundled::hydrophilicity_hopp_woods(),
        bundled::hydrophobicity_eisenberg(),
        bundled::residue_mass(),
        bundled::isoelectric_point(),
        bundled::net_charge(),
        bundled::polarity_grantham(),
        bundled::volume_grantham(),
        bundled::helix_propensity_chou_fasman(),
        bundled::sheet_propensity_chou_fasman(),
    ]
}
