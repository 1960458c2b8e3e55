//! Seeded motif models that generate the bundled synthetic peptide corpus.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::{self, Rng};
use crate::sequence_io::{Dataset, PeptideRecord, AMINO_ACIDS};

/// Residue weights in `ACDEFGHIKLMNPQRSTVWY` order.
const CATIONIC: [f64; 20] = [
    6.0, 1.0, 0.5, 0.5, 5.0, 6.0, 1.5, 6.0, 12.0, 10.0, 1.5, 1.5, 2.0, 1.0, 9.0, 2.0, 2.0, 4.0, 5.0,
    1.0,
];
const BACKGROUND: [f64; 20] = [
    7.0, 1.5, 6.5, 7.5, 3.5, 7.0, 2.5, 5.0, 5.0, 8.5, 2.0, 4.5, 6.0, 4.5, 4.5, 8.0, 5.5, 6.5, 1.0,
    3.0,
];
const POSITIVE_MOTIFS: [&str; 4] = ["KWKLF", "RRWWR", "GLLKKL", "KIAKK"];
const NEGATIVE_MOTIFS: [&str; 4] = ["DEST", "PGSGE", "NQTD", "SPED"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub name: String,
    pub n_pos: usize,
    pub n_neg: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a positive-class residue comes from the cationic
    /// composition rather than the shared background.
    pub separation: f64,
    /// Probability of planting one class motif per sequence.
    pub motif_rate: f64,
    pub seed: u64,
}

impl ToySpec {
    /// The balanced set shipped under `data/toy/`.
    pub fn balanced() -> Self {
        ToySpec {
            name: "toy_balanced".into(),
            n_pos: 100,
            n_neg: 100,
            min_len: 10,
            max_len: 40,
            separation: 0.6,
            motif_rate: 0.5,
            seed: 20_240_501,
        }
    }

    /// The 2:1 imbalanced set shipped under `data/toy/`.
    pub fn imbalanced() -> Self {
        ToySpec {
            name: "toy_imbalanced".into(),
            n_pos: 66,
            n_neg: 134,
            min_len: 10,
            max_len: 40,
            separation: 0.45,
            motif_rate: 0.35,
            seed: 20_240_502,
        }
    }
}

fn sample_sequence(rng: &mut Rng, spec: &ToySpec, positive: bool) -> String {
    let cationic = WeightedIndex::new(CATIONIC).expect("positive weights");
    let background = WeightedIndex::new(BACKGROUND).expect("positive weights");
    let len = rng.random_range(spec.min_len..=spec.max_len);
    let mut seq: Vec<u8> = (0..len)
        .map(|_| {
            let table = if positive && rng.random_bool(spec.separation) {
                &cationic
            } else {
                &background
            };
            AMINO_ACIDS[table.sample(rng)]
        })
        .collect();
    if rng.random_bool(spec.motif_rate) {
        let pool = if positive { &POSITIVE_MOTIFS } else { &NEGATIVE_MOTIFS };
        let motif = pool[rng.random_range(0..pool.len())].as_bytes();
        if motif.len() <= len {
            let at = rng.random_range(0..=len - motif.len());
            seq[at..at + motif.len()].copy_from_slice(motif);
        }
    }
    String::from_utf8(seq).expect("ASCII residues")
}

/// Positives first, then negatives; ids are `<name>_pos_0001` style.
pub fn generate_toy(spec: &ToySpec) -> Result<Dataset> {
    let mut rng = rng::rng(spec.seed);
    let mut records = Vec::with_capacity(spec.n_pos + spec.n_neg);
    for (label, n, tag) in [(1u8, spec.n_pos, "pos"), (0, spec.n_neg, "neg")] {
        for i in 0..n {
            records.push(PeptideRecord {
                id: format!("{}_{tag}_{:04}", spec.name, i + 1),
                sequence: sample_sequence(&mut rng, spec, label == 1),
                label,
            });
        }
    }
    Dataset::new(spec.name.clone(), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_lengths() {
        let ds = generate_toy(&ToySpec::imbalanced()).unwrap();
        assert_eq!((ds.n_pos, ds.n_neg), (66, 134));
        assert!(ds.records.iter().all(|r| (10..=40).contains(&r.sequence.len())));
    }

    #[test]
    fn deterministic() {
        let a = generate_toy(&ToySpec::balanced()).unwrap();
        let b = generate_toy(&ToySpec::balanced()).unwrap();
        assert_eq!(a.records, b.records);
    }
}
