#![allow(dead_code)]

use std::path::PathBuf;

use ampgan::encoding::{BlockSchema, FeatureMatrix};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Class 1 around `(sep, sep)`, class 0 around `(-sep, -sep)`, unit variance.
/// Positives come first.
pub fn blobs(n_pos: usize, n_neg: usize, sep: f64, seed: u64) -> (Array2<f64>, Vec<u8>) {
    let mut r = rng(seed);
    let n = n_pos + n_neg;
    let y: Vec<u8> = (0..n).map(|i| u8::from(i < n_pos)).collect();
    let x = Array2::from_shape_fn((n, 2), |(i, _)| {
        let z: f64 = StandardNormal.sample(&mut r);
        if y[i] == 1 {
            sep + z
        } else {
            -sep + z
        }
    });
    (x, y)
}

pub fn feature_matrix(x: Array2<f64>, y: Vec<u8>) -> FeatureMatrix {
    let mut schema = BlockSchema::default();
    schema.push("x", x.ncols());
    FeatureMatrix {
        row_ids: (0..y.len()).map(|i| format!("r{i}")).collect(),
        rows: x,
        schema,
        labels: y,
    }
}

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn toy_dir() -> PathBuf {
    repo_root().join("data/toy")
}

pub fn random_sequence(r: &mut ChaCha8Rng, min_len: usize, max_len: usize) -> String {
    use rand::Rng;
    let len = r.random_range(min_len..=max_len);
    (0..len)
        .map(|_| ampgan::sequence_io::AMINO_ACIDS[r.random_range(0..20)] as char)
        .collect()
}
