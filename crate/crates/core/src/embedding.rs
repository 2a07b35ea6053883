//! Model dimensions, sinusoidal position and time encodings, and word-vector
//! files.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Vocab;
use crate::error::{Error, Result};
use crate::graph::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalMode {
    #[default]
    Sinusoidal,
    /// Every temporal embedding is the zero vector.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodingConfig {
    pub h: usize,
    pub h_temp: usize,
    pub h_tau: usize,
    pub h_auto: usize,
    pub h_node: usize,
    pub temporal_mode: TemporalMode,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            h: 64,
            h_temp: 16,
            h_tau: 16,
            h_auto: 128,
            h_node: 16,
            temporal_mode: TemporalMode::Sinusoidal,
        }
    }
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [self.h, self.h_temp, self.h_tau, self.h_auto, self.h_node];
        if dims.contains(&0) {
            return Err(Error::Invalid("model dimensions must be positive".into()));
        }
        if !self.h.is_multiple_of(2) || !self.h_temp.is_multiple_of(2) {
            return Err(Error::Invalid("h and h_temp must be even".into()));
        }
        Ok(())
    }

    /// Width of node and edge attribute rows.
    pub fn attr_dim(&self) -> usize {
        self.h + self.h_temp
    }

    /// Width of an event embedding.
    pub fn event_dim(&self) -> usize {
        self.h_tau + 3 * self.h
    }
}

/// Sinusoidal encoding of `position`: entry `2i` is `sin(p / 10000^(2i/dim))`
/// and entry `2i + 1` the matching cosine.
pub fn positional_encoding(position: usize, dim: usize) -> Vec<f64> {
    let mut pe = vec![0.0; dim];
    for i in (0..dim).step_by(2) {
        let angle = position as f64 / 10000f64.powf(i as f64 / dim as f64);
        pe[i] = angle.sin();
        if i + 1 < dim {
            pe[i + 1] = angle.cos();
        }
    }
    pe
}

/// `[pe(t_g); pe(t_e)]`, each half `h_temp / 2` wide, or zeros in
/// [`TemporalMode::Zero`].
pub fn temporal_embedding(ts: Timestamp, config: &EncodingConfig) -> Vec<f64> {
    match config.temporal_mode {
        TemporalMode::Zero => vec![0.0; config.h_temp],
        TemporalMode::Sinusoidal => {
            let half = config.h_temp / 2;
            let mut v = positional_encoding(ts.game_step as usize, half);
            v.extend(positional_encoding(ts.event_step as usize, half));
            v
        }
    }
}

/// Reads a text vector file (`word v1 v2 ...` per line, optional `count dim`
/// header as in fastText `.vec` files) and returns the vectors of the words in
/// `vocab` as a row-major `|vocab| × dim` matrix, plus how many were found.
/// Missing words get zero rows.
pub fn load_word_vectors(path: &Path, vocab: &Vocab, dim: usize) -> Result<(Vec<f32>, usize)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let wanted: HashMap<&str, usize> = vocab
        .entries()
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i))
        .collect();
    let mut matrix = vec![0.0f32; vocab.len() * dim];
    let mut found = 0;
    for (n, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values: Vec<&str> = parts.collect();
        if n == 0 && values.len() == 1 {
            continue;
        }
        let Some(&row) = wanted.get(word) else { continue };
        if values.len() != dim {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                line: n + 1,
                message: format!("expected {dim} values, found {}", values.len()),
            });
        }
        for (j, v) in values.iter().enumerate() {
            matrix[row * dim + j] = v.parse().map_err(|_| Error::Schema {
                path: path.to_path_buf(),
                line: n + 1,
                message: format!("bad number {v:?}"),
            })?;
        }
        found += 1;
    }
    Ok((matrix, found))
}

/// Stand-in word table drawn from a standard normal, with a zero padding row.
pub fn random_word_vectors(vocab_len: usize, dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrix: Vec<f32> = (0..vocab_len * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let head = dim.min(matrix.len());
    matrix[..head].fill(0.0);
    matrix
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn position_zero_alternates() {
        let pe = positional_encoding(0, 8);
        assert_eq!(pe, [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn matches_closed_form() {
        let pe = positional_encoding(5, 64);
        for i in 0..32 {
            let w = 1.0 / 10000f64.powf(2.0 * i as f64 / 64.0);
            assert!((pe[2 * i] - (5.0 * w).sin()).abs() < 1e-12);
            assert!((pe[2 * i + 1] - (5.0 * w).cos()).abs() < 1e-12);
        }
        assert!(pe.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn temporal_halves_and_zero_mode() {
        let cfg = EncodingConfig::default();
        let v = temporal_embedding(Timestamp::new(3, 7), &cfg);
        assert_eq!(v.len(), 16);
        assert_eq!(&v[..8], positional_encoding(3, 8).as_slice());
        assert_eq!(&v[8..], positional_encoding(7, 8).as_slice());
        let zero = EncodingConfig {
            temporal_mode: TemporalMode::Zero,
            ..cfg
        };
        assert!(temporal_embedding(Timestamp::new(3, 7), &zero)
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn temporal_is_injective_over_range() {
        let cfg = EncodingConfig::default();
        let mut seen: Vec<Vec<f64>> = Vec::new();
        for g in 0..60 {
            for e in 0..40 {
                seen.push(temporal_embedding(Timestamp::new(g, e), &cfg));
            }
        }
        for (i, a) in seen.iter().enumerate() {
            for b in &seen[i + 1..] {
                let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
                assert!(d > 1e-9);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(EncodingConfig::default().validate().is_ok());
        let odd = EncodingConfig {
            h_temp: 15,
            ..EncodingConfig::default()
        };
        assert!(odd.validate().is_err());
    }

    #[test]
    fn vector_file_fills_known_rows() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "3 2\napple 0.5 -1\nzzz 1 1\ntable 2 3").unwrap();
        let mut vocab = Vocab::words();
        vocab.insert("apple");
        vocab.insert("table");
        vocab.insert("chair");
        let (m, found) = load_word_vectors(f.path(), &vocab, 2).unwrap();
        assert_eq!(found, 2);
        assert_eq!(m, [0.0, 0.0, 0.0, 0.0, 0.5, -1.0, 2.0, 3.0, 0.0, 0.0]);
        assert!(load_word_vectors(f.path(), &vocab, 3).is_err());
    }
}
