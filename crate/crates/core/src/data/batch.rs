use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Datapoint, Vocabularies};

/// Row-major `rows × width` grid of token ids padded with 0, plus true lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenGrid {
    pub ids: Vec<u32>,
    pub lengths: Vec<usize>,
    pub width: usize,
}

impl TokenGrid {
    /// Pads to the longest row, and to at least one column so that an empty
    /// row still has a (fully masked) slot.
    pub fn new(rows: &[Vec<u32>]) -> Self {
        let width = rows.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let mut ids = vec![0; rows.len() * width];
        for (r, row) in rows.iter().enumerate() {
            ids[r * width..r * width + row.len()].copy_from_slice(row);
        }
        Self {
            ids,
            lengths: rows.iter().map(Vec::len).collect(),
            width,
        }
    }

    /// 1.0 at real tokens, 0.0 at padding.
    pub fn mask(&self) -> Vec<f32> {
        let mut m = vec![0.0; self.ids.len()];
        for (r, &len) in self.lengths.iter().enumerate() {
            m[r * self.width..r * self.width + len].fill(1.0);
        }
        m
    }
}

/// Teacher-forcing targets: position `p` of row `b` is target event `p + 1`
/// of example `b` (the event predicted after seeing events `0..=p`).
///
/// Each head mask is 1 exactly where the mask table says the target kind
/// carries that argument; the type mask is 1 at every real position.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetGrid {
    pub width: usize,
    pub kinds: Vec<u32>,
    pub src: Vec<u32>,
    pub dst: Vec<u32>,
    pub labels: Vec<u32>,
    pub type_mask: Vec<f32>,
    pub src_mask: Vec<f32>,
    pub dst_mask: Vec<f32>,
    pub label_mask: Vec<f32>,
}

impl TargetGrid {
    pub fn new(datapoints: &[Arc<Datapoint>], vocab: &Vocabularies) -> Self {
        let width = datapoints.iter().map(|d| d.target_len()).max().unwrap_or(0).max(1);
        let n = datapoints.len() * width;
        let mut grid = Self {
            width,
            kinds: vec![0; n],
            src: vec![0; n],
            dst: vec![0; n],
            labels: vec![0; n],
            type_mask: vec![0.0; n],
            src_mask: vec![0.0; n],
            dst_mask: vec![0.0; n],
            label_mask: vec![0.0; n],
        };
        for (b, dp) in datapoints.iter().enumerate() {
            for (p, ev) in dp.target_events.iter().skip(1).enumerate() {
                let i = b * width + p;
                let mask = ev.kind.mask();
                grid.kinds[i] = ev.kind.id() as u32;
                grid.type_mask[i] = 1.0;
                if let (true, Some(s)) = (mask.src, ev.src) {
                    grid.src[i] = s as u32;
                    grid.src_mask[i] = 1.0;
                }
                if let (true, Some(d)) = (mask.dst, ev.dst) {
                    grid.dst[i] = d as u32;
                    grid.dst_mask[i] = 1.0;
                }
                if let (true, Some(l)) = (mask.label, &ev.label) {
                    grid.labels[i] = vocab.labels.id(l);
                    grid.label_mask[i] = 1.0;
                }
            }
        }
        grid
    }
}

#[derive(Debug, Clone)]
pub struct Batch {
    /// Positions of the examples in the dataset the batch was drawn from.
    pub indices: Vec<usize>,
    pub datapoints: Vec<Arc<Datapoint>>,
    pub obs: TokenGrid,
    pub action: TokenGrid,
    pub targets: TargetGrid,
}

impl Batch {
    pub fn new(indices: Vec<usize>, datapoints: Vec<Arc<Datapoint>>, vocab: &Vocabularies) -> Self {
        let obs: Vec<_> = datapoints.iter().map(|d| vocab.words.ids(&d.obs_tokens)).collect();
        let action: Vec<_> = datapoints.iter().map(|d| vocab.words.ids(&d.action_tokens)).collect();
        let targets = TargetGrid::new(&datapoints, vocab);
        Self {
            indices,
            datapoints,
            obs: TokenGrid::new(&obs),
            action: TokenGrid::new(&action),
            targets,
        }
    }

    pub fn len(&self) -> usize {
        self.datapoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datapoints.is_empty()
    }
}

/// Splits `datapoints` into batches of `batch_size` (the last may be short).
/// With a seed the order is shuffled deterministically; without one it is kept.
pub fn make_batches<'a>(
    datapoints: &'a [Arc<Datapoint>],
    vocab: &'a Vocabularies,
    batch_size: usize,
    shuffle_seed: Option<u64>,
) -> impl Iterator<Item = Batch> + 'a {
    let mut order: Vec<usize> = (0..datapoints.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let batch_size = batch_size.max(1);
    let chunks: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    chunks.into_iter().map(move |indices| {
        let dps = indices.iter().map(|&i| datapoints[i].clone()).collect();
        Batch::new(indices, dps, vocab)
    })
}
