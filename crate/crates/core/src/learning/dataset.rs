use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use super::{LearningError, Result};
use crate::seed::Stream;

/// Samples as rows of a dense feature matrix plus integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(LearningError::InvalidDataset(format!(
                "{} feature values do not form {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(LearningError::InvalidDataset(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(Dataset { features, dim, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// New dataset holding the given rows, in order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        Dataset {
            features,
            dim: self.dim,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            classes: self.classes,
        }
    }

    /// CSV with a `x0,..,x{d-1},label` header and one sample per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.dim)
            .map(|c| format!("x{c}"))
            .chain(std::iter::once("label".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for r in 0..self.len() {
            for v in self.row(r) {
                write!(out, "{v},")?;
            }
            writeln!(out, "{}", self.labels[r])?;
        }
        Ok(())
    }
}

/// Gaussian blobs around `scale * (±e_m)`: class `c` sits on axis
/// `c mod input_dim`, with the sign flipped for every second pass over the
/// axes.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub n_per_class: usize,
    pub classes: usize,
    pub input_dim: usize,
    pub spread: f64,
    pub scale: f64,
    pub seed: u64,
}

impl BlobSpec {
    pub fn center(&self, class: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.input_dim];
        let axis = class % self.input_dim;
        let sign = if (class / self.input_dim) % 2 == 0 { 1.0 } else { -1.0 };
        c[axis] = sign * self.scale;
        c
    }

    pub fn generate(&self) -> Dataset {
        let mut rng = Stream::seed_from_u64(self.seed);
        let n = self.n_per_class * self.classes;
        let mut features = Vec::with_capacity(n * self.input_dim);
        let mut labels = Vec::with_capacity(n);
        for class in 0..self.classes {
            let center = self.center(class);
            for _ in 0..self.n_per_class {
                for &m in &center {
                    features.push(m + self.spread * rng.sample::<f64, _>(StandardNormal));
                }
                labels.push(class);
            }
        }
        Dataset {
            features,
            dim: self.input_dim,
            labels,
            classes: self.classes,
        }
    }
}

/// Unit-scale blobs; see [`BlobSpec`].
pub fn synth_blobs(n_per_class: usize, classes: usize, input_dim: usize, spread: f64, seed: u64) -> Dataset {
    BlobSpec {
        n_per_class,
        classes,
        input_dim,
        spread,
        scale: 1.0,
        seed,
    }
    .generate()
}

/// Shuffles `data` and splits it into `n_agents` disjoint shards whose sizes
/// differ by at most one.
pub fn partition_iid(data: &Dataset, n_agents: usize, seed: u64) -> Vec<Dataset> {
    assert!(n_agents >= 1 && data.len() >= n_agents, "need at least one sample per agent");
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut Stream::seed_from_u64(seed));
    let base = data.len() / n_agents;
    let extra = data.len() % n_agents;
    let mut shards = Vec::with_capacity(n_agents);
    let mut start = 0;
    for a in 0..n_agents {
        let size = base + usize::from(a < extra);
        shards.push(data.subset(&order[start..start + size]));
        start += size;
    }
    shards
}
