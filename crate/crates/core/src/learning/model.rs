use std::ops::Index;

use rand::Rng;

use super::{check_len, Dataset, LearningError, Result};

/// Flat parameter vector of a model (the agent's estimate).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams(Vec<f64>);

impl ModelParams {
    pub fn new(values: Vec<f64>) -> Self {
        ModelParams(values)
    }

    pub fn zeros(d: usize) -> Self {
        ModelParams(vec![0.0; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Index<usize> for ModelParams {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Softmax classifiers trained with cross-entropy.
///
/// Parameter layout is row-major weights followed by biases, layer by layer:
/// logistic regression is `W[classes x input] | b[classes]`; the MLP is
/// `W1[hidden x input] | b1[hidden] | W2[classes x hidden] | b2[classes]`
/// with a ReLU hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Logistic { input: usize, classes: usize },
    Mlp { input: usize, hidden: usize, classes: usize },
}

impl Model {
    pub const DEFAULT_HIDDEN: usize = 100;

    pub fn input_dim(&self) -> usize {
        match *self {
            Model::Logistic { input, .. } | Model::Mlp { input, .. } => input,
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            Model::Logistic { classes, .. } | Model::Mlp { classes, .. } => classes,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            Model::Logistic { input, classes } => classes * input + classes,
            Model::Mlp { input, hidden, classes } => {
                hidden * input + hidden + classes * hidden + classes
            }
        }
    }

    /// Uniform initialization in `±1/sqrt(fan_in)` per layer.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelParams {
        let mut values = Vec::with_capacity(self.param_count());
        let mut layer = |rows: usize, fan_in: usize, values: &mut Vec<f64>| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..rows * fan_in + rows {
                values.push(rng.random_range(-bound..=bound));
            }
        };
        match *self {
            Model::Logistic { input, classes } => layer(classes, input, &mut values),
            Model::Mlp { input, hidden, classes } => {
                layer(hidden, input, &mut values);
                layer(classes, hidden, &mut values);
            }
        }
        ModelParams(values)
    }

    fn check(&self, params: &ModelParams, data: &Dataset) -> Result<()> {
        check_len(self.param_count(), params.len())?;
        check_len(self.input_dim(), data.dim())?;
        if data.classes() > self.classes() {
            return Err(LearningError::DimensionMismatch {
                expected: self.classes(),
                got: data.classes(),
            });
        }
        Ok(())
    }

    /// Class scores for one sample; `hidden_out` receives the post-ReLU
    /// activations for the MLP.
    fn forward(&self, p: &[f64], x: &[f64], hidden_out: &mut Vec<f64>) -> Vec<f64> {
        match *self {
            Model::Logistic { input, classes } => affine(p, 0, classes, input, x),
            Model::Mlp { input, hidden, classes } => {
                let mut h = affine(p, 0, hidden, input, x);
                for v in &mut h {
                    *v = v.max(0.0);
                }
                let offset = hidden * input + hidden;
                let out = affine(p, offset, classes, hidden, &h);
                *hidden_out = h;
                out
            }
        }
    }

    pub fn logits(&self, params: &ModelParams, x: &[f64]) -> Vec<f64> {
        self.forward(params.as_slice(), x, &mut Vec::new())
    }

    pub fn predict(&self, params: &ModelParams, x: &[f64]) -> usize {
        argmax(&self.logits(params, x))
    }

    /// Mean cross-entropy over the rows of `data` listed in `batch`.
    pub fn loss(&self, params: &ModelParams, data: &Dataset, batch: &[usize]) -> Result<f64> {
        self.check(params, data)?;
        if batch.is_empty() {
            return Err(LearningError::EmptyBatch);
        }
        let mut total = 0.0;
        for &r in batch {
            let z = self.logits(params, data.row(r));
            total += log_sum_exp(&z) - z[data.label(r)];
        }
        Ok(total / batch.len() as f64)
    }

    /// Gradient of [`Model::loss`] with respect to the parameters.
    pub fn gradient(&self, params: &ModelParams, data: &Dataset, batch: &[usize]) -> Result<Vec<f64>> {
        self.check(params, data)?;
        if batch.is_empty() {
            return Err(LearningError::EmptyBatch);
        }
        let p = params.as_slice();
        let mut grad = vec![0.0; p.len()];
        let mut h = Vec::new();
        for &r in batch {
            let x = data.row(r);
            let z = self.forward(p, x, &mut h);
            let mut delta = softmax(&z);
            delta[data.label(r)] -= 1.0;
            match *self {
                Model::Logistic { input, classes } => {
                    accumulate_affine(&mut grad, 0, classes, input, x, &delta);
                }
                Model::Mlp { input, hidden, classes } => {
                    let offset = hidden * input + hidden;
                    accumulate_affine(&mut grad, offset, classes, hidden, &h, &delta);
                    let w2 = &p[offset..offset + classes * hidden];
                    let back: Vec<f64> = (0..hidden)
                        .map(|u| {
                            if h[u] > 0.0 {
                                (0..classes).map(|c| w2[c * hidden + u] * delta[c]).sum()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    accumulate_affine(&mut grad, 0, hidden, input, x, &back);
                }
            }
        }
        let scale = 1.0 / batch.len() as f64;
        for g in &mut grad {
            *g *= scale;
        }
        Ok(grad)
    }
}

/// `W x + b` for the layer whose weights start at `offset`.
fn affine(p: &[f64], offset: usize, rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    let w = &p[offset..offset + rows * cols];
    let b = &p[offset + rows * cols..offset + rows * cols + rows];
    (0..rows)
        .map(|r| {
            let row = &w[r * cols..(r + 1) * cols];
            b[r] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
        })
        .collect()
}

fn accumulate_affine(
    grad: &mut [f64],
    offset: usize,
    rows: usize,
    cols: usize,
    x: &[f64],
    delta: &[f64],
) {
    for r in 0..rows {
        let d = delta[r];
        if d == 0.0 {
            continue;
        }
        let row = &mut grad[offset + r * cols..offset + (r + 1) * cols];
        for (g, v) in row.iter_mut().zip(x) {
            *g += d * v;
        }
        grad[offset + rows * cols + r] += d;
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest score; ties go to the lowest index.
fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = i;
        }
    }
    best
}

/// Fraction of `testset` rows whose argmax prediction matches the label.
pub fn evaluate_accuracy(model: &Model, params: &ModelParams, testset: &Dataset) -> Result<f64> {
    if testset.is_empty() {
        return Err(LearningError::EmptyDataset);
    }
    model.check(params, testset)?;
    let correct = (0..testset.len())
        .filter(|&r| model.predict(params, testset.row(r)) == testset.label(r))
        .count();
    Ok(correct as f64 / testset.len() as f64)
}
