//! Multilayer perceptron over a flat parameter vector.
//!
//! Parameters live in one contiguous `Vec<f64>` so optimizers, target-network
//! copies and Polyak averaging are plain slice operations. The layout is:
//! the optional embedding table (`vocab x dim`, row-major), then for every
//! dense layer its weights (`out x in`, row-major) followed by its biases.
//!
//! Raw inputs may mark some positions as integer indices. Those are looked up
//! in the shared embedding table and their vectors are placed, in position
//! order, ahead of the remaining numeric inputs to form the first dense input.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::error::{Result, RlError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    /// Number of rows, including the reserved out-of-vocabulary row 0.
    pub vocab: usize,
    pub dim: usize,
    /// Positions of the raw input that carry integer indices.
    pub index_inputs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    #[serde(default)]
    pub embedding: Option<EmbeddingSpec>,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: &[usize], output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: hidden.to_vec(),
            output_dim,
            embedding: None,
        }
    }

    pub fn with_embedding(mut self, vocab: usize, dim: usize, index_inputs: &[usize]) -> Self {
        self.embedding = Some(EmbeddingSpec {
            vocab,
            dim,
            index_inputs: index_inputs.to_vec(),
        });
        self
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(RlError::InvalidArgument(
                "layer sizes must be positive".into(),
            ));
        }
        if let Some(e) = &self.embedding {
            if e.vocab == 0 || e.dim == 0 {
                return Err(RlError::InvalidArgument(
                    "embedding vocab and dim must be positive".into(),
                ));
            }
            let mut seen = vec![false; self.input_dim];
            for &p in &e.index_inputs {
                if p >= self.input_dim || seen[p] {
                    return Err(RlError::InvalidArgument(format!(
                        "bad embedding index position {p}"
                    )));
                }
                seen[p] = true;
            }
        }
        Ok(())
    }

    /// Width of the first dense layer's input.
    pub fn dense_input_dim(&self) -> usize {
        match &self.embedding {
            None => self.input_dim,
            Some(e) => self.input_dim - e.index_inputs.len() + e.index_inputs.len() * e.dim,
        }
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.dense_input_dim();
        for &h in &self.hidden {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims.push((fan_in, self.output_dim));
        dims
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct DenseLayout {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    bias: usize,
}

/// Activations recorded by a forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    indices: Vec<usize>,
    /// `acts[0]` is the dense input; `acts[l + 1]` is the output of layer `l`.
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace always has an output")
    }

    /// Embedding rows read by this pass.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// Gradient accumulator that remembers which embedding rows it wrote, so
/// clearing it and stepping the optimizer skip the untouched table rows.
#[derive(Debug, Clone)]
pub struct GradBuffer {
    values: Vec<f64>,
    rows: Vec<usize>,
    dense_from: usize,
    row_len: usize,
}

impl GradBuffer {
    pub fn for_net(net: &Mlp) -> Self {
        Self {
            values: vec![0.0; net.num_params()],
            rows: Vec::new(),
            dense_from: net.embedding_len,
            row_len: net.spec.embedding.as_ref().map_or(1, |e| e.dim),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Zeroes everything written since the last clear.
    pub fn clear(&mut self) {
        for &r in &self.rows {
            self.values[r * self.row_len..(r + 1) * self.row_len].fill(0.0);
        }
        self.rows.clear();
        self.values[self.dense_from..].fill(0.0);
    }

    /// Records the rows a backward pass over `trace` writes into.
    pub fn note(&mut self, trace: &Trace) {
        self.rows.extend_from_slice(&trace.indices);
    }

    pub fn apply(&mut self, opt: &mut Adam, params: &mut [f64]) -> Result<()> {
        self.rows.sort_unstable();
        self.rows.dedup();
        opt.step_rows(params, &self.values, self.dense_from, self.row_len, &self.rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<f64>,
    layers: Vec<DenseLayout>,
    embedding_len: usize,
    /// Raw positions that are numeric, in order.
    numeric_inputs: Vec<usize>,
}

impl Mlp {
    /// All-zero parameters.
    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let embedding_len = spec.embedding.as_ref().map_or(0, |e| e.vocab * e.dim);
        let mut offset = embedding_len;
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let l = DenseLayout {
                    fan_in,
                    fan_out,
                    weights: offset,
                    bias: offset + fan_in * fan_out,
                };
                offset = l.bias + fan_out;
                l
            })
            .collect();
        let numeric_inputs = match &spec.embedding {
            None => (0..spec.input_dim).collect(),
            Some(e) => (0..spec.input_dim)
                .filter(|p| !e.index_inputs.contains(p))
                .collect(),
        };
        Ok(Self {
            spec,
            params: vec![0.0; offset],
            layers,
            embedding_len,
            numeric_inputs,
        })
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) dense weights and biases,
    /// standard-normal embedding rows.
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        if net.embedding_len > 0 {
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            for p in &mut net.params[..net.embedding_len] {
                *p = normal.sample(rng);
            }
        }
        for l in net.layers.clone() {
            let bound = 1.0 / (l.fan_in as f64).sqrt();
            let u = Uniform::new_inclusive(-bound, bound);
            for p in &mut net.params[l.weights..l.bias + l.fan_out] {
                *p = u.sample(rng);
            }
        }
        Ok(net)
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Mutable `(weights, biases)` of dense layer `layer`; weights are `out x in` row-major.
    pub fn layer_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let l = self.layers[layer];
        let (w, rest) = self.params[l.weights..].split_at_mut(l.fan_in * l.fan_out);
        (w, &mut rest[..l.fan_out])
    }

    pub fn embedding_mut(&mut self) -> &mut [f64] {
        &mut self.params[..self.embedding_len]
    }

    /// Copies another network's parameters; both must share a spec.
    pub fn copy_from(&mut self, other: &Mlp) {
        assert_eq!(self.spec, other.spec, "copy between different architectures");
        self.params.copy_from_slice(&other.params);
    }

    /// `self = (1 - tau) * self + tau * other`.
    pub fn soft_update_from(&mut self, other: &Mlp, tau: f64) {
        assert_eq!(self.spec, other.spec, "soft update between different architectures");
        for (t, s) in self.params.iter_mut().zip(&other.params) {
            *t += tau * (s - *t);
        }
    }

    fn dense_input(&self, input: &[f64], indices: &mut Vec<usize>) -> Result<Vec<f64>> {
        if input.len() != self.spec.input_dim {
            return Err(RlError::DimensionMismatch {
                what: "network input",
                expected: self.spec.input_dim,
                got: input.len(),
            });
        }
        let mut x = Vec::with_capacity(self.spec.dense_input_dim());
        if let Some(e) = &self.spec.embedding {
            for &p in &e.index_inputs {
                let v = input[p];
                if !(v >= 0.0 && v.fract() == 0.0 && (v as usize) < e.vocab) {
                    return Err(RlError::IndexOutOfRange {
                        position: p,
                        value: v,
                        vocab: e.vocab,
                    });
                }
                let row = v as usize;
                indices.push(row);
                x.extend_from_slice(&self.params[row * e.dim..(row + 1) * e.dim]);
            }
        }
        x.extend(self.numeric_inputs.iter().map(|&p| input[p]));
        Ok(x)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut indices = Vec::new();
        let mut x = self.dense_input(input, &mut indices)?;
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut y = self.affine(l, &x);
            if i != last {
                relu(&mut y);
            }
            x = y;
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        let mut indices = Vec::new();
        let x0 = self.dense_input(input, &mut indices)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x0);
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut y = self.affine(l, acts.last().unwrap());
            if i != last {
                relu(&mut y);
            }
            acts.push(y);
        }
        Ok(Trace { indices, acts })
    }

    fn affine(&self, l: &DenseLayout, x: &[f64]) -> Vec<f64> {
        let w = &self.params[l.weights..l.bias];
        let b = &self.params[l.bias..l.bias + l.fan_out];
        w.chunks_exact(l.fan_in)
            .zip(b)
            .map(|(row, bias)| dot(row, x) + bias)
            .collect()
    }

    /// Backpropagates `output_grad` (dL/d output) through the recorded pass.
    ///
    /// Parameter gradients are accumulated into `grads` when given, so a batch
    /// can be summed into one buffer. Returns dL/d raw input; index positions
    /// report zero because their gradient flows into the embedding rows.
    pub fn backward(
        &self,
        trace: &Trace,
        output_grad: &[f64],
        mut grads: Option<&mut [f64]>,
    ) -> Result<Vec<f64>> {
        if output_grad.len() != self.spec.output_dim {
            return Err(RlError::DimensionMismatch {
                what: "output gradient",
                expected: self.spec.output_dim,
                got: output_grad.len(),
            });
        }
        if let Some(g) = grads.as_deref() {
            if g.len() != self.params.len() {
                return Err(RlError::DimensionMismatch {
                    what: "gradient buffer",
                    expected: self.params.len(),
                    got: g.len(),
                });
            }
        }
        if trace.acts.len() != self.layers.len() + 1 {
            return Err(RlError::DimensionMismatch {
                what: "trace depth",
                expected: self.layers.len() + 1,
                got: trace.acts.len(),
            });
        }

        let mut delta = output_grad.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let x = &trace.acts[i];
            if let Some(g) = grads.as_deref_mut() {
                let (gw, gb) = g[l.weights..l.bias + l.fan_out].split_at_mut(l.fan_in * l.fan_out);
                for ((row, gbias), &d) in gw.chunks_exact_mut(l.fan_in).zip(gb.iter_mut()).zip(&delta) {
                    if d != 0.0 {
                        axpy(d, x, row);
                        *gbias += d;
                    }
                }
            }
            let w = &self.params[l.weights..l.bias];
            let mut dx = vec![0.0; l.fan_in];
            for (row, &d) in w.chunks_exact(l.fan_in).zip(&delta) {
                if d != 0.0 {
                    axpy(d, row, &mut dx);
                }
            }
            if i > 0 {
                // ReLU mask from the post-activation of the layer below.
                for (g, &a) in dx.iter_mut().zip(&trace.acts[i]) {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            delta = dx;
        }

        let mut input_grad = vec![0.0; self.spec.input_dim];
        let mut cursor = 0;
        if let Some(e) = &self.spec.embedding {
            for &row in &trace.indices {
                if let Some(g) = grads.as_deref_mut() {
                    axpy(1.0, &delta[cursor..cursor + e.dim], &mut g[row * e.dim..(row + 1) * e.dim]);
                }
                cursor += e.dim;
            }
        }
        for (&p, &d) in self.numeric_inputs.iter().zip(&delta[cursor..]) {
            input_grad[p] = d;
        }
        Ok(input_grad)
    }
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Four-lane dot product; the fixed summation order keeps results reproducible.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
