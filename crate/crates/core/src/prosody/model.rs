//! Emotion-conditioned 1-D CNN shared by the duration and pitch predictors.
//!
//! Each timestep's input is the unit embedding concatenated with the utterance
//! emotion embedding. A stack of same-padded convolutions with `tanh`
//! activations runs over the time axis, then an affine head maps every
//! timestep to one output (duration) or `d` logits (pitch bins).
//!
//! Parameters live in one flat vector, in this order:
//!
//! 1. unit embedding table, `[K][E]`
//! 2. for every conv layer: weights `[C_out][kernel][C_in]`, then bias `[C_out]`
//! 3. head weights `[out][C_last]`, then head bias `[out]`

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmotionEmbedding, EMOTION_DIM};
use crate::error::{Error, Result};
use crate::unit_codec::check_units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictorKind {
    Duration,
    Pitch,
}

impl PredictorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictorKind::Duration => "duration",
            PredictorKind::Pitch => "pitch",
        }
    }
}

impl std::str::FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "duration" => Ok(PredictorKind::Duration),
            "pitch" => Ok(PredictorKind::Pitch),
            other => Err(Error::invalid(format!("unknown predictor kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub kind: PredictorKind,
    /// Codebook size K.
    pub num_units: usize,
    /// Unit embedding dimension E.
    pub unit_dim: usize,
    pub kernel: usize,
    pub channels: Vec<usize>,
    /// 1 for durations, d for pitch bins.
    pub out_dim: usize,
}

impl Architecture {
    pub const DEFAULT_UNIT_DIM: usize = 32;
    pub const DEFAULT_KERNEL: usize = 3;
    pub const DEFAULT_CHANNELS: [usize; 2] = [64, 64];

    pub fn duration(num_units: usize) -> Self {
        Self {
            kind: PredictorKind::Duration,
            num_units,
            unit_dim: Self::DEFAULT_UNIT_DIM,
            kernel: Self::DEFAULT_KERNEL,
            channels: Self::DEFAULT_CHANNELS.to_vec(),
            out_dim: 1,
        }
    }

    pub fn pitch(num_units: usize, bins: usize) -> Self {
        Self {
            kind: PredictorKind::Pitch,
            out_dim: bins,
            ..Self::duration(num_units)
        }
    }

    pub fn with_unit_dim(mut self, unit_dim: usize) -> Self {
        self.unit_dim = unit_dim;
        self
    }

    pub fn with_channels(mut self, channels: Vec<usize>) -> Self {
        self.channels = channels;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.unit_dim + EMOTION_DIM
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_units == 0 || self.unit_dim == 0 || self.out_dim == 0 {
            return Err(Error::invalid("architecture sizes must be positive"));
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(Error::invalid("kernel width must be odd"));
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::invalid("need at least one conv layer with positive width"));
        }
        if self.kind == PredictorKind::Duration && self.out_dim != 1 {
            return Err(Error::invalid("duration head has exactly one output"));
        }
        Ok(())
    }

    fn layout(&self) -> Layout {
        let mut offset = 0;
        let mut take = |n: usize| {
            let r = offset..offset + n;
            offset += n;
            r
        };
        let embedding = take(self.num_units * self.unit_dim);
        let mut convs = Vec::with_capacity(self.channels.len());
        let mut c_in = self.input_dim();
        for &c_out in &self.channels {
            let w = take(c_out * self.kernel * c_in);
            let b = take(c_out);
            convs.push(ConvLayout { w, b, c_in, c_out });
            c_in = c_out;
        }
        let head_w = take(self.out_dim * c_in);
        let head_b = take(self.out_dim);
        Layout {
            embedding,
            convs,
            head_w,
            head_b,
            total: offset,
        }
    }

    pub fn num_params(&self) -> usize {
        self.layout().total
    }
}

#[derive(Debug, Clone)]
struct ConvLayout {
    w: Range<usize>,
    b: Range<usize>,
    c_in: usize,
    c_out: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    embedding: Range<usize>,
    convs: Vec<ConvLayout>,
    head_w: Range<usize>,
    head_b: Range<usize>,
    total: usize,
}

/// Named parameter blocks, in storage order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: String,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    arch: Architecture,
    layout_total: usize,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
pub(crate) struct Trace {
    len: usize,
    /// Input of every conv layer plus the final hidden layer, each `[T][C]`.
    acts: Vec<Vec<f64>>,
    /// Head outputs, `[T][out]`.
    pub(crate) out: Vec<f64>,
}

impl PredictorModel {
    /// Seeded initialization: embeddings uniform in `[-0.5, 0.5]`, weights
    /// uniform with variance `1 / fan_in`, biases zero.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; layout.total];
        // Unit variance, comparable to a standardized emotion vector.
        let e = 3f64.sqrt();
        for p in &mut params[layout.embedding.clone()] {
            *p = rng.random_range(-e..e);
        }
        for conv in &layout.convs {
            let a = (3.0 / (conv.c_in * arch.kernel) as f64).sqrt();
            for p in &mut params[conv.w.clone()] {
                *p = rng.random_range(-a..a);
            }
        }
        let last = *arch.channels.last().expect("validated");
        let a = (3.0 / last as f64).sqrt();
        for p in &mut params[layout.head_w.clone()] {
            *p = rng.random_range(-a..a);
        }
        Ok(Self {
            layout_total: layout.total,
            arch,
            params,
        })
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let total = arch.num_params();
        if params.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("model parameters must be finite"));
        }
        Ok(Self {
            arch,
            layout_total: total,
            params,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn kind(&self) -> PredictorKind {
        self.arch.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.layout_total
    }

    pub fn param_blocks(&self) -> Vec<ParamBlock> {
        let layout = self.arch.layout();
        let mut blocks = vec![ParamBlock {
            name: "unit_embedding".into(),
            range: layout.embedding,
        }];
        for (i, c) in layout.convs.into_iter().enumerate() {
            blocks.push(ParamBlock {
                name: format!("conv{i}.weight"),
                range: c.w,
            });
            blocks.push(ParamBlock {
                name: format!("conv{i}.bias"),
                range: c.b,
            });
        }
        blocks.push(ParamBlock {
            name: "head.weight".into(),
            range: layout.head_w,
        });
        blocks.push(ParamBlock {
            name: "head.bias".into(),
            range: layout.head_b,
        });
        blocks
    }

    /// Embedding vector of one unit.
    pub fn unit_embedding(&self, unit: u32) -> &[f64] {
        let e = self.arch.unit_dim;
        let start = unit as usize * e;
        &self.params[start..start + e]
    }

    /// The full `K x E` embedding table, row-major.
    pub fn unit_embedding_table(&self) -> &[f64] {
        &self.params[..self.arch.num_units * self.arch.unit_dim]
    }

    pub(crate) fn check_inputs(&self, units: &[u32]) -> Result<()> {
        check_units(units, self.arch.num_units)
    }

    /// Raw head outputs, `[T][out_dim]` row-major.
    pub fn forward(&self, units: &[u32], emotion: &EmotionEmbedding) -> Result<Vec<f64>> {
        self.check_inputs(units)?;
        Ok(self.trace(units, emotion).out)
    }

    pub(crate) fn trace(&self, units: &[u32], emotion: &EmotionEmbedding) -> Trace {
        let arch = &self.arch;
        let layout = arch.layout();
        let t_len = units.len();
        let c0 = arch.input_dim();
        let mut x = vec![0.0; t_len * c0];
        for (t, &u) in units.iter().enumerate() {
            let row = &mut x[t * c0..(t + 1) * c0];
            row[..arch.unit_dim].copy_from_slice(self.unit_embedding(u));
            row[arch.unit_dim..].copy_from_slice(emotion.values());
        }
        let mut acts = vec![x];
        let half = arch.kernel / 2;
        for conv in &layout.convs {
            let input = acts.last().expect("non-empty");
            let w = &self.params[conv.w.clone()];
            let b = &self.params[conv.b.clone()];
            let mut out = vec![0.0; t_len * conv.c_out];
            for t in 0..t_len {
                let row = &mut out[t * conv.c_out..(t + 1) * conv.c_out];
                row.copy_from_slice(b);
                for k in 0..arch.kernel {
                    let Some(src) = (t + k).checked_sub(half).filter(|&s| s < t_len) else {
                        continue;
                    };
                    let xin = &input[src * conv.c_in..(src + 1) * conv.c_in];
                    for (o, acc) in row.iter_mut().enumerate() {
                        let wk = &w[(o * arch.kernel + k) * conv.c_in..][..conv.c_in];
                        *acc += dot(wk, xin);
                    }
                }
                for v in row.iter_mut() {
                    *v = v.tanh();
                }
            }
            acts.push(out);
        }
        let hidden = acts.last().expect("non-empty");
        let c_last = *arch.channels.last().expect("validated");
        let hw = &self.params[layout.head_w.clone()];
        let hb = &self.params[layout.head_b.clone()];
        let mut out = vec![0.0; t_len * arch.out_dim];
        for t in 0..t_len {
            let h = &hidden[t * c_last..(t + 1) * c_last];
            for j in 0..arch.out_dim {
                out[t * arch.out_dim + j] = hb[j] + dot(&hw[j * c_last..(j + 1) * c_last], h);
            }
        }
        Trace { len: t_len, acts, out }
    }

    /// Accumulates into `grad` the gradient of a loss whose derivative with
    /// respect to the head outputs is `d_out` (`[T][out_dim]`).
    pub(crate) fn backward(&self, units: &[u32], trace: &Trace, d_out: &[f64], grad: &mut [f64]) {
        let arch = &self.arch;
        let layout = arch.layout();
        let t_len = trace.len;
        let c_last = *arch.channels.last().expect("validated");
        let hidden = trace.acts.last().expect("non-empty");

        let hw = &self.params[layout.head_w.clone()];
        let mut d_h = vec![0.0; t_len * c_last];
        {
            let (before_b, gb) = grad.split_at_mut(layout.head_b.start);
            let gw = &mut before_b[layout.head_w.clone()];
            let gb = &mut gb[..arch.out_dim];
            for t in 0..t_len {
                let h = &hidden[t * c_last..(t + 1) * c_last];
                let dh = &mut d_h[t * c_last..(t + 1) * c_last];
                for j in 0..arch.out_dim {
                    let g = d_out[t * arch.out_dim + j];
                    if g == 0.0 {
                        continue;
                    }
                    gb[j] += g;
                    axpy(g, h, &mut gw[j * c_last..(j + 1) * c_last]);
                    axpy(g, &hw[j * c_last..(j + 1) * c_last], dh);
                }
            }
        }

        let half = arch.kernel / 2;
        for (l, conv) in layout.convs.iter().enumerate().rev() {
            let out = &trace.acts[l + 1];
            let input = &trace.acts[l];
            // Through tanh.
            let d_pre: Vec<f64> = d_h.iter().zip(out).map(|(g, y)| g * (1.0 - y * y)).collect();
            let w = &self.params[conv.w.clone()];
            let mut d_in = vec![0.0; t_len * conv.c_in];
            for t in 0..t_len {
                let dp = &d_pre[t * conv.c_out..(t + 1) * conv.c_out];
                for (gb, &g) in grad[conv.b.clone()].iter_mut().zip(dp) {
                    *gb += g;
                }
                for k in 0..arch.kernel {
                    let Some(src) = (t + k).checked_sub(half).filter(|&s| s < t_len) else {
                        continue;
                    };
                    let xin = &input[src * conv.c_in..(src + 1) * conv.c_in];
                    for (o, &g) in dp.iter().enumerate() {
                        if g == 0.0 {
                            continue;
                        }
                        let off = (o * arch.kernel + k) * conv.c_in;
                        axpy(g, xin, &mut grad[conv.w.start + off..conv.w.start + off + conv.c_in]);
                        axpy(
                            g,
                            &w[off..off + conv.c_in],
                            &mut d_in[src * conv.c_in..(src + 1) * conv.c_in],
                        );
                    }
                }
            }
            d_h = d_in;
        }

        // d_h now holds the gradient of the input rows; the emotion part is not
        // a parameter.
        let c0 = arch.input_dim();
        let e = arch.unit_dim;
        for (t, &u) in units.iter().enumerate() {
            let start = layout.embedding.start + u as usize * e;
            for (g, d) in grad[start..start + e].iter_mut().zip(&d_h[t * c0..t * c0 + e]) {
                *g += d;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes() {
        let arch = Architecture::duration(10);
        // 10*32 + (128*3*64 + 64) + (64*3*64 + 64) + (64 + 1)
        assert_eq!(arch.num_params(), 320 + 24640 + 12352 + 65);
        let model = PredictorModel::new(arch, 0).unwrap();
        let blocks = model.param_blocks();
        assert_eq!(blocks.len(), 7);
        assert_eq!(blocks.last().unwrap().range.end, model.num_params());
    }

    #[test]
    fn same_seed_same_params() {
        let a = PredictorModel::new(Architecture::pitch(8, 4), 9).unwrap();
        let b = PredictorModel::new(Architecture::pitch(8, 4), 9).unwrap();
        let c = PredictorModel::new(Architecture::pitch(8, 4), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_architectures() {
        assert!(Architecture::duration(0).validate().is_err());
        assert!(Architecture::duration(4).with_channels(vec![]).validate().is_err());
        let mut even = Architecture::duration(4);
        even.kernel = 2;
        assert!(even.validate().is_err());
        let mut dur = Architecture::duration(4);
        dur.out_dim = 3;
        assert!(dur.validate().is_err());
    }

    #[test]
    fn forward_shapes_and_range_check() {
        let model = PredictorModel::new(Architecture::pitch(8, 5), 1).unwrap();
        let emo = EmotionEmbedding::zeros();
        assert_eq!(model.forward(&[0, 1, 7], &emo).unwrap().len(), 15);
        assert!(model.forward(&[], &emo).unwrap().is_empty());
        assert!(matches!(
            model.forward(&[8], &emo),
            Err(Error::UnitOutOfRange { unit: 8, k: 8 })
        ));
    }
}
