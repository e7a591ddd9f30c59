//! The reference target network:
//!
//! ```text
//! S x S x 3 -> conv3x3(16) -> ReLU -> maxpool2
//!           -> conv3x3(32) -> ReLU -> maxpool2 -> flatten -> affine(N)
//! ```
//!
//! Convolutions are stride 1 with replicate padding. Activations are stored
//! channel-last (`(y * w + x) * c + ch`); conv weights are `[out][ky][kx][in]`
//! and the flattened feature index is `(y * w + x) * 32 + ch`. Max-pool routes
//! its gradient to the first maximal element in scan order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const CONV1_OUT: usize = 16;
pub const CONV2_OUT: usize = 32;
pub const IN_CHANNELS: usize = 3;
const K: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCnnWeights {
    pub input_side: usize,
    pub num_classes: usize,
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    pub fc_w: Vec<f64>,
    pub fc_b: Vec<f64>,
}

impl ReferenceCnnWeights {
    pub fn fc_inputs(input_side: usize) -> usize {
        CONV2_OUT * (input_side / 4) * (input_side / 4)
    }

    /// `(name, shape)` of every tensor in storage order.
    pub fn layout(input_side: usize, num_classes: usize) -> [(&'static str, Vec<usize>); 6] {
        [
            ("conv1.weight", vec![CONV1_OUT, K, K, IN_CHANNELS]),
            ("conv1.bias", vec![CONV1_OUT]),
            ("conv2.weight", vec![CONV2_OUT, K, K, CONV1_OUT]),
            ("conv2.bias", vec![CONV2_OUT]),
            ("fc.weight", vec![num_classes, Self::fc_inputs(input_side)]),
            ("fc.bias", vec![num_classes]),
        ]
    }

    pub fn zeros(input_side: usize, num_classes: usize) -> Result<Self> {
        validate_geometry(input_side, num_classes)?;
        let [a, b, c, d, e, f] =
            Self::layout(input_side, num_classes).map(|(_, shape)| vec![0.0; shape.iter().product()]);
        Ok(Self {
            input_side,
            num_classes,
            conv1_w: a,
            conv1_b: b,
            conv2_w: c,
            conv2_b: d,
            fc_w: e,
            fc_b: f,
        })
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init(input_side: usize, num_classes: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut w = Self::zeros(input_side, num_classes)?;
        let mut fill = |v: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for x in v {
                *x = rng.gen_range(-limit..limit);
            }
        };
        fill(&mut w.conv1_w, K * K * IN_CHANNELS, K * K * CONV1_OUT);
        fill(&mut w.conv2_w, K * K * CONV1_OUT, K * K * CONV2_OUT);
        let fc_in = Self::fc_inputs(input_side);
        fill(&mut w.fc_w, fc_in, num_classes);
        Ok(w)
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            &self.conv1_w,
            &self.conv1_b,
            &self.conv2_w,
            &self.conv2_b,
            &self.fc_w,
            &self.fc_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.fc_w,
            &mut self.fc_b,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        validate_geometry(self.input_side, self.num_classes)?;
        let layout = Self::layout(self.input_side, self.num_classes);
        for ((name, shape), t) in layout.iter().zip(self.tensors()) {
            let n: usize = shape.iter().product();
            if t.len() != n {
                return Err(Error::shape(format!("{name} with {n} values"), t.len()));
            }
            if let Some(index) = t.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index });
            }
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.input_side * self.input_side * IN_CHANNELS
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.logits)
    }

    pub(crate) fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        if input.len() != self.input_len() {
            return Err(Error::shape(
                format!("{s}x{s}x3 input", s = self.input_side),
                format!("{} values", input.len()),
            ));
        }
        let s1 = self.input_side;
        let s2 = s1 / 2;
        let s3 = s2 / 2;

        let mut z1 = conv3x3(input, s1, IN_CHANNELS, &self.conv1_w, &self.conv1_b, CONV1_OUT);
        relu(&mut z1);
        let (p1, arg1) = maxpool2(&z1, s1, CONV1_OUT);
        let mut z2 = conv3x3(&p1, s2, CONV1_OUT, &self.conv2_w, &self.conv2_b, CONV2_OUT);
        relu(&mut z2);
        let (p2, arg2) = maxpool2(&z2, s2, CONV2_OUT);
        debug_assert_eq!(p2.len(), s3 * s3 * CONV2_OUT);

        let fc_in = p2.len();
        let logits = (0..self.num_classes)
            .map(|n| {
                let row = &self.fc_w[n * fc_in..(n + 1) * fc_in];
                self.fc_b[n] + dot(row, &p2)
            })
            .collect();
        Ok(Trace {
            input: input.to_vec(),
            a1: z1,
            p1,
            arg1,
            a2: z2,
            p2,
            arg2,
            logits,
        })
    }

    /// Backpropagates `dlogits` through a recorded forward pass. Accumulates
    /// parameter gradients into `grads` when given, and returns the input
    /// gradient when `want_input` is set.
    pub(crate) fn backward(
        &self,
        trace: &Trace,
        dlogits: &[f64],
        mut grads: Option<&mut ReferenceCnnWeights>,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let s1 = self.input_side;
        let s2 = s1 / 2;
        let fc_in = trace.p2.len();

        let mut dp2 = vec![0.0; fc_in];
        for (n, &g) in dlogits.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &self.fc_w[n * fc_in..(n + 1) * fc_in];
            axpy(g, row, &mut dp2);
            if let Some(gr) = grads.as_deref_mut() {
                gr.fc_b[n] += g;
                axpy(g, &trace.p2, &mut gr.fc_w[n * fc_in..(n + 1) * fc_in]);
            }
        }

        let mut da2 = unpool(&dp2, &trace.arg2, s2 * s2 * CONV2_OUT);
        relu_backward(&trace.a2, &mut da2);
        let dp1 = conv3x3_backward(
            &trace.p1,
            s2,
            CONV1_OUT,
            &self.conv2_w,
            CONV2_OUT,
            &da2,
            grads
                .as_deref_mut()
                .map(|g| (&mut g.conv2_w[..], &mut g.conv2_b[..])),
            true,
        )
        .expect("requested");

        let mut da1 = unpool(&dp1, &trace.arg1, s1 * s1 * CONV1_OUT);
        relu_backward(&trace.a1, &mut da1);
        conv3x3_backward(
            &trace.input,
            s1,
            IN_CHANNELS,
            &self.conv1_w,
            CONV1_OUT,
            &da1,
            grads.map(|g| (&mut g.conv1_w[..], &mut g.conv1_b[..])),
            want_input,
        )
    }
}

fn validate_geometry(input_side: usize, num_classes: usize) -> Result<()> {
    if input_side < 4 || !input_side.is_multiple_of(4) {
        return Err(Error::invalid(format!(
            "input side must be a positive multiple of 4, got {input_side}"
        )));
    }
    if num_classes < 2 {
        return Err(Error::invalid(format!("need >= 2 classes, got {num_classes}")));
    }
    Ok(())
}

pub(crate) struct Trace {
    input: Vec<f64>,
    a1: Vec<f64>,
    p1: Vec<f64>,
    arg1: Vec<usize>,
    a2: Vec<f64>,
    p2: Vec<f64>,
    arg2: Vec<usize>,
    pub logits: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four partial sums let the compiler vectorize without reassociating a
    // single long chain.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for j in 0..4 {
            acc[j] += a[4 * i + j] * b[4 * i + j];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Fills `patch` with the replicate-padded 3x3 neighbourhood of `(y, x)`,
/// ordered `[ky][kx][in]`.
#[inline]
fn gather_patch(input: &[f64], side: usize, cin: usize, y: usize, x: usize, patch: &mut [f64]) {
    let mut k = 0;
    for ky in 0..K {
        let sy = clamp_idx(y as isize + ky as isize - 1, side);
        for kx in 0..K {
            let sx = clamp_idx(x as isize + kx as isize - 1, side);
            let base = (sy * side + sx) * cin;
            patch[k..k + cin].copy_from_slice(&input[base..base + cin]);
            k += cin;
        }
    }
}

fn conv3x3(input: &[f64], side: usize, cin: usize, w: &[f64], b: &[f64], cout: usize) -> Vec<f64> {
    let plen = K * K * cin;
    let mut patch = vec![0.0; plen];
    let mut out = vec![0.0; side * side * cout];
    for y in 0..side {
        for x in 0..side {
            gather_patch(input, side, cin, y, x, &mut patch);
            let o = &mut out[(y * side + x) * cout..(y * side + x + 1) * cout];
            for (oc, slot) in o.iter_mut().enumerate() {
                *slot = b[oc] + dot(&w[oc * plen..(oc + 1) * plen], &patch);
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    input: &[f64],
    side: usize,
    cin: usize,
    w: &[f64],
    cout: usize,
    dout: &[f64],
    param_grads: Option<(&mut [f64], &mut [f64])>,
    want_input: bool,
) -> Option<Vec<f64>> {
    let plen = K * K * cin;
    let mut patch = vec![0.0; plen];
    let mut dpatch = vec![0.0; plen];
    let mut din = if want_input {
        Some(vec![0.0; side * side * cin])
    } else {
        None
    };
    let mut param_grads = param_grads;
    for y in 0..side {
        for x in 0..side {
            let g = &dout[(y * side + x) * cout..(y * side + x + 1) * cout];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            if let Some((dw, db)) = param_grads.as_mut() {
                gather_patch(input, side, cin, y, x, &mut patch);
                for (oc, &gv) in g.iter().enumerate() {
                    if gv != 0.0 {
                        db[oc] += gv;
                        axpy(gv, &patch, &mut dw[oc * plen..(oc + 1) * plen]);
                    }
                }
            }
            if let Some(din) = din.as_mut() {
                dpatch.iter_mut().for_each(|v| *v = 0.0);
                for (oc, &gv) in g.iter().enumerate() {
                    if gv != 0.0 {
                        axpy(gv, &w[oc * plen..(oc + 1) * plen], &mut dpatch);
                    }
                }
                let mut k = 0;
                for ky in 0..K {
                    let sy = clamp_idx(y as isize + ky as isize - 1, side);
                    for kx in 0..K {
                        let sx = clamp_idx(x as isize + kx as isize - 1, side);
                        let base = (sy * side + sx) * cin;
                        for c in 0..cin {
                            din[base + c] += dpatch[k + c];
                        }
                        k += cin;
                    }
                }
            }
        }
    }
    din
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Gradient passes where the forward activation was strictly positive.
fn relu_backward(activated: &[f64], grad: &mut [f64]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

fn maxpool2(input: &[f64], side: usize, ch: usize) -> (Vec<f64>, Vec<usize>) {
    let half = side / 2;
    let mut out = Vec::with_capacity(half * half * ch);
    let mut arg = Vec::with_capacity(half * half * ch);
    for y in 0..half {
        for x in 0..half {
            for c in 0..ch {
                let mut best_idx = ((2 * y) * side + 2 * x) * ch + c;
                let mut best = input[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ((2 * y + dy) * side + 2 * x + dx) * ch + c;
                    if input[idx] > best {
                        best = input[idx];
                        best_idx = idx;
                    }
                }
                out.push(best);
                arg.push(best_idx);
            }
        }
    }
    (out, arg)
}

fn unpool(grad: &[f64], arg: &[usize], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (&g, &i) in grad.iter().zip(arg) {
        out[i] += g;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_weights_give_zero_logits() {
        let w = ReferenceCnnWeights::zeros(8, 4).unwrap();
        let x = vec![0.7; w.input_len()];
        assert_eq!(w.forward(&x).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn geometry_is_validated() {
        assert!(ReferenceCnnWeights::zeros(10, 4).is_err());
        assert!(ReferenceCnnWeights::zeros(8, 1).is_err());
        let w = ReferenceCnnWeights::zeros(8, 3).unwrap();
        assert!(w.forward(&[0.0; 5]).is_err());
    }

    #[test]
    fn maxpool_ties_go_to_first_in_scan_order() {
        let input = vec![1.0, 1.0, 1.0, 1.0];
        let (out, arg) = maxpool2(&input, 2, 1);
        assert_eq!(out, vec![1.0]);
        assert_eq!(arg, vec![0]);
        let (_, arg) = maxpool2(&[0.0, 2.0, 2.0, 1.0], 2, 1);
        assert_eq!(arg, vec![1]);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = ReferenceCnnWeights::init(8, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = ReferenceCnnWeights::init(8, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        let limit = (6.0f64 / (27 + 144) as f64).sqrt();
        assert!(a.conv1_w.iter().all(|v| v.abs() <= limit));
        assert!(a.conv1_b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let w = ReferenceCnnWeights::init(8, 3, &mut rng).unwrap();
        let x: Vec<f64> = (0..w.input_len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let probe = [0.4, -1.3, 0.9];
        let loss = |w: &ReferenceCnnWeights| -> f64 {
            w.forward(&x).unwrap().iter().zip(probe).map(|(a, b)| a * b).sum()
        };
        let trace = w.forward_trace(&x).unwrap();
        let mut grads = ReferenceCnnWeights::zeros(8, 3).unwrap();
        w.backward(&trace, &probe, Some(&mut grads), false);

        let step = 1e-6;
        for t in 0..6 {
            let n = w.tensors()[t].len();
            for idx in [0, n / 3, n - 1] {
                let mut plus = w.clone();
                plus.tensors_mut()[t][idx] += step;
                let mut minus = w.clone();
                minus.tensors_mut()[t][idx] -= step;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * step);
                let an = grads.tensors()[t][idx];
                assert!(
                    (fd - an).abs() <= 1e-5 * fd.abs().max(an.abs()).max(1e-2),
                    "tensor {t}[{idx}]: {fd} vs {an}"
                );
            }
        }
    }
}
