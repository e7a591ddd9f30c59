//! Gaussian low-pass filtering with replicate (clamp-to-edge) borders and its
//! exact adjoint.

use super::types::ScalarField;
use crate::error::{Error, Result};

/// Truncated, renormalized Gaussian. Stored separably: the 2-D weight at
/// offset `(dy, dx)` is `taps[dy + radius] * taps[dx + radius]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
    radius: usize,
    taps: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
        }
        let radius = (3.0 * sigma).ceil() as usize;
        let mut taps: Vec<f64> = (0..=2 * radius)
            .map(|i| {
                let x = i as f64 - radius as f64;
                (-x * x / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let total: f64 = taps.iter().sum();
        for t in &mut taps {
            *t /= total;
        }
        Ok(Self { sigma, radius, taps })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// One-dimensional taps, index `radius` is the center.
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// 2-D weight at offset `(dy, dx)` from the center.
    pub fn weight(&self, dy: isize, dx: isize) -> f64 {
        let r = self.radius as isize;
        if dy.abs() > r || dx.abs() > r {
            return 0.0;
        }
        self.taps[(dy + r) as usize] * self.taps[(dx + r) as usize]
    }

    /// Dense `(2r+1)^2` weights, row-major.
    pub fn weights_2d(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.side() * self.side());
        for a in &self.taps {
            for b in &self.taps {
                out.push(a * b);
            }
        }
        out
    }
}

pub fn gaussian_kernel(sigma: f64) -> Result<GaussianKernel> {
    GaussianKernel::new(sigma)
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// `out(x) = sum_u k(u) * field(clamp(x - u))`.
///
/// Every output is a convex combination of inputs, so the result is snapped
/// into `[min(field), max(field)]` to drop the last-bit rounding excess.
pub fn convolve_replicate(field: &ScalarField, k: &GaussianKernel) -> ScalarField {
    let (h, w) = field.dims();
    let r = k.radius as isize;
    let taps = &k.taps;
    let src = field.data();

    let mut tmp = vec![0.0; h * w];
    for row in 0..h {
        let line = &src[row * w..(row + 1) * w];
        let out = &mut tmp[row * w..(row + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &t) in taps.iter().enumerate() {
                let u = j as isize - r;
                acc += t * line[clamp_index(x as isize - u, w)];
            }
            *o = acc;
        }
    }

    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        for (j, &t) in taps.iter().enumerate() {
            let u = j as isize - r;
            let sy = clamp_index(y as isize - u, h);
            let line = &tmp[sy * w..(sy + 1) * w];
            for (d, &s) in dst.iter_mut().zip(line) {
                *d += t * s;
            }
        }
    }
    let (lo, hi) = (field.min(), field.max());
    for v in &mut out {
        *v = v.clamp(lo, hi);
    }
    ScalarField::new(h, w, out).expect("dimensions preserved")
}

/// Adjoint of [`convolve_replicate`]: scatter-adds each gradient value back
/// through the clamped index mapping, vertical pass first.
pub fn convolve_adjoint_replicate(grad: &ScalarField, k: &GaussianKernel) -> ScalarField {
    let (h, w) = grad.dims();
    let r = k.radius as isize;
    let taps = &k.taps;
    let src = grad.data();

    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let g = &src[y * w..(y + 1) * w];
        for (j, &t) in taps.iter().enumerate() {
            let u = j as isize - r;
            let sy = clamp_index(y as isize - u, h);
            let dst = &mut tmp[sy * w..(sy + 1) * w];
            for (d, &v) in dst.iter_mut().zip(g) {
                *d += t * v;
            }
        }
    }

    let mut out = vec![0.0; h * w];
    for row in 0..h {
        let g = &tmp[row * w..(row + 1) * w];
        let dst = &mut out[row * w..(row + 1) * w];
        for (x, &v) in g.iter().enumerate() {
            for (j, &t) in taps.iter().enumerate() {
                let u = j as isize - r;
                dst[clamp_index(x as isize - u, w)] += t * v;
            }
        }
    }
    ScalarField::new(h, w, out).expect("dimensions preserved")
}
