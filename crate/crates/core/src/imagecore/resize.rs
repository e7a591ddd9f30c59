//! Bilinear resampling (half-pixel centers, no antialiasing) as an explicit
//! linear map with an exact adjoint, so gradients can flow back through the
//! classifier's input resize.

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn axis_taps(src: usize, dst: usize) -> Vec<Tap> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (pos.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            let frac = if hi == lo { 0.0 } else { pos - lo as f64 };
            Tap { lo, hi, frac }
        })
        .collect()
}

/// A fixed bilinear map from `src_h x src_w` to `dst_h x dst_w` grids with
/// `channels` interleaved values per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Bilinear {
    src: (usize, usize),
    dst: (usize, usize),
    channels: usize,
    rows: Vec<Tap>,
    cols: Vec<Tap>,
}

impl Bilinear {
    pub fn new(src: (usize, usize), dst: (usize, usize), channels: usize) -> Self {
        assert!(src.0 > 0 && src.1 > 0 && dst.0 > 0 && dst.1 > 0 && channels > 0);
        Self {
            src,
            dst,
            channels,
            rows: axis_taps(src.0, dst.0),
            cols: axis_taps(src.1, dst.1),
        }
    }

    pub fn src_dims(&self) -> (usize, usize) {
        self.src
    }

    pub fn dst_dims(&self) -> (usize, usize) {
        self.dst
    }

    pub fn is_identity(&self) -> bool {
        self.src == self.dst
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let ch = self.channels;
        let sw = self.src.1;
        assert_eq!(input.len(), self.src.0 * sw * ch);
        if self.is_identity() {
            return input.to_vec();
        }
        let mut out = Vec::with_capacity(self.dst.0 * self.dst.1 * ch);
        for ry in &self.rows {
            for cx in &self.cols {
                for c in 0..ch {
                    let at = |y: usize, x: usize| input[(y * sw + x) * ch + c];
                    let top = at(ry.lo, cx.lo) * (1.0 - cx.frac) + at(ry.lo, cx.hi) * cx.frac;
                    let bot = at(ry.hi, cx.lo) * (1.0 - cx.frac) + at(ry.hi, cx.hi) * cx.frac;
                    out.push(top * (1.0 - ry.frac) + bot * ry.frac);
                }
            }
        }
        out
    }

    /// Transpose of [`Bilinear::apply`].
    pub fn adjoint(&self, grad: &[f64]) -> Vec<f64> {
        let ch = self.channels;
        let sw = self.src.1;
        assert_eq!(grad.len(), self.dst.0 * self.dst.1 * ch);
        if self.is_identity() {
            return grad.to_vec();
        }
        let mut out = vec![0.0; self.src.0 * sw * ch];
        let mut k = 0;
        for ry in &self.rows {
            for cx in &self.cols {
                for c in 0..ch {
                    let g = grad[k];
                    k += 1;
                    let mut add = |y: usize, x: usize, w: f64| out[(y * sw + x) * ch + c] += w * g;
                    add(ry.lo, cx.lo, (1.0 - ry.frac) * (1.0 - cx.frac));
                    add(ry.lo, cx.hi, (1.0 - ry.frac) * cx.frac);
                    add(ry.hi, cx.lo, ry.frac * (1.0 - cx.frac));
                    add(ry.hi, cx.hi, ry.frac * cx.frac);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_size_is_identity() {
        let b = Bilinear::new((3, 4), (3, 4), 3);
        let x: Vec<f64> = (0..36).map(|i| i as f64 * 0.1).collect();
        assert_eq!(b.apply(&x), x);
    }

    #[test]
    fn halving_averages_two_by_two_blocks() {
        let b = Bilinear::new((4, 4), (2, 2), 1);
        let x: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let y = b.apply(&x);
        assert_eq!(y, vec![2.5, 4.5, 10.5, 12.5]);
    }

    #[test]
    fn constants_survive_any_resize() {
        for (src, dst) in [((7, 5), (3, 9)), ((2, 2), (5, 5)), ((9, 9), (4, 4))] {
            let b = Bilinear::new(src, dst, 2);
            let y = b.apply(&vec![0.3; src.0 * src.1 * 2]);
            assert!(y.iter().all(|&v| (v - 0.3).abs() < 1e-15));
        }
    }

    #[test]
    fn adjoint_dot_product_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (src, dst) in [((16, 16), (8, 8)), ((10, 7), (4, 9)), ((5, 5), (11, 3))] {
            let b = Bilinear::new(src, dst, 3);
            let u: Vec<f64> = (0..src.0 * src.1 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..dst.0 * dst.1 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs: f64 = b.apply(&u).iter().zip(&v).map(|(a, b)| a * b).sum();
            let rhs: f64 = u.iter().zip(b.adjoint(&v)).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
