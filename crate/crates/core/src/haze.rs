//! Atmospheric scattering forward model and its closed-form gradients.
//!
//! A hazy image blends scene radiance `I` with atmospheric light `A` through
//! the transmission `t = exp(-beta * d)`:
//!
//! ```text
//! H(x, c) = I(x, c) * t(x) + A(x) * (1 - t(x))
//! ```
//!
//! `A` is one value per pixel shared by all three channels. In the
//! inhomogeneous setting `A` and `beta` are Gaussian-smoothed versions of raw
//! per-pixel fields `A'` and `beta'`.

use crate::error::{Error, Result};
use crate::imagecore::{
    convolve_adjoint_replicate, convolve_replicate, ensure_same_dims, DepthMap, GaussianKernel, Image,
    ImageGrad, ScalarField, CHANNELS,
};

/// Raw (unsmoothed) per-pixel haze parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HazeFields {
    pub a_raw: ScalarField,
    pub beta_raw: ScalarField,
}

impl HazeFields {
    pub fn new(a_raw: ScalarField, beta_raw: ScalarField) -> Result<Self> {
        ensure_same_dims(a_raw.dims(), beta_raw.dims())?;
        if let Some((index, &value)) = a_raw
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::OutOfRange {
                index,
                value,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if let Some((index, &value)) = beta_raw
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::OutOfRange {
                index,
                value,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(Self { a_raw, beta_raw })
    }

    pub fn constant(height: usize, width: usize, s: HazeScalars) -> Self {
        Self {
            a_raw: ScalarField::filled(height, width, s.a),
            beta_raw: ScalarField::filled(height, width, s.beta),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.a_raw.dims()
    }
}

/// Homogeneous haze: one atmospheric light and one scattering coefficient.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HazeScalars {
    pub a: f64,
    pub beta: f64,
}

impl HazeScalars {
    pub fn new(a: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::invalid(format!("atmospheric light {a} outside [0, 1]")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!(
                "scattering coefficient {beta} must be >= 0"
            )));
        }
        Ok(Self { a, beta })
    }
}

/// `t(x) = exp(-beta(x) * d(x))`.
pub fn transmission(d: &DepthMap, beta: &ScalarField) -> Result<ScalarField> {
    ensure_same_dims(d.dims(), beta.dims())?;
    let (h, w) = d.dims();
    let mut data = Vec::with_capacity(h * w);
    for (index, (&dv, &bv)) in d.data().iter().zip(beta.data()).enumerate() {
        if !bv.is_finite() || bv < 0.0 {
            return Err(Error::OutOfRange {
                index,
                value: bv,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        data.push((-bv * dv).exp());
    }
    ScalarField::new(h, w, data)
}

fn check_unit(field: &ScalarField, what: &str) -> Result<()> {
    match field
        .data()
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        Some((index, &value)) => Err(Error::invalid(format!(
            "{what} value {value} at index {index} outside [0, 1]"
        ))),
        None => Ok(()),
    }
}

/// Blends `i` toward the atmospheric light `a` by `1 - t`.
///
/// No clipping to `[0, 1]` is applied; the result stays between `I(x, c)`
/// and `a(x)`, and `t = 1` and `t = 0` reproduce `I` and `a` exactly.
pub fn synthesize(i: &Image, a: &ScalarField, t: &ScalarField) -> Result<Image> {
    ensure_same_dims(i.dims(), a.dims())?;
    ensure_same_dims(i.dims(), t.dims())?;
    check_unit(a, "atmospheric light")?;
    check_unit(t, "transmission")?;
    let (h, w) = i.dims();
    let mut out = Vec::with_capacity(h * w * CHANNELS);
    for (p, (&av, &tv)) in a.data().iter().zip(t.data()).enumerate() {
        for c in 0..CHANNELS {
            let iv = i.data()[p * CHANNELS + c];
            // The clamp only removes rounding excess: the exact value is a
            // convex combination of iv and av.
            let hv = (iv * tv + av * (1.0 - tv)).clamp(iv.min(av), iv.max(av));
            out.push(hv);
        }
    }
    Image::new(h, w, out)
}

/// Output of [`haze_forward`]; the intermediates are what the gradient needs.
#[derive(Debug, Clone, PartialEq)]
pub struct HazeForward {
    pub hazy: Image,
    pub a: ScalarField,
    pub beta: ScalarField,
    pub t: ScalarField,
}

pub fn haze_forward(
    i: &Image,
    d: &DepthMap,
    p: &HazeFields,
    k_a: &GaussianKernel,
    k_beta: &GaussianKernel,
) -> Result<HazeForward> {
    ensure_same_dims(i.dims(), d.dims())?;
    ensure_same_dims(i.dims(), p.dims())?;
    let a = convolve_replicate(&p.a_raw, k_a);
    let beta = convolve_replicate(&p.beta_raw, k_beta);
    let t = transmission(d, &beta)?;
    let hazy = synthesize(i, &a, &t)?;
    Ok(HazeForward { hazy, a, beta, t })
}

pub fn haze_homogeneous(i: &Image, d: &DepthMap, s: HazeScalars) -> Result<Image> {
    ensure_same_dims(i.dims(), d.dims())?;
    let (h, w) = i.dims();
    let beta = ScalarField::filled(h, w, s.beta);
    let t = transmission(d, &beta)?;
    synthesize(i, &ScalarField::filled(h, w, s.a), &t)
}

/// Per-pixel `(dJ/dA, dJ/dbeta)` for the smoothed fields.
fn smoothed_field_grads(
    upstream: &ImageGrad,
    i: &Image,
    d: &DepthMap,
    a: &ScalarField,
    t: &ScalarField,
) -> Result<(ScalarField, ScalarField)> {
    ensure_same_dims(i.dims(), upstream.dims())?;
    ensure_same_dims(i.dims(), d.dims())?;
    ensure_same_dims(i.dims(), a.dims())?;
    ensure_same_dims(i.dims(), t.dims())?;
    let (h, w) = i.dims();
    let mut ga = Vec::with_capacity(h * w);
    let mut gb = Vec::with_capacity(h * w);
    for p in 0..h * w {
        let (av, tv, dv) = (a.data()[p], t.data()[p], d.data()[p]);
        let mut sum_up = 0.0;
        let mut sum_contrast = 0.0;
        for c in 0..CHANNELS {
            let u = upstream.data()[p * CHANNELS + c];
            sum_up += u;
            sum_contrast += u * (av - i.data()[p * CHANNELS + c]);
        }
        ga.push(sum_up * (1.0 - tv));
        gb.push(sum_contrast * dv * tv);
    }
    Ok((ScalarField::new(h, w, ga)?, ScalarField::new(h, w, gb)?))
}

/// Gradients of a scalar loss with respect to the raw fields `A'` and
/// `beta'`, given `dJ/dH` and the intermediates of the matching
/// [`haze_forward`] call.
pub fn grad_haze_params(
    upstream: &ImageGrad,
    i: &Image,
    d: &DepthMap,
    a: &ScalarField,
    t: &ScalarField,
    k_a: &GaussianKernel,
    k_beta: &GaussianKernel,
) -> Result<(ScalarField, ScalarField)> {
    let (ga, gb) = smoothed_field_grads(upstream, i, d, a, t)?;
    Ok((
        convolve_adjoint_replicate(&ga, k_a),
        convolve_adjoint_replicate(&gb, k_beta),
    ))
}

/// Gradients with respect to the two homogeneous scalars.
pub fn grad_haze_scalars(
    upstream: &ImageGrad,
    i: &Image,
    d: &DepthMap,
    s: HazeScalars,
) -> Result<(f64, f64)> {
    let (h, w) = i.dims();
    let a = ScalarField::filled(h, w, s.a);
    let t = transmission(d, &ScalarField::filled(h, w, s.beta))?;
    let (ga, gb) = smoothed_field_grads(upstream, i, d, &a, &t)?;
    Ok((ga.sum(), gb.sum()))
}
