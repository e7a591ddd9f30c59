use crate::error::{Error, Result};

/// Number of color channels carried by every [`Image`].
pub const CHANNELS: usize = 3;

/// An RGB image with components in `[0, 1]`.
///
/// Storage is row-major with channels interleaved: component `(row, col, c)`
/// lives at `(row * width + col) * 3 + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width * CHANNELS {
            return Err(Error::shape(
                format!("{} components", height * width * CHANNELS),
                data.len(),
            ));
        }
        check_range(&data, 0.0, 1.0)?;
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width * CHANNELS])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..CHANNELS {
                    data.push(f(r, c, ch));
                }
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * CHANNELS + ch]
    }

    /// Builds an image from arbitrary reals by clamping each component into
    /// `[0, 1]`. Used by the pixel-space attacks, which clip by definition.
    pub fn clamped(height: usize, width: usize, mut data: Vec<f64>) -> Result<Self> {
        for (index, v) in data.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index });
            }
            *v = v.clamp(0.0, 1.0);
        }
        Self::new(height, width, data)
    }
}

/// An image-shaped array of unbounded reals, e.g. a loss gradient with
/// respect to the pixels. Same layout as [`Image`].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrad {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageGrad {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width * CHANNELS {
            return Err(Error::shape(
                format!("{} components", height * width * CHANNELS),
                data.len(),
            ));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width * CHANNELS],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// A single-channel field of reals over the image grid (atmospheric light,
/// scattering coefficient, transmission, raw depth, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width {
            return Err(Error::shape(format!("{} values", height * width), data.len()));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height >= 1 && width >= 1, "field dimensions must be >= 1");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

/// Normalized scene depth in `[0, 1]`; 0 is nearest to the camera.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap(ScalarField);

impl DepthMap {
    pub fn new(field: ScalarField) -> Result<Self> {
        check_range(field.data(), 0.0, 1.0)?;
        Ok(Self(field))
    }

    pub fn field(&self) -> &ScalarField {
        &self.0
    }

    pub fn into_field(self) -> ScalarField {
        self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }
}

pub(crate) fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::invalid(format!(
            "dimensions must be >= 1, got {height}x{width}"
        )));
    }
    Ok(())
}

pub(crate) fn check_range(data: &[f64], lo: f64, hi: f64) -> Result<()> {
    for (index, &value) in data.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if value < lo || value > hi {
            return Err(Error::OutOfRange { index, value, lo, hi });
        }
    }
    Ok(())
}

pub(crate) fn ensure_same_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::shape(
            format!("{}x{}", expected.0, expected.1),
            format!("{}x{}", actual.0, actual.1),
        ));
    }
    Ok(())
}
