use super::types::{DepthMap, ScalarField};
use crate::error::{Error, Result};

/// Min-max normalizes raw estimator output into `[0, 1]`. With `invert`,
/// returns `1 - normalized`, for estimators that emit inverse depth.
pub fn normalize_depth(raw: &ScalarField, invert: bool) -> Result<DepthMap> {
    if let Some(index) = raw.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let (lo, hi) = (raw.min(), raw.max());
    if hi <= lo {
        return Err(Error::invalid(
            "depth field is constant; min-max normalization undefined",
        ));
    }
    let span = hi - lo;
    let (h, w) = raw.dims();
    let data = raw
        .data()
        .iter()
        .map(|&v| {
            let n = ((v - lo) / span).clamp(0.0, 1.0);
            if invert {
                1.0 - n
            } else {
                n
            }
        })
        .collect();
    DepthMap::new(ScalarField::new(h, w, data)?)
}

/// Stand-in depth for images without an estimated map. Serialized as
/// `h-ramp`, `v-ramp`, `radial` or `constant:<c>`.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SyntheticDepth {
    /// Depth grows left to right.
    HRamp,
    /// Depth grows top to bottom.
    #[default]
    VRamp,
    /// Distance from the image center, normalized so the farthest pixel is 1.
    Radial,
    Constant(f64),
}

impl std::str::FromStr for SyntheticDepth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h-ramp" => Ok(Self::HRamp),
            "v-ramp" => Ok(Self::VRamp),
            "radial" => Ok(Self::Radial),
            other => match other.strip_prefix("constant:") {
                Some(v) => v
                    .parse::<f64>()
                    .map(Self::Constant)
                    .map_err(|_| Error::invalid(format!("bad constant depth {v:?}"))),
                None => Err(Error::invalid(format!(
                    "unknown synthetic depth {other:?} (h-ramp, v-ramp, radial, constant:<c>)"
                ))),
            },
        }
    }
}

impl TryFrom<String> for SyntheticDepth {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SyntheticDepth> for String {
    fn from(d: SyntheticDepth) -> String {
        d.to_string()
    }
}

impl std::fmt::Display for SyntheticDepth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::HRamp => f.write_str("h-ramp"),
            Self::VRamp => f.write_str("v-ramp"),
            Self::Radial => f.write_str("radial"),
            Self::Constant(c) => write!(f, "constant:{c}"),
        }
    }
}

fn ramp(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

pub fn synthetic_depth(kind: SyntheticDepth, height: usize, width: usize) -> Result<DepthMap> {
    let field = match kind {
        SyntheticDepth::HRamp => ScalarField::from_fn(height, width, |_, c| ramp(c, width))?,
        SyntheticDepth::VRamp => ScalarField::from_fn(height, width, |r, _| ramp(r, height))?,
        SyntheticDepth::Radial => {
            let cy = (height as f64 - 1.0) / 2.0;
            let cx = (width as f64 - 1.0) / 2.0;
            let max = (cy * cy + cx * cx).sqrt();
            ScalarField::from_fn(height, width, |r, c| {
                if max == 0.0 {
                    0.0
                } else {
                    let (dy, dx) = (r as f64 - cy, c as f64 - cx);
                    ((dy * dy + dx * dx).sqrt() / max).min(1.0)
                }
            })?
        }
        SyntheticDepth::Constant(c) => {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::invalid(format!("constant depth {c} outside [0, 1]")));
            }
            ScalarField::from_fn(height, width, |_, _| c)?
        }
    };
    DepthMap::new(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_affine() {
        let raw = ScalarField::new(2, 2, vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        let d = normalize_depth(&raw, false).unwrap();
        let want = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (a, b) in d.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let inv = normalize_depth(&raw, true).unwrap();
        let want = [1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0];
        for (a, b) in inv.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_rejects_constant_and_nan() {
        assert!(normalize_depth(&ScalarField::filled(3, 3, 4.0), false).is_err());
        let raw = ScalarField::new(1, 2, vec![f64::NAN, 1.0]).unwrap();
        assert!(normalize_depth(&raw, false).is_err());
    }

    #[test]
    fn normalized_depth_attains_both_ends() {
        let raw = ScalarField::new(1, 4, vec![-3.0, 10.0, 0.5, 7.0]).unwrap();
        for invert in [false, true] {
            let d = normalize_depth(&raw, invert).unwrap();
            assert_eq!(d.field().min(), 0.0);
            assert_eq!(d.field().max(), 1.0);
        }
    }

    #[test]
    fn ramps_and_constant() {
        let d = synthetic_depth(SyntheticDepth::HRamp, 2, 3).unwrap();
        assert_eq!(d.data(), &[0.0, 0.5, 1.0, 0.0, 0.5, 1.0]);
        let v = synthetic_depth(SyntheticDepth::VRamp, 3, 1).unwrap();
        assert_eq!(v.data(), &[0.0, 0.5, 1.0]);
        let z = synthetic_depth(SyntheticDepth::Constant(0.0), 4, 4).unwrap();
        assert!(z.data().iter().all(|&x| x == 0.0));
        assert!(synthetic_depth(SyntheticDepth::Constant(1.5), 2, 2).is_err());
    }

    #[test]
    fn radial_three_by_three() {
        let d = synthetic_depth(SyntheticDepth::Radial, 3, 3).unwrap();
        assert_eq!(d.field().get(1, 1), 0.0);
        for (r, c) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
            assert!((d.field().get(r, c) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("v-ramp".parse::<SyntheticDepth>().unwrap(), SyntheticDepth::VRamp);
        assert_eq!(
            "constant:0.25".parse::<SyntheticDepth>().unwrap(),
            SyntheticDepth::Constant(0.25)
        );
        assert!("bogus".parse::<SyntheticDepth>().is_err());
        for k in [
            SyntheticDepth::HRamp,
            SyntheticDepth::Radial,
            SyntheticDepth::Constant(0.5),
        ] {
            assert_eq!(k.to_string().parse::<SyntheticDepth>().unwrap(), k);
        }
    }
}
