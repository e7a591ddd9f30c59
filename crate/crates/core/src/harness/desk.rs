//! Desk-scale 10-class corpus cut from ten bundled public-domain photos
//! (see `data/photos/CREDITS.md`). Class `k` is random square crops of photo
//! `k`, resized to a fixed side, randomly mirrored and photometrically
//! jittered. Crops are grey by default so that classes must be told apart
//! by texture rather than by their overall colour.

use image::imageops::{self, FilterType};
use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::LabeledExample;
use crate::error::{Error, Result};
use crate::imagecore::{decode_png, quantize, Image, CHANNELS};

pub const CLASS_NAMES: [&str; 10] = [
    "astronaut",
    "chelsea",
    "coffee",
    "rocket",
    "hubble",
    "ihc",
    "brick",
    "grass",
    "gravel",
    "coins",
];

const PHOTOS: [&[u8]; 10] = [
    include_bytes!("../../data/photos/astronaut.png"),
    include_bytes!("../../data/photos/chelsea.png"),
    include_bytes!("../../data/photos/coffee.png"),
    include_bytes!("../../data/photos/rocket.png"),
    include_bytes!("../../data/photos/hubble.png"),
    include_bytes!("../../data/photos/ihc.png"),
    include_bytes!("../../data/photos/brick.png"),
    include_bytes!("../../data/photos/grass.png"),
    include_bytes!("../../data/photos/gravel.png"),
    include_bytes!("../../data/photos/coins.png"),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeskCorpusConfig {
    /// Side length of every generated image.
    pub side: usize,
    /// Crop side as a fraction of the photo's shorter side, drawn uniformly.
    pub crop_min: f64,
    pub crop_max: f64,
    /// Random contrast, brightness and per-channel gain.
    pub jitter: bool,
    /// Replace each crop by its luma, replicated over the three channels.
    pub grayscale: bool,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl Default for DeskCorpusConfig {
    fn default() -> Self {
        Self {
            side: 128,
            crop_min: 0.12,
            crop_max: 0.35,
            jitter: true,
            grayscale: true,
            train_size: 1500,
            test_size: 400,
            seed: 0,
        }
    }
}

fn photo(k: usize) -> Result<RgbImage> {
    let img = decode_png(PHOTOS[k])?;
    let (h, w) = img.dims();
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    Ok(RgbImage::from_raw(w as u32, h as u32, bytes).expect("buffer matches dimensions"))
}

fn sample(photo: &RgbImage, cfg: &DeskCorpusConfig, rng: &mut ChaCha8Rng) -> Result<Image> {
    let (w, h) = photo.dimensions();
    let short = w.min(h) as f64;
    let c = ((short * rng.gen_range(cfg.crop_min..=cfg.crop_max)) as u32).clamp(1, w.min(h));
    let y = rng.gen_range(0..=h - c);
    let x = rng.gen_range(0..=w - c);
    let crop = imageops::crop_imm(photo, x, y, c, c).to_image();
    let side = cfg.side as u32;
    let mut small = imageops::resize(&crop, side, side, FilterType::Triangle);
    if rng.gen_bool(0.5) {
        imageops::flip_horizontal_in_place(&mut small);
    }
    let mut data: Vec<f64> = small.into_raw().into_iter().map(|b| b as f64 / 255.0).collect();
    if cfg.grayscale {
        for px in data.chunks_exact_mut(CHANNELS) {
            let y = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
            px.fill(y);
        }
    }
    if cfg.jitter {
        let n = (cfg.side * cfg.side) as f64;
        let mut mean = [0.0; CHANNELS];
        for (k, v) in data.iter().enumerate() {
            mean[k % CHANNELS] += v / n;
        }
        let contrast = rng.gen_range(0.6..1.2);
        let shift = rng.gen_range(-0.15..0.15);
        let gain: [f64; CHANNELS] = std::array::from_fn(|_| rng.gen_range(0.9..1.1));
        for (k, v) in data.iter_mut().enumerate() {
            let ch = k % CHANNELS;
            *v = ((mean[ch] + contrast * (*v - mean[ch]) + shift) * gain[ch]).clamp(0.0, 1.0);
        }
    }
    // Quantize so the in-memory corpus equals what a PNG round trip gives.
    for v in &mut data {
        *v = quantize(*v) as f64 / 255.0;
    }
    Image::new(cfg.side, cfg.side, data)
}

/// `(train, test)`; labels cycle through the ten classes.
pub fn desk_corpus(cfg: &DeskCorpusConfig) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    if cfg.side == 0 {
        return Err(Error::invalid("desk corpus side must be >= 1"));
    }
    if !(0.0 < cfg.crop_min && cfg.crop_min <= cfg.crop_max && cfg.crop_max <= 1.0) {
        return Err(Error::invalid(format!(
            "crop fractions must satisfy 0 < min <= max <= 1, got {} and {}",
            cfg.crop_min, cfg.crop_max
        )));
    }
    let photos = (0..CLASS_NAMES.len()).map(photo).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw = |n: usize| -> Result<Vec<LabeledExample>> {
        (0..n)
            .map(|i| {
                let label = i % CLASS_NAMES.len();
                Ok(LabeledExample {
                    image: sample(&photos[label], cfg, &mut rng)?,
                    label,
                })
            })
            .collect()
    };
    let train = draw(cfg.train_size)?;
    let test = draw(cfg.test_size)?;
    Ok((train, test))
}
