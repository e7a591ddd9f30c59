//! Contact sheets of homogeneous haze renderings and IoU heat-maps.

use crate::error::{Error, Result};
use crate::haze::{haze_homogeneous, HazeScalars};
use crate::imagecore::{DepthMap, Image, CHANNELS};

/// 3x5 glyphs, one row per byte, bit 2 is the left column.
fn glyph(c: char) -> [u8; 5] {
    match c {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 7, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 1, 1, 1],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        '.' => [0, 0, 0, 0, 2],
        '=' => [0, 7, 0, 7, 0],
        '-' => [0, 0, 7, 0, 0],
        'A' => [2, 5, 7, 5, 5],
        'B' => [6, 5, 6, 5, 6],
        _ => [0; 5],
    }
}

const GLYPH_ADVANCE: usize = 4;
const GLYPH_HEIGHT: usize = 5;

/// RGB canvas used to assemble figures before conversion to an [`Image`].
pub(crate) struct Canvas {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Canvas {
    pub fn new(height: usize, width: usize, background: f64) -> Self {
        Self {
            height,
            width,
            data: vec![background; height * width * CHANNELS],
        }
    }

    pub fn set(&mut self, r: usize, c: usize, rgb: [f64; 3]) {
        if r < self.height && c < self.width {
            let k = (r * self.width + c) * CHANNELS;
            self.data[k..k + CHANNELS].copy_from_slice(&rgb);
        }
    }

    pub fn blit(&mut self, img: &Image, top: usize, left: usize) {
        let (h, w) = img.dims();
        for r in 0..h {
            for c in 0..w {
                self.set(
                    top + r,
                    left + c,
                    [img.get(r, c, 0), img.get(r, c, 1), img.get(r, c, 2)],
                );
            }
        }
    }

    pub fn fill(&mut self, top: usize, left: usize, h: usize, w: usize, rgb: [f64; 3]) {
        for r in top..top + h {
            for c in left..left + w {
                self.set(r, c, rgb);
            }
        }
    }

    pub fn text(&mut self, s: &str, top: usize, left: usize, scale: usize, rgb: [f64; 3]) {
        for (k, ch) in s.chars().enumerate() {
            let g = glyph(ch);
            for (gy, bits) in g.iter().enumerate() {
                for gx in 0..3 {
                    if bits >> (2 - gx) & 1 == 1 {
                        self.fill(
                            top + gy * scale,
                            left + (k * GLYPH_ADVANCE + gx) * scale,
                            scale,
                            scale,
                            rgb,
                        );
                    }
                }
            }
        }
    }

    pub fn into_image(self) -> Result<Image> {
        Image::new(self.height, self.width, self.data)
    }
}

fn text_width(s: &str, scale: usize) -> usize {
    s.chars().count() * GLYPH_ADVANCE * scale
}

/// `cells[i][j]` renders `A = a_values[i]`, `beta = b_values[j]`.
pub fn haze_grid_cells(
    i: &Image,
    d: &DepthMap,
    a_values: &[f64],
    b_values: &[f64],
) -> Result<Vec<Vec<Image>>> {
    if a_values.is_empty() || b_values.is_empty() {
        return Err(Error::invalid("grid needs at least one A and one beta value"));
    }
    a_values
        .iter()
        .map(|&a| {
            b_values
                .iter()
                .map(|&b| haze_homogeneous(i, d, HazeScalars::new(a, b)?))
                .collect()
        })
        .collect()
}

const GUTTER: usize = 4;

/// Lays the renderings out in a grid, each captioned `A=<a> B=<beta>`.
pub fn haze_contact_sheet(i: &Image, d: &DepthMap, a_values: &[f64], b_values: &[f64]) -> Result<Image> {
    let cells = haze_grid_cells(i, d, a_values, b_values)?;
    let (h, w) = i.dims();
    let captions: Vec<Vec<String>> = a_values
        .iter()
        .map(|a| b_values.iter().map(|b| format!("A={a} B={b}")).collect())
        .collect();
    let longest = captions
        .iter()
        .flatten()
        .map(|s| s.chars().count())
        .max()
        .unwrap_or(0);
    let scale = if w >= 2 * longest * GLYPH_ADVANCE { 2 } else { 1 };
    let caption_h = GLYPH_HEIGHT * scale + 2 * scale;
    let cell_w = w.max(text_width(&"0".repeat(longest), scale));
    let cell_h = h + caption_h;
    let (rows, cols) = (a_values.len(), b_values.len());
    let mut canvas = Canvas::new(
        rows * cell_h + (rows + 1) * GUTTER,
        cols * cell_w + (cols + 1) * GUTTER,
        1.0,
    );
    for (r, row) in cells.iter().enumerate() {
        for (c, img) in row.iter().enumerate() {
            let top = GUTTER + r * (cell_h + GUTTER);
            let left = GUTTER + c * (cell_w + GUTTER);
            canvas.text(&captions[r][c], top + scale, left, scale, [0.0, 0.0, 0.0]);
            canvas.blit(img, top + caption_h, left);
        }
    }
    canvas.into_image()
}

/// Heat-map of a matrix with values in `[0, 1]`: white at 0, dark red at 1,
/// with the value printed in each cell.
pub fn heatmap(m: &[Vec<f64>], cell: usize) -> Result<Image> {
    let n = m.len();
    if n == 0 || m.iter().any(|row| row.len() != n) {
        return Err(Error::invalid("heat-map needs a non-empty square matrix"));
    }
    let cell = cell.max(20);
    let mut canvas = Canvas::new(n * cell, n * cell, 1.0);
    for (r, row) in m.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let v = v.clamp(0.0, 1.0);
            let rgb = [1.0 - 0.45 * v, 1.0 - 0.95 * v, 1.0 - 0.95 * v];
            canvas.fill(r * cell, c * cell, cell, cell, rgb);
            let label = format!("{:.2}", v);
            let ink = if v > 0.5 { [1.0; 3] } else { [0.0; 3] };
            let left = (c * cell + cell / 2).saturating_sub(text_width(&label, 1) / 2);
            canvas.text(&label, r * cell + cell / 2 - 2, left, 1, ink);
        }
    }
    canvas.into_image()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::{synthetic_depth, SyntheticDepth};

    fn photo() -> Image {
        Image::from_fn(16, 20, |r, c, ch| ((r * 7 + c * 3 + ch * 5) % 17) as f64 / 16.0).unwrap()
    }

    #[test]
    fn figure_grid_shape() {
        let i = photo();
        let d = synthetic_depth(SyntheticDepth::VRamp, 16, 20).unwrap();
        let cells = haze_grid_cells(&i, &d, &[0.8, 0.9, 1.0], &[0.05, 0.10, 0.15, 0.20]).unwrap();
        assert_eq!(cells.len(), 3);
        assert!(cells.iter().all(|row| row.len() == 4));
        let sheet = haze_contact_sheet(&i, &d, &[0.8, 0.9, 1.0], &[0.05, 0.10, 0.15, 0.20]).unwrap();
        assert!(sheet.height() > 3 * 16 && sheet.width() > 4 * 20);
    }

    #[test]
    fn zero_beta_cells_are_clean() {
        let i = photo();
        let d = synthetic_depth(SyntheticDepth::Radial, 16, 20).unwrap();
        let cells = haze_grid_cells(&i, &d, &[0.8, 1.0], &[0.0]).unwrap();
        assert!(cells.iter().flatten().all(|c| *c == i));
    }

    #[test]
    fn single_cell() {
        let i = photo();
        let d = synthetic_depth(SyntheticDepth::VRamp, 16, 20).unwrap();
        let cells = haze_grid_cells(&i, &d, &[0.9], &[0.1]).unwrap();
        assert_eq!(
            cells[0][0],
            haze_homogeneous(&i, &d, HazeScalars::new(0.9, 0.1).unwrap()).unwrap()
        );
        assert!(haze_grid_cells(&i, &d, &[], &[0.1]).is_err());
    }

    #[test]
    fn heatmap_colors() {
        let img = heatmap(&[vec![1.0, 0.0], vec![0.0, 1.0]], 20).unwrap();
        assert_eq!(img.dims(), (40, 40));
        assert_eq!(img.get(0, 0, 1), 1.0 - 0.95);
        assert_eq!(img.get(0, 39, 1), 1.0);
        assert!(heatmap(&[vec![1.0], vec![1.0]], 20).is_err());
    }
}
