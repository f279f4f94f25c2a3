//! Rasterization of point clouds and sample multisets.
//!
//! Solved fractal components render to binary PPM (P6) images, red on
//! white; sampled measures render to binary PGM (P5) density images with
//! log-scaled gray levels. Output bytes are a pure function of the
//! inputs, so fixed inputs give byte-identical files across runs and
//! thread counts.

use crate::fractal::{CompactApprox, Point};

/// Raster settings. `bbox` is `(xmin, ymin, xmax, ymax)`; `None` fits
/// the data with a 2% margin.
#[derive(Debug, Clone)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub bbox: Option<[f64; 4]>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            width: 512,
            height: 512,
            bbox: None,
        }
    }
}

impl RenderConfig {
    fn resolve_bbox(&self, points: &[Point], dim: usize) -> [f64; 4] {
        if let Some(bbox) = self.bbox {
            assert!(
                bbox[2] > bbox[0] && bbox[3] > bbox[1],
                "bounding box must be nondegenerate"
            );
            return bbox;
        }
        let mut xmin = f64::INFINITY;
        let mut xmax = f64::NEG_INFINITY;
        let mut ymin = f64::INFINITY;
        let mut ymax = f64::NEG_INFINITY;
        for p in points {
            xmin = xmin.min(p[0]);
            xmax = xmax.max(p[0]);
            if dim >= 2 {
                ymin = ymin.min(p[1]);
                ymax = ymax.max(p[1]);
            }
        }
        if dim < 2 {
            ymin = 0.0;
            ymax = 1.0;
        }
        // Tight bound plus a 2% margin; degenerate extents get padding.
        let pad = |lo: f64, hi: f64| {
            let extent = hi - lo;
            if extent > 0.0 {
                (lo - 0.02 * extent, hi + 0.02 * extent)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x0, x1) = pad(xmin, xmax);
        let (y0, y1) = pad(ymin, ymax);
        [x0, y0, x1, y1]
    }
}

/// Maps a point to pixel coordinates: floor scaling, clamped to the
/// image, y axis flipped so larger y is higher in the image.
fn to_pixel(p: Point, bbox: &[f64; 4], width: usize, height: usize) -> (usize, usize) {
    let fx = (p[0] - bbox[0]) / (bbox[2] - bbox[0]);
    let fy = (p[1] - bbox[1]) / (bbox[3] - bbox[1]);
    let px = ((fx * width as f64).floor() as isize).clamp(0, width as isize - 1) as usize;
    let py_up = ((fy * height as f64).floor() as isize).clamp(0, height as isize - 1) as usize;
    (px, height - 1 - py_up)
}

/// Renders a compact approximation as a red-on-white P6 image. For
/// one-dimensional data every point paints its full pixel column, giving
/// a horizontal strip.
pub fn render_set(cloud: &CompactApprox, cfg: &RenderConfig) -> Vec<u8> {
    let bbox = cfg.resolve_bbox(cloud.points(), cloud.dim());
    let (w, h) = (cfg.width, cfg.height);
    let mut mask = vec![false; w * h];
    for &p in cloud.points() {
        let (px, py) = to_pixel(p, &bbox, w, h);
        if cloud.dim() == 1 {
            for row in 0..h {
                mask[row * w + px] = true;
            }
        } else {
            mask[py * w + px] = true;
        }
    }
    let mut bytes = Vec::with_capacity(15 + 3 * w * h);
    bytes.extend_from_slice(format!("P6\n{w} {h}\n255\n").as_bytes());
    for on in mask {
        if on {
            bytes.extend_from_slice(&[255, 0, 0]);
        } else {
            bytes.extend_from_slice(&[255, 255, 255]);
        }
    }
    bytes
}

/// Is the pixel containing `point` foreground in a P6 image produced by
/// [`render_set`] with the same config? Used for membership checks.
pub fn set_pixel_is_foreground(
    image: &[u8],
    cfg: &RenderConfig,
    bbox: &[f64; 4],
    point: Point,
) -> bool {
    let (w, h) = (cfg.width, cfg.height);
    let (px, py) = to_pixel(point, bbox, w, h);
    let header_len = format!("P6\n{w} {h}\n255\n").len();
    let offset = header_len + 3 * (py * w + px);
    image[offset..offset + 3] == [255, 0, 0]
}

/// Renders a sample multiset as a log-scaled density P5 image: gray
/// value `255 * ln(1 + n) / ln(1 + nmax)` per pixel count `n`.
pub fn render_measure(samples: &[Point], dim: usize, cfg: &RenderConfig) -> Vec<u8> {
    let bbox = cfg.resolve_bbox(samples, dim);
    let (w, h) = (cfg.width, cfg.height);
    let mut counts = vec![0u64; w * h];
    for &p in samples {
        let q = if dim == 1 { [p[0], 0.5, 0.0] } else { p };
        let (px, py) = to_pixel(q, &bbox, w, h);
        counts[py * w + px] += 1;
    }
    let nmax = counts.iter().copied().max().unwrap_or(0);
    let denom = ((1 + nmax) as f64).ln();
    let mut bytes = Vec::with_capacity(15 + w * h);
    bytes.extend_from_slice(format!("P5\n{w} {h}\n255\n").as_bytes());
    for n in counts {
        let value = if n == 0 || nmax == 0 {
            0u8
        } else {
            (255.0 * ((1 + n) as f64).ln() / denom).round() as u8
        };
        bytes.push(value);
    }
    bytes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::CompactApprox;

    #[test]
    fn single_point_on_a_one_pixel_canvas() {
        let cloud = CompactApprox::new(2, vec![[0.3, 0.7, 0.0]], 0.0);
        let cfg = RenderConfig {
            width: 1,
            height: 1,
            bbox: Some([0.0, 0.0, 1.0, 1.0]),
        };
        let img = render_set(&cloud, &cfg);
        assert_eq!(&img[..9], b"P6\n1 1\n25");
        assert_eq!(&img[img.len() - 3..], &[255, 0, 0]);
    }

    #[test]
    fn headers_are_exact() {
        let cloud = CompactApprox::new(2, vec![[0.0, 0.0, 0.0]], 0.0);
        let cfg = RenderConfig {
            width: 7,
            height: 3,
            bbox: None,
        };
        let img = render_set(&cloud, &cfg);
        assert!(img.starts_with(b"P6\n7 3\n255\n"));
        assert_eq!(img.len(), "P6\n7 3\n255\n".len() + 3 * 21);
        let pgm = render_measure(&[[0.0, 0.0, 0.0]], 2, &cfg);
        assert!(pgm.starts_with(b"P5\n7 3\n255\n"));
        assert_eq!(pgm.len(), "P5\n7 3\n255\n".len() + 21);
    }

    #[test]
    fn single_sample_is_full_intensity() {
        let cfg = RenderConfig {
            width: 4,
            height: 4,
            bbox: Some([0.0, 0.0, 1.0, 1.0]),
        };
        let img = render_measure(&[[0.1, 0.1, 0.0]], 2, &cfg);
        let body = &img[img.len() - 16..];
        let nonzero: Vec<u8> = body.iter().copied().filter(|&b| b != 0).collect();
        assert_eq!(nonzero, vec![255]);
    }

    #[test]
    fn rendering_is_deterministic() {
        let cloud = CompactApprox::new(
            2,
            (0..100)
                .map(|i| [(i as f64) * 0.01, ((i * 7) % 100) as f64 * 0.01, 0.0])
                .collect(),
            0.0,
        );
        let cfg = RenderConfig::default();
        assert_eq!(render_set(&cloud, &cfg), render_set(&cloud, &cfg));
    }

    #[test]
    fn dim1_renders_a_full_column() {
        let cloud = CompactApprox::new(1, vec![[0.5, 0.0, 0.0]], 0.0);
        let cfg = RenderConfig {
            width: 4,
            height: 3,
            bbox: Some([0.0, 0.0, 1.0, 1.0]),
        };
        let img = render_set(&cloud, &cfg);
        let header = "P6\n4 3\n255\n".len();
        for row in 0..3 {
            let off = header + 3 * (row * 4 + 2);
            assert_eq!(&img[off..off + 3], &[255, 0, 0], "row {row}");
        }
    }

    #[test]
    fn y_axis_is_flipped() {
        // A point near the top of the bbox lands in the first row.
        let cloud = CompactApprox::new(2, vec![[0.5, 0.95, 0.0]], 0.0);
        let cfg = RenderConfig {
            width: 3,
            height: 3,
            bbox: Some([0.0, 0.0, 1.0, 1.0]),
        };
        let img = render_set(&cloud, &cfg);
        let header = "P6\n3 3\n255\n".len();
        assert_eq!(&img[header + 3..header + 6], &[255, 0, 0]);
    }
}
