//! Per-image transforms that turn plain digits into the second domain of
//! each task, plus padding to 32×32.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::{ImageTensor, SIDE};

/// Small row-major grayscale raster of arbitrary size.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

impl Raster {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}×{cols} raster needs {} pixels, got {}",
                rows * cols,
                pixels.len()
            )));
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            pixels: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.pixels[r * self.cols + c] = v;
    }

    /// Clamp-to-edge read.
    fn at(&self, r: isize, c: isize) -> f64 {
        let r = r.clamp(0, self.rows as isize - 1) as usize;
        let c = c.clamp(0, self.cols as isize - 1) as usize;
        self.get(r, c)
    }
}

/// Centers a 28×28 raster in a 32×32 image with a two-pixel zero border.
pub fn pad_to_32(raster: &Raster) -> Result<ImageTensor> {
    if raster.rows > SIDE || raster.cols > SIDE {
        return Err(Error::shape(format!(
            "{}×{} raster does not fit in {SIDE}×{SIDE}",
            raster.rows, raster.cols
        )));
    }
    let top = (SIDE - raster.rows) / 2;
    let left = (SIDE - raster.cols) / 2;
    Ok(ImageTensor::from_fn(|r, c| {
        if r >= top && r < top + raster.rows && c >= left && c < left + raster.cols {
            raster.get(r - top, c - left)
        } else {
            0.0
        }
    }))
}

/// Inverse of [`pad_to_32`] for 28×28 content.
pub fn crop_to_28(image: &ImageTensor) -> Raster {
    let mut out = Raster::zeros(28, 28);
    for r in 0..28 {
        for c in 0..28 {
            out.set(r, c, image.get(r + 2, c + 2));
        }
    }
    out
}

/// Max-dilation with a 2×2 structuring element: a lit pixel at `(r, c)`
/// spreads to the 2×2 block whose top-left corner it is.
pub fn make_bold(raster: &Raster) -> Raster {
    let mut out = Raster::zeros(raster.rows, raster.cols);
    for r in 0..raster.rows {
        for c in 0..raster.cols {
            let mut v = raster.get(r, c);
            if r > 0 {
                v = v.max(raster.get(r - 1, c));
            }
            if c > 0 {
                v = v.max(raster.get(r, c - 1));
            }
            if r > 0 && c > 0 {
                v = v.max(raster.get(r - 1, c - 1));
            }
            out.set(r, c, v);
        }
    }
    out
}

/// Adds `N(0, σ²)` to every pixel and clamps to `[0, 1]`.
pub fn make_noisy(raster: &Raster, sigma: f64, rng: &mut impl Rng) -> Result<Raster> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Config(format!("noise sigma must be ≥ 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(raster.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let pixels = raster
        .pixels
        .iter()
        .map(|p| (p + normal.sample(rng)).clamp(0.0, 1.0))
        .collect();
    Raster::new(raster.rows, raster.cols, pixels)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    /// Percentile (0–100) of non-zero gradient magnitudes used as the weak threshold.
    pub low_percentile: f64,
    /// Percentile used as the strong threshold.
    pub high_percentile: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            low_percentile: 70.0,
            high_percentile: 90.0,
        }
    }
}

fn gaussian_blur(raster: &Raster, sigma: f64) -> Raster {
    if sigma <= 0.0 {
        return raster.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let mut tmp = Raster::zeros(raster.rows, raster.cols);
    for r in 0..raster.rows {
        for c in 0..raster.cols {
            let v = (-radius..=radius)
                .zip(&kernel)
                .map(|(d, k)| k * raster.at(r as isize, c as isize + d))
                .sum();
            tmp.set(r, c, v);
        }
    }
    let mut out = Raster::zeros(raster.rows, raster.cols);
    for r in 0..raster.rows {
        for c in 0..raster.cols {
            let v = (-radius..=radius)
                .zip(&kernel)
                .map(|(d, k)| k * tmp.at(r as isize + d, c as isize))
                .sum();
            out.set(r, c, v);
        }
    }
    out
}

/// Nearest-rank percentile of a non-empty sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Canny edges: Gaussian smoothing, Sobel gradients, non-maximum
/// suppression and hysteresis with per-image percentile thresholds.
/// Output pixels are exactly 0 or 1.
pub fn make_edges(raster: &Raster, params: &CannyParams) -> Raster {
    let (rows, cols) = (raster.rows, raster.cols);
    let smooth = gaussian_blur(raster, params.sigma);
    let mut gx = Raster::zeros(rows, cols);
    let mut gy = Raster::zeros(rows, cols);
    let mut mag = Raster::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let (ri, ci) = (r as isize, c as isize);
            let p = |dr: isize, dc: isize| smooth.at(ri + dr, ci + dc);
            let x = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let y = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            gx.set(r, c, x);
            gy.set(r, c, y);
            mag.set(r, c, x.hypot(y));
        }
    }

    let mut nonzero: Vec<f64> = mag.pixels.iter().copied().filter(|m| *m > 1e-12).collect();
    if nonzero.is_empty() {
        return Raster::zeros(rows, cols);
    }
    nonzero.sort_by(f64::total_cmp);
    let low = percentile(&nonzero, params.low_percentile);
    let high = percentile(&nonzero, params.high_percentile);

    // Non-maximum suppression along the quantized gradient direction. Ties
    // go to the pixel further along the direction so plateaus stay one wide.
    let mut thin = Raster::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let m = mag.get(r, c);
            if m <= 1e-12 {
                continue;
            }
            let angle = gy.get(r, c).atan2(gx.get(r, c)).to_degrees().rem_euclid(180.0);
            let (dr, dc): (isize, isize) = if !(22.5..157.5).contains(&angle) {
                (0, 1)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (1, 0)
            } else {
                (1, -1)
            };
            let (ri, ci) = (r as isize, c as isize);
            let neighbor = |sr: isize, sc: isize| -> f64 {
                let (nr, nc) = (ri + sr, ci + sc);
                if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                    0.0
                } else {
                    mag.get(nr as usize, nc as usize)
                }
            };
            if m > neighbor(dr, dc) && m >= neighbor(-dr, -dc) {
                thin.set(r, c, m);
            }
        }
    }

    let mut out = Raster::zeros(rows, cols);
    let mut queue = VecDeque::new();
    for r in 0..rows {
        for c in 0..cols {
            if thin.get(r, c) >= high {
                out.set(r, c, 1.0);
                queue.push_back((r, c));
            }
        }
    }
    while let Some((r, c)) = queue.pop_front() {
        for dr in -1isize..=1 {
            for dc in -1isize..=1 {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                if out.get(nr, nc) == 0.0 && thin.get(nr, nc) >= low {
                    out.set(nr, nc, 1.0);
                    queue.push_back((nr, nc));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square(size: usize, top: usize, side: usize) -> Raster {
        let mut r = Raster::zeros(size, size);
        for i in top..top + side {
            for j in top..top + side {
                r.set(i, j, 1.0);
            }
        }
        r
    }

    #[test]
    fn padding_is_centered_and_reversible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let raw = Raster::new(28, 28, (0..784).map(|_| rng.gen()).collect()).unwrap();
        let img = pad_to_32(&raw).unwrap();
        assert_eq!(img.get(0, 0), 0.0);
        assert_eq!(img.get(31, 31), 0.0);
        assert_eq!(img.get(2, 2), raw.get(0, 0));
        assert_eq!(img.get(29, 29), raw.get(27, 27));
        assert_eq!(crop_to_28(&img), raw);
    }

    #[test]
    fn bold_spreads_down_and_right() {
        let mut r = Raster::zeros(6, 6);
        r.set(2, 3, 0.8);
        let b = make_bold(&r);
        let lit: Vec<(usize, usize)> = (0..6)
            .flat_map(|i| (0..6).map(move |j| (i, j)))
            .filter(|&(i, j)| b.get(i, j) > 0.0)
            .collect();
        assert_eq!(lit, vec![(2, 3), (2, 4), (3, 3), (3, 4)]);
        assert!(lit.iter().all(|&(i, j)| b.get(i, j) == 0.8));
        assert_eq!(make_bold(&Raster::zeros(4, 4)), Raster::zeros(4, 4));
    }

    #[test]
    fn noise_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = square(28, 8, 10);
        assert_eq!(make_noisy(&r, 0.0, &mut rng).unwrap(), r);
        let n = make_noisy(&r, 0.25, &mut rng).unwrap();
        assert!(n.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(make_noisy(&r, -1.0, &mut rng).is_err());
    }

    #[test]
    fn edges_of_blank_image_are_blank() {
        assert_eq!(make_edges(&Raster::zeros(28, 28), &CannyParams::default()), Raster::zeros(28, 28));
    }

    fn neighbors8(size: usize, r: usize, c: usize) -> impl Iterator<Item = (usize, usize)> {
        (-1isize..=1).flat_map(move |dr| {
            (-1isize..=1).filter_map(move |dc| {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                ((dr, dc) != (0, 0) && nr >= 0 && nc >= 0 && nr < size as isize && nc < size as isize)
                    .then_some((nr as usize, nc as usize))
            })
        })
    }

    #[test]
    fn square_gives_thin_closed_boundary() {
        let size = 28;
        let e = make_edges(&square(size, 9, 10), &CannyParams::default());
        assert!(e.pixels.iter().all(|p| *p == 0.0 || *p == 1.0));
        let lit: Vec<(usize, usize)> = (0..size)
            .flat_map(|i| (0..size).map(move |j| (i, j)))
            .filter(|&(i, j)| e.get(i, j) == 1.0)
            .collect();
        assert!(!lit.is_empty());

        // one pixel wide: no fully lit 2×2 block
        for i in 0..size - 1 {
            for j in 0..size - 1 {
                let block = e.get(i, j) + e.get(i + 1, j) + e.get(i, j + 1) + e.get(i + 1, j + 1);
                assert!(block < 4.0, "2×2 block at ({i},{j})");
            }
        }

        // connected
        let mut seen = vec![false; size * size];
        let mut stack = vec![lit[0]];
        seen[lit[0].0 * size + lit[0].1] = true;
        let mut count = 0;
        while let Some((r, c)) = stack.pop() {
            count += 1;
            for (nr, nc) in neighbors8(size, r, c) {
                if e.get(nr, nc) == 1.0 && !seen[nr * size + nc] {
                    seen[nr * size + nc] = true;
                    stack.push((nr, nc));
                }
            }
        }
        assert_eq!(count, lit.len());

        // closed: background flooded 4-connected from the border cannot reach the centre
        let mut outside = vec![false; size * size];
        let mut stack: Vec<(usize, usize)> = (0..size)
            .flat_map(|k| [(0, k), (size - 1, k), (k, 0), (k, size - 1)])
            .filter(|&(r, c)| e.get(r, c) == 0.0)
            .collect();
        while let Some((r, c)) = stack.pop() {
            if outside[r * size + c] {
                continue;
            }
            outside[r * size + c] = true;
            for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr >= 0 && nc >= 0 && nr < size as isize && nc < size as isize {
                    let (nr, nc) = (nr as usize, nc as usize);
                    if e.get(nr, nc) == 0.0 && !outside[nr * size + nc] {
                        stack.push((nr, nc));
                    }
                }
            }
        }
        assert!(!outside[14 * size + 14], "boundary is not closed");
    }
}
