//! Classical detectors: colour-histogram peak mass, and HOG features fed to a
//! linear hinge-loss classifier.

use crate::data::Label;
use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

pub const COLOR_BINS: usize = 64;
pub const DEFAULT_TOP_K: usize = 8;
pub const DEFAULT_TAU: f64 = 0.6;

pub const HOG_CELL: usize = 8;
pub const HOG_ORIENTATIONS: usize = 9;
pub const HOG_BLOCK: usize = 2;
pub const HOG_EPSILON: f32 = 1e-6;
/// Descriptor length for a 56x56 image: 6*6 blocks of 2*2 cells of 9 bins.
pub const HOG_LEN_56: usize = 6 * 6 * HOG_BLOCK * HOG_BLOCK * HOG_ORIENTATIONS;

fn dims3(pixels: &Tensor) -> Result<(usize, usize)> {
    match *pixels.shape() {
        [3, h, w] => Ok((h, w)),
        ref s => Err(Error::ShapeMismatch(format!(
            "expected [3, H, W] pixels, got {s:?}"
        ))),
    }
}

/// Normalised 4x4x4 RGB histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorHistogram {
    pub bins: [f64; COLOR_BINS],
}

/// Bin of an RGB triple: top two bits of each channel, red most significant.
pub fn color_bin(rgb: [u8; 3]) -> usize {
    ((rgb[0] >> 6) as usize) << 4 | ((rgb[1] >> 6) as usize) << 2 | (rgb[2] >> 6) as usize
}

fn to_byte(v: f32) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn color_histogram(pixels: &Tensor) -> Result<ColorHistogram> {
    let (h, w) = dims3(pixels)?;
    let plane = h * w;
    let d = pixels.data();
    let mut counts = [0u32; COLOR_BINS];
    for i in 0..plane {
        let rgb = [
            to_byte(d[i]),
            to_byte(d[plane + i]),
            to_byte(d[2 * plane + i]),
        ];
        counts[color_bin(rgb)] += 1;
    }
    let mut bins = [0.0; COLOR_BINS];
    for (b, &c) in bins.iter_mut().zip(&counts) {
        *b = c as f64 / plane as f64;
    }
    Ok(ColorHistogram { bins })
}

/// Mass held by the `top_k` fullest bins.
pub fn peak_spam_score(hist: &ColorHistogram, top_k: usize) -> f64 {
    let mut sorted = hist.bins;
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    sorted.iter().take(top_k).sum::<f64>().min(1.0)
}

/// Flags an image as spam when its top-k histogram mass reaches `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramDetector {
    pub top_k: usize,
    pub tau: f64,
}

impl Default for HistogramDetector {
    fn default() -> Self {
        HistogramDetector {
            top_k: DEFAULT_TOP_K,
            tau: DEFAULT_TAU,
        }
    }
}

impl HistogramDetector {
    pub fn score(&self, pixels: &Tensor) -> Result<f64> {
        Ok(peak_spam_score(&color_histogram(pixels)?, self.top_k))
    }

    pub fn classify(&self, pixels: &Tensor) -> Result<Label> {
        Ok(if self.score(pixels)? >= self.tau {
            Label::Spam
        } else {
            Label::Ham
        })
    }
}

/// Luma `0.299 R + 0.587 G + 0.114 B`, row-major.
pub fn grayscale(pixels: &Tensor) -> Result<Vec<f32>> {
    let (h, w) = dims3(pixels)?;
    let plane = h * w;
    let d = pixels.data();
    Ok((0..plane)
        .map(|i| 0.299 * d[i] + 0.587 * d[plane + i] + 0.114 * d[2 * plane + i])
        .collect())
}

/// Unnormalised per-cell orientation histograms, `[cells_y][cells_x][9]` flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct CellHistograms {
    pub cells_y: usize,
    pub cells_x: usize,
    pub values: Vec<f32>,
}

impl CellHistograms {
    pub fn cell(&self, cy: usize, cx: usize) -> &[f32] {
        let start = (cy * self.cells_x + cx) * HOG_ORIENTATIONS;
        &self.values[start..start + HOG_ORIENTATIONS]
    }
}

/// Gradient votes per 8x8 cell.
///
/// Gradients are central differences with replicated borders. Orientation is
/// unsigned (mod 180 degrees); bin `k` is centred on `20k` degrees and each pixel
/// splits its magnitude linearly between the two nearest centres.
pub fn hog_cell_histograms(pixels: &Tensor) -> Result<CellHistograms> {
    let (h, w) = dims3(pixels)?;
    if h < HOG_CELL * HOG_BLOCK || w < HOG_CELL * HOG_BLOCK {
        return Err(Error::ShapeMismatch(format!(
            "HOG needs at least {0}x{0} pixels, got {h}x{w}",
            HOG_CELL * HOG_BLOCK
        )));
    }
    let gray = grayscale(pixels)?;
    let (cells_y, cells_x) = (h / HOG_CELL, w / HOG_CELL);
    let mut values = vec![0.0f32; cells_y * cells_x * HOG_ORIENTATIONS];
    let bin_width = 180.0 / HOG_ORIENTATIONS as f32;
    for y in 0..cells_y * HOG_CELL {
        for x in 0..cells_x * HOG_CELL {
            let at = |yy: usize, xx: usize| gray[yy * w + xx];
            let gx = at(y, (x + 1).min(w - 1)) - at(y, x.saturating_sub(1));
            let gy = at((y + 1).min(h - 1), x) - at(y.saturating_sub(1), x);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            if angle >= 180.0 {
                angle -= 180.0;
            }
            let pos = angle / bin_width;
            let lo = pos.floor();
            let frac = pos - lo;
            let lo = lo as usize % HOG_ORIENTATIONS;
            let hi = (lo + 1) % HOG_ORIENTATIONS;
            let cell = ((y / HOG_CELL) * cells_x + x / HOG_CELL) * HOG_ORIENTATIONS;
            values[cell + lo] += mag * (1.0 - frac);
            values[cell + hi] += mag * frac;
        }
    }
    Ok(CellHistograms {
        cells_y,
        cells_x,
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HogDescriptor {
    pub values: Vec<f32>,
}

/// Cell histograms regrouped into overlapping 2x2-cell blocks (stride one cell),
/// each block scaled by `1 / sqrt(|v|^2 + eps^2)`.
pub fn hog_features(pixels: &Tensor) -> Result<HogDescriptor> {
    let cells = hog_cell_histograms(pixels)?;
    let block_len = HOG_BLOCK * HOG_BLOCK * HOG_ORIENTATIONS;
    let (by_n, bx_n) = (cells.cells_y - HOG_BLOCK + 1, cells.cells_x - HOG_BLOCK + 1);
    let mut values = Vec::with_capacity(by_n * bx_n * block_len);
    for by in 0..by_n {
        for bx in 0..bx_n {
            let start = values.len();
            for dy in 0..HOG_BLOCK {
                for dx in 0..HOG_BLOCK {
                    values.extend_from_slice(cells.cell(by + dy, bx + dx));
                }
            }
            let block = &mut values[start..];
            let norm =
                (block.iter().map(|v| v * v).sum::<f32>() + HOG_EPSILON * HOG_EPSILON).sqrt();
            block.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(HogDescriptor { values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub weights: Vec<f32>,
    pub bias: f32,
}

impl LinearClassifier {
    pub fn decision(&self, x: &[f32]) -> f32 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f32>() + self.bias
    }

    /// Spam iff `w.x + b >= 0`.
    pub fn predict(&self, x: &[f32]) -> Label {
        if self.decision(x) >= 0.0 {
            Label::Spam
        } else {
            Label::Ham
        }
    }

    /// `reg/2 |w|^2 + mean(max(0, 1 - y (w.x + b)))`.
    pub fn hinge_objective(&self, features: &[Vec<f32>], labels: &[i8], reg: f32) -> f64 {
        let norm2: f64 = self.weights.iter().map(|&w| (w as f64).powi(2)).sum();
        let hinge: f64 = features
            .iter()
            .zip(labels)
            .map(|(x, &y)| (1.0 - y as f64 * self.decision(x) as f64).max(0.0))
            .sum();
        0.5 * reg as f64 * norm2 + hinge / features.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearConfig {
    pub epochs: usize,
    pub lr: f32,
    pub reg: f32,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            epochs: 30,
            lr: 0.01,
            reg: 1e-3,
            seed: 0,
        }
    }
}

/// `+1` for spam, `-1` for ham.
pub fn signed_label(label: Label) -> i8 {
    match label {
        Label::Spam => 1,
        Label::Ham => -1,
    }
}

/// Stochastic subgradient descent on the L2-regularised hinge loss.
pub fn train_linear(
    features: &[Vec<f32>],
    labels: &[i8],
    config: &LinearConfig,
) -> Result<LinearClassifier> {
    train_linear_traced(features, labels, config).map(|(clf, _)| clf)
}

/// As [`train_linear`], also returning the objective after every epoch.
pub fn train_linear_traced(
    features: &[Vec<f32>],
    labels: &[i8],
    config: &LinearConfig,
) -> Result<(LinearClassifier, Vec<f64>)> {
    if features.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::InvalidArgument(format!(
            "labels must be +1/-1, got {y}"
        )));
    }
    if !labels.contains(&1) || !labels.contains(&-1) {
        return Err(Error::InvalidArgument(
            "linear classifier needs samples of both classes".into(),
        ));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::ShapeMismatch("feature rows differ in length".into()));
    }
    let mut clf = LinearClassifier {
        weights: vec![0.0; dim],
        bias: 0.0,
    };
    let mut rng = Rng::new(config.seed);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let shrink = 1.0 - config.lr * config.reg;
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            let (x, y) = (&features[i], labels[i] as f32);
            let margin = y * clf.decision(x);
            clf.weights.iter_mut().for_each(|w| *w *= shrink);
            if margin < 1.0 {
                let step = config.lr * y;
                clf.weights
                    .iter_mut()
                    .zip(x)
                    .for_each(|(w, v)| *w += step * v);
                clf.bias += step;
            }
        }
        trace.push(clf.hinge_objective(features, labels, config.reg));
    }
    Ok((clf, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(h: usize, w: usize, f: impl Fn(usize, usize, usize) -> f32) -> Tensor {
        let mut data = Vec::with_capacity(3 * h * w);
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    data.push(f(c, y, x));
                }
            }
        }
        Tensor::from_vec(&[3, h, w], data).unwrap()
    }

    fn random_image(seed: u64) -> Tensor {
        let mut rng = Rng::new(seed);
        let data = (0..3 * 56 * 56)
            .map(|_| rng.below(256) as f32 / 255.0)
            .collect();
        Tensor::from_vec(&[3, 56, 56], data).unwrap()
    }

    #[test]
    fn constant_image_fills_one_bin() {
        let h = color_histogram(&image(56, 56, |_, _, _| 0.3)).unwrap();
        assert_eq!(h.bins.iter().filter(|&&b| b == 1.0).count(), 1);
        assert_eq!(h.bins.iter().filter(|&&b| b == 0.0).count(), 63);
        assert_eq!(peak_spam_score(&h, 8), 1.0);
        assert_eq!(
            HistogramDetector::default()
                .classify(&image(8, 8, |_, _, _| 0.3))
                .unwrap(),
            Label::Spam
        );
    }

    #[test]
    fn two_colour_image_splits_mass() {
        let h = color_histogram(&image(10, 10, |_, y, _| if y < 5 { 0.0 } else { 1.0 })).unwrap();
        let mut filled: Vec<f64> = h.bins.iter().copied().filter(|&b| b > 0.0).collect();
        filled.sort_by(f64::total_cmp);
        assert_eq!(filled, vec![0.5, 0.5]);
    }

    #[test]
    fn uniform_histogram_scores_an_eighth() {
        let h = ColorHistogram {
            bins: [1.0 / 64.0; 64],
        };
        let score = peak_spam_score(&h, 8);
        assert!((score - 0.125).abs() < 1e-12);
        assert!(score < DEFAULT_TAU);
    }

    #[test]
    fn histogram_matches_per_pixel_tally() {
        let img = random_image(42);
        let h = color_histogram(&img).unwrap();
        let mut tally = [0usize; 64];
        let d = img.data();
        for i in 0..56 * 56 {
            let q = |c: usize| ((d[c * 3136 + i] * 255.0).round() as usize) / 64;
            tally[q(0) * 16 + q(1) * 4 + q(2)] += 1;
        }
        for (b, &t) in h.bins.iter().zip(&tally) {
            assert_eq!(*b, t as f64 / 3136.0);
        }
        assert!((h.bins.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_image_has_zero_hog() {
        let d = hog_features(&image(56, 56, |c, _, _| 0.2 * c as f32)).unwrap();
        assert_eq!(d.values.len(), HOG_LEN_56);
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_edge_votes_horizontal_gradient_bin() {
        let d =
            hog_cell_histograms(&image(56, 56, |_, _, x| if x < 28 { 0.0 } else { 1.0 })).unwrap();
        let mut totals = [0.0f32; HOG_ORIENTATIONS];
        for (i, v) in d.values.iter().enumerate() {
            totals[i % HOG_ORIENTATIONS] += v;
        }
        let sum: f32 = totals.iter().sum();
        assert!(sum > 0.0);
        assert!((totals[0] / sum - 1.0).abs() < 1e-6, "{totals:?}");
    }

    /// Independent per-pixel reference: computes each block directly from the
    /// image, with angles binned from the signed atan2 in radians.
    fn reference_hog(img: &Tensor) -> Vec<f32> {
        let d = img.data();
        let gray = |y: i64, x: i64| -> f64 {
            let y = y.clamp(0, 55) as usize;
            let x = x.clamp(0, 55) as usize;
            let i = y * 56 + x;
            0.299 * d[i] as f64 + 0.587 * d[3136 + i] as f64 + 0.114 * d[6272 + i] as f64
        };
        let cell_hist = |cy: usize, cx: usize| -> [f64; 9] {
            let mut hist = [0.0; 9];
            for y in cy * 8..cy * 8 + 8 {
                for x in cx * 8..cx * 8 + 8 {
                    let (yi, xi) = (y as i64, x as i64);
                    let gx = gray(yi, xi + 1) - gray(yi, xi - 1);
                    let gy = gray(yi + 1, xi) - gray(yi - 1, xi);
                    let mag = gx.hypot(gy);
                    if mag == 0.0 {
                        continue;
                    }
                    let theta = gy.atan2(gx).rem_euclid(std::f64::consts::PI);
                    let pos = theta / (std::f64::consts::PI / 9.0);
                    let lo = pos.floor();
                    let frac = pos - lo;
                    hist[lo as usize % 9] += mag * (1.0 - frac);
                    hist[(lo as usize + 1) % 9] += mag * frac;
                }
            }
            hist
        };
        let mut out = Vec::new();
        for by in 0..6 {
            for bx in 0..6 {
                let mut block = Vec::new();
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    block.extend(cell_hist(by + dy, bx + dx));
                }
                let norm = (block.iter().map(|v| v * v).sum::<f64>() + 1e-12).sqrt();
                out.extend(block.iter().map(|v| (v / norm) as f32));
            }
        }
        out
    }

    #[test]
    fn hog_matches_reference() {
        for seed in [1, 2, 3] {
            let img = random_image(seed);
            let got = hog_features(&img).unwrap().values;
            let want = reference_hog(&img);
            assert_eq!(got.len(), want.len());
            let max = got
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max);
            assert!(max < 1e-5, "max abs diff {max}");
        }
    }

    #[test]
    fn hog_blocks_are_normalised() {
        let d = hog_features(&random_image(9)).unwrap();
        assert!(d.values.iter().all(|&v| v >= 0.0));
        for block in d.values.chunks(36) {
            let norm = block.iter().map(|v| v * v).sum::<f32>().sqrt();
            assert!(norm <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn linear_separable_toy() {
        let features = vec![
            vec![2.0, 1.0],
            vec![1.5, 2.0],
            vec![-1.0, -2.0],
            vec![-2.0, -0.5],
        ];
        let labels = vec![1, 1, -1, -1];
        let config = LinearConfig {
            epochs: 200,
            lr: 0.01,
            reg: 1e-3,
            seed: 4,
        };
        let (clf, trace) = train_linear_traced(&features, &labels, &config).unwrap();
        for (x, &y) in features.iter().zip(&labels) {
            assert_eq!(signed_label(clf.predict(x)), y);
        }
        let tail = &trace[trace.len() - 10..];
        for pair in tail.windows(2) {
            assert!(pair[1] <= pair[0], "objective rose: {tail:?}");
        }
    }

    #[test]
    fn identical_features_follow_majority() {
        let features = vec![vec![0.5, 0.5]; 10];
        let labels = vec![1, 1, 1, 1, 1, 1, 1, -1, -1, -1];
        let clf = train_linear(&features, &labels, &LinearConfig::default()).unwrap();
        let correct = labels
            .iter()
            .filter(|&&y| signed_label(clf.predict(&features[0])) == y)
            .count();
        assert_eq!(correct, 7);
    }

    #[test]
    fn linear_rejects_single_class() {
        let features = vec![vec![1.0], vec![2.0]];
        assert!(train_linear(&features, &[1, 1], &LinearConfig::default()).is_err());
        assert!(train_linear(&features, &[1, 0], &LinearConfig::default()).is_err());
        assert!(train_linear(&features, &[1], &LinearConfig::default()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bins_depend_only_on_quantised_triple(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255,
                                                    dr in 0u8..64, dg in 0u8..64, db in 0u8..64) {
                let requant = |v: u8, d: u8| (v & 0xC0) | d;
                prop_assert_eq!(color_bin([r, g, b]), color_bin([requant(r, dr), requant(g, dg), requant(b, db)]));
            }

            #[test]
            fn moving_mass_into_top_bins_never_lowers_score(weights in prop::collection::vec(0.0f64..1.0, 64),
                                                             from in 0usize..64, share in 0.0f64..1.0) {
                let total: f64 = weights.iter().sum::<f64>().max(1e-9);
                let mut bins = [0.0; 64];
                for (b, w) in bins.iter_mut().zip(&weights) {
                    *b = w / total;
                }
                let before = ColorHistogram { bins };
                let mut order: Vec<usize> = (0..64).collect();
                order.sort_by(|&a, &b| bins[b].total_cmp(&bins[a]));
                let target = order[0];
                let mut moved = bins;
                let amount = moved[from] * share;
                moved[from] -= amount;
                moved[target] += amount;
                let after = ColorHistogram { bins: moved };
                prop_assert!(peak_spam_score(&after, 8) + 1e-12 >= peak_spam_score(&before, 8));
            }
        }
    }
}
