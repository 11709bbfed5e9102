//! Seeded synthetic spam/ham corpus for desk-scale experiments.
//!
//! Spam images are a flat or gently shaded background from a small palette with
//! high-contrast, axis-aligned "text" strokes on top, so their colour histogram
//! has a few isolated peaks. Ham images are smooth multi-directional colour
//! gradients with low-amplitude noise, so their histogram is spread out.
//!
//! Every image is a pure function of `(corpus seed, class, index)`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{encode_ppm, preprocess, Dataset, Label, LabeledImage, RgbImage};
use crate::error::{Error, Result};
use crate::tensor::Rng;

pub const MANIFEST_NAME: &str = "manifest.tsv";

const MIN_SIDE: usize = 56;
const MAX_SIDE: usize = 112;

/// Share of 64 uniform colour bins any single bin may hold in a ham image.
pub const HAM_MAX_BIN_SHARE: f64 = 0.15;

const PALETTE: [[u8; 3]; 10] = [
    [255, 255, 255],
    [250, 240, 190],
    [20, 20, 20],
    [220, 30, 30],
    [30, 60, 200],
    [255, 215, 0],
    [0, 150, 70],
    [120, 0, 140],
    [255, 130, 0],
    [200, 230, 255],
];

fn luma(c: [u8; 3]) -> f32 {
    0.299 * c[0] as f32 + 0.587 * c[1] as f32 + 0.114 * c[2] as f32
}

fn pick_contrasting(rng: &mut Rng, against: [u8; 3], min_gap: f32) -> [u8; 3] {
    let options: Vec<[u8; 3]> = PALETTE
        .iter()
        .copied()
        .filter(|&c| (luma(c) - luma(against)).abs() >= min_gap)
        .collect();
    options[rng.below(options.len())]
}

fn fill_rect(img: &mut RgbImage, x0: usize, y0: usize, w: usize, h: usize, rgb: [u8; 3]) {
    for y in y0..(y0 + h).min(img.height()) {
        for x in x0..(x0 + w).min(img.width()) {
            img.put(x, y, rgb);
        }
    }
}

/// One line of pseudo-text: words made of 1-2 px glyph strokes.
fn draw_text_line(rng: &mut Rng, img: &mut RgbImage, y: usize, height: usize, color: [u8; 3]) {
    let margin = 2 + rng.below(img.width() / 8 + 1);
    let mut x = margin;
    let right = img.width().saturating_sub(margin);
    while x + 4 < right {
        let glyphs = 2 + rng.below(6);
        for _ in 0..glyphs {
            if x + 3 >= right {
                break;
            }
            let stroke = 1 + rng.below(2);
            let glyph_w = stroke + 1 + rng.below(3);
            // vertical stem, optional cap and base bars
            fill_rect(img, x, y, stroke, height, color);
            if rng.bernoulli(0.6) {
                fill_rect(img, x, y, glyph_w, stroke, color);
            }
            if rng.bernoulli(0.5) {
                fill_rect(img, x, y + height - stroke, glyph_w, stroke, color);
            }
            if rng.bernoulli(0.3) {
                fill_rect(img, x + glyph_w - stroke, y, stroke, height, color);
            }
            x += glyph_w + 1 + rng.below(2);
        }
        x += 3 + rng.below(4);
    }
}

fn random_side(rng: &mut Rng) -> usize {
    MIN_SIDE + rng.below(MAX_SIDE - MIN_SIDE + 1)
}

pub fn render_spam(rng: &mut Rng) -> RgbImage {
    let (w, h) = (random_side(rng), random_side(rng));
    let bg = PALETTE[rng.below(PALETTE.len())];
    let mut img = RgbImage::filled(w, h, bg).expect("non-zero size");

    // Gentle vertical shading of at most 23 levels.
    if rng.bernoulli(0.4) {
        let depth = rng.below(24) as f32;
        for y in 0..h {
            let shade = depth * y as f32 / h as f32;
            for x in 0..w {
                let p = img.get(x, y);
                img.put(x, y, p.map(|v| (v as f32 - shade).max(0.0) as u8));
            }
        }
    }

    let ink = pick_contrasting(rng, bg, 90.0);
    let mut y = 3 + rng.below(h / 6);
    if rng.bernoulli(0.5) {
        // banner across the top with its own text colour
        let band = pick_contrasting(rng, ink, 60.0);
        let band_h = 10 + rng.below(6);
        fill_rect(&mut img, 0, y, w, band_h, band);
        draw_text_line(rng, &mut img, y + 2, band_h - 4, ink);
        y += band_h + 3;
    }
    while y + 8 < h.saturating_sub(3) {
        let line_h = 5 + rng.below(5);
        if rng.bernoulli(0.85) {
            draw_text_line(rng, &mut img, y, line_h, ink);
        }
        y += line_h + 3 + rng.below(5);
    }
    img
}

fn color_bin(p: [u8; 3]) -> usize {
    ((p[0] >> 6) as usize) << 4 | ((p[1] >> 6) as usize) << 2 | (p[2] >> 6) as usize
}

fn max_bin_share(img: &RgbImage) -> f64 {
    let mut counts = [0usize; 64];
    for p in img.pixels().chunks_exact(3) {
        counts[color_bin([p[0], p[1], p[2]])] += 1;
    }
    *counts.iter().max().unwrap() as f64 / (img.width() * img.height()) as f64
}

fn render_ham_once(rng: &mut Rng, spread: f32) -> RgbImage {
    let (w, h) = (random_side(rng), random_side(rng));
    let base_angle = rng.uniform_range(0.0, std::f32::consts::TAU);
    // Each channel ramps along its own direction, roughly 120 degrees apart,
    // with a low-frequency ripple on top.
    let channels: Vec<(f32, f32, f32, f32, f32, f32, f32)> = (0..3)
        .map(|c| {
            let angle = base_angle
                + c as f32 * std::f32::consts::TAU / 3.0
                + rng.uniform_range(-0.35, 0.35);
            let amp = rng.uniform_range(spread, (spread + 80.0).min(250.0));
            let lo = rng.uniform_range(0.0, 255.0 - amp);
            let ripple = rng.uniform_range(0.0, 25.0);
            let freq = rng.uniform_range(1.0, 3.0);
            let phase = rng.uniform_range(0.0, std::f32::consts::TAU);
            let cycles = rng.uniform_range(0.5, 1.5);
            (angle, amp, lo, ripple, freq, phase, cycles)
        })
        .collect();
    let mut px = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = (x as f32 / (w - 1) as f32, y as f32 / (h - 1) as f32);
            for &(angle, amp, lo, ripple, freq, phase, cycles) in &channels {
                let (dx, dy) = (angle.cos(), angle.sin());
                // position along the ramp, mapped to [0, 1]
                let t = ((u - 0.5) * dx + (v - 0.5) * dy) / (dx.abs() + dy.abs()) + 0.5;
                let wave =
                    ripple * (freq * std::f32::consts::TAU * (u * dy - v * dx) + phase).sin();
                let noise = rng.uniform_range(-6.0, 6.0);
                // Triangle wave: the channel sweeps its range `2 * cycles` times.
                let sweep = (cycles * t).fract() * 2.0;
                let tri = if sweep <= 1.0 { sweep } else { 2.0 - sweep };
                let value = lo + amp * tri + wave + noise;
                px.push(value.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RgbImage::new(w, h, px).expect("consistent size")
}

pub fn render_ham(rng: &mut Rng) -> RgbImage {
    let mut spread = rng.uniform_range(110.0, 200.0);
    loop {
        let img = render_ham_once(rng, spread);
        if max_bin_share(&img) <= HAM_MAX_BIN_SHARE {
            return img;
        }
        spread = (spread + 20.0).min(240.0);
    }
}

/// The `index`-th image of class `label` in the corpus generated from `seed`.
pub fn synthetic_image(label: Label, seed: u64, index: usize) -> RgbImage {
    let stream = ((label.bit() as u64) << 48) | index as u64;
    let mut rng = Rng::with_stream(seed, stream);
    match label {
        Label::Spam => render_spam(&mut rng),
        Label::Ham => render_ham(&mut rng),
    }
}

/// The corpus [`generate_synthetic_corpus`] would write, built in memory.
/// Sample ids and pixels match what [`crate::data::load_directory`] reads back.
pub fn synthetic_dataset(n_spam: usize, n_ham: usize, seed: u64) -> Result<Dataset> {
    let mut samples = Vec::with_capacity(n_spam + n_ham);
    for (label, count) in [(Label::Spam, n_spam), (Label::Ham, n_ham)] {
        for i in 0..count {
            samples.push(LabeledImage {
                pixels: preprocess(&synthetic_image(label, seed, i))?,
                label,
                source_id: format!("{0}/{0}_{i:04}.ppm", label.name()),
            });
        }
    }
    Ok(Dataset::new(samples))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path relative to the corpus root, `/`-separated.
    pub path: String,
    pub label: Label,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub path: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// One `path\tlabel\tseed` line per file.
    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.path, e.label, e.seed))
            .collect()
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                let mut parts = line.split('\t');
                let (Some(p), Some(l), Some(s), None) =
                    (parts.next(), parts.next(), parts.next(), parts.next())
                else {
                    return Err(Error::InvalidArgument(format!(
                        "bad manifest line `{line}`"
                    )));
                };
                Ok(ManifestEntry {
                    path: p.to_string(),
                    label: l.parse()?,
                    seed: s
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad seed in `{line}`")))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Manifest {
            path: path.to_path_buf(),
            entries,
        })
    }
}

/// Write `spam/spam_NNNN.ppm`, `ham/ham_NNNN.ppm` and `manifest.tsv` under `out_dir`.
pub fn generate_synthetic_corpus(
    n_spam: usize,
    n_ham: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Manifest> {
    if n_spam == 0 || n_ham == 0 {
        return Err(Error::InvalidArgument(format!(
            "corpus needs at least one image per class (spam={n_spam}, ham={n_ham})"
        )));
    }
    let mut entries = Vec::with_capacity(n_spam + n_ham);
    for (label, count) in [(Label::Spam, n_spam), (Label::Ham, n_ham)] {
        let dir = out_dir.join(label.name());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for i in 0..count {
            let name = format!("{}_{i:04}.ppm", label.name());
            let path = dir.join(&name);
            let img = synthetic_image(label, seed, i);
            fs::write(&path, encode_ppm(&img)).map_err(|e| Error::io(&path, e))?;
            entries.push(ManifestEntry {
                path: format!("{}/{name}", label.name()),
                label,
                seed,
            });
        }
    }
    let manifest = Manifest {
        path: out_dir.join(MANIFEST_NAME),
        entries,
    };
    fs::write(&manifest.path, manifest.render()).map_err(|e| Error::io(&manifest.path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fraction of pixels in the `k` fullest of 64 uniform colour bins.
    fn top_k_share(img: &RgbImage, k: usize) -> f64 {
        let mut counts = [0usize; 64];
        for p in img.pixels().chunks_exact(3) {
            let bin = (p[0] / 64) as usize * 16 + (p[1] / 64) as usize * 4 + (p[2] / 64) as usize;
            counts[bin] += 1;
        }
        counts.sort_unstable_by(|a, b| b.cmp(a));
        counts[..k].iter().sum::<usize>() as f64 / (img.width() * img.height()) as f64
    }

    #[test]
    fn spam_histograms_are_peaked() {
        for i in 0..60 {
            let img = synthetic_image(Label::Spam, 1, i);
            let share = top_k_share(&img, 8);
            assert!(share >= 0.6, "spam {i}: top-8 share {share}");
        }
    }

    #[test]
    fn ham_histograms_are_spread() {
        for i in 0..60 {
            let img = synthetic_image(Label::Ham, 1, i);
            let top = top_k_share(&img, 1);
            assert!(top <= 0.15, "ham {i}: top bin share {top}");
        }
    }

    #[test]
    fn images_are_pure_functions_of_seed() {
        assert_eq!(
            synthetic_image(Label::Spam, 3, 7),
            synthetic_image(Label::Spam, 3, 7)
        );
        assert_ne!(
            synthetic_image(Label::Spam, 3, 7),
            synthetic_image(Label::Spam, 4, 7)
        );
        assert_ne!(
            synthetic_image(Label::Ham, 3, 7),
            synthetic_image(Label::Ham, 3, 8)
        );
    }

    #[test]
    fn corpus_on_disk_is_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = generate_synthetic_corpus(3, 2, 11, a.path()).unwrap();
        generate_synthetic_corpus(3, 2, 11, b.path()).unwrap();
        assert_eq!(ma.entries.len(), 5);
        for e in &ma.entries {
            let x = fs::read(a.path().join(&e.path)).unwrap();
            let y = fs::read(b.path().join(&e.path)).unwrap();
            assert_eq!(x, y, "{}", e.path);
        }
        let text = fs::read_to_string(&ma.path).unwrap();
        assert_eq!(
            text,
            fs::read_to_string(b.path().join(MANIFEST_NAME)).unwrap()
        );
        assert_eq!(text.lines().next().unwrap(), "spam/spam_0000.ppm\tspam\t11");
        assert_eq!(Manifest::parse(&ma.path, &text).unwrap(), ma);
    }

    #[test]
    fn in_memory_corpus_matches_disk() {
        let dir = tempfile::tempdir().unwrap();
        generate_synthetic_corpus(3, 2, 5, dir.path()).unwrap();
        let (disk, _) = crate::data::load_directory(dir.path()).unwrap();
        let mem = synthetic_dataset(3, 2, 5).unwrap();
        assert_eq!(disk.content_digest(), mem.content_digest());
    }

    #[test]
    fn zero_counts_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(generate_synthetic_corpus(0, 2, 1, dir.path()).is_err());
        assert!(generate_synthetic_corpus(2, 0, 1, dir.path()).is_err());
    }
}
