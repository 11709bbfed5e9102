//! wasm-bindgen surface for the static demo page in `www/`.
//!
//! Everything works on RGBA bytes as found in a canvas `ImageData`, so the page
//! can feed either a generated sample or a user-chosen picture.

use spamnet_core::baselines::{color_histogram, hog_cell_histograms, peak_spam_score};
use spamnet_core::data::{denormalize, preprocess, Label, RgbImage, IMAGE_SIZE};
use spamnet_core::synth::synthetic_image;
use spamnet_core::Tensor;
use wasm_bindgen::prelude::*;

/// Side of every image the demo hands back.
#[wasm_bindgen]
pub fn image_size() -> u32 {
    IMAGE_SIZE as u32
}

fn to_rgba(img: &RgbImage) -> Vec<u8> {
    img.pixels()
        .chunks_exact(3)
        .flat_map(|p| [p[0], p[1], p[2], 255])
        .collect()
}

fn from_rgba(rgba: &[u8], width: u32, height: u32) -> Result<Tensor, String> {
    let (w, h) = (width as usize, height as usize);
    if rgba.len() != w * h * 4 {
        return Err(format!(
            "expected {} RGBA bytes for {w}x{h}, got {}",
            w * h * 4,
            rgba.len()
        ));
    }
    let rgb = rgba
        .chunks_exact(4)
        .flat_map(|p| [p[0], p[1], p[2]])
        .collect();
    let img = RgbImage::new(w, h, rgb).map_err(|e| e.to_string())?;
    preprocess(&img).map_err(|e| e.to_string())
}

/// A synthetic spam or ham image, resized to the network input and returned as RGBA.
#[wasm_bindgen]
pub fn render_synthetic(spam: bool, seed: u32, index: u32) -> Vec<u8> {
    let label = if spam { Label::Spam } else { Label::Ham };
    let img = synthetic_image(label, seed as u64, index as usize);
    let small = denormalize(&preprocess(&img).expect("synthetic images are valid"))
        .expect("normalised pixels are in range");
    to_rgba(&small)
}

/// Colour-histogram and HOG view of one image.
#[wasm_bindgen]
pub struct Analysis {
    bins: Vec<f64>,
    score: f64,
    spam: bool,
    cells: Vec<f32>,
    cells_per_side: u32,
    thumbnail: Vec<u8>,
}

#[wasm_bindgen]
impl Analysis {
    /// 64 normalised colour-bin masses, red-major.
    pub fn bins(&self) -> Vec<f64> {
        self.bins.clone()
    }

    /// Mass of the `top_k` fullest bins.
    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn is_spam(&self) -> bool {
        self.spam
    }

    /// Unnormalised 9-bin orientation histograms, one per 8x8 cell, row-major.
    pub fn hog_cells(&self) -> Vec<f32> {
        self.cells.clone()
    }

    pub fn cells_per_side(&self) -> u32 {
        self.cells_per_side
    }

    /// The 56x56 image the features were computed on, as RGBA.
    pub fn thumbnail(&self) -> Vec<u8> {
        self.thumbnail.clone()
    }
}

/// Resizes the RGBA image to 56x56 and runs the histogram detector and HOG on it.
#[wasm_bindgen]
pub fn analyze(
    rgba: &[u8],
    width: u32,
    height: u32,
    top_k: u32,
    tau: f64,
) -> Result<Analysis, JsError> {
    analyze_rgba(rgba, width, height, top_k, tau).map_err(|e| JsError::new(&e))
}

/// [`analyze`] without the JavaScript error type, usable off the web.
pub fn analyze_rgba(
    rgba: &[u8],
    width: u32,
    height: u32,
    top_k: u32,
    tau: f64,
) -> Result<Analysis, String> {
    let pixels = from_rgba(rgba, width, height)?;
    let hist = color_histogram(&pixels).map_err(|e| e.to_string())?;
    let score = peak_spam_score(&hist, top_k as usize);
    let cells = hog_cell_histograms(&pixels).map_err(|e| e.to_string())?;
    let thumbnail = to_rgba(&denormalize(&pixels).map_err(|e| e.to_string())?);
    Ok(Analysis {
        bins: hist.bins.to_vec(),
        score,
        spam: score >= tau,
        cells_per_side: cells.cells_x as u32,
        cells: cells.values,
        thumbnail,
    })
}
