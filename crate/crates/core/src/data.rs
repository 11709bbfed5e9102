//! Image ingestion, preprocessing to `[3, 56, 56]`, and dataset splitting/batching.
//!
//! A corpus is a directory with `spam/` and `ham/` subdirectories holding PNG,
//! JPEG or PPM files. PPM (P6 colour, P5 grayscale) is decoded here; PNG and
//! JPEG go through the `image` crate.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

pub const IMAGE_SIZE: usize = 56;
pub const CHANNELS: usize = 3;

/// 8-bit RGB pixels, row-major, interleaved (`H x W x 3`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be >= 1, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height * CHANNELS {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                width * height * CHANNELS,
                pixels.len()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * CHANNELS)
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * CHANNELS;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Jpeg,
    Ppm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(ImageFormat::Png),
            "jpg" | "jpeg" => Some(ImageFormat::Jpeg),
            "ppm" | "pgm" | "pnm" => Some(ImageFormat::Ppm),
            _ => None,
        }
    }

    /// Guess from leading magic bytes.
    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            Some(ImageFormat::Png)
        } else if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
            Some(ImageFormat::Jpeg)
        } else if bytes.starts_with(b"P6") || bytes.starts_with(b"P5") {
            Some(ImageFormat::Ppm)
        } else {
            None
        }
    }
}

pub fn decode_image(bytes: &[u8], format: ImageFormat) -> Result<RgbImage> {
    match format {
        ImageFormat::Ppm => decode_pnm(bytes),
        ImageFormat::Png | ImageFormat::Jpeg => {
            let fmt = if format == ImageFormat::Png {
                image::ImageFormat::Png
            } else {
                image::ImageFormat::Jpeg
            };
            let img = image::load_from_memory_with_format(bytes, fmt)
                .map_err(|e| Error::CorruptImage(e.to_string()))?
                .to_rgb8();
            let (w, h) = img.dimensions();
            RgbImage::new(w as usize, h as usize, img.into_raw())
        }
    }
}

/// Binary PNM: `P6` (RGB) or `P5` (grayscale, replicated to RGB), maxval <= 255.
fn decode_pnm(bytes: &[u8]) -> Result<RgbImage> {
    let corrupt = |msg: &str| Error::CorruptImage(format!("pnm: {msg}"));
    let channels = match bytes.get(..2) {
        Some(b"P6") => 3,
        Some(b"P5") => 1,
        _ => {
            return Err(Error::UnsupportedFormat(
                "only binary P6/P5 PNM is supported".into(),
            ))
        }
    };
    let mut pos = 2;
    let mut header = [0usize; 3];
    for field in header.iter_mut() {
        // whitespace and `#` comments between tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(corrupt("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| corrupt("bad header number"))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 {
        return Err(corrupt("zero dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!("pnm maxval {maxval}")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(corrupt("missing separator after header"));
    }
    pos += 1;
    let need = width * height * channels;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| corrupt("truncated raster"))?;
    let scale = |v: u8| -> u8 {
        if maxval == 255 {
            v
        } else {
            ((v.min(maxval as u8) as u32 * 255 + maxval as u32 / 2) / maxval as u32) as u8
        }
    };
    let pixels = if channels == 3 {
        raster.iter().map(|&v| scale(v)).collect()
    } else {
        raster.iter().flat_map(|&v| [scale(v); 3]).collect()
    };
    RgbImage::new(width, height, pixels)
}

/// Binary P6 encoding with maxval 255.
pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Bilinear resampling with half-pixel-centred sample positions and edge clamping.
pub fn resize_bilinear(img: &RgbImage, width: usize, height: usize) -> Result<RgbImage> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(
            "resize target must be >= 1x1".into(),
        ));
    }
    if width == img.width && height == img.height {
        return Ok(img.clone());
    }
    let taps = |out: usize, src: usize| -> Vec<(usize, usize, f32)> {
        let scale = src as f32 / out as f32;
        (0..out)
            .map(|o| {
                let s = ((o as f32 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f32);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(src - 1);
                (i0, i1, s - i0 as f32)
            })
            .collect()
    };
    let xs = taps(width, img.width);
    let ys = taps(height, img.height);
    let mut pixels = Vec::with_capacity(width * height * CHANNELS);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let (a, b, c, d) = (
                img.get(x0, y0),
                img.get(x1, y0),
                img.get(x0, y1),
                img.get(x1, y1),
            );
            for ch in 0..CHANNELS {
                let top = a[ch] as f32 * (1.0 - fx) + b[ch] as f32 * fx;
                let bottom = c[ch] as f32 * (1.0 - fx) + d[ch] as f32 * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                pixels.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RgbImage::new(width, height, pixels)
}

/// `value / 255`, transposed to channels-first `[3, H, W]`.
pub fn normalize(img: &RgbImage) -> Result<Tensor> {
    let plane = img.width * img.height;
    let mut data = vec![0.0f32; CHANNELS * plane];
    for (i, px) in img.pixels.chunks_exact(CHANNELS).enumerate() {
        for (ch, &v) in px.iter().enumerate() {
            data[ch * plane + i] = v as f32 / 255.0;
        }
    }
    Tensor::from_vec(&[CHANNELS, img.height, img.width], data)
}

/// Inverse of [`normalize`]: `[3, H, W]` in `[0, 1]` back to 8-bit RGB.
pub fn denormalize(pixels: &Tensor) -> Result<RgbImage> {
    let (h, w) = match *pixels.shape() {
        [CHANNELS, h, w] => (h, w),
        ref s => {
            return Err(Error::ShapeMismatch(format!(
                "expected [3, H, W] pixels, got {s:?}"
            )))
        }
    };
    let plane = h * w;
    let data = pixels.data();
    let bytes = (0..plane)
        .flat_map(|i| (0..CHANNELS).map(move |ch| (ch, i)))
        .map(|(ch, i)| (data[ch * plane + i] * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    RgbImage::new(w, h, bytes)
}

/// Resize to 56x56 and normalise.
pub fn preprocess(img: &RgbImage) -> Result<Tensor> {
    normalize(&resize_bilinear(img, IMAGE_SIZE, IMAGE_SIZE)?)
}

pub fn load_image_file(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = ImageFormat::from_path(path)
        .or_else(|| ImageFormat::sniff(&bytes))
        .ok_or_else(|| Error::UnsupportedFormat(path.display().to_string()))?;
    preprocess(&decode_image(&bytes, format)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Ham = 0,
    Spam = 1,
}

impl Label {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Label::Ham),
            1 => Some(Label::Spam),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Ham => "ham",
            Label::Spam => "spam",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spam" => Ok(Label::Spam),
            "ham" => Ok(Label::Ham),
            _ => Err(Error::InvalidArgument(format!("unknown label `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    /// `[3, 56, 56]`, values in `[0, 1]`.
    pub pixels: Tensor,
    pub label: Label,
    pub source_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Test,
    All,
}

impl SplitTag {
    pub fn name(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Test => "test",
            SplitTag::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledImage>,
    pub split: SplitTag,
    /// Seed of the split that produced this set; `None` for a freshly loaded corpus.
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledImage>) -> Self {
        Dataset {
            samples,
            split: SplitTag::All,
            seed: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.label.bit()).collect()
    }

    /// SHA-256 over ids, labels and pixel bits, in sample order.
    pub fn content_digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for s in &self.samples {
            h.update((s.source_id.len() as u64).to_le_bytes());
            h.update(s.source_id.as_bytes());
            h.update([s.label.bit()]);
            for v in s.pixels.data() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.finalize().into()
    }

    /// Order-independent fingerprint of which samples are in this set (16 hex chars).
    pub fn membership_digest(&self) -> String {
        let mut ids: Vec<(&str, u8)> = self
            .samples
            .iter()
            .map(|s| (s.source_id.as_str(), s.label.bit()))
            .collect();
        ids.sort_unstable();
        let mut h = Sha256::new();
        for (id, bit) in ids {
            h.update((id.len() as u64).to_le_bytes());
            h.update(id.as_bytes());
            h.update([bit]);
        }
        hex16(&h.finalize())
    }

    /// `[N, 3, 56, 56]` images and `[N, 1]` labels for the given sample indices.
    pub fn stack(&self, indices: &[usize]) -> Result<(Tensor, Tensor)> {
        let first = indices
            .first()
            .map(|&i| &self.samples[i].pixels)
            .ok_or(Error::EmptyDataset)?;
        let per = first.len();
        let mut images = Vec::with_capacity(indices.len() * per);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = &self.samples[i];
            if s.pixels.shape() != first.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "sample `{}` has shape {:?}, expected {:?}",
                    s.source_id,
                    s.pixels.shape(),
                    first.shape()
                )));
            }
            images.extend_from_slice(s.pixels.data());
            labels.push(s.label.bit() as f32);
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(first.shape());
        Ok((
            Tensor::from_vec(&shape, images)?,
            Tensor::from_vec(&[indices.len(), 1], labels)?,
        ))
    }
}

pub(crate) fn hex16(bytes: &[u8]) -> String {
    bytes[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    /// Files that could not be decoded, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
    pub warnings: Vec<String>,
}

/// Load every decodable image under `root/spam` and `root/ham` (spam first, files by name).
pub fn load_directory(root: &Path) -> Result<(Dataset, LoadReport)> {
    if !root.is_dir() {
        return Err(Error::MissingDirectory(root.to_path_buf()));
    }
    let mut samples = Vec::new();
    let mut report = LoadReport::default();
    for label in [Label::Spam, Label::Ham] {
        let dir = root.join(label.name());
        if !dir.is_dir() {
            return Err(Error::MissingDirectory(dir));
        }
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        let before = samples.len();
        for path in files {
            match load_image_file(&path) {
                Ok(pixels) => {
                    let name = path.file_name().unwrap_or_default().to_string_lossy();
                    samples.push(LabeledImage {
                        pixels,
                        label,
                        source_id: format!("{}/{}", label.name(), name),
                    });
                }
                Err(e) => report.skipped.push((path, e.to_string())),
            }
        }
        if samples.len() == before {
            report
                .warnings
                .push(format!("no decodable images in {}", dir.display()));
        }
    }
    if samples.is_empty() {
        return Err(Error::NoImages(root.to_path_buf()));
    }
    Ok((Dataset::new(samples), report))
}

/// Split seed derived from the corpus content and the run seed, so every
/// command that splits the same corpus with the same seed agrees on membership.
pub fn split_seed(ds: &Dataset, seed: u64) -> u64 {
    let digest = ds.content_digest();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes")) ^ seed
}

/// Per-class seeded shuffle; the first `floor(fraction * n)` of each class go to train.
pub fn stratified_split(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = Rng::new(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in [Label::Spam, Label::Ham] {
        let mut idx: Vec<usize> = (0..ds.len())
            .filter(|&i| ds.samples[i].label == label)
            .collect();
        if idx.is_empty() {
            return Err(Error::EmptyClass(label.name()));
        }
        rng.shuffle(&mut idx);
        // The epsilon absorbs binary representation error, e.g. 0.8 * 810.
        let cut = (train_fraction * idx.len() as f64 + 1e-9).floor() as usize;
        train.extend(idx[..cut].iter().map(|&i| ds.samples[i].clone()));
        test.extend(idx[cut..].iter().map(|&i| ds.samples[i].clone()));
    }
    let make = |samples, split| Dataset {
        samples,
        split,
        seed: Some(seed),
    };
    Ok((make(train, SplitTag::Train), make(test, SplitTag::Test)))
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub images: Tensor,
    pub labels: Tensor,
    pub indices: Vec<usize>,
}

/// One epoch of shuffled mini-batches; the final partial batch is kept.
pub struct Batches<'a> {
    ds: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Batches<'_> {
    pub fn sizes(&self) -> Vec<usize> {
        self.order
            .chunks(self.batch_size)
            .map(|c| c.len())
            .collect()
    }
}

impl Iterator for Batches<'_> {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let indices = self.order[self.pos..end].to_vec();
        self.pos = end;
        Some(self.ds.stack(&indices).map(|(images, labels)| Batch {
            images,
            labels,
            indices,
        }))
    }
}

pub fn batches<'a>(ds: &'a Dataset, batch_size: usize, rng: &mut Rng) -> Result<Batches<'a>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    rng.shuffle(&mut order);
    Ok(Batches {
        ds,
        order,
        batch_size,
        pos: 0,
    })
}
