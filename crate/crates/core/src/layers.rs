//! Layer types with explicit forward and backward passes.
//!
//! Every layer works on batched tensors. `forward` caches whatever `backward`
//! needs; `infer` is the cache-free, dropout-free path used for prediction.
//! `backward` overwrites the parameter gradients with the gradient summed over
//! the batch of the preceding `forward`.

use crate::error::{Error, Result};
use crate::tensor::{gemm, Mat, Rng, Tensor};

pub const KERNEL: usize = 3;
const KERNEL_AREA: usize = KERNEL * KERNEL;

/// Outputs are clamped to `[SIGMOID_FLOOR, 1 - SIGMOID_FLOOR]` so they stay
/// strictly inside `(0, 1)` in `f32`.
pub const SIGMOID_FLOOR: f32 = 5.960_464_5e-8; // 2^-24

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero border of one pixel; spatial size preserved.
    Same,
    /// No border; each spatial dimension shrinks by two.
    Valid,
}

impl Padding {
    fn border(self) -> usize {
        match self {
            Padding::Same => 1,
            Padding::Valid => 0,
        }
    }
}

fn dims4(x: &Tensor, what: &str) -> Result<[usize; 4]> {
    match *x.shape() {
        [n, c, h, w] => Ok([n, c, h, w]),
        ref s => Err(Error::ShapeMismatch(format!(
            "{what} expects [N, C, H, W], got {s:?}"
        ))),
    }
}

fn dims2(x: &Tensor, what: &str) -> Result<[usize; 2]> {
    match *x.shape() {
        [n, f] => Ok([n, f]),
        ref s => Err(Error::ShapeMismatch(format!(
            "{what} expects [N, features], got {s:?}"
        ))),
    }
}

fn expect_shape(grad: &Tensor, want: &[usize], what: &str) -> Result<()> {
    if grad.shape() != want {
        return Err(Error::ShapeMismatch(format!(
            "{what}: gradient shape {:?} does not match forward output {want:?}",
            grad.shape()
        )));
    }
    Ok(())
}

/// 3x3 stride-1 convolution (cross-correlation, no kernel flip).
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weights: Tensor,
    pub bias: Tensor,
    pub weight_grad: Tensor,
    pub bias_grad: Tensor,
    padding: Padding,
    cache: Option<Tensor>,
}

/// Geometry of one convolution application.
#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    c_in: usize,
    h: usize,
    w: usize,
    out_h: usize,
    out_w: usize,
    border: usize,
}

impl ConvGeom {
    fn patch_rows(&self) -> usize {
        self.c_in * KERNEL_AREA
    }

    fn out_area(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Unfold one `[C, H, W]` sample into `[C*9, H'*W']` columns.
    fn im2col(&self, x: &[f32], col: &mut [f32]) {
        let (h, w, ow, area) = (
            self.h as isize,
            self.w as isize,
            self.out_w,
            self.out_area(),
        );
        let p = self.border as isize;
        for c in 0..self.c_in {
            let plane = &x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let row = &mut col[((c * KERNEL + ky) * KERNEL + kx) * area..][..area];
                    for oy in 0..self.out_h {
                        let iy = oy as isize + ky as isize - p;
                        let dst = &mut row[oy * ow..(oy + 1) * ow];
                        if iy < 0 || iy >= h {
                            dst.fill(0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = ox as isize + kx as isize - p;
                            *d = if ix < 0 || ix >= w {
                                0.0
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    /// Fold `[C*9, H'*W']` column gradients back onto a `[C, H, W]` sample.
    fn col2im(&self, col: &[f32], dx: &mut [f32]) {
        let (h, w, ow, area) = (
            self.h as isize,
            self.w as isize,
            self.out_w,
            self.out_area(),
        );
        let p = self.border as isize;
        dx.fill(0.0);
        for c in 0..self.c_in {
            let plane = &mut dx[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let row = &col[((c * KERNEL + ky) * KERNEL + kx) * area..][..area];
                    for oy in 0..self.out_h {
                        let iy = oy as isize + ky as isize - p;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for (ox, &g) in row[oy * ow..(oy + 1) * ow].iter().enumerate() {
                            let ix = ox as isize + kx as isize - p;
                            if ix >= 0 && ix < w {
                                dst[ix as usize] += g;
                            }
                        }
                    }
                }
            }
        }
    }
}

impl Conv2d {
    /// Glorot-initialised weights (`fan_in = C_in*9`, `fan_out = C_out*9`), zero bias.
    pub fn new(rng: &mut Rng, c_in: usize, c_out: usize, padding: Padding) -> Result<Self> {
        let weights = Tensor::glorot_uniform(
            rng,
            c_in * KERNEL_AREA,
            c_out * KERNEL_AREA,
            &[c_out, c_in, KERNEL, KERNEL],
        )?;
        Self::from_parts(weights, Tensor::zeros(&[c_out])?, padding)
    }

    pub fn from_parts(weights: Tensor, bias: Tensor, padding: Padding) -> Result<Self> {
        let c_out = match *weights.shape() {
            [c_out, _, KERNEL, KERNEL] => c_out,
            ref s => {
                return Err(Error::ShapeMismatch(format!(
                    "conv weights must be [C_out, C_in, 3, 3], got {s:?}"
                )))
            }
        };
        if bias.shape() != [c_out] {
            return Err(Error::ShapeMismatch(format!(
                "conv bias must be [{c_out}], got {:?}",
                bias.shape()
            )));
        }
        Ok(Conv2d {
            weight_grad: Tensor::zeros(weights.shape())?,
            bias_grad: Tensor::zeros(bias.shape())?,
            weights,
            bias,
            padding,
            cache: None,
        })
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    fn geometry(&self, x: &Tensor) -> Result<(usize, ConvGeom)> {
        let [n, c, h, w] = dims4(x, "conv2d")?;
        if c != self.in_channels() {
            return Err(Error::ShapeMismatch(format!(
                "conv2d expects {} input channels, got {c}",
                self.in_channels()
            )));
        }
        let border = self.padding.border();
        if h + 2 * border < KERNEL || w + 2 * border < KERNEL {
            return Err(Error::ShapeMismatch(format!(
                "conv2d input {h}x{w} is smaller than the 3x3 kernel with {:?} padding",
                self.padding
            )));
        }
        let geom = ConvGeom {
            c_in: c,
            h,
            w,
            out_h: h + 2 * border - (KERNEL - 1),
            out_w: w + 2 * border - (KERNEL - 1),
            border,
        };
        Ok((n, geom))
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let (n, g) = self.geometry(x)?;
        let c_out = self.out_channels();
        let (k, area) = (g.patch_rows(), g.out_area());
        let in_len = g.c_in * g.h * g.w;
        let mut col = vec![0.0; k * area];
        let mut out = vec![0.0; n * c_out * area];
        for (xs, ys) in x
            .data()
            .chunks_exact(in_len)
            .zip(out.chunks_exact_mut(c_out * area))
        {
            g.im2col(xs, &mut col);
            gemm(
                Mat::new(self.weights.data(), c_out, k),
                Mat::new(&col, k, area),
                ys,
                false,
            );
            for (plane, &b) in ys.chunks_exact_mut(area).zip(self.bias.data()) {
                plane.iter_mut().for_each(|v| *v += b);
            }
        }
        Tensor::from_vec(&[n, c_out, g.out_h, g.out_w], out)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::NoForwardCache("conv2d".into()))?;
        let (n, g) = self.geometry(x)?;
        let c_out = self.out_channels();
        expect_shape(grad_out, &[n, c_out, g.out_h, g.out_w], "conv2d backward")?;
        let (k, area) = (g.patch_rows(), g.out_area());
        let in_len = g.c_in * g.h * g.w;

        self.weight_grad.fill(0.0);
        self.bias_grad.fill(0.0);
        let mut col = vec![0.0; k * area];
        let mut dcol = vec![0.0; k * area];
        let mut dx = vec![0.0; x.len()];
        for ((xs, dys), dxs) in x
            .data()
            .chunks_exact(in_len)
            .zip(grad_out.data().chunks_exact(c_out * area))
            .zip(dx.chunks_exact_mut(in_len))
        {
            g.im2col(xs, &mut col);
            // dW += dY [C_out, area] * col^T [area, K]
            gemm(
                Mat::new(dys, c_out, area),
                Mat::new(&col, k, area).t(),
                self.weight_grad.data_mut(),
                true,
            );
            for (bg, plane) in self
                .bias_grad
                .data_mut()
                .iter_mut()
                .zip(dys.chunks_exact(area))
            {
                *bg += plane.iter().sum::<f32>();
            }
            // dcol = W^T [K, C_out] * dY [C_out, area]
            gemm(
                Mat::new(self.weights.data(), c_out, k).t(),
                Mat::new(dys, c_out, area),
                &mut dcol,
                false,
            );
            g.col2im(&dcol, dxs);
        }
        Tensor::from_vec(x.shape(), dx)
    }
}

/// 2x2 max pooling with stride 2; a trailing odd row or column is dropped.
#[derive(Debug, Clone, Default)]
pub struct MaxPool2d {
    cache: Option<PoolCache>,
}

#[derive(Debug, Clone)]
struct PoolCache {
    input_shape: Vec<usize>,
    /// Flat input index of the winning element of each output cell.
    argmax: Vec<usize>,
}

impl MaxPool2d {
    pub fn new() -> Self {
        Self::default()
    }

    fn pool(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
        let [n, c, h, w] = dims4(x, "maxpool2d")?;
        if h < 2 || w < 2 {
            return Err(Error::ShapeMismatch(format!(
                "maxpool2d needs spatial dims >= 2, got {h}x{w}"
            )));
        }
        let (oh, ow) = (h / 2, w / 2);
        let data = x.data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let top = base + 2 * oy * w + 2 * ox;
                    // Row-major window order; strict `>` keeps the first of equal values.
                    let mut best = top;
                    for idx in [top + 1, top + w, top + w + 1] {
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                    out.push(data[best]);
                    argmax.push(best);
                }
            }
        }
        Ok((Tensor::from_vec(&[n, c, oh, ow], out)?, argmax))
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        Ok(Self::pool(x)?.0)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (y, argmax) = Self::pool(x)?;
        self.cache = Some(PoolCache {
            input_shape: x.shape().to_vec(),
            argmax,
        });
        Ok(y)
    }

    /// Flat input indices selected by the last forward pass, one per output cell.
    pub fn argmax(&self) -> Option<&[usize]> {
        self.cache.as_ref().map(|c| c.argmax.as_slice())
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::NoForwardCache("maxpool2d".into()))?;
        let s = &cache.input_shape;
        expect_shape(
            grad_out,
            &[s[0], s[1], s[2] / 2, s[3] / 2],
            "maxpool2d backward",
        )?;
        let mut dx = Tensor::zeros(s)?;
        let d = dx.data_mut();
        for (&idx, &g) in cache.argmax.iter().zip(grad_out.data()) {
            d[idx] += g;
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone)]
enum DropoutCache {
    Identity,
    Mask(Vec<f32>),
}

/// Inverted dropout: kept entries are scaled by `1 / (1 - rate)` at train time.
#[derive(Debug, Clone)]
pub struct Dropout {
    rate: f32,
    mode: Mode,
    cache: Option<DropoutCache>,
}

impl Dropout {
    pub fn new(rate: f32) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(Dropout {
            rate,
            mode: Mode::Train,
            cache: None,
        })
    }

    pub fn rate(&self) -> f32 {
        self.rate
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Fraction of entries kept by the last train-mode forward pass.
    pub fn kept_fraction(&self) -> Option<f64> {
        match &self.cache {
            Some(DropoutCache::Mask(m)) => {
                Some(m.iter().filter(|&&v| v != 0.0).count() as f64 / m.len() as f64)
            }
            _ => None,
        }
    }

    pub fn forward(&mut self, x: &Tensor, rng: &mut Rng) -> Result<Tensor> {
        if self.mode == Mode::Eval || self.rate == 0.0 {
            self.cache = Some(DropoutCache::Identity);
            return Ok(x.clone());
        }
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        let mask: Vec<f32> = (0..x.len())
            .map(|_| if rng.bernoulli(keep) { scale } else { 0.0 })
            .collect();
        let out = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        self.cache = Some(DropoutCache::Mask(mask));
        Tensor::from_vec(x.shape(), out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        match &self.cache {
            None => Err(Error::NoForwardCache("dropout".into())),
            Some(DropoutCache::Identity) => Ok(grad_out.clone()),
            Some(DropoutCache::Mask(mask)) => {
                if mask.len() != grad_out.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "dropout backward: gradient has {} elements, mask {}",
                        grad_out.len(),
                        mask.len()
                    )));
                }
                let data = grad_out
                    .data()
                    .iter()
                    .zip(mask)
                    .map(|(g, m)| g * m)
                    .collect();
                Tensor::from_vec(grad_out.shape(), data)
            }
        }
    }
}

/// Fully connected layer, `y = x W + b` with `W: [in, out]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weights: Tensor,
    pub bias: Tensor,
    pub weight_grad: Tensor,
    pub bias_grad: Tensor,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new(rng: &mut Rng, inputs: usize, outputs: usize) -> Result<Self> {
        let weights = Tensor::glorot_uniform(rng, inputs, outputs, &[inputs, outputs])?;
        Self::from_parts(weights, Tensor::zeros(&[outputs])?)
    }

    pub fn from_parts(weights: Tensor, bias: Tensor) -> Result<Self> {
        let [_, out] = dims2(&weights, "dense weights")?;
        if bias.shape() != [out] {
            return Err(Error::ShapeMismatch(format!(
                "dense bias must be [{out}], got {:?}",
                bias.shape()
            )));
        }
        Ok(Dense {
            weight_grad: Tensor::zeros(weights.shape())?,
            bias_grad: Tensor::zeros(bias.shape())?,
            weights,
            bias,
            cache: None,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let [n, f] = dims2(x, "dense")?;
        if f != self.inputs() {
            return Err(Error::ShapeMismatch(format!(
                "dense expects {} input features, got {f}",
                self.inputs()
            )));
        }
        let out_w = self.outputs();
        let mut out = vec![0.0; n * out_w];
        gemm(
            Mat::new(x.data(), n, f),
            Mat::new(self.weights.data(), f, out_w),
            &mut out,
            false,
        );
        for row in out.chunks_exact_mut(out_w) {
            row.iter_mut()
                .zip(self.bias.data())
                .for_each(|(v, b)| *v += b);
        }
        Tensor::from_vec(&[n, out_w], out)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::NoForwardCache("dense".into()))?;
        let (n, f, out_w) = (x.shape()[0], self.inputs(), self.outputs());
        expect_shape(grad_out, &[n, out_w], "dense backward")?;
        // dW = x^T dY, db = column sums of dY, dx = dY W^T
        gemm(
            Mat::new(x.data(), n, f).t(),
            Mat::new(grad_out.data(), n, out_w),
            self.weight_grad.data_mut(),
            false,
        );
        self.bias_grad.fill(0.0);
        for row in grad_out.data().chunks_exact(out_w) {
            self.bias_grad
                .data_mut()
                .iter_mut()
                .zip(row)
                .for_each(|(b, g)| *b += g);
        }
        let mut dx = vec![0.0; n * f];
        gemm(
            Mat::new(grad_out.data(), n, out_w),
            Mat::new(self.weights.data(), f, out_w).t(),
            &mut dx,
            false,
        );
        Tensor::from_vec(&[n, f], dx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationKind {
    Relu,
    Sigmoid,
}

impl ActivationKind {
    pub fn apply(self, x: f32) -> f32 {
        match self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Sigmoid => {
                let y = if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                };
                y.clamp(SIGMOID_FLOOR, 1.0 - SIGMOID_FLOOR)
            }
        }
    }

    /// Derivative expressed through the forward output `y`.
    pub fn derivative_from_output(self, y: f32) -> f32 {
        match self {
            // ReLU'(0) is taken as 0.
            ActivationKind::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Activation {
    kind: ActivationKind,
    cache: Option<Tensor>,
}

impl Activation {
    pub fn new(kind: ActivationKind) -> Self {
        Activation { kind, cache: None }
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let data = x.data().iter().map(|&v| self.kind.apply(v)).collect();
        Tensor::from_vec(x.shape(), data)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.cache = Some(y.clone());
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let y = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::NoForwardCache("activation".into()))?;
        expect_shape(grad_out, y.shape(), "activation backward")?;
        let data = y
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&y, &g)| g * self.kind.derivative_from_output(y))
            .collect();
        Tensor::from_vec(y.shape(), data)
    }
}

/// `[N, ...] -> [N, prod(...)]`.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    cache: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let n = x.shape()[0];
        x.reshape(&[n, x.len() / n])
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        self.cache = Some(x.shape().to_vec());
        self.infer(x)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let shape = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::NoForwardCache("flatten".into()))?;
        grad_out.reshape(shape)
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv2d(Conv2d),
    Activation(Activation),
    MaxPool2d(MaxPool2d),
    Dropout(Dropout),
    Flatten(Flatten),
    Dense(Dense),
}

impl Layer {
    pub fn forward(&mut self, x: &Tensor, rng: &mut Rng) -> Result<Tensor> {
        match self {
            Layer::Conv2d(l) => l.forward(x),
            Layer::Activation(l) => l.forward(x),
            Layer::MaxPool2d(l) => l.forward(x),
            Layer::Dropout(l) => l.forward(x, rng),
            Layer::Flatten(l) => l.forward(x),
            Layer::Dense(l) => l.forward(x),
        }
    }

    /// Evaluation-mode forward pass with no caching.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Conv2d(l) => l.infer(x),
            Layer::Activation(l) => l.infer(x),
            Layer::MaxPool2d(l) => l.infer(x),
            Layer::Dropout(_) => Ok(x.clone()),
            Layer::Flatten(l) => l.infer(x),
            Layer::Dense(l) => l.infer(x),
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Conv2d(l) => l.backward(grad_out),
            Layer::Activation(l) => l.backward(grad_out),
            Layer::MaxPool2d(l) => l.backward(grad_out),
            Layer::Dropout(l) => l.backward(grad_out),
            Layer::Flatten(l) => l.backward(grad_out),
            Layer::Dense(l) => l.backward(grad_out),
        }
    }

    pub fn set_mode(&mut self, mode: Mode) {
        if let Layer::Dropout(d) = self {
            d.set_mode(mode);
        }
    }

    /// `(suffix, tensor)` pairs for the layer's parameters, weights first.
    pub fn params(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Layer::Conv2d(l) => vec![("weight", &l.weights), ("bias", &l.bias)],
            Layer::Dense(l) => vec![("weight", &l.weights), ("bias", &l.bias)],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv2d(l) => vec![&mut l.weights, &mut l.bias],
            Layer::Dense(l) => vec![&mut l.weights, &mut l.bias],
            _ => Vec::new(),
        }
    }

    pub fn grads(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv2d(l) => vec![&l.weight_grad, &l.bias_grad],
            Layer::Dense(l) => vec![&l.weight_grad, &l.bias_grad],
            _ => Vec::new(),
        }
    }

    /// Parameters paired with their gradients, in the same order as [`Layer::params`].
    pub fn params_and_grads(&mut self) -> Vec<(&mut Tensor, &Tensor)> {
        match self {
            Layer::Conv2d(l) => vec![
                (&mut l.weights, &l.weight_grad),
                (&mut l.bias, &l.bias_grad),
            ],
            Layer::Dense(l) => vec![
                (&mut l.weights, &l.weight_grad),
                (&mut l.bias, &l.bias_grad),
            ],
            _ => Vec::new(),
        }
    }
}
