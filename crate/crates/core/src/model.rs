//! The spam CNN: layer stack, training loop and batched prediction.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::checkpoint::{save_checkpoint, CheckpointMeta};
use crate::data::{batches, hex16, Dataset, CHANNELS, IMAGE_SIZE};
use crate::error::{Error, Result};
use crate::layers::{
    Activation, ActivationKind, Conv2d, Dense, Dropout, Flatten, Layer, MaxPool2d, Mode, Padding,
};
use crate::loss::bce_loss;
use crate::optim::{AdamConfig, AdamState};
use crate::tensor::{Rng, Tensor};

pub const DEFAULT_DROPOUT: f32 = 0.25;
pub const DEFAULT_THRESHOLD: f32 = 0.5;
/// Flattened feature count feeding `dense_1`: 64 maps of 12x12.
pub const FLAT_FEATURES: usize = 64 * 12 * 12;
pub const HIDDEN_UNITS: usize = 128;
/// Images per forward pass in [`predict`].
const PREDICT_CHUNK: usize = 64;

#[derive(Debug, Clone)]
pub struct NamedLayer {
    pub name: String,
    pub layer: Layer,
}

#[derive(Debug, Clone)]
pub struct SpamNet {
    layers: Vec<NamedLayer>,
    mode: Mode,
    dropout_rate: f32,
}

/// The default network: Glorot weights, zero biases, dropout 0.25.
pub fn build_spamnet(rng: &mut Rng) -> SpamNet {
    SpamNet::new(rng, DEFAULT_DROPOUT).expect("default dropout rate is valid")
}

impl SpamNet {
    pub fn new(rng: &mut Rng, dropout_rate: f32) -> Result<SpamNet> {
        let mut counters = std::collections::HashMap::<&str, usize>::new();
        let mut layers = Vec::new();
        let mut push = |prefix: &'static str, layer: Layer| {
            let n = counters.entry(prefix).or_insert(0);
            *n += 1;
            layers.push(NamedLayer {
                name: format!("{prefix}_{n}"),
                layer,
            });
        };
        let relu = || Layer::Activation(Activation::new(ActivationKind::Relu));
        let conv = |rng: &mut Rng, i, o, p| Conv2d::new(rng, i, o, p).map(Layer::Conv2d);
        let dropout = || Dropout::new(dropout_rate).map(Layer::Dropout);

        push("conv2d", conv(rng, CHANNELS, 32, Padding::Same)?);
        push("activation", relu());
        push("conv2d", conv(rng, 32, 32, Padding::Valid)?);
        push("activation", relu());
        push("max_pooling2d", Layer::MaxPool2d(MaxPool2d::new()));
        push("dropout", dropout()?);
        push("conv2d", conv(rng, 32, 64, Padding::Same)?);
        push("activation", relu());
        push("conv2d", conv(rng, 64, 64, Padding::Valid)?);
        push("activation", relu());
        push("max_pooling2d", Layer::MaxPool2d(MaxPool2d::new()));
        push("dropout", dropout()?);
        push("flatten", Layer::Flatten(Flatten::new()));
        push(
            "dense",
            Layer::Dense(Dense::new(rng, FLAT_FEATURES, HIDDEN_UNITS)?),
        );
        push("activation", relu());
        push("dropout", dropout()?);
        push("dense", Layer::Dense(Dense::new(rng, HIDDEN_UNITS, 1)?));
        push(
            "activation",
            Layer::Activation(Activation::new(ActivationKind::Sigmoid)),
        );
        Ok(SpamNet {
            layers,
            mode: Mode::Train,
            dropout_rate,
        })
    }

    pub fn layers(&self) -> &[NamedLayer] {
        &self.layers
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        for l in &mut self.layers {
            l.layer.set_mode(mode);
        }
    }

    pub fn dropout_rate(&self) -> f32 {
        self.dropout_rate
    }

    /// Parameters as `layer.weight` / `layer.bias`, in layer order.
    pub fn named_parameters(&self) -> Vec<(String, &Tensor)> {
        self.layers
            .iter()
            .flat_map(|l| {
                l.layer
                    .params()
                    .into_iter()
                    .map(move |(suffix, t)| (format!("{}.{suffix}", l.name), t))
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.named_parameters().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn parameter_shapes(&self) -> Vec<Vec<usize>> {
        self.named_parameters()
            .iter()
            .map(|(_, t)| t.shape().to_vec())
            .collect()
    }

    /// Replaces the parameter called `name`; the shape must match.
    pub fn set_parameter(&mut self, name: &str, value: Tensor) -> Result<()> {
        let (layer_name, suffix) = name
            .split_once('.')
            .ok_or_else(|| Error::InvalidArgument(format!("bad parameter name {name:?}")))?;
        let layer = self
            .layers
            .iter_mut()
            .find(|l| l.name == layer_name)
            .ok_or_else(|| Error::InvalidArgument(format!("no layer named {layer_name:?}")))?;
        let index = match suffix {
            "weight" => 0,
            "bias" => 1,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "bad parameter name {name:?}"
                )))
            }
        };
        let mut params = layer.layer.params_mut();
        let slot = params
            .get_mut(index)
            .ok_or_else(|| Error::InvalidArgument(format!("{layer_name} has no parameters")))?;
        if slot.shape() != value.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{name}: expected {:?}, got {:?}",
                slot.shape(),
                value.shape()
            )));
        }
        **slot = value;
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over every parameter's name, shape and bytes.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, t) in self.named_parameters() {
            h.update(name.as_bytes());
            for &d in t.shape() {
                h.update((d as u64).to_le_bytes());
            }
            for v in t.data() {
                h.update(v.to_le_bytes());
            }
        }
        hex16(&h.finalize())
    }

    fn check_input(x: &Tensor) -> Result<()> {
        match x.shape() {
            [n, CHANNELS, IMAGE_SIZE, IMAGE_SIZE] if *n > 0 => Ok(()),
            s => Err(Error::ShapeMismatch(format!(
                "network input must be [N, {CHANNELS}, {IMAGE_SIZE}, {IMAGE_SIZE}], got {s:?}"
            ))),
        }
    }

    /// Forward pass that caches activations for [`SpamNet::backward`].
    pub fn forward(&mut self, x: &Tensor, rng: &mut Rng) -> Result<Tensor> {
        Self::check_input(x)?;
        let mut h = x.clone();
        for l in &mut self.layers {
            h = l.layer.forward(&h, rng)?;
        }
        Ok(h)
    }

    /// Evaluation-mode forward pass; a pure function of parameters and input.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        Self::check_input(x)?;
        let mut h = x.clone();
        for l in &self.layers {
            h = l.layer.infer(&h)?;
        }
        Ok(h)
    }

    /// Output shape after every layer, in order.
    pub fn forward_trace(&self, x: &Tensor) -> Result<Vec<(String, Vec<usize>)>> {
        Self::check_input(x)?;
        let mut h = x.clone();
        let mut trace = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            h = l.layer.infer(&h)?;
            trace.push((l.name.clone(), h.shape().to_vec()));
        }
        Ok(trace)
    }

    /// Backpropagates `grad_out` (d loss / d output), filling every parameter gradient.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let mut g = grad_out.clone();
        for l in self.layers.iter_mut().rev() {
            g = l.layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn gradients(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.layer.grads()).collect()
    }

    pub fn params_and_grads(&mut self) -> Vec<(&mut Tensor, &Tensor)> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.layer.params_and_grads())
            .collect()
    }

    /// Fresh Adam state matching this network's parameters.
    pub fn adam(&self, config: AdamConfig) -> AdamState {
        let shapes = self.parameter_shapes();
        AdamState::new(config, shapes.iter().map(Vec::as_slice))
            .expect("parameter shapes are non-empty")
    }
}

/// Forward, BCE and backward; leaves gradients in the network and returns the loss
/// with the batch predictions.
pub fn loss_and_gradients(
    net: &mut SpamNet,
    images: &Tensor,
    labels: &Tensor,
    rng: &mut Rng,
) -> Result<(f32, Tensor)> {
    let pred = net.forward(images, rng)?;
    let (loss, grad) = bce_loss(&pred, labels)?;
    net.backward(&grad)?;
    Ok((loss, pred))
}

/// One optimisation step; returns the loss measured before the update.
pub fn train_step(
    net: &mut SpamNet,
    images: &Tensor,
    labels: &Tensor,
    adam: &mut AdamState,
    rng: &mut Rng,
) -> Result<f32> {
    train_step_with_predictions(net, images, labels, adam, rng).map(|(loss, _)| loss)
}

fn train_step_with_predictions(
    net: &mut SpamNet,
    images: &Tensor,
    labels: &Tensor,
    adam: &mut AdamState,
    rng: &mut Rng,
) -> Result<(f32, Tensor)> {
    if net.mode() != Mode::Train {
        return Err(Error::InvalidArgument(
            "train_step needs a network in train mode".into(),
        ));
    }
    let out = loss_and_gradients(net, images, labels, rng)?;
    adam.step(net.params_and_grads())?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_rate: f32,
    pub seed: u64,
    /// Save a checkpoint every this many epochs; 0 disables periodic saves.
    pub checkpoint_every: usize,
    pub threshold: f32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 1000,
            dropout_rate: DEFAULT_DROPOUT,
            seed: 0,
            checkpoint_every: 0,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold must be in (0, 1), got {}",
                self.threshold
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sample-weighted mean of the per-batch losses.
    pub mean_loss: f64,
    /// Accuracy of the train-mode predictions made during the epoch.
    pub train_accuracy: f64,
}

impl std::fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "epoch={} loss={:.6} accuracy={:.4}",
            self.epoch, self.mean_loss, self.train_accuracy
        )
    }
}

/// Mini-batch training over `train` for `config.epochs` epochs.
///
/// Batch order is drawn from stream 0 of `config.seed` and dropout masks from
/// stream 1, so a run is fully determined by the seed. When `checkpoint_path`
/// is given and `checkpoint_every > 0`, the network and optimiser are saved there
/// after every `checkpoint_every`-th epoch.
pub fn fit(
    net: &mut SpamNet,
    train: &Dataset,
    config: &TrainConfig,
    adam: &mut AdamState,
    checkpoint_path: Option<&Path>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    net.set_mode(Mode::Train);
    let mut order_rng = Rng::with_stream(config.seed, 0);
    let mut dropout_rng = Rng::with_stream(config.seed, 1);
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for batch in batches(train, config.batch_size, &mut order_rng)? {
            let batch = batch?;
            let (loss, pred) = train_step_with_predictions(
                net,
                &batch.images,
                &batch.labels,
                adam,
                &mut dropout_rng,
            )?;
            loss_sum += loss as f64 * batch.indices.len() as f64;
            correct += pred
                .data()
                .iter()
                .zip(batch.labels.data())
                .filter(|(&p, &t)| (p >= config.threshold) == (t == 1.0))
                .count();
        }
        let record = EpochRecord {
            epoch,
            mean_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
        };
        on_epoch(&record);
        log.push(record);
        if let Some(path) = checkpoint_path {
            if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
                let meta = CheckpointMeta {
                    seed: config.seed,
                    epoch: epoch as u64,
                };
                save_checkpoint(net, Some(adam), meta, path)?;
            }
        }
    }
    net.set_mode(Mode::Eval);
    Ok(log)
}

/// Spam probabilities `[N, 1]` and labels (1 iff probability >= threshold).
pub fn predict(net: &SpamNet, images: &Tensor, threshold: f32) -> Result<(Tensor, Vec<u8>)> {
    SpamNet::check_input(images)?;
    let n = images.shape()[0];
    let per_image = images.len() / n;
    let mut probs = Vec::with_capacity(n);
    for start in (0..n).step_by(PREDICT_CHUNK) {
        let end = (start + PREDICT_CHUNK).min(n);
        let chunk = Tensor::from_vec(
            &[end - start, CHANNELS, IMAGE_SIZE, IMAGE_SIZE],
            images.data()[start * per_image..end * per_image].to_vec(),
        )?;
        probs.extend_from_slice(net.infer(&chunk)?.data());
    }
    let labels = probs.iter().map(|&p| u8::from(p >= threshold)).collect();
    Ok((Tensor::from_vec(&[n, 1], probs)?, labels))
}

/// Labels for every sample of `ds`, stacking at most [`PREDICT_CHUNK`] images at a time.
pub fn predict_dataset(net: &SpamNet, ds: &Dataset, threshold: f32) -> Result<Vec<u8>> {
    let mut labels = Vec::with_capacity(ds.len());
    let indices: Vec<usize> = (0..ds.len()).collect();
    for chunk in indices.chunks(PREDICT_CHUNK) {
        let (images, _) = ds.stack(chunk)?;
        labels.extend(predict(net, &images, threshold)?.1);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, LabeledImage};

    fn random(rng: &mut Rng, shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor::from_vec(shape, (0..len).map(|_| rng.uniform()).collect()).unwrap()
    }

    #[test]
    fn layer_names_follow_keras_numbering() {
        let net = build_spamnet(&mut Rng::new(0));
        let names: Vec<&str> = net.layers().iter().map(|l| l.name.as_str()).collect();
        assert_eq!(names.len(), 18);
        assert_eq!(
            &names[..6],
            [
                "conv2d_1",
                "activation_1",
                "conv2d_2",
                "activation_2",
                "max_pooling2d_1",
                "dropout_1"
            ]
        );
        assert_eq!(
            &names[12..],
            [
                "flatten_1",
                "dense_1",
                "activation_5",
                "dropout_3",
                "dense_2",
                "activation_6"
            ]
        );
    }

    #[test]
    fn zeros_forward_gives_probabilities() {
        let net = build_spamnet(&mut Rng::new(1));
        let out = net.infer(&Tensor::zeros(&[2, 3, 56, 56]).unwrap()).unwrap();
        assert_eq!(out.shape(), [2, 1]);
        // Zero input and zero biases propagate to a zero logit.
        assert!(out.data().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn biases_start_at_zero() {
        let net = build_spamnet(&mut Rng::new(2));
        for (name, t) in net.named_parameters() {
            if name.ends_with(".bias") {
                assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
            }
        }
    }

    #[test]
    fn rejects_wrong_input_shape() {
        let net = build_spamnet(&mut Rng::new(0));
        assert!(net.infer(&Tensor::zeros(&[1, 3, 28, 28]).unwrap()).is_err());
        assert!(net.infer(&Tensor::zeros(&[3, 56, 56]).unwrap()).is_err());
        assert!(predict(&net, &Tensor::zeros(&[1, 1, 56, 56]).unwrap(), 0.5).is_err());
    }

    #[test]
    fn eval_forward_matches_infer() {
        let mut rng = Rng::new(3);
        let mut net = build_spamnet(&mut rng);
        let x = random(&mut rng, &[2, 3, 56, 56]);
        net.set_mode(Mode::Eval);
        let a = net.forward(&x, &mut rng).unwrap();
        let b = net.infer(&x).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn predict_threshold_is_inclusive() {
        let net = build_spamnet(&mut Rng::new(4));
        let (probs, labels) = predict(&net, &Tensor::zeros(&[3, 3, 56, 56]).unwrap(), 0.5).unwrap();
        assert_eq!(probs.data(), [0.5; 3]);
        assert_eq!(labels, [1, 1, 1]);
    }

    #[test]
    fn predict_chunks_agree_with_single_pass() {
        let mut rng = Rng::new(5);
        let net = build_spamnet(&mut rng);
        let x = random(&mut rng, &[PREDICT_CHUNK + 3, 3, 56, 56]);
        let (probs, _) = predict(&net, &x, 0.5).unwrap();
        let direct = net.infer(&x).unwrap();
        assert_eq!(probs.data(), direct.data());
    }

    #[test]
    fn predict_dataset_matches_predict() {
        let mut rng = Rng::new(10);
        let samples = (0..PREDICT_CHUNK + 2)
            .map(|i| LabeledImage {
                pixels: random(&mut rng, &[3, 56, 56]),
                label: Label::Ham,
                source_id: format!("h{i}"),
            })
            .collect();
        let ds = Dataset::new(samples);
        let net = build_spamnet(&mut rng);
        let (images, _) = ds.stack(&(0..ds.len()).collect::<Vec<_>>()).unwrap();
        let whole = predict(&net, &images, 0.5).unwrap().1;
        assert_eq!(predict_dataset(&net, &ds, 0.5).unwrap(), whole);
    }

    #[test]
    fn train_step_returns_pre_update_loss() {
        let mut rng = Rng::new(6);
        let mut net = SpamNet::new(&mut rng, 0.0).unwrap();
        let x = random(&mut rng, &[4, 3, 56, 56]);
        let y = Tensor::from_vec(&[4, 1], vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let before = bce_loss(&net.infer(&x).unwrap(), &y).unwrap().0;
        let mut adam = net.adam(AdamConfig::default());
        let loss = train_step(&mut net, &x, &y, &mut adam, &mut rng).unwrap();
        assert_eq!(loss, before);
        assert_eq!(adam.step_count(), 1);
        net.set_mode(Mode::Eval);
        assert!(train_step(&mut net, &x, &y, &mut adam, &mut rng).is_err());
    }

    #[test]
    fn set_parameter_checks_shape_and_name() {
        let mut net = build_spamnet(&mut Rng::new(7));
        assert!(net
            .set_parameter("dense_2.bias", Tensor::full(&[1], 3.0).unwrap())
            .is_ok());
        assert_eq!(net.named_parameters().last().unwrap().1.data(), [3.0]);
        assert!(net
            .set_parameter("dense_2.bias", Tensor::zeros(&[2]).unwrap())
            .is_err());
        assert!(net
            .set_parameter("flatten_1.weight", Tensor::zeros(&[1]).unwrap())
            .is_err());
        assert!(net
            .set_parameter("nope", Tensor::zeros(&[1]).unwrap())
            .is_err());
    }

    #[test]
    fn digest_tracks_parameters() {
        let a = build_spamnet(&mut Rng::new(8));
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.set_parameter("dense_2.bias", Tensor::full(&[1], 1e-3).unwrap())
            .unwrap();
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 16);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                epochs: 0,
                ..Default::default()
            },
            TrainConfig {
                threshold: 1.0,
                ..Default::default()
            },
            TrainConfig {
                threshold: 0.0,
                ..Default::default()
            },
            TrainConfig {
                dropout_rate: 1.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn fit_logs_every_epoch_and_rejects_empty() {
        let mut rng = Rng::new(9);
        let samples = (0..5)
            .map(|i| LabeledImage {
                pixels: random(&mut rng, &[3, 56, 56]),
                label: if i % 2 == 0 { Label::Spam } else { Label::Ham },
                source_id: format!("s{i}"),
            })
            .collect();
        let ds = Dataset::new(samples);
        let mut net = build_spamnet(&mut rng);
        let mut adam = net.adam(AdamConfig::default());
        let config = TrainConfig {
            batch_size: 2,
            epochs: 2,
            seed: 3,
            ..Default::default()
        };
        let mut seen = Vec::new();
        let log = fit(&mut net, &ds, &config, &mut adam, None, |r| {
            seen.push(r.epoch)
        })
        .unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(seen, [1, 2]);
        // Three batches (2, 2, 1) per epoch.
        assert_eq!(adam.step_count(), 6);
        assert_eq!(net.mode(), Mode::Eval);
        assert!(log[0].to_string().starts_with("epoch=1 loss="));
        let empty = Dataset::new(Vec::new());
        assert!(matches!(
            fit(&mut net, &empty, &config, &mut adam, None, |_| {}),
            Err(Error::EmptyDataset)
        ));
    }
}
