use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use spamnet_core::baselines::{
    hog_features, signed_label, train_linear, HistogramDetector, LinearConfig,
};
use spamnet_core::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
use spamnet_core::data::{load_directory, load_image_file, split_seed, stratified_split, Dataset};
use spamnet_core::metrics::{evaluate as tally, render_table, EvalReport};
use spamnet_core::model::{fit, predict as predict_probs, predict_dataset, SpamNet, TrainConfig};
use spamnet_core::optim::AdamConfig;
use spamnet_core::synth::generate_synthetic_corpus;
use spamnet_core::{Error, Rng, Tensor};

use crate::{BaselineArgs, EvaluateArgs, PredictArgs, SplitArgs, SynthArgs, TrainArgs, Which};

fn load_corpus(root: &Path) -> Result<Dataset> {
    let (ds, report) =
        load_directory(root).with_context(|| format!("loading corpus {}", root.display()))?;
    for (path, why) in &report.skipped {
        eprintln!("warning: skipped {}: {why}", path.display());
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(ds)
}

fn split(ds: &Dataset, args: &SplitArgs) -> spamnet_core::Result<(Dataset, Dataset)> {
    stratified_split(ds, args.train_frac, split_seed(ds, args.seed))
}

fn tag(prefix: &str, ds: &Dataset) -> String {
    format!("{prefix}:{}", ds.membership_digest())
}

fn cnn_report(net: &SpamNet, ds: &Dataset, threshold: f32, dataset: String) -> Result<EvalReport> {
    let pred = predict_dataset(net, ds, threshold)?;
    Ok(tally(&pred, &ds.labels())?
        .with_threshold(threshold as f64)
        .with_dataset(dataset)
        .with_model(format!("spamnet:{}", net.digest())))
}

/// Prints the records to stdout, the table to stderr, and writes `--report` if given.
fn emit(reports: &[EvalReport], path: Option<&Path>) -> Result<()> {
    let text = reports
        .iter()
        .map(EvalReport::serialize)
        .collect::<Vec<_>>()
        .join("\n");
    print!("{text}");
    eprint!("{}", render_table(reports));
    if let Some(path) = path {
        fs::write(path, &text).with_context(|| format!("writing report {}", path.display()))?;
    }
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let config = TrainConfig {
        batch_size: args.batch_size,
        epochs: args.epochs,
        dropout_rate: args.dropout,
        seed: args.split.seed,
        checkpoint_every: args.checkpoint_every,
        threshold: args.threshold,
    };
    config.validate()?;
    let ds = load_corpus(&args.split.corpus)?;
    let (train, test) = split(&ds, &args.split)?;
    eprintln!(
        "corpus: {} images; train {} (split {}), test {}",
        ds.len(),
        train.len(),
        train.membership_digest(),
        test.len()
    );
    let mut net = SpamNet::new(&mut Rng::new(config.seed), config.dropout_rate)?;
    let mut adam = net.adam(AdamConfig::default());
    fit(
        &mut net,
        &train,
        &config,
        &mut adam,
        Some(&args.checkpoint),
        |r| eprintln!("{r}"),
    )?;
    let meta = CheckpointMeta {
        seed: config.seed,
        epoch: config.epochs as u64,
    };
    save_checkpoint(&net, Some(&adam), meta, &args.checkpoint)
        .with_context(|| format!("saving checkpoint {}", args.checkpoint.display()))?;
    let report = cnn_report(&net, &test, config.threshold, tag("test", &test))?;
    emit(&[report], args.split.report.as_deref())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    if !(args.threshold > 0.0 && args.threshold < 1.0) {
        bail!("threshold must be in (0, 1), got {}", args.threshold);
    }
    let ck = load_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let ds = load_corpus(&args.split.corpus)?;
    let (data, name) = if args.full {
        (ds, "all")
    } else {
        match split(&ds, &args.split) {
            Ok((_, test)) => (test, "test"),
            Err(Error::EmptyClass(class)) => {
                eprintln!("warning: class `{class}` is empty, so there is no held-out split; evaluating on the full corpus");
                (ds, "all")
            }
            Err(e) => return Err(e.into()),
        }
    };
    let dataset = tag(name, &data);
    let report = cnn_report(&ck.net, &data, args.threshold, dataset)?;
    emit(&[report], args.split.report.as_deref())
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    if !(args.threshold > 0.0 && args.threshold < 1.0) {
        bail!("threshold must be in (0, 1), got {}", args.threshold);
    }
    let ck = load_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let mut ok = 0;
    for path in &args.images {
        let pixels = match load_image_file(path) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                continue;
            }
        };
        let batch = Tensor::from_vec(&[1, 3, 56, 56], pixels.into_data())?;
        let (probs, labels) = predict_probs(&ck.net, &batch, args.threshold)?;
        let label = if labels[0] == 1 { "spam" } else { "ham" };
        println!("{}\t{:.4}\t{label}", path.display(), probs.data()[0]);
        ok += 1;
    }
    if ok == 0 {
        bail!(
            "none of the {} input images could be read",
            args.images.len()
        );
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let manifest = generate_synthetic_corpus(args.spam, args.ham, args.seed, &args.out)?;
    eprintln!(
        "wrote {} images and {} under {}",
        manifest.entries.len(),
        manifest.path.display(),
        args.out.display()
    );
    Ok(())
}

pub fn baseline(args: &BaselineArgs) -> Result<()> {
    let ds = load_corpus(&args.split.corpus)?;
    let (train, test) = split(&ds, &args.split)?;
    let dataset = tag("test", &test);
    let truth = test.labels();
    let mut reports = Vec::new();
    if matches!(args.which, Which::Histogram | Which::Both) {
        let detector = HistogramDetector {
            top_k: args.top_k,
            tau: args.tau,
        };
        let pred = test
            .samples
            .iter()
            .map(|s| detector.classify(&s.pixels).map(|l| l.bit()))
            .collect::<spamnet_core::Result<Vec<u8>>>()?;
        reports.push(
            tally(&pred, &truth)?
                .with_threshold(args.tau)
                .with_dataset(dataset.clone())
                .with_model(format!("histogram:top{}", args.top_k)),
        );
    }
    if matches!(args.which, Which::Hog | Which::Both) {
        let features = |ds: &Dataset| {
            ds.samples
                .iter()
                .map(|s| hog_features(&s.pixels).map(|d| d.values))
                .collect::<spamnet_core::Result<Vec<_>>>()
        };
        let y: Vec<i8> = train
            .samples
            .iter()
            .map(|s| signed_label(s.label))
            .collect();
        let config = LinearConfig {
            seed: args.split.seed,
            ..LinearConfig::default()
        };
        let clf = train_linear(&features(&train)?, &y, &config)?;
        let pred: Vec<u8> = features(&test)?
            .iter()
            .map(|f| clf.predict(f).bit())
            .collect();
        reports.push(
            tally(&pred, &truth)?
                .with_threshold(0.0)
                .with_dataset(dataset)
                .with_model("hog-linear"),
        );
    }
    emit(&reports, args.split.report.as_deref())
}
