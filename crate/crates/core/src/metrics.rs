//! Confusion-matrix statistics with spam as the positive class.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    /// `None` when nothing was predicted spam.
    pub precision: Option<f64>,
    /// `None` when no sample is spam.
    pub recall: Option<f64>,
    /// `None` when precision or recall is undefined, or both are zero.
    pub f1: Option<f64>,
    pub threshold: f64,
    pub dataset: String,
    pub model: String,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn harmonic(p: Option<f64>, r: Option<f64>) -> Option<f64> {
    match (p, r) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    }
}

impl EvalReport {
    /// Derives every ratio from the four counts.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Result<EvalReport> {
        let total = tp + fp + fn_ + tn;
        if total == 0 {
            return Err(Error::EmptyDataset);
        }
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Ok(EvalReport {
            tp,
            fp,
            fn_,
            tn,
            accuracy: (tp + tn) as f64 / total as f64,
            precision,
            recall,
            f1: harmonic(precision, recall),
            threshold: 0.5,
            dataset: "unspecified".into(),
            model: "unspecified".into(),
        })
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_dataset(mut self, dataset: impl Into<String>) -> Self {
        self.dataset = dataset.into();
        self
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    /// `key=value` lines in fixed order; ratios at four decimals, `null` when undefined.
    pub fn serialize(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "null".to_string(), |v| format!("{v:.4}"));
        format!(
            "model={}\ndataset={}\nthreshold={:.4}\nsamples={}\ntp={}\nfp={}\nfn={}\ntn={}\n\
             accuracy={:.4}\nprecision={}\nrecall={}\nf1={}\n",
            self.model,
            self.dataset,
            self.threshold,
            self.total(),
            self.tp,
            self.fp,
            self.fn_,
            self.tn,
            self.accuracy,
            opt(self.precision),
            opt(self.recall),
            opt(self.f1),
        )
    }

    /// Parses one record produced by [`EvalReport::serialize`].
    pub fn parse(text: &str) -> Result<EvalReport> {
        let mut fields = std::collections::HashMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::ReportParse(format!("line without '=': {line:?}")))?;
            if fields.insert(k, v).is_some() {
                return Err(Error::ReportParse(format!("duplicate key {k:?}")));
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::ReportParse(format!("missing key {k:?}")))
        };
        let count = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::ReportParse(format!("{k} is not a count")))
        };
        let real = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::ReportParse(format!("{k} is not a number")))
        };
        let opt = |k: &str| -> Result<Option<f64>> {
            match get(k)? {
                "null" => Ok(None),
                _ => real(k).map(Some),
            }
        };
        let report = EvalReport {
            tp: count("tp")?,
            fp: count("fp")?,
            fn_: count("fn")?,
            tn: count("tn")?,
            accuracy: real("accuracy")?,
            precision: opt("precision")?,
            recall: opt("recall")?,
            f1: opt("f1")?,
            threshold: real("threshold")?,
            dataset: get("dataset")?.to_string(),
            model: get("model")?.to_string(),
        };
        if report.total() != count("samples")? {
            return Err(Error::ReportParse(
                "samples disagrees with the counts".into(),
            ));
        }
        if fields.len() != 12 {
            return Err(Error::ReportParse("unexpected keys in report".into()));
        }
        Ok(report)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

fn check_bits(labels: &[u8], what: &str) -> Result<()> {
    match labels.iter().find(|&&b| b > 1) {
        Some(b) => Err(Error::InvalidArgument(format!(
            "{what} label {b} is not 0 or 1"
        ))),
        None => Ok(()),
    }
}

/// Tallies predictions (1 = spam) against ground truth.
pub fn evaluate(predicted: &[u8], truth: &[u8]) -> Result<EvalReport> {
    if predicted.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    check_bits(predicted, "predicted")?;
    check_bits(truth, "true")?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => tn += 1,
        }
    }
    EvalReport::from_counts(tp, fp, fn_, tn)
}

/// Splits a file holding several blank-line separated records.
pub fn parse_reports(text: &str) -> Result<Vec<EvalReport>> {
    text.split("\n\n")
        .filter(|chunk| !chunk.trim().is_empty())
        .map(EvalReport::parse)
        .collect()
}

/// Aligned side-by-side table, one row per report.
pub fn render_table(reports: &[EvalReport]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
    let header = [
        "model",
        "dataset",
        "n",
        "tp",
        "fp",
        "fn",
        "tn",
        "accuracy",
        "precision",
        "recall",
        "f1",
    ];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                r.dataset.clone(),
                r.total().to_string(),
                r.tp.to_string(),
                r.fp.to_string(),
                r.fn_.to_string(),
                r.tn.to_string(),
                format!("{:.4}", r.accuracy),
                opt(r.precision),
                opt(r.recall),
                opt(r.f1),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    for row in &rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let r = evaluate(&[1, 0, 1, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!(
            (r.accuracy, r.precision, r.recall, r.f1),
            (1.0, Some(1.0), Some(1.0), Some(1.0))
        );
    }

    #[test]
    fn three_zero_one_four() {
        let r = EvalReport::from_counts(3, 0, 1, 4).unwrap();
        assert_eq!(r.precision, Some(1.0));
        assert_eq!(r.recall, Some(0.75));
        assert!((r.f1.unwrap() - 6.0 / 7.0).abs() < 1e-12);
        assert_eq!(r.accuracy, 0.875);
        assert!(r.serialize().contains("f1=0.8571\n"));
    }

    #[test]
    fn undefined_precision_is_null() {
        let r = evaluate(&[0, 0, 0], &[1, 0, 0]).unwrap();
        assert_eq!(r.precision, None);
        assert_eq!(r.f1, None);
        let text = r.serialize();
        assert!(text.contains("precision=null\n"));
        assert!(!text.contains("precision=0"));
        assert_eq!(EvalReport::parse(&text).unwrap().precision, None);
    }

    #[test]
    fn zero_precision_and_recall_leave_f1_undefined() {
        let r = evaluate(&[1, 0], &[0, 1]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (Some(0.0), Some(0.0), None));
    }

    #[test]
    fn errors() {
        assert!(evaluate(&[1], &[1, 0]).is_err());
        assert!(evaluate(&[2], &[1]).is_err());
        assert!(evaluate(&[1], &[3]).is_err());
        assert!(matches!(evaluate(&[], &[]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn serialize_round_trip() {
        let r = EvalReport::from_counts(17, 2, 5, 31)
            .unwrap()
            .with_model("spamnet:0123456789abcdef")
            .with_dataset("test:fedcba9876543210")
            .with_threshold(0.5);
        let text = r.serialize();
        let back = EvalReport::parse(&text).unwrap();
        assert_eq!(back.serialize(), text);
        assert_eq!((back.tp, back.fp, back.fn_, back.tn), (17, 2, 5, 31));
        assert_eq!(back.model, r.model);
    }

    #[test]
    fn parse_rejects_inconsistent_or_malformed() {
        let text = EvalReport::from_counts(1, 1, 1, 1).unwrap().serialize();
        assert!(EvalReport::parse(&text.replace("samples=4", "samples=5")).is_err());
        assert!(EvalReport::parse(&text.replace("tp=1", "tp=x")).is_err());
        assert!(EvalReport::parse(&text.replace("f1=", "f2=")).is_err());
        assert!(EvalReport::parse("garbage").is_err());
    }

    #[test]
    fn multiple_reports_and_table() {
        let a = EvalReport::from_counts(1, 0, 0, 1)
            .unwrap()
            .with_model("histogram");
        let b = EvalReport::from_counts(0, 0, 1, 1)
            .unwrap()
            .with_model("hog-linear");
        let text = format!("{}\n{}", a.serialize(), b.serialize());
        assert_eq!(parse_reports(&text).unwrap(), vec![a.clone(), b.clone()]);
        let table = render_table(&[a, b]);
        assert_eq!(table.lines().count(), 3);
        assert!(table.contains("undefined"));
        let col = table.lines().next().unwrap().find("accuracy").unwrap();
        assert!(table
            .lines()
            .skip(1)
            .all(|l| l[col..].starts_with(|c: char| c.is_ascii_digit())));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pairs() -> impl Strategy<Value = Vec<(u8, u8)>> {
            prop::collection::vec((0u8..2, 0u8..2), 1..=12)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn counts_match_tally(pairs in pairs()) {
                let (pred, truth): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
                let r = evaluate(&pred, &truth).unwrap();
                let tally = |p: u8, t: u8| pairs.iter().filter(|&&x| x == (p, t)).count();
                prop_assert_eq!((r.tp, r.fp, r.fn_, r.tn), (tally(1, 1), tally(1, 0), tally(0, 1), tally(0, 0)));
                prop_assert_eq!(r.total(), pairs.len());
                if let (Some(p), Some(q), Some(f)) = (r.precision, r.recall, r.f1) {
                    prop_assert!((f - 2.0 * p * q / (p + q)).abs() < 1e-9);
                }
            }

            #[test]
            fn flipping_positive_class_swaps_roles(pairs in pairs()) {
                let (pred, truth): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
                let flip = |v: &[u8]| v.iter().map(|b| 1 - b).collect::<Vec<_>>();
                let r = evaluate(&pred, &truth).unwrap();
                let f = evaluate(&flip(&pred), &flip(&truth)).unwrap();
                prop_assert_eq!((f.tp, f.fp, f.fn_, f.tn), (r.tn, r.fn_, r.fp, r.tp));
                prop_assert_eq!(f.accuracy, r.accuracy);
                // Flipped precision is the original negative predictive value.
                prop_assert_eq!(f.precision, ratio(r.tn, r.tn + r.fn_));
                prop_assert_eq!(f.recall, ratio(r.tn, r.tn + r.fp));
            }
        }
    }
}
