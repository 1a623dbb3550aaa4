//! Test-split metrics and comparison reports.
//!
//! All models are scored on a common `[0, 1]` basis — predictions are
//! mapped from their own activation range and labels divided by 255 —
//! so unit- and symmetric-scaled models stay comparable. Metrics
//! average per-pixel errors within each sample first, then across
//! samples.

use crate::dataset::{scale_sample, SequenceSample};
use crate::error::{Error, Result};
use crate::models::{predict, Forecaster};
use crate::raster::MAX_INTENSITY;

/// One scored model: MSE and MAE over the test split.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub mse: f64,
    pub mae: f64,
}

/// Comparison table in the shape of the published evaluation: one row
/// per method plus the split context.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub dataset_label: String,
    pub split_description: String,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

/// (method, mse, mae) as previously reported.
type ReferenceRow = (&'static str, f64, f64);

/// Reported reference magnitudes for the two public datasets. These are
/// annotations only — training stochasticity and dataset drift make
/// them non-targets, and they are labeled as such wherever printed.
const REFERENCE_RESULTS: &[(&str, &[ReferenceRow])] = &[
    (
        "cincinnati",
        &[
            ("ConvLSTM", 0.0628, 0.0083),
            ("Att-ConvLSTM", 0.04256, 0.0062),
            ("TD-Conv-Enc-Dec", 0.0562, 0.0075),
            ("Adversarial Att-ConvLSTM", 0.03371, 0.0057),
        ],
    ),
    (
        "connecticut",
        &[
            ("ConvLSTM", 0.0583, 0.0081),
            ("Att-ConvLSTM", 0.0415, 0.0067),
            ("TD-Conv-Enc-Dec", 0.0517, 0.0073),
            ("Adversarial Att-ConvLSTM", 0.0309, 0.0052),
        ],
    ),
];

/// Score a model on a test split: `(MSE, MAE)` on the `[0, 1]` basis.
pub fn evaluate(model: &dyn Forecaster, test: &[SequenceSample]) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::data("empty test split".to_string()));
    }
    let mode = model.config().mode;
    let mut mse_sum = 0.0;
    let mut mae_sum = 0.0;
    for sample in test {
        let scaled = scale_sample(sample, mode);
        let pred = predict(model, &scaled.input)?;
        let mut se = 0.0;
        let mut ae = 0.0;
        for (p, t) in pred.iter().zip(sample.label.iter()) {
            let pu = mode.to_unit_basis(*p);
            let tu = t / MAX_INTENSITY;
            let d = pu - tu;
            se += d * d;
            ae += d.abs();
        }
        let pixels = sample.label.len() as f64;
        mse_sum += se / pixels;
        mae_sum += ae / pixels;
    }
    let count = test.len() as f64;
    Ok((mse_sum / count, mae_sum / count))
}

/// MSE/MAE of predicting all zeros, on the same basis. The floor any
/// trained model has to beat.
pub fn blank_predictor_metrics(test: &[SequenceSample]) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::data("empty test split".to_string()));
    }
    let mut mse_sum = 0.0;
    let mut mae_sum = 0.0;
    for sample in test {
        let mut se = 0.0;
        let mut ae = 0.0;
        for t in sample.label.iter() {
            let tu = t / MAX_INTENSITY;
            se += tu * tu;
            ae += tu.abs();
        }
        let pixels = sample.label.len() as f64;
        mse_sum += se / pixels;
        mae_sum += ae / pixels;
    }
    let count = test.len() as f64;
    Ok((mse_sum / count, mae_sum / count))
}

/// Evaluate several named models on one test split.
pub fn compare(
    entries: &[(&str, &dyn Forecaster)],
    test: &[SequenceSample],
    dataset_label: &str,
    split_description: &str,
    seed: u64,
) -> Result<MetricsReport> {
    let mut rows = Vec::with_capacity(entries.len());
    for (name, model) in entries {
        let (mse, mae) = evaluate(*model, test)?;
        rows.push(ReportRow {
            name: name.to_string(),
            mse,
            mae,
        });
    }
    let report = MetricsReport {
        dataset_label: dataset_label.to_string(),
        split_description: split_description.to_string(),
        seed,
        rows,
    };
    report.validate()?;
    Ok(report)
}

impl MetricsReport {
    /// Internal consistency: metrics are nonnegative and MAE cannot
    /// exceed sqrt(MSE) (Jensen's inequality over per-pixel errors).
    pub fn validate(&self) -> Result<()> {
        for row in &self.rows {
            if row.mse < 0.0 || row.mae < 0.0 {
                return Err(Error::numerical(format!(
                    "negative metric in row '{}'",
                    row.name
                )));
            }
            if row.mae > row.mse.sqrt() + 1e-12 {
                return Err(Error::numerical(format!(
                    "row '{}' violates MAE <= sqrt(MSE): {} > sqrt({})",
                    row.name, row.mae, row.mse
                )));
            }
        }
        Ok(())
    }

    /// Aligned text table plus, for known dataset labels, the reported
    /// reference magnitudes (explicitly labeled non-targets).
    pub fn render_text(&self) -> String {
        let name_width = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .chain(["method".len()])
            .max()
            .unwrap_or(6);
        let mut out = String::new();
        out.push_str(&format!(
            "dataset: {}  split: {}  seed: {}\n",
            self.dataset_label, self.split_description, self.seed
        ));
        out.push_str(&format!(
            "{:name_width$}  {:>12}  {:>12}\n",
            "method", "mse", "mae"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:name_width$}  {:>12.6}  {:>12.6}\n",
                r.name, r.mse, r.mae
            ));
        }
        let label = self.dataset_label.to_lowercase();
        for (key, rows) in REFERENCE_RESULTS {
            if label.contains(key) {
                out.push_str(&format!(
                    "\nreported reference values for {key} (annotations, not targets):\n"
                ));
                for (name, mse, mae) in rows.iter() {
                    out.push_str(&format!(
                        "{name:name_width$}  {mse:>12.6}  {mae:>12.6}\n"
                    ));
                }
            }
        }
        out
    }

    /// CSV with the exact column order `method,mse,mae`.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("method,mse,mae\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.name, r.mse, r.mae));
        }
        out
    }
}
