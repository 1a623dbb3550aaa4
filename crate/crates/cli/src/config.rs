//! Run configuration: JSON file plus CLI-flag overrides, validated as a
//! whole before any command does work. Precedence per field is
//! flag > file > default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use heatcast::dataset::ScalingMode;
use heatcast::error::{Error, Result};
use heatcast::ingest::{BoundingBox, DatasetSchema};
use heatcast::models::{ModelConfig, ModelKind};
use heatcast::training::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Schema preset: cincinnati | connecticut | synthetic.
    pub schema: String,
    // Optional per-column schema overrides.
    pub date_col: Option<String>,
    pub lat_col: Option<String>,
    pub lon_col: Option<String>,
    pub date_format: Option<String>,
    /// ISO dates overriding the preset range.
    pub start_date: Option<String>,
    pub end_date: Option<String>,

    /// Fixed scale space; when absent the tight box over the records
    /// (plus 2% margin) is used.
    pub bbox: Option<BoundingBox>,
    pub grid_height: usize,
    pub grid_width: usize,
    pub sigma: f64,

    /// Window length.
    pub n: usize,
    /// Last training start index; default is the 80/20 chronological
    /// split.
    pub s: Option<usize>,
    pub scaling: String,

    pub model: String,
    /// Channel widths: full (64/128/256) or reduced (4/8/16).
    pub width: String,

    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda_l1: f64,
    pub n_critic: usize,
    pub clip_c: f64,
    /// Write a checkpoint every k epochs (0 disables).
    pub checkpoint_every: usize,

    pub seed: u64,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        RunConfig {
            schema: "synthetic".to_string(),
            date_col: None,
            lat_col: None,
            lon_col: None,
            date_format: None,
            start_date: None,
            end_date: None,
            bbox: None,
            grid_height: 64,
            grid_width: 64,
            sigma: 1.5,
            n: 6,
            s: None,
            scaling: "unit".to_string(),
            model: "att-convlstm".to_string(),
            width: "full".to_string(),
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            lambda_l1: t.lambda_l1,
            n_critic: t.n_critic,
            clip_c: t.clip_c,
            checkpoint_every: 0,
            seed: 0,
            out_dir: "out".to_string(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("bad config {}: {e}", path.display())))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(RunConfig::default()),
        }
    }

    /// Check everything and report every violated field at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if DatasetSchema::preset(&self.schema).is_none() {
            problems.push(format!(
                "schema: unknown preset '{}' (expected cincinnati|connecticut|synthetic)",
                self.schema
            ));
        }
        for (field, raw) in [("start_date", &self.start_date), ("end_date", &self.end_date)] {
            if let Some(raw) = raw {
                if chrono::NaiveDate::parse_from_str(raw, "%Y-%m-%d").is_err() {
                    problems.push(format!("{field}: '{raw}' is not a YYYY-MM-DD date"));
                }
            }
        }
        if let Some(b) = &self.bbox {
            if b.validate().is_err() {
                problems.push("bbox: min edges must be strictly below max edges".to_string());
            }
        }
        if self.grid_height == 0 || !self.grid_height.is_multiple_of(4) {
            problems.push(format!(
                "grid_height: {} must be a positive multiple of 4",
                self.grid_height
            ));
        }
        if self.grid_width == 0 || !self.grid_width.is_multiple_of(4) {
            problems.push(format!(
                "grid_width: {} must be a positive multiple of 4",
                self.grid_width
            ));
        }
        if !(self.sigma > 0.0) {
            problems.push(format!("sigma: {} must be > 0", self.sigma));
        }
        if !(2..=8).contains(&self.n) {
            problems.push(format!("n: {} outside 2..=8", self.n));
        }
        if self.s == Some(0) {
            problems.push("s: must be >= 1".to_string());
        }
        if ScalingMode::parse(&self.scaling).is_err() {
            problems.push(format!("scaling: '{}' is not unit|symmetric", self.scaling));
        }
        if ModelKind::parse(&self.model).is_err() {
            problems.push(format!(
                "model: '{}' is not convlstm|att-convlstm|td-enc-dec|gan",
                self.model
            ));
        }
        if self.width != "full" && self.width != "reduced" {
            problems.push(format!("width: '{}' is not full|reduced", self.width));
        }
        if let Err(e) = self.train_config().validate() {
            problems.push(e.to_string().replace("config error: ", ""));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }

    /// The effective schema: preset plus overrides.
    pub fn schema(&self) -> Result<DatasetSchema> {
        let mut schema = DatasetSchema::preset(&self.schema)
            .ok_or_else(|| Error::config(format!("unknown schema preset '{}'", self.schema)))?;
        if let Some(v) = &self.date_col {
            schema.date_col = v.clone();
        }
        if let Some(v) = &self.lat_col {
            schema.lat_col = v.clone();
        }
        if let Some(v) = &self.lon_col {
            schema.lon_col = v.clone();
        }
        if let Some(v) = &self.date_format {
            schema.date_format = v.clone();
        }
        if let Some(v) = &self.start_date {
            schema.start_date = chrono::NaiveDate::parse_from_str(v, "%Y-%m-%d")
                .map_err(|e| Error::config(format!("start_date '{v}': {e}")))?;
        }
        if let Some(v) = &self.end_date {
            schema.end_date = chrono::NaiveDate::parse_from_str(v, "%Y-%m-%d")
                .map_err(|e| Error::config(format!("end_date '{v}': {e}")))?;
        }
        schema.validate()?;
        Ok(schema)
    }

    pub fn scaling_mode(&self) -> Result<ScalingMode> {
        ScalingMode::parse(&self.scaling)
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        ModelKind::parse(&self.model)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            lambda_l1: self.lambda_l1,
            n_critic: self.n_critic,
            clip_c: self.clip_c,
            ..TrainConfig::default()
        }
    }

    /// Model architecture for a dataset of the given geometry.
    pub fn model_config(
        &self,
        n: usize,
        height: usize,
        width: usize,
        mode: ScalingMode,
    ) -> ModelConfig {
        if self.width == "reduced" {
            let mut cfg = ModelConfig::reduced_with(n, height, width, mode);
            cfg.n = n;
            cfg
        } else {
            ModelConfig::full(n, height, width, mode)
        }
    }
}
