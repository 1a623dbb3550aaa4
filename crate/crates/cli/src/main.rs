//! Command-line pipeline: synth -> ingest -> rasterize -> make-dataset
//! -> train -> predict/evaluate.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numerical
//! failure. Failures print one machine-parseable line on stderr.

// Validation writes `!(x > 0.0)` rather than `x <= 0.0` to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use heatcast::dataset::{
    default_split_index, make_windows, split, DatasetCache, ScalingMode, SequenceSample,
    SplitConfig,
};
use heatcast::error::{Error, Result};
use heatcast::eval::compare;
use heatcast::ingest::{filter_bbox, group_by_day, resolve_bbox, parse_incidents, IncidentRecord};
use heatcast::models::{
    build_forecaster, build_gan, gan_params_merged, load_forecaster, load_gan, predict,
    Forecaster, ModelKind, ModelMeta,
};
use heatcast::pgm::{export_pgm, export_png, import_pgm};
use heatcast::raster::{rasterize_day, smooth, GaussianSpec, GridSpec, SmoothedHeatMap};
use heatcast::synth::{generate_incidents, incidents_to_csv, SynthConfig};
use heatcast::training::{train_gan, train_supervised, PeriodicCheckpoint, TrainHistory};
use heatcast::{checkpoint, dataset};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "heatcast", version, about = "Daily incident heatmap forecasting pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an incident CSV into day-indexed records.
    Ingest(IngestArgs),
    /// Rasterize records into one smoothed PGM heatmap per day.
    Rasterize(RasterizeArgs),
    /// Stack daily heatmaps into a windowed dataset cache.
    MakeDataset(MakeDatasetArgs),
    /// Train a forecaster on the training split of a dataset.
    Train(TrainArgs),
    /// Predict the day after a window and export it as PGM/PNG.
    Predict(PredictArgs),
    /// Score checkpoints on the test split and emit a comparison report.
    Evaluate(EvaluateArgs),
    /// Generate the seeded synthetic-city fixture (CSV + config).
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Incident CSV to parse.
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Schema preset override: cincinnati | connecticut | synthetic.
    #[arg(long)]
    schema: Option<String>,
    #[arg(long)]
    start_date: Option<String>,
    #[arg(long)]
    end_date: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RasterizeArgs {
    /// Records CSV produced by `ingest`.
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    grid_height: Option<usize>,
    #[arg(long)]
    grid_width: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MakeDatasetArgs {
    /// Directory holding `manifest.json` and the per-day PGMs.
    #[arg(long)]
    rasters: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Window length.
    #[arg(long)]
    n: Option<usize>,
    /// Last training start index (defaults to the 80/20 split).
    #[arg(long)]
    s: Option<usize>,
    /// unit | symmetric.
    #[arg(long)]
    scaling: Option<String>,
    /// Output cache file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// convlstm | att-convlstm | td-enc-dec | gan.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    lambda_l1: Option<f64>,
    #[arg(long)]
    n_critic: Option<usize>,
    #[arg(long)]
    clip_c: Option<f64>,
    /// full | reduced channel widths.
    #[arg(long)]
    width: Option<String>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Start index of the input window; the prediction is for day t+n.
    #[arg(long)]
    t: u32,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// One or more checkpoint files to score.
    #[arg(long, num_args = 1.., required = true)]
    checkpoints: Vec<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    s: Option<usize>,
    /// Dataset label printed in the report.
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    days: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mean_incidents: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = classify(&e);
            let msg = e.to_string().replace('\n', " ").replace('"', "'");
            eprintln!("error kind={kind} code={code} msg=\"{msg}\"");
            ExitCode::from(code)
        }
    }
}

fn classify(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Config(_) => ("config", 2),
        Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Shape(_) => ("data", 3),
        Error::Numerical(_) => ("numerical", 4),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Rasterize(args) => cmd_rasterize(args),
        Command::MakeDataset(args) => cmd_make_dataset(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn out_dir(cfg: &RunConfig, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone().unwrap_or_else(|| PathBuf::from(&cfg.out_dir))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::data(format!("cannot create {}: {e}", dir.display())))
}

// ---------------------------------------------------------------- ingest

#[derive(Serialize)]
struct IngestSummary<'a> {
    rows: usize,
    records: usize,
    skipped: &'a heatcast::ingest::SkipReport,
    records_file: String,
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    if let Some(v) = args.schema {
        cfg.schema = v;
    }
    if args.start_date.is_some() {
        cfg.start_date = args.start_date;
    }
    if args.end_date.is_some() {
        cfg.end_date = args.end_date;
    }
    cfg.validate()?;
    let schema = cfg.schema()?;

    let mut raw = Vec::new();
    fs::File::open(&args.csv)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", args.csv.display())))?
        .read_to_end(&mut raw)?;
    let (records, skipped) = parse_incidents(raw.as_slice(), &schema)?;
    let rows = records.len() + skipped.total();

    let dir = out_dir(&cfg, &args.out);
    ensure_dir(&dir)?;
    let records_path = dir.join("records.csv");
    let mut csv_out = String::from("day,lat,lon\n");
    for r in &records {
        csv_out.push_str(&format!("{},{},{}\n", r.day, r.lat, r.lon));
    }
    fs::write(&records_path, csv_out)?;

    let summary = IngestSummary {
        rows,
        records: records.len(),
        skipped: &skipped,
        records_file: records_path.display().to_string(),
    };
    println!(
        "{}",
        serde_json::to_string(&summary).expect("summary is serializable")
    );
    Ok(())
}

fn read_records_csv(path: &Path) -> Result<Vec<IncidentRecord>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("day,lat,lon") => {}
        _ => {
            return Err(Error::data(format!(
                "{} is not a records CSV",
                path.display()
            )))
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut parse = |what: &str| -> Result<f64> {
            parts
                .next()
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::data(format!("bad {what} on records line {}", i + 2)))
        };
        let day = parse("day")? as u32;
        let lat = parse("lat")?;
        let lon = parse("lon")?;
        records.push(IncidentRecord { day, lat, lon });
    }
    if records.is_empty() {
        return Err(Error::data(format!("{} holds no records", path.display())));
    }
    Ok(records)
}

// ------------------------------------------------------------- rasterize

#[derive(Serialize, Deserialize)]
struct RasterManifest {
    grid: GridSpec,
    sigma: f64,
    days: usize,
    records: usize,
    records_outside_bbox: usize,
    files: Vec<String>,
}

fn cmd_rasterize(args: RasterizeArgs) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    if let Some(v) = args.grid_height {
        cfg.grid_height = v;
    }
    if let Some(v) = args.grid_width {
        cfg.grid_width = v;
    }
    if let Some(v) = args.sigma {
        cfg.sigma = v;
    }
    cfg.validate()?;
    let schema = cfg.schema()?;

    let records = read_records_csv(&args.records)?;
    let day_count = schema.day_count() as usize;
    if let Some(bad) = records.iter().find(|r| r.day < 1 || r.day as usize > day_count) {
        return Err(Error::data(format!(
            "record day {} outside schema range 1..={day_count}",
            bad.day
        )));
    }
    let bbox = resolve_bbox(&records, cfg.bbox)?;
    let (inside, dropped) = filter_bbox(records, &bbox);
    if inside.is_empty() {
        return Err(Error::data("no records inside the bounding box".to_string()));
    }

    let grid = GridSpec {
        height: cfg.grid_height,
        width: cfg.grid_width,
        bbox,
    };
    let spec = GaussianSpec { sigma: cfg.sigma };
    let dir = out_dir(&cfg, &args.out);
    ensure_dir(&dir)?;

    let grouped = group_by_day(&inside, &schema);
    let mut files = Vec::with_capacity(grouped.len());
    let record_count = inside.len();
    for (i, day_records) in grouped.iter().enumerate() {
        let day = i as u32 + 1;
        let hm = rasterize_day(day, day_records, &grid)?;
        let smoothed = smooth(&hm, &spec)?;
        let name = format!("day_{day:05}.pgm");
        let bytes = export_pgm(&heatcast::raster::HeatMap {
            day: smoothed.day,
            grid: smoothed.grid,
        })?;
        fs::write(dir.join(&name), bytes)?;
        files.push(name);
    }

    let manifest = RasterManifest {
        grid,
        sigma: cfg.sigma,
        days: grouped.len(),
        records: record_count,
        records_outside_bbox: dropped,
        files,
    };
    let manifest_path = dir.join("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest is serializable"),
    )?;
    println!(
        "rasterized {} days ({} records, {} outside bbox) into {}",
        manifest.days,
        manifest.records,
        manifest.records_outside_bbox,
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------- make-dataset

fn cmd_make_dataset(args: MakeDatasetArgs) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if args.s.is_some() {
        cfg.s = args.s;
    }
    if let Some(v) = args.scaling {
        cfg.scaling = v;
    }
    cfg.validate()?;
    let mode = cfg.scaling_mode()?;

    let manifest_path = args.rasters.join("manifest.json");
    let manifest: RasterManifest = serde_json::from_str(
        &fs::read_to_string(&manifest_path)
            .map_err(|e| Error::data(format!("cannot read {}: {e}", manifest_path.display())))?,
    )
    .map_err(|e| Error::data(format!("bad manifest {}: {e}", manifest_path.display())))?;

    let mut maps = Vec::with_capacity(manifest.files.len());
    for name in &manifest.files {
        let bytes = fs::read(args.rasters.join(name))
            .map_err(|e| Error::data(format!("cannot read raster {name}: {e}")))?;
        let hm = import_pgm(&bytes)?;
        maps.push(SmoothedHeatMap {
            day: hm.day,
            grid: hm.grid,
        });
    }
    let samples = make_windows(&maps, cfg.n)?;
    let count = samples.len();
    let s = cfg.s.unwrap_or_else(|| default_split_index(count));
    // fail now if the split cannot work, before writing anything
    if s < 1 || s >= count {
        return Err(Error::config(format!(
            "s={s} outside 1..={} for {count} samples",
            count - 1
        )));
    }

    let cache = DatasetCache::new(samples, mode)?;
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir).join("dataset.bin"));
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    cache.write_file(&out)?;
    println!(
        "dataset: {count} samples (n={}, {}x{}, {}), train t<={s}, test t>={}, written to {}",
        cache.n,
        cache.height,
        cache.width,
        mode.name(),
        s + 1,
        out.display()
    );
    Ok(())
}

// ----------------------------------------------------------------- train

fn split_cache(
    cache: &DatasetCache,
    s_flag: Option<usize>,
    cfg: &RunConfig,
) -> Result<(Vec<SequenceSample>, Vec<SequenceSample>, usize)> {
    let count = cache.samples.len();
    let s = s_flag
        .or(cfg.s)
        .unwrap_or_else(|| default_split_index(count));
    let (train, test) = split(cache.samples.clone(), &SplitConfig { n: cache.n, s })?;
    Ok((train, test, s))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    if let Some(v) = args.model {
        cfg.model = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.lambda_l1 {
        cfg.lambda_l1 = v;
    }
    if let Some(v) = args.n_critic {
        cfg.n_critic = v;
    }
    if let Some(v) = args.clip_c {
        cfg.clip_c = v;
    }
    if let Some(v) = args.width {
        cfg.width = v;
    }
    if args.s.is_some() {
        cfg.s = args.s;
    }
    if let Some(v) = args.checkpoint_every {
        cfg.checkpoint_every = v;
    }
    cfg.validate()?;
    let kind = cfg.model_kind()?;
    let train_cfg = cfg.train_config();

    let cache = DatasetCache::read_file(&args.dataset)?;
    // scaling is a model-family property: the supervised baselines run
    // on [0,1] inputs, the adversarial pair on [-1,1]
    match (kind, cache.mode) {
        (ModelKind::Gan, ScalingMode::Symmetric) => {}
        (ModelKind::Gan, other) => {
            return Err(Error::config(format!(
                "model gan needs a symmetric-scaled dataset, cache says {}",
                other.name()
            )));
        }
        (_, ScalingMode::Unit) => {}
        (k, other) => {
            return Err(Error::config(format!(
                "model {} needs a unit-scaled dataset, cache says {}",
                k.name(),
                other.name()
            )));
        }
    }

    let (train_set, _, s) = split_cache(&cache, None, &cfg)?;
    let model_cfg = cfg.model_config(cache.n, cache.height, cache.width, cache.mode);
    let dir = out_dir(&cfg, &args.out);
    ensure_dir(&dir)?;
    let periodic_store;
    let periodic = if cfg.checkpoint_every > 0 {
        periodic_store = PeriodicCheckpoint {
            every: cfg.checkpoint_every,
            dir: dir.clone(),
        };
        Some(&periodic_store)
    } else {
        None
    };

    let checkpoint_path = dir.join(format!("{}.hgf", kind.name()));
    let history: TrainHistory;
    match kind {
        ModelKind::Gan => {
            let (mut generator, mut critic) = build_gan(&model_cfg, cfg.seed)?;
            history = train_gan(&mut generator, &mut critic, &train_set, &train_cfg, periodic)?;
            let merged = gan_params_merged(&generator, &critic);
            let meta = ModelMeta {
                kind: ModelKind::Gan,
                config: model_cfg,
            };
            checkpoint::write_file(&checkpoint_path, &meta.to_json(), &merged)?;
        }
        _ => {
            let mut model = build_forecaster(kind, &model_cfg, cfg.seed)?;
            history = train_supervised(model.as_mut(), &train_set, &train_cfg, periodic)?;
            let meta = ModelMeta {
                kind,
                config: model_cfg,
            };
            checkpoint::write_file(&checkpoint_path, &meta.to_json(), model.params())?;
        }
    }
    let history_path = dir.join("history.csv");
    fs::write(&history_path, history.to_csv())?;
    let last = history.records.last();
    println!(
        "trained {} for {} epochs on {} samples (s={s}); final g_loss={}; checkpoint {}",
        kind.name(),
        history.records.len(),
        train_set.len(),
        last.map_or(f64::NAN, |r| r.g_loss),
        checkpoint_path.display()
    );
    Ok(())
}

// --------------------------------------------------------------- predict

/// Load any checkpoint as a forecaster (the generator for adversarial
/// checkpoints), plus its metadata.
fn load_any_forecaster(path: &Path) -> Result<(ModelMeta, Box<dyn Forecaster>)> {
    let (meta_json, records) = checkpoint::read_file(path)?;
    let meta = ModelMeta::from_json(&meta_json)?;
    let model: Box<dyn Forecaster> = if meta.kind == ModelKind::Gan {
        let (generator, _critic) = load_gan(&meta, &records)?;
        Box::new(generator)
    } else {
        load_forecaster(&meta, &records)?
    };
    Ok((meta, model))
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let cfg = RunConfig::load_or_default(args.config.as_deref())?;
    cfg.validate()?;
    let (meta, model) = load_any_forecaster(&args.checkpoint)?;
    let cache = DatasetCache::read_file(&args.dataset)?;
    if meta.config.n != cache.n
        || meta.config.height != cache.height
        || meta.config.width != cache.width
    {
        return Err(Error::data(format!(
            "checkpoint geometry n={} {}x{} does not match dataset n={} {}x{}",
            meta.config.n,
            meta.config.height,
            meta.config.width,
            cache.n,
            cache.height,
            cache.width
        )));
    }
    let sample = cache.samples.iter().find(|s| s.t == args.t).ok_or_else(|| {
        Error::data(format!(
            "no sample with t={} (dataset covers t=1..={})",
            args.t,
            cache.samples.len()
        ))
    })?;

    let scaled = dataset::scale_sample(sample, meta.config.mode);
    let pred = predict(model.as_ref(), &scaled.input)?;
    let intensities = dataset::unscale_grid(&pred, meta.config.mode);
    let day = args.t + cache.n as u32;
    let hm = heatcast::raster::HeatMap {
        day,
        grid: heatcast::tensor::Tensor::new(
            vec![cache.height, cache.width],
            intensities.data().to_vec(),
        )?,
    };

    let dir = out_dir(&cfg, &args.out);
    ensure_dir(&dir)?;
    let pgm_path = dir.join(format!("pred_day{day:05}.pgm"));
    let png_path = dir.join(format!("pred_day{day:05}.png"));
    fs::write(&pgm_path, export_pgm(&hm)?)?;
    fs::write(&png_path, export_png(&hm)?)?;
    println!(
        "predicted day {day} from window t={}; wrote {} and {}",
        args.t,
        pgm_path.display(),
        png_path.display()
    );
    Ok(())
}

// -------------------------------------------------------------- evaluate

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    if args.s.is_some() {
        cfg.s = args.s;
    }
    cfg.validate()?;
    let cache = DatasetCache::read_file(&args.dataset)?;
    let (_, test_set, s) = split_cache(&cache, args.s, &cfg)?;

    let mut loaded = Vec::new();
    for path in &args.checkpoints {
        let (meta, model) = load_any_forecaster(path)?;
        if meta.config.n != cache.n
            || meta.config.height != cache.height
            || meta.config.width != cache.width
        {
            return Err(Error::data(format!(
                "checkpoint {} does not match dataset geometry",
                path.display()
            )));
        }
        loaded.push((meta.kind.display_name(), model));
    }
    let entries: Vec<(&str, &dyn Forecaster)> = loaded
        .iter()
        .map(|(name, model)| (*name, model.as_ref()))
        .collect();

    let label = args.label.unwrap_or_else(|| cfg.schema.clone());
    let split_desc = format!("s={s} of {} samples (n={})", cache.samples.len(), cache.n);
    let report = compare(&entries, &test_set, &label, &split_desc, cfg.seed)?;

    let dir = out_dir(&cfg, &args.out);
    ensure_dir(&dir)?;
    let text = report.render_text();
    fs::write(dir.join("report.txt"), &text)?;
    fs::write(dir.join("report.csv"), report.render_csv())?;
    print!("{text}");
    Ok(())
}

// ----------------------------------------------------------------- synth

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    cfg.schema = "synthetic".to_string();
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    cfg.validate()?;

    let synth_cfg = SynthConfig {
        days: args.days.unwrap_or(30),
        seed: cfg.seed,
        mean_incidents: args.mean_incidents.unwrap_or(30.0),
        ..SynthConfig::default()
    };
    let records = generate_incidents(&synth_cfg)?;
    let schema = synth_cfg.schema();

    let dir = out_dir(&cfg, &args.out);
    ensure_dir(&dir)?;
    let csv_path = dir.join("incidents.csv");
    fs::write(&csv_path, incidents_to_csv(&records, &schema))?;

    // ship a ready-to-use config next to the fixture, tuned so the
    // whole pipeline runs in minutes on the synthetic data
    cfg.end_date = Some(schema.end_date.format("%Y-%m-%d").to_string());
    cfg.bbox = Some(synth_cfg.bbox);
    cfg.grid_height = 16;
    cfg.grid_width = 16;
    cfg.sigma = 2.0;
    cfg.width = "reduced".to_string();
    cfg.epochs = 100;
    cfg.learning_rate = 0.002;
    let config_path = dir.join("config.json");
    fs::write(
        &config_path,
        serde_json::to_string_pretty(&cfg).expect("config is serializable"),
    )?;
    println!(
        "synthetic fixture: {} incidents over {} days; wrote {} and {}",
        records.len(),
        synth_cfg.days,
        csv_path.display(),
        config_path.display()
    );
    Ok(())
}
