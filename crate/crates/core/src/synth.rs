//! Seeded synthetic-city incident generator: a 2-D Gaussian cluster
//! whose center drifts around the map, with Poisson daily counts. Makes
//! the whole pipeline testable with no external data.

use chrono::Duration;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::ingest::{group_by_day, BoundingBox, DatasetSchema, IncidentRecord};
use crate::raster::{rasterize_day, smooth, GaussianSpec, GridSpec, SmoothedHeatMap};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub days: u32,
    pub seed: u64,
    /// Poisson mean of incidents per day.
    pub mean_incidents: f64,
    pub bbox: BoundingBox,
    /// Days for one full loop of the drifting cluster center.
    pub drift_period: f64,
    /// Cluster standard deviation as a fraction of the box span.
    pub spread: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            days: 30,
            seed: 0,
            mean_incidents: 30.0,
            bbox: default_bbox(),
            drift_period: 60.0,
            spread: 0.06,
        }
    }
}

/// A city-sized box (roughly the Cincinnati extent).
pub fn default_bbox() -> BoundingBox {
    BoundingBox {
        lat_min: 39.05,
        lat_max: 39.25,
        lon_min: -84.65,
        lon_max: -84.35,
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(Error::config("synthetic fixture needs days >= 1"));
        }
        if !(self.mean_incidents > 0.0) || !(self.drift_period > 0.0) || !(self.spread > 0.0) {
            return Err(Error::config(
                "mean_incidents, drift_period, and spread must be > 0",
            ));
        }
        self.bbox.validate()
    }

    /// Schema matching [`incidents_to_csv`] output for this fixture.
    pub fn schema(&self) -> DatasetSchema {
        let mut schema = DatasetSchema::preset("synthetic").expect("preset exists");
        schema.end_date = schema.start_date + Duration::days(self.days as i64 - 1);
        schema
    }
}

/// Generate the drifting-hotspot incident stream, day by day.
pub fn generate_incidents(cfg: &SynthConfig) -> Result<Vec<IncidentRecord>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let b = cfg.bbox;
    let lat_span = b.lat_max - b.lat_min;
    let lon_span = b.lon_max - b.lon_min;
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut records = Vec::new();
    for day in 1..=cfg.days {
        let phase = 2.0 * std::f64::consts::PI * day as f64 / cfg.drift_period;
        // cluster center loops on an ellipse inside the box
        let center_lat = b.lat_min + lat_span * (0.5 + 0.3 * phase.sin());
        let center_lon = b.lon_min + lon_span * (0.5 + 0.3 * phase.cos());
        let count = Poisson::new(cfg.mean_incidents)
            .expect("positive mean")
            .sample(&mut rng) as u64;
        for _ in 0..count {
            let lat = center_lat + cfg.spread * lat_span * noise.sample(&mut rng);
            let lon = center_lon + cfg.spread * lon_span * noise.sample(&mut rng);
            records.push(IncidentRecord {
                day,
                lat: lat.clamp(b.lat_min, b.lat_max),
                lon: lon.clamp(b.lon_min, b.lon_max),
            });
        }
        // guarantee at least one incident on the first day so the
        // fixture never starts with an empty tight box
        if day == 1 && records.is_empty() {
            records.push(IncidentRecord {
                day,
                lat: center_lat.clamp(b.lat_min, b.lat_max),
                lon: center_lon.clamp(b.lon_min, b.lon_max),
            });
        }
        let _: f64 = rng.gen(); // decouple per-day streams slightly
    }
    Ok(records)
}

/// Render the fixture as a CSV matching the `synthetic` schema preset.
pub fn incidents_to_csv(records: &[IncidentRecord], schema: &DatasetSchema) -> String {
    let mut out = format!(
        "{},{},{}\n",
        schema.date_col, schema.lat_col, schema.lon_col
    );
    for r in records {
        let date = schema.start_date + Duration::days(r.day as i64 - 1);
        out.push_str(&format!("{},{},{}\n", date.format("%Y-%m-%d"), r.lat, r.lon));
    }
    out
}

/// End-to-end fixture: generate, rasterize, and smooth daily maps.
pub fn smoothed_maps(
    cfg: &SynthConfig,
    height: usize,
    width: usize,
    sigma: f64,
) -> Result<Vec<SmoothedHeatMap>> {
    let records = generate_incidents(cfg)?;
    let schema = cfg.schema();
    let grid = GridSpec {
        height,
        width,
        bbox: cfg.bbox,
    };
    let spec = GaussianSpec { sigma };
    group_by_day(&records, &schema)
        .iter()
        .enumerate()
        .map(|(i, day_records)| {
            let hm = rasterize_day(i as u32 + 1, day_records, &grid)?;
            smooth(&hm, &spec)
        })
        .collect()
}
