//! Daily intensity grids and Gaussian smoothing.
//!
//! Each day's incident list becomes a grayscale grid: counts per cell,
//! max-normalized to 255 (a day with no incidents stays all-zero).
//! Smoothing convolves that grid with a normalized truncated Gaussian
//! kernel to model the spread of influence around each incident
//! location, then re-normalizes the maximum back to 255.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{BoundingBox, IncidentRecord};
use crate::tensor::Tensor;

pub const MAX_INTENSITY: f64 = 255.0;

/// Raster resolution plus the geographic box it covers. Extents must be
/// even (the models pool by 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    pub bbox: BoundingBox,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || !self.height.is_multiple_of(2) || !self.width.is_multiple_of(2) {
            return Err(Error::config(format!(
                "grid extents must be positive and even, got {}x{}",
                self.height, self.width
            )));
        }
        self.bbox.validate()
    }

    /// Map a coordinate inside the box to a cell. Cells are half-open;
    /// the closing edge (southmost row, eastmost column) belongs to the
    /// last cell. Latitude maps to rows top-down (north at row 0).
    pub fn cell(&self, lat: f64, lon: f64) -> (usize, usize) {
        let b = &self.bbox;
        let frac_row = (b.lat_max - lat) / (b.lat_max - b.lat_min);
        let frac_col = (lon - b.lon_min) / (b.lon_max - b.lon_min);
        let row = ((frac_row * self.height as f64) as usize).min(self.height - 1);
        let col = ((frac_col * self.width as f64) as usize).min(self.width - 1);
        (row, col)
    }
}

/// Intensity grid for one day, values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap {
    pub day: u32,
    pub grid: Tensor,
}

/// [`HeatMap`] after Gaussian smoothing; same invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedHeatMap {
    pub day: u32,
    pub grid: Tensor,
}

/// Gaussian kernel parameters: sigma in pixels, truncated at
/// `ceil(3*sigma)` offsets from the center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub sigma: f64,
}

impl GaussianSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::config(format!(
                "gaussian sigma must be > 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn radius(&self) -> usize {
        (3.0 * self.sigma).ceil() as usize
    }
}

/// Count incidents per cell and rescale so the maximal count maps to
/// 255. A day with no incidents yields the all-zero grid.
pub fn rasterize_day(day: u32, records: &[IncidentRecord], grid: &GridSpec) -> Result<HeatMap> {
    grid.validate()?;
    let mut counts = vec![0.0_f64; grid.height * grid.width];
    for r in records {
        debug_assert!(grid.bbox.contains(r.lat, r.lon), "record outside bbox");
        let (row, col) = grid.cell(r.lat, r.lon);
        counts[row * grid.width + col] += 1.0;
    }
    let max = counts.iter().cloned().fold(0.0_f64, f64::max);
    if max > 0.0 {
        // divide first so the maximal cell lands on exactly 255
        for v in &mut counts {
            *v = *v / max * MAX_INTENSITY;
        }
    }
    Ok(HeatMap {
        day,
        grid: Tensor::from_op(vec![grid.height, grid.width], counts),
    })
}

/// Truncated Gaussian kernel over offsets `[-r, r]^2`, entries
/// proportional to `exp(-(i^2+j^2)/(2*sigma^2))` and normalized to sum 1.
pub fn make_kernel(spec: &GaussianSpec) -> Result<Tensor> {
    spec.validate()?;
    let r = spec.radius() as isize;
    let side = (2 * r + 1) as usize;
    let denom = 2.0 * spec.sigma * spec.sigma;
    let mut data = Vec::with_capacity(side * side);
    let mut sum = 0.0;
    for i in -r..=r {
        for j in -r..=r {
            let v = (-((i * i + j * j) as f64) / denom).exp();
            data.push(v);
            sum += v;
        }
    }
    for v in &mut data {
        *v /= sum;
    }
    Ok(Tensor::from_op(vec![side, side], data))
}

/// Same-size 2-D convolution of `grid` with `kernel`, zero-padded by the
/// kernel radius on each side. Influence leaking off the map is
/// discarded (no edge renormalization).
pub fn convolve_same(grid: &Tensor, kernel: &Tensor) -> Result<Tensor> {
    if grid.shape().len() != 2 || kernel.shape().len() != 2 {
        return Err(Error::shape(format!(
            "convolve_same expects rank-2 tensors, got {:?} and {:?}",
            grid.shape(),
            kernel.shape()
        )));
    }
    let (h, w) = (grid.shape()[0], grid.shape()[1]);
    let side = kernel.shape()[0];
    if kernel.shape()[1] != side || side % 2 != 1 {
        return Err(Error::shape(format!(
            "kernel must be square with odd side, got {:?}",
            kernel.shape()
        )));
    }
    let r = (side / 2) as isize;
    let gd = grid.data();
    let kd = kernel.data();
    let mut out = vec![0.0_f64; h * w];
    for row in 0..h as isize {
        for col in 0..w as isize {
            let mut acc = 0.0;
            for di in -r..=r {
                let src_row = row + di;
                if src_row < 0 || src_row >= h as isize {
                    continue;
                }
                for dj in -r..=r {
                    let src_col = col + dj;
                    if src_col < 0 || src_col >= w as isize {
                        continue;
                    }
                    acc += gd[(src_row * w as isize + src_col) as usize]
                        * kd[((di + r) * side as isize + (dj + r)) as usize];
                }
            }
            out[(row * w as isize + col) as usize] = acc;
        }
    }
    Ok(Tensor::from_op(vec![h, w], out))
}

/// Smooth a day's heatmap: convolve with the Gaussian kernel, then
/// rescale the maximum back to 255 (an all-zero day stays all-zero).
pub fn smooth(hm: &HeatMap, spec: &GaussianSpec) -> Result<SmoothedHeatMap> {
    let kernel = make_kernel(spec)?;
    let mut grid = convolve_same(&hm.grid, &kernel)?;
    let max = grid.max_value();
    if max > 0.0 {
        // divide first so the maximal cell lands on exactly 255
        for v in grid.data_mut() {
            *v = *v / max * MAX_INTENSITY;
        }
    }
    Ok(SmoothedHeatMap { day: hm.day, grid })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_spec(h: usize, w: usize) -> GridSpec {
        GridSpec {
            height: h,
            width: w,
            bbox: BoundingBox {
                lat_min: 0.0,
                lat_max: 1.0,
                lon_min: 0.0,
                lon_max: 1.0,
            },
        }
    }

    fn rec(lat: f64, lon: f64) -> IncidentRecord {
        IncidentRecord { day: 1, lat, lon }
    }

    #[test]
    fn empty_day_is_all_zero() {
        let hm = rasterize_day(1, &[], &grid_spec(4, 4)).unwrap();
        assert!(hm.grid.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_incident_maps_to_single_255_cell() {
        let hm = rasterize_day(1, &[rec(0.9, 0.1)], &grid_spec(4, 4)).unwrap();
        let nonzero: Vec<f64> = hm.grid.iter().cloned().filter(|&v| v != 0.0).collect();
        assert_eq!(nonzero, vec![255.0]);
    }

    #[test]
    fn two_to_one_counts_rescale_to_255_and_127_5() {
        // two incidents in one cell, one in another
        let records = vec![rec(0.95, 0.05), rec(0.95, 0.05), rec(0.05, 0.95)];
        let hm = rasterize_day(1, &records, &grid_spec(4, 4)).unwrap();
        let mut values: Vec<f64> = hm.grid.iter().cloned().filter(|&v| v != 0.0).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(values, vec![127.5, 255.0]);
    }

    #[test]
    fn max_edge_coordinates_land_in_last_cells() {
        let g = grid_spec(4, 4);
        // north-west corner -> row 0, col 0
        assert_eq!(g.cell(1.0, 0.0), (0, 0));
        // south edge (lat_min) -> last row; east edge (lon_max) -> last col
        assert_eq!(g.cell(0.0, 1.0), (3, 3));
    }

    #[test]
    fn rasterize_is_permutation_invariant() {
        let records = vec![rec(0.2, 0.3), rec(0.8, 0.1), rec(0.2, 0.3), rec(0.5, 0.5)];
        let mut reversed = records.clone();
        reversed.reverse();
        let a = rasterize_day(1, &records, &grid_spec(8, 8)).unwrap();
        let b = rasterize_day(1, &reversed, &grid_spec(8, 8)).unwrap();
        assert_eq!(a.grid.data(), b.grid.data());
    }

    #[test]
    fn kernel_normalized_symmetric_and_concentrated() {
        let k = make_kernel(&GaussianSpec { sigma: 1.5 }).unwrap();
        let sum: f64 = k.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9);
        let side = k.shape()[0];
        assert_eq!(side, 2 * 5 + 1); // ceil(4.5) = 5
        for i in 0..side {
            for j in 0..side {
                let v = k.at2(i, j);
                assert_eq!(v, k.at2(side - 1 - i, j));
                assert_eq!(v, k.at2(i, side - 1 - j));
                assert_eq!(v, k.at2(j, i));
            }
        }

        let tight = make_kernel(&GaussianSpec { sigma: 0.1 }).unwrap();
        let c = tight.shape()[0] / 2;
        assert!(tight.at2(c, c) >= 0.999);
    }

    #[test]
    fn smoothing_zero_stays_zero_and_nonzero_hits_255() {
        let spec = GaussianSpec { sigma: 1.0 };
        let zero = HeatMap {
            day: 3,
            grid: Tensor::zeros(vec![8, 8]),
        };
        let s = smooth(&zero, &spec).unwrap();
        assert!(s.grid.iter().all(|&v| v == 0.0));

        let mut grid = Tensor::zeros(vec![8, 8]);
        grid.data_mut()[4 * 8 + 4] = 255.0;
        let s = smooth(&HeatMap { day: 3, grid }, &spec).unwrap();
        assert_eq!(s.grid.max_value(), 255.0);
        assert_eq!(s.day, 3);
    }

    #[test]
    fn impulse_neighbor_ratio_matches_gaussian() {
        // single impulse, sigma = 1: center / 4-neighbor = e^(1/2)
        let spec = GaussianSpec { sigma: 1.0 };
        let mut grid = Tensor::zeros(vec![16, 16]);
        grid.data_mut()[8 * 16 + 8] = 255.0;
        let s = smooth(&HeatMap { day: 1, grid }, &spec).unwrap();
        let center = s.grid.at2(8, 8);
        assert_eq!(center, 255.0);
        let expected_neighbor = 255.0 * (-0.5_f64).exp();
        for (r, c) in [(7, 8), (9, 8), (8, 7), (8, 9)] {
            assert!((s.grid.at2(r, c) - expected_neighbor).abs() < 1e-9);
        }
    }

    #[test]
    fn kernel_mass_preserved_away_from_edges() {
        let spec = GaussianSpec { sigma: 1.0 };
        let mut grid = Tensor::zeros(vec![16, 16]);
        grid.data_mut()[8 * 16 + 8] = 255.0;
        let kernel = make_kernel(&spec).unwrap();
        let conv = convolve_same(&grid, &kernel).unwrap();
        let mass: f64 = conv.iter().sum();
        assert!((mass - 255.0).abs() <= 1e-9);
    }

    #[test]
    fn convolution_is_linear_before_rescale() {
        use crate::tensor::gradcheck::check_input;
        let kernel = make_kernel(&GaussianSpec { sigma: 1.5 }).unwrap();
        let a = check_input(&[8, 8], 3).map(f64::abs);
        let b = check_input(&[8, 8], 4).map(f64::abs);
        let mut sum = a.clone();
        for (s, &v) in sum.data_mut().iter_mut().zip(b.data()) {
            *s += v;
        }
        let ca = convolve_same(&a, &kernel).unwrap();
        let cb = convolve_same(&b, &kernel).unwrap();
        let csum = convolve_same(&sum, &kernel).unwrap();
        for i in 0..csum.len() {
            assert!((csum.data()[i] - (ca.data()[i] + cb.data()[i])).abs() <= 1e-9);
        }
    }

    #[test]
    fn odd_grid_extents_rejected() {
        let mut g = grid_spec(5, 4);
        assert!(rasterize_day(1, &[], &g).is_err());
        g = grid_spec(4, 6);
        g.bbox.lat_max = g.bbox.lat_min;
        assert!(rasterize_day(1, &[], &g).is_err());
    }
}
