//! Fourier mapping of normalized pixel coordinates, feature products, mask
//! synthesis and their analytic gradients.
//!
//! A coordinate pair `x = (x_i, x_j)` in `[0,1)^2` is mapped through every
//! lattice entry `(u, v)` to `cos(2 pi (u x_i + v x_j))` and
//! `sin(2 pi (u x_i + v x_j))`, cosines first, columns in lattice canonical
//! order. Multiplying the mapping elementwise by a coefficient vector and
//! summing each row through a sigmoid yields the mask value at that
//! coordinate.
//!
//! All arithmetic is 64-bit; per-row accumulation always runs in canonical
//! column order, so results are reproducible bit-for-bit no matter how
//! callers parallelize over rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::FrequencyLattice;

/// Hard cap on grid points, guarding `make_grid` against runaway scales.
pub const MAX_GRID_POINTS: u64 = 1 << 26;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Logistic sigmoid clamped into the open interval (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let y = 1.0 / (1.0 + (-z).exp());
    // exp saturates for |z| beyond ~37/-745; keep outputs strictly inside (0,1).
    y.clamp(f64::MIN_POSITIVE, 1.0_f64.next_down())
}

// ---------------------------------------------------------------------------
// Coordinate grids
// ---------------------------------------------------------------------------

/// Normalized sample coordinates of an `h x w` raster at scaling factor `s`.
///
/// The grid covers `[0,1)^2` with `h * 2^(s-1)` rows and `w * 2^(s-1)`
/// columns; the sample at scaled index `(i, j)` sits at `(i / rows, j / cols)`
/// in row-major order. At `s = 1` these are exactly the DFT sample points of
/// the raster, which makes the FFT encoder an orthogonal projection.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateGrid {
    base_h: usize,
    base_w: usize,
    scale: u32,
    coords: Vec<(f64, f64)>,
}

impl CoordinateGrid {
    /// Rows of the scaled grid, `h * 2^(s-1)`.
    pub fn rows(&self) -> usize {
        self.base_h << (self.scale - 1)
    }

    /// Columns of the scaled grid, `w * 2^(s-1)`.
    pub fn cols(&self) -> usize {
        self.base_w << (self.scale - 1)
    }

    /// Total sample count `p`.
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Pixel step `1 / 2^(s-1)` in units of the base raster.
    pub fn step(&self) -> f64 {
        1.0 / (1u64 << (self.scale - 1)) as f64
    }

    /// Sample coordinates in row-major order.
    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    pub fn base_dims(&self) -> (usize, usize) {
        (self.base_h, self.base_w)
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }
}

/// Build the scale-`s` sample grid of an `h x w` raster.
///
/// Rejects grids above [`MAX_GRID_POINTS`] samples.
pub fn make_grid(h: usize, w: usize, s: u32) -> Result<CoordinateGrid> {
    if h == 0 || w == 0 {
        return Err(Error::InvalidDimension(format!("grid dims must be positive, got {h}x{w}")));
    }
    if s == 0 {
        return Err(Error::InvalidDimension("scaling factor s must be >= 1".into()));
    }
    let factor = 1u128
        .checked_shl(s - 1)
        .ok_or_else(|| Error::InvalidDimension(format!("scaling factor s={s} out of range")))?;
    let total = (h as u128) * (w as u128) * factor * factor;
    if total > MAX_GRID_POINTS as u128 {
        return Err(Error::GridTooLarge { requested: total, limit: MAX_GRID_POINTS });
    }

    let rows = h << (s - 1);
    let cols = w << (s - 1);
    let mut coords = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let x_i = i as f64 / rows as f64;
        for j in 0..cols {
            let x_j = j as f64 / cols as f64;
            coords.push((x_i, x_j));
        }
    }
    Ok(CoordinateGrid { base_h: h, base_w: w, scale: s, coords })
}

// ---------------------------------------------------------------------------
// Coefficient fields
// ---------------------------------------------------------------------------

/// Whether one coefficient vector serves the whole raster or each pixel owns
/// its own slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldMode {
    #[serde(rename = "global")]
    Global,
    #[serde(rename = "per-pixel")]
    PerPixel,
}

/// Cosine/sine amplitudes for a frequency lattice.
///
/// The coefficient axis always has length `2c`: the first `c` entries are
/// cosine amplitudes and the next `c` sine amplitudes, both in lattice
/// canonical order. Global fields hold one such vector; per-pixel fields hold
/// one per pixel, row-major (`h`, `w` are zero in serialized global fields).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    mode: FieldMode,
    f: u32,
    h: usize,
    w: usize,
    values: Vec<f64>,
}

impl CoefficientField {
    pub fn global(f: u32, values: Vec<f64>) -> Result<Self> {
        let expected = 2 * crate::lattice::coefficient_count(f);
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "global field for f={f} needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(CoefficientField { mode: FieldMode::Global, f, h: 0, w: 0, values })
    }

    pub fn per_pixel(f: u32, h: usize, w: usize, values: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::InvalidDimension(format!(
                "per-pixel field dims must be positive, got {h}x{w}"
            )));
        }
        let expected = h * w * 2 * crate::lattice::coefficient_count(f);
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "per-pixel field {h}x{w} for f={f} needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(CoefficientField { mode: FieldMode::PerPixel, f, h, w, values })
    }

    /// Broadcast a global vector into an equivalent per-pixel field.
    pub fn broadcast(&self, h: usize, w: usize) -> Result<Self> {
        match self.mode {
            FieldMode::PerPixel => Err(Error::InvalidConfig(
                "broadcast expects a global field".into(),
            )),
            FieldMode::Global => {
                let mut values = Vec::with_capacity(h * w * self.values.len());
                for _ in 0..h * w {
                    values.extend_from_slice(&self.values);
                }
                CoefficientField::per_pixel(self.f, h, w, values)
            }
        }
    }

    pub fn mode(&self) -> FieldMode {
        self.mode
    }

    pub fn max_frequency(&self) -> u32 {
        self.f
    }

    /// Spatial dims of a per-pixel field; `None` for global fields.
    pub fn dims(&self) -> Option<(usize, usize)> {
        match self.mode {
            FieldMode::Global => None,
            FieldMode::PerPixel => Some((self.h, self.w)),
        }
    }

    /// Length of the coefficient axis, `2c`.
    pub fn coeff_len(&self) -> usize {
        2 * crate::lattice::coefficient_count(self.f)
    }

    /// Coefficient slice for one pixel (any index works for global fields).
    pub fn slice(&self, pixel: usize) -> &[f64] {
        match self.mode {
            FieldMode::Global => &self.values,
            FieldMode::PerPixel => {
                let n = self.coeff_len();
                &self.values[pixel * n..(pixel + 1) * n]
            }
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Validate shape invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        let per = 2 * crate::lattice::coefficient_count(self.f);
        let expected = match self.mode {
            FieldMode::Global => per,
            FieldMode::PerPixel => {
                if self.h == 0 || self.w == 0 {
                    return Err(Error::InvalidDimension(
                        "per-pixel field has zero spatial dims".into(),
                    ));
                }
                self.h * self.w * per
            }
        };
        if self.values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "field claims f={} ({} values per pixel) but holds {} values",
                self.f,
                per,
                self.values.len()
            )));
        }
        if let Some(bad) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite coefficient at index {bad}")));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Mask rasters
// ---------------------------------------------------------------------------

/// An `h x w` grid of soft mask values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRaster {
    h: usize,
    w: usize,
    values: Vec<f64>,
    threshold: f64,
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

impl MaskRaster {
    pub fn new(h: usize, w: usize, values: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::InvalidDimension(format!(
                "raster dims must be positive, got {h}x{w}"
            )));
        }
        if values.len() != h * w {
            return Err(Error::ShapeMismatch(format!(
                "raster {h}x{w} needs {} values, got {}",
                h * w,
                values.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig(format!(
                "raster value {} at index {idx} outside [0,1]",
                values[idx]
            )));
        }
        Ok(MaskRaster { h, w, values, threshold: DEFAULT_THRESHOLD })
    }

    pub fn constant(h: usize, w: usize, value: f64) -> Result<Self> {
        MaskRaster::new(h, w, vec![value; h * w])
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.w + j]
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(0.0 < threshold && threshold < 1.0) {
            return Err(Error::InvalidConfig(format!("threshold {threshold} outside (0,1)")));
        }
        self.threshold = threshold;
        Ok(self)
    }

    /// Hard 0/1 mask: values at or above the threshold become foreground.
    pub fn binarize(&self) -> MaskRaster {
        let values =
            self.values.iter().map(|&v| if v >= self.threshold { 1.0 } else { 0.0 }).collect();
        MaskRaster { h: self.h, w: self.w, values, threshold: self.threshold }
    }

    /// True when every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

// ---------------------------------------------------------------------------
// Fourier mapping
// ---------------------------------------------------------------------------

/// Dense `p x 2c` matrix of mapped coordinates, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MappingMatrix {
    /// Wrap a row-major buffer as a `rows x cols` matrix.
    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(MappingMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Map a single coordinate through every lattice entry.
///
/// Output layout matches [`fourier_mapping`] rows: c cosine values then c
/// sine values, lattice canonical order.
pub fn mapping_row(coord: (f64, f64), lattice: &FrequencyLattice) -> Vec<f64> {
    let c = lattice.len();
    let mut row = vec![0.0; 2 * c];
    for (k, &(u, v)) in lattice.entries().iter().enumerate() {
        let angle = TWO_PI * (u as f64 * coord.0 + v as f64 * coord.1);
        row[k] = angle.cos();
        row[c + k] = angle.sin();
    }
    row
}

/// Map every grid sample through every lattice entry.
///
/// Separable angles are combined from per-axis tables
/// (`cos(a+b) = cos a cos b - sin a sin b`), which costs two multiplies per
/// entry instead of a sincos.
pub fn fourier_mapping(grid: &CoordinateGrid, lattice: &FrequencyLattice) -> MappingMatrix {
    let c = lattice.len();
    let cols = 2 * c;
    let rows_n = grid.rows();
    let cols_n = grid.cols();
    let f = lattice.max_frequency() as i32;

    // Per-axis tables over the distinct row/column coordinates.
    let row_coord = |i: usize| i as f64 / rows_n as f64;
    let col_coord = |j: usize| j as f64 / cols_n as f64;
    let mut row_cos = vec![0.0; (f as usize + 1) * rows_n];
    let mut row_sin = vec![0.0; (f as usize + 1) * rows_n];
    for u in 0..=f as usize {
        for i in 0..rows_n {
            let a = TWO_PI * (u as f64 * row_coord(i));
            row_cos[u * rows_n + i] = a.cos();
            row_sin[u * rows_n + i] = a.sin();
        }
    }
    let span = 2 * f as usize + 1;
    let mut col_cos = vec![0.0; span * cols_n];
    let mut col_sin = vec![0.0; span * cols_n];
    for (vi, v) in (-f..=f).enumerate() {
        for j in 0..cols_n {
            let b = TWO_PI * (v as f64 * col_coord(j));
            col_cos[vi * cols_n + j] = b.cos();
            col_sin[vi * cols_n + j] = b.sin();
        }
    }

    let mut data = vec![0.0; grid.len() * cols];
    for i in 0..rows_n {
        for j in 0..cols_n {
            let r = i * cols_n + j;
            let out = &mut data[r * cols..(r + 1) * cols];
            for (k, &(u, v)) in lattice.entries().iter().enumerate() {
                let ui = u as usize;
                let vi = (v + f) as usize;
                let (ca, sa) = (row_cos[ui * rows_n + i], row_sin[ui * rows_n + i]);
                let (cb, sb) = (col_cos[vi * cols_n + j], col_sin[vi * cols_n + j]);
                out[k] = ca * cb - sa * sb;
                out[c + k] = sa * cb + ca * sb;
            }
        }
    }
    MappingMatrix { rows: grid.len(), cols, data }
}

// ---------------------------------------------------------------------------
// Features and synthesis
// ---------------------------------------------------------------------------

/// Elementwise product of the mapping with the coefficient field.
///
/// Global fields broadcast their single vector across every row; per-pixel
/// fields must flatten to exactly `p` slices.
pub fn fourier_features(mapping: &MappingMatrix, field: &CoefficientField) -> Result<MappingMatrix> {
    check_field_against_rows(field, mapping.rows, mapping.cols)?;
    let mut data = vec![0.0; mapping.data.len()];
    for r in 0..mapping.rows {
        let coeffs = field.slice(r);
        let src = mapping.row(r);
        let dst = &mut data[r * mapping.cols..(r + 1) * mapping.cols];
        for k in 0..mapping.cols {
            dst[k] = src[k] * coeffs[k];
        }
    }
    Ok(MappingMatrix { rows: mapping.rows, cols: mapping.cols, data })
}

fn check_field_against_rows(field: &CoefficientField, p: usize, cols: usize) -> Result<()> {
    if field.coeff_len() != cols {
        return Err(Error::ShapeMismatch(format!(
            "field has {} coefficients per pixel, mapping has {cols} columns",
            field.coeff_len()
        )));
    }
    if let Some((h, w)) = field.dims() {
        if h * w != p {
            return Err(Error::ShapeMismatch(format!(
                "per-pixel field covers {h}x{w}={} pixels, mapping has {p} rows",
                h * w
            )));
        }
    }
    Ok(())
}

/// Pre-sigmoid row sums, accumulated in canonical column order.
pub fn presigmoid_sums(features: &MappingMatrix) -> Vec<f64> {
    (0..features.rows)
        .map(|r| {
            let mut acc = 0.0;
            for &v in features.row(r) {
                acc += v;
            }
            acc
        })
        .collect()
}

/// Sum each feature row and squash through the sigmoid into a raster.
pub fn synthesize_mask(features: &MappingMatrix, h_out: usize, w_out: usize) -> Result<MaskRaster> {
    if features.rows != h_out * w_out {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows cannot fill a {h_out}x{w_out} raster",
            features.rows
        )));
    }
    let values: Vec<f64> = presigmoid_sums(features).into_iter().map(sigmoid).collect();
    MaskRaster::new(h_out, w_out, values)
}

/// Fused mapping + features + synthesis for one coordinate of a global field.
pub fn evaluate_global_at(
    coord: (f64, f64),
    lattice: &FrequencyLattice,
    coeffs: &[f64],
) -> f64 {
    let row = mapping_row(coord, lattice);
    let mut acc = 0.0;
    for (m, w) in row.iter().zip(coeffs) {
        acc += m * w;
    }
    sigmoid(acc)
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

/// Analytic `dL/dW` given per-pixel upstream `dL/dy`.
///
/// Per-pixel fields route each pixel's gradient into its own slice; global
/// fields sum over pixels in row order.
pub fn synthesis_gradient(
    grid: &CoordinateGrid,
    lattice: &FrequencyLattice,
    field: &CoefficientField,
    upstream: &[f64],
) -> Result<CoefficientField> {
    let mapping = fourier_mapping(grid, lattice);
    synthesis_gradient_from_mapping(&mapping, field, upstream)
}

/// [`synthesis_gradient`] against a precomputed mapping.
pub fn synthesis_gradient_from_mapping(
    mapping: &MappingMatrix,
    field: &CoefficientField,
    upstream: &[f64],
) -> Result<CoefficientField> {
    check_field_against_rows(field, mapping.rows, mapping.cols)?;
    if upstream.len() != mapping.rows {
        return Err(Error::ShapeMismatch(format!(
            "upstream has {} entries, mapping has {} rows",
            upstream.len(),
            mapping.rows
        )));
    }

    let cols = mapping.cols;
    let mut grad = vec![0.0; field.values().len()];
    for r in 0..mapping.rows {
        let coeffs = field.slice(r);
        let src = mapping.row(r);
        let mut z = 0.0;
        for k in 0..cols {
            z += src[k] * coeffs[k];
        }
        let y = sigmoid(z);
        let dz = upstream[r] * y * (1.0 - y);
        let dst = match field.mode {
            FieldMode::Global => &mut grad[..],
            FieldMode::PerPixel => &mut grad[r * cols..(r + 1) * cols],
        };
        for k in 0..cols {
            dst[k] += dz * src[k];
        }
    }

    match field.mode {
        FieldMode::Global => CoefficientField::global(field.f, grad),
        FieldMode::PerPixel => CoefficientField::per_pixel(field.f, field.h, field.w, grad),
    }
}
