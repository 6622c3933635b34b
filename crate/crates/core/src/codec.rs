//! FFT encoding of binary masks into coefficient vectors, band truncation,
//! reconstruction, and dataset spectrum analysis.
//!
//! The encoder projects the logit target `t = alpha * (2 m - 1)` onto the
//! lattice basis over the raster's own sample grid. Because the grid
//! coordinates are the DFT sample points and every lattice frequency stays
//! below Nyquist, the basis is orthogonal there and the projection falls out
//! of a single 2D FFT: each retained bin contributes one cosine and one sine
//! amplitude, and the reconstruction through the sigmoid re-saturates toward
//! the original 0/1 values.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{
    fourier_features, fourier_mapping, make_grid, presigmoid_sums, synthesize_mask,
    CoefficientField, FieldMode, MaskRaster,
};
use crate::lattice::{coefficient_count, FrequencyLattice};

/// Default pre-sigmoid amplitude applied to the 0/1 mask before projection.
pub const DEFAULT_ALPHA: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    /// Maximum harmonic frequency; must stay below `min(h, w) / 2`.
    pub f: u32,
    /// Logit scale: the projected target is `alpha * (2 mask - 1)`.
    pub alpha: f64,
}

impl EncoderConfig {
    pub fn new(f: u32) -> Self {
        EncoderConfig { f, alpha: DEFAULT_ALPHA }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    fn validate(&self, h: usize, w: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        check_nyquist(self.f, h, w)
    }
}

/// Nyquist guard: `f < min(h, w) / 2`, so no lattice bin is self-conjugate
/// and every sine basis function survives on the grid.
pub fn check_nyquist(f: u32, h: usize, w: usize) -> Result<()> {
    let min = h.min(w);
    if 2 * f as usize >= min {
        return Err(Error::NyquistViolation { f, h, w, limit: min as f64 / 2.0 });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

/// Project a binary mask onto the lattice basis, returning a global field.
///
/// The output is the L2-optimal approximation of the logit target over the
/// raster grid; the sine amplitude of the DC entry is exactly zero.
pub fn encode_mask(mask: &MaskRaster, config: &EncoderConfig) -> Result<CoefficientField> {
    let (h, w) = (mask.height(), mask.width());
    config.validate(h, w)?;
    if let Some(idx) = mask.values().iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinaryMask { index: idx, value: mask.values()[idx] });
    }

    let mut buffer: Vec<Complex64> = mask
        .values()
        .iter()
        .map(|&m| Complex64::new(config.alpha * (2.0 * m - 1.0), 0.0))
        .collect();
    fft2d_forward(&mut buffer, h, w);

    let lattice = FrequencyLattice::build(config.f);
    let c = lattice.len();
    let norm = 1.0 / (h as f64 * w as f64);
    let mut values = vec![0.0; 2 * c];
    for (k, &(u, v)) in lattice.entries().iter().enumerate() {
        let row = u as usize; // 0 <= u <= f < h/2
        let col = v.rem_euclid(w as i32) as usize;
        let bin = buffer[row * w + col];
        if (u, v) == (0, 0) {
            values[k] = bin.re * norm;
            values[c + k] = 0.0;
        } else {
            // The conjugate bin is excluded from the lattice, so each retained
            // bin carries twice its spectral weight.
            values[k] = 2.0 * bin.re * norm;
            values[c + k] = -2.0 * bin.im * norm;
        }
    }
    CoefficientField::global(config.f, values)
}

/// Row-column 2D forward DFT; `data` is row-major `h x w` and stays so.
fn fft2d_forward(data: &mut [Complex64], h: usize, w: usize) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(w);
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }

    let col_fft = planner.plan_fft_forward(h);
    let mut transposed = vec![Complex64::default(); data.len()];
    for i in 0..h {
        for j in 0..w {
            transposed[j * h + i] = data[i * w + j];
        }
    }
    for col in transposed.chunks_exact_mut(h) {
        col_fft.process(col);
    }
    for i in 0..h {
        for j in 0..w {
            data[i * w + j] = transposed[j * h + i];
        }
    }
}

// ---------------------------------------------------------------------------
// Truncation and reconstruction
// ---------------------------------------------------------------------------

/// Keep only amplitudes whose entry band `max(|u|, |v|)` is at most
/// `f_target`, re-indexing the field to the smaller lattice.
pub fn truncate(field: &CoefficientField, f_target: u32) -> Result<CoefficientField> {
    let f_src = field.max_frequency();
    if f_target > f_src {
        return Err(Error::TruncationAboveSource { target: f_target, from: f_src });
    }
    if f_target == f_src {
        return Ok(field.clone());
    }

    let src_c = coefficient_count(f_src);
    let dst = FrequencyLattice::build(f_target);
    let dst_c = dst.len();
    // Canonical index of (u, v) in the source lattice.
    let src_index = |u: i32, v: i32| -> usize {
        let fi = f_src as i32;
        if u == 0 {
            v as usize
        } else {
            (fi + 1 + (u - 1) * (2 * fi + 1) + (v + fi)) as usize
        }
    };

    let pixels = match field.mode() {
        FieldMode::Global => 1,
        FieldMode::PerPixel => {
            let (h, w) = field.dims().expect("per-pixel field has dims");
            h * w
        }
    };
    let mut values = Vec::with_capacity(pixels * 2 * dst_c);
    for pixel in 0..pixels {
        let slice = field.slice(pixel);
        for &(u, v) in dst.entries() {
            values.push(slice[src_index(u, v)]);
        }
        for &(u, v) in dst.entries() {
            values.push(slice[src_c + src_index(u, v)]);
        }
    }
    match field.mode() {
        FieldMode::Global => CoefficientField::global(f_target, values),
        FieldMode::PerPixel => {
            let (h, w) = field.dims().expect("per-pixel field has dims");
            CoefficientField::per_pixel(f_target, h, w, values)
        }
    }
}

/// Evaluate a coefficient field on the scale-`s` grid of an `h x w` raster.
pub fn reconstruct(field: &CoefficientField, h: usize, w: usize, s: u32) -> Result<MaskRaster> {
    let grid = make_grid(h, w, s)?;
    let lattice = FrequencyLattice::build(field.max_frequency());
    let mapping = fourier_mapping(&grid, &lattice);
    let features = fourier_features(&mapping, field)?;
    synthesize_mask(&features, grid.rows(), grid.cols())
}

/// Pre-sigmoid reconstruction values on the scale-1 grid, for logit-space
/// error analysis.
pub fn reconstruct_logits(field: &CoefficientField, h: usize, w: usize) -> Result<Vec<f64>> {
    let grid = make_grid(h, w, 1)?;
    let lattice = FrequencyLattice::build(field.max_frequency());
    let mapping = fourier_mapping(&grid, &lattice);
    let features = fourier_features(&mapping, field)?;
    Ok(presigmoid_sums(&features))
}

// ---------------------------------------------------------------------------
// Spectrum analysis
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub f: u32,
    pub mean_loss: f64,
    pub n_masks: usize,
}

/// Mean reconstruction IoU loss per retained maximum frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub rows: Vec<SpectrumRow>,
}

impl SpectrumReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("f,mean_loss,n_masks\n");
        for row in &self.rows {
            out.push_str(&format!("{},{},{}\n", row.f, row.mean_loss, row.n_masks));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Per-mask IoU losses after truncating to each `f'` in `0..=f_max`.
///
/// Encodes once at `f_max`, then truncates, reconstructs and scores each
/// band. This is the unit of work behind [`spectrum_analysis`].
pub fn band_losses(mask: &MaskRaster, f_max: u32, alpha: f64) -> Result<Vec<f64>> {
    let config = EncoderConfig::new(f_max).with_alpha(alpha);
    let full = encode_mask(mask, &config)?;
    let mut losses = Vec::with_capacity(f_max as usize + 1);
    for f_sub in 0..=f_max {
        let truncated = truncate(&full, f_sub)?;
        let recon = reconstruct(&truncated, mask.height(), mask.width(), 1)?;
        losses.push(crate::metrics::iou_loss(&recon, mask)?);
    }
    Ok(losses)
}

/// Run the spectrum analysis over named masks.
///
/// Masks are processed in ascending lexicographic name order and the mean is
/// accumulated sequentially in that order, so the report is bit-identical no
/// matter how many worker threads run the per-mask encodes (`threads = 0`
/// uses the machine's parallelism).
pub fn spectrum_analysis(
    masks: &[(String, MaskRaster)],
    f_max: u32,
    alpha: f64,
    threads: usize,
) -> Result<SpectrumReport> {
    if masks.is_empty() {
        return Err(Error::EmptyDataset("no masks given".into()));
    }
    let mut order: Vec<usize> = (0..masks.len()).collect();
    order.sort_by(|&a, &b| masks[a].0.as_bytes().cmp(masks[b].0.as_bytes()));

    let threads = if threads == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        threads
    };

    let per_mask: Vec<Result<Vec<f64>>> = if threads <= 1 || masks.len() <= 1 {
        order.iter().map(|&idx| band_losses(&masks[idx].1, f_max, alpha)).collect()
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots: Vec<std::sync::Mutex<Option<Result<Vec<f64>>>>> =
            (0..order.len()).map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..threads.min(order.len()) {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if k >= order.len() {
                        break;
                    }
                    let result = band_losses(&masks[order[k]].1, f_max, alpha);
                    *slots[k].lock().expect("no poisoned locks") = Some(result);
                });
            }
        });
        slots
            .into_iter()
            .map(|slot| slot.into_inner().expect("no poisoned locks").expect("every slot filled"))
            .collect()
    };

    // Reduce in dataset order regardless of completion order.
    let mut sums = vec![0.0; f_max as usize + 1];
    for (k, result) in per_mask.into_iter().enumerate() {
        let losses = result.map_err(|e| Error::context(masks[order[k]].0.clone(), e))?;
        for (acc, loss) in sums.iter_mut().zip(&losses) {
            *acc += loss;
        }
    }
    let n = masks.len();
    let rows = sums
        .into_iter()
        .enumerate()
        .map(|(f, sum)| SpectrumRow { f: f as u32, mean_loss: sum / n as f64, n_masks: n })
        .collect();
    Ok(SpectrumReport { rows })
}

/// [`spectrum_analysis`] over every recognized mask file under `dir`.
pub fn spectrum_analysis_dataset(
    dir: &std::path::Path,
    f_max: u32,
    alpha: f64,
    threads: usize,
) -> Result<SpectrumReport> {
    let files = crate::maskio::iter_dataset(dir)?;
    if files.is_empty() {
        return Err(Error::EmptyDataset(dir.display().to_string()));
    }
    let mut masks = Vec::with_capacity(files.len());
    for file in files {
        let raster = crate::maskio::load_mask(&file.path)?;
        masks.push((file.relative, raster));
    }
    spectrum_analysis(&masks, f_max, alpha, threads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{mapping_row, sigmoid};
    use crate::metrics::soft_iou;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn binary_raster(h: usize, w: usize, values: Vec<f64>) -> MaskRaster {
        MaskRaster::new(h, w, values).unwrap()
    }

    fn random_binary(rng: &mut ChaCha8Rng, h: usize, w: usize) -> MaskRaster {
        binary_raster(h, w, (0..h * w).map(|_| f64::from(rng.gen_bool(0.5))).collect())
    }

    fn disk_mask(h: usize, w: usize, radius: f64) -> MaskRaster {
        let (ci, cj) = (h as f64 / 2.0, w as f64 / 2.0);
        let values = (0..h * w)
            .map(|idx| {
                let (i, j) = ((idx / w) as f64, (idx % w) as f64);
                f64::from((i - ci).hypot(j - cj) < radius)
            })
            .collect();
        binary_raster(h, w, values)
    }

    /// Least-squares oracle: solve the normal equations of the full basis
    /// matrix against the logit target, with the identically-zero DC sine
    /// column pinned to zero.
    fn least_squares_oracle(mask: &MaskRaster, f: u32, alpha: f64) -> Vec<f64> {
        let (h, w) = (mask.height(), mask.width());
        let lattice = FrequencyLattice::build(f);
        let c = lattice.len();
        let n = 2 * c;
        let target: Vec<f64> =
            mask.values().iter().map(|&m| alpha * (2.0 * m - 1.0)).collect();

        // Basis rows straight from the single-coordinate mapping.
        let mut basis = Vec::with_capacity(h * w);
        for i in 0..h {
            for j in 0..w {
                basis.push(mapping_row((i as f64 / h as f64, j as f64 / w as f64), &lattice));
            }
        }

        // Active columns exclude the DC sine (identically zero on any grid).
        let active: Vec<usize> = (0..n).filter(|&k| k != c).collect();
        let m = active.len();
        let mut normal = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for row_idx in 0..h * w {
            let row = &basis[row_idx];
            for (a, &ka) in active.iter().enumerate() {
                rhs[a] += row[ka] * target[row_idx];
                for (b, &kb) in active.iter().enumerate() {
                    normal[a * m + b] += row[ka] * row[kb];
                }
            }
        }

        // Gaussian elimination with partial pivoting.
        for col in 0..m {
            let pivot = (col..m)
                .max_by(|&a, &b| {
                    normal[a * m + col].abs().partial_cmp(&normal[b * m + col].abs()).unwrap()
                })
                .unwrap();
            if pivot != col {
                for k in 0..m {
                    normal.swap(col * m + k, pivot * m + k);
                }
                rhs.swap(col, pivot);
            }
            let diag = normal[col * m + col];
            assert!(diag.abs() > 1e-9, "near-singular normal matrix");
            for row in col + 1..m {
                let factor = normal[row * m + col] / diag;
                for k in col..m {
                    normal[row * m + k] -= factor * normal[col * m + k];
                }
                rhs[row] -= factor * rhs[col];
            }
        }
        let mut solution = vec![0.0; m];
        for row in (0..m).rev() {
            let mut acc = rhs[row];
            for k in row + 1..m {
                acc -= normal[row * m + k] * solution[k];
            }
            solution[row] = acc / normal[row * m + row];
        }

        let mut full = vec![0.0; n];
        for (a, &k) in active.iter().enumerate() {
            full[k] = solution[a];
        }
        full
    }

    #[test]
    fn all_ones_dc_amplitude_is_alpha() {
        let mask = MaskRaster::constant(8, 8, 1.0).unwrap();
        let field = encode_mask(&mask, &EncoderConfig::new(0)).unwrap();
        assert!((field.values()[0] - 8.0).abs() < 1e-12);
        assert_eq!(field.values()[1], 0.0);
        let recon = reconstruct(&field, 8, 8, 1).unwrap();
        for &v in recon.values() {
            assert!((v - sigmoid(8.0)).abs() < 1e-12);
            assert!((v - 0.99966).abs() < 1e-4);
        }
    }

    #[test]
    fn all_zeros_dc_amplitude_is_minus_alpha() {
        let mask = MaskRaster::constant(8, 8, 0.0).unwrap();
        let field = encode_mask(&mask, &EncoderConfig::new(0)).unwrap();
        assert!((field.values()[0] + 8.0).abs() < 1e-12);
    }

    #[test]
    fn encoder_matches_least_squares_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..6 {
            let h = rng.gen_range(4..=16);
            let w = rng.gen_range(4..=16);
            let f_limit = ((h.min(w) as u32).saturating_sub(1)) / 2;
            let f = rng.gen_range(0..=f_limit.min(5));
            let mask = random_binary(&mut rng, h, w);
            let field = encode_mask(&mask, &EncoderConfig::new(f)).unwrap();
            let oracle = least_squares_oracle(&mask, f, DEFAULT_ALPHA);
            let max_diff = field
                .values()
                .iter()
                .zip(&oracle)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(max_diff < 1e-9, "trial {trial} ({h}x{w}, f={f}): max diff {max_diff}");
        }
    }

    #[test]
    fn encoder_rejects_bad_inputs() {
        let soft = MaskRaster::constant(8, 8, 0.5).unwrap();
        assert!(matches!(
            encode_mask(&soft, &EncoderConfig::new(1)),
            Err(Error::NonBinaryMask { .. })
        ));

        let mask = MaskRaster::constant(8, 8, 1.0).unwrap();
        assert!(matches!(
            encode_mask(&mask, &EncoderConfig::new(4)),
            Err(Error::NyquistViolation { .. })
        ));
        // 1x1 masks only admit f = 0.
        let tiny = MaskRaster::constant(1, 1, 1.0).unwrap();
        assert!(encode_mask(&tiny, &EncoderConfig::new(0)).is_ok());
        assert!(matches!(
            encode_mask(&tiny, &EncoderConfig::new(1)),
            Err(Error::NyquistViolation { .. })
        ));
    }

    #[test]
    fn encoding_scales_exactly_with_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mask = random_binary(&mut rng, 8, 8);
        let full = encode_mask(&mask, &EncoderConfig::new(3).with_alpha(8.0)).unwrap();
        let half = encode_mask(&mask, &EncoderConfig::new(3).with_alpha(4.0)).unwrap();
        for (a, b) in full.values().iter().zip(half.values()) {
            assert_eq!(*a, 2.0 * b); // power-of-two scaling is exact
        }
    }

    #[test]
    fn truncate_to_own_frequency_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mask = random_binary(&mut rng, 12, 12);
        let field = encode_mask(&mask, &EncoderConfig::new(4)).unwrap();
        assert_eq!(truncate(&field, 4).unwrap(), field);
    }

    #[test]
    fn truncate_to_zero_keeps_only_dc() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mask = random_binary(&mut rng, 12, 12);
        let field = encode_mask(&mask, &EncoderConfig::new(4)).unwrap();
        let dc = truncate(&field, 0).unwrap();
        assert_eq!(dc.values().len(), 2);
        assert_eq!(dc.values()[0], field.values()[0]);
        assert_eq!(dc.values()[1], 0.0);
    }

    #[test]
    fn truncate_band_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mask = random_binary(&mut rng, 16, 16);
        let field = encode_mask(&mask, &EncoderConfig::new(3)).unwrap();
        let cut = truncate(&field, 2).unwrap();
        assert_eq!(cut.values().len(), 2 * coefficient_count(2));
        assert_eq!(coefficient_count(2), 13);

        // Retained amplitudes match the source entries of band <= 2.
        let src = FrequencyLattice::build(3);
        let dst = FrequencyLattice::build(2);
        let src_c = src.len();
        for (k, &entry) in dst.entries().iter().enumerate() {
            let src_k = src.entries().iter().position(|&e| e == entry).unwrap();
            assert_eq!(cut.values()[k], field.values()[src_k]);
            assert_eq!(cut.values()[dst.len() + k], field.values()[src_c + src_k]);
        }
    }

    #[test]
    fn truncating_a_wide_projection_is_the_narrow_projection() {
        // Orthogonality on the grid: dropping bands from the f=12 projection
        // must land exactly on the f=4 projection.
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let mask = random_binary(&mut rng, 32, 32);
        let wide = encode_mask(&mask, &EncoderConfig::new(12)).unwrap();
        let narrow = encode_mask(&mask, &EncoderConfig::new(4)).unwrap();
        let cut = truncate(&wide, 4).unwrap();
        for (a, b) in cut.values().iter().zip(narrow.values()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn truncate_above_source_is_rejected() {
        let mask = MaskRaster::constant(8, 8, 1.0).unwrap();
        let field = encode_mask(&mask, &EncoderConfig::new(2)).unwrap();
        assert!(matches!(
            truncate(&field, 3),
            Err(Error::TruncationAboveSource { target: 3, from: 2 })
        ));
    }

    #[test]
    fn saturated_roundtrip_on_constant_mask() {
        let mask = MaskRaster::constant(8, 8, 1.0).unwrap();
        let field = encode_mask(&mask, &EncoderConfig::new(0)).unwrap();
        let recon = reconstruct(&field, 8, 8, 1).unwrap().binarize();
        assert_eq!(recon.values(), mask.values());
    }

    #[test]
    fn disk_reconstruction_quality_rises_with_frequency() {
        let disk = disk_mask(64, 64, 20.0);
        let fine = encode_mask(&disk, &EncoderConfig::new(25)).unwrap();
        let fine_iou =
            soft_iou(&reconstruct(&fine, 64, 64, 1).unwrap().binarize(), &disk).unwrap();
        assert!(fine_iou >= 0.95, "f=25 IoU {fine_iou}");

        let coarse = truncate(&fine, 2).unwrap();
        let coarse_iou =
            soft_iou(&reconstruct(&coarse, 64, 64, 1).unwrap().binarize(), &disk).unwrap();
        assert!(coarse_iou < fine_iou, "f=2 IoU {coarse_iou} vs f=25 IoU {fine_iou}");
    }

    #[test]
    fn logit_error_shrinks_as_bands_are_added() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mask = random_binary(&mut rng, 16, 16);
        let full = encode_mask(&mask, &EncoderConfig::new(7)).unwrap();
        let target: Vec<f64> = mask.values().iter().map(|&m| 8.0 * (2.0 * m - 1.0)).collect();
        let mut previous = f64::INFINITY;
        for f_sub in 0..=7 {
            let logits = reconstruct_logits(&truncate(&full, f_sub).unwrap(), 16, 16).unwrap();
            let err: f64 =
                logits.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(err <= previous + 1e-12, "f'={f_sub}: {err} > {previous}");
            previous = err;
        }
    }

    #[test]
    fn near_nyquist_roundtrip_disagrees_below_one_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..3 {
            let mask = random_binary(&mut rng, 16, 16);
            let field = encode_mask(&mask, &EncoderConfig::new(7)).unwrap();
            let recon = reconstruct(&field, 16, 16, 1).unwrap().binarize();
            let wrong = recon
                .values()
                .iter()
                .zip(mask.values())
                .filter(|(a, b)| a != b)
                .count();
            assert!(
                (wrong as f64) < 0.01 * mask.len() as f64,
                "{wrong} of {} pixels differ",
                mask.len()
            );
        }
    }

    #[test]
    fn spectrum_of_saturated_mask_is_flat_and_tiny() {
        let masks = vec![("ones.txt".to_string(), MaskRaster::constant(16, 16, 1.0).unwrap())];
        let report = spectrum_analysis(&masks, 5, DEFAULT_ALPHA, 1).unwrap();
        assert_eq!(report.rows.len(), 6);
        for row in &report.rows {
            assert!(row.mean_loss < 1e-3, "f'={}: {}", row.f, row.mean_loss);
            assert_eq!(row.n_masks, 1);
        }
    }

    #[test]
    fn spectrum_mean_loss_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let mut masks = Vec::new();
        for i in 0..6 {
            let radius = rng.gen_range(4.0..14.0);
            masks.push((format!("disk{i}.txt"), disk_mask(32, 32, radius)));
        }
        let report = spectrum_analysis(&masks, 10, DEFAULT_ALPHA, 1).unwrap();
        for pair in report.rows.windows(2) {
            assert!(
                pair[1].mean_loss <= pair[0].mean_loss,
                "loss rose from f'={} to f'={}",
                pair[0].f,
                pair[1].f
            );
        }
    }

    #[test]
    fn spectrum_is_thread_count_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let masks: Vec<(String, MaskRaster)> = (0..5)
            .map(|i| (format!("m{i}.txt"), random_binary(&mut rng, 12, 12)))
            .collect();
        let serial = spectrum_analysis(&masks, 4, DEFAULT_ALPHA, 1).unwrap();
        let parallel = spectrum_analysis(&masks, 4, DEFAULT_ALPHA, 4).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn spectrum_sorts_by_name_bytes() {
        // Same masks, shuffled input order: identical report.
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let mut masks: Vec<(String, MaskRaster)> = (0..4)
            .map(|i| (format!("m{i}.txt"), random_binary(&mut rng, 8, 8)))
            .collect();
        let sorted = spectrum_analysis(&masks, 3, DEFAULT_ALPHA, 1).unwrap();
        masks.reverse();
        let shuffled = spectrum_analysis(&masks, 3, DEFAULT_ALPHA, 1).unwrap();
        assert_eq!(sorted, shuffled);
    }

    #[test]
    fn spectrum_rejects_empty_dataset() {
        assert!(matches!(
            spectrum_analysis(&[], 3, DEFAULT_ALPHA, 1),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn spectrum_reports_offending_mask() {
        let masks = vec![
            ("good.txt".to_string(), MaskRaster::constant(16, 16, 1.0).unwrap()),
            ("tiny.txt".to_string(), MaskRaster::constant(2, 2, 1.0).unwrap()),
        ];
        let err = spectrum_analysis(&masks, 5, DEFAULT_ALPHA, 1).unwrap_err();
        assert!(err.to_string().contains("tiny.txt"), "{err}");
    }

    #[test]
    fn csv_shape() {
        let report = SpectrumReport {
            rows: vec![
                SpectrumRow { f: 0, mean_loss: 0.5, n_masks: 2 },
                SpectrumRow { f: 1, mean_loss: 0.25, n_masks: 2 },
            ],
        };
        assert_eq!(report.to_csv(), "f,mean_loss,n_masks\n0,0.5,2\n1,0.25,2\n");
    }
}
