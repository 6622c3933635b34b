//! Uncertainty-driven subdivision refinement of coarse masks.
//!
//! Each refinement step doubles the raster with bilinear upsampling, finds
//! the pixels whose values sit closest to 0.5, and overwrites exactly those
//! with point evaluations of the underlying representation: either the
//! implicit function itself (`exact-implicit`) or a renderer MLP fed the
//! Fourier features at that coordinate, optionally concatenated with a
//! bilinearly sampled auxiliary feature grid.
//!
//! The replaced pixels carry no interpolation error, so boundaries sharpen
//! while everything away from them stays plain bilinear.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fourier::{mapping_row, sigmoid, CoefficientField, MappingMatrix, MaskRaster};
use crate::lattice::FrequencyLattice;
use crate::siren::{siren_backward, siren_forward_row, SirenParams};
use crate::upsampler::{bilinear_sample, bilinear_upsample, super_resolve};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointSource {
    /// Re-evaluate the implicit function exactly at the point.
    ExactImplicit,
    /// Evaluate the renderer MLP on Fourier features at the point.
    Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementConfig {
    /// Number of 2x subdivision steps.
    pub steps: u32,
    /// Points re-evaluated per step.
    pub points_per_step: usize,
    pub point_source: PointSource,
    /// Oversampling factor `k` for training-point candidates.
    pub oversample: f64,
    /// Fraction of training points taken from the most uncertain candidates.
    pub importance_ratio: f64,
    /// Step size of one training update.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            steps: 3,
            points_per_step: 784,
            point_source: PointSource::ExactImplicit,
            oversample: 3.0,
            importance_ratio: 0.75,
            learning_rate: 1e-2,
            seed: 0,
        }
    }
}

/// One replaced pixel: subdivision step, pixel indices at that step's
/// resolution, and the uncertainty score that selected it.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTrace {
    pub step: u32,
    pub i: usize,
    pub j: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub raster: MaskRaster,
    pub trace: Vec<PointTrace>,
}

/// Distance of each value from 0.5; zero means maximally uncertain.
pub fn uncertainty_scores(mask: &MaskRaster) -> MaskRaster {
    let values = mask.values().iter().map(|&v| (v - 0.5).abs()).collect();
    MaskRaster::new(mask.height(), mask.width(), values).expect("scores stay in [0, 0.5]")
}

/// Indices of the `n` lowest uncertainty scores, score-ascending, ties broken
/// by row-major pixel index.
pub fn select_uncertain_points(mask: &MaskRaster, n: usize) -> Result<Vec<(usize, usize)>> {
    let picked = select_from_values(mask.values(), mask.width(), n)?;
    Ok(picked.into_iter().map(|(i, j, _)| (i, j)).collect())
}

fn select_from_values(values: &[f64], width: usize, n: usize) -> Result<Vec<(usize, usize, f64)>> {
    if n > values.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot select {n} points from {} pixels",
            values.len()
        )));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        let sa = (values[a] - 0.5).abs();
        let sb = (values[b] - 0.5).abs();
        sa.partial_cmp(&sb).expect("scores are finite").then(a.cmp(&b))
    });
    Ok(order[..n]
        .iter()
        .map(|&idx| (idx / width, idx % width, (values[idx] - 0.5).abs()))
        .collect())
}

// ---------------------------------------------------------------------------
// Point evaluation
// ---------------------------------------------------------------------------

/// Coefficient vector at a continuous coordinate: the global vector as-is,
/// or the per-pixel field sampled bilinearly in its own index space.
fn coefficients_at(field: &CoefficientField, coord: (f64, f64), out: &mut [f64]) {
    match field.dims() {
        None => out.copy_from_slice(field.slice(0)),
        Some((h, w)) => {
            bilinear_sample(field.values(), h, w, field.coeff_len(), coord.0 * h as f64, coord.1 * w as f64, out)
        }
    }
}

/// Fourier feature row at a coordinate, with the auxiliary channel appended
/// when an auxiliary grid is supplied.
fn feature_row_at(
    field: &CoefficientField,
    lattice: &FrequencyLattice,
    coord: (f64, f64),
    aux: Option<&MaskRaster>,
) -> Vec<f64> {
    let mapped = mapping_row(coord, lattice);
    let mut coeffs = vec![0.0; field.coeff_len()];
    coefficients_at(field, coord, &mut coeffs);
    let mut row: Vec<f64> = mapped.iter().zip(&coeffs).map(|(m, w)| m * w).collect();
    if let Some(grid) = aux {
        let mut sample = [0.0];
        bilinear_sample(
            grid.values(),
            grid.height(),
            grid.width(),
            1,
            coord.0 * grid.height() as f64,
            coord.1 * grid.width() as f64,
            &mut sample,
        );
        row.push(sample[0]);
    }
    row
}

/// Exact implicit value at a coordinate.
fn implicit_at(field: &CoefficientField, lattice: &FrequencyLattice, coord: (f64, f64)) -> f64 {
    let mapped = mapping_row(coord, lattice);
    let mut coeffs = vec![0.0; field.coeff_len()];
    coefficients_at(field, coord, &mut coeffs);
    let mut acc = 0.0;
    for (m, w) in mapped.iter().zip(&coeffs) {
        acc += m * w;
    }
    sigmoid(acc)
}

fn expected_mlp_width(field: &CoefficientField, aux: Option<&MaskRaster>) -> usize {
    field.coeff_len() + usize::from(aux.is_some())
}

fn check_mlp(
    mlp: Option<&SirenParams>,
    field: &CoefficientField,
    aux: Option<&MaskRaster>,
) -> Result<()> {
    let mlp = mlp.ok_or_else(|| Error::InvalidConfig("mlp absent".into()))?;
    let expected = expected_mlp_width(field, aux);
    if mlp.input_dim() != expected {
        return Err(Error::ShapeMismatch(format!(
            "renderer mlp expects input width {}, features have width {expected}",
            mlp.input_dim()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Subdivision refinement
// ---------------------------------------------------------------------------

/// Refine the scale-1 raster of `field` through `config.steps` subdivision
/// steps, producing an `(h 2^steps) x (w 2^steps)` raster.
pub fn subdivision_refine(
    field: &CoefficientField,
    mlp: Option<&SirenParams>,
    aux: Option<&MaskRaster>,
    h: usize,
    w: usize,
    config: &RefinementConfig,
) -> Result<Refined> {
    if config.points_per_step == 0 {
        return Err(Error::InvalidConfig("points_per_step must be >= 1".into()));
    }
    if config.point_source == PointSource::Mlp {
        check_mlp(mlp, field, aux)?;
    }
    let lattice = FrequencyLattice::build(field.max_frequency());

    let start = super_resolve(field, h, w, 1)?;
    let mut values = start.values().to_vec();
    let (mut cur_h, mut cur_w) = (h, w);
    let mut trace = Vec::new();

    for step in 1..=config.steps {
        let mut upsampled = bilinear_upsample(&values, cur_h, cur_w, 1, 2);
        for v in upsampled.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        cur_h *= 2;
        cur_w *= 2;

        let picked = select_from_values(&upsampled, cur_w, config.points_per_step)?;
        for (i, j, score) in picked {
            let coord = (i as f64 / cur_h as f64, j as f64 / cur_w as f64);
            let value = match config.point_source {
                PointSource::ExactImplicit => implicit_at(field, &lattice, coord),
                PointSource::Mlp => {
                    let row = feature_row_at(field, &lattice, coord, aux);
                    siren_forward_row(mlp.expect("checked above"), &row)?
                }
            };
            upsampled[i * cur_w + j] = value;
            trace.push(PointTrace { step, i, j, score });
        }
        values = upsampled;
    }

    Ok(Refined { raster: MaskRaster::new(cur_h, cur_w, values)?, trace })
}

/// CSV dump of a refinement trace: `step,i,j,score`.
pub fn trace_csv(trace: &[PointTrace]) -> String {
    let mut out = String::from("step,i,j,score\n");
    for row in trace {
        out.push_str(&format!("{},{},{},{}\n", row.step, row.i, row.j, row.score));
    }
    out
}

// ---------------------------------------------------------------------------
// Renderer training
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: SirenParams,
    /// Mean binary cross-entropy over the sampled points, before the update.
    pub mean_point_loss: f64,
}

/// One training update of the renderer MLP.
///
/// Draws `k * N` uniform candidate coordinates, keeps the `beta * N` whose
/// coarse implicit predictions are most uncertain plus `(1 - beta) * N`
/// fresh uniform points, and applies a single gradient step of pointwise
/// binary cross-entropy against the target sampled at those coordinates.
pub fn train_renderer_points(
    target: &MaskRaster,
    field: &CoefficientField,
    mlp: Option<&SirenParams>,
    aux: Option<&MaskRaster>,
    config: &RefinementConfig,
) -> Result<TrainOutcome> {
    check_mlp(mlp, field, aux)?;
    let mlp = mlp.expect("checked above");
    if config.points_per_step == 0 {
        return Err(Error::InvalidConfig("points_per_step must be >= 1".into()));
    }
    if !(config.oversample >= 1.0 && config.oversample.is_finite()) {
        return Err(Error::InvalidConfig(format!("oversample {} must be >= 1", config.oversample)));
    }
    if !(0.0..=1.0).contains(&config.importance_ratio) {
        return Err(Error::InvalidConfig(format!(
            "importance ratio {} outside [0,1]",
            config.importance_ratio
        )));
    }

    let lattice = FrequencyLattice::build(field.max_frequency());
    let n = config.points_per_step;
    let n_importance = (config.importance_ratio * n as f64).round() as usize;
    let n_random = n - n_importance.min(n);
    let n_candidates = ((config.oversample * n as f64).round() as usize).max(n_importance);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let draw = |rng: &mut ChaCha8Rng| -> (f64, f64) { (rng.gen::<f64>(), rng.gen::<f64>()) };

    // Importance pool: rank candidates by coarse-prediction uncertainty.
    let candidates: Vec<(f64, f64)> = (0..n_candidates).map(|_| draw(&mut rng)).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    let scores: Vec<f64> = candidates
        .iter()
        .map(|&coord| (implicit_at(field, &lattice, coord) - 0.5).abs())
        .collect();
    order.sort_unstable_by(|&a, &b| {
        scores[a].partial_cmp(&scores[b]).expect("scores are finite").then(a.cmp(&b))
    });
    let mut points: Vec<(f64, f64)> =
        order[..n_importance.min(order.len())].iter().map(|&idx| candidates[idx]).collect();
    for _ in 0..n_random {
        points.push(draw(&mut rng));
    }

    // Feature rows and bilinearly sampled target values at the points.
    let width = expected_mlp_width(field, aux);
    let mut rows = Vec::with_capacity(points.len() * width);
    let mut targets = Vec::with_capacity(points.len());
    for &coord in &points {
        rows.extend(feature_row_at(field, &lattice, coord, aux));
        let mut t = [0.0];
        bilinear_sample(
            target.values(),
            target.height(),
            target.width(),
            1,
            coord.0 * target.height() as f64,
            coord.1 * target.width() as f64,
            &mut t,
        );
        targets.push(t[0].clamp(0.0, 1.0));
    }
    let features = MappingMatrix::from_flat(points.len(), width, rows)?;

    // Pointwise binary cross-entropy; dL/dz = (y - t) / n through the output
    // sigmoid, expressed as upstream dL/dy for the backward pass.
    let predictions: Vec<f64> = (0..points.len())
        .map(|r| siren_forward_row(mlp, features.row(r)))
        .collect::<Result<_>>()?;
    let count = points.len() as f64;
    let mut loss = 0.0;
    let mut upstream = Vec::with_capacity(points.len());
    for (&y, &t) in predictions.iter().zip(&targets) {
        loss -= (t * y.ln() + (1.0 - t) * (1.0 - y).ln()) / count;
        upstream.push((y - t) / (y * (1.0 - y) * count));
    }
    let grads = siren_backward(mlp, &features, &upstream)?;

    let mut updated = mlp.clone();
    let flat: Vec<f64> = updated
        .to_flat()
        .iter()
        .zip(&grads.params)
        .map(|(p, g)| p - config.learning_rate * g)
        .collect();
    updated.from_flat(&flat)?;
    Ok(TrainOutcome { params: updated, mean_point_loss: loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_mask, reconstruct, EncoderConfig};
    use crate::metrics::soft_iou;
    use crate::siren::init_siren_with_input_dim;

    fn disk(h: usize, w: usize, radius: f64) -> MaskRaster {
        let (ci, cj) = (h as f64 / 2.0, w as f64 / 2.0);
        let values = (0..h * w)
            .map(|idx| {
                let (i, j) = ((idx / w) as f64, (idx % w) as f64);
                f64::from((i - ci).hypot(j - cj) < radius)
            })
            .collect();
        MaskRaster::new(h, w, values).unwrap()
    }

    #[test]
    fn score_arithmetic() {
        let mask = MaskRaster::new(1, 3, vec![0.5, 0.0, 0.62]).unwrap();
        let scores = uncertainty_scores(&mask);
        assert_eq!(scores.values()[0], 0.0);
        assert_eq!(scores.values()[1], 0.5);
        assert!((scores.values()[2] - 0.12).abs() < 1e-15);
        let ones = MaskRaster::constant(2, 2, 1.0).unwrap();
        assert!(uncertainty_scores(&ones).values().iter().all(|&s| s == 0.5));
    }

    #[test]
    fn all_tie_selection_follows_row_major_order() {
        let mask = MaskRaster::constant(3, 3, 0.5).unwrap();
        let picked = select_uncertain_points(&mask, 3).unwrap();
        assert_eq!(picked, vec![(0, 0), (0, 1), (0, 2)]);
    }

    #[test]
    fn single_uncertain_pixel_is_found() {
        let mut values = vec![1.0; 9];
        values[5] = 0.5; // pixel (1, 2)
        let mask = MaskRaster::new(3, 3, values).unwrap();
        assert_eq!(select_uncertain_points(&mask, 1).unwrap(), vec![(1, 2)]);
    }

    #[test]
    fn ramp_selection_matches_hand_ranking() {
        // Values idx/16 on a 4x4 grid: scores |idx/16 - 0.5| rank 8 first,
        // then the tie 7/9 in row-major order, then 6/10, and so on.
        let values: Vec<f64> = (0..16).map(|idx| idx as f64 / 16.0).collect();
        let mask = MaskRaster::new(4, 4, values).unwrap();
        let picked = select_uncertain_points(&mask, 7).unwrap();
        let flat: Vec<usize> = picked.iter().map(|&(i, j)| i * 4 + j).collect();
        assert_eq!(flat, vec![8, 7, 9, 6, 10, 5, 11]);
    }

    #[test]
    fn selection_rejects_oversized_n() {
        let mask = MaskRaster::constant(2, 2, 0.5).unwrap();
        assert!(select_uncertain_points(&mask, 5).is_err());
    }

    #[test]
    fn zero_steps_is_plain_reconstruction() {
        let mask = disk(16, 16, 5.0);
        let field = encode_mask(&mask, &EncoderConfig::new(6)).unwrap();
        let config = RefinementConfig { steps: 0, ..RefinementConfig::default() };
        let refined = subdivision_refine(&field, None, None, 16, 16, &config).unwrap();
        assert_eq!(refined.raster, reconstruct(&field, 16, 16, 1).unwrap());
        assert!(refined.trace.is_empty());
    }

    #[test]
    fn three_steps_from_28_reach_224() {
        let mask = disk(28, 28, 9.0);
        let field = encode_mask(&mask, &EncoderConfig::new(12)).unwrap();
        let refined =
            subdivision_refine(&field, None, None, 28, 28, &RefinementConfig::default()).unwrap();
        assert_eq!((refined.raster.height(), refined.raster.width()), (224, 224));
        // The intermediate rungs are 56 and 112: traced indices stay inside.
        for t in &refined.trace {
            let dim = 28 << t.step;
            assert!(t.i < dim && t.j < dim, "step {} touched ({}, {})", t.step, t.i, t.j);
        }
        assert_eq!(refined.trace.len(), 3 * 784);
    }

    #[test]
    fn unselected_pixels_equal_plain_bilinear() {
        let mask = disk(12, 12, 4.0);
        let field = encode_mask(&mask, &EncoderConfig::new(5)).unwrap();
        let config = RefinementConfig {
            steps: 1,
            points_per_step: 10,
            ..RefinementConfig::default()
        };
        let refined = subdivision_refine(&field, None, None, 12, 12, &config).unwrap();

        let base = reconstruct(&field, 12, 12, 1).unwrap();
        let mut reference = bilinear_upsample(base.values(), 12, 12, 1, 2);
        for v in reference.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        let selected: std::collections::HashSet<(usize, usize)> =
            refined.trace.iter().map(|t| (t.i, t.j)).collect();
        for i in 0..24 {
            for j in 0..24 {
                if !selected.contains(&(i, j)) {
                    assert_eq!(refined.raster.get(i, j), reference[i * 24 + j], "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn later_steps_interpolate_from_refined_rasters() {
        // Step 2's unselected pixels come from upsampling the step-1 output,
        // replacements included.
        let mask = disk(12, 12, 4.0);
        let field = encode_mask(&mask, &EncoderConfig::new(5)).unwrap();
        let one = RefinementConfig { steps: 1, points_per_step: 16, ..RefinementConfig::default() };
        let two = RefinementConfig { steps: 2, points_per_step: 16, ..RefinementConfig::default() };
        let after_one = subdivision_refine(&field, None, None, 12, 12, &one).unwrap();
        let after_two = subdivision_refine(&field, None, None, 12, 12, &two).unwrap();

        let mut reference =
            bilinear_upsample(after_one.raster.values(), 24, 24, 1, 2);
        for v in reference.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        let selected: std::collections::HashSet<(usize, usize)> = after_two
            .trace
            .iter()
            .filter(|t| t.step == 2)
            .map(|t| (t.i, t.j))
            .collect();
        for i in 0..48 {
            for j in 0..48 {
                if !selected.contains(&(i, j)) {
                    assert_eq!(after_two.raster.get(i, j), reference[i * 48 + j], "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn replaced_pixels_are_point_exact() {
        let mask = disk(16, 16, 5.0);
        let field = encode_mask(&mask, &EncoderConfig::new(6)).unwrap();
        let config = RefinementConfig { steps: 2, points_per_step: 64, ..RefinementConfig::default() };
        let refined = subdivision_refine(&field, None, None, 16, 16, &config).unwrap();
        let lattice = FrequencyLattice::build(6);
        for t in &refined.trace {
            let dim_h = 16usize << t.step;
            let dim_w = 16usize << t.step;
            // Position of this step's pixel at the final resolution.
            let shift = (config.steps - t.step) as usize;
            let (fi, fj) = (t.i << shift, t.j << shift);
            let coord = (t.i as f64 / dim_h as f64, t.j as f64 / dim_w as f64);
            let direct = implicit_at(&field, &lattice, coord);
            let got = refined.raster.get(fi, fj);
            assert!(
                (got - direct).abs() <= 1e-12,
                "step {} ({}, {}): {got} vs {direct}",
                t.step,
                t.i,
                t.j
            );
        }
    }

    #[test]
    fn refinement_beats_plain_bilinear_on_disks() {
        // Paired soft-IoU comparison against 4x rasterized ground truth:
        // replaced points restore the implicit function's sharp transition
        // band where bilinear interpolation smears it over a coarse pixel.
        let mut refined_sum = 0.0;
        let mut bilinear_sum = 0.0;
        for radius in [6.0, 8.0, 10.0] {
            let coarse = disk(32, 32, radius);
            let truth = disk(128, 128, radius * 4.0);
            let field = encode_mask(&coarse, &EncoderConfig::new(12)).unwrap();
            let config = RefinementConfig {
                steps: 2,
                points_per_step: 512,
                ..RefinementConfig::default()
            };
            let refined = subdivision_refine(&field, None, None, 32, 32, &config).unwrap();
            refined_sum += soft_iou(&refined.raster, &truth).unwrap();

            let base = reconstruct(&field, 32, 32, 1).unwrap();
            let mut up = base.values().to_vec();
            let (mut ch, mut cw) = (32, 32);
            for _ in 0..2 {
                up = bilinear_upsample(&up, ch, cw, 1, 2);
                for v in up.iter_mut() {
                    *v = v.clamp(0.0, 1.0);
                }
                ch *= 2;
                cw *= 2;
            }
            let bilinear_only = MaskRaster::new(128, 128, up).unwrap();
            bilinear_sum += soft_iou(&bilinear_only, &truth).unwrap();
        }
        assert!(
            refined_sum >= bilinear_sum,
            "refined mean {} vs bilinear mean {}",
            refined_sum / 3.0,
            bilinear_sum / 3.0
        );
    }

    #[test]
    fn mlp_source_requires_mlp() {
        let mask = disk(8, 8, 3.0);
        let field = encode_mask(&mask, &EncoderConfig::new(3)).unwrap();
        let config = RefinementConfig {
            steps: 1,
            points_per_step: 4,
            point_source: PointSource::Mlp,
            ..RefinementConfig::default()
        };
        let err = subdivision_refine(&field, None, None, 8, 8, &config).unwrap_err();
        assert!(err.to_string().contains("mlp absent"));
    }

    #[test]
    fn mlp_refinement_is_deterministic() {
        let mask = disk(8, 8, 3.0);
        let field = encode_mask(&mask, &EncoderConfig::new(3)).unwrap();
        let mlp = init_siren_with_input_dim(field.coeff_len(), &[8, 8], 5).unwrap();
        let config = RefinementConfig {
            steps: 1,
            points_per_step: 8,
            point_source: PointSource::Mlp,
            ..RefinementConfig::default()
        };
        let a = subdivision_refine(&field, Some(&mlp), None, 8, 8, &config).unwrap();
        let b = subdivision_refine(&field, Some(&mlp), None, 8, 8, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn aux_grid_changes_input_width() {
        let mask = disk(8, 8, 3.0);
        let field = encode_mask(&mask, &EncoderConfig::new(3)).unwrap();
        let aux = MaskRaster::constant(8, 8, 0.25).unwrap();
        // Width 2c works without aux but not with it.
        let narrow = init_siren_with_input_dim(field.coeff_len(), &[4], 1).unwrap();
        let config = RefinementConfig {
            steps: 1,
            points_per_step: 4,
            point_source: PointSource::Mlp,
            ..RefinementConfig::default()
        };
        assert!(subdivision_refine(&field, Some(&narrow), None, 8, 8, &config).is_ok());
        assert!(subdivision_refine(&field, Some(&narrow), Some(&aux), 8, 8, &config).is_err());
        let wide = init_siren_with_input_dim(field.coeff_len() + 1, &[4], 1).unwrap();
        assert!(subdivision_refine(&field, Some(&wide), Some(&aux), 8, 8, &config).is_ok());
    }

    #[test]
    fn pure_importance_sampling_degeneration() {
        // beta = 1, k = 1: every candidate is kept, no fresh uniform points.
        let target = disk(16, 16, 5.0);
        let coarse = disk(8, 8, 2.5);
        let field = encode_mask(&coarse, &EncoderConfig::new(3)).unwrap();
        let mlp = init_siren_with_input_dim(field.coeff_len(), &[8], 2).unwrap();
        let config = RefinementConfig {
            points_per_step: 32,
            oversample: 1.0,
            importance_ratio: 1.0,
            ..RefinementConfig::default()
        };
        let outcome =
            train_renderer_points(&target, &field, Some(&mlp), None, &config).unwrap();
        assert!(outcome.mean_point_loss.is_finite());
        assert_ne!(outcome.params, mlp);
    }

    #[test]
    fn saturated_correct_mlp_barely_moves() {
        // Output bias pinned far positive: predictions are ~1 everywhere, and
        // the target is all ones, so the update is negligible.
        let target = MaskRaster::constant(16, 16, 1.0).unwrap();
        let coarse = MaskRaster::constant(8, 8, 1.0).unwrap();
        let field = encode_mask(&coarse, &EncoderConfig::new(0)).unwrap();
        let mut mlp = init_siren_with_input_dim(field.coeff_len(), &[4], 3).unwrap();
        let mut flat = mlp.to_flat();
        let len = flat.len();
        flat[len - 1] = 40.0; // output bias
        mlp.from_flat(&flat).unwrap();

        let config = RefinementConfig { points_per_step: 64, ..RefinementConfig::default() };
        let outcome =
            train_renderer_points(&target, &field, Some(&mlp), None, &config).unwrap();
        let max_change = outcome
            .params
            .to_flat()
            .iter()
            .zip(&mlp.to_flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_change < 1e-10, "max parameter change {max_change}");
    }

    #[test]
    fn training_reduces_point_loss() {
        let target = disk(8, 8, 2.5);
        let coarse = disk(8, 8, 2.5);
        let field = encode_mask(&coarse, &EncoderConfig::new(3)).unwrap();
        let mut mlp = init_siren_with_input_dim(field.coeff_len(), &[16, 16], 7).unwrap();
        let mut first = None;
        let mut last = 0.0;
        for iter in 0..200 {
            let config = RefinementConfig {
                points_per_step: 64,
                learning_rate: 5e-2,
                seed: iter,
                ..RefinementConfig::default()
            };
            let outcome =
                train_renderer_points(&target, &field, Some(&mlp), None, &config).unwrap();
            mlp = outcome.params;
            if first.is_none() {
                first = Some(outcome.mean_point_loss);
            }
            last = outcome.mean_point_loss;
        }
        assert!(
            last < first.unwrap(),
            "point loss went from {} to {last}",
            first.unwrap()
        );
    }

    #[test]
    fn trace_csv_shape() {
        let trace = vec![PointTrace { step: 1, i: 2, j: 3, score: 0.125 }];
        assert_eq!(trace_csv(&trace), "step,i,j,score\n1,2,3,0.125\n");
    }
}
