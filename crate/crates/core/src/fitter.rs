//! Gradient-descent fitting of a coefficient field (and optionally the
//! sine MLP) to a single target mask.
//!
//! The objective is the IoU loss of the synthesized mask `y`, plus the IoU
//! loss of the MLP mask `y'` when an MLP is attached; both heads share the
//! coefficients, so the field receives gradients from each branch. Fits are
//! fully deterministic given the seed: coefficients start at zero (a uniform
//! 0.5 mask), the MLP initializes from its own seeded generator, and every
//! accumulation runs in a fixed order.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::check_nyquist;
use crate::error::{Error, Result};
use crate::fourier::{
    fourier_features, fourier_mapping, make_grid, synthesize_mask, CoefficientField, FieldMode,
    MappingMatrix, MaskRaster,
};
use crate::lattice::FrequencyLattice;
use crate::metrics::{iou_loss, iou_loss_gradient, soft_iou};
use crate::siren::{init_siren, siren_backward, siren_forward, SirenParams};
use crate::upsampler::upsample_coefficients;

pub const COEFFS_FILE: &str = "coefficients.json";
pub const MLP_FILE: &str = "mlp.json";
pub const HISTORY_FILE: &str = "history.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    Global,
    PerPixel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    /// Steps proportional to the gradient. Because the gradient carries the
    /// sigmoid derivative, updates shrink as pixels saturate and the fit
    /// cannot blow past the target; the default.
    PlainGd,
    /// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8. Its equal-magnitude
    /// per-coordinate steps can over-saturate the logits on this objective
    /// and stall, so prefer plain gradient descent unless gradients are
    /// badly scaled.
    AdaptiveMoments,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub mode: FitMode,
    pub f: u32,
    pub use_mlp: bool,
    /// Hidden layer widths of the MLP head when `use_mlp` is set.
    pub hidden_dims: Vec<usize>,
    pub steps: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Coefficients start uniformly in `(-init_scale, init_scale)`; zero
    /// keeps them all at zero (the maximal-entropy 0.5 mask).
    pub init_scale: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            mode: FitMode::Global,
            f: 12,
            use_mlp: false,
            hidden_dims: crate::siren::DEFAULT_HIDDEN_DIMS.to_vec(),
            steps: 3000,
            learning_rate: 5.0,
            optimizer: OptimizerKind::PlainGd,
            seed: 0,
            init_scale: 0.0,
        }
    }
}

impl FitConfig {
    fn validate(&self, target: &MaskRaster) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad init_scale {}", self.init_scale)));
        }
        if let Some(idx) = target.values().iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::NonBinaryMask { index: idx, value: target.values()[idx] });
        }
        if self.mode == FitMode::Global {
            check_nyquist(self.f, target.height(), target.width())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub loss_y: f64,
    pub loss_yprime: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coefficients: CoefficientField,
    pub mlp: Option<SirenParams>,
    pub loss_history: Vec<HistoryRow>,
    pub final_iou: f64,
    /// Target raster dims; global fields do not carry them on their own.
    pub height: usize,
    pub width: usize,
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

/// The fitting objective over one flat parameter vector
/// `[field values.., mlp weights/biases..]`.
struct Problem<'a> {
    target: &'a MaskRaster,
    mapping: MappingMatrix,
    mode: FieldMode,
    f: u32,
    h: usize,
    w: usize,
    n_field: usize,
    mlp_template: Option<SirenParams>,
}

struct Evaluation {
    loss_y: f64,
    loss_yprime: Option<f64>,
    gradient: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(target: &'a MaskRaster, config: &FitConfig) -> Result<Self> {
        let (h, w) = (target.height(), target.width());
        let lattice = FrequencyLattice::build(config.f);
        let grid = make_grid(h, w, 1)?;
        let mapping = fourier_mapping(&grid, &lattice);
        let n_coeff = 2 * lattice.len();
        let (mode, n_field) = match config.mode {
            FitMode::Global => (FieldMode::Global, n_coeff),
            FitMode::PerPixel => (FieldMode::PerPixel, h * w * n_coeff),
        };
        let mlp_template = if config.use_mlp {
            Some(init_siren(&lattice, &config.hidden_dims, config.seed)?)
        } else {
            None
        };
        Ok(Problem { target, mapping, mode, f: config.f, h, w, n_field, mlp_template })
    }

    fn field_from(&self, params: &[f64]) -> Result<CoefficientField> {
        let values = params[..self.n_field].to_vec();
        match self.mode {
            FieldMode::Global => CoefficientField::global(self.f, values),
            FieldMode::PerPixel => CoefficientField::per_pixel(self.f, self.h, self.w, values),
        }
    }

    fn mlp_from(&self, params: &[f64]) -> Result<Option<SirenParams>> {
        match &self.mlp_template {
            None => Ok(None),
            Some(template) => {
                let mut mlp = template.clone();
                mlp.from_flat(&params[self.n_field..])?;
                Ok(Some(mlp))
            }
        }
    }

    fn param_len(&self) -> usize {
        self.n_field + self.mlp_template.as_ref().map_or(0, |m| m.flat_len())
    }

    fn evaluate(&self, params: &[f64]) -> Result<Evaluation> {
        let field = self.field_from(params)?;
        let features = fourier_features(&self.mapping, &field)?;
        let y = synthesize_mask(&features, self.h, self.w)?;
        let loss_y = iou_loss(&y, self.target)?;
        let upstream_y = iou_loss_gradient(&y, self.target)?;
        let field_grad =
            crate::fourier::synthesis_gradient_from_mapping(&self.mapping, &field, &upstream_y)?;

        let mut gradient = vec![0.0; self.param_len()];
        gradient[..self.n_field].copy_from_slice(field_grad.values());

        let mut loss_yprime = None;
        if let Some(mlp) = self.mlp_from(params)? {
            let yprime_vals = siren_forward(&mlp, &features)?;
            let yprime = MaskRaster::new(self.h, self.w, yprime_vals)?;
            loss_yprime = Some(iou_loss(&yprime, self.target)?);
            let upstream_yp = iou_loss_gradient(&yprime, self.target)?;
            let mlp_grads = siren_backward(&mlp, &features, &upstream_yp)?;
            gradient[self.n_field..].copy_from_slice(&mlp_grads.params);

            // The MLP branch reaches the field through the feature product:
            // d ff[r,k] / d W = mapping[r,k] for the slice owning row r.
            let cols = self.mapping.cols();
            for r in 0..self.mapping.rows() {
                let map_row = self.mapping.row(r);
                let feat_row = &mlp_grads.features[r * cols..(r + 1) * cols];
                let dst = match self.mode {
                    FieldMode::Global => &mut gradient[..self.n_field],
                    FieldMode::PerPixel => &mut gradient[r * cols..(r + 1) * cols],
                };
                for k in 0..cols {
                    dst[k] += feat_row[k] * map_row[k];
                }
            }
        }
        Ok(Evaluation { loss_y, loss_yprime, gradient })
    }
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

enum Optimizer {
    PlainGd,
    Adam { m: Vec<f64>, v: Vec<f64>, t: u64 },
}

impl Optimizer {
    fn new(kind: OptimizerKind, n: usize) -> Self {
        match kind {
            OptimizerKind::PlainGd => Optimizer::PlainGd,
            OptimizerKind::AdaptiveMoments => {
                Optimizer::Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
            }
        }
    }

    fn step(&mut self, params: &mut [f64], gradient: &[f64], lr: f64) {
        match self {
            Optimizer::PlainGd => {
                for (p, g) in params.iter_mut().zip(gradient) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { m, v, t } => {
                *t += 1;
                let bias1 = 1.0 - ADAM_BETA1.powi(*t as i32);
                let bias2 = 1.0 - ADAM_BETA2.powi(*t as i32);
                for k in 0..params.len() {
                    let g = gradient[k];
                    m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g;
                    v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = m[k] / bias1;
                    let v_hat = v[k] / bias2;
                    params[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

/// Fit coefficients (and optionally the MLP) to a binary target mask.
pub fn fit_mask(target: &MaskRaster, config: &FitConfig) -> Result<FitResult> {
    config.validate(target)?;
    let problem = Problem::new(target, config)?;

    let mut params = vec![0.0; problem.param_len()];
    if config.init_scale > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for p in params[..problem.n_field].iter_mut() {
            *p = rng.gen_range(-config.init_scale..config.init_scale);
        }
    }
    if let Some(template) = &problem.mlp_template {
        params[problem.n_field..].copy_from_slice(&template.to_flat());
    }

    let mut optimizer = Optimizer::new(config.optimizer, params.len());
    let mut history = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let eval = problem.evaluate(&params)?;
        let total = eval.loss_y + eval.loss_yprime.unwrap_or(0.0);
        if !total.is_finite() {
            return Err(Error::Divergence { step });
        }
        history.push(HistoryRow { step, loss_y: eval.loss_y, loss_yprime: eval.loss_yprime });
        optimizer.step(&mut params, &eval.gradient, config.learning_rate);
    }

    let coefficients = problem.field_from(&params)?;
    let mlp = problem.mlp_from(&params)?;
    let mut result = FitResult {
        coefficients,
        mlp,
        loss_history: history,
        final_iou: 0.0,
        height: target.height(),
        width: target.width(),
    };
    result.final_iou = soft_iou(&predict(&result, 1)?, target)?;
    Ok(result)
}

/// Evaluate a fit at scale `s`: the synthesized mask `y`, or the elementwise
/// mean of `y` and the MLP mask `y'` when an MLP was trained.
pub fn predict(result: &FitResult, s: u32) -> Result<MaskRaster> {
    let grid = make_grid(result.height, result.width, s)?;
    let lattice = FrequencyLattice::build(result.coefficients.max_frequency());
    let mapping = fourier_mapping(&grid, &lattice);
    let field = upsample_coefficients(&result.coefficients, s)?.field;
    let features = fourier_features(&mapping, &field)?;
    let y = synthesize_mask(&features, grid.rows(), grid.cols())?;
    match &result.mlp {
        None => Ok(y),
        Some(mlp) => {
            let yprime = siren_forward(mlp, &features)?;
            let values = y.values().iter().zip(&yprime).map(|(a, b)| 0.5 * (a + b)).collect();
            MaskRaster::new(grid.rows(), grid.cols(), values)
        }
    }
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

pub fn save_coefficients(field: &CoefficientField, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string(field)?).map_err(|e| Error::io(path, e))
}

pub fn load_coefficients(path: &Path) -> Result<CoefficientField> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let field: CoefficientField = serde_json::from_str(&text)?;
    field.validate()?;
    Ok(field)
}

pub fn save_mlp(params: &SirenParams, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string(params)?).map_err(|e| Error::io(path, e))
}

pub fn load_mlp(path: &Path) -> Result<SirenParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let params: SirenParams = serde_json::from_str(&text)?;
    params.validate()?;
    Ok(params)
}

pub fn history_csv(history: &[HistoryRow]) -> String {
    let mut out = String::from("step,loss_y,loss_yprime\n");
    for row in history {
        match row.loss_yprime {
            Some(lp) => out.push_str(&format!("{},{},{}\n", row.step, row.loss_y, lp)),
            None => out.push_str(&format!("{},{},\n", row.step, row.loss_y)),
        }
    }
    out
}

/// Persist a fit as a directory: `coefficients.json`, optional `mlp.json`,
/// and `history.csv`.
pub fn save_result(result: &FitResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_coefficients(&result.coefficients, &dir.join(COEFFS_FILE))?;
    if let Some(mlp) = &result.mlp {
        save_mlp(mlp, &dir.join(MLP_FILE))?;
    }
    let history_path = dir.join(HISTORY_FILE);
    fs::write(&history_path, history_csv(&result.loss_history))
        .map_err(|e| Error::io(history_path, e))
}
