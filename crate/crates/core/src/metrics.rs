//! Soft IoU and IoU loss between mask rasters.
//!
//! Soft IoU generalizes set IoU to real-valued masks as
//! `sum_i min(p_i, t_i) / sum_j max(p_j, t_j)`; on binary inputs it equals the
//! usual pixel-counting ratio. The training loss is `1 - soft_iou`, so that
//! lower is better.

use crate::error::{Error, Result};
use crate::fourier::MaskRaster;

fn check_shapes(pred: &MaskRaster, target: &MaskRaster) -> Result<()> {
    if pred.height() != target.height() || pred.width() != target.width() {
        return Err(Error::ShapeMismatch(format!(
            "pred is {}x{}, target is {}x{}",
            pred.height(),
            pred.width(),
            target.height(),
            target.width()
        )));
    }
    Ok(())
}

/// `sum min / sum max` over pixel values; 1 when both masks are identically
/// zero (vacuous perfect agreement).
pub fn soft_iou(pred: &MaskRaster, target: &MaskRaster) -> Result<f64> {
    check_shapes(pred, target)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&p, &t) in pred.values().iter().zip(target.values()) {
        num += p.min(t);
        den += p.max(t);
    }
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok(num / den)
}

/// `1 - soft_iou`; 0 on identical masks, 1 on disjoint binary masks.
pub fn iou_loss(pred: &MaskRaster, target: &MaskRaster) -> Result<f64> {
    Ok(1.0 - soft_iou(pred, target)?)
}

/// Analytic subgradient of [`iou_loss`] with respect to each prediction pixel.
///
/// Where `p_i == t_i` the min branch is assigned to the prediction, so the
/// tie rule is deterministic. Both-empty inputs yield an all-zero gradient.
pub fn iou_loss_gradient(pred: &MaskRaster, target: &MaskRaster) -> Result<Vec<f64>> {
    check_shapes(pred, target)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&p, &t) in pred.values().iter().zip(target.values()) {
        num += p.min(t);
        den += p.max(t);
    }
    if den == 0.0 {
        return Ok(vec![0.0; pred.len()]);
    }

    // L = 1 - num/den, so dL/dp_i = -(dnum_i * den - num * dden_i) / den^2.
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.values().iter().zip(target.values()) {
        let min_takes_pred = p <= t;
        let dnum = if min_takes_pred { 1.0 } else { 0.0 };
        let dden = 1.0 - dnum;
        grad.push(-(dnum * den - num * dden) / (den * den));
    }
    Ok(grad)
}
