//! Balancing the distance-loss and penalty-loss gradients.

use super::GradientBundle;

/// Gradient-norm balancing: when the penalty gradient is longer than the
/// distance gradient it is rescaled to the distance gradient's L2 norm
/// before the two are summed.
pub fn combine_gn(g_dis: &GradientBundle, g_pen: &GradientBundle) -> GradientBundle {
    let dis_norm = g_dis.norm();
    let pen_norm = g_pen.norm();
    let mut out = g_dis.clone();
    let factor = if pen_norm > dis_norm { dis_norm / pen_norm } else { 1.0 };
    out.add_scaled(g_pen, factor);
    out
}

/// Early-stop trigger: `|g_pen| > k_es * |g_dis|`.
pub fn should_early_stop(g_dis: &GradientBundle, g_pen: &GradientBundle, k_es: f64) -> bool {
    debug_assert!(k_es > 0.0);
    g_pen.norm() > k_es * g_dis.norm()
}
