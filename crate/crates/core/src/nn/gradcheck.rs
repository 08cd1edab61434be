use crate::error::{check_len, Result};

/// Outcome of comparing an analytic gradient with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Magnitudes below this are compared absolutely.
const REL_FLOOR: f64 = 1e-6;

pub fn gradient_check<F>(f: F, params: &[f64], analytic: &[f64], tolerance: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> f64,
{
    gradient_check_with_step(f, params, analytic, tolerance, 1e-5)
}

/// Entry-wise relative error `|a - n| / max(|a|, |n|, 1e-6)` between the
/// analytic gradient and central differences with the given step.
pub fn gradient_check_with_step<F>(
    mut f: F,
    params: &[f64],
    analytic: &[f64],
    tolerance: f64,
    step: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> f64,
{
    check_len("gradient_check analytic", params.len(), analytic.len())?;
    let mut p = params.to_vec();
    let mut worst = 0.0_f64;
    let mut worst_index = 0;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + step;
        let up = f(&p);
        p[i] = orig - step;
        let down = f(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(REL_FLOOR);
        let rel = (a - numeric).abs() / denom;
        let rel = if rel.is_nan() { f64::INFINITY } else { rel };
        if rel > worst {
            worst = rel;
            worst_index = i;
        }
    }
    Ok(GradCheckReport {
        max_rel_error: worst,
        worst_index,
        checked: p.len(),
        tolerance,
        passed: worst <= tolerance,
    })
}
