//! Central finite-difference checks of analytic gradients.
//!
//! Several losses here are piecewise linear. A probe whose step crosses a
//! kink measures a mix of two slopes, so probes where the forward and
//! backward one-sided differences disagree are counted as skipped rather than
//! compared.

/// Gradients smaller than this in both forms count as agreeing.
pub const GRAD_FLOOR: f64 = 1e-9;

/// Outcome of a gradient check.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_err: f64,
    /// Coordinate with the largest relative error.
    pub worst: Option<usize>,
}

impl GradCheck {
    pub fn passes(&self, tol: f64, min_checked: usize) -> bool {
        self.checked >= min_checked && self.max_rel_err < tol
    }
}

/// `|a - n| / max(|a|, |n|)`, with 0 when both are below `floor`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < floor {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Compares `grad[i]` with a central difference of `f` at each coordinate in
/// `coords`, using step `h`.
///
/// `kink_tol` is the relative disagreement between one-sided differences
/// above which a probe is skipped; pass `f64::INFINITY` for smooth functions.
pub fn check_gradient(
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    grad: &[f64],
    coords: &[usize],
    h: f64,
    kink_tol: f64,
) -> GradCheck {
    let mut out = GradCheck::default();
    let f0 = f(x);
    let mut probe = x.to_vec();
    for &i in coords {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        let (fwd, bwd) = ((fp - f0) / h, (f0 - fm) / h);
        let central = (fp - fm) / (2.0 * h);
        if relative_error(fwd, bwd, 1e-12) > kink_tol {
            out.skipped += 1;
            continue;
        }
        let err = relative_error(grad[i], central, GRAD_FLOOR);
        out.checked += 1;
        if err > out.max_rel_err || out.worst.is_none() {
            out.max_rel_err = out.max_rel_err.max(err);
            out.worst = Some(i);
        }
    }
    out
}
