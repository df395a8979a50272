//! Bracketing bisection for monotone functions.

/// Outcome of a bisection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub root: f64,
    /// Function value at `root`.
    pub residual: f64,
    pub iterations: usize,
}

/// Bisection on `[lo, hi]` for a nondecreasing `f` with `f(lo) ≤ 0 ≤ f(hi)`.
///
/// Stops once `|f| ≤ f_tol`, the bracket is narrower than `x_tol`, or after
/// `max_iter` halvings. Returns the evaluated point with the smallest `|f|`
/// when that meets `f_tol`, otherwise the centre of the final bracket. The
/// caller is responsible for checking the bracket signs.
pub fn bisect_increasing(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    f_tol: f64,
    x_tol: f64,
    max_iter: usize,
) -> Bisection {
    let f_lo = f(lo);
    let f_hi = f(hi);
    let mut best = if libm::fabs(f_lo) <= libm::fabs(f_hi) { (lo, f_lo) } else { (hi, f_hi) };
    let mut iterations = 0;
    while iterations < max_iter && libm::fabs(best.1) > f_tol && hi - lo > x_tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        iterations += 1;
        if libm::fabs(f_mid) < libm::fabs(best.1) {
            best = (mid, f_mid);
        }
        if f_mid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if libm::fabs(best.1) > f_tol {
        // Residual tolerance never met (e.g. a jump): report the bracket centre.
        let mid = 0.5 * (lo + hi);
        return Bisection { root: mid, residual: f(mid), iterations };
    }
    Bisection { root: best.0, residual: best.1, iterations }
}
