//! One-dimensional minimisation: a uniform coarse scan followed by
//! golden-section refinement around the best sample.

/// `(√5 − 1) / 2`
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search on `[lo, hi]` until the bracket's width relative to
/// its midpoint drops below `rel_tol`. Returns the best evaluated point.
///
/// `f` returning `None` is treated as `+∞`.
pub fn golden_section(
    mut f: impl FnMut(f64) -> Option<f64>,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
) -> Option<(f64, f64)> {
    let mut eval = |x: f64| f(x).filter(|v| !v.is_nan()).unwrap_or(f64::INFINITY);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    // The bracket shrinks geometrically; the cap only guards degenerate input.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= rel_tol * mid.abs() {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = eval(x2);
        }
    }
    let best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    best.1.is_finite().then_some(best)
}

/// Evenly spaced samples over `[lo, hi]`, both ends included.
pub fn linspace(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    let step = if count > 1 { (hi - lo) / (count - 1) as f64 } else { 0.0 };
    (0..count).map(move |k| if k + 1 == count && count > 1 { hi } else { lo + step * k as f64 })
}

/// Outcome of [`coarse_to_fine`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
}

/// Scans `samples` points over `[lo, hi]`, then refines between the
/// neighbours of the best sample.
///
/// Ties go to the smallest `x`. The refined point replaces the coarse one
/// only when strictly better, so a flat function returns the first sample.
/// Returns `None` when no sample evaluates.
pub fn coarse_to_fine(
    mut f: impl FnMut(f64) -> Option<f64>,
    lo: f64,
    hi: f64,
    samples: usize,
    rel_tol: f64,
) -> Option<Minimum> {
    let xs: alloc::vec::Vec<f64> = linspace(lo, hi, samples).collect();
    let mut best: Option<(usize, f64)> = None;
    for (k, &x) in xs.iter().enumerate() {
        if let Some(v) = f(x).filter(|v| !v.is_nan()) {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((k, v));
            }
        }
    }
    let (k, value) = best?;
    let mut min = Minimum { x: xs[k], value };
    let a = xs[k.saturating_sub(1)];
    let b = xs[(k + 1).min(xs.len() - 1)];
    if b > a {
        if let Some((x, v)) = golden_section(&mut f, a, b, rel_tol) {
            if v < min.value {
                min = Minimum { x, value: v };
            }
        }
    }
    Some(min)
}
