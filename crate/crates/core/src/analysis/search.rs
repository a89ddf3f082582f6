//! One-dimensional maximization of unimodal functions.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`,
/// stopping once the bracket is shorter than `tol`.
pub fn golden_section_max(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> (f64, f64) {
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    while hi - lo > tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    // the endpoints of the final bracket may beat the midpoint on a plateau edge
    [(a, fa), (b, fb), (mid, fm)]
        .into_iter()
        .fold((mid, fm), |best, c| if c.1 > best.1 { c } else { best })
}

/// Best of `points` equally spaced samples on `[lo, hi]`.
pub fn grid_scan_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let points = points.max(2);
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let t = lo + step * i as f64;
            (t, f(t))
        })
        .fold(
            (lo, f64::NEG_INFINITY),
            |best, c| if c.1 > best.1 { c } else { best },
        )
}

/// Coarse grid bracket followed by golden-section refinement inside the
/// two cells around the best grid point.
pub fn maximize_bracketed(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    grid: usize,
    tol: f64,
) -> (f64, f64) {
    let grid = grid.max(3);
    let step = (hi - lo) / (grid - 1) as f64;
    let (t0, f0) = grid_scan_max(&f, lo, hi, grid);
    let a = (t0 - step).max(lo);
    let b = (t0 + step).min(hi);
    let (t1, f1) = golden_section_max(&f, a, b, tol);
    if f1 >= f0 {
        (t1, f1)
    } else {
        (t0, f0)
    }
}
