//! Bisection, generalized inverses and one-dimensional maximization.

const MAX_BISECTIONS: usize = 200;

/// Root of a nondecreasing `f` on `[lo, hi]` by bisection.
///
/// Returns the left end of the final bracket, i.e. a point `x` with
/// `f(x) < 0 <= f(x + tol)`. Endpoints are returned when `f` does not change
/// sign on the interval.
pub fn bisect_increasing<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    if f(lo) >= 0.0 {
        return lo;
    }
    if f(hi) < 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..MAX_BISECTIONS {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        if f(m) >= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Left-continuous generalized inverse `inf { x in [lo, hi] : f(x) >= y }` of a
/// nondecreasing `f`. Returns `hi` when the set is empty.
pub fn generalized_inverse<F: Fn(f64) -> f64>(f: F, y: f64, lo: f64, hi: f64, tol: f64) -> f64 {
    if f(lo) >= y {
        return lo;
    }
    if f(hi) < y {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..MAX_BISECTIONS {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        if f(m) >= y {
            b = m;
        } else {
            a = m;
        }
    }
    b
}

/// Golden-section search for a maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Grid scan followed by golden-section refinement around the best knot.
///
/// Ties on the grid go to the lower abscissa; the refined point replaces the
/// grid winner only if it is strictly better.
pub fn grid_then_golden<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, tol: f64) -> (f64, f64) {
    if !(hi > lo) || n < 2 {
        return (lo, f(lo));
    }
    let step = (hi - lo) / (n - 1) as f64;
    let mut best_i = 0;
    let mut best = f(lo);
    for i in 1..n {
        let x = if i + 1 == n { hi } else { lo + step * i as f64 };
        let v = f(x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let best_x = if best_i + 1 == n { hi } else { lo + step * best_i as f64 };
    let a = (best_x - step).max(lo);
    let b = (best_x + step).min(hi);
    let (x, v) = golden_section_max(&f, a, b, tol);
    if v > best {
        (x, v)
    } else {
        (best_x, best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_sqrt_two() {
        let x = bisect_increasing(|x| x * x - 2.0, 0.0, 2.0, 1e-12);
        assert!((x - 2f64.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn generalized_inverse_of_flat_segment_is_left_end() {
        let f = |x: f64| if x < 0.3 { x } else if x < 0.6 { 0.3 } else { x - 0.3 };
        let x = generalized_inverse(f, 0.3, 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-11);
        assert_eq!(generalized_inverse(f, -1.0, 0.0, 1.0, 1e-12), 0.0);
        assert_eq!(generalized_inverse(f, 5.0, 0.0, 1.0, 1e-12), 1.0);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_section_max(|x| -(x - 0.37) * (x - 0.37), 0.0, 1.0, 1e-10);
        assert!((x - 0.37).abs() < 1e-8);
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn grid_ties_go_low() {
        let (x, v) = grid_then_golden(|_| 0.0, 0.0, 1.0, 11, 1e-10);
        assert_eq!(x, 0.0);
        assert_eq!(v, 0.0);
    }
}
