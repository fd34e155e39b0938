//! Greatest convex minorant of a sampled function.

/// Slopes of the greatest convex minorant of `(xs[i], ys[i])`, one per
/// segment `[xs[i], xs[i+1]]`. `xs` must be strictly increasing.
///
/// Single monotone-chain pass over the lower hull.
pub fn convex_minorant_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return Vec::new();
    }
    let mut hull: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b if it lies on or above the chord a -> i
            let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut slopes = vec![0.0; n - 1];
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let s = (ys[b] - ys[a]) / (xs[b] - xs[a]);
        for slot in slopes.iter_mut().take(b).skip(a) {
            *slot = s;
        }
    }
    slopes
}
