//! Weighted pool-adjacent-violators for nondecreasing fits.

/// Weighted least-squares nondecreasing fit of `values`.
///
/// Zero or negative weights are treated as a tiny positive weight so that
/// every knot receives a fitted value.
pub fn pava(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // blocks: (mean, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&y, &w) in values.iter().zip(weights) {
        let w = if w > 0.0 { w } else { 1e-300 };
        blocks.push((y, w, 1));
        while blocks.len() > 1 {
            let n = blocks.len();
            if blocks[n - 2].0 <= blocks[n - 1].0 {
                break;
            }
            let (m2, w2, c2) = blocks.pop().unwrap();
            let (m1, w1, c1) = blocks.pop().unwrap();
            let w = w1 + w2;
            blocks.push(((m1 * w1 + m2 * w2) / w, w, c1 + c2));
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (m, _, c) in blocks {
        out.extend(std::iter::repeat(m).take(c));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn monotone_input_unchanged() {
        let v = [0.1, 0.2, 0.2, 0.5];
        assert_eq!(pava(&v, &[1.0; 4]), v.to_vec());
    }

    #[test]
    fn pools_violators() {
        let out = pava(&[1.0, 3.0, 2.0, 4.0], &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(out, vec![1.0, 2.5, 2.5, 4.0]);
        let out = pava(&[3.0, 1.0], &[1.0, 3.0]);
        assert_eq!(out, vec![1.5, 1.5]);
    }

    proptest! {
        #[test]
        fn output_nondecreasing_and_mean_preserving(
            ys in proptest::collection::vec(-10.0f64..10.0, 1..60),
        ) {
            let w: Vec<f64> = (0..ys.len()).map(|i| 1.0 + (i % 3) as f64).collect();
            let fit = pava(&ys, &w);
            for pair in fit.windows(2) {
                prop_assert!(pair[0] <= pair[1] + 1e-12);
            }
            let m0: f64 = ys.iter().zip(&w).map(|(y, w)| y * w).sum();
            let m1: f64 = fit.iter().zip(&w).map(|(y, w)| y * w).sum();
            prop_assert!((m0 - m1).abs() < 1e-9);
        }
    }
}
