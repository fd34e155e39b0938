use serde::Serialize;

use crate::error::{Error, Result};

/// Mean tolerance of the analytic mean-preserving-spread test.
pub const MEAN_TOL: f64 = 1e-7;
/// Tolerance on the integrated-CDF comparison.
pub const SOS_TOL: f64 = 1e-7;

/// Finite law given by weighted atoms; weights are normalised to 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepLaw {
    atoms: Vec<(f64, f64)>,
}

impl StepLaw {
    /// Atoms with nonnegative weights and positive total; equal locations are
    /// merged.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.iter().any(|a| !a.0.is_finite() || !(a.1 >= 0.0)) {
            return Err(Error::InvalidArgument(
                "step law atoms need finite locations and nonnegative weights".into(),
            ));
        }
        atoms.retain(|a| a.1 > 0.0);
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if total <= 0.0 {
            return Err(Error::ZeroMass {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
                mass: total,
            });
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w / total,
                _ => merged.push((x, w / total)),
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn point(x: f64) -> Self {
        Self {
            atoms: vec![(x, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(x, w)| x * w).sum()
    }

    pub fn sd(&self) -> f64 {
        let m = self.mean();
        let var: f64 = self.atoms.iter().map(|(x, w)| w * (x - m) * (x - m)).sum();
        var.max(0.0).sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.0 <= x).map(|a| a.1).sum()
    }

    /// `∫_{-∞}^x CDF(t) dt = Σ w_i max(0, x - a_i)`.
    pub fn integrated_cdf(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|a| a.0 <= x)
            .map(|(a, w)| w * (x - a))
            .sum()
    }
}

/// Outcome of a mean-preserving-spread test.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MpsReport {
    pub is_mps: bool,
    pub mean_gap: f64,
    /// Largest amount by which `∫ (CDF_A - CDF_B)` falls below zero.
    pub max_violation: f64,
}

/// Whether `a` is a mean-preserving spread of `b`: equal means and
/// `∫_{-∞}^x (CDF_A - CDF_B) >= 0` everywhere. The integrated CDFs are
/// piecewise linear with kinks at atoms, so checking every atom suffices.
pub fn mps_check(a: &StepLaw, b: &StepLaw, mean_tol: f64, sos_tol: f64) -> MpsReport {
    let mean_gap = (a.mean() - b.mean()).abs();
    let mut xs: Vec<f64> = a.atoms.iter().chain(&b.atoms).map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    // sweep: I(x) = x W(x) - S(x) with W, S the cumulative weight and
    // weighted location of atoms <= x
    let sweep = |law: &StepLaw| {
        let mut out = Vec::with_capacity(xs.len());
        let (mut i, mut w, mut s) = (0, 0.0, 0.0);
        for &x in &xs {
            while i < law.atoms.len() && law.atoms[i].0 <= x {
                w += law.atoms[i].1;
                s += law.atoms[i].1 * law.atoms[i].0;
                i += 1;
            }
            out.push(x * w - s);
        }
        out
    };
    let ia = sweep(a);
    let ib = sweep(b);
    let worst = ia
        .iter()
        .zip(&ib)
        .map(|(x, y)| x - y)
        .fold(f64::INFINITY, f64::min);
    let max_violation = (-worst).max(0.0);
    MpsReport {
        is_mps: mean_gap < mean_tol && max_violation <= sos_tol,
        mean_gap,
        max_violation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn law_against_itself() {
        let l = StepLaw::new(vec![(0.1, 1.0), (0.4, 3.0)]).unwrap();
        let r = mps_check(&l, &l, MEAN_TOL, SOS_TOL);
        assert!(r.is_mps);
        assert_eq!(r.mean_gap, 0.0);
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn point_masses_differ_in_mean() {
        let r = mps_check(&StepLaw::point(0.3), &StepLaw::point(0.4), MEAN_TOL, SOS_TOL);
        assert!(!r.is_mps);
        assert!((r.mean_gap - 0.1).abs() < 1e-15);
    }

    #[test]
    fn spread_of_a_point() {
        let spread = StepLaw::new((0..=100).map(|i| (0.25 + 0.25 * i as f64 / 100.0, 1.0)).collect())
            .unwrap();
        let point = StepLaw::point(0.375);
        assert!(mps_check(&spread, &point, MEAN_TOL, SOS_TOL).is_mps);
        // the converse is a contraction, not a spread
        let r = mps_check(&point, &spread, MEAN_TOL, SOS_TOL);
        assert!(!r.is_mps && r.max_violation > 0.0);
    }

    #[test]
    fn moments_and_cdf() {
        let l = StepLaw::new(vec![(0.0, 1.0), (1.0, 1.0), (1.0, 2.0)]).unwrap();
        assert_eq!(l.atoms().len(), 2);
        assert!((l.mean() - 0.75).abs() < 1e-15);
        assert!((l.sd() - (0.1875f64).sqrt()).abs() < 1e-15);
        assert_eq!(l.cdf(0.5), 0.25);
        assert!((l.integrated_cdf(2.0) - 1.25).abs() < 1e-15);
        assert!(StepLaw::new(vec![(0.0, 0.0)]).is_err());
    }

    proptest! {
        #[test]
        fn splitting_an_atom_is_a_spread(
            xs in prop::collection::vec((0.0f64..1.0, 0.01f64..1.0), 1..20),
            k in 0usize..20,
            d in 0.0f64..0.5,
        ) {
            let base = StepLaw::new(xs).unwrap();
            let k = k % base.atoms().len();
            let mut split = base.atoms().to_vec();
            let (x, w) = split.remove(k);
            split.push((x - d, w / 2.0));
            split.push((x + d, w / 2.0));
            let spread = StepLaw::new(split).unwrap();
            let r = mps_check(&spread, &base, 1e-12, 1e-12);
            prop_assert!(r.is_mps, "{:?}", r);
        }
    }
}
