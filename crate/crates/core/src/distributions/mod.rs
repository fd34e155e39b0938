//! Probability laws on `[0, 1]` with the integral primitives the rest of the
//! crate consumes: CDF, density, generalized quantile, truncated conditional
//! expectations and inverse-transform sampling.

mod rng;
mod spec;

pub use rng::RngStream;
pub use spec::parse_distribution_spec;

use crate::error::{Error, Result};
use crate::numerics::integrate_with_breaks;

/// Numerical tolerances threaded through quadrature and root finding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Absolute accuracy of conditional expectations.
    pub quad_tol: f64,
    /// Bracket width at which bisections stop.
    pub root_tol: f64,
    /// Conditioning events with mass at or below this are rejected.
    pub mass_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            quad_tol: 1e-9,
            root_tol: 1e-10,
            mass_floor: 1e-12,
        }
    }
}

/// Supported families.
#[derive(Clone, Debug, PartialEq)]
pub enum DistributionKind {
    Uniform,
    /// `F(x) = x^exponent`.
    Power { exponent: f64 },
    /// Piecewise-linear CDF through sorted `(x, F(x))` knots from `(0,0)` to `(1,1)`.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    /// Finitely many atoms `(point, weight)`, sorted by point.
    Grid { atoms: Vec<(f64, f64)> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    kind: DistributionKind,
    support_lo: f64,
    support_hi: f64,
}

impl Distribution {
    pub fn uniform() -> Self {
        Self {
            kind: DistributionKind::Uniform,
            support_lo: 0.0,
            support_hi: 1.0,
        }
    }

    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0) || !exponent.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "power exponent must be positive, got {exponent}"
            )));
        }
        Ok(Self {
            kind: DistributionKind::Power { exponent },
            support_lo: 0.0,
            support_hi: 1.0,
        })
    }

    /// Piecewise-linear CDF. The knot list must start at `(0, 0)`, end at
    /// `(1, 1)` and be nondecreasing in both coordinates.
    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidArgument("pwl needs at least two knots".into()));
        }
        let (x0, f0) = knots[0];
        let (x1, f1) = knots[knots.len() - 1];
        if x0 != 0.0 || f0 != 0.0 || x1 != 1.0 || f1 != 1.0 {
            return Err(Error::InvalidArgument(
                "pwl knots must include (0, 0) and (1, 1)".into(),
            ));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 {
                return Err(Error::InvalidArgument(format!(
                    "pwl knots not monotone near x = {}",
                    w[1].0
                )));
            }
        }
        let support_lo = knots
            .windows(2)
            .find(|w| w[1].1 > 0.0)
            .map(|w| w[0].0)
            .unwrap_or(0.0);
        let support_hi = knots
            .iter()
            .find(|k| k.1 >= 1.0)
            .map(|k| k.0)
            .unwrap_or(1.0);
        Ok(Self {
            kind: DistributionKind::PiecewiseLinear { knots },
            support_lo,
            support_hi,
        })
    }

    /// Discrete law. Weights must be nonnegative and sum to one within 1e-12;
    /// atoms are sorted and merged.
    pub fn grid(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one atom".into()));
        }
        if atoms.iter().any(|&(x, w)| !(0.0..=1.0).contains(&x) || w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "grid atoms must lie in [0, 1] with nonnegative weights".into(),
            ));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "grid weights sum to {total}, expected 1"
            )));
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        let support_lo = merged.iter().find(|a| a.1 > 0.0).map(|a| a.0).unwrap_or(0.0);
        let support_hi = merged.iter().rev().find(|a| a.1 > 0.0).map(|a| a.0).unwrap_or(1.0);
        Ok(Self {
            kind: DistributionKind::Grid { atoms: merged },
            support_lo,
            support_hi,
        })
    }

    /// Equally weighted atoms at the given points.
    pub fn equally_weighted(points: &[f64]) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        Self::grid(points.iter().map(|&x| (x, w)).collect())
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn support_lo(&self) -> f64 {
        self.support_lo
    }

    pub fn support_hi(&self) -> f64 {
        self.support_hi
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self.kind, DistributionKind::Grid { .. })
    }

    /// Points where the density (or CDF) has a kink or jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            DistributionKind::PiecewiseLinear { knots } => knots.iter().map(|k| k.0).collect(),
            DistributionKind::Grid { atoms } => atoms.iter().map(|a| a.0).collect(),
            _ => Vec::new(),
        }
    }

    /// `P(V <= x)`; `x` outside `[0, 1]` clamps.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match &self.kind {
            DistributionKind::Uniform => x,
            DistributionKind::Power { exponent } => x.powf(*exponent),
            DistributionKind::PiecewiseLinear { knots } => {
                let i = knots.partition_point(|k| k.0 <= x);
                let (xa, fa) = knots[i - 1];
                let (xb, fb) = knots[i];
                fa + (fb - fa) * (x - xa) / (xb - xa)
            }
            DistributionKind::Grid { atoms } => {
                let i = atoms.partition_point(|a| a.0 <= x);
                atoms[..i].iter().map(|a| a.1).sum::<f64>().min(1.0)
            }
        }
    }

    /// `P(V < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match &self.kind {
            DistributionKind::Grid { atoms } => {
                let i = atoms.partition_point(|a| a.0 < x);
                atoms[..i].iter().map(|a| a.1).sum::<f64>().min(1.0)
            }
            _ => self.cdf(x),
        }
    }

    /// Density at `x`, `None` for the grid kind. On piecewise-linear knots the
    /// right-hand slope is used (left-hand at `x = 1`).
    pub fn pdf(&self, x: f64) -> Option<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Some(0.0);
        }
        match &self.kind {
            DistributionKind::Uniform => Some(1.0),
            DistributionKind::Power { exponent } => {
                if x == 0.0 {
                    Some(if *exponent < 1.0 {
                        f64::INFINITY
                    } else if *exponent == 1.0 {
                        1.0
                    } else {
                        0.0
                    })
                } else {
                    Some(exponent * x.powf(exponent - 1.0))
                }
            }
            DistributionKind::PiecewiseLinear { knots } => {
                let i = knots.partition_point(|k| k.0 <= x).clamp(1, knots.len() - 1);
                let (xa, fa) = knots[i - 1];
                let (xb, fb) = knots[i];
                Some((fb - fa) / (xb - xa))
            }
            DistributionKind::Grid { .. } => None,
        }
    }

    /// `P(lo <= V <= hi)`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if hi < lo {
            return 0.0;
        }
        (self.cdf(hi) - self.cdf_left(lo)).max(0.0)
    }

    /// Generalized (left-continuous) inverse `inf { x : F(x) >= q }`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) || q.is_nan() {
            return Err(Error::OutOfRange {
                what: "quantile level",
                value: q,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(self.quantile_unchecked(q))
    }

    fn quantile_unchecked(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return self.support_lo;
        }
        match &self.kind {
            DistributionKind::Uniform => q,
            DistributionKind::Power { exponent } => q.powf(1.0 / exponent),
            DistributionKind::PiecewiseLinear { knots } => {
                let i = knots.partition_point(|k| k.1 < q).clamp(1, knots.len() - 1);
                let (xa, fa) = knots[i - 1];
                let (xb, fb) = knots[i];
                if fb == fa {
                    xa
                } else {
                    xa + (xb - xa) * (q - fa) / (fb - fa)
                }
            }
            DistributionKind::Grid { atoms } => {
                let mut cum = 0.0;
                for &(x, w) in atoms {
                    cum += w;
                    if cum >= q - 1e-12 {
                        return x;
                    }
                }
                self.support_hi
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            DistributionKind::Uniform => 0.5,
            DistributionKind::Power { exponent } => exponent / (exponent + 1.0),
            DistributionKind::PiecewiseLinear { knots } => knots
                .windows(2)
                .map(|w| (w[1].1 - w[0].1) * 0.5 * (w[0].0 + w[1].0))
                .sum(),
            DistributionKind::Grid { atoms } => atoms.iter().map(|a| a.0 * a.1).sum(),
        }
    }

    /// `∫_lo^hi h(v) dF(v)` (closed interval for atoms).
    pub fn partial_expectation<H: Fn(f64) -> f64>(&self, h: H, lo: f64, hi: f64, tol: f64) -> f64 {
        let lo = lo.max(0.0);
        let hi = hi.min(1.0);
        if hi < lo {
            return 0.0;
        }
        match &self.kind {
            DistributionKind::Grid { atoms } => atoms
                .iter()
                .filter(|a| a.0 >= lo && a.0 <= hi)
                .map(|&(x, w)| w * h(x))
                .sum(),
            DistributionKind::Uniform => integrate_with_breaks(h, &[], lo, hi, tol),
            DistributionKind::Power { .. } => {
                integrate_with_breaks(|v| h(v) * self.pdf(v).unwrap_or(0.0), &[], lo, hi, tol)
            }
            DistributionKind::PiecewiseLinear { knots } => {
                // constant density on each knot segment
                let mut total = 0.0;
                for w in knots.windows(2) {
                    let (a, b) = (w[0].0.max(lo), w[1].0.min(hi));
                    if b <= a {
                        continue;
                    }
                    let dens = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                    if dens == 0.0 {
                        continue;
                    }
                    let share = tol * (b - a) / (hi - lo) / dens;
                    total += dens * integrate_with_breaks(&h, &[], a, b, share);
                }
                total
            }
        }
    }

    /// `E[h(V) | lo <= V <= hi]` with default tolerances.
    pub fn conditional_expectation<H: Fn(f64) -> f64>(&self, h: H, lo: f64, hi: f64) -> Result<f64> {
        self.conditional_expectation_with(h, lo, hi, &Tolerances::default())
    }

    /// `E[h(V) | lo <= V <= hi]`.
    ///
    /// A degenerate window (`hi - lo` below the mass floor) around a point of
    /// the support returns the limit `h(lo)`. Otherwise a conditioning mass at
    /// or below `tol.mass_floor` is a [`Error::ZeroMass`].
    pub fn conditional_expectation_with<H: Fn(f64) -> f64>(
        &self,
        h: H,
        lo: f64,
        hi: f64,
        tol: &Tolerances,
    ) -> Result<f64> {
        if hi < lo {
            return Err(Error::ZeroMass { lo, hi, mass: 0.0 });
        }
        let mass = self.mass(lo, hi);
        if self.is_continuous() && hi - lo <= tol.mass_floor {
            if lo >= self.support_lo - tol.mass_floor && lo <= self.support_hi + tol.mass_floor {
                return Ok(h(lo));
            }
            return Err(Error::ZeroMass { lo, hi, mass });
        }
        if mass <= tol.mass_floor {
            return Err(Error::ZeroMass { lo, hi, mass });
        }
        Ok(self.partial_expectation(h, lo, hi, tol.quad_tol * mass) / mass)
    }

    /// Inverse-transform draw.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let u = rng.uniform();
        match &self.kind {
            DistributionKind::Uniform => u,
            _ => self.quantile_unchecked(u),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atoms() -> Distribution {
        Distribution::grid(vec![(0.2, 0.5), (0.8, 0.5)]).unwrap()
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(Distribution::uniform().cdf(0.5), 0.5);
        assert!((Distribution::power(2.0).unwrap().cdf(0.5) - 0.25).abs() < 1e-15);
        assert_eq!(two_atoms().cdf(0.5), 0.5);
        assert_eq!(Distribution::uniform().cdf(-3.0), 0.0);
        assert_eq!(Distribution::uniform().cdf(7.0), 1.0);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(Distribution::uniform().quantile(0.25).unwrap(), 0.25);
        assert!((Distribution::power(2.0).unwrap().quantile(0.25).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(two_atoms().quantile(0.7).unwrap(), 0.8);
        assert_eq!(two_atoms().quantile(0.5).unwrap(), 0.2);
        assert!(matches!(
            Distribution::uniform().quantile(1.5),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn conditional_expectation_examples() {
        let u = Distribution::uniform();
        let e = u.conditional_expectation(|x| x, 0.5, 1.0).unwrap();
        assert!((e - 0.75).abs() < 1e-12);
        let e = u.conditional_expectation(|x| x / 2.0, 0.0, 1.0).unwrap();
        assert!((e - 0.25).abs() < 1e-12);
        assert!(matches!(
            u.conditional_expectation(|x| x, 0.6, 0.4),
            Err(Error::ZeroMass { .. })
        ));
    }

    #[test]
    fn grid_conditional_expectation_is_exact_sum() {
        let g = two_atoms();
        assert_eq!(g.conditional_expectation(|x| x, 0.0, 1.0).unwrap(), 0.5);
        assert_eq!(g.conditional_expectation(|x| x, 0.5, 1.0).unwrap(), 0.8);
        assert!(g.conditional_expectation(|x| x, 0.3, 0.7).is_err());
    }

    #[test]
    fn samples() {
        let mut rng = RngStream::new(1, 0);
        let u = Distribution::uniform();
        for _ in 0..1000 {
            let x = u.sample(&mut rng);
            assert!((0.0..=1.0).contains(&x));
        }
        let single = Distribution::grid(vec![(0.3, 1.0)]).unwrap();
        assert_eq!(single.sample(&mut rng), 0.3);
    }

    #[test]
    fn pwl_requires_corner_knots() {
        assert!(Distribution::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.7)]).is_err());
        assert!(Distribution::piecewise_linear(vec![(0.1, 0.0), (1.0, 1.0)]).is_err());
        let d = Distribution::piecewise_linear(vec![(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]).unwrap();
        assert_eq!(d.pdf(0.25), Some(0.5));
        assert_eq!(d.pdf(0.5), Some(1.5));
        assert_eq!(d.pdf(1.0), Some(1.5));
        assert!((d.quantile(0.25).unwrap() - 0.5).abs() < 1e-15);
        assert!((d.mean() - (0.25 * 0.25 + 0.75 * 0.75)).abs() < 1e-15);
    }

    #[test]
    fn grid_weights_must_sum_to_one() {
        assert!(Distribution::grid(vec![(0.2, 0.5), (0.4, 0.4)]).is_err());
        assert!(Distribution::grid(vec![(0.2, 0.5), (0.2, 0.5)]).is_ok());
    }

    #[test]
    fn degenerate_window_returns_limit() {
        let u = Distribution::uniform();
        let e = u.conditional_expectation(|x| x / 2.0, 1.0, 1.0).unwrap();
        assert_eq!(e, 0.5);
    }
}
