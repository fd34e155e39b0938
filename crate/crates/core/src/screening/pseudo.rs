use super::VirtualCost;
use crate::distributions::{Distribution, Tolerances};
use crate::error::{Error, Result};

/// `y(v) = E[γ⁻¹(ṽ) | v <= ṽ <= cap]` under the value law.
///
/// With `cap = 1` this is the unsegmented pseudo value; a smaller cap gives
/// the pseudo value inside a pooled segment whose upper end is `cap`.
#[derive(Clone, Debug)]
pub struct PseudoValue {
    value_law: Distribution,
    vc: VirtualCost,
    upper_cap: f64,
    tol: Tolerances,
}

impl PseudoValue {
    pub fn new(value_law: Distribution, vc: VirtualCost) -> Self {
        let tol = *vc.tolerances();
        Self {
            value_law,
            vc,
            upper_cap: 1.0,
            tol,
        }
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.upper_cap = cap.clamp(0.0, 1.0);
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn value_law(&self) -> &Distribution {
        &self.value_law
    }

    pub fn virtual_cost(&self) -> &VirtualCost {
        &self.vc
    }

    pub fn cap(&self) -> f64 {
        self.upper_cap
    }

    /// Lowest value in the (capped) support.
    pub fn v_lo(&self) -> f64 {
        self.value_law.support_lo().min(self.v_hi())
    }

    /// Highest value in the (capped) support.
    pub fn v_hi(&self) -> f64 {
        self.upper_cap.min(self.value_law.support_hi())
    }

    /// Evaluate `y(v)`. Values below the support evaluate at its bottom; at
    /// the top of the support the limit `γ⁻¹(v_hi)` is returned.
    pub fn eval(&self, v: f64) -> Result<f64> {
        if v > self.upper_cap + 1e-15 {
            return Err(Error::OutOfRange {
                what: "pseudo value argument",
                value: v,
                lo: 0.0,
                hi: self.upper_cap,
            });
        }
        let hi = self.v_hi();
        let lo = v.max(self.value_law.support_lo()).min(hi);
        self.value_law
            .conditional_expectation_with(|t| self.vc.inverse_clamped(t), lo, hi, &self.tol)
    }

    /// `y(v)` with `v` clamped into the capped support. Never fails: a
    /// conditioning window without mass evaluates to its limit `γ⁻¹(v)`.
    pub fn eval_clamped(&self, v: f64) -> f64 {
        let v = v.clamp(self.v_lo(), self.v_hi());
        self.eval(v).unwrap_or_else(|_| self.vc.inverse_clamped(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_pv() -> PseudoValue {
        let vc = VirtualCost::new(Distribution::uniform(), 1.0).unwrap();
        PseudoValue::new(Distribution::uniform(), vc)
    }

    #[test]
    fn uniform_closed_form() {
        let pv = uniform_pv();
        assert!((pv.eval(0.5).unwrap() - 0.375).abs() < 1e-12);
        assert!((pv.eval(0.0).unwrap() - 0.25).abs() < 1e-12);
        assert!((pv.eval(1.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn capped_segment() {
        let pv = uniform_pv().with_cap(0.5);
        assert!((pv.eval(0.2).unwrap() - 0.175).abs() < 1e-12);
        assert!(pv.eval(0.7).is_err());
    }

    #[test]
    fn top_of_support_is_inverse_virtual_cost() {
        let pv = uniform_pv();
        let top = pv.virtual_cost().inverse(1.0).unwrap();
        assert!((pv.eval(1.0).unwrap() - top).abs() < 1e-10);
        assert!(pv.eval(0.0).unwrap() > 0.0);
    }

    #[test]
    fn monotone_on_grid() {
        let vc = VirtualCost::new(Distribution::power(2.0).unwrap(), 1.0).unwrap();
        let pv = PseudoValue::new(Distribution::power(1.5).unwrap(), vc);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1000 {
            let y = pv.eval(i as f64 / 1000.0).unwrap();
            assert!(y >= prev - 1e-12);
            assert!((0.0..=1.0).contains(&y));
            prev = y;
        }
    }
}
