//! Monotone partitional segmentations of the value space, the equilibrium
//! they induce, and second-order stochastic dominance testers.
//!
//! A segmentation cuts `[0, 1]` into cells `[b_{k-1}, b_k)` (the last cell
//! closed). In a pooled cell the seller learns only the cell; in a revealed
//! cell it learns the value itself.

mod market;
mod order;

pub use market::{
    mpc_surplus_check, neutrality_check, price_spread_check, single_crossing, NeutralityReport,
    SegmentedMarket, SegmentedOutcome, LAW_KNOTS, NEUTRALITY_TOL,
};
pub use order::{mps_check, MpsReport, StepLaw, MEAN_TOL, SOS_TOL};

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CellMode {
    Pooled,
    Revealed,
}

/// The segment a value belongs to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Segment {
    /// Pooled cell `[lo, hi)` (closed at 1 for the last cell).
    Interval { lo: f64, hi: f64, cell: usize },
    /// Revealed value.
    Point { v: f64, cell: usize },
}

impl Segment {
    pub fn cell(&self) -> usize {
        match *self {
            Segment::Interval { cell, .. } | Segment::Point { cell, .. } => cell,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segmentation {
    breakpoints: Vec<f64>,
    modes: Vec<CellMode>,
}

impl Segmentation {
    pub fn new(breakpoints: Vec<f64>, modes: Vec<CellMode>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidArgument(
                "segmentation needs at least two breakpoints".into(),
            ));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidArgument(
                "segmentation breakpoints must start at 0 and end at 1".into(),
            ));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidBreakpoint(w[1]));
        }
        if modes.len() != breakpoints.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "{} cells but {} modes",
                breakpoints.len() - 1,
                modes.len()
            )));
        }
        Ok(Self { breakpoints, modes })
    }

    /// A single pooled cell: the seller learns nothing.
    pub fn none() -> Self {
        Self {
            breakpoints: vec![0.0, 1.0],
            modes: vec![CellMode::Pooled],
        }
    }

    /// Every value revealed.
    pub fn full() -> Self {
        Self {
            breakpoints: vec![0.0, 1.0],
            modes: vec![CellMode::Revealed],
        }
    }

    /// `n` equal pooled cells.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one cell".into()));
        }
        let bps = (0..=n).map(|k| k as f64 / n as f64).collect();
        Self::new(bps, vec![CellMode::Pooled; n])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn modes(&self) -> &[CellMode] {
        &self.modes
    }

    pub fn n_cells(&self) -> usize {
        self.modes.len()
    }

    /// `(lo, hi, mode)` of cell `k`.
    pub fn cell(&self, k: usize) -> (f64, f64, CellMode) {
        (self.breakpoints[k], self.breakpoints[k + 1], self.modes[k])
    }

    pub fn cell_index(&self, v: f64) -> usize {
        let n = self.n_cells();
        // number of interior breakpoints <= v
        self.breakpoints[1..n].partition_point(|&b| b <= v)
    }

    pub fn segment_of(&self, v: f64) -> Segment {
        let cell = self.cell_index(v);
        let (lo, hi, mode) = self.cell(cell);
        match mode {
            CellMode::Pooled => Segment::Interval { lo, hi, cell },
            CellMode::Revealed => Segment::Point { v, cell },
        }
    }

    /// Split the pooled cell containing `b` at `b`.
    pub fn refine(&self, b: f64) -> Result<Self> {
        if !(b > 0.0 && b < 1.0) || self.breakpoints.contains(&b) {
            return Err(Error::InvalidBreakpoint(b));
        }
        let k = self.cell_index(b);
        if self.modes[k] != CellMode::Pooled {
            return Err(Error::InvalidBreakpoint(b));
        }
        let mut out = self.clone();
        out.breakpoints.insert(k + 1, b);
        out.modes.insert(k, CellMode::Pooled);
        Ok(out)
    }

    /// Reveal every value in pooled cell `k`.
    pub fn reveal(&self, k: usize) -> Result<Self> {
        if k >= self.n_cells() || self.modes[k] != CellMode::Pooled {
            return Err(Error::InvalidCell(k));
        }
        let mut out = self.clone();
        out.modes[k] = CellMode::Revealed;
        Ok(out)
    }

    /// Whether `self` is at least as informative as `coarse`: every pooled
    /// cell of `self` lies inside a single pooled cell of `coarse`.
    pub fn refines(&self, coarse: &Segmentation) -> bool {
        (0..self.n_cells()).all(|k| {
            let (lo, hi, mode) = self.cell(k);
            if mode == CellMode::Revealed {
                return true;
            }
            let (clo, chi, cmode) = coarse.cell(coarse.cell_index(lo));
            cmode == CellMode::Pooled && clo <= lo && hi <= chi
        })
    }
}

impl FromStr for Segmentation {
    type Err = Error;

    /// `none`, `full`, `0,0.5,1` (all pooled) or `seg:0,0.5,1;modes=p,r`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "none" => return Ok(Self::none()),
            "full" => return Ok(Self::full()),
            _ => {}
        }
        let body = s.strip_prefix("seg:").unwrap_or(s);
        let (bps, modes) = match body.split_once(';') {
            Some((b, m)) => (b, Some(m)),
            None => (body, None),
        };
        let breakpoints = bps
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad breakpoint '{x}' in '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = breakpoints.len().saturating_sub(1);
        let modes = match modes {
            None => vec![CellMode::Pooled; n],
            Some(m) => {
                let m = m
                    .trim()
                    .strip_prefix("modes=")
                    .ok_or_else(|| Error::Parse(format!("expected 'modes=' in '{s}'")))?;
                m.split(',')
                    .map(|x| match x.trim() {
                        "p" => Ok(CellMode::Pooled),
                        "r" => Ok(CellMode::Revealed),
                        other => Err(Error::Parse(format!("bad cell mode '{other}'"))),
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Self::new(breakpoints, modes)
    }
}

impl fmt::Display for Segmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bps: Vec<String> = self.breakpoints.iter().map(|b| b.to_string()).collect();
        let modes: Vec<&str> = self
            .modes
            .iter()
            .map(|m| match m {
                CellMode::Pooled => "p",
                CellMode::Revealed => "r",
            })
            .collect();
        write!(f, "seg:{};modes={}", bps.join(","), modes.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary() -> Segmentation {
        "seg:0,0.5,1;modes=p,p".parse().unwrap()
    }

    #[test]
    fn segment_lookup() {
        let s = binary();
        assert_eq!(
            s.segment_of(0.3),
            Segment::Interval {
                lo: 0.0,
                hi: 0.5,
                cell: 0
            }
        );
        assert_eq!(
            s.segment_of(0.5),
            Segment::Interval {
                lo: 0.5,
                hi: 1.0,
                cell: 1
            }
        );
        assert_eq!(s.segment_of(1.0).cell(), 1);
        let r = s.reveal(0).unwrap();
        assert_eq!(r.segment_of(0.3), Segment::Point { v: 0.3, cell: 0 });
    }

    #[test]
    fn refine_and_reveal() {
        let s = Segmentation::none().refine(0.5).unwrap();
        assert_eq!(s, binary());
        assert!(matches!(s.refine(0.0), Err(Error::InvalidBreakpoint(_))));
        assert!(matches!(s.refine(0.5), Err(Error::InvalidBreakpoint(_))));
        let r = s.reveal(0).unwrap();
        assert_eq!(r.modes(), &[CellMode::Revealed, CellMode::Pooled]);
        assert!(matches!(r.reveal(0), Err(Error::InvalidCell(0))));
        assert!(matches!(r.reveal(5), Err(Error::InvalidCell(5))));
    }

    #[test]
    fn refinement_relation() {
        let none = Segmentation::none();
        let bin = binary();
        let quart = Segmentation::uniform(4).unwrap();
        let full = Segmentation::full();
        assert!(bin.refines(&none));
        assert!(quart.refines(&bin));
        assert!(full.refines(&quart));
        assert!(full.refines(&none));
        assert!(!none.refines(&bin));
        assert!(!bin.refines(&full));
        let a: Segmentation = "0,0.4,1".parse().unwrap();
        let b: Segmentation = "0,0.6,1".parse().unwrap();
        assert!(!a.refines(&b));
        assert!(bin.refines(&bin));
    }

    #[test]
    fn parse_round_trip() {
        let s: Segmentation = "seg:0,0.25,1;modes=r,p".parse().unwrap();
        assert_eq!(s.to_string(), "seg:0,0.25,1;modes=r,p");
        assert_eq!(s.to_string().parse::<Segmentation>().unwrap(), s);
        assert!("seg:0,0.5".parse::<Segmentation>().is_err());
        assert!("seg:0,0.5,1;modes=p".parse::<Segmentation>().is_err());
        assert!("seg:0,0.7,0.5,1".parse::<Segmentation>().is_err());
        assert!("seg:0,x,1".parse::<Segmentation>().is_err());
    }
}
