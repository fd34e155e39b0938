//! Numerical engine for buyer-optimal recommendation algorithms.
//!
//! A privately informed seller posts a price; a recommendation algorithm that
//! knows the buyer's value decides whether to recommend the product. The crate
//! computes the optimal threshold algorithms, the resulting equilibrium
//! pricing, allocations and welfare, and checks the comparative statics of
//! market segmentation, competition between sellers and informed buyers.
//!
//! Layout:
//! - [`distributions`]: laws on `[0, 1]` and their integral primitives
//! - [`screening`]: virtual costs, ironing and pseudo values
//! - [`mechanism`]: single-seller algorithms, equilibria and welfare
//! - [`segmentation`]: monotone partitional segmentations and stochastic orders
//! - [`competition`]: Monte Carlo engine for competing sellers
//! - [`informed`]: buyers who may purchase without a recommendation
//! - [`oracle`]: brute-force grid verification
//! - [`numerics`]: quadrature, root finding, isotonic regression

pub mod competition;
pub mod distributions;
pub mod error;
pub mod informed;
pub mod mechanism;
pub mod numerics;
pub mod oracle;
pub mod screening;
pub mod segmentation;

pub use distributions::{Distribution, DistributionKind, RngStream, Tolerances};
pub use error::{Error, Result};
pub use mechanism::{AlgorithmKind, Equilibrium, Threshold, ThresholdAlgorithm, Welfare};
pub use screening::{PseudoValue, VirtualCost};
pub use segmentation::{CellMode, Segment, SegmentedMarket, Segmentation, StepLaw};
