use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{MultiMarket, ValueSampler};
use crate::distributions::parse_distribution_spec;
use crate::error::{Error, Result};
use crate::segmentation::Segmentation;

/// JSON description of a competitive market.
///
/// ```json
/// {"sellers": [{"cost": "uniform"}, {"cost": "power:a=2", "signal": "0,0.5,1"}],
///  "values": "iid:uniform", "samples": 1000000, "seed": 7}
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub sellers: Vec<SellerConfig>,
    pub values: String,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Number of cost-grid knots.
    #[serde(default)]
    pub cost_grid: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SellerConfig {
    pub cost: String,
    #[serde(default)]
    pub signal: Option<String>,
}

impl MarketConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn build(&self) -> Result<MultiMarket> {
        let laws = self
            .sellers
            .iter()
            .map(|s| parse_distribution_spec(&s.cost))
            .collect::<Result<Vec<_>>>()?;
        let signals = self
            .sellers
            .iter()
            .map(|s| s.signal.as_deref().map_or(Ok(Segmentation::none()), str::parse))
            .collect::<Result<Vec<_>>>()?;
        let values = parse_value_sampler(&self.values, self.sellers.len())?;
        MultiMarket::new(laws, values)?.with_signals(signals)
    }
}

/// `iid:<distribution spec>` or `table:<csv path>` (one profile per row, one
/// column per seller, no header).
pub fn parse_value_sampler(spec: &str, n_sellers: usize) -> Result<ValueSampler> {
    let spec = spec.trim();
    if let Some(rest) = spec.strip_prefix("iid:") {
        return Ok(ValueSampler::Iid(parse_distribution_spec(rest)?));
    }
    if let Some(path) = spec.strip_prefix("table:") {
        let path = Path::new(path.trim());
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let row = rec
                .iter()
                .map(|x| {
                    let v: f64 = x.parse().map_err(|_| Error::Parse(format!("bad value `{x}`")))?;
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::OutOfRange {
                            what: "value",
                            value: v,
                            lo: 0.0,
                            hi: 1.0,
                        });
                    }
                    Ok(v)
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != n_sellers {
                return Err(Error::Parse(format!(
                    "value table row has {} entries for {n_sellers} sellers",
                    row.len()
                )));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("value table is empty".into()));
        }
        return Ok(ValueSampler::Table(Arc::new(rows)));
    }
    Err(Error::Parse(format!("unknown value sampler `{spec}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_market_json() {
        let cfg: MarketConfig = serde_json::from_str(
            r#"{"sellers":[{"cost":"uniform"},{"cost":"power:a=2","signal":"0,0.5,1"}],
                "values":"iid:uniform","samples":20000,"seed":3}"#,
        )
        .unwrap();
        let m = cfg.build().unwrap();
        assert_eq!(m.n_sellers(), 2);
        assert_eq!(m.seller(2).signal.n_cells(), 2);
        assert!((m.gamma(2, 0.4) - 0.6).abs() < 1e-12);
        assert!(serde_json::from_str::<MarketConfig>(r#"{"sellers":[],"values":"x","bogus":1}"#).is_err());
    }

    #[test]
    fn value_samplers() {
        assert!(parse_value_sampler("iid:power:a=2", 2).unwrap().is_iid());
        assert!(parse_value_sampler("gaussian", 2).is_err());
        let dir = std::env::temp_dir().join(format!("algorec-values-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("v.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "0.1,0.9\n0.5,0.5").unwrap();
        let s = parse_value_sampler(&format!("table:{}", path.display()), 2).unwrap();
        assert!(!s.is_iid());
        assert!(parse_value_sampler(&format!("table:{}", path.display()), 3).is_err());
    }
}
