use std::path::Path;

use super::Distribution;
use crate::error::{Error, Result};

/// Parse the textual distribution grammar:
/// `uniform`, `power:a=<float>`, `pwl:<csv path>`, `grid:<csv path>`.
///
/// CSV files carry a header row `x,F` followed by monotone `(x, F(x))` rows.
/// For `grid`, the atoms are the rows' `x` values and their weights are the
/// increments of `F`.
pub fn parse_distribution_spec(spec: &str) -> Result<Distribution> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("uniform") {
        return Ok(Distribution::uniform());
    }
    if let Some(rest) = spec.strip_prefix("power:") {
        let value = rest
            .trim()
            .strip_prefix("a=")
            .ok_or_else(|| Error::Parse(format!("expected power:a=<float>, got `{spec}`")))?;
        let a: f64 = value
            .parse()
            .map_err(|_| Error::Parse(format!("bad power exponent `{value}`")))?;
        return Distribution::power(a);
    }
    if let Some(path) = spec.strip_prefix("pwl:") {
        let rows = read_cdf_csv(Path::new(path.trim()))?;
        return Distribution::piecewise_linear(rows);
    }
    if let Some(path) = spec.strip_prefix("grid:") {
        let rows = read_cdf_csv(Path::new(path.trim()))?;
        let mut prev = 0.0;
        let mut atoms = Vec::with_capacity(rows.len());
        for (x, f) in rows {
            if f < prev {
                return Err(Error::Parse(format!("grid CDF decreases at x = {x}")));
            }
            if f > prev {
                atoms.push((x, f - prev));
            }
            prev = f;
        }
        return Distribution::grid(atoms);
    }
    Err(Error::Parse(format!("unknown distribution spec `{spec}`")))
}

fn read_cdf_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "F" {
        return Err(Error::Parse(format!(
            "{}: expected header `x,F`",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let parse = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{}`", &record[i])))
        };
        rows.push((parse(0)?, parse(1)?));
    }
    Ok(rows)
}
