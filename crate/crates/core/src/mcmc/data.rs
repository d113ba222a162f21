//! Built-in datasets and CSV readers.

use std::io::Read;

use serde::Deserialize;

use super::models::BinomialObs;
use crate::error::{Error, Result};

/// Nine equally spaced points `−4, −3, …, 4`.
pub fn grid_data() -> Vec<f64> {
    (-4..=4).map(f64::from).collect()
}

/// Subtype names of the sarcoma trial, aligned with [`sarcoma_data`].
pub const SARCOMA_SUBTYPES: [&str; 8] = ["LEI", "LIP", "MFH", "OST", "Syn", "Ang", "MPNST", "Fib"];

/// Treatment successes out of patients for eight sarcoma subtypes.
pub fn sarcoma_data() -> Vec<BinomialObs> {
    [
        (6, 28),
        (7, 29),
        (3, 29),
        (5, 26),
        (3, 20),
        (2, 15),
        (1, 5),
        (1, 12),
    ]
    .into_iter()
    .map(|(successes, trials)| BinomialObs { successes, trials })
    .collect()
}

#[derive(Deserialize)]
struct NormalRow {
    y: f64,
}

#[derive(Deserialize)]
struct BinomialRow {
    y: u64,
    n: u64,
}

/// Reads a CSV with a `y` column.
pub fn read_normal_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: NormalRow = row?;
        if !row.y.is_finite() {
            return Err(Error::Parse(format!("non-finite observation {}", row.y)));
        }
        out.push(row.y);
    }
    Ok(out)
}

/// Reads a CSV with `y` (successes) and `n` (trials) columns.
pub fn read_binomial_csv<R: Read>(reader: R) -> Result<Vec<BinomialObs>> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: BinomialRow = row?;
        out.push(BinomialObs::new(row.y, row.n)?);
    }
    Ok(out)
}
