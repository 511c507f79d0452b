use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Paired observations `(x_i, y_i)` with every `x_i` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    x: f64,
    y: f64,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidDataset(format!(
                "x has {} entries but y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::InvalidDataset("no observations".into()));
        }
        if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidDataset(format!("x = {bad} outside [0, 1]")));
        }
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite response {bad}")));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Sub-dataset made of the given indices, in order.
    pub fn subset(&self, idx: impl IntoIterator<Item = usize>) -> Result<Self> {
        let (x, y): (Vec<f64>, Vec<f64>) = idx.into_iter().map(|i| (self.x[i], self.y[i])).unzip();
        Dataset::new(x, y)
    }

    /// Reads a two-column `x,y` CSV with a header row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            x.push(row.x);
            y.push(row.y);
        }
        Dataset::new(x, y)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Writes `x,y` rows; floats use the shortest representation that
    /// parses back to the same bits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for (&x, &y) in self.x.iter().zip(&self.y) {
            wtr.serialize(Row { x, y })?;
        }
        wtr.flush()?;
        Ok(())
    }
}
