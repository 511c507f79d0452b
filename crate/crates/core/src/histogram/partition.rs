use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered breakpoints `0 = b_0 < b_1 < ... < b_D = 1`.
///
/// Cell `l` is `[b_l, b_{l+1})`, except the last one which is closed on the
/// right so that `x = 1` has a home.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Partition {
    breaks: Vec<f64>,
}

impl Partition {
    pub fn new(breaks: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::InvalidPartition(
                "need at least two breakpoints".into(),
            ));
        }
        if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 {
            return Err(Error::InvalidPartition(
                "breakpoints must start at 0 and end at 1".into(),
            ));
        }
        if let Some(w) = breaks.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidPartition(format!(
                "breakpoints not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { breaks })
    }

    /// Regular partition of `[0, 1]` into `d` cells.
    pub fn regular(d: usize) -> Self {
        assert!(d >= 1, "a partition needs at least one cell");
        let breaks = (0..=d).map(|j| j as f64 / d as f64).collect();
        Self { breaks }
    }

    /// `d1` regular cells on `[0, 1/2)` followed by `d2` regular cells on `[1/2, 1]`.
    pub fn two_halves(d1: usize, d2: usize) -> Self {
        assert!(d1 >= 1 && d2 >= 1, "each half needs at least one cell");
        let mut breaks: Vec<f64> = (0..d1).map(|j| j as f64 / (2 * d1) as f64).collect();
        breaks.extend((0..d2).map(|j| 0.5 + j as f64 / (2 * d2) as f64));
        breaks.push(1.0);
        Self { breaks }
    }

    pub fn dim(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn bounds(&self, cell: usize) -> (f64, f64) {
        (self.breaks[cell], self.breaks[cell + 1])
    }

    pub fn width(&self, cell: usize) -> f64 {
        self.breaks[cell + 1] - self.breaks[cell]
    }

    /// Index of the cell containing `x`. Values outside `[0, 1]` are clamped
    /// to the first or last cell.
    pub fn locate(&self, x: f64) -> usize {
        let above = self.breaks.partition_point(|&b| b <= x);
        above.saturating_sub(1).min(self.dim() - 1)
    }
}

impl TryFrom<Vec<f64>> for Partition {
    type Error = Error;

    fn try_from(breaks: Vec<f64>) -> Result<Self> {
        Partition::new(breaks)
    }
}

impl From<Partition> for Vec<f64> {
    fn from(p: Partition) -> Self {
        p.breaks
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(Partition::new(vec![0.0]).is_err());
        assert!(Partition::new(vec![0.1, 1.0]).is_err());
        assert!(Partition::new(vec![0.0, 0.9]).is_err());
        assert!(Partition::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Partition::new(vec![0.0, 0.6, 0.4, 1.0]).is_err());
        assert!(Partition::new(vec![0.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn half_open_cells_with_closed_last_cell() {
        let p = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(p.locate(0.0), 0);
        assert_eq!(p.locate(0.4999), 0);
        assert_eq!(p.locate(0.5), 1);
        assert_eq!(p.locate(1.0), 1);
    }

    #[test]
    fn regular_and_two_halves_shapes() {
        let r = Partition::regular(4);
        assert_eq!(r.breakpoints(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let h = Partition::two_halves(1, 2);
        assert_eq!(h.breakpoints(), &[0.0, 0.5, 0.75, 1.0]);
        assert_eq!(h.dim(), 3);
        assert!((r.width(2) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn regular_locate_matches_floor() {
        let p = Partition::regular(37);
        for i in 0..1000 {
            let x = i as f64 / 999.0;
            let expected = ((x * 37.0).floor() as usize).min(36);
            let got = p.locate(x);
            // floating breakpoints j/37 may round either way at exact boundaries
            assert!(got == expected || (x * 37.0).fract() < 1e-9, "x={x}");
        }
    }
}
