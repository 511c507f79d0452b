use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Partition;
use crate::quadrature::integrate;
use crate::simbench::heavisine;

/// Absolute tolerance used for every per-cell integral.
pub const QUAD_TOL: f64 = 1e-10;

/// Regression function `s` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    /// `sin(pi x)`
    Sin,
    /// Donoho–Johnstone HeaviSine, jumps at 0.3 and 0.72.
    HeaviSine,
    Constant { value: f64 },
    /// Piecewise constant: `values[j]` on `[breaks[j], breaks[j+1])`.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
}

impl Signal {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Signal::Sin => (PI * x).sin(),
            Signal::HeaviSine => heavisine(x),
            Signal::Constant { value } => *value,
            Signal::PiecewiseConstant { breaks, values } => {
                let j = breaks.partition_point(|&b| b <= x).saturating_sub(1);
                values[j.min(values.len() - 1)]
            }
        }
    }

    /// Discontinuities, registered as mandatory quadrature subdivision points.
    pub fn jumps(&self) -> Vec<f64> {
        match self {
            Signal::HeaviSine => vec![0.3, 0.72],
            Signal::PiecewiseConstant { breaks, .. } => breaks.clone(),
            _ => Vec::new(),
        }
    }
}

/// Noise level `sigma(x) >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseLevel {
    Constant { sigma: f64 },
    /// `sigma(x) = scale * x`
    Proportional { scale: f64 },
}

impl NoiseLevel {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            NoiseLevel::Constant { sigma } => *sigma,
            NoiseLevel::Proportional { scale } => scale * x,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            NoiseLevel::Constant { sigma } => *sigma == 0.0,
            NoiseLevel::Proportional { scale } => *scale == 0.0,
        }
    }
}

/// Known data-generating model `Y = s(X) + sigma(X) eps`, `X ~ U[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTruth {
    pub signal: Signal,
    pub noise: NoiseLevel,
}

/// Population quantities of a truth on the cells of one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTruth {
    /// `p_l = P(X in I_l)`
    pub prob: Vec<f64>,
    /// `beta_l = E[Y | X in I_l]`
    pub mean: Vec<f64>,
    /// `int_{I_l} (s - beta_l)^2`
    pub bias: Vec<f64>,
    /// `E[sigma(X)^2 | X in I_l]`
    pub noise_var: Vec<f64>,
}

impl CellTruth {
    /// `l(s, s_m)`, the approximation error of the model.
    pub fn total_bias(&self) -> f64 {
        self.bias.iter().sum()
    }

    /// `E[(Y - s_m(X))^2 | X in I_l]`: noise plus within-cell variation of `s`.
    pub fn residual_var(&self, cell: usize) -> f64 {
        self.noise_var[cell] + self.bias[cell] / self.prob[cell]
    }
}

impl RegressionTruth {
    pub fn new(signal: Signal, noise: NoiseLevel) -> Self {
        Self { signal, noise }
    }

    pub fn s(&self, x: f64) -> f64 {
        self.signal.eval(x)
    }

    pub fn sigma(&self, x: f64) -> f64 {
        self.noise.eval(x)
    }

    pub fn cell_truth(&self, partition: &Partition) -> CellTruth {
        let jumps = self.signal.jumps();
        let dim = partition.dim();
        let mut out = CellTruth {
            prob: Vec::with_capacity(dim),
            mean: Vec::with_capacity(dim),
            bias: Vec::with_capacity(dim),
            noise_var: Vec::with_capacity(dim),
        };
        for cell in 0..dim {
            let (a, b) = partition.bounds(cell);
            let p = b - a;
            let beta = integrate(|t| self.s(t), a, b, &jumps, QUAD_TOL) / p;
            let bias = integrate(|t| (self.s(t) - beta).powi(2), a, b, &jumps, QUAD_TOL);
            let noise = integrate(|t| self.sigma(t).powi(2), a, b, &[], QUAD_TOL) / p;
            out.prob.push(p);
            out.mean.push(beta);
            out.bias.push(bias);
            out.noise_var.push(noise);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_cell_means() {
        let t = RegressionTruth::new(Signal::Sin, NoiseLevel::Constant { sigma: 1.0 });
        let ct = t.cell_truth(&Partition::regular(2));
        // int_0^{1/2} sin(pi x) dx = 1/pi
        assert!((ct.mean[0] - 2.0 / PI).abs() < 1e-12);
        assert!((ct.mean[1] - 2.0 / PI).abs() < 1e-12);
        // l(s, s_m) = 1/2 - (2/pi)^2
        assert!((ct.total_bias() - (0.5 - 4.0 / (PI * PI))).abs() < 1e-11);
        assert!((ct.noise_var[0] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn proportional_noise_cell_variance() {
        let t = RegressionTruth::new(Signal::Constant { value: 0.0 }, NoiseLevel::Proportional { scale: 1.0 });
        let ct = t.cell_truth(&Partition::regular(2));
        // E[X^2 | X in [1/2, 1]] = 2 * (1 - 1/8) / 3 = 7/12
        assert!((ct.noise_var[1] - 7.0 / 12.0).abs() < 1e-13);
        assert!((ct.noise_var[0] - 1.0 / 12.0).abs() < 1e-13);
    }

    #[test]
    fn piecewise_constant_has_no_bias_on_its_partition() {
        let sig = Signal::PiecewiseConstant { breaks: vec![0.0, 0.25, 1.0], values: vec![2.0, -1.0] };
        let t = RegressionTruth::new(sig, NoiseLevel::Constant { sigma: 0.0 });
        let ct = t.cell_truth(&Partition::new(vec![0.0, 0.25, 1.0]).unwrap());
        assert!(ct.total_bias() < 1e-20);
        assert_eq!(ct.mean, vec![2.0, -1.0]);
    }

    #[test]
    fn truth_serde_roundtrip() {
        let t = RegressionTruth::new(Signal::HeaviSine, NoiseLevel::Proportional { scale: 1.0 });
        let s = serde_json::to_string(&t).unwrap();
        let back: RegressionTruth = serde_json::from_str(&s).unwrap();
        assert_eq!(t, back);
    }
}
