//! Experiment configurations, model collections, procedures and data generation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::seeds::{stream_rng, DATA_STREAM};
use crate::error::{Error, Result};
use crate::histogram::{Dataset, NoiseLevel, Partition, RegressionTruth, Signal};
use crate::penalties::{PenaltyKind, PenaltySpec};
use crate::selection::ModelCollection;
use crate::weights::WeightScheme;

/// Overpenalization factor of the `+` procedures.
pub const OVERPENALIZATION_PLUS: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentName {
    S1,
    S2,
    Hsd1,
    Hsd2,
    Custom,
}

impl ExperimentName {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(ExperimentName::S1),
            "s2" => Ok(ExperimentName::S2),
            "hsd1" => Ok(ExperimentName::Hsd1),
            "hsd2" => Ok(ExperimentName::Hsd2),
            "custom" => Ok(ExperimentName::Custom),
            other => Err(Error::InvalidArgument(format!("unknown experiment {other}"))),
        }
    }
}

/// How the model collection is built from `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum CollectionRule {
    /// Regular partitions with `1..=floor(n / ln n)` cells.
    Regular,
    /// The constant model plus partitions regular with `D1` cells on
    /// `[0, 1/2)` and `D2` on `[1/2, 1]`, `D1, D2 <= floor(n / (2 ln n))`.
    TwoHalves,
    /// Regular partitions with `2^k` cells, `0 <= k <= log2(n) - 1`.
    DyadicRegular,
    /// The constant model plus two-halves partitions with `2^k1`, `2^k2`
    /// cells, `0 <= k1, k2 <= log2(n) - 2`.
    DyadicTwoHalves,
    /// An explicit list of breakpoint vectors.
    Explicit { partitions: Vec<Partition> },
}

impl CollectionRule {
    pub fn build(&self, n: usize) -> Result<ModelCollection> {
        let nf = n as f64;
        if n < 2 && !matches!(self, CollectionRule::Explicit { .. }) {
            return Err(Error::InvalidArgument("collection rules need n >= 2".into()));
        }
        let mut models = Vec::new();
        let mut labels = Vec::new();
        match self {
            CollectionRule::Regular => {
                let max = ((nf / nf.ln()).floor() as usize).max(1);
                for d in 1..=max {
                    models.push(Partition::regular(d));
                    labels.push(format!("reg{d}"));
                }
            }
            CollectionRule::TwoHalves => {
                let max = ((nf / (2.0 * nf.ln())).floor() as usize).max(1);
                models.push(Partition::regular(1));
                labels.push("const".to_string());
                for d1 in 1..=max {
                    for d2 in 1..=max {
                        models.push(Partition::two_halves(d1, d2));
                        labels.push(format!("half{d1}_{d2}"));
                    }
                }
            }
            CollectionRule::DyadicRegular => {
                for k in 0..=dyadic_max(n, 1) {
                    models.push(Partition::regular(1 << k));
                    labels.push(format!("dy{}", 1usize << k));
                }
            }
            CollectionRule::DyadicTwoHalves => {
                let max = dyadic_max(n, 2);
                models.push(Partition::regular(1));
                labels.push("const".to_string());
                for k1 in 0..=max {
                    for k2 in 0..=max {
                        models.push(Partition::two_halves(1 << k1, 1 << k2));
                        labels.push(format!("dyhalf{}_{}", 1usize << k1, 1usize << k2));
                    }
                }
            }
            CollectionRule::Explicit { partitions } => {
                return ModelCollection::from_partitions(partitions.clone());
            }
        }
        ModelCollection::new(models, labels)
    }
}

/// `floor(log2 n) - offset`, at least 0.
fn dyadic_max(n: usize, offset: u32) -> u32 {
    (usize::BITS - 1 - n.leading_zeros()).saturating_sub(offset)
}

/// Model collection of a named experiment.
pub fn model_collection(name: ExperimentName, n: usize) -> Result<ModelCollection> {
    match name {
        ExperimentName::S1 => CollectionRule::Regular.build(n),
        ExperimentName::S2 => CollectionRule::TwoHalves.build(n),
        ExperimentName::Hsd1 => CollectionRule::DyadicRegular.build(n),
        ExperimentName::Hsd2 => CollectionRule::DyadicTwoHalves.build(n),
        ExperimentName::Custom => Err(Error::InvalidArgument("custom experiments carry their own rule".into())),
    }
}

/// A model-selection procedure compared in a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub enum Procedure {
    Penalized(PenaltySpec),
    Vfcv { v: usize },
    LooCv,
    /// Selects the oracle model; its indices are 1 by construction.
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedProcedure {
    pub token: String,
    pub procedure: Procedure,
}

/// Parses a procedure token such as `penrad+`, `mallows`, `vfcv5`, `loocv`,
/// `vfpen10` or `eideal`. A trailing `+` multiplies the penalty by 5/4.
pub fn parse_procedure(token: &str, n: usize, truth: &RegressionTruth) -> Result<NamedProcedure> {
    let unknown = || Error::InvalidArgument(format!("unknown procedure {token}"));
    let lower = token.trim().to_ascii_lowercase();
    let (base, c_ov) = match lower.strip_suffix('+') {
        Some(b) => (b, OVERPENALIZATION_PLUS),
        None => (lower.as_str(), 1.0),
    };
    let penalized = |kind| Procedure::Penalized(PenaltySpec::new(kind, c_ov));
    let rp = |scheme| penalized(PenaltyKind::RpClosed { scheme });
    let procedure = match base {
        "penefr" => rp(WeightScheme::efron(n)),
        "penrad" => rp(WeightScheme::rademacher()),
        "penpoi" => rp(WeightScheme::poisson()),
        "penrho" => rp(WeightScheme::rho_half(n)),
        "penloo" => rp(WeightScheme::Loo),
        "mallows" | "mal" => penalized(PenaltyKind::Mallows),
        "eideal" => penalized(PenaltyKind::ExpectedIdeal { truth: truth.clone() }),
        "loocv" if c_ov == 1.0 => Procedure::LooCv,
        "oracle" if c_ov == 1.0 => Procedure::Oracle,
        _ => {
            if let Some(v) = base.strip_prefix("vfcv").filter(|_| c_ov == 1.0) {
                Procedure::Vfcv { v: v.parse().map_err(|_| unknown())? }
            } else if let Some(v) = base.strip_prefix("vfpen") {
                penalized(PenaltyKind::VFoldPen { v: v.parse().map_err(|_| unknown())? })
            } else {
                return Err(unknown());
            }
        }
    };
    let v = match &procedure {
        Procedure::Vfcv { v } => Some(*v),
        Procedure::Penalized(PenaltySpec { kind: PenaltyKind::VFoldPen { v }, .. }) => Some(*v),
        _ => None,
    };
    if let Some(v) = v {
        if v < 2 || v > n {
            return Err(Error::InvalidArgument(format!("{token}: need 2 <= V <= n")));
        }
    }
    Ok(NamedProcedure { token: lower, procedure })
}

fn default_mc_draws() -> usize {
    1000
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: ExperimentName,
    pub n: usize,
    pub truth: RegressionTruth,
    pub collection: CollectionRule,
    /// Procedure tokens, see [`parse_procedure`].
    pub procedures: Vec<String>,
    pub replications: usize,
    pub base_seed: u64,
    /// Share each replication's dataset across procedures.
    #[serde(default = "default_true")]
    pub paired: bool,
    /// Draws for Monte-Carlo penalties.
    #[serde(default = "default_mc_draws")]
    pub mc_draws: usize,
}

impl ExperimentConfig {
    /// Built-in configuration of a named experiment.
    pub fn preset(name: ExperimentName) -> Result<Self> {
        let (n, signal, noise, collection) = match name {
            ExperimentName::S1 => (200, Signal::Sin, NoiseLevel::Constant { sigma: 1.0 }, CollectionRule::Regular),
            ExperimentName::S2 => (200, Signal::Sin, NoiseLevel::Proportional { scale: 1.0 }, CollectionRule::TwoHalves),
            ExperimentName::Hsd1 => {
                (2048, Signal::HeaviSine, NoiseLevel::Constant { sigma: 1.0 }, CollectionRule::DyadicRegular)
            }
            ExperimentName::Hsd2 => (
                2048,
                Signal::HeaviSine,
                NoiseLevel::Proportional { scale: 1.0 },
                CollectionRule::DyadicTwoHalves,
            ),
            ExperimentName::Custom => {
                return Err(Error::InvalidArgument("custom experiments have no preset".into()));
            }
        };
        let procedures = ["mallows", "mallows+", "eideal", "penefr", "penrad", "penpoi", "penrho", "penloo", "penrad+"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        Ok(Self {
            name,
            n,
            truth: RegressionTruth::new(signal, noise),
            collection,
            procedures,
            replications: 1000,
            base_seed: 0,
            paired: true,
            mc_draws: default_mc_draws(),
        })
    }

    /// Reads a JSON document; when it names a built-in experiment, the
    /// document only needs the fields that differ from the preset.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: serde_json::Value = serde_json::from_str(text)?;
        let Some(obj) = doc.as_object() else {
            return Err(Error::InvalidArgument("configuration must be a JSON object".into()));
        };
        let name = obj.get("name").and_then(|v| v.as_str()).map(ExperimentName::parse).transpose()?;
        let merged = match name {
            Some(name) if name != ExperimentName::Custom => {
                let mut base = serde_json::to_value(Self::preset(name)?)?;
                let target = base.as_object_mut().expect("config serializes to an object");
                for (k, v) in obj {
                    target.insert(k.clone(), v.clone());
                }
                base
            }
            _ => doc,
        };
        let config: Self = serde_json::from_value(merged)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::InvalidArgument("at least one replication is required".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidArgument("n must be at least 2".into()));
        }
        if self.procedures.is_empty() {
            return Err(Error::InvalidArgument("no procedure requested".into()));
        }
        self.parsed_procedures()?;
        Ok(())
    }

    pub fn parsed_procedures(&self) -> Result<Vec<NamedProcedure>> {
        self.procedures.iter().map(|t| parse_procedure(t, self.n, &self.truth)).collect()
    }

    pub fn model_collection(&self) -> Result<ModelCollection> {
        self.collection.build(self.n)
    }
}

/// Draws `n` points with `X ~ U[0, 1]` and `Y = s(X) + sigma(X) eps`.
pub fn sample_dataset<R: Rng + ?Sized>(truth: &RegressionTruth, n: usize, rng: &mut R) -> Dataset {
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = rng.random();
        let eps: f64 = rng.sample(StandardNormal);
        x.push(xi);
        y.push(truth.s(xi) + truth.sigma(xi) * eps);
    }
    Dataset::new(x, y).expect("simulated data is valid")
}

/// Dataset of replication `rep`, from its own data stream.
pub fn gen_dataset(config: &ExperimentConfig, rep: u64) -> Dataset {
    gen_dataset_stream(config, rep, DATA_STREAM)
}

pub(crate) fn gen_dataset_stream(config: &ExperimentConfig, rep: u64, tag: u64) -> Dataset {
    let mut rng = stream_rng(config.base_seed, rep, tag);
    sample_dataset(&config.truth, config.n, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collection_sizes() {
        let s1 = model_collection(ExperimentName::S1, 200).unwrap();
        assert_eq!(s1.len(), 37);
        assert_eq!(s1.dims().last(), Some(&37));
        let s2 = model_collection(ExperimentName::S2, 200).unwrap();
        assert_eq!(s2.len(), 1 + 18 * 18);
        let h1 = model_collection(ExperimentName::Hsd1, 2048).unwrap();
        assert_eq!(h1.dims(), (0..=10).map(|k| 1usize << k).collect::<Vec<_>>());
        let h2 = model_collection(ExperimentName::Hsd2, 2048).unwrap();
        assert_eq!(h2.len(), 101);
        assert_eq!(h2.dims().iter().max(), Some(&1024));
    }

    #[test]
    fn procedure_tokens() {
        let truth = ExperimentConfig::preset(ExperimentName::S1).unwrap().truth;
        let p = parse_procedure("penRad+", 200, &truth).unwrap();
        assert_eq!(p.token, "penrad+");
        match p.procedure {
            Procedure::Penalized(spec) => {
                assert_eq!(spec.c_over_cw, 1.25);
                assert_eq!(spec.kind, PenaltyKind::RpClosed { scheme: WeightScheme::rademacher() });
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_procedure("vfcv5", 200, &truth).unwrap().procedure, Procedure::Vfcv { v: 5 });
        assert_eq!(parse_procedure("looCV", 200, &truth).unwrap().procedure, Procedure::LooCv);
        assert!(parse_procedure("penfoo", 200, &truth).is_err());
        assert!(parse_procedure("vfcv", 200, &truth).is_err());
        assert!(parse_procedure("vfcv1", 200, &truth).is_err());
        assert!(parse_procedure("loocv+", 200, &truth).is_err());
        assert!(parse_procedure("vfpen10", 200, &truth).is_ok());
    }

    #[test]
    fn noiseless_data_is_exact() {
        let mut config = ExperimentConfig::preset(ExperimentName::S1).unwrap();
        config.truth.noise = NoiseLevel::Constant { sigma: 0.0 };
        let d = gen_dataset(&config, 3);
        for (x, y) in d.x().iter().zip(d.y()) {
            assert_eq!(*y, (std::f64::consts::PI * x).sin());
        }
        assert_eq!(gen_dataset(&config, 3), d);
    }

    #[test]
    fn json_overrides_preset() {
        let c = ExperimentConfig::from_json(r#"{"name": "hsd2", "replications": 7, "procedures": ["penrad"]}"#).unwrap();
        assert_eq!(c.n, 2048);
        assert_eq!(c.replications, 7);
        assert_eq!(c.procedures, vec!["penrad".to_string()]);
        let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(ExperimentConfig::from_json(r#"{"name": "s1", "procedures": ["nope"]}"#).is_err());
    }
}
