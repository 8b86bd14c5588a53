//! Scenario files: the named matrices, weight function and scalar
//! parameters a check or verification runs against. The JSON schema rejects
//! unknown keys so a typo cannot silently test the wrong scenario.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::mc::SampleSpec;
use crate::pd::{random_pd, PdMatrix};
use crate::scalar::{symmetry_tol, Scalar};
use crate::weights::{Factor, Weight, WeightFunction};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioJson {
    matrices: BTreeMap<String, MatrixJson>,
    wf: WfJson,
    #[serde(default)]
    lambda: Option<f64>,
    #[serde(default)]
    p: Option<usize>,
    #[serde(default)]
    r: Option<f64>,
}

/// Matrix wire format: `{"dim": d, "rows": [[...], ...]}`, row-major with
/// symmetric entries required on input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

/// Weight-function wire format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WfJson {
    Constant { c: f64 },
    ExpTilt { t: Vec<f64> },
    Product { factors: Vec<FactorJson> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorJson {
    Constant { c: f64 },
    ExpTilt { t: f64 },
}

impl WfJson {
    pub fn to_weight_function<T: Scalar>(&self) -> Result<WeightFunction<T>> {
        Ok(match self {
            WfJson::Constant { c } => {
                if *c < 0.0 {
                    return Err(Error::NegativeWeight);
                }
                WeightFunction::Constant { c: T::c(*c) }
            }
            WfJson::ExpTilt { t } => WeightFunction::ExpTilt {
                t: t.iter().map(|&x| T::c(x)).collect(),
            },
            WfJson::Product { factors } => WeightFunction::Product {
                factors: factors
                    .iter()
                    .map(|f| {
                        Ok(match f {
                            FactorJson::Constant { c } => {
                                if *c < 0.0 {
                                    return Err(Error::NegativeWeight);
                                }
                                Factor::Constant { c: T::c(*c) }
                            }
                            FactorJson::ExpTilt { t } => Factor::ExpTilt { t: T::c(*t) },
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            },
        })
    }
}

/// A fully resolved scenario: parsed inputs plus the sampling and verdict
/// configuration threaded in from the caller.
#[derive(Clone, Debug)]
pub struct Scenario<T> {
    pub matrices: BTreeMap<String, Mat<T>>,
    pub wf: WeightFunction<T>,
    pub lambda: Option<T>,
    pub p: Option<usize>,
    pub r: Option<T>,
    pub spec: SampleSpec,
    pub zcrit: T,
    pub tolerance: T,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(wf: WeightFunction<T>, spec: SampleSpec) -> Self {
        Self {
            matrices: BTreeMap::new(),
            wf,
            lambda: None,
            p: None,
            r: None,
            spec,
            zcrit: T::c(4.0),
            tolerance: T::c(1e-9),
        }
    }

    pub fn from_json_str(s: &str, spec: SampleSpec, zcrit: T, tolerance: T) -> Result<Self> {
        let parsed: ScenarioJson =
            serde_json::from_str(s).map_err(|e| Error::InvalidScenario(format!("{e}")))?;
        let mut matrices = BTreeMap::new();
        for (name, mj) in parsed.matrices {
            if mj.rows.len() != mj.dim || mj.rows.iter().any(|r| r.len() != mj.dim) {
                return Err(Error::InvalidScenario(format!(
                    "matrix {name}: rows do not form a {0}x{0} array",
                    mj.dim
                )));
            }
            let rows: Vec<Vec<T>> = mj
                .rows
                .iter()
                .map(|r| r.iter().map(|&x| T::c(x)).collect())
                .collect();
            matrices.insert(name, Mat::from_rows(&rows));
        }
        if let Some(l) = parsed.lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::InvalidScenario("lambda must lie in [0, 1]".into()));
            }
        }
        Ok(Self {
            matrices,
            wf: parsed.wf.to_weight_function()?,
            lambda: parsed.lambda.map(T::c),
            p: parsed.p,
            r: parsed.r.map(T::c),
            spec,
            zcrit,
            tolerance,
        })
    }

    pub fn with_matrix(mut self, name: &str, m: Mat<T>) -> Self {
        self.matrices.insert(name.into(), m);
        self
    }

    pub fn with_pd(self, name: &str, m: &PdMatrix<T>) -> Self {
        self.with_matrix(name, m.entries().clone())
    }

    pub fn with_lambda(mut self, l: T) -> Self {
        self.lambda = Some(l);
        self
    }

    pub fn with_p(mut self, p: usize) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_r(mut self, r: T) -> Self {
        self.r = Some(r);
        self
    }

    /// A named matrix as a validated positive-definite model.
    pub fn pd(&self, name: &str) -> Result<PdMatrix<T>> {
        let m = self
            .matrices
            .get(name)
            .ok_or_else(|| Error::MissingScenarioField(format!("matrices.{name}")))?;
        PdMatrix::try_new(m.clone())
    }

    /// A named matrix required only to be symmetric (rank-one updates).
    pub fn sym(&self, name: &str) -> Result<Mat<T>> {
        let m = self
            .matrices
            .get(name)
            .ok_or_else(|| Error::MissingScenarioField(format!("matrices.{name}")))?;
        let scale = m.max_abs().max(T::one());
        if !m.is_symmetric_within(symmetry_tol::<T>() * scale) {
            return Err(Error::NotSymmetric);
        }
        Ok(m.symmetrized())
    }

    pub fn need_lambda(&self) -> Result<T> {
        self.lambda
            .ok_or_else(|| Error::MissingScenarioField("lambda".into()))
    }

    pub fn need_p(&self) -> Result<usize> {
        self.p
            .ok_or_else(|| Error::MissingScenarioField("p".into()))
    }

    pub fn need_r(&self) -> Result<T> {
        self.r
            .ok_or_else(|| Error::MissingScenarioField("r".into()))
    }

    /// The scenario weight adapted to dimension `dim`.
    pub fn weight(&self, dim: usize) -> Result<Weight<T>> {
        Weight::from_wf(&self.wf, dim)
    }

    /// A ready-to-run scenario for smoke tests and registry round-trips:
    /// seeded random matrices of dimension `d` and a unit constant weight
    /// (valid at every argument dimension a check may need).
    pub fn default_for(d: usize, seed: u64, spec: SampleSpec) -> Self {
        let c = random_pd::<T>(d, seed);
        let c1 = random_pd::<T>(d, seed.wrapping_add(1));
        let c2 = random_pd::<T>(d, seed.wrapping_add(2));
        let a = random_pd::<T>(d, seed.wrapping_add(3));
        let b = random_pd::<T>(d, seed.wrapping_add(4));
        let wf = WeightFunction::one();
        Scenario::new(wf, spec)
            .with_pd("C", &c)
            .with_pd("C1", &c1)
            .with_pd("C2", &c2)
            .with_pd("A", &a)
            .with_pd("B", &b)
            .with_lambda(T::c(0.5))
            .with_p(1.max(d / 2))
            .with_r(T::one())
    }
}
