//! House price estimation: per-room luxury aggregation, metadata z-scoring,
//! representation assembly and RBF epsilon-SVR.

mod luxury;
mod normalize;
mod reference;
mod representation;
mod svr;
mod tune;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use luxury::{aggregate_house_luxury, LuxuryVector, NO_PHOTO_LUXURY};
pub use normalize::{fit_normalizer, Normalizer};
pub use reference::svr_fit_reference;
pub use representation::{build_representation, HouseRepresentation, Mode, VisualSignal};
pub use svr::{rbf_kernel, standardize, svr_fit, svr_fit_with, svr_predict, SolverOptions, SvrModel, SvrParams};
pub use tune::{fold_assignment, tune_hyperparams, ParamGrid, TuneResult};

/// A trained price regressor together with the normalizer its inputs need.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationModel {
    pub mode: Mode,
    pub normalizer: Normalizer,
    pub svr: SvrModel,
}

/// One line of a persisted valuation model: a header, then one line per
/// support vector in model order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum ValuationRecord {
    Header {
        mode: Mode,
        params: SvrParams,
        bias: f64,
        y_mean: f64,
        y_scale: f64,
        dim: usize,
        converged: bool,
        kkt_violation: f64,
        iterations: usize,
        normalizer: Normalizer,
    },
    SupportVector {
        vector: Vec<f64>,
        coef: f64,
    },
}

impl ValuationModel {
    pub fn to_records(&self) -> Vec<ValuationRecord> {
        let s = &self.svr;
        let mut out = vec![ValuationRecord::Header {
            mode: self.mode,
            params: s.params,
            bias: s.bias,
            y_mean: s.y_mean,
            y_scale: s.y_scale,
            dim: s.dim,
            converged: s.converged,
            kkt_violation: s.kkt_violation,
            iterations: s.iterations,
            normalizer: self.normalizer.clone(),
        }];
        out.extend(s.support_vectors.iter().zip(&s.dual_coefs).map(|(v, &coef)| {
            ValuationRecord::SupportVector {
                vector: v.clone(),
                coef,
            }
        }));
        out
    }

    pub fn from_records(records: Vec<ValuationRecord>) -> Result<Self> {
        let mut iter = records.into_iter();
        let Some(ValuationRecord::Header {
            mode,
            params,
            bias,
            y_mean,
            y_scale,
            dim,
            converged,
            kkt_violation,
            iterations,
            normalizer,
        }) = iter.next()
        else {
            return Err(Error::invalid("valuation model must start with a header record"));
        };
        params.validate()?;
        let mut support_vectors = Vec::new();
        let mut dual_coefs = Vec::new();
        for r in iter {
            match r {
                ValuationRecord::SupportVector { vector, coef } => {
                    if vector.len() != dim {
                        return Err(Error::invalid(format!(
                            "support vector has dimension {}, header says {dim}",
                            vector.len()
                        )));
                    }
                    support_vectors.push(vector);
                    dual_coefs.push(coef);
                }
                ValuationRecord::Header { .. } => return Err(Error::invalid("duplicate valuation header record")),
            }
        }
        Ok(ValuationModel {
            mode,
            normalizer,
            svr: SvrModel {
                support_vectors,
                dual_coefs,
                bias,
                params,
                y_mean,
                y_scale,
                dim,
                converged,
                kkt_violation,
                iterations,
            },
        })
    }
}
