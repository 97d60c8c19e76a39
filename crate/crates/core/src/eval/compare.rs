//! Head-to-head RMSE of the joint model and the baselines on one split.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::{fit_and_score, rmse, train_test_split};
use crate::baselines::{fit_ridge, fit_stacked, BaselineKind};
use crate::data::ChemDataset;
use crate::error::{Error, Result};
use crate::params::{GraphParams, Hyperparams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    Tsdst,
    LrNmf,
    Dksvd,
    Ridge,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Tsdst, Method::LrNmf, Method::Dksvd, Method::Ridge];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tsdst => "tsdst",
            Method::LrNmf => "lr_nmf",
            Method::Dksvd => "dksvd",
            Method::Ridge => "ridge",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: Method,
    pub train_rmse: f64,
    /// `+∞` when the method failed.
    pub test_rmse: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<MethodResult>,
    pub n_train: usize,
    pub n_test: usize,
}

impl Comparison {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    pub fn get(&self, m: Method) -> Option<&MethodResult> {
        self.rows.iter().find(|r| r.method == m)
    }
}

fn run(
    method: Method,
    train: &ChemDataset,
    test: &ChemDataset,
    h: &Hyperparams,
    gp: &GraphParams,
) -> Result<(f64, f64)> {
    match method {
        Method::Tsdst => {
            let (_, r) = fit_and_score(train, test, h, gp)?;
            Ok((r.train_rmse.unwrap_or(f64::NAN), r.test_rmse.unwrap_or(f64::NAN)))
        }
        Method::Ridge => {
            // ridge uses the W ℓ2 weight as its penalty
            let model = fit_ridge(train.features(), train.target(), h.lambda_w_l2)?;
            Ok((
                rmse(&model.predict(train.features())?, train.target())?,
                rmse(&model.predict(test.features())?, test.target())?,
            ))
        }
        Method::LrNmf | Method::Dksvd => {
            let kind = if method == Method::LrNmf {
                BaselineKind::LrNmf
            } else {
                BaselineKind::Dksvd
            };
            let model = fit_stacked(train.features(), train.target(), kind, h)?;
            Ok((
                rmse(&model.fitted(), train.target())?,
                rmse(&model.predict(test.features())?, test.target())?,
            ))
        }
    }
}

/// Fits each method on the same seeded split and reports its RMSEs.
/// Methods missing from `h_map` use [`Hyperparams::default`]. A failing
/// method gets `+∞` and its error message; the others still run.
pub fn compare_methods(
    ds: &ChemDataset,
    methods: &[Method],
    h_map: &BTreeMap<Method, Hyperparams>,
    gp: &GraphParams,
    test_fraction: f64,
    seed: u64,
) -> Result<Comparison> {
    let (train_idx, test_idx) = train_test_split(ds.n_samples(), test_fraction, seed)?;
    let train = ds.subset(&train_idx)?;
    let test = ds.subset(&test_idx)?;
    let default = Hyperparams::default();
    let rows = methods
        .iter()
        .map(|&m| {
            let h = h_map.get(&m).unwrap_or(&default);
            match run(m, &train, &test, h, gp) {
                Ok((tr, te)) if te.is_finite() => MethodResult {
                    method: m,
                    train_rmse: tr,
                    test_rmse: te,
                    error: None,
                },
                Ok((tr, te)) => MethodResult {
                    method: m,
                    train_rmse: tr,
                    test_rmse: f64::INFINITY,
                    error: Some(alloc::format!("non-finite test RMSE {te}")),
                },
                Err(e) => {
                    log::warn!("{m} failed: {e}");
                    MethodResult {
                        method: m,
                        train_rmse: f64::INFINITY,
                        test_rmse: f64::INFINITY,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    Ok(Comparison {
        rows,
        n_train: train_idx.len(),
        n_test: test_idx.len(),
    })
}
