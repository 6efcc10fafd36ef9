//! JSON coin-field configuration.
//!
//! ```json
//! {
//!   "free": {"p": 0.7071067811865476, "alpha": 0, "beta": 0, "gamma": 0},
//!   "defects": [
//!     {"x": 0, "coin": {"p": 0.6, "alpha": 0, "beta": 0, "gamma": 0}},
//!     {"x": 3, "matrix": [[0.6, 0], [0.8, 0], [0.8, 0], [-0.6, 0]]}
//!   ],
//!   "delta": 1e-6
//! }
//! ```
//!
//! `matrix` lists `a, b, c, d` as `[re, im]` pairs. When `eps0` and `M` are
//! both given every deviation must obey `‖C(x) − C₀‖ ≤ M e^{−eps0|x|}`. The
//! optional `tail` block generates the deviations `C₀ exp(i M e^{−eps0|x|} n·σ)`
//! truncated below `tol`; explicit defects may be added on top at other sites.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat2, C64};
use crate::walk::{make_coin, Coin, CoinField, CoinParams, TailInfo};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoinSpec {
    pub p: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
}

impl CoinSpec {
    pub fn params(&self) -> Result<CoinParams> {
        CoinParams::new(self.p, self.alpha, self.beta, self.gamma)
    }
}

impl From<CoinParams> for CoinSpec {
    fn from(p: CoinParams) -> Self {
        CoinSpec { p: p.p, alpha: p.alpha, beta: p.beta, gamma: p.gamma }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectSpec {
    pub x: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coin: Option<CoinSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<[[f64; 2]; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSpec {
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    #[serde(default = "default_tail_tol")]
    pub tol: f64,
}

fn default_axis() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

fn default_tail_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub free: CoinSpec,
    #[serde(default)]
    pub defects: Vec<DefectSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailSpec>,
}

fn at(path: &str, site: i64, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path} (site {site}): {msg}"))
}

impl FieldConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("schema: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable config")
    }

    /// Validates every entry and builds the field.
    pub fn build(&self) -> Result<CoinField> {
        let free = self
            .free
            .params()
            .map_err(|e| Error::Config(format!("free: {e}")))?;
        let delta = self.delta.unwrap_or(CoinField::DEFAULT_DELTA);
        if !(delta > 0.0) {
            return Err(Error::Config(format!("delta: must be positive, got {delta}")));
        }
        if free.p < delta {
            return Err(Error::Config(format!("free: |a| = p = {} is below delta = {delta}", free.p)));
        }
        for (name, v) in [("eps0", self.eps0), ("M", self.m)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Config(format!("{name}: must be finite and non-negative, got {v}")));
                }
            }
        }
        let mut deviations: BTreeMap<i64, Coin> = BTreeMap::new();
        let mut tail: Option<TailInfo> = None;
        if let Some(t) = &self.tail {
            let (Some(eps0), Some(m)) = (self.eps0, self.m) else {
                return Err(Error::Config("tail: needs both eps0 and M".into()));
            };
            let axis = t.axis;
            if !(axis.iter().map(|v| v * v).sum::<f64>() > 0.0) {
                return Err(Error::Config("tail.axis: must be a nonzero vector".into()));
            }
            let generated = CoinField::decaying(free, eps0, m, t.tol, delta, |_| axis)
                .map_err(|e| Error::Config(format!("tail: {e}")))?;
            tail = Some(generated.tail());
            deviations.extend(generated.deviations().iter().map(|(k, v)| (*k, *v)));
        }
        let c0 = make_coin(&free);
        for (k, d) in self.defects.iter().enumerate() {
            let path = format!("defects[{k}]");
            let coin = match (&d.coin, &d.matrix) {
                (Some(c), None) => make_coin(&c.params().map_err(|e| at(&path, d.x, e))?),
                (None, Some(m)) => {
                    let e = |i: usize| C64::new(m[i][0], m[i][1]);
                    Coin::from_matrix(Mat2::new(e(0), e(1), e(2), e(3))).map_err(|err| match err {
                        Error::NotUnitary { defect, .. } => Error::NotUnitary { site: Some(d.x), defect },
                        other => other,
                    })?
                }
                _ => return Err(at(&path, d.x, "exactly one of \"coin\" or \"matrix\" is required")),
            };
            if deviations.insert(d.x, coin).is_some() {
                return Err(at(&path, d.x, "duplicate defect site"));
            }
        }
        if let (Some(eps0), Some(m)) = (self.eps0, self.m) {
            for (k, d) in self.defects.iter().enumerate() {
                let dev = (deviations[&d.x].matrix() - c0.matrix()).singular_values()[0];
                let bound = m * (-eps0 * d.x.unsigned_abs() as f64).exp();
                if dev > bound * (1.0 + 1e-12) + 1e-15 {
                    return Err(at(
                        &format!("defects[{k}]"),
                        d.x,
                        format!("deviation {dev:.6e} exceeds M·exp(−eps0·|x|) = {bound:.6e}"),
                    ));
                }
            }
        }
        let field = CoinField::new(free, deviations, delta)?;
        Ok(match (tail, self.eps0, self.m) {
            (Some(t), _, _) => field.with_tail_info(t),
            (None, Some(eps0), Some(m)) => field.with_tail(eps0, m),
            _ => field,
        })
    }
}

/// Parses and validates a coin-field config.
pub fn parse_field(text: &str) -> Result<CoinField> {
    FieldConfig::from_json(text)?.build()
}

pub fn load_field(path: &Path) -> Result<CoinField> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_field(&text)
}
