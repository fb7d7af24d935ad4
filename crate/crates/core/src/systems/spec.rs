//! JSON system descriptions.
//!
//! ```json
//! {"type": "renewal", "D": 2, "atoms": [[x_p, x_q, y_p, y_q, prob_num, prob_den], ...]}
//! {"type": "renewal", "atoms_f64": [[x, y, p], ...]}
//! {"type": "markov", "P": [[...]], "f": [[[phi, tau], ...], ...]}
//! {"type": "pm", "alpha": 0.25, "phi_check": "square_centered", "roof": "affine"}
//! ```
//!
//! Every type also accepts `{"preset": name}` and an optional `"profile"`
//! array of intra-cell weights.

use std::path::Path;

use num_rational::BigRational;
use serde_json::Value;

use super::{MarkovChain, MarkovShiftBase, ObservableProfile, PMTowerBase, PmObservable, PmRoof, RenewalAtom, RenewalBase, SystemError};
use crate::groups::json::{rational_from_json, scalar_from_json};
use crate::groups::{QVec, QuadScalar};

#[derive(Debug, Clone)]
pub enum SystemSpec {
    Renewal(RenewalBase),
    Markov(MarkovShiftBase),
    Pm(PMTowerBase),
}

fn perr(msg: impl Into<String>) -> SystemError {
    SystemError::Parse(msg.into())
}

fn f64_of(v: &Value) -> Result<f64, SystemError> {
    v.as_f64().ok_or_else(|| perr(format!("expected a number, got {v}")))
}

fn arr<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>, SystemError> {
    v.as_array().ok_or_else(|| perr(format!("{what} must be an array")))
}

fn rat(v: &Value) -> Result<BigRational, SystemError> {
    rational_from_json(v).map_err(|e| perr(e.to_string()))
}

fn quad(p: &Value, q: &Value, d: i64) -> Result<QuadScalar, SystemError> {
    QuadScalar::try_new(rat(p)?, rat(q)?, d).ok_or_else(|| perr(format!("D = {d} is not square-free")))
}

impl SystemSpec {
    pub fn load(path: &Path) -> Result<Self, SystemError> {
        let text = std::fs::read_to_string(path).map_err(|e| perr(format!("{}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| perr(format!("{}: {e}", path.display())))?;
        Self::from_json(&v)
    }

    pub fn from_json(v: &Value) -> Result<Self, SystemError> {
        let ty = v.get("type").and_then(Value::as_str).ok_or_else(|| perr("missing \"type\""))?;
        let profile = match v.get("profile") {
            None | Some(Value::Null) => None,
            Some(p) => Some(ObservableProfile::tabulated(arr(p, "profile")?.iter().map(f64_of).collect::<Result<_, _>>()?)?),
        };
        let preset = v.get("preset").and_then(Value::as_str);
        let mut spec = match ty {
            "renewal" => SystemSpec::Renewal(match preset {
                Some("counterexample") => RenewalBase::counterexample(),
                Some("non_arithmetic") => RenewalBase::non_arithmetic(),
                Some(other) => return Err(perr(format!("unknown renewal preset {other:?}"))),
                None => renewal_from_json(v)?,
            }),
            "markov" => SystemSpec::Markov(match preset {
                Some("fair_coin") => MarkovShiftBase::fair_coin(),
                Some("pinned_three_state") => MarkovShiftBase::pinned_three_state(),
                Some(other) => return Err(perr(format!("unknown markov preset {other:?}"))),
                None => markov_from_json(v)?,
            }),
            "pm" => {
                let alpha = v.get("alpha").map(f64_of).transpose()?.unwrap_or(0.25);
                let obs = PmObservable::from_id(v.get("phi_check").and_then(Value::as_str).unwrap_or("square_centered"))?;
                let roof = PmRoof::from_id(v.get("roof").and_then(Value::as_str).unwrap_or("affine"))?;
                SystemSpec::Pm(PMTowerBase::new(alpha, roof, obs)?)
            }
            other => return Err(perr(format!("unknown system type {other:?}"))),
        };
        if let Some(p) = profile {
            spec = match spec {
                SystemSpec::Renewal(s) => SystemSpec::Renewal(s.with_profile(p)),
                SystemSpec::Markov(s) => SystemSpec::Markov(s.with_profile(p)),
                SystemSpec::Pm(s) => SystemSpec::Pm(s.with_profile(p)),
            };
        }
        Ok(spec)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SystemSpec::Renewal(_) => "renewal",
            SystemSpec::Markov(_) => "markov",
            SystemSpec::Pm(_) => "pm",
        }
    }

    /// Closed-walk data for the minimal-group computation, when the system
    /// carries exact values.
    pub fn cycles(&self) -> Option<Vec<(QVec, i64)>> {
        match self {
            SystemSpec::Renewal(s) => s.cycles(),
            SystemSpec::Markov(s) => s.cycles(),
            SystemSpec::Pm(_) => None,
        }
    }
}

fn renewal_from_json(v: &Value) -> Result<RenewalBase, SystemError> {
    if let Some(a) = v.get("atoms_f64") {
        let atoms = arr(a, "atoms_f64")?
            .iter()
            .map(|row| {
                let r = arr(row, "atom")?;
                if r.len() != 3 {
                    return Err(perr("atoms_f64 entries are [x, y, p]"));
                }
                Ok((f64_of(&r[0])?, f64_of(&r[1])?, f64_of(&r[2])?))
            })
            .collect::<Result<Vec<_>, _>>()?;
        return RenewalBase::from_f64(&atoms);
    }
    let d = v.get("D").and_then(Value::as_i64).unwrap_or(2);
    let atoms = arr(v.get("atoms").ok_or_else(|| perr("renewal needs atoms or atoms_f64"))?, "atoms")?
        .iter()
        .map(|row| {
            let r = arr(row, "atom")?;
            if r.len() != 6 {
                return Err(perr("atoms entries are [x_p, x_q, y_p, y_q, prob_num, prob_den]"));
            }
            let prob = rat(&Value::Array(vec![r[4].clone(), r[5].clone()]))?;
            Ok(RenewalAtom { x: quad(&r[0], &r[1], d)?, y: quad(&r[2], &r[3], d)?, prob })
        })
        .collect::<Result<Vec<_>, _>>()?;
    RenewalBase::new(atoms)
}

fn markov_from_json(v: &Value) -> Result<MarkovShiftBase, SystemError> {
    let p = arr(v.get("P").ok_or_else(|| perr("markov needs P"))?, "P")?
        .iter()
        .map(|row| arr(row, "P row")?.iter().map(f64_of).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let chain = MarkovChain::new(p)?;
    let d = v.get("D").and_then(Value::as_i64).unwrap_or(2);
    let rows = arr(v.get("f").ok_or_else(|| perr("markov needs f"))?, "f")?;
    let exact = rows.iter().all(|row| {
        row.as_array().is_some_and(|r| r.iter().all(|c| c.as_array().is_some_and(|c| c.iter().all(|x| !x.is_f64()))))
    });
    if exact {
        let f = rows
            .iter()
            .map(|row| {
                arr(row, "f row")?
                    .iter()
                    .map(|c| {
                        let c = arr(c, "f entry")?;
                        if c.len() != 2 {
                            return Err(perr("f entries are [phi, tau]"));
                        }
                        let s = |x: &Value| scalar_from_json(x, d).map_err(|e| perr(e.to_string()));
                        Ok([s(&c[0])?, s(&c[1])?])
                    })
                    .collect::<Result<Vec<QVec>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        return MarkovShiftBase::new_exact(chain, f);
    }
    let f = rows
        .iter()
        .map(|row| {
            arr(row, "f row")?
                .iter()
                .map(|c| {
                    let c = arr(c, "f entry")?;
                    if c.len() != 2 {
                        return Err(perr("f entries are [phi, tau]"));
                    }
                    Ok([f64_of(&c[0])?, f64_of(&c[1])?])
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    MarkovShiftBase::new(chain, f)
}
