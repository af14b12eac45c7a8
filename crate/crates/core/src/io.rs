//! Model files and plot-ready exports.
//!
//! Models are JSON documents with payoff coefficient arrays keyed by
//! action name (constant term first); `p_a0` is optional and defaults to
//! the principal's prior. CSV exports use a dot decimal separator and 17
//! significant digits, enough to round-trip any f64.

use crate::closed_form::ClosedFormValue;
use crate::envelope::concave_envelope;
use crate::equilibrium::SweepTable;
use crate::fd::{funding_region_fd, GridValue};
use crate::model::ModelSpec;
use crate::piecewise::PiecewiseFn;
use crate::poly::Polynomial;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    actions: Vec<String>,
    #[serde(rename = "f_P")]
    f_p: BTreeMap<String, Vec<f64>>,
    f_a: BTreeMap<String, Vec<f64>>,
    r: f64,
    sigma: f64,
    p0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_a0: Option<f64>,
}

pub fn model_from_json(text: &str) -> Result<ModelSpec> {
    let file: ModelFile = serde_json::from_str(text)?;
    let lookup = |map: &BTreeMap<String, Vec<f64>>, which: &str| -> Result<Vec<Polynomial>> {
        for key in map.keys() {
            if !file.actions.contains(key) {
                return Err(Error::InvalidModel(format!(
                    "{which} has payoffs for unknown action `{key}`"
                )));
            }
        }
        file.actions
            .iter()
            .map(|a| {
                map.get(a)
                    .map(|c| Polynomial::new(c.clone()))
                    .ok_or_else(|| {
                        Error::InvalidModel(format!("{which} is missing action `{a}`"))
                    })
            })
            .collect()
    };
    let spec = ModelSpec {
        f_p: lookup(&file.f_p, "f_P")?,
        f_a: lookup(&file.f_a, "f_a")?,
        actions: file.actions,
        r: file.r,
        sigma: file.sigma,
        p0: file.p0,
        p_a0: file.p_a0.unwrap_or(file.p0),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn model_to_json(spec: &ModelSpec) -> String {
    let coeffs = |polys: &[Polynomial]| -> BTreeMap<String, Vec<f64>> {
        spec.actions
            .iter()
            .cloned()
            .zip(polys.iter().map(|p| p.coeffs().to_vec()))
            .collect()
    };
    let file = ModelFile {
        actions: spec.actions.clone(),
        f_p: coeffs(&spec.f_p),
        f_a: coeffs(&spec.f_a),
        r: spec.r,
        sigma: spec.sigma,
        p0: spec.p0,
        p_a0: (spec.p_a0 != spec.p0).then_some(spec.p_a0),
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path)?;
    model_from_json(&text)
}

pub fn save_model(spec: &ModelSpec, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_json(spec) + "\n")?;
    Ok(())
}

/// Writes every bundled fixture into `dir`, returning the paths.
pub fn write_fixtures(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir.as_ref())?;
    let mut written = Vec::new();
    for (name, spec) in crate::fixtures::all() {
        let path = dir.as_ref().join(format!("{name}.json"));
        save_model(&spec, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// 17 significant digits: every f64 round-trips exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV of `(p, u(p), cav u(p))` on a uniform grid of `n` points.
pub fn envelope_csv(u: &PiecewiseFn, n: usize) -> String {
    let cav = concave_envelope(u);
    let mut out = String::from("p,u,cav_u\n");
    for i in 0..n {
        let p = i as f64 / (n - 1) as f64;
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(p),
            fmt_f64(u.eval_usc(p)),
            fmt_f64(cav.eval_usc(p))
        ));
    }
    out
}

/// CSV of `(p_i, u_i, v_i, funding_flag)` for a grid solution.
pub fn grid_value_csv(gv: &GridValue, tol: f64) -> String {
    let funding = funding_region_fd(gv, tol);
    let mut out = String::from("p,u,v,funding\n");
    for i in 0..gv.n_points {
        let p = gv.grid_point(i);
        let flag = funding.iter().any(|&(lo, hi)| p > lo && p < hi);
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(p),
            fmt_f64(gv.u_grid[i]),
            fmt_f64(gv.values[i]),
            u8::from(flag)
        ));
    }
    out
}

/// CSV of the closed-form value sampled on `n` uniform points.
pub fn closed_value_csv(v: &ClosedFormValue, u: &PiecewiseFn, n: usize) -> String {
    let mut out = String::from("p,u,v,funding\n");
    for i in 0..n {
        let p = i as f64 / (n - 1) as f64;
        let flag = v.funding_region.iter().any(|&(lo, hi)| p > lo && p < hi);
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(p),
            fmt_f64(u.eval_usc(p)),
            fmt_f64(v.eval(p)),
            u8::from(flag)
        ));
    }
    out
}

/// CSV of a comparative-statics sweep.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = String::from("r_sigma2,p_minus,p_plus,P_minus,P_plus,value,sup_gap\n");
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(row.r_sigma2),
            fmt_f64(row.p_minus),
            fmt_f64(row.p_plus),
            fmt_f64(row.pers_minus),
            fmt_f64(row.pers_plus),
            fmt_f64(row.value_at_prior),
            fmt_f64(row.sup_gap)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn round_trip_is_identity() {
        for (name, spec) in fixtures::all() {
            let json = model_to_json(&spec);
            let back = model_from_json(&json).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(back.actions, spec.actions);
            assert_eq!(back.f_p, spec.f_p, "{name}");
            assert_eq!(back.f_a, spec.f_a, "{name}");
            assert_eq!(back.r.to_bits(), spec.r.to_bits());
            assert_eq!(back.p0.to_bits(), spec.p0.to_bits());
            assert_eq!(back.p_a0.to_bits(), spec.p_a0.to_bits());
        }
    }

    #[test]
    fn default_agent_prior_is_the_principal_prior() {
        let json = r#"{
            "actions": ["a"],
            "f_P": {"a": [0.0, 1.0]},
            "f_a": {"a": [0.0]},
            "r": 1.0, "sigma": 1.0, "p0": 0.3
        }"#;
        let spec = model_from_json(json).unwrap();
        assert_eq!(spec.p_a0, 0.3);
    }

    #[test]
    fn invalid_models_are_rejected() {
        // Out-of-range prior.
        let json = r#"{
            "actions": ["a"],
            "f_P": {"a": [0.0]},
            "f_a": {"a": [0.0]},
            "r": 1.0, "sigma": 1.0, "p0": 1.2
        }"#;
        assert!(matches!(model_from_json(json), Err(Error::InvalidModel(_))));
        // Missing payoff.
        let json = r#"{
            "actions": ["a", "b"],
            "f_P": {"a": [0.0], "b": [0.0]},
            "f_a": {"a": [0.0]},
            "r": 1.0, "sigma": 1.0, "p0": 0.5
        }"#;
        let err = model_from_json(json).unwrap_err();
        assert!(err.to_string().contains("missing action `b`"));
        // Unknown field.
        let json = r#"{"actions": [], "f_P": {}, "f_a": {}, "r": 1, "sigma": 1, "p0": 0.5, "frob": 1}"#;
        assert!(matches!(model_from_json(json), Err(Error::Parse(_))));
    }

    #[test]
    fn csv_headers_and_shape() {
        let spec = fixtures::two_action();
        let strat = crate::model::myopic_regular_strategy(&spec).unwrap();
        let u = crate::model::induced_flow_payoff(&spec, &strat).unwrap();
        let csv = envelope_csv(&u, 11);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "p,u,cav_u");
        assert_eq!(lines.len(), 12);
        assert!(lines[1].starts_with("0.0000000000000000e0,"));
    }

    #[test]
    fn fixtures_write_and_reload() {
        let dir = std::env::temp_dir().join(format!("drip-fixtures-{}", std::process::id()));
        let written = write_fixtures(&dir).unwrap();
        assert_eq!(written.len(), fixtures::all().len());
        for path in &written {
            load_model(path).unwrap();
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
