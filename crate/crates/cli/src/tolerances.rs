//! The versioned tolerance table.
//!
//! Every gate the runner applies reads its threshold from here, so a report
//! is reproducible from (config, seed) alone. Individual entries can be
//! overridden with `--tol-overrides key=value`.

use std::collections::BTreeMap;

pub const TOLERANCES_VERSION: u32 = 1;

/// `(key, default)` pairs; keys are namespaced by task or subsystem.
pub const DEFAULTS: &[(&str, f64)] = &[
    ("transport.duality_gap", 1e-9),
    ("transport.marginal", 1e-10),
    ("transport.support_slack", 1e-9),
    ("ctransform.idempotence", 1e-12),
    ("entropy.defect_abs", f64::NAN), // NAN = use the 3 h diam rule
    ("hilbert.defect", 1e-2),
    ("laplace.relative_excess", 0.1),
    ("laplace.linear_interior", 1e-10),
    ("laplace.annulus_min_cells", 3.0),
    ("laplace.annulus_max", 0.8),
    ("heat.mass", 1e-9),
    ("heat.semigroup", 1e-8),
    ("heat.kernel_mass", 1e-9),
    ("be.tol_cells", 5.0), // times h (1 + max slope)
    ("bg.tol", 0.10),
    ("line.tol", 1e-9),
    ("split.gap", 1e-9),
    ("split.slack", 1e-9),
    ("split.lattice_factor", 10.0), // times h for first-order flow checks
    ("split.max_flagged", 0.2),
    ("split.pythagoras_rel", 0.05),
    ("split.samples", 400.0),
];

#[derive(Clone, Debug)]
pub struct Tolerances {
    values: BTreeMap<String, f64>,
}

impl Tolerances {
    pub fn with_overrides(overrides: &[(String, f64)]) -> Result<Self, String> {
        let mut values: BTreeMap<String, f64> =
            DEFAULTS.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (k, v) in overrides {
            if !values.contains_key(k) {
                return Err(format!(
                    "unknown tolerance key '{k}'; known keys: {}",
                    values.keys().cloned().collect::<Vec<_>>().join(", ")
                ));
            }
            values.insert(k.clone(), *v);
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> f64 {
        *self.values.get(key).unwrap_or_else(|| panic!("missing tolerance key {key}"))
    }

}

pub fn parse_overrides(list: &[String]) -> Result<Vec<(String, f64)>, String> {
    list.iter()
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| format!("override '{item}' is not key=value"))?;
            let value: f64 =
                v.parse().map_err(|e| format!("override '{item}': bad number: {e}"))?;
            Ok((k.trim().to_string(), value))
        })
        .collect()
}
