//! The machine-readable scenario report.

use mms_core::Verdict;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

/// One verified quantity. `anchor` is the stable identifier of the check the
/// row instantiates, shared between tasks that gate on the same inequality.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub anchor: String,
    pub value: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl Check {
    pub fn gate(name: &str, anchor: &str, value: f64, tolerance: f64) -> Self {
        let verdict = if value <= tolerance { Verdict::Pass } else { Verdict::Fail };
        Self { name: name.into(), anchor: anchor.into(), value, tolerance, verdict }
    }

    pub fn with_verdict(name: &str, anchor: &str, value: f64, tolerance: f64, verdict: Verdict) -> Self {
        Self { name: name.into(), anchor: anchor.into(), value, tolerance, verdict }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub tolerances_version: u32,
    pub task: String,
    pub space_label: String,
    pub seed: u64,
    /// Wall-clock stamp; the only field exempt from byte determinism.
    pub timestamp_unix_ms: u128,
    pub checks: Vec<Check>,
    /// Free-form numeric results (W2 value, defects, diagnostics).
    pub values: BTreeMap<String, f64>,
    /// Files written next to the report.
    pub artifacts: Vec<String>,
    pub exit_code: i32,
}

impl Report {
    pub fn new(task: &str, space_label: &str, seed: u64) -> Self {
        Self {
            schema: "mms-report/1",
            tolerances_version: crate::tolerances::TOLERANCES_VERSION,
            task: task.into(),
            space_label: space_label.into(),
            seed,
            timestamp_unix_ms: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            checks: Vec::new(),
            values: BTreeMap::new(),
            artifacts: Vec::new(),
            exit_code: 0,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn value(&mut self, key: &str, v: f64) {
        self.values.insert(key.into(), v);
    }

    /// 0 when every check passed, 2 on any failure, 3 when flag-degraded.
    pub fn finalize_exit_code(&mut self) -> i32 {
        let any_fail = self.checks.iter().any(|c| c.verdict == Verdict::Fail);
        let any_inconclusive = self.checks.iter().any(|c| c.verdict == Verdict::Inconclusive);
        self.exit_code = if any_fail {
            2
        } else if any_inconclusive {
            3
        } else {
            0
        };
        self.exit_code
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(dir.join("report.json"), text)
    }
}
