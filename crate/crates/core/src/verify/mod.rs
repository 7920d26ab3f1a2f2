//! Verification harness: runs the measurement pipeline on a domain (or an
//! amplitude family of domains) and tests each quantitative conclusion as an
//! inequality with an explicit margin and slack.
//!
//! A check passes iff `margin >= -slack`, where `margin = bound - measured`.
//! Checks whose admissible scale is below the sampling resolution report
//! [`Status::Unresolvable`] and never count as passes.

mod checks;
mod scenario;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

pub use checks::{
    ahlfors_measurement, bmo_measurement, check_ahlfors, check_bmo, check_main_lemma, check_reifenberg,
    check_sandwich, check_stability_distance, gradient_measurement, reifenberg_measurement,
    stability_distance, AhlforsMeasurement, GradientMeasurement, ReifenbergMeasurement, StabilityDistance,
};
pub use scenario::{
    run_scenario, self_test_fixtures, Budgets, Measurements, RunBudget, ScenarioSpec, Tamper, Targets,
    SCHEMA_VERSION,
};

/// Registered checks, in report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Ahlfors,
    Bmo,
    MainLemma,
    Reifenberg,
    Sandwich,
    StabilityDistance,
}

impl CheckName {
    pub const ALL: [CheckName; 6] = [
        CheckName::Ahlfors,
        CheckName::Bmo,
        CheckName::MainLemma,
        CheckName::Reifenberg,
        CheckName::Sandwich,
        CheckName::StabilityDistance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Ahlfors => "ahlfors",
            CheckName::Bmo => "bmo",
            CheckName::MainLemma => "main_lemma",
            CheckName::Reifenberg => "reifenberg",
            CheckName::Sandwich => "sandwich",
            CheckName::StabilityDistance => "stability_distance",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The admissible scale is below the sampling resolution.
    Unresolvable,
    /// A pipeline stage failed; see the notes.
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: CheckName,
    pub status: Status,
    pub pass: bool,
    /// Measured quantities on the hypothesis side (ε, K0, coverage).
    pub hypothesis: BTreeMap<String, f64>,
    /// Measured quantities on the conclusion side.
    pub conclusion: BTreeMap<String, f64>,
    pub inequality: String,
    /// `bound - measured` at the binding entry; zero unless the check ran.
    pub margin: f64,
    /// Monte Carlo and discretization allowance at the binding entry.
    pub slack: f64,
    pub notes: Vec<String>,
}

impl CheckResult {
    pub(crate) fn new(name: CheckName, inequality: &str) -> Self {
        CheckResult {
            name,
            status: Status::Error,
            pass: false,
            hypothesis: BTreeMap::new(),
            conclusion: BTreeMap::new(),
            inequality: inequality.to_string(),
            margin: 0.0,
            slack: 0.0,
            notes: Vec::new(),
        }
    }

    pub(crate) fn errored(name: CheckName, inequality: &str, msg: String) -> Self {
        let mut r = CheckResult::new(name, inequality);
        r.notes.push(msg);
        r
    }

    pub(crate) fn unresolvable(mut self, msg: String) -> Self {
        self.status = Status::Unresolvable;
        self.pass = false;
        self.margin = 0.0;
        self.slack = 0.0;
        self.notes.push(msg);
        self
    }

    /// Non-finite values are left out so reports stay valid JSON.
    pub(crate) fn hyp(&mut self, key: &str, v: f64) {
        if v.is_finite() {
            self.hypothesis.insert(key.to_string(), v);
        }
    }

    pub(crate) fn concl(&mut self, key: &str, v: f64) {
        if v.is_finite() {
            self.conclusion.insert(key.to_string(), v);
        }
    }

    /// Sets the verdict from the binding entry of `w`.
    pub(crate) fn decide(&mut self, w: &Worst) {
        match w.entry {
            Some((m, s)) => {
                self.margin = m;
                self.slack = s;
                self.pass = m >= -s;
                self.status = if self.pass { Status::Pass } else { Status::Fail };
            }
            None => {
                self.status = Status::Error;
                self.pass = false;
                self.notes.push("no entry was tested".to_string());
            }
        }
    }
}

/// Tracks the entry with the smallest `margin + slack`.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Worst {
    pub entry: Option<(f64, f64)>,
}

impl Worst {
    /// A NaN margin counts as the most negative finite value.
    pub fn push(&mut self, margin: f64, slack: f64) {
        let margin = if margin.is_nan() { f64::MIN } else { margin };
        if self.entry.is_none_or(|(m, s)| margin + slack < m + s) {
            self.entry = Some((margin, slack));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub seed: u64,
    pub version: String,
}

/// Results for one domain of the scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurements: Option<Measurements>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_error: Option<String>,
    pub checks: Vec<CheckResult>,
}

/// One row of the amplitude trend table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub amplitude: f64,
    pub eps_meas: f64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    /// `4 ε`.
    pub distance_bound: f64,
    pub margins: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub passed: usize,
    pub failed: usize,
    pub unresolvable: usize,
    pub errors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario: ScenarioSpec,
    pub environment: Environment,
    pub members: Vec<MemberReport>,
    pub trend: Vec<TrendRow>,
    pub tally: Tally,
}

impl VerificationReport {
    pub(crate) fn tally_checks(members: &[MemberReport]) -> Tally {
        let mut t = Tally::default();
        for c in members.iter().flat_map(|m| &m.checks) {
            match c.status {
                Status::Pass => t.passed += 1,
                Status::Fail => t.failed += 1,
                Status::Unresolvable => t.unresolvable += 1,
                Status::Error => t.errors += 1,
            }
        }
        t
    }

    /// True when no check failed or errored (unresolvable checks only warn).
    pub fn all_pass(&self) -> bool {
        self.tally.failed == 0 && self.tally.errors == 0
    }

    pub fn check(&self, member: usize, name: CheckName) -> Option<&CheckResult> {
        self.members.get(member)?.checks.iter().find(|c| c.name == name)
    }

    /// Fixed-width margin table, one line per member and check.
    pub fn render_table(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>9}  {:<18}  {:<12}  {:>12}  {:>12}",
            "amplitude", "check", "status", "margin", "slack"
        );
        for m in &self.members {
            if let Some(e) = &m.stage_error {
                let _ = writeln!(s, "{:>9.4}  pipeline error: {}", m.amplitude, e);
            }
            for c in &m.checks {
                let status = match c.status {
                    Status::Pass => "pass",
                    Status::Fail => "FAIL",
                    Status::Unresolvable => "unresolvable",
                    Status::Error => "ERROR",
                };
                let _ = writeln!(
                    s,
                    "{:>9.4}  {:<18}  {:<12}  {:>12.4e}  {:>12.4e}",
                    m.amplitude,
                    c.name.as_str(),
                    status,
                    c.margin,
                    c.slack
                );
            }
        }
        let t = &self.tally;
        let _ = writeln!(
            s,
            "passed {}, failed {}, unresolvable {}, errors {}",
            t.passed, t.failed, t.unresolvable, t.errors
        );
        if t.failed > 0 {
            let _ = writeln!(
                s,
                "failed checks are outside the verified regime at the measured epsilon; they do not refute the implication"
            );
        }
        s
    }
}

#[cfg(test)]
mod tests;
