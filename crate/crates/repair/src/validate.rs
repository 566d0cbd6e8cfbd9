//! Test-based validation of concrete patches.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use treemend_core::corpus::{splice, TEST_FUEL};
use treemend_core::lang::{check_program, interpret, parse_program, LineSpan, TestCase, TestOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    PlausibleFull,
    PlausiblePartial,
    Implausible,
    InvalidTree,
    ReconstructionFailed,
    Timeout,
}

impl Outcome {
    pub fn is_plausible(self) -> bool {
        matches!(self, Outcome::PlausibleFull | Outcome::PlausiblePartial)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchVerdict {
    /// Position in the candidate list.
    pub candidate: usize,
    pub outcome: Outcome,
    pub tests: Vec<TestOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    /// Interpreter step budget per test.
    pub fuel: u64,
    /// Wall-clock budget per candidate.
    pub timeout: Duration,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            fuel: TEST_FUEL,
            timeout: Duration::from_secs(5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationLog {
    pub verdicts: Vec<PatchVerdict>,
    /// Index into `verdicts` of the first plausible patch.
    pub plausible: Option<usize>,
}

/// Classify test outcomes. Without originally failing tests a partial
/// verdict is impossible; without any tests nothing is plausible.
pub fn classify(tests: &[TestCase], outcomes: &[TestOutcome]) -> Outcome {
    if tests.is_empty() {
        return Outcome::Implausible;
    }
    let complete = outcomes.len() == tests.len();
    if complete && outcomes.iter().all(TestOutcome::passed) {
        return Outcome::PlausibleFull;
    }
    let pairs = || tests.iter().zip(outcomes);
    let old_ok = pairs().filter(|(t, _)| t.originally_passing).all(|(_, o)| o.passed());
    let new_ok = pairs().any(|(t, o)| !t.originally_passing && o.passed());
    if complete && old_ok && new_ok {
        return Outcome::PlausiblePartial;
    }
    if outcomes.iter().any(|o| matches!(o, TestOutcome::Timeout)) {
        return Outcome::Timeout;
    }
    Outcome::Implausible
}

/// Validate one patch replacing `span` of `source`.
pub fn validate_one(source: &str, span: LineSpan, patch: &str, tests: &[TestCase], opts: &ValidateOptions) -> PatchVerdict {
    let start = Instant::now();
    let verdict = |outcome, tests, detail| PatchVerdict { candidate: 0, outcome, tests, detail };
    let program = match parse_program(&splice(source, span, patch)) {
        Ok(p) => p,
        Err(e) => return verdict(Outcome::InvalidTree, Vec::new(), Some(e.to_string())),
    };
    if let Err(e) = check_program(&program) {
        return verdict(Outcome::InvalidTree, Vec::new(), Some(e.to_string()));
    }
    let mut outcomes = Vec::with_capacity(tests.len());
    for t in tests {
        if start.elapsed() > opts.timeout {
            return verdict(Outcome::Timeout, outcomes, Some("candidate time budget exhausted".into()));
        }
        outcomes.push(interpret(&program, t, opts.fuel));
    }
    verdict(classify(tests, &outcomes), outcomes, None)
}

/// Validate candidates in order and stop at the first plausible one.
pub fn validate(source: &str, span: LineSpan, candidates: &[String], tests: &[TestCase], opts: &ValidateOptions) -> ValidationLog {
    let mut log = ValidationLog { verdicts: Vec::new(), plausible: None };
    for (i, c) in candidates.iter().enumerate() {
        let mut v = validate_one(source, span, c, tests, opts);
        v.candidate = i;
        let hit = v.outcome.is_plausible();
        log.verdicts.push(v);
        if hit {
            log.plausible = Some(log.verdicts.len() - 1);
            break;
        }
    }
    log
}
