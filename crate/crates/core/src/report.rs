//! Theorem-validation reports over batches of episode estimates.
//!
//! The lower-bound player's mean return must reach V_lb at the initial
//! belief against every adversary; every probe strategy's mean against the
//! upper-bound player must stay below V_ub; cross-play must land between the
//! bounds. All inequalities carry a margin of four standard errors plus the
//! truncation bound plus a fixed numerical slack.

use serde::{Deserialize, Serialize};

use crate::agents::{Ag1Kind, Ag2Kind, Profile};
use crate::arena::ReturnEstimate;

/// Fixed numerical slack added to every margin.
pub const REPORT_SLACK: f64 = 1e-4;

/// What a batch of episodes was measuring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckKind {
    /// Lower-bound player vs a named adversary: mean >= V_lb - margin.
    LowerVsAdversary(String),
    /// A named probe strategy vs the upper-bound player: mean <= V_ub + margin.
    ProbeVsUpper(String),
    /// Lower-bound player vs upper-bound player: mean within both bounds.
    CrossPlay,
    /// No theorem applies (e.g. two heuristics); recorded but not checked.
    Unchecked(String),
}

impl CheckKind {
    pub fn of_profile(profile: &Profile) -> CheckKind {
        match (&profile.ag1, &profile.ag2) {
            (Ag1Kind::LowerBound, Ag2Kind::UpperBound) => CheckKind::CrossPlay,
            (Ag1Kind::LowerBound, _) => CheckKind::LowerVsAdversary(profile.name()),
            (_, Ag2Kind::UpperBound) => CheckKind::ProbeVsUpper(profile.name()),
            _ => CheckKind::Unchecked(profile.name()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// The measured side of the inequality (the mean return).
    pub lhs: f64,
    /// The bound it is compared against, before the margin is applied.
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub epsilon: f64,
    pub lb_init: f64,
    pub ub_init: f64,
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

/// Builds the pass/fail report for a set of tagged estimates against the
/// bound values at the initial belief.
pub fn bound_report(
    lb_init: f64,
    ub_init: f64,
    estimates: &[(CheckKind, ReturnEstimate)],
    epsilon: f64,
) -> BoundReport {
    let mut checks = Vec::new();
    for (kind, est) in estimates {
        let margin = 4.0 * est.std_error + est.truncation_bound + REPORT_SLACK;
        match kind {
            CheckKind::LowerVsAdversary(name) => {
                checks.push(CheckResult {
                    name: format!("{name}: mean >= V_lb - margin"),
                    lhs: est.mean,
                    rhs: lb_init,
                    margin,
                    pass: est.mean >= lb_init - margin,
                });
            }
            CheckKind::ProbeVsUpper(name) => {
                checks.push(CheckResult {
                    name: format!("{name}: mean <= V_ub + margin"),
                    lhs: est.mean,
                    rhs: ub_init,
                    margin,
                    pass: est.mean <= ub_init + margin,
                });
            }
            CheckKind::CrossPlay => {
                checks.push(CheckResult {
                    name: "lb-vs-ub: mean >= V_lb - margin".into(),
                    lhs: est.mean,
                    rhs: lb_init,
                    margin,
                    pass: est.mean >= lb_init - margin,
                });
                checks.push(CheckResult {
                    name: "lb-vs-ub: mean <= V_ub + margin".into(),
                    lhs: est.mean,
                    rhs: ub_init,
                    margin,
                    pass: est.mean <= ub_init + margin,
                });
            }
            CheckKind::Unchecked(name) => {
                checks.push(CheckResult {
                    name: format!("{name}: recorded only"),
                    lhs: est.mean,
                    rhs: f64::NAN,
                    margin,
                    pass: true,
                });
            }
        }
    }
    let all_pass = checks.iter().all(|c| c.pass);
    BoundReport {
        epsilon,
        lb_init,
        ub_init,
        checks,
        all_pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(mean: f64, se: f64) -> ReturnEstimate {
        ReturnEstimate {
            mean,
            std_error: se,
            episodes: 2000,
            truncation_bound: 0.01,
        }
    }

    #[test]
    fn lower_check_passes_within_margin() {
        let report = bound_report(
            2.0,
            2.0,
            &[(CheckKind::LowerVsAdversary("lb-vs-uniform".into()), est(1.999, 0.001))],
            0.01,
        );
        assert!(report.all_pass);
    }

    #[test]
    fn lower_check_fails_beyond_margin() {
        let report = bound_report(
            2.0,
            2.0,
            &[(CheckKind::LowerVsAdversary("lb-vs-uniform".into()), est(1.5, 0.001))],
            0.01,
        );
        assert!(!report.all_pass);
        assert!(!report.checks[0].pass);
    }

    #[test]
    fn cross_play_emits_two_checks() {
        let report = bound_report(
            -0.02,
            0.02,
            &[(CheckKind::CrossPlay, est(0.0, 0.001))],
            0.01,
        );
        assert_eq!(report.checks.len(), 2);
        assert!(report.all_pass);
    }

    #[test]
    fn sabotaged_probe_still_below_upper_bound() {
        // A deliberately bad agent-1 strategy cannot exceed V_ub: the check
        // direction holds for any probe mean below the bound plus margin.
        let report = bound_report(
            -0.02,
            0.02,
            &[(CheckKind::ProbeVsUpper("uniform-vs-ub".into()), est(-0.8, 0.01))],
            0.01,
        );
        assert!(report.all_pass);
    }

    #[test]
    fn kind_of_profile() {
        assert_eq!(
            CheckKind::of_profile(&Profile::parse("lb-vs-ub").unwrap()),
            CheckKind::CrossPlay
        );
        assert!(matches!(
            CheckKind::of_profile(&Profile::parse("lb-vs-flee").unwrap()),
            CheckKind::LowerVsAdversary(_)
        ));
        assert!(matches!(
            CheckKind::of_profile(&Profile::parse("chase-vs-ub").unwrap()),
            CheckKind::ProbeVsUpper(_)
        ));
        assert!(matches!(
            CheckKind::of_profile(&Profile::parse("uniform-vs-flee").unwrap()),
            CheckKind::Unchecked(_)
        ));
    }
}
