//! The full analysis pass: validate a trace, run every detector and
//! predictor, and fold the results into one deterministic report.

use crate::detect::detect_all;
use crate::event::{validate_trace, Trace, ValidationReport};
use crate::predict::{predict_all, SelectMode, DEFAULT_CYCLE_BOUND};
use crate::report::Report;
use thiserror::Error;

/// Knobs of [`analyze_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisConfig {
    /// Longest mutex cycle the deadlock predictor searches for.
    pub cycle_bound: usize,
    /// How select candidates count in channel-mutex pairing.
    pub select_mode: SelectMode,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            cycle_bound: DEFAULT_CYCLE_BOUND,
            select_mode: SelectMode::Any,
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("trace is not analyzable:\n{0}")]
    InvalidTrace(ValidationReport),
}

/// Run detectors and predictors over a validated trace.
///
/// The result is deterministic in the trace bytes: findings are sorted and
/// all collections have stable order.
pub fn analyze_trace(trace: &Trace, config: &AnalysisConfig) -> Result<Report, AnalysisError> {
    let validation = validate_trace(trace);
    if !validation.is_ok() {
        return Err(AnalysisError::InvalidTrace(validation));
    }
    let detections = detect_all(trace);
    let (predicted, predict_warnings) = predict_all(trace, config.cycle_bound, config.select_mode);
    let mut findings = detections.findings;
    findings.extend(predicted);
    let mut warnings = detections.warnings;
    warnings.extend(predict_warnings);
    Ok(Report::new(trace.meta.program.clone(), findings, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Gid;
    use crate::model::{ModelBuilder, ModelOp};
    use crate::report::{FindingKind, Provenance};
    use crate::sim::{run, Schedule, DEFAULT_STEP_BOUND};

    #[test]
    fn detected_and_predicted_findings_arrive_in_one_sorted_report() {
        // Receive under a mutex, close behind the same mutex. The blocking
        // schedule yields detected findings *and* predictions from one
        // analysis call.
        let mut b = ModelBuilder::new("mixed");
        let m = b.mutex("m");
        let ch = b.channel("ch", 0);
        let main = b.goroutine("main");
        let closer = b.goroutine("closer");
        b.ops(
            main,
            [
                ModelOp::Spawn(closer),
                ModelOp::Lock(m),
                ModelOp::Recv(ch),
                ModelOp::Unlock(m),
            ],
        );
        b.ops(
            closer,
            [ModelOp::Lock(m), ModelOp::Close(ch), ModelOp::Unlock(m)],
        );
        // Main takes the mutex and parks on the receive; the closer then
        // wedges on the mutex and the close never happens.
        let script = vec![Gid(1), Gid(1), Gid(1), Gid(2)];
        let out = run(
            &b.build().unwrap(),
            &Schedule::Script(script),
            DEFAULT_STEP_BOUND,
        )
        .unwrap();
        assert!(!out.ground_truth.blocked.is_empty(), "this schedule wedges");
        let report = analyze_trace(&out.trace, &AnalysisConfig::default()).unwrap();
        let kinds: Vec<FindingKind> = report.findings.iter().map(|f| f.kind).collect();
        // Detected: the parked receive. Predicted: the mutex still held at
        // main's last event. The closer blocks on a bare mutex, which is
        // not a finding on its own — it surfaces as the never-exited
        // warning.
        assert_eq!(
            kinds,
            vec![FindingKind::BlockedChannelRecv, FindingKind::MissingUnlock]
        );
        assert!(report
            .warnings
            .iter()
            .any(|w| w.code == "goroutine-never-exited"));
        assert!(kinds.windows(2).all(|w| w[0] <= w[1]), "sorted by kind");
        assert_eq!(report.program, "mixed");
        // Every referenced seq resolves: rendering must succeed.
        crate::report::render_text(&report, &out.trace).unwrap();
        crate::report::render_json(&report, &out.trace).unwrap();
    }

    #[test]
    fn an_unblocked_run_of_a_racy_program_still_predicts() {
        let mut b = ModelBuilder::new("quiet-run");
        let ma = b.mutex("a");
        let mb = b.mutex("b");
        let main = b.goroutine("main");
        let g1 = b.goroutine("g1");
        let g2 = b.goroutine("g2");
        b.ops(main, [ModelOp::Spawn(g1), ModelOp::Spawn(g2)]);
        b.ops(
            g1,
            [
                ModelOp::Lock(ma),
                ModelOp::Lock(mb),
                ModelOp::Unlock(mb),
                ModelOp::Unlock(ma),
            ],
        );
        b.ops(
            g2,
            [
                ModelOp::Lock(mb),
                ModelOp::Lock(ma),
                ModelOp::Unlock(ma),
                ModelOp::Unlock(mb),
            ],
        );
        // Serial schedule: g1 runs to completion before g2 starts.
        let script = vec![
            Gid(1),
            Gid(1),
            Gid(2),
            Gid(2),
            Gid(2),
            Gid(2),
            Gid(2),
            Gid(3),
            Gid(3),
            Gid(3),
            Gid(3),
            Gid(3),
            Gid(1),
        ];
        let out = run(
            &b.build().unwrap(),
            &Schedule::Script(script),
            DEFAULT_STEP_BOUND,
        )
        .unwrap();
        assert!(out.ground_truth.blocked.is_empty());
        let report = analyze_trace(&out.trace, &AnalysisConfig::default()).unwrap();
        let kinds: Vec<FindingKind> = report.findings.iter().map(|f| f.kind).collect();
        assert_eq!(kinds, vec![FindingKind::MutexDeadlock]);
        assert_eq!(report.findings[0].provenance, Provenance::Predicted);
    }

    #[test]
    fn corrupt_traces_are_rejected_not_analyzed() {
        let mut b = ModelBuilder::new("tiny");
        let main = b.goroutine("main");
        b.ops(main, []);
        let out = run(
            &b.build().unwrap(),
            &Schedule::RoundRobin,
            DEFAULT_STEP_BOUND,
        )
        .unwrap();
        let mut trace = out.trace;
        trace.events[0].seq = 999; // break seq monotonicity
        let err = analyze_trace(&trace, &AnalysisConfig::default()).unwrap_err();
        assert!(matches!(err, AnalysisError::InvalidTrace(_)));
    }
}
