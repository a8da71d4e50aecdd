//! Findings, warnings and deterministic report rendering.
//!
//! Detectors and predictors both produce [`BugFinding`] values; this module
//! owns the shared shape, the canonical ordering, and the two output
//! formats. JSON output is a lossless serialization of the [`Report`]
//! struct; text output is a human-oriented view that prints, for every
//! goroutine involved in a finding, its synchronization sequence from the
//! trace with the blocking and causing events marked.
//!
//! Every event reference inside a finding must resolve against the trace it
//! is rendered with; a reference to a missing sequence number is a
//! [`ReportError::DanglingEventRef`], never silently dropped output.

use crate::event::{Aux, Event, Gid, ObjectId, Trace};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use thiserror::Error;

/// Schema version stamped into JSON reports.
pub const REPORT_SCHEMA_VERSION: &str = "1";

/// What category of bug a finding describes.
///
/// Declaration order is the report order: findings of the same kind are
/// then ordered by their first blocking event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    /// A send was still pending when the trace ended.
    BlockedChannelSend,
    /// A receive was still pending when the trace ended.
    BlockedChannelRecv,
    /// A select with no ready case was still pending.
    BlockedSelect,
    /// A waitgroup wait outlived the trace with a nonzero counter.
    BlockedWaitGroup,
    /// A condition wait with no later signal or broadcast.
    BlockedCond,
    /// Goroutines wait on a context whose cancel never ran.
    UncanceledContext,
    /// A created goroutine neither exited nor could make progress.
    GoroutineLeak,
    /// The trace records a runtime panic pattern (e.g. a waitgroup counter
    /// driven negative).
    Fault,
    /// A cyclic mutex wait: each goroutine holds what the next one wants.
    MutexDeadlock,
    /// A goroutine re-acquires a lock it already holds.
    DoubleLock,
    /// A nested read-lock that wedges as soon as a writer queues between
    /// the two read acquisitions.
    DoubleRLock,
    /// A lock still held at the end of its goroutine's events.
    MissingUnlock,
    /// A channel operation that can never complete because the peer that
    /// would complete it needs a mutex the blocked side holds (or released
    /// too late to matter).
    ChannelMutexDeadlock,
}

impl FindingKind {
    pub fn name(self) -> &'static str {
        match self {
            FindingKind::BlockedChannelSend => "blocked-channel-send",
            FindingKind::BlockedChannelRecv => "blocked-channel-recv",
            FindingKind::BlockedSelect => "blocked-select",
            FindingKind::BlockedWaitGroup => "blocked-waitgroup",
            FindingKind::BlockedCond => "blocked-cond",
            FindingKind::UncanceledContext => "uncanceled-context",
            FindingKind::GoroutineLeak => "goroutine-leak",
            FindingKind::Fault => "fault",
            FindingKind::MutexDeadlock => "mutex-deadlock",
            FindingKind::DoubleLock => "double-lock",
            FindingKind::DoubleRLock => "double-rlock",
            FindingKind::MissingUnlock => "missing-unlock",
            FindingKind::ChannelMutexDeadlock => "channel-mutex-deadlock",
        }
    }

    pub fn from_name(name: &str) -> Option<FindingKind> {
        ALL_FINDING_KINDS.iter().copied().find(|k| k.name() == name)
    }
}

/// Every finding kind, in report order.
pub const ALL_FINDING_KINDS: [FindingKind; 13] = [
    FindingKind::BlockedChannelSend,
    FindingKind::BlockedChannelRecv,
    FindingKind::BlockedSelect,
    FindingKind::BlockedWaitGroup,
    FindingKind::BlockedCond,
    FindingKind::UncanceledContext,
    FindingKind::GoroutineLeak,
    FindingKind::Fault,
    FindingKind::MutexDeadlock,
    FindingKind::DoubleLock,
    FindingKind::DoubleRLock,
    FindingKind::MissingUnlock,
    FindingKind::ChannelMutexDeadlock,
];

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether the bug was observed in the trace or inferred from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// The trace itself ends with the operation stuck.
    Detected,
    /// The trace completed (or blocked elsewhere), but its lock and channel
    /// usage admits a schedule with this bug.
    Predicted,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Detected => "detected",
            Provenance::Predicted => "predicted",
        })
    }
}

/// One reported bug.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugFinding {
    pub kind: FindingKind,
    pub provenance: Provenance,
    /// Goroutines involved, most-blocked first.
    pub goroutines: Vec<Gid>,
    /// Sequence numbers of the events that are (or would be) stuck.
    pub blocked_at: Vec<u64>,
    /// Sequence numbers of the events that explain the blockage.
    pub caused_by: Vec<u64>,
    /// Synchronization objects involved.
    pub objects: Vec<ObjectId>,
    /// For channel-involved deadlocks: the mutex both sides need.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_mutex: Option<ObjectId>,
    /// One-sentence human explanation.
    pub detail: String,
}

impl BugFinding {
    /// Canonical sort key: kind first, then the earliest blocking event.
    fn sort_key(&self) -> (FindingKind, u64, &[Gid], &[ObjectId], &[u64], &str) {
        (
            self.kind,
            self.blocked_at.first().copied().unwrap_or(u64::MAX),
            &self.goroutines,
            &self.objects,
            &self.caused_by,
            &self.detail,
        )
    }
}

/// Put findings into canonical report order.
pub fn sort_findings(findings: &mut [BugFinding]) {
    findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// A non-finding worth telling the user about (for example a nested
/// read-lock that is only dangerous once a writer shows up).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    /// Stable machine-readable code.
    pub code: String,
    pub goroutines: Vec<Gid>,
    /// Referenced event sequence numbers.
    pub events: Vec<u64>,
    pub message: String,
}

/// The full analysis result for one trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub program: String,
    pub findings: Vec<BugFinding>,
    pub warnings: Vec<Warning>,
}

impl Report {
    pub fn new(
        program: impl Into<String>,
        findings: Vec<BugFinding>,
        warnings: Vec<Warning>,
    ) -> Report {
        let mut findings = findings;
        sort_findings(&mut findings);
        Report {
            schema_version: REPORT_SCHEMA_VERSION.to_string(),
            program: program.into(),
            findings,
            warnings,
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("finding references event seq {seq}, which is not in the trace")]
    DanglingEventRef { seq: u64 },
    #[error("report serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// Render as pretty JSON. Parsing the output with [`parse_json`] gives the
/// identical [`Report`] back.
pub fn render_json(report: &Report, trace: &Trace) -> Result<String, ReportError> {
    check_refs(report, trace)?;
    let mut out = serde_json::to_string_pretty(report)?;
    out.push('\n');
    Ok(out)
}

/// Parse a JSON report produced by [`render_json`].
pub fn parse_json(json: &str) -> Result<Report, ReportError> {
    Ok(serde_json::from_str(json)?)
}

/// Render the human-oriented text report.
pub fn render_text(report: &Report, trace: &Trace) -> Result<String, ReportError> {
    check_refs(report, trace)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "program {}: {} finding(s), {} warning(s)",
        report.program,
        report.findings.len(),
        report.warnings.len()
    );
    for (i, finding) in report.findings.iter().enumerate() {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "finding {}: {} ({})",
            i + 1,
            finding.kind,
            finding.provenance
        );
        let _ = writeln!(out, "  {}", finding.detail);
        if !finding.goroutines.is_empty() {
            let names: Vec<String> = finding.goroutines.iter().map(|g| g.to_string()).collect();
            let _ = writeln!(out, "  goroutines: {}", names.join(", "));
        }
        if !finding.objects.is_empty() {
            let names: Vec<String> = finding.objects.iter().map(|o| o.to_string()).collect();
            let _ = writeln!(out, "  objects: {}", names.join(", "));
        }
        if let Some(m) = finding.witness_mutex {
            let _ = writeln!(out, "  witness mutex: {m}");
        }
        // Per-goroutine synchronization sequences with the referenced
        // events marked.
        let blocked: BTreeSet<u64> = finding.blocked_at.iter().copied().collect();
        let caused: BTreeSet<u64> = finding.caused_by.iter().copied().collect();
        for gid in &finding.goroutines {
            let _ = writeln!(out, "  {gid}:");
            for ev in trace.events.iter().filter(|e| e.gid == *gid) {
                let marker = match (blocked.contains(&ev.seq), caused.contains(&ev.seq)) {
                    (true, _) => " <- blocked here",
                    (_, true) => " <- causes the block",
                    _ => "",
                };
                let _ = writeln!(out, "    {}{}", describe_event(ev), marker);
            }
        }
        // References to events of non-involved goroutines still get shown.
        let shown: BTreeSet<Gid> = finding.goroutines.iter().copied().collect();
        for seq in finding.blocked_at.iter().chain(&finding.caused_by) {
            let ev = trace.event_by_seq(*seq).expect("checked above");
            if !shown.contains(&ev.gid) {
                let _ = writeln!(out, "  see also: {}", describe_event(ev));
            }
        }
    }
    for warning in &report.warnings {
        let _ = writeln!(out);
        let _ = writeln!(out, "warning [{}]: {}", warning.code, warning.message);
        for seq in &warning.events {
            if let Some(ev) = trace.event_by_seq(*seq) {
                let _ = writeln!(out, "    {}", describe_event(ev));
            }
        }
    }
    Ok(out)
}

/// One-line rendering of an event for text reports.
pub fn describe_event(ev: &Event) -> String {
    let mut s = format!(
        "seq {:>4}  {} {} {}",
        ev.seq,
        ev.gid,
        ev.kind.name(),
        ev.phase
    );
    if let Some(obj) = ev.obj {
        let _ = write!(s, " obj={obj}");
    }
    match &ev.aux {
        Aux::None => {}
        Aux::Child { gid } => {
            let _ = write!(s, " child={gid}");
        }
        Aux::Capacity { cap } => {
            let _ = write!(s, " cap={cap}");
        }
        Aux::Block { block } => {
            let _ = write!(s, " block={block}");
        }
        Aux::Delta { delta } => {
            let _ = write!(s, " delta={delta}");
        }
        Aux::Done { chan } => {
            let _ = write!(s, " done={chan}");
        }
        Aux::Select {
            candidates,
            has_default,
        } => {
            let cases: Vec<String> = candidates
                .iter()
                .map(|c| format!("{}:{}", c.chan, c.dir.code()))
                .collect();
            let _ = write!(s, " cases=[{}] default={has_default}", cases.join(" "));
        }
    }
    s
}

fn check_refs(report: &Report, trace: &Trace) -> Result<(), ReportError> {
    for finding in &report.findings {
        for seq in finding.blocked_at.iter().chain(&finding.caused_by) {
            if trace.event_by_seq(*seq).is_none() {
                return Err(ReportError::DanglingEventRef { seq: *seq });
            }
        }
    }
    for warning in &report.warnings {
        for seq in &warning.events {
            if trace.event_by_seq(*seq).is_none() {
                return Err(ReportError::DanglingEventRef { seq: *seq });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Phase, SemanticKind, TraceMeta};

    fn sample_trace() -> Trace {
        let g1 = Gid(1);
        let g2 = Gid(2);
        let m = ObjectId(1);
        let events = vec![
            Event::new(
                1,
                1,
                g1,
                SemanticKind::MainStart,
                Phase::Atomic,
                None,
                Aux::None,
            ),
            Event::new(
                2,
                2,
                g1,
                SemanticKind::GCreate,
                Phase::Atomic,
                Some(ObjectId(9)),
                Aux::Child { gid: g2 },
            ),
            Event::new(
                3,
                3,
                g2,
                SemanticKind::MutexLock,
                Phase::Begin,
                Some(m),
                Aux::None,
            ),
            Event::new(
                4,
                3,
                g2,
                SemanticKind::MutexLock,
                Phase::End,
                Some(m),
                Aux::None,
            ),
            Event::new(
                5,
                4,
                g1,
                SemanticKind::MutexLock,
                Phase::Begin,
                Some(m),
                Aux::None,
            ),
        ];
        Trace::new(TraceMeta::new("sample"), events)
    }

    fn sample_finding() -> BugFinding {
        BugFinding {
            kind: FindingKind::MissingUnlock,
            provenance: Provenance::Predicted,
            goroutines: vec![Gid(2)],
            blocked_at: vec![5],
            caused_by: vec![3],
            objects: vec![ObjectId(1)],
            witness_mutex: None,
            detail: "mutex 0x1 is still held when g2's events end".to_string(),
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let trace = sample_trace();
        let report = Report::new(
            "sample",
            vec![sample_finding()],
            vec![Warning {
                code: "double-rlock-no-writer".to_string(),
                goroutines: vec![Gid(2)],
                events: vec![3],
                message: "nested read-lock is safe only while no writer contends".to_string(),
            }],
        );
        let json = render_json(&report, &trace).unwrap();
        let parsed = parse_json(&json).unwrap();
        assert_eq!(parsed, report);
        // Rendering the parsed report again gives identical bytes.
        assert_eq!(render_json(&parsed, &trace).unwrap(), json);
    }

    #[test]
    fn dangling_event_reference_is_an_error() {
        let trace = sample_trace();
        let mut finding = sample_finding();
        finding.caused_by = vec![999];
        let report = Report::new("sample", vec![finding], vec![]);
        let err = render_json(&report, &trace).unwrap_err();
        assert!(matches!(err, ReportError::DanglingEventRef { seq: 999 }));
        let err = render_text(&report, &trace).unwrap_err();
        assert!(matches!(err, ReportError::DanglingEventRef { seq: 999 }));
    }

    #[test]
    fn text_report_marks_blocking_and_causing_events() {
        let trace = sample_trace();
        let mut finding = sample_finding();
        finding.goroutines = vec![Gid(1), Gid(2)];
        let report = Report::new("sample", vec![finding], vec![]);
        let text = render_text(&report, &trace).unwrap();
        assert!(
            text.contains("finding 1: missing-unlock (predicted)"),
            "{text}"
        );
        let blocked_line = text
            .lines()
            .find(|l| l.contains("<- blocked here"))
            .expect("has a blocked marker");
        assert!(blocked_line.contains("seq    5"), "{blocked_line}");
        let caused_line = text
            .lines()
            .find(|l| l.contains("<- causes the block"))
            .expect("has a cause marker");
        assert!(caused_line.contains("seq    3"), "{caused_line}");
    }

    #[test]
    fn findings_sort_by_kind_then_first_blocked_event() {
        let mk = |kind, seq| BugFinding {
            kind,
            provenance: Provenance::Detected,
            goroutines: vec![],
            blocked_at: vec![seq],
            caused_by: vec![],
            objects: vec![],
            witness_mutex: None,
            detail: String::new(),
        };
        let mut findings = vec![
            mk(FindingKind::GoroutineLeak, 2),
            mk(FindingKind::BlockedChannelRecv, 9),
            mk(FindingKind::BlockedChannelRecv, 3),
            mk(FindingKind::BlockedChannelSend, 5),
        ];
        sort_findings(&mut findings);
        let order: Vec<(FindingKind, u64)> =
            findings.iter().map(|f| (f.kind, f.blocked_at[0])).collect();
        assert_eq!(
            order,
            vec![
                (FindingKind::BlockedChannelSend, 5),
                (FindingKind::BlockedChannelRecv, 3),
                (FindingKind::BlockedChannelRecv, 9),
                (FindingKind::GoroutineLeak, 2),
            ]
        );
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in ALL_FINDING_KINDS {
            assert_eq!(FindingKind::from_name(kind.name()), Some(kind));
        }
        assert_eq!(FindingKind::from_name("no-such-kind"), None);
    }
}
