//! Trace vocabulary: semantic event kinds, phases, events, and traces.
//!
//! A trace is a totally ordered sequence of synchronization events observed
//! from a goroutine-style program. Operations that can block (channel
//! send/receive, select, waitgroup wait, condition wait, lock acquisition)
//! appear as Begin/End pairs; a Begin with no matching End by the end of the
//! trace means the goroutine was still blocked there. Everything else is a
//! single Atomic event.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Goroutine identity, unique within one trace.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Gid(pub u64);

impl fmt::Display for Gid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

/// Identity of a synchronization object (mutex, channel, waitgroup, ...),
/// unique within one trace. Rendered in hexadecimal, like an address.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ObjectId(pub u64);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

/// The semantic meaning of a traced runtime operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SemanticKind {
    /// A goroutine creates another goroutine.
    GCreate,
    /// A goroutine exits.
    GExit,
    /// The program entry goroutine starts running.
    MainStart,
    /// A heap object is allocated.
    ObjCreate,
    /// Mutex acquisition.
    MutexLock,
    /// Mutex release.
    MutexUnlock,
    /// Reader-writer mutex: shared (read) acquisition.
    RWMutexRLock,
    /// Reader-writer mutex: shared (read) release.
    RWMutexRUnlock,
    /// Reader-writer mutex: exclusive (write) acquisition.
    RWMutexLock,
    /// Reader-writer mutex: exclusive (write) release.
    RWMutexUnlock,
    /// Channel allocation; `aux` carries the buffer capacity.
    ChanCreate,
    /// Channel send; `aux` carries the blocking flag.
    ChanSend,
    /// Channel receive; `aux` carries the blocking flag.
    ChanRecv,
    /// Channel close.
    ChanClose,
    /// Select over several channel cases; `aux` carries the candidates.
    Select,
    /// WaitGroup counter update; `aux` carries the signed delta.
    WGAdd,
    /// WaitGroup wait.
    WGWait,
    /// Cancelable context creation; `aux` carries the done-channel id.
    CtxCreate,
    /// Context cancellation (closes the context's done channel).
    CtxCancel,
    /// Condition variable wait (releases, blocks, reacquires the mutex).
    CondWait,
    /// Condition variable signal (wakes at most one waiter).
    CondSignal,
    /// Condition variable broadcast (wakes all waiters).
    CondBroadcast,
}

/// Every kind, in declaration order. Handy for table checks and fuzzing.
pub const ALL_KINDS: [SemanticKind; 22] = [
    SemanticKind::GCreate,
    SemanticKind::GExit,
    SemanticKind::MainStart,
    SemanticKind::ObjCreate,
    SemanticKind::MutexLock,
    SemanticKind::MutexUnlock,
    SemanticKind::RWMutexRLock,
    SemanticKind::RWMutexRUnlock,
    SemanticKind::RWMutexLock,
    SemanticKind::RWMutexUnlock,
    SemanticKind::ChanCreate,
    SemanticKind::ChanSend,
    SemanticKind::ChanRecv,
    SemanticKind::ChanClose,
    SemanticKind::Select,
    SemanticKind::WGAdd,
    SemanticKind::WGWait,
    SemanticKind::CtxCreate,
    SemanticKind::CtxCancel,
    SemanticKind::CondWait,
    SemanticKind::CondSignal,
    SemanticKind::CondBroadcast,
];

impl SemanticKind {
    /// Canonical name used in trace files and semantic tables.
    pub fn name(self) -> &'static str {
        match self {
            SemanticKind::GCreate => "GCreate",
            SemanticKind::GExit => "GExit",
            SemanticKind::MainStart => "MainStart",
            SemanticKind::ObjCreate => "ObjCreate",
            SemanticKind::MutexLock => "MutexLock",
            SemanticKind::MutexUnlock => "MutexUnlock",
            SemanticKind::RWMutexRLock => "RWMutexRLock",
            SemanticKind::RWMutexRUnlock => "RWMutexRUnlock",
            SemanticKind::RWMutexLock => "RWMutexLock",
            SemanticKind::RWMutexUnlock => "RWMutexUnlock",
            SemanticKind::ChanCreate => "ChanCreate",
            SemanticKind::ChanSend => "ChanSend",
            SemanticKind::ChanRecv => "ChanRecv",
            SemanticKind::ChanClose => "ChanClose",
            SemanticKind::Select => "Select",
            SemanticKind::WGAdd => "WGAdd",
            SemanticKind::WGWait => "WGWait",
            SemanticKind::CtxCreate => "CtxCreate",
            SemanticKind::CtxCancel => "CtxCancel",
            SemanticKind::CondWait => "CondWait",
            SemanticKind::CondSignal => "CondSignal",
            SemanticKind::CondBroadcast => "CondBroadcast",
        }
    }

    /// Parse a canonical kind name.
    pub fn from_name(name: &str) -> Option<SemanticKind> {
        ALL_KINDS.iter().copied().find(|k| k.name() == name)
    }

    /// Kinds that may block, and therefore appear as Begin/End pairs.
    pub fn can_block(self) -> bool {
        matches!(
            self,
            SemanticKind::ChanSend
                | SemanticKind::ChanRecv
                | SemanticKind::Select
                | SemanticKind::WGWait
                | SemanticKind::CondWait
                | SemanticKind::MutexLock
                | SemanticKind::RWMutexRLock
                | SemanticKind::RWMutexLock
        )
    }

    /// Whether events of this kind must carry an object id. Only the
    /// program-level kinds (`MainStart`, `GExit`) and `Select` — whose
    /// channels live in the candidate list — go without one.
    pub fn requires_obj(self) -> bool {
        !matches!(
            self,
            SemanticKind::MainStart | SemanticKind::GExit | SemanticKind::Select
        )
    }
}

impl fmt::Display for SemanticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Position of an event relative to its operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// The operation was issued and may block.
    Begin,
    /// The operation completed.
    End,
    /// The operation is instantaneous; a single event represents it.
    Atomic,
}

impl Phase {
    /// One-letter code used in trace files.
    pub fn code(self) -> char {
        match self {
            Phase::Begin => 'B',
            Phase::End => 'E',
            Phase::Atomic => 'A',
        }
    }

    pub fn from_code(c: char) -> Option<Phase> {
        match c {
            'B' => Some(Phase::Begin),
            'E' => Some(Phase::End),
            'A' => Some(Phase::Atomic),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Direction of a select candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Send,
    Recv,
}

impl Direction {
    /// One-letter code used in trace files and reports.
    pub fn code(self) -> char {
        match self {
            Direction::Send => 's',
            Direction::Recv => 'r',
        }
    }
}

/// One channel case of a select.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SelectCandidate {
    pub chan: ObjectId,
    pub dir: Direction,
}

/// Kind-specific event payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aux {
    /// No payload.
    #[default]
    None,
    /// `GCreate`: identity of the spawned goroutine.
    Child { gid: Gid },
    /// `ChanCreate`: buffer capacity (0 means unbuffered).
    Capacity { cap: u64 },
    /// `ChanSend`/`ChanRecv`: whether the op blocks until it completes.
    Block { block: bool },
    /// `Select`: candidate cases plus whether a default case exists.
    Select {
        candidates: Vec<SelectCandidate>,
        has_default: bool,
    },
    /// `WGAdd`: signed counter delta.
    Delta { delta: i64 },
    /// `CtxCreate`: id of the channel closed when the context is canceled.
    Done { chan: ObjectId },
}

/// One frame of a call context, leaf first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Frame {
    pub function: String,
    pub file: String,
    pub line: u32,
}

impl Frame {
    pub fn new(function: impl Into<String>, file: impl Into<String>, line: u32) -> Frame {
        Frame {
            function: function.into(),
            file: file.into(),
            line,
        }
    }
}

/// Call context of an event: innermost frame first. May be empty.
pub type CallContext = Vec<Frame>;

/// One observed synchronization event.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    /// Global sequence number: strictly increasing over the whole trace.
    pub seq: u64,
    /// Logical timestamp, nondecreasing per goroutine. Events emitted by
    /// one indivisible runtime action may share a timestamp.
    pub ts: u64,
    /// Goroutine that produced the event.
    pub gid: Gid,
    pub kind: SemanticKind,
    pub phase: Phase,
    /// Object operated on; absent for `MainStart`, `GExit` and `Select`.
    pub obj: Option<ObjectId>,
    pub aux: Aux,
    pub ctx: CallContext,
}

impl Event {
    /// Shorthand for a context-free event.
    pub fn new(
        seq: u64,
        ts: u64,
        gid: Gid,
        kind: SemanticKind,
        phase: Phase,
        obj: Option<ObjectId>,
        aux: Aux,
    ) -> Event {
        Event {
            seq,
            ts,
            gid,
            kind,
            phase,
            obj,
            aux,
            ctx: Vec::new(),
        }
    }
}

/// Trace-level metadata carried in the file header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TraceMeta {
    /// Name of the traced program.
    pub program: String,
    /// Version of the trace format itself.
    pub schema_version: String,
    /// Runtime version the semantic table was built for, when known.
    pub go_version: Option<String>,
}

impl TraceMeta {
    pub fn new(program: impl Into<String>) -> TraceMeta {
        TraceMeta {
            program: program.into(),
            schema_version: SCHEMA_VERSION.to_string(),
            go_version: None,
        }
    }
}

/// Current trace schema version.
pub const SCHEMA_VERSION: &str = "1";

/// A full trace: header metadata plus events in seq order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Trace {
    pub meta: TraceMeta,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn new(meta: TraceMeta, events: Vec<Event>) -> Trace {
        Trace { meta, events }
    }

    /// Look up an event by its sequence number.
    pub fn event_by_seq(&self, seq: u64) -> Option<&Event> {
        // Events are sorted by seq, so a binary search suffices.
        self.events
            .binary_search_by_key(&seq, |e| e.seq)
            .ok()
            .map(|i| &self.events[i])
    }
}

/// A single violated trace invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Stable rule identifier (e.g. `seq-order`, `unmatched-end`).
    pub rule: &'static str,
    /// Sequence number of the offending event.
    pub seq: u64,
    pub message: String,
}

/// Outcome of [`validate_trace`]: empty means the trace is well formed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "trace ok");
        }
        for v in &self.violations {
            writeln!(f, "seq {}: [{}] {}", v.seq, v.rule, v.message)?;
        }
        Ok(())
    }
}

/// Key identifying which pending Begin an End event closes. Selects have no
/// object of their own, so their candidate signature stands in for one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum OpKey {
    Obj(SemanticKind, Option<ObjectId>),
    Select(Vec<SelectCandidate>, bool),
}

pub(crate) fn op_key(ev: &Event) -> OpKey {
    if ev.kind == SemanticKind::Select {
        if let Aux::Select {
            candidates,
            has_default,
        } = &ev.aux
        {
            return OpKey::Select(candidates.clone(), *has_default);
        }
    }
    OpKey::Obj(ev.kind, ev.obj)
}

/// Result of pairing Begin and End events across a trace.
///
/// Shared by the validator, the detectors and the predictors so that they
/// all agree on what "still blocked" means.
#[derive(Debug, Clone, Default)]
pub struct MatchScan {
    /// For each Begin event seq, the seq of its matching End (if any).
    pub end_of_begin: BTreeMap<u64, u64>,
    /// Indices (into `trace.events`) of Begins with no matching End, in
    /// trace order. These are the operations still blocked at trace end.
    pub pending: Vec<usize>,
}

impl MatchScan {
    /// Whether the Begin at `seq` completed.
    pub fn completed(&self, seq: u64) -> bool {
        self.end_of_begin.contains_key(&seq)
    }
}

/// Pair up Begin/End events per goroutine. Unmatched Ends are ignored here;
/// [`validate_trace`] reports them.
pub fn match_begin_end(trace: &Trace) -> MatchScan {
    let mut open: BTreeMap<(Gid, OpKey), usize> = BTreeMap::new();
    let mut scan = MatchScan::default();
    for (idx, ev) in trace.events.iter().enumerate() {
        match ev.phase {
            Phase::Begin => {
                open.insert((ev.gid, op_key(ev)), idx);
            }
            Phase::End => {
                if let Some(begin_idx) = open.remove(&(ev.gid, op_key(ev))) {
                    scan.end_of_begin
                        .insert(trace.events[begin_idx].seq, ev.seq);
                }
            }
            Phase::Atomic => {}
        }
    }
    let mut pending: Vec<usize> = open.into_values().collect();
    pending.sort_unstable();
    scan.pending = pending;
    scan
}

/// Check every trace invariant and report all violations, ordered by the
/// sequence number of the offending event.
///
/// Checked rules:
/// * `seq-order` — seq strictly increasing over the trace.
/// * `ts-order` — ts nondecreasing within each goroutine.
/// * `phase` — blocking-capable kinds appear as Begin/End, others as Atomic.
/// * `obj` — object id present exactly where the kind requires one.
/// * `aux` — payload shape matches the kind.
/// * `unmatched-end` — an End with no open Begin of the same goroutine,
///   kind and object (or select candidate set).
/// * `duplicate-begin` — a Begin while an identical Begin is still open in
///   the same goroutine.
/// * `unknown-goroutine` — an event from a gid that is neither the main
///   goroutine nor announced by a prior `GCreate`.
/// * `duplicate-main` — more than one `MainStart`.
pub fn validate_trace(trace: &Trace) -> ValidationReport {
    let mut violations = Vec::new();
    let mut prev_seq: Option<u64> = None;
    let mut last_ts: BTreeMap<Gid, u64> = BTreeMap::new();
    let mut known: BTreeSet<Gid> = BTreeSet::new();
    let mut main_seen = false;
    let mut open: BTreeMap<(Gid, OpKey), u64> = BTreeMap::new();

    for ev in &trace.events {
        if let Some(p) = prev_seq {
            if ev.seq <= p {
                violations.push(Violation {
                    rule: "seq-order",
                    seq: ev.seq,
                    message: format!("seq {} not greater than previous seq {}", ev.seq, p),
                });
            }
        }
        prev_seq = Some(ev.seq);

        if let Some(&t) = last_ts.get(&ev.gid) {
            if ev.ts < t {
                violations.push(Violation {
                    rule: "ts-order",
                    seq: ev.seq,
                    message: format!("ts {} goes backwards for {} (was {})", ev.ts, ev.gid, t),
                });
            }
        }
        last_ts.insert(ev.gid, ev.ts);

        // Goroutine identity: MainStart announces the main goroutine; every
        // other gid must have been announced by an earlier GCreate.
        if ev.kind == SemanticKind::MainStart {
            if main_seen {
                violations.push(Violation {
                    rule: "duplicate-main",
                    seq: ev.seq,
                    message: "second MainStart event".to_string(),
                });
            }
            main_seen = true;
            known.insert(ev.gid);
        } else if !known.contains(&ev.gid) {
            violations.push(Violation {
                rule: "unknown-goroutine",
                seq: ev.seq,
                message: format!("{} was never announced by MainStart or GCreate", ev.gid),
            });
            known.insert(ev.gid); // report each unknown gid once
        }
        if ev.kind == SemanticKind::GCreate {
            if let Aux::Child { gid } = ev.aux {
                known.insert(gid);
            }
        }

        // Phase discipline.
        let phase_ok = if ev.kind.can_block() {
            ev.phase != Phase::Atomic
        } else {
            ev.phase == Phase::Atomic
        };
        if !phase_ok {
            violations.push(Violation {
                rule: "phase",
                seq: ev.seq,
                message: format!("{} must not appear with phase {:?}", ev.kind, ev.phase),
            });
        }

        // Object presence.
        if ev.kind.requires_obj() {
            if ev.obj.is_none() {
                violations.push(Violation {
                    rule: "obj",
                    seq: ev.seq,
                    message: format!("{} requires an object id", ev.kind),
                });
            }
        } else if ev.obj.is_some() {
            violations.push(Violation {
                rule: "obj",
                seq: ev.seq,
                message: format!("{} must not carry an object id", ev.kind),
            });
        }

        // Payload shape.
        let aux_ok = match ev.kind {
            SemanticKind::GCreate => matches!(ev.aux, Aux::Child { .. }),
            SemanticKind::ChanCreate => matches!(ev.aux, Aux::Capacity { .. }),
            SemanticKind::ChanSend | SemanticKind::ChanRecv => {
                matches!(ev.aux, Aux::Block { .. })
            }
            SemanticKind::Select => matches!(ev.aux, Aux::Select { .. }),
            SemanticKind::WGAdd => matches!(ev.aux, Aux::Delta { .. }),
            SemanticKind::CtxCreate => matches!(ev.aux, Aux::Done { .. }),
            _ => matches!(ev.aux, Aux::None),
        };
        if !aux_ok {
            violations.push(Violation {
                rule: "aux",
                seq: ev.seq,
                message: format!("{} carries a payload of the wrong shape", ev.kind),
            });
        }

        // Begin/End pairing.
        match ev.phase {
            Phase::Begin => {
                if open.insert((ev.gid, op_key(ev)), ev.seq).is_some() {
                    violations.push(Violation {
                        rule: "duplicate-begin",
                        seq: ev.seq,
                        message: format!(
                            "{} issued a second {} Begin before the first ended",
                            ev.gid, ev.kind
                        ),
                    });
                }
            }
            Phase::End => {
                if open.remove(&(ev.gid, op_key(ev))).is_none() {
                    violations.push(Violation {
                        rule: "unmatched-end",
                        seq: ev.seq,
                        message: format!("{} End for {} has no open Begin", ev.kind, ev.gid),
                    });
                }
            }
            Phase::Atomic => {}
        }
    }

    violations.sort_by_key(|v| v.seq);
    ValidationReport { violations }
}
