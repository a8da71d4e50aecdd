//! Postmortem detectors: bugs the trace itself exhibits.
//!
//! A blocking operation appears in a trace as a Begin event followed — if it
//! ever completed — by a matching End. An operation whose Begin has no End
//! when the trace stops was still blocked, and these detectors turn each
//! such pending operation into a finding with an explanation:
//!
//! * channel sends, receives and selects still pending at trace end;
//! * waitgroup waits whose counter never drained (and counters driven
//!   negative, which is a panic, reported as a fault);
//! * condition waits with no later signal or broadcast — the classic lost
//!   wakeup;
//! * goroutines parked on the done channel of a context nobody cancels;
//! * created-but-never-exited goroutines, reported as leaks when another
//!   finding pins them as blocked and as warnings otherwise.
//!
//! Everything is computed from a single pass over the events plus the
//! shared Begin/End pairing in [`match_begin_end`]; detectors never guess
//! beyond what the trace shows. A goroutine wedged re-acquiring a mutex
//! (say, inside a condition wait whose signal did arrive) is deliberately
//! not diagnosed here: mutex trouble is the predictors' job.

use crate::event::{match_begin_end, Aux, Direction, Event, Gid, ObjectId, SemanticKind, Trace};
use crate::report::{BugFinding, FindingKind, Provenance, Warning};
use std::collections::{BTreeMap, BTreeSet};

/// Findings plus informational warnings from all detectors.
#[derive(Debug, Clone, Default)]
pub struct Detections {
    pub findings: Vec<BugFinding>,
    pub warnings: Vec<Warning>,
}

/// Facts gathered in one pass and shared by the individual detectors.
struct ScanFacts<'t> {
    trace: &'t Trace,
    /// Indices of Begin events with no matching End, in trace order.
    pending: Vec<usize>,
    /// Channel creation events, for cause references.
    chan_created: BTreeMap<ObjectId, u64>,
    /// Waitgroup adds: (seq, gid, delta) per waitgroup, in trace order.
    wg_adds: BTreeMap<ObjectId, Vec<(u64, Gid, i64)>>,
    /// Signal/broadcast seqs per condition variable, in trace order.
    cond_wakes: BTreeMap<ObjectId, Vec<u64>>,
    /// Context creations: ctx -> (seq, done channel).
    ctx_created: BTreeMap<ObjectId, (u64, ObjectId)>,
    /// Contexts that were canceled.
    ctx_canceled: BTreeSet<ObjectId>,
    /// Goroutine creations: child -> creating event seq.
    created: BTreeMap<Gid, u64>,
    /// Goroutines that exited.
    exited: BTreeSet<Gid>,
}

impl<'t> ScanFacts<'t> {
    fn gather(trace: &'t Trace) -> ScanFacts<'t> {
        let scan = match_begin_end(trace);
        let mut facts = ScanFacts {
            trace,
            pending: scan.pending,
            chan_created: BTreeMap::new(),
            wg_adds: BTreeMap::new(),
            cond_wakes: BTreeMap::new(),
            ctx_created: BTreeMap::new(),
            ctx_canceled: BTreeSet::new(),
            created: BTreeMap::new(),
            exited: BTreeSet::new(),
        };
        for ev in &trace.events {
            match ev.kind {
                SemanticKind::ChanCreate => {
                    if let Some(obj) = ev.obj {
                        facts.chan_created.entry(obj).or_insert(ev.seq);
                    }
                }
                SemanticKind::WGAdd => {
                    if let (Some(obj), Aux::Delta { delta }) = (ev.obj, &ev.aux) {
                        facts
                            .wg_adds
                            .entry(obj)
                            .or_default()
                            .push((ev.seq, ev.gid, *delta));
                    }
                }
                SemanticKind::CondSignal | SemanticKind::CondBroadcast => {
                    if let Some(obj) = ev.obj {
                        facts.cond_wakes.entry(obj).or_default().push(ev.seq);
                    }
                }
                SemanticKind::CtxCreate => {
                    if let (Some(obj), Aux::Done { chan }) = (ev.obj, &ev.aux) {
                        facts.ctx_created.entry(obj).or_insert((ev.seq, *chan));
                    }
                }
                SemanticKind::CtxCancel => {
                    if let Some(obj) = ev.obj {
                        facts.ctx_canceled.insert(obj);
                    }
                }
                SemanticKind::GCreate => {
                    if let Aux::Child { gid } = &ev.aux {
                        facts.created.entry(*gid).or_insert(ev.seq);
                    }
                }
                SemanticKind::GExit => {
                    facts.exited.insert(ev.gid);
                }
                _ => {}
            }
        }
        facts
    }

    fn pending_events(&self) -> impl Iterator<Item = &'t Event> + '_ {
        self.pending.iter().map(|idx| &self.trace.events[*idx])
    }
}

/// Run every detector over `trace`.
pub fn detect_all(trace: &Trace) -> Detections {
    let facts = ScanFacts::gather(trace);
    let mut out = Detections::default();
    detect_blocked_channel_ops(&facts, &mut out);
    detect_blocked_waitgroup(&facts, &mut out);
    detect_blocked_cond(&facts, &mut out);
    detect_uncanceled_context(&facts, &mut out);
    // Leak detection reads the findings above, so it goes last.
    detect_goroutine_leak(&facts, &mut out);
    out
}

fn detect_blocked_channel_ops(facts: &ScanFacts<'_>, out: &mut Detections) {
    for ev in facts.pending_events() {
        match ev.kind {
            SemanticKind::ChanSend => {
                let chan = ev.obj.expect("channel ops carry their channel");
                out.findings.push(BugFinding {
                    kind: FindingKind::BlockedChannelSend,
                    provenance: Provenance::Detected,
                    goroutines: vec![ev.gid],
                    blocked_at: vec![ev.seq],
                    caused_by: facts.chan_created.get(&chan).copied().into_iter().collect(),
                    objects: vec![chan],
                    witness_mutex: None,
                    detail: format!(
                        "{} is still blocked sending on channel {chan} when the trace ends",
                        ev.gid
                    ),
                });
            }
            SemanticKind::ChanRecv => {
                let chan = ev.obj.expect("channel ops carry their channel");
                out.findings.push(BugFinding {
                    kind: FindingKind::BlockedChannelRecv,
                    provenance: Provenance::Detected,
                    goroutines: vec![ev.gid],
                    blocked_at: vec![ev.seq],
                    caused_by: facts.chan_created.get(&chan).copied().into_iter().collect(),
                    objects: vec![chan],
                    witness_mutex: None,
                    detail: format!(
                        "{} is still blocked receiving on channel {chan} when the trace ends",
                        ev.gid
                    ),
                });
            }
            SemanticKind::Select => {
                let Aux::Select { candidates, .. } = &ev.aux else {
                    continue;
                };
                let mut objects = Vec::new();
                for cand in candidates {
                    if !objects.contains(&cand.chan) {
                        objects.push(cand.chan);
                    }
                }
                let chans: Vec<String> = objects.iter().map(|c| c.to_string()).collect();
                out.findings.push(BugFinding {
                    kind: FindingKind::BlockedSelect,
                    provenance: Provenance::Detected,
                    goroutines: vec![ev.gid],
                    blocked_at: vec![ev.seq],
                    caused_by: vec![],
                    objects,
                    witness_mutex: None,
                    detail: format!(
                        "{} is still blocked in a select over channel(s) {} when the trace ends",
                        ev.gid,
                        chans.join(", ")
                    ),
                });
            }
            _ => {}
        }
    }
}

fn detect_blocked_waitgroup(facts: &ScanFacts<'_>, out: &mut Detections) {
    // Fold the deltas once per waitgroup; remember the final counter and
    // the first add that drove the counter negative, if any.
    let mut final_counter: BTreeMap<ObjectId, i64> = BTreeMap::new();
    for (wg, adds) in &facts.wg_adds {
        let mut counter = 0i64;
        let mut went_negative = None;
        for (seq, gid, delta) in adds {
            if counter + delta < 0 {
                // The runtime panics before committing a negative counter,
                // so the delta never lands; keep folding the rest.
                if went_negative.is_none() {
                    went_negative = Some((*seq, *gid, *delta));
                }
                continue;
            }
            counter += delta;
        }
        final_counter.insert(*wg, counter);
        if let Some((seq, gid, delta)) = went_negative {
            out.findings.push(BugFinding {
                kind: FindingKind::Fault,
                provenance: Provenance::Detected,
                goroutines: vec![gid],
                blocked_at: vec![],
                caused_by: vec![seq],
                objects: vec![*wg],
                witness_mutex: None,
                detail: format!(
                    "waitgroup {wg} counter is driven negative by {gid}'s add of {delta} \
                     (a runtime panic)"
                ),
            });
        }
    }
    for ev in facts.pending_events() {
        if ev.kind != SemanticKind::WGWait {
            continue;
        }
        let wg = ev.obj.expect("waitgroup ops carry their waitgroup");
        let counter = final_counter.get(&wg).copied().unwrap_or(0);
        if counter == 0 {
            // The trace gives no arithmetic reason for the pending wait;
            // nothing defensible to report.
            continue;
        }
        let adds: Vec<u64> = facts
            .wg_adds
            .get(&wg)
            .map(|v| v.iter().map(|(seq, _, _)| *seq).collect())
            .unwrap_or_default();
        out.findings.push(BugFinding {
            kind: FindingKind::BlockedWaitGroup,
            provenance: Provenance::Detected,
            goroutines: vec![ev.gid],
            blocked_at: vec![ev.seq],
            caused_by: adds,
            objects: vec![wg],
            witness_mutex: None,
            detail: format!(
                "{}'s wait on waitgroup {wg} never completes: the recorded adds leave the \
                 counter at {counter}",
                ev.gid
            ),
        });
    }
}

fn detect_blocked_cond(facts: &ScanFacts<'_>, out: &mut Detections) {
    for ev in facts.pending_events() {
        if ev.kind != SemanticKind::CondWait {
            continue;
        }
        let cond = ev.obj.expect("cond ops carry their cond");
        let wakes = facts.cond_wakes.get(&cond);
        // A wake after the Begin means the waiter was (or could have been)
        // woken; whatever it is stuck on now, it is not a missing wakeup.
        if wakes.is_some_and(|w| w.iter().any(|seq| *seq > ev.seq)) {
            continue;
        }
        let last_earlier_wake = wakes.and_then(|w| w.iter().rev().find(|seq| **seq < ev.seq));
        let detail = match last_earlier_wake {
            Some(seq) => format!(
                "{}'s wait on cond {cond} starts after the last wake (seq {seq}) and nothing \
                 wakes it afterwards",
                ev.gid
            ),
            None => format!(
                "{}'s wait on cond {cond} is never followed by a signal or broadcast",
                ev.gid
            ),
        };
        out.findings.push(BugFinding {
            kind: FindingKind::BlockedCond,
            provenance: Provenance::Detected,
            goroutines: vec![ev.gid],
            blocked_at: vec![ev.seq],
            caused_by: last_earlier_wake.copied().into_iter().collect(),
            objects: vec![cond],
            witness_mutex: None,
            detail,
        });
    }
}

fn detect_uncanceled_context(facts: &ScanFacts<'_>, out: &mut Detections) {
    for (ctx, (create_seq, done)) in &facts.ctx_created {
        if facts.ctx_canceled.contains(ctx) {
            continue;
        }
        for ev in facts.pending_events() {
            let waits_on_done = match ev.kind {
                SemanticKind::ChanRecv => ev.obj == Some(*done),
                SemanticKind::Select => match &ev.aux {
                    Aux::Select { candidates, .. } => candidates
                        .iter()
                        .any(|c| c.chan == *done && c.dir == Direction::Recv),
                    _ => false,
                },
                _ => false,
            };
            if !waits_on_done {
                continue;
            }
            out.findings.push(BugFinding {
                kind: FindingKind::UncanceledContext,
                provenance: Provenance::Detected,
                goroutines: vec![ev.gid],
                blocked_at: vec![ev.seq],
                caused_by: vec![*create_seq],
                objects: vec![*ctx, *done],
                witness_mutex: None,
                detail: format!(
                    "{} waits on the done channel {done} of context {ctx}, but no cancel for \
                     that context appears in the trace",
                    ev.gid
                ),
            });
        }
    }
}

/// Kinds that pin a goroutine as blocked for leak classification.
const BLOCKING_KINDS: [FindingKind; 6] = [
    FindingKind::BlockedChannelSend,
    FindingKind::BlockedChannelRecv,
    FindingKind::BlockedSelect,
    FindingKind::BlockedWaitGroup,
    FindingKind::BlockedCond,
    FindingKind::UncanceledContext,
];

fn detect_goroutine_leak(facts: &ScanFacts<'_>, out: &mut Detections) {
    let mut blocked_at_of: BTreeMap<Gid, Vec<u64>> = BTreeMap::new();
    for finding in &out.findings {
        if !BLOCKING_KINDS.contains(&finding.kind) {
            continue;
        }
        for gid in &finding.goroutines {
            let seqs = blocked_at_of.entry(*gid).or_default();
            for seq in &finding.blocked_at {
                if !seqs.contains(seq) {
                    seqs.push(*seq);
                }
            }
        }
    }
    for (gid, create_seq) in &facts.created {
        if facts.exited.contains(gid) {
            continue;
        }
        match blocked_at_of.get(gid) {
            Some(blocked_at) => out.findings.push(BugFinding {
                kind: FindingKind::GoroutineLeak,
                provenance: Provenance::Detected,
                goroutines: vec![*gid],
                blocked_at: blocked_at.clone(),
                caused_by: vec![*create_seq],
                objects: vec![],
                witness_mutex: None,
                detail: format!(
                    "{gid} (created at seq {create_seq}) never exits and is blocked when the \
                     trace ends"
                ),
            }),
            None => out.warnings.push(Warning {
                code: "goroutine-never-exited".to_string(),
                goroutines: vec![*gid],
                events: vec![*create_seq],
                message: format!(
                    "{gid} (created at seq {create_seq}) never exits, but no detector pins it \
                     as blocked"
                ),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelBuilder, ModelOp};
    use crate::sim::{run, Schedule, DEFAULT_STEP_BOUND};

    fn kinds(d: &Detections) -> Vec<FindingKind> {
        d.findings.iter().map(|f| f.kind).collect()
    }

    #[test]
    fn clean_run_has_no_findings_or_warnings() {
        let mut b = ModelBuilder::new("clean");
        let ch = b.channel("ch", 0);
        let main = b.goroutine("main");
        let w = b.goroutine("w");
        b.ops(main, [ModelOp::Spawn(w), ModelOp::Recv(ch)]);
        b.ops(w, [ModelOp::Send(ch)]);
        let out = run(
            &b.build().unwrap(),
            &Schedule::RoundRobin,
            DEFAULT_STEP_BOUND,
        )
        .unwrap();
        let d = detect_all(&out.trace);
        assert!(d.findings.is_empty(), "{:?}", d.findings);
        assert!(d.warnings.is_empty(), "{:?}", d.warnings);
    }

    #[test]
    fn sender_with_no_receiver_is_detected_and_leaked() {
        let mut b = ModelBuilder::new("blocked-send");
        let ch = b.channel("result", 0);
        let main = b.goroutine("main");
        let w = b.goroutine("worker");
        b.ops(main, [ModelOp::Spawn(w)]);
        b.ops(w, [ModelOp::Send(ch)]);
        let out = run(
            &b.build().unwrap(),
            &Schedule::RoundRobin,
            DEFAULT_STEP_BOUND,
        )
        .unwrap();
        let d = detect_all(&out.trace);
        assert_eq!(
            kinds(&d),
            vec![FindingKind::BlockedChannelSend, FindingKind::GoroutineLeak]
        );
        assert_eq!(d.findings[0].goroutines, vec![w]);
        assert_eq!(d.findings[1].goroutines, vec![w]);
        // The leak points at the same pending event the send finding does.
        assert_eq!(d.findings[1].blocked_at, d.findings[0].blocked_at);
    }

    #[test]
    fn pending_select_is_detected() {
        use crate::event::{Direction, SelectCandidate};
        let mut b = ModelBuilder::new("blocked-select");
        let a = b.channel("a", 0);
        let c = b.channel("c", 0);
        let main = b.goroutine("main");
        b.push(
            main,
            ModelOp::Select {
                candidates: vec![
                    SelectCandidate {
                        chan: a,
                        dir: Direction::Recv,
                    },
                    SelectCandidate {
                        chan: c,
                        dir: Direction::Recv,
                    },
                ],
                has_default: false,
            },
        );
        let out = run(
            &b.build().unwrap(),
            &Schedule::RoundRobin,
            DEFAULT_STEP_BOUND,
        )
        .unwrap();
        let d = detect_all(&out.trace);
        assert_eq!(kinds(&d), vec![FindingKind::BlockedSelect]);
        assert_eq!(d.findings[0].objects, vec![a, c]);
    }

    #[test]
    fn undrained_waitgroup_wait_is_detected_with_the_adds_as_cause() {
        let mut b = ModelBuilder::new("wg-stuck");
        let wg = b.waitgroup("wg");
        let main = b.goroutine("main");
        let w = b.goroutine("w");
        b.ops(
            main,
            [
                ModelOp::WgAdd(wg, 2),
                ModelOp::Spawn(w),
                ModelOp::WgWait(wg),
            ],
        );
        b.ops(w, [ModelOp::WgAdd(wg, -1)]);
        let out = run(
            &b.build().unwrap(),
            &Schedule::RoundRobin,
            DEFAULT_STEP_BOUND,
        )
        .unwrap();
        let d = detect_all(&out.trace);
        assert_eq!(kinds(&d), vec![FindingKind::BlockedWaitGroup]);
        let f = &d.findings[0];
        assert_eq!(f.caused_by.len(), 2, "both adds are referenced");
        assert!(f.detail.contains("counter at 1"), "{}", f.detail);
    }

    #[test]
    fn negative_waitgroup_counter_is_a_fault_finding() {
        let mut b = ModelBuilder::new("wg-negative");
        let wg = b.waitgroup("wg");
        let main = b.goroutine("main");
        b.ops(main, [ModelOp::WgAdd(wg, 1), ModelOp::WgAdd(wg, -2)]);
        let out = run(
            &b.build().unwrap(),
            &Schedule::RoundRobin,
            DEFAULT_STEP_BOUND,
        )
        .unwrap();
        let d = detect_all(&out.trace);
        assert_eq!(kinds(&d), vec![FindingKind::Fault]);
        assert_eq!(d.findings[0].caused_by.len(), 1);
    }

    #[test]
    fn lost_wakeup_is_detected_with_the_earlier_wake_as_cause() {
        let mut b = ModelBuilder::new("lost-signal");
        let m = b.mutex("m");
        let cv = b.cond("cv");
        let main = b.goroutine("main");
        let w = b.goroutine("waiter");
        b.ops(
            main,
            [
                ModelOp::Spawn(w),
                ModelOp::Lock(m),
                ModelOp::CondSignal(cv),
                ModelOp::Unlock(m),
            ],
        );
        b.ops(
            w,
            [
                ModelOp::Lock(m),
                ModelOp::CondWait(cv, m),
                ModelOp::Unlock(m),
            ],
        );
        // Signal first, wait second: the wakeup is lost.
        let script = vec![Gid(1), Gid(1), Gid(1), Gid(1), Gid(1), Gid(2), Gid(2)];
        let out = run(
            &b.build().unwrap(),
            &Schedule::Script(script),
            DEFAULT_STEP_BOUND,
        )
        .unwrap();
        let d = detect_all(&out.trace);
        assert_eq!(
            kinds(&d),
            vec![FindingKind::BlockedCond, FindingKind::GoroutineLeak]
        );
        assert_eq!(d.findings[0].caused_by.len(), 1, "points at the lost wake");
    }

    #[test]
    fn signal_consumed_by_another_waiter_is_out_of_scope() {
        // Two waiters, one signal: the unlucky waiter is genuinely stuck,
        // but a wake does follow its Begin, so the postmortem evidence
        // cannot rule out that it was merely slow. No finding, only the
        // never-exited warning.
        let mut b = ModelBuilder::new("two-waiters");
        let m = b.mutex("m");
        let cv = b.cond("cv");
        let main = b.goroutine("main");
        let w1 = b.goroutine("w1");
        let w2 = b.goroutine("w2");
        b.ops(main, [ModelOp::Spawn(w1), ModelOp::Spawn(w2)]);
        for w in [w1, w2] {
            b.ops(
                w,
                [
                    ModelOp::Lock(m),
                    ModelOp::CondWait(cv, m),
                    ModelOp::Unlock(m),
                ],
            );
        }
        b.ops(
            main,
            [
                ModelOp::Lock(m),
                ModelOp::CondSignal(cv),
                ModelOp::Unlock(m),
            ],
        );
        // Both waiters wait, then the single signal wakes w1 only.
        let script = vec![
            Gid(1), // spawn w1
            Gid(1), // spawn w2
            Gid(2), // w1 lock
            Gid(2), // w1 wait (releases m)
            Gid(3), // w2 lock
            Gid(3), // w2 wait (releases m)
            Gid(1), // main lock
            Gid(1), // main signal -> wakes w1
            Gid(1), // main unlock
            Gid(1), // main exit
            Gid(2), // w1 reacquires, wait completes
            Gid(2), // w1 unlock
            Gid(2), // w1 exit
        ];
        let out = run(
            &b.build().unwrap(),
            &Schedule::Script(script),
            DEFAULT_STEP_BOUND,
        )
        .unwrap();
        assert_eq!(out.ground_truth.blocked.len(), 1, "w2 really is stuck");
        let d = detect_all(&out.trace);
        assert!(d.findings.is_empty(), "{:?}", d.findings);
        assert_eq!(d.warnings.len(), 1);
        assert_eq!(d.warnings[0].code, "goroutine-never-exited");
    }

    #[test]
    fn waiting_on_an_uncanceled_context_is_detected() {
        let mut b = ModelBuilder::new("ctx-forgotten");
        let (_ctx, done) = b.context("ctx");
        let main = b.goroutine("main");
        let w = b.goroutine("watcher");
        b.ops(main, [ModelOp::Spawn(w)]);
        b.ops(w, [ModelOp::Recv(done)]);
        let out = run(
            &b.build().unwrap(),
            &Schedule::RoundRobin,
            DEFAULT_STEP_BOUND,
        )
        .unwrap();
        let d = detect_all(&out.trace);
        assert_eq!(
            kinds(&d),
            vec![
                FindingKind::BlockedChannelRecv,
                FindingKind::UncanceledContext,
                FindingKind::GoroutineLeak,
            ]
        );
    }

    #[test]
    fn canceled_context_produces_no_findings() {
        let mut b = ModelBuilder::new("ctx-canceled");
        let (ctx, done) = b.context("ctx");
        let main = b.goroutine("main");
        let w = b.goroutine("watcher");
        b.ops(main, [ModelOp::Spawn(w), ModelOp::CtxCancel(ctx)]);
        b.ops(w, [ModelOp::Recv(done)]);
        let out = run(
            &b.build().unwrap(),
            &Schedule::RoundRobin,
            DEFAULT_STEP_BOUND,
        )
        .unwrap();
        let d = detect_all(&out.trace);
        assert!(d.findings.is_empty(), "{:?}", d.findings);
    }

    #[test]
    fn select_on_done_channel_counts_as_waiting_on_the_context() {
        use crate::event::{Direction, SelectCandidate};
        let mut b = ModelBuilder::new("ctx-select");
        let (_ctx, done) = b.context("ctx");
        let other = b.channel("other", 0);
        let main = b.goroutine("main");
        let w = b.goroutine("watcher");
        b.ops(main, [ModelOp::Spawn(w)]);
        b.push(
            w,
            ModelOp::Select {
                candidates: vec![
                    SelectCandidate {
                        chan: other,
                        dir: Direction::Recv,
                    },
                    SelectCandidate {
                        chan: done,
                        dir: Direction::Recv,
                    },
                ],
                has_default: false,
            },
        );
        let out = run(
            &b.build().unwrap(),
            &Schedule::RoundRobin,
            DEFAULT_STEP_BOUND,
        )
        .unwrap();
        let d = detect_all(&out.trace);
        assert!(
            kinds(&d).contains(&FindingKind::UncanceledContext),
            "{:?}",
            kinds(&d)
        );
    }

    #[test]
    fn mutex_blocked_goroutine_is_only_a_warning_here() {
        // Two goroutines deadlocked on mutexes: the postmortem side leaves
        // the diagnosis to the predictors and records never-exited
        // warnings for the wedged goroutines.
        let mut b = ModelBuilder::new("ab-ba");
        let ma = b.mutex("a");
        let mb = b.mutex("b");
        let main = b.goroutine("main");
        let g1 = b.goroutine("g1");
        let g2 = b.goroutine("g2");
        b.ops(main, [ModelOp::Spawn(g1), ModelOp::Spawn(g2)]);
        b.ops(g1, [ModelOp::Lock(ma), ModelOp::Lock(mb)]);
        b.ops(g2, [ModelOp::Lock(mb), ModelOp::Lock(ma)]);
        let script = vec![Gid(1), Gid(1), Gid(1), Gid(2), Gid(3), Gid(2), Gid(3)];
        let out = run(
            &b.build().unwrap(),
            &Schedule::Script(script),
            DEFAULT_STEP_BOUND,
        )
        .unwrap();
        assert_eq!(out.ground_truth.blocked.len(), 2);
        let d = detect_all(&out.trace);
        assert!(d.findings.is_empty());
        assert_eq!(d.warnings.len(), 2);
    }
}
