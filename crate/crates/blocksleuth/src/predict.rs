//! Predictive analyses: bugs the trace admits but did not necessarily hit.
//!
//! All predictors work from one pass over the trace that reconstructs, per
//! goroutine, which locks are held at every moment (a lock is held from the
//! End of its acquisition until its unlock; a Begin without End never
//! acquired). The pass produces:
//!
//! * a *lock tuple* for every lock acquisition: who requested which lock
//!   while holding what;
//! * a *channel-op environment* for every blocking channel operation and
//!   close: the locks held at the op and the locks held earlier but already
//!   released;
//! * raw re-acquisition and held-at-goroutine-end records.
//!
//! On top of those:
//!
//! * [`predict_mutex_deadlock`] searches the lock tuples for cyclic waits —
//!   each participant holds a lock the next one requests — with two
//!   refinements: goroutines and locksets along a cycle must be pairwise
//!   disjoint (otherwise the schedules cannot interleave into the wedge),
//!   and a link where both the request and the hold are read-locks is no
//!   link at all, since readers admit each other. Candidate cycles are then
//!   checked for feasibility: spawns, channel hand-offs, closes and
//!   waitgroup waits order parts of the trace no schedule can reorder, and
//!   a cycle whose acquisitions are already so ordered can never have all
//!   parties blocked at once (see the happens-before section below).
//! * [`predict_double_lock_missing_unlock`] reports self-deadlocks (any
//!   re-acquisition of a held lock except read-over-read), nested
//!   read-locks that wedge as soon as some writer contends (read-over-read
//!   with a writer in the trace; without one it is only a warning), and
//!   locks still held when their goroutine's events end.
//! * [`predict_channel_mutex_deadlock`] pairs operations on unbuffered
//!   channels whose completion depends on each other — (send, recv) and
//!   (recv, close) — and asks whether a mutex could keep the pair from ever
//!   meeting: one side blocks on the channel holding (or having needed) the
//!   mutex the other side must take to reach its half. Receives inside
//!   selects participate per [`SelectMode`].
//!
//! Held-lock bookkeeping is per goroutine. A lock passed between goroutines
//! (locked here, unlocked there) shows up as a missing unlock: the analyses
//! deliberately assume the common discipline that the locker unlocks.

use crate::event::{
    match_begin_end, Aux, Direction, Gid, MatchScan, ObjectId, Phase, SemanticKind, Trace,
};
use crate::report::{BugFinding, FindingKind, Provenance, Warning};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Default bound on mutex-cycle length.
pub const DEFAULT_CYCLE_BOUND: usize = 4;

/// How select candidates count in channel-mutex pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectMode {
    /// A single dead candidate implicates the select (a select is reported
    /// as soon as any one of its cases can wedge).
    #[default]
    Any,
    /// Every candidate of the select must be dead before it is reported.
    All,
}

/// How a lock is (or was) held.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AcqKind {
    /// Plain mutex lock.
    Mutex,
    /// Rwmutex read lock.
    Read,
    /// Rwmutex write lock.
    Write,
}

impl AcqKind {
    fn describe(self) -> &'static str {
        match self {
            AcqKind::Mutex => "lock",
            AcqKind::Read => "read-lock",
            AcqKind::Write => "write-lock",
        }
    }
}

/// One live (or past) hold of a lock by a goroutine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeldLock {
    pub op: AcqKind,
    /// Begin of the acquisition that created the hold.
    pub begin_seq: u64,
    /// End of that acquisition (the moment the lock was actually taken).
    pub end_seq: u64,
}

/// A lock acquisition with its requesting context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockTuple {
    pub gid: Gid,
    /// Begin event of the request.
    pub seq: u64,
    /// Requested lock.
    pub obj: ObjectId,
    pub op: AcqKind,
    /// Locks held at the moment of the request.
    pub holding: BTreeMap<ObjectId, HeldLock>,
    /// Whether the acquisition completed in this trace.
    pub completed: bool,
}

/// What a channel op does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ChanOpKind {
    Send,
    Recv,
    Close,
}

/// Select membership of a channel-op environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectArm {
    /// Begin seq of the owning select.
    pub select_seq: u64,
    /// Candidate index within the select.
    pub index: usize,
    /// Total candidates of that select.
    pub total: usize,
}

/// A blocking channel operation (or close) with its lock context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelOpEnv {
    pub gid: Gid,
    /// Begin seq of the op (for select candidates: of the select).
    pub seq: u64,
    pub chan: ObjectId,
    pub kind: ChanOpKind,
    /// Locks held at the op.
    pub holding: BTreeMap<ObjectId, HeldLock>,
    /// Locks this goroutine held earlier and fully released before the op.
    pub released: BTreeMap<ObjectId, HeldLock>,
    /// Set when the op is one candidate of a select.
    pub select_arm: Option<SelectArm>,
}

/// A re-acquisition of an already-held lock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoubleAcq {
    pub gid: Gid,
    pub obj: ObjectId,
    /// The existing hold.
    pub first: HeldLock,
    /// Begin seq and kind of the second acquisition.
    pub second_seq: u64,
    pub second_op: AcqKind,
}

/// A lock still held when its goroutine's events end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeldAtEnd {
    pub gid: Gid,
    pub obj: ObjectId,
    pub hold: HeldLock,
    /// The goroutine's final event.
    pub last_seq: u64,
}

/// Everything the shared lockset pass extracts from a trace.
#[derive(Debug, Clone, Default)]
pub struct LockFacts {
    pub tuples: Vec<LockTuple>,
    pub chan_ops: Vec<ChannelOpEnv>,
    pub double_acqs: Vec<DoubleAcq>,
    pub held_at_end: Vec<HeldAtEnd>,
    /// Write-lock request Begins per rwmutex (any goroutine).
    pub write_requests: BTreeMap<ObjectId, Vec<u64>>,
    /// Channel capacities from creation events.
    pub capacities: BTreeMap<ObjectId, u64>,
}

#[derive(Debug, Default)]
struct GorLocks {
    held: BTreeMap<ObjectId, (HeldLock, u32)>,
    released: BTreeMap<ObjectId, HeldLock>,
    last_seq: u64,
}

impl GorLocks {
    fn holding(&self) -> BTreeMap<ObjectId, HeldLock> {
        self.held.iter().map(|(obj, (h, _))| (*obj, *h)).collect()
    }

    fn released_not_held(&self) -> BTreeMap<ObjectId, HeldLock> {
        self.released
            .iter()
            .filter(|(obj, _)| !self.held.contains_key(*obj))
            .map(|(obj, h)| (*obj, *h))
            .collect()
    }
}

fn acq_kind(kind: SemanticKind) -> Option<AcqKind> {
    match kind {
        SemanticKind::MutexLock => Some(AcqKind::Mutex),
        SemanticKind::RWMutexRLock => Some(AcqKind::Read),
        SemanticKind::RWMutexLock => Some(AcqKind::Write),
        _ => None,
    }
}

/// Reconstruct lock tuples, channel-op environments and the derived lock
/// anomalies from a trace, in one pass.
pub fn build_lock_tuples(trace: &Trace) -> LockFacts {
    let scan: MatchScan = match_begin_end(trace);
    let mut facts = LockFacts::default();
    let mut gors: BTreeMap<Gid, GorLocks> = BTreeMap::new();

    for ev in &trace.events {
        let g = gors.entry(ev.gid).or_default();
        g.last_seq = ev.seq;
        match (ev.kind, ev.phase) {
            (SemanticKind::ChanCreate, _) => {
                if let (Some(obj), Aux::Capacity { cap }) = (ev.obj, &ev.aux) {
                    facts.capacities.entry(obj).or_insert(*cap);
                }
            }
            (kind, Phase::Begin) if acq_kind(kind).is_some() => {
                let op = acq_kind(kind).unwrap();
                let obj = ev.obj.expect("lock ops carry their lock");
                if op == AcqKind::Write {
                    facts.write_requests.entry(obj).or_default().push(ev.seq);
                }
                facts.tuples.push(LockTuple {
                    gid: ev.gid,
                    seq: ev.seq,
                    obj,
                    op,
                    holding: g.holding(),
                    completed: scan.completed(ev.seq),
                });
                if let Some((first, _)) = g.held.get(&obj) {
                    facts.double_acqs.push(DoubleAcq {
                        gid: ev.gid,
                        obj,
                        first: *first,
                        second_seq: ev.seq,
                        second_op: op,
                    });
                }
                // The goroutine emits nothing between a blocking Begin and
                // its End, so the hold can be recorded here when the
                // acquisition is known to complete.
                if let Some(end_seq) = scan.end_of_begin.get(&ev.seq) {
                    let hold = HeldLock {
                        op,
                        begin_seq: ev.seq,
                        end_seq: *end_seq,
                    };
                    let entry = g.held.entry(obj).or_insert((hold, 0));
                    entry.0 = hold;
                    entry.1 += 1;
                }
            }
            (SemanticKind::MutexUnlock, _)
            | (SemanticKind::RWMutexRUnlock, _)
            | (SemanticKind::RWMutexUnlock, _) => {
                let obj = ev.obj.expect("lock ops carry their lock");
                if let Some((hold, count)) = g.held.get_mut(&obj) {
                    *count -= 1;
                    if *count == 0 {
                        let hold = *hold;
                        g.held.remove(&obj);
                        g.released.insert(obj, hold);
                    }
                }
                // An unlock with no recorded hold is cross-goroutine lock
                // passing (or a panic the simulator would have stopped at);
                // per-goroutine locksets ignore it.
            }
            (SemanticKind::ChanSend, Phase::Begin) | (SemanticKind::ChanRecv, Phase::Begin) => {
                let blocking = matches!(ev.aux, Aux::Block { block: true });
                if blocking {
                    facts.chan_ops.push(ChannelOpEnv {
                        gid: ev.gid,
                        seq: ev.seq,
                        chan: ev.obj.expect("channel ops carry their channel"),
                        kind: if ev.kind == SemanticKind::ChanSend {
                            ChanOpKind::Send
                        } else {
                            ChanOpKind::Recv
                        },
                        holding: g.holding(),
                        released: g.released_not_held(),
                        select_arm: None,
                    });
                }
            }
            (SemanticKind::ChanClose, _) => {
                // A close never blocks, but it is the completion other ops
                // wait for, so it always participates.
                facts.chan_ops.push(ChannelOpEnv {
                    gid: ev.gid,
                    seq: ev.seq,
                    chan: ev.obj.expect("channel ops carry their channel"),
                    kind: ChanOpKind::Close,
                    holding: g.holding(),
                    released: g.released_not_held(),
                    select_arm: None,
                });
            }
            (SemanticKind::Select, Phase::Begin) => {
                if let Aux::Select {
                    candidates,
                    has_default,
                } = &ev.aux
                {
                    // A select with a default never blocks; its candidates
                    // cannot wedge anything.
                    if !*has_default {
                        for (index, cand) in candidates.iter().enumerate() {
                            facts.chan_ops.push(ChannelOpEnv {
                                gid: ev.gid,
                                seq: ev.seq,
                                chan: cand.chan,
                                kind: match cand.dir {
                                    Direction::Send => ChanOpKind::Send,
                                    Direction::Recv => ChanOpKind::Recv,
                                },
                                holding: g.holding(),
                                released: g.released_not_held(),
                                select_arm: Some(SelectArm {
                                    select_seq: ev.seq,
                                    index,
                                    total: candidates.len(),
                                }),
                            });
                        }
                    }
                }
            }
            _ => {}
        }
    }

    for (gid, g) in &gors {
        for (obj, (hold, _)) in &g.held {
            facts.held_at_end.push(HeldAtEnd {
                gid: *gid,
                obj: *obj,
                hold: *hold,
                last_seq: g.last_seq,
            });
        }
    }
    facts
}

// ---------------------------------------------------------------------------
// Happens-before over the trace's communication
//
// Lock cycles are predictions: the observed run completed, and the claim is
// that another schedule wedges. That claim is false when the trace's own
// synchronization already orders the acquisitions — if every execution must
// pass a channel hand-off that puts one party's whole nest before the
// other's, the two can never be blocked inside their nests at the same
// time. Vector clocks over the *non-lock* synchronization capture exactly
// the orderings no schedule can undo:
//
// * spawn: everything the parent did before `go` precedes the child;
// * rendezvous (capacity 0): send and receive complete together, ordering
//   each side's prefix before the other side's continuation;
// * buffered hand-off: the k-th receive carries the k-th send, and the
//   (k+cap)-th send needs the slot the k-th receive freed;
// * close: a zero-value receive happens after the close that produced it;
// * waitgroup: a wait returns only after the adds it counted.
//
// Lock and unlock events contribute nothing here on purpose — lock order
// is the thing prediction gets to permute. Condition variables contribute
// nothing either: which waiter a signal woke is not attributable from the
// trace, and a wrong guess would order events that other schedules can
// swap. Channels that appear as select candidates are exempted too: a
// select completes its channel half without send/receive events, so the
// per-channel op counting below would misattribute pairings.

/// Per-goroutine vector clocks snapshot at chosen events.
struct HbClocks {
    /// Dense index per goroutine.
    gidx: BTreeMap<Gid, usize>,
    /// Clock at each requested seq (after the event's own tick and joins).
    at: BTreeMap<u64, Vec<u64>>,
}

impl HbClocks {
    /// Whether the event at `a_seq` (emitted by `a_gid`) precedes the event
    /// at `b_seq` in every schedule that keeps this trace's communication.
    fn ordered(&self, a_seq: u64, a_gid: Gid, b_seq: u64) -> bool {
        let (Some(ca), Some(cb)) = (self.at.get(&a_seq), self.at.get(&b_seq)) else {
            return false;
        };
        let gi = self.gidx[&a_gid];
        cb[gi] >= ca[gi]
    }
}

fn join(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = (*d).max(*s);
    }
}

/// Channel facts gathered up front: completion order is needed before the
/// forward pass reaches the events (a rendezvous partner's End can trail
/// its mate by one event).
#[derive(Default)]
struct ChanShape {
    cap: Option<u64>,
    /// Listed as a candidate of some select: pairing is unattributable.
    tainted: bool,
    /// Goroutine of the k-th completed send / receive (index k-1).
    send_end_gids: Vec<Gid>,
    recv_end_gids: Vec<Gid>,
}

/// Rolling per-channel state of the forward pass.
#[derive(Default)]
struct ChanRun {
    sends_seen: usize,
    recvs_seen: usize,
    /// Clock at send#k End, kept until recv#k consumes it.
    send_end_clock: BTreeMap<usize, Vec<u64>>,
    /// Clock at recv#k End, kept until the send it makes room for.
    recv_end_clock: BTreeMap<usize, Vec<u64>>,
    close_clock: Option<Vec<u64>>,
}

/// Compute clocks for the events in `interesting` (one forward pass; the
/// rest of the trace is folded through but not retained).
fn hb_clocks_at(trace: &Trace, interesting: &BTreeSet<u64>) -> HbClocks {
    let mut gidx: BTreeMap<Gid, usize> = BTreeMap::new();
    for ev in &trace.events {
        let next = gidx.len();
        gidx.entry(ev.gid).or_insert(next);
    }
    let n = gidx.len();

    let mut shapes: BTreeMap<ObjectId, ChanShape> = BTreeMap::new();
    for ev in &trace.events {
        match (ev.kind, ev.phase, ev.obj) {
            (SemanticKind::ChanCreate, _, Some(obj)) => {
                if let Aux::Capacity { cap } = ev.aux {
                    shapes.entry(obj).or_default().cap = Some(cap);
                }
            }
            (SemanticKind::ChanSend, Phase::End, Some(obj)) => {
                shapes.entry(obj).or_default().send_end_gids.push(ev.gid);
            }
            (SemanticKind::ChanRecv, Phase::End, Some(obj)) => {
                shapes.entry(obj).or_default().recv_end_gids.push(ev.gid);
            }
            (SemanticKind::Select, Phase::Begin, _) => {
                if let Aux::Select { candidates, .. } = &ev.aux {
                    for cand in candidates {
                        shapes.entry(cand.chan).or_default().tainted = true;
                    }
                }
            }
            _ => {}
        }
    }

    let mut clock: Vec<Vec<u64>> = vec![vec![0; n]; n];
    let mut runs: BTreeMap<ObjectId, ChanRun> = BTreeMap::new();
    let mut wg_done: BTreeMap<ObjectId, Vec<u64>> = BTreeMap::new();
    let mut at: BTreeMap<u64, Vec<u64>> = BTreeMap::new();

    for ev in &trace.events {
        let gi = gidx[&ev.gid];
        clock[gi][gi] += 1;
        match (ev.kind, ev.phase, ev.obj) {
            (SemanticKind::GCreate, _, _) => {
                if let Aux::Child { gid: child } = ev.aux {
                    // A spawned goroutine that never ran has no events and
                    // needs no clock.
                    if let Some(&ci) = gidx.get(&child) {
                        let parent = clock[gi].clone();
                        join(&mut clock[ci], &parent);
                    }
                }
            }
            (SemanticKind::ChanSend, Phase::End, Some(obj)) if !shapes[&obj].tainted => {
                let shape = &shapes[&obj];
                let r = runs.entry(obj).or_default();
                r.sends_seen += 1;
                let k = r.sends_seen;
                match shape.cap {
                    // Rendezvous: the partner receive completes with this
                    // send. Join its clock — stored if its End already
                    // passed, live (and exactly at its Begin) otherwise.
                    Some(0) => {
                        if let Some(cl) = r.recv_end_clock.remove(&k) {
                            join(&mut clock[gi], &cl);
                        } else if let Some(pg) = shape.recv_end_gids.get(k - 1) {
                            let src = clock[gidx[pg]].clone();
                            join(&mut clock[gi], &src);
                        }
                    }
                    // Buffered: this send needed the slot freed by the
                    // (k-cap)-th receive.
                    Some(cap) => {
                        if let Some(freed) = k.checked_sub(cap as usize) {
                            if let Some(cl) = r.recv_end_clock.remove(&freed) {
                                join(&mut clock[gi], &cl);
                            }
                        }
                    }
                    None => {}
                }
                if r.recvs_seen < k && shape.recv_end_gids.len() >= k {
                    r.send_end_clock.insert(k, clock[gi].clone());
                }
            }
            (SemanticKind::ChanRecv, Phase::End, Some(obj)) if !shapes[&obj].tainted => {
                let shape = &shapes[&obj];
                let r = runs.entry(obj).or_default();
                r.recvs_seen += 1;
                let k = r.recvs_seen;
                if k <= shape.send_end_gids.len() {
                    // Values arrive in send order: this receive carries the
                    // k-th completed send.
                    if let Some(cl) = r.send_end_clock.remove(&k) {
                        join(&mut clock[gi], &cl);
                    } else {
                        let pg = shape.send_end_gids[k - 1];
                        let src = clock[gidx[&pg]].clone();
                        join(&mut clock[gi], &src);
                    }
                } else if let Some(cl) = &r.close_clock {
                    // Past the last sent value: a zero value from close.
                    let cl = cl.clone();
                    join(&mut clock[gi], &cl);
                }
                // Keep the clock for the send this receive unblocks.
                if let Some(unblocks) = shape.cap.and_then(|c| k.checked_add(c as usize)) {
                    if r.sends_seen < unblocks && shape.send_end_gids.len() >= unblocks {
                        r.recv_end_clock.insert(k, clock[gi].clone());
                    }
                }
            }
            (SemanticKind::ChanClose, _, Some(obj))
                if !shapes.get(&obj).is_some_and(|s| s.tainted) =>
            {
                let r = runs.entry(obj).or_default();
                if r.close_clock.is_none() {
                    r.close_clock = Some(clock[gi].clone());
                }
            }
            (SemanticKind::WGAdd, _, Some(obj)) => {
                let acc = wg_done.entry(obj).or_insert_with(|| vec![0; n]);
                join(acc, &clock[gi]);
            }
            (SemanticKind::WGWait, Phase::End, Some(obj)) => {
                if let Some(acc) = wg_done.get(&obj) {
                    let acc = acc.clone();
                    join(&mut clock[gi], &acc);
                }
            }
            _ => {}
        }
        if interesting.contains(&ev.seq) {
            at.insert(ev.seq, clock[gi].clone());
        }
    }

    HbClocks { gidx, at }
}

// ---------------------------------------------------------------------------
// Mutex cycles

/// Whether `request` waiting on a lock held as `hold` actually blocks.
/// Readers admit readers; every other combination excludes.
fn excludes(request: AcqKind, hold: AcqKind) -> bool {
    !(request == AcqKind::Read && hold == AcqKind::Read)
}

/// Search the lock tuples for cyclic waits of length 2..=`cycle_bound`,
/// then drop the cycles the trace's communication already serializes.
pub fn predict_mutex_deadlock(
    trace: &Trace,
    facts: &LockFacts,
    cycle_bound: usize,
) -> Vec<BugFinding> {
    // Tuples re-requesting a held lock are self-deadlocks, handled by the
    // double-lock predictor; cycles need distinct parties.
    let tuples: Vec<&LockTuple> = facts
        .tuples
        .iter()
        .filter(|t| !t.holding.contains_key(&t.obj))
        .collect();
    let mut holders_of: BTreeMap<ObjectId, Vec<usize>> = BTreeMap::new();
    for (idx, t) in tuples.iter().enumerate() {
        for obj in t.holding.keys() {
            holders_of.entry(*obj).or_default().push(idx);
        }
    }

    struct Search<'a> {
        tuples: &'a [&'a LockTuple],
        holders_of: &'a BTreeMap<ObjectId, Vec<usize>>,
        cycle_bound: usize,
        seen: BTreeSet<Vec<(Gid, ObjectId, Vec<ObjectId>)>>,
        candidates: Vec<Vec<usize>>,
    }

    impl Search<'_> {
        fn dfs(
            &mut self,
            chain: &mut Vec<usize>,
            gids: &mut BTreeSet<Gid>,
            locks: &mut BTreeSet<ObjectId>,
        ) {
            let last = self.tuples[*chain.last().unwrap()];
            if chain.len() >= 2 {
                let first = self.tuples[chain[0]];
                if let Some(hold) = first.holding.get(&last.obj) {
                    if excludes(last.op, hold.op) {
                        self.record(chain);
                    }
                }
            }
            if chain.len() >= self.cycle_bound {
                return;
            }
            let Some(nexts) = self.holders_of.get(&last.obj) else {
                return;
            };
            for &next in nexts {
                let t = self.tuples[next];
                if gids.contains(&t.gid) {
                    continue;
                }
                let hold = &t.holding[&last.obj];
                if !excludes(last.op, hold.op) {
                    continue;
                }
                if t.holding.keys().any(|obj| locks.contains(obj)) {
                    continue;
                }
                chain.push(next);
                gids.insert(t.gid);
                let added: Vec<ObjectId> = t
                    .holding
                    .keys()
                    .filter(|obj| locks.insert(**obj))
                    .copied()
                    .collect();
                self.dfs(chain, gids, locks);
                for obj in added {
                    locks.remove(&obj);
                }
                gids.remove(&t.gid);
                chain.pop();
            }
        }

        fn record(&mut self, chain: &[usize]) {
            // Canonical rotation: start at the lexicographically smallest
            // participant so every rotation of one cycle keys identically.
            let start = (0..chain.len())
                .min_by_key(|i| {
                    let t = self.tuples[chain[*i]];
                    (t.gid, t.seq)
                })
                .unwrap();
            let rotated: Vec<usize> = (0..chain.len())
                .map(|i| chain[(start + i) % chain.len()])
                .collect();
            let key: Vec<(Gid, ObjectId, Vec<ObjectId>)> = rotated
                .iter()
                .map(|&i| {
                    let t = self.tuples[i];
                    (t.gid, t.obj, t.holding.keys().copied().collect())
                })
                .collect();
            if self.seen.insert(key) {
                self.candidates.push(rotated);
            }
        }
    }

    let mut search = Search {
        tuples: &tuples,
        holders_of: &holders_of,
        cycle_bound: cycle_bound.max(2),
        seen: BTreeSet::new(),
        candidates: Vec::new(),
    };
    for (s, t) in tuples.iter().enumerate() {
        let mut chain = vec![s];
        let mut gids = BTreeSet::from([t.gid]);
        let mut locks: BTreeSet<ObjectId> = t.holding.keys().copied().collect();
        search.dfs(&mut chain, &mut gids, &mut locks);
    }
    if search.candidates.is_empty() {
        return Vec::new();
    }

    // Feasibility: a wedge needs every party blocked at its request at the
    // same time, which no schedule can arrange once two of the requests are
    // ordered by the trace's communication.
    let interesting: BTreeSet<u64> = search
        .candidates
        .iter()
        .flatten()
        .map(|&i| tuples[i].seq)
        .collect();
    let hb = hb_clocks_at(trace, &interesting);
    let concurrent = |chain: &[usize]| {
        chain.iter().all(|&a| {
            chain
                .iter()
                .all(|&b| a == b || !hb.ordered(tuples[a].seq, tuples[a].gid, tuples[b].seq))
        })
    };

    let mut findings = Vec::new();
    for chain in search.candidates.iter().filter(|c| concurrent(c)) {
        let ordered: Vec<&LockTuple> = chain.iter().map(|&i| tuples[i]).collect();
        let goroutines: Vec<Gid> = ordered.iter().map(|t| t.gid).collect();
        let blocked_at: Vec<u64> = ordered.iter().map(|t| t.seq).collect();
        // Each link's cause: the acquisition that gave the next participant
        // the lock this one requests.
        let n = ordered.len();
        let caused_by: Vec<u64> = (0..n)
            .map(|i| ordered[(i + 1) % n].holding[&ordered[i].obj].end_seq)
            .collect();
        let mut objects: Vec<ObjectId> = Vec::new();
        for t in &ordered {
            if !objects.contains(&t.obj) {
                objects.push(t.obj);
            }
        }
        let wants: Vec<String> = ordered
            .iter()
            .map(|t| {
                format!(
                    "{} holds {} and requests the {} of {}",
                    t.gid,
                    t.holding
                        .keys()
                        .map(|o| o.to_string())
                        .collect::<Vec<_>>()
                        .join("+"),
                    t.op.describe(),
                    t.obj
                )
            })
            .collect();
        findings.push(BugFinding {
            kind: FindingKind::MutexDeadlock,
            provenance: Provenance::Predicted,
            goroutines,
            blocked_at,
            caused_by,
            objects,
            witness_mutex: None,
            detail: format!("cyclic lock wait: {}", wants.join("; ")),
        });
    }
    findings
}

// ---------------------------------------------------------------------------
// Double lock / missing unlock

/// Report re-acquisitions of held locks and locks held past their
/// goroutine's last event.
pub fn predict_double_lock_missing_unlock(facts: &LockFacts) -> (Vec<BugFinding>, Vec<Warning>) {
    let mut findings = Vec::new();
    let mut warnings = Vec::new();

    for d in &facts.double_acqs {
        if d.second_op == AcqKind::Read && d.first.op == AcqKind::Read {
            // Reader over reader only wedges once a writer queues between
            // the two acquisitions (writers block new readers). A writer
            // anywhere in the trace makes that schedule real.
            if facts.write_requests.contains_key(&d.obj) {
                let writer_seqs = &facts.write_requests[&d.obj];
                findings.push(BugFinding {
                    kind: FindingKind::DoubleRLock,
                    provenance: Provenance::Predicted,
                    goroutines: vec![d.gid],
                    blocked_at: vec![d.second_seq],
                    caused_by: std::iter::once(d.first.end_seq)
                        .chain(writer_seqs.iter().copied())
                        .collect(),
                    objects: vec![d.obj],
                    witness_mutex: None,
                    detail: format!(
                        "{} read-locks {} again while already holding it; with the \
                         write-lock request also in this trace scheduled between the two, \
                         the second read-lock waits on the writer and the writer waits on \
                         the first read-lock",
                        d.gid, d.obj
                    ),
                });
            } else {
                warnings.push(Warning {
                    code: "double-rlock-no-writer".to_string(),
                    goroutines: vec![d.gid],
                    events: vec![d.first.end_seq, d.second_seq],
                    message: format!(
                        "{} read-locks {} while already holding it; harmless here, but it \
                         deadlocks the moment any goroutine requests the write lock in \
                         between",
                        d.gid, d.obj
                    ),
                });
            }
        } else {
            findings.push(BugFinding {
                kind: FindingKind::DoubleLock,
                provenance: Provenance::Predicted,
                goroutines: vec![d.gid],
                blocked_at: vec![d.second_seq],
                caused_by: vec![d.first.end_seq],
                objects: vec![d.obj],
                witness_mutex: None,
                detail: format!(
                    "{} requests the {} of {} while already holding its {}: the goroutine \
                     waits on itself",
                    d.gid,
                    d.second_op.describe(),
                    d.obj,
                    d.first.op.describe()
                ),
            });
        }
    }

    for h in &facts.held_at_end {
        findings.push(BugFinding {
            kind: FindingKind::MissingUnlock,
            provenance: Provenance::Predicted,
            goroutines: vec![h.gid],
            blocked_at: vec![],
            caused_by: vec![h.hold.end_seq, h.last_seq],
            objects: vec![h.obj],
            witness_mutex: None,
            detail: format!(
                "{} still holds the {} of {} at its last event (seq {}); anyone else \
                 requesting it blocks forever",
                h.gid,
                h.hold.op.describe(),
                h.obj,
                h.last_seq
            ),
        });
    }

    (findings, warnings)
}

// ---------------------------------------------------------------------------
// Channel-mutex deadlocks

fn intersect(
    a: &BTreeMap<ObjectId, HeldLock>,
    b: &BTreeMap<ObjectId, HeldLock>,
) -> Option<ObjectId> {
    a.keys().find(|obj| b.contains_key(*obj)).copied()
}

/// A deadlock-candidate pair of channel ops with its witness mutex.
struct Pairing<'a> {
    /// The op that blocks first in the wedging schedule (send, or recv for
    /// recv/close pairs).
    op_i: &'a ChannelOpEnv,
    op_j: &'a ChannelOpEnv,
    witness: ObjectId,
}

impl Pairing<'_> {
    /// The side whose lockset holds the witness at its channel op; ties go
    /// to `op_i`.
    fn holder(&self) -> &ChannelOpEnv {
        if self.op_i.holding.contains_key(&self.witness) {
            self.op_i
        } else {
            self.op_j
        }
    }

    fn needer(&self) -> &ChannelOpEnv {
        if self.op_i.holding.contains_key(&self.witness) {
            self.op_j
        } else {
            self.op_i
        }
    }
}

/// Pair blocking ops on unbuffered channels whose completion the other side
/// owns, and report the pairs a mutex can wedge.
pub fn predict_channel_mutex_deadlock(facts: &LockFacts, mode: SelectMode) -> Vec<BugFinding> {
    // Group ops per channel, skipping channels with buffer room: a buffered
    // send can complete without a peer, breaking the mutual wait. Unknown
    // capacity is treated as zero (conservative).
    let mut by_chan: BTreeMap<ObjectId, Vec<&ChannelOpEnv>> = BTreeMap::new();
    for env in &facts.chan_ops {
        if facts.capacities.get(&env.chan).copied().unwrap_or(0) > 0 {
            continue;
        }
        // Ops with no lock context can never contribute a witness.
        if env.holding.is_empty() && env.released.is_empty() {
            continue;
        }
        by_chan.entry(env.chan).or_default().push(env);
    }

    let mut pairings: Vec<Pairing<'_>> = Vec::new();
    for envs in by_chan.values() {
        for (idx, a) in envs.iter().enumerate() {
            for b in &envs[idx + 1..] {
                if a.gid == b.gid {
                    continue;
                }
                let (i, j) = match (a.kind, b.kind) {
                    (ChanOpKind::Send, ChanOpKind::Recv) => (*a, *b),
                    (ChanOpKind::Recv, ChanOpKind::Send) => (*b, *a),
                    (ChanOpKind::Recv, ChanOpKind::Close) => (*a, *b),
                    (ChanOpKind::Close, ChanOpKind::Recv) => (*b, *a),
                    _ => continue,
                };
                let witness = match (i.kind, j.kind) {
                    // Send/recv wedge whichever side reaches its lock use
                    // first: held-vs-held, or held-vs-released either way.
                    (ChanOpKind::Send, ChanOpKind::Recv) => intersect(&i.holding, &j.holding)
                        .or_else(|| intersect(&i.holding, &j.released))
                        .or_else(|| intersect(&i.released, &j.holding)),
                    // Recv/close: only the receiver's *held* locks matter.
                    // A lock the receiver already released cannot stop the
                    // closer, so that combination is excluded on purpose.
                    (ChanOpKind::Recv, ChanOpKind::Close) => intersect(&i.holding, &j.holding)
                        .or_else(|| intersect(&i.holding, &j.released)),
                    _ => unreachable!(),
                };
                if let Some(witness) = witness {
                    pairings.push(Pairing {
                        op_i: i,
                        op_j: j,
                        witness,
                    });
                }
            }
        }
    }

    if mode == SelectMode::All {
        // Keep only pairings whose select sides are fully dead: every
        // candidate of the select must itself appear in some pairing.
        let mut hit_arms: BTreeMap<u64, BTreeSet<usize>> = BTreeMap::new();
        for p in &pairings {
            for env in [p.op_i, p.op_j] {
                if let Some(arm) = env.select_arm {
                    hit_arms
                        .entry(arm.select_seq)
                        .or_default()
                        .insert(arm.index);
                }
            }
        }
        pairings.retain(|p| {
            [p.op_i, p.op_j].iter().all(|env| match env.select_arm {
                Some(arm) => hit_arms[&arm.select_seq].len() == arm.total,
                None => true,
            })
        });
    }

    let mut findings = Vec::new();
    let mut seen: BTreeSet<(ObjectId, u64, u64, ObjectId)> = BTreeSet::new();
    for p in pairings {
        let key = (
            p.op_i.chan,
            p.op_i.seq.min(p.op_j.seq),
            p.op_i.seq.max(p.op_j.seq),
            p.witness,
        );
        if !seen.insert(key) {
            continue;
        }
        let holder = p.holder();
        let needer = p.needer();
        let needer_acq = needer
            .holding
            .get(&p.witness)
            .or_else(|| needer.released.get(&p.witness))
            .expect("needer touched the witness");
        let what = |env: &ChannelOpEnv| match env.kind {
            ChanOpKind::Send => "send on",
            ChanOpKind::Recv => "receive on",
            ChanOpKind::Close => "close of",
        };
        findings.push(BugFinding {
            kind: FindingKind::ChannelMutexDeadlock,
            provenance: Provenance::Predicted,
            goroutines: vec![holder.gid, needer.gid],
            blocked_at: vec![holder.seq, needer_acq.begin_seq],
            caused_by: vec![p.op_i.seq, p.op_j.seq],
            objects: vec![p.op_i.chan, p.witness],
            witness_mutex: Some(p.witness),
            detail: format!(
                "{} can block at its {} channel {} while holding mutex {}, and {}'s {} \
                 {} — the only thing that would complete it — sits behind that same mutex",
                holder.gid,
                what(holder),
                p.op_i.chan,
                p.witness,
                needer.gid,
                what(needer),
                p.op_i.chan,
            ),
        });
    }
    findings
}

/// Run every predictor with the given bounds.
pub fn predict_all(
    trace: &Trace,
    cycle_bound: usize,
    mode: SelectMode,
) -> (Vec<BugFinding>, Vec<Warning>) {
    let facts = build_lock_tuples(trace);
    let mut findings = predict_mutex_deadlock(trace, &facts, cycle_bound);
    let (double_missing, warnings) = predict_double_lock_missing_unlock(&facts);
    findings.extend(double_missing);
    findings.extend(predict_channel_mutex_deadlock(&facts, mode));
    (findings, warnings)
}
