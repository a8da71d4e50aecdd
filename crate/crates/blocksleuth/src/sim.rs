//! Deterministic simulator for goroutine programs.
//!
//! The simulator executes a [`ProgramModel`] under an explicit [`Schedule`],
//! emits the synchronization-event trace the run produces, and reports
//! ground truth about how every goroutine ended. One scheduling step runs
//! one goroutine for one micro-action; everything a micro-action causes
//! (rendezvous partners completing, waiters draining after a close) happens
//! inside the same step, so identical pick sequences always yield identical
//! traces.
//!
//! Modeled semantics:
//!
//! * Mutex: `lock` blocks while held; `unlock` of an unheld mutex faults.
//!   Release wakes all waiters and the schedule decides who retries first
//!   (barging allowed, as in the real runtime).
//! * RWMutex: writers are exclusive; a *pending* writer blocks new readers
//!   (writer priority), which is what makes a nested read-lock under writer
//!   pressure deadlock.
//! * Channels: unbuffered send/recv rendezvous; buffered send blocks when
//!   full, recv when empty; recv on a closed channel drains the buffer and
//!   then completes immediately with a zero value; send on a closed channel
//!   and close of a closed channel fault the acting goroutine.
//! * Select: a ready case completes immediately (lowest-indexed ready case,
//!   or a seed-drawn one under [`Schedule::SeededRandom`]); `default` makes
//!   it never block; otherwise it blocks until some case becomes ready.
//! * WaitGroup: `wait` blocks while the counter is positive; a delta that
//!   drives the counter negative faults.
//! * Cond: `wait` releases the mutex and blocks — no event of the waiter
//!   appears between the release and the block — and reacquires the mutex
//!   after a signal or broadcast before the wait completes. A signal with
//!   no waiter is lost.
//! * Context: `cancel` closes the context's done channel; a second cancel
//!   is a no-op.
//!
//! A fault models a runtime panic: the event for the faulting call is
//! emitted (the tracepoint fired), the operation never completes, and the
//! goroutine halts.

use crate::event::{
    Aux, Direction, Event, Gid, ObjectId, Phase, SelectCandidate, SemanticKind, Trace, TraceMeta,
};
use crate::model::{ModelError, ModelOp, ProgramModel};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::hash::{Hash, Hasher};
use thiserror::Error;

/// Default step bound for [`run`] callers that have no opinion.
pub const DEFAULT_STEP_BOUND: u64 = 100_000;

/// How the next runnable goroutine is chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Schedule {
    /// Cycle through runnable goroutines in gid order.
    RoundRobin,
    /// Pick uniformly among runnable goroutines with a seeded generator;
    /// ready select cases are drawn from the same generator.
    SeededRandom(u64),
    /// Fixed pick sequence; picking a non-runnable gid is a schedule error.
    /// When the script runs out, the run continues round-robin.
    Script(Vec<Gid>),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("schedule error at step {step}: {message}")]
    Schedule { step: u64, message: String },
}

/// Why a goroutine could not proceed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockReason {
    MutexAcquire(ObjectId),
    RwAcquireRead(ObjectId),
    RwAcquireWrite(ObjectId),
    ChanSend(ObjectId),
    ChanRecv(ObjectId),
    Select,
    WgWait(ObjectId),
    CondWait(ObjectId),
}

impl fmt::Display for BlockReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockReason::MutexAcquire(m) => write!(f, "acquiring mutex {m}"),
            BlockReason::RwAcquireRead(m) => write!(f, "read-acquiring rwmutex {m}"),
            BlockReason::RwAcquireWrite(m) => write!(f, "write-acquiring rwmutex {m}"),
            BlockReason::ChanSend(c) => write!(f, "sending on channel {c}"),
            BlockReason::ChanRecv(c) => write!(f, "receiving on channel {c}"),
            BlockReason::Select => write!(f, "in select"),
            BlockReason::WgWait(w) => write!(f, "waiting on waitgroup {w}"),
            BlockReason::CondWait(c) => write!(f, "waiting on cond {c}"),
        }
    }
}

/// A modeled runtime panic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultKind {
    SendOnClosed,
    CloseOfClosed,
    NegativeWaitGroup,
    UnlockUnheld,
    RUnlockUnheld,
    WUnlockUnheld,
    CondWaitWithoutLock,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FaultKind::SendOnClosed => "send on closed channel",
            FaultKind::CloseOfClosed => "close of closed channel",
            FaultKind::NegativeWaitGroup => "negative waitgroup counter",
            FaultKind::UnlockUnheld => "unlock of unlocked mutex",
            FaultKind::RUnlockUnheld => "read-unlock of unlocked rwmutex",
            FaultKind::WUnlockUnheld => "write-unlock of unlocked rwmutex",
            FaultKind::CondWaitWithoutLock => "cond wait without holding the mutex",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub gid: Gid,
    pub op_index: usize,
    pub kind: FaultKind,
    pub object: Option<ObjectId>,
}

/// Where a goroutine was stuck at the end of the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockedInfo {
    /// Index of the blocked op in the goroutine's body.
    pub op_index: usize,
    pub reason: BlockReason,
}

/// What actually happened in a run, independent of any detector.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Goroutines that ran to their exit.
    pub completed: BTreeSet<Gid>,
    /// Goroutines blocked at the end of the run.
    pub blocked: BTreeMap<Gid, BlockedInfo>,
    /// Spawned goroutines that neither exited nor faulted.
    pub leaked: BTreeSet<Gid>,
    /// Modeled panics, in occurrence order.
    pub faults: Vec<Fault>,
}

/// Why the run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunEnd {
    /// Every goroutine completed or faulted.
    AllDone,
    /// No goroutine was runnable but some were blocked.
    GlobalBlock,
    /// The step bound cut the run short.
    StepBound,
}

/// Per-channel accounting, used by conservation checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChanStats {
    pub capacity: u64,
    pub resident: u64,
    pub closed: bool,
    pub sends_completed: u64,
    pub recvs_with_value: u64,
    pub recvs_zero_value: u64,
}

/// Run metadata beyond the trace and ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub end: RunEnd,
    pub steps: u64,
    pub channels: BTreeMap<ObjectId, ChanStats>,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: Trace,
    pub ground_truth: GroundTruth,
    pub stats: RunStats,
}

// ---------------------------------------------------------------------------
// Simulator state

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Status {
    NotStarted,
    Runnable,
    Blocked,
    Completed,
    Faulted,
}

/// Progress of a blocking op whose Begin has been emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Engaged {
    Lock(ObjectId),
    RLock(ObjectId),
    WLock(ObjectId),
    Send(ObjectId),
    Recv(ObjectId),
    Select,
    WgWait(ObjectId),
    /// Waiting for a signal; the mutex has been released.
    CondWaiting {
        cond: ObjectId,
        mutex: ObjectId,
    },
    /// Signaled; reacquiring the mutex before the wait completes.
    CondReacquire {
        cond: ObjectId,
        mutex: ObjectId,
        begun: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct GoState {
    pc: usize,
    status: Status,
    engaged: Option<Engaged>,
    spawned: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
struct MutexState {
    holder: Option<Gid>,
    waiters: BTreeSet<Gid>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
struct RwState {
    readers: BTreeMap<Gid, u32>,
    writer: Option<Gid>,
    read_waiters: BTreeSet<Gid>,
    write_waiters: BTreeSet<Gid>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct ChanState {
    cap: u64,
    buf: u64,
    closed: bool,
    send_q: VecDeque<Gid>,
    recv_q: VecDeque<Gid>,
    sends_done: u64,
    recvs_value: u64,
    recvs_zero: u64,
}

impl Hash for ChanState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        // Completion counters are history, not behavior: exclude them so
        // the oracle can merge states that continue identically.
        self.cap.hash(state);
        self.buf.hash(state);
        self.closed.hash(state);
        self.send_q.hash(state);
        self.recv_q.hash(state);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
struct WgState {
    counter: i64,
    waiters: VecDeque<Gid>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
struct CondState {
    waiters: VecDeque<Gid>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CtxState {
    done: ObjectId,
    canceled: bool,
}

#[derive(Debug, Clone)]
struct SimState {
    gor: BTreeMap<Gid, GoState>,
    mutexes: BTreeMap<ObjectId, MutexState>,
    rwmutexes: BTreeMap<ObjectId, RwState>,
    chans: BTreeMap<ObjectId, ChanState>,
    wgs: BTreeMap<ObjectId, WgState>,
    conds: BTreeMap<ObjectId, CondState>,
    ctxs: BTreeMap<ObjectId, CtxState>,
    faults: Vec<Fault>,
}

impl SimState {
    /// Hash of the semantic state: everything that influences future
    /// behavior, nothing that only records history.
    fn semantic_hash(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.gor.hash(&mut h);
        self.mutexes.hash(&mut h);
        self.rwmutexes.hash(&mut h);
        self.chans.hash(&mut h);
        self.wgs.hash(&mut h);
        self.conds.hash(&mut h);
        self.ctxs.hash(&mut h);
        h.finish()
    }
}

/// How a ready select case is chosen when several are ready.
pub(crate) enum CasePolicy<'r> {
    /// Lowest-indexed ready case (round-robin and scripted runs).
    Lowest,
    /// Seed-drawn among the ready cases.
    Draw(&'r mut ChaCha8Rng),
}

/// An in-flight simulation: the model plus mutable state.
///
/// [`run`] drives this with a [`Schedule`]; the oracle drives it directly,
/// cloning at choice points.
#[derive(Clone)]
pub(crate) struct Sim<'m> {
    model: &'m ProgramModel,
    /// Goroutine descriptor objects referenced by GCreate events.
    descriptors: BTreeMap<Gid, ObjectId>,
    state: SimState,
}

impl<'m> Sim<'m> {
    pub(crate) fn new(model: &'m ProgramModel) -> Result<Sim<'m>, SimError> {
        model.validate()?;
        let mut gor = BTreeMap::new();
        for gid in model.goroutines.keys() {
            gor.insert(
                *gid,
                GoState {
                    pc: 0,
                    status: if *gid == model.entry {
                        Status::Runnable
                    } else {
                        Status::NotStarted
                    },
                    engaged: None,
                    spawned: false,
                },
            );
        }
        let objects = &model.objects;
        let state = SimState {
            gor,
            mutexes: objects
                .mutexes
                .iter()
                .map(|m| (*m, MutexState::default()))
                .collect(),
            rwmutexes: objects
                .rwmutexes
                .iter()
                .map(|m| (*m, RwState::default()))
                .collect(),
            chans: objects
                .channels
                .iter()
                .map(|(c, cap)| {
                    (
                        *c,
                        ChanState {
                            cap: *cap,
                            ..ChanState::default()
                        },
                    )
                })
                .collect(),
            wgs: objects
                .waitgroups
                .iter()
                .map(|w| (*w, WgState::default()))
                .collect(),
            conds: objects
                .conds
                .iter()
                .map(|c| (*c, CondState::default()))
                .collect(),
            ctxs: objects
                .contexts
                .iter()
                .map(|(c, done)| {
                    (
                        *c,
                        CtxState {
                            done: *done,
                            canceled: false,
                        },
                    )
                })
                .collect(),
            faults: Vec::new(),
        };
        // Goroutine descriptors get object ids beyond every declared one.
        let max_obj = model.object_names.keys().map(|o| o.0).max().unwrap_or(0);
        let descriptors = model
            .goroutines
            .keys()
            .enumerate()
            .map(|(i, g)| (*g, ObjectId(max_obj + 1 + i as u64)))
            .collect();
        Ok(Sim {
            model,
            descriptors,
            state,
        })
    }

    pub(crate) fn semantic_hash(&self) -> u64 {
        self.state.semantic_hash()
    }

    pub(crate) fn has_faults(&self) -> bool {
        !self.state.faults.is_empty()
    }

    /// Events every run starts with: the entry goroutine announcing itself
    /// and allocating the declared channels and contexts. Mutexes,
    /// waitgroups and conds need no announcement; analyses register those
    /// lazily on first use.
    pub(crate) fn start_events(&mut self, emit: &mut Vec<Event>) {
        let main = self.model.entry;
        self.push(
            emit,
            main,
            SemanticKind::MainStart,
            Phase::Atomic,
            None,
            Aux::None,
        );
        let done_chans: BTreeSet<ObjectId> =
            self.model.objects.contexts.values().copied().collect();
        for (chan, cap) in &self.model.objects.channels {
            if !done_chans.contains(chan) {
                self.push(
                    emit,
                    main,
                    SemanticKind::ChanCreate,
                    Phase::Atomic,
                    Some(*chan),
                    Aux::Capacity { cap: *cap },
                );
            }
        }
        for (ctx, done) in &self.model.objects.contexts {
            let cap = self.model.objects.channels[done];
            self.push(
                emit,
                main,
                SemanticKind::ChanCreate,
                Phase::Atomic,
                Some(*done),
                Aux::Capacity { cap },
            );
            self.push(
                emit,
                main,
                SemanticKind::CtxCreate,
                Phase::Atomic,
                Some(*ctx),
                Aux::Done { chan: *done },
            );
        }
    }

    pub(crate) fn runnable(&self) -> Vec<Gid> {
        self.state
            .gor
            .iter()
            .filter(|(_, g)| g.status == Status::Runnable)
            .map(|(gid, _)| *gid)
            .collect()
    }

    pub(crate) fn ground_truth(&self) -> GroundTruth {
        let mut truth = GroundTruth::default();
        for (gid, g) in &self.state.gor {
            match g.status {
                Status::Completed => {
                    truth.completed.insert(*gid);
                }
                Status::Blocked => {
                    let reason = match g.engaged.expect("blocked goroutine is engaged") {
                        Engaged::Lock(m) => BlockReason::MutexAcquire(m),
                        Engaged::RLock(m) => BlockReason::RwAcquireRead(m),
                        Engaged::WLock(m) => BlockReason::RwAcquireWrite(m),
                        Engaged::Send(c) => BlockReason::ChanSend(c),
                        Engaged::Recv(c) => BlockReason::ChanRecv(c),
                        Engaged::Select => BlockReason::Select,
                        Engaged::WgWait(w) => BlockReason::WgWait(w),
                        Engaged::CondWaiting { cond, .. } => BlockReason::CondWait(cond),
                        // Blocked reacquiring the guard mutex inside a wait.
                        Engaged::CondReacquire { mutex, .. } => BlockReason::MutexAcquire(mutex),
                    };
                    truth.blocked.insert(
                        *gid,
                        BlockedInfo {
                            op_index: g.pc,
                            reason,
                        },
                    );
                }
                _ => {}
            }
            if g.spawned && !matches!(g.status, Status::Completed | Status::Faulted) {
                truth.leaked.insert(*gid);
            }
        }
        truth.faults = self.state.faults.clone();
        truth
    }

    pub(crate) fn chan_stats(&self) -> BTreeMap<ObjectId, ChanStats> {
        self.state
            .chans
            .iter()
            .map(|(id, c)| {
                (
                    *id,
                    ChanStats {
                        capacity: c.cap,
                        resident: c.buf,
                        closed: c.closed,
                        sends_completed: c.sends_done,
                        recvs_with_value: c.recvs_value,
                        recvs_zero_value: c.recvs_zero,
                    },
                )
            })
            .collect()
    }

    fn push(
        &mut self,
        emit: &mut Vec<Event>,
        gid: Gid,
        kind: SemanticKind,
        phase: Phase,
        obj: Option<ObjectId>,
        aux: Aux,
    ) {
        // seq and ts are stamped by the driver.
        emit.push(Event::new(0, 0, gid, kind, phase, obj, aux));
    }

    fn fault(&mut self, gid: Gid, kind: FaultKind, object: Option<ObjectId>) {
        let g = self.state.gor.get_mut(&gid).unwrap();
        let op_index = g.pc;
        g.status = Status::Faulted;
        g.engaged = None;
        self.state.faults.push(Fault {
            gid,
            op_index,
            kind,
            object,
        });
    }

    fn set_runnable(&mut self, gid: Gid) {
        let g = self.state.gor.get_mut(&gid).unwrap();
        debug_assert_eq!(g.status, Status::Blocked);
        g.status = Status::Runnable;
    }

    fn block(&mut self, gid: Gid) {
        self.state.gor.get_mut(&gid).unwrap().status = Status::Blocked;
    }

    fn finish_op(&mut self, gid: Gid) {
        let g = self.state.gor.get_mut(&gid).unwrap();
        g.engaged = None;
        g.pc += 1;
        g.status = Status::Runnable;
    }

    fn current_op(&self, gid: Gid) -> &'m ModelOp {
        let g = &self.state.gor[&gid];
        &self.model.goroutines[&gid][g.pc]
    }

    /// Run one micro-action of `gid`. The caller guarantees `gid` is
    /// runnable. Emitted events are appended to `emit`.
    pub(crate) fn step(&mut self, gid: Gid, policy: &mut CasePolicy<'_>, emit: &mut Vec<Event>) {
        debug_assert_eq!(self.state.gor[&gid].status, Status::Runnable);
        if let Some(engaged) = self.state.gor[&gid].engaged {
            self.progress_engaged(gid, engaged, emit);
        } else {
            self.issue(gid, policy, emit);
        }
        #[cfg(debug_assertions)]
        self.check_invariants();
    }

    /// Retry an op whose Begin is already emitted and which was woken.
    fn progress_engaged(&mut self, gid: Gid, engaged: Engaged, emit: &mut Vec<Event>) {
        match engaged {
            Engaged::Lock(m) => {
                if !self.try_acquire_mutex(gid, m, emit) {
                    self.state.mutexes.get_mut(&m).unwrap().waiters.insert(gid);
                    self.block(gid);
                }
            }
            Engaged::RLock(m) => {
                if !self.try_acquire_read(gid, m, emit) {
                    self.state
                        .rwmutexes
                        .get_mut(&m)
                        .unwrap()
                        .read_waiters
                        .insert(gid);
                    self.block(gid);
                }
            }
            Engaged::WLock(m) => {
                if !self.try_acquire_write(gid, m, emit) {
                    self.state
                        .rwmutexes
                        .get_mut(&m)
                        .unwrap()
                        .write_waiters
                        .insert(gid);
                    self.block(gid);
                }
            }
            Engaged::CondReacquire { cond, mutex, begun } => {
                if !begun {
                    self.push(
                        emit,
                        gid,
                        SemanticKind::MutexLock,
                        Phase::Begin,
                        Some(mutex),
                        Aux::None,
                    );
                    self.state.gor.get_mut(&gid).unwrap().engaged = Some(Engaged::CondReacquire {
                        cond,
                        mutex,
                        begun: true,
                    });
                }
                let mu = self.state.mutexes.get_mut(&mutex).unwrap();
                if mu.holder.is_none() {
                    mu.holder = Some(gid);
                    mu.waiters.remove(&gid);
                    self.push(
                        emit,
                        gid,
                        SemanticKind::MutexLock,
                        Phase::End,
                        Some(mutex),
                        Aux::None,
                    );
                    self.push(
                        emit,
                        gid,
                        SemanticKind::CondWait,
                        Phase::End,
                        Some(cond),
                        Aux::None,
                    );
                    self.finish_op(gid);
                } else {
                    mu.waiters.insert(gid);
                    self.block(gid);
                }
            }
            // Channel ops, waitgroup waits and cond waits are completed
            // eagerly by their peers, never woken to retry.
            other => unreachable!("{other:?} is completed by peers, not retried"),
        }
    }

    fn issue(&mut self, gid: Gid, policy: &mut CasePolicy<'_>, emit: &mut Vec<Event>) {
        match self.current_op(gid).clone() {
            ModelOp::Exit => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::GExit,
                    Phase::Atomic,
                    None,
                    Aux::None,
                );
                let g = self.state.gor.get_mut(&gid).unwrap();
                g.status = Status::Completed;
            }
            ModelOp::Spawn(child) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::GCreate,
                    Phase::Atomic,
                    Some(self.descriptors[&child]),
                    Aux::Child { gid: child },
                );
                let c = self.state.gor.get_mut(&child).unwrap();
                debug_assert_eq!(c.status, Status::NotStarted);
                c.status = Status::Runnable;
                c.spawned = true;
                self.advance(gid);
            }
            ModelOp::Lock(m) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::MutexLock,
                    Phase::Begin,
                    Some(m),
                    Aux::None,
                );
                self.state.gor.get_mut(&gid).unwrap().engaged = Some(Engaged::Lock(m));
                if !self.try_acquire_mutex(gid, m, emit) {
                    self.state.mutexes.get_mut(&m).unwrap().waiters.insert(gid);
                    self.block(gid);
                }
            }
            ModelOp::Unlock(m) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::MutexUnlock,
                    Phase::Atomic,
                    Some(m),
                    Aux::None,
                );
                self.unlock_mutex(gid, m, FaultKind::UnlockUnheld);
            }
            ModelOp::RLock(m) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::RWMutexRLock,
                    Phase::Begin,
                    Some(m),
                    Aux::None,
                );
                self.state.gor.get_mut(&gid).unwrap().engaged = Some(Engaged::RLock(m));
                if !self.try_acquire_read(gid, m, emit) {
                    self.state
                        .rwmutexes
                        .get_mut(&m)
                        .unwrap()
                        .read_waiters
                        .insert(gid);
                    self.block(gid);
                }
            }
            ModelOp::RUnlock(m) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::RWMutexRUnlock,
                    Phase::Atomic,
                    Some(m),
                    Aux::None,
                );
                let rw = self.state.rwmutexes.get_mut(&m).unwrap();
                // The count is shared: any goroutine may drop a read hold,
                // preferably its own.
                let key = if rw.readers.get(&gid).copied().unwrap_or(0) > 0 {
                    Some(gid)
                } else {
                    rw.readers.keys().next().copied()
                };
                match key {
                    Some(k) => {
                        let n = rw.readers.get_mut(&k).unwrap();
                        *n -= 1;
                        if *n == 0 {
                            rw.readers.remove(&k);
                        }
                        if rw.readers.is_empty() {
                            let writers: Vec<Gid> =
                                std::mem::take(&mut rw.write_waiters).into_iter().collect();
                            for w in writers {
                                self.set_runnable(w);
                            }
                        }
                        self.advance(gid);
                    }
                    None => self.fault(gid, FaultKind::RUnlockUnheld, Some(m)),
                }
            }
            ModelOp::WLock(m) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::RWMutexLock,
                    Phase::Begin,
                    Some(m),
                    Aux::None,
                );
                self.state.gor.get_mut(&gid).unwrap().engaged = Some(Engaged::WLock(m));
                if !self.try_acquire_write(gid, m, emit) {
                    self.state
                        .rwmutexes
                        .get_mut(&m)
                        .unwrap()
                        .write_waiters
                        .insert(gid);
                    self.block(gid);
                }
            }
            ModelOp::WUnlock(m) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::RWMutexUnlock,
                    Phase::Atomic,
                    Some(m),
                    Aux::None,
                );
                let rw = self.state.rwmutexes.get_mut(&m).unwrap();
                if rw.writer.is_some() {
                    rw.writer = None;
                    let woken: Vec<Gid> = std::mem::take(&mut rw.write_waiters)
                        .into_iter()
                        .chain(std::mem::take(&mut rw.read_waiters))
                        .collect();
                    for w in woken {
                        self.set_runnable(w);
                    }
                    self.advance(gid);
                } else {
                    self.fault(gid, FaultKind::WUnlockUnheld, Some(m));
                }
            }
            ModelOp::Send(ch) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::ChanSend,
                    Phase::Begin,
                    Some(ch),
                    Aux::Block { block: true },
                );
                self.state.gor.get_mut(&gid).unwrap().engaged = Some(Engaged::Send(ch));
                self.try_send(gid, ch, emit);
            }
            ModelOp::Recv(ch) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::ChanRecv,
                    Phase::Begin,
                    Some(ch),
                    Aux::Block { block: true },
                );
                self.state.gor.get_mut(&gid).unwrap().engaged = Some(Engaged::Recv(ch));
                self.try_recv(gid, ch, emit);
            }
            ModelOp::Close(ch) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::ChanClose,
                    Phase::Atomic,
                    Some(ch),
                    Aux::None,
                );
                if self.state.chans[&ch].closed {
                    self.fault(gid, FaultKind::CloseOfClosed, Some(ch));
                } else {
                    self.close_channel(ch, emit);
                    self.advance(gid);
                }
            }
            ModelOp::Select {
                candidates,
                has_default,
            } => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::Select,
                    Phase::Begin,
                    None,
                    Aux::Select {
                        candidates: candidates.clone(),
                        has_default,
                    },
                );
                self.state.gor.get_mut(&gid).unwrap().engaged = Some(Engaged::Select);
                let ready = self.ready_cases(&candidates);
                if ready.is_empty() {
                    if has_default {
                        // The default case: complete with no channel effect.
                        self.emit_select_end(gid, emit);
                        self.finish_op(gid);
                    } else {
                        for cand in &candidates {
                            let c = self.state.chans.get_mut(&cand.chan).unwrap();
                            match cand.dir {
                                Direction::Send => c.send_q.push_back(gid),
                                Direction::Recv => c.recv_q.push_back(gid),
                            }
                        }
                        self.block(gid);
                    }
                } else {
                    let pick = match policy {
                        CasePolicy::Lowest => ready[0],
                        CasePolicy::Draw(rng) => ready[rng.gen_range(0..ready.len())],
                    };
                    self.complete_select_case(gid, &candidates[pick], emit);
                }
            }
            ModelOp::WgAdd(w, delta) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::WGAdd,
                    Phase::Atomic,
                    Some(w),
                    Aux::Delta { delta },
                );
                let wg = self.state.wgs.get_mut(&w).unwrap();
                if wg.counter + delta < 0 {
                    self.fault(gid, FaultKind::NegativeWaitGroup, Some(w));
                } else {
                    wg.counter += delta;
                    if wg.counter == 0 {
                        let waiters = std::mem::take(&mut wg.waiters);
                        for waiter in waiters {
                            self.push(
                                emit,
                                waiter,
                                SemanticKind::WGWait,
                                Phase::End,
                                Some(w),
                                Aux::None,
                            );
                            self.finish_op(waiter);
                        }
                    }
                    self.advance(gid);
                }
            }
            ModelOp::WgWait(w) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::WGWait,
                    Phase::Begin,
                    Some(w),
                    Aux::None,
                );
                self.state.gor.get_mut(&gid).unwrap().engaged = Some(Engaged::WgWait(w));
                let wg = self.state.wgs.get_mut(&w).unwrap();
                if wg.counter == 0 {
                    self.push(
                        emit,
                        gid,
                        SemanticKind::WGWait,
                        Phase::End,
                        Some(w),
                        Aux::None,
                    );
                    self.finish_op(gid);
                } else {
                    wg.waiters.push_back(gid);
                    self.block(gid);
                }
            }
            ModelOp::CtxCancel(ctx) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::CtxCancel,
                    Phase::Atomic,
                    Some(ctx),
                    Aux::None,
                );
                let c = self.state.ctxs.get_mut(&ctx).unwrap();
                if !c.canceled {
                    c.canceled = true;
                    let done = c.done;
                    // Cancel closes the done channel; the close tracepoint
                    // fires like any other close.
                    self.push(
                        emit,
                        gid,
                        SemanticKind::ChanClose,
                        Phase::Atomic,
                        Some(done),
                        Aux::None,
                    );
                    self.close_channel(done, emit);
                }
                self.advance(gid);
            }
            ModelOp::CondWait(cond, mutex) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::CondWait,
                    Phase::Begin,
                    Some(cond),
                    Aux::None,
                );
                // Wait releases the guard mutex first; waiting without
                // holding it is the classic panic.
                if self.state.mutexes[&mutex].holder != Some(gid) {
                    self.fault(gid, FaultKind::CondWaitWithoutLock, Some(mutex));
                    return;
                }
                self.push(
                    emit,
                    gid,
                    SemanticKind::MutexUnlock,
                    Phase::Atomic,
                    Some(mutex),
                    Aux::None,
                );
                let mu = self.state.mutexes.get_mut(&mutex).unwrap();
                mu.holder = None;
                let woken: Vec<Gid> = std::mem::take(&mut mu.waiters).into_iter().collect();
                for wk in woken {
                    self.set_runnable(wk);
                }
                // Between the release above and this block the waiter emits
                // nothing; it reappears only when signaled.
                let g = self.state.gor.get_mut(&gid).unwrap();
                g.engaged = Some(Engaged::CondWaiting { cond, mutex });
                g.status = Status::Blocked;
                self.state
                    .conds
                    .get_mut(&cond)
                    .unwrap()
                    .waiters
                    .push_back(gid);
            }
            ModelOp::CondSignal(cond) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::CondSignal,
                    Phase::Atomic,
                    Some(cond),
                    Aux::None,
                );
                // Wake the first waiter; a signal with no waiter is lost.
                if let Some(waiter) = self.state.conds.get_mut(&cond).unwrap().waiters.pop_front() {
                    self.wake_cond_waiter(waiter);
                }
                self.advance(gid);
            }
            ModelOp::CondBroadcast(cond) => {
                self.push(
                    emit,
                    gid,
                    SemanticKind::CondBroadcast,
                    Phase::Atomic,
                    Some(cond),
                    Aux::None,
                );
                let waiters = std::mem::take(&mut self.state.conds.get_mut(&cond).unwrap().waiters);
                for waiter in waiters {
                    self.wake_cond_waiter(waiter);
                }
                self.advance(gid);
            }
        }
    }

    /// Complete an atomic op: move past it, stay runnable.
    fn advance(&mut self, gid: Gid) {
        let g = self.state.gor.get_mut(&gid).unwrap();
        g.pc += 1;
    }

    fn wake_cond_waiter(&mut self, waiter: Gid) {
        let g = self.state.gor.get_mut(&waiter).unwrap();
        let Some(Engaged::CondWaiting { cond, mutex }) = g.engaged else {
            unreachable!("cond queue entries are waiting goroutines");
        };
        g.engaged = Some(Engaged::CondReacquire {
            cond,
            mutex,
            begun: false,
        });
        g.status = Status::Runnable;
    }

    fn try_acquire_mutex(&mut self, gid: Gid, m: ObjectId, emit: &mut Vec<Event>) -> bool {
        let mu = self.state.mutexes.get_mut(&m).unwrap();
        if mu.holder.is_none() {
            mu.holder = Some(gid);
            mu.waiters.remove(&gid);
            self.push(
                emit,
                gid,
                SemanticKind::MutexLock,
                Phase::End,
                Some(m),
                Aux::None,
            );
            self.finish_op(gid);
            true
        } else {
            false
        }
    }

    fn unlock_mutex(&mut self, gid: Gid, m: ObjectId, fault: FaultKind) {
        let mu = self.state.mutexes.get_mut(&m).unwrap();
        if mu.holder.is_some() {
            // Any goroutine may unlock a held mutex; only unlocking an
            // unheld one panics.
            mu.holder = None;
            let woken: Vec<Gid> = std::mem::take(&mut mu.waiters).into_iter().collect();
            for w in woken {
                self.set_runnable(w);
            }
            self.advance(gid);
        } else {
            self.fault(gid, fault, Some(m));
        }
    }

    fn try_acquire_read(&mut self, gid: Gid, m: ObjectId, emit: &mut Vec<Event>) -> bool {
        let rw = self.state.rwmutexes.get_mut(&m).unwrap();
        // Writer priority: a blocked writer keeps new readers out.
        if rw.writer.is_none() && rw.write_waiters.is_empty() {
            *rw.readers.entry(gid).or_insert(0) += 1;
            rw.read_waiters.remove(&gid);
            self.push(
                emit,
                gid,
                SemanticKind::RWMutexRLock,
                Phase::End,
                Some(m),
                Aux::None,
            );
            self.finish_op(gid);
            true
        } else {
            false
        }
    }

    fn try_acquire_write(&mut self, gid: Gid, m: ObjectId, emit: &mut Vec<Event>) -> bool {
        let rw = self.state.rwmutexes.get_mut(&m).unwrap();
        if rw.writer.is_none() && rw.readers.is_empty() {
            rw.writer = Some(gid);
            rw.write_waiters.remove(&gid);
            self.push(
                emit,
                gid,
                SemanticKind::RWMutexLock,
                Phase::End,
                Some(m),
                Aux::None,
            );
            self.finish_op(gid);
            true
        } else {
            false
        }
    }

    // -- channels ----------------------------------------------------------

    /// Next queued waiter still blocked on this channel in the given role.
    /// Selects register in several queues, so entries can be stale.
    fn next_live_waiter(&mut self, ch: ObjectId, dir: Direction) -> Option<Gid> {
        loop {
            let c = self.state.chans.get_mut(&ch).unwrap();
            let q = match dir {
                Direction::Send => &mut c.send_q,
                Direction::Recv => &mut c.recv_q,
            };
            let gid = q.pop_front()?;
            let g = &self.state.gor[&gid];
            if g.status != Status::Blocked {
                continue;
            }
            let live = match (dir, g.engaged) {
                (Direction::Send, Some(Engaged::Send(c2))) => c2 == ch,
                (Direction::Recv, Some(Engaged::Recv(c2))) => c2 == ch,
                (_, Some(Engaged::Select)) => true,
                _ => false,
            };
            if live {
                return Some(gid);
            }
        }
    }

    fn has_live_waiter(&self, ch: ObjectId, dir: Direction) -> bool {
        let c = &self.state.chans[&ch];
        let q = match dir {
            Direction::Send => &c.send_q,
            Direction::Recv => &c.recv_q,
        };
        q.iter().any(|gid| {
            let g = &self.state.gor[gid];
            if g.status != Status::Blocked {
                return false;
            }
            match (dir, g.engaged) {
                (Direction::Send, Some(Engaged::Send(c2))) => c2 == ch,
                (Direction::Recv, Some(Engaged::Recv(c2))) => c2 == ch,
                (_, Some(Engaged::Select)) => true,
                _ => false,
            }
        })
    }

    /// Remove a select waiter from every queue it registered in.
    fn deregister_select(&mut self, gid: Gid) {
        if let ModelOp::Select { candidates, .. } = self.current_op(gid) {
            for cand in candidates {
                let c = self.state.chans.get_mut(&cand.chan).unwrap();
                c.send_q.retain(|g| *g != gid);
                c.recv_q.retain(|g| *g != gid);
            }
        }
    }

    fn emit_select_end(&mut self, gid: Gid, emit: &mut Vec<Event>) {
        let ModelOp::Select {
            candidates,
            has_default,
        } = self.current_op(gid)
        else {
            unreachable!("select completion for a non-select op");
        };
        let aux = Aux::Select {
            candidates: candidates.clone(),
            has_default: *has_default,
        };
        self.push(emit, gid, SemanticKind::Select, Phase::End, None, aux);
    }

    /// Complete a blocked waiter whose receive side was satisfied.
    fn complete_waiter_recv(&mut self, gid: Gid, ch: ObjectId, zero: bool, emit: &mut Vec<Event>) {
        {
            let c = self.state.chans.get_mut(&ch).unwrap();
            if zero {
                c.recvs_zero += 1;
            } else {
                c.recvs_value += 1;
            }
        }
        match self.state.gor[&gid].engaged {
            Some(Engaged::Recv(c2)) => {
                debug_assert_eq!(c2, ch);
                self.push(
                    emit,
                    gid,
                    SemanticKind::ChanRecv,
                    Phase::End,
                    Some(ch),
                    Aux::Block { block: true },
                );
            }
            Some(Engaged::Select) => {
                self.deregister_select(gid);
                self.emit_select_end(gid, emit);
            }
            other => unreachable!("recv completion for {other:?}"),
        }
        self.finish_op(gid);
    }

    /// Complete a blocked waiter whose send side was satisfied.
    fn complete_waiter_send(&mut self, gid: Gid, ch: ObjectId, emit: &mut Vec<Event>) {
        self.state.chans.get_mut(&ch).unwrap().sends_done += 1;
        match self.state.gor[&gid].engaged {
            Some(Engaged::Send(c2)) => {
                debug_assert_eq!(c2, ch);
                self.push(
                    emit,
                    gid,
                    SemanticKind::ChanSend,
                    Phase::End,
                    Some(ch),
                    Aux::Block { block: true },
                );
            }
            Some(Engaged::Select) => {
                self.deregister_select(gid);
                self.emit_select_end(gid, emit);
            }
            other => unreachable!("send completion for {other:?}"),
        }
        self.finish_op(gid);
    }

    /// Attempt the send issued by `gid` (its Begin is already emitted).
    fn try_send(&mut self, gid: Gid, ch: ObjectId, emit: &mut Vec<Event>) {
        if self.state.chans[&ch].closed {
            self.fault(gid, FaultKind::SendOnClosed, Some(ch));
            return;
        }
        if let Some(receiver) = self.next_live_waiter(ch, Direction::Recv) {
            // Rendezvous or direct handoff: the value skips the buffer.
            self.complete_waiter_recv(receiver, ch, false, emit);
            self.state.chans.get_mut(&ch).unwrap().sends_done += 1;
            self.push(
                emit,
                gid,
                SemanticKind::ChanSend,
                Phase::End,
                Some(ch),
                Aux::Block { block: true },
            );
            self.finish_op(gid);
            return;
        }
        let c = self.state.chans.get_mut(&ch).unwrap();
        if c.buf < c.cap {
            c.buf += 1;
            c.sends_done += 1;
            self.push(
                emit,
                gid,
                SemanticKind::ChanSend,
                Phase::End,
                Some(ch),
                Aux::Block { block: true },
            );
            self.finish_op(gid);
        } else {
            c.send_q.push_back(gid);
            self.block(gid);
        }
    }

    /// Attempt the receive issued by `gid` (its Begin is already emitted).
    fn try_recv(&mut self, gid: Gid, ch: ObjectId, emit: &mut Vec<Event>) {
        let (buf, closed) = {
            let c = &self.state.chans[&ch];
            (c.buf, c.closed)
        };
        if buf > 0 {
            {
                let c = self.state.chans.get_mut(&ch).unwrap();
                c.buf -= 1;
                c.recvs_value += 1;
            }
            self.push(
                emit,
                gid,
                SemanticKind::ChanRecv,
                Phase::End,
                Some(ch),
                Aux::Block { block: true },
            );
            self.finish_op(gid);
            // A sender blocked on the full buffer can move its item in now.
            if let Some(sender) = self.next_live_waiter(ch, Direction::Send) {
                self.state.chans.get_mut(&ch).unwrap().buf += 1;
                self.complete_waiter_send(sender, ch, emit);
            }
            return;
        }
        if let Some(sender) = self.next_live_waiter(ch, Direction::Send) {
            // Unbuffered rendezvous.
            self.complete_waiter_send(sender, ch, emit);
            self.state.chans.get_mut(&ch).unwrap().recvs_value += 1;
            self.push(
                emit,
                gid,
                SemanticKind::ChanRecv,
                Phase::End,
                Some(ch),
                Aux::Block { block: true },
            );
            self.finish_op(gid);
            return;
        }
        if closed {
            self.state.chans.get_mut(&ch).unwrap().recvs_zero += 1;
            self.push(
                emit,
                gid,
                SemanticKind::ChanRecv,
                Phase::End,
                Some(ch),
                Aux::Block { block: true },
            );
            self.finish_op(gid);
        } else {
            self.state.chans.get_mut(&ch).unwrap().recv_q.push_back(gid);
            self.block(gid);
        }
    }

    /// Ready-case indices of a select, in candidate order.
    fn ready_cases(&self, candidates: &[SelectCandidate]) -> Vec<usize> {
        candidates
            .iter()
            .enumerate()
            .filter(|(_, cand)| {
                let c = &self.state.chans[&cand.chan];
                match cand.dir {
                    // A send on a closed channel is "ready": choosing it
                    // faults, exactly like the runtime panicking.
                    Direction::Send => {
                        c.closed
                            || c.buf < c.cap
                            || self.has_live_waiter(cand.chan, Direction::Recv)
                    }
                    Direction::Recv => {
                        c.buf > 0 || c.closed || self.has_live_waiter(cand.chan, Direction::Send)
                    }
                }
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Complete `gid`'s select through one ready case.
    fn complete_select_case(&mut self, gid: Gid, cand: &SelectCandidate, emit: &mut Vec<Event>) {
        let ch = cand.chan;
        match cand.dir {
            Direction::Send => {
                if self.state.chans[&ch].closed {
                    self.deregister_select(gid);
                    self.fault(gid, FaultKind::SendOnClosed, Some(ch));
                    return;
                }
                if let Some(receiver) = self.next_live_waiter(ch, Direction::Recv) {
                    self.complete_waiter_recv(receiver, ch, false, emit);
                } else {
                    let c = self.state.chans.get_mut(&ch).unwrap();
                    debug_assert!(c.buf < c.cap, "chosen send case must be ready");
                    c.buf += 1;
                }
                self.state.chans.get_mut(&ch).unwrap().sends_done += 1;
            }
            Direction::Recv => {
                let (buf, closed) = {
                    let c = &self.state.chans[&ch];
                    (c.buf, c.closed)
                };
                if buf > 0 {
                    let c = self.state.chans.get_mut(&ch).unwrap();
                    c.buf -= 1;
                    c.recvs_value += 1;
                    if let Some(sender) = self.next_live_waiter(ch, Direction::Send) {
                        self.state.chans.get_mut(&ch).unwrap().buf += 1;
                        self.complete_waiter_send(sender, ch, emit);
                    }
                } else if let Some(sender) = self.next_live_waiter(ch, Direction::Send) {
                    self.complete_waiter_send(sender, ch, emit);
                    self.state.chans.get_mut(&ch).unwrap().recvs_value += 1;
                } else {
                    debug_assert!(closed, "chosen recv case must be ready");
                    self.state.chans.get_mut(&ch).unwrap().recvs_zero += 1;
                }
            }
        }
        self.deregister_select(gid);
        self.emit_select_end(gid, emit);
        self.finish_op(gid);
    }

    /// Mark `ch` closed and resolve every waiter: receivers complete with a
    /// zero value, blocked senders fault, and blocked selects complete or
    /// fault through their lowest-indexed now-ready case.
    fn close_channel(&mut self, ch: ObjectId, emit: &mut Vec<Event>) {
        self.state.chans.get_mut(&ch).unwrap().closed = true;
        while let Some(waiter) = self.next_live_waiter(ch, Direction::Recv) {
            match self.state.gor[&waiter].engaged {
                Some(Engaged::Recv(_)) => {
                    debug_assert_eq!(self.state.chans[&ch].buf, 0);
                    self.complete_waiter_recv(waiter, ch, true, emit);
                }
                Some(Engaged::Select) => self.resolve_blocked_select(waiter, emit),
                _ => unreachable!(),
            }
        }
        while let Some(waiter) = self.next_live_waiter(ch, Direction::Send) {
            match self.state.gor[&waiter].engaged {
                Some(Engaged::Send(_)) => {
                    // The close panics blocked senders; their send never
                    // completes.
                    self.fault(waiter, FaultKind::SendOnClosed, Some(ch));
                }
                Some(Engaged::Select) => self.resolve_blocked_select(waiter, emit),
                _ => unreachable!(),
            }
        }
    }

    /// Re-evaluate a blocked select after a channel it watches changed.
    fn resolve_blocked_select(&mut self, gid: Gid, emit: &mut Vec<Event>) {
        let ModelOp::Select { candidates, .. } = self.current_op(gid) else {
            unreachable!();
        };
        let candidates = candidates.clone();
        let ready = self.ready_cases(&candidates);
        debug_assert!(!ready.is_empty(), "woken select must have a ready case");
        // Eager completions always take the lowest ready case; only the
        // issuing step consults the seeded draw.
        self.complete_select_case(gid, &candidates[ready[0]], emit);
    }

    /// Safety net over the lock structures; cheap enough to run per step
    /// in debug builds.
    #[cfg(debug_assertions)]
    fn check_invariants(&self) {
        for (id, rw) in &self.state.rwmutexes {
            assert!(
                rw.writer.is_none() || rw.readers.is_empty(),
                "rwmutex {id}: reader and writer hold simultaneously"
            );
        }
        for (id, c) in &self.state.chans {
            assert!(c.buf <= c.cap, "channel {id}: buffer over capacity");
        }
    }
}

// ---------------------------------------------------------------------------
// Driver

struct Picker {
    schedule: Schedule,
    rng: Option<ChaCha8Rng>,
    script_pos: usize,
    rr_last: Option<Gid>,
}

impl Picker {
    fn new(schedule: &Schedule) -> Picker {
        Picker {
            schedule: schedule.clone(),
            rng: match schedule {
                Schedule::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(*seed)),
                _ => None,
            },
            script_pos: 0,
            rr_last: None,
        }
    }

    fn round_robin(&mut self, runnable: &[Gid]) -> Gid {
        let pick = self
            .rr_last
            .and_then(|last| runnable.iter().copied().find(|g| *g > last))
            .unwrap_or(runnable[0]);
        self.rr_last = Some(pick);
        pick
    }

    /// `runnable` is sorted and non-empty.
    fn pick(&mut self, runnable: &[Gid], step: u64) -> Result<Gid, SimError> {
        match &self.schedule {
            Schedule::RoundRobin => Ok(self.round_robin(runnable)),
            Schedule::SeededRandom(_) => {
                let rng = self.rng.as_mut().unwrap();
                Ok(runnable[rng.gen_range(0..runnable.len())])
            }
            Schedule::Script(picks) => {
                if self.script_pos < picks.len() {
                    let pick = picks[self.script_pos];
                    self.script_pos += 1;
                    if runnable.contains(&pick) {
                        Ok(pick)
                    } else {
                        Err(SimError::Schedule {
                            step,
                            message: format!("scripted pick {pick} is not runnable"),
                        })
                    }
                } else {
                    Ok(self.round_robin(runnable))
                }
            }
        }
    }

    fn case_policy(&mut self) -> CasePolicy<'_> {
        match self.rng.as_mut() {
            Some(rng) => CasePolicy::Draw(rng),
            None => CasePolicy::Lowest,
        }
    }
}

/// Execute `model` under `schedule` until every goroutine is done, nothing
/// is runnable, or `step_bound` scheduling steps have run.
pub fn run(
    model: &ProgramModel,
    schedule: &Schedule,
    step_bound: u64,
) -> Result<RunOutcome, SimError> {
    let mut sim = Sim::new(model)?;
    let mut picker = Picker::new(schedule);
    let mut events = Vec::new();
    let mut scratch = Vec::new();
    let mut ts = 1u64;
    sim.start_events(&mut scratch);
    stamp(&mut events, &mut scratch, ts);

    let mut steps = 0u64;
    let end = loop {
        let runnable = sim.runnable();
        if runnable.is_empty() {
            break if sim.ground_truth().blocked.is_empty() {
                RunEnd::AllDone
            } else {
                RunEnd::GlobalBlock
            };
        }
        if steps >= step_bound {
            break RunEnd::StepBound;
        }
        let pick = picker.pick(&runnable, steps + 1)?;
        steps += 1;
        ts += 1;
        sim.step(pick, &mut picker.case_policy(), &mut scratch);
        stamp(&mut events, &mut scratch, ts);
    };

    let mut meta = TraceMeta::new(&model.name);
    meta.go_version = None;
    Ok(RunOutcome {
        ground_truth: sim.ground_truth(),
        stats: RunStats {
            end,
            steps,
            channels: sim.chan_stats(),
        },
        trace: Trace::new(meta, events),
    })
}

fn stamp(events: &mut Vec<Event>, scratch: &mut Vec<Event>, ts: u64) {
    for mut ev in scratch.drain(..) {
        ev.seq = events.len() as u64 + 1;
        ev.ts = ts;
        events.push(ev);
    }
}
