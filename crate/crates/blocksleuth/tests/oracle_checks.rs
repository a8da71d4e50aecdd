//! Independent cross-checks for the derived machinery.
//!
//! Two pieces of the library compute answers that are easy to get subtly
//! wrong: the Begin/End pairing scan (which defines "still blocked") and
//! the schedule-exploration verdicts (reachability and shortest-witness
//! length). This file re-derives both from scratch — a from-first-
//! principles pairing walk, and brute-force enumeration of scripted
//! schedules through the public simulator — and pins the library against
//! them on fuzzed traces and hand-built kernels.

use blocksleuth::event::{match_begin_end, Aux, Phase, Trace};
use blocksleuth::fuzz::{detector_family, exploration_family};
use blocksleuth::model::{ModelBuilder, ModelOp, ProgramModel};
use blocksleuth::oracle::{explore, witness_schedule, OracleConfig};
use blocksleuth::sim::{run, RunEnd, Schedule, DEFAULT_STEP_BOUND};
use blocksleuth::Gid;
use std::collections::{BTreeMap, BTreeSet};

fn corpus_model(name: &str) -> ProgramModel {
    let case = blocksleuth::corpus::all_cases()
        .into_iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("no corpus case named {name}"));
    ProgramModel::parse(case.model).expect("corpus model parses")
}

// ---------------------------------------------------------------------------
// Independent Begin/End pairing

/// Pair Begins with Ends using nothing but the event stream: one open slot
/// per (goroutine, kind, object, select-signature). Returns the begin-seq
/// to end-seq map and the seqs of Begins still open at trace end.
fn naive_pairs(trace: &Trace) -> (BTreeMap<u64, u64>, Vec<u64>) {
    let mut open: BTreeMap<(u64, String), u64> = BTreeMap::new();
    let mut pairs = BTreeMap::new();
    for ev in &trace.events {
        // Selects carry no object; their candidate list stands in.
        let sig = match &ev.aux {
            sel @ Aux::Select { .. } => format!("{:?}|{sel:?}", ev.kind),
            _ => format!("{:?}|{:?}", ev.kind, ev.obj),
        };
        let key = (ev.gid.0, sig);
        match ev.phase {
            Phase::Begin => {
                let clash = open.insert(key, ev.seq);
                assert!(
                    clash.is_none(),
                    "seq {}: second open Begin for one op key (first at {:?})",
                    ev.seq,
                    clash
                );
            }
            Phase::End => {
                let begin = open
                    .remove(&key)
                    .unwrap_or_else(|| panic!("seq {}: End without an open Begin", ev.seq));
                pairs.insert(begin, ev.seq);
            }
            Phase::Atomic => {}
        }
    }
    let mut pending: Vec<u64> = open.into_values().collect();
    pending.sort_unstable();
    (pairs, pending)
}

#[test]
fn library_pairing_matches_an_independent_scan_on_fuzzed_traces() {
    for family in [
        detector_family as fn(u64) -> ProgramModel,
        exploration_family,
    ] {
        for seed in 0..60 {
            let model = family(seed);
            for schedule in [
                Schedule::RoundRobin,
                Schedule::SeededRandom(seed),
                Schedule::SeededRandom(seed.wrapping_add(0x9e37)),
            ] {
                let out = run(&model, &schedule, DEFAULT_STEP_BOUND).expect("run succeeds");
                let (pairs, pending) = naive_pairs(&out.trace);
                let scan = match_begin_end(&out.trace);
                assert_eq!(
                    scan.end_of_begin, pairs,
                    "model {} {:?}",
                    model.name, schedule
                );
                let scan_pending: Vec<u64> = scan
                    .pending
                    .iter()
                    .map(|&idx| out.trace.events[idx].seq)
                    .collect();
                assert_eq!(scan_pending, pending, "model {} {:?}", model.name, schedule);
            }
        }
    }
}

#[test]
fn pending_begins_are_exactly_the_ground_truth_blocked_goroutines() {
    // The simulator knows who ended up blocked; the trace alone must say
    // the same thing through unmatched Begins.
    for seed in 0..60 {
        let model = exploration_family(seed);
        let out =
            run(&model, &Schedule::SeededRandom(seed), DEFAULT_STEP_BOUND).expect("run succeeds");
        let (_, pending) = naive_pairs(&out.trace);
        let pending_gids: BTreeSet<Gid> = pending
            .iter()
            .map(|&seq| {
                out.trace
                    .events
                    .iter()
                    .find(|ev| ev.seq == seq)
                    .expect("pending seq exists")
                    .gid
            })
            .collect();
        let truth: BTreeSet<Gid> = out.ground_truth.blocked.keys().copied().collect();
        assert_eq!(pending_gids, truth, "model {}", model.name);
    }
}

// ---------------------------------------------------------------------------
// Brute-force schedule enumeration

#[derive(Debug, Default)]
struct BruteForce {
    /// Scripts that named only runnable goroutines all the way through.
    valid_runs: u64,
    blocked_runs: u64,
    /// Shortest observed globally-blocked run, in scheduler steps.
    min_blocked_steps: Option<u64>,
    /// Globally-blocked runs in which no modeled panic had occurred.
    blocked_without_fault: u64,
    all_done_runs: u64,
}

/// Run every script over goroutine ids `1..=max_gid` of exactly `len`
/// picks (scripts naming a non-runnable goroutine are rejected by the
/// simulator and skipped). Scripts are exhaustive over pick sequences of
/// length <= `len` because a run that blocks at step k never consumes the
/// remaining picks.
fn brute_force(model: &ProgramModel, max_gid: u64, len: usize) -> BruteForce {
    let mut summary = BruteForce::default();
    let mut digits = vec![1u64; len];
    loop {
        let script: Vec<Gid> = digits.iter().map(|&d| Gid(d)).collect();
        if let Ok(out) = run(model, &Schedule::Script(script), DEFAULT_STEP_BOUND) {
            summary.valid_runs += 1;
            match out.stats.end {
                RunEnd::GlobalBlock => {
                    summary.blocked_runs += 1;
                    let best = summary.min_blocked_steps.get_or_insert(u64::MAX);
                    *best = (*best).min(out.stats.steps);
                    if out.ground_truth.faults.is_empty() {
                        summary.blocked_without_fault += 1;
                    }
                }
                RunEnd::AllDone => summary.all_done_runs += 1,
                RunEnd::StepBound => panic!("step bound hit on a tiny kernel"),
            }
        }
        // Odometer over 1..=max_gid.
        let mut pos = 0;
        loop {
            if pos == len {
                return summary;
            }
            digits[pos] += 1;
            if digits[pos] <= max_gid {
                break;
            }
            digits[pos] = 1;
            pos += 1;
        }
    }
}

fn assert_witness_replays(model: &ProgramModel, picks: &[Gid], expect_blocked: usize) {
    let out = run(model, &witness_schedule(picks), DEFAULT_STEP_BOUND).expect("witness replays");
    assert_eq!(
        out.stats.end,
        RunEnd::GlobalBlock,
        "witness must end globally blocked"
    );
    assert_eq!(out.ground_truth.blocked.len(), expect_blocked);
}

#[test]
fn opposite_lock_order_kernel_shortest_deadlock_is_seven_picks() {
    // Hand count: the entry spawns twice and exits (3 picks), each worker
    // acquires its first lock (2 picks) and then requests the other's
    // (2 picks) — 7 picks, the last two leaving both workers parked.
    let model = corpus_model("mutex-deadlock-ab-ba");
    let brute = brute_force(&model, 3, 8);
    assert!(
        brute.blocked_runs > 0,
        "brute force must reach the deadlock"
    );
    assert_eq!(brute.min_blocked_steps, Some(7));

    let verdict = explore(&model, &OracleConfig::default()).expect("exploration succeeds");
    assert!(verdict.deadlock_reachable && verdict.conclusive());
    let witness = verdict.witness.expect("witness exists");
    assert_eq!(witness.len(), 7, "oracle witness must be minimal");
    assert_witness_replays(&model, &witness, 2);
}

#[test]
fn ordered_lock_fix_has_no_blocked_schedule() {
    let case = blocksleuth::corpus::all_cases()
        .into_iter()
        .find(|c| c.name == "mutex-deadlock-ab-ba")
        .unwrap();
    let model = ProgramModel::parse(case.fixed).expect("fixed model parses");
    let brute = brute_force(&model, 3, 8);
    assert_eq!(brute.blocked_runs, 0, "no script may reach a global block");
    assert!(brute.all_done_runs > 0);

    let verdict = explore(&model, &OracleConfig::default()).expect("exploration succeeds");
    assert!(!verdict.deadlock_reachable && verdict.complete);
}

#[test]
fn recv_while_holding_the_close_side_mutex_wedges_in_four_picks() {
    // Hand count: entry spawns (1), takes the mutex (1), parks on the
    // receive (1); the stopper then requests the held mutex (1).
    let model = corpus_model("channel-mutex-recv-close");
    let brute = brute_force(&model, 2, 7);
    assert!(brute.blocked_runs > 0);
    assert_eq!(brute.min_blocked_steps, Some(4));
    assert!(brute.all_done_runs > 0, "other orders complete cleanly");

    let verdict = explore(&model, &OracleConfig::default()).expect("exploration succeeds");
    assert!(verdict.deadlock_reachable && verdict.conclusive());
    let witness = verdict.witness.expect("witness exists");
    assert_eq!(witness.len(), 4);
    assert_witness_replays(&model, &witness, 2);
}

#[test]
fn three_lock_ring_witness_is_ten_picks_and_replays() {
    // Hand count: the entry spawns three workers and exits (4 picks), each
    // worker takes its own lock (3) and then requests its neighbor's (3).
    let mut b = ModelBuilder::new("ring-of-three");
    let locks = [b.mutex("a"), b.mutex("b"), b.mutex("c")];
    let main = b.goroutine("main");
    let workers = [b.goroutine("w1"), b.goroutine("w2"), b.goroutine("w3")];
    for (i, &w) in workers.iter().enumerate() {
        b.push(main, ModelOp::Spawn(w));
        b.ops(
            w,
            [
                ModelOp::Lock(locks[i]),
                ModelOp::Lock(locks[(i + 1) % 3]),
                ModelOp::Unlock(locks[(i + 1) % 3]),
                ModelOp::Unlock(locks[i]),
            ],
        );
    }
    let model = b.build().expect("ring builds");

    let verdict = explore(&model, &OracleConfig::default()).expect("exploration succeeds");
    assert!(verdict.deadlock_reachable && verdict.conclusive());
    let witness = verdict.witness.expect("witness exists");
    assert_eq!(witness.len(), 10);
    assert_witness_replays(&model, &witness, 3);
}

#[test]
fn fault_states_never_count_as_deadlocks() {
    // Every globally-blocked schedule of this kernel first trips the
    // negative-counter panic; the oracle must treat those as crashes, not
    // deadlocks, and still call the exploration complete.
    let model = corpus_model("waitgroup-negative-counter");
    let brute = brute_force(&model, 2, 10);
    assert!(brute.blocked_runs > 0, "some schedules do end blocked");
    assert_eq!(
        brute.blocked_without_fault, 0,
        "every blocked run descends from a fault"
    );

    let verdict = explore(&model, &OracleConfig::default()).expect("exploration succeeds");
    assert!(
        !verdict.deadlock_reachable,
        "crash-descended blocks are not deadlocks"
    );
    assert!(verdict.complete);
    assert!(verdict.crashed_states > 0);
    assert!(verdict.conclusive());
}
