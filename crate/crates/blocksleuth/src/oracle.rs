//! Exhaustive schedule exploration for small models.
//!
//! The oracle answers one question about a [`ProgramModel`]: **is there any
//! schedule under which the program ends with a goroutine blocked forever?**
//! It answers by breadth-first search over scheduling decisions, deduplicating
//! semantically identical states, so the verdict covers every interleaving of
//! the deterministic-select schedule space (the space [`Schedule::Script`] and
//! [`Schedule::RoundRobin`] runs live in; when several select cases are ready
//! the lowest-indexed one is taken).
//!
//! Because the search is breadth-first over picks, the first blocking
//! terminal found yields a *shortest* witness schedule, replayable with
//! [`Schedule::Script`].
//!
//! States where a modeled panic occurred are treated as program crashes:
//! exploration stops there and they never count as deadlocks.

use crate::event::Gid;
use crate::model::ProgramModel;
use crate::sim::{CasePolicy, Schedule, Sim, SimError};
use std::collections::{HashSet, VecDeque};

/// Exploration limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    /// Distinct semantic states to explore before giving up.
    pub max_states: usize,
    /// Longest pick sequence explored; states that deep are not expanded.
    pub max_depth: usize,
}

/// Default bound on explored schedule length.
pub const DEFAULT_ORACLE_DEPTH: usize = 256;

impl Default for OracleConfig {
    fn default() -> OracleConfig {
        OracleConfig {
            max_states: 1 << 20,
            max_depth: DEFAULT_ORACLE_DEPTH,
        }
    }
}

/// Outcome of schedule exploration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleVerdict {
    /// Some schedule ends with at least one goroutine blocked forever.
    pub deadlock_reachable: bool,
    /// Shortest pick sequence reaching such a state, when one exists.
    pub witness: Option<Vec<Gid>>,
    /// Distinct states visited.
    pub states_explored: u64,
    /// Terminal states where every goroutine finished cleanly.
    pub clean_terminals: u64,
    /// States pruned because a modeled panic had occurred.
    pub crashed_states: u64,
    /// The state space was fully enumerated. A `false` here with
    /// `deadlock_reachable == false` means the verdict is inconclusive.
    pub complete: bool,
}

impl OracleVerdict {
    /// Whether the verdict actually settles reachability: a found witness
    /// always does; absence of one only does after full enumeration.
    pub fn conclusive(&self) -> bool {
        self.deadlock_reachable || self.complete
    }
}

/// Explore every schedule of `model` up to the configured state budget.
pub fn explore(model: &ProgramModel, config: &OracleConfig) -> Result<OracleVerdict, SimError> {
    let root = Sim::new(model)?;
    let mut visited: HashSet<u64> = HashSet::new();
    visited.insert(root.semantic_hash());
    let mut queue: VecDeque<(Sim<'_>, Vec<Gid>)> = VecDeque::new();
    queue.push_back((root, Vec::new()));

    let mut verdict = OracleVerdict {
        deadlock_reachable: false,
        witness: None,
        states_explored: 0,
        clean_terminals: 0,
        crashed_states: 0,
        complete: true,
    };
    let mut scratch = Vec::new();

    while let Some((sim, picks)) = queue.pop_front() {
        verdict.states_explored += 1;
        if sim.has_faults() {
            verdict.crashed_states += 1;
            continue;
        }
        let runnable = sim.runnable();
        if runnable.is_empty() {
            if sim.ground_truth().blocked.is_empty() {
                verdict.clean_terminals += 1;
                continue;
            }
            verdict.deadlock_reachable = true;
            verdict.witness = Some(picks);
            // Enumeration stops at the first (shortest) witness; counts
            // describe the work done up to that point.
            verdict.complete = false;
            return Ok(verdict);
        }
        if picks.len() >= config.max_depth {
            verdict.complete = false;
            continue;
        }
        for gid in runnable {
            let mut child = sim.clone();
            child.step(gid, &mut CasePolicy::Lowest, &mut scratch);
            scratch.clear();
            if visited.len() >= config.max_states {
                verdict.complete = false;
                continue;
            }
            if visited.insert(child.semantic_hash()) {
                let mut child_picks = picks.clone();
                child_picks.push(gid);
                queue.push_back((child, child_picks));
            }
        }
    }
    Ok(verdict)
}

/// Replay an oracle witness (or any pick list) as a scripted schedule.
pub fn witness_schedule(picks: &[Gid]) -> Schedule {
    Schedule::Script(picks.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::ObjectId;
    use crate::model::{ModelBuilder, ModelOp};
    use crate::sim::{self, RunEnd, DEFAULT_STEP_BOUND};

    fn two_lock_model(name: &str, second_order_flipped: bool) -> ProgramModel {
        let mut b = ModelBuilder::new(name);
        let ma = b.mutex("A");
        let mb = b.mutex("B");
        let main = b.goroutine("main");
        let g1 = b.goroutine("first");
        let g2 = b.goroutine("second");
        b.ops(main, [ModelOp::Spawn(g1), ModelOp::Spawn(g2)]);
        let nest = |b: &mut ModelBuilder, g, x: ObjectId, y: ObjectId| {
            b.ops(
                g,
                [
                    ModelOp::Lock(x),
                    ModelOp::Lock(y),
                    ModelOp::Unlock(y),
                    ModelOp::Unlock(x),
                ],
            );
        };
        nest(&mut b, g1, ma, mb);
        if second_order_flipped {
            nest(&mut b, g2, mb, ma);
        } else {
            nest(&mut b, g2, ma, mb);
        }
        b.build().unwrap()
    }

    #[test]
    fn opposite_lock_orders_reach_a_deadlock() {
        let model = two_lock_model("ab-ba", true);
        let verdict = explore(&model, &OracleConfig::default()).unwrap();
        assert!(verdict.deadlock_reachable);
        // Minimal blocking run, one micro-action per pick: two spawns,
        // main's exit, one acquisition each, then the two blocking
        // attempts. Nothing shorter can wedge both goroutines.
        let witness = verdict.witness.unwrap();
        assert_eq!(witness.len(), 7);
        // The witness replays to a globally blocked run.
        let out = sim::run(&model, &witness_schedule(&witness), DEFAULT_STEP_BOUND).unwrap();
        assert_eq!(out.stats.end, RunEnd::GlobalBlock);
        assert_eq!(out.ground_truth.blocked.len(), 2);
    }

    #[test]
    fn consistent_lock_orders_never_deadlock() {
        let model = two_lock_model("ab-ab", false);
        let verdict = explore(&model, &OracleConfig::default()).unwrap();
        assert!(!verdict.deadlock_reachable);
        assert!(verdict.complete, "small space must be fully enumerated");
        assert!(verdict.conclusive());
        assert!(verdict.clean_terminals > 0);
    }

    #[test]
    fn lost_wakeup_is_schedule_dependent_and_found() {
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
        let model = b.build().unwrap();
        let verdict = explore(&model, &OracleConfig::default()).unwrap();
        assert!(
            verdict.deadlock_reachable,
            "signal-before-wait wedges the waiter"
        );
        let witness = verdict.witness.unwrap();
        let out = sim::run(&model, &witness_schedule(&witness), DEFAULT_STEP_BOUND).unwrap();
        assert_eq!(out.stats.end, RunEnd::GlobalBlock);
        assert!(out.ground_truth.blocked.contains_key(&w));
    }

    #[test]
    fn crash_states_are_not_deadlocks() {
        // The only blocked-ish end requires the negative-counter panic
        // first; the oracle must treat that as a crash, not a deadlock.
        let mut b = ModelBuilder::new("wg-crash");
        let wg = b.waitgroup("wg");
        let main = b.goroutine("main");
        b.ops(main, [ModelOp::WgAdd(wg, -1)]);
        let model = b.build().unwrap();
        let verdict = explore(&model, &OracleConfig::default()).unwrap();
        assert!(!verdict.deadlock_reachable);
        assert!(verdict.complete);
        assert_eq!(verdict.crashed_states, 1);
    }

    #[test]
    fn state_budget_makes_the_verdict_inconclusive() {
        let model = two_lock_model("ab-ab", false);
        let config = OracleConfig {
            max_states: 2,
            ..OracleConfig::default()
        };
        let verdict = explore(&model, &config).unwrap();
        assert!(!verdict.deadlock_reachable);
        assert!(!verdict.complete);
        assert!(!verdict.conclusive());
    }

    #[test]
    fn depth_bound_makes_the_verdict_inconclusive() {
        let model = two_lock_model("ab-ba", true);
        // Too shallow to reach the wedge (it needs seven picks).
        let config = OracleConfig {
            max_depth: 3,
            ..OracleConfig::default()
        };
        let verdict = explore(&model, &config).unwrap();
        assert!(!verdict.deadlock_reachable);
        assert!(!verdict.complete);
        assert!(!verdict.conclusive());
    }

    #[test]
    fn dedup_merges_interleavings_that_commute() {
        // Two goroutines doing independent work: the reachable-state count
        // must be far below the full interleaving tree.
        let mut b = ModelBuilder::new("commute");
        let ma = b.mutex("a");
        let mb = b.mutex("b");
        let main = b.goroutine("main");
        let g1 = b.goroutine("g1");
        let g2 = b.goroutine("g2");
        b.ops(main, [ModelOp::Spawn(g1), ModelOp::Spawn(g2)]);
        b.ops(g1, [ModelOp::Lock(ma), ModelOp::Unlock(ma)]);
        b.ops(g2, [ModelOp::Lock(mb), ModelOp::Unlock(mb)]);
        let model = b.build().unwrap();
        let verdict = explore(&model, &OracleConfig::default()).unwrap();
        assert!(!verdict.deadlock_reachable);
        assert!(verdict.complete);
        // 3 goroutines, ≤5 ops each: hundreds of paths, few dozen states.
        assert!(verdict.states_explored < 100, "{}", verdict.states_explored);
    }
}
