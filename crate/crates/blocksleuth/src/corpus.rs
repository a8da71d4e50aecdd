//! Bundled kernel programs with known blocking bugs, their fixes, and
//! per-schedule expectations.
//!
//! Each case carries three texts, compiled into the binary:
//!
//! * `model` — a small program model exhibiting one bug class;
//! * `fixed` — the corrected model;
//! * `expect` — directives describing what the analysis must report.
//!
//! The expectation format, one directive per line (`#` comments allowed):
//!
//! ```text
//! category: mutex-deadlock
//! oracle: deadlock            # buggy model: deadlock | fault | clean
//! schedule: roundrobin        # or: seed <n> | script <gid> <gid> ...
//! expect: mutex-deadlock missing-unlock     # finding kinds, or `none`
//! ```
//!
//! Each `schedule:` line applies to the next `expect:` line: the buggy
//! model is simulated under that schedule and the analysis of the trace
//! must produce exactly the listed finding kinds (as a set; warnings are
//! not constrained). Independent of the directives, [`run_case`] also
//! checks that every produced trace round-trips through the text codec
//! byte-identically, and that the fixed model is conclusively deadlock-free
//! under exhaustive exploration, completes under a handful of schedules,
//! and analyzes clean.

use crate::event::Gid;
use crate::model::ProgramModel;
use crate::oracle::{explore, OracleConfig};
use crate::pipeline::{analyze_trace, AnalysisConfig};
use crate::report::FindingKind;
use crate::sim::{run, RunEnd, Schedule};
use crate::trace_io;
use std::collections::BTreeSet;

/// One bundled case.
#[derive(Debug, Clone, Copy)]
pub struct CorpusCase {
    pub name: &'static str,
    pub model: &'static str,
    pub fixed: &'static str,
    pub expect: &'static str,
}

macro_rules! corpus_case {
    ($name:literal) => {
        CorpusCase {
            name: $name,
            model: include_str!(concat!("../corpus/", $name, "/model.txt")),
            fixed: include_str!(concat!("../corpus/", $name, "/fixed.txt")),
            expect: include_str!(concat!("../corpus/", $name, "/expect.txt")),
        }
    };
}

/// Every bundled case, in a stable order.
pub fn all_cases() -> Vec<CorpusCase> {
    vec![
        corpus_case!("missing-unlock-return-path"),
        corpus_case!("missing-unlock-blocked-holder"),
        corpus_case!("waitgroup-missing-done"),
        corpus_case!("waitgroup-never-done"),
        corpus_case!("waitgroup-negative-counter"),
        corpus_case!("channel-send-no-receiver"),
        corpus_case!("channel-recv-no-sender"),
        corpus_case!("channel-select-starved"),
        corpus_case!("double-lock-reentrant"),
        corpus_case!("double-lock-upgrade"),
        corpus_case!("double-rlock-pending-writer"),
        corpus_case!("mutex-deadlock-ab-ba"),
        corpus_case!("mutex-deadlock-read-write"),
        corpus_case!("channel-mutex-recv-close"),
        corpus_case!("channel-mutex-send-recv"),
        corpus_case!("channel-mutex-cancel"),
        corpus_case!("cond-lost-signal"),
        corpus_case!("cond-no-wake"),
    ]
}

/// What the exhaustive oracle must say about the buggy model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleExpect {
    /// A blocked terminal state is reachable.
    Deadlock,
    /// Some schedule faults; no blocked terminal survives the crash.
    Fault,
    /// Neither deadlocks nor faults anywhere.
    Clean,
}

/// Parsed `expect` directives of one case.
#[derive(Debug, Clone)]
pub struct Expectation {
    pub category: String,
    pub oracle: Option<OracleExpect>,
    pub runs: Vec<(Schedule, BTreeSet<FindingKind>)>,
}

/// Parse the directives text. `Err` carries a line-prefixed message.
pub fn parse_expectation(text: &str) -> Result<Expectation, String> {
    let mut category: Option<String> = None;
    let mut oracle = None;
    let mut runs = Vec::new();
    let mut pending_schedule: Option<Schedule> = None;

    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let no = no + 1;
        let (keyword, rest) = line
            .split_once(':')
            .ok_or_else(|| format!("line {no}: expected `keyword: value`"))?;
        let rest = rest.trim();
        match keyword.trim() {
            "category" => category = Some(rest.to_string()),
            "oracle" => {
                oracle = Some(match rest {
                    "deadlock" => OracleExpect::Deadlock,
                    "fault" => OracleExpect::Fault,
                    "clean" => OracleExpect::Clean,
                    other => return Err(format!("line {no}: unknown oracle verdict `{other}`")),
                })
            }
            "schedule" => {
                if pending_schedule.is_some() {
                    return Err(format!("line {no}: schedule without a following expect"));
                }
                let mut words = rest.split_whitespace();
                let head = words.next().unwrap_or("");
                pending_schedule = Some(match head {
                    "roundrobin" => Schedule::RoundRobin,
                    "seed" => {
                        let n: u64 = words
                            .next()
                            .and_then(|w| w.parse().ok())
                            .ok_or_else(|| format!("line {no}: seed needs a number"))?;
                        Schedule::SeededRandom(n)
                    }
                    "script" => {
                        let picks: Result<Vec<Gid>, _> =
                            words.map(|w| w.parse::<u64>().map(Gid)).collect();
                        Schedule::Script(
                            picks.map_err(|_| format!("line {no}: script needs goroutine ids"))?,
                        )
                    }
                    other => return Err(format!("line {no}: unknown schedule `{other}`")),
                });
            }
            "expect" => {
                let schedule = pending_schedule
                    .take()
                    .ok_or_else(|| format!("line {no}: expect without a preceding schedule"))?;
                let mut kinds = BTreeSet::new();
                if rest != "none" {
                    for word in rest.split_whitespace() {
                        let kind = FindingKind::from_name(word)
                            .ok_or_else(|| format!("line {no}: unknown finding kind `{word}`"))?;
                        kinds.insert(kind);
                    }
                }
                runs.push((schedule, kinds));
            }
            other => return Err(format!("line {no}: unknown directive `{other}`")),
        }
    }
    if pending_schedule.is_some() {
        return Err("trailing schedule without expect".to_string());
    }
    Ok(Expectation {
        category: category.ok_or("missing category")?,
        oracle,
        runs: if runs.is_empty() {
            return Err("no schedule/expect pairs".to_string());
        } else {
            runs
        },
    })
}

/// Result of checking one case.
#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub name: &'static str,
    pub category: String,
    /// Empty when the case passed.
    pub failures: Vec<String>,
}

impl CaseOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const CORPUS_STEP_BOUND: u64 = 100_000;

fn check_roundtrip(trace: &crate::event::Trace, failures: &mut Vec<String>, what: &str) {
    let table = crate::table::load_semantic_table("1.17.3").expect("bundled table");
    let text = trace_io::trace_to_string(trace);
    match trace_io::parse_trace_str(&text, &table) {
        Ok(back) => {
            let again = trace_io::trace_to_string(&back.trace);
            if again != text {
                failures.push(format!(
                    "{what}: trace text round-trip is not byte-identical"
                ));
            }
        }
        Err(e) => failures.push(format!("{what}: emitted trace does not parse back: {e}")),
    }
}

/// Check one case end to end.
pub fn run_case(case: &CorpusCase) -> CaseOutcome {
    let mut failures = Vec::new();
    let expectation = match parse_expectation(case.expect) {
        Ok(e) => e,
        Err(msg) => {
            return CaseOutcome {
                name: case.name,
                category: "unknown".to_string(),
                failures: vec![format!("expectation file: {msg}")],
            }
        }
    };

    let model = match ProgramModel::parse(case.model) {
        Ok(m) => m,
        Err(e) => {
            return CaseOutcome {
                name: case.name,
                category: expectation.category,
                failures: vec![format!("model does not parse: {e}")],
            }
        }
    };

    for (i, (schedule, want)) in expectation.runs.iter().enumerate() {
        let what = format!("run {}", i + 1);
        let out = match run(&model, schedule, CORPUS_STEP_BOUND) {
            Ok(o) => o,
            Err(e) => {
                failures.push(format!("{what}: simulation failed: {e}"));
                continue;
            }
        };
        if out.stats.end == RunEnd::StepBound {
            failures.push(format!(
                "{what}: hit the step bound; corpus models must settle"
            ));
        }
        check_roundtrip(&out.trace, &mut failures, &what);
        match analyze_trace(&out.trace, &AnalysisConfig::default()) {
            Ok(report) => {
                let got: BTreeSet<FindingKind> = report.findings.iter().map(|f| f.kind).collect();
                if got != *want {
                    let names = |s: &BTreeSet<FindingKind>| {
                        s.iter().map(|k| k.name()).collect::<Vec<_>>().join(" ")
                    };
                    failures.push(format!(
                        "{what}: finding kinds mismatch: expected [{}], got [{}]",
                        names(want),
                        names(&got)
                    ));
                }
            }
            Err(e) => failures.push(format!("{what}: analysis failed: {e}")),
        }
    }

    if let Some(want) = expectation.oracle {
        match explore(&model, &OracleConfig::default()) {
            Ok(verdict) => {
                if !verdict.conclusive() {
                    failures.push("oracle: exploration budget exhausted".to_string());
                } else {
                    let got = if verdict.deadlock_reachable {
                        OracleExpect::Deadlock
                    } else if verdict.crashed_states > 0 {
                        OracleExpect::Fault
                    } else {
                        OracleExpect::Clean
                    };
                    if got != want {
                        failures.push(format!("oracle: expected {want:?}, got {got:?}"));
                    }
                }
            }
            Err(e) => failures.push(format!("oracle: exploration failed: {e}")),
        }
    }

    match ProgramModel::parse(case.fixed) {
        Ok(fixed) => {
            match explore(&fixed, &OracleConfig::default()) {
                Ok(verdict) => {
                    if verdict.deadlock_reachable {
                        failures.push("fixed model still has a reachable deadlock".to_string());
                    } else if !verdict.complete {
                        failures.push("fixed model: exploration budget exhausted".to_string());
                    }
                    if verdict.crashed_states > 0 {
                        failures.push("fixed model can fault".to_string());
                    }
                }
                Err(e) => failures.push(format!("fixed model: exploration failed: {e}")),
            }
            for schedule in [
                Schedule::RoundRobin,
                Schedule::SeededRandom(11),
                Schedule::SeededRandom(12),
                Schedule::SeededRandom(13),
            ] {
                match run(&fixed, &schedule, CORPUS_STEP_BOUND) {
                    Ok(out) => {
                        if out.stats.end != RunEnd::AllDone {
                            failures
                                .push(format!("fixed model does not complete under {schedule:?}"));
                        }
                        check_roundtrip(&out.trace, &mut failures, "fixed run");
                        match analyze_trace(&out.trace, &AnalysisConfig::default()) {
                            Ok(report) => {
                                if !report.findings.is_empty() {
                                    let kinds: Vec<&str> =
                                        report.findings.iter().map(|f| f.kind.name()).collect();
                                    failures.push(format!(
                                        "fixed model still reports findings: {}",
                                        kinds.join(" ")
                                    ));
                                }
                            }
                            Err(e) => failures.push(format!("fixed run analysis failed: {e}")),
                        }
                    }
                    Err(e) => failures.push(format!("fixed model run failed: {e}")),
                }
            }
        }
        Err(e) => failures.push(format!("fixed model does not parse: {e}")),
    }

    CaseOutcome {
        name: case.name,
        category: expectation.category,
        failures,
    }
}

/// Check every bundled case.
pub fn run_corpus() -> Vec<CaseOutcome> {
    all_cases().iter().map(run_case).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_case_parses_its_pieces() {
        for case in all_cases() {
            let exp =
                parse_expectation(case.expect).unwrap_or_else(|e| panic!("{}: {e}", case.name));
            assert!(!exp.runs.is_empty(), "{}", case.name);
            ProgramModel::parse(case.model).unwrap_or_else(|e| panic!("{}: {e}", case.name));
            ProgramModel::parse(case.fixed).unwrap_or_else(|e| panic!("{}: {e}", case.name));
        }
    }

    #[test]
    fn categories_cover_every_bug_class_at_least_twice() {
        use std::collections::BTreeMap;
        let mut per: BTreeMap<String, usize> = BTreeMap::new();
        for case in all_cases() {
            let exp = parse_expectation(case.expect).unwrap();
            *per.entry(exp.category).or_default() += 1;
        }
        let expected = [
            "channel",
            "channel-mutex-deadlock",
            "cond",
            "double-lock",
            "missing-unlock",
            "mutex-deadlock",
            "waitgroup",
        ];
        assert_eq!(per.keys().map(String::as_str).collect::<Vec<_>>(), expected);
        for (cat, n) in &per {
            assert!(*n >= 2, "category {cat} has only {n} case(s)");
        }
    }

    #[test]
    fn the_whole_corpus_passes() {
        let outcomes = run_corpus();
        let failed: Vec<String> = outcomes
            .iter()
            .filter(|o| !o.passed())
            .map(|o| format!("{}: {}", o.name, o.failures.join("; ")))
            .collect();
        assert!(failed.is_empty(), "failing cases:\n{}", failed.join("\n"));
    }

    #[test]
    fn expectation_parser_rejects_malformed_directives() {
        assert!(parse_expectation("category: x").is_err(), "no runs");
        assert!(parse_expectation("schedule: roundrobin\nexpect: nope").is_err());
        assert!(
            parse_expectation("category: x\nschedule: warp\nexpect: none").is_err(),
            "unknown schedule"
        );
        assert!(
            parse_expectation("category: x\nschedule: roundrobin").is_err(),
            "dangling schedule"
        );
        let ok = parse_expectation(
            "category: x\noracle: deadlock\nschedule: script 1 2 1\nexpect: double-lock",
        )
        .unwrap();
        assert_eq!(ok.oracle, Some(OracleExpect::Deadlock));
        assert_eq!(ok.runs.len(), 1);
    }
}
