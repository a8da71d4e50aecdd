//! Detection and prediction of blocking concurrency bugs in goroutine-style
//! programs, working from synchronization-event traces.
//!
//! The crate is organized as a pipeline:
//!
//! * [`event`] — the trace vocabulary: semantic event kinds, begin/end
//!   phases, goroutine and object identities, and trace validation.
//! * [`table`] / [`trace_io`] — mapping runtime function names to semantic
//!   kinds, and reading/writing the line-oriented trace format.
//! * [`model`] / [`sim`] / [`oracle`] — a deterministic simulator for small
//!   goroutine programs (mutexes, rwmutexes, channels, waitgroups, condition
//!   variables, cancelable contexts) that produces traces plus ground truth,
//!   and an exhaustive schedule enumerator used as a reachability oracle.
//! * [`detect`] — postmortem detectors for operations still blocked at the
//!   end of a trace (channel ops, waitgroups, condition variables,
//!   never-canceled contexts, leaked goroutines).
//! * [`predict`] — lockset-based predictors that flag deadlocks which did
//!   not necessarily occur in the observed run: mutual mutex cycles,
//!   double/missing lock usage, and channel-involved mutex deadlocks.
//! * [`report`] — the shared finding model and deterministic text/JSON
//!   rendering.
//! * [`corpus`] — bundled buggy/fixed kernel programs with per-schedule
//!   expectations, runnable as a self-check.
//! * [`fuzz`] — seeded random model generators used by the test suites.

pub mod corpus;
pub mod detect;
pub mod event;
pub mod fuzz;
pub mod model;
pub mod oracle;
pub mod predict;
pub mod report;
pub mod sim;
pub mod table;
pub mod trace_io;

pub mod pipeline;

pub use event::{Event, Gid, ObjectId, Phase, SemanticKind, Trace};
pub use pipeline::{analyze_trace, AnalysisConfig, AnalysisError};
pub use predict::SelectMode;
pub use report::{BugFinding, FindingKind, Provenance, Report, Warning};
