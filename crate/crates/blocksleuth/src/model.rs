//! Small goroutine programs fed to the simulator.
//!
//! A model declares synchronization objects and straight-line goroutine
//! bodies (no loops, no branches). Models can be built in code or parsed
//! from a small text format:
//!
//! ```text
//! model recv-under-lock
//! mutex mu
//! chan donec 0
//!
//! goroutine main
//!   spawn closer
//!   spawn waiter
//! end
//!
//! goroutine closer
//!   lock mu
//!   close donec
//!   unlock mu
//! end
//!
//! goroutine waiter
//!   lock mu
//!   recv donec
//!   unlock mu
//! end
//! ```
//!
//! The first goroutine block is the entry goroutine. Goroutines are
//! numbered 1, 2, ... in declaration order, objects likewise. Declaring
//! `context c` implicitly declares the unbuffered channel `c.done` that
//! `cancel c` closes. A body without a trailing `exit` gets one implicitly.

use crate::event::{Direction, Gid, ObjectId, SelectCandidate};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use thiserror::Error;

/// One straight-line operation of a goroutine body.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelOp {
    /// Start the goroutine with the given id.
    Spawn(Gid),
    Lock(ObjectId),
    Unlock(ObjectId),
    RLock(ObjectId),
    RUnlock(ObjectId),
    WLock(ObjectId),
    WUnlock(ObjectId),
    Send(ObjectId),
    Recv(ObjectId),
    Close(ObjectId),
    Select {
        candidates: Vec<SelectCandidate>,
        has_default: bool,
    },
    WgAdd(ObjectId, i64),
    WgWait(ObjectId),
    CtxCancel(ObjectId),
    /// Wait on a condition variable while holding the given mutex.
    CondWait(ObjectId, ObjectId),
    CondSignal(ObjectId),
    CondBroadcast(ObjectId),
    Exit,
}

/// Declared synchronization objects of a model.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ObjectDecls {
    pub mutexes: BTreeSet<ObjectId>,
    pub rwmutexes: BTreeSet<ObjectId>,
    /// Channel id to buffer capacity.
    pub channels: BTreeMap<ObjectId, u64>,
    pub waitgroups: BTreeSet<ObjectId>,
    pub conds: BTreeSet<ObjectId>,
    /// Context id to the done channel it closes on cancel.
    pub contexts: BTreeMap<ObjectId, ObjectId>,
}

/// A goroutine program: declared objects plus one op list per goroutine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramModel {
    pub name: String,
    /// The goroutine that runs at program start.
    pub entry: Gid,
    /// Bodies keyed by goroutine id; every id is unique to one body.
    pub goroutines: BTreeMap<Gid, Vec<ModelOp>>,
    pub objects: ObjectDecls,
    /// Human names for summaries; ids remain the ground truth.
    pub goroutine_names: BTreeMap<Gid, String>,
    pub object_names: BTreeMap<ObjectId, String>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model line {line_no}: {message}")]
    Parse { line_no: usize, message: String },
    #[error("model `{model}`: {message}")]
    Invalid { model: String, message: String },
}

impl ProgramModel {
    pub fn goroutine_name(&self, gid: Gid) -> String {
        self.goroutine_names
            .get(&gid)
            .cloned()
            .unwrap_or_else(|| gid.to_string())
    }

    pub fn object_name(&self, id: ObjectId) -> String {
        self.object_names
            .get(&id)
            .cloned()
            .unwrap_or_else(|| id.to_string())
    }

    /// Check structural invariants: the entry exists, spawn targets are
    /// declared bodies other than the entry and are spawned at most once,
    /// and every op references a declared object of the right type.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |message: String| {
            Err(ModelError::Invalid {
                model: self.name.clone(),
                message,
            })
        };
        if !self.goroutines.contains_key(&self.entry) {
            return fail(format!("entry goroutine {} has no body", self.entry));
        }
        let mut spawned: BTreeSet<Gid> = BTreeSet::new();
        for (gid, ops) in &self.goroutines {
            for op in ops {
                let name = self.goroutine_name(*gid);
                match op {
                    ModelOp::Spawn(target) => {
                        if !self.goroutines.contains_key(target) {
                            return fail(format!("{name} spawns undeclared goroutine {target}"));
                        }
                        if *target == self.entry {
                            return fail(format!("{name} spawns the entry goroutine"));
                        }
                        if !spawned.insert(*target) {
                            return fail(format!("goroutine {target} is spawned twice"));
                        }
                    }
                    ModelOp::Lock(m) | ModelOp::Unlock(m) => {
                        if !self.objects.mutexes.contains(m) {
                            return fail(format!("{name} uses {m} which is not a mutex"));
                        }
                    }
                    ModelOp::RLock(m)
                    | ModelOp::RUnlock(m)
                    | ModelOp::WLock(m)
                    | ModelOp::WUnlock(m) => {
                        if !self.objects.rwmutexes.contains(m) {
                            return fail(format!("{name} uses {m} which is not an rwmutex"));
                        }
                    }
                    ModelOp::Send(c) | ModelOp::Recv(c) | ModelOp::Close(c) => {
                        if !self.objects.channels.contains_key(c) {
                            return fail(format!("{name} uses {c} which is not a channel"));
                        }
                    }
                    ModelOp::Select { candidates, .. } => {
                        if candidates.is_empty() {
                            return fail(format!("{name} selects over no cases"));
                        }
                        for cand in candidates {
                            if !self.objects.channels.contains_key(&cand.chan) {
                                return fail(format!(
                                    "{name} selects on {} which is not a channel",
                                    cand.chan
                                ));
                            }
                        }
                    }
                    ModelOp::WgAdd(w, _) | ModelOp::WgWait(w) => {
                        if !self.objects.waitgroups.contains(w) {
                            return fail(format!("{name} uses {w} which is not a waitgroup"));
                        }
                    }
                    ModelOp::CtxCancel(c) => {
                        if !self.objects.contexts.contains_key(c) {
                            return fail(format!("{name} cancels {c} which is not a context"));
                        }
                    }
                    ModelOp::CondWait(c, m) => {
                        if !self.objects.conds.contains(c) {
                            return fail(format!("{name} waits on {c} which is not a cond"));
                        }
                        if !self.objects.mutexes.contains(m) {
                            return fail(format!("{name} guards a wait with non-mutex {m}"));
                        }
                    }
                    ModelOp::CondSignal(c) | ModelOp::CondBroadcast(c) => {
                        if !self.objects.conds.contains(c) {
                            return fail(format!("{name} signals {c} which is not a cond"));
                        }
                    }
                    ModelOp::Exit => {}
                }
            }
        }
        Ok(())
    }

    /// Parse the model text format. See the module docs for the grammar.
    pub fn parse(text: &str) -> Result<ProgramModel, ModelError> {
        Parser::new(text).parse()
    }

    /// Render as model text; `parse` accepts the output.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model {}", self.name);
        let obj = |id: &ObjectId| self.object_name(*id);
        for m in &self.objects.mutexes {
            let _ = writeln!(out, "mutex {}", obj(m));
        }
        for m in &self.objects.rwmutexes {
            let _ = writeln!(out, "rwmutex {}", obj(m));
        }
        let implicit_done: BTreeSet<ObjectId> = self.objects.contexts.values().copied().collect();
        for (c, cap) in &self.objects.channels {
            if !implicit_done.contains(c) {
                let _ = writeln!(out, "chan {} {}", obj(c), cap);
            }
        }
        for w in &self.objects.waitgroups {
            let _ = writeln!(out, "waitgroup {}", obj(w));
        }
        for c in &self.objects.conds {
            let _ = writeln!(out, "cond {}", obj(c));
        }
        for c in self.objects.contexts.keys() {
            let _ = writeln!(out, "context {}", obj(c));
        }
        let mut gids: Vec<Gid> = self.goroutines.keys().copied().collect();
        gids.sort_by_key(|g| (*g != self.entry, g.0));
        for gid in gids {
            let _ = writeln!(out, "\ngoroutine {}", self.goroutine_name(gid));
            for op in &self.goroutines[&gid] {
                let line = match op {
                    ModelOp::Spawn(g) => format!("spawn {}", self.goroutine_name(*g)),
                    ModelOp::Lock(m) => format!("lock {}", obj(m)),
                    ModelOp::Unlock(m) => format!("unlock {}", obj(m)),
                    ModelOp::RLock(m) => format!("rlock {}", obj(m)),
                    ModelOp::RUnlock(m) => format!("runlock {}", obj(m)),
                    ModelOp::WLock(m) => format!("wlock {}", obj(m)),
                    ModelOp::WUnlock(m) => format!("wunlock {}", obj(m)),
                    ModelOp::Send(c) => format!("send {}", obj(c)),
                    ModelOp::Recv(c) => format!("recv {}", obj(c)),
                    ModelOp::Close(c) => format!("close {}", obj(c)),
                    ModelOp::Select {
                        candidates,
                        has_default,
                    } => {
                        let mut parts: Vec<String> = candidates
                            .iter()
                            .map(|c| match c.dir {
                                Direction::Send => format!("send {}", obj(&c.chan)),
                                Direction::Recv => format!("recv {}", obj(&c.chan)),
                            })
                            .collect();
                        if *has_default {
                            parts.push("default".to_string());
                        }
                        format!("select {}", parts.join(", "))
                    }
                    ModelOp::WgAdd(w, d) => format!("add {} {}", obj(w), d),
                    ModelOp::WgWait(w) => format!("wait {}", obj(w)),
                    ModelOp::CtxCancel(c) => format!("cancel {}", obj(c)),
                    ModelOp::CondWait(c, m) => format!("condwait {} {}", obj(c), obj(m)),
                    ModelOp::CondSignal(c) => format!("signal {}", obj(c)),
                    ModelOp::CondBroadcast(c) => format!("broadcast {}", obj(c)),
                    ModelOp::Exit => "exit".to_string(),
                };
                let _ = writeln!(out, "  {line}");
            }
            let _ = writeln!(out, "end");
        }
        out
    }
}

/// Incremental construction of a [`ProgramModel`], used by tests and the
/// fuzz generators. Names double as lookup keys.
#[derive(Debug, Default)]
pub struct ModelBuilder {
    name: String,
    next_obj: u64,
    next_gid: u64,
    objects: ObjectDecls,
    object_names: BTreeMap<ObjectId, String>,
    goroutine_names: BTreeMap<Gid, String>,
    bodies: BTreeMap<Gid, Vec<ModelOp>>,
    entry: Option<Gid>,
}

impl ModelBuilder {
    pub fn new(name: impl Into<String>) -> ModelBuilder {
        ModelBuilder {
            name: name.into(),
            ..ModelBuilder::default()
        }
    }

    fn fresh_obj(&mut self, name: &str) -> ObjectId {
        self.next_obj += 1;
        let id = ObjectId(self.next_obj);
        self.object_names.insert(id, name.to_string());
        id
    }

    pub fn mutex(&mut self, name: &str) -> ObjectId {
        let id = self.fresh_obj(name);
        self.objects.mutexes.insert(id);
        id
    }

    pub fn rwmutex(&mut self, name: &str) -> ObjectId {
        let id = self.fresh_obj(name);
        self.objects.rwmutexes.insert(id);
        id
    }

    pub fn channel(&mut self, name: &str, cap: u64) -> ObjectId {
        let id = self.fresh_obj(name);
        self.objects.channels.insert(id, cap);
        id
    }

    pub fn waitgroup(&mut self, name: &str) -> ObjectId {
        let id = self.fresh_obj(name);
        self.objects.waitgroups.insert(id);
        id
    }

    pub fn cond(&mut self, name: &str) -> ObjectId {
        let id = self.fresh_obj(name);
        self.objects.conds.insert(id);
        id
    }

    /// Declare a context; returns `(context, done_channel)`.
    pub fn context(&mut self, name: &str) -> (ObjectId, ObjectId) {
        let ctx = self.fresh_obj(name);
        let done = self.channel(&format!("{name}.done"), 0);
        self.objects.contexts.insert(ctx, done);
        (ctx, done)
    }

    /// Declare a goroutine body; the first one is the entry.
    pub fn goroutine(&mut self, name: &str) -> Gid {
        self.next_gid += 1;
        let gid = Gid(self.next_gid);
        self.goroutine_names.insert(gid, name.to_string());
        self.bodies.insert(gid, Vec::new());
        self.entry.get_or_insert(gid);
        gid
    }

    pub fn push(&mut self, gid: Gid, op: ModelOp) -> &mut Self {
        self.bodies
            .get_mut(&gid)
            .expect("undeclared goroutine")
            .push(op);
        self
    }

    pub fn ops(&mut self, gid: Gid, ops: impl IntoIterator<Item = ModelOp>) -> &mut Self {
        for op in ops {
            self.push(gid, op);
        }
        self
    }

    pub fn build(mut self) -> Result<ProgramModel, ModelError> {
        let entry = self.entry.ok_or_else(|| ModelError::Invalid {
            model: self.name.clone(),
            message: "model declares no goroutines".to_string(),
        })?;
        // Every body ends in an explicit exit.
        for ops in self.bodies.values_mut() {
            if ops.last() != Some(&ModelOp::Exit) {
                ops.push(ModelOp::Exit);
            }
        }
        let model = ProgramModel {
            name: self.name,
            entry,
            goroutines: self.bodies,
            objects: self.objects,
            goroutine_names: self.goroutine_names,
            object_names: self.object_names,
        };
        model.validate()?;
        Ok(model)
    }
}

struct Parser<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Parser<'a> {
        let lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| {
                let l = l.split('#').next().unwrap_or("").trim();
                (no + 1, l)
            })
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Parser { lines, pos: 0 }
    }

    fn err(line_no: usize, message: impl Into<String>) -> ModelError {
        ModelError::Parse {
            line_no,
            message: message.into(),
        }
    }

    fn parse(mut self) -> Result<ProgramModel, ModelError> {
        let (no, first) = *self
            .lines
            .first()
            .ok_or_else(|| Self::err(1, "empty model"))?;
        let name = first
            .strip_prefix("model ")
            .ok_or_else(|| Self::err(no, "expected `model <name>`"))?
            .trim()
            .to_string();
        self.pos = 1;

        let mut builder = ModelBuilder::new(name);
        let mut objects: BTreeMap<String, ObjectId> = BTreeMap::new();
        let mut body_srcs: Vec<BodySrc> = Vec::new();

        while self.pos < self.lines.len() {
            let (no, line) = self.lines[self.pos];
            self.pos += 1;
            let mut tokens = line.split_whitespace();
            let head = tokens.next().unwrap();
            let rest: Vec<&str> = tokens.collect();
            match head {
                "mutex" | "rwmutex" | "waitgroup" | "cond" | "context" => {
                    let [obj_name] = rest[..] else {
                        return Err(Self::err(no, format!("`{head}` takes one name")));
                    };
                    if objects.contains_key(obj_name) {
                        return Err(Self::err(no, format!("duplicate object `{obj_name}`")));
                    }
                    let id = match head {
                        "mutex" => builder.mutex(obj_name),
                        "rwmutex" => builder.rwmutex(obj_name),
                        "waitgroup" => builder.waitgroup(obj_name),
                        "cond" => builder.cond(obj_name),
                        "context" => {
                            let (ctx, done) = builder.context(obj_name);
                            objects.insert(format!("{obj_name}.done"), done);
                            ctx
                        }
                        _ => unreachable!(),
                    };
                    objects.insert(obj_name.to_string(), id);
                }
                "chan" => {
                    let [obj_name, cap] = rest[..] else {
                        return Err(Self::err(no, "`chan` takes a name and a capacity"));
                    };
                    if objects.contains_key(obj_name) {
                        return Err(Self::err(no, format!("duplicate object `{obj_name}`")));
                    }
                    let cap: u64 = cap
                        .parse()
                        .map_err(|_| Self::err(no, format!("bad capacity `{cap}`")))?;
                    let id = builder.channel(obj_name, cap);
                    objects.insert(obj_name.to_string(), id);
                }
                "goroutine" => {
                    let [g_name] = rest[..] else {
                        return Err(Self::err(no, "`goroutine` takes one name"));
                    };
                    let mut body = Vec::new();
                    loop {
                        let Some(&(op_no, op_line)) = self.lines.get(self.pos) else {
                            return Err(Self::err(no, format!("goroutine `{g_name}` lacks `end`")));
                        };
                        self.pos += 1;
                        if op_line == "end" {
                            break;
                        }
                        body.push((op_no, op_line.to_string()));
                    }
                    body_srcs.push((no, g_name.to_string(), body));
                }
                other => return Err(Self::err(no, format!("unknown directive `{other}`"))),
            }
        }

        // Declare all goroutines first so spawns can reference any of them.
        let mut gids: BTreeMap<String, Gid> = BTreeMap::new();
        for (no, g_name, _) in &body_srcs {
            if gids.contains_key(g_name) {
                return Err(Self::err(*no, format!("duplicate goroutine `{g_name}`")));
            }
            gids.insert(g_name.clone(), builder.goroutine(g_name));
        }

        for (_, g_name, body) in &body_srcs {
            let gid = gids[g_name];
            for (no, line) in body {
                let op = parse_op(line, *no, &objects, &gids)?;
                builder.push(gid, op);
            }
        }
        builder.build()
    }
}

/// One parsed `goroutine` block awaiting op resolution: declaration line
/// number, goroutine name, and the block's (line number, op text) pairs.
type BodySrc = (usize, String, Vec<(usize, String)>);

fn lookup(map: &BTreeMap<String, ObjectId>, name: &str, no: usize) -> Result<ObjectId, ModelError> {
    map.get(name)
        .copied()
        .ok_or_else(|| Parser::err(no, format!("unknown object `{name}`")))
}

fn parse_op(
    line: &str,
    no: usize,
    objects: &BTreeMap<String, ObjectId>,
    gids: &BTreeMap<String, Gid>,
) -> Result<ModelOp, ModelError> {
    let mut tokens = line.split_whitespace();
    let head = tokens.next().unwrap_or_default();
    let rest: Vec<&str> = tokens.collect();
    let one = |what: &str| -> Result<&str, ModelError> {
        match rest[..] {
            [x] => Ok(x),
            _ => Err(Parser::err(no, format!("`{what}` takes one argument"))),
        }
    };
    Ok(match head {
        "spawn" => {
            let name = one("spawn")?;
            ModelOp::Spawn(
                *gids
                    .get(name)
                    .ok_or_else(|| Parser::err(no, format!("unknown goroutine `{name}`")))?,
            )
        }
        "lock" => ModelOp::Lock(lookup(objects, one("lock")?, no)?),
        "unlock" => ModelOp::Unlock(lookup(objects, one("unlock")?, no)?),
        "rlock" => ModelOp::RLock(lookup(objects, one("rlock")?, no)?),
        "runlock" => ModelOp::RUnlock(lookup(objects, one("runlock")?, no)?),
        "wlock" => ModelOp::WLock(lookup(objects, one("wlock")?, no)?),
        "wunlock" => ModelOp::WUnlock(lookup(objects, one("wunlock")?, no)?),
        "send" => ModelOp::Send(lookup(objects, one("send")?, no)?),
        "recv" => ModelOp::Recv(lookup(objects, one("recv")?, no)?),
        "close" => ModelOp::Close(lookup(objects, one("close")?, no)?),
        "select" => {
            // select recv a, send b[, default]
            let args = line["select".len()..].trim();
            let mut candidates = Vec::new();
            let mut has_default = false;
            for case in args.split(',').map(str::trim).filter(|c| !c.is_empty()) {
                if case == "default" {
                    has_default = true;
                    continue;
                }
                let (dir, chan) = case
                    .split_once(' ')
                    .ok_or_else(|| Parser::err(no, format!("bad select case `{case}`")))?;
                let dir = match dir {
                    "send" => Direction::Send,
                    "recv" => Direction::Recv,
                    _ => return Err(Parser::err(no, format!("bad select case `{case}`"))),
                };
                candidates.push(SelectCandidate {
                    chan: lookup(objects, chan.trim(), no)?,
                    dir,
                });
            }
            ModelOp::Select {
                candidates,
                has_default,
            }
        }
        "add" => {
            let [wg, delta] = rest[..] else {
                return Err(Parser::err(no, "`add` takes a waitgroup and a delta"));
            };
            ModelOp::WgAdd(
                lookup(objects, wg, no)?,
                delta
                    .parse()
                    .map_err(|_| Parser::err(no, format!("bad delta `{delta}`")))?,
            )
        }
        "wait" => ModelOp::WgWait(lookup(objects, one("wait")?, no)?),
        "cancel" => ModelOp::CtxCancel(lookup(objects, one("cancel")?, no)?),
        "condwait" => {
            let [cond, mutex] = rest[..] else {
                return Err(Parser::err(no, "`condwait` takes a cond and a mutex"));
            };
            ModelOp::CondWait(lookup(objects, cond, no)?, lookup(objects, mutex, no)?)
        }
        "signal" => ModelOp::CondSignal(lookup(objects, one("signal")?, no)?),
        "broadcast" => ModelOp::CondBroadcast(lookup(objects, one("broadcast")?, no)?),
        "exit" => {
            if !rest.is_empty() {
                return Err(Parser::err(no, "`exit` takes no arguments"));
            }
            ModelOp::Exit
        }
        other => return Err(Parser::err(no, format!("unknown op `{other}`"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const RECV_UNDER_LOCK: &str = "\
model recv-under-lock
mutex mu
chan donec 0

goroutine main
  spawn closer
  spawn waiter
end

goroutine closer
  lock mu
  close donec
  unlock mu
end

goroutine waiter
  lock mu
  recv donec
  unlock mu
end
";

    #[test]
    fn parses_a_model_and_appends_exits() {
        let model = ProgramModel::parse(RECV_UNDER_LOCK).unwrap();
        assert_eq!(model.entry, Gid(1));
        assert_eq!(model.goroutines.len(), 3);
        for ops in model.goroutines.values() {
            assert_eq!(ops.last(), Some(&ModelOp::Exit));
        }
        assert_eq!(model.objects.mutexes.len(), 1);
        assert_eq!(model.objects.channels.len(), 1);
        assert_eq!(model.goroutine_name(Gid(3)), "waiter");
    }

    #[test]
    fn text_round_trip_preserves_the_model() {
        let model = ProgramModel::parse(RECV_UNDER_LOCK).unwrap();
        let again = ProgramModel::parse(&model.to_text()).unwrap();
        assert_eq!(model, again);
    }

    #[test]
    fn context_declares_a_done_channel() {
        let text = "model m\ncontext c\n\ngoroutine main\n  cancel c\n  recv c.done\nend\n";
        let model = ProgramModel::parse(text).unwrap();
        let (&ctx, &done) = model.objects.contexts.iter().next().unwrap();
        assert_eq!(model.objects.channels.get(&done), Some(&0));
        assert_eq!(
            model.goroutines[&model.entry][..2],
            [ModelOp::CtxCancel(ctx), ModelOp::Recv(done)]
        );
        let again = ProgramModel::parse(&model.to_text()).unwrap();
        assert_eq!(model, again);
    }

    #[test]
    fn select_cases_parse_in_order() {
        let text =
            "model m\nchan a 0\nchan b 1\n\ngoroutine main\n  select recv a, send b, default\nend\n";
        let model = ProgramModel::parse(text).unwrap();
        let ModelOp::Select {
            candidates,
            has_default,
        } = &model.goroutines[&model.entry][0]
        else {
            panic!("expected select");
        };
        assert!(has_default);
        assert_eq!(candidates.len(), 2);
        assert_eq!(candidates[0].dir, Direction::Recv);
        assert_eq!(candidates[1].dir, Direction::Send);
    }

    #[test]
    fn rejects_bad_models() {
        // Wrong object type.
        let text = "model m\nmutex mu\n\ngoroutine main\n  send mu\nend\n";
        assert!(ProgramModel::parse(text).is_err());
        // Spawn of an unknown goroutine.
        let text = "model m\n\ngoroutine main\n  spawn ghost\nend\n";
        assert!(ProgramModel::parse(text).is_err());
        // Double spawn of one body.
        let text = "model m\n\ngoroutine main\n  spawn w\n  spawn w\nend\n\ngoroutine w\nend\n";
        assert!(ProgramModel::parse(text).is_err());
        // Missing end.
        assert!(ProgramModel::parse("model m\n\ngoroutine main\n  exit\n").is_err());
        // Unknown op.
        assert!(ProgramModel::parse("model m\n\ngoroutine main\n  teleport\nend\n").is_err());
    }

    #[test]
    fn builder_matches_parser() {
        let mut b = ModelBuilder::new("recv-under-lock");
        let mu = b.mutex("mu");
        let donec = b.channel("donec", 0);
        let main = b.goroutine("main");
        let closer = b.goroutine("closer");
        let waiter = b.goroutine("waiter");
        b.ops(main, [ModelOp::Spawn(closer), ModelOp::Spawn(waiter)]);
        b.ops(
            closer,
            [
                ModelOp::Lock(mu),
                ModelOp::Close(donec),
                ModelOp::Unlock(mu),
            ],
        );
        b.ops(
            waiter,
            [ModelOp::Lock(mu), ModelOp::Recv(donec), ModelOp::Unlock(mu)],
        );
        let built = b.build().unwrap();
        assert_eq!(built, ProgramModel::parse(RECV_UNDER_LOCK).unwrap());
    }
}
