//! Reading and writing the line-oriented trace format.
//!
//! A trace file is one header line followed by one line per event:
//!
//! ```text
//! trace v1 program=recv-under-lock go=1.17.3
//! seq=1 ts=1 gid=1 kind=MainStart phase=A
//! seq=2 ts=1 gid=1 kind=ChanCreate phase=A obj=0x2 aux={cap=0}
//! seq=3 ts=2 gid=1 kind=ChanSend phase=B obj=0x2 aux={block=true} ctx=[main.run@main.go:12;main.main@main.go:3]
//! ```
//!
//! Records may name the semantic kind directly (`kind=`) or the runtime
//! function that fired (`func=`), resolved through a [`SemanticTable`].
//! Unknown fields are skipped with a warning so that traces from newer
//! recorders stay readable. Writing is canonical: fixed field order, `kind=`
//! spelling, one trailing newline per line — so `write(parse(f))` is
//! byte-identical to a canonicalized `f`, and exactly `f` for files this
//! module wrote.

use crate::event::{
    Aux, CallContext, Direction, Event, Frame, Gid, ObjectId, Phase, SelectCandidate, SemanticKind,
    Trace, TraceMeta, SCHEMA_VERSION,
};
use crate::table::SemanticTable;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("line {line_no}: malformed record: {message}")]
    MalformedRecord { line_no: usize, message: String },
    #[error("line {line_no}: function `{name}` is not in the semantic table")]
    UnknownKind { line_no: usize, name: String },
    #[error("trace i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

/// A non-fatal oddity encountered while parsing (e.g. an unknown field).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line_no: usize,
    pub message: String,
}

/// Result of [`parse_trace`]: the trace plus any warnings.
#[derive(Debug, Clone)]
pub struct ParsedTrace {
    pub trace: Trace,
    pub warnings: Vec<ParseWarning>,
}

// Percent-escaping for free-form string components (program names, function
// names, file names). Reserved characters are the ones the line grammar
// assigns meaning to.
fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b' '
            | b'%'
            | b'@'
            | b':'
            | b';'
            | b'['
            | b']'
            | b'{'
            | b'}'
            | b'='
            | b','
            | 0x00..=0x1f => {
                out.push('%');
                out.push_str(&format!("{b:02x}"));
            }
            _ => out.push(b as char),
        }
    }
    out
}

fn unescape(s: &str, line_no: usize) -> Result<String, TraceIoError> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            if i + 2 > bytes.len() {
                return Err(malformed(line_no, "truncated escape sequence"));
            }
            let hex = s
                .get(i + 1..i + 3)
                .ok_or_else(|| malformed(line_no, "truncated escape sequence"))?;
            let v = u8::from_str_radix(hex, 16)
                .map_err(|_| malformed(line_no, "invalid escape sequence"))?;
            out.push(v);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map_err(|_| malformed(line_no, "escape yields invalid utf-8"))
}

fn malformed(line_no: usize, message: impl Into<String>) -> TraceIoError {
    TraceIoError::MalformedRecord {
        line_no,
        message: message.into(),
    }
}

fn format_aux(aux: &Aux) -> Option<String> {
    match aux {
        Aux::None => None,
        Aux::Child { gid } => Some(format!("{{child={}}}", gid.0)),
        Aux::Capacity { cap } => Some(format!("{{cap={cap}}}")),
        Aux::Block { block } => Some(format!("{{block={block}}}")),
        Aux::Delta { delta } => Some(format!("{{delta={delta}}}")),
        Aux::Done { chan } => Some(format!("{{done={chan}}}")),
        Aux::Select {
            candidates,
            has_default,
        } => {
            let cases: Vec<String> = candidates
                .iter()
                .map(|c| {
                    let d = match c.dir {
                        Direction::Send => 's',
                        Direction::Recv => 'r',
                    };
                    format!("{}:{}", c.chan, d)
                })
                .collect();
            Some(format!(
                "{{cases=[{}],default={}}}",
                cases.join(";"),
                has_default
            ))
        }
    }
}

fn format_ctx(ctx: &CallContext) -> Option<String> {
    if ctx.is_empty() {
        return None;
    }
    let frames: Vec<String> = ctx
        .iter()
        .map(|f| format!("{}@{}:{}", escape(&f.function), escape(&f.file), f.line))
        .collect();
    Some(format!("[{}]", frames.join(";")))
}

/// Write a trace in canonical form. An empty trace yields the header only.
pub fn write_trace<W: Write>(w: &mut W, trace: &Trace) -> Result<(), TraceIoError> {
    write!(
        w,
        "trace v{} program={}",
        trace.meta.schema_version,
        escape(&trace.meta.program)
    )?;
    if let Some(go) = &trace.meta.go_version {
        write!(w, " go={}", escape(go))?;
    }
    writeln!(w)?;
    for ev in &trace.events {
        write!(
            w,
            "seq={} ts={} gid={} kind={} phase={}",
            ev.seq,
            ev.ts,
            ev.gid.0,
            ev.kind,
            ev.phase.code()
        )?;
        if let Some(obj) = ev.obj {
            write!(w, " obj={obj}")?;
        }
        if let Some(aux) = format_aux(&ev.aux) {
            write!(w, " aux={aux}")?;
        }
        if let Some(ctx) = format_ctx(&ev.ctx) {
            write!(w, " ctx={ctx}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Render a trace to a string (canonical form, see [`write_trace`]).
pub fn trace_to_string(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("canonical form is utf-8")
}

fn parse_u64(s: &str, line_no: usize, what: &str) -> Result<u64, TraceIoError> {
    s.parse()
        .map_err(|_| malformed(line_no, format!("bad {what} `{s}`")))
}

fn parse_obj(s: &str, line_no: usize) -> Result<ObjectId, TraceIoError> {
    let hex = s
        .strip_prefix("0x")
        .ok_or_else(|| malformed(line_no, format!("object id `{s}` must be 0x-hex")))?;
    u64::from_str_radix(hex, 16)
        .map(ObjectId)
        .map_err(|_| malformed(line_no, format!("bad object id `{s}`")))
}

fn parse_aux(body: &str, line_no: usize) -> Result<Aux, TraceIoError> {
    let inner = body
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| malformed(line_no, "aux must be braced"))?;
    let mut child = None;
    let mut cap = None;
    let mut block = None;
    let mut delta = None;
    let mut done = None;
    let mut cases: Option<Vec<SelectCandidate>> = None;
    let mut has_default = None;
    // Split on commas at bracket depth zero: the case list uses `;`.
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in inner.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&inner[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&inner[start..]);
    for part in parts {
        if part.is_empty() {
            continue;
        }
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| malformed(line_no, format!("bad aux item `{part}`")))?;
        match key {
            "child" => child = Some(Gid(parse_u64(value, line_no, "child gid")?)),
            "cap" => cap = Some(parse_u64(value, line_no, "capacity")?),
            "block" => {
                block = Some(match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(malformed(line_no, format!("bad block flag `{value}`"))),
                })
            }
            "delta" => {
                delta = Some(
                    value
                        .parse::<i64>()
                        .map_err(|_| malformed(line_no, format!("bad delta `{value}`")))?,
                )
            }
            "done" => done = Some(parse_obj(value, line_no)?),
            "default" => {
                has_default = Some(match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(malformed(line_no, format!("bad default flag `{value}`"))),
                })
            }
            "cases" => {
                let list = value
                    .strip_prefix('[')
                    .and_then(|s| s.strip_suffix(']'))
                    .ok_or_else(|| malformed(line_no, "cases must be bracketed"))?;
                let mut parsed = Vec::new();
                for case in list.split(';').filter(|c| !c.is_empty()) {
                    let (chan, dir) = case
                        .split_once(':')
                        .ok_or_else(|| malformed(line_no, format!("bad case `{case}`")))?;
                    let dir = match dir {
                        "s" => Direction::Send,
                        "r" => Direction::Recv,
                        _ => return Err(malformed(line_no, format!("bad direction `{dir}`"))),
                    };
                    parsed.push(SelectCandidate {
                        chan: parse_obj(chan, line_no)?,
                        dir,
                    });
                }
                cases = Some(parsed);
            }
            other => return Err(malformed(line_no, format!("unknown aux key `{other}`"))),
        }
    }
    if let Some(candidates) = cases {
        return Ok(Aux::Select {
            candidates,
            has_default: has_default.unwrap_or(false),
        });
    }
    if let Some(gid) = child {
        return Ok(Aux::Child { gid });
    }
    if let Some(cap) = cap {
        return Ok(Aux::Capacity { cap });
    }
    if let Some(block) = block {
        return Ok(Aux::Block { block });
    }
    if let Some(delta) = delta {
        return Ok(Aux::Delta { delta });
    }
    if let Some(chan) = done {
        return Ok(Aux::Done { chan });
    }
    Ok(Aux::None)
}

fn parse_ctx(body: &str, line_no: usize) -> Result<CallContext, TraceIoError> {
    let inner = body
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| malformed(line_no, "ctx must be bracketed"))?;
    let mut frames = Vec::new();
    for frame in inner.split(';').filter(|f| !f.is_empty()) {
        let (function, rest) = frame
            .split_once('@')
            .ok_or_else(|| malformed(line_no, format!("bad frame `{frame}`")))?;
        let (file, line) = rest
            .rsplit_once(':')
            .ok_or_else(|| malformed(line_no, format!("bad frame `{frame}`")))?;
        frames.push(Frame {
            function: unescape(function, line_no)?,
            file: unescape(file, line_no)?,
            line: line
                .parse()
                .map_err(|_| malformed(line_no, format!("bad line number `{line}`")))?,
        });
    }
    Ok(frames)
}

fn parse_header(line: &str, warnings: &mut Vec<ParseWarning>) -> Result<TraceMeta, TraceIoError> {
    let mut fields = line.split_ascii_whitespace();
    if fields.next() != Some("trace") {
        return Err(malformed(1, "header must start with `trace`"));
    }
    let version = fields
        .next()
        .and_then(|v| v.strip_prefix('v'))
        .ok_or_else(|| malformed(1, "header must carry a schema version"))?;
    let mut meta = TraceMeta {
        program: String::new(),
        schema_version: version.to_string(),
        go_version: None,
    };
    for field in fields {
        let Some((key, value)) = field.split_once('=') else {
            return Err(malformed(1, format!("bad header field `{field}`")));
        };
        match key {
            "program" => meta.program = unescape(value, 1)?,
            "go" => meta.go_version = Some(unescape(value, 1)?),
            other => warnings.push(ParseWarning {
                line_no: 1,
                message: format!("ignoring unknown header field `{other}`"),
            }),
        }
    }
    if meta.schema_version != SCHEMA_VERSION {
        warnings.push(ParseWarning {
            line_no: 1,
            message: format!(
                "trace schema v{} differs from supported v{SCHEMA_VERSION}",
                meta.schema_version
            ),
        });
    }
    Ok(meta)
}

/// Parse a trace. Events keep their recorded order and seq numbers; unknown
/// fields are skipped with a warning; `func=` records are resolved through
/// `table`.
pub fn parse_trace<R: BufRead>(
    reader: R,
    table: &SemanticTable,
) -> Result<ParsedTrace, TraceIoError> {
    let mut warnings = Vec::new();
    let mut meta: Option<TraceMeta> = None;
    let mut events = Vec::new();

    for (no, line) in reader.lines().enumerate() {
        let line_no = no + 1;
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if meta.is_none() {
            meta = Some(parse_header(line, &mut warnings)?);
            continue;
        }

        let mut seq = None;
        let mut ts = None;
        let mut gid = None;
        let mut kind = None;
        let mut func: Option<String> = None;
        let mut phase = None;
        let mut obj = None;
        let mut aux = Aux::None;
        let mut ctx = Vec::new();
        for field in line.split_ascii_whitespace() {
            let Some((key, value)) = field.split_once('=') else {
                return Err(malformed(line_no, format!("bad field `{field}`")));
            };
            match key {
                "seq" => seq = Some(parse_u64(value, line_no, "seq")?),
                "ts" => ts = Some(parse_u64(value, line_no, "ts")?),
                "gid" => gid = Some(Gid(parse_u64(value, line_no, "gid")?)),
                "kind" => {
                    kind = Some(SemanticKind::from_name(value).ok_or_else(|| {
                        malformed(line_no, format!("unknown kind name `{value}`"))
                    })?)
                }
                "func" => func = Some(unescape(value, line_no)?),
                "phase" => {
                    let mut chars = value.chars();
                    phase = match (chars.next().and_then(Phase::from_code), chars.next()) {
                        (Some(p), None) => Some(p),
                        _ => return Err(malformed(line_no, format!("bad phase `{value}`"))),
                    };
                }
                "obj" => obj = Some(parse_obj(value, line_no)?),
                "aux" => aux = parse_aux(value, line_no)?,
                "ctx" => ctx = parse_ctx(value, line_no)?,
                other => warnings.push(ParseWarning {
                    line_no,
                    message: format!("ignoring unknown field `{other}`"),
                }),
            }
        }

        let kind = match (kind, func) {
            (Some(k), _) => k,
            (None, Some(name)) => table
                .lookup(&name)
                .ok_or(TraceIoError::UnknownKind { line_no, name })?,
            (None, None) => return Err(malformed(line_no, "record names neither kind nor func")),
        };
        let ev = Event {
            seq: seq.ok_or_else(|| malformed(line_no, "missing seq"))?,
            ts: ts.ok_or_else(|| malformed(line_no, "missing ts"))?,
            gid: gid.ok_or_else(|| malformed(line_no, "missing gid"))?,
            kind,
            phase: phase.ok_or_else(|| malformed(line_no, "missing phase"))?,
            obj,
            aux,
            ctx,
        };
        events.push(ev);
    }

    let meta = meta.ok_or_else(|| malformed(1, "missing trace header"))?;
    Ok(ParsedTrace {
        trace: Trace { meta, events },
        warnings,
    })
}

/// Parse a trace held in a string.
pub fn parse_trace_str(text: &str, table: &SemanticTable) -> Result<ParsedTrace, TraceIoError> {
    parse_trace(text.as_bytes(), table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::load_semantic_table;

    fn table() -> SemanticTable {
        load_semantic_table("1.17.3").unwrap()
    }

    #[test]
    fn empty_trace_round_trips_as_header_only() {
        let trace = Trace::new(TraceMeta::new("empty"), vec![]);
        let text = trace_to_string(&trace);
        assert_eq!(text, "trace v1 program=empty\n");
        let parsed = parse_trace_str(&text, &table()).unwrap();
        assert_eq!(parsed.trace, trace);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let trace = Trace::new(
            TraceMeta {
                program: "demo prog".to_string(),
                schema_version: SCHEMA_VERSION.to_string(),
                go_version: Some("1.17.3".to_string()),
            },
            vec![
                Event::new(
                    1,
                    1,
                    Gid(1),
                    SemanticKind::MainStart,
                    Phase::Atomic,
                    None,
                    Aux::None,
                ),
                Event::new(
                    2,
                    1,
                    Gid(1),
                    SemanticKind::ChanCreate,
                    Phase::Atomic,
                    Some(ObjectId(2)),
                    Aux::Capacity { cap: 3 },
                ),
                Event {
                    seq: 3,
                    ts: 2,
                    gid: Gid(1),
                    kind: SemanticKind::Select,
                    phase: Phase::Begin,
                    obj: None,
                    aux: Aux::Select {
                        candidates: vec![
                            SelectCandidate {
                                chan: ObjectId(2),
                                dir: Direction::Recv,
                            },
                            SelectCandidate {
                                chan: ObjectId(16),
                                dir: Direction::Send,
                            },
                        ],
                        has_default: true,
                    },
                    ctx: vec![
                        Frame::new("pkg.(*T).run", "a b.go", 12),
                        Frame::new("main.main", "main.go", 3),
                    ],
                },
                Event::new(
                    4,
                    3,
                    Gid(1),
                    SemanticKind::WGAdd,
                    Phase::Atomic,
                    Some(ObjectId(5)),
                    Aux::Delta { delta: -2 },
                ),
            ],
        );
        let text = trace_to_string(&trace);
        let parsed = parse_trace_str(&text, &table()).unwrap();
        assert_eq!(parsed.trace, trace);
        assert_eq!(trace_to_string(&parsed.trace), text);
    }

    #[test]
    fn func_records_resolve_through_the_table() {
        let text = "trace v1 program=p\n\
                    seq=1 ts=1 gid=1 func=main.main phase=A\n\
                    seq=2 ts=2 gid=1 func=sync.(*Mutex).Lock phase=B obj=0x1\n";
        let parsed = parse_trace_str(text, &table()).unwrap();
        assert_eq!(parsed.trace.events[0].kind, SemanticKind::MainStart);
        assert_eq!(parsed.trace.events[1].kind, SemanticKind::MutexLock);
        // Canonical output uses kind= spelling.
        assert!(trace_to_string(&parsed.trace).contains("kind=MutexLock"));
    }

    #[test]
    fn unknown_function_is_an_error() {
        let text = "trace v1 program=p\nseq=1 ts=1 gid=1 func=mystery.fn phase=A\n";
        match parse_trace_str(text, &table()) {
            Err(TraceIoError::UnknownKind { name, line_no }) => {
                assert_eq!(name, "mystery.fn");
                assert_eq!(line_no, 2);
            }
            other => panic!("expected UnknownKind, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_warn_but_do_not_fail() {
        let text = "trace v1 program=p\nseq=1 ts=1 gid=1 kind=MainStart phase=A future=xyz\n";
        let parsed = parse_trace_str(text, &table()).unwrap();
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].message.contains("future"));
        assert_eq!(parsed.trace.events.len(), 1);
    }

    #[test]
    fn malformed_records_are_rejected_with_line_numbers() {
        let cases = [
            "trace v1 program=p\nseq=x ts=1 gid=1 kind=MainStart phase=A\n",
            "trace v1 program=p\nseq=1 ts=1 gid=1 kind=Bogus phase=A\n",
            "trace v1 program=p\nseq=1 ts=1 gid=1 kind=MainStart phase=Q\n",
            "trace v1 program=p\nseq=1 ts=1 gid=1 phase=A\n",
            "trace v1 program=p\nseq=1 ts=1 gid=1 kind=GExit phase=A obj=99\n",
            "nonsense\n",
        ];
        for text in cases {
            match parse_trace_str(text, &table()) {
                Err(TraceIoError::MalformedRecord { .. }) => {}
                other => panic!("expected MalformedRecord for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn escaping_handles_reserved_characters() {
        let original = "weird @fn;with]=chars, 100%";
        let escaped = escape(original);
        assert!(!escaped.contains(' '));
        assert_eq!(unescape(&escaped, 1).unwrap(), original);
    }
}
