//! Text trace format, rf-poset JSON, and report emission.
//!
//! Trace lines are `thread|op|target[|location]`; blank lines and lines
//! starting with `#` are skipped.

use std::io::{BufRead, Write};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::report::{summarize, RaceReport, Summary};
use crate::rfposet::{PosetEvent, ReverseInstance, RfPoset};
use crate::trace::{Access, Op, Trace, TraceBuilder};

/// Parses lines into a builder without enforcing trace well-formedness.
pub fn parse_events<R: BufRead>(reader: R) -> Result<TraceBuilder> {
    let mut b = TraceBuilder::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = s.split('|').map(str::trim).collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 3 or 4 `|`-separated fields, found {}", fields.len()),
            });
        }
        if fields[..3].iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                line: lineno,
                msg: "empty field".into(),
            });
        }
        let loc = match fields.get(3) {
            Some(f) => Some(f.parse::<u64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("location `{f}` is not a nonnegative integer"),
            })?),
            None => None,
        };
        b.push_tokens(fields[0], fields[1], fields[2], loc)
            .map_err(|msg| Error::Parse { line: lineno, msg })?;
    }
    Ok(b)
}

/// Parses and validates a trace.
pub fn parse_trace<R: BufRead>(reader: R) -> Result<Trace> {
    parse_events(reader)?.build()
}

pub fn parse_trace_str(s: &str) -> Result<Trace> {
    parse_trace(s.as_bytes())
}

pub fn read_trace_file(path: &std::path::Path) -> Result<Trace> {
    let f = std::fs::File::open(path)?;
    parse_trace(std::io::BufReader::new(f))
}

pub fn emit_trace<W: Write>(trace: &Trace, mut out: W) -> std::io::Result<()> {
    for e in trace.events() {
        let target = match e.op {
            Op::Read(x) | Op::Write(x) => trace.var_name(x),
            Op::Acquire(l) | Op::Release(l) => trace.lock_name(l),
            Op::Fork(c) | Op::Join(c) => trace.thread_name(c),
        };
        write!(out, "{}|{}|{}", trace.thread_name(e.thread), e.op.token(), target)?;
        if let Some(l) = e.loc {
            write!(out, "|{l}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn trace_to_string(trace: &Trace) -> String {
    let mut v = Vec::new();
    emit_trace(trace, &mut v).expect("writing to memory");
    String::from_utf8(v).expect("utf-8 names")
}

fn schema<T>(path: &str, msg: impl Into<String>) -> Result<T> {
    Err(Error::Schema {
        path: path.to_string(),
        msg: msg.into(),
    })
}

fn get_u64(v: &Value, path: &str) -> Result<u64> {
    v.as_u64()
        .map_or_else(|| schema(path, "expected a nonnegative integer"), Ok)
}

fn get_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().map_or_else(|| schema(path, "expected a string"), Ok)
}

fn get_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().map_or_else(|| schema(path, "expected an array"), Ok)
}

fn poset_from_value(v: &Value) -> Result<RfPoset> {
    let obj = v.as_object().map_or_else(|| schema("$", "expected an object"), Ok)?;
    let events_v = obj.get("events").map_or_else(|| schema("$.events", "missing"), Ok)?;
    let mut events = Vec::new();
    for (i, ev) in get_array(events_v, "$.events")?.iter().enumerate() {
        let p = format!("$.events[{i}]");
        if !ev.is_object() {
            return schema(&p, "expected an object");
        }
        let field = |k: &str| ev.get(k).map_or_else(|| schema(&format!("{p}.{k}"), "missing"), Ok);
        let id = get_u64(field("id")?, &format!("{p}.id"))?;
        let thread = get_str(field("thread")?, &format!("{p}.thread"))?.to_string();
        let op = match get_str(field("op")?, &format!("{p}.op"))? {
            "r" => Access::Read,
            "w" => Access::Write,
            other => return schema(&format!("{p}.op"), format!("expected \"r\" or \"w\", found {other:?}")),
        };
        let var = get_str(field("var")?, &format!("{p}.var"))?.to_string();
        events.push(PosetEvent { id, thread, op, var });
    }
    let mut order = Vec::new();
    if let Some(o) = obj.get("order") {
        for (i, pair) in get_array(o, "$.order")?.iter().enumerate() {
            let p = format!("$.order[{i}]");
            let arr = get_array(pair, &p)?;
            if arr.len() != 2 {
                return schema(&p, "expected a pair");
            }
            order.push((get_u64(&arr[0], &format!("{p}[0]"))?, get_u64(&arr[1], &format!("{p}[1]"))?));
        }
    }
    let mut rf = std::collections::BTreeMap::new();
    if let Some(r) = obj.get("rf") {
        let m = r.as_object().map_or_else(|| schema("$.rf", "expected an object"), Ok)?;
        for (k, w) in m {
            let p = format!("$.rf.{k}");
            let read: u64 = k.parse().map_or_else(|_| schema(&p, "key must be an event id"), Ok)?;
            rf.insert(read, get_u64(w, &p)?);
        }
    }
    let distinguished = match obj.get("distinguished") {
        None | Some(Value::Null) => None,
        Some(d) => {
            let arr = get_array(d, "$.distinguished")?;
            if arr.len() != 3 {
                return schema("$.distinguished", "expected three event ids");
            }
            let mut ids = [0u64; 3];
            for (k, x) in arr.iter().enumerate() {
                ids[k] = get_u64(x, &format!("$.distinguished[{k}]"))?;
            }
            Some(ids)
        }
    };
    let poset = RfPoset {
        events,
        order,
        rf,
        distinguished,
    };
    poset.analyze()?;
    Ok(poset)
}

fn poset_to_value(p: &RfPoset) -> Value {
    let events: Vec<Value> = p
        .events
        .iter()
        .map(|e| json!({"id": e.id, "thread": e.thread, "op": e.op.token(), "var": e.var}))
        .collect();
    let order: Vec<Value> = p.order.iter().map(|&(a, b)| json!([a, b])).collect();
    let mut rf = Map::new();
    for (r, w) in &p.rf {
        rf.insert(r.to_string(), json!(w));
    }
    json!({
        "events": events,
        "order": order,
        "rf": rf,
        "distinguished": p.distinguished.map(|d| d.to_vec()),
    })
}

pub fn parse_rfposet(s: &str) -> Result<RfPoset> {
    let v: Value = serde_json::from_str(s).map_err(|e| Error::Schema {
        path: "$".into(),
        msg: e.to_string(),
    })?;
    poset_from_value(&v)
}

pub fn emit_rfposet(p: &RfPoset) -> String {
    serde_json::to_string_pretty(&poset_to_value(p)).expect("serializable")
}

/// A poset with a distinguished triplet plus an optional `witness` id list.
pub fn parse_reverse_instance(s: &str) -> Result<(RfPoset, Option<Vec<u64>>)> {
    let v: Value = serde_json::from_str(s).map_err(|e| Error::Schema {
        path: "$".into(),
        msg: e.to_string(),
    })?;
    let poset = poset_from_value(&v)?;
    let witness = match v.get("witness") {
        None | Some(Value::Null) => None,
        Some(w) => Some(
            get_array(w, "$.witness")?
                .iter()
                .enumerate()
                .map(|(i, x)| get_u64(x, &format!("$.witness[{i}]")))
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    Ok((poset, witness))
}

pub fn emit_reverse_instance(inst: &ReverseInstance) -> String {
    let mut v = poset_to_value(&inst.poset);
    v["witness"] = json!(inst.witness);
    serde_json::to_string_pretty(&v).expect("serializable")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Serialize)]
struct JsonRace<'a> {
    e1: usize,
    e2: usize,
    var: &'a str,
    threads: [&'a str; 2],
    locs: [Option<u64>; 2],
}

#[derive(Serialize)]
struct JsonSummary {
    racy_events: usize,
    racy_lines: usize,
    racy_vars: usize,
    max_distance: usize,
}

impl From<&Summary> for JsonSummary {
    fn from(s: &Summary) -> Self {
        JsonSummary {
            racy_events: s.racy_events,
            racy_lines: s.racy_lines,
            racy_vars: s.racy_vars,
            max_distance: s.max_distance,
        }
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    algo: &'a str,
    races: Vec<JsonRace<'a>>,
    summary: JsonSummary,
}

fn loc_text(l: Option<u64>) -> String {
    l.map_or("-".to_string(), |l| l.to_string())
}

/// Writes reports (indices already in the trace's numbering) with their summary.
pub fn emit_report<W: Write>(
    trace: &Trace,
    algo: &str,
    reports: &[RaceReport],
    format: Format,
    mut out: W,
) -> Result<()> {
    let summary = summarize(reports);
    match format {
        Format::Text => {
            for r in reports {
                writeln!(
                    out,
                    "race e1={} e2={} var={} threads={},{} kinds={},{} locs={},{}",
                    r.e1,
                    r.e2,
                    trace.var_name(r.var),
                    trace.thread_name(r.threads.0),
                    trace.thread_name(r.threads.1),
                    r.kinds.0.token(),
                    r.kinds.1.token(),
                    loc_text(r.locs.0),
                    loc_text(r.locs.1),
                )?;
            }
            writeln!(
                out,
                "summary algo={} racy_events={} racy_lines={} racy_vars={} max_distance={}",
                algo, summary.racy_events, summary.racy_lines, summary.racy_vars, summary.max_distance
            )?;
        }
        Format::Json => {
            let doc = JsonReport {
                algo,
                races: reports
                    .iter()
                    .map(|r| JsonRace {
                        e1: r.e1,
                        e2: r.e2,
                        var: trace.var_name(r.var),
                        threads: [trace.thread_name(r.threads.0), trace.thread_name(r.threads.1)],
                        locs: [r.locs.0, r.locs.1],
                    })
                    .collect(),
                summary: (&summary).into(),
            };
            serde_json::to_writer(&mut out, &doc).map_err(std::io::Error::from)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
            w.write_record(["e1", "e2", "var", "thread1", "thread2", "kind1", "kind2", "loc1", "loc2"])
                .map_err(io)?;
            for r in reports {
                w.write_record([
                    r.e1.to_string(),
                    r.e2.to_string(),
                    trace.var_name(r.var).to_string(),
                    trace.thread_name(r.threads.0).to_string(),
                    trace.thread_name(r.threads.1).to_string(),
                    r.kinds.0.token().to_string(),
                    r.kinds.1.token().to_string(),
                    r.locs.0.map_or(String::new(), |l| l.to_string()),
                    r.locs.1.map_or(String::new(), |l| l.to_string()),
                ])
                .map_err(io)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
