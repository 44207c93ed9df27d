#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use syncp::io::read_trace_file;
use syncp::trace::{Op, Trace};

pub const FIXTURES: [&str; 12] = [
    "empty", "sigma1", "sigma2", "sigma3", "sigma4", "sigma4p", "sigma5", "sigma6", "sigmaA", "sigmaB",
    "sigmaC", "sdp",
];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> Trace {
    read_trace_file(&fixture_path(&format!("{name}.trace"))).unwrap()
}

pub fn set(xs: &[usize]) -> BTreeSet<usize> {
    xs.iter().copied().collect()
}

// Independent oracles: quadratic rescans of the raw event list, no trace indexes.

fn is_acq(tr: &Trace, e: usize) -> bool {
    matches!(tr.event(e).op, Op::Acquire(_))
}

/// Events directly thread-order-before `e`, read off the event list.
pub fn naive_to_preds(tr: &Trace, e: usize) -> Vec<usize> {
    let ev = tr.event(e);
    let mut out = Vec::new();
    for f in 1..e {
        let fe = tr.event(f);
        if fe.thread == ev.thread {
            out.push(f);
        }
        if let Op::Fork(c) = fe.op {
            if c == ev.thread {
                out.push(f);
            }
        }
        if let Op::Join(c) = ev.op {
            if fe.thread == c {
                out.push(f);
            }
        }
    }
    out
}

pub fn naive_lw(tr: &Trace, r: usize) -> Option<usize> {
    let Op::Read(x) = tr.event(r).op else { return None };
    (1..r).rev().find(|&f| tr.event(f).op == Op::Write(x))
}

pub fn naive_match(tr: &Trace, a: usize) -> Option<usize> {
    let Op::Acquire(l) = tr.event(a).op else { return None };
    let t = tr.event(a).thread;
    (a + 1..=tr.len()).find(|&f| tr.event(f).thread == t && tr.event(f).op == Op::Release(l))
}

pub fn naive_tl(tr: &Trace, s: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut cur = s.clone();
    loop {
        let mut next = cur.clone();
        for &e in &cur {
            next.extend(naive_to_preds(tr, e));
            next.extend(naive_lw(tr, e));
        }
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

pub fn naive_sp(tr: &Trace, s: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut cur = naive_tl(tr, s);
    loop {
        let mut next = cur.clone();
        for &a in &cur {
            for &b in &cur {
                if a < b && is_acq(tr, a) && is_acq(tr, b) && tr.event(a).op == tr.event(b).op {
                    next.extend(naive_match(tr, a));
                }
            }
        }
        let next = naive_tl(tr, &next);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

pub fn naive_conflicting(tr: &Trace, a: usize, b: usize) -> bool {
    let (ea, eb) = (tr.event(a), tr.event(b));
    match (ea.op, eb.op) {
        (Op::Read(x), Op::Write(y)) | (Op::Write(x), Op::Read(y)) | (Op::Write(x), Op::Write(y)) => {
            x == y && ea.thread != eb.thread
        }
        _ => false,
    }
}

/// Sync-preserving race per the ideal definition, via the naive closures.
pub fn naive_syncp_race(tr: &Trace, e1: usize, e2: usize) -> bool {
    let mut seed = BTreeSet::new();
    for e in [e1, e2] {
        let preds = naive_to_preds(tr, e);
        // Immediate predecessors suffice: the closure adds the rest.
        seed.extend(preds);
    }
    let ideal = naive_sp(tr, &seed);
    !ideal.contains(&e1) && !ideal.contains(&e2)
}

/// For each access with an earlier sync-preserving partner, the earliest one.
pub fn naive_syncp_racy_events(tr: &Trace) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for e2 in 1..=tr.len() {
        if let Some(e1) = (1..e2).find(|&e1| naive_conflicting(tr, e1, e2) && naive_syncp_race(tr, e1, e2)) {
            out.push((e1, e2));
        }
    }
    out
}
