//! Explicit-set closures and the per-pair / per-thread race checks built on them.
//!
//! These are deliberately simple worklist saturations; the streaming engine is
//! tested against them.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::trace::{Op, ThreadId, Trace};

pub type EventSet = BTreeSet<usize>;

/// Smallest superset of `set` closed under thread-order predecessors and `r ↦ lw(r)`.
pub fn tl_closure(trace: &Trace, set: &EventSet) -> EventSet {
    let mut out = set.clone();
    let mut work: Vec<usize> = set.iter().copied().collect();
    while let Some(e) = work.pop() {
        let push = |f: usize, out: &mut EventSet, work: &mut Vec<usize>| {
            if out.insert(f) {
                work.push(f);
            }
        };
        for p in trace.immediate_preds(e) {
            push(p, &mut out, &mut work);
        }
        if let Op::Read(_) = trace.event(e).op {
            if let Some(w) = trace.last_write(e) {
                push(w, &mut out, &mut work);
            }
        }
    }
    out
}

/// `tl_closure` strengthened with: two same-lock acquires in the set force the
/// earlier one's matching release into the set.
pub fn sp_closure(trace: &Trace, set: &EventSet) -> EventSet {
    let mut cur = tl_closure(trace, set);
    loop {
        let mut extra = EventSet::new();
        for l in 0..trace.dims().locks {
            let acqs: Vec<usize> = trace
                .lock_events(l as u32)
                .iter()
                .copied()
                .filter(|&e| matches!(trace.event(e).op, Op::Acquire(_)) && cur.contains(&e))
                .collect();
            if acqs.len() < 2 {
                continue;
            }
            for &a in &acqs[..acqs.len() - 1] {
                if let Some(r) = trace.match_of(a) {
                    if !cur.contains(&r) {
                        extra.insert(r);
                    }
                }
            }
        }
        if extra.is_empty() {
            return cur;
        }
        extra.extend(cur.iter().copied());
        cur = tl_closure(trace, &extra);
    }
}

/// Strict thread-order predecessors contributed by `e` to an ideal.
fn preds(trace: &Trace, e: usize) -> Vec<usize> {
    trace.immediate_preds(e)
}

/// The sync-preserving closure of the thread predecessors of `e1` and `e2`.
pub fn sp_ideal(trace: &Trace, e1: usize, e2: usize) -> EventSet {
    let mut seed = EventSet::new();
    seed.extend(preds(trace, e1));
    seed.extend(preds(trace, e2));
    sp_closure(trace, &seed)
}

/// Whether the conflicting pair `(e1, e2)`, `e1` earlier, is a sync-preserving race.
pub fn is_syncp_race_pair(trace: &Trace, e1: usize, e2: usize) -> Result<bool> {
    if e1 >= e2 || !trace.conflicting(e1, e2) {
        return Err(Error::Query(format!(
            "({e1}, {e2}) is not an ordered conflicting pair"
        )));
    }
    let ideal = sp_ideal(trace, e1, e2);
    assert!(!ideal.contains(&e2), "later event inside its own ideal");
    Ok(!ideal.contains(&e1))
}

/// Earliest event of thread `t` that forms a sync-preserving race with `e`,
/// scanning candidates in trace order and growing one ideal per access kind.
pub fn syncp_races_with_thread(trace: &Trace, e: usize, t: ThreadId) -> Option<usize> {
    if trace.event(e).thread == t {
        return None;
    }
    let cands = trace.conflicting_in_thread(e, t);
    let mut best: Option<usize> = None;
    for want_write in [false, true] {
        let mut ideal = EventSet::new();
        for &f in &cands {
            let is_write = matches!(trace.event(f).op, Op::Write(_));
            if is_write != want_write {
                continue;
            }
            ideal.extend(preds(trace, f));
            ideal.extend(preds(trace, e));
            ideal = sp_closure(trace, &ideal);
            if !ideal.contains(&f) {
                best = Some(best.map_or(f, |b| b.min(f)));
                break;
            }
        }
    }
    best
}

/// Every event having an earlier sync-preserving partner, with its earliest partner.
pub fn racy_events(trace: &Trace) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for e in 1..=trace.len() {
        if trace.event(e).op.access().is_none() {
            continue;
        }
        let partner = (0..trace.dims().threads as ThreadId)
            .filter_map(|t| syncp_races_with_thread(trace, e, t))
            .min();
        if let Some(p) = partner {
            out.push((p, e));
        }
    }
    out
}
