//! Drops accesses to variables whose conflicting accesses are already ordered.
//!
//! A conflicting pair `e1 < e2` is ordered when `e1` lies in the thread-order
//! and last-write closure of the thread-order predecessors of `e2`.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::Result;
use crate::report::RaceReport;
use crate::trace::{Access, Event, Op, Trace, VarId};
use crate::vclock::VectorTimestamp as Vt;

#[derive(Clone, Debug)]
pub struct FilterResult {
    pub trace: Trace,
    pub dropped: BTreeSet<VarId>,
    pub dropped_events: BTreeMap<VarId, usize>,
    /// `index_map[k]` is the original index of filtered event `k + 1`.
    pub index_map: Vec<usize>,
}

impl FilterResult {
    pub fn original_idx(&self, idx: usize) -> usize {
        self.index_map[idx - 1]
    }

    /// Rewrites reports on the filtered trace to original indices.
    pub fn remap(&self, reports: &mut [RaceReport]) {
        for r in reports {
            r.e1 = self.original_idx(r.e1);
            r.e2 = self.original_idx(r.e2);
        }
    }
}

/// Variables with at least one unordered conflicting pair.
pub fn unordered_variables(trace: &Trace) -> BTreeSet<VarId> {
    let d = trace.dims();
    let mut clocks = vec![Vt::bottom(d.threads); d.threads];
    let mut lw = vec![Vt::bottom(d.threads); d.vars];
    // Local count of the latest read / write per (thread, var).
    let mut last = vec![[0u64; 2]; d.threads * d.vars];
    let mut out = BTreeSet::new();
    for e in trace.events() {
        let t = e.thread as usize;
        let before = clocks[t].clone();
        clocks[t].bump(t);
        match e.op {
            Op::Read(x) | Op::Write(x) => {
                let x = x as usize;
                let kind = if matches!(e.op, Op::Read(_)) { Access::Read } else { Access::Write };
                for u in (0..d.threads).filter(|&u| u != t) {
                    for k in [Access::Read, Access::Write] {
                        if !k.conflicts_with(kind) {
                            continue;
                        }
                        let c = last[u * d.vars + x][k as usize];
                        if c > before.get(u) {
                            out.insert(x as VarId);
                        }
                    }
                }
                last[t * d.vars + x][kind as usize] = clocks[t].get(t);
                match kind {
                    Access::Read => {
                        let w = lw[x].clone();
                        clocks[t].join_assign(&w);
                    }
                    Access::Write => lw[x] = clocks[t].clone(),
                }
            }
            Op::Fork(c) => {
                let p = clocks[t].clone();
                clocks[c as usize].join_assign(&p);
            }
            Op::Join(c) => {
                let ch = clocks[c as usize].clone();
                clocks[t].join_assign(&ch);
            }
            Op::Acquire(_) | Op::Release(_) => {}
        }
    }
    out
}

pub fn filter_ordered_variables(trace: &Trace) -> Result<FilterResult> {
    let keep = unordered_variables(trace);
    let dropped: BTreeSet<VarId> = (0..trace.dims().vars as VarId)
        .filter(|x| !keep.contains(x))
        .collect();
    let mut dropped_events = BTreeMap::new();
    let mut events = Vec::new();
    let mut index_map = Vec::new();
    for e in trace.events() {
        if let Some((_, x)) = e.op.access() {
            if dropped.contains(&x) {
                *dropped_events.entry(x).or_insert(0) += 1;
                continue;
            }
        }
        index_map.push(e.idx);
        events.push(Event {
            idx: events.len() + 1,
            ..*e
        });
    }
    let filtered = Trace::new(trace.names().clone(), events)?;
    Ok(FilterResult {
        trace: filtered,
        dropped,
        dropped_events,
        index_map,
    })
}
