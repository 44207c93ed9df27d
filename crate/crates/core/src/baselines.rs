//! Happens-before and schedulable-happens-before detectors with full vector clocks.

use crate::report::RaceReport;
use crate::trace::{Access, Op, Trace};
use crate::vclock::VectorTimestamp as Vt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Hb,
    Shb,
}

#[derive(Clone, Copy, Debug)]
struct Last {
    local: u64,
    idx: usize,
    loc: Option<u64>,
}

/// Clock of each event's thread predecessors (the state just before the event).
struct Clocks {
    rel: Relation,
    threads: Vec<Vt>,
    locks: Vec<Vt>,
    writes: Vec<Vt>,
}

impl Clocks {
    fn new(trace: &Trace, rel: Relation) -> Clocks {
        let d = trace.dims();
        let b = Vt::bottom(d.threads);
        Clocks {
            rel,
            threads: vec![b.clone(); d.threads],
            locks: vec![b.clone(); d.locks],
            writes: vec![b; d.vars],
        }
    }

    /// Advances over `e` and returns the clock before it.
    fn step(&mut self, trace: &Trace, e: usize) -> Vt {
        let ev = trace.event(e);
        let t = ev.thread as usize;
        let before = self.threads[t].clone();
        self.threads[t].bump(t);
        match ev.op {
            Op::Acquire(l) => {
                let c = self.locks[l as usize].clone();
                self.threads[t].join_assign(&c);
            }
            Op::Release(l) => self.locks[l as usize] = self.threads[t].clone(),
            Op::Read(x) if self.rel == Relation::Shb => {
                let c = self.writes[x as usize].clone();
                self.threads[t].join_assign(&c);
            }
            Op::Write(x) => self.writes[x as usize] = self.threads[t].clone(),
            Op::Fork(c) => {
                let p = self.threads[t].clone();
                self.threads[c as usize].join_assign(&p);
            }
            Op::Join(c) => {
                let ch = self.threads[c as usize].clone();
                self.threads[t].join_assign(&ch);
            }
            Op::Read(_) => {}
        }
        before
    }
}

fn detect(trace: &Trace, rel: Relation) -> Vec<RaceReport> {
    let d = trace.dims();
    let mut clocks = Clocks::new(trace, rel);
    let mut last: Vec<[Option<Last>; 2]> = vec![[None, None]; d.threads * d.vars];
    let mut out = Vec::new();
    for e in 1..=trace.len() {
        let before = clocks.step(trace, e);
        let ev = trace.event(e);
        let Some((kind, x)) = ev.op.access() else {
            continue;
        };
        let t = ev.thread as usize;
        let mut best: Option<Last> = None;
        for u in (0..d.threads).filter(|&u| u != t) {
            for k in [Access::Read, Access::Write] {
                if !k.conflicts_with(kind) {
                    continue;
                }
                if let Some(l) = last[u * d.vars + x as usize][k as usize] {
                    if l.local > before.get(u) && best.is_none_or(|b| l.idx < b.idx) {
                        best = Some(l);
                    }
                }
            }
        }
        if let Some(b) = best {
            let mut r = RaceReport::from_pair(trace, b.idx, e);
            r.locs.0 = b.loc;
            out.push(r);
        }
        last[t * d.vars + x as usize][kind as usize] = Some(Last {
            local: before.get(t) + 1,
            idx: e,
            loc: ev.loc,
        });
    }
    out
}

/// Reports each access unordered by happens-before with some earlier conflicting
/// access; the partner is the earliest among the per-thread latest candidates.
pub fn hb_run(trace: &Trace) -> Vec<RaceReport> {
    detect(trace, Relation::Hb)
}

/// As [`hb_run`] with last-write-to-read edges added to the order.
pub fn shb_run(trace: &Trace) -> Vec<RaceReport> {
    detect(trace, Relation::Shb)
}

/// Every conflicting pair `(e1, e2)` with `e1` not ordered before the
/// predecessors of `e2` under the chosen relation.
pub fn race_pairs(trace: &Trace, rel: Relation) -> Vec<(usize, usize)> {
    let mut clocks = Clocks::new(trace, rel);
    let befores: Vec<Vt> = (1..=trace.len()).map(|e| clocks.step(trace, e)).collect();
    let mut out = Vec::new();
    for e2 in 1..=trace.len() {
        for e1 in 1..e2 {
            if !trace.conflicting(e1, e2) {
                continue;
            }
            let t1 = trace.event(e1).thread as usize;
            let local1 = befores[e1 - 1].get(t1) + 1;
            if local1 > befores[e2 - 1].get(t1) {
                out.push((e1, e2));
            }
        }
    }
    out
}
