//! Race reports and the aggregate metrics computed over them.

use std::collections::BTreeSet;
use std::time::Duration;

use crate::trace::{Access, ThreadId, Trace, VarId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RaceReport {
    /// Earlier event of the pair.
    pub e1: usize,
    /// The event found racy.
    pub e2: usize,
    pub var: VarId,
    pub threads: (ThreadId, ThreadId),
    pub kinds: (Access, Access),
    pub locs: (Option<u64>, Option<u64>),
}

impl RaceReport {
    pub fn distance(&self) -> usize {
        self.e2 - self.e1
    }

    /// Builds a report for `(e1, e2)` from the events of `trace`.
    pub fn from_pair(trace: &Trace, e1: usize, e2: usize) -> RaceReport {
        let a = trace.event(e1);
        let b = trace.event(e2);
        let (k1, x) = a.op.access().expect("access event");
        let (k2, _) = b.op.access().expect("access event");
        RaceReport {
            e1,
            e2,
            var: x,
            threads: (a.thread, b.thread),
            kinds: (k1, k2),
            locs: (a.loc, b.loc),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Summary {
    pub racy_events: usize,
    pub racy_lines: usize,
    pub racy_vars: usize,
    pub max_distance: usize,
    pub wall_time: Duration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Line {
    Loc(u64),
    Event(usize),
}

/// Aggregates over one run's reports. Events without a location count as their own line.
pub fn summarize(reports: &[RaceReport]) -> Summary {
    let events: BTreeSet<usize> = reports.iter().map(|r| r.e2).collect();
    let lines: BTreeSet<Line> = reports
        .iter()
        .map(|r| match r.locs.1 {
            Some(l) => Line::Loc(l),
            None => Line::Event(r.e2),
        })
        .collect();
    let vars: BTreeSet<VarId> = reports.iter().map(|r| r.var).collect();
    Summary {
        racy_events: events.len(),
        racy_lines: lines.len(),
        racy_vars: vars.len(),
        max_distance: reports.iter().map(|r| r.distance()).max().unwrap_or(0),
        wall_time: Duration::ZERO,
    }
}
