//! Seeded random traces, the equality-language traces, and random rf-posets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rfposet::{PosetEvent, RfPoset};
use crate::trace::{Access, Dims, Event, Op, Trace, TraceBuilder};

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub events: usize,
    pub threads: usize,
    pub locks: usize,
    pub vars: usize,
    pub p_read: f64,
    pub p_write: f64,
    pub p_sync: f64,
    pub seed: u64,
    /// The first thread forks all others up front and joins them at the end.
    pub fork_join: bool,
    /// Attach a source location drawn from a small pool to every access.
    pub locations: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            events: 12,
            threads: 3,
            locks: 2,
            vars: 2,
            p_read: 0.35,
            p_write: 0.35,
            p_sync: 0.3,
            seed: 0,
            fork_join: false,
            locations: false,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let ps = [self.p_read, self.p_write, self.p_sync];
        if ps.iter().any(|p| !(0.0..=1.0).contains(p)) || (ps.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("probabilities must lie in [0, 1] and sum to 1");
        }
        if self.threads == 0 {
            return bad("at least one thread is required");
        }
        if self.locks == 0 && self.p_sync > 0.0 {
            return bad("sync probability is positive but there are no locks");
        }
        if self.vars == 0 && self.p_sync < 1.0 {
            return bad("access probability is positive but there are no variables");
        }
        if self.fork_join && self.events < 2 * (self.threads - 1) {
            return bad("too few events for the fork/join frame");
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        Dims {
            threads: self.threads,
            locks: self.locks,
            vars: self.vars,
        }
    }
}

/// Streaming random events with ids `t`, `l`, `x` in `0..T`, `0..L`, `0..V`.
pub struct RandomEvents {
    cfg: GenConfig,
    rng: ChaCha8Rng,
    emitted: usize,
    holder: Vec<Option<u32>>,
    forks_left: u32,
    joins_left: u32,
    options: Vec<Op>,
}

impl RandomEvents {
    pub fn new(cfg: GenConfig) -> Result<RandomEvents> {
        cfg.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let frame = if cfg.fork_join { cfg.threads as u32 - 1 } else { 0 };
        Ok(RandomEvents {
            holder: vec![None; cfg.locks],
            rng,
            emitted: 0,
            forks_left: frame,
            joins_left: frame,
            cfg,
            options: Vec::new(),
        })
    }

    fn access(&mut self) -> Op {
        let x = self.rng.gen_range(0..self.cfg.vars) as u32;
        let pr = self.cfg.p_read / (self.cfg.p_read + self.cfg.p_write).max(f64::MIN_POSITIVE);
        if self.rng.gen_bool(pr.clamp(0.0, 1.0)) {
            Op::Read(x)
        } else {
            Op::Write(x)
        }
    }
}

impl Iterator for RandomEvents {
    type Item = Event;

    fn next(&mut self) -> Option<Event> {
        if self.emitted >= self.cfg.events {
            return None;
        }
        self.emitted += 1;
        let idx = self.emitted;
        let n = self.cfg.threads as u32;
        if self.forks_left > 0 {
            let c = n - self.forks_left;
            self.forks_left -= 1;
            return Some(Event { idx, thread: 0, op: Op::Fork(c), loc: None });
        }
        if self.cfg.fork_join && self.cfg.events - idx < self.joins_left as usize {
            let c = n - self.joins_left;
            self.joins_left -= 1;
            return Some(Event { idx, thread: 0, op: Op::Join(c), loc: None });
        }
        let mut t = self.rng.gen_range(0..n);
        let roll: f64 = self.rng.gen();
        let op = if roll < self.cfg.p_sync {
            self.options.clear();
            for (l, h) in self.holder.iter().enumerate() {
                match h {
                    None => self.options.push(Op::Acquire(l as u32)),
                    Some(o) if *o == t => self.options.push(Op::Release(l as u32)),
                    Some(_) => {}
                }
            }
            match self.options.choose(&mut self.rng).copied() {
                Some(op) => op,
                None if self.cfg.vars > 0 => self.access(),
                None => {
                    // Every lock is held elsewhere: let a holder release one.
                    let l = self.rng.gen_range(0..self.cfg.locks);
                    t = self.holder[l].expect("all locks held");
                    Op::Release(l as u32)
                }
            }
        } else {
            self.access()
        };
        match op {
            Op::Acquire(l) => self.holder[l as usize] = Some(t),
            Op::Release(l) => self.holder[l as usize] = None,
            _ => {}
        }
        let loc = (self.cfg.locations && op.access().is_some()).then(|| self.rng.gen_range(0..32));
        Some(Event { idx, thread: t, op, loc })
    }
}

fn names_for(cfg: &GenConfig) -> (Vec<String>, Vec<String>, Vec<String>) {
    (
        (1..=cfg.threads).map(|i| format!("t{i}")).collect(),
        (1..=cfg.locks).map(|i| format!("l{i}")).collect(),
        (1..=cfg.vars).map(|i| format!("x{i}")).collect(),
    )
}

/// A well-formed random trace, deterministic in the seed.
pub fn gen_random(cfg: &GenConfig) -> Result<Trace> {
    let (tn, ln, vn) = names_for(cfg);
    let mut b = TraceBuilder::new();
    for e in RandomEvents::new(cfg.clone())? {
        let t = &tn[e.thread as usize];
        match e.op {
            Op::Read(x) => b.read_at(t, &vn[x as usize], e.loc),
            Op::Write(x) => b.write_at(t, &vn[x as usize], e.loc),
            Op::Acquire(l) => b.acquire(t, &ln[l as usize]),
            Op::Release(l) => b.release(t, &ln[l as usize]),
            Op::Fork(c) => b.fork(t, &tn[c as usize]),
            Op::Join(c) => b.join(t, &tn[c as usize]),
        };
    }
    b.build()
}

fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Config(format!("`{s}` is not a bit string"))),
        })
        .collect()
}

/// Lock sets (as `(A mask, B mask)`) held by the `i`-th access of the first
/// thread: `A` runs through the subsets by ascending size, `B` by descending
/// size, ties broken by ascending value.
pub fn equality_lock_sets(n: usize) -> Vec<(u32, u32)> {
    let m = n.trailing_zeros();
    let mut a: Vec<u32> = (0..1u32 << m).collect();
    let mut b = a.clone();
    a.sort_by_key(|&s| (s.count_ones(), s));
    b.sort_by_key(|&s| (std::cmp::Reverse(s.count_ones()), s));
    a.into_iter().zip(b).collect()
}

/// Two-thread trace encoding `u` in thread `t1` and `v` in thread `t2`. Access
/// `i` of `t1` and access `j` of `t2` hold disjoint lock sets exactly when
/// `i == j`, and `u == v` leaves no race. Some `u != v` are still race-free.
pub fn gen_equality(u: &str, v: &str) -> Result<Trace> {
    let (ub, vb) = (parse_bits(u)?, parse_bits(v)?);
    let n = ub.len();
    if n != vb.len() {
        return Err(Error::Config("bit strings differ in length".into()));
    }
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Config("length must be a power of two".into()));
    }
    let m = n.trailing_zeros();
    let full = (1u32 << m) - 1;
    let sets = equality_lock_sets(n);
    let mut b = TraceBuilder::new();
    let names = |mask: u32, p: char| -> Vec<String> {
        (0..m).filter(|k| mask >> k & 1 == 1).map(|k| format!("{p}{}", k + 1)).collect()
    };
    let emit = |b: &mut TraceBuilder, t: &str, write: bool, first: Vec<String>, second: Vec<String>| {
        let mut locks = first;
        locks.extend(second);
        if write {
            locks.push("c".into());
        }
        for l in &locks {
            b.acquire(t, l);
        }
        if write {
            b.write(t, "x");
        } else {
            b.read(t, "x");
        }
        for l in locks.iter().rev() {
            b.release(t, l);
        }
    };
    for (i, &(a, bm)) in sets.iter().enumerate() {
        emit(&mut b, "t1", ub[i], names(a, 'a'), names(bm, 'b'));
    }
    for (i, &(a, bm)) in sets.iter().enumerate() {
        emit(&mut b, "t2", vb[i], names(full & !a, 'a'), names(full & !bm, 'b'));
    }
    b.build()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosetGenConfig {
    pub max_events: usize,
    pub max_threads: usize,
    pub edge_prob: f64,
    pub seed: u64,
}

impl Default for PosetGenConfig {
    fn default() -> Self {
        PosetGenConfig {
            max_events: 8,
            max_threads: 3,
            edge_prob: 0.3,
            seed: 0,
        }
    }
}

struct Proto {
    thread: usize,
    op: Access,
    var: usize,
    /// Index of the observed write for reads.
    rf: Option<usize>,
}

/// A random normalized rf-poset: every event sits in an rf-triplet and every
/// read observes the only write to its variable in its own thread.
pub fn gen_rfposet(cfg: &PosetGenConfig) -> Result<RfPoset> {
    if cfg.max_events < 3 || cfg.max_threads < 2 {
        return Err(Error::Config("need at least 3 events and 2 threads".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = rng.gen_range(2..=cfg.max_threads);
    let mut protos: Vec<Proto> = Vec::new();
    let mut vars = 0;
    let other = |rng: &mut ChaCha8Rng, a: usize| loop {
        let b = rng.gen_range(0..k);
        if b != a {
            break b;
        }
    };
    loop {
        let room = cfg.max_events - protos.len();
        let a = rng.gen_range(0..k);
        let b = other(&mut rng, a);
        let x = vars;
        if room >= 4 && rng.gen_bool(0.3) {
            protos.push(Proto { thread: a, op: Access::Write, var: x, rf: None });
            protos.push(Proto { thread: a, op: Access::Read, var: x, rf: Some(protos.len() - 1) });
            protos.push(Proto { thread: b, op: Access::Write, var: x, rf: None });
            protos.push(Proto { thread: b, op: Access::Read, var: x, rf: Some(protos.len() - 1) });
        } else if room >= 3 {
            protos.push(Proto { thread: a, op: Access::Write, var: x, rf: None });
            protos.push(Proto { thread: a, op: Access::Read, var: x, rf: Some(protos.len() - 1) });
            protos.push(Proto { thread: b, op: Access::Write, var: x, rf: None });
        } else {
            break;
        }
        vars += 1;
        if protos.len() >= cfg.max_events || rng.gen_bool(0.4) {
            break;
        }
    }
    while protos.len() < cfg.max_events && rng.gen_bool(0.35) {
        let x = rng.gen_range(0..vars);
        let w = protos.iter().position(|p| p.var == x && p.op == Access::Write).unwrap();
        let wt = protos[w].thread;
        if rng.gen_bool(0.5) {
            protos.push(Proto { thread: wt, op: Access::Read, var: x, rf: Some(w) });
        } else {
            let used: Vec<usize> = protos.iter().filter(|p| p.var == x && p.op == Access::Write).map(|p| p.thread).collect();
            let free: Vec<usize> = (0..k).filter(|t| !used.contains(t)).collect();
            if let Some(&t) = free.choose(&mut rng) {
                protos.push(Proto { thread: t, op: Access::Write, var: x, rf: None });
            }
        }
    }
    // Random global order in which every read follows its write.
    let n = protos.len();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let ready: Vec<usize> = (0..n)
            .filter(|&i| !placed[i] && protos[i].rf.is_none_or(|w| placed[w]))
            .collect();
        let &i = ready.choose(&mut rng).expect("acyclic");
        placed[i] = true;
        order.push(i);
    }
    let id_of = |i: usize| order.iter().position(|&j| j == i).unwrap() as u64 + 1;
    let events: Vec<PosetEvent> = order
        .iter()
        .map(|&i| PosetEvent {
            id: id_of(i),
            thread: format!("t{}", protos[i].thread + 1),
            op: protos[i].op,
            var: format!("x{}", protos[i].var + 1),
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let (pa, pb) = (&protos[order[a]], &protos[order[b]]);
            if pa.thread == pb.thread {
                let between = (a + 1..b).any(|c| protos[order[c]].thread == pa.thread);
                if !between {
                    edges.push((a as u64 + 1, b as u64 + 1));
                }
            } else if rng.gen_bool(cfg.edge_prob) {
                edges.push((a as u64 + 1, b as u64 + 1));
            }
        }
    }
    let rf = (0..n)
        .filter_map(|i| protos[i].rf.map(|w| (id_of(i), id_of(w))))
        .collect();
    Ok(RfPoset {
        events,
        order: edges,
        rf,
        distinguished: None,
    })
}
