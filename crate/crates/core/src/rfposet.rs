//! Reads-from posets, their realizability, and the two reductions that map
//! realizability to reverse realizability and then to race prediction.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::trace::{Access, Trace, TraceBuilder};

/// Largest poset the bitmask-based analyses accept.
pub const MAX_POSET_EVENTS: usize = 128;
pub const DEFAULT_MAX_POSET_EVENTS: usize = 12;

type Mask = u128;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PosetEvent {
    pub id: u64,
    pub thread: String,
    pub op: Access,
    pub var: String,
}

/// Events are listed in thread order: within one thread, listing order is program order.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RfPoset {
    pub events: Vec<PosetEvent>,
    pub order: Vec<(u64, u64)>,
    pub rf: BTreeMap<u64, u64>,
    pub distinguished: Option<[u64; 3]>,
}

/// Index-based view with the transitive closure of the order.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub index: HashMap<u64, usize>,
    pub thread_of: Vec<usize>,
    pub threads: Vec<String>,
    /// `succ[i]` has bit `j` iff `i <P j` (strict).
    pub succ: Vec<Mask>,
    pub pred: Vec<Mask>,
    pub rf: Vec<Option<usize>>,
}

impl Analysis {
    pub fn lt(&self, a: usize, b: usize) -> bool {
        self.succ[a] >> b & 1 == 1
    }

    pub fn le(&self, a: usize, b: usize) -> bool {
        a == b || self.lt(a, b)
    }
}

fn perr<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Poset(msg.into()))
}

impl RfPoset {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn event(&self, id: u64) -> Option<&PosetEvent> {
        self.events.iter().find(|e| e.id == id)
    }

    /// Thread names in order of first appearance.
    pub fn thread_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.events {
            if !out.contains(&e.thread) {
                out.push(e.thread.clone());
            }
        }
        out
    }

    /// Validates the poset and computes its closure.
    pub fn analyze(&self) -> Result<Analysis> {
        let n = self.events.len();
        if n > MAX_POSET_EVENTS {
            return Err(Error::Cap {
                what: "poset",
                size: n,
                cap: MAX_POSET_EVENTS,
            });
        }
        let mut index = HashMap::new();
        for (i, e) in self.events.iter().enumerate() {
            if index.insert(e.id, i).is_some() {
                return perr(format!("duplicate event id {}", e.id));
            }
        }
        let threads = self.thread_names();
        let thread_of: Vec<usize> = self
            .events
            .iter()
            .map(|e| threads.iter().position(|t| *t == e.thread).unwrap())
            .collect();
        let mut succ = vec![0 as Mask; n];
        for &(a, b) in &self.order {
            let (Some(&i), Some(&j)) = (index.get(&a), index.get(&b)) else {
                return perr(format!("order edge ({a}, {b}) names an unknown event"));
            };
            if i == j {
                return perr(format!("order edge ({a}, {b}) is a self loop"));
            }
            succ[i] |= 1 << j;
        }
        // Floyd-Warshall style closure on bitmasks.
        for k in 0..n {
            for i in 0..n {
                if succ[i] >> k & 1 == 1 {
                    succ[i] |= succ[k];
                }
            }
        }
        for (i, s) in succ.iter().enumerate() {
            if s >> i & 1 == 1 {
                return perr(format!("order is cyclic through event {}", self.events[i].id));
            }
        }
        let mut pred = vec![0 as Mask; n];
        for (i, s) in succ.iter().enumerate() {
            for (j, p) in pred.iter_mut().enumerate() {
                if s >> j & 1 == 1 {
                    *p |= 1 << i;
                }
            }
        }
        let an0 = Analysis {
            index,
            thread_of,
            threads,
            succ,
            pred,
            rf: vec![None; n],
        };
        let mut last_in_thread: HashMap<usize, usize> = HashMap::new();
        for i in 0..n {
            let t = an0.thread_of[i];
            if let Some(&p) = last_in_thread.get(&t) {
                if !an0.lt(p, i) {
                    return perr(format!(
                        "order does not contain thread order between {} and {}",
                        self.events[p].id, self.events[i].id
                    ));
                }
            }
            last_in_thread.insert(t, i);
        }
        let mut an = an0;
        for (&r, &w) in &self.rf {
            let (Some(&ri), Some(&wi)) = (an.index.get(&r), an.index.get(&w)) else {
                return perr(format!("rf entry {r} -> {w} names an unknown event"));
            };
            let (re, we) = (&self.events[ri], &self.events[wi]);
            if re.op != Access::Read || we.op != Access::Write || re.var != we.var {
                return perr(format!("rf entry {r} -> {w} must map a read to a write of its variable"));
            }
            an.rf[ri] = Some(wi);
        }
        for (i, e) in self.events.iter().enumerate() {
            if e.op == Access::Read && an.rf[i].is_none() {
                return perr(format!("read {} has no rf entry", e.id));
            }
        }
        if let Some([w, r, wp]) = self.distinguished {
            let ids = [w, r, wp];
            let Some(idx) = ids
                .iter()
                .map(|id| an.index.get(id).copied())
                .collect::<Option<Vec<_>>>()
            else {
                return perr("distinguished triplet names an unknown event");
            };
            let (wi, ri, pi) = (idx[0], idx[1], idx[2]);
            let ok = an.rf[ri] == Some(wi)
                && self.events[pi].op == Access::Write
                && self.events[pi].var == self.events[wi].var
                && an.thread_of[pi] != an.thread_of[wi];
            if !ok {
                return perr("distinguished events do not form an rf-triplet");
            }
        }
        Ok(an)
    }

    /// All `(w, r, w')` with `rf(r) = w` and `w'` a write of the same variable in another thread.
    pub fn rf_triplets(&self) -> Result<Vec<(u64, u64, u64)>> {
        let an = self.analyze()?;
        let mut out = Vec::new();
        for (ri, w) in an.rf.iter().enumerate() {
            let Some(wi) = *w else { continue };
            for (pi, p) in self.events.iter().enumerate() {
                if p.op == Access::Write
                    && p.var == self.events[wi].var
                    && an.thread_of[pi] != an.thread_of[wi]
                {
                    out.push((self.events[wi].id, self.events[ri].id, p.id));
                }
            }
        }
        Ok(out)
    }

    /// Cross-thread orderings not implied by a tighter ordering within the same thread pair.
    pub fn dominant_pairs(&self) -> Result<Vec<(u64, u64)>> {
        let an = self.analyze()?;
        Ok(dominant_indices(&an)
            .into_iter()
            .map(|(a, b)| (self.events[a].id, self.events[b].id))
            .collect())
    }
}

fn dominant_indices(an: &Analysis) -> Vec<(usize, usize)> {
    let n = an.thread_of.len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if an.thread_of[a] == an.thread_of[b] || !an.lt(a, b) {
                continue;
            }
            let tighter = (0..n).any(|a2| {
                an.thread_of[a2] == an.thread_of[a]
                    && an.le(a, a2)
                    && (0..n).any(|b2| {
                        an.thread_of[b2] == an.thread_of[b]
                            && an.le(b2, b)
                            && (a2, b2) != (a, b)
                            && an.lt(a2, b2)
                    })
            });
            if !tighter {
                out.push((a, b));
            }
        }
    }
    out
}

/// Whether `seq` is a linearization of the poset reproducing its reads-from map.
pub fn check_realization(poset: &RfPoset, seq: &[u64]) -> std::result::Result<(), String> {
    let an = poset.analyze().map_err(|e| e.to_string())?;
    if seq.len() != poset.len() {
        return Err("sequence is not a permutation of the events".into());
    }
    let mut placed: Mask = 0;
    let mut last: HashMap<&str, usize> = HashMap::new();
    for id in seq {
        let Some(&i) = an.index.get(id) else {
            return Err(format!("unknown event {id}"));
        };
        if placed >> i & 1 == 1 {
            return Err(format!("event {id} repeated"));
        }
        if an.pred[i] & !placed != 0 {
            return Err(format!("event {id} placed before one of its predecessors"));
        }
        let e = &poset.events[i];
        match e.op {
            Access::Write => {
                last.insert(&e.var, i);
            }
            Access::Read => {
                if last.get(e.var.as_str()).copied() != an.rf[i] {
                    return Err(format!("read {id} observes the wrong write"));
                }
            }
        }
        placed |= 1 << i;
    }
    Ok(())
}

struct Realizer<'a> {
    poset: &'a RfPoset,
    an: &'a Analysis,
    readers: Vec<Mask>,
    writes_of_var: HashMap<String, Mask>,
    before: Option<(usize, usize)>,
    failed: HashSet<Mask>,
    budget: usize,
}

impl Realizer<'_> {
    fn addable(&self, set: Mask, i: usize) -> bool {
        if set >> i & 1 == 1 || self.an.pred[i] & !set != 0 {
            return false;
        }
        if let Some((b, a)) = self.before {
            if i == a && set >> b & 1 == 0 {
                return false;
            }
        }
        let e = &self.poset.events[i];
        match e.op {
            Access::Read => {
                let w = self.an.rf[i].expect("validated");
                set >> w & 1 == 1
            }
            Access::Write => {
                // Never overwrite a write that still has readers waiting.
                let mut ws = self.writes_of_var[&e.var] & set;
                while ws != 0 {
                    let w = ws.trailing_zeros() as usize;
                    ws &= ws - 1;
                    if self.readers[w] & !set != 0 {
                        return false;
                    }
                }
                true
            }
        }
    }

    fn dfs(&mut self, set: Mask, seq: &mut Vec<usize>) -> Result<bool> {
        let n = self.poset.len();
        if seq.len() == n {
            return Ok(true);
        }
        if self.failed.contains(&set) {
            return Ok(false);
        }
        for i in 0..n {
            if self.addable(set, i) {
                seq.push(i);
                if self.dfs(set | 1 << i, seq)? {
                    return Ok(true);
                }
                seq.pop();
            }
        }
        self.failed.insert(set);
        if self.failed.len() > self.budget {
            return Err(Error::Budget(self.budget));
        }
        Ok(false)
    }
}

fn realize(poset: &RfPoset, max_events: usize, before: Option<(u64, u64)>) -> Result<Option<Vec<u64>>> {
    if poset.len() > max_events {
        return Err(Error::Cap {
            what: "poset",
            size: poset.len(),
            cap: max_events,
        });
    }
    let an = poset.analyze()?;
    let n = poset.len();
    let mut readers = vec![0 as Mask; n];
    for (r, w) in an.rf.iter().enumerate() {
        if let Some(w) = w {
            readers[*w] |= 1 << r;
        }
    }
    let mut writes_of_var: HashMap<String, Mask> = HashMap::new();
    for (i, e) in poset.events.iter().enumerate() {
        let m = writes_of_var.entry(e.var.clone()).or_insert(0);
        if e.op == Access::Write {
            *m |= 1 << i;
        }
    }
    let before = before.map(|(b, a)| (an.index[&b], an.index[&a]));
    let mut r = Realizer {
        poset,
        an: &an,
        readers,
        writes_of_var,
        before,
        failed: HashSet::new(),
        budget: crate::oracle::DEFAULT_MAX_STATES,
    };
    let mut seq = Vec::new();
    if r.dfs(0, &mut seq)? {
        Ok(Some(seq.into_iter().map(|i| poset.events[i].id).collect()))
    } else {
        Ok(None)
    }
}

/// A linearization reproducing the reads-from map, if one exists.
pub fn realizability_bf(poset: &RfPoset) -> Result<Option<Vec<u64>>> {
    realizability_bf_with(poset, DEFAULT_MAX_POSET_EVENTS)
}

pub fn realizability_bf_with(poset: &RfPoset, max_events: usize) -> Result<Option<Vec<u64>>> {
    realize(poset, max_events, None)
}

/// Whether some realizing linearization places `w̄` before `w̄'`.
pub fn reverse_realizability_bf(poset: &RfPoset) -> Result<bool> {
    reverse_realizability_bf_with(poset, DEFAULT_MAX_POSET_EVENTS)
}

pub fn reverse_realizability_bf_with(poset: &RfPoset, max_events: usize) -> Result<bool> {
    let Some([w, _, wp]) = poset.distinguished else {
        return perr("reverse realizability needs a distinguished triplet");
    };
    Ok(realize(poset, max_events, Some((w, wp)))?.is_some())
}

/// A realization of the instance with `w̄'` before `w̄`, if any.
pub fn find_witness(poset: &RfPoset, max_events: usize) -> Result<Option<Vec<u64>>> {
    let Some([w, _, wp]) = poset.distinguished else {
        return perr("witness search needs a distinguished triplet");
    };
    realize(poset, max_events, Some((wp, w)))
}

/// Rejects posets whose reads observe remote or shadowed writes, then keeps
/// only events that belong to some rf-triplet (projecting the order onto them).
pub fn normalize(poset: &RfPoset) -> Result<RfPoset> {
    let an = poset.analyze()?;
    let n = poset.len();
    for i in 0..n {
        let e = &poset.events[i];
        if e.op != Access::Read {
            continue;
        }
        let w = an.rf[i].unwrap();
        if an.thread_of[w] != an.thread_of[i] || !an.lt(w, i) {
            return perr(format!(
                "read {} does not observe an earlier write of its own thread",
                e.id
            ));
        }
        let shadowed = (0..n).any(|k| {
            k != w
                && an.thread_of[k] == an.thread_of[i]
                && poset.events[k].op == Access::Write
                && poset.events[k].var == e.var
                && an.lt(w, k)
                && an.lt(k, i)
        });
        if shadowed {
            return perr(format!("read {} observes a shadowed write", e.id));
        }
    }
    let triplets = poset.rf_triplets()?;
    let mut keep: BTreeSet<u64> = BTreeSet::new();
    for (w, r, wp) in &triplets {
        keep.extend([*w, *r, *wp]);
    }
    if let Some(d) = poset.distinguished {
        keep.extend(d);
    }
    let kept: Vec<usize> = (0..n).filter(|&i| keep.contains(&poset.events[i].id)).collect();
    let mut order = Vec::new();
    for &a in &kept {
        for &b in &kept {
            if an.lt(a, b) {
                let covered = kept.iter().any(|&c| an.lt(a, c) && an.lt(c, b));
                if !covered {
                    order.push((poset.events[a].id, poset.events[b].id));
                }
            }
        }
    }
    let rf = poset
        .rf
        .iter()
        .filter(|(r, _)| keep.contains(r))
        .map(|(&r, &w)| (r, w))
        .collect();
    Ok(RfPoset {
        events: kept.iter().map(|&i| poset.events[i].clone()).collect(),
        order,
        rf,
        distinguished: poset.distinguished,
    })
}

/// A reverse-realizability instance together with a realization placing `w̄'` before `w̄`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReverseInstance {
    pub poset: RfPoset,
    pub witness: Vec<u64>,
}

fn fresh(name: String, taken: &mut HashSet<String>) -> String {
    let mut n = name;
    while taken.contains(&n) {
        n.push('\'');
    }
    taken.insert(n.clone());
    n
}

/// Builds the reverse-realizability instance whose answer equals the realizability of `poset`.
pub fn build_reverse_instance(poset: &RfPoset) -> Result<ReverseInstance> {
    if poset.distinguished.is_some() {
        return perr("input poset already carries a distinguished triplet");
    }
    let p = normalize(poset)?;
    let an = p.analyze()?;
    let mut taken_threads: HashSet<String> = p.events.iter().map(|e| e.thread.clone()).collect();
    let mut taken_vars: HashSet<String> = p.events.iter().map(|e| e.var.clone()).collect();
    let mut next_id = p.events.iter().map(|e| e.id).max().map_or(1, |m| m + 1);
    let mut new_id = || {
        let id = next_id;
        next_id += 1;
        id
    };

    let mut events = p.events.clone();
    let mut order: Vec<(u64, u64)> = Vec::new();
    let mut rf = p.rf.clone();
    // Thread order of the original events; cross-thread orderings are encoded by gadgets.
    let mut last_of: HashMap<usize, u64> = HashMap::new();
    for (i, e) in p.events.iter().enumerate() {
        if let Some(&prev) = last_of.get(&an.thread_of[i]) {
            order.push((prev, e.id));
        }
        last_of.insert(an.thread_of[i], e.id);
    }

    let lambda_var = fresh("lambda".into(), &mut taken_vars);
    let (wbar, rbar, wbarp) = (new_id(), new_id(), new_id());

    let mut groups: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (a, b) in dominant_indices(&an) {
        groups
            .entry((an.thread_of[a], an.thread_of[b]))
            .or_default()
            .push((a, b));
    }
    let mut y_events: Vec<u64> = Vec::new();
    let mut x_events: Vec<u64> = Vec::new();
    for ((ti, tj), mut pairs) in groups {
        pairs.sort();
        let xt = fresh(format!("x:{}>{}", an.threads[ti], an.threads[tj]), &mut taken_threads);
        let yt = fresh(format!("y:{}>{}", an.threads[ti], an.threads[tj]), &mut taken_threads);
        let mut ws = Vec::new();
        let mut rs = Vec::new();
        let mut wps = Vec::new();
        for &(a, b) in &pairs {
            let (ida, idb) = (p.events[a].id, p.events[b].id);
            let var = fresh(format!("v:{ida}>{idb}"), &mut taken_vars);
            let (w, r, wp) = (new_id(), new_id(), new_id());
            ws.push(PosetEvent { id: w, thread: xt.clone(), op: Access::Write, var: var.clone() });
            rs.push(PosetEvent { id: r, thread: xt.clone(), op: Access::Read, var: var.clone() });
            wps.push(PosetEvent { id: wp, thread: yt.clone(), op: Access::Write, var });
            rf.insert(r, w);
            order.push((ida, r));
            order.push((wp, idb));
            order.push((w, rbar));
            order.push((wbarp, wp));
        }
        let xs: Vec<PosetEvent> = ws.into_iter().chain(rs).collect();
        for win in xs.windows(2) {
            order.push((win[0].id, win[1].id));
        }
        for win in wps.windows(2) {
            order.push((win[0].id, win[1].id));
        }
        x_events.extend(xs.iter().map(|e| e.id));
        y_events.extend(wps.iter().map(|e| e.id));
        events.extend(xs);
        events.extend(wps);
    }
    let la = fresh("lambda:a".into(), &mut taken_threads);
    let lb = fresh("lambda:b".into(), &mut taken_threads);
    events.push(PosetEvent { id: wbar, thread: la.clone(), op: Access::Write, var: lambda_var.clone() });
    events.push(PosetEvent { id: rbar, thread: la, op: Access::Read, var: lambda_var.clone() });
    events.push(PosetEvent { id: wbarp, thread: lb, op: Access::Write, var: lambda_var });
    order.push((wbar, rbar));
    rf.insert(rbar, wbar);

    let mut witness = vec![wbarp];
    witness.extend(&y_events);
    for t in 0..an.threads.len() {
        witness.extend(
            p.events
                .iter()
                .enumerate()
                .filter(|(i, _)| an.thread_of[*i] == t)
                .map(|(_, e)| e.id),
        );
    }
    witness.extend(&x_events);
    witness.extend([wbar, rbar]);

    let inst = RfPoset {
        events,
        order,
        rf,
        distinguished: Some([wbar, rbar, wbarp]),
    };
    if let Err(msg) = check_realization(&inst, &witness) {
        return perr(format!("internal: witness does not realize the instance: {msg}"));
    }
    Ok(ReverseInstance {
        poset: inst,
        witness,
    })
}

/// Builds a trace and a target pair that is a predictable race exactly when the
/// instance is reverse realizable.
pub fn build_race_instance(inst: &ReverseInstance) -> Result<(Trace, (usize, usize))> {
    let p = &inst.poset;
    let an = p.analyze()?;
    let Some([wbar, rbar, wbarp]) = p.distinguished else {
        return perr("instance has no distinguished triplet");
    };
    check_realization(p, &inst.witness).map_err(|m| Error::Poset(format!("witness: {m}")))?;
    let (iw, ir, ip) = (an.index[&wbar], an.index[&rbar], an.index[&wbarp]);
    let (ta, tb) = (an.thread_of[iw], an.thread_of[ip]);
    if an.thread_of[ir] != ta {
        return perr("w̄ and r̄ must share a thread");
    }
    let pos: HashMap<u64, usize> = inst.witness.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let last_of_thread = |t: usize| {
        p.events
            .iter()
            .enumerate()
            .filter(|(i, _)| an.thread_of[*i] == t)
            .map(|(_, e)| e.id)
            .next_back()
    };
    let first_of_thread = |t: usize| {
        p.events
            .iter()
            .enumerate()
            .find(|(i, _)| an.thread_of[*i] == t)
            .map(|(_, e)| e.id)
    };
    let tb_last = last_of_thread(tb).expect("non-empty");
    let tb_first = first_of_thread(tb).expect("non-empty");
    if pos[&tb_last] > pos[&wbar] {
        return perr("the thread of w̄' must finish before w̄ in the witness");
    }

    let mut taken: HashSet<String> = p.events.iter().map(|e| e.var.clone()).collect();
    let lock = "__l";
    let y = fresh("__y".into(), &mut taken);
    let dom = dominant_indices(&an);
    let mut dom_vars: HashMap<(usize, usize), String> = HashMap::new();
    for &(a, b) in &dom {
        let name = fresh(format!("__d{}_{}", p.events[a].id, p.events[b].id), &mut taken);
        dom_vars.insert((a, b), name);
    }
    let mut fin_vars: BTreeMap<String, String> = BTreeMap::new();
    for (t, name) in an.threads.iter().enumerate() {
        if t != ta && t != tb {
            fin_vars.insert(name.clone(), fresh(format!("__x.{name}"), &mut taken));
        }
    }

    let mut b = TraceBuilder::new();
    let mut wy = 0;
    for &id in &inst.witness {
        let i = an.index[&id];
        let t = an.thread_of[i];
        let tn = an.threads[t].as_str();
        let e = &p.events[i];
        if id == tb_first {
            b.acquire(tn, lock);
        }
        for &(a, c) in &dom {
            if c == i {
                b.read(tn, &dom_vars[&(a, c)]);
            }
        }
        if id == wbar {
            b.acquire(tn, lock);
        }
        match e.op {
            Access::Read => b.read(tn, &e.var),
            Access::Write => b.write(tn, &e.var),
        };
        if id == wbar {
            b.release(tn, lock);
        }
        for &(a, c) in &dom {
            if a == i {
                b.write(tn, &dom_vars[&(a, c)]);
            }
        }
        if Some(id) == last_of_thread(t) {
            if t == tb {
                wy = b.write(tn, &y);
                b.release(tn, lock);
            } else if t != ta {
                b.write(tn, &fin_vars[tn]);
            }
        }
    }
    let ta_name = an.threads[ta].clone();
    for var in fin_vars.values() {
        b.read(&ta_name, var);
    }
    let ry = b.read(&ta_name, &y);
    let trace = b.build()?;
    Ok((trace, (wy, ry)))
}
