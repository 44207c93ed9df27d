mod common;

use std::collections::BTreeSet;

use common::*;
use syncp::baselines::{hb_run, shb_run};
use syncp::closure::{is_syncp_race_pair, racy_events, sp_closure, sp_ideal, syncp_races_with_thread, tl_closure};
use syncp::engine::{self, max_lb, CsCursor, CsEntry, Fifo, SyncP};
use syncp::filter::filter_ordered_variables;
use syncp::io::{parse_trace_str, trace_to_string};
use syncp::oracle::{
    enumerate_correct_reorderings, is_predictable_race_bf, is_race_bf, is_syncp_race_bf, Limits, Mode,
};
use syncp::report::summarize;
use syncp::trace::{validate, Op, TraceBuilder};
use syncp::VectorTimestamp as Vt;

fn pairs(r: &[syncp::RaceReport]) -> Vec<(usize, usize)> {
    r.iter().map(|r| (r.e1, r.e2)).collect()
}

#[test]
fn trace_model_examples() {
    let a = fixture("sigmaA");
    assert!(validate(a.events(), a.dims().threads).is_empty());
    assert!(a.conflicting(5, 6));
    assert!(a.enabled(&set(&[1, 2, 3, 4]), 5));
    assert!(a.enabled(&set(&[1, 2, 3, 4]), 6));
    assert!(a.enabled(&BTreeSet::new(), 1));
    assert!(a.enabled(&BTreeSet::new(), 3));

    let b = fixture("sigmaB");
    let l = b.names().locks.get("l").unwrap();
    assert_eq!(b.locks_held(3), vec![l]);
    assert!(b.locks_held(1).is_empty());
    assert_eq!(b.locks_held(2), vec![l]);
    assert_eq!(b.match_of(2), Some(4));
    assert_eq!(b.match_of(4), Some(2));

    let c = fixture("sigmaC");
    assert_eq!(c.last_write(6), Some(3));

    let mut tb = TraceBuilder::new();
    tb.read("t1", "x");
    tb.write("t1", "x");
    tb.read("t1", "x");
    tb.write("t2", "x");
    tb.write("t1", "x");
    tb.read("t2", "y");
    let t = tb.build().unwrap();
    assert_eq!(t.last_write(1), None);
    assert_eq!(t.last_write(3), Some(2));
    assert_eq!(t.last_write(6), None);
    assert!(!t.conflicting(2, 5));
    assert!(!t.conflicting(1, 6));
    assert!(t.conflicting(3, 4));
}

#[test]
fn validation_rules() {
    let mut tb = TraceBuilder::new();
    tb.acquire("t1", "l");
    tb.release("t2", "l");
    let v = tb.violations();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].idx, 2);
    assert_eq!(v[0].rule, "release without matching acquire in thread");

    let cases: [(&str, &str); 6] = [
        ("t1|acq|l\nt1|acq|l\n", "reentrant acquire"),
        ("t1|acq|l\nt2|acq|l\n", "acquire of lock held by another thread"),
        ("t1|w|x\nt1|fork|t1\n", "fork of self"),
        ("t1|w|x\nt2|w|x\nt1|fork|t2\n", "fork of already started thread"),
        ("t1|fork|t2\nt1|join|t2\nt2|w|x\n", "event after join of its thread"),
        ("t1|fork|t2\nt1|join|t2\nt1|join|t2\n", "thread joined twice"),
    ];
    for (src, rule) in cases {
        let err = parse_trace_str(src).unwrap_err().to_string();
        assert!(err.contains(rule), "{src:?}: {err}");
    }
    // Trailing open critical sections are prefixes of valid traces.
    let t = parse_trace_str("t1|acq|l\nt1|w|x\n").unwrap();
    assert_eq!(t.match_of(1), None);
    assert!(validate(&[], 0).is_empty());
}

#[test]
fn trace_io_examples() {
    let t = parse_trace_str("t1|w|x|17\nt1|acq|l").unwrap();
    assert_eq!(t.len(), 2);
    assert_eq!(t.event(1).loc, Some(17));
    assert!(matches!(t.event(1).op, Op::Write(_)));
    let err = parse_trace_str("t1|rel|l").unwrap_err().to_string();
    assert!(err.contains("release without matching acquire"), "{err}");
    let err = parse_trace_str("# c\n\nt1|w|x\nt1|w\n").unwrap_err().to_string();
    assert!(err.contains("line 4"), "{err}");
    let err = parse_trace_str("t1|x|x\n").unwrap_err().to_string();
    assert!(err.contains("line 1"), "{err}");
    let err = parse_trace_str("t1|w|x|-3\n").unwrap_err().to_string();
    assert!(err.contains("location"), "{err}");

    for name in FIXTURES {
        let t = fixture(name);
        let s = trace_to_string(&t);
        let back = parse_trace_str(&s).unwrap();
        assert_eq!(back.events(), t.events(), "{name}");
        assert_eq!(trace_to_string(&back), s);
    }
    assert_eq!(trace_to_string(&fixture("empty")), "");
    let b = fixture("sigmaB");
    let back = parse_trace_str(&trace_to_string(&b)).unwrap();
    assert_eq!(back.event(6).loc, Some(21));
}

#[test]
fn closure_examples() {
    let s2 = fixture("sigma2");
    let c = fixture("sigmaC");
    let b = fixture("sigmaB");
    // Frozen values, each recomputed by the naive oracle.
    let cases = [
        (&s2, set(&[5]), set(&[4, 5]), false),
        (&c, set(&[6]), set(&[1, 2, 3, 5, 6]), false),
        (&s2, set(&[4, 5]), set(&[4, 5]), true),
        (&s2, set(&[]), set(&[]), true),
    ];
    for (tr, s, want, sp) in cases {
        let got = if sp { sp_closure(tr, &s) } else { tl_closure(tr, &s) };
        let naive = if sp { naive_sp(tr, &s) } else { naive_tl(tr, &s) };
        assert_eq!(got, want);
        assert_eq!(naive, want);
    }
    let both = sp_closure(&s2, &set(&[2, 4]));
    assert!(both.contains(&3));
    assert_eq!(both, naive_sp(&s2, &set(&[2, 4])));

    assert_eq!(sp_ideal(&s2, 1, 6), set(&[4, 5]));
    let ib = sp_ideal(&b, 3, 6);
    assert!(ib.contains(&2) && ib.contains(&5) && ib.contains(&4) && ib.contains(&3));

    assert!(is_syncp_race_pair(&s2, 1, 6).unwrap());
    assert!(!is_syncp_race_pair(&b, 3, 6).unwrap());
    assert!(!is_syncp_race_pair(&c, 1, 8).unwrap());
    assert!(is_syncp_race_pair(&s2, 1, 2).is_err());
    assert!(is_syncp_race_pair(&s2, 6, 1).is_err());

    let s4 = fixture("sigma4");
    let t1 = s4.names().threads.get("t1").unwrap();
    let t2 = s4.names().threads.get("t2").unwrap();
    assert_eq!(syncp_races_with_thread(&s4, 8, t1), Some(1));
    assert_eq!(syncp_races_with_thread(&s4, 8, t2), None);
}

#[test]
fn max_lb_examples() {
    let mut q: Fifo<CsEntry> = Fifo::default();
    let mut cur = CsCursor::default();
    let bot = Vt::bottom(2);
    assert_eq!(max_lb(&bot, &q, &mut cur), None);
    q.push(CsEntry {
        g: 1,
        acq: Vt::from_vec(vec![1, 0]),
        rel: Some(Vt::from_vec(vec![2, 0])),
    });
    q.push(CsEntry {
        g: 3,
        acq: Vt::from_vec(vec![3, 0]),
        rel: None,
    });
    assert_eq!(max_lb(&bot, &q, &mut cur), None);
    assert_eq!(cur, CsCursor::default());
    let big = Vt::from_vec(vec![5, 5]);
    assert_eq!(max_lb(&big, &q, &mut cur).map(|e| e.g), Some(3));
    assert_eq!(cur.next, 2);
    // A later call still sees the last contained entry.
    assert_eq!(max_lb(&big, &q, &mut cur).map(|e| e.g), Some(3));
}

#[test]
fn engine_examples() {
    let s2 = fixture("sigma2");
    assert_eq!(pairs(&engine::run(&s2)), vec![(1, 6)]);
    assert_eq!(pairs(&engine::run(&fixture("sigma1"))), vec![(1, 6)]);
    assert!(engine::run(&fixture("sigmaC")).is_empty());
    assert_eq!(pairs(&engine::run(&fixture("sigma4"))), vec![(1, 5), (1, 8)]);

    let mut eng = SyncP::for_trace(&s2);
    for e in &s2.events()[..5] {
        assert_eq!(eng.process(e).unwrap(), None);
    }
    // g is the rank of the acquire among the lock's acquires.
    let ranks: Vec<u64> = s2
        .events()
        .iter()
        .filter(|e| matches!(e.op, Op::Acquire(_)))
        .enumerate()
        .map(|(k, _)| k as u64 + 1)
        .collect();
    for (t, &rank) in ranks.iter().enumerate() {
        let h = eng.cs_history(t, 0);
        assert_eq!(h.end(), 1);
        assert_eq!(h.get(0).g, rank);
        assert!(h.get(0).rel.is_some());
    }

    let mut single = TraceBuilder::new();
    for _ in 0..3 {
        single.write("t1", "x");
        single.acquire("t1", "l");
        single.read("t1", "x");
        single.release("t1", "l");
    }
    assert!(engine::run(&single.build().unwrap()).is_empty());

    let open = parse_trace_str("t1|acq|l\nt1|w|x\n").unwrap();
    let mut eng = SyncP::for_trace(&open);
    eng.process(open.event(1)).unwrap();
    assert_eq!(eng.cs_history(0, 0).get(0).rel, None);
}

#[test]
fn baseline_examples() {
    let s2 = fixture("sigma2");
    let a = fixture("sigmaA");
    assert!(hb_run(&s2).is_empty());
    assert!(shb_run(&s2).is_empty());
    assert_eq!(pairs(&hb_run(&a)), vec![(5, 6)]);
    assert_eq!(pairs(&shb_run(&a)), vec![(5, 6)]);
    let free = parse_trace_str("t1|w|x\nt2|w|x\n").unwrap();
    assert_eq!(pairs(&hb_run(&free)), vec![(1, 2)]);
    // HB misses the write-read race SHB rules out through last-write edges.
    let lw = parse_trace_str("t1|w|x\nt2|r|x\nt2|w|y\nt1|w|y\n").unwrap();
    assert_eq!(pairs(&hb_run(&lw)), vec![(1, 2), (3, 4)]);
    assert_eq!(pairs(&shb_run(&lw)), vec![(1, 2), (3, 4)]);
    let chain = parse_trace_str("t1|w|y\nt1|w|x\nt2|r|x\nt2|w|y\n").unwrap();
    assert_eq!(pairs(&hb_run(&chain)), vec![(2, 3), (1, 4)]);
    assert_eq!(pairs(&shb_run(&chain)), vec![(2, 3)]);
}

#[test]
fn oracle_examples() {
    let one = parse_trace_str("t1|w|x\n").unwrap();
    let all: Vec<_> = enumerate_correct_reorderings(&one, 14).unwrap().collect();
    assert_eq!(all, vec![vec![], vec![1]]);

    let two = parse_trace_str("t1|w|x\nt2|w|y\n").unwrap();
    let mut all: Vec<_> = enumerate_correct_reorderings(&two, 14).unwrap().collect();
    all.sort();
    assert_eq!(all, vec![vec![], vec![1], vec![1, 2], vec![2], vec![2, 1]]);

    let s5 = fixture("sigma5");
    assert!(enumerate_correct_reorderings(&s5, 14).unwrap().any(|r| r == vec![4, 5, 1, 2, 6]));

    let b = fixture("sigmaB");
    assert!(is_predictable_race_bf(&b, 1, 6).unwrap());
    assert!(!is_predictable_race_bf(&b, 3, 6).unwrap());
    assert!(is_predictable_race_bf(&fixture("sigma6"), 2, 7).unwrap());
    assert!(!is_syncp_race_bf(&fixture("sigma6"), 2, 7).unwrap());
    let sdp = fixture("sdp");
    assert!(!is_race_bf(&sdp, 9, 20, Mode::General, Limits::events(20)).unwrap());
    assert!(is_predictable_race_bf(&s5, 2, 6).unwrap());
    assert!(!is_syncp_race_bf(&s5, 2, 6).unwrap());
    assert!(is_syncp_race_bf(&fixture("sigma3"), 1, 8).unwrap());
    assert!(is_syncp_race_bf(&fixture("sigma4p"), 1, 10).unwrap());
    assert!(!is_syncp_race_bf(&b, 1, 3).unwrap());

    let big = syncp::gen::gen_random(&syncp::gen::GenConfig {
        events: 21,
        ..Default::default()
    })
    .unwrap();
    assert!(enumerate_correct_reorderings(&big, 30).is_err());
    assert!(enumerate_correct_reorderings(&sdp, 14).is_err());
}

#[test]
fn filter_examples() {
    let s2 = fixture("sigma2");
    let f = filter_ordered_variables(&s2).unwrap();
    assert!(f.dropped.is_empty());

    let c = fixture("sigmaC");
    let f = filter_ordered_variables(&c).unwrap();
    let x = c.names().vars.get("x").unwrap();
    let y = c.names().vars.get("y").unwrap();
    assert_eq!(f.dropped, [y].into_iter().collect());
    assert_eq!(f.dropped_events[&y], 2);
    assert!(!f.dropped.contains(&x));
    assert_eq!(f.trace.len(), 6);
    assert_eq!(f.index_map, vec![2, 3, 4, 5, 6, 7]);

    let single = parse_trace_str("t1|w|x\nt1|r|x\nt1|acq|l\nt1|w|y\nt1|rel|l\n").unwrap();
    let f = filter_ordered_variables(&single).unwrap();
    assert_eq!(f.dropped.len(), 2);
    assert_eq!(f.trace.len(), 2);

    // The simplest race survives filtering.
    let a = fixture("sigmaA");
    assert!(filter_ordered_variables(&a).unwrap().dropped.is_empty());
}

#[test]
fn summary_examples() {
    let r = engine::run(&fixture("sigma2"));
    let s = summarize(&r);
    assert_eq!((s.racy_events, s.racy_lines, s.racy_vars, s.max_distance), (1, 1, 1, 5));
    let s = summarize(&[]);
    assert_eq!((s.racy_events, s.racy_lines, s.racy_vars, s.max_distance), (0, 0, 0, 0));
    let r = engine::run(&fixture("sigma4"));
    let s = summarize(&r);
    assert_eq!((s.racy_events, s.racy_lines, s.racy_vars, s.max_distance), (2, 2, 1, 7));
}

#[test]
fn racy_events_match_naive_on_fixtures() {
    for name in FIXTURES {
        let t = fixture(name);
        let naive = naive_syncp_racy_events(&t);
        assert_eq!(racy_events(&t), naive, "{name}");
        assert_eq!(pairs(&engine::run(&t)), naive, "{name}");
    }
}
