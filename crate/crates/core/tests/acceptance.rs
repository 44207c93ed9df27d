//! Acceptance criteria 1-8. One test drives them all in sequence so the
//! allocation counter only sees one workload at a time; each criterion prints
//! a PASS/FAIL line and the test fails if any criterion does.

mod common;

use std::alloc::{GlobalAlloc, Layout, System};
use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use common::{fixture, fixture_path, FIXTURES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use syncp::baselines::{hb_run, race_pairs, shb_run, Relation};
use syncp::closure::{self, EventSet};
use syncp::engine::{self, SyncP};
use syncp::gen::{gen_equality, gen_random, gen_rfposet, GenConfig, PosetGenConfig, RandomEvents};
use syncp::oracle::{
    enumerate_correct_reorderings, is_predictable_race_bf, is_race_bf, is_syncp_race_bf, racy_events_bf,
    Limits, Mode,
};
use syncp::rfposet::{
    build_race_instance, build_reverse_instance, realizability_bf, reverse_realizability_bf_with,
    MAX_POSET_EVENTS,
};
use syncp::trace::Trace;
use syncp::RaceReport;

// Pinned budgets and thresholds.
const C1_MAX_TIME: Duration = Duration::from_secs(1);
const C2_TRACES: u64 = 1000;
const C2_MAX_TIME: Duration = Duration::from_secs(5 * 60);
const C4_SAMPLES_N8: usize = 200;
const C4_MAX_TIME: Duration = Duration::from_secs(2 * 60);
const C5_POSETS: u64 = 200;
const C5_MAX_POSET_EVENTS: usize = 8;
const C5_MAX_THREADS: usize = 3;
const C5_MAX_TIME: Duration = Duration::from_secs(10 * 60);
const C6_SMALL: usize = 1_000_000;
const C6_LARGE: usize = 10_000_000;
const C6_MAX_TIME_RATIO: f64 = 15.0;
const C6_MAX_LARGE_TIME: Duration = Duration::from_secs(120);
const C6_MAX_MEMORY_RATIO: f64 = 15.0;
const C8_SAMPLES: u64 = 500;

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

type Outcome = Result<String, String>;

fn pairs(r: &[RaceReport]) -> Vec<(usize, usize)> {
    r.iter().map(|r| (r.e1, r.e2)).collect()
}

fn e2s(p: &[(usize, usize)]) -> BTreeSet<usize> {
    p.iter().map(|p| p.1).collect()
}

fn within(elapsed: Duration, cap: Duration) -> Outcome {
    if elapsed <= cap {
        Ok(String::new())
    } else {
        Err(format!("took {elapsed:.2?}, cap {cap:?}"))
    }
}

fn fixture_truth_table() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut check = |what: String, ok: bool| {
        checks += 1;
        if !ok {
            failures.push(what);
        }
    };
    type Expect = (&'static str, &'static [(usize, usize)], &'static [(usize, usize)], &'static [(usize, usize)]);
    // (fixture, SyncP, HB, SHB)
    let detectors: [Expect; 12] = [
        ("empty", &[], &[], &[]),
        ("sigma1", &[(1, 6)], &[], &[]),
        ("sigma2", &[(1, 6)], &[], &[]),
        ("sigma3", &[(1, 8)], &[], &[]),
        ("sigma4", &[(1, 5), (1, 8)], &[], &[]),
        ("sigma4p", &[(1, 10)], &[], &[]),
        ("sigma5", &[], &[], &[]),
        ("sigma6", &[], &[], &[]),
        ("sigmaA", &[(5, 6)], &[(5, 6)], &[(5, 6)]),
        ("sigmaB", &[(1, 6)], &[], &[]),
        ("sigmaC", &[], &[], &[]),
        ("sdp", &[], &[], &[]),
    ];
    for (name, sp, hb, shb) in detectors {
        let tr = fixture(name);
        check(format!("{name} syncp"), pairs(&engine::run(&tr)) == sp);
        check(format!("{name} hb"), pairs(&hb_run(&tr)) == hb);
        check(format!("{name} shb"), pairs(&shb_run(&tr)) == shb);
    }
    let closure_pairs = [("sigma2", 1, 6, true), ("sigmaB", 3, 6, false), ("sigmaC", 1, 8, false)];
    for (name, e1, e2, want) in closure_pairs {
        let got = closure::is_syncp_race_pair(&fixture(name), e1, e2).ok();
        check(format!("{name} closure ({e1},{e2})"), got == Some(want));
    }
    let s4 = fixture("sigma4");
    check("sigma4 e8 vs t1".into(), closure::syncp_races_with_thread(&s4, 8, 0) == Some(1));
    check("sigma4 e8 vs t2".into(), closure::syncp_races_with_thread(&s4, 8, 1).is_none());
    let general = [
        ("sigmaB", 1, 6, true),
        ("sigmaB", 3, 6, false),
        ("sigma6", 2, 7, true),
        ("sigma5", 2, 6, true),
    ];
    for (name, e1, e2, want) in general {
        let got = is_predictable_race_bf(&fixture(name), e1, e2).ok();
        check(format!("{name} general ({e1},{e2})"), got == Some(want));
    }
    let sdp = is_race_bf(&fixture("sdp"), 9, 20, Mode::General, Limits::events(20)).ok();
    check("sdp general (9,20)".into(), sdp == Some(false));
    let syncp_bf = [("sigma5", 2, 6, false), ("sigma6", 2, 7, false), ("sigma3", 1, 8, true)];
    for (name, e1, e2, want) in syncp_bf {
        let got = is_syncp_race_bf(&fixture(name), e1, e2).ok();
        check(format!("{name} syncp-bf ({e1},{e2})"), got == Some(want));
    }
    let s5 = fixture("sigma5");
    let witnessed = enumerate_correct_reorderings(&s5, 14)
        .map(|mut it| it.any(|r| r == [4, 5, 1, 2, 6]))
        .unwrap_or(false);
    check("sigma5 enumerates e4 e5 e1 e2 e6".into(), witnessed);
    let elapsed = start.elapsed();
    if !failures.is_empty() {
        return Err(format!("{} of {checks} checks failed: {}", failures.len(), failures.join(", ")));
    }
    within(elapsed, C1_MAX_TIME)?;
    Ok(format!("{checks} checks in {elapsed:.2?}"))
}

fn sweep_config(seed: u64) -> GenConfig {
    let threads = 2 + (seed % 2) as usize;
    let events = 4 + (seed % 9) as usize;
    GenConfig {
        events,
        threads,
        locks: 1 + (seed / 2 % 2) as usize,
        vars: 1 + (seed / 4 % 2) as usize,
        seed,
        fork_join: seed.is_multiple_of(7) && events >= 2 * (threads - 1) + 2,
        ..GenConfig::default()
    }
}

fn sweep_traces() -> Vec<Trace> {
    (0..C2_TRACES).map(|s| gen_random(&sweep_config(s)).unwrap()).collect()
}

fn three_way_equivalence(traces: &[Trace]) -> Outcome {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut unsound = Vec::new();
    let mut reported = 0;
    for (seed, tr) in traces.iter().enumerate() {
        let eng = pairs(&engine::run(tr));
        let clo = closure::racy_events(tr);
        let bf = racy_events_bf(tr, Mode::SyncPreserving, Limits::events(12)).map_err(|e| e.to_string())?;
        if e2s(&eng) != e2s(&clo) || e2s(&eng) != e2s(&bf) {
            mismatches.push(seed);
        }
        for &(e1, e2) in &eng {
            reported += 1;
            if !is_predictable_race_bf(tr, e1, e2).map_err(|e| e.to_string())? {
                unsound.push((seed, e1, e2));
            }
        }
    }
    let elapsed = start.elapsed();
    if !mismatches.is_empty() || !unsound.is_empty() {
        return Err(format!("mismatching seeds {mismatches:?}, unsound reports {unsound:?}"));
    }
    within(elapsed, C2_MAX_TIME)?;
    Ok(format!("{} traces, {reported} reports all predictable, {elapsed:.2?}", traces.len()))
}

fn shb_subsumption(traces: &[Trace]) -> Outcome {
    let mut shb_total = 0;
    let mut violations = Vec::new();
    for (seed, tr) in traces.iter().enumerate() {
        for (e1, e2) in race_pairs(tr, Relation::Shb) {
            shb_total += 1;
            if !closure::is_syncp_race_pair(tr, e1, e2).unwrap() {
                violations.push((seed, e1, e2));
            }
        }
    }
    if violations.is_empty() {
        Ok(format!("{shb_total} SHB pairs, all sync-preserving"))
    } else {
        Err(format!("{} violations, first {:?}", violations.len(), &violations[..violations.len().min(5)]))
    }
}

fn bits(n: usize, k: u64) -> String {
    (0..n).map(|i| if k >> (n - 1 - i) & 1 == 1 { '1' } else { '0' }).collect()
}

fn equality_construction() -> Outcome {
    let start = Instant::now();
    let mut cases: Vec<(String, String)> = Vec::new();
    for u in 0..16 {
        for v in 0..16 {
            cases.push((bits(4, u), bits(4, v)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 0..C4_SAMPLES_N8 {
        let u: u64 = rng.gen_range(0..256);
        // Every fourth sample takes v = u so both outcomes are exercised.
        let v = if k % 4 == 0 { u } else { rng.gen_range(0..256) };
        cases.push((bits(8, u), bits(8, v)));
    }
    let mut missed = Vec::new();
    let mut spurious = Vec::new();
    let mut unconfirmed = Vec::new();
    for (u, v) in &cases {
        let tr = gen_equality(u, v).map_err(|e| e.to_string())?;
        let reports = engine::run(&tr);
        match (reports.first(), u != v) {
            (None, true) => missed.push(format!("{u}/{v}")),
            (Some(_), false) => spurious.push(format!("{u}/{v}")),
            (Some(r), true) => {
                if !closure::is_syncp_race_pair(&tr, r.e1, r.e2).unwrap() {
                    unconfirmed.push(format!("{u}/{v}"));
                }
            }
            (None, false) => {}
        }
    }
    let elapsed = start.elapsed();
    let bad = missed.len() + spurious.len() + unconfirmed.len();
    if bad > 0 {
        return Err(format!(
            "{bad} of {} pairs mismatch: {} with u != v and no race (e.g. {}), {} with u = v and a race, {} unconfirmed",
            cases.len(),
            missed.len(),
            missed.iter().take(3).cloned().collect::<Vec<_>>().join(" "),
            spurious.len(),
            unconfirmed.len()
        ));
    }
    within(elapsed, C4_MAX_TIME)?;
    Ok(format!("{} pairs, {elapsed:.2?}", cases.len()))
}

fn hardness_chain() -> Outcome {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut realizable = 0;
    for seed in 0..C5_POSETS {
        let p = gen_rfposet(&PosetGenConfig {
            max_events: C5_MAX_POSET_EVENTS,
            max_threads: C5_MAX_THREADS,
            seed,
            ..PosetGenConfig::default()
        })
        .map_err(|e| e.to_string())?;
        let real = realizability_bf(&p).map_err(|e| e.to_string())?.is_some();
        let inst = build_reverse_instance(&p).map_err(|e| e.to_string())?;
        let rev = reverse_realizability_bf_with(&inst.poset, MAX_POSET_EVENTS).map_err(|e| e.to_string())?;
        let (trace, (e1, e2)) = build_race_instance(&inst).map_err(|e| e.to_string())?;
        let limits = Limits {
            max_events: trace.len(),
            max_states: 20_000_000,
        };
        let race = is_race_bf(&trace, e1, e2, Mode::General, limits).map_err(|e| format!("seed {seed}: {e}"))?;
        realizable += real as usize;
        if real != rev || rev != race {
            mismatches.push((seed, real, rev, race));
        }
    }
    let elapsed = start.elapsed();
    if !mismatches.is_empty() {
        return Err(format!("mismatches (seed, realizable, reverse, race): {mismatches:?}"));
    }
    within(elapsed, C5_MAX_TIME)?;
    Ok(format!("{C5_POSETS} posets ({realizable} realizable), {elapsed:.2?}"))
}

/// Streams `n` generated events through the detector; returns wall time and
/// peak bytes allocated above the starting level.
fn streamed_run(n: usize) -> (Duration, usize, u64) {
    let cfg = GenConfig {
        events: n,
        threads: 4,
        locks: 4,
        vars: 8,
        seed: 6,
        ..GenConfig::default()
    };
    let base = CURRENT.load(Ordering::Relaxed);
    PEAK.store(base, Ordering::Relaxed);
    let start = Instant::now();
    let mut eng = SyncP::new(cfg.dims());
    let mut races = 0;
    for e in RandomEvents::new(cfg).unwrap() {
        races += eng.process(&e).unwrap().is_some() as u64;
    }
    let elapsed = start.elapsed();
    (elapsed, PEAK.load(Ordering::Relaxed) - base, races)
}

fn complexity() -> Outcome {
    let (t1, m1, r1) = streamed_run(C6_SMALL);
    let (t2, m2, r2) = streamed_run(C6_LARGE);
    let time_ratio = t2.as_secs_f64() / t1.as_secs_f64();
    let mem_ratio = m2 as f64 / m1.max(1) as f64;
    let detail = format!(
        "N=1e6: {t1:.2?}, {m1} B peak, {r1} reports; N=1e7: {t2:.2?}, {m2} B peak, {r2} reports; time x{time_ratio:.2}, memory x{mem_ratio:.2}"
    );
    if time_ratio <= C6_MAX_TIME_RATIO && t2 <= C6_MAX_LARGE_TIME && mem_ratio <= C6_MAX_MEMORY_RATIO {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = syncp::cli::main_with(args.iter().copied(), &mut out, &mut err);
    (code, out)
}

fn determinism() -> Outcome {
    let mut runs = 0;
    for name in FIXTURES {
        let path = fixture_path(&format!("{name}.trace"));
        let path = path.to_str().unwrap();
        for algo in ["syncp", "hb", "shb"] {
            for format in ["text", "json", "csv"] {
                let args = ["syncp", "detect", "--algo", algo, "--format", format, "--input", path];
                let a = run_cli(&args);
                let b = run_cli(&args);
                runs += 1;
                if a != b {
                    return Err(format!("{name} {algo} {format} differs between runs"));
                }
            }
        }
    }
    Ok(format!("{runs} detect invocations byte-identical across two runs"))
}

type ClosureFn = fn(&Trace, &EventSet) -> EventSet;

fn random_subset(rng: &mut ChaCha8Rng, n: usize, p: f64) -> EventSet {
    (1..=n).filter(|_| rng.gen_bool(p)).collect()
}

fn closure_algebra() -> Outcome {
    let mut violations = Vec::new();
    let mut ideal_checks = 0;
    for seed in 0..C8_SAMPLES {
        let tr = gen_random(&GenConfig {
            events: 16,
            threads: 3,
            locks: 2,
            vars: 2,
            seed,
            fork_join: seed % 5 == 0,
            ..GenConfig::default()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_subset(&mut rng, tr.len(), 0.2);
        let mut bigger = s.clone();
        bigger.extend(random_subset(&mut rng, tr.len(), 0.2));
        let closures: [(&str, ClosureFn); 2] =
            [("tl", closure::tl_closure), ("sp", closure::sp_closure)];
        for (name, cl) in closures {
            let c = cl(&tr, &s);
            if !s.is_subset(&c) {
                violations.push(format!("{seed} {name} extensive"));
            }
            if !c.is_subset(&cl(&tr, &bigger)) {
                violations.push(format!("{seed} {name} monotone"));
            }
            if cl(&tr, &c) != c {
                violations.push(format!("{seed} {name} idempotent"));
            }
        }
        // Ideals grow when either event moves later in its thread.
        let conflicting: Vec<(usize, usize)> = (1..=tr.len())
            .flat_map(|b| (1..b).map(move |a| (a, b)))
            .filter(|&(a, b)| tr.conflicting(a, b))
            .collect();
        for &(e1, e2) in &conflicting {
            let ideal = closure::sp_ideal(&tr, e1, e2);
            for &(f1, f2) in &conflicting {
                let forward = tr.to_leq(e1, f1) && tr.to_leq(e2, f2);
                let swapped = tr.to_leq(e1, f2) && tr.to_leq(e2, f1);
                if (forward || swapped) && (f1, f2) != (e1, e2) {
                    ideal_checks += 1;
                    if !ideal.is_subset(&closure::sp_ideal(&tr, f1, f2)) {
                        violations.push(format!("{seed} ideal ({e1},{e2}) vs ({f1},{f2})"));
                    }
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(format!("{C8_SAMPLES} samples, {ideal_checks} ideal pairs"))
    } else {
        Err(format!("{} violations: {:?}", violations.len(), &violations[..violations.len().min(5)]))
    }
}

type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

#[test]
fn acceptance() {
    let traces = sweep_traces();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("fixture truth table", Box::new(fixture_truth_table)),
        ("three-way equivalence sweep", Box::new(|| three_way_equivalence(&traces))),
        ("SHB subsumption", Box::new(|| shb_subsumption(&traces))),
        ("equality-language construction", Box::new(equality_construction)),
        ("hardness-chain equivalence", Box::new(hardness_chain)),
        ("complexity at desk scale", Box::new(complexity)),
        ("determinism", Box::new(determinism)),
        ("closure algebra", Box::new(closure_algebra)),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
