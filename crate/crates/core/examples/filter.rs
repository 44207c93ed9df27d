//! Drops variables whose accesses are totally ordered before detection.

use syncp::cli::{detect, Algo};
use syncp::filter::filter_ordered_variables;
use syncp::gen::{gen_random, GenConfig};

fn main() -> syncp::Result<()> {
    let trace = gen_random(&GenConfig {
        events: 60,
        threads: 4,
        vars: 10,
        p_read: 0.25,
        p_write: 0.25,
        p_sync: 0.5,
        seed: 5,
        ..GenConfig::default()
    })?;
    let d = trace.dims();
    println!("N={} T={} L={} V={} A={}", trace.len(), d.threads, d.locks, d.vars, trace.acquire_count());

    let f = filter_ordered_variables(&trace)?;
    let names: Vec<&str> = f.dropped.iter().map(|&x| trace.var_name(x)).collect();
    println!("dropped {} variables {names:?}, {} events left", names.len(), f.trace.len());

    let (full, _) = detect(&trace, Algo::Syncp, true)?;
    let (filtered, summary) = detect(&trace, Algo::Syncp, false)?;
    assert_eq!(full, filtered);
    println!("{} races either way, {} racy variables", filtered.len(), summary.racy_vars);
    Ok(())
}
