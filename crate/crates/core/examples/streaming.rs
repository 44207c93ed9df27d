//! Feeds a million generated events straight into the engine without ever
//! materializing the trace.

use std::time::Instant;

use syncp::gen::{GenConfig, RandomEvents};
use syncp::SyncP;

fn main() -> syncp::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1_000_000);
    let cfg = GenConfig {
        events: n,
        threads: 4,
        locks: 4,
        vars: 8,
        seed: 6,
        ..GenConfig::default()
    };
    let mut engine = SyncP::new(cfg.dims());
    let start = Instant::now();
    let mut races = 0;
    for ev in RandomEvents::new(cfg)? {
        if engine.process(&ev)?.is_some() {
            races += 1;
        }
    }
    let s = engine.stats();
    println!("{n} events in {:.2?}, {races} racy events", start.elapsed());
    println!(
        "retained: {} accesses, {} critical sections; fixpoint rounds {}",
        s.retained_access, s.retained_cs, s.fixpoint_rounds
    );
    Ok(())
}
