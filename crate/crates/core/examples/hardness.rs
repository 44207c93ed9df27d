//! Walks a random rf-poset through the reductions: realizability, the
//! reverse instance, and the race instance checked by search.

use syncp::gen::{gen_rfposet, PosetGenConfig};
use syncp::oracle::{is_race_bf, Limits, Mode};
use syncp::rfposet::{build_race_instance, build_reverse_instance, realizability_bf, reverse_realizability_bf_with};

fn main() -> syncp::Result<()> {
    for seed in 0..5 {
        let poset = gen_rfposet(&PosetGenConfig {
            max_events: 6,
            seed,
            ..Default::default()
        })?;
        let real = realizability_bf(&poset)?.is_some();
        let inst = build_reverse_instance(&poset)?;
        let rev = reverse_realizability_bf_with(&inst.poset, 64)?;
        let (trace, (e1, e2)) = build_race_instance(&inst)?;
        let race = is_race_bf(&trace, e1, e2, Mode::General, Limits::events(trace.len()))?;
        println!(
            "seed {seed}: {} events realizable={real} reverse={rev} race(e{e1}, e{e2})={race} on {} events",
            poset.len(),
            trace.len()
        );
    }
    Ok(())
}
