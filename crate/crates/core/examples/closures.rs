//! Prints the thread-local and sync-preserving closures behind a race verdict.

use syncp::closure::{self, EventSet};
use syncp::io::parse_trace_str;

const TRACE: &str = "\
t1|acq|l
t1|w|y
t1|rel|l
t2|acq|l
t2|r|y
t2|w|x
t2|rel|l
t1|w|x
";

fn main() -> syncp::Result<()> {
    let trace = parse_trace_str(TRACE)?;
    let seed: EventSet = [5].into_iter().collect();
    println!("TL({seed:?}) = {:?}", closure::tl_closure(&trace, &seed));
    println!("SP({seed:?}) = {:?}", closure::sp_closure(&trace, &seed));

    let (e1, e2) = (6, 8);
    let ideal = closure::sp_ideal(&trace, e1, e2);
    println!("ideal of ({e1}, {e2}) = {ideal:?}");
    println!("race: {}", closure::is_syncp_race_pair(&trace, e1, e2)?);
    Ok(())
}
