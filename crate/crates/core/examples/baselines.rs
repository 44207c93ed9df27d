//! Compares happens-before, schedulable happens-before and sync-preserving
//! reports on the same trace.

use syncp::baselines::{race_pairs, Relation};
use syncp::closure;
use syncp::io::parse_trace_str;

const TRACE: &str = "\
t1|w|x
t1|acq|l
t1|rel|l
t2|acq|l
t2|w|x
t2|rel|l
t3|acq|l
t3|r|x
t3|rel|l
";

fn main() -> syncp::Result<()> {
    let trace = parse_trace_str(TRACE)?;
    println!("hb    {:?}", race_pairs(&trace, Relation::Hb));
    println!("shb   {:?}", race_pairs(&trace, Relation::Shb));
    println!("syncp {:?}", closure::racy_events(&trace));
    Ok(())
}
