//! Enumerates the correct reorderings of a tiny trace and asks the exhaustive
//! checkers which pairs are predictable races.

use syncp::io::parse_trace_str;
use syncp::oracle::{enumerate_correct_reorderings, race_pairs_bf, Limits, Mode};

const TRACE: &str = "\
t1|w|x
t1|acq|l
t1|r|x
t1|rel|l
t2|acq|l
t2|w|x
t2|rel|l
";

fn main() -> syncp::Result<()> {
    let trace = parse_trace_str(TRACE)?;
    let all: Vec<Vec<usize>> = enumerate_correct_reorderings(&trace, 16)?.collect();
    println!("{} correct reorderings", all.len());
    for seq in all.iter().take(5) {
        println!("  {seq:?}");
    }
    for mode in [Mode::General, Mode::SyncPreserving] {
        println!("{mode:?}: {:?}", race_pairs_bf(&trace, mode, Limits::events(16))?);
    }
    Ok(())
}
