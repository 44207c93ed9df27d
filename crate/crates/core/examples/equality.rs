//! Generates the two-thread bit-string traces and reports which ones race.

use syncp::engine;
use syncp::gen::gen_equality;

fn main() -> syncp::Result<()> {
    let words = ["0000", "0110", "1000", "1111"];
    for u in words {
        for v in words {
            let trace = gen_equality(u, v)?;
            let verdict = if engine::run(&trace).is_empty() { "no race" } else { "race" };
            println!("{u} {v}: {} events, {verdict}", trace.len());
        }
    }
    Ok(())
}
