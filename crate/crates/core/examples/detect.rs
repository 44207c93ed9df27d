//! Builds a small trace in code and runs the streaming detector on it.

use syncp::{engine, TraceBuilder};

fn main() -> syncp::Result<()> {
    let mut b = TraceBuilder::new();
    b.write("t1", "x");
    b.acquire("t1", "l");
    b.read("t1", "x");
    b.release("t1", "l");
    b.acquire("t2", "l");
    b.write("t2", "x");
    b.release("t2", "l");
    let trace = b.build()?;

    for r in engine::run(&trace) {
        println!(
            "race on {} between e{} ({}) and e{} ({})",
            trace.var_name(r.var),
            r.e1,
            trace.thread_name(r.threads.0),
            r.e2,
            trace.thread_name(r.threads.1),
        );
    }
    Ok(())
}
