//! Sync-preserving data race prediction over recorded traces.
//!
//! The streaming detector lives in [`engine`]; [`closure`] holds the
//! set-based reference definitions and [`oracle`] the exhaustive checkers
//! used to validate both.

pub mod baselines;
pub mod cli;
pub mod closure;
pub mod engine;
pub mod error;
pub mod filter;
pub mod gen;
pub mod io;
pub mod oracle;
pub mod report;
pub mod rfposet;
pub mod trace;
pub mod vclock;

pub use engine::SyncP;
pub use error::{Error, Result};
pub use report::{RaceReport, Summary};
pub use trace::{Access, Event, Op, Trace, TraceBuilder};
pub use vclock::VectorTimestamp;
