//! Core of the `chanleak` toolkit.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std` (it only needs `alloc`):
//!
//! * [`runtime`]: a deterministic, single-threaded simulator of tasks and
//!   channels with Go's blocking semantics (unbuffered rendezvous, bounded
//!   buffers, `select`, `close`, nil channels, logical-time timers).
//! * [`dsl`]: a small line-oriented IR for channel programs, the catalog of
//!   builtin leak scenarios, and the range-over-unclosed-channel linter.
//! * [`profile`]: the goroutine profile data model, its text wire format,
//!   simulator snapshots, and the blocked-stack classifier.
//! * [`analyzer`]: the end-of-run leak checker and the fleet-wide profile
//!   analyzer (threshold and transience filters, RMS ranking, histograms).
//!
//! File and process IO live in the `chanleak` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analyzer;
pub mod dsl;
mod loc;
pub mod profile;
pub mod runtime;

pub use loc::SourceLoc;
