//! Leak detection over simulator end states and over fleets of profiles.
//!
//! [`goleak_find`] and [`goleak_verify`] report every task alive once a
//! program finishes. [`analyze_fleet`] looks for channel operations that pile
//! up blocked goroutines across many process instances: a site is reported
//! when some single profile holds at least `threshold` goroutines there, it
//! is not a select waiting only on transient channels, and its function is
//! not suppressed. Reported sites are ranked by the root mean square of their
//! per-profile counts.

mod fleet;
mod goleak;

pub use fleet::{
    analyze_fleet, assemble, kind_histogram, kind_histogram_with, rank, rms, transient_filter,
    AnalyzeError, AnalyzerConfig, HistogramEntry, LeakReport, Representative, SiteStats,
    DEFAULT_THRESHOLD, DEFAULT_TOP_N, DEFAULT_TRANSIENT,
};
pub use goleak::{goleak_find, goleak_verify, GoleakFinding, GoleakResult, Verification};

/// Per-profile site counts, for callers that tally profiles in parallel
/// before calling [`assemble`].
pub fn profile_sites<'p>(
    p: &'p crate::profile::GoroutineProfile,
    sigs: &crate::profile::Signatures,
) -> alloc::collections::BTreeMap<crate::profile::BlockSite, (u64, &'p crate::profile::GoroutineRecord)> {
    fleet::profile_sites(p, sigs)
}
