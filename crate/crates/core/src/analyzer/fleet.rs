use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::profile::{site_or_other, BlockSite, Category, GoroutineProfile, GoroutineRecord, Signatures};

pub const DEFAULT_THRESHOLD: u64 = 10_000;
pub const DEFAULT_TOP_N: usize = 10;
pub const DEFAULT_TRANSIENT: [&str; 2] = ["time.Tick", "context.Done"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyzerConfig {
    /// Blocked goroutines at one site in one profile needed to report it.
    pub threshold: u64,
    pub top_n: usize,
    /// Channel origins that always become ready eventually.
    pub transient_symbols: BTreeSet<String>,
    /// Function names whose sites are never reported.
    pub suppression: BTreeSet<String>,
    pub signatures: Signatures,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            top_n: DEFAULT_TOP_N,
            transient_symbols: DEFAULT_TRANSIENT.iter().map(|s| String::from(*s)).collect(),
            suppression: BTreeSet::new(),
            signatures: Signatures::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyzeError {
    #[error("no profiles to analyze")]
    NoProfiles,
    #[error("threshold must be at least 1")]
    ZeroThreshold,
    #[error("top_n must be at least 1")]
    ZeroTopN,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Representative {
    pub instance_id: String,
    pub record: GoroutineRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteStats {
    pub site: BlockSite,
    /// Profiles with a nonzero count, in input order.
    pub per_instance_counts: Vec<(String, u64)>,
    pub total: u64,
    pub rms: f64,
    /// Lowest-id record from the first profile with the largest count.
    pub representative: Representative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramEntry {
    pub count: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakReport {
    pub generated_at: String,
    pub config: AnalyzerConfig,
    pub profiles: usize,
    pub findings: Vec<SiteStats>,
    pub histogram: BTreeMap<Category, HistogramEntry>,
    /// Blocked goroutines per suppressed function, over sites that would
    /// otherwise have been reported.
    pub suppressed: BTreeMap<String, u64>,
}

/// Keeps every site except a select whose recorded arms are all transient.
/// A select with no recorded arms is kept.
pub fn transient_filter(site: &BlockSite, representative: &GoroutineRecord, config: &AnalyzerConfig) -> bool {
    if site.kind != crate::profile::BlockKind::Select {
        return true;
    }
    let arms = representative.select_arms();
    arms.is_empty() || !arms.iter().all(|a| config.transient_symbols.contains(*a))
}

/// Root mean square of `counts` over `profiles` profiles; absent profiles
/// count as zero.
pub fn rms(counts: impl IntoIterator<Item = u64>, profiles: usize) -> f64 {
    if profiles == 0 {
        return 0.0;
    }
    let sum_sq: u128 = counts.into_iter().map(|c| u128::from(c) * u128::from(c)).sum();
    libm::sqrt(sum_sq as f64 / profiles as f64)
}

struct Agg<'p> {
    counts: Vec<(usize, u64)>,
    rep: Option<(usize, u64, &'p GoroutineRecord)>,
}

/// Per-profile site counts, with the lowest-id record seen at each site.
pub(crate) fn profile_sites<'p>(
    p: &'p GoroutineProfile,
    sigs: &Signatures,
) -> BTreeMap<BlockSite, (u64, &'p GoroutineRecord)> {
    let mut out: BTreeMap<BlockSite, (u64, &GoroutineRecord)> = BTreeMap::new();
    for rec in &p.goroutines {
        let e = out.entry(site_or_other(rec, sigs)).or_insert((0, rec));
        e.0 += 1;
        if rec.id < e.1.id {
            e.1 = rec;
        }
    }
    out
}

pub fn analyze_fleet(
    profiles: &[GoroutineProfile],
    config: &AnalyzerConfig,
    generated_at: &str,
) -> Result<LeakReport, AnalyzeError> {
    let tallies: Vec<_> = profiles.iter().map(|p| profile_sites(p, &config.signatures)).collect();
    assemble(profiles, tallies, config, generated_at)
}

/// Builds the report from per-profile tallies computed elsewhere, possibly in
/// parallel. `tallies[i]` must come from `profiles[i]`.
pub fn assemble<'p>(
    profiles: &'p [GoroutineProfile],
    tallies: Vec<BTreeMap<BlockSite, (u64, &'p GoroutineRecord)>>,
    config: &AnalyzerConfig,
    generated_at: &str,
) -> Result<LeakReport, AnalyzeError> {
    if profiles.is_empty() {
        return Err(AnalyzeError::NoProfiles);
    }
    if config.threshold == 0 {
        return Err(AnalyzeError::ZeroThreshold);
    }
    if config.top_n == 0 {
        return Err(AnalyzeError::ZeroTopN);
    }
    let p = profiles.len();

    let mut sites: BTreeMap<BlockSite, Agg<'p>> = BTreeMap::new();
    for (i, t) in tallies.into_iter().enumerate() {
        for (site, (count, rec)) in t {
            if !site.kind.is_channel() {
                continue;
            }
            let a = sites.entry(site).or_insert(Agg { counts: Vec::new(), rep: None });
            a.counts.push((i, count));
            if a.rep.is_none_or(|(_, best, _)| count > best) {
                a.rep = Some((i, count, rec));
            }
        }
    }

    let mut findings = Vec::new();
    let mut suppressed = BTreeMap::new();
    for (site, a) in sites {
        let Some((ri, max, rec)) = a.rep else { continue };
        if max < config.threshold || !transient_filter(&site, rec, config) {
            continue;
        }
        let total: u64 = a.counts.iter().map(|(_, c)| c).sum();
        if config.suppression.contains(&site.location.function) {
            *suppressed.entry(site.location.function.clone()).or_insert(0) += total;
            continue;
        }
        findings.push(SiteStats {
            rms: rms(a.counts.iter().map(|(_, c)| *c), p),
            total,
            per_instance_counts: a
                .counts
                .iter()
                .map(|(i, c)| (profiles[*i].instance_id.clone(), *c))
                .collect(),
            representative: Representative {
                instance_id: profiles[ri].instance_id.clone(),
                record: rec.clone(),
            },
            site,
        });
    }
    findings.sort_by(rank);
    findings.truncate(config.top_n);

    Ok(LeakReport {
        generated_at: generated_at.into(),
        config: config.clone(),
        profiles: p,
        findings,
        histogram: kind_histogram_with(profiles, &config.signatures),
        suppressed,
    })
}

/// rms descending, then total descending, then site ascending.
pub fn rank(a: &SiteStats, b: &SiteStats) -> Ordering {
    b.rms
        .total_cmp(&a.rms)
        .then(b.total.cmp(&a.total))
        .then_with(|| a.site.cmp(&b.site))
}

pub fn kind_histogram(profiles: &[GoroutineProfile]) -> BTreeMap<Category, HistogramEntry> {
    kind_histogram_with(profiles, &Signatures::default())
}

/// Count and percentage of all records per category. Every category is
/// present; percentages are zero when there are no records.
pub fn kind_histogram_with(
    profiles: &[GoroutineProfile],
    sigs: &Signatures,
) -> BTreeMap<Category, HistogramEntry> {
    let mut counts: BTreeMap<Category, u64> = Category::ALL.iter().map(|c| (*c, 0)).collect();
    for rec in profiles.iter().flat_map(|p| &p.goroutines) {
        *counts.entry(Category::of(rec, sigs)).or_insert(0) += 1;
    }
    let total: u64 = counts.values().sum();
    counts
        .into_iter()
        .map(|(c, n)| {
            let percent = if total == 0 { 0.0 } else { n as f64 * 100.0 / total as f64 };
            (c, HistogramEntry { count: n, percent })
        })
        .collect()
}
