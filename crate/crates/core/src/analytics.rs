//! Descriptive statistics: concentration, time series, frequency tables.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{assignee_pairs, distinct_assignee_names, normalize_cpc, AiCategory, Corpus, PatentRecord, YearBasis};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("no counts")]
    Empty,
    #[error("counts sum to zero")]
    ZeroTotal,
    #[error("window start {start} is after end {end}")]
    InvalidWindow { start: i32, end: i32 },
    #[error("rolling window must be odd and >= 1, got {0}")]
    InvalidRollingWindow(usize),
}

/// `G = 2 Σ i·x_i / (n Σ x) − (n + 1) / n` over ascending counts, `i` from 1.
pub fn gini(counts: &[u64]) -> Result<f64, AnalyticsError> {
    if counts.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let mut x = counts.to_vec();
    x.sort_unstable();
    let total: u128 = x.iter().map(|&c| u128::from(c)).sum();
    if total == 0 {
        return Err(AnalyticsError::ZeroTotal);
    }
    let weighted: u128 = x.iter().enumerate().map(|(i, &c)| (i as u128 + 1) * u128::from(c)).sum();
    let n = x.len() as f64;
    Ok(2.0 * weighted as f64 / (n * total as f64) - (n + 1.0) / n)
}

/// Percentage of the total held by the `k` largest counts.
pub fn top_share(counts: &[u64], k: usize) -> Result<f64, AnalyticsError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(AnalyticsError::ZeroTotal);
    }
    let mut x = counts.to_vec();
    x.sort_unstable_by(|a, b| b.cmp(a));
    Ok(100.0 * x.iter().take(k).sum::<u64>() as f64 / total as f64)
}

/// Grant-year interval; `[start, end)` unless `end_inclusive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: i32,
    pub end: i32,
    #[serde(default)]
    pub end_inclusive: bool,
}

impl Window {
    pub fn new(start: i32, end: i32) -> Result<Self, AnalyticsError> {
        if start > end {
            return Err(AnalyticsError::InvalidWindow { start, end });
        }
        Ok(Window { start, end, end_inclusive: false })
    }

    pub fn contains(&self, year: i32) -> bool {
        year >= self.start && (year < self.end || (self.end_inclusive && year == self.end))
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.start, self.end)
    }
}

/// The four comparison windows.
pub fn default_windows() -> Vec<Window> {
    [(1985, 1990), (1995, 2000), (2005, 2010), (2015, 2020)]
        .iter()
        .map(|&(s, e)| Window { start: s, end: e, end_inclusive: false })
        .collect()
}

/// Denominator of leaderboard shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareDenominator {
    /// Patents in scope with at least one assignee.
    #[default]
    Patents,
    /// Sum of per-assignee credits, so joint patents count once per assignee.
    AssigneeCredits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LeaderboardOptions {
    pub basis: YearBasis,
    pub denominator: ShareDenominator,
}

/// Patent counts per assignee within one scope. Each patent is credited once
/// to every distinct assignee name it lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssigneeCounts {
    pub scope: String,
    pub counts: BTreeMap<String, u64>,
    /// Most frequent country per assignee within the scope.
    pub countries: BTreeMap<String, String>,
    pub patents_with_assignee: u64,
}

impl AssigneeCounts {
    pub fn values(&self) -> Vec<u64> {
        self.counts.values().copied().collect()
    }

    pub fn credits(&self) -> u64 {
        self.counts.values().sum()
    }
}

pub fn assignee_counts<'a>(records: impl IntoIterator<Item = &'a PatentRecord>, scope: &str) -> AssigneeCounts {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut country_votes: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    let mut patents = 0;
    for r in records {
        let names = distinct_assignee_names(r);
        if names.is_empty() {
            continue;
        }
        patents += 1;
        for name in names {
            *counts.entry(name.to_string()).or_default() += 1;
        }
        for a in &r.assignees {
            *country_votes.entry(a.name.clone()).or_default().entry(a.country.clone()).or_default() += 1;
        }
    }
    let countries = country_votes
        .into_iter()
        .map(|(name, votes)| {
            // Highest vote, alphabetical among ties.
            let best = votes.iter().fold(None::<(&String, u64)>, |acc, (c, &v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((c, v)),
            });
            (name, best.map(|(c, _)| c.clone()).unwrap_or_default())
        })
        .collect();
    AssigneeCounts { scope: scope.to_string(), counts, countries, patents_with_assignee: patents }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderRow {
    pub rank: usize,
    pub assignee: String,
    pub count: u64,
    pub share_pct: f64,
    pub country: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub scope: String,
    pub rows: Vec<LeaderRow>,
    pub n_assignees: usize,
    pub patents_with_assignee: u64,
    pub assignee_credits: u64,
    /// `None` for an empty scope.
    pub gini: Option<f64>,
    /// Share of the listed rows under the chosen denominator.
    pub top_share_pct: Option<f64>,
    pub denominator: ShareDenominator,
}

/// Ranked assignees (count descending, then name) with concentration metrics.
pub fn leaderboard(counts: &AssigneeCounts, k: usize, denominator: ShareDenominator) -> Leaderboard {
    let mut ranked: Vec<(&String, u64)> = counts.counts.iter().map(|(n, &c)| (n, c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let denom = match denominator {
        ShareDenominator::Patents => counts.patents_with_assignee,
        ShareDenominator::AssigneeCredits => counts.credits(),
    };
    let share = |c: u64| if denom > 0 { 100.0 * c as f64 / denom as f64 } else { 0.0 };
    let rows: Vec<LeaderRow> = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &(name, c))| LeaderRow {
            rank: i + 1,
            assignee: name.clone(),
            count: c,
            share_pct: share(c),
            country: counts.countries.get(name).cloned().unwrap_or_default(),
        })
        .collect();
    if ranked.is_empty() {
        log::warn!("no assignees in scope {}", counts.scope);
    }
    let values = counts.values();
    Leaderboard {
        scope: counts.scope.clone(),
        n_assignees: ranked.len(),
        patents_with_assignee: counts.patents_with_assignee,
        assignee_credits: counts.credits(),
        gini: gini(&values).ok(),
        top_share_pct: (denom > 0).then(|| share(rows.iter().map(|r| r.count).sum())),
        rows,
        denominator,
    }
}

/// Leaderboard of the patents whose year falls in `window`.
pub fn window_leaderboard(corpus: &Corpus, window: Window, k: usize, opts: &LeaderboardOptions) -> Leaderboard {
    let inside = corpus.iter().filter(|r| r.year(opts.basis).is_some_and(|y| window.contains(y)));
    leaderboard(&assignee_counts(inside, &window.label()), k, opts.denominator)
}

pub fn overall_leaderboard(corpus: &Corpus, k: usize, opts: &LeaderboardOptions) -> Leaderboard {
    leaderboard(&assignee_counts(corpus.iter(), "overall"), k, opts.denominator)
}

/// Counts per year over a contiguous range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearSeries {
    pub first_year: i32,
    pub values: Vec<f64>,
}

impl YearSeries {
    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.values.len()).map(move |i| self.first_year + i as i32)
    }

    pub fn get(&self, year: i32) -> Option<f64> {
        usize::try_from(year - self.first_year).ok().and_then(|i| self.values.get(i).copied())
    }

    pub fn rolling_mean(&self, window: usize) -> Result<YearSeries, AnalyticsError> {
        Ok(YearSeries { first_year: self.first_year, values: rolling_mean(&self.values, window)? })
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Per-year counts over `[first, last]` (inclusive), zero-filled. Without a
/// range the span of observed years is used.
pub fn yearly_counts<'a>(
    records: impl IntoIterator<Item = &'a PatentRecord>,
    basis: YearBasis,
    range: Option<(i32, i32)>,
) -> YearSeries {
    let years: Vec<i32> = records.into_iter().filter_map(|r| r.year(basis)).collect();
    series_from_years(&years, range)
}

fn series_from_years(years: &[i32], range: Option<(i32, i32)>) -> YearSeries {
    let (first, last) = match range {
        Some(r) => r,
        None => match (years.iter().min(), years.iter().max()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return YearSeries { first_year: 0, values: Vec::new() },
        },
    };
    let len = usize::try_from(last - first + 1).unwrap_or(0);
    let mut values = vec![0.0; len];
    for &y in years {
        if (first..=last).contains(&y) {
            values[(y - first) as usize] += 1.0;
        }
    }
    YearSeries { first_year: first, values }
}

/// Per-group yearly counts; `group_of` returning `None` skips the record.
pub fn yearly_counts_by<'a, G: Ord + Clone>(
    records: impl IntoIterator<Item = &'a PatentRecord>,
    basis: YearBasis,
    range: (i32, i32),
    group_of: impl Fn(usize, &PatentRecord) -> Option<G>,
) -> BTreeMap<G, YearSeries> {
    let mut years: BTreeMap<G, Vec<i32>> = BTreeMap::new();
    for (i, r) in records.into_iter().enumerate() {
        if let (Some(g), Some(y)) = (group_of(i, r), r.year(basis)) {
            years.entry(g).or_default().push(y);
        }
    }
    years.into_iter().map(|(g, ys)| (g, series_from_years(&ys, Some(range)))).collect()
}

/// Centred moving average; near the ends the window shrinks to the years
/// available.
pub fn rolling_mean(values: &[f64], window: usize) -> Result<Vec<f64>, AnalyticsError> {
    if window == 0 || window % 2 == 0 {
        return Err(AnalyticsError::InvalidRollingWindow(window));
    }
    let h = window / 2;
    Ok((0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(values.len() - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareRow {
    pub key: String,
    pub count: u64,
    pub pct: f64,
}

fn share_rows(counts: BTreeMap<String, u64>, denom: u64) -> Vec<ShareRow> {
    let mut rows: Vec<ShareRow> = counts
        .into_iter()
        .map(|(key, count)| ShareRow { pct: if denom > 0 { 100.0 * count as f64 / denom as f64 } else { 0.0 }, key, count })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.key.cmp(&b.key)));
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeographyTables {
    /// Shares of all (patent, assignee) entries.
    pub countries: Vec<ShareRow>,
    /// Shares of US entries; entries without a state count as `unknown`.
    pub us_states: Vec<ShareRow>,
    pub entries: u64,
    pub us_entries: u64,
}

pub fn geography_tables(corpus: &Corpus) -> GeographyTables {
    let mut countries: BTreeMap<String, u64> = BTreeMap::new();
    let mut states: BTreeMap<String, u64> = BTreeMap::new();
    let (mut entries, mut us) = (0, 0);
    for (_, a) in assignee_pairs(corpus) {
        entries += 1;
        *countries.entry(a.country.clone()).or_default() += 1;
        if a.country == "US" {
            us += 1;
            *states.entry(a.us_state.clone().unwrap_or_else(|| "unknown".into())).or_default() += 1;
        }
    }
    GeographyTables { countries: share_rows(countries, entries), us_states: share_rows(states, us), entries, us_entries: us }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpcRow {
    pub subclass: String,
    pub count: u64,
    /// Over all subclass assignments (sums to 100).
    pub pct_of_assignments: f64,
    /// Over patents (may sum past 100).
    pub pct_of_patents: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTables {
    pub cpc: Vec<CpcRow>,
    /// Every category, share of patents scoring at least the AI threshold.
    pub ai: Vec<ShareRow>,
    pub patents: u64,
}

/// Green subclass of a CPC symbol (`Y02T`, `Y04S`, ...).
pub fn green_subclass(code: &str) -> Option<String> {
    let n = normalize_cpc(code);
    (n.starts_with("Y02") || n.starts_with("Y04S")).then(|| n.chars().take(4).collect()).filter(|s: &String| s.len() == 4)
}

/// Multi-label frequencies: a patent counts once for each distinct green
/// subclass and each AI category it carries.
pub fn classification_tables(corpus: &Corpus) -> ClassificationTables {
    let patents = corpus.len() as u64;
    let mut cpc: BTreeMap<String, u64> = BTreeMap::new();
    let mut ai: BTreeMap<AiCategory, u64> = AiCategory::ALL.iter().map(|&c| (c, 0)).collect();
    for r in corpus {
        let subclasses: BTreeSet<String> = r.cpc_codes.iter().filter_map(|c| green_subclass(c)).collect();
        for s in subclasses {
            *cpc.entry(s).or_default() += 1;
        }
        for c in r.ai_categories() {
            *ai.entry(c).or_default() += 1;
        }
    }
    let assignments: u64 = cpc.values().sum();
    let pct = |c: u64, d: u64| if d > 0 { 100.0 * c as f64 / d as f64 } else { 0.0 };
    let mut cpc_rows: Vec<CpcRow> = cpc
        .into_iter()
        .map(|(subclass, count)| CpcRow {
            subclass,
            count,
            pct_of_assignments: pct(count, assignments),
            pct_of_patents: pct(count, patents),
        })
        .collect();
    cpc_rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.subclass.cmp(&b.subclass)));
    let ai_rows = share_rows(ai.into_iter().map(|(c, n)| (c.label().to_string(), n)).collect(), patents);
    ClassificationTables { cpc: cpc_rows, ai: ai_rows, patents }
}
