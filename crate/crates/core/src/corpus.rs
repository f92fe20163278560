//! Patent ingestion and the Green-AI intersection filter.
//!
//! Records are assembled from one or more delimited files joined on the
//! patent id. Single-valued fields (dates, abstract, scores, counts) must agree
//! across every row that sets them; multi-valued fields (assignees, CPC
//! symbols) accumulate with duplicates collapsed.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use flate2::read::MultiGzDecoder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The eight AIPD technology categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AiCategory {
    MachineLearning,
    EvolutionaryComputation,
    NaturalLanguageProcessing,
    Speech,
    Vision,
    KnowledgeProcessing,
    PlanningControl,
    AiHardware,
}

impl AiCategory {
    pub const ALL: [AiCategory; 8] = [
        AiCategory::MachineLearning,
        AiCategory::EvolutionaryComputation,
        AiCategory::NaturalLanguageProcessing,
        AiCategory::Speech,
        AiCategory::Vision,
        AiCategory::KnowledgeProcessing,
        AiCategory::PlanningControl,
        AiCategory::AiHardware,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AiCategory::MachineLearning => "Machine Learning",
            AiCategory::EvolutionaryComputation => "Evolutionary Computation",
            AiCategory::NaturalLanguageProcessing => "Natural Language Processing",
            AiCategory::Speech => "Speech Processing",
            AiCategory::Vision => "Computer Vision",
            AiCategory::KnowledgeProcessing => "Knowledge Representation & Reasoning",
            AiCategory::PlanningControl => "AI-Assisted Planning & Control",
            AiCategory::AiHardware => "AI Hardware",
        }
    }
}

impl fmt::Display for AiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Score threshold at which a category (or the patent as a whole) counts as AI.
pub const AI_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AssigneeRef {
    pub name: String,
    /// ISO-3166 alpha-2, or `"unknown"`.
    pub country: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub us_state: Option<String>,
}

impl AssigneeRef {
    pub const UNKNOWN_COUNTRY: &'static str = "unknown";

    /// Builds a reference, normalizing the country code and dropping a state
    /// that is attached to a non-US country.
    pub fn new(name: impl Into<String>, country: Option<&str>, us_state: Option<&str>) -> Self {
        let country = match country.map(str::trim) {
            Some(c) if !c.is_empty() => c.to_ascii_uppercase(),
            _ => Self::UNKNOWN_COUNTRY.to_string(),
        };
        let us_state = if country == "US" {
            us_state.map(|s| s.trim().to_ascii_uppercase()).filter(|s| !s.is_empty())
        } else {
            None
        };
        AssigneeRef { name: name.into().trim().to_string(), country, us_state }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatentRecord {
    pub patent_id: String,
    pub grant_date: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filing_date: Option<NaiveDate>,
    /// `None` when no source supplied an abstract; such records stay in the
    /// corpus for analytics but are excluded from topic modeling.
    pub abstract_text: Option<String>,
    pub assignees: Vec<AssigneeRef>,
    pub cpc_codes: Vec<String>,
    pub ai_scores: BTreeMap<AiCategory, f64>,
    pub predict_any_ai: Option<bool>,
    pub forward_citations: u32,
    pub market_value_musd1982: Option<f64>,
}

/// Which date drives per-year counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YearBasis {
    #[default]
    Grant,
    Filing,
}

impl PatentRecord {
    /// A record with no abstract, assignees, codes or scores.
    pub fn new(patent_id: impl Into<String>, grant_date: NaiveDate) -> Self {
        PatentRecord {
            patent_id: patent_id.into(),
            grant_date,
            filing_date: None,
            abstract_text: None,
            assignees: Vec::new(),
            cpc_codes: Vec::new(),
            ai_scores: BTreeMap::new(),
            predict_any_ai: None,
            forward_citations: 0,
            market_value_musd1982: None,
        }
    }

    pub fn year(&self, basis: YearBasis) -> Option<i32> {
        match basis {
            YearBasis::Grant => Some(self.grant_date.year()),
            YearBasis::Filing => self.filing_date.map(|d| d.year()),
        }
    }

    pub fn has_abstract(&self) -> bool {
        self.abstract_text.as_deref().is_some_and(|a| !a.trim().is_empty())
    }

    /// Categories whose score reaches [`AI_THRESHOLD`].
    pub fn ai_categories(&self) -> impl Iterator<Item = AiCategory> + '_ {
        self.ai_scores.iter().filter(|(_, &s)| s >= AI_THRESHOLD).map(|(&c, _)| c)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv error in {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: column `{column}` not found in header")]
    MissingColumn { path: PathBuf, column: String },
    #[error("no source maps the required `{0}` column")]
    SchemaIncomplete(&'static str),
    #[error("patent {patent_id}: conflicting values for `{field}` ({first:?} vs {second:?})")]
    Conflict { patent_id: String, field: &'static str, first: String, second: String },
    #[error("patent {0}: AI labels missing")]
    AiLabelsMissing(String),
    #[error("corpus file {path} line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("duplicate patent id {0} in corpus")]
    DuplicateId(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

/// Maps record fields to header names in one source file. Every field but
/// the id is optional; a file contributes only the fields it maps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub id: String,
    pub grant_date: Option<String>,
    pub filing_date: Option<String>,
    #[serde(rename = "abstract")]
    pub abstract_text: Option<String>,
    pub assignee_name: Option<String>,
    pub assignee_country: Option<String>,
    pub assignee_state: Option<String>,
    /// Either one symbol per row or several separated by `;` or `|`.
    pub cpc: Option<String>,
    pub predict_any_ai: Option<String>,
    pub ai_scores: BTreeMap<AiCategory, String>,
    pub forward_citations: Option<String>,
    pub market_value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceFile {
    pub path: PathBuf,
    /// Field delimiter; inferred from the extension (`.tsv` → tab, else comma)
    /// when absent. A trailing `.gz` is ignored for inference.
    #[serde(default)]
    pub delimiter: Option<char>,
    pub columns: ColumnMap,
}

impl SourceFile {
    fn delimiter_byte(&self) -> u8 {
        if let Some(d) = self.delimiter {
            return d as u8;
        }
        let name = self.path.to_string_lossy().to_ascii_lowercase();
        let name = name.strip_suffix(".gz").unwrap_or(&name);
        if name.ends_with(".tsv") || name.ends_with(".tab") {
            b'\t'
        } else {
            b','
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub min_year: i32,
    pub max_year: i32,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { min_year: 1976, max_year: 2023 }
    }
}

/// Counted, non-fatal problems met during ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestWarnings {
    pub malformed_rows: usize,
    pub out_of_range_rows: usize,
    /// Ids that appeared only in auxiliary files and never received a grant date.
    pub missing_grant_date: usize,
    pub missing_abstract: usize,
    pub messages: Vec<String>,
}

const MAX_MESSAGES: usize = 50;

impl IngestWarnings {
    fn note(&mut self, msg: String) {
        log::warn!("{msg}");
        if self.messages.len() < MAX_MESSAGES {
            self.messages.push(msg);
        }
    }

    fn merge(&mut self, other: IngestWarnings) {
        self.malformed_rows += other.malformed_rows;
        self.out_of_range_rows += other.out_of_range_rows;
        for m in other.messages {
            if self.messages.len() < MAX_MESSAGES {
                self.messages.push(m);
            }
        }
    }
}

/// An immutable set of records sorted by patent id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<PatentRecord>,
}

impl Corpus {
    /// Sorts by id and rejects duplicate ids.
    pub fn new(mut records: Vec<PatentRecord>) -> Result<Self, CorpusError> {
        records.sort_by(|a, b| a.patent_id.cmp(&b.patent_id));
        if let Some(w) = records.windows(2).find(|w| w[0].patent_id == w[1].patent_id) {
            return Err(CorpusError::DuplicateId(w[0].patent_id.clone()));
        }
        Ok(Corpus { records })
    }

    pub fn records(&self) -> &[PatentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PatentRecord> {
        self.records.iter()
    }

    pub fn get(&self, patent_id: &str) -> Option<&PatentRecord> {
        self.records
            .binary_search_by(|r| r.patent_id.as_str().cmp(patent_id))
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn filter(&self, pred: impl Fn(&PatentRecord) -> bool) -> Corpus {
        Corpus { records: self.records.iter().filter(|r| pred(r)).cloned().collect() }
    }

    pub fn into_records(self) -> Vec<PatentRecord> {
        self.records
    }

    /// One JSON object per line, in id order.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_ndjson(&self, path: &Path) -> Result<(), CorpusError> {
        let f = File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(f);
        self.write_ndjson(&mut w).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))
    }

    pub fn load_ndjson(path: &Path) -> Result<Corpus, CorpusError> {
        let f = File::open(path).map_err(io_err(path))?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PatentRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        Corpus::new(records)
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a PatentRecord;
    type IntoIter = std::slice::Iter<'a, PatentRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// Record under construction while rows from several files are merged.
#[derive(Debug, Default)]
struct Partial {
    grant_date: Option<NaiveDate>,
    filing_date: Option<NaiveDate>,
    abstract_text: Option<String>,
    assignees: Vec<AssigneeRef>,
    cpc_codes: Vec<String>,
    ai_scores: BTreeMap<AiCategory, f64>,
    predict_any_ai: Option<bool>,
    forward_citations: Option<u32>,
    market_value: Option<f64>,
}

/// Parsed contents of one row; only mapped, non-empty cells are `Some`.
#[derive(Debug, Default, Clone)]
struct RowFields {
    id: String,
    grant_date: Option<NaiveDate>,
    filing_date: Option<NaiveDate>,
    abstract_text: Option<String>,
    assignee: Option<AssigneeRef>,
    cpc: Vec<String>,
    ai_scores: Vec<(AiCategory, f64)>,
    predict_any_ai: Option<bool>,
    forward_citations: Option<u32>,
    market_value: Option<f64>,
}

fn set_once<T: PartialEq + fmt::Debug + Clone>(
    slot: &mut Option<T>,
    value: Option<T>,
    patent_id: &str,
    field: &'static str,
) -> Result<(), CorpusError> {
    let Some(v) = value else { return Ok(()) };
    match slot {
        Some(existing) if *existing != v => Err(CorpusError::Conflict {
            patent_id: patent_id.to_string(),
            field,
            first: format!("{existing:?}"),
            second: format!("{v:?}"),
        }),
        Some(_) => Ok(()),
        None => {
            *slot = Some(v);
            Ok(())
        }
    }
}

impl Partial {
    fn absorb(&mut self, row: RowFields) -> Result<(), CorpusError> {
        let id = row.id.as_str();
        set_once(&mut self.grant_date, row.grant_date, id, "grant_date")?;
        set_once(&mut self.filing_date, row.filing_date, id, "filing_date")?;
        set_once(&mut self.abstract_text, row.abstract_text, id, "abstract")?;
        set_once(&mut self.predict_any_ai, row.predict_any_ai, id, "predict_any_ai")?;
        set_once(&mut self.forward_citations, row.forward_citations, id, "forward_citations")?;
        set_once(&mut self.market_value, row.market_value, id, "market_value")?;
        for (cat, score) in row.ai_scores {
            let mut slot = self.ai_scores.get(&cat).copied();
            set_once(&mut slot, Some(score), id, "ai_score")?;
            self.ai_scores.insert(cat, score);
        }
        if let Some(a) = row.assignee {
            if !a.name.is_empty() && !self.assignees.contains(&a) {
                self.assignees.push(a);
            }
        }
        for code in row.cpc {
            if !self.cpc_codes.contains(&code) {
                self.cpc_codes.push(code);
            }
        }
        Ok(())
    }
}

fn open_maybe_gz(path: &Path) -> Result<Box<dyn Read + Send>, CorpusError> {
    let f = File::open(path).map_err(io_err(path))?;
    let is_gz = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    Ok(if is_gz { Box::new(MultiGzDecoder::new(BufReader::new(f))) } else { Box::new(BufReader::new(f)) })
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y%m%d"))
        .map_err(|e| format!("bad date {s:?}: {e}"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" => Ok(true),
        "0" | "false" | "f" | "no" => Ok(false),
        other => Err(format!("bad boolean {other:?}")),
    }
}

/// Splits a CPC cell into trimmed symbols.
fn split_cpc(cell: &str) -> Vec<String> {
    cell.split([';', '|']).map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

struct ResolvedColumns {
    id: usize,
    grant_date: Option<usize>,
    filing_date: Option<usize>,
    abstract_text: Option<usize>,
    assignee_name: Option<usize>,
    assignee_country: Option<usize>,
    assignee_state: Option<usize>,
    cpc: Option<usize>,
    predict_any_ai: Option<usize>,
    ai_scores: Vec<(AiCategory, usize)>,
    forward_citations: Option<usize>,
    market_value: Option<usize>,
}

fn resolve(path: &Path, header: &csv::StringRecord, map: &ColumnMap) -> Result<ResolvedColumns, CorpusError> {
    let find = |name: &str| {
        header.iter().position(|h| h.trim() == name).ok_or_else(|| CorpusError::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    };
    let opt = |name: &Option<String>| name.as_deref().map(find).transpose();
    Ok(ResolvedColumns {
        id: find(&map.id)?,
        grant_date: opt(&map.grant_date)?,
        filing_date: opt(&map.filing_date)?,
        abstract_text: opt(&map.abstract_text)?,
        assignee_name: opt(&map.assignee_name)?,
        assignee_country: opt(&map.assignee_country)?,
        assignee_state: opt(&map.assignee_state)?,
        cpc: opt(&map.cpc)?,
        predict_any_ai: opt(&map.predict_any_ai)?,
        ai_scores: map.ai_scores.iter().map(|(&c, n)| Ok((c, find(n)?))).collect::<Result<_, CorpusError>>()?,
        forward_citations: opt(&map.forward_citations)?,
        market_value: opt(&map.market_value)?,
    })
}

enum RowOutcome {
    Keep(RowFields),
    OutOfRange(String),
}

fn parse_row(rec: &csv::StringRecord, cols: &ResolvedColumns, opts: &IngestOptions) -> Result<RowOutcome, String> {
    let cell = |i: Option<usize>| i.and_then(|i| rec.get(i)).map(str::trim).filter(|s| !s.is_empty());
    let id = cell(Some(cols.id)).ok_or("empty patent id")?.to_string();
    let grant_date = cell(cols.grant_date).map(parse_date).transpose()?;
    if let Some(d) = grant_date {
        if d.year() < opts.min_year || d.year() > opts.max_year {
            return Ok(RowOutcome::OutOfRange(format!("patent {id}: grant year {} outside [{}, {}]", d.year(), opts.min_year, opts.max_year)));
        }
    }
    let mut ai_scores = Vec::new();
    for &(cat, i) in &cols.ai_scores {
        if let Some(s) = cell(Some(i)) {
            let v: f64 = s.parse().map_err(|_| format!("bad AI score {s:?}"))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("AI score {v} outside [0,1]"));
            }
            ai_scores.push((cat, v));
        }
    }
    let market_value = cell(cols.market_value)
        .map(|s| s.parse::<f64>().map_err(|_| format!("bad market value {s:?}")))
        .transpose()?;
    if market_value.is_some_and(|v| !(v >= 0.0 && v.is_finite())) {
        return Err("negative or non-finite market value".into());
    }
    Ok(RowOutcome::Keep(RowFields {
        grant_date,
        filing_date: cell(cols.filing_date).map(parse_date).transpose()?,
        abstract_text: cell(cols.abstract_text).map(str::to_string),
        assignee: cell(cols.assignee_name)
            .map(|n| AssigneeRef::new(n, cell(cols.assignee_country), cell(cols.assignee_state))),
        cpc: cell(cols.cpc).map(split_cpc).unwrap_or_default(),
        ai_scores,
        predict_any_ai: cell(cols.predict_any_ai).map(parse_bool).transpose()?,
        forward_citations: cell(cols.forward_citations)
            .map(|s| s.parse::<u32>().map_err(|_| format!("bad citation count {s:?}")))
            .transpose()?,
        market_value,
        id,
    }))
}

fn read_source(src: &SourceFile, opts: &IngestOptions) -> Result<(Vec<RowFields>, IngestWarnings), CorpusError> {
    let path = src.path.as_path();
    let reader = open_maybe_gz(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(src.delimiter_byte())
        .flexible(true)
        .quoting(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|source| CorpusError::Csv { path: path.to_path_buf(), source })?.clone();
    let cols = resolve(path, &header, &src.columns)?;
    let mut rows = Vec::new();
    let mut warnings = IngestWarnings::default();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                warnings.malformed_rows += 1;
                warnings.note(format!("{}:{line}: {e}", path.display()));
                continue;
            }
        };
        if rec.len() != header.len() {
            warnings.malformed_rows += 1;
            warnings.note(format!("{}:{line}: expected {} fields, found {}", path.display(), header.len(), rec.len()));
            continue;
        }
        match parse_row(&rec, &cols, opts) {
            Ok(RowOutcome::Keep(r)) => rows.push(r),
            Ok(RowOutcome::OutOfRange(msg)) => {
                warnings.out_of_range_rows += 1;
                warnings.note(format!("{}:{line}: {msg}", path.display()));
            }
            Err(msg) => {
                warnings.malformed_rows += 1;
                warnings.note(format!("{}:{line}: {msg}", path.display()));
            }
        }
    }
    Ok((rows, warnings))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutput {
    pub corpus: Corpus,
    pub warnings: IngestWarnings,
}

/// Reads every source (in parallel), then merges rows on patent id in source
/// order. Output is sorted by id and independent of thread scheduling.
pub fn ingest_patents(sources: &[SourceFile], opts: &IngestOptions) -> Result<IngestOutput, CorpusError> {
    if !sources.iter().any(|s| s.columns.grant_date.is_some()) {
        return Err(CorpusError::SchemaIncomplete("grant_date"));
    }
    if !sources.iter().any(|s| s.columns.abstract_text.is_some()) {
        return Err(CorpusError::SchemaIncomplete("abstract"));
    }
    let parsed: Vec<_> = sources.par_iter().map(|s| read_source(s, opts)).collect::<Result<_, _>>()?;

    let mut warnings = IngestWarnings::default();
    let mut partials: BTreeMap<String, Partial> = BTreeMap::new();
    for (rows, w) in parsed {
        warnings.merge(w);
        for row in rows {
            partials.entry(row.id.clone()).or_default().absorb(row)?;
        }
    }

    let mut records = Vec::with_capacity(partials.len());
    for (patent_id, p) in partials {
        let Some(grant_date) = p.grant_date else {
            warnings.missing_grant_date += 1;
            warnings.note(format!("patent {patent_id}: no grant date in any source, dropped"));
            continue;
        };
        if p.abstract_text.is_none() {
            warnings.missing_abstract += 1;
        }
        records.push(PatentRecord {
            patent_id,
            grant_date,
            filing_date: p.filing_date,
            abstract_text: p.abstract_text,
            assignees: p.assignees,
            cpc_codes: p.cpc_codes,
            ai_scores: p.ai_scores,
            predict_any_ai: p.predict_any_ai,
            forward_citations: p.forward_citations.unwrap_or(0),
            market_value_musd1982: p.market_value,
        });
    }
    Ok(IngestOutput { corpus: Corpus::new(records)?, warnings })
}

/// Whitespace-free, uppercase form of a CPC symbol.
pub fn normalize_cpc(code: &str) -> String {
    code.chars().filter(|c| !c.is_whitespace()).flat_map(char::to_uppercase).collect()
}

pub const GREEN_PREFIXES: [&str; 2] = ["Y02", "Y04S"];

pub fn is_green_code(code: &str) -> bool {
    let n = normalize_cpc(code);
    GREEN_PREFIXES.iter().any(|p| n.starts_with(p))
}

pub fn is_green(record: &PatentRecord) -> bool {
    record.cpc_codes.iter().any(|c| is_green_code(c))
}

/// The AIPD flag when present, otherwise any category score at or above 0.5.
pub fn is_ai(record: &PatentRecord) -> Result<bool, CorpusError> {
    if let Some(flag) = record.predict_any_ai {
        return Ok(flag);
    }
    if record.ai_scores.is_empty() {
        return Err(CorpusError::AiLabelsMissing(record.patent_id.clone()));
    }
    Ok(record.ai_scores.values().any(|&s| s >= AI_THRESHOLD))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub green: usize,
    pub ai: usize,
    pub retained: usize,
    /// Records with neither flag nor scores; treated as not AI.
    pub missing_ai_labels: usize,
}

/// Keeps records that are both green and AI.
pub fn build_green_ai_corpus(corpus: &Corpus) -> (Corpus, FilterReport) {
    let mut report = FilterReport { input: corpus.len(), ..Default::default() };
    let mut kept = Vec::new();
    for r in corpus {
        let green = is_green(r);
        let ai = match is_ai(r) {
            Ok(v) => v,
            Err(_) => {
                report.missing_ai_labels += 1;
                false
            }
        };
        report.green += usize::from(green);
        report.ai += usize::from(ai);
        if green && ai {
            kept.push(r.clone());
        }
    }
    report.retained = kept.len();
    if kept.is_empty() {
        log::warn!("green-AI filter retained no records out of {}", report.input);
    }
    (Corpus { records: kept }, report)
}

/// Sidecar written next to `corpus.ndjson`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub records: usize,
    pub with_abstract: usize,
    pub filter: FilterReport,
    pub ingest: IngestWarnings,
    pub year_range: (i32, i32),
    pub provenance: Vec<String>,
}

/// Counts records per (patent, assignee) pair, used by geography tables.
pub fn assignee_pairs(corpus: &Corpus) -> impl Iterator<Item = (&PatentRecord, &AssigneeRef)> {
    corpus.iter().flat_map(|r| r.assignees.iter().map(move |a| (r, a)))
}

/// Distinct assignee names in a record, so a name listed twice (for two
/// locations) is credited once per patent.
pub fn distinct_assignee_names(record: &PatentRecord) -> BTreeSet<&str> {
    record.assignees.iter().map(|a| a.name.as_str()).collect()
}

/// Map from patent id to row index for aligning external per-patent data.
pub fn id_index(corpus: &Corpus) -> HashMap<&str, usize> {
    corpus.iter().enumerate().map(|(i, r)| (r.patent_id.as_str(), i)).collect()
}
