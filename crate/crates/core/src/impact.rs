//! Citation and market-value impact per topic, and the truncated-normal
//! patent valuation filter.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::corpus::{Corpus, PatentRecord};

#[derive(Debug, Error)]
pub enum ImpactError {
    #[error("invalid valuation parameter: {0}")]
    InvalidParams(String),
    #[error("invalid valuation input: {0}")]
    InvalidInput(String),
    #[error("valuation file lists patent {0} more than once")]
    DuplicateId(String),
    #[error("valuation file: {0}")]
    Csv(#[from] csv::Error),
    #[error("valuation file: non-finite value for patent {0}")]
    NonFinite(String),
    #[error("{labels} labels for {records} records")]
    LengthMismatch { labels: usize, records: usize },
}

/// Average grant rate used to scale up grant-day returns.
pub const DEFAULT_PI_BAR: f64 = 0.56;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuationParams {
    #[serde(default = "default_pi_bar")]
    pub pi_bar: f64,
    /// Signal-to-noise ratio of grant-day returns.
    pub delta: f64,
    /// Idiosyncratic return volatility.
    pub sigma_eps: f64,
}

fn default_pi_bar() -> f64 {
    DEFAULT_PI_BAR
}

impl ValuationParams {
    pub fn new(pi_bar: f64, delta: f64, sigma_eps: f64) -> Result<Self, ImpactError> {
        let p = ValuationParams { pi_bar, delta, sigma_eps };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ImpactError> {
        if !(0.0..1.0).contains(&self.pi_bar) {
            return Err(ImpactError::InvalidParams(format!("pi_bar {} outside [0, 1)", self.pi_bar)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(ImpactError::InvalidParams(format!("delta {} outside (0, 1]", self.delta)));
        }
        if !(self.sigma_eps > 0.0 && self.sigma_eps.is_finite()) {
            return Err(ImpactError::InvalidParams(format!("sigma_eps {} must be positive", self.sigma_eps)));
        }
        Ok(())
    }

    /// `1 / (1 - pi_bar)`.
    pub fn grant_rate_factor(&self) -> f64 {
        1.0 / (1.0 - self.pi_bar)
    }
}

/// Above this `z` the hazard term comes from a continued fraction.
const CF_SWITCH: f64 = 8.0;
const CF_TERMS: usize = 200;

/// `λ(z) − z` with `λ(z) = φ(z) / (1 − Φ(z))`, the inverse Mills ratio.
///
/// For large `z` the difference is evaluated as the continued fraction
/// `1 / (z + 2 / (z + 3 / (z + ...)))`, which avoids both the 0/0 of the
/// direct ratio and the cancellation in the subtraction.
pub fn hazard_excess(z: f64) -> f64 {
    if z > CF_SWITCH {
        let mut t = 0.0;
        for k in (2..=CF_TERMS).rev() {
            t = k as f64 / (z + t);
        }
        1.0 / (z + t)
    } else {
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let sf = 0.5 * erfc(z / std::f64::consts::SQRT_2);
        pdf / sf - z
    }
}

/// `E[v | R] = δR + √δ σ φ(z) / (1 − Φ(z))`, `z = −√δ R / σ`: the mean of a
/// normal with mean `δR` and variance `δσ²` truncated to positive values.
pub fn filtered_expectation(r: f64, params: &ValuationParams) -> f64 {
    let s = params.delta.sqrt() * params.sigma_eps;
    let z = -params.delta.sqrt() * r / params.sigma_eps;
    // δR = −s z, so the sum is s (λ(z) − z). The max guards the last ulp
    // when the hazard term underflows.
    (s * hazard_excess(z)).max(params.delta * r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuationInput {
    /// Idiosyncratic return around the grant date.
    pub r: f64,
    /// Patents granted to the firm on the same day.
    pub n_same_day: u32,
    /// Market capitalization the day before grant, million USD.
    pub market_cap: f64,
}

/// `ξ = 1/(1 − π̄) · 1/N · E[v | R] · M`.
pub fn patent_value(input: &ValuationInput, params: &ValuationParams) -> Result<f64, ImpactError> {
    params.validate()?;
    if input.n_same_day == 0 {
        return Err(ImpactError::InvalidInput("same-day grant count must be >= 1".into()));
    }
    if !(input.market_cap > 0.0 && input.market_cap.is_finite()) {
        return Err(ImpactError::InvalidInput(format!("market cap {} must be positive", input.market_cap)));
    }
    if !input.r.is_finite() {
        return Err(ImpactError::InvalidInput("return must be finite".into()));
    }
    Ok(value_from_expectation(filtered_expectation(input.r, params), input.n_same_day, input.market_cap, params.pi_bar))
}

/// The ξ arithmetic for a given filtered expectation.
pub fn value_from_expectation(expectation: f64, n_same_day: u32, market_cap: f64, pi_bar: f64) -> f64 {
    expectation * market_cap / (f64::from(n_same_day) * (1.0 - pi_bar))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttachReport {
    pub file_rows: usize,
    pub matched: usize,
    /// File rows whose patent is not in the corpus.
    pub unmatched_rows: usize,
    /// Share of corpus patents that received a value.
    pub coverage: f64,
}

/// Reads CSV `patent_id,xi_musd1982`.
pub fn read_valuations<R: Read>(reader: R) -> Result<BTreeMap<String, f64>, ImpactError> {
    #[derive(Deserialize)]
    struct Row {
        patent_id: String,
        xi_musd1982: f64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<Row>() {
        let row = row?;
        if !row.xi_musd1982.is_finite() {
            return Err(ImpactError::NonFinite(row.patent_id));
        }
        if out.insert(row.patent_id.clone(), row.xi_musd1982).is_some() {
            return Err(ImpactError::DuplicateId(row.patent_id));
        }
    }
    Ok(out)
}

/// Fills `market_value_musd1982` from a valuation table; unmatched
/// patents keep their current value.
pub fn attach_precomputed_values(corpus: &Corpus, values: &BTreeMap<String, f64>) -> (Corpus, AttachReport) {
    let mut matched = 0;
    let records: Vec<PatentRecord> = corpus
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if let Some(&v) = values.get(&r.patent_id) {
                r.market_value_musd1982 = Some(v);
                matched += 1;
            }
            r
        })
        .collect();
    let coverage = if corpus.is_empty() { 0.0 } else { matched as f64 / corpus.len() as f64 };
    let report = AttachReport { file_rows: values.len(), matched, unmatched_rows: values.len() - matched, coverage };
    let corpus = Corpus::new(records).expect("ids unchanged");
    (corpus, report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactSummary {
    /// `-1` for the outlier class.
    pub topic_id: i32,
    pub count: usize,
    pub mean_citations: f64,
    /// Mean over valued patents only; `None` when none is valued.
    pub mean_value: Option<f64>,
    pub valued: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ImpactOptions {
    /// Clamp market values to the `[p, 1 − p]` quantiles of all valued
    /// patents before averaging; `None` keeps raw values.
    pub winsorize: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub topics: Vec<ImpactSummary>,
    pub outliers: Option<ImpactSummary>,
    pub winsor_bounds: Option<(f64, f64)>,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    // Linear interpolation between order statistics.
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Unweighted per-topic means of forward citations and market value.
/// `labels[i]` is the topic of `records[i]`.
pub fn topic_impact(records: &[&PatentRecord], labels: &[i32], n_topics: usize, opts: &ImpactOptions) -> Result<ImpactReport, ImpactError> {
    if records.len() != labels.len() {
        return Err(ImpactError::LengthMismatch { labels: labels.len(), records: records.len() });
    }
    let bounds = match opts.winsorize {
        Some(p) if p > 0.0 && p < 0.5 => {
            let mut v: Vec<f64> = records.iter().filter_map(|r| r.market_value_musd1982).collect();
            v.sort_by(f64::total_cmp);
            (!v.is_empty()).then(|| (quantile(&v, p), quantile(&v, 1.0 - p)))
        }
        Some(p) if p != 0.0 => return Err(ImpactError::InvalidParams(format!("winsorize fraction {p} outside [0, 0.5)"))),
        _ => None,
    };
    // (count, citation sum, valued count, value sum) per class; index 0 is outliers.
    let mut acc = vec![(0usize, 0.0f64, 0usize, 0.0f64); n_topics + 1];
    for (r, &l) in records.iter().zip(labels) {
        let slot = if l < 0 { 0 } else { l as usize + 1 };
        if slot > n_topics {
            return Err(ImpactError::InvalidInput(format!("label {l} outside 0..{n_topics}")));
        }
        let a = &mut acc[slot];
        a.0 += 1;
        a.1 += f64::from(r.forward_citations);
        if let Some(v) = r.market_value_musd1982 {
            a.2 += 1;
            a.3 += bounds.map_or(v, |(lo, hi)| v.clamp(lo, hi));
        }
    }
    let summary = |topic_id: i32, &(n, cites, valued, value): &(usize, f64, usize, f64)| ImpactSummary {
        topic_id,
        count: n,
        mean_citations: if n > 0 { cites / n as f64 } else { 0.0 },
        mean_value: (valued > 0).then(|| value / valued as f64),
        valued,
        coverage: if n > 0 { valued as f64 / n as f64 } else { 0.0 },
    };
    Ok(ImpactReport {
        topics: (0..n_topics).map(|k| summary(k as i32, &acc[k + 1])).collect(),
        outliers: (acc[0].0 > 0).then(|| summary(-1, &acc[0])),
        winsor_bounds: bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use greenai_fixtures as fx;
    use proptest::prelude::*;

    fn params(delta: f64, sigma: f64) -> ValuationParams {
        ValuationParams::new(DEFAULT_PI_BAR, delta, sigma).unwrap()
    }

    #[test]
    fn value_at_zero_return() {
        let e = filtered_expectation(0.0, &params(0.25, 0.02));
        let phi0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((e - 0.02 * phi0).abs() < 1e-15);
        assert!((e - 0.0079788).abs() < 1e-7);
    }

    #[test]
    fn large_positive_return_tends_to_signal() {
        let p = params(0.3, 0.02);
        for r in [1.0, 10.0, 1e3] {
            assert!((filtered_expectation(r, &p) / (p.delta * r) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn matches_quadrature_oracle() {
        for delta in [0.1, 0.3, 0.9] {
            for sigma in [0.01, 0.05] {
                for i in 0..=100 {
                    let r = -0.5 + i as f64 * 0.01;
                    let p = params(delta, sigma);
                    let got = filtered_expectation(r, &p);
                    let want = fx::truncated_normal_mean_quadrature(delta * r, delta.sqrt() * sigma);
                    assert!((got - want).abs() <= 1e-6, "δ={delta} σ={sigma} R={r}: {got} vs {want}");
                }
            }
        }
        let got = filtered_expectation(0.05, &params(0.3, 0.02));
        let want = fx::truncated_normal_mean_quadrature(0.3 * 0.05, 0.3f64.sqrt() * 0.02);
        assert!((got - want).abs() <= 1e-6);
    }

    #[test]
    fn hazard_excess_reference_values() {
        // 40-digit reference values of φ(z)/(1 − Φ(z)) − z.
        let cases = [(8.0, 0.121_368_112_236_112_68), (0.0, 0.797_884_560_802_865_4), (-3.0, 3.004_437_839_042_125_7), (20.0, 0.049_753_068_527_850_54)];
        for (z, want) in cases {
            let got = hazard_excess(z);
            assert!((got - want).abs() / want < 1e-8, "z={z}: {got} vs {want}");
        }
        assert!((hazard_excess(1e6) - 1e-6).abs() < 1e-17);
    }

    #[test]
    fn xi_identities() {
        let xi = value_from_expectation(0.01, 1, 100.0, 0.56);
        assert!((xi - 0.01 * 100.0 / 0.44).abs() < 1e-15);
        assert!((xi - 2.2727).abs() < 1e-4);
        assert_eq!(value_from_expectation(0.01, 2, 100.0, 0.56), xi / 2.0);
        assert_eq!(value_from_expectation(0.01, 1, 100.0, 0.0), 1.0);
        assert!((params(0.5, 0.1).grant_rate_factor() - 1.0 / 0.44).abs() < 1e-15);
        let input = ValuationInput { r: 0.01, n_same_day: 3, market_cap: 500.0 };
        assert!(patent_value(&input, &params(0.5, 0.02)).unwrap() > 0.0);
        assert!(patent_value(&ValuationInput { n_same_day: 0, ..input }, &params(0.5, 0.02)).is_err());
    }

    #[test]
    fn param_validation() {
        assert!(ValuationParams::new(1.0, 0.5, 0.1).is_err());
        assert!(ValuationParams::new(0.56, 0.0, 0.1).is_err());
        assert!(ValuationParams::new(0.56, 1.0, 0.0).is_err());
        assert!(ValuationParams::new(0.0, 1.0, 0.1).is_ok());
    }

    fn rec(id: &str, cites: u32, value: Option<f64>) -> PatentRecord {
        let mut r = PatentRecord::new(id, NaiveDate::from_ymd_opt(2010, 1, 1).unwrap());
        r.forward_citations = cites;
        r.market_value_musd1982 = value;
        r
    }

    #[test]
    fn attach_values() {
        let corpus = Corpus::new(vec![rec("1", 0, None), rec("2", 0, None), rec("3", 0, None), rec("4", 0, None)]).unwrap();
        let file = "patent_id,xi_musd1982\n2,5.5\n4,1.0\n99,3.0\n";
        let (c, rep) = attach_precomputed_values(&corpus, &read_valuations(file.as_bytes()).unwrap());
        assert_eq!(rep.coverage, 0.5);
        assert_eq!(rep.unmatched_rows, 1);
        assert_eq!(c.get("2").unwrap().market_value_musd1982, Some(5.5));
        let (_, empty) = attach_precomputed_values(&corpus, &read_valuations("patent_id,xi_musd1982\n".as_bytes()).unwrap());
        assert_eq!(empty.coverage, 0.0);
        assert!(matches!(read_valuations("patent_id,xi_musd1982\n1,2\n1,3\n".as_bytes()), Err(ImpactError::DuplicateId(_))));
    }

    #[test]
    fn per_topic_means() {
        let rs = [rec("1", 0, Some(2.0)), rec("2", 10, None), rec("3", 4, None), rec("4", 1, Some(9.0))];
        let refs: Vec<&PatentRecord> = rs.iter().collect();
        let rep = topic_impact(&refs, &[0, 0, 1, -1], 2, &ImpactOptions::default()).unwrap();
        assert_eq!(rep.topics[0].mean_citations, 5.0);
        assert_eq!(rep.topics[0].mean_value, Some(2.0));
        assert_eq!(rep.topics[0].coverage, 0.5);
        assert_eq!(rep.topics[1].mean_value, None);
        assert_eq!(rep.topics[1].count, 1);
        assert_eq!(rep.outliers.as_ref().unwrap().mean_value, Some(9.0));
    }

    #[test]
    fn winsorized_means() {
        let rs: Vec<PatentRecord> = (0..11).map(|i| rec(&i.to_string(), 0, Some(if i == 10 { 1000.0 } else { i as f64 }))).collect();
        let refs: Vec<&PatentRecord> = rs.iter().collect();
        let labels = vec![0; 11];
        let raw = topic_impact(&refs, &labels, 1, &ImpactOptions::default()).unwrap();
        let w = topic_impact(&refs, &labels, 1, &ImpactOptions { winsorize: Some(0.1) }).unwrap();
        assert_eq!(w.winsor_bounds, Some((1.0, 9.0)));
        assert!(w.topics[0].mean_value.unwrap() < raw.topics[0].mean_value.unwrap());
        assert!(topic_impact(&refs, &labels, 1, &ImpactOptions { winsorize: Some(0.7) }).is_err());
    }

    #[test]
    fn monotone_on_random_pairs() {
        let mut rng = fx::rng(10);
        for _ in 0..10_000 {
            let p = params(rand::Rng::gen_range(&mut rng, 0.01..=1.0), rand::Rng::gen_range(&mut rng, 0.001..0.2));
            let a: f64 = rand::Rng::gen_range(&mut rng, -1.0..1.0);
            let b: f64 = rand::Rng::gen_range(&mut rng, -1.0..1.0);
            if a == b {
                continue;
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            assert!(filtered_expectation(lo, &p) < filtered_expectation(hi, &p), "{lo} {hi} {p:?}");
        }
    }

    proptest! {
        #[test]
        fn positive_and_above_signal(r in -2.0f64..2.0, delta in 0.01f64..=1.0, sigma in 0.001f64..0.3) {
            let p = params(delta, sigma);
            let e = filtered_expectation(r, &p);
            prop_assert!(e > 0.0);
            prop_assert!(e >= delta * r);
        }

        #[test]
        fn xi_linear_in_cap_inverse_in_count(e in 1e-6f64..1.0, m in 1.0f64..1e5, n in 1u32..50) {
            let base = value_from_expectation(e, n, m, DEFAULT_PI_BAR);
            prop_assert!((value_from_expectation(e, n, 3.0 * m, DEFAULT_PI_BAR) - 3.0 * base).abs() <= 1e-12 * base);
            prop_assert!((value_from_expectation(e, 2 * n, m, DEFAULT_PI_BAR) - base / 2.0).abs() <= 1e-12 * base);
        }
    }
}
