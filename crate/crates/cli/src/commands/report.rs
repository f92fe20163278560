use std::collections::HashMap;

use greenai_core::analytics::{
    classification_tables, geography_tables, overall_leaderboard, rolling_mean, window_leaderboard, yearly_counts, yearly_counts_by,
    Leaderboard, ShareDenominator, YearSeries,
};
use serde::Serialize;

use super::impact::{compute_impact, ScatterRow, SCATTER_FILE};
use super::{load_corpus, read_labels, read_topics, LABELS_FILE, TOPICS_FILE};
use crate::config::LoadedConfig;
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, StageDir};
use crate::svg::{bar_chart, bubble_chart, line_chart, Bubble, Series};

#[derive(Serialize)]
struct YearRow {
    year: i32,
    count: f64,
    rolling_mean: f64,
}

#[derive(Serialize)]
struct LeaderRowOut<'a> {
    scope: &'a str,
    rank: usize,
    assignee: &'a str,
    count: u64,
    share_pct: f64,
    country: &'a str,
}

#[derive(Serialize)]
struct ConcentrationRow<'a> {
    scope: &'a str,
    n_assignees: usize,
    patents_with_assignee: u64,
    assignee_credits: u64,
    gini: Option<f64>,
    top_k: usize,
    top_k_share_pct: Option<f64>,
    denominator: ShareDenominator,
}

#[derive(Serialize)]
struct TopicTableRow<'a> {
    topic_id: usize,
    patent_count: usize,
    share_pct: f64,
    top_words: String,
    macro_id: u32,
    macro_label: &'a str,
}

#[derive(Serialize)]
struct TrendRow {
    topic_id: usize,
    year: i32,
    count: f64,
    rolling_mean: f64,
}

fn table<T: Serialize>(stage: &mut StageDir, stem: &str, rows: &[T]) -> Result<()> {
    stage.write_csv(&format!("{stem}.csv"), rows)?;
    stage.write_json(&format!("{stem}.json"), rows)
}

fn year_rows(series: &YearSeries, window: usize) -> Result<Vec<YearRow>> {
    let smooth = rolling_mean(&series.values, window)?;
    Ok(series.years().zip(&series.values).zip(smooth).map(|((year, &count), rolling_mean)| YearRow { year, count, rolling_mean }).collect())
}

/// Descriptive tables and figures over the corpus and the fitted topics.
pub fn cmd_report(cfg: &LoadedConfig) -> Result<Manifest> {
    let c = &cfg.config;
    let a = &c.analytics;
    let mut stage = StageDir::create(&c.out, "report")?;
    let corpus = load_corpus(&mut stage)?;
    let labels = read_labels(&stage.require_upstream("fit", LABELS_FILE)?)?;
    let topics = read_topics(&stage.require_upstream("fit", TOPICS_FILE)?)?;
    let basis = a.leaderboard.basis;

    // Yearly volume.
    let series = yearly_counts(corpus.iter(), basis, a.year_range);
    let range = a.year_range.unwrap_or((series.first_year, series.first_year + series.values.len().saturating_sub(1) as i32));
    let yearly = year_rows(&series, a.rolling_window)?;
    table(&mut stage, "yearly", &yearly)?;
    let fig1 = line_chart(
        "Green AI patents per year",
        "year",
        "patents",
        &[
            Series { name: "annual".into(), points: yearly.iter().map(|r| (r.year as f64, r.count)).collect(), dashed: false },
            Series {
                name: format!("{}-year mean", a.rolling_window),
                points: yearly.iter().map(|r| (r.year as f64, r.rolling_mean)).collect(),
                dashed: true,
            },
        ],
    );
    stage.write_bytes("fig1_yearly.svg", fig1.as_bytes())?;

    // Leaderboards and concentration.
    let mut boards: Vec<Leaderboard> = a.windows.iter().map(|w| window_leaderboard(&corpus, *w, a.top_k, &a.leaderboard)).collect();
    boards.push(overall_leaderboard(&corpus, a.top_k, &a.leaderboard));
    let leader_rows: Vec<LeaderRowOut> = boards
        .iter()
        .flat_map(|b| {
            b.rows.iter().map(move |r| LeaderRowOut {
                scope: &b.scope,
                rank: r.rank,
                assignee: &r.assignee,
                count: r.count,
                share_pct: r.share_pct,
                country: &r.country,
            })
        })
        .collect();
    table(&mut stage, "leaderboards", &leader_rows)?;
    let conc: Vec<ConcentrationRow> = boards
        .iter()
        .map(|b| ConcentrationRow {
            scope: &b.scope,
            n_assignees: b.n_assignees,
            patents_with_assignee: b.patents_with_assignee,
            assignee_credits: b.assignee_credits,
            gini: b.gini,
            top_k: a.top_k,
            top_k_share_pct: b.top_share_pct,
            denominator: b.denominator,
        })
        .collect();
    table(&mut stage, "concentration", &conc)?;

    // Geography and classification.
    let geo = geography_tables(&corpus);
    table(&mut stage, "countries", &geo.countries)?;
    table(&mut stage, "us_states", &geo.us_states)?;
    let bars: Vec<(String, f64)> = geo.countries.iter().take(10).map(|r| (r.key.clone(), r.pct)).collect();
    stage.write_bytes("fig2_countries.svg", bar_chart("Assignee countries", "% of assignee entries", &bars).as_bytes())?;
    let cls = classification_tables(&corpus);
    table(&mut stage, "cpc_subclasses", &cls.cpc)?;
    table(&mut stage, "ai_categories", &cls.ai)?;

    // Topics.
    let fitted = labels.len().max(1) as f64;
    let topic_rows: Vec<TopicTableRow> = topics
        .topics
        .iter()
        .map(|t| TopicTableRow {
            topic_id: t.topic_id,
            patent_count: t.patent_count,
            share_pct: 100.0 * t.patent_count as f64 / fitted,
            top_words: t.label(usize::MAX),
            macro_id: t.macro_id,
            macro_label: &t.macro_label,
        })
        .collect();
    table(&mut stage, "topic_table", &topic_rows)?;

    let topic_of: HashMap<&str, i32> = labels.iter().map(|l| (l.doc_id.as_str(), l.topic_id)).collect();
    let by_topic = yearly_counts_by(corpus.iter(), basis, range, |_, r| {
        topic_of.get(r.patent_id.as_str()).copied().filter(|&t| t >= 0).map(|t| t as usize)
    });
    let mut trends = Vec::new();
    for (&topic_id, s) in &by_topic {
        for row in year_rows(s, a.rolling_window)? {
            trends.push(TrendRow { topic_id, year: row.year, count: row.count, rolling_mean: row.rolling_mean });
        }
    }
    table(&mut stage, "topic_trends", &trends)?;

    let scatter = scatter_rows(cfg, &mut stage, &corpus, &labels, &topics)?;
    table(&mut stage, "impact_scatter", &scatter)?;

    if topics.n_topics == 0 {
        log::warn!("the fitted model has no topics; topic figures skipped");
        return stage.finish(cfg);
    }
    let bubbles: Vec<Bubble> = topics
        .topics
        .iter()
        .map(|t| Bubble { label: t.topic_id.to_string(), x: t.centroid_2d[0], y: t.centroid_2d[1], radius: t.bubble_radius, group: t.macro_id as usize })
        .collect();
    stage.write_bytes("fig3_topic_map.svg", bubble_chart("Topic centroids", "x", "y", &bubbles).as_bytes())?;
    let lines: Vec<Series> = by_topic
        .iter()
        .map(|(&k, s)| {
            let smooth = rolling_mean(&s.values, a.rolling_window).expect("validated window");
            Series { name: format!("topic {k}"), points: s.years().map(f64::from).zip(smooth).collect(), dashed: false }
        })
        .collect();
    let title = format!("Patents per topic, {}-year rolling mean", a.rolling_window);
    stage.write_bytes("fig4_topic_trends.svg", line_chart(&title, "year", "patents", &lines).as_bytes())?;

    let valued: Vec<&ScatterRow> = scatter.iter().filter(|r| r.topic_id >= 0 && r.mean_value.is_some()).collect();
    if valued.is_empty() {
        log::warn!("no topic has valued patents; impact figure skipped");
    } else {
        let top = valued.iter().map(|r| r.count).max().unwrap_or(1) as f64;
        let bubbles: Vec<Bubble> = valued
            .iter()
            .map(|r| Bubble {
                label: r.topic_id.to_string(),
                x: r.mean_citations,
                y: r.mean_value.expect("filtered"),
                radius: 30.0 * (r.count as f64 / top).sqrt(),
                group: r.macro_id.unwrap_or(0) as usize,
            })
            .collect();
        let fig5 = bubble_chart("Topic impact", "mean forward citations", "mean market value (million 1982 USD)", &bubbles);
        stage.write_bytes("fig5_impact.svg", fig5.as_bytes())?;
    }
    stage.finish(cfg)
}

/// The impact stage's scatter when it has run, otherwise computed from the
/// values already present in the corpus.
fn scatter_rows(
    cfg: &LoadedConfig,
    stage: &mut StageDir,
    corpus: &greenai_core::corpus::Corpus,
    labels: &[super::LabelRow],
    topics: &super::TopicsFile,
) -> Result<Vec<ScatterRow>> {
    if stage.root.join("impact").join(crate::manifest::MANIFEST).exists() {
        let path = stage.require_upstream("impact", SCATTER_FILE)?;
        let mut rdr = csv::Reader::from_path(&path)?;
        return rdr.deserialize().collect::<std::result::Result<_, _>>().map_err(CliError::from);
    }
    Ok(compute_impact(corpus, labels, topics, cfg.config.valuation.winsorize)?.1)
}
