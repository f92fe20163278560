#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use greenai_fixtures as fx;
use rand::Rng;

pub const ASSIGNEES: [(&str, &str, &str); 6] = [
    ("Acme Energy", "US", "CA"),
    ("Borealis Grid", "US", "TX"),
    ("Chiyoda Motors", "JP", ""),
    ("Dresden Power", "DE", ""),
    ("Ellis Analytics", "US", "NY"),
    ("Fjord Systems", "NO", ""),
];

pub struct Fixture {
    pub dir: PathBuf,
    pub config: PathBuf,
    /// Planted topic per green-AI patent id.
    pub planted: Vec<(String, i64)>,
}

/// Writes a synthetic patent source set: `n_docs` green-AI patents drawn
/// from planted vocabularies, plus decoys that the corpus filter must drop.
pub fn write_fixture(dir: &Path, n_docs: usize, seed: u64, extra_config: &str) -> Fixture {
    let c = fx::planted_corpus(n_docs, 3, 30, 40, seed);
    let mut rng = fx::rng(seed + 1);
    let mut patents = String::from("patent_id,grant_date,filing_date,abstract,cpc,predict50_any_ai,citations\n");
    let mut owners = String::from("patent_id,assignee,country,state\n");
    let mut values = String::from("patent_id,xi_musd1982\n");
    let mut returns = String::from("patent_id,r,n_same_day,market_cap\n");
    let mut planted = Vec::new();
    for (i, (text, &label)) in c.abstracts.iter().zip(&c.labels).enumerate() {
        let id = format!("P{:06}", i + 1);
        let year = rng.gen_range(1985..2021);
        let cpc = ["Y02E 10/72;G06N 3/08", "Y02T 10/40", "Y04S 10/50;Y02D 10/00"][label as usize];
        let cites = rng.gen_range(0..5) + 5 * label as u32;
        let _ = writeln!(patents, "{id},{year}-03-15,{}-06-01,\"{text}\",{cpc},1,{cites}", year - 2);
        let (name, country, state) = ASSIGNEES[rng.gen_range(0..ASSIGNEES.len())];
        let _ = writeln!(owners, "{id},{name},{country},{state}");
        if rng.gen_bool(0.2) {
            let (name, country, state) = ASSIGNEES[(i + 1) % ASSIGNEES.len()];
            let _ = writeln!(owners, "{id},{name},{country},{state}");
        }
        if i % 2 == 0 {
            let _ = writeln!(values, "{id},{}", 1.0 + 4.0 * label as f64 + rng.gen_range(0.0..1.0));
        }
        if i % 3 == 0 {
            let _ = writeln!(returns, "{id},{},{},{}", rng.gen_range(-0.05..0.05), rng.gen_range(1..4), rng.gen_range(100.0..5000.0));
        }
        planted.push((id, label));
    }
    // Decoys: green but not AI, AI but not green.
    for j in 0..40 {
        let id = format!("Q{j:06}");
        let (cpc, ai) = if j % 2 == 0 { ("Y02E 10/72", 0) } else { ("G06N 3/08", 1) };
        let _ = writeln!(patents, "{id},2001-01-01,1999-01-01,\"unrelated filler text about decoy matters\",{cpc},{ai},3");
    }
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("patents.csv"), patents).unwrap();
    std::fs::write(dir.join("assignees.csv"), owners).unwrap();
    std::fs::write(dir.join("values.csv"), values).unwrap();
    std::fs::write(dir.join("returns.csv"), returns).unwrap();
    let config = format!(
        r#"seed = 11
out = "out"

[paths]
valuations = "values.csv"

[[paths.sources]]
path = "patents.csv"
[paths.sources.columns]
id = "patent_id"
grant_date = "grant_date"
filing_date = "filing_date"
abstract = "abstract"
cpc = "cpc"
predict_any_ai = "predict50_any_ai"
forward_citations = "citations"

[[paths.sources]]
path = "assignees.csv"
[paths.sources.columns]
id = "patent_id"
assignee_name = "assignee"
assignee_country = "country"
assignee_state = "state"

[text]
min_df = 2
fallback_dim = 64

[layout]
n_neighbors = 15

[clustering]
min_cluster_size = 30

[grid]
n_neighbors = [10, 15]
min_dist = [0.1]
min_cluster_size = [30]
n_components = [2]

[selection]
min_topics = 2
max_topics = 10
max_outlier_pct = 40.0

{extra_config}
"#
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    Fixture { dir: dir.to_path_buf(), config: path, planted }
}

pub fn greenai(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greenai")).args(args).output().expect("binary runs")
}

pub fn run_stage(cfg: &Path, stage: &str, extra: &[&str]) -> Output {
    let mut args = vec![stage, "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = greenai(&args);
    assert!(out.status.success(), "{stage} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Topic per document from `fit/labels.csv`.
pub fn read_labels(out: &Path) -> Vec<(String, i32)> {
    let mut rdr = csv::Reader::from_path(out.join("fit/labels.csv")).unwrap();
    rdr.records().map(|r| {
        let r = r.unwrap();
        (r[0].to_string(), r[1].parse().unwrap())
    }).collect()
}
