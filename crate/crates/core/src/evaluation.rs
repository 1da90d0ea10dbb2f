//! Review ingestion, Answer-Ranking (AR) scores and per-system summaries.
//!
//! Each reviewer gives an overall score `i` and a prediction `j` of what
//! others will give; `M[i][j]` counts reviewers per pair. A ranking `π`
//! orders the scores 1..=10 and is worth `Σ M[i][j]²` over pairs where `i`
//! is ranked at or before `j`. Only two families of rankings are considered:
//!
//! * A, centre `n`: `n, n+1, n-1, n+2, n-2, ...`, worth score `n + 0.25`;
//! * B, centre `n`: `n, n-1, n+1, n-2, n+2, ...`, worth score `n + 0.75`;
//!
//! for `n` in 1..=9, skipping values outside 1..=10. The AR score is the
//! score of the best ranking, averaged over ties.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const REVIEW_COLUMNS: [&str; 8] =
    ["reviewer_id", "poem_id", "format", "informativeness", "relevance", "aesthetics", "overall", "predicted"];
pub const MANIFEST_COLUMNS: [&str; 4] = ["poem_id", "system", "title", "format"];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{file}: missing column {column:?}")]
    MissingColumn { file: &'static str, column: &'static str },
    #[error("{file}, line {line}: {message}")]
    Row { file: &'static str, line: u64, message: String },
    #[error("{file}: {message}")]
    Csv { file: &'static str, message: String },
    #[error("no review records")]
    Empty,
    #[error("records mix poems {0:?} and {1:?}")]
    MixedPoems(String, String),
    #[error("poem {0:?} is not in the manifest")]
    UnknownPoem(String),
    #[error("poem {poem:?} is listed for both {first:?} and {second:?}")]
    ConflictingManifest { poem: String, first: String, second: String },
}

/// One reviewer's scores for one poem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub reviewer_id: String,
    pub poem_id: String,
    /// Format score, 1..=5.
    #[serde(rename = "format")]
    pub format_score: u8,
    pub informativeness: u8,
    pub relevance: u8,
    pub aesthetics: u8,
    /// Own overall score, 1..=10.
    pub overall: u8,
    /// Predicted overall score of other reviewers, 1..=10.
    #[serde(rename = "predicted")]
    pub predicted_overall: u8,
}

impl ReviewRecord {
    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            ("format", self.format_score, 5),
            ("informativeness", self.informativeness, 5),
            ("relevance", self.relevance, 5),
            ("aesthetics", self.aesthetics, 5),
            ("overall", self.overall, 10),
            ("predicted", self.predicted_overall, 10),
        ];
        for (name, v, hi) in checks {
            if !(1..=hi).contains(&v) {
                return Err(format!("{name} = {v} is outside 1..={hi}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub poem_id: String,
    pub system: String,
    pub title: String,
    pub format: String,
}

fn read_rows<T, R>(input: R, file: &'static str, columns: &[&'static str]) -> Result<Vec<(u64, T)>, EvalError>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| EvalError::Csv { file, message: e.to_string() })?.clone();
    for &column in columns {
        if !headers.iter().any(|h| h == column) {
            return Err(EvalError::MissingColumn { file, column });
        }
    }
    let mut rows = Vec::new();
    for result in reader.deserialize::<T>() {
        match result {
            Ok(row) => rows.push(row),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(EvalError::Row { file, line, message: e.to_string() });
            }
        }
    }
    // Line numbers for later validation messages; row i sits on line i + 2.
    Ok(rows.into_iter().enumerate().map(|(i, r)| (i as u64 + 2, r)).collect())
}

/// Parses a reviews CSV with the columns in [`REVIEW_COLUMNS`].
pub fn read_reviews<R: Read>(input: R) -> Result<Vec<ReviewRecord>, EvalError> {
    let rows: Vec<(u64, ReviewRecord)> = read_rows(input, "reviews", &REVIEW_COLUMNS)?;
    rows.into_iter()
        .map(|(line, r)| r.validate().map(|()| r).map_err(|message| EvalError::Row { file: "reviews", line, message }))
        .collect()
}

/// Parses a poems manifest CSV with the columns in [`MANIFEST_COLUMNS`].
pub fn read_manifest<R: Read>(input: R) -> Result<Vec<ManifestEntry>, EvalError> {
    Ok(read_rows(input, "manifest", &MANIFEST_COLUMNS)?.into_iter().map(|(_, r)| r).collect())
}

/// `counts[i-1][j-1]` = reviewers choosing `i` and predicting `j`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredictionMatrix {
    pub counts: [[u64; 10]; 10],
}

impl PredictionMatrix {
    /// Count for choice `i` and prediction `j`, both 1-based.
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i - 1][j - 1]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

pub fn build_matrix(records: &[ReviewRecord]) -> Result<PredictionMatrix, EvalError> {
    let first = records.first().ok_or(EvalError::Empty)?;
    let mut m = PredictionMatrix::default();
    for r in records {
        if r.poem_id != first.poem_id {
            return Err(EvalError::MixedPoems(first.poem_id.clone(), r.poem_id.clone()));
        }
        r.validate().map_err(|message| EvalError::Row { file: "reviews", line: 0, message })?;
        m.counts[r.overall as usize - 1][r.predicted_overall as usize - 1] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateRanking {
    pub family: Family,
    pub center: u8,
    /// Scores 1..=10, best first.
    pub order: Vec<u8>,
}

impl CandidateRanking {
    pub fn new(family: Family, center: u8) -> Self {
        let c = i32::from(center);
        let mut order = vec![center];
        for d in 1..10 {
            let steps = match family {
                Family::A => [c + d, c - d],
                Family::B => [c - d, c + d],
            };
            order.extend(steps.into_iter().filter(|v| (1..=10).contains(v)).map(|v| v as u8));
        }
        Self { family, center, order }
    }

    pub fn score_value(&self) -> f64 {
        f64::from(self.center)
            + match self.family {
                Family::A => 0.25,
                Family::B => 0.75,
            }
    }

    /// 0-based position of each score, indexed by `score - 1`.
    fn positions(&self) -> [usize; 10] {
        let mut pos = [0; 10];
        for (p, &v) in self.order.iter().enumerate() {
            pos[v as usize - 1] = p;
        }
        pos
    }
}

/// The 18 rankings: family A then B, centres 1..=9.
pub fn candidate_rankings() -> Vec<CandidateRanking> {
    [Family::A, Family::B].into_iter().flat_map(|f| (1..=9).map(move |n| CandidateRanking::new(f, n))).collect()
}

/// `Σ M[i][j]²` over pairs with `i` ranked at or before `j`.
pub fn ranking_objective(pi: &CandidateRanking, m: &PredictionMatrix) -> u128 {
    let pos = pi.positions();
    let mut total = 0u128;
    for i in 0..10 {
        for j in 0..10 {
            if pos[i] <= pos[j] {
                let c = u128::from(m.counts[i][j]);
                total += c * c;
            }
        }
    }
    total
}

/// AR score of a matrix: the mean score value of all best rankings.
pub fn ar_score_matrix(m: &PredictionMatrix) -> f64 {
    let candidates = candidate_rankings();
    let values: Vec<u128> = candidates.iter().map(|c| ranking_objective(c, m)).collect();
    let best = *values.iter().max().expect("18 candidates");
    let tied: Vec<f64> =
        candidates.iter().zip(&values).filter(|(_, v)| **v == best).map(|(c, _)| c.score_value()).collect();
    tied.iter().sum::<f64>() / tied.len() as f64
}

/// AR score of one poem's reviews.
pub fn ar_score(records: &[ReviewRecord]) -> Result<f64, EvalError> {
    Ok(ar_score_matrix(&build_matrix(records)?))
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    /// Computed from exact integer sums, so the result does not depend on
    /// the order of `values`. A single value has deviation 0.
    pub fn of(values: &[u8]) -> Summary {
        let n = values.len() as i128;
        assert!(n > 0, "summary of no values");
        let sum: i128 = values.iter().map(|&v| i128::from(v)).sum();
        let sq: i128 = values.iter().map(|&v| i128::from(v) * i128::from(v)).sum();
        let mean = sum as f64 / n as f64;
        let sd = if n < 2 { 0.0 } else { ((n * sq - sum * sum) as f64 / (n * (n - 1)) as f64).sqrt() };
        Summary { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemStats {
    pub system: String,
    pub reviews: usize,
    pub poems: usize,
    pub format: Summary,
    pub informativeness: Summary,
    pub relevance: Summary,
    pub aesthetics: Summary,
    pub overall: Summary,
    /// Mean of the per-poem AR scores.
    pub ar_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoemAr {
    pub poem_id: String,
    pub system: String,
    pub ar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub systems: Vec<SystemStats>,
    /// Sorted by poem id.
    pub poems: Vec<PoemAr>,
}

/// Per-system statistics, in order of first appearance in the manifest.
pub fn aggregate_stats(records: &[ReviewRecord], manifest: &[ManifestEntry]) -> Result<EvalReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut system_of: HashMap<&str, &str> = HashMap::new();
    let mut system_order: Vec<&str> = Vec::new();
    for e in manifest {
        if let Some(prev) = system_of.insert(&e.poem_id, &e.system) {
            if prev != e.system {
                return Err(EvalError::ConflictingManifest {
                    poem: e.poem_id.clone(),
                    first: prev.to_string(),
                    second: e.system.clone(),
                });
            }
        }
        if !system_order.contains(&e.system.as_str()) {
            system_order.push(&e.system);
        }
    }
    let mut by_poem: BTreeMap<&str, Vec<ReviewRecord>> = BTreeMap::new();
    for r in records {
        if !system_of.contains_key(r.poem_id.as_str()) {
            return Err(EvalError::UnknownPoem(r.poem_id.clone()));
        }
        by_poem.entry(&r.poem_id).or_default().push(r.clone());
    }
    let mut poems = Vec::new();
    for (poem, rs) in &by_poem {
        poems.push(PoemAr { poem_id: poem.to_string(), system: system_of[poem].to_string(), ar: ar_score(rs)? });
    }
    let mut systems = Vec::new();
    for system in system_order {
        let rs: Vec<&ReviewRecord> = records.iter().filter(|r| system_of[r.poem_id.as_str()] == system).collect();
        if rs.is_empty() {
            continue;
        }
        let col = |f: fn(&ReviewRecord) -> u8| Summary::of(&rs.iter().map(|r| f(r)).collect::<Vec<u8>>());
        let ars: Vec<f64> = poems.iter().filter(|p| p.system == system).map(|p| p.ar).collect();
        systems.push(SystemStats {
            system: system.to_string(),
            reviews: rs.len(),
            poems: ars.len(),
            format: col(|r| r.format_score),
            informativeness: col(|r| r.informativeness),
            relevance: col(|r| r.relevance),
            aesthetics: col(|r| r.aesthetics),
            overall: col(|r| r.overall),
            ar_mean: ars.iter().sum::<f64>() / ars.len() as f64,
        });
    }
    Ok(EvalReport { systems, poems })
}

impl EvalReport {
    /// Summary table as CSV; deviations are sample standard deviations.
    pub fn table_csv(&self) -> String {
        let mut out = String::from(
            "system,reviews,poems,format_mean,format_sd,informativeness_mean,informativeness_sd,\
             relevance_mean,relevance_sd,aesthetics_mean,aesthetics_sd,overall_mean,overall_sd,ar_mean\n",
        );
        for s in &self.systems {
            let _ = write!(out, "{},{},{}", csv_field(&s.system), s.reviews, s.poems);
            for m in [s.format, s.informativeness, s.relevance, s.aesthetics, s.overall] {
                let _ = write!(out, ",{:.4},{:.4}", m.mean, m.sd);
            }
            let _ = writeln!(out, ",{:.4}", s.ar_mean);
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
