//! Weighted FNC-1 scoring, confusion matrices and report rendering.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{load_stances, Stance, StanceInstance};
use crate::error::{Error, Result};

/// Credit for a correct related/unrelated decision.
pub const RELATEDNESS_CREDIT: f64 = 0.25;
/// Additional credit for the exact label of a related pair.
pub const RELATED_LABEL_CREDIT: f64 = 0.75;

/// Rows are true labels, columns predictions, both in `Stance::ALL` order.
pub type ConfusionMatrix = [[u64; 4]; 4];

fn check_lengths(truth: &[Stance], pred: &[Stance]) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::Dimension {
            context: "truth/prediction lists",
            expected: truth.len(),
            found: pred.len(),
        });
    }
    Ok(())
}

/// Weighted score and the best attainable score for `truth`.
pub fn fnc_score(truth: &[Stance], pred: &[Stance]) -> Result<(f64, f64)> {
    check_lengths(truth, pred)?;
    if truth.is_empty() {
        return Err(Error::Empty("score input"));
    }
    let mut score = 0.0;
    let mut max_score = 0.0;
    for (&t, &p) in truth.iter().zip(pred) {
        max_score += RELATEDNESS_CREDIT;
        if t.is_related() {
            max_score += RELATED_LABEL_CREDIT;
        }
        if t.is_related() == p.is_related() {
            score += RELATEDNESS_CREDIT;
        }
        if t.is_related() && t == p {
            score += RELATED_LABEL_CREDIT;
        }
    }
    Ok((score, max_score))
}

pub fn confusion(truth: &[Stance], pred: &[Stance]) -> Result<ConfusionMatrix> {
    check_lengths(truth, pred)?;
    let mut m = [[0u64; 4]; 4];
    for (&t, &p) in truth.iter().zip(pred) {
        m[t.index()][p.index()] += 1;
    }
    Ok(m)
}

/// Trace over total; 0 for an empty matrix.
pub fn accuracy(m: &ConfusionMatrix) -> f64 {
    let total: u64 = m.iter().flatten().sum();
    if total == 0 {
        return 0.0;
    }
    let diag: u64 = (0..4).map(|i| m[i][i]).sum();
    diag as f64 / total as f64
}

/// Recall of one class (0 when the class is absent from the truth).
pub fn recall(m: &ConfusionMatrix, class: Stance) -> f64 {
    let row = &m[class.index()];
    let total: u64 = row.iter().sum();
    if total == 0 {
        0.0
    } else {
        row[class.index()] as f64 / total as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub score: f64,
    pub max_score: f64,
    pub relative: f64,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
}

impl ScoreReport {
    pub fn new(truth: &[Stance], pred: &[Stance]) -> Result<Self> {
        let (score, max_score) = fnc_score(truth, pred)?;
        let confusion = confusion(truth, pred)?;
        Ok(ScoreReport {
            score,
            max_score,
            relative: score / max_score,
            accuracy: accuracy(&confusion),
            confusion,
        })
    }

    pub fn recall(&self, class: Stance) -> f64 {
        recall(&self.confusion, class)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Tsv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "tsv" => Ok(ReportFormat::Tsv),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

pub fn render_report(r: &ScoreReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Text => {
            out.push_str("Confusion matrix (rows: true, columns: predicted)\n");
            let _ = write!(out, "{:<10}", "");
            for s in Stance::ALL {
                let _ = write!(out, " {:>10}", s.as_str());
            }
            out.push('\n');
            for (s, row) in Stance::ALL.iter().zip(&r.confusion) {
                let _ = write!(out, "{:<10}", s.as_str());
                for &c in row {
                    let _ = write!(out, " {:>10}", thousands(c));
                }
                out.push('\n');
            }
            let _ = writeln!(out, "Accuracy: {:.3}", r.accuracy);
            let _ = writeln!(
                out,
                "FNC-1 score: {} out of {} ({:.2}%)",
                r.score,
                r.max_score,
                100.0 * r.relative
            );
        }
        ReportFormat::Json => {
            out = serde_json::to_string_pretty(r).expect("score report serializes");
            out.push('\n');
        }
        ReportFormat::Tsv => {
            out.push_str("true\\predicted");
            for s in Stance::ALL {
                let _ = write!(out, "\t{s}");
            }
            out.push('\n');
            for (s, row) in Stance::ALL.iter().zip(&r.confusion) {
                out.push_str(s.as_str());
                for &c in row {
                    let _ = write!(out, "\t{c}");
                }
                out.push('\n');
            }
            out.push('\n');
            let _ = writeln!(out, "metric\tvalue");
            let _ = writeln!(out, "score\t{}", r.score);
            let _ = writeln!(out, "max_score\t{}", r.max_score);
            let _ = writeln!(out, "relative\t{}", r.relative);
            let _ = writeln!(out, "accuracy\t{}", r.accuracy);
        }
    }
    out
}

/// Writes a submission file `Headline,Body ID,Stance`.
pub fn write_predictions(path: impl AsRef<Path>, instances: &[StanceInstance], pred: &[Stance]) -> Result<()> {
    let path = path.as_ref();
    if instances.len() != pred.len() {
        return Err(Error::Dimension {
            context: "prediction rows",
            expected: instances.len(),
            found: pred.len(),
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let io = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    w.write_record(["Headline", "Body ID", "Stance"]).map_err(io)?;
    for (inst, p) in instances.iter().zip(pred) {
        w.write_record([inst.headline.as_str(), &inst.body_id.to_string(), p.as_str()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Scores a submission file against a labeled stances file, row by row.
pub fn score_files(truth: impl AsRef<Path>, pred: impl AsRef<Path>) -> Result<ScoreReport> {
    let truth = load_stances(truth, true)?;
    let pred = load_stances(pred, true)?;
    if truth.len() != pred.len() {
        return Err(Error::Dimension {
            context: "truth/prediction files",
            expected: truth.len(),
            found: pred.len(),
        });
    }
    if let Some((t, _)) = truth.iter().zip(&pred).find(|(t, p)| t.body_id != p.body_id) {
        return Err(Error::InvalidArgument(format!(
            "prediction row {} does not match the truth file (body id {})",
            t.pair_id + 1,
            t.body_id
        )));
    }
    let t: Vec<Stance> = truth.iter().map(|i| i.stance.unwrap()).collect();
    let p: Vec<Stance> = pred.iter().map(|i| i.stance.unwrap()).collect();
    ScoreReport::new(&t, &p)
}

/// Flush helper for callers writing reports to disk.
pub fn write_report(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
