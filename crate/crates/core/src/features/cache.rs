use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{quantize, FeatureVector, FEATURE_NAMES, N_FEATURES};
use crate::corpus::Stance;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub pair_id: usize,
    pub stance: Option<Stance>,
    pub features: FeatureVector,
}

fn format_value(v: f64) -> String {
    let v = quantize(v);
    let a = v.abs();
    if v != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Writes `pair_id \t stance \t <features>` rows; unlabeled rows leave the stance empty.
pub fn write_feature_cache(rows: &[FeatureRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    write!(out, "pair_id\tstance").map_err(io)?;
    for name in FEATURE_NAMES {
        write!(out, "\t{name}").map_err(io)?;
    }
    writeln!(out).map_err(io)?;
    for row in rows {
        let values = row.features.to_array();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{} of pair {}",
                FEATURE_NAMES[i], row.pair_id
            )));
        }
        write!(out, "{}\t{}", row.pair_id, row.stance.map_or("", Stance::as_str)).map_err(io)?;
        for v in values {
            write!(out, "\t{}", format_value(v)).map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_feature_cache(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::Empty("feature cache")),
    };
    let columns: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    let expected: Vec<&str> = ["pair_id", "stance"].into_iter().chain(FEATURE_NAMES).collect();
    if let Some(missing) = expected.iter().find(|c| !columns.contains(c)) {
        return Err(Error::MissingColumn(missing.to_string()));
    }
    if columns != expected {
        return Err(Error::Parse(format!(
            "{}: feature cache columns are out of order or include unknown names",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let row = n as u64 + 2;
        let bad = |msg: String| Error::Csv {
            path: path.to_path_buf(),
            row,
            msg,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != N_FEATURES + 2 {
            return Err(bad(format!(
                "expected {} fields, found {}",
                N_FEATURES + 2,
                fields.len()
            )));
        }
        let pair_id = fields[0].parse().map_err(|_| bad("invalid pair id".into()))?;
        let stance = match fields[1] {
            "" => None,
            s => Some(s.parse().map_err(|_| bad(format!("unknown stance {s:?}")))?),
        };
        let mut values = [0.0; N_FEATURES];
        for (i, f) in fields[2..].iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| bad(format!("{}: bad number {f:?}", FEATURE_NAMES[i])))?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{} at row {row}", FEATURE_NAMES[i])));
            }
            values[i] = v;
        }
        let features = FeatureVector::from_array(&values).map_err(|e| bad(e.to_string()))?;
        rows.push(FeatureRow {
            pair_id,
            stance,
            features,
        });
    }
    Ok(rows)
}

/// Sidecar describing how a feature cache was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub fingerprint: String,
    pub rows: usize,
    /// Stance file the rows were extracted from.
    pub stances: Option<String>,
    /// Resource directory used for extraction.
    pub resources: Option<String>,
    pub inactive_features: Vec<String>,
}

impl CacheMeta {
    /// `<cache>.meta.json` next to the cache file.
    pub fn path_for(cache: impl AsRef<Path>) -> PathBuf {
        let mut s = cache.as_ref().as_os_str().to_owned();
        s.push(".meta.json");
        PathBuf::from(s)
    }

    pub fn save(&self, cache: impl AsRef<Path>) -> Result<()> {
        let p = Self::path_for(cache);
        fs::write(&p, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(&p, e))
    }

    pub fn load(cache: impl AsRef<Path>) -> Result<Self> {
        let p = Self::path_for(cache);
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<FeatureRow> {
        vec![
            FeatureRow {
                pair_id: 0,
                stance: Some(Stance::Agree),
                features: FeatureVector {
                    word_overlap: 1.0 / 3.0,
                    kl_pk_qk: 3.5e-9,
                    wmdistance: 1234.5678901234,
                    len_body: 12,
                    refute_intro: true,
                    sentiment_stance: -0.25,
                    ..Default::default()
                }
                .quantized(),
            },
            FeatureRow {
                pair_id: 7,
                stance: None,
                features: FeatureVector::default(),
            },
        ]
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.tsv");
        write_feature_cache(&rows(), &p).unwrap();
        let back = read_feature_cache(&p).unwrap();
        assert_eq!(back, rows());
        let first = fs::read(&p).unwrap();
        write_feature_cache(&back, &p).unwrap();
        assert_eq!(fs::read(&p).unwrap(), first);
        let text = String::from_utf8(first).unwrap();
        assert!(text.contains("\t0.333333333\t"));
        assert!(text.contains("3.5e-9"));
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.tsv");
        write_feature_cache(&rows(), &p).unwrap();
        let text = fs::read_to_string(&p).unwrap().replacen("\trefute_intro", "", 1);
        fs::write(&p, text).unwrap();
        match read_feature_cache(&p) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "refute_intro"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.tsv");
        let mut r = rows();
        r[0].features.cosine_tfidf = f64::NAN;
        assert!(matches!(write_feature_cache(&r, &p), Err(Error::NonFinite(_))));
        write_feature_cache(&rows(), &p).unwrap();
        let text = fs::read_to_string(&p).unwrap().replacen("1234.56789", "inf", 1);
        fs::write(&p, text).unwrap();
        assert!(read_feature_cache(&p).is_err());
    }

    #[test]
    fn meta_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.tsv");
        let m = CacheMeta {
            fingerprint: "abc".into(),
            rows: 2,
            stances: Some("train_stances.csv".into()),
            resources: None,
            inactive_features: vec!["wmdistance".into()],
        };
        m.save(&p).unwrap();
        assert!(dir.path().join("f.tsv.meta.json").exists());
        assert_eq!(CacheMeta::load(&p).unwrap(), m);
    }
}
