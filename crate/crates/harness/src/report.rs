//! Result tables: CSV persistence and per-point aggregation.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::run::ResultRecord;
use crate::HarnessError;

pub const RESULT_HEADER: [&str; 10] =
    ["dataset", "learner", "attr_method", "knob", "knob_value", "seed", "attr_pred", "attr_prog", "pehe", "wall_ms"];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_float(s: &str, row: usize, column: &str) -> Result<f64, HarnessError> {
    s.parse().map_err(|_| HarnessError::Runtime(format!("row {row}: cannot parse {column} value {s:?}")))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime(format!("{}: {e}", path.display()))
}

pub fn emit_csv(records: &[ResultRecord], path: &Path) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(RESULT_HEADER).map_err(|e| io_err(path, e))?;
    for r in records {
        w.write_record([
            r.dataset.clone(),
            r.learner.clone(),
            r.attr_method.clone(),
            r.knob.clone(),
            format_float(r.knob_value),
            r.seed.to_string(),
            format_float(r.attr_pred),
            format_float(r.attr_prog),
            format_float(r.pehe),
            r.wall_ms.map(format_float).unwrap_or_default(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRecord>, HarnessError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let header = rdr.headers().map_err(|e| io_err(path, e))?.clone();
    if header.iter().ne(RESULT_HEADER) {
        return Err(HarnessError::Runtime(format!("{}: unexpected header", path.display())));
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let row = k + 2;
        out.push(ResultRecord {
            dataset: rec[0].to_string(),
            learner: rec[1].to_string(),
            attr_method: rec[2].to_string(),
            knob: rec[3].to_string(),
            knob_value: parse_float(&rec[4], row, "knob_value")?,
            seed: rec[5].parse().map_err(|_| HarnessError::Runtime(format!("row {row}: bad seed {:?}", &rec[5])))?,
            attr_pred: parse_float(&rec[6], row, "attr_pred")?,
            attr_prog: parse_float(&rec[7], row, "attr_prog")?,
            pehe: parse_float(&rec[8], row, "pehe")?,
            wall_ms: if rec[9].is_empty() { None } else { Some(parse_float(&rec[9], row, "wall_ms")?) },
        });
    }
    Ok(out)
}

/// Mean and standard error (sample sd / √n) of the finite values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Zero for a single value, `NaN` with none.
    pub se: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        let n = v.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, n };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let se = if n < 2 {
            0.0
        } else {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self { mean, se, n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    AttrPred,
    AttrProg,
    Pehe,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::AttrPred, Metric::AttrProg, Metric::Pehe];

    pub fn name(self) -> &'static str {
        match self {
            Self::AttrPred => "attr_pred",
            Self::AttrProg => "attr_prog",
            Self::Pehe => "pehe",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn of(self, r: &ResultRecord) -> f64 {
        match self {
            Self::AttrPred => r.attr_pred,
            Self::AttrProg => r.attr_prog,
            Self::Pehe => r.pehe,
        }
    }
}

/// Across-seed summary at one (learner, knob value) point.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub dataset: String,
    pub learner: String,
    pub attr_method: String,
    pub knob: String,
    pub knob_value: f64,
    pub attr_pred: Summary,
    pub attr_prog: Summary,
    pub pehe: Summary,
}

impl AggregateRow {
    pub fn metric(&self, m: Metric) -> Summary {
        match m {
            Metric::AttrPred => self.attr_pred,
            Metric::AttrProg => self.attr_prog,
            Metric::Pehe => self.pehe,
        }
    }
}

/// Groups records by everything but the seed. Learners keep their order of
/// first appearance; knob values are sorted ascending.
pub fn aggregate(records: &[ResultRecord]) -> Vec<AggregateRow> {
    type Key = (String, String, String, String);
    let mut groups: Vec<(Key, Vec<(f64, Vec<&ResultRecord>)>)> = Vec::new();
    for r in records {
        let key = (r.dataset.clone(), r.learner.clone(), r.attr_method.clone(), r.knob.clone());
        let pos = match groups.iter().position(|(k, _)| *k == key) {
            Some(p) => p,
            None => {
                groups.push((key, Vec::new()));
                groups.len() - 1
            }
        };
        let points = &mut groups[pos].1;
        match points.iter_mut().find(|(v, _)| v.to_bits() == r.knob_value.to_bits()) {
            Some((_, rs)) => rs.push(r),
            None => points.push((r.knob_value, vec![r])),
        }
    }
    let mut out = Vec::new();
    for ((dataset, learner, attr_method, knob), mut points) in groups {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (knob_value, rs) in points {
            let s = |m: Metric| Summary::of(rs.iter().map(|r| m.of(r)));
            out.push(AggregateRow {
                dataset: dataset.clone(),
                learner: learner.clone(),
                attr_method: attr_method.clone(),
                knob: knob.clone(),
                knob_value,
                attr_pred: s(Metric::AttrPred),
                attr_prog: s(Metric::AttrProg),
                pehe: s(Metric::Pehe),
            });
        }
    }
    out
}

pub fn emit_summary_csv(rows: &[AggregateRow], path: &Path) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<String> = ["dataset", "learner", "attr_method", "knob", "knob_value"].map(String::from).to_vec();
    for m in Metric::ALL {
        header.extend(["mean", "se", "n"].map(|s| format!("{}_{s}", m.name())));
    }
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for r in rows {
        let mut rec = vec![r.dataset.clone(), r.learner.clone(), r.attr_method.clone(), r.knob.clone(), format_float(r.knob_value)];
        for s in [r.attr_pred, r.attr_prog, r.pehe] {
            rec.extend([format_float(s.mean), format_float(s.se), s.n.to_string()]);
        }
        w.write_record(&rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
