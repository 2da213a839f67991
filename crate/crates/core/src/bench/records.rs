use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use super::config::Arm;
use crate::error::{Error, Result};

/// Exact CSV header of a sweep.
pub const CSV_HEADER: &str = "n,m,sketch,trial,seed,lambda,delta_n_sq,d_n,error,rescaled_error,wall_time_ms";

/// One (n, arm, trial) cell of a sweep. Failed trials carry NaN in the
/// floating-point columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub n: usize,
    pub m: usize,
    pub sketch: Arm,
    pub trial: usize,
    pub seed: u64,
    pub lambda: f64,
    pub delta_n_sq: f64,
    pub d_n: usize,
    pub error: f64,
    pub rescaled_error: f64,
    pub wall_time_ms: f64,
}

impl TrialRecord {
    pub fn is_failure(&self) -> bool {
        self.error.is_nan()
    }

    fn fields(&self) -> [String; 11] {
        [
            self.n.to_string(),
            self.m.to_string(),
            self.sketch.name().to_string(),
            self.trial.to_string(),
            self.seed.to_string(),
            float(self.lambda),
            float(self.delta_n_sq),
            self.d_n.to_string(),
            float(self.error),
            float(self.rescaled_error),
            float(self.wall_time_ms),
        ]
    }
}

// 17 significant digits round-trip every f64.
fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(records: &[TrialRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source: io::Error| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut buf = io::BufWriter::new(file);
    write_csv_to(records, &mut buf).map_err(io_err)?;
    buf.flush().map_err(io_err)
}

pub fn write_csv_to<W: Write>(records: &[TrialRecord], writer: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    let path = path.as_ref();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(file);
    let mut rows = reader.records();

    match rows.next() {
        Some(Ok(h)) if h.iter().eq(CSV_HEADER.split(',')) => {}
        Some(Ok(h)) => {
            return Err(parse_err(1, format!("unexpected header `{}`", h.iter().collect::<Vec<_>>().join(","))))
        }
        Some(Err(e)) => return Err(parse_err(1, e.to_string())),
        None => return Err(parse_err(1, "missing header".into())),
    }

    let mut out = Vec::new();
    for row in rows {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 11 {
            return Err(parse_err(line, format!("expected 11 fields, got {}", row.len())));
        }
        let field = |i: usize| &row[i];
        macro_rules! num {
            ($i:expr) => {
                field($i).parse().map_err(|e| {
                    parse_err(
                        line,
                        format!("column `{}`: invalid value `{}`: {e}", CSV_HEADER.split(',').nth($i).unwrap(), field($i)),
                    )
                })?
            };
        }
        out.push(TrialRecord {
            n: num!(0),
            m: num!(1),
            sketch: field(2)
                .parse()
                .map_err(|e: Error| parse_err(line, e.to_string()))?,
            trial: num!(3),
            seed: num!(4),
            lambda: num!(5),
            delta_n_sq: num!(6),
            d_n: num!(7),
            error: num!(8),
            rescaled_error: num!(9),
            wall_time_ms: num!(10),
        });
    }
    Ok(out)
}
