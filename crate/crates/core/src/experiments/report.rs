use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::config::Scenario;

/// Exact CSV header row.
pub const CSV_HEADER: &str = "n,t_n,norm_error,per_vector_max_error,bound_value,wall_time_s";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportMetadata {
    pub scenario: Scenario,
    pub dim: usize,
    pub seed: u64,
    pub t: f64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub library_version: String,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// Number of factors `k_n`.
    pub n: usize,
    /// Step `t_n`.
    pub t_n: f64,
    pub norm_error: Option<f64>,
    pub per_vector_max_error: Option<f64>,
    pub bound_value: Option<f64>,
    pub wall_time_s: f64,
    /// Why the row has no errors, when it failed.
    pub failure: Option<String>,
}

impl ReportRow {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<ReportRow>,
    /// Inequality checks that failed (bounds suite only).
    pub violations: usize,
}

impl ConvergenceReport {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvOptions {
    /// Write `wall_time_s`; when off the field is left empty so that data
    /// rows are reproducible byte for byte.
    pub timing: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { timing: true }
    }
}

fn field(value: Option<f64>) -> String {
    value.map(|v| format!("{v:e}")).unwrap_or_default()
}

/// Comment lines, header and one data line per row.
pub fn write_csv<W: Write>(report: &ConvergenceReport, out: &mut W, options: CsvOptions) -> Result<()> {
    let m = &report.metadata;
    writeln!(out, "# scenario: {}", m.scenario)?;
    writeln!(out, "# dim: {}", m.dim)?;
    writeln!(out, "# seed: {}", m.seed)?;
    writeln!(out, "# t: {:e}", m.t)?;
    writeln!(out, "# timestamp: {}", m.timestamp)?;
    writeln!(out, "# library_version: {}", m.library_version)?;
    for note in &m.notes {
        writeln!(out, "# note: {note}")?;
    }
    writeln!(out, "# violations: {}", report.violations)?;
    for row in &report.rows {
        if let Some(reason) = &row.failure {
            writeln!(out, "# failed n={}: {reason}", row.n)?;
        }
    }
    writeln!(out, "{CSV_HEADER}")?;
    for row in &report.rows {
        let time = if options.timing {
            format!("{:e}", row.wall_time_s)
        } else {
            String::new()
        };
        writeln!(
            out,
            "{},{:e},{},{},{},{}",
            row.n,
            row.t_n,
            field(row.norm_error),
            field(row.per_vector_max_error),
            field(row.bound_value),
            time
        )?;
    }
    Ok(())
}

/// Renders the report as CSV text.
pub fn csv_string(report: &ConvergenceReport, options: CsvOptions) -> String {
    let mut buf = Vec::new();
    write_csv(report, &mut buf, options).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn emit_csv(report: &ConvergenceReport, path: impl AsRef<Path>) -> Result<()> {
    emit_csv_with(report, path, CsvOptions::default())
}

pub fn emit_csv_with(report: &ConvergenceReport, path: impl AsRef<Path>, options: CsvOptions) -> Result<()> {
    let path = path.as_ref();
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    write_csv(report, &mut file, options)?;
    file.flush().map_err(io)
}

/// The data lines of CSV text, without comments and header.
pub fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && *l != CSV_HEADER)
        .collect()
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.metadata;
        writeln!(f, "{} (dim {}, seed {}, t = {})", m.scenario, m.dim, m.seed, m.t)?;
        for note in &m.notes {
            writeln!(f, "  {note}")?;
        }
        writeln!(
            f,
            "{:>8}  {:>12}  {:>12}  {:>12}  {:>12}  {:>9}",
            "n", "t_n", "norm_error", "per_vector", "bound", "time [s]"
        )?;
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"));
        for row in &self.rows {
            write!(
                f,
                "{:>8}  {:>12.4e}  {:>12}  {:>12}  {:>12}  {:>9.3}",
                row.n,
                row.t_n,
                cell(row.norm_error),
                cell(row.per_vector_max_error),
                cell(row.bound_value),
                row.wall_time_s
            )?;
            match &row.failure {
                Some(reason) => writeln!(f, "  failed: {reason}")?,
                None => writeln!(f)?,
            }
        }
        if self.metadata.scenario == Scenario::BoundsSuite {
            writeln!(f, "violations: {}", self.violations)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(rows: Vec<ReportRow>) -> ConvergenceReport {
        ConvergenceReport {
            metadata: ReportMetadata {
                scenario: Scenario::Zeno,
                dim: 2,
                seed: 1,
                t: 1.0,
                timestamp: 0,
                library_version: "0.0.0".into(),
                notes: vec!["a note".into()],
            },
            rows,
            violations: 0,
        }
    }

    fn row(n: usize, err: f64, bound: Option<f64>) -> ReportRow {
        ReportRow {
            n,
            t_n: 1.0 / n as f64,
            norm_error: Some(err),
            per_vector_max_error: Some(err / 2.0),
            bound_value: bound,
            wall_time_s: 0.5,
            failure: None,
        }
    }

    #[test]
    fn empty_report_is_comments_and_header() {
        let text = csv_string(&report(vec![]), CsvOptions::default());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(*lines.last().unwrap(), CSV_HEADER);
        assert!(lines[..lines.len() - 1].iter().all(|l| l.starts_with('#')));
        assert!(data_lines(&text).is_empty());
    }

    #[test]
    fn rows_round_trip() {
        let rows = vec![
            row(16, 0.1234567890123456, None),
            row(64, 1.0 / 3.0, Some(2.5e-7)),
            row(256, 6.02e-23, None),
        ];
        let text = csv_string(&report(rows.clone()), CsvOptions::default());
        let data = data_lines(&text);
        assert_eq!(data.len(), 3);
        for (line, row) in data.iter().zip(&rows) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 6);
            assert_eq!(fields[0].parse::<usize>().unwrap(), row.n);
            assert_eq!(fields[1].parse::<f64>().unwrap(), row.t_n);
            assert_eq!(fields[2].parse::<f64>().unwrap(), row.norm_error.unwrap());
            assert_eq!(fields[3].parse::<f64>().unwrap(), row.per_vector_max_error.unwrap());
            assert_eq!(fields[4].parse::<f64>().ok(), row.bound_value);
            assert_eq!(fields[5].parse::<f64>().unwrap(), row.wall_time_s);
        }
    }

    #[test]
    fn absent_bound_is_an_empty_field() {
        let text = csv_string(&report(vec![row(4, 0.5, None)]), CsvOptions::default());
        let line = data_lines(&text)[0];
        assert_eq!(line.split(',').nth(4), Some(""));
        assert!(!line.contains(",0e0,"));
    }

    #[test]
    fn failed_rows_leave_errors_empty_and_are_explained() {
        let mut r = row(3, 0.0, None);
        r.norm_error = None;
        r.per_vector_max_error = None;
        r.failure = Some("n = 3 is odd".into());
        let text = csv_string(&report(vec![r]), CsvOptions { timing: false });
        assert!(text.contains("# failed n=3: n = 3 is odd"));
        assert_eq!(data_lines(&text), vec!["3,3.333333333333333e-1,,,,"]);
    }

    #[test]
    fn emit_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let rep = report(vec![row(16, 0.25, None)]);
        emit_csv(&rep, &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            csv_string(&rep, CsvOptions::default())
        );
        assert!(matches!(
            emit_csv(&rep, dir.path().join("missing/out.csv")),
            Err(Error::Io(_))
        ));
    }
}
