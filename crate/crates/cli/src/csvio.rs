//! CSV artifacts: run history, Latin hypercube designs and surface grids.

use std::io::Write;
use std::path::Path;

use corsrbf::engine::{EvaluationRecord, Stage};

/// A history row as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub stage: Stage,
    pub index: usize,
    pub x: Vec<f64>,
    pub f_raw: f64,
    pub f_scaled: Option<f64>,
    pub radius: Option<f64>,
    pub fallback: bool,
}

pub fn history_header(dim: usize) -> Vec<String> {
    let mut header = vec!["stage".to_string(), "index".to_string()];
    header.extend((1..=dim).map(|k| format!("x_{k}")));
    header.extend(["f_raw", "f_scaled", "radius", "fallback"].map(String::from));
    header
}

/// Shortest decimal that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_history<W: Write>(out: W, history: &[EvaluationRecord], dim: usize) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(history_header(dim))?;
    for r in history {
        let mut row = vec![r.stage.as_str().to_string(), r.index.to_string()];
        row.extend(r.x_original.iter().map(|v| num(*v)));
        row.push(num(r.f_raw));
        row.push(opt(r.f_scaled));
        row.push(opt(r.radius_used));
        row.push(r.fallback.to_string());
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>, String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    let dim = header.iter().filter(|h| h.starts_with("x_")).count();
    let expected = history_header(dim);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(format!(
            "{}: expected header `{}`",
            path.display(),
            expected.join(",")
        ));
    }
    let parse = |s: &str, what: &str, line: usize| -> Result<f64, String> {
        s.parse::<f64>()
            .map_err(|_| format!("row {line}: cannot parse {what} `{s}`"))
    };
    let maybe = |s: &str, what: &str, line: usize| -> Result<Option<f64>, String> {
        if s.is_empty() {
            Ok(None)
        } else {
            parse(s, what, line).map(Some)
        }
    };
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = k + 2;
        let stage = match &rec[0] {
            "initial" => Stage::Initial,
            "subsequent" => Stage::Subsequent,
            other => return Err(format!("row {line}: unknown stage `{other}`")),
        };
        let index = rec[1]
            .parse()
            .map_err(|_| format!("row {line}: bad index `{}`", &rec[1]))?;
        let x = (0..dim)
            .map(|i| parse(&rec[2 + i], "coordinate", line))
            .collect::<Result<Vec<_>, _>>()?;
        let fallback = match &rec[dim + 5] {
            "true" => true,
            "false" => false,
            other => return Err(format!("row {line}: bad fallback flag `{other}`")),
        };
        rows.push(HistoryRow {
            stage,
            index,
            x,
            f_raw: parse(&rec[dim + 2], "f_raw", line)?,
            f_scaled: maybe(&rec[dim + 3], "f_scaled", line)?,
            radius: maybe(&rec[dim + 4], "radius", line)?,
            fallback,
        });
    }
    Ok(rows)
}

pub fn write_design<W: Write>(
    mut out: W,
    points: &[Vec<f64>],
    dim: usize,
    initial_spread: f64,
    final_spread: f64,
) -> std::io::Result<()> {
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record((1..=dim).map(|k| format!("x_{k}")))?;
        for p in points {
            w.write_record(p.iter().map(|v| num(*v)))?;
        }
        w.flush()?;
    }
    writeln!(out, "# spread={} -> {}", num(initial_spread), num(final_spread))
}

/// Row `j` holds `y = j / (res - 1)`, column `i` holds `x = i / (res - 1)`.
pub fn write_grid<W: Write>(out: W, grid: &[Vec<f64>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in grid {
        w.write_record(row.iter().map(|v| num(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes through a temporary file in the destination directory and renames
/// it into place; `None` writes to standard output.
pub fn write_output<F>(path: Option<&Path>, fill: F) -> std::io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    match path {
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            fill(&mut lock)?;
            lock.flush()
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            fill(tmp.as_file_mut())?;
            tmp.as_file_mut().flush()?;
            tmp.persist(path).map_err(|e| e.error)?;
            Ok(())
        }
    }
}
