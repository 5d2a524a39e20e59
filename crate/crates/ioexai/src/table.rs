//! Canonical dataset files and trace ingestion.
//!
//! A dataset is stored as `<stem>.csv` with the canonical header, plus
//! optional sidecars next to it: `<stem>.split` (train/test row indices) and
//! `<stem>.topology` (gNB sites and radio parameters). Missing values are
//! empty cells.

use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use ioexai_core::dataset::{validate, Dataset, Field, SessionRecord, Split, Summary, ViolationKind};

use crate::config::{self, KeyValues, Reader};
use crate::error::{CliError, CliResult};

pub fn canonical_header() -> Vec<&'static str> {
    Field::ALL.iter().map(|f| f.name()).collect()
}

/// Shortest text that parses back to the same `f64`; empty for missing.
pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn sidecar(csv: &Path, ext: &str) -> PathBuf {
    csv.with_extension(ext)
}

pub fn split_path(csv: &Path) -> PathBuf {
    sidecar(csv, "split")
}

pub fn topology_path(csv: &Path) -> PathBuf {
    sidecar(csv, "topology")
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::validation(format!("{}: {e}", path.display()))
}

pub fn dataset_csv_bytes(ds: &Dataset) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(canonical_header()).expect("in-memory write");
    for r in &ds.records {
        let row: Vec<String> = Field::ALL
            .iter()
            .map(|f| match f {
                Field::CellId => r.cell_id.to_string(),
                _ => fmt_value(r.get(*f)),
            })
            .collect();
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

fn split_text(split: &Split) -> String {
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(", ");
    format!("# 0-based row indices\ntrain = {}\ntest = {}\n", join(&split.train), join(&split.test))
}

/// Writes `csv` and whichever sidecars the dataset carries; returns every
/// written path.
pub fn write_dataset(ds: &Dataset, csv: &Path) -> CliResult<Vec<PathBuf>> {
    write_file(csv, &dataset_csv_bytes(ds))?;
    let mut written = vec![csv.to_path_buf()];
    if let Some(split) = &ds.split {
        let p = split_path(csv);
        write_file(&p, split_text(split).as_bytes())?;
        written.push(p);
    }
    if let Some(topo) = &ds.topology {
        let p = topology_path(csv);
        write_file(&p, config::render(&config::topology_pairs(topo)).as_bytes())?;
        written.push(p);
    }
    Ok(written)
}

fn parse_indices(v: &str) -> Result<Vec<usize>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| s.trim().parse().map_err(|_| format!("`{}` is not a row index", s.trim()))).collect()
}

fn read_split(path: &Path) -> CliResult<Split> {
    let kv = KeyValues::load(path)?;
    let mut r = Reader::new(&kv);
    let train = r.with("train", parse_indices)?.unwrap_or_default();
    let test = r.with("test", parse_indices)?.unwrap_or_default();
    r.finish()?;
    Ok(Split { train, test })
}

/// Reads a canonical dataset file and its sidecars.
pub fn read_dataset(csv: &Path) -> CliResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().from_path(csv).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => CliError::runtime(format!("{}: {e}", csv.display())),
        _ => csv_err(csv, e),
    })?;
    let header: Vec<String> = rdr.headers().map_err(|e| csv_err(csv, e))?.iter().map(str::to_string).collect();
    if header != canonical_header() {
        return Err(CliError::validation(format!(
            "{}: header is not the canonical `{}`; use `ingest` with a column mapping",
            csv.display(),
            canonical_header().join(",")
        )));
    }
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(csv, e))?;
        let line = i + 2;
        let bad = |col: &str, v: &str| {
            CliError::validation(format!("{}:{line}: column `{col}`: cannot parse `{v}`", csv.display()))
        };
        let mut vals = [f64::NAN; 12];
        let mut cell_id = 0;
        for ((f, v), slot) in Field::ALL.iter().zip(rec.iter()).zip(vals.iter_mut()) {
            if *f == Field::CellId {
                cell_id = v.parse::<u32>().map_err(|_| bad(f.name(), v))?;
            } else if !v.is_empty() {
                *slot = v.parse::<f64>().map_err(|_| bad(f.name(), v))?;
            }
        }
        records.push(record_from(cell_id, &vals));
    }
    let mut ds = Dataset::new(records);
    let sp = split_path(csv);
    if sp.exists() {
        ds.split = Some(read_split(&sp)?);
    }
    let tp = topology_path(csv);
    if tp.exists() {
        ds.topology = Some(config::topology_from(&KeyValues::load(&tp)?)?);
    }
    ds.check_invariants().map_err(|e| CliError::from(e).context(csv.display()))?;
    Ok(ds)
}

/// Builds a record from values in [`Field::ALL`] order.
fn record_from(cell_id: u32, v: &[f64; 12]) -> SessionRecord {
    let position = (v[10].is_finite() && v[11].is_finite()).then_some((v[10], v[11]));
    SessionRecord {
        timestamp: v[0],
        cell_id,
        speed_kmh: v[2],
        rssi_dbm: v[3],
        rsrp_dbm: v[4],
        rsrq_db: v[5],
        sinr_db: v[6],
        cqi: v[7],
        dl_mbps: v[8],
        ul_mbps: v[9],
        position,
    }
}

/// How one source column becomes a canonical field.
#[derive(Debug, Clone, PartialEq)]
pub enum Conversion {
    Scale(f64),
    /// Timestamp text parsed with a `chrono` format string, read as UTC.
    DateTime(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMapping {
    /// `(source column, field, conversion)` in file order.
    pub columns: Vec<(String, Field, Conversion)>,
    /// Cell texts read as missing, in addition to the empty cell.
    pub missing: Vec<String>,
}

impl ColumnMapping {
    /// Maps every canonical column to itself.
    pub fn identity() -> Self {
        Self {
            columns: Field::ALL.iter().map(|f| (f.name().to_string(), *f, Conversion::Scale(1.0))).collect(),
            missing: Vec::new(),
        }
    }

    /// Parses `source = field[:scale]` lines, `source = timestamp:<format>`
    /// and an optional `@missing = a, b` sentinel list.
    pub fn parse(text: &str, source: &str) -> CliResult<Self> {
        let mut columns: Vec<(String, Field, Conversion)> = Vec::new();
        let mut missing = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| CliError::validation(format!("{source}:{}: {m}", i + 1));
            let (src, dst) = line.split_once('=').ok_or_else(|| err(format!("expected `column = field`, found `{line}`")))?;
            let (src, dst) = (src.trim(), dst.trim());
            if src == "@missing" {
                missing.extend(dst.split(',').map(|s| s.trim().to_string()));
                continue;
            }
            let (name, conv) = match dst.split_once(':') {
                None => (dst, Conversion::Scale(1.0)),
                Some((n, c)) => {
                    let c = c.trim();
                    match c.parse::<f64>() {
                        Ok(s) if s.is_finite() && s != 0.0 => (n.trim(), Conversion::Scale(s)),
                        Ok(_) => return Err(err(format!("scale `{c}` must be finite and non-zero"))),
                        Err(_) if n.trim() == Field::Timestamp.name() => (n.trim(), Conversion::DateTime(c.to_string())),
                        Err(_) => return Err(err(format!("`{c}` is not a scale factor"))),
                    }
                }
            };
            let field = Field::parse(name).ok_or_else(|| err(format!("unknown field `{name}`")))?;
            if columns.iter().any(|c| c.1 == field) {
                return Err(err(format!("field `{name}` is mapped more than once")));
            }
            columns.push((src.to_string(), field, conv));
        }
        let absent: Vec<&str> =
            Field::REQUIRED.iter().filter(|f| !columns.iter().any(|c| c.1 == **f)).map(|f| f.name()).collect();
        if !absent.is_empty() {
            return Err(CliError::validation(format!("{source}: required fields not mapped: {}", absent.join(", "))));
        }
        let has_x = columns.iter().any(|c| c.1 == Field::PosX);
        let has_y = columns.iter().any(|c| c.1 == Field::PosY);
        if has_x != has_y {
            return Err(CliError::validation(format!("{source}: pos_x and pos_y must be mapped together")));
        }
        Ok(Self { columns, missing })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub dataset: Dataset,
    /// Data rows read, excluding the header.
    pub rows_read: usize,
    /// `(line, reason)` for every dropped row.
    pub dropped: Vec<(usize, String)>,
    /// Kept rows holding at least one missing value.
    pub flagged_rows: usize,
    /// Missing-value count per field, for fields with any.
    pub missing_by_field: Vec<(Field, usize)>,
    /// Soft findings on kept rows (duplicate timestamps).
    pub warnings: Vec<String>,
}

/// Reads a delimited trace through `mapping`. Rows that cannot be parsed or
/// that break a hard range check are dropped and listed; missing values are
/// kept and counted.
pub fn ingest_csv(path: &Path, mapping: &ColumnMapping) -> CliResult<IngestReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let mut index = Vec::with_capacity(mapping.columns.len());
    for (src, field, conv) in &mapping.columns {
        let i = header
            .iter()
            .position(|h| h.trim() == src)
            .ok_or_else(|| CliError::validation(format!("{}: mapping references absent column `{src}`", path.display())))?;
        index.push((i, *field, conv));
    }

    let mut parsed: Vec<(usize, SessionRecord)> = Vec::new();
    let mut dropped = Vec::new();
    let mut rows_read = 0;
    'rows: for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        rows_read += 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                dropped.push((line, e.to_string()));
                continue;
            }
        };
        let mut vals = [f64::NAN; 12];
        let mut cell_id = None;
        for &(i, field, conv) in &index {
            let text = rec.get(i).unwrap_or("").trim();
            if text.is_empty() || mapping.missing.iter().any(|m| m == text) {
                continue;
            }
            let v = match conv {
                Conversion::Scale(s) => text.parse::<f64>().map(|v| v * s).ok(),
                Conversion::DateTime(fmt) => {
                    NaiveDateTime::parse_from_str(text, fmt).ok().map(|t| t.and_utc().timestamp() as f64)
                }
            };
            let Some(v) = v else {
                dropped.push((line, format!("column `{}`: cannot parse `{text}`", header.get(i).unwrap_or(""))));
                continue 'rows;
            };
            if field == Field::CellId {
                if !(v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX)) {
                    dropped.push((line, format!("cell id `{text}` is not a non-negative integer")));
                    continue 'rows;
                }
                cell_id = Some(v as u32);
            } else {
                vals[Field::ALL.iter().position(|f| *f == field).expect("canonical field")] = v;
            }
        }
        let Some(cell_id) = cell_id else {
            dropped.push((line, "cell id is missing".into()));
            continue;
        };
        parsed.push((line, record_from(cell_id, &vals)));
    }

    let lines: Vec<usize> = parsed.iter().map(|p| p.0).collect();
    let candidate = Dataset::new(parsed.into_iter().map(|p| p.1).collect());
    let report = validate(&candidate);
    let mut hard = vec![false; candidate.len()];
    for v in &report.violations {
        if v.kind != ViolationKind::DuplicateTimestamp && v.kind != ViolationKind::UnknownCell {
            if !hard[v.row] {
                dropped.push((lines[v.row], format!("{}: {} ({})", v.field, v.kind, v.value)));
            }
            hard[v.row] = true;
        }
    }
    dropped.sort_by_key(|d| d.0);

    let kept: Vec<SessionRecord> =
        candidate.records.into_iter().zip(&hard).filter(|(_, h)| !**h).map(|(r, _)| r).collect();
    if kept.is_empty() {
        return Err(CliError::validation(format!("{}: no rows survived ingestion", path.display())));
    }
    let dataset = Dataset::new(kept);
    let after = validate(&dataset);
    let missing_by_field = Field::REQUIRED
        .iter()
        .map(|f| (*f, after.missing.iter().filter(|m| m.1 == *f).count()))
        .filter(|(_, n)| *n > 0)
        .collect();
    let warnings = after
        .violations
        .iter()
        .map(|v| format!("row {}: {}: {} ({})", v.row, v.field, v.kind, v.value))
        .collect();
    Ok(IngestReport { flagged_rows: after.rows_with_missing(), dataset, rows_read, dropped, missing_by_field, warnings })
}

/// `field,count,min,p25,p50,p75,max,mean` table.
pub fn summary_csv(stats: &[(Field, Summary)]) -> String {
    let mut s = String::from("field,count,min,p25,p50,p75,max,mean\n");
    for (f, x) in stats {
        s.push_str(&format!("{f},{},{},{},{},{},{},{}\n", x.count, x.min, x.p25, x.p50, x.p75, x.max, x.mean));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ioexai_core::dataset::train_test_split;
    use ioexai_core::synth::{synth_generate, ScenarioConfig};

    #[test]
    fn dataset_files_round_trip() {
        let mut sc = ScenarioConfig::reference(3);
        sc.sessions = 50;
        let ds = train_test_split(&synth_generate(&sc).unwrap(), 30, 20, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let written = write_dataset(&ds, &p).unwrap();
        assert_eq!(written.len(), 3);
        let back = read_dataset(&p).unwrap();
        assert_eq!(back, ds);
        assert_eq!(dataset_csv_bytes(&back), std::fs::read(&p).unwrap());
    }

    #[test]
    fn mapping_requires_every_field_once() {
        let full: String = Field::REQUIRED.iter().map(|f| format!("{0} = {0}\n", f.name())).collect();
        ColumnMapping::parse(&full, "m").unwrap();
        let e = ColumnMapping::parse("speed = speed_kmh\n", "m").unwrap_err();
        assert!(e.message.contains("required fields not mapped"));
        let e = ColumnMapping::parse(&format!("{full}other = cqi\n"), "m").unwrap_err();
        assert!(e.message.contains("more than once"), "{}", e.message);
        let e = ColumnMapping::parse(&format!("{full}x = pos_x\n"), "m").unwrap_err();
        assert!(e.message.contains("together"));
        let e = ColumnMapping::parse("a = volume\n", "m").unwrap_err();
        assert!(e.message.contains("m:1"));
    }
}
