//! Run directories and the cross-run comparison report.
//!
//! A run directory holds the delimited-text artifacts of one pipeline run.
//! The report reads them back, so every reported number is recomputable from
//! files alone.

use std::path::{Path, PathBuf};

use ioexai_core::dataset::{Dataset, Field, Summary};
use ioexai_core::eval::{build_comparison_report, ComparisonReport, RunSummary, TargetSummary};
use ioexai_core::pipeline::{objective_value, PipelineOutput};
use ioexai_core::regress::ModelKind;
use ioexai_core::shapley::GlobalImportance;

use crate::config::KeyValues;
use crate::error::{CliError, CliResult};
use crate::manifest::MANIFEST_FILE;
use crate::svg;
use crate::table::fmt_value;

pub const ASSOCIATIONS: &str = "associations.csv";
pub const PREDICTIONS: &str = "predictions.csv";
pub const USER_RATES: &str = "user_predictions.csv";
pub const COEFFICIENTS: &str = "coefficients.csv";
pub const EXPLANATIONS: &str = "explanations.csv";
pub const LINK_METRICS: &str = "link_metrics.csv";
pub const TRAINING: &str = "training.csv";
pub const SUMMARY: &str = "summary.txt";

/// Comma-separated table with `\n` line ends.
pub struct Csv {
    w: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new<I: AsRef<[u8]>>(header: impl IntoIterator<Item = I>) -> Self {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Self { w }
    }

    pub fn row<I: AsRef<[u8]>>(&mut self, fields: impl IntoIterator<Item = I>) {
        self.w.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.w.into_inner().expect("in-memory flush")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), fmt_value)
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub(crate) fn write(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// Writes every run artifact into `dir` and returns the written paths.
pub fn write_run(dir: &Path, out: &PipelineOutput, ds: &Dataset) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();

    let mut t = Csv::new([
        "row", "candidate", "serving", "z", "rsrp_ok", "rsrq_ok", "mobility_ok", "rsrp_dbm", "rsrq_db", "sinr_db",
        "cqi_raw", "cqi",
    ]);
    for (i, u) in out.associations.users.iter().enumerate() {
        t.row([
            i.to_string(),
            u.candidate.to_string(),
            u.serving.map_or(String::new(), |c| c.to_string()),
            flag(u.serving.is_some()).to_string(),
            flag(u.rsrp_ok).to_string(),
            flag(u.rsrq_ok).to_string(),
            flag(u.mobility_ok).to_string(),
            fmt_value(u.metrics.rsrp_dbm),
            fmt_value(u.metrics.rsrq_db),
            fmt_value(u.metrics.sinr_db),
            fmt_value(u.metrics.cqi_raw),
            u.metrics.cqi.to_string(),
        ]);
    }
    written.push(write(dir, ASSOCIATIONS, &t.into_bytes())?);

    let mut t = Csv::new(["target", "row", "prediction", "truth"]);
    for o in &out.targets {
        for ((row, p), y) in o.test_rows.iter().zip(&o.test_predictions).zip(&o.test_truth) {
            t.row([o.target.name().to_string(), row.to_string(), fmt_value(*p), fmt_value(*y)]);
        }
    }
    written.push(write(dir, PREDICTIONS, &t.into_bytes())?);

    // Per-user Φ, Υ and predicted CQI; empty where a target was not run.
    let mut rows: Vec<usize> = out.user_cqi.iter().map(|r| r.0).collect();
    for (r, _) in out.predicted_dl().into_iter().chain(out.predicted_ul()) {
        rows.push(r);
    }
    rows.sort_unstable();
    rows.dedup();
    let lookup = |v: &[(usize, f64)], r: usize| v.iter().find(|x| x.0 == r).map(|x| x.1);
    let (dl, ul) = (out.predicted_dl(), out.predicted_ul());
    let mut t = Csv::new(["row", "cqi", "dl_mbps", "ul_mbps"]);
    for r in rows {
        t.row([r.to_string(), opt(lookup(&out.user_cqi, r)), opt(lookup(&dl, r)), opt(lookup(&ul, r))]);
    }
    written.push(write(dir, USER_RATES, &t.into_bytes())?);

    let mut t = Csv::new(["target", "feature", "mean_abs_phi", "rank"]);
    for o in &out.targets {
        for (i, name) in o.importance.feature_names.iter().enumerate() {
            let rank = o.importance.rank.iter().position(|&r| r == i).map_or(0, |p| p + 1);
            t.row([o.target.name().to_string(), name.clone(), fmt_value(o.importance.mean_abs_phi[i]), rank.to_string()]);
        }
    }
    written.push(write(dir, COEFFICIENTS, &t.into_bytes())?);

    let mut t = Csv::new(["target", "row", "base_value", "prediction", "efficiency_gap", "feature", "value", "phi"]);
    for o in &out.targets {
        for (row, e) in o.test_rows.iter().zip(&o.explanations) {
            for ((name, x), phi) in e.feature_names.iter().zip(&e.instance).zip(&e.phi) {
                t.row([
                    o.target.name().to_string(),
                    row.to_string(),
                    fmt_value(e.base_value),
                    fmt_value(e.prediction),
                    fmt_value(e.efficiency_gap()),
                    name.clone(),
                    fmt_value(*x),
                    fmt_value(*phi),
                ]);
            }
        }
    }
    written.push(write(dir, EXPLANATIONS, &t.into_bytes())?);

    let summary = out.summary("run", ds);
    let mut header = vec!["row".to_string()];
    header.extend(summary.link_metrics.iter().map(|m| m.0.clone()));
    let mut t = Csv::new(&header);
    for (k, row) in out.associations.associated().enumerate() {
        let mut line = vec![row.to_string()];
        line.extend(summary.link_metrics.iter().map(|m| fmt_value(m.1[k])));
        t.row(line);
    }
    written.push(write(dir, LINK_METRICS, &t.into_bytes())?);

    let mut t = Csv::new(["target", "training_loss", "train_rows", "test_rows", "explained_rows"]);
    for o in &out.targets {
        t.row([
            o.target.name().to_string(),
            fmt_value(o.training_loss),
            o.train_rows.len().to_string(),
            o.test_rows.len().to_string(),
            o.explanations.len().to_string(),
        ]);
    }
    written.push(write(dir, TRAINING, &t.into_bytes())?);

    written.push(write(dir, SUMMARY, run_summary_text(out, ds).as_bytes())?);
    Ok(written)
}

fn run_summary_text(out: &PipelineOutput, ds: &Dataset) -> String {
    let a = &out.associations;
    let mut s = String::new();
    let kind = out.targets.first().map_or("none".to_string(), |t| t.model.kind.to_string());
    s += &format!("model: {kind}\n");
    s += &format!("users: {}, associated: {}, cells: {}\n", a.users.len(), a.n_associated(), a.cells.len());
    for o in &out.targets {
        let worst = o.explanations.iter().map(|e| e.efficiency_gap()).fold(0.0, f64::max);
        s += &format!(
            "{}: training loss {:.6}, {} train / {} test rows, top features {}, max efficiency gap {:.3e}\n",
            o.target,
            o.training_loss,
            o.train_rows.len(),
            o.test_rows.len(),
            o.importance.ranked_names().iter().take(3).copied().collect::<Vec<_>>().join(" > "),
            worst
        );
    }
    let obj = objective_value(out, ds);
    s += &format!(
        "objective: predicted CQI sum {:.3} over {} users (recorded {:.3})\n",
        obj.predicted, obj.users, obj.ground_truth
    );
    let c = &out.counters;
    s += &format!(
        "counters: {} link evaluations, {} model evaluations, {} coalition evaluations, {} explained rows\n",
        c.link_evaluations, c.model_evaluations, c.coalition_evaluations, c.explained_rows
    );
    s
}

struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> CliResult<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        let header = r
            .headers()
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Self { path: path.to_path_buf(), header, rows })
    }

    fn col(&self, name: &str) -> CliResult<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::validation(format!("{}: missing column `{name}`", self.path.display())))
    }

    fn num(&self, row: usize, col: usize) -> CliResult<f64> {
        let v = &self.rows[row][col];
        if v.is_empty() {
            return Ok(f64::NAN);
        }
        v.parse().map_err(|_| {
            CliError::validation(format!("{}: row {}: `{v}` is not a number", self.path.display(), row + 2))
        })
    }

    fn target(&self, row: usize, col: usize) -> CliResult<Field> {
        let v = &self.rows[row][col];
        Field::parse(v).filter(|f| f.is_target()).ok_or_else(|| {
            CliError::validation(format!("{}: row {}: `{v}` is not a target", self.path.display(), row + 2))
        })
    }
}

/// Reads one run directory back into the report's input form. The run is
/// named after the directory; its model kind comes from the manifest.
pub fn read_run(dir: &Path) -> CliResult<RunSummary> {
    let name = dir
        .canonicalize()
        .unwrap_or_else(|_| dir.to_path_buf())
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| CliError::validation(format!("{}: cannot name run", dir.display())))?;
    let manifest = KeyValues::load(&dir.join(MANIFEST_FILE))?;
    let kind: ModelKind = manifest
        .get("config.model")
        .ok_or_else(|| CliError::validation(format!("{}: manifest has no config.model", dir.display())))?
        .parse()
        .map_err(|e: ioexai_core::Error| CliError::validation(format!("{}: {e}", dir.display())))?;

    let preds = Table::read(&dir.join(PREDICTIONS))?;
    let (ct, cp, cy) = (preds.col("target")?, preds.col("prediction")?, preds.col("truth")?);
    let mut targets: Vec<TargetSummary> = Vec::new();
    for i in 0..preds.rows.len() {
        let f = preds.target(i, ct)?;
        let (p, y) = (preds.num(i, cp)?, preds.num(i, cy)?);
        match targets.iter_mut().find(|t| t.target == f) {
            Some(t) => {
                t.predictions.push(p);
                t.truth.push(y);
            }
            None => targets.push(TargetSummary { target: f, predictions: vec![p], truth: vec![y], importance: None }),
        }
    }

    let coef = Table::read(&dir.join(COEFFICIENTS))?;
    let (ct, cf, cm, cr) = (coef.col("target")?, coef.col("feature")?, coef.col("mean_abs_phi")?, coef.col("rank")?);
    for t in &mut targets {
        let mut entries = Vec::new();
        for i in 0..coef.rows.len() {
            if coef.target(i, ct)? == t.target {
                let rank: usize = coef.rows[i][cr].parse().map_err(|_| {
                    CliError::validation(format!("{}: row {}: bad rank", coef.path.display(), i + 2))
                })?;
                entries.push((coef.rows[i][cf].clone(), coef.num(i, cm)?, rank));
            }
        }
        if entries.is_empty() {
            continue;
        }
        let mut rank: Vec<usize> = (0..entries.len()).collect();
        rank.sort_by_key(|&i| entries[i].2);
        t.importance = Some(GlobalImportance {
            feature_names: entries.iter().map(|e| e.0.clone()).collect(),
            mean_abs_phi: entries.iter().map(|e| e.1).collect(),
            rank,
        });
    }

    let links = Table::read(&dir.join(LINK_METRICS))?;
    let mut link_metrics = Vec::new();
    for (c, name) in links.header.iter().enumerate().skip(1) {
        let col = (0..links.rows.len()).map(|i| links.num(i, c)).collect::<CliResult<Vec<f64>>>()?;
        link_metrics.push((name.clone(), col));
    }
    Ok(RunSummary { name, kind, targets, link_metrics })
}

/// Report files in write order.
pub const REPORT_FILES: [&str; 11] = [
    "scores.csv",
    "improvements.csv",
    "importance.csv",
    "correlation.csv",
    "cqi_distribution.csv",
    "summary.txt",
    "cqi_box.svg",
    "scores.svg",
    "rates.svg",
    "importance.svg",
    "correlation.svg",
];

fn summary_row(t: &mut Csv, series: &str, s: &Summary) {
    t.row([
        series.to_string(),
        s.count.to_string(),
        fmt_value(s.min),
        fmt_value(s.p25),
        fmt_value(s.p50),
        fmt_value(s.p75),
        fmt_value(s.max),
        fmt_value(s.mean),
    ]);
}

/// Renders every report file as `(name, bytes)`, in [`REPORT_FILES`] order.
pub fn render_report(report: &ComparisonReport) -> Vec<(&'static str, Vec<u8>)> {
    let mut files = Vec::new();

    let mut t = Csv::new([
        "run", "model", "target", "r_squared", "mape_pct", "mape_rows", "mape_excluded", "mean_prediction",
        "mean_truth",
    ]);
    for s in &report.scores {
        t.row([
            s.run.clone(),
            s.kind.to_string(),
            s.target.to_string(),
            opt(s.r_squared),
            opt(s.mape.map(|m| m.percent)),
            s.mape.map_or(String::new(), |m| m.included.to_string()),
            s.mape.map_or(String::new(), |m| m.excluded.to_string()),
            fmt_value(s.mean_prediction),
            fmt_value(s.mean_truth),
        ]);
    }
    files.push(("scores.csv", t.into_bytes()));

    let mut t = Csv::new(["run", "model", "target", "reference", "actual", "reference_value", "improvement_pct"]);
    for i in &report.improvements {
        t.row([
            i.run.clone(),
            i.kind.to_string(),
            i.target.to_string(),
            report.reference.clone(),
            fmt_value(i.actual),
            fmt_value(i.reference),
            opt(i.percent),
        ]);
    }
    files.push(("improvements.csv", t.into_bytes()));

    let mut t = Csv::new(["run", "target", "feature", "mean_abs_phi", "rank"]);
    for (run, target, imp) in &report.importance {
        for (pos, &i) in imp.rank.iter().enumerate() {
            t.row([
                run.clone(),
                target.to_string(),
                imp.feature_names[i].clone(),
                fmt_value(imp.mean_abs_phi[i]),
                (pos + 1).to_string(),
            ]);
        }
    }
    files.push(("importance.csv", t.into_bytes()));

    let names = report.correlation.as_ref().map_or(Vec::new(), |c| c.names.clone());
    let mut header = vec!["metric".to_string()];
    header.extend(names.iter().cloned());
    let mut t = Csv::new(&header);
    if let Some(c) = &report.correlation {
        let k = c.names.len();
        for (i, n) in c.names.iter().enumerate() {
            let mut line = vec![n.clone()];
            line.extend((0..k).map(|j| fmt_value(c.values[i * k + j])));
            t.row(line);
        }
    }
    files.push(("correlation.csv", t.into_bytes()));

    let mut boxes: Vec<(String, Summary)> = Vec::new();
    if let Some(s) = report.truth_cqi_stats {
        boxes.push(("truth".into(), s));
    }
    for s in &report.scores {
        if let Some(c) = s.cqi_stats {
            boxes.push((s.run.clone(), c));
        }
    }
    let mut t = Csv::new(["series", "count", "min", "p25", "p50", "p75", "max", "mean"]);
    for (n, s) in &boxes {
        summary_row(&mut t, n, s);
    }
    files.push(("cqi_distribution.csv", t.into_bytes()));

    files.push(("summary.txt", summary_text(report).into_bytes()));

    files.push(("cqi_box.svg", svg::box_summary("CQI distribution", "CQI", &boxes).into_bytes()));

    let label = |s: &ioexai_core::eval::ModelScore| format!("{} {}", s.run, s.target);
    let groups: Vec<String> = report.scores.iter().map(label).collect();
    let series = vec![
        ("R²".to_string(), report.scores.iter().map(|s| s.r_squared.unwrap_or(f64::NAN)).collect()),
        ("MAPE / 100".to_string(), report.scores.iter().map(|s| s.mape.map_or(f64::NAN, |m| m.percent / 100.0)).collect()),
    ];
    files.push(("scores.svg", svg::grouped_bars("Prediction scores", "score", &groups, &series).into_bytes()));

    let rate_scores: Vec<_> =
        report.scores.iter().filter(|s| matches!(s.target, Field::DlMbps | Field::UlMbps)).collect();
    let groups: Vec<String> = rate_scores.iter().map(|s| label(s)).collect();
    let series = vec![
        ("predicted".to_string(), rate_scores.iter().map(|s| s.mean_prediction).collect()),
        ("truth".to_string(), rate_scores.iter().map(|s| s.mean_truth).collect()),
    ];
    files.push(("rates.svg", svg::grouped_bars("Mean data rate", "Mbps", &groups, &series).into_bytes()));

    let bars: Vec<(String, f64)> = report
        .importance
        .first()
        .map(|(_, _, imp)| imp.rank.iter().map(|&i| (imp.feature_names[i].clone(), imp.mean_abs_phi[i])).collect())
        .unwrap_or_default();
    let title = report
        .importance
        .first()
        .map_or("Feature importance".to_string(), |(run, target, _)| format!("Feature importance: {run} {target}"));
    files.push(("importance.svg", svg::bar_chart(&title, "mean |phi|", &bars).into_bytes()));

    let (names, values) = report.correlation.as_ref().map_or((Vec::new(), Vec::new()), |c| (c.names.clone(), c.values.clone()));
    files.push(("correlation.svg", svg::heat_table("Pearson correlation", &names, &values).into_bytes()));

    files
}

fn summary_text(report: &ComparisonReport) -> String {
    let mut s = format!("reference: {}\n\nscores\n", report.reference);
    for x in &report.scores {
        s += &format!(
            "  {:<16} {:<18} {:<8} R² {:>8} MAPE {:>9} mean {:.4} (truth {:.4})\n",
            x.run,
            x.kind.name(),
            x.target.name(),
            x.r_squared.map_or("n/a".to_string(), |v| format!("{v:.4}")),
            x.mape.map_or("n/a".to_string(), |m| format!("{:.2}%", m.percent)),
            x.mean_prediction,
            x.mean_truth
        );
    }
    s += "\nimprovement of mean prediction over the reference\n";
    for i in &report.improvements {
        s += &format!(
            "  {:<16} {:<8} {:.4} vs {:.4}: {}\n",
            i.run,
            i.target.name(),
            i.actual,
            i.reference,
            i.percent.map_or("n/a".to_string(), |p| format!("{p:+.2}%"))
        );
    }
    if !report.importance.is_empty() {
        s += "\nfeature ranking\n";
        for (run, target, imp) in &report.importance {
            s += &format!("  {run} {target}: {}\n", imp.ranked_names().join(" > "));
        }
    }
    if let Some(c) = &report.correlation {
        let k = c.names.len();
        let find = |n: &str| c.names.iter().position(|x| x == n);
        if let (Some(a), Some(b)) = (find("sinr_db"), find("rsrq_db")) {
            s += &format!("\nPearson correlation sinr_db vs rsrq_db: {:.4}\n", c.values[a * k + b]);
        }
    }
    s
}

/// Builds the report from run directories and writes its files into `out`.
pub fn write_report(run_dirs: &[PathBuf], reference: &str, out: &Path) -> CliResult<(ComparisonReport, Vec<PathBuf>)> {
    let runs = run_dirs.iter().map(|d| read_run(d)).collect::<CliResult<Vec<_>>>()?;
    let mut names: Vec<&str> = runs.iter().map(|r| r.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::validation(format!("two runs are named `{}`", w[0])));
    }
    let report = build_comparison_report(&runs, reference)?;
    let mut written = Vec::new();
    for (name, bytes) in render_report(&report) {
        written.push(write(out, name, &bytes)?);
    }
    Ok((report, written))
}
