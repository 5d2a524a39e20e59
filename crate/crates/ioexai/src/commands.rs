//! The six commands. Each writes into `ctx.out` and finishes with a
//! `manifest.txt` recording settings, input digests, output digests and
//! counters.

use std::path::{Path, PathBuf};

use ioexai_core::dataset::{features_for, summary_stats, train_test_split, Dataset, Field};
use ioexai_core::pipeline::{objective_value, run_pipeline};
use ioexai_core::regress::{fit_ensemble, training_loss, EnsembleModel, ModelKind};
use ioexai_core::shapley::{global_importance, BackgroundSet};
use ioexai_core::synth::synth_generate;
use ioexai_core::Matrix;

use crate::cli::Context;
use crate::config::{self, KeyValues, Reader};
use crate::error::{CliError, CliResult};
use crate::manifest::{recorded_input, sha256_file, Manifest, MANIFEST_FILE};
use crate::model_file;
use crate::report::{self, write, Csv};
use crate::table::{self, fmt_value, ColumnMapping};

pub const DATASET_FILE: &str = "sessions.csv";
pub const MODEL_FILE: &str = "model.txt";

/// Tolerance of the per-row efficiency check in `explain`.
pub const EFFICIENCY_TOLERANCE: f64 = 1e-9;

fn finish(ctx: &Context, mut m: Manifest, written: &[PathBuf]) -> CliResult<()> {
    if let Some(p) = &ctx.config_path {
        m.input("config", p)?;
    }
    for p in written {
        m.output(p)?;
    }
    m.write(&ctx.out.join(MANIFEST_FILE))
}

fn parse_kind(v: Option<&str>) -> CliResult<Option<ModelKind>> {
    v.map(|k| k.parse().map_err(|e: ioexai_core::Error| CliError::usage(e.to_string()))).transpose()
}

pub fn generate(ctx: &Context) -> CliResult<()> {
    let mut g = config::generate_from(&ctx.config())?;
    if let Some(seed) = ctx.seed {
        g.scenario.seed = seed;
    }
    let ds = synth_generate(&g.scenario)?;
    let ds = train_test_split(&ds, g.split.0, g.split.1, g.scenario.seed)?;
    let csv = ctx.out.join(DATASET_FILE);
    let mut written = table::write_dataset(&ds, &csv)?;
    let stats = summary_stats(&ds)?;
    written.push(write(&ctx.out, "summary.csv", table::summary_csv(&stats).as_bytes())?);

    let mut m = Manifest::new("generate");
    m.config = config::generate_pairs(&g);
    m.counter("sessions", ds.len());
    m.counter("train_rows", g.split.0);
    m.counter("test_rows", g.split.1);
    finish(ctx, m, &written)?;
    ctx.say(format!(
        "generated {} sessions ({} train / {} test) over {} gNBs in {}",
        ds.len(),
        g.split.0,
        g.split.1,
        ds.topology.as_ref().map_or(0, |t| t.sites.len()),
        csv.display()
    ));
    Ok(())
}

pub fn ingest(ctx: &Context, input: &Path, mapping: Option<&Path>, split: Option<&str>) -> CliResult<()> {
    let kv = ctx.config().config_view();
    let mut r = Reader::new(&kv);
    let file_split = r.with("split", config::parse_pair)?;
    let file_seed: Option<u64> = r.value("seed")?;
    r.finish()?;
    let split = match split {
        Some(s) => Some(config::parse_pair(s).map_err(|e| CliError::usage(format!("--split: {e}")))?),
        None => file_split,
    };
    let seed = ctx.seed.or(file_seed).unwrap_or(0);

    let map = match mapping {
        Some(p) => ColumnMapping::load(p)?,
        None => ColumnMapping::identity(),
    };
    let rep = table::ingest_csv(input, &map)?;
    let mut ds = rep.dataset.clone();
    if let Some((a, b)) = split {
        ds = train_test_split(&ds, a, b, seed)?;
    }
    let csv = ctx.out.join(DATASET_FILE);
    let mut written = table::write_dataset(&ds, &csv)?;
    written.push(write(&ctx.out, "summary.csv", table::summary_csv(&summary_stats(&ds)?).as_bytes())?);

    let mut text = format!("rows read: {}\nrows kept: {}\nrows dropped: {}\n", rep.rows_read, ds.len(), rep.dropped.len());
    text += &format!("rows with missing values: {}\n", rep.flagged_rows);
    for (f, n) in &rep.missing_by_field {
        text += &format!("missing {f}: {n}\n");
    }
    for (line, why) in &rep.dropped {
        text += &format!("dropped line {line}: {why}\n");
    }
    for w in &rep.warnings {
        text += &format!("warning: {w}\n");
    }
    written.push(write(&ctx.out, "ingest_report.txt", text.as_bytes())?);

    let mut m = Manifest::new("ingest");
    m.config.push(("seed".into(), seed.to_string()));
    if let Some((a, b)) = split {
        m.config.push(("split".into(), format!("{a}, {b}")));
    }
    m.input("trace", input)?;
    if let Some(p) = mapping {
        m.input("mapping", p)?;
    }
    m.counter("rows_read", rep.rows_read);
    m.counter("rows_kept", ds.len());
    m.counter("rows_dropped", rep.dropped.len());
    finish(ctx, m, &written)?;
    ctx.say(format!("ingested {} of {} rows into {}", ds.len(), rep.rows_read, csv.display()));
    Ok(())
}

/// Training rows: the train partition, or every row without a split.
fn training_rows(ds: &Dataset) -> Vec<usize> {
    ds.split.as_ref().map_or_else(|| (0..ds.len()).collect(), |s| s.train.clone())
}

pub fn train(ctx: &Context, dataset: &Path, model: Option<&str>, target: Option<&str>) -> CliResult<()> {
    let mut cfg = config::train_from(&ctx.config(), parse_kind(model)?)?;
    if let Some(t) = target {
        cfg.target = config::parse_target(t).map_err(CliError::usage)?;
    }
    if let Some(seed) = ctx.seed {
        cfg.fit.seed = seed;
    }
    let ds = table::read_dataset(dataset)?;
    let features = features_for(cfg.target, cfg.kind != ModelKind::Linear);
    let names: Vec<String> = features.iter().map(|f| f.name().to_string()).collect();
    let d = ds.design(&features, cfg.target, &training_rows(&ds));
    let model = fit_ensemble(&d.x, &d.y, cfg.kind, &cfg.fit, names, cfg.target.name().to_string())?;
    let loss = training_loss(&model.predict_matrix(&d.x)?, &d.y)?;

    let path = ctx.out.join(MODEL_FILE);
    model_file::save(&model, &path)?;
    let mut t = Csv::new(["target", "model", "training_loss", "train_rows"]);
    t.row([cfg.target.to_string(), cfg.kind.to_string(), fmt_value(loss), d.y.len().to_string()]);
    let written = vec![path.clone(), write(&ctx.out, report::TRAINING, &t.into_bytes())?];

    let mut m = Manifest::new("train");
    m.config = config::train_pairs(&cfg);
    m.input("dataset", dataset)?;
    m.counter("train_rows", d.y.len());
    m.counter("trees", model.trees.len());
    finish(ctx, m, &written)?;
    ctx.say(format!(
        "trained {} on {} for {} rows, training loss {loss:.6}, model in {}",
        cfg.kind,
        cfg.target,
        d.y.len(),
        path.display()
    ));
    Ok(())
}

/// Settings of `explain`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplainConfig {
    pub seed: u64,
    pub background_cap: usize,
    /// `test`, `train` or `all`.
    pub rows: String,
    pub explain_cap: Option<usize>,
}

fn explain_from(kv: &KeyValues, model: &EnsembleModel) -> CliResult<ExplainConfig> {
    let kv = kv.config_view();
    let mut r = Reader::new(&kv);
    let mut c = ExplainConfig { seed: model.fit_seed, background_cap: 200, rows: "test".into(), explain_cap: None };
    r.set("seed", &mut c.seed)?;
    r.set("background_cap", &mut c.background_cap)?;
    if let Some(v) = r.with("rows", |v| match v {
        "test" | "train" | "all" => Ok(v.to_string()),
        _ => Err("expected test, train or all".to_string()),
    })? {
        c.rows = v;
    }
    if let Some(v) = r.with("explain_cap", |v| config::parse_optional(v, "all"))? {
        c.explain_cap = v;
    }
    r.finish()?;
    if c.background_cap == 0 {
        return Err(CliError::validation(format!("{}: background_cap must be at least 1", kv.source)));
    }
    Ok(c)
}

/// Resolves model feature names against the dataset's columns.
pub fn model_features(model: &EnsembleModel, ds: &Dataset) -> CliResult<Vec<Field>> {
    let mut out = Vec::with_capacity(model.feature_names.len());
    for name in &model.feature_names {
        let Some(f) = Field::parse(name) else {
            return Err(CliError::validation(format!("model feature `{name}` is not a dataset column")));
        };
        if ds.records.iter().all(|r| r.is_missing(f)) {
            return Err(CliError::validation(format!(
                "model feature `{name}` has no values in the dataset; model and dataset do not match"
            )));
        }
        out.push(f);
    }
    Ok(out)
}

fn feature_matrix(ds: &Dataset, features: &[Field], rows: &[usize]) -> (Matrix, Vec<usize>) {
    let kept: Vec<usize> =
        rows.iter().copied().filter(|&i| features.iter().all(|f| !ds.records[i].is_missing(*f))).collect();
    let data = kept.iter().flat_map(|&i| features.iter().map(move |f| ds.records[i].get(*f))).collect();
    (Matrix::new(data, kept.len(), features.len()).expect("sized above"), kept)
}

pub fn explain(ctx: &Context, model_path: &Path, dataset: &Path) -> CliResult<()> {
    let model = model_file::load(model_path)?;
    let cfg = explain_from(&ctx.config(), &model)?;
    let seed = ctx.seed.unwrap_or(cfg.seed);
    let ds = table::read_dataset(dataset)?;
    let features = model_features(&model, &ds)?;

    let all: Vec<usize> = (0..ds.len()).collect();
    let (bg_rows, rows) = match (&ds.split, cfg.rows.as_str()) {
        (Some(s), "test") => (s.train.clone(), s.test.clone()),
        (Some(s), "train") => (s.train.clone(), s.train.clone()),
        (Some(s), _) => (s.train.clone(), all),
        (None, "all") => (all.clone(), all),
        (None, _) => return Err(ioexai_core::Error::MissingSplit.into()),
    };
    let (bg_x, _) = feature_matrix(&ds, &features, &bg_rows);
    if bg_x.n_rows() == 0 {
        return Err(CliError::validation("no background rows with complete features"));
    }
    let bg = BackgroundSet::sampled(&bg_x, cfg.background_cap, seed)?;
    let (x, kept) = feature_matrix(&ds, &features, &rows);
    let n = cfg.explain_cap.map_or(x.n_rows(), |c| c.min(x.n_rows()));
    let x = x.select_rows(&(0..n).collect::<Vec<_>>());
    let (importance, explanations) = global_importance(&model, &x, &bg, &model.feature_names)?;

    let worst = explanations.iter().map(|e| e.efficiency_gap()).fold(0.0, f64::max);
    let mut t = Csv::new(["target", "row", "base_value", "prediction", "efficiency_gap", "feature", "value", "phi"]);
    for (row, e) in kept.iter().zip(&explanations) {
        for ((name, v), phi) in e.feature_names.iter().zip(&e.instance).zip(&e.phi) {
            t.row([
                model.target_name.clone(),
                row.to_string(),
                fmt_value(e.base_value),
                fmt_value(e.prediction),
                fmt_value(e.efficiency_gap()),
                name.clone(),
                fmt_value(*v),
                fmt_value(*phi),
            ]);
        }
    }
    let mut written = vec![write(&ctx.out, report::EXPLANATIONS, &t.into_bytes())?];
    let mut t = Csv::new(["feature", "mean_abs_phi", "rank"]);
    for (pos, &i) in importance.rank.iter().enumerate() {
        t.row([importance.feature_names[i].clone(), fmt_value(importance.mean_abs_phi[i]), (pos + 1).to_string()]);
    }
    written.push(write(&ctx.out, "importance.csv", &t.into_bytes())?);
    let coalitions: usize = explanations.iter().map(|e| e.coalition_evaluations).sum();
    let text = format!(
        "model: {} for {}\nexplained rows: {} ({} skipped for missing features)\nbase value: {}\n\
         max efficiency gap: {worst:e} (tolerance {EFFICIENCY_TOLERANCE:e})\nranking: {}\n",
        model.kind,
        model.target_name,
        explanations.len(),
        rows.len() - kept.len(),
        fmt_value(explanations[0].base_value),
        importance.ranked_names().join(" > ")
    );
    written.push(write(&ctx.out, report::SUMMARY, text.as_bytes())?);

    let mut m = Manifest::new("explain");
    m.config = vec![
        ("seed".into(), seed.to_string()),
        ("background_cap".into(), cfg.background_cap.to_string()),
        ("rows".into(), cfg.rows.clone()),
        ("explain_cap".into(), cfg.explain_cap.map_or("all".into(), |c| c.to_string())),
    ];
    m.input("model", model_path)?;
    m.input("dataset", dataset)?;
    m.counter("explained_rows", explanations.len());
    m.counter("coalition_evaluations", coalitions);
    m.counter("max_efficiency_gap", fmt_value(worst));
    finish(ctx, m, &written)?;
    if worst.is_nan() || worst > EFFICIENCY_TOLERANCE {
        return Err(CliError::runtime(format!(
            "efficiency check failed: gap {worst:e} exceeds {EFFICIENCY_TOLERANCE:e}"
        )));
    }
    ctx.say(format!(
        "explained {} rows, max efficiency gap {worst:.3e}, top features {}",
        explanations.len(),
        importance.ranked_names().iter().take(3).copied().collect::<Vec<_>>().join(" > ")
    ));
    Ok(())
}

pub fn run(ctx: &Context, dataset: Option<&Path>, model: Option<&str>) -> CliResult<()> {
    let kv = ctx.config();
    let dataset: PathBuf = match dataset {
        Some(p) => p.to_path_buf(),
        None => {
            let (path, digest) = recorded_input(&kv, "dataset")
                .ok_or_else(|| CliError::usage("`run` needs --dataset (or --config <manifest>)"))?;
            let actual = sha256_file(&path)?;
            if actual != digest {
                return Err(CliError::validation(format!(
                    "{}: digest {actual} differs from the manifest's {digest}",
                    path.display()
                )));
            }
            path
        }
    };
    let mut cfg = config::pipeline_from(&kv, parse_kind(model)?)?;
    if let Some(seed) = ctx.seed {
        cfg.fit.seed = seed;
    }
    let ds = table::read_dataset(&dataset)?;
    if ds.split.is_none() {
        return Err(CliError::validation(format!(
            "{}: dataset has no train/test split (train_test_split); generate one or ingest with --split",
            dataset.display()
        )));
    }
    let out = run_pipeline(&ds, &cfg)?;
    let mut written = report::write_run(&ctx.out, &out, &ds)?;
    for t in &out.targets {
        let p = ctx.out.join(format!("model_{}.txt", t.target));
        model_file::save(&t.model, &p)?;
        written.push(p);
    }

    let mut m = Manifest::new("run");
    m.config = config::pipeline_pairs(&cfg);
    m.input("dataset", &dataset)?;
    let c = &out.counters;
    m.counter("users", out.associations.users.len());
    m.counter("associated", out.associations.n_associated());
    m.counter("link_evaluations", c.link_evaluations);
    m.counter("model_evaluations", c.model_evaluations);
    m.counter("coalition_evaluations", c.coalition_evaluations);
    m.counter("explained_rows", c.explained_rows);
    finish(ctx, m, &written)?;
    let obj = objective_value(&out, &ds);
    ctx.say(format!(
        "{}: {} of {} users associated, predicted CQI sum {:.3} (recorded {:.3}), artifacts in {}",
        cfg.kind,
        out.associations.n_associated(),
        out.associations.users.len(),
        obj.predicted,
        obj.ground_truth,
        ctx.out.display()
    ));
    Ok(())
}

pub fn report(ctx: &Context, runs: &[PathBuf], reference: &str) -> CliResult<()> {
    if ctx.config.as_ref().is_some_and(|c| !c.config_view().entries.is_empty()) {
        return Err(CliError::validation("`report` takes no config keys"));
    }
    let (rep, written) = report::write_report(runs, reference, &ctx.out)?;
    let mut m = Manifest::new("report");
    m.config.push(("reference".into(), reference.to_string()));
    for (i, dir) in runs.iter().enumerate() {
        m.input(&format!("run{i}"), &dir.join(report::PREDICTIONS))?;
    }
    m.counter("scores", rep.scores.len());
    finish(ctx, m, &written)?;
    ctx.say(format!("compared {} runs against `{reference}`; report in {}", runs.len(), ctx.out.display()));
    Ok(())
}
