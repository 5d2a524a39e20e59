//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may repeat only
//! where documented (`site`). Every error names the file and line. A run
//! manifest is also accepted as a config: its `config.*` entries are read
//! with the prefix stripped and everything else is ignored.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use ioexai_core::dataset::{Field, GnbSite, PathLoss, Topology};
use ioexai_core::pipeline::{MobilityMode, PipelineConfig};
use ioexai_core::regress::{FitConfig, ModelKind};
use ioexai_core::synth::{Area, RateCurve, ScenarioConfig};

use crate::error::{CliError, CliResult};
use crate::manifest::MANIFEST_FORMAT_KEY;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyValues {
    pub source: String,
    pub entries: Vec<Entry>,
}

impl KeyValues {
    pub fn parse(text: &str, source: &str) -> CliResult<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::validation(format!("{source}:{}: expected `key = value`, found `{line}`", i + 1)));
            };
            let key = k.trim();
            let valid = !key.is_empty()
                && key.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-' | b'@'));
            if !valid {
                return Err(CliError::validation(format!("{source}:{}: invalid key `{key}`", i + 1)));
            }
            entries.push(Entry { key: key.to_string(), value: v.trim().to_string(), line: i + 1 });
        }
        Ok(Self { source: source.to_string(), entries })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|e| e.key == key).map(|e| e.value.as_str())
    }

    pub fn is_manifest(&self) -> bool {
        self.entries.iter().any(|e| e.key == MANIFEST_FORMAT_KEY)
    }

    /// The configuration entries: `config.*` keys of a manifest, or the file
    /// itself otherwise.
    pub fn config_view(&self) -> KeyValues {
        if !self.is_manifest() {
            return self.clone();
        }
        let entries = self
            .entries
            .iter()
            .filter_map(|e| {
                e.key.strip_prefix("config.").map(|k| Entry { key: k.to_string(), value: e.value.clone(), line: e.line })
            })
            .collect();
        KeyValues { source: self.source.clone(), entries }
    }
}

/// Typed access that tracks which keys were consumed, so leftovers can be
/// reported as unknown.
pub struct Reader<'a> {
    kv: &'a KeyValues,
    used: Vec<bool>,
}

impl<'a> Reader<'a> {
    pub fn new(kv: &'a KeyValues) -> Self {
        Self { kv, used: vec![false; kv.entries.len()] }
    }

    fn err(&self, e: &Entry, msg: impl std::fmt::Display) -> CliError {
        CliError::validation(format!("{}:{}: `{}`: {msg}", self.kv.source, e.line, e.key))
    }

    fn single(&mut self, key: &str) -> CliResult<Option<&'a Entry>> {
        let mut found: Option<&'a Entry> = None;
        for (i, e) in self.kv.entries.iter().enumerate() {
            if e.key == key {
                if found.is_some() {
                    return Err(self.err(e, "key given more than once"));
                }
                self.used[i] = true;
                found = Some(e);
            }
        }
        Ok(found)
    }

    /// Parses `key` with `parse`; `None` if absent.
    pub fn with<T>(&mut self, key: &str, parse: impl FnOnce(&str) -> Result<T, String>) -> CliResult<Option<T>> {
        match self.single(key)? {
            None => Ok(None),
            Some(e) => parse(&e.value).map(Some).map_err(|m| self.err(e, m)),
        }
    }

    pub fn value<T: FromStr>(&mut self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.with(key, |v| v.parse::<T>().map_err(|e| format!("cannot parse `{v}`: {e}")))
    }

    pub fn set<T: FromStr>(&mut self, key: &str, slot: &mut T) -> CliResult<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.value(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Every occurrence of a repeatable key, parsed in file order.
    pub fn all<T>(&mut self, key: &str, mut parse: impl FnMut(&str) -> Result<T, String>) -> CliResult<Vec<T>> {
        let mut out = Vec::new();
        for (i, e) in self.kv.entries.iter().enumerate() {
            if e.key == key {
                self.used[i] = true;
                out.push(parse(&e.value).map_err(|m| self.err(e, m))?);
            }
        }
        Ok(out)
    }

    /// Fails on the first key nobody asked for.
    pub fn finish(self) -> CliResult<()> {
        match self.kv.entries.iter().zip(&self.used).find(|(_, u)| !**u) {
            None => Ok(()),
            Some((e, _)) => Err(self.err(e, "unknown key")),
        }
    }
}

fn numbers<const N: usize>(v: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, found {}", parts.len()));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
    }
    Ok(out)
}

fn parse_site(v: &str) -> Result<GnbSite, String> {
    let [id, x, y, tx, r] = numbers::<5>(v)?;
    if id < 0.0 || id.fract() != 0.0 || id > f64::from(u32::MAX) {
        return Err(format!("site id `{id}` is not a non-negative integer"));
    }
    Ok(GnbSite { cell_id: id as u32, position: (x, y), tx_power_dbm: tx, coverage_radius_m: r })
}

pub(crate) fn parse_pair(v: &str) -> Result<(usize, usize), String> {
    let (a, b) = v.split_once(',').ok_or("expected `n_train, n_test`")?;
    let a = a.trim().parse().map_err(|_| format!("`{}` is not a count", a.trim()))?;
    let b = b.trim().parse().map_err(|_| format!("`{}` is not a count", b.trim()))?;
    Ok((a, b))
}

/// Reads topology keys over `topo`: `site` lines replace the site list.
fn read_topology(r: &mut Reader<'_>, topo: &mut Topology) -> CliResult<()> {
    r.set("path_loss_exponent", &mut topo.path_loss.exponent)?;
    r.set("ref_loss_db", &mut topo.path_loss.ref_loss_db)?;
    r.set("ref_distance_m", &mut topo.path_loss.ref_distance_m)?;
    r.set("num_rbs", &mut topo.num_rbs)?;
    r.set("bandwidth_hz", &mut topo.bandwidth_hz)?;
    r.set("interference_load", &mut topo.interference_load)?;
    let sites = r.all("site", parse_site)?;
    if !sites.is_empty() {
        topo.sites = sites;
    }
    Ok(())
}

fn write_topology(out: &mut Vec<(String, String)>, t: &Topology) {
    let PathLoss { exponent, ref_loss_db, ref_distance_m } = t.path_loss;
    push(out, "path_loss_exponent", exponent);
    push(out, "ref_loss_db", ref_loss_db);
    push(out, "ref_distance_m", ref_distance_m);
    push(out, "num_rbs", t.num_rbs);
    push(out, "bandwidth_hz", t.bandwidth_hz);
    push(out, "interference_load", t.interference_load);
    for s in &t.sites {
        let v = format!("{}, {}, {}, {}, {}", s.cell_id, s.position.0, s.position.1, s.tx_power_dbm, s.coverage_radius_m);
        out.push(("site".into(), v));
    }
}

fn push(out: &mut Vec<(String, String)>, key: &str, v: impl std::fmt::Display) {
    out.push((key.to_string(), v.to_string()));
}

/// Renders pairs as `key = value` lines.
pub fn render(pairs: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

pub fn topology_from(kv: &KeyValues) -> CliResult<Topology> {
    let mut topo = Topology::new(Vec::new());
    let mut r = Reader::new(kv);
    read_topology(&mut r, &mut topo)?;
    r.finish()?;
    topo.validate().map_err(|e| CliError::from(e).context(&kv.source))?;
    Ok(topo)
}

pub fn topology_pairs(t: &Topology) -> Vec<(String, String)> {
    let mut out = Vec::new();
    write_topology(&mut out, t);
    out
}

/// Scenario plus the train/test sizes applied after generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerateConfig {
    pub scenario: ScenarioConfig,
    pub split: (usize, usize),
}

/// 70 / 30 split of `n`, used when a scenario names no split.
pub fn default_split(n: usize) -> (usize, usize) {
    let train = (n * 7).div_ceil(10);
    (train, n - train)
}

/// Reads a scenario. Keys default to the reference scenario.
pub fn generate_from(kv: &KeyValues) -> CliResult<GenerateConfig> {
    let kv = kv.config_view();
    let mut r = Reader::new(&kv);
    let seed = r.value("seed")?.unwrap_or(0);
    let mut s = ScenarioConfig::reference(seed);
    r.set("sessions", &mut s.sessions)?;
    r.set("min_speed_kmh", &mut s.min_speed_kmh)?;
    r.set("max_speed_kmh", &mut s.max_speed_kmh)?;
    r.set("shadowing_db", &mut s.shadowing_db)?;
    r.set("sinr_measurement_db", &mut s.sinr_measurement_db)?;
    for (prefix, curve) in [("dl", &mut s.downlink), ("ul", &mut s.uplink)] {
        r.set(&format!("{prefix}_cap_mbps"), &mut curve.cap_mbps)?;
        r.set(&format!("{prefix}_slope"), &mut curve.slope)?;
        r.set(&format!("{prefix}_midpoint"), &mut curve.midpoint)?;
        r.set(&format!("{prefix}_noise_sigma"), &mut curve.noise_sigma)?;
    }
    if let Some([x_min, x_max, y_min, y_max]) = r.with("area", numbers::<4>)? {
        s.area = Some(Area { x_min, x_max, y_min, y_max });
    }
    r.set("start_time", &mut s.start_time)?;
    r.set("session_interval_s", &mut s.session_interval_s)?;
    read_topology(&mut r, &mut s.topology)?;
    let split = r.with("split", parse_pair)?;
    r.finish()?;
    s.validate().map_err(|e| CliError::from(e).context(&kv.source))?;
    let split = split.unwrap_or_else(|| default_split(s.sessions));
    if split.0 + split.1 > s.sessions {
        return Err(CliError::validation(format!(
            "{}: split {} + {} exceeds {} sessions",
            kv.source, split.0, split.1, s.sessions
        )));
    }
    Ok(GenerateConfig { scenario: s, split })
}

pub fn generate_pairs(g: &GenerateConfig) -> Vec<(String, String)> {
    let s = &g.scenario;
    let mut out = Vec::new();
    push(&mut out, "seed", s.seed);
    push(&mut out, "sessions", s.sessions);
    push(&mut out, "min_speed_kmh", s.min_speed_kmh);
    push(&mut out, "max_speed_kmh", s.max_speed_kmh);
    push(&mut out, "shadowing_db", s.shadowing_db);
    push(&mut out, "sinr_measurement_db", s.sinr_measurement_db);
    for (prefix, c) in [("dl", &s.downlink), ("ul", &s.uplink)] {
        let RateCurve { cap_mbps, slope, midpoint, noise_sigma } = *c;
        push(&mut out, &format!("{prefix}_cap_mbps"), cap_mbps);
        push(&mut out, &format!("{prefix}_slope"), slope);
        push(&mut out, &format!("{prefix}_midpoint"), midpoint);
        push(&mut out, &format!("{prefix}_noise_sigma"), noise_sigma);
    }
    if let Some(a) = s.area {
        push(&mut out, "area", format!("{}, {}, {}, {}", a.x_min, a.x_max, a.y_min, a.y_max));
    }
    push(&mut out, "start_time", s.start_time);
    push(&mut out, "session_interval_s", s.session_interval_s);
    write_topology(&mut out, &s.topology);
    push(&mut out, "split", format!("{}, {}", g.split.0, g.split.1));
    out
}

pub(crate) fn parse_kind(v: &str) -> Result<ModelKind, String> {
    v.parse().map_err(|e: ioexai_core::Error| e.to_string())
}

pub(crate) fn parse_optional(v: &str, none: &str) -> Result<Option<usize>, String> {
    if v == none {
        Ok(None)
    } else {
        v.parse().map(Some).map_err(|_| format!("expected a count or `{none}`, found `{v}`"))
    }
}

pub(crate) fn parse_target(v: &str) -> Result<Field, String> {
    match Field::parse(v) {
        Some(f) if f.is_target() => Ok(f),
        _ => Err(format!("`{v}` is not a target (expected cqi, dl_mbps or ul_mbps)")),
    }
}

fn read_fit(r: &mut Reader<'_>, fit: &mut FitConfig) -> CliResult<()> {
    r.set("seed", &mut fit.seed)?;
    r.set("n_estimators", &mut fit.n_estimators)?;
    if let Some(d) = r.with("max_depth", |v| parse_optional(v, "none"))? {
        fit.max_depth = d;
    }
    r.set("min_samples_leaf", &mut fit.min_samples_leaf)?;
    r.set("learning_rate", &mut fit.learning_rate)?;
    r.set("subsample", &mut fit.subsample)?;
    r.set("feature_fraction", &mut fit.feature_fraction)?;
    Ok(())
}

fn write_fit(out: &mut Vec<(String, String)>, kind: ModelKind, fit: &FitConfig) {
    push(out, "model", kind);
    push(out, "seed", fit.seed);
    push(out, "n_estimators", fit.n_estimators);
    push(out, "max_depth", fit.max_depth.map_or("none".to_string(), |d| d.to_string()));
    push(out, "min_samples_leaf", fit.min_samples_leaf);
    push(out, "learning_rate", fit.learning_rate);
    push(out, "subsample", fit.subsample);
    push(out, "feature_fraction", fit.feature_fraction);
}

/// Model kind and fit settings for `train`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub fit: FitConfig,
    pub target: Field,
}

/// Reads a training config; `kind` overrides the file's `model` key.
pub fn train_from(kv: &KeyValues, kind: Option<ModelKind>) -> CliResult<TrainConfig> {
    let kv = kv.config_view();
    let mut r = Reader::new(&kv);
    let file_kind = r.with("model", parse_kind)?;
    let kind = kind.or(file_kind).unwrap_or(ModelKind::ExtraTrees);
    let mut fit = FitConfig::for_kind(kind);
    read_fit(&mut r, &mut fit)?;
    let target = r.with("target", parse_target)?.unwrap_or(Field::Cqi);
    r.finish()?;
    fit.validate().map_err(|e| CliError::from(e).context(&kv.source))?;
    Ok(TrainConfig { kind, fit, target })
}

pub fn train_pairs(t: &TrainConfig) -> Vec<(String, String)> {
    let mut out = Vec::new();
    write_fit(&mut out, t.kind, &t.fit);
    push(&mut out, "target", t.target.name());
    out
}

/// Reads a pipeline config; `kind` overrides the file's `model` key.
pub fn pipeline_from(kv: &KeyValues, kind: Option<ModelKind>) -> CliResult<PipelineConfig> {
    let kv = kv.config_view();
    let mut r = Reader::new(&kv);
    let file_kind = r.with("model", parse_kind)?;
    let mut cfg = PipelineConfig::new(kind.or(file_kind).unwrap_or(ModelKind::ExtraTrees));
    r.set("omega_dbm", &mut cfg.omega_dbm)?;
    r.set("zeta_db", &mut cfg.zeta_db)?;
    r.set("h_max_m", &mut cfg.h_max_m)?;
    r.set("delta_t_h", &mut cfg.delta_t_h)?;
    if let Some(m) = r.with("mobility", |v| v.parse::<MobilityMode>().map_err(|e| e.to_string()))? {
        cfg.mobility = m;
    }
    read_fit(&mut r, &mut cfg.fit)?;
    if let Some(t) = r.with("targets", |v| v.split(',').map(|t| parse_target(t.trim())).collect())? {
        cfg.targets = t;
    }
    r.set("background_cap", &mut cfg.background_cap)?;
    if let Some(c) = r.with("explain_cap", |v| parse_optional(v, "all"))? {
        cfg.explain_cap = c;
    }
    r.finish()?;
    cfg.validate().map_err(|e| CliError::from(e).context(&kv.source))?;
    Ok(cfg)
}

pub fn pipeline_pairs(c: &PipelineConfig) -> Vec<(String, String)> {
    let mut out = Vec::new();
    push(&mut out, "omega_dbm", c.omega_dbm);
    push(&mut out, "zeta_db", c.zeta_db);
    push(&mut out, "h_max_m", c.h_max_m);
    push(&mut out, "delta_t_h", c.delta_t_h);
    push(&mut out, "mobility", c.mobility.name());
    write_fit(&mut out, c.kind, &c.fit);
    push(&mut out, "targets", c.targets.iter().map(|t| t.name()).collect::<Vec<_>>().join(", "));
    push(&mut out, "background_cap", c.background_cap);
    push(&mut out, "explain_cap", c.explain_cap.map_or("all".to_string(), |n| n.to_string()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(text: &str) -> KeyValues {
        KeyValues::parse(text, "test.conf").unwrap()
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = KeyValues::parse("# c\nseed = 1\nbroken line\n", "s.conf").unwrap_err();
        assert!(e.message.starts_with("s.conf:3:"), "{}", e.message);
        let e = generate_from(&kv("seed = 1\nsessions = many\n")).unwrap_err();
        assert!(e.message.contains("test.conf:2"), "{}", e.message);
        let e = generate_from(&kv("colour = blue\n")).unwrap_err();
        assert!(e.message.contains("unknown key"), "{}", e.message);
        let e = generate_from(&kv("seed = 1\nseed = 2\n")).unwrap_err();
        assert!(e.message.contains("more than once"), "{}", e.message);
    }

    #[test]
    fn scenario_round_trips_through_pairs() {
        let g = generate_from(&kv("seed = 9\nsessions = 40\nsite = 3, 0, 0, 43, 300\nsplit = 30, 10\narea = 0, 10, 0, 20\n")).unwrap();
        assert_eq!(g.scenario.topology.sites.len(), 1);
        assert_eq!(g.split, (30, 10));
        let again = generate_from(&kv(&render(&generate_pairs(&g)))).unwrap();
        assert_eq!(again, g);
        assert_eq!(generate_from(&kv("")).unwrap().split, (1545, 661));
        assert!(generate_from(&kv("sessions = 10\nsplit = 8, 8\n")).is_err());
    }

    #[test]
    fn pipeline_round_trips_and_validates() {
        let c = pipeline_from(&kv("model = linear\nomega_dbm = -100\ntargets = dl_mbps\nexplain_cap = 5\nmobility = literal\n"), None)
            .unwrap();
        assert_eq!(c.kind, ModelKind::Linear);
        assert_eq!(c.targets, vec![Field::DlMbps]);
        assert_eq!(pipeline_from(&kv(&render(&pipeline_pairs(&c))), None).unwrap(), c);
        assert!(pipeline_from(&kv("n_estimators = 0\n"), None).is_err());
        assert!(pipeline_from(&kv("targets = sinr_db\n"), None).is_err());
        assert_eq!(pipeline_from(&kv("model = linear\n"), Some(ModelKind::AdaBoostR2)).unwrap().kind, ModelKind::AdaBoostR2);
    }

    #[test]
    fn manifest_view_strips_prefix() {
        let m = kv(&format!("{MANIFEST_FORMAT_KEY} = 1\ncommand = run\nconfig.model = linear\ninput.dataset = x\n"));
        let c = pipeline_from(&m, None).unwrap();
        assert_eq!(c.kind, ModelKind::Linear);
    }

    #[test]
    fn train_defaults_follow_kind() {
        let t = train_from(&kv("model = gradient_boosting\nn_estimators = 7\n"), None).unwrap();
        assert_eq!(t.fit.max_depth, Some(3));
        assert_eq!(t.fit.n_estimators, 7);
        assert_eq!(t.target, Field::Cqi);
        assert_eq!(train_from(&kv(&render(&train_pairs(&t))), None).unwrap(), t);
    }
}
