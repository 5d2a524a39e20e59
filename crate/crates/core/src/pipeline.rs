//! Quality-aware service delivery: association, per-target fitting,
//! attribution and rate prediction.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use crate::dataset::{features_for, Dataset, Field, SessionRecord, Topology};
use crate::eval::{RunSummary, TargetSummary};
use crate::radio::{self, LinkBudget, LinkMetrics, RsrqMode};
use crate::regress::{fit_ensemble, training_loss, EnsembleModel, FitConfig, ModelKind};
use crate::rng::derive_seed;
use crate::shapley::{global_importance, BackgroundSet, Explanation, GlobalImportance};
use crate::{Error, Result};

/// How the displacement check of the mobility constraint is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MobilityMode {
    /// Passes while the displacement over one epoch stays within `h_max`.
    #[default]
    Coverage,
    /// Passes when the displacement is at least `h_max`.
    Literal,
}

impl MobilityMode {
    pub fn name(self) -> &'static str {
        match self {
            MobilityMode::Coverage => "coverage",
            MobilityMode::Literal => "literal",
        }
    }
}

impl FromStr for MobilityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coverage" => Ok(MobilityMode::Coverage),
            "literal" => Ok(MobilityMode::Literal),
            _ => Err(Error::Config(alloc::format!("unknown mobility mode `{s}` (expected coverage or literal)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Minimum RSRP (dBm).
    pub omega_dbm: f64,
    /// Minimum RSRQ (dB).
    pub zeta_db: f64,
    /// Coverage distance threshold (m).
    pub h_max_m: f64,
    /// Association epoch (hours).
    pub delta_t_h: f64,
    pub mobility: MobilityMode,
    pub kind: ModelKind,
    /// Per-target fits use `derive_seed(fit.seed, target_index)`.
    pub fit: FitConfig,
    pub targets: Vec<Field>,
    /// Maximum number of training rows in the attribution background.
    pub background_cap: usize,
    /// Maximum number of test rows explained per target; `None` explains all.
    pub explain_cap: Option<usize>,
}

impl PipelineConfig {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            omega_dbm: -110.0,
            zeta_db: -12.0,
            h_max_m: 1000.0,
            delta_t_h: 0.01,
            mobility: MobilityMode::Coverage,
            kind,
            fit: FitConfig::for_kind(kind),
            targets: alloc::vec![Field::Cqi, Field::DlMbps, Field::UlMbps],
            background_cap: 200,
            explain_cap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega_dbm.is_finite() || !self.zeta_db.is_finite() {
            return Err(Error::Config("omega and zeta must be finite".into()));
        }
        if !(self.h_max_m > 0.0 && self.h_max_m.is_finite()) {
            return Err(Error::Config(alloc::format!("h_max must be positive, got {}", self.h_max_m)));
        }
        if !(self.delta_t_h > 0.0 && self.delta_t_h.is_finite()) {
            return Err(Error::Config(alloc::format!("delta_t must be positive, got {}", self.delta_t_h)));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("at least one target is required".into()));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !t.is_target() {
                return Err(Error::Config(alloc::format!("`{}` is not a predictable target", t.name())));
            }
            if self.targets[..i].contains(t) {
                return Err(Error::Config(alloc::format!("target `{}` listed twice", t.name())));
            }
        }
        if self.background_cap == 0 {
            return Err(Error::Config("background_cap must be at least 1".into()));
        }
        if self.explain_cap == Some(0) {
            return Err(Error::Config("explain_cap must be at least 1".into()));
        }
        self.fit.validate()
    }
}

/// Mobility check on `speed_kmh · delta_t_h · 1000` metres of displacement.
pub fn check_mobility_constraint(speed_kmh: f64, delta_t_h: f64, h_max_m: f64, mode: MobilityMode) -> Result<bool> {
    if !(speed_kmh >= 0.0) || !(delta_t_h >= 0.0) || !(h_max_m >= 0.0) {
        return Err(Error::Domain("mobility inputs must be non-negative".into()));
    }
    let displacement = speed_kmh * delta_t_h * 1000.0;
    Ok(match mode {
        MobilityMode::Coverage => displacement <= h_max_m,
        MobilityMode::Literal => displacement >= h_max_m,
    })
}

/// Association outcome of one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserAssociation {
    /// Strongest-RSRP site.
    pub candidate: u32,
    /// `Some(candidate)` when every constraint holds.
    pub serving: Option<u32>,
    pub rsrp_ok: bool,
    pub rsrq_ok: bool,
    pub mobility_ok: bool,
    /// Link towards the candidate.
    pub metrics: LinkMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationDecision {
    /// One entry per dataset record.
    pub users: Vec<UserAssociation>,
    /// Topology and candidate cells in ascending order.
    pub cells: Vec<u32>,
    /// Links evaluated while choosing candidates.
    pub link_evaluations: usize,
}

impl AssociationDecision {
    /// `z_{k→b}`.
    pub fn z(&self, user: usize, cell_id: u32) -> u8 {
        u8::from(self.users[user].serving == Some(cell_id))
    }

    pub fn associated(&self) -> impl Iterator<Item = usize> + '_ {
        self.users.iter().enumerate().filter(|(_, u)| u.serving.is_some()).map(|(i, _)| i)
    }

    pub fn n_associated(&self) -> usize {
        self.associated().count()
    }

    /// Re-checks every granted association against the thresholds in `cfg`
    /// and the speeds in `ds`.
    pub fn check_feasibility(&self, ds: &Dataset, cfg: &PipelineConfig) -> Result<()> {
        if self.users.len() != ds.len() {
            return Err(Error::Dimension { expected: ds.len(), found: self.users.len() });
        }
        for (k, u) in self.users.iter().enumerate() {
            let granted = self.cells.iter().filter(|b| self.z(k, **b) == 1).count();
            let fail = |m: &str| Err(Error::Row { row: k, message: m.to_string() });
            if granted > 1 {
                return fail("user associated with more than one gNB");
            }
            let Some(cell) = u.serving else { continue };
            if granted != 1 || cell != u.candidate {
                return fail("serving cell is not the candidate");
            }
            if !(u.metrics.rsrp_dbm >= cfg.omega_dbm) {
                return fail("granted association violates the RSRP threshold");
            }
            if !(u.metrics.rsrq_db >= cfg.zeta_db) {
                return fail("granted association violates the RSRQ threshold");
            }
            let speed = ds.records[k].speed_kmh;
            if !check_mobility_constraint(speed, cfg.delta_t_h, cfg.h_max_m, cfg.mobility).unwrap_or(false) {
                return fail("granted association violates the mobility constraint");
            }
        }
        Ok(())
    }
}

/// Link from `site` to `pos` under mean path loss, with every other site
/// interfering at the topology load.
fn topology_link(topo: &Topology, serving: usize, rx_dbm: &[f64]) -> Result<LinkMetrics> {
    let res = radio::SUBCARRIERS_PER_RB * f64::from(topo.num_rbs);
    let interference = rx_dbm
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != serving)
        .map(|(_, p)| topo.interference_load * radio::dbm_to_mw(*p) / res)
        .collect();
    radio::quality_model(&LinkBudget {
        rssi_dbm: rx_dbm[serving],
        num_rbs: topo.num_rbs,
        bandwidth_hz: topo.bandwidth_hz,
        interference_mw: interference,
        noise_dbm: None,
    })
}

/// Link metrics of a record that has no position: RSRP from the record's
/// RSSI, with the record's own RSRQ and SINR where present.
fn record_link(r: &SessionRecord, num_rbs: u32) -> Result<LinkMetrics> {
    let rsrp_dbm = radio::rsrp_from_rssi(r.rssi_dbm, num_rbs)?;
    let rsrq_db = if r.rsrq_db.is_finite() {
        r.rsrq_db
    } else {
        radio::rsrq(r.rssi_dbm, rsrp_dbm, num_rbs, RsrqMode::LinearDomain)?
    };
    let sinr_db = if r.sinr_db.is_finite() {
        r.sinr_db
    } else {
        radio::sinr(rsrp_dbm, radio::noise_power_dbm(radio::DEFAULT_BANDWIDTH_HZ)?, &[])?
    };
    let cqi = radio::cqi_from_sinr(sinr_db)?;
    Ok(LinkMetrics { rsrp_dbm, rsrq_db, sinr_db, cqi_raw: cqi.raw, cqi: cqi.index })
}

/// Picks the strongest-RSRP site per user and grants the association when
/// the RSRP, RSRQ and mobility constraints all hold.
///
/// Users with a position are evaluated against every site of the dataset
/// topology; ties go to the lowest cell id. Users without a position keep
/// their recorded cell and are evaluated from their recorded RSSI.
pub fn associate_users(ds: &Dataset, cfg: &PipelineConfig) -> Result<AssociationDecision> {
    if let Some(t) = &ds.topology {
        t.validate()?;
    }
    let num_rbs = ds.topology.as_ref().map_or(radio::DEFAULT_NUM_RBS, |t| t.num_rbs);
    let mut users = Vec::with_capacity(ds.len());
    let mut cells: Vec<u32> = ds.topology.iter().flat_map(|t| t.sites.iter().map(|s| s.cell_id)).collect();
    cells.sort_unstable();
    cells.dedup();
    let mut link_evaluations = 0;
    let mut rx = Vec::new();

    for (k, r) in ds.records.iter().enumerate() {
        let (candidate, metrics) = match (&ds.topology, r.position) {
            (Some(topo), Some(pos)) => {
                rx.clear();
                rx.extend(topo.sites.iter().map(|s| topo.received_dbm(s, pos)));
                let mut best: Option<(u32, LinkMetrics)> = None;
                for (i, site) in topo.sites.iter().enumerate() {
                    let m = topology_link(topo, i, &rx)?;
                    link_evaluations += 1;
                    let better = match &best {
                        None => true,
                        Some((c, b)) => m.rsrp_dbm > b.rsrp_dbm || (m.rsrp_dbm == b.rsrp_dbm && site.cell_id < *c),
                    };
                    if better {
                        best = Some((site.cell_id, m));
                    }
                }
                best.ok_or(Error::Empty("topology sites"))?
            }
            _ if r.rssi_dbm.is_finite() => {
                link_evaluations += 1;
                let m = record_link(r, num_rbs).map_err(|e| Error::Row { row: k, message: e.to_string() })?;
                (r.cell_id, m)
            }
            _ => {
                return Err(Error::Row { row: k, message: "user has neither a position nor an RSSI value".into() });
            }
        };

        let rsrp_ok = metrics.rsrp_dbm >= cfg.omega_dbm;
        let rsrq_ok = metrics.rsrq_db >= cfg.zeta_db;
        // An unknown speed cannot be shown to satisfy the constraint.
        let mobility_ok = check_mobility_constraint(r.speed_kmh, cfg.delta_t_h, cfg.h_max_m, cfg.mobility).unwrap_or(false);
        let serving = (rsrp_ok && rsrq_ok && mobility_ok).then_some(candidate);
        if let Err(pos) = cells.binary_search(&candidate) {
            cells.insert(pos, candidate);
        }
        users.push(UserAssociation { candidate, serving, rsrp_ok, rsrq_ok, mobility_ok, metrics });
    }
    Ok(AssociationDecision { users, cells, link_evaluations })
}

/// Fitted model, predictions and attribution for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetOutput {
    pub target: Field,
    pub features: Vec<Field>,
    pub model: EnsembleModel,
    pub train_rows: Vec<usize>,
    pub train_predictions: Vec<f64>,
    pub train_targets: Vec<f64>,
    /// Squared-error loss over the associated training users.
    pub training_loss: f64,
    pub test_rows: Vec<usize>,
    /// Test-partition predictions, clamped at zero.
    pub test_predictions: Vec<f64>,
    pub test_truth: Vec<f64>,
    pub importance: GlobalImportance,
    pub explanations: Vec<Explanation>,
    pub background_means: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    /// Candidate links evaluated during association.
    pub link_evaluations: usize,
    /// Model calls outside attribution (training, test and objective rows).
    pub model_evaluations: usize,
    /// Coalition values computed during attribution.
    pub coalition_evaluations: usize,
    pub explained_rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    /// Sum of predicted CQI (clamped at zero) over associated users.
    pub predicted: f64,
    /// Sum of recorded CQI over the same users.
    pub ground_truth: f64,
    pub users: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub associations: AssociationDecision,
    pub targets: Vec<TargetOutput>,
    /// Predicted CQI of every associated user with complete features, as
    /// `(row, value)`; empty when CQI is not a target.
    pub user_cqi: Vec<(usize, f64)>,
    pub counters: Counters,
}

impl PipelineOutput {
    pub fn target(&self, field: Field) -> Option<&TargetOutput> {
        self.targets.iter().find(|t| t.target == field)
    }

    /// Φ: predicted downlink rate per test user, as `(row, Mbps)`.
    pub fn predicted_dl(&self) -> Vec<(usize, f64)> {
        self.rates(Field::DlMbps)
    }

    /// Υ: predicted uplink rate per test user, as `(row, Mbps)`.
    pub fn predicted_ul(&self) -> Vec<(usize, f64)> {
        self.rates(Field::UlMbps)
    }

    fn rates(&self, field: Field) -> Vec<(usize, f64)> {
        self.target(field)
            .map(|t| t.test_rows.iter().copied().zip(t.test_predictions.iter().copied()).collect())
            .unwrap_or_default()
    }

    /// Test-partition view consumed by the comparison report. Link-metric
    /// columns are taken from the associated users' records.
    pub fn summary(&self, name: &str, ds: &Dataset) -> RunSummary {
        let kind = self.targets.first().map_or(ModelKind::Linear, |t| t.model.kind);
        let targets = self
            .targets
            .iter()
            .map(|t| TargetSummary {
                target: t.target,
                predictions: t.test_predictions.clone(),
                truth: t.test_truth.clone(),
                importance: Some(t.importance.clone()),
            })
            .collect();
        let rows: Vec<usize> = self.associations.associated().collect();
        let link_metrics = [Field::RssiDbm, Field::RsrpDbm, Field::RsrqDb, Field::SinrDb, Field::Cqi]
            .iter()
            .map(|f| (f.name().to_string(), rows.iter().map(|&i| ds.records[i].get(*f)).collect()))
            .collect();
        RunSummary { name: name.to_string(), kind, targets, link_metrics }
    }
}

/// Runs association, then for every target fits the model on the associated
/// training users, evaluates the training loss, predicts the test users and
/// explains them against a background drawn from the training rows.
pub fn run_pipeline(ds: &Dataset, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let split = ds.split()?;
    let associations = associate_users(ds, cfg)?;
    associations.check_feasibility(ds, cfg)?;
    if associations.n_associated() == 0 {
        return Err(Error::EmptyCohort);
    }
    let granted = |rows: &[usize]| -> Vec<usize> {
        rows.iter().copied().filter(|&i| associations.users[i].serving.is_some()).collect()
    };
    let train = granted(&split.train);
    let test = granted(&split.test);

    let mut counters = Counters { link_evaluations: associations.link_evaluations, ..Counters::default() };
    let mut targets = Vec::with_capacity(cfg.targets.len());
    let mut user_cqi = Vec::new();
    for (ti, &target) in cfg.targets.iter().enumerate() {
        let features = features_for(target, cfg.kind != ModelKind::Linear);
        let names: Vec<String> = features.iter().map(|f| f.name().to_string()).collect();
        let tr = ds.design(&features, target, &train);
        if tr.y.is_empty() {
            return Err(Error::Empty("associated training rows with complete features"));
        }
        let mut fit = cfg.fit.clone();
        fit.seed = derive_seed(cfg.fit.seed, ti as u64);
        let model = fit_ensemble(&tr.x, &tr.y, cfg.kind, &fit, names.clone(), target.name().to_string())?;

        let train_predictions = model.predict_matrix(&tr.x)?;
        let loss = training_loss(&train_predictions, &tr.y)?;
        counters.model_evaluations += tr.y.len();

        let te = ds.design(&features, target, &test);
        if te.y.is_empty() {
            return Err(Error::Empty("associated test rows with complete features"));
        }
        let test_predictions: Vec<f64> = model.predict_matrix(&te.x)?.into_iter().map(|p| p.max(0.0)).collect();
        counters.model_evaluations += te.y.len();

        let bg = BackgroundSet::sampled(&tr.x, cfg.background_cap, derive_seed(cfg.fit.seed, 0x1000 + ti as u64))?;
        let n_explain = cfg.explain_cap.map_or(te.y.len(), |c| c.min(te.y.len()));
        let explain_x = te.x.select_rows(&(0..n_explain).collect::<Vec<_>>());
        let (importance, explanations) = global_importance(&model, &explain_x, &bg, &names)?;
        counters.coalition_evaluations += explanations.iter().map(|e| e.coalition_evaluations).sum::<usize>();
        counters.explained_rows += explanations.len();

        if target == Field::Cqi {
            let all: Vec<usize> = associations.associated().collect();
            let d = ds.design(&features, target, &all);
            let p = model.predict_matrix(&d.x)?;
            counters.model_evaluations += p.len();
            user_cqi = d.rows.iter().copied().zip(p.into_iter().map(|v| v.max(0.0))).collect();
        }

        targets.push(TargetOutput {
            target,
            features,
            model,
            train_rows: tr.rows,
            train_predictions,
            train_targets: tr.y,
            training_loss: loss,
            test_rows: te.rows,
            test_predictions,
            test_truth: te.y,
            importance,
            explanations,
            background_means: bg.means().to_vec(),
        });
    }
    Ok(PipelineOutput { associations, targets, user_cqi, counters })
}

/// Sums predicted CQI over associated users, alongside the recorded CQI of
/// the same users.
pub fn objective_value(out: &PipelineOutput, ds: &Dataset) -> Objective {
    let mut obj = Objective { predicted: 0.0, ground_truth: 0.0, users: 0 };
    for &(row, cqi) in &out.user_cqi {
        if out.associations.users.get(row).is_some_and(|u| u.serving.is_some()) {
            obj.predicted += cqi.max(0.0);
            obj.ground_truth += ds.records[row].cqi;
            obj.users += 1;
        }
    }
    obj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::record;
    use crate::dataset::{GnbSite, Split};
    use alloc::vec;

    fn budget_record(rssi: f64, speed: f64) -> SessionRecord {
        let mut r = record(1, 0.0);
        r.rssi_dbm = rssi;
        r.speed_kmh = speed;
        r.position = None;
        r
    }

    #[test]
    fn mobility_examples() {
        let c = MobilityMode::Coverage;
        assert!(check_mobility_constraint(60.0, 0.01, 1000.0, c).unwrap());
        assert!(!check_mobility_constraint(60.0, 0.02, 1000.0, c).unwrap());
        assert!(check_mobility_constraint(0.0, 5.0, 1.0, c).unwrap());
        assert!(check_mobility_constraint(60.0, 0.02, 1000.0, MobilityMode::Literal).unwrap());
        assert!(!check_mobility_constraint(60.0, 0.01, 1000.0, MobilityMode::Literal).unwrap());
        assert!(check_mobility_constraint(-1.0, 0.01, 1000.0, c).is_err());
        assert_eq!("literal".parse::<MobilityMode>().unwrap(), MobilityMode::Literal);
        assert!("fast".parse::<MobilityMode>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = PipelineConfig::new(ModelKind::ExtraTrees);
        cfg.validate().unwrap();
        cfg.h_max_m = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::new(ModelKind::ExtraTrees);
        cfg.delta_t_h = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::new(ModelKind::ExtraTrees);
        cfg.targets = vec![Field::SinrDb];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_user_slack_constraints_is_associated() {
        let cfg = PipelineConfig::new(ModelKind::Linear);
        // RSRP = −70 − 30.79 ≈ −100.8 dBm; RSRQ from the record is −7 dB
        let mut r = budget_record(-70.0, 30.0);
        r.rsrq_db = cfg.zeta_db + 5.0;
        let ds = Dataset::new(vec![r]);
        let a = associate_users(&ds, &cfg).unwrap();
        assert_eq!(a.users[0].serving, Some(1));
        assert_eq!(a.z(0, 1), 1);
        a.check_feasibility(&ds, &cfg).unwrap();
    }

    #[test]
    fn rsrp_below_threshold_is_rejected() {
        let cfg = PipelineConfig::new(ModelKind::Linear);
        let rsrp_offset = 10.0 * libm::log10(1200.0);
        let r = budget_record(cfg.omega_dbm - 1.0 + rsrp_offset, 30.0);
        let ds = Dataset::new(vec![r]);
        let a = associate_users(&ds, &cfg).unwrap();
        assert!((a.users[0].metrics.rsrp_dbm - (cfg.omega_dbm - 1.0)).abs() < 1e-9);
        assert!(!a.users[0].rsrp_ok);
        assert_eq!(a.users[0].serving, None);
        assert_eq!(a.n_associated(), 0);
    }

    #[test]
    fn user_without_position_or_rssi_is_an_error() {
        let r = budget_record(f64::NAN, 30.0);
        let ds = Dataset::new(vec![r]);
        assert!(matches!(associate_users(&ds, &PipelineConfig::new(ModelKind::Linear)), Err(Error::Row { row: 0, .. })));
    }

    #[test]
    fn strongest_site_wins_and_ties_go_to_lowest_cell() {
        // Sites at 100 m and 68.13 m from the user; path loss 40 + 30·log10(d)
        let mut topo = Topology::new(vec![
            GnbSite { cell_id: 7, position: (100.0, 0.0), tx_power_dbm: 46.0, coverage_radius_m: 500.0 },
            GnbSite { cell_id: 9, position: (-100.0, 0.0), tx_power_dbm: 51.0, coverage_radius_m: 500.0 },
        ]);
        topo.interference_load = 0.0;
        let mut r = record(7, 0.0);
        r.position = Some((0.0, 0.0));
        r.speed_kmh = 10.0;
        let ds = Dataset::new(vec![r.clone()]).with_topology(topo.clone());
        let a = associate_users(&ds, &PipelineConfig::new(ModelKind::Linear)).unwrap();
        // cell 9 is 5 dB stronger at equal distance
        assert_eq!(a.users[0].candidate, 9);
        assert_eq!(a.link_evaluations, 2);

        topo.sites[1].tx_power_dbm = 46.0;
        let ds = Dataset::new(vec![r]).with_topology(topo);
        let a = associate_users(&ds, &PipelineConfig::new(ModelKind::Linear)).unwrap();
        assert_eq!(a.users[0].candidate, 7);
        assert_eq!(a.cells, vec![7, 9]);
    }

    fn linear_fixture() -> Dataset {
        let mut recs = Vec::new();
        for k in 0..4 {
            let kf = f64::from(k);
            let mut r = budget_record(-60.0 - 2.0 * kf, 10.0 + kf);
            r.rsrp_dbm = r.rssi_dbm - 10.0 * libm::log10(1200.0);
            r.rsrq_db = -8.0 - 0.25 * kf * kf;
            r.sinr_db = 20.0 - 3.0 * kf;
            r.cqi = 12.0 - kf;
            r.dl_mbps = 50.0 - 4.0 * kf;
            r.ul_mbps = 5.0 - 0.5 * kf;
            r.timestamp = kf;
            recs.push(r);
        }
        let mut ds = Dataset::new(recs);
        ds.split = Some(Split { train: vec![0, 1, 2, 3], test: vec![0, 1, 2, 3] });
        ds
    }

    #[test]
    fn exact_fit_regime() {
        let ds = linear_fixture();
        let cfg = PipelineConfig::new(ModelKind::Linear);
        let out = run_pipeline(&ds, &cfg).unwrap();
        for t in &out.targets {
            assert!(t.training_loss <= 1e-9, "{:?} loss {}", t.target, t.training_loss);
            for (p, y) in t.test_predictions.iter().zip(&t.test_truth) {
                assert!((p - y).abs() <= 1e-6);
            }
        }
        assert_eq!(out.predicted_dl().len(), 4);
        let obj = objective_value(&out, &ds);
        assert_eq!(obj.users, 4);
        assert!((obj.predicted - obj.ground_truth).abs() <= 1e-6);
        // linear kind drops cell_id: 7 features → 2^7 coalitions per row
        assert_eq!(out.counters.coalition_evaluations, 3 * 4 * 128);
        assert_eq!(run_pipeline(&ds, &cfg).unwrap(), out);
    }

    #[test]
    fn missing_split_and_empty_cohort() {
        let mut ds = linear_fixture();
        ds.split = None;
        assert!(matches!(run_pipeline(&ds, &PipelineConfig::new(ModelKind::Linear)), Err(Error::MissingSplit)));
        let ds = linear_fixture();
        let mut cfg = PipelineConfig::new(ModelKind::Linear);
        cfg.omega_dbm = 0.0;
        assert!(matches!(run_pipeline(&ds, &cfg), Err(Error::EmptyCohort)));
    }

    #[test]
    fn objective_examples() {
        let ds = linear_fixture();
        let cfg = PipelineConfig::new(ModelKind::Linear);
        let mut out = run_pipeline(&ds, &cfg).unwrap();
        out.user_cqi = vec![(0, 10.0), (1, 12.0)];
        assert_eq!(objective_value(&out, &ds).predicted, 22.0);
        for u in &mut out.associations.users {
            u.serving = None;
        }
        assert_eq!(objective_value(&out, &ds).predicted, 0.0);
    }
}
