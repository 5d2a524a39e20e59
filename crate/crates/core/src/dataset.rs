//! Session records and dataset-level operations.
//!
//! Measurement fields are `f64`; a missing measurement is stored as NaN.
//! Rows with a missing model feature are skipped when building a design
//! matrix but stay in the dataset so validation can report them.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::radio;
use crate::rng::rng_from_seed;
use crate::{Error, Matrix, Result};

/// Canonical columns, in on-disk order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    Timestamp,
    CellId,
    SpeedKmh,
    RssiDbm,
    RsrpDbm,
    RsrqDb,
    SinrDb,
    Cqi,
    DlMbps,
    UlMbps,
    PosX,
    PosY,
}

impl Field {
    pub const ALL: [Field; 12] = [
        Field::Timestamp,
        Field::CellId,
        Field::SpeedKmh,
        Field::RssiDbm,
        Field::RsrpDbm,
        Field::RsrqDb,
        Field::SinrDb,
        Field::Cqi,
        Field::DlMbps,
        Field::UlMbps,
        Field::PosX,
        Field::PosY,
    ];

    /// Fields an ingested trace must provide.
    pub const REQUIRED: [Field; 10] = [
        Field::Timestamp,
        Field::CellId,
        Field::SpeedKmh,
        Field::RssiDbm,
        Field::RsrpDbm,
        Field::RsrqDb,
        Field::SinrDb,
        Field::Cqi,
        Field::DlMbps,
        Field::UlMbps,
    ];

    /// Contextual features available to the regressors, before the target
    /// is removed.
    pub const CONTEXT: [Field; 9] = [
        Field::CellId,
        Field::SpeedKmh,
        Field::RssiDbm,
        Field::RsrpDbm,
        Field::RsrqDb,
        Field::SinrDb,
        Field::Cqi,
        Field::DlMbps,
        Field::UlMbps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Timestamp => "timestamp",
            Field::CellId => "cell_id",
            Field::SpeedKmh => "speed_kmh",
            Field::RssiDbm => "rssi_dbm",
            Field::RsrpDbm => "rsrp_dbm",
            Field::RsrqDb => "rsrq_db",
            Field::SinrDb => "sinr_db",
            Field::Cqi => "cqi",
            Field::DlMbps => "dl_mbps",
            Field::UlMbps => "ul_mbps",
            Field::PosX => "pos_x",
            Field::PosY => "pos_y",
        }
    }

    pub fn parse(name: &str) -> Option<Field> {
        Field::ALL.iter().copied().find(|f| f.name() == name)
    }

    pub fn is_target(self) -> bool {
        matches!(self, Field::Cqi | Field::DlMbps | Field::UlMbps)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One service session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub timestamp: f64,
    pub cell_id: u32,
    pub speed_kmh: f64,
    pub rssi_dbm: f64,
    pub rsrp_dbm: f64,
    pub rsrq_db: f64,
    pub sinr_db: f64,
    /// Integral CQI index stored as a real so that it can be missing.
    pub cqi: f64,
    pub dl_mbps: f64,
    pub ul_mbps: f64,
    pub position: Option<(f64, f64)>,
}

impl SessionRecord {
    pub fn get(&self, field: Field) -> f64 {
        match field {
            Field::Timestamp => self.timestamp,
            Field::CellId => f64::from(self.cell_id),
            Field::SpeedKmh => self.speed_kmh,
            Field::RssiDbm => self.rssi_dbm,
            Field::RsrpDbm => self.rsrp_dbm,
            Field::RsrqDb => self.rsrq_db,
            Field::SinrDb => self.sinr_db,
            Field::Cqi => self.cqi,
            Field::DlMbps => self.dl_mbps,
            Field::UlMbps => self.ul_mbps,
            Field::PosX => self.position.map_or(f64::NAN, |p| p.0),
            Field::PosY => self.position.map_or(f64::NAN, |p| p.1),
        }
    }

    pub fn is_missing(&self, field: Field) -> bool {
        self.get(field).is_nan()
    }
}

/// Log-distance path loss: `PL(d) = PL₀ + 10·n·log10(d / d₀)` for `d ≥ d₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub exponent: f64,
    pub ref_loss_db: f64,
    pub ref_distance_m: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self { exponent: 3.0, ref_loss_db: 40.0, ref_distance_m: 1.0 }
    }
}

impl PathLoss {
    /// Distances inside the reference distance are clamped to it.
    pub fn loss_db(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(self.ref_distance_m);
        self.ref_loss_db + 10.0 * self.exponent * libm::log10(d / self.ref_distance_m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exponent > 0.0) || !(self.ref_distance_m > 0.0) || !self.ref_loss_db.is_finite() {
            return Err(Error::Config(
                "path loss needs a positive exponent and reference distance".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnbSite {
    pub cell_id: u32,
    pub position: (f64, f64),
    pub tx_power_dbm: f64,
    pub coverage_radius_m: f64,
}

impl GnbSite {
    pub fn distance_to(&self, p: (f64, f64)) -> f64 {
        libm::hypot(p.0 - self.position.0, p.1 - self.position.1)
    }
}

/// gNB layout plus the radio parameters needed to recompute links from
/// user positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub sites: Vec<GnbSite>,
    pub path_loss: PathLoss,
    pub num_rbs: u32,
    pub bandwidth_hz: f64,
    /// Fraction of each interferer's power that lands on the serving
    /// resource elements.
    pub interference_load: f64,
}

impl Topology {
    pub fn new(sites: Vec<GnbSite>) -> Self {
        Self {
            sites,
            path_loss: PathLoss::default(),
            num_rbs: radio::DEFAULT_NUM_RBS,
            bandwidth_hz: radio::DEFAULT_BANDWIDTH_HZ,
            interference_load: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites.is_empty() {
            return Err(Error::Config("topology declares no gNB sites".into()));
        }
        let mut seen = BTreeMap::new();
        for s in &self.sites {
            if !(s.coverage_radius_m > 0.0) {
                return Err(Error::Config(format!(
                    "site {} has non-positive coverage radius",
                    s.cell_id
                )));
            }
            if seen.insert(s.cell_id, ()).is_some() {
                return Err(Error::Config(format!("duplicate site id {}", s.cell_id)));
            }
        }
        if !(0.0..=1.0).contains(&self.interference_load) {
            return Err(Error::Config("interference load must lie in [0, 1]".into()));
        }
        if self.num_rbs < 1 || !(self.bandwidth_hz > 0.0) {
            return Err(Error::Config("resource blocks and bandwidth must be positive".into()));
        }
        self.path_loss.validate()
    }

    /// Mean received wideband power (no shadowing) from `site` at `pos`.
    pub fn received_dbm(&self, site: &GnbSite, pos: (f64, f64)) -> f64 {
        site.tx_power_dbm - self.path_loss.loss_db(site.distance_to(pos))
    }

    pub fn site(&self, cell_id: u32) -> Option<&GnbSite> {
        self.sites.iter().find(|s| s.cell_id == cell_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<SessionRecord>,
    pub feature_names: Vec<String>,
    pub split: Option<Split>,
    pub topology: Option<Topology>,
}

impl Dataset {
    pub fn new(records: Vec<SessionRecord>) -> Self {
        Self {
            records,
            feature_names: Field::ALL.iter().map(|f| f.name().to_string()).collect(),
            split: None,
            topology: None,
        }
    }

    pub fn with_topology(mut self, topology: Topology) -> Self {
        self.topology = Some(topology);
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split(&self) -> Result<&Split> {
        self.split.as_ref().ok_or(Error::MissingSplit)
    }

    /// Checks the structural invariants: unique feature names and a split
    /// that is a disjoint selection of valid rows.
    pub fn check_invariants(&self) -> Result<()> {
        let mut names: Vec<&String> = self.feature_names.iter().collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate feature names".into()));
        }
        if let Some(split) = &self.split {
            let mut seen = alloc::vec![false; self.records.len()];
            for &i in split.train.iter().chain(&split.test) {
                if i >= self.records.len() {
                    return Err(Error::Row { row: i, message: "split index out of range".into() });
                }
                if core::mem::replace(&mut seen[i], true) {
                    return Err(Error::Row { row: i, message: "row appears twice in split".into() });
                }
            }
        }
        Ok(())
    }

    /// Feature matrix over `rows`, skipping rows with any missing feature or
    /// target value.
    pub fn design(&self, features: &[Field], target: Field, rows: &[usize]) -> Design {
        let mut data = Vec::with_capacity(rows.len() * features.len());
        let mut y = Vec::with_capacity(rows.len());
        let mut kept = Vec::with_capacity(rows.len());
        for &i in rows {
            let r = &self.records[i];
            if r.is_missing(target) || features.iter().any(|f| r.is_missing(*f)) {
                continue;
            }
            data.extend(features.iter().map(|f| r.get(*f)));
            y.push(r.get(target));
            kept.push(i);
        }
        let n = kept.len();
        Design {
            x: Matrix::new(data, n, features.len()).expect("sized above"),
            y,
            rows: kept,
        }
    }

    pub fn column(&self, field: Field) -> Vec<f64> {
        self.records.iter().map(|r| r.get(field)).collect()
    }
}

/// Rows selected from a dataset for fitting or evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: Matrix,
    pub y: Vec<f64>,
    /// Dataset row index of each design row.
    pub rows: Vec<usize>,
}

/// Contextual features used to predict `target`: every contextual field
/// except the target itself, optionally without the cell id.
pub fn features_for(target: Field, include_cell_id: bool) -> Vec<Field> {
    Field::CONTEXT
        .iter()
        .copied()
        .filter(|f| *f != target && (include_cell_id || *f != Field::CellId))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Negative,
    CqiOutOfRange,
    CqiNotIntegral,
    NonFinite,
    DuplicateTimestamp,
    UnknownCell,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::Negative => "negative value",
            ViolationKind::CqiOutOfRange => "CQI outside [0, 15]",
            ViolationKind::CqiNotIntegral => "CQI not an integer",
            ViolationKind::NonFinite => "non-finite value",
            ViolationKind::DuplicateTimestamp => "duplicate timestamp for cell",
            ViolationKind::UnknownCell => "cell not declared in topology",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub row: usize,
    pub field: Field,
    pub kind: ViolationKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// `(row, field)` pairs holding a missing value.
    pub missing: Vec<(usize, Field)>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn rows_with_missing(&self) -> usize {
        let mut rows: Vec<usize> = self.missing.iter().map(|m| m.0).collect();
        rows.dedup();
        rows.len()
    }
}

pub fn validate(ds: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut stamps: BTreeMap<(u32, u64), usize> = BTreeMap::new();

    for (row, r) in ds.records.iter().enumerate() {
        let mut flag = |field, kind, value| report.violations.push(Violation { row, field, kind, value });

        for field in Field::REQUIRED {
            let v = r.get(field);
            if v.is_nan() {
                report.missing.push((row, field));
                continue;
            }
            if !v.is_finite() {
                flag(field, ViolationKind::NonFinite, v);
                continue;
            }
            match field {
                Field::SpeedKmh | Field::DlMbps | Field::UlMbps if v < 0.0 => {
                    flag(field, ViolationKind::Negative, v)
                }
                Field::Cqi if !(0.0..=f64::from(radio::CQI_MAX)).contains(&v) => {
                    flag(field, ViolationKind::CqiOutOfRange, v)
                }
                Field::Cqi if libm::trunc(v) != v => flag(field, ViolationKind::CqiNotIntegral, v),
                _ => {}
            }
        }
        if let Some((x, y)) = r.position {
            if !x.is_finite() {
                flag(Field::PosX, ViolationKind::NonFinite, x);
            }
            if !y.is_finite() {
                flag(Field::PosY, ViolationKind::NonFinite, y);
            }
        }
        if let Some(topo) = &ds.topology {
            if topo.site(r.cell_id).is_none() {
                flag(Field::CellId, ViolationKind::UnknownCell, f64::from(r.cell_id));
            }
        }
        if r.timestamp.is_finite()
            && stamps.insert((r.cell_id, r.timestamp.to_bits()), row).is_some()
        {
            flag(Field::Timestamp, ViolationKind::DuplicateTimestamp, r.timestamp);
        }
    }
    report
}

/// Seeded shuffle followed by a `n_train`/`n_test` cut.
pub fn train_test_split(ds: &Dataset, n_train: usize, n_test: usize, seed: u64) -> Result<Dataset> {
    let requested = n_train + n_test;
    if requested > ds.len() {
        return Err(Error::InsufficientRows { requested, available: ds.len() });
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let train = order[..n_train].to_vec();
    let test = order[n_train..requested].to_vec();
    let mut out = ds.clone();
    out.split = Some(Split { train, test });
    Ok(out)
}

/// Nearest-rank percentile of an ascending slice: the value at rank
/// `ceil(p/100 · n)`, with rank clamped to `[1, n]`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = libm::ceil(p / 100.0 * n as f64) as usize;
    sorted[rank.clamp(1, n) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
    pub mean: f64,
}

impl Summary {
    /// Order statistics of the finite values; `None` when there are none.
    pub fn of(values: &[f64]) -> Option<Summary> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        Some(Summary {
            count: v.len(),
            min: v[0],
            p25: nearest_rank(&v, 25.0),
            p50: nearest_rank(&v, 50.0),
            p75: nearest_rank(&v, 75.0),
            max: v[v.len() - 1],
            mean,
        })
    }
}

/// Per-field summaries over the canonical columns that have any value.
pub fn summary_stats(ds: &Dataset) -> Result<Vec<(Field, Summary)>> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    Ok(Field::ALL
        .iter()
        .filter_map(|f| Summary::of(&ds.column(*f)).map(|s| (*f, s)))
        .collect())
}


#[cfg(test)]
mod tests {
    use super::fixtures::record;
    use super::*;
    use alloc::vec;

    fn ds(n: usize) -> Dataset {
        Dataset::new((0..n).map(|i| record(1, i as f64)).collect())
    }

    #[test]
    fn clean_fixture_validates() {
        assert!(validate(&ds(5)).is_clean());
    }

    #[test]
    fn cqi_out_of_range_is_flagged() {
        let mut d = ds(3);
        d.records[1].cqi = 22.0;
        let rep = validate(&d);
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].row, 1);
        assert_eq!(rep.violations[0].field, Field::Cqi);
        assert_eq!(rep.violations[0].kind, ViolationKind::CqiOutOfRange);
    }

    #[test]
    fn negative_speed_is_flagged() {
        let mut d = ds(3);
        d.records[2].speed_kmh = -1.0;
        let rep = validate(&d);
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].kind, ViolationKind::Negative);
    }

    #[test]
    fn duplicate_timestamps_per_cell() {
        let mut d = ds(3);
        d.records[2].timestamp = 0.0;
        assert_eq!(validate(&d).violations[0].kind, ViolationKind::DuplicateTimestamp);
        // Same instant on another cell is fine.
        d.records[2].cell_id = 2;
        assert!(validate(&d).is_clean());
    }

    #[test]
    fn missing_values_reported_not_violations() {
        let mut d = ds(4);
        d.records[0].sinr_db = f64::NAN;
        d.records[3].sinr_db = f64::NAN;
        let rep = validate(&d);
        assert!(rep.is_clean());
        assert_eq!(rep.rows_with_missing(), 2);
        let des = d.design(&features_for(Field::Cqi, true), Field::Cqi, &[0, 1, 2, 3]);
        assert_eq!(des.rows, vec![1, 2]);
    }

    #[test]
    fn unknown_cell_against_topology() {
        let site = GnbSite { cell_id: 1, position: (0.0, 0.0), tx_power_dbm: 40.0, coverage_radius_m: 100.0 };
        let mut d = ds(2).with_topology(Topology::new(vec![site]));
        d.records[1].cell_id = 9;
        let rep = validate(&d);
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].kind, ViolationKind::UnknownCell);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = ds(2206);
        let a = train_test_split(&d, 1544, 662, 11).unwrap();
        let b = train_test_split(&d, 1544, 662, 11).unwrap();
        let s = a.split().unwrap();
        assert_eq!((s.train.len(), s.test.len()), (1544, 662));
        assert_eq!(a.split, b.split);
        a.check_invariants().unwrap();
        let c = train_test_split(&d, 1544, 662, 12).unwrap();
        assert_ne!(a.split, c.split);

        let all = train_test_split(&ds(10), 10, 0, 3).unwrap();
        assert_eq!(all.split().unwrap().train.len(), 10);
        assert!(all.split().unwrap().test.is_empty());

        assert!(matches!(
            train_test_split(&ds(10), 8, 3, 0),
            Err(Error::InsufficientRows { requested: 11, available: 10 })
        ));
    }

    #[test]
    fn invariants_catch_overlapping_split() {
        let mut d = ds(4);
        d.split = Some(Split { train: vec![0, 1], test: vec![1] });
        assert!(d.check_invariants().is_err());
        d.split = Some(Split { train: vec![0], test: vec![7] });
        assert!(d.check_invariants().is_err());
    }

    #[test]
    fn summaries() {
        let one = Summary::of(&[4.25]).unwrap();
        assert_eq!((one.min, one.max, one.mean, one.p50), (4.25, 4.25, 4.25, 4.25));

        let s = Summary::of(&[5.0, 1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!(s.p50, 3.0);
        assert_eq!(s.mean, 3.0);

        assert!(summary_stats(&Dataset::new(vec![])).is_err());
        let stats = summary_stats(&ds(3)).unwrap();
        // no positions → pos_x/pos_y omitted
        assert_eq!(stats.len(), 10);
    }

    #[test]
    fn percentiles_match_sort_oracle() {
        // 100 values from a fixed LCG, checked against sort-and-index.
        let mut state = 12345u64;
        let vals: Vec<f64> = (0..100)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        let s = Summary::of(&vals).unwrap();
        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // ceil(0.25·100) = 25 → index 24, etc.
        assert_eq!(s.p25, sorted[24]);
        assert_eq!(s.p50, sorted[49]);
        assert_eq!(s.p75, sorted[74]);
    }
}
