//! Synthetic session generator.
//!
//! Users are dropped uniformly in a rectangular area around the gNB sites.
//! Each link gets log-distance path loss plus log-normal shadowing; the
//! strongest site serves the user and every other site interferes. Link
//! metrics come from [`radio::quality_model`], and data rates follow a
//! CQI-driven logistic curve with multiplicative log-normal noise.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, GnbSite, PathLoss, SessionRecord, Topology};
use crate::radio::{self, LinkBudget};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::{Error, Result};

/// Axis-aligned user drop area in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Area {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Rate curve `cap · 1 / (1 + exp(−slope·(cqi − midpoint)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCurve {
    pub cap_mbps: f64,
    pub slope: f64,
    pub midpoint: f64,
    /// Standard deviation of the log of the multiplicative noise.
    pub noise_sigma: f64,
}

impl RateCurve {
    pub fn new(cap_mbps: f64) -> Self {
        Self { cap_mbps, slope: 0.6, midpoint: 8.0, noise_sigma: 0.2 }
    }

    pub fn mean_rate(&self, cqi: f64) -> f64 {
        self.cap_mbps / (1.0 + libm::exp(-self.slope * (cqi - self.midpoint)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub topology: Topology,
    pub sessions: usize,
    pub min_speed_kmh: f64,
    pub max_speed_kmh: f64,
    /// Log-normal shadowing standard deviation (dB).
    pub shadowing_db: f64,
    /// Error of the SINR the device measures before mapping to CQI (dB).
    pub sinr_measurement_db: f64,
    pub downlink: RateCurve,
    pub uplink: RateCurve,
    /// User drop area; the bounding box of the site coverage discs if unset.
    pub area: Option<Area>,
    pub start_time: f64,
    pub session_interval_s: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Eight sites on a 4 × 2 grid, 2206 sessions, speeds up to 88 km/h and
    /// rate caps of 170.06 / 0.825 Mbps.
    pub fn reference(seed: u64) -> Self {
        let spacing = 400.0;
        let sites = (0..8u32)
            .map(|i| GnbSite {
                cell_id: i + 1,
                position: (f64::from(i % 4) * spacing, f64::from(i / 4) * spacing),
                tx_power_dbm: 46.0,
                coverage_radius_m: 250.0,
            })
            .collect();
        let mut topology = Topology::new(sites);
        topology.path_loss = PathLoss { exponent: 3.0, ref_loss_db: 40.0, ref_distance_m: 1.0 };
        topology.interference_load = 0.1;
        Self {
            topology,
            sessions: 2206,
            min_speed_kmh: 0.0,
            max_speed_kmh: 88.0,
            shadowing_db: 4.0,
            sinr_measurement_db: 1.0,
            downlink: RateCurve::new(170.06),
            uplink: RateCurve::new(0.825),
            area: None,
            start_time: 1_581_599_004.0,
            session_interval_s: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.sessions == 0 {
            return bad("session count must be positive");
        }
        if !(self.min_speed_kmh >= 0.0) || !(self.max_speed_kmh >= self.min_speed_kmh) {
            return bad("speed range must satisfy 0 <= min <= max");
        }
        if !(self.shadowing_db >= 0.0) || !(self.sinr_measurement_db >= 0.0) {
            return bad("noise deviations must be non-negative");
        }
        for (name, c) in [("downlink", &self.downlink), ("uplink", &self.uplink)] {
            if !(c.cap_mbps > 0.0) || !(c.noise_sigma >= 0.0) || !c.slope.is_finite() || !c.midpoint.is_finite() {
                return Err(Error::Config(format!("{name} rate curve is invalid")));
            }
        }
        if let Some(a) = self.area {
            if !(a.x_max >= a.x_min) || !(a.y_max >= a.y_min) {
                return bad("area bounds are inverted");
            }
        }
        if !(self.session_interval_s > 0.0) || !self.start_time.is_finite() {
            return bad("timestamps need a finite start and a positive interval");
        }
        Ok(())
    }

    pub fn drop_area(&self) -> Area {
        self.area.unwrap_or_else(|| {
            let mut a = Area {
                x_min: f64::INFINITY,
                x_max: f64::NEG_INFINITY,
                y_min: f64::INFINITY,
                y_max: f64::NEG_INFINITY,
            };
            for s in &self.topology.sites {
                let r = s.coverage_radius_m;
                a.x_min = a.x_min.min(s.position.0 - r);
                a.x_max = a.x_max.max(s.position.0 + r);
                a.y_min = a.y_min.min(s.position.1 - r);
                a.y_max = a.y_max.max(s.position.1 + r);
            }
            a
        })
    }
}

fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated non-negative")
}

fn draw_rate(curve: &RateCurve, cqi: f64, rng: &mut Rng) -> f64 {
    let noise = libm::exp(normal(curve.noise_sigma).sample(rng));
    (curve.mean_rate(cqi) * noise).min(curve.cap_mbps)
}

/// Generates `cfg.sessions` records. The returned dataset carries the
/// topology; the split is left to [`crate::dataset::train_test_split`].
pub fn synth_generate(cfg: &ScenarioConfig) -> Result<Dataset> {
    cfg.validate()?;
    let topo = &cfg.topology;
    let area = cfg.drop_area();
    let shadow = normal(cfg.shadowing_db);
    let meas = normal(cfg.sinr_measurement_db);
    let res = radio::SUBCARRIERS_PER_RB * f64::from(topo.num_rbs);

    let mut records = Vec::with_capacity(cfg.sessions);
    let mut rx = Vec::with_capacity(topo.sites.len());
    for k in 0..cfg.sessions {
        // One stream per session keeps a session's draws independent of the
        // session count.
        let mut rng = rng_from_seed(derive_seed(cfg.seed, k as u64));
        let pos = (uniform(&mut rng, area.x_min, area.x_max), uniform(&mut rng, area.y_min, area.y_max));
        let speed = uniform(&mut rng, cfg.min_speed_kmh, cfg.max_speed_kmh);

        rx.clear();
        for site in &topo.sites {
            let s = if cfg.shadowing_db > 0.0 { shadow.sample(&mut rng) } else { 0.0 };
            rx.push(topo.received_dbm(site, pos) - s);
        }
        // Strongest site serves; ties go to the first declared site.
        let serving = rx
            .iter()
            .enumerate()
            .fold(0, |best, (i, p)| if *p > rx[best] { i } else { best });

        let interference: Vec<f64> = rx
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != serving)
            .map(|(_, p)| topo.interference_load * radio::dbm_to_mw(*p) / res)
            .collect();
        let link = LinkBudget {
            rssi_dbm: rx[serving],
            num_rbs: topo.num_rbs,
            bandwidth_hz: topo.bandwidth_hz,
            interference_mw: interference,
            noise_dbm: None,
        };
        let m = radio::quality_model(&link)?;
        let sinr_db = if cfg.sinr_measurement_db > 0.0 { m.sinr_db + meas.sample(&mut rng) } else { m.sinr_db };
        let cqi = f64::from(radio::cqi_from_sinr(sinr_db)?.index);

        records.push(SessionRecord {
            timestamp: cfg.start_time + k as f64 * cfg.session_interval_s,
            cell_id: topo.sites[serving].cell_id,
            speed_kmh: speed,
            rssi_dbm: rx[serving],
            rsrp_dbm: m.rsrp_dbm,
            rsrq_db: m.rsrq_db,
            sinr_db,
            cqi,
            dl_mbps: draw_rate(&cfg.downlink, cqi, &mut rng),
            ul_mbps: draw_rate(&cfg.uplink, cqi, &mut rng),
            position: Some(pos),
        });
    }
    Ok(Dataset::new(records).with_topology(topo.clone()))
}
