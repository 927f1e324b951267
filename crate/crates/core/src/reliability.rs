//! Monte Carlo generation adequacy: LOLE and SAIFI of a dispatchable fleet.
//!
//! Each trial is one simulated horizon (normally a year). Every unit is
//! independently on forced outage with probability `forced_outage_rate` in
//! each outage epoch. A sample is short when the available capacity is below
//! the net load. LOLE counts days with at least one short sample; SAIFI counts
//! runs of consecutive short samples, each one interrupting every customer on
//! the single bus. Both are scaled to a 8760 h year.
//!
//! Availability draws are a counter-based hash of (seed, unit slot, trial,
//! epoch). Unit slot `j` therefore sees the same outage history in every fleet
//! evaluated against a bank, which makes the metrics monotone in unit ratings
//! and keeps results independent of thread scheduling.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{TimeSeries, HOURS_PER_YEAR};
use crate::stochastic::{derive_seed, NetLoadModel};

const Z_95: f64 = 1.959_963_984_540_054;
const AVAILABILITY_STREAM: u64 = 0xA11A;
const BESS_SLOT: u64 = u64::MAX;
const TRIAL_STREAM: u64 = 0x7121;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GensetTechnology {
    Biomass,
    NaturalGas,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispatchableUnit {
    pub rated_power: f64,
    pub forced_outage_rate: f64,
    pub technology: GensetTechnology,
}

impl DispatchableUnit {
    pub fn new(
        rated_power: f64,
        forced_outage_rate: f64,
        technology: GensetTechnology,
    ) -> Result<Self> {
        if !(rated_power > 0.0 && rated_power.is_finite()) {
            return Err(Error::domain(format!(
                "unit rating must be positive, got {rated_power}"
            )));
        }
        check_for(forced_outage_rate)?;
        Ok(Self {
            rated_power,
            forced_outage_rate,
            technology,
        })
    }
}

fn check_for(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "forced outage rate {rate} outside [0, 1)"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BessDispatch {
    /// Full rated power whenever the battery is available.
    Firm,
    /// Each run of genset deficit starts from `energy_kwh` of usable energy
    /// and stops supporting once it is spent.
    EnergyLimited { energy_kwh: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BessSupport {
    pub power_kw: f64,
    pub forced_outage_rate: f64,
    pub dispatch: BessDispatch,
}

impl BessSupport {
    pub fn firm(power_kw: f64, forced_outage_rate: f64) -> Self {
        Self {
            power_kw,
            forced_outage_rate,
            dispatch: BessDispatch::Firm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReliabilitySettings {
    pub trials: usize,
    pub rng_seed: u64,
    pub customers: u32,
    /// Length of one outage epoch; units keep their state within an epoch.
    pub epoch_hours: f64,
    /// Per-trial net-load series are kept in memory when
    /// `trials · samples` does not exceed this; otherwise they are redrawn.
    pub cache_limit_samples: usize,
}

impl Default for ReliabilitySettings {
    fn default() -> Self {
        Self {
            trials: 1000,
            rng_seed: 0,
            customers: 1000,
            epoch_hours: 168.0,
            cache_limit_samples: 12_000_000,
        }
    }
}

impl ReliabilitySettings {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::config("reliability.trials", "must be at least 1"));
        }
        if self.customers < 1 {
            return Err(Error::config("reliability.customers", "must be at least 1"));
        }
        if !(self.epoch_hours > 0.0) {
            return Err(Error::config("reliability.epoch_hours", "must be positive"));
        }
        Ok(())
    }
}

/// Where each trial's net load comes from.
#[derive(Debug, Clone)]
pub enum NetLoadSource {
    /// Every trial sees the same profile, `load − Σ counted renewables`.
    Fixed(TimeSeries),
    /// Fresh draw of load and renewables per trial.
    Stochastic(NetLoadModel),
}

impl NetLoadSource {
    fn interval_hours(&self) -> f64 {
        match self {
            NetLoadSource::Fixed(s) => s.interval_hours(),
            NetLoadSource::Stochastic(m) => m.load.base_profile().interval_hours(),
        }
    }

    fn horizon(&self) -> usize {
        match self {
            NetLoadSource::Fixed(s) => s.len(),
            NetLoadSource::Stochastic(m) => m.horizon,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReliabilityConfig {
    pub units: Vec<DispatchableUnit>,
    pub bess: Option<BessSupport>,
    pub source: NetLoadSource,
    pub settings: ReliabilitySettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityMetrics {
    pub lole_days_per_year: f64,
    pub saifi_per_customer_year: f64,
    pub lole_half_width_95: f64,
    pub saifi_half_width_95: f64,
    pub trials: usize,
}

impl ReliabilityMetrics {
    pub fn lole_upper(&self) -> f64 {
        self.lole_days_per_year + self.lole_half_width_95
    }
}

/// `peak · (1 + prm)`.
pub fn planning_capacity(peak_load: f64, prm: f64) -> Result<f64> {
    if !(peak_load >= 0.0) || !(prm >= 0.0) {
        return Err(Error::domain("peak load and reserve margin must be >= 0"));
    }
    Ok(peak_load * (1.0 + prm))
}

/// Reserve margin implied by covering the largest unit plus an explicit
/// uncertainty allowance on top of the peak.
pub fn implied_prm(peak_load: f64, largest_unit: f64, uncertainty: f64) -> Result<f64> {
    if !(peak_load > 0.0) || !(largest_unit >= 0.0) || !(uncertainty >= 0.0) {
        return Err(Error::domain("peak must be positive, margins >= 0"));
    }
    Ok((largest_unit + uncertainty) / peak_load)
}

/// `(Σ ratings + bess − peak) / peak`. Negative when under-provisioned.
pub fn prm_of_fleet(units: &[DispatchableUnit], bess_power: f64, peak_load: f64) -> Result<f64> {
    if !(peak_load > 0.0) {
        return Err(Error::domain("peak load must be positive"));
    }
    let total: f64 = units.iter().map(|u| u.rated_power).sum::<f64>() + bess_power;
    Ok((total - peak_load) / peak_load)
}

/// Largest unit rating over total dispatchable capacity.
pub fn plg(units: &[DispatchableUnit], p_total: f64) -> Result<f64> {
    if units.is_empty() {
        return Err(Error::Empty("unit list"));
    }
    if !(p_total > 0.0) {
        return Err(Error::domain("total capacity must be positive"));
    }
    Ok(units.iter().map(|u| u.rated_power).fold(0.0, f64::max) / p_total)
}

/// Contiguous samples sharing one day and one outage epoch.
#[derive(Debug, Clone, Copy)]
struct Segment {
    start: usize,
    end: usize,
    day: usize,
    epoch: usize,
}

#[derive(Debug)]
enum TrialLoads {
    Shared(Vec<f64>),
    Cached(Vec<Vec<f64>>),
    Redraw(NetLoadModel),
}

/// Pre-drawn trial net loads with per-segment maxima, reused across every
/// fleet evaluated in a study.
#[derive(Debug)]
pub struct ScenarioBank {
    settings: ReliabilitySettings,
    interval_hours: f64,
    horizon: usize,
    samples_per_epoch: usize,
    epochs: usize,
    segments: Vec<Segment>,
    /// `segment_max[trial * segments + s]`, or one row when loads are shared.
    segment_max: Vec<f64>,
    /// Segment index range of each epoch.
    epoch_segments: Vec<(usize, usize)>,
    /// Largest net load per epoch, laid out like `segment_max`.
    epoch_max: Vec<f64>,
    /// Up/down bits per (trial, epoch) for each forced outage rate: bit `j`
    /// is unit slot `j`, or the battery when the flag is set.
    masks: Mutex<HashMap<(u64, bool), MaskTable>>,
    loads: TrialLoads,
    year_scale: f64,
}

impl ScenarioBank {
    pub fn new(source: NetLoadSource, settings: ReliabilitySettings) -> Result<Self> {
        settings.validate()?;
        let interval = source.interval_hours();
        let horizon = source.horizon();
        if horizon == 0 {
            return Err(Error::Empty("net load series"));
        }
        let per_day = 24.0 / interval;
        if (per_day - per_day.round()).abs() > 1e-9 || per_day < 1.0 {
            return Err(Error::domain(format!(
                "sample interval {interval} h must divide a 24 h day"
            )));
        }
        let per_day = per_day.round() as usize;
        let samples_per_epoch = ((settings.epoch_hours / interval).round() as usize).max(1);
        let epochs = horizon.div_ceil(samples_per_epoch);

        let mut segments = Vec::new();
        let mut start = 0;
        while start < horizon {
            let day = start / per_day;
            let epoch = start / samples_per_epoch;
            let end = ((day + 1) * per_day)
                .min((epoch + 1) * samples_per_epoch)
                .min(horizon);
            segments.push(Segment {
                start,
                end,
                day,
                epoch,
            });
            start = end;
        }

        let seg_max = |series: &[f64]| -> Vec<f64> {
            segments
                .iter()
                .map(|s| {
                    series[s.start..s.end]
                        .iter()
                        .copied()
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect::<Vec<_>>()
        };

        let (segment_max, loads) = match source {
            NetLoadSource::Fixed(series) => {
                let samples = series.into_samples();
                (seg_max(&samples), TrialLoads::Shared(samples))
            }
            NetLoadSource::Stochastic(model) => {
                let draws: Vec<Vec<f64>> = (0..settings.trials)
                    .into_par_iter()
                    .map(|t| {
                        model
                            .draw(derive_seed(settings.rng_seed, TRIAL_STREAM, t as u64))
                            .map(|d| d.net.into_samples())
                    })
                    .collect::<Result<_>>()?;
                let maxima: Vec<f64> = draws.iter().flat_map(|d| seg_max(d)).collect();
                if settings.trials * horizon <= settings.cache_limit_samples {
                    (maxima, TrialLoads::Cached(draws))
                } else {
                    (maxima, TrialLoads::Redraw(model))
                }
            }
        };

        let mut epoch_segments = vec![(0, 0); epochs];
        for (i, seg) in segments.iter().enumerate() {
            let r = &mut epoch_segments[seg.epoch];
            if r.1 == 0 {
                r.0 = i;
            }
            r.1 = i + 1;
        }
        let epoch_max = segment_max
            .chunks(segments.len())
            .flat_map(|row| {
                epoch_segments
                    .iter()
                    .map(|&(a, b)| row[a..b].iter().copied().fold(f64::NEG_INFINITY, f64::max))
                    .collect::<Vec<_>>()
            })
            .collect();

        Ok(Self {
            settings,
            interval_hours: interval,
            horizon,
            samples_per_epoch,
            epochs,
            segments,
            segment_max,
            epoch_segments,
            epoch_max,
            masks: Mutex::new(HashMap::new()),
            loads,
            year_scale: HOURS_PER_YEAR / (horizon as f64 * interval),
        })
    }

    pub fn settings(&self) -> &ReliabilitySettings {
        &self.settings
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn interval_hours(&self) -> f64 {
        self.interval_hours
    }

    fn trial_load(&self, trial: usize) -> Result<std::borrow::Cow<'_, [f64]>> {
        Ok(match &self.loads {
            TrialLoads::Shared(s) => std::borrow::Cow::Borrowed(s.as_slice()),
            TrialLoads::Cached(d) => std::borrow::Cow::Borrowed(d[trial].as_slice()),
            TrialLoads::Redraw(model) => std::borrow::Cow::Owned(
                model
                    .draw(derive_seed(
                        self.settings.rng_seed,
                        TRIAL_STREAM,
                        trial as u64,
                    ))?
                    .net
                    .into_samples(),
            ),
        })
    }

    fn trial_maxima(&self, trial: usize) -> &[f64] {
        let n = self.segments.len();
        match self.loads {
            TrialLoads::Shared(_) => &self.segment_max,
            _ => &self.segment_max[trial * n..(trial + 1) * n],
        }
    }

    /// Available genset and battery capacity per epoch for one trial.
    fn epoch_capacity(
        &self,
        units: &[DispatchableUnit],
        bess: Option<&BessSupport>,
        trial: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut gensets = vec![0.0; self.epochs];
        for (slot, unit) in units.iter().enumerate() {
            let key = derive_seed(self.settings.rng_seed, AVAILABILITY_STREAM, slot as u64);
            for (e, cap) in gensets.iter_mut().enumerate() {
                if unit_uniform(key, trial, e) >= unit.forced_outage_rate {
                    *cap += unit.rated_power;
                }
            }
        }
        let mut battery = vec![0.0; self.epochs];
        if let Some(b) = bess {
            let key = derive_seed(self.settings.rng_seed, AVAILABILITY_STREAM, BESS_SLOT);
            for (e, cap) in battery.iter_mut().enumerate() {
                if unit_uniform(key, trial, e) >= b.forced_outage_rate {
                    *cap = b.power_kw;
                }
            }
        }
        (gensets, battery)
    }

    fn validate_fleet(units: &[DispatchableUnit], bess: Option<&BessSupport>) -> Result<()> {
        for u in units {
            DispatchableUnit::new(u.rated_power, u.forced_outage_rate, u.technology)?;
        }
        if let Some(b) = bess {
            check_for(b.forced_outage_rate)?;
            if !(b.power_kw >= 0.0) {
                return Err(Error::domain("battery power must be >= 0"));
            }
        }
        Ok(())
    }

    fn availability_masks(&self, rate: f64, battery: bool) -> Arc<Vec<u64>> {
        let key = (rate.to_bits(), battery);
        if let Some(m) = self.masks.lock().unwrap().get(&key) {
            return Arc::clone(m);
        }
        let slot_keys: Vec<u64> = if battery {
            vec![derive_seed(
                self.settings.rng_seed,
                AVAILABILITY_STREAM,
                BESS_SLOT,
            )]
        } else {
            (0..64)
                .map(|j| derive_seed(self.settings.rng_seed, AVAILABILITY_STREAM, j))
                .collect()
        };
        let epochs = self.epochs;
        let masks: Vec<u64> = (0..self.settings.trials * epochs)
            .into_par_iter()
            .map(|i| {
                let (t, e) = (i / epochs, i % epochs);
                slot_keys
                    .iter()
                    .enumerate()
                    .filter(|&(_, &k)| unit_uniform(k, t, e) >= rate)
                    .fold(0u64, |m, (j, _)| m | (1 << j))
            })
            .collect();
        let masks = Arc::new(masks);
        self.masks
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| Arc::clone(&masks));
        masks
    }

    /// Pre-drawn availability for fleets of at most 64 units.
    fn fleet_index(
        &self,
        units: &[DispatchableUnit],
        bess: Option<&BessSupport>,
    ) -> Option<FleetIndex> {
        if units.len() > 64 {
            return None;
        }
        let mut groups: Vec<(f64, u64)> = Vec::new();
        for (j, u) in units.iter().enumerate() {
            match groups.iter_mut().find(|g| g.0 == u.forced_outage_rate) {
                Some(g) => g.1 |= 1 << j,
                None => groups.push((u.forced_outage_rate, 1 << j)),
            }
        }
        Some(FleetIndex {
            ratings: units.iter().map(|u| u.rated_power).collect(),
            used: groups.iter().fold(0, |u, g| u | g.1),
            all_up: units.iter().fold(0.0, |acc, u| acc + u.rated_power),
            groups: groups
                .into_iter()
                .map(|(rate, slots)| (self.availability_masks(rate, false), slots))
                .collect(),
            battery: bess.map(|b| {
                (
                    self.availability_masks(b.forced_outage_rate, true),
                    b.power_kw,
                )
            }),
        })
    }

    /// Shortfall days per trial, unscaled. Capacity is summed in slot order
    /// exactly as in the per-sample path so both agree bit for bit.
    fn trial_short_days(&self, fleet: &FleetIndex, trial: usize) -> f64 {
        let epochs = self.epochs;
        let span = trial * epochs..(trial + 1) * epochs;
        let maxima = self.trial_maxima(trial);
        let emax = match self.loads {
            TrialLoads::Shared(_) => &self.epoch_max[..],
            _ => &self.epoch_max[span.clone()],
        };
        let single = match fleet.groups.as_slice() {
            [(m, slots)] => Some((&m[span.clone()], *slots)),
            _ => None,
        };
        let battery = fleet.battery.as_ref().map(|(m, p)| (&m[span.clone()], *p));

        let mut days = 0usize;
        let mut last_day = usize::MAX;
        for (e, &peak_e) in emax.iter().enumerate() {
            let up = match single {
                Some((m, slots)) => m[e] & slots,
                None => {
                    let off = span.start + e;
                    fleet
                        .groups
                        .iter()
                        .fold(0u64, |u, (m, slots)| u | (m[off] & slots))
                }
            };
            let gensets = if up == fleet.used {
                fleet.all_up
            } else {
                let mut acc = 0.0;
                let mut bits = up;
                while bits != 0 {
                    acc += fleet.ratings[bits.trailing_zeros() as usize];
                    bits &= bits - 1;
                }
                acc
            };
            let cap = match battery {
                Some((m, p)) if m[e] & 1 == 1 => gensets + p,
                _ => gensets + 0.0,
            };
            if !(cap < peak_e) {
                continue;
            }
            let (a, b) = self.epoch_segments[e];
            for (seg, &peak) in self.segments[a..b].iter().zip(&maxima[a..b]) {
                if seg.day != last_day && cap < peak {
                    days += 1;
                    last_day = seg.day;
                }
            }
        }
        days as f64
    }

    fn trial_short_days_slow(
        &self,
        units: &[DispatchableUnit],
        bess: Option<&BessSupport>,
        trial: usize,
    ) -> f64 {
        let (gensets, battery) = self.epoch_capacity(units, bess, trial);
        let maxima = self.trial_maxima(trial);
        let mut days = 0usize;
        let mut last_day = usize::MAX;
        for (seg, &peak) in self.segments.iter().zip(maxima) {
            if seg.day != last_day && gensets[seg.epoch] + battery[seg.epoch] < peak {
                days += 1;
                last_day = seg.day;
            }
        }
        days as f64
    }

    /// Per-sample simulation of one trial: (short days, interruption events).
    fn trial_full(
        &self,
        units: &[DispatchableUnit],
        bess: Option<&BessSupport>,
        trial: usize,
    ) -> Result<(f64, f64)> {
        let (gensets, battery) = self.epoch_capacity(units, bess, trial);
        let load = self.trial_load(trial)?;
        let limit = bess.and_then(|b| match b.dispatch {
            BessDispatch::EnergyLimited { energy_kwh } => Some(energy_kwh),
            BessDispatch::Firm => None,
        });
        let t = self.interval_hours;

        let mut days = 0usize;
        let mut last_day = usize::MAX;
        let mut events = 0usize;
        let mut prev_short = false;
        let mut stored = 0.0;
        let mut in_deficit = false;
        for seg in &self.segments {
            let g = gensets[seg.epoch];
            let b = battery[seg.epoch];
            for &nl in &load[seg.start..seg.end] {
                let short = match limit {
                    None => g + b < nl,
                    Some(energy) => {
                        let deficit = nl - g;
                        if deficit > 0.0 {
                            if !in_deficit {
                                stored = energy;
                                in_deficit = true;
                            }
                            let supply = deficit.min(b).min(stored / t);
                            stored -= supply * t;
                            supply < deficit
                        } else {
                            in_deficit = false;
                            false
                        }
                    }
                };
                if short && !prev_short {
                    events += 1;
                }
                if short && seg.day != last_day {
                    days += 1;
                    last_day = seg.day;
                }
                prev_short = short;
            }
        }
        Ok((days as f64, events as f64))
    }

    /// LOLE only, using per-segment maxima. Energy-limited batteries need the
    /// per-sample path.
    pub fn lole(
        &self,
        units: &[DispatchableUnit],
        bess: Option<&BessSupport>,
    ) -> Result<(f64, f64)> {
        Self::validate_fleet(units, bess)?;
        if matches!(
            bess.map(|b| b.dispatch),
            Some(BessDispatch::EnergyLimited { .. })
        ) {
            let m = self.evaluate(units, bess)?;
            return Ok((m.lole_days_per_year, m.lole_half_width_95));
        }
        let index = self.fleet_index(units, bess);
        let per_trial: Vec<f64> = (0..self.settings.trials)
            .into_par_iter()
            .map(|t| {
                let days = match &index {
                    Some(f) => self.trial_short_days(f, t),
                    None => self.trial_short_days_slow(units, bess, t),
                };
                days * self.year_scale
            })
            .collect();
        Ok(mean_and_half_width(&per_trial))
    }

    pub fn evaluate(
        &self,
        units: &[DispatchableUnit],
        bess: Option<&BessSupport>,
    ) -> Result<ReliabilityMetrics> {
        Self::validate_fleet(units, bess)?;
        let per_trial: Vec<(f64, f64)> = (0..self.settings.trials)
            .into_par_iter()
            .map(|t| self.trial_full(units, bess, t))
            .collect::<Result<_>>()?;
        let days: Vec<f64> = per_trial.iter().map(|p| p.0 * self.year_scale).collect();
        // every event interrupts all customers of the single bus
        let customers = f64::from(self.settings.customers);
        let saifi: Vec<f64> = per_trial
            .iter()
            .map(|p| p.1 * customers / customers * self.year_scale)
            .collect();
        let (lole, lole_hw) = mean_and_half_width(&days);
        let (saifi, saifi_hw) = mean_and_half_width(&saifi);
        Ok(ReliabilityMetrics {
            lole_days_per_year: lole,
            saifi_per_customer_year: saifi,
            lole_half_width_95: lole_hw,
            saifi_half_width_95: saifi_hw,
            trials: self.settings.trials,
        })
    }

    pub fn samples_per_epoch(&self) -> usize {
        self.samples_per_epoch
    }
}

/// One availability bit per (trial, epoch), bit `j` for unit slot `j`.
type MaskTable = Arc<Vec<u64>>;

#[derive(Debug)]
struct FleetIndex {
    ratings: Vec<f64>,
    used: u64,
    all_up: f64,
    groups: Vec<(Arc<Vec<u64>>, u64)>,
    battery: Option<(Arc<Vec<u64>>, f64)>,
}

fn unit_uniform(key: u64, trial: usize, epoch: usize) -> f64 {
    (derive_seed(key, trial as u64, epoch as u64) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sample mean and 95% normal half-width of the mean. A single trial has no
/// spread estimate and reports a zero half-width.
fn mean_and_half_width(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Z_95 * (var / n).sqrt())
}

pub fn evaluate_reliability(config: &ReliabilityConfig) -> Result<ReliabilityMetrics> {
    let bank = ScenarioBank::new(config.source.clone(), config.settings)?;
    bank.evaluate(&config.units, config.bess.as_ref())
}

/// Fleets synthesized from a reserve margin and a largest-unit proportion,
/// evaluated against one shared scenario bank.
#[derive(Debug, Clone)]
pub struct AdequacyStudy {
    pub bank: Arc<ScenarioBank>,
    /// Peak the reserve margin is measured against.
    pub reference_peak_kw: f64,
    pub unit_forced_outage_rate: f64,
}

impl AdequacyStudy {
    pub fn new(
        bank: Arc<ScenarioBank>,
        reference_peak_kw: f64,
        unit_forced_outage_rate: f64,
    ) -> Result<Self> {
        if !(reference_peak_kw > 0.0) {
            return Err(Error::domain("reference peak must be positive"));
        }
        check_for(unit_forced_outage_rate)?;
        Ok(Self {
            bank,
            reference_peak_kw,
            unit_forced_outage_rate,
        })
    }

    /// Total capacity `peak · (1 + prm)` split into units of
    /// `plg_target · total` plus one remainder unit.
    pub fn synthesize_fleet(&self, prm: f64, plg_target: f64) -> Result<Vec<DispatchableUnit>> {
        if !(plg_target > 0.0 && plg_target <= 1.0) {
            return Err(Error::domain(format!(
                "largest-unit proportion {plg_target} outside (0, 1]"
            )));
        }
        let total = planning_capacity(self.reference_peak_kw, prm)?;
        let largest = plg_target * total;
        let full = (1.0 / plg_target + 1e-9).floor() as usize;
        let remainder = total - full as f64 * largest;
        let mut units = vec![
            DispatchableUnit::new(
                largest,
                self.unit_forced_outage_rate,
                GensetTechnology::NaturalGas
            )?;
            full
        ];
        if remainder > 1e-9 * total {
            units.push(DispatchableUnit::new(
                remainder,
                self.unit_forced_outage_rate,
                GensetTechnology::NaturalGas,
            )?);
        }
        Ok(units)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub prm: f64,
    pub plg: f64,
    pub metrics: ReliabilityMetrics,
}

/// Metrics of synthesized fleets along a reserve-margin grid.
pub fn reliability_curve(
    study: &AdequacyStudy,
    prm_grid: &[f64],
    plg_target: f64,
) -> Result<Vec<CurvePoint>> {
    if prm_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("reserve margin grid must be ascending"));
    }
    prm_grid
        .iter()
        .map(|&prm| {
            let units = study.synthesize_fleet(prm, plg_target)?;
            Ok(CurvePoint {
                prm,
                plg: plg_target,
                metrics: study.bank.evaluate(&units, None)?,
            })
        })
        .collect()
}

/// `prm,plg,lole,lole_hw,saifi,saifi_hw`.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["prm", "plg", "lole", "lole_hw", "saifi", "saifi_hw"])?;
    for p in points {
        wtr.write_record([
            p.prm.to_string(),
            p.plg.to_string(),
            p.metrics.lole_days_per_year.to_string(),
            p.metrics.lole_half_width_95.to_string(),
            p.metrics.saifi_per_customer_year.to_string(),
            p.metrics.saifi_half_width_95.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reserve-margin grid searched by [`min_prm_for_lole`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrmSearch {
    pub max_prm: f64,
    pub step: f64,
}

impl Default for PrmSearch {
    fn default() -> Self {
        Self {
            max_prm: 2.0,
            step: 0.005,
        }
    }
}

impl PrmSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.max_prm >= 0.0) {
            return Err(Error::config(
                "reliability.prm_search",
                "step must be > 0 and max_prm >= 0",
            ));
        }
        Ok(())
    }

    pub fn grid_len(&self) -> usize {
        (self.max_prm / self.step + 1e-9).floor() as usize + 1
    }

    pub fn at(&self, index: usize) -> f64 {
        index as f64 * self.step
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PrmOutcome {
    Found {
        prm: f64,
        lole: f64,
        lole_half_width: f64,
    },
    /// Even the top of the search grid misses the threshold.
    Unreachable {
        max_prm: f64,
        lole: f64,
        lole_half_width: f64,
    },
}

impl PrmOutcome {
    pub fn prm(&self) -> Option<f64> {
        match *self {
            PrmOutcome::Found { prm, .. } => Some(prm),
            PrmOutcome::Unreachable { .. } => None,
        }
    }
}

/// Smallest grid margin whose LOLE estimate plus half-width meets
/// `lole_threshold`, searched over the monotone grid.
pub fn min_prm_for_lole(
    study: &AdequacyStudy,
    lole_threshold: f64,
    plg_target: f64,
    search: &PrmSearch,
) -> Result<PrmOutcome> {
    search_grid(lole_threshold, search, search.grid_len() - 1, |prm| {
        let units = study.synthesize_fleet(prm, plg_target)?;
        study.bank.lole(&units, None)
    })
}

/// Smallest passing index of `search`'s grid for a LOLE model that is
/// non-increasing in the margin. Gallops away from `start` until the answer
/// is bracketed, then bisects, so a good `start` needs only a few calls.
pub fn search_grid<F>(
    lole_threshold: f64,
    search: &PrmSearch,
    start: usize,
    mut lole_at: F,
) -> Result<PrmOutcome>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    if !(lole_threshold > 0.0) {
        return Err(Error::domain("LOLE threshold must be positive"));
    }
    search.validate()?;
    let top = search.grid_len() - 1;
    let passes = |(l, hw): (f64, f64)| l + hw <= lole_threshold;
    let found = |k: usize, m: (f64, f64)| PrmOutcome::Found {
        prm: search.at(k),
        lole: m.0,
        lole_half_width: m.1,
    };

    let k0 = start.min(top);
    let m0 = lole_at(search.at(k0))?;
    let (mut fail, mut pass, mut best);
    if passes(m0) {
        (pass, best) = (k0, m0);
        let mut step = 1;
        loop {
            if pass == 0 {
                return Ok(found(0, best));
            }
            let k = pass.saturating_sub(step);
            let m = lole_at(search.at(k))?;
            if passes(m) {
                (pass, best) = (k, m);
                step *= 2;
            } else {
                fail = k;
                break;
            }
        }
    } else {
        let (mut last, mut step) = (m0, 1);
        fail = k0;
        loop {
            if fail == top {
                return Ok(PrmOutcome::Unreachable {
                    max_prm: search.at(top),
                    lole: last.0,
                    lole_half_width: last.1,
                });
            }
            let k = (fail + step).min(top);
            let m = lole_at(search.at(k))?;
            if passes(m) {
                (pass, best) = (k, m);
                break;
            }
            (fail, last) = (k, m);
            step *= 2;
        }
    }
    while pass - fail > 1 {
        let mid = fail + (pass - fail) / 2;
        let m = lole_at(search.at(mid))?;
        if passes(m) {
            (pass, best) = (mid, m);
        } else {
            fail = mid;
        }
    }
    Ok(found(pass, best))
}
