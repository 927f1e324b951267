//! Seeded synthetic load, PV and wind profiles.
//!
//! Load carries multiplicative Gaussian forecast error on top of a periodic
//! base profile. PV output is a clear-sky availability shape attenuated by a
//! Beta-distributed cloud factor. Wind output is a Weibull wind speed pushed
//! through a cut-in / rated / cut-out power curve. Every generator is a pure
//! function of its parameters and seed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal, Weibull};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{TimeSeries, HOURS_PER_YEAR};

/// splitmix64 finalizer. Used to derive independent child seeds from a
/// master seed by counter, so derived streams do not depend on thread order.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadModel {
    base_profile: TimeSeries,
    peak_load: f64,
    pub noise_std_fraction: f64,
    pub rng_seed: u64,
}

impl LoadModel {
    /// `base_profile` is rescaled so that its maximum equals `peak_load`.
    pub fn new(
        base_profile: TimeSeries,
        peak_load: f64,
        noise_std_fraction: f64,
        rng_seed: u64,
    ) -> Result<Self> {
        base_profile.ensure_nonnegative()?;
        if !(peak_load > 0.0) {
            return Err(Error::domain("peak load must be positive"));
        }
        if !(0.0..=0.5).contains(&noise_std_fraction) {
            return Err(Error::domain(format!(
                "load noise fraction must lie in [0, 0.5], got {noise_std_fraction}"
            )));
        }
        let shape_peak = base_profile.peak();
        if !(shape_peak > 0.0) {
            return Err(Error::domain("base load profile is identically zero"));
        }
        let base_profile = base_profile.scaled(peak_load / shape_peak)?;
        Ok(Self {
            base_profile,
            peak_load,
            noise_std_fraction,
            rng_seed,
        })
    }

    pub fn base_profile(&self) -> &TimeSeries {
        &self.base_profile
    }

    pub fn peak_load(&self) -> f64 {
        self.peak_load
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..self.clone()
        }
    }
}

/// Samples `base · max(0, 1 + ε)`, `ε ~ N(0, σ²)` i.i.d., tiled to `horizon`.
pub fn generate_load(model: &LoadModel, horizon: usize) -> Result<TimeSeries> {
    let base = model.base_profile.samples();
    let period = base.len();
    if horizon == 0 || !horizon.is_multiple_of(period) {
        return Err(Error::domain(format!(
            "horizon {horizon} is not a positive multiple of the profile period {period}"
        )));
    }
    let sigma = model.noise_std_fraction;
    let mut rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
    let samples = (0..horizon)
        .map(|i| {
            let b = base[i % period];
            if sigma == 0.0 {
                b
            } else {
                let eps: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
                b * (1.0 + eps).max(0.0)
            }
        })
        .collect();
    TimeSeries::new(samples, model.base_profile.interval_hours())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenewableTechnology {
    Pv,
    Wt,
}

/// Per-sample random attenuation applied to the availability shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variability {
    /// Degenerate at 1: output follows the shape exactly.
    None,
    /// Cloud factor ~ Beta(alpha, beta).
    BetaCloud { alpha: f64, beta: f64 },
    /// Wind speed ~ Weibull(shape, scale) in m/s, mapped through a power curve
    /// that rises with the cube of speed between cut-in and rated speed.
    WeibullWind {
        shape: f64,
        scale: f64,
        cut_in: f64,
        rated_speed: f64,
        cut_out: f64,
    },
}

impl Variability {
    fn validate(&self) -> Result<()> {
        match *self {
            Variability::None => Ok(()),
            Variability::BetaCloud { alpha, beta } => {
                if alpha > 0.0 && beta > 0.0 {
                    Ok(())
                } else {
                    Err(Error::domain("Beta cloud parameters must be positive"))
                }
            }
            Variability::WeibullWind {
                shape,
                scale,
                cut_in,
                rated_speed,
                cut_out,
            } => {
                if shape > 0.0
                    && scale > 0.0
                    && 0.0 <= cut_in
                    && cut_in < rated_speed
                    && rated_speed <= cut_out
                {
                    Ok(())
                } else {
                    Err(Error::domain(
                        "Weibull wind needs shape, scale > 0 and 0 <= cut_in < rated_speed <= cut_out",
                    ))
                }
            }
        }
    }
}

/// Fraction of rated output at wind speed `v`.
pub fn wind_power_fraction(v: f64, cut_in: f64, rated_speed: f64, cut_out: f64) -> f64 {
    if v < cut_in || v >= cut_out {
        0.0
    } else if v >= rated_speed {
        1.0
    } else {
        (v.powi(3) - cut_in.powi(3)) / (rated_speed.powi(3) - cut_in.powi(3))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewableModel {
    pub technology: RenewableTechnology,
    pub rated_power: f64,
    /// Deterministic availability in [0, 1], one period long.
    shape: TimeSeries,
    pub variability: Variability,
    pub rng_seed: u64,
}

impl RenewableModel {
    pub fn new(
        technology: RenewableTechnology,
        rated_power: f64,
        shape: TimeSeries,
        variability: Variability,
        rng_seed: u64,
    ) -> Result<Self> {
        if !(rated_power >= 0.0) {
            return Err(Error::domain("renewable rated power must be >= 0"));
        }
        if shape.samples().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain("availability shape must lie in [0, 1]"));
        }
        variability.validate()?;
        Ok(Self {
            technology,
            rated_power,
            shape,
            variability,
            rng_seed,
        })
    }

    pub fn shape(&self) -> &TimeSeries {
        &self.shape
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..self.clone()
        }
    }

    /// Output with the attenuation replaced by its mean, the natural point
    /// forecast of this model.
    pub fn expected_output(&self, horizon: usize) -> Result<TimeSeries> {
        let mean = match self.variability {
            Variability::None => 1.0,
            Variability::BetaCloud { alpha, beta } => alpha / (alpha + beta),
            Variability::WeibullWind { .. } => {
                // Monte Carlo mean of the power curve under the Weibull law.
                let probe = RenewableModel {
                    shape: TimeSeries::constant(1.0, 20_000, 1.0)?,
                    rated_power: 1.0,
                    ..self.clone()
                };
                generate_renewable(&probe, 20_000)?
                    .samples()
                    .iter()
                    .sum::<f64>()
                    / 20_000.0
            }
        };
        let period = self.shape.len();
        if horizon == 0 || !horizon.is_multiple_of(period) {
            return Err(Error::domain(
                "horizon must be a positive multiple of the shape period",
            ));
        }
        let samples = (0..horizon)
            .map(|i| self.rated_power * self.shape.samples()[i % period] * mean)
            .collect();
        TimeSeries::new(samples, self.shape.interval_hours())
    }
}

/// `rated · shape · attenuation`, clamped to `[0, rated]`.
pub fn generate_renewable(model: &RenewableModel, horizon: usize) -> Result<TimeSeries> {
    model.variability.validate()?;
    let shape = model.shape.samples();
    let period = shape.len();
    if horizon == 0 || !horizon.is_multiple_of(period) {
        return Err(Error::domain(format!(
            "horizon {horizon} is not a positive multiple of the shape period {period}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
    let rated = model.rated_power;

    let attenuation: Box<dyn FnMut(&mut ChaCha8Rng) -> f64> = match model.variability {
        Variability::None => Box::new(|_| 1.0),
        Variability::BetaCloud { alpha, beta } => {
            let dist = Beta::new(alpha, beta).map_err(|e| Error::domain(e.to_string()))?;
            Box::new(move |rng| dist.sample(rng))
        }
        Variability::WeibullWind {
            shape,
            scale,
            cut_in,
            rated_speed,
            cut_out,
        } => {
            let dist = Weibull::new(scale, shape).map_err(|e| Error::domain(e.to_string()))?;
            Box::new(move |rng| wind_power_fraction(dist.sample(rng), cut_in, rated_speed, cut_out))
        }
    };
    let mut attenuation = attenuation;

    let samples = (0..horizon)
        .map(|i| {
            let s = shape[i % period];
            if s == 0.0 {
                0.0
            } else {
                (rated * s * attenuation(&mut rng)).clamp(0.0, rated)
            }
        })
        .collect();
    TimeSeries::new(samples, model.shape.interval_hours())
}

/// `load − counted_fraction · Σ renewables`. Negative samples are kept.
pub fn net_load(
    load: &TimeSeries,
    renewables: &[TimeSeries],
    counted_fraction: f64,
) -> Result<TimeSeries> {
    if !(0.0..=1.0).contains(&counted_fraction) {
        return Err(Error::domain(format!(
            "counted renewable fraction must lie in [0, 1], got {counted_fraction}"
        )));
    }
    let mut samples = load.samples().to_vec();
    for re in renewables {
        load.ensure_compatible(re)?;
        for (s, &r) in samples.iter_mut().zip(re.samples()) {
            *s -= counted_fraction * r;
        }
    }
    TimeSeries::new(samples, load.interval_hours())
}

/// Load and renewable models evaluated together with one counted fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct NetLoadModel {
    pub load: LoadModel,
    pub renewables: Vec<RenewableModel>,
    pub counted_fraction: f64,
    pub horizon: usize,
}

/// One realization of every input plus the resulting net load.
#[derive(Debug, Clone)]
pub struct NetLoadDraw {
    pub load: TimeSeries,
    pub renewables: Vec<TimeSeries>,
    pub net: TimeSeries,
}

impl NetLoadModel {
    /// Realization for `seed`. Each component gets its own derived stream.
    pub fn draw(&self, seed: u64) -> Result<NetLoadDraw> {
        let load = generate_load(&self.load.with_seed(derive_seed(seed, 1, 0)), self.horizon)?;
        let renewables = self
            .renewables
            .iter()
            .enumerate()
            .map(|(i, m)| {
                generate_renewable(&m.with_seed(derive_seed(seed, 2, i as u64)), self.horizon)
            })
            .collect::<Result<Vec<_>>>()?;
        let net = net_load(&load, &renewables, self.counted_fraction)?;
        Ok(NetLoadDraw {
            load,
            renewables,
            net,
        })
    }

    pub fn with_fraction(&self, counted_fraction: f64) -> Self {
        Self {
            counted_fraction,
            ..self.clone()
        }
    }
}

/// Parameters of the synthetic community load shape: a residential evening
/// peak, a weekday commercial plateau and a summer cooling bump centred on
/// mid-afternoon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadShape {
    /// Overnight floor as a fraction of the daily maximum.
    pub night_floor: f64,
    /// Height of the daytime plateau (07:00–18:00).
    pub daytime_level: f64,
    /// Height of the residential evening bump at 19:00.
    pub evening_bump: f64,
    /// Amplitude of the cooling bump at the height of summer.
    pub cooling_bump: f64,
    /// Hour of day of the cooling maximum.
    pub cooling_hour: f64,
    /// Winter heating lift applied to all hours.
    pub heating_lift: f64,
    /// Weekend scaling of the daytime plateau.
    pub weekend_factor: f64,
}

impl Default for LoadShape {
    fn default() -> Self {
        Self {
            night_floor: 0.45,
            daytime_level: 0.25,
            evening_bump: 0.15,
            cooling_bump: 0.45,
            cooling_hour: 15.0,
            heating_lift: 0.10,
            weekend_factor: 0.7,
        }
    }
}

fn bump(hour: f64, centre: f64, width: f64) -> f64 {
    let d = (hour - centre) / width;
    (-0.5 * d * d).exp()
}

fn smooth_step(x: f64, edge: f64, width: f64) -> f64 {
    1.0 / (1.0 + (-(x - edge) / width).exp())
}

/// Deterministic yearly load shape normalized to a maximum of 1.
pub fn community_load_shape(shape: &LoadShape, interval_hours: f64) -> Result<TimeSeries> {
    let n = samples_per_year(interval_hours)?;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) * interval_hours;
            let day = (t / 24.0).floor();
            let hour = t - day * 24.0;
            // 0 at the winter solstice, 1 at the summer solstice.
            let summer = 0.5 - 0.5 * (2.0 * PI * (day + 10.0) / 365.0).cos();
            let cooling = summer.powi(3);
            let heating = (1.0 - summer).powi(3);
            let weekday = (day as i64 % 7) < 5;
            let plateau = smooth_step(hour, 7.0, 0.8) * (1.0 - smooth_step(hour, 18.0, 0.8));
            let daytime =
                shape.daytime_level * plateau * if weekday { 1.0 } else { shape.weekend_factor };
            shape.night_floor
                + daytime
                + shape.evening_bump * bump(hour, 19.0, 1.5)
                + shape.cooling_bump * cooling * bump(hour, shape.cooling_hour, 3.0)
                + shape.heating_lift * heating
        })
        .collect();
    let peak = samples.iter().copied().fold(0.0, f64::max);
    TimeSeries::new(
        samples.into_iter().map(|v| v / peak).collect(),
        interval_hours,
    )
}

/// Clear-sky PV availability from solar elevation at `latitude_deg`.
pub fn pv_clear_sky_shape(latitude_deg: f64, interval_hours: f64) -> Result<TimeSeries> {
    let n = samples_per_year(interval_hours)?;
    let lat = latitude_deg.to_radians();
    let samples = (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) * interval_hours;
            let day = (t / 24.0).floor();
            let hour = t - day * 24.0;
            let decl = (23.45f64).to_radians() * (2.0 * PI * (284.0 + day + 1.0) / 365.0).sin();
            let hour_angle = ((hour - 12.0) * 15.0).to_radians();
            let sin_elev = lat.sin() * decl.sin() + lat.cos() * decl.cos() * hour_angle.cos();
            sin_elev.max(0.0)
        })
        .collect();
    TimeSeries::new(samples, interval_hours)
}

/// Wind availability: a mild winter-high seasonal swing.
pub fn wind_seasonal_shape(winter_boost: f64, interval_hours: f64) -> Result<TimeSeries> {
    let n = samples_per_year(interval_hours)?;
    let samples = (0..n)
        .map(|i| {
            let day = ((i as f64 + 0.5) * interval_hours / 24.0).floor();
            let winter = 0.5 + 0.5 * (2.0 * PI * (day + 10.0) / 365.0).cos();
            ((1.0 - winter_boost) + winter_boost * winter).clamp(0.0, 1.0)
        })
        .collect();
    TimeSeries::new(samples, interval_hours)
}

pub fn samples_per_year(interval_hours: f64) -> Result<usize> {
    if !(interval_hours > 0.0) {
        return Err(Error::domain("sample interval must be positive"));
    }
    let n = HOURS_PER_YEAR / interval_hours;
    if (n - n.round()).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "interval {interval_hours} h does not divide a {HOURS_PER_YEAR} h year"
        )));
    }
    Ok(n.round() as usize)
}
