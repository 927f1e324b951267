//! TOML run configuration. Every field has a default; the defaults describe a
//! 4 MW community microgrid with 3 MW of PV, 1 MW of wind and a 0.5 MW
//! biomass genset.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost::{BessCostParameters, CostParameters, QfdMatrix};
use crate::error::{Error, Result};
use crate::planner::{
    CostCatalog, ForcedOutageRates, PlannerConfig, PlannerInputs, RenewableSeries,
};
use crate::pso::PsoConfig;
use crate::reliability::{PrmSearch, ReliabilitySettings};
use crate::series::TimeSeries;
use crate::sizing::BessParameters;
use crate::stochastic::{
    community_load_shape, pv_clear_sky_shape, wind_seasonal_shape, LoadModel, LoadShape,
    RenewableModel, RenewableTechnology, Variability,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub interval_hours: f64,
    pub load: LoadSection,
    pub renewables: Vec<RenewableSection>,
    pub planner: PlannerSection,
    pub bess: BessParameters,
    pub costs: CostCatalog,
    pub pso: PsoConfig,
    pub reliability: ReliabilitySettings,
    pub forced_outage: ForcedOutageRates,
    pub prm_search: PrmSearch,
    pub lcoe: LcoeSection,
    pub reliability_curve: CurveSection,
    pub qfd: QfdMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadSection {
    pub peak_kw: f64,
    pub noise_std_fraction: f64,
    pub shape: LoadShape,
    /// CSV profile used instead of the synthetic model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<PathBuf>,
}

impl Default for LoadSection {
    fn default() -> Self {
        Self {
            peak_kw: 4000.0,
            noise_std_fraction: 0.04,
            shape: LoadShape::default(),
            series: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewableSection {
    pub technology: RenewableTechnology,
    pub rated_kw: f64,
    /// Site latitude for the PV clear-sky shape.
    #[serde(default = "default_latitude")]
    pub latitude_deg: f64,
    /// Winter-over-summer availability swing for wind.
    #[serde(default = "default_winter_boost")]
    pub winter_boost: f64,
    #[serde(default = "default_variability")]
    pub variability: Variability,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<PathBuf>,
}

fn default_latitude() -> f64 {
    40.0
}

fn default_winter_boost() -> f64 {
    0.3
}

fn default_variability() -> Variability {
    Variability::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    pub counted_renewable_fraction: f64,
    pub biomass_kw: f64,
    /// Days per year.
    pub lole_threshold: f64,
    pub largest_genset_step: f64,
    pub include_renewables_in_plg: bool,
    /// Genset total is rounded up to a multiple of this; 0 disables.
    pub unit_rounding_kw: f64,
    pub sweep_fractions: Vec<f64>,
}

impl Default for PlannerSection {
    fn default() -> Self {
        Self {
            counted_renewable_fraction: 0.8,
            biomass_kw: 500.0,
            lole_threshold: 0.1,
            largest_genset_step: 100.0,
            include_renewables_in_plg: false,
            unit_rounding_kw: 0.0,
            sweep_fractions: vec![0.0, 0.2, 0.5, 0.8, 0.9, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LcoeSection {
    pub cf_grid: Vec<f64>,
    pub rated_kw: f64,
}

impl Default for LcoeSection {
    fn default() -> Self {
        Self {
            cf_grid: (1..=20).map(|i| f64::from(i) * 0.05).collect(),
            rated_kw: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveSection {
    pub prm_grid: Vec<f64>,
    pub plg_grid: Vec<f64>,
}

impl Default for CurveSection {
    fn default() -> Self {
        Self {
            prm_grid: (0..=12).map(|i| f64::from(i) * 0.05).collect(),
            plg_grid: vec![0.1, 0.2, 0.3, 0.5],
        }
    }
}

fn renewable_cost(capital: f64, fixed_om: f64, ptc: f64) -> CostParameters {
    CostParameters {
        overnight_capital_cost: capital,
        fixed_om_cost: fixed_om,
        variable_om_cost: 0.0,
        fuel_price: 0.0,
        heat_rate: 0.0,
        leveling_factor: 1.0,
        ptc_rate: ptc,
        discount_rate: 0.05,
        lifetime_years: 20,
        is_renewable: true,
        is_fuel_powered: false,
    }
}

fn genset_cost(capital: f64, fixed_om: f64, variable_om: f64, fuel_price: f64) -> CostParameters {
    CostParameters {
        overnight_capital_cost: capital,
        fixed_om_cost: fixed_om,
        variable_om_cost: variable_om,
        fuel_price,
        // MMBtu of fuel per kWh of fuel energy
        heat_rate: 0.003_412,
        leveling_factor: 1.2,
        ptc_rate: 0.0,
        discount_rate: 0.05,
        lifetime_years: 20,
        is_renewable: false,
        is_fuel_powered: true,
    }
}

impl Default for CostCatalog {
    fn default() -> Self {
        Self {
            pv: renewable_cost(1300.0, 20.0, 0.015),
            wt: renewable_cost(1600.0, 40.0, 0.023),
            biomass: genset_cost(2500.0, 110.0, 0.005, 2.5),
            natural_gas: genset_cost(1000.0, 15.0, 0.007, 3.5),
            bess: BessCostParameters {
                power_capital_cost: 300.0,
                energy_capital_cost: 400.0,
                fixed_om_cost: 10.0,
                discount_rate: 0.05,
                lifetime_years: 20,
            },
            genset_efficiency: 0.35,
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 2017,
            interval_hours: 1.0,
            load: LoadSection::default(),
            renewables: vec![
                RenewableSection {
                    technology: RenewableTechnology::Pv,
                    rated_kw: 3000.0,
                    latitude_deg: default_latitude(),
                    winter_boost: default_winter_boost(),
                    variability: Variability::BetaCloud {
                        alpha: 6.0,
                        beta: 1.5,
                    },
                    series: None,
                },
                RenewableSection {
                    technology: RenewableTechnology::Wt,
                    rated_kw: 1000.0,
                    latitude_deg: default_latitude(),
                    winter_boost: default_winter_boost(),
                    variability: Variability::WeibullWind {
                        shape: 2.0,
                        scale: 7.0,
                        cut_in: 3.0,
                        rated_speed: 12.0,
                        cut_out: 25.0,
                    },
                    series: None,
                },
            ],
            planner: PlannerSection::default(),
            bess: BessParameters::default(),
            costs: CostCatalog::default(),
            pso: PsoConfig::default(),
            reliability: ReliabilitySettings::default(),
            forced_outage: ForcedOutageRates::default(),
            prm_search: PrmSearch::default(),
            lcoe: LcoeSection::default(),
            reliability_curve: CurveSection::default(),
            qfd: QfdMatrix::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::from_toml_str(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    /// Makes relative series paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.load.series);
        for r in &mut self.renewables {
            fix(&mut r.series);
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config("(echo)", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.interval_hours > 0.0) {
            return Err(Error::config("interval_hours", "must be positive"));
        }
        if !(self.load.peak_kw > 0.0) {
            return Err(Error::config("load.peak_kw", "must be positive"));
        }
        if !(0.0..=0.5).contains(&self.load.noise_std_fraction) {
            return Err(Error::config(
                "load.noise_std_fraction",
                "must lie in [0, 0.5]",
            ));
        }
        for (i, r) in self.renewables.iter().enumerate() {
            if !(r.rated_kw >= 0.0 && r.rated_kw.is_finite()) {
                return Err(Error::config(
                    format!("renewables[{i}].rated_kw"),
                    "must be finite and >= 0",
                ));
            }
            if !(-90.0..=90.0).contains(&r.latitude_deg) {
                return Err(Error::config(
                    format!("renewables[{i}].latitude_deg"),
                    "must lie in [-90, 90]",
                ));
            }
            if !(0.0..=1.0).contains(&r.winter_boost) {
                return Err(Error::config(
                    format!("renewables[{i}].winter_boost"),
                    "must lie in [0, 1]",
                ));
            }
        }
        let fractions = &self.planner.sweep_fractions;
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f))
            || fractions.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::config(
                "planner.sweep_fractions",
                "must be strictly ascending values in [0, 1]",
            ));
        }
        if self.lcoe.cf_grid.is_empty() || !(self.lcoe.rated_kw > 0.0) {
            return Err(Error::config(
                "lcoe",
                "cf_grid must be non-empty and rated_kw positive",
            ));
        }
        if self
            .reliability_curve
            .plg_grid
            .iter()
            .any(|p| !(*p > 0.0 && *p <= 1.0))
        {
            return Err(Error::config(
                "reliability_curve.plg_grid",
                "values must lie in (0, 1]",
            ));
        }
        if self.reliability_curve.prm_grid.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::config(
                "reliability_curve.prm_grid",
                "values must be >= 0",
            ));
        }
        self.planner_config()?.validate()
    }

    fn series(path: &Path, interval_hours: f64, field: &str) -> Result<TimeSeries> {
        let s = TimeSeries::load_csv(path)?;
        if (s.interval_hours() - interval_hours).abs() > 1e-9 {
            return Err(Error::config(
                field,
                format!(
                    "series interval {} h differs from interval_hours",
                    s.interval_hours()
                ),
            ));
        }
        Ok(s)
    }

    /// Planner inputs: fixed series when the load is given as a file,
    /// otherwise seeded models over one year.
    pub fn planner_inputs(&self) -> Result<PlannerInputs> {
        let t = self.interval_hours;
        if let Some(path) = &self.load.series {
            let load = Self::series(path, t, "load.series")?;
            let renewables =
                self.renewables
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        let field = format!("renewables[{i}].series");
                        let path = r.series.as_ref().ok_or_else(|| {
                            Error::config(&field, "required when load.series is set")
                        })?;
                        Ok(RenewableSeries {
                            technology: r.technology,
                            rated_power: r.rated_kw,
                            series: Self::series(path, t, &field)?,
                        })
                    })
                    .collect::<Result<_>>()?;
            return Ok(PlannerInputs::Series { load, renewables });
        }
        let load = LoadModel::new(
            community_load_shape(&self.load.shape, t)?,
            self.load.peak_kw,
            self.load.noise_std_fraction,
            self.seed,
        )?;
        let renewables = self
            .renewables
            .iter()
            .map(|r| {
                let shape = match r.technology {
                    RenewableTechnology::Pv => pv_clear_sky_shape(r.latitude_deg, t)?,
                    RenewableTechnology::Wt => wind_seasonal_shape(r.winter_boost, t)?,
                };
                RenewableModel::new(r.technology, r.rated_kw, shape, r.variability, self.seed)
            })
            .collect::<Result<_>>()?;
        let horizon = load.base_profile().len();
        Ok(PlannerInputs::Models {
            load,
            renewables,
            horizon,
        })
    }

    pub fn planner_config(&self) -> Result<PlannerConfig> {
        Ok(PlannerConfig {
            inputs: self.planner_inputs()?,
            counted_renewable_fraction: self.planner.counted_renewable_fraction,
            biomass_kw: self.planner.biomass_kw,
            lole_threshold: self.planner.lole_threshold,
            largest_genset_step: self.planner.largest_genset_step,
            bess_params: self.bess,
            costs: self.costs.clone(),
            pso: self.pso.clone(),
            reliability: self.reliability,
            forced_outage: self.forced_outage,
            prm_search: self.prm_search,
            include_renewables_in_plg: self.planner.include_renewables_in_plg,
            unit_rounding_kw: self.planner.unit_rounding_kw,
            seed: self.seed,
        })
    }
}
