//! Annualized technology costs, levelized cost of energy and QFD screening.
//!
//! All money is in a single currency unit. Power is in kW, energy in kWh and
//! the sample interval of every profile is in hours, so `P·T` is kWh.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{TimeSeries, HOURS_PER_YEAR};

/// Economic inputs for one generation technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParameters {
    /// Currency per kW installed.
    pub overnight_capital_cost: f64,
    /// Currency per kW-year.
    pub fixed_om_cost: f64,
    /// Currency per kWh generated.
    pub variable_om_cost: f64,
    /// Currency per fuel unit.
    #[serde(default)]
    pub fuel_price: f64,
    /// Fuel units per kWh.
    #[serde(default)]
    pub heat_rate: f64,
    /// Multiplier for expected future fuel price drift.
    #[serde(default = "one")]
    pub leveling_factor: f64,
    /// Production tax credit, currency per kWh.
    #[serde(default)]
    pub ptc_rate: f64,
    pub discount_rate: f64,
    pub lifetime_years: u32,
    #[serde(default)]
    pub is_renewable: bool,
    #[serde(default)]
    pub is_fuel_powered: bool,
}

fn one() -> f64 {
    1.0
}

impl CostParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.discount_rate > 0.0) {
            return Err(Error::domain(format!(
                "discount rate must be positive, got {}",
                self.discount_rate
            )));
        }
        if self.lifetime_years < 1 {
            return Err(Error::domain("lifetime must be at least one year"));
        }
        let costs = [
            ("overnight_capital_cost", self.overnight_capital_cost),
            ("fixed_om_cost", self.fixed_om_cost),
            ("variable_om_cost", self.variable_om_cost),
            ("fuel_price", self.fuel_price),
            ("heat_rate", self.heat_rate),
            ("leveling_factor", self.leveling_factor),
            ("ptc_rate", self.ptc_rate),
        ];
        if let Some((name, v)) = costs.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain(format!(
                "{name} must be finite and >= 0, got {v}"
            )));
        }
        if self.is_renewable && self.is_fuel_powered {
            return Err(Error::domain(
                "a technology cannot be both renewable and fuel-powered",
            ));
        }
        Ok(())
    }

    /// Every money-denominated input multiplied by `c`.
    pub fn scale_costs(&self, c: f64) -> Self {
        Self {
            overnight_capital_cost: self.overnight_capital_cost * c,
            fixed_om_cost: self.fixed_om_cost * c,
            variable_om_cost: self.variable_om_cost * c,
            fuel_price: self.fuel_price * c,
            ptc_rate: self.ptc_rate * c,
            ..self.clone()
        }
    }
}

/// Battery storage is priced on both its power and energy ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BessCostParameters {
    /// Currency per kW of converter/power rating.
    pub power_capital_cost: f64,
    /// Currency per kWh of storage.
    pub energy_capital_cost: f64,
    /// Currency per kW-year.
    pub fixed_om_cost: f64,
    pub discount_rate: f64,
    pub lifetime_years: u32,
}

impl BessCostParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.discount_rate > 0.0) || self.lifetime_years < 1 {
            return Err(Error::domain(
                "BESS discount rate must be > 0 and lifetime >= 1",
            ));
        }
        for v in [
            self.power_capital_cost,
            self.energy_capital_cost,
            self.fixed_om_cost,
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain("BESS costs must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Yearly cost of one technology. `total` is always
/// `capital + om + fuel - tax_credit`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnualizedCost {
    pub capital: f64,
    pub om: f64,
    pub fuel: f64,
    pub tax_credit: f64,
    pub total: f64,
}

impl AnnualizedCost {
    pub fn new(capital: f64, om: f64, fuel: f64, tax_credit: f64) -> Self {
        Self {
            capital,
            om,
            fuel,
            tax_credit,
            total: capital + om + fuel - tax_credit,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }
}

/// Conversion efficiency used for the fuel term.
#[derive(Debug, Clone, Copy)]
pub enum Efficiency<'a> {
    Constant(f64),
    PerSample(&'a [f64]),
}

/// `r(1+r)^y / ((1+r)^y - 1)`, the level payment retiring a unit loan.
pub fn capital_recovery_factor(discount_rate: f64, lifetime_years: u32) -> Result<f64> {
    if !(discount_rate > 0.0 && discount_rate.is_finite()) {
        return Err(Error::domain(format!(
            "capital recovery factor is undefined for discount rate {discount_rate}"
        )));
    }
    if lifetime_years < 1 {
        return Err(Error::domain("capital recovery factor needs lifetime >= 1"));
    }
    let growth = (1.0 + discount_rate).powi(lifetime_years as i32);
    Ok(discount_rate * growth / (growth - 1.0))
}

/// Annualized capital, O&M, fuel and tax credit of a technology rated at
/// `rated_power` that produced `energy_profile` over one representative year.
pub fn annualize_costs(
    params: &CostParameters,
    rated_power: f64,
    energy_profile: &TimeSeries,
    efficiency: Efficiency<'_>,
) -> Result<AnnualizedCost> {
    params.validate()?;
    if !(rated_power >= 0.0 && rated_power.is_finite()) {
        return Err(Error::domain(format!(
            "rated power must be >= 0, got {rated_power}"
        )));
    }
    energy_profile.ensure_nonnegative()?;
    let t = energy_profile.interval_hours();

    let crf = capital_recovery_factor(params.discount_rate, params.lifetime_years)?;
    let capital = params.overnight_capital_cost * rated_power * crf;
    let energy = energy_profile.energy_kwh();
    let om = params.fixed_om_cost * rated_power + params.variable_om_cost * energy;

    let fuel = if params.is_fuel_powered {
        let input_energy = match efficiency {
            Efficiency::Constant(eta) => {
                check_efficiency(eta, 0)?;
                energy / eta
            }
            Efficiency::PerSample(etas) => {
                if etas.len() != energy_profile.len() {
                    return Err(Error::LengthMismatch {
                        what: "efficiency profile",
                        left: energy_profile.len(),
                        right: etas.len(),
                    });
                }
                let mut acc = 0.0;
                for (i, (&p, &eta)) in energy_profile.samples().iter().zip(etas).enumerate() {
                    check_efficiency(eta, i)?;
                    acc += p * t / eta;
                }
                acc
            }
        };
        params.fuel_price * input_energy * params.heat_rate * params.leveling_factor
    } else {
        0.0
    };

    let tax_credit = if params.is_renewable {
        params.ptc_rate * energy
    } else {
        0.0
    };

    Ok(AnnualizedCost::new(capital, om, fuel, tax_credit))
}

fn check_efficiency(eta: f64, index: usize) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "efficiency must lie in (0, 1], got {eta} at index {index}"
        )))
    }
}

/// Storage carries no fuel and no tax credit.
pub fn annualize_bess(
    params: &BessCostParameters,
    power_kw: f64,
    energy_kwh: f64,
) -> Result<AnnualizedCost> {
    params.validate()?;
    if !(power_kw >= 0.0 && energy_kwh >= 0.0) {
        return Err(Error::domain("BESS ratings must be >= 0"));
    }
    let crf = capital_recovery_factor(params.discount_rate, params.lifetime_years)?;
    let capital =
        (params.power_capital_cost * power_kw + params.energy_capital_cost * energy_kwh) * crf;
    Ok(AnnualizedCost::new(
        capital,
        params.fixed_om_cost * power_kw,
        0.0,
        0.0,
    ))
}

/// Realized capacity factor of a profile against its rating, per year.
pub fn realized_capacity_factor(rated_power: f64, profile: &TimeSeries) -> Result<f64> {
    if !(rated_power > 0.0) {
        return Err(Error::domain("rated power must be positive"));
    }
    let years = profile.duration_hours() / HOURS_PER_YEAR;
    Ok(profile.energy_kwh() / (rated_power * HOURS_PER_YEAR * years))
}

/// Annualized total cost divided by annual energy output.
pub fn lcoe(rated_power: f64, capacity_factor: f64, annualized: &AnnualizedCost) -> Result<f64> {
    if !(rated_power > 0.0) {
        return Err(Error::domain("rated power must be positive"));
    }
    if !(capacity_factor > 0.0 && capacity_factor <= 1.0) {
        return Err(Error::domain(format!(
            "capacity factor must lie in (0, 1], got {capacity_factor}"
        )));
    }
    Ok(annualized.total / (rated_power * HOURS_PER_YEAR * capacity_factor))
}

/// LCOE over a capacity-factor grid. Each point runs the unit flat at
/// `cf · rated_power` for a year, so the energy-linear costs track the
/// output and the capacity-linear costs stay fixed.
pub fn lcoe_vs_cf_curve(
    params: &CostParameters,
    rated_power: f64,
    efficiency: f64,
    cf_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if cf_grid.is_empty() {
        return Err(Error::Empty("capacity factor grid"));
    }
    if cf_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(
            "capacity factor grid must be strictly ascending",
        ));
    }
    cf_grid
        .iter()
        .map(|&cf| {
            if !(cf > 0.0 && cf <= 1.0) {
                return Err(Error::domain(format!(
                    "capacity factor {cf} outside (0, 1]"
                )));
            }
            let year = TimeSeries::constant(cf * rated_power, HOURS_PER_YEAR as usize, 1.0)?;
            let annual =
                annualize_costs(params, rated_power, &year, Efficiency::Constant(efficiency))?;
            Ok((cf, lcoe(rated_power, cf, &annual)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfdCriterion {
    pub name: String,
    pub importance: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfdTechnology {
    pub name: String,
    pub scores: Vec<i32>,
}

/// Importance-weighted scoring of candidate technologies against customer
/// requirements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfdMatrix {
    pub criteria: Vec<QfdCriterion>,
    pub technologies: Vec<QfdTechnology>,
}

impl QfdMatrix {
    pub fn validate(&self) -> Result<()> {
        if self.criteria.is_empty() {
            return Err(Error::MalformedMatrix("no criteria".into()));
        }
        if let Some(c) = self
            .criteria
            .iter()
            .find(|c| !(1..=5).contains(&c.importance))
        {
            return Err(Error::MalformedMatrix(format!(
                "importance of `{}` is {}, expected 1..=5",
                c.name, c.importance
            )));
        }
        if let Some(t) = self
            .technologies
            .iter()
            .find(|t| t.scores.len() != self.criteria.len())
        {
            return Err(Error::MalformedMatrix(format!(
                "`{}` has {} scores for {} criteria",
                t.name,
                t.scores.len(),
                self.criteria.len()
            )));
        }
        Ok(())
    }
}

impl Default for QfdMatrix {
    fn default() -> Self {
        let criteria = [
            ("LCOE", 5),
            ("CO2 Emission Reduction", 5),
            ("Fuel Consumption Savings", 4),
            ("Outage Time Reduction", 5),
            ("Dispatchability", 4),
            ("Equipment Lifetime", 3),
            ("Comply with the U.S. DOE Target", 5),
        ];
        let technologies: [(&str, [i32; 7]); 6] = [
            ("PV Panel", [9, 3, 9, -3, -1, 3, 9]),
            ("Wind Turbine", [9, 3, 9, -3, -1, 3, 9]),
            ("Biomass Genset", [3, 9, 9, 1, 1, 1, 9]),
            ("Natural Gas Genset", [3, 9, 3, 3, 3, 1, 1]),
            ("Natural Gas Combustion Turbine", [1, 1, 1, 3, 3, 1, 1]),
            ("Coal-Fired Power Plant (Base-line)", [1, 0, 0, 3, 1, 3, 0]),
        ];
        Self {
            criteria: criteria
                .iter()
                .map(|&(name, importance)| QfdCriterion {
                    name: name.into(),
                    importance,
                })
                .collect(),
            technologies: technologies
                .iter()
                .map(|(name, scores)| QfdTechnology {
                    name: (*name).into(),
                    scores: scores.to_vec(),
                })
                .collect(),
        }
    }
}

/// Absolute target per technology: Σ importance · score.
pub fn qfd_score(matrix: &QfdMatrix) -> Result<Vec<(String, i64)>> {
    matrix.validate()?;
    Ok(matrix
        .technologies
        .iter()
        .map(|t| {
            let target = matrix
                .criteria
                .iter()
                .zip(&t.scores)
                .map(|(c, &s)| i64::from(c.importance) * i64::from(s))
                .sum();
            (t.name.clone(), target)
        })
        .collect())
}
