//! Capacity planning of gensets and battery storage.
//!
//! The planning-year net load is split spectrally at a cutoff chosen by PSO.
//! The low band sizes the gensets and the high band the battery. The reserve
//! margin of each candidate is the smallest grid value for which the actual
//! fleet meets the LOLE threshold in Monte Carlo. An outer loop steps the
//! largest natural-gas unit down from `peak − biomass` to the biomass rating.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::cost::{
    annualize_bess, annualize_costs, AnnualizedCost, BessCostParameters, CostParameters, Efficiency,
};
use crate::error::{Error, Result};
use crate::pso::{optimize, PsoConfig};
use crate::reliability::{
    search_grid, BessSupport, DispatchableUnit, GensetTechnology, NetLoadSource, PrmOutcome,
    PrmSearch, ReliabilitySettings, ScenarioBank,
};
use crate::series::TimeSeries;
use crate::sizing::{
    allocate_ng_units, bess_dc_power, round_up_to_grid, size_bess_energy, size_bess_power,
    BessParameters, FleetDesign,
};
use crate::spectral::Splitter;
use crate::stochastic::{
    derive_seed, net_load, LoadModel, NetLoadModel, RenewableModel, RenewableTechnology,
};

const PLANNING_STREAM: u64 = 0x91A4;
const MONTE_CARLO_STREAM: u64 = 0x3C;
const PSO_STREAM: u64 = 0x950;
const INFEASIBLE_OFFSET: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostCatalog {
    pub pv: CostParameters,
    pub wt: CostParameters,
    pub biomass: CostParameters,
    pub natural_gas: CostParameters,
    pub bess: BessCostParameters,
    /// Conversion efficiency applied to genset fuel use.
    pub genset_efficiency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcedOutageRates {
    pub genset: f64,
    pub bess: f64,
}

impl Default for ForcedOutageRates {
    fn default() -> Self {
        Self {
            genset: 0.05,
            bess: 0.02,
        }
    }
}

/// A renewable profile supplied directly rather than drawn from a model.
#[derive(Debug, Clone)]
pub struct RenewableSeries {
    pub technology: RenewableTechnology,
    pub rated_power: f64,
    pub series: TimeSeries,
}

#[derive(Debug, Clone)]
pub enum PlannerInputs {
    /// Seeded models. The planning year is one draw; Monte Carlo trials use
    /// fresh draws.
    Models {
        load: LoadModel,
        renewables: Vec<RenewableModel>,
        horizon: usize,
    },
    /// Fixed profiles, used both for sizing and for every Monte Carlo trial.
    Series {
        load: TimeSeries,
        renewables: Vec<RenewableSeries>,
    },
}

#[derive(Debug, Clone)]
pub struct PlannerConfig {
    pub inputs: PlannerInputs,
    pub counted_renewable_fraction: f64,
    pub biomass_kw: f64,
    /// Days per year.
    pub lole_threshold: f64,
    pub largest_genset_step: f64,
    pub bess_params: BessParameters,
    pub costs: CostCatalog,
    /// Bounds are set by the planner.
    pub pso: PsoConfig,
    pub reliability: ReliabilitySettings,
    pub forced_outage: ForcedOutageRates,
    pub prm_search: PrmSearch,
    /// Count PV and wind ratings in the PLG denominator.
    pub include_renewables_in_plg: bool,
    /// Genset total is rounded up to a multiple of this; 0 disables.
    pub unit_rounding_kw: f64,
    /// Master seed. The planning draw, Monte Carlo trials and PSO rounds use
    /// streams derived from it.
    pub seed: u64,
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lole_threshold > 0.0) {
            return Err(Error::config("planner.lole_threshold", "must be positive"));
        }
        if !(self.largest_genset_step > 0.0) {
            return Err(Error::config(
                "planner.largest_genset_step",
                "must be positive",
            ));
        }
        if !(self.unit_rounding_kw >= 0.0 && self.unit_rounding_kw.is_finite()) {
            return Err(Error::config(
                "planner.unit_rounding_kw",
                "must be finite and >= 0",
            ));
        }
        if !(self.biomass_kw >= 0.0 && self.biomass_kw.is_finite()) {
            return Err(Error::config(
                "planner.biomass_kw",
                "must be finite and >= 0",
            ));
        }
        if !(0.0..=1.0).contains(&self.counted_renewable_fraction) {
            return Err(Error::config(
                "planner.counted_renewable_fraction",
                "must lie in [0, 1]",
            ));
        }
        if !(self.costs.genset_efficiency > 0.0 && self.costs.genset_efficiency <= 1.0) {
            return Err(Error::config(
                "costs.genset_efficiency",
                "must lie in (0, 1]",
            ));
        }
        for (field, rate) in [
            ("forced_outage.genset", self.forced_outage.genset),
            ("forced_outage.bess", self.forced_outage.bess),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::config(field, "must lie in [0, 1)"));
            }
        }
        for (field, p) in [
            ("costs.pv", &self.costs.pv),
            ("costs.wt", &self.costs.wt),
            ("costs.biomass", &self.costs.biomass),
            ("costs.natural_gas", &self.costs.natural_gas),
        ] {
            p.validate()
                .map_err(|e| Error::config(field, e.to_string()))?;
        }
        self.costs
            .bess
            .validate()
            .map_err(|e| Error::config("costs.bess", e.to_string()))?;
        self.bess_params.validate()?;
        PsoConfig {
            bounds: vec![(0.0, 1.0)],
            ..self.pso.clone()
        }
        .validate()?;
        self.reliability.validate()?;
        self.prm_search.validate()?;
        Ok(())
    }

    pub fn with_fraction(&self, fraction: f64) -> Self {
        Self {
            counted_renewable_fraction: fraction,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub pv: AnnualizedCost,
    pub wt: AnnualizedCost,
    pub biomass: AnnualizedCost,
    pub natural_gas: AnnualizedCost,
    pub bess: AnnualizedCost,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.pv.total
            + self.wt.total
            + self.biomass.total
            + self.natural_gas.total
            + self.bess.total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingSolution {
    pub fleet: FleetDesign,
    pub total_annualized_cost: f64,
    pub cost_breakdown: CostBreakdown,
    pub achieved_lole: f64,
    pub lole_half_width: f64,
    pub achieved_saifi: f64,
    pub saifi_half_width: f64,
    pub prm_used: f64,
    pub plg: f64,
    pub cutoff_frequency: f64,
    pub cutoff_bin: usize,
    pub supply_adequate: bool,
    pub feasible: bool,
    /// Sum of relative constraint violations; zero when feasible.
    pub violation: f64,
}

/// One evaluated (cutoff bin, largest unit) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub round: usize,
    pub largest_ng_kw: f64,
    pub cutoff_bin: usize,
    pub cutoff_frequency: f64,
    pub total_annualized_cost: f64,
    pub genset_total_kw: f64,
    pub bess_power_kw: f64,
    pub bess_energy_kwh: f64,
    pub prm_used: f64,
    pub plg: f64,
    pub lole: f64,
    pub lole_half_width: f64,
    pub feasible: bool,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub largest_ng_kw: f64,
    pub pso_iterations: usize,
    pub convergence_trace: Vec<f64>,
    pub best: CandidateRecord,
    /// Every distinct bin evaluated this round, ascending.
    pub candidates: Vec<CandidateRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub solution: SizingSolution,
    pub rounds: Vec<RoundRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupplyAdequacy {
    pub adequate: bool,
    pub first_violation: Option<usize>,
}

/// Genset plus battery capacity against every sample of `net_load`.
pub fn check_supply_adequacy(fleet: &FleetDesign, net_load: &TimeSeries) -> SupplyAdequacy {
    let capacity = fleet.dispatchable_capacity_kw();
    let first_violation = net_load.samples().iter().position(|&p| p > capacity);
    SupplyAdequacy {
        adequate: first_violation.is_none(),
        first_violation,
    }
}

/// Everything that depends only on the planning year, built once per plan.
#[derive(Debug)]
pub struct Planner {
    config: PlannerConfig,
    load: TimeSeries,
    renewables: Vec<RenewableSeries>,
    net: TimeSeries,
    splitter: Splitter,
    bank: Arc<ScenarioBank>,
    /// Energy left for gensets once renewables are used in full.
    genset_demand: Vec<f64>,
    pv_cost: AnnualizedCost,
    wt_cost: AnnualizedCost,
    pv_kw: f64,
    wt_kw: f64,
    /// Dispatchable capacity needed with no spectral split, per largest unit.
    reference: Mutex<HashMap<u64, f64>>,
    split_sizing: Mutex<HashMap<usize, SplitSizing>>,
}

/// Constraint and cost evaluation of a fleet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assessment {
    pub breakdown: CostBreakdown,
    pub total: f64,
    pub lole: f64,
    pub lole_half_width: f64,
    pub plg: f64,
    pub supply_adequate: bool,
    pub feasible: bool,
    pub violation: f64,
}

impl Assessment {
    fn objective(&self) -> f64 {
        if self.feasible {
            self.total
        } else {
            INFEASIBLE_OFFSET * (1.0 + self.violation) + self.total
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitSizing {
    genset_peak: f64,
    bess_power: f64,
    bess_energy: f64,
}

#[derive(Debug, Clone)]
struct Candidate {
    fleet: FleetDesign,
    prm: f64,
    bin: usize,
    assessment: Assessment,
}

impl Planner {
    pub fn new(config: PlannerConfig) -> Result<Self> {
        config.validate()?;
        let planning_seed = derive_seed(config.seed, PLANNING_STREAM, 0);
        let mut settings = config.reliability;
        settings.rng_seed = derive_seed(config.seed, MONTE_CARLO_STREAM, 0);

        let (load, renewables, source_model) = match &config.inputs {
            PlannerInputs::Models {
                load,
                renewables,
                horizon,
            } => {
                let model = NetLoadModel {
                    load: load.clone(),
                    renewables: renewables.clone(),
                    counted_fraction: config.counted_renewable_fraction,
                    horizon: *horizon,
                };
                let draw = model.draw(planning_seed)?;
                let res = renewables
                    .iter()
                    .zip(draw.renewables)
                    .map(|(m, series)| RenewableSeries {
                        technology: m.technology,
                        rated_power: m.rated_power,
                        series,
                    })
                    .collect();
                (draw.load, res, Some(model))
            }
            PlannerInputs::Series { load, renewables } => (load.clone(), renewables.clone(), None),
        };
        if load.len() < 2 {
            return Err(Error::domain("planning horizon needs at least two samples"));
        }
        let re_series: Vec<TimeSeries> = renewables.iter().map(|r| r.series.clone()).collect();
        let net = net_load(&load, &re_series, config.counted_renewable_fraction)?;
        let full_net = net_load(&load, &re_series, 1.0)?;
        let genset_demand = full_net.samples().iter().map(|&p| p.max(0.0)).collect();

        let source = match source_model {
            Some(model) => NetLoadSource::Stochastic(model),
            None => NetLoadSource::Fixed(net.clone()),
        };
        let bank = Arc::new(ScenarioBank::new(source, settings)?);
        let splitter = Splitter::new(&net)?;

        let mut pv_kw = 0.0;
        let mut wt_kw = 0.0;
        let mut pv_cost = AnnualizedCost::zero();
        let mut wt_cost = AnnualizedCost::zero();
        for r in &renewables {
            let (kw, cost, params) = match r.technology {
                RenewableTechnology::Pv => (&mut pv_kw, &mut pv_cost, &config.costs.pv),
                RenewableTechnology::Wt => (&mut wt_kw, &mut wt_cost, &config.costs.wt),
            };
            let c = annualize_costs(params, r.rated_power, &r.series, Efficiency::Constant(1.0))?;
            *kw += r.rated_power;
            *cost = AnnualizedCost::new(
                cost.capital + c.capital,
                cost.om + c.om,
                cost.fuel + c.fuel,
                cost.tax_credit + c.tax_credit,
            );
        }

        Ok(Self {
            config,
            load,
            renewables,
            net,
            splitter,
            bank,
            genset_demand,
            pv_cost,
            wt_cost,
            pv_kw,
            wt_kw,
            reference: Mutex::new(HashMap::new()),
            split_sizing: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn planning_load(&self) -> &TimeSeries {
        &self.load
    }

    pub fn planning_net_load(&self) -> &TimeSeries {
        &self.net
    }

    pub fn renewables(&self) -> &[RenewableSeries] {
        &self.renewables
    }

    pub fn splitter(&self) -> &Splitter {
        &self.splitter
    }

    pub fn bank(&self) -> &Arc<ScenarioBank> {
        &self.bank
    }

    /// Largest natural-gas ratings visited by the outer loop.
    pub fn largest_ng_schedule(&self) -> Vec<f64> {
        let biomass = self.config.biomass_kw;
        let step = self.config.largest_genset_step;
        let start = self.load.peak() - biomass;
        let tol = 1e-9 * start.abs().max(1.0);
        let mut out = Vec::new();
        let mut i = 0u32;
        loop {
            let l = start - f64::from(i) * step;
            if l < biomass - tol || l <= 0.0 {
                break;
            }
            out.push(l);
            i += 1;
        }
        if out.is_empty() {
            let fallback = if biomass > 0.0 {
                biomass
            } else {
                self.load.peak().max(1.0)
            };
            out.push(fallback);
        }
        out
    }

    fn units(&self, fleet: &FleetDesign) -> Result<Vec<DispatchableUnit>> {
        fleet
            .genset_units()
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let tech = if i == 0 && fleet.biomass_kw > 0.0 {
                    GensetTechnology::Biomass
                } else {
                    GensetTechnology::NaturalGas
                };
                DispatchableUnit::new(p, self.config.forced_outage.genset, tech)
            })
            .collect()
    }

    fn bess_support(&self, fleet: &FleetDesign) -> Option<BessSupport> {
        (fleet.bess_power_kw > 0.0)
            .then(|| BessSupport::firm(fleet.bess_power_kw, self.config.forced_outage.bess))
    }

    fn fleet_lole(&self, fleet: &FleetDesign) -> Result<(f64, f64)> {
        let units = self.units(fleet)?;
        self.bank.lole(&units, self.bess_support(fleet).as_ref())
    }

    fn design(
        &self,
        genset_peak: f64,
        prm: f64,
        largest_ng: f64,
        bess_power: f64,
        bess_energy: f64,
    ) -> Result<FleetDesign> {
        let biomass = self.config.biomass_kw;
        if !(prm >= 0.0) {
            return Err(Error::domain(format!(
                "reserve margin must be >= 0, got {prm}"
            )));
        }
        let total =
            round_up_to_grid(genset_peak * (1.0 + prm), self.config.unit_rounding_kw).max(biomass);
        Ok(FleetDesign {
            pv_kw: self.pv_kw,
            wt_kw: self.wt_kw,
            biomass_kw: biomass,
            ng_units: allocate_ng_units(total, biomass, largest_ng)?,
            genset_total_nominal_kw: total,
            bess_power_kw: bess_power,
            bess_energy_kwh: bess_energy,
        })
    }

    /// Costs of every technology for `fleet`. Genset energy comes from the
    /// planning-year dispatch with renewables used in full, biomass first.
    pub fn costs(&self, fleet: &FleetDesign) -> Result<CostBreakdown> {
        let t = self.load.interval_hours();
        let biomass_kw = fleet.biomass_kw;
        let ng_kw = fleet.ng_total_kw();
        let (bio, ng): (Vec<f64>, Vec<f64>) = self
            .genset_demand
            .iter()
            .map(|&d| {
                let b = d.min(biomass_kw);
                (b, (d - b).min(ng_kw))
            })
            .unzip();
        let eff = Efficiency::Constant(self.config.costs.genset_efficiency);
        let biomass = annualize_costs(
            &self.config.costs.biomass,
            biomass_kw,
            &TimeSeries::new(bio, t)?,
            eff,
        )?;
        let natural_gas = annualize_costs(
            &self.config.costs.natural_gas,
            ng_kw,
            &TimeSeries::new(ng, t)?,
            eff,
        )?;
        let bess = annualize_bess(
            &self.config.costs.bess,
            fleet.bess_power_kw,
            fleet.bess_energy_kwh,
        )?;
        Ok(CostBreakdown {
            pv: self.pv_cost,
            wt: self.wt_cost,
            biomass,
            natural_gas,
            bess,
        })
    }

    /// Costs and constraints of `fleet` sized with reserve margin `prm`.
    pub fn assess(&self, fleet: &FleetDesign, prm: f64) -> Result<Assessment> {
        self.assess_with(fleet, prm, None)
    }

    fn assess_with(
        &self,
        fleet: &FleetDesign,
        prm: f64,
        known_lole: Option<(f64, f64)>,
    ) -> Result<Assessment> {
        let breakdown = self.costs(fleet)?;
        let (lole, lole_hw) = match known_lole {
            Some(m) => m,
            None => self.fleet_lole(fleet)?,
        };
        let mut p_total = fleet.dispatchable_capacity_kw();
        if self.config.include_renewables_in_plg {
            p_total += fleet.pv_kw + fleet.wt_kw;
        }
        let plg = if p_total > 0.0 {
            fleet.largest_genset_kw() / p_total
        } else {
            1.0
        };
        let adequacy = check_supply_adequacy(fleet, &self.net);

        let thr = self.config.lole_threshold;
        let mut violation = ((lole + lole_hw - thr) / thr).max(0.0) + (plg - prm).max(0.0);
        if !adequacy.adequate {
            let shortfall = self.net.peak() - fleet.dispatchable_capacity_kw();
            violation += (shortfall / self.net.peak().abs().max(1.0)).max(f64::MIN_POSITIVE);
        }
        let feasible = lole + lole_hw <= thr && plg <= prm && adequacy.adequate;
        Ok(Assessment {
            breakdown,
            total: breakdown.total(),
            lole,
            lole_half_width: lole_hw,
            plg,
            supply_adequate: adequacy.adequate,
            feasible,
            violation: if feasible { 0.0 } else { violation },
        })
    }

    fn candidate(&self, bin: usize, largest_ng: f64) -> Result<Candidate> {
        if bin == self.splitter.max_bin() {
            return self.candidate_from(bin, largest_ng, |_, _| usize::MAX);
        }
        let start = self.search_start(largest_ng)?;
        self.candidate_from(bin, largest_ng, start)
    }

    /// Grid index where the margin search of a candidate begins: the margin
    /// that would reproduce the reference capacity.
    fn search_start(&self, largest_ng: f64) -> Result<impl Fn(f64, f64) -> usize + '_> {
        let key = largest_ng.to_bits();
        let cached = self.reference.lock().unwrap().get(&key).copied();
        let reference = match cached {
            Some(r) => r,
            None => {
                let c =
                    self.candidate_from(self.splitter.max_bin(), largest_ng, |_, _| usize::MAX)?;
                let r = c.fleet.dispatchable_capacity_kw();
                *self.reference.lock().unwrap().entry(key).or_insert(r)
            }
        };
        let search = self.config.prm_search;
        Ok(move |genset_peak: f64, bess_power: f64| {
            if !(genset_peak > 0.0) {
                return 0;
            }
            let prm = (reference - bess_power) / genset_peak - 1.0;
            (prm / search.step)
                .ceil()
                .clamp(0.0, (search.grid_len() - 1) as f64) as usize
        })
    }

    fn candidate_from(
        &self,
        bin: usize,
        largest_ng: f64,
        start: impl Fn(f64, f64) -> usize,
    ) -> Result<Candidate> {
        let SplitSizing {
            genset_peak,
            bess_power,
            bess_energy,
        } = self.split_sizing(bin)?;

        let k0 = start(genset_peak, bess_power);
        let outcome = search_grid(
            self.config.lole_threshold,
            &self.config.prm_search,
            k0,
            |prm| {
                self.fleet_lole(&self.design(
                    genset_peak,
                    prm,
                    largest_ng,
                    bess_power,
                    bess_energy,
                )?)
            },
        )?;
        let (prm, lole, hw) = match outcome {
            PrmOutcome::Found {
                prm,
                lole,
                lole_half_width,
            } => (prm, lole, lole_half_width),
            PrmOutcome::Unreachable {
                max_prm,
                lole,
                lole_half_width,
            } => (max_prm, lole, lole_half_width),
        };
        let fleet = self.design(genset_peak, prm, largest_ng, bess_power, bess_energy)?;
        let assessment = self.assess_with(&fleet, prm, Some((lole, hw)))?;
        Ok(Candidate {
            fleet,
            prm,
            bin,
            assessment,
        })
    }

    /// Genset peak and storage rating at one cutoff bin. These do not depend
    /// on the largest unit, so they are kept across rounds.
    fn split_sizing(&self, bin: usize) -> Result<SplitSizing> {
        if let Some(s) = self.split_sizing.lock().unwrap().get(&bin) {
            return Ok(*s);
        }
        let split = self.splitter.split_bin(bin)?;
        let dc = bess_dc_power(&split.bess_share_ac, self.bess_eta())?;
        let sizing = SplitSizing {
            genset_peak: split.genset_share.peak(),
            bess_power: size_bess_power(&dc),
            bess_energy: size_bess_energy(&dc, &self.config.bess_params)?,
        };
        self.split_sizing.lock().unwrap().insert(bin, sizing);
        Ok(sizing)
    }

    fn bess_eta(&self) -> f64 {
        self.config.bess_params.conversion_efficiency
    }

    fn solution(&self, c: &Candidate) -> Result<SizingSolution> {
        let units = self.units(&c.fleet)?;
        let metrics = self
            .bank
            .evaluate(&units, self.bess_support(&c.fleet).as_ref())?;
        let a = &c.assessment;
        Ok(SizingSolution {
            fleet: c.fleet.clone(),
            total_annualized_cost: a.total,
            cost_breakdown: a.breakdown,
            achieved_lole: a.lole,
            lole_half_width: a.lole_half_width,
            achieved_saifi: metrics.saifi_per_customer_year,
            saifi_half_width: metrics.saifi_half_width_95,
            prm_used: c.prm,
            plg: a.plg,
            cutoff_frequency: self.splitter.bin_to_cutoff(c.bin),
            cutoff_bin: c.bin,
            supply_adequate: a.supply_adequate,
            feasible: a.feasible,
            violation: a.violation,
        })
    }

    /// One pass of the sizing pipeline at a fixed cutoff and largest unit.
    pub fn evaluate_candidate(&self, cutoff: f64, largest_ng_kw: f64) -> Result<SizingSolution> {
        let bin = self.splitter.cutoff_to_bin(cutoff)?;
        self.solution(&self.candidate(bin, largest_ng_kw)?)
    }

    fn record(&self, round: usize, largest_ng: f64, c: &Candidate) -> CandidateRecord {
        CandidateRecord {
            round,
            largest_ng_kw: largest_ng,
            cutoff_bin: c.bin,
            cutoff_frequency: self.splitter.bin_to_cutoff(c.bin),
            total_annualized_cost: c.assessment.total,
            genset_total_kw: c.fleet.genset_total_nominal_kw,
            bess_power_kw: c.fleet.bess_power_kw,
            bess_energy_kwh: c.fleet.bess_energy_kwh,
            prm_used: c.prm,
            plg: c.assessment.plg,
            lole: c.assessment.lole,
            lole_half_width: c.assessment.lole_half_width,
            feasible: c.assessment.feasible,
            violation: c.assessment.violation,
        }
    }

    /// Runs every round and returns the cheapest feasible candidate, or the
    /// least-violating one flagged infeasible.
    pub fn run(&self) -> Result<PlanOutcome> {
        let nyquist = self.splitter.nyquist();
        let mut best: Option<Candidate> = None;
        let mut rounds = Vec::new();

        for (round, largest_ng) in self.largest_ng_schedule().into_iter().enumerate() {
            let cache: Mutex<HashMap<usize, Candidate>> = Mutex::new(HashMap::new());
            let failure: Mutex<Option<Error>> = Mutex::new(None);
            let objective = |x: &[f64]| -> f64 {
                let bin = match self.splitter.cutoff_to_bin(x[0].clamp(0.0, nyquist)) {
                    Ok(b) => b,
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        return f64::INFINITY;
                    }
                };
                if let Some(c) = cache.lock().unwrap().get(&bin) {
                    return c.assessment.objective();
                }
                match self.candidate(bin, largest_ng) {
                    Ok(c) => {
                        let v = c.assessment.objective();
                        cache.lock().unwrap().entry(bin).or_insert(c);
                        v
                    }
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        f64::INFINITY
                    }
                }
            };
            let pso = PsoConfig {
                rng_seed: derive_seed(self.config.seed, PSO_STREAM, round as u64),
                bounds: vec![(0.0, nyquist)],
                ..self.config.pso.clone()
            };
            let result = optimize(objective, &pso)?;
            if let Some(e) = failure.into_inner().unwrap() {
                return Err(e);
            }

            let mut evaluated: Vec<Candidate> = cache.into_inner().unwrap().into_values().collect();
            evaluated.sort_by_key(|c| c.bin);
            let round_best = evaluated
                .iter()
                .reduce(|a, b| if better(b, a) { b } else { a })
                .ok_or(Error::Empty("round candidates"))?
                .clone();
            rounds.push(RoundRecord {
                round,
                largest_ng_kw: largest_ng,
                pso_iterations: result.iterations_run,
                convergence_trace: result.convergence_trace,
                best: self.record(round, largest_ng, &round_best),
                candidates: evaluated
                    .iter()
                    .map(|c| self.record(round, largest_ng, c))
                    .collect(),
            });
            if best.as_ref().is_none_or(|b| better(&round_best, b)) {
                best = Some(round_best);
            }
        }

        let best = best.ok_or(Error::Empty("outer loop"))?;
        Ok(PlanOutcome {
            solution: self.solution(&best)?,
            rounds,
        })
    }
}

/// Feasible beats infeasible. Feasible candidates rank by cost, then genset
/// total, then battery energy; infeasible ones by violation first.
fn better(a: &Candidate, b: &Candidate) -> bool {
    if a.assessment.feasible != b.assessment.feasible {
        return a.assessment.feasible;
    }
    let key = |c: &Candidate| {
        let s = &c.assessment;
        let (g, e) = (c.fleet.genset_total_nominal_kw, c.fleet.bess_energy_kwh);
        if s.feasible {
            [s.total, g, e, 0.0]
        } else {
            [s.violation, s.total, g, e]
        }
    };
    key(a) < key(b)
}

/// Runs the full plan for `config`.
pub fn plan(config: PlannerConfig) -> Result<PlanOutcome> {
    Planner::new(config)?.run()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub solution: SizingSolution,
}

/// One plan per counted fraction, all sharing the master seed.
pub fn sensitivity_sweep(config: &PlannerConfig, fractions: &[f64]) -> Result<Vec<SweepRow>> {
    if fractions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("fractions must be strictly ascending"));
    }
    fractions
        .iter()
        .map(|&f| {
            Ok(SweepRow {
                fraction: f,
                solution: plan(config.with_fraction(f))?.solution,
            })
        })
        .collect()
}

/// `scenario,annualized_cost,genset_total_mw,bess_power_mw,bess_energy_mwh,largest_ng_mw`.
pub fn write_scenario_table<W: Write>(rows: &[(String, &SizingSolution)], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "scenario",
        "annualized_cost",
        "genset_total_mw",
        "bess_power_mw",
        "bess_energy_mwh",
        "largest_ng_mw",
    ])?;
    for (name, s) in rows {
        wtr.write_record([
            name.clone(),
            s.total_annualized_cost.to_string(),
            (s.fleet.genset_total_nominal_kw / 1000.0).to_string(),
            (s.fleet.bess_power_kw / 1000.0).to_string(),
            (s.fleet.bess_energy_kwh / 1000.0).to_string(),
            (s.fleet.largest_ng_kw() / 1000.0).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Scenario label used in sweep tables.
pub fn scenario_label(fraction: f64) -> String {
    format!("{:.0}% renewables", fraction * 100.0)
}
