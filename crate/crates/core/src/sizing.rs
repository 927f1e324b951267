//! Genset and battery ratings from a genset / battery split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BessParameters {
    /// Converter efficiency, identical for charging and discharging.
    pub conversion_efficiency: f64,
    pub soc_max: f64,
    pub soc_min: f64,
    /// Reference for the cumulative energy trace. Does not affect sizing.
    #[serde(default)]
    pub initial_energy_offset: f64,
}

impl BessParameters {
    pub fn validate(&self) -> Result<()> {
        let eta = self.conversion_efficiency;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::domain(format!(
                "conversion efficiency {eta} outside (0, 1]"
            )));
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return Err(Error::domain(format!(
                "state-of-charge window [{}, {}] is not within 0 <= min < max <= 1",
                self.soc_min, self.soc_max
            )));
        }
        Ok(())
    }
}

impl Default for BessParameters {
    fn default() -> Self {
        Self {
            conversion_efficiency: 0.95,
            soc_max: 0.9,
            soc_min: 0.2,
            initial_energy_offset: 0.0,
        }
    }
}

/// Installed capacities of every technology in the microgrid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetDesign {
    pub pv_kw: f64,
    pub wt_kw: f64,
    pub biomass_kw: f64,
    pub ng_units: Vec<f64>,
    pub genset_total_nominal_kw: f64,
    pub bess_power_kw: f64,
    pub bess_energy_kwh: f64,
}

impl FleetDesign {
    pub fn ng_total_kw(&self) -> f64 {
        self.ng_units.iter().sum()
    }

    pub fn largest_ng_kw(&self) -> f64 {
        self.ng_units.iter().copied().fold(0.0, f64::max)
    }

    /// Largest single dispatchable generator (biomass or natural gas).
    pub fn largest_genset_kw(&self) -> f64 {
        self.largest_ng_kw().max(self.biomass_kw)
    }

    /// Gensets plus battery power.
    pub fn dispatchable_capacity_kw(&self) -> f64 {
        self.genset_total_nominal_kw + self.bess_power_kw
    }

    /// Ratings of every genset, biomass first.
    pub fn genset_units(&self) -> Vec<f64> {
        let mut units = Vec::with_capacity(self.ng_units.len() + 1);
        if self.biomass_kw > 0.0 {
            units.push(self.biomass_kw);
        }
        units.extend(self.ng_units.iter().copied());
        units
    }
}

/// `max(share) · (1 + prm)`.
pub fn size_gensets(genset_share: &TimeSeries, prm: f64) -> Result<f64> {
    if !(prm >= 0.0) {
        return Err(Error::domain(format!(
            "reserve margin must be >= 0, got {prm}"
        )));
    }
    genset_share.ensure_nonnegative()?;
    Ok(genset_share.peak() * (1.0 + prm))
}

/// DC-side battery power: discharge is divided by the efficiency, charge
/// multiplied by it.
pub fn bess_dc_power(bess_ac: &TimeSeries, eta: f64) -> Result<TimeSeries> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!(
            "conversion efficiency {eta} outside (0, 1]"
        )));
    }
    bess_ac.map(|p| if p >= 0.0 { p / eta } else { p * eta })
}

pub fn size_bess_power(bess_dc: &TimeSeries) -> f64 {
    bess_dc.samples().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Running sum of DC energy, `E[i] = offset + Σ_{k<=i} P_dc[k]·T`.
pub fn cumulative_energy(bess_dc: &TimeSeries, offset: f64) -> Vec<f64> {
    let t = bess_dc.interval_hours();
    bess_dc
        .samples()
        .iter()
        .scan(offset, |e, &p| {
            *e += p * t;
            Some(*e)
        })
        .collect()
}

/// Energy swing of the cumulative trace divided by the usable SOC window.
pub fn size_bess_energy(bess_dc: &TimeSeries, params: &BessParameters) -> Result<f64> {
    params.validate()?;
    let trace = cumulative_energy(bess_dc, params.initial_energy_offset);
    let (lo, hi) = trace
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
            (lo.min(e), hi.max(e))
        });
    Ok((hi - lo) / (params.soc_max - params.soc_min))
}

/// Splits the natural-gas block `genset_total − biomass` into full units of
/// `largest_ng_kw` plus one remainder unit.
pub fn allocate_ng_units(
    genset_total: f64,
    biomass_kw: f64,
    largest_ng_kw: f64,
) -> Result<Vec<f64>> {
    if !(largest_ng_kw > 0.0) {
        return Err(Error::domain("largest natural-gas unit must be positive"));
    }
    if !(biomass_kw >= 0.0) {
        return Err(Error::domain("biomass capacity must be >= 0"));
    }
    let block = genset_total - biomass_kw;
    let tol = 1e-9 * genset_total.abs().max(1.0);
    if block < -tol {
        return Err(Error::domain(format!(
            "biomass capacity {biomass_kw} kW exceeds genset total {genset_total} kW"
        )));
    }
    if block <= tol {
        return Ok(Vec::new());
    }
    let full = (block / largest_ng_kw).floor() as usize;
    let mut units = vec![largest_ng_kw; full];
    let remainder = block - full as f64 * largest_ng_kw;
    if remainder > tol {
        units.push(remainder);
    }
    Ok(units)
}

/// Smallest multiple of `grid` that is >= `value`.
pub fn round_up_to_grid(value: f64, grid: f64) -> f64 {
    if grid > 0.0 {
        (value / grid - 1e-9).ceil() * grid
    } else {
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec(), 1.0).unwrap()
    }

    fn window(lo: f64, hi: f64) -> BessParameters {
        BessParameters {
            conversion_efficiency: 1.0,
            soc_max: hi,
            soc_min: lo,
            initial_energy_offset: 0.0,
        }
    }

    /// Independent swing oracle: explicit prefix sums recomputed from scratch
    /// for every index.
    fn brute_force_energy(dc: &[f64], t: f64, soc_window: f64) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..dc.len() {
            let mut e = 0.0;
            for &p in &dc[..=i] {
                e += p * t;
            }
            lo = lo.min(e);
            hi = hi.max(e);
        }
        (hi - lo) / soc_window
    }

    #[test]
    fn genset_examples() {
        let flat = TimeSeries::constant(1000.0, 24, 1.0).unwrap();
        assert_relative_eq!(size_gensets(&flat, 0.2).unwrap(), 1200.0);
        let s = ts(&[1.0, 5.0, 3.0]);
        assert_eq!(size_gensets(&s, 0.0).unwrap(), 5.0);
        assert!(size_gensets(&s, -0.1).is_err());
        assert!(size_gensets(&ts(&[-1.0, 2.0]), 0.1).is_err());
    }

    #[test]
    fn dc_conversion() {
        let ac = ts(&[100.0, -100.0, 0.0]);
        assert_eq!(bess_dc_power(&ac, 1.0).unwrap(), ac);
        let dc = bess_dc_power(&ac, 0.9).unwrap();
        assert_relative_eq!(dc.samples()[0], 111.111_111_111_111_1, epsilon = 1e-9);
        assert_relative_eq!(dc.samples()[1], -90.0, epsilon = 1e-12);
        assert!(bess_dc_power(&ac, 0.0).is_err());
        assert!(bess_dc_power(&ac, 1.1).is_err());
    }

    #[test]
    fn power_rating() {
        assert_eq!(
            size_bess_power(&TimeSeries::constant(0.0, 5, 1.0).unwrap()),
            0.0
        );
        assert_eq!(size_bess_power(&ts(&[50.0, -80.0])), 80.0);
        let tri: Vec<f64> = (0..40).map(|i| ((i % 10) as f64 - 5.0) * 13.0).collect();
        let scan = tri.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert_eq!(size_bess_power(&ts(&tri)), scan);
    }

    #[test]
    fn energy_examples() {
        let zero = TimeSeries::constant(0.0, 10, 1.0).unwrap();
        assert_eq!(size_bess_energy(&zero, &window(0.2, 0.8)).unwrap(), 0.0);
        let square = ts(&[100.0, 100.0, -100.0, -100.0]);
        let e = size_bess_energy(&square, &window(0.2, 0.8)).unwrap();
        assert_relative_eq!(e, 333.333_333_333_333, epsilon = 1e-6);
        assert!(size_bess_energy(&square, &window(0.5, 0.5)).is_err());
    }

    #[test]
    fn ng_allocation_examples() {
        let units = allocate_ng_units(3301.9, 500.0, 500.0).unwrap();
        assert_eq!(units.len(), 6);
        assert!(units[..5].iter().all(|&u| u == 500.0));
        assert_relative_eq!(units[5], 301.9, epsilon = 1e-9);
        assert!(allocate_ng_units(500.0, 500.0, 500.0).unwrap().is_empty());
        assert_eq!(allocate_ng_units(999.0, 500.0, 500.0).unwrap(), vec![499.0]);
        assert_eq!(
            allocate_ng_units(1200.0, 500.0, 1000.0).unwrap(),
            vec![700.0]
        );
        assert!(allocate_ng_units(400.0, 500.0, 500.0).is_err());
        assert!(allocate_ng_units(1000.0, 500.0, 0.0).is_err());
    }

    #[test]
    fn grid_rounding() {
        assert_eq!(round_up_to_grid(3301.9, 50.0), 3350.0);
        assert_eq!(round_up_to_grid(3300.0, 50.0), 3300.0);
        assert_eq!(round_up_to_grid(3301.9, 0.0), 3301.9);
    }

    proptest! {
        #[test]
        fn energy_matches_brute_force(dc in proptest::collection::vec(-500.0f64..500.0, 1..80), t in 0.25f64..2.0) {
            let s = TimeSeries::new(dc.clone(), t).unwrap();
            let p = BessParameters { conversion_efficiency: 0.9, soc_max: 0.9, soc_min: 0.1, initial_energy_offset: 0.0 };
            let got = size_bess_energy(&s, &p).unwrap();
            let want = brute_force_energy(&dc, t, 0.8);
            prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
        }

        #[test]
        fn energy_ignores_offset(dc in proptest::collection::vec(-500.0f64..500.0, 1..80), offset in -1e4f64..1e4) {
            let s = TimeSeries::new(dc, 1.0).unwrap();
            let base = BessParameters::default();
            let shifted = BessParameters { initial_energy_offset: offset, ..base };
            let a = size_bess_energy(&s, &base).unwrap();
            let b = size_bess_energy(&s, &shifted).unwrap();
            prop_assert!((a - b).abs() <= 1e-7 * a.max(1.0));
        }

        #[test]
        fn sizes_are_homogeneous(dc in proptest::collection::vec(-500.0f64..500.0, 1..80), c in 0.1f64..10.0) {
            let s = TimeSeries::new(dc, 1.0).unwrap();
            let scaled = s.scaled(c).unwrap();
            let p = BessParameters::default();
            prop_assert!((size_bess_power(&scaled) - c * size_bess_power(&s)).abs() <= 1e-9 * c * size_bess_power(&s).max(1.0));
            let (a, b) = (size_bess_energy(&scaled, &p).unwrap(), size_bess_energy(&s, &p).unwrap());
            prop_assert!((a - c * b).abs() <= 1e-9 * (c * b).max(1.0));
        }

        #[test]
        fn ng_units_partition_block(total in 500.0f64..10_000.0, biomass in 0.0f64..500.0, largest in 50.0f64..3000.0) {
            let units = allocate_ng_units(total, biomass, largest).unwrap();
            let sum: f64 = units.iter().sum();
            prop_assert!((sum - (total - biomass)).abs() <= 1e-9 * total);
            prop_assert!(units.iter().all(|&u| u > 0.0 && u <= largest));
        }

        #[test]
        fn efficiency_raises_discharge_rating(ac in proptest::collection::vec(-500.0f64..500.0, 1..50), eta in 0.5f64..0.99) {
            let s = TimeSeries::new(ac.clone(), 1.0).unwrap();
            let max_abs = ac.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let at_discharge = ac.iter().any(|&v| v >= 0.0 && v.abs() == max_abs);
            if at_discharge {
                prop_assert!(size_bess_power(&bess_dc_power(&s, eta).unwrap()) >= max_abs);
            }
        }
    }
}
