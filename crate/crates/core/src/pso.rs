//! Global-best particle swarm optimizer over a bounded box.
//!
//! Velocity update: `v ← w·v + c1·r1·(pbest − x) + c2·r2·(gbest − x)`,
//! clamped per dimension to `velocity_clamp · (hi − lo)`. Positions that
//! leave the box are reflected back in and the offending velocity component
//! flips sign. All random numbers of an iteration are drawn before the
//! objective is evaluated, so results do not depend on how evaluations are
//! scheduled across threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub inertia_weight: f64,
    pub cognitive_coeff: f64,
    pub social_coeff: f64,
    /// Maximum speed as a fraction of each dimension's range.
    pub velocity_clamp: f64,
    /// Relative change of the best objective regarded as no progress.
    pub stagnation_tolerance: f64,
    /// Iterations without progress before stopping.
    pub stagnation_patience: usize,
    pub rng_seed: u64,
    /// `[lo, hi]` per dimension.
    pub bounds: Vec<(f64, f64)>,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 30,
            max_iterations: 100,
            inertia_weight: 0.729,
            cognitive_coeff: 1.494_45,
            social_coeff: 1.494_45,
            velocity_clamp: 0.2,
            stagnation_tolerance: 1e-9,
            stagnation_patience: 20,
            rng_seed: 0,
            bounds: Vec::new(),
        }
    }
}

impl PsoConfig {
    pub fn with_bounds(bounds: Vec<(f64, f64)>) -> Self {
        Self {
            bounds,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::config("pso.swarm_size", "must be at least 2"));
        }
        if self.max_iterations < 1 {
            return Err(Error::config("pso.max_iterations", "must be at least 1"));
        }
        if self.bounds.is_empty() {
            return Err(Error::config("pso.bounds", "need at least one dimension"));
        }
        if let Some((lo, hi)) = self
            .bounds
            .iter()
            .find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
        {
            return Err(Error::config(
                "pso.bounds",
                format!("[{lo}, {hi}] is not a proper interval"),
            ));
        }
        for (name, v) in [
            ("pso.inertia_weight", self.inertia_weight),
            ("pso.cognitive_coeff", self.cognitive_coeff),
            ("pso.social_coeff", self.social_coeff),
            ("pso.stagnation_tolerance", self.stagnation_tolerance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be finite and >= 0"));
            }
        }
        if !(self.velocity_clamp > 0.0) {
            return Err(Error::config("pso.velocity_clamp", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoResult {
    pub best_position: Vec<f64>,
    pub best_objective: f64,
    pub iterations_run: usize,
    /// Best objective after initialization and after each iteration.
    pub convergence_trace: Vec<f64>,
}

impl PsoResult {
    /// `iteration,best_objective`.
    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["iteration", "best_objective"])?;
        for (i, v) in self.convergence_trace.iter().enumerate() {
            wtr.write_record([i.to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn reflect(x: f64, v: f64, lo: f64, hi: f64) -> (f64, f64) {
    if x < lo {
        ((lo + (lo - x)).min(hi), -v)
    } else if x > hi {
        ((hi - (x - hi)).max(lo), -v)
    } else {
        (x, v)
    }
}

/// Minimizes `objective` over `config.bounds`.
pub fn optimize<F>(objective: F, config: &PsoConfig) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let dim = config.bounds.len();
    let n = config.swarm_size;
    let vmax: Vec<f64> = config
        .bounds
        .iter()
        .map(|(lo, hi)| config.velocity_clamp * (hi - lo))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let mut positions: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            config
                .bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..=hi))
                .collect()
        })
        .collect();
    let mut velocities: Vec<Vec<f64>> = (0..n)
        .map(|_| vmax.iter().map(|&m| rng.random_range(-m..=m)).collect())
        .collect();

    let evaluate =
        |xs: &[Vec<f64>]| -> Vec<f64> { xs.par_iter().map(|x| sanitize(objective(x))).collect() };

    let mut values = evaluate(&positions);
    let mut pbest = positions.clone();
    let mut pbest_val = values.clone();
    let mut g = argmin(&pbest_val);
    let mut gbest = pbest[g].clone();
    let mut gbest_val = pbest_val[g];
    let mut trace = vec![gbest_val];
    let mut stalled = 0;

    for _ in 1..config.max_iterations {
        let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
            .map(|_| {
                let r1 = (0..dim).map(|_| rng.random::<f64>()).collect();
                let r2 = (0..dim).map(|_| rng.random::<f64>()).collect();
                (r1, r2)
            })
            .collect();

        for i in 0..n {
            let (r1, r2) = &draws[i];
            for d in 0..dim {
                let x = positions[i][d];
                let mut v = config.inertia_weight * velocities[i][d]
                    + config.cognitive_coeff * r1[d] * (pbest[i][d] - x)
                    + config.social_coeff * r2[d] * (gbest[d] - x);
                v = v.clamp(-vmax[d], vmax[d]);
                let (lo, hi) = config.bounds[d];
                let (nx, nv) = reflect(x + v, v, lo, hi);
                positions[i][d] = nx;
                velocities[i][d] = nv;
            }
        }

        values = evaluate(&positions);
        for i in 0..n {
            if values[i] < pbest_val[i] {
                pbest_val[i] = values[i];
                pbest[i].clone_from(&positions[i]);
            }
        }
        let prev = gbest_val;
        g = argmin(&pbest_val);
        if pbest_val[g] < gbest_val {
            gbest_val = pbest_val[g];
            gbest.clone_from(&pbest[g]);
        }
        trace.push(gbest_val);

        let scale = prev.abs().max(f64::MIN_POSITIVE);
        let improved = prev.is_infinite() && gbest_val.is_finite()
            || (prev - gbest_val) > config.stagnation_tolerance * scale;
        stalled = if improved { 0 } else { stalled + 1 };
        if stalled >= config.stagnation_patience.max(1) {
            break;
        }
    }

    Ok(PsoResult {
        best_position: gbest,
        best_objective: gbest_val,
        iterations_run: trace.len(),
        convergence_trace: trace,
    })
}

fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v < values[best] { i } else { best })
}
