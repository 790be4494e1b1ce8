//! Differential evolution over a box.
//!
//! Strategy `rand/1/bin`: for every member `i` pick distinct `r1, r2, r3 ≠ i`,
//! form the mutant `x[r1] + F·(x[r2] − x[r3])` clipped to the bounds, cross it
//! over with `x[i]` coordinate-wise (probability `CR`, one coordinate always
//! taken from the mutant), and keep the trial if it is no worse. `F` is drawn
//! uniformly from the mutation range once per generation.
//!
//! Trials of a generation are all built from the same population and
//! selection is applied in member order, so a run is a pure function of the
//! seed, the config and the objective.
//!
//! ```
//! use sensemble::de::{de_minimize, DEConfig};
//!
//! let config = DEConfig::with_bounds(vec![[-5.0, 5.0]; 2]);
//! let result = de_minimize(|x| x.iter().map(|v| v * v).sum(), &config).unwrap();
//! assert!(result.best_f < 1e-6);
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DEConfig {
    /// `[lo, hi]` per dimension.
    pub bounds: Vec<[f64; 2]>,
    pub max_iterations: usize,
    pub relative_tolerance: f64,
    /// Population size is this times the dimension (at least 4).
    pub population_multiplier: usize,
    /// `F` is drawn uniformly from `[lo, hi)` every generation.
    pub mutation: [f64; 2],
    pub crossover: f64,
    pub seed: u64,
    /// Points copied verbatim into the first members of the initial
    /// population.
    pub seed_points: Vec<Vec<f64>>,
}

impl Default for DEConfig {
    fn default() -> Self {
        Self {
            bounds: vec![[0.0, 1.0]; 3],
            max_iterations: 10_000,
            relative_tolerance: 1e-7,
            population_multiplier: 15,
            mutation: [0.5, 1.0],
            crossover: 0.7,
            seed: 0,
            seed_points: Vec::new(),
        }
    }
}

impl DEConfig {
    pub fn with_bounds(bounds: Vec<[f64; 2]>) -> Self {
        Self { bounds, ..Default::default() }
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn population_size(&self) -> usize {
        (self.population_multiplier * self.dimension()).max(4)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidInput(format!("DE config: {msg}")));
        if self.bounds.is_empty() {
            return fail("no dimensions".into());
        }
        for (i, [lo, hi]) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return fail(format!("bounds[{i}] = [{lo}, {hi}]"));
            }
        }
        let [f_lo, f_hi] = self.mutation;
        if !(0.0 < f_lo && f_lo <= f_hi && f_hi < 2.0) {
            return fail(format!("mutation range [{f_lo}, {f_hi}] not inside (0, 2)"));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return fail(format!("crossover {} not in [0, 1]", self.crossover));
        }
        if self.population_multiplier == 0 {
            return fail("population multiplier must be >= 1".into());
        }
        if self.max_iterations == 0 {
            return fail("max iterations must be >= 1".into());
        }
        if self.relative_tolerance.is_nan() || self.relative_tolerance < 0.0 {
            return fail(format!("relative tolerance {}", self.relative_tolerance));
        }
        if self.seed_points.len() > self.population_size() {
            return fail(format!(
                "{} seed points for a population of {}",
                self.seed_points.len(),
                self.population_size()
            ));
        }
        for point in &self.seed_points {
            if point.len() != self.dimension() {
                return fail(format!("seed point {point:?} has wrong dimension"));
            }
            let inside = point.iter().zip(&self.bounds).all(|(v, [lo, hi])| lo <= v && v <= hi);
            if !inside {
                return fail(format!("seed point {point:?} outside bounds"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DEResult {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    /// Generations run after the initial population.
    pub iterations_used: usize,
    pub converged: bool,
    /// Best objective value of generation 0, 1, 2, ...
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

/// `stddev ≤ tol · |mean|` over the population's objective values
/// (population standard deviation).
pub fn check_convergence(population_f: &[f64], tol: f64) -> bool {
    if population_f.is_empty() {
        return false;
    }
    let n = population_f.len() as f64;
    let mean = population_f.iter().sum::<f64>() / n;
    let var = population_f.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() <= tol * mean.abs()
}

fn evaluate<F: FnMut(&[f64]) -> f64>(objective: &mut F, x: &[f64]) -> Result<f64> {
    let value = objective(x);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { point: x.to_vec(), value })
    }
}

fn distinct_others(rng: &mut ChaCha8Rng, n: usize, i: usize) -> [usize; 3] {
    let mut picked = [usize::MAX; 3];
    let mut k = 0;
    while k < 3 {
        let r = rng.gen_range(0..n);
        if r != i && !picked[..k].contains(&r) {
            picked[k] = r;
            k += 1;
        }
    }
    picked
}

fn best_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Minimises `objective` over the box in `config`.
pub fn de_minimize<F>(mut objective: F, config: &DEConfig) -> Result<DEResult>
where
    F: FnMut(&[f64]) -> f64,
{
    config.validate()?;
    let dim = config.dimension();
    let n = config.population_size();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut population: Vec<Vec<f64>> =
        (0..n).map(|_| config.bounds.iter().map(|&[lo, hi]| lo + rng.gen::<f64>() * (hi - lo)).collect()).collect();
    for (member, point) in population.iter_mut().zip(&config.seed_points) {
        member.clone_from(point);
    }
    let mut fitness = population.iter().map(|x| evaluate(&mut objective, x)).collect::<Result<Vec<_>>>()?;
    let mut evaluations = n;
    let mut best = best_index(&fitness);
    let mut trace = vec![fitness[best]];
    let mut converged = false;
    let mut iterations_used = 0;

    let [f_lo, f_hi] = config.mutation;
    let mut trial = vec![0.0; dim];
    let mut trials = Vec::with_capacity(n);
    for generation in 1..=config.max_iterations {
        let scale = if f_lo < f_hi { rng.gen_range(f_lo..f_hi) } else { f_lo };
        trials.clear();
        for i in 0..n {
            let [r1, r2, r3] = distinct_others(&mut rng, n, i);
            let forced = rng.gen_range(0..dim);
            for j in 0..dim {
                let take_mutant = j == forced || rng.gen::<f64>() < config.crossover;
                trial[j] = if take_mutant {
                    let [lo, hi] = config.bounds[j];
                    let v = population[r1][j] + scale * (population[r2][j] - population[r3][j]);
                    v.clamp(lo, hi)
                } else {
                    population[i][j]
                };
            }
            trials.push(trial.clone());
        }
        for (i, candidate) in trials.drain(..).enumerate() {
            let f = evaluate(&mut objective, &candidate)?;
            evaluations += 1;
            if f <= fitness[i] {
                population[i] = candidate;
                fitness[i] = f;
            }
        }
        best = best_index(&fitness);
        trace.push(fitness[best]);
        iterations_used = generation;
        if check_convergence(&fitness, config.relative_tolerance) {
            converged = true;
            break;
        }
    }

    Ok(DEResult {
        best_x: population[best].clone(),
        best_f: fitness[best],
        iterations_used,
        converged,
        trace,
        evaluations,
    })
}

/// Writes `generation,best_f` rows.
pub fn write_de_trace(path: impl AsRef<Path>, result: &DEResult) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("generation,best_f\n");
    for (g, f) in result.trace.iter().enumerate() {
        out.push_str(&format!("{g},{f:e}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
