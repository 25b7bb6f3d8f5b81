//! Walk simulation, used as an independent check on the exact solvers.
//!
//! Trial `i` draws from `ChaCha8Rng` seeded with `seed` on stream `i`, so the
//! result does not depend on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{VertexId, VertexSet, WeightedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub estimate: f64,
    pub std_error: f64,
    pub trials: usize,
    pub seed: u64,
}

impl SimResult {
    /// `|estimate − exact| ≤ k · std_error`.
    pub fn agrees_with(&self, exact: f64, k: f64) -> bool {
        (self.estimate - exact).abs() <= k * self.std_error
    }
}

/// Alias tables for the step distribution out of the vertices of a set.
struct Stepper {
    targets: Vec<Vec<VertexId>>,
    tables: Vec<Option<WeightedAliasIndex<f64>>>,
}

impl Stepper {
    fn new(g: &WeightedGraph, a: &VertexSet) -> Result<Self> {
        let n = g.vertex_count();
        let mut targets = vec![Vec::new(); n];
        let mut tables: Vec<Option<WeightedAliasIndex<f64>>> = (0..n).map(|_| None).collect();
        for x in a.iter() {
            let (ys, ws): (Vec<VertexId>, Vec<f64>) = g.neighbors(x).unzip();
            tables[x] = Some(WeightedAliasIndex::new(ws).map_err(|e| Error::Solver(e.to_string()))?);
            targets[x] = ys;
        }
        Ok(Stepper { targets, tables })
    }

    fn step(&self, x: VertexId, rng: &mut ChaCha8Rng) -> VertexId {
        let table = self.tables[x].as_ref().expect("step from a prepared vertex");
        self.targets[x][table.sample(rng)]
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Sum in a fixed binary tree so the result is independent of thread count.
fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

fn summarize(samples: &[f64], seed: u64) -> SimResult {
    let n = samples.len() as f64;
    let mean = pairwise_sum(samples) / n;
    let dev: Vec<f64> = samples.iter().map(|s| (s - mean) * (s - mean)).collect();
    let var = if samples.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
    SimResult {
        estimate: mean,
        std_error: (var / n).sqrt(),
        trials: samples.len(),
        seed,
    }
}

/// Mean of the exit time `T_A` of the walk started at `x`.
pub fn simulate_exit(g: &WeightedGraph, a: &VertexSet, x: VertexId, trials: usize, seed: u64) -> Result<SimResult> {
    g.check_vertex(x)?;
    g.check_set(a)?;
    if !a.contains(x) {
        return Err(Error::SourceOutsideSet(x));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is needed".into()));
    }
    g.guard_set(a)?;
    let component = g
        .components(a)
        .into_iter()
        .find(|c| c.contains(x))
        .expect("x lies in some component");
    if g.boundary(&component).is_empty() {
        return Err(Error::AbsorbingSet);
    }
    let stepper = Stepper::new(g, &component)?;
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let mut v = x;
            let mut t = 0u64;
            while component.contains(v) {
                v = stepper.step(v, &mut rng);
                t += 1;
            }
            t as f64
        })
        .collect();
    Ok(summarize(&samples, seed))
}

/// Frequency of `T_{B(x,R)} < n`, with the binomial standard error.
pub fn simulate_tail(
    g: &WeightedGraph,
    x: VertexId,
    radius: usize,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<SimResult> {
    g.check_vertex(x)?;
    g.guard(x, radius)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is needed".into()));
    }
    let ball = g.ball(x, radius);
    let stepper = Stepper::new(g, &ball)?;
    let hits: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let mut v = x;
            for _ in 1..n {
                if !ball.contains(v) {
                    break;
                }
                v = stepper.step(v, &mut rng);
            }
            if ball.contains(v) {
                0.0
            } else {
                1.0
            }
        })
        .collect();
    let p = pairwise_sum(&hits) / trials as f64;
    Ok(SimResult {
        estimate: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::lattice_box;

    #[test]
    fn singleton_exits_in_one_step() {
        let g = lattice_box(1, 21).unwrap();
        let r = simulate_exit(&g, &VertexSet::singleton(10), 10, 100, 3).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn line_exit_time_and_determinism() {
        let g = lattice_box(1, 101).unwrap();
        let o = g.root().unwrap();
        let ball = g.ball(o, 10);
        let r = simulate_exit(&g, &ball, o, 10_000, 7).unwrap();
        assert!(r.agrees_with(100.0, 3.0), "{r:?}");
        assert_eq!(r, simulate_exit(&g, &ball, o, 10_000, 7).unwrap());
    }

    #[test]
    fn tail_edge_cases() {
        let g = lattice_box(1, 51).unwrap();
        let o = g.root().unwrap();
        assert_eq!(simulate_tail(&g, o, 5, 5, 500, 1).unwrap().estimate, 0.0);
        assert_eq!(simulate_tail(&g, o, 1, 2, 500, 1).unwrap().estimate, 1.0);
        // R = 2, n = 3: exit at step 2 needs two moves in one direction
        let r = simulate_tail(&g, o, 2, 3, 10_000, 11).unwrap();
        assert!(r.agrees_with(0.5, 3.0), "{r:?}");
    }

    #[test]
    fn pairwise_sum_is_exact_on_small_integers() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
    }
}
