//! Low-temperature single-flip Metropolis sampling of the classical
//! low-lying spectrum.

use std::hash::Hasher;

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{dedup_tolerance, flip_energy};
use crate::error::{Error, Result};
use crate::graph::{euclidean_afm, recursive_ground_state, CouplingGraph, SpinConfiguration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    Random,
    Afm,
    Recursive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcPlan {
    /// Inverse temperature in units of `1/|J|`.
    pub beta: f64,
    pub sweeps: usize,
    pub chains: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub init: InitialState,
}

impl McmcPlan {
    /// `beta = 20`, `2000 n` sweeps, 32 chains, 10% burn-in.
    pub fn default_for(n: usize) -> Self {
        let sweeps = 2000 * n.max(1);
        Self { beta: 20.0, sweeps, chains: 32, burn_in: sweeps / 10, seed: 0, init: InitialState::Random }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidInput(format!("beta must be positive, got {}", self.beta)));
        }
        if self.sweeps == 0 || self.chains == 0 {
            return Err(Error::InvalidInput("sweeps and chains must be positive".into()));
        }
        if self.burn_in >= self.sweeps {
            return Err(Error::InvalidInput(format!(
                "burn_in {} must be below sweeps {}",
                self.burn_in, self.sweeps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub e0: f64,
    /// `+inf` when no second level was observed.
    pub e1: f64,
    pub gap: f64,
    /// Chains whose lowest energy reached `e0`.
    pub e0_hits: usize,
    pub distinct_levels_seen: usize,
    pub converged: bool,
}

/// Seed of chain `index`, independent of the total chain count.
pub fn chain_seed(seed: u64, index: u64) -> u64 {
    let mut h = FnvHasher::default();
    h.write(&seed.to_le_bytes());
    h.write(&index.to_le_bytes());
    h.finish()
}

/// One sequential Metropolis pass over all sites.
pub fn metropolis_sweep<R: Rng>(
    state: &SpinConfiguration,
    g: &CouplingGraph,
    beta: f64,
    rng: &mut R,
) -> Result<SpinConfiguration> {
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    if state.n_sites() != g.n_sites() {
        return Err(Error::SizeMismatch { expected: g.n_sites(), got: state.n_sites() });
    }
    let mut next = state.clone();
    for k in 0..g.n_sites() {
        let de = flip_energy(&next, g, k);
        if accept(de, beta, rng) {
            next.flip(k);
        }
    }
    Ok(next)
}

#[inline]
fn accept<R: Rng>(de: f64, beta: f64, rng: &mut R) -> bool {
    de <= 0.0 || rng.random::<f64>() < (-beta * de).exp()
}

/// Lowest distinct energies seen, grouped within a tolerance.
#[derive(Debug, Clone)]
struct LowLevels {
    cap: usize,
    tol: f64,
    levels: Vec<f64>,
}

impl LowLevels {
    fn new(cap: usize, tol: f64) -> Self {
        Self { cap, tol, levels: Vec::with_capacity(cap + 1) }
    }

    #[inline]
    fn insert(&mut self, e: f64) {
        if self.levels.len() == self.cap && e > self.levels[self.cap - 1] + self.tol {
            return;
        }
        let pos = self.levels.partition_point(|&x| x < e - self.tol);
        if pos < self.levels.len() && (self.levels[pos] - e).abs() <= self.tol {
            if e < self.levels[pos] {
                self.levels[pos] = e;
            }
            return;
        }
        self.levels.insert(pos, e);
        self.levels.truncate(self.cap);
    }
}

const TRACKED_LEVELS: usize = 16;

/// Result of one chain.
#[derive(Debug, Clone)]
pub struct ChainTrace {
    /// Exact energy after every sweep, burn-in included.
    pub sweep_energies: Vec<f64>,
    /// Lowest distinct post-burn-in energies, ascending.
    pub low_levels: Vec<f64>,
    pub final_state: SpinConfiguration,
}

fn initial_state(g: &CouplingGraph, init: InitialState, rng: &mut ChaCha8Rng) -> Result<SpinConfiguration> {
    let n = g.n_sites();
    Ok(match init {
        InitialState::Random => {
            let up: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
            SpinConfiguration::from_spins(&up)
        }
        InitialState::Afm => euclidean_afm(n),
        InitialState::Recursive => recursive_ground_state(n)?,
    })
}

/// Runs chain `index` of `plan`. Post-burn-in, both the visited energies and
/// the energy of every attempted flip are recorded, so the first excited
/// level is seen even when the chain rarely leaves the ground manifold.
pub fn run_chain(g: &CouplingGraph, plan: &McmcPlan, index: u64) -> Result<ChainTrace> {
    plan.validate()?;
    let n = g.n_sites();
    let mut rng = ChaCha8Rng::seed_from_u64(chain_seed(plan.seed, index));
    let start = initial_state(g, plan.init, &mut rng)?;

    // flat adjacency for the inner loop
    let mut offsets = Vec::with_capacity(n + 1);
    let mut nbr = Vec::new();
    let mut cpl = Vec::new();
    offsets.push(0);
    for i in 0..n {
        for &(j, c) in g.neighbors(i) {
            nbr.push(j);
            cpl.push(c);
        }
        offsets.push(nbr.len());
    }
    let mut spin: Vec<f64> = (0..n).map(|i| start.spin(i)).collect();
    let exact = |spin: &[f64]| -> f64 {
        g.edges().iter().map(|e| e.coupling * spin[e.i] * spin[e.j]).sum()
    };

    let mut energy = exact(&spin);
    let mut levels = LowLevels::new(TRACKED_LEVELS, dedup_tolerance(energy));
    let mut sweep_energies = Vec::with_capacity(plan.sweeps);
    for sweep in 0..plan.sweeps {
        let record = sweep >= plan.burn_in;
        for k in 0..n {
            let mut field = 0.0;
            for idx in offsets[k]..offsets[k + 1] {
                field += cpl[idx] * spin[nbr[idx]];
            }
            let de = -2.0 * spin[k] * field;
            if record {
                levels.insert(energy + de);
            }
            if accept(de, plan.beta, &mut rng) {
                spin[k] = -spin[k];
                energy += de;
            }
        }
        energy = exact(&spin);
        if record {
            levels.tol = dedup_tolerance(levels.levels.first().copied().unwrap_or(energy));
            levels.insert(energy);
        }
        sweep_energies.push(energy);
    }
    let up: Vec<bool> = spin.iter().map(|&x| x > 0.0).collect();
    Ok(ChainTrace { sweep_energies, low_levels: levels.levels, final_state: SpinConfiguration::from_spins(&up) })
}

/// Ground energy and gap from `plan.chains` independent chains.
pub fn estimate_low_spectrum(g: &CouplingGraph, plan: &McmcPlan) -> Result<GapEstimate> {
    plan.validate()?;
    let traces: Vec<Vec<f64>> = (0..plan.chains as u64)
        .into_par_iter()
        .map(|c| run_chain(g, plan, c).map(|t| t.low_levels))
        .collect::<Result<_>>()?;
    Ok(merge_levels(&traces))
}

fn merge_levels(traces: &[Vec<f64>]) -> GapEstimate {
    let e0 = traces.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let tol = dedup_tolerance(e0);
    let mut all = LowLevels::new(TRACKED_LEVELS, tol);
    for t in traces {
        for &e in t {
            all.insert(e);
        }
    }
    let e0_hits = traces.iter().filter(|t| t.first().is_some_and(|&e| e - e0 <= tol)).count();
    let e1 = all.levels.iter().copied().find(|&e| e - e0 > tol).unwrap_or(f64::INFINITY);
    let converged = e0_hits >= 2 && e1.is_finite();
    GapEstimate {
        e0,
        e1,
        gap: e1 - e0,
        e0_hits,
        distinct_levels_seen: all.levels.len(),
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{classical_energy, enumerate_spectrum, SpectrumOptions};
    use crate::graph::{build_pwr2_couplings, build_ring_couplings, SignConvention};

    fn nn_chain(n: usize) -> CouplingGraph {
        build_ring_couplings(n, &[1], 0.0, 1.0, SignConvention::AfmFavoring).unwrap()
    }

    #[test]
    fn neel_is_frozen_at_huge_beta() {
        let g = nn_chain(8);
        let neel = euclidean_afm(8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(metropolis_sweep(&neel, &g, 1e6, &mut rng).unwrap(), neel);
    }

    #[test]
    fn uphill_acceptance_is_half_at_ln2() {
        let beta = 3.0;
        let de = std::f64::consts::LN_2 / beta;
        assert!(((-beta * de).exp() - 0.5).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let trials = 200_000;
        let hits = (0..trials).filter(|_| accept(de, beta, &mut rng)).count();
        assert!((hits as f64 / trials as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn incremental_delta_matches_recomputation() {
        let g = build_pwr2_couplings(32, -0.7, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let up: Vec<bool> = (0..32).map(|_| rng.random()).collect();
        let mut c = SpinConfiguration::from_spins(&up);
        for _ in 0..1000 {
            let k = rng.random_range(0..32);
            let before = classical_energy(&c, &g).unwrap();
            let de = flip_energy(&c, &g, k);
            c.flip(k);
            let after = classical_energy(&c, &g).unwrap();
            assert!((after - before - de).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_seeds_do_not_depend_on_chain_count() {
        let g = build_pwr2_couplings(8, -1.0, 1.0).unwrap();
        let mut small = McmcPlan::default_for(8).with_seed(5);
        small.sweeps = 50;
        small.burn_in = 5;
        let a = run_chain(&g, &small, 3).unwrap();
        small.chains = 99;
        let b = run_chain(&g, &small, 3).unwrap();
        assert_eq!(a.sweep_energies, b.sweep_energies);
        assert_ne!(chain_seed(5, 0), chain_seed(5, 1));
    }

    #[test]
    fn estimate_is_deterministic() {
        let g = build_pwr2_couplings(16, -0.3, 1.0).unwrap();
        let mut plan = McmcPlan::default_for(16).with_seed(11);
        plan.sweeps = 400;
        plan.burn_in = 40;
        plan.chains = 6;
        let a = estimate_low_spectrum(&g, &plan).unwrap();
        let b = estimate_low_spectrum(&g, &plan).unwrap();
        assert_eq!(a.e0.to_bits(), b.e0.to_bits());
        assert_eq!(a.e1.to_bits(), b.e1.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn finds_ground_energy_and_bounds_gap() {
        for (s, gap) in [(-4.0, None), (0.0, Some(0.5))] {
            let g = build_pwr2_couplings(16, s, 1.0).unwrap();
            let exact = enumerate_spectrum(&g, SpectrumOptions::default()).unwrap();
            let plan = McmcPlan::default_for(16).with_seed(2);
            let est = estimate_low_spectrum(&g, &plan).unwrap();
            assert!((est.e0 - exact.ground_energy()).abs() < 1e-9, "s={s}");
            assert!(est.converged);
            // every recorded level is a real energy, so the gap can only be overestimated
            assert!(est.gap >= exact.gap().unwrap() - 1e-9, "s={s}");
            if let Some(gap) = gap {
                assert!((est.gap - gap).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn energies_do_not_rise_at_large_beta() {
        let g = build_pwr2_couplings(32, -3.0, 1.0).unwrap();
        let median = |xs: &[f64]| {
            let mut v = xs.to_vec();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let (mut first, mut last) = (0.0, 0.0);
        for seed in 0..30u64 {
            let mut plan = McmcPlan::default_for(32).with_seed(seed);
            plan.sweeps = 200;
            plan.burn_in = 0;
            let e = run_chain(&g, &plan, 0).unwrap().sweep_energies;
            let tenth = e.len() / 10;
            first += median(&e[..tenth]);
            last += median(&e[e.len() - tenth..]);
        }
        assert!(last <= first, "{first} {last}");
    }

    #[test]
    fn no_second_level_gives_sentinel() {
        let est = merge_levels(&[vec![-1.0], vec![-1.0]]);
        assert!(!est.converged);
        assert_eq!(est.e1, f64::INFINITY);
        assert_eq!(est.e0_hits, 2);
    }

    #[test]
    fn rejects_bad_plans() {
        let mut plan = McmcPlan::default_for(8);
        plan.burn_in = plan.sweeps;
        assert!(plan.validate().is_err());
        plan = McmcPlan::default_for(8);
        plan.beta = 0.0;
        assert!(plan.validate().is_err());
    }
}
