//! Classical (zero-field) analysis: energies, exhaustive Gray-code
//! enumeration and the candidate-state gap formulas of the four phases.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    euclidean_afm, is_power_of_two, monna_afm, pwr2_distances,
    recursive_ground_state, CouplingGraph, SpinConfiguration,
};

/// Largest system handled by [`enumerate_spectrum`].
pub const MAX_ENUMERATION_SITES: usize = 28;
/// Largest system for which every level is kept.
pub const MAX_FULL_SPECTRUM_SITES: usize = 22;

/// Default grouping tolerance `1e-9 max(1, |E0|)`.
pub fn dedup_tolerance(e0: f64) -> f64 {
    1e-9 * e0.abs().max(1.0)
}

/// `sum over stored pairs of J_ij s_i s_j` with `s = ±1/2`.
pub fn classical_energy(c: &SpinConfiguration, g: &CouplingGraph) -> Result<f64> {
    if c.n_sites() != g.n_sites() {
        return Err(Error::SizeMismatch { expected: g.n_sites(), got: c.n_sites() });
    }
    Ok(g.edges().iter().map(|e| e.coupling * c.spin(e.i) * c.spin(e.j)).sum())
}

/// Energy change of flipping site `k`.
pub fn flip_energy(c: &SpinConfiguration, g: &CouplingGraph, k: usize) -> f64 {
    let field: f64 = g.neighbors(k).iter().map(|&(j, jk)| jk * c.spin(j)).sum();
    -2.0 * c.spin(k) * field
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub energy: f64,
    pub degeneracy: u64,
    /// Lowest-index configuration in the level.
    pub representative: u64,
}

/// Ascending classical levels with degeneracies.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub n_sites: usize,
    pub levels: Vec<Level>,
    pub dedup_tol: f64,
    /// Whether every configuration is accounted for (no truncation).
    pub complete: bool,
}

impl Spectrum {
    pub fn ground_energy(&self) -> f64 {
        self.levels[0].energy
    }

    pub fn ground_degeneracy(&self) -> u64 {
        self.levels[0].degeneracy
    }

    /// Gap to the first level outside the ground manifold.
    pub fn gap(&self) -> Option<f64> {
        self.levels.get(1).map(|l| l.energy - self.levels[0].energy)
    }

    pub fn representative(&self, level: usize) -> SpinConfiguration {
        SpinConfiguration::from_index(self.n_sites, self.levels[level].representative)
    }

    pub fn total_states(&self) -> u64 {
        self.levels.iter().map(|l| l.degeneracy).sum()
    }
}

/// Walks configurations `gray(start) .. gray(end)` with single-flip updates.
pub struct GrayWalker<'a> {
    g: &'a CouplingGraph,
    spins: Vec<f64>,
    fields: Vec<f64>,
    energy: f64,
    step: u64,
    end: u64,
    started: bool,
}

#[inline]
pub fn gray(t: u64) -> u64 {
    t ^ (t >> 1)
}

impl<'a> GrayWalker<'a> {
    pub fn new(g: &'a CouplingGraph, start: u64, end: u64) -> Self {
        let n = g.n_sites();
        let c = SpinConfiguration::from_index(n, gray(start));
        let spins: Vec<f64> = (0..n).map(|i| c.spin(i)).collect();
        let fields = (0..n)
            .map(|k| g.neighbors(k).iter().map(|&(j, jk)| jk * spins[j]).sum())
            .collect();
        let energy = classical_energy(&c, g).expect("sizes agree");
        Self { g, spins, fields, energy, step: start, end, started: false }
    }
}

impl Iterator for GrayWalker<'_> {
    /// `(configuration index, energy)`
    type Item = (u64, f64);

    #[inline]
    fn next(&mut self) -> Option<Self::Item> {
        if !self.started {
            self.started = true;
            return (self.step < self.end).then(|| (gray(self.step), self.energy));
        }
        self.step += 1;
        if self.step >= self.end {
            return None;
        }
        let k = self.step.trailing_zeros() as usize;
        let old = self.spins[k];
        self.energy += -2.0 * old * self.fields[k];
        self.spins[k] = -old;
        let delta = -2.0 * old;
        for &(j, jk) in self.g.neighbors(k) {
            self.fields[j] += jk * delta;
        }
        Some((gray(self.step), self.energy))
    }
}

/// Lowest `capacity` levels, grouped within `tol` of each level's first
/// energy.
#[derive(Debug, Clone)]
struct LevelSet {
    tol: f64,
    capacity: usize,
    levels: Vec<Level>,
}

impl LevelSet {
    fn new(tol: f64, capacity: usize) -> Self {
        Self { tol, capacity, levels: Vec::new() }
    }

    #[inline]
    fn insert(&mut self, energy: f64, degeneracy: u64, rep: u64) {
        if self.levels.len() == self.capacity {
            if let Some(top) = self.levels.last() {
                if energy > top.energy + self.tol {
                    return;
                }
            }
        }
        let pos = self.levels.partition_point(|l| l.energy < energy);
        for idx in [pos.wrapping_sub(1), pos] {
            if let Some(l) = self.levels.get_mut(idx) {
                if (l.energy - energy).abs() <= self.tol {
                    l.degeneracy += degeneracy;
                    l.representative = l.representative.min(rep);
                    return;
                }
            }
        }
        self.levels.insert(pos, Level { energy, degeneracy, representative: rep });
        if self.levels.len() > self.capacity {
            self.levels.pop();
        }
    }
}

/// Enumeration controls.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpectrumOptions {
    /// Keep only the lowest levels (required above [`MAX_FULL_SPECTRUM_SITES`]).
    pub max_levels: Option<usize>,
    /// Overrides [`dedup_tolerance`].
    pub dedup_tol: Option<f64>,
}

const CHUNKS: u64 = 64;

fn chunk_bounds(total: u64) -> Vec<(u64, u64)> {
    let chunks = CHUNKS.min(total);
    (0..chunks).map(|c| (c * total / chunks, (c + 1) * total / chunks)).collect()
}

fn min_energy(g: &CouplingGraph) -> f64 {
    let total = 1u64 << g.n_sites();
    chunk_bounds(total)
        .into_par_iter()
        .map(|(a, b)| GrayWalker::new(g, a, b).map(|(_, e)| e).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min)
}

/// Exhaustive spectrum via Gray-code single-flip energy updates.
pub fn enumerate_spectrum(g: &CouplingGraph, opts: SpectrumOptions) -> Result<Spectrum> {
    let n = g.n_sites();
    if n > MAX_ENUMERATION_SITES {
        return Err(Error::TooLarge { n, limit: MAX_ENUMERATION_SITES });
    }
    if opts.max_levels.is_none() && n > MAX_FULL_SPECTRUM_SITES {
        return Err(Error::TooLarge { n, limit: MAX_FULL_SPECTRUM_SITES });
    }
    let total = 1u64 << n;
    let tol = match opts.dedup_tol {
        Some(t) => t,
        None => dedup_tolerance(min_energy(g)),
    };
    let capacity = opts.max_levels.unwrap_or(usize::MAX).max(1);
    let partial: Vec<LevelSet> = chunk_bounds(total)
        .into_par_iter()
        .map(|(a, b)| {
            let mut set = LevelSet::new(tol, capacity);
            if opts.max_levels.is_some() {
                for (idx, e) in GrayWalker::new(g, a, b) {
                    set.insert(e, 1, idx);
                }
            } else {
                let mut all: Vec<(f64, u64)> = GrayWalker::new(g, a, b).map(|(i, e)| (e, i)).collect();
                all.sort_by(|x, y| x.0.total_cmp(&y.0));
                for (e, i) in all {
                    set.insert(e, 1, i);
                }
            }
            set
        })
        .collect();
    let mut merged = LevelSet::new(tol, capacity);
    for set in partial {
        for l in set.levels {
            merged.insert(l.energy, l.degeneracy, l.representative);
        }
    }
    let mut levels = merged.levels;
    for l in &mut levels {
        l.energy = classical_energy(&SpinConfiguration::from_index(n, l.representative), g)?;
    }
    Ok(Spectrum { n_sites: n, levels, dedup_tol: tol, complete: opts.max_levels.is_none() })
}


/// Classical phase labels, ordered by increasing `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    P1Afm,
    P2Gapless,
    P2Recursive,
    P3Collapsing,
    P4TreeAfm,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::P1Afm => "p1-afm",
            Phase::P2Gapless => "p2-gapless",
            Phase::P2Recursive => "p2-recursive",
            Phase::P3Collapsing => "p3-collapsing",
            Phase::P4TreeAfm => "p4-tree-afm",
        }
    }
}

/// Candidate configurations evaluated by [`analytic_gap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    EuclideanAfm,
    /// Euclidean AFM with one contiguous block flipped.
    TwoDomainWalls,
    /// `g(m)` repeated `n/m` times for `4 <= m < n`.
    TiledRecursive,
    Recursive,
    RecursiveSingleFlip,
    /// Recursive state with sites `i` and `i + n/2` flipped together.
    RecursivePairFlip,
    MonnaAfm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapPrediction {
    pub phase: Phase,
    /// Units of `j`.
    pub gap: f64,
    pub ground_energy: f64,
    pub ground_family: Family,
    pub ground_candidate: SpinConfiguration,
    pub excitation_family: Family,
}

/// Finite-size phase boundaries. `None` marks a boundary whose defining
/// energy difference has no bracketed root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBoundaries {
    /// Cheapest two-domain-wall state meets the AFM.
    pub s1: Option<f64>,
    /// Recursive state becomes the ground state with the single flip as its
    /// cheapest excitation.
    pub s2: Option<f64>,
    /// Pair flips undercut the single flip: `2 (2/n)^s = 1/2`.
    pub s3: f64,
    /// Monna-mapped AFM joins the ground manifold within the dedup tolerance.
    pub s4: Option<f64>,
}

/// PWR2 ring energies from integer spin correlations, without storing edges.
struct Pwr2Ring {
    n: usize,
    /// `(d, J_d)`
    bonds: Vec<(usize, f64)>,
}

impl Pwr2Ring {
    fn new(n: usize, s: f64, j: f64) -> Self {
        let bonds = pwr2_distances(n)
            .into_iter()
            .map(|d| {
                let base = if s > 0.0 { 2.0 * d as f64 / n as f64 } else { d as f64 };
                (d, j * base.powf(s))
            })
            .collect();
        Self { n, bonds }
    }

    /// Pairs stored for distance `d`.
    fn pair_weight(&self, d: usize) -> f64 {
        if 2 * d == self.n {
            0.5
        } else {
            1.0
        }
    }

    /// `sigma` holds `±1`; energy uses `S = sigma / 2`.
    fn energy(&self, sigma: &[i8]) -> f64 {
        let n = self.n;
        self.bonds
            .iter()
            .map(|&(d, jd)| {
                let corr: i64 = (0..n).map(|i| (sigma[i] * sigma[(i + d) % n]) as i64).sum();
                jd * self.pair_weight(d) * corr as f64 / 4.0
            })
            .sum()
    }

    /// Energy change of flipping each site.
    fn single_flips(&self, sigma: &[i8]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let field: f64 = self
                    .bonds
                    .iter()
                    .map(|&(d, jd)| {
                        let pair = if 2 * d == n {
                            sigma[(k + d) % n] as f64
                        } else {
                            (sigma[(k + d) % n] + sigma[(k + n - d) % n]) as f64
                        };
                        jd * pair / 2.0
                    })
                    .sum();
                -(sigma[k] as f64) * field
            })
            .collect()
    }

    fn far_coupling(&self) -> f64 {
        self.bonds.last().map(|b| b.1).unwrap_or(0.0)
    }

    /// Energy change of flipping `i` and `i + n/2` together.
    fn pair_flips(&self, sigma: &[i8]) -> Vec<f64> {
        let single = self.single_flips(sigma);
        let half = self.n / 2;
        let jfar = self.far_coupling();
        (0..half)
            .map(|i| single[i] + single[i + half] + jfar * (sigma[i] * sigma[i + half]) as f64)
            .collect()
    }

    /// Energy change of flipping the block `[0, len)` of the Euclidean AFM.
    fn afm_block_flip(&self, len: usize) -> f64 {
        let n = self.n;
        self.bonds
            .iter()
            .map(|&(d, jd)| {
                let crossing = if 2 * d == n {
                    len.min(n - len)
                } else {
                    let fwd = len.min(n - d) as i64 - len.saturating_sub(d) as i64;
                    let bwd = n.min(n - d + len) as i64 - len.max(n - d) as i64;
                    (fwd.max(0) + bwd.max(0)) as usize
                };
                // AFM bonds are aligned at even distance
                let before = if d % 2 == 0 { 0.25 } else { -0.25 };
                -2.0 * jd * before * crossing as f64
            })
            .sum()
    }
}

fn sigma_of(c: &SpinConfiguration) -> Vec<i8> {
    (0..c.n_sites()).map(|i| if c.is_up(i) { 1 } else { -1 }).collect()
}

/// `g(m)` repeated to fill `n` sites.
pub fn tiled_recursive_state(n: usize, period: usize) -> Result<SpinConfiguration> {
    if !is_power_of_two(period) || period < 2 || n % period != 0 {
        return Err(Error::InvalidSize { n: period, reason: "period must be a power of two dividing n" });
    }
    let mut c = SpinConfiguration::all_down(n);
    for i in 0..n {
        c.set(i, (i % period).count_ones() % 2 == 0);
    }
    Ok(c)
}

struct Candidate {
    family: Family,
    energy: f64,
    config: Option<SpinConfiguration>,
}

fn candidates(n: usize, s: f64, j: f64) -> Vec<Candidate> {
    let ring = Pwr2Ring::new(n, s, j);
    let afm = euclidean_afm(n);
    let rec = recursive_ground_state(n).expect("power of two");
    let e_afm = ring.energy(&sigma_of(&afm));
    let rec_sigma = sigma_of(&rec);
    let e_rec = ring.energy(&rec_sigma);
    let mut out = vec![
        Candidate { family: Family::EuclideanAfm, energy: e_afm, config: Some(afm.clone()) },
        Candidate { family: Family::Recursive, energy: e_rec, config: Some(rec.clone()) },
    ];
    let mafm = monna_afm(n).expect("power of two");
    out.push(Candidate { family: Family::MonnaAfm, energy: ring.energy(&sigma_of(&mafm)), config: Some(mafm) });
    let mut m = 4;
    while m < n {
        let t = tiled_recursive_state(n, m).expect("valid period");
        out.push(Candidate { family: Family::TiledRecursive, energy: ring.energy(&sigma_of(&t)), config: Some(t) });
        m *= 2;
    }
    for len in 1..n {
        out.push(Candidate {
            family: Family::TwoDomainWalls,
            energy: e_afm + ring.afm_block_flip(len),
            config: None,
        });
    }
    for de in ring.single_flips(&rec_sigma) {
        out.push(Candidate { family: Family::RecursiveSingleFlip, energy: e_rec + de, config: None });
    }
    for de in ring.pair_flips(&rec_sigma) {
        out.push(Candidate { family: Family::RecursivePairFlip, energy: e_rec + de, config: None });
    }
    out
}

fn block_flipped_afm(n: usize, len: usize) -> SpinConfiguration {
    let mut c = euclidean_afm(n);
    for i in 0..len {
        c.flip(i);
    }
    c
}

fn check_analytic_inputs(n: usize, j: f64) -> Result<()> {
    if !is_power_of_two(n) || n < 8 {
        return Err(Error::InvalidSize { n, reason: "analytic gaps need a power of two >= 8" });
    }
    if !(j > 0.0) {
        return Err(Error::InvalidInput(format!("analytic gaps assume j > 0, got {j}")));
    }
    Ok(())
}

/// Degenerate-manifold gap over the candidate set: the lowest candidate defines the
/// ground manifold, candidates within the dedup tolerance of it join that
/// manifold, and the gap is the distance to the next candidate.
fn candidate_gap(cands: &[Candidate]) -> (usize, usize, f64) {
    let (g_idx, e0) = cands
        .iter()
        .enumerate()
        .map(|(i, c)| (i, c.energy))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("candidates");
    let tol = dedup_tolerance(e0);
    let (x_idx, gap) = cands
        .iter()
        .enumerate()
        .filter(|(_, c)| c.energy - e0 > tol)
        .map(|(i, c)| (i, c.energy - e0))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((g_idx, 0.0));
    (g_idx, x_idx, gap)
}

/// Candidate-state gap prediction at zero field.
pub fn analytic_gap(n: usize, s: f64, j: f64) -> Result<GapPrediction> {
    check_analytic_inputs(n, j)?;
    let bounds = phase_boundaries_scaled(n, j)?;
    analytic_gap_with(n, s, j, &bounds)
}

/// As [`analytic_gap`] with boundaries computed once for a sweep over `s`.
pub fn analytic_gap_with(n: usize, s: f64, j: f64, bounds: &PhaseBoundaries) -> Result<GapPrediction> {
    check_analytic_inputs(n, j)?;
    let cands = candidates(n, s, j);
    let (g_idx, x_idx, gap) = candidate_gap(&cands);
    let ground = &cands[g_idx];
    let ground_candidate = match &ground.config {
        Some(c) => c.clone(),
        None => {
            // only two-domain-wall entries lack a stored configuration
            let len = g_idx - cands.iter().position(|c| c.family == Family::TwoDomainWalls).unwrap() + 1;
            block_flipped_afm(n, len)
        }
    };
    Ok(GapPrediction {
        phase: classify(s, bounds),
        gap,
        ground_energy: ground.energy,
        ground_family: ground.family,
        ground_candidate,
        excitation_family: cands[x_idx].family,
    })
}

fn classify(s: f64, b: &PhaseBoundaries) -> Phase {
    let s1 = b.s1.unwrap_or(f64::NEG_INFINITY);
    let s2 = b.s2.unwrap_or(s1).max(s1);
    let s4 = b.s4.unwrap_or(f64::INFINITY);
    if s < s1 {
        Phase::P1Afm
    } else if s < s2 {
        Phase::P2Gapless
    } else if s < b.s3 {
        Phase::P2Recursive
    } else if s < s4 {
        Phase::P3Collapsing
    } else {
        Phase::P4TreeAfm
    }
}

const ROOT_TOL: f64 = 1e-10;

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Cheapest two-domain-wall excitation of the AFM, minimised over block length.
pub fn two_domain_wall_gap(n: usize, s: f64, j: f64) -> f64 {
    let ring = Pwr2Ring::new(n, s, j);
    (1..n).map(|len| ring.afm_block_flip(len)).fold(f64::INFINITY, f64::min)
}

/// Single-flip gap `1/2 j (n/2)^s` of the recursive state (renormalised to
/// `j/2` for `s > 0`).
pub fn single_flip_gap(n: usize, s: f64, j: f64) -> f64 {
    let ring = Pwr2Ring::new(n, s, j);
    0.5 * ring.far_coupling()
}

/// `2 j (2/n)^s`, the pair-flip gap of the collapsing phase.
pub fn pair_flip_gap(n: usize, s: f64, j: f64) -> f64 {
    2.0 * j * (2.0 / n as f64).powf(s)
}

/// Phase-3 onset `ln(1/4) / ln(2/n)`.
pub fn collapse_onset(n: usize) -> f64 {
    (0.25f64).ln() / (2.0 / n as f64).ln()
}

/// Boundaries at `j = 1`; every boundary is independent of the scale of `j`.
pub fn phase_boundaries(n: usize) -> Result<PhaseBoundaries> {
    phase_boundaries_scaled(n, 1.0)
}

fn phase_boundaries_scaled(n: usize, j: f64) -> Result<PhaseBoundaries> {
    check_analytic_inputs(n, j)?;
    let s3 = collapse_onset(n);
    let s1 = bisect(|s| two_domain_wall_gap(n, s, j), -40.0, 0.0);

    // competitor gap minus the single-flip gap; positive inside the
    // recursive region
    let margin = |s: f64| {
        let cands = candidates(n, s, j);
        let e_rec = cands.iter().find(|c| c.family == Family::Recursive).unwrap().energy;
        let tol = dedup_tolerance(e_rec);
        let competitor = cands
            .iter()
            .filter(|c| {
                !matches!(
                    c.family,
                    Family::Recursive | Family::RecursiveSingleFlip | Family::RecursivePairFlip
                )
            })
            .map(|c| c.energy - e_rec)
            .filter(|&d| d.abs() > tol)
            .fold(f64::INFINITY, f64::min);
        competitor - single_flip_gap(n, s, j)
    };
    let lower = s1.unwrap_or(-40.0);
    let s2 = if margin(s3) <= 0.0 {
        None
    } else {
        // walk down from the collapse onset to the first non-positive margin
        let step = 0.01;
        let mut hi = s3;
        let mut found = None;
        while hi > lower {
            let lo = (hi - step).max(lower);
            if margin(lo) <= 0.0 {
                found = bisect(margin, lo, hi);
                break;
            }
            hi = lo;
        }
        Some(found.unwrap_or(lower))
    };

    let spread = |s: f64| {
        let ring = Pwr2Ring::new(n, s, j);
        let e_rec = ring.energy(&sigma_of(&recursive_ground_state(n).unwrap()));
        let e_tree = ring.energy(&sigma_of(&monna_afm(n).unwrap()));
        (e_tree - e_rec) - dedup_tolerance(e_rec)
    };
    let s4 = bisect(spread, s3.max(0.0), 1e3);
    Ok(PhaseBoundaries { s1, s2, s3, s4 })
}

/// Energy of every analytic candidate state, in evaluation order.
pub fn candidate_energies(n: usize, s: f64, j: f64) -> Result<Vec<(Family, f64)>> {
    check_analytic_inputs(n, j)?;
    Ok(candidates(n, s, j).into_iter().map(|c| (c.family, c.energy)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_pwr2_couplings, build_ring_couplings, SignConvention};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(g: &CouplingGraph) -> Vec<f64> {
        let n = g.n_sites();
        let mut es: Vec<f64> = (0..1u64 << n)
            .map(|x| classical_energy(&SpinConfiguration::from_index(n, x), g).unwrap())
            .collect();
        es.sort_by(f64::total_cmp);
        es
    }

    #[test]
    fn energy_examples() {
        let g = build_pwr2_couplings(4, 0.0, 1.0).unwrap();
        let up = SpinConfiguration::all_up(4);
        assert_eq!(classical_energy(&up, &g).unwrap(), 1.5);
        let c = SpinConfiguration::parse("↑↓↓↑").unwrap();
        assert_eq!(classical_energy(&c, &g).unwrap(), -0.5);
        let bad = SpinConfiguration::all_up(8);
        assert!(matches!(classical_energy(&bad, &g), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn energy_is_flip_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = build_pwr2_couplings(16, -0.8, 1.0).unwrap();
        for _ in 0..200 {
            let c = SpinConfiguration::from_index(16, rng.random::<u64>());
            let e = classical_energy(&c, &g).unwrap();
            assert!((e - classical_energy(&c.global_flip(), &g).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn n4_s0_spectrum() {
        let g = build_pwr2_couplings(4, 0.0, 1.0).unwrap();
        let sp = enumerate_spectrum(&g, SpectrumOptions::default()).unwrap();
        assert_eq!(sp.ground_energy(), -0.5);
        // s = 0 at n = 4 is the complete graph: every balanced state ties
        assert_eq!(sp.ground_degeneracy(), 6);
        assert_eq!(sp.levels[1].energy, 0.0);
        assert_eq!(sp.total_states(), 16);
        let mut ground: Vec<String> = (0..16u64)
            .map(|x| SpinConfiguration::from_index(4, x))
            .filter(|c| classical_energy(c, &g).unwrap() == -0.5)
            .map(|c| c.to_string())
            .collect();
        ground.sort();
        assert_eq!(ground, ["↑↑↓↓", "↑↓↑↓", "↑↓↓↑", "↓↑↑↓", "↓↑↓↑", "↓↓↑↑"]);
    }

    #[test]
    fn nearest_neighbour_ring_has_neel_ground_pair() {
        let g = build_ring_couplings(8, &[1], 0.0, 1.0, SignConvention::AfmFavoring).unwrap();
        let sp = enumerate_spectrum(&g, SpectrumOptions::default()).unwrap();
        assert_eq!(sp.ground_degeneracy(), 2);
        let rep = sp.representative(0);
        assert!(rep == euclidean_afm(8) || rep == euclidean_afm(8).global_flip());
    }

    #[test]
    fn completeness_for_any_s() {
        for s in [-3.0, -0.4, 0.0, 1.3, 5.0] {
            let g = build_pwr2_couplings(4, s, 1.0).unwrap();
            let sp = enumerate_spectrum(&g, SpectrumOptions::default()).unwrap();
            assert_eq!(sp.total_states(), 16);
        }
    }

    #[test]
    fn gray_walk_matches_direct_energy() {
        let g = build_pwr2_couplings(16, -1.3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let total = 1u64 << 16;
        let energies: Vec<(u64, f64)> = GrayWalker::new(&g, 0, total).collect();
        assert_eq!(energies.len() as u64, total);
        for _ in 0..1000 {
            let t = rng.random_range(0..total);
            let (idx, e) = energies[t as usize];
            assert_eq!(idx, gray(t));
            let direct = classical_energy(&SpinConfiguration::from_index(16, idx), &g).unwrap();
            assert!((e - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn enumeration_matches_brute_force_levels() {
        for s in [-2.5, -1.0, 0.0, 0.5, 2.0] {
            let g = build_pwr2_couplings(8, s, 1.0).unwrap();
            let sp = enumerate_spectrum(&g, SpectrumOptions::default()).unwrap();
            let brute = brute_force(&g);
            assert!((sp.ground_energy() - brute[0]).abs() < 1e-12);
            let deg = brute.iter().filter(|&&e| e - brute[0] <= sp.dedup_tol).count() as u64;
            assert_eq!(sp.ground_degeneracy(), deg);
            assert_eq!(sp.total_states(), 256);
        }
    }

    #[test]
    fn truncated_levels_agree_with_full() {
        let g = build_pwr2_couplings(16, -0.7, 1.0).unwrap();
        let full = enumerate_spectrum(&g, SpectrumOptions::default()).unwrap();
        let top = enumerate_spectrum(&g, SpectrumOptions { max_levels: Some(5), ..Default::default() })
            .unwrap();
        assert_eq!(top.levels.len(), 5);
        assert_eq!(&full.levels[..5], &top.levels[..]);
        assert!(!top.complete);
    }

    #[test]
    fn levels_are_closed_under_symmetries() {
        let g = build_pwr2_couplings(8, -1.7, 1.0).unwrap();
        let sp = enumerate_spectrum(&g, SpectrumOptions::default()).unwrap();
        for (k, level) in sp.levels.iter().enumerate() {
            let rep = sp.representative(k);
            let mut orbit = vec![rep.global_flip()];
            orbit.extend((1..8).map(|t| rep.translated(t)));
            for c in orbit {
                let e = classical_energy(&c, &g).unwrap();
                assert!((e - level.energy).abs() <= sp.dedup_tol);
            }
        }
    }

    #[test]
    fn too_large_is_rejected() {
        let g = build_ring_couplings(30, &[1], 0.0, 1.0, SignConvention::AfmFavoring).unwrap();
        assert!(matches!(
            enumerate_spectrum(&g, SpectrumOptions { max_levels: Some(2), ..Default::default() }),
            Err(Error::TooLarge { .. })
        ));
        let g = build_ring_couplings(24, &[1], 0.0, 1.0, SignConvention::AfmFavoring).unwrap();
        assert!(matches!(enumerate_spectrum(&g, SpectrumOptions::default()), Err(Error::TooLarge { .. })));
    }

    fn s_grid() -> Vec<f64> {
        (0..=48).map(|k| -6.0 + 0.25 * k as f64).collect()
    }

    #[test]
    fn analytic_matches_enumeration_on_labelled_phases() {
        for n in [8usize, 16] {
            let bounds = phase_boundaries(n).unwrap();
            for s in s_grid() {
                let pred = analytic_gap_with(n, s, 1.0, &bounds).unwrap();
                let g = build_pwr2_couplings(n, s, 1.0).unwrap();
                let spec = enumerate_spectrum(&g, SpectrumOptions::default()).unwrap();
                let gap = spec.gap().unwrap();
                let e0 = spec.ground_energy();
                if pred.phase != Phase::P2Gapless {
                    assert!((pred.ground_energy - e0).abs() < 1e-9, "n={n} s={s}");
                    assert!((pred.gap - gap).abs() < 1e-9, "n={n} s={s}: {} vs {gap}", pred.gap);
                }
            }
        }
    }

    #[test]
    fn s0_gap_is_half_for_all_sizes() {
        let mut n = 8;
        while n <= 1 << 20 {
            let ring = Pwr2Ring::new(n, 0.0, 1.0);
            let rec = sigma_of(&recursive_ground_state(n).unwrap());
            let min_flip = ring.single_flips(&rec).into_iter().fold(f64::INFINITY, f64::min);
            assert_eq!(min_flip, 0.5, "n={n}");
            assert_eq!(single_flip_gap(n, 0.0, 1.0), 0.5);
            n *= 2;
        }
        for n in [8usize, 16, 32, 64, 128, 256, 512, 1024] {
            assert_eq!(analytic_gap(n, 0.0, 1.0).unwrap().gap, 0.5, "n={n}");
        }
    }

    #[test]
    fn s1_approaches_minus_two() {
        let mut prev = f64::NEG_INFINITY;
        let mut n = 8;
        let mut last = 0.0;
        while n <= 1024 {
            let s1 = phase_boundaries(n).unwrap().s1.unwrap();
            assert!(s1 < prev || prev == f64::NEG_INFINITY || (s1 + 2.0).abs() < (prev + 2.0).abs());
            prev = s1;
            last = s1;
            n *= 2;
        }
        assert!((last + 2.0).abs() < 0.01, "s1(1024) = {last}");
    }

    #[test]
    fn s3_closed_form() {
        assert!((collapse_onset(16) - 2.0 / 3.0).abs() < 1e-12);
        assert!((phase_boundaries(16).unwrap().s3 - 0.6667).abs() < 1e-4);
        let mut prev = f64::INFINITY;
        for p in 3..=20 {
            let s3 = collapse_onset(1 << p);
            assert!(s3 < prev && s3 > 0.0);
            prev = s3;
        }
    }

    #[test]
    fn collapsing_gap_n16_s1() {
        let pred = analytic_gap(16, 1.0, 1.0).unwrap();
        assert_eq!(pred.phase, Phase::P3Collapsing);
        assert!((pred.gap - 0.25).abs() < 1e-12);
        assert!((pair_flip_gap(16, 1.0, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn block_flip_formula_matches_direct_energy() {
        for n in [8usize, 16, 32] {
            for s in [-2.5, -1.0, 0.0, 1.5] {
                let ring = Pwr2Ring::new(n, s, 1.0);
                let g = build_pwr2_couplings(n, s, 1.0).unwrap();
                let e_afm = classical_energy(&euclidean_afm(n), &g).unwrap();
                for len in 1..n {
                    let direct = classical_energy(&block_flipped_afm(n, len), &g).unwrap();
                    assert!((e_afm + ring.afm_block_flip(len) - direct).abs() < 1e-12);
                }
                let rec = recursive_ground_state(n).unwrap();
                let e_rec = classical_energy(&rec, &g).unwrap();
                assert!((ring.energy(&sigma_of(&rec)) - e_rec).abs() < 1e-12);
                for (i, de) in ring.pair_flips(&sigma_of(&rec)).into_iter().enumerate() {
                    let mut c = rec.clone();
                    c.flip(i);
                    c.flip(i + n / 2);
                    assert!((e_rec + de - classical_energy(&c, &g).unwrap()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn deep_collapse_ground_states_satisfy_antipodal_bonds() {
        let n = 16;
        let g = build_pwr2_couplings(n, 5.0, 1.0).unwrap();
        let spec = enumerate_spectrum(&g, SpectrumOptions::default()).unwrap();
        let rep = SpinConfiguration::from_index(n, spec.levels[0].representative);
        for i in 0..n / 2 {
            assert_ne!(rep.is_up(i), rep.is_up(i + n / 2));
        }
        let s4 = phase_boundaries(n).unwrap().s4.unwrap();
        assert!(s4 > 5.0);
    }
}
