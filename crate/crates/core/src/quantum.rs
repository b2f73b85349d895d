//! Exact diagonalization of the transverse-field Hamiltonian
//! `H = sum J_ij S^z_i S^z_j + B sum S^x_i + Delta sum S^z_i`
//! with a matrix-free operator and restarted Lanczos.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{monna_map, CouplingGraph};

/// Largest system accepted by [`build_hamiltonian`].
pub const MAX_ED_SITES: usize = 24;
/// Largest system for which a dense matrix may be formed.
pub const MAX_DENSE_SITES: usize = 14;
/// Field used for observables of degenerate `B = 0` ground manifolds.
pub const CLASSICAL_LIMIT_FIELD: f64 = 1e-6;
/// Cap for automatic eigenpair-count escalation.
pub const MAX_EIGENPAIRS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub graph: CouplingGraph,
    pub b_field: f64,
    /// Zero for resonant driving.
    pub detuning: f64,
}

impl HamiltonianSpec {
    pub fn new(graph: CouplingGraph, b_field: f64) -> Self {
        Self { graph, b_field, detuning: 0.0 }
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }
}

/// Eigenspace of the global spin flip `prod_i sigma^x_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Full,
    Even,
    Odd,
}

/// Matrix-free Hamiltonian in the computational basis or in one flip sector.
/// Sector basis states are `(|x> ± |~x>)/sqrt 2` for `x` with the top bit clear.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    n: usize,
    sector: Sector,
    diag: Vec<f64>,
    half_b: f64,
}

const MATVEC_CHUNK: usize = 4096;

impl Hamiltonian {
    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    fn parity(&self) -> f64 {
        if self.sector == Sector::Odd {
            -1.0
        } else {
            1.0
        }
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let n = self.n;
        let hb = self.half_b;
        let (free_bits, wrap) = match self.sector {
            Sector::Full => (n, None),
            _ => (n - 1, Some(((1usize << (n - 1)) - 1, self.parity()))),
        };
        y.par_chunks_mut(MATVEC_CHUNK).enumerate().for_each(|(c, out)| {
            let base = c * MATVEC_CHUNK;
            for (off, yo) in out.iter_mut().enumerate() {
                let r = base + off;
                let mut acc = self.diag[r] * x[r];
                if hb != 0.0 {
                    let mut flips = 0.0;
                    for b in 0..free_bits {
                        flips += x[r ^ (1 << b)];
                    }
                    if let Some((mask, p)) = wrap {
                        flips += p * x[r ^ mask];
                    }
                    acc += hb * flips;
                }
                *yo = acc;
            }
        });
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }

    /// Dense matrix, for cross-checks on small systems.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.n > MAX_DENSE_SITES {
            return Err(Error::TooLarge { n: self.n, limit: MAX_DENSE_SITES });
        }
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        let mut e = vec![0.0; d];
        for col in 0..d {
            e[col] = 1.0;
            let y = self.apply_vec(&e);
            for (row, v) in y.into_iter().enumerate() {
                m[(row, col)] = v;
            }
            e[col] = 0.0;
        }
        Ok(m)
    }

    /// Sector amplitudes as a normalized vector over all `2^n` basis states.
    pub fn expand(&self, v: &[f64]) -> Vec<f64> {
        match self.sector {
            Sector::Full => v.to_vec(),
            _ => {
                let full = 1usize << self.n;
                let mask = full - 1;
                let p = self.parity();
                let w = std::f64::consts::FRAC_1_SQRT_2;
                let mut out = vec![0.0; full];
                for (r, &a) in v.iter().enumerate() {
                    out[r] = w * a;
                    out[r ^ mask] = p * w * a;
                }
                out
            }
        }
    }
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_ED_SITES {
        return Err(Error::TooLarge { n, limit: MAX_ED_SITES });
    }
    if n < 2 {
        return Err(Error::InvalidSize { n, reason: "need at least two sites" });
    }
    Ok(())
}

/// Operator on the full `2^n` space.
pub fn build_hamiltonian(spec: &HamiltonianSpec) -> Result<Hamiltonian> {
    build_hamiltonian_in_sector(spec, Sector::Full)
}

/// Operator restricted to a spin-flip sector; needs zero detuning.
pub fn build_hamiltonian_in_sector(spec: &HamiltonianSpec, sector: Sector) -> Result<Hamiltonian> {
    let n = spec.graph.n_sites();
    check_size(n)?;
    if sector != Sector::Full && spec.detuning != 0.0 {
        return Err(Error::InvalidInput("detuning breaks the spin-flip symmetry".into()));
    }
    let dim = match sector {
        Sector::Full => 1usize << n,
        _ => 1usize << (n - 1),
    };
    let edges = spec.graph.edges();
    let delta = spec.detuning;
    let mut diag = vec![0.0; dim];
    diag.par_chunks_mut(MATVEC_CHUNK).enumerate().for_each(|(c, out)| {
        let base = c * MATVEC_CHUNK;
        for (off, d) in out.iter_mut().enumerate() {
            let x = base + off;
            let mut e = 0.0;
            for edge in edges {
                let anti = ((x >> edge.i) ^ (x >> edge.j)) & 1;
                e += if anti == 1 { -0.25 } else { 0.25 } * edge.coupling;
            }
            if delta != 0.0 {
                let up = x.count_ones() as f64;
                e += delta * (up - 0.5 * n as f64);
            }
            *d = e;
        }
    });
    Ok(Hamiltonian { n, sector, diag, half_b: 0.5 * spec.b_field })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSolution {
    pub energies: Vec<f64>,
    /// Normalized, over the full `2^n` basis.
    pub states: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    /// Residual bound `||H psi - E psi||`.
    pub tol: f64,
    pub max_krylov: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_krylov: 120, max_restarts: 60, seed: 0 }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let nrm = dot(v, v).sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}

fn orthogonalize(w: &mut [f64], against: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in against {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

fn residual(h: &Hamiltonian, v: &[f64], e: f64) -> f64 {
    let hv = h.apply_vec(v);
    hv.iter().zip(v).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt()
}

/// Lowest Ritz pair of one Lanczos run started from `start`, kept orthogonal
/// to `locked`.
fn lanczos_run(h: &Hamiltonian, locked: &[Vec<f64>], start: Vec<f64>, opts: &LanczosOptions) -> Option<(f64, Vec<f64>)> {
    let dim = h.dim();
    let mut q = start;
    orthogonalize(&mut q, locked);
    if normalize(&mut q) < 1e-300 {
        return None;
    }
    let kmax = opts.max_krylov.min(dim - locked.len()).max(1);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let (theta, y) = loop {
        let k = basis.len() - 1;
        let mut w = h.apply_vec(&basis[k]);
        let a = dot(&basis[k], &w);
        alpha.push(a);
        axpy(-a, &basis[k], &mut w);
        if k > 0 {
            axpy(-beta[k - 1], &basis[k - 1], &mut w);
        }
        orthogonalize(&mut w, locked);
        orthogonalize(&mut w, &basis);
        let b = dot(&w, &w).sqrt();
        let scale = alpha.iter().map(|x| x.abs()).fold(1.0, f64::max);
        let exhausted = b <= 1e-13 * scale || basis.len() >= kmax;
        if exhausted || k % 4 == 3 {
            let (theta, y) = lowest_tridiagonal(&alpha, &beta);
            if exhausted || (b * y[k]).abs() < 0.1 * opts.tol {
                break (theta, y);
            }
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(w);
    };
    let mut v = vec![0.0; dim];
    for (c, qv) in y.iter().zip(&basis) {
        axpy(*c, qv, &mut v);
    }
    orthogonalize(&mut v, locked);
    normalize(&mut v);
    Some((theta, v))
}

fn lowest_tridiagonal(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (idx, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    (theta, eig.eigenvectors.column(idx).iter().copied().collect())
}

/// The `m` lowest eigenpairs, found one at a time with locking so that
/// degenerate levels are resolved with their multiplicity.
pub fn lowest_eigenpairs(h: &Hamiltonian, m: usize, opts: &LanczosOptions) -> Result<EigenSolution> {
    if m == 0 {
        return Err(Error::InvalidInput("need at least one eigenpair".into()));
    }
    let dim = h.dim();
    if m > dim {
        return Err(Error::InvalidInput(format!("{m} eigenpairs requested from dimension {dim}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut energies = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    while locked.len() < m {
        let mut start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut best_res = f64::INFINITY;
        let mut found = None;
        for _ in 0..=opts.max_restarts {
            let Some((theta, v)) = lanczos_run(h, &locked, start, opts) else {
                break;
            };
            let r = residual(h, &v, theta);
            best_res = best_res.min(r);
            if r < opts.tol {
                found = Some((theta, v, r));
                break;
            }
            start = v;
        }
        match found {
            Some((theta, v, r)) => {
                locked.push(v);
                energies.push(theta);
                residuals.push(r);
            }
            None => {
                let mut res = residuals.clone();
                res.push(best_res);
                return Err(Error::ConvergenceFailure {
                    iterations: opts.max_restarts * opts.max_krylov,
                    residuals: res,
                });
            }
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
    Ok(EigenSolution {
        energies: order.iter().map(|&i| energies[i]).collect(),
        states: order.iter().map(|&i| h.expand(&locked[i])).collect(),
        residuals: order.iter().map(|&i| residuals[i]).collect(),
    })
}

/// `1e-8 max(1, |E0|)`.
pub fn default_degeneracy_tol(e0: f64) -> f64 {
    1e-8 * e0.abs().max(1.0)
}

/// Smallest `E_i - E_0` above `degeneracy_tol`.
pub fn spectral_gap(sol: &EigenSolution, degeneracy_tol: Option<f64>) -> Result<f64> {
    let e0 = *sol.energies.first().ok_or(Error::ManifoldNotExited(0))?;
    let tol = degeneracy_tol.unwrap_or_else(|| default_degeneracy_tol(e0));
    sol.energies
        .iter()
        .map(|e| e - e0)
        .filter(|&d| d > tol)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
        .ok_or(Error::ManifoldNotExited(sol.energies.len()))
}

/// Lowest levels and gap, doubling the eigenpair count until the ground
/// manifold is exited (at most [`MAX_EIGENPAIRS`]).
pub fn ground_and_gap(h: &Hamiltonian, opts: &LanczosOptions) -> Result<(EigenSolution, f64)> {
    let mut m = 2.min(h.dim());
    loop {
        let sol = lowest_eigenpairs(h, m, opts)?;
        match spectral_gap(&sol, None) {
            Ok(gap) => return Ok((sol, gap)),
            Err(Error::ManifoldNotExited(k)) => {
                if m >= MAX_EIGENPAIRS.min(h.dim()) {
                    return Err(Error::ManifoldNotExited(k));
                }
                m = (2 * m).min(MAX_EIGENPAIRS).min(h.dim());
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteOrdering {
    Euclidean,
    Monna,
}

fn n_from_len(len: usize) -> Result<usize> {
    if !len.is_power_of_two() || len < 2 {
        return Err(Error::InvalidInput(format!("state length {len} is not 2^n")));
    }
    Ok(len.trailing_zeros() as usize)
}

fn check_normalized(state: &[f64]) -> Result<()> {
    let dev = dot(state, state).sqrt() - 1.0;
    if dev.abs() > 1e-10 {
        return Err(Error::NotNormalized(dev));
    }
    Ok(())
}

/// Sites occupying positions `[0, block)` after reordering.
fn block_sites(n: usize, block: usize, ordering: SiteOrdering) -> Result<Vec<usize>> {
    Ok(match ordering {
        SiteOrdering::Euclidean => (0..block).collect(),
        SiteOrdering::Monna => {
            let mut sites = Vec::with_capacity(block);
            for i in 0..n {
                if monna_map(n, i)? < block {
                    sites.push(i);
                }
            }
            sites
        }
    })
}

/// Von Neumann entropy (natural log) of the first `block_size` sites in the
/// chosen ordering.
pub fn entanglement_entropy(state: &[f64], block_size: usize, ordering: SiteOrdering) -> Result<f64> {
    let n = n_from_len(state.len())?;
    if block_size == 0 || block_size >= n {
        return Err(Error::InvalidInput(format!("block size {block_size} must lie in 1..{n}")));
    }
    check_normalized(state)?;
    let a_sites = block_sites(n, block_size, ordering)?;
    let mut in_a = vec![false; n];
    for &s in &a_sites {
        in_a[s] = true;
    }
    let b_sites: Vec<usize> = (0..n).filter(|&i| !in_a[i]).collect();
    let (da, db) = (1usize << a_sites.len(), 1usize << b_sites.len());
    let mut m = DMatrix::<f64>::zeros(da, db);
    for (x, &amp) in state.iter().enumerate() {
        if amp == 0.0 {
            continue;
        }
        let a = a_sites.iter().enumerate().fold(0, |acc, (k, &s)| acc | (((x >> s) & 1) << k));
        let b = b_sites.iter().enumerate().fold(0, |acc, (k, &s)| acc | (((x >> s) & 1) << k));
        m[(a, b)] = amp;
    }
    let rho = if da <= db { &m * m.transpose() } else { m.transpose() * &m };
    let eig = SymmetricEigen::new(rho);
    Ok(eig
        .eigenvalues
        .iter()
        .filter(|&&l| l > 1e-300)
        .map(|&l| -l * l.ln())
        .sum::<f64>()
        .max(0.0))
}

/// Entropy for every cut `1..n`.
pub fn entropy_profile(state: &[f64], ordering: SiteOrdering) -> Result<Vec<f64>> {
    let n = n_from_len(state.len())?;
    (1..n).map(|l| entanglement_entropy(state, l, ordering)).collect()
}

/// Connected `<S^z_i S^z_j> - <S^z_i><S^z_j>`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationData {
    pub n: usize,
    pub c_matrix: Vec<f64>,
}

impl CorrelationData {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c_matrix[i * self.n + j]
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut c = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                c.push(f(i, j));
            }
        }
        Self { n, c_matrix: c }
    }
}

pub fn correlations(state: &[f64]) -> Result<CorrelationData> {
    let n = n_from_len(state.len())?;
    check_normalized(state)?;
    let mut mz = vec![0.0; n];
    let mut zz = vec![0.0; n * n];
    for (x, &amp) in state.iter().enumerate() {
        let p = amp * amp;
        if p == 0.0 {
            continue;
        }
        for i in 0..n {
            let si = if (x >> i) & 1 == 1 { 0.5 } else { -0.5 };
            mz[i] += p * si;
            for j in i..n {
                let sj = if (x >> j) & 1 == 1 { 0.5 } else { -0.5 };
                zz[i * n + j] += p * si * sj;
            }
        }
    }
    Ok(CorrelationData::from_fn(n, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        zz[a * n + b] - mz[i] * mz[j]
    }))
}

/// `2 pi m / n` for `m = 0..n`.
pub fn momentum_grid(n: usize) -> Vec<f64> {
    (0..n).map(|m| 2.0 * std::f64::consts::PI * m as f64 / n as f64).collect()
}

fn momentum_index(n: usize, q: f64) -> Result<usize> {
    let x = q * n as f64 / (2.0 * std::f64::consts::PI);
    let m = x.round();
    if !q.is_finite() || (x - m).abs() > 1e-9 {
        return Err(Error::InvalidMomentum(q));
    }
    Ok(m.rem_euclid(n as f64) as usize)
}

fn structure_factor_at(corr: &CorrelationData, m: usize) -> Result<f64> {
    let n = corr.n;
    let (mut re, mut im) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            // exact phase from the integer grid index
            let k = (m * ((i + n - j) % n)) % n;
            let phase = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let c = corr.get(i, j);
            re += c * phase.cos();
            im += c * phase.sin();
        }
    }
    let scale = corr.c_matrix.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
    if im.abs() > 1e-12 * scale {
        return Err(Error::InvalidInput(format!("structure factor has imaginary part {im:e}")));
    }
    Ok(re / n as f64)
}

/// `S(q) = (1/n) sum_ij e^{iq(i-j)} c_ij` for `q` on the momentum grid.
pub fn connected_structure_factor(corr: &CorrelationData, q: f64) -> Result<f64> {
    structure_factor_at(corr, momentum_index(corr.n, q)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiFlag {
    Finite,
    /// Neighbouring momenta carry no weight: `+inf`.
    ZeroNeighbourWeight,
    /// `S(q0)` below the neighbour average: reported as 0.
    NegativeRadicand,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiEstimate {
    pub xi: f64,
    pub flag: XiFlag,
}

/// Symmetric second-moment correlation length around `q0`.
pub fn second_moment_xi(corr: &CorrelationData, q0: f64) -> Result<XiEstimate> {
    let n = corr.n;
    let m0 = momentum_index(n, q0)?;
    let s0 = structure_factor_at(corr, m0)?;
    let sp = structure_factor_at(corr, (m0 + 1) % n)?;
    let sm = structure_factor_at(corr, (m0 + n - 1) % n)?;
    let neighbour = 0.5 * (sp + sm);
    let delta = 2.0 * std::f64::consts::PI / n as f64;
    let scale = s0.abs().max(1e-300);
    if neighbour.abs() <= 1e-14 * scale {
        return Ok(XiEstimate { xi: f64::INFINITY, flag: XiFlag::ZeroNeighbourWeight });
    }
    let radicand = s0 / neighbour - 1.0;
    if radicand < 0.0 {
        return Ok(XiEstimate { xi: 0.0, flag: XiFlag::NegativeRadicand });
    }
    Ok(XiEstimate { xi: radicand.sqrt() / (2.0 * (delta / 2.0).sin()), flag: XiFlag::Finite })
}

/// Ground state in the flip sector holding it. For even `n` and zero
/// detuning that is the even sector; otherwise the full space is used.
pub fn ground_state(spec: &HamiltonianSpec, opts: &LanczosOptions) -> Result<(f64, Vec<f64>)> {
    let sector = if spec.detuning == 0.0 && spec.graph.n_sites() % 2 == 0 { Sector::Even } else { Sector::Full };
    let h = build_hamiltonian_in_sector(spec, sector)?;
    let sol = lowest_eigenpairs(&h, 1, opts)?;
    Ok((sol.energies[0], sol.states[0].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{enumerate_spectrum, SpectrumOptions};
    use crate::graph::{build_pwr2_couplings, build_ring_couplings, SignConvention};
    use std::f64::consts::{LN_2, PI};

    fn pwr2(n: usize, s: f64, b: f64) -> HamiltonianSpec {
        HamiltonianSpec::new(build_pwr2_couplings(n, s, 1.0).unwrap(), b)
    }

    fn dense_eigs(h: &Hamiltonian) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(h.to_dense().unwrap()).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn two_site_spectrum() {
        let g = build_ring_couplings(2, &[1], 0.0, 1.0, SignConvention::AfmFavoring).unwrap();
        let h = build_hamiltonian(&HamiltonianSpec::new(g, 0.0)).unwrap();
        assert_eq!(dense_eigs(&h), vec![-0.25, -0.25, 0.25, 0.25]);
    }

    #[test]
    fn hermitian_on_random_vectors() {
        let h = build_hamiltonian(&pwr2(8, -0.4, 0.7).with_detuning(0.3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let u: Vec<f64> = (0..256).map(|_| rng.random::<f64>() - 0.5).collect();
            let v: Vec<f64> = (0..256).map(|_| rng.random::<f64>() - 0.5).collect();
            let a = dot(&u, &h.apply_vec(&v));
            let b = dot(&h.apply_vec(&u), &v);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let spec = pwr2(8, -3.0, 0.5);
        let h = build_hamiltonian(&spec).unwrap();
        let dense = dense_eigs(&h);
        let sol = lowest_eigenpairs(&h, 4, &LanczosOptions::default()).unwrap();
        for (a, b) in sol.energies.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10, "{a} {b}");
        }
        for (i, s) in sol.states.iter().enumerate() {
            assert!(sol.residuals[i] < 1e-8);
            for t in &sol.states[..i] {
                assert!(dot(s, t).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn sectors_partition_the_spectrum() {
        let spec = pwr2(8, 0.6, 0.9);
        let full = dense_eigs(&build_hamiltonian(&spec).unwrap());
        let mut split = dense_eigs(&build_hamiltonian_in_sector(&spec, Sector::Even).unwrap());
        split.extend(dense_eigs(&build_hamiltonian_in_sector(&spec, Sector::Odd).unwrap()));
        split.sort_by(f64::total_cmp);
        for (a, b) in full.iter().zip(&split) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_operator_minimum() {
        let spec = pwr2(8, -1.3, 0.0);
        let h = build_hamiltonian(&spec).unwrap();
        let sol = lowest_eigenpairs(&h, 1, &LanczosOptions::default()).unwrap();
        let min = h.diagonal().iter().copied().fold(f64::INFINITY, f64::min);
        assert!((sol.energies[0] - min).abs() < 1e-12);
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let h = build_hamiltonian(&pwr2(8, -0.5, 0.4)).unwrap();
        let opts = LanczosOptions { seed: 17, ..Default::default() };
        let a = lowest_eigenpairs(&h, 3, &opts).unwrap();
        let b = lowest_eigenpairs(&h, 3, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gap_rules() {
        let sol = |e: Vec<f64>| EigenSolution { residuals: vec![0.0; e.len()], states: vec![], energies: e };
        assert_eq!(spectral_gap(&sol(vec![-1.0, -1.0, -0.5]), Some(1e-9)).unwrap(), 0.5);
        assert_eq!(spectral_gap(&sol(vec![-1.0, -1.0 + 1e-12]), Some(1e-9)), Err(Error::ManifoldNotExited(2)));
    }

    #[test]
    fn zero_field_matches_enumeration() {
        for (n, s) in [(4usize, 0.0), (8, -2.5), (8, 0.0), (8, 1.5)] {
            let spec = pwr2(n, s, 0.0);
            let levels = enumerate_spectrum(&spec.graph, SpectrumOptions::default()).unwrap().levels;
            let m = (levels[0].degeneracy + levels[1].degeneracy) as usize;
            let h = build_hamiltonian(&spec).unwrap();
            let sol = lowest_eigenpairs(&h, m, &LanczosOptions::default()).unwrap();
            let mut expect = Vec::new();
            for l in &levels[..2] {
                expect.extend(std::iter::repeat_n(l.energy, l.degeneracy as usize));
            }
            for (a, b) in sol.energies.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-9, "n={n} s={s}");
            }
            let gap = spectral_gap(&sol, None).unwrap();
            assert!((gap - (levels[1].energy - levels[0].energy)).abs() < 1e-9);
        }
        let (sol, gap) = ground_and_gap(&build_hamiltonian(&pwr2(4, 0.0, 0.0)).unwrap(), &LanczosOptions::default()).unwrap();
        assert!((gap - 0.5).abs() < 1e-12);
        assert_eq!(sol.energies.iter().filter(|&&e| e - sol.energies[0] < 1e-9).count(), 6);
    }

    #[test]
    fn variational_bound() {
        let h = build_hamiltonian(&pwr2(8, -1.0, 0.8)).unwrap();
        let e0 = lowest_eigenpairs(&h, 1, &LanczosOptions::default()).unwrap().energies[0];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let v: Vec<f64> = (0..256).map(|_| rng.random::<f64>() - 0.5).collect();
            let rq = dot(&v, &h.apply_vec(&v)) / dot(&v, &v);
            assert!(rq >= e0 - 1e-12);
        }
    }

    fn product_state(n: usize, x: usize) -> Vec<f64> {
        let mut v = vec![0.0; 1 << n];
        v[x] = 1.0;
        v
    }

    #[test]
    fn entropy_examples() {
        let p = product_state(4, 0b1010);
        for l in 1..4 {
            assert_eq!(entanglement_entropy(&p, l, SiteOrdering::Euclidean).unwrap(), 0.0);
        }
        let w = std::f64::consts::FRAC_1_SQRT_2;
        let bell = vec![0.0, w, w, 0.0];
        assert!((entanglement_entropy(&bell, 1, SiteOrdering::Euclidean).unwrap() - LN_2).abs() < 1e-12);
        assert_eq!(
            entanglement_entropy(&[1.0, 1.0, 0.0, 0.0], 1, SiteOrdering::Euclidean),
            Err(Error::NotNormalized(2f64.sqrt() - 1.0))
        );
    }

    #[test]
    fn block_and_complement_agree() {
        let spec = pwr2(8, -0.8, 0.6);
        let (_, psi) = ground_state(&spec, &LanczosOptions::default()).unwrap();
        for ord in [SiteOrdering::Euclidean, SiteOrdering::Monna] {
            for l in 1..8 {
                let a = entanglement_entropy(&psi, l, ord).unwrap();
                // complement of the first l sites is the last 8-l; reverse
                // the chain to make it a leading block
                let rev: Vec<f64> = (0..256usize)
                    .map(|x| psi[(0..8).fold(0, |acc, b| acc | (((x >> b) & 1) << (7 - b)))])
                    .collect();
                if ord == SiteOrdering::Euclidean {
                    let b = entanglement_entropy(&rev, 8 - l, ord).unwrap();
                    assert!((a - b).abs() < 1e-9);
                }
                assert!(a >= 0.0);
            }
        }
    }

    #[test]
    fn ordering_matters_only_through_the_block() {
        // Monna half block of 8 sites = even sites
        let sites = block_sites(8, 4, SiteOrdering::Monna).unwrap();
        assert_eq!(sites, vec![0, 2, 4, 6]);
    }

    #[test]
    fn structure_factor_examples() {
        let n = 8;
        let diag = CorrelationData::from_fn(n, |i, j| if i == j { 0.25 } else { 0.0 });
        for q in momentum_grid(n) {
            assert!((connected_structure_factor(&diag, q).unwrap() - 0.25).abs() < 1e-15);
        }
        let stag = CorrelationData::from_fn(n, |i, j| 0.25 * if (i + j) % 2 == 0 { 1.0 } else { -1.0 });
        assert!((connected_structure_factor(&stag, PI).unwrap() - n as f64 / 4.0).abs() < 1e-12);
        assert!(connected_structure_factor(&stag, 0.0).unwrap().abs() < 1e-12);
        assert_eq!(connected_structure_factor(&stag, 0.1), Err(Error::InvalidMomentum(0.1)));
        let xi = second_moment_xi(&stag, PI).unwrap();
        assert_eq!(xi.flag, XiFlag::ZeroNeighbourWeight);
        assert_eq!(xi.xi, f64::INFINITY);
        let flat = second_moment_xi(&diag, PI).unwrap();
        assert_eq!(flat.xi, 0.0);
    }

    #[test]
    fn synthetic_correlation_length() {
        let n = 64;
        let corr = CorrelationData::from_fn(n, |i, j| {
            let d = crate::graph::ring_distance(n, i, j) as f64;
            0.25 * if (i + j) % 2 == 0 { 1.0 } else { -1.0 } * (-d / 4.0).exp()
        });
        let xi = second_moment_xi(&corr, PI).unwrap();
        assert!((xi.xi - 4.0).abs() < 0.4, "{}", xi.xi);
    }

    #[test]
    fn ground_state_observables() {
        let spec = pwr2(8, -0.3, 0.7);
        let (_, psi) = ground_state(&spec, &LanczosOptions::default()).unwrap();
        let corr = correlations(&psi).unwrap();
        let mut parseval = 0.0;
        for q in momentum_grid(8) {
            let s = connected_structure_factor(&corr, q).unwrap();
            assert!(s >= -1e-12);
            parseval += s;
        }
        let trace: f64 = (0..8).map(|i| corr.get(i, i)).sum();
        assert!((parseval - trace).abs() < 1e-10);
        for i in 0..8 {
            assert!(corr.get(i, i) >= 0.0 && corr.get(i, i) <= 0.25 + 1e-15);
            for j in 0..8 {
                assert_eq!(corr.get(i, j), corr.get(j, i));
            }
        }
    }

    #[test]
    fn rejects_large_systems() {
        let g = build_ring_couplings(25, &[1], 0.0, 1.0, SignConvention::AfmFavoring).unwrap();
        assert!(matches!(build_hamiltonian(&HamiltonianSpec::new(g, 0.1)), Err(Error::TooLarge { .. })));
    }
}
