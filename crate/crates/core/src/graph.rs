//! Coupling graphs for power-of-two (PWR2) rings, the Monna permutation, the
//! recursive PWR2 ground state and the weighted-graph metric.
//!
//! Site `i` of an `n`-site ring couples to `i + d (mod n)` only when the ring
//! distance `d = min(|i-j|, n-|i-j|)` is a power of two. Every unordered pair
//! is stored exactly once, so the furthest-neighbour bond `(i, i + n/2)`
//! appears once and not twice.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    Pwr2,
    /// Power-law ring over an explicit distance set (truncated PWR2 graphs,
    /// or power-of-two distances on a ring whose size is not a power of two).
    PowerLawRing,
    RydbergTambourine,
    RydbergDual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// `H = + sum J_d S^z S^z` with `J > 0`: anti-alignment lowers the energy.
    #[default]
    AfmFavoring,
    FmFavoring,
}

impl SignConvention {
    pub fn factor(self) -> f64 {
        match self {
            SignConvention::AfmFavoring => 1.0,
            SignConvention::FmFavoring => -1.0,
        }
    }
}

/// The control parameter a graph was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlParam {
    /// Power-law exponent.
    S(f64),
    /// Tambourine displacement in units of the undistorted NN spacing.
    H(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
}

/// Symmetric pairwise couplings over `n` sites with build metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGraph {
    n: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
    kind: GraphKind,
    param: ControlParam,
    sign: SignConvention,
    distances: Option<Vec<usize>>,
}

/// JSON sidecar written next to the CSV edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMetadata {
    pub kind: GraphKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    pub sign: SignConvention,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<usize>>,
}

pub fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// The PWR2 distance set `{1, 2, 4, ..., n/2}`.
pub fn pwr2_distances(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut d = 1;
    while d <= n / 2 {
        out.push(d);
        d *= 2;
    }
    out
}

/// Ring distance `min(|i-j|, n-|i-j|)`.
#[inline]
pub fn ring_distance(n: usize, i: usize, j: usize) -> usize {
    let a = i.abs_diff(j);
    a.min(n - a)
}

impl CouplingGraph {
    /// Builds a graph from an explicit edge list. Pairs must be distinct and
    /// off-diagonal; orientation is normalised so that `i < j`.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = Edge>,
        kind: GraphKind,
        param: ControlParam,
        sign: SignConvention,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize { n, reason: "need at least one site" });
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut stored = Vec::new();
        for e in edges {
            let (i, j) = if e.i < e.j { (e.i, e.j) } else { (e.j, e.i) };
            if j >= n {
                return Err(Error::IndexError { index: j, n });
            }
            if i == j {
                return Err(Error::InvalidInput(format!("self-coupling at site {i}")));
            }
            if adjacency[i].iter().any(|&(k, _)| k == j) {
                return Err(Error::InvalidInput(format!("pair ({i},{j}) stored twice")));
            }
            adjacency[i].push((j, e.coupling));
            adjacency[j].push((i, e.coupling));
            stored.push(Edge { i, j, coupling: e.coupling });
        }
        for row in &mut adjacency {
            row.sort_by_key(|&(k, _)| k);
        }
        Ok(Self { n, edges: stored, adjacency, kind, param, sign, distances: None })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbours of `site` with their couplings, sorted by neighbour index.
    pub fn neighbors(&self, site: usize) -> &[(usize, f64)] {
        &self.adjacency[site]
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn param(&self) -> ControlParam {
        self.param
    }

    pub fn sign(&self) -> SignConvention {
        self.sign
    }

    /// Distance set for ring graphs built from one.
    pub fn distances(&self) -> Option<&[usize]> {
        self.distances.as_deref()
    }

    /// Coupling between `i` and `j`, zero when the pair is absent.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.adjacency
            .get(i)
            .and_then(|row| row.binary_search_by_key(&j, |&(k, _)| k).ok().map(|p| row[p].1))
            .unwrap_or(0.0)
    }

    pub fn max_abs_coupling(&self) -> f64 {
        self.edges.iter().map(|e| e.coupling.abs()).fold(0.0, f64::max)
    }

    pub fn metadata(&self) -> GraphMetadata {
        let (s, h) = match self.param {
            ControlParam::S(s) => (Some(s), None),
            ControlParam::H(h) => (None, Some(h)),
        };
        GraphMetadata {
            kind: self.kind,
            n: self.n,
            s,
            h,
            sign: self.sign,
            distances: self.distances.clone(),
        }
    }

    /// Writes the `i,j,coupling` edge list.
    pub fn write_edge_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["i", "j", "coupling"])?;
        for e in &self.edges {
            wtr.write_record([e.i.to_string(), e.j.to_string(), fmt_f64(e.coupling)])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_edge_csv<R: Read>(r: R, meta: &GraphMetadata) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["i", "j", "coupling"] {
            return Err(Error::InvalidInput(format!("unexpected edge header {headers:?}")));
        }
        let mut edges = Vec::new();
        for rec in rdr.deserialize::<Edge>() {
            edges.push(rec?);
        }
        let param = match (meta.s, meta.h) {
            (Some(s), None) => ControlParam::S(s),
            (None, Some(h)) => ControlParam::H(h),
            _ => return Err(Error::InvalidInput("metadata needs exactly one of s or h".into())),
        };
        let mut g = Self::from_edges(meta.n, edges, meta.kind, param, meta.sign)?;
        g.distances = meta.distances.clone();
        Ok(g)
    }

    /// Saves `<stem>.csv` and the `<stem>.json` metadata sidecar.
    pub fn save(&self, csv_path: &Path) -> Result<PathBuf> {
        let sidecar = csv_path.with_extension("json");
        self.write_edge_csv(std::fs::File::create(csv_path)?)?;
        std::fs::write(&sidecar, serde_json::to_string_pretty(&self.metadata())?)?;
        Ok(sidecar)
    }

    pub fn load(csv_path: &Path) -> Result<Self> {
        let meta: GraphMetadata =
            serde_json::from_str(&std::fs::read_to_string(csv_path.with_extension("json"))?)?;
        Self::read_edge_csv(std::fs::File::open(csv_path)?, &meta)
    }
}

/// PWR2 couplings `J_d = j d^s`, renormalised by `(2/n)^s` when `s > 0` so
/// the strongest bond equals `|j|`.
pub fn build_pwr2_couplings(n: usize, s: f64, j: f64) -> Result<CouplingGraph> {
    if !is_power_of_two(n) {
        return Err(Error::InvalidSize { n, reason: "must be a power of two" });
    }
    if n < 4 {
        return Err(Error::InvalidSize { n, reason: "must be at least 4" });
    }
    let mut g = build_ring_couplings(n, &pwr2_distances(n), s, j, SignConvention::AfmFavoring)?;
    g.kind = GraphKind::Pwr2;
    g.distances = None;
    Ok(g)
}

/// Same as [`build_pwr2_couplings`] with an explicit sign convention.
pub fn build_pwr2_couplings_signed(
    n: usize,
    s: f64,
    j: f64,
    sign: SignConvention,
) -> Result<CouplingGraph> {
    let mut g = build_pwr2_couplings(n, s, j)?;
    if sign == SignConvention::FmFavoring {
        g = flip_sign(g);
    }
    Ok(g)
}

fn flip_sign(g: CouplingGraph) -> CouplingGraph {
    let edges = g.edges.iter().map(|e| Edge { coupling: -e.coupling, ..*e });
    let mut out = CouplingGraph::from_edges(
        g.n,
        edges,
        g.kind,
        g.param,
        match g.sign {
            SignConvention::AfmFavoring => SignConvention::FmFavoring,
            SignConvention::FmFavoring => SignConvention::AfmFavoring,
        },
    )
    .expect("edges of a valid graph");
    out.distances = g.distances;
    out
}

/// Power-law ring restricted to `distances` (each in `1..=n/2`), with the
/// same `(2/n)^s` renormalisation as the PWR2 graph for `s > 0`.
pub fn build_ring_couplings(
    n: usize,
    distances: &[usize],
    s: f64,
    j: f64,
    sign: SignConvention,
) -> Result<CouplingGraph> {
    if n < 2 {
        return Err(Error::InvalidSize { n, reason: "ring needs at least 2 sites" });
    }
    let mut ds = distances.to_vec();
    ds.sort_unstable();
    ds.dedup();
    if ds.is_empty() || ds[0] == 0 || *ds.last().unwrap() > n / 2 {
        return Err(Error::InvalidInput(format!("distances {distances:?} must lie in 1..={}", n / 2)));
    }
    let scale = j * sign.factor();
    let mut edges = Vec::new();
    for &d in &ds {
        // (2d/n)^s keeps the antipodal bond at exactly |j| for s > 0
        let base = if s > 0.0 { 2.0 * d as f64 / n as f64 } else { d as f64 };
        let coupling = scale * base.powf(s);
        // the antipodal distance is its own mirror image, so only n/2 pairs
        let count = if 2 * d == n { n / 2 } else { n };
        for i in 0..count {
            edges.push(Edge { i, j: (i + d) % n, coupling });
        }
    }
    let mut g = CouplingGraph::from_edges(n, edges, GraphKind::PowerLawRing, ControlParam::S(s), sign)?;
    g.distances = Some(ds);
    Ok(g)
}

/// Classical Ising configuration with spin `+1/2` where the bit is set.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SpinConfiguration {
    n: usize,
    words: Vec<u64>,
}

impl SpinConfiguration {
    pub fn all_down(n: usize) -> Self {
        Self { n, words: vec![0; n.div_ceil(64).max(1)] }
    }

    pub fn all_up(n: usize) -> Self {
        let mut c = Self::all_down(n);
        for i in 0..n {
            c.set(i, true);
        }
        c
    }

    /// Configuration whose bit `i` is bit `i` of `index` (n <= 64).
    pub fn from_index(n: usize, index: u64) -> Self {
        assert!(n <= 64, "from_index supports at most 64 sites");
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Self { n, words: vec![index & mask] }
    }

    pub fn from_spins(up: &[bool]) -> Self {
        let mut c = Self::all_down(up.len());
        for (i, &u) in up.iter().enumerate() {
            c.set(i, u);
        }
        c
    }

    /// Parses `u`/`d`, `1`/`0`, `+`/`-` or arrow characters.
    pub fn parse(s: &str) -> Result<Self> {
        let spins = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                'u' | 'U' | '1' | '+' | '↑' => Ok(true),
                'd' | 'D' | '0' | '-' | '↓' => Ok(false),
                other => Err(Error::InvalidInput(format!("bad spin character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_spins(&spins))
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    /// Packed index for `n <= 64`.
    pub fn index(&self) -> u64 {
        assert!(self.n <= 64);
        self.words[0]
    }

    #[inline]
    pub fn is_up(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    /// Spin value `+1/2` or `-1/2`.
    #[inline]
    pub fn spin(&self, i: usize) -> f64 {
        if self.is_up(i) {
            0.5
        } else {
            -0.5
        }
    }

    pub fn set(&mut self, i: usize, up: bool) {
        let (w, b) = (i / 64, i % 64);
        if up {
            self.words[w] |= 1 << b;
        } else {
            self.words[w] &= !(1 << b);
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn global_flip(&self) -> Self {
        let mut c = self.clone();
        for i in 0..self.n {
            c.flip(i);
        }
        c
    }

    /// Configuration with site `i` moved to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut c = Self::all_down(self.n);
        for (i, &p) in perm.iter().enumerate() {
            c.set(p, self.is_up(i));
        }
        c
    }

    /// Ring translation by `shift` sites.
    pub fn translated(&self, shift: usize) -> Self {
        let perm: Vec<usize> = (0..self.n).map(|i| (i + shift) % self.n).collect();
        self.permuted(&perm)
    }

    pub fn count_up(&self) -> usize {
        (0..self.n).filter(|&i| self.is_up(i)).count()
    }
}

impl fmt::Display for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            f.write_str(if self.is_up(i) { "↑" } else { "↓" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpinConfiguration({self})")
    }
}

fn log2_exact(n: usize) -> Result<u32> {
    if !is_power_of_two(n) {
        return Err(Error::InvalidSize { n, reason: "must be a power of two" });
    }
    Ok(n.trailing_zeros())
}

/// Bit reversal of `i` over `log2(n)` bits.
pub fn monna_map(n: usize, i: usize) -> Result<usize> {
    let bits = log2_exact(n)?;
    if i >= n {
        return Err(Error::IndexError { index: i, n });
    }
    if bits == 0 {
        return Ok(0);
    }
    Ok(i.reverse_bits() >> (usize::BITS - bits))
}

/// `perm[i] = monna_map(n, i)` for every site.
pub fn monna_permutation(n: usize) -> Result<Vec<usize>> {
    (0..n).map(|i| monna_map(n, i)).collect()
}

/// `g(2) = ↑↓`, `g(2k) = g(k) ++ inverse(g(k))`; site `i` is up iff
/// `popcount(i)` is even.
pub fn recursive_ground_state(n: usize) -> Result<SpinConfiguration> {
    log2_exact(n)?;
    if n < 2 {
        return Err(Error::InvalidSize { n, reason: "must be at least 2" });
    }
    let mut c = SpinConfiguration::all_down(n);
    for i in 0..n {
        c.set(i, i.count_ones() % 2 == 0);
    }
    Ok(c)
}

/// Euclidean Néel state, up on even sites.
pub fn euclidean_afm(n: usize) -> SpinConfiguration {
    let mut c = SpinConfiguration::all_down(n);
    for i in (0..n).step_by(2) {
        c.set(i, true);
    }
    c
}

/// The Euclidean AFM carried through the Monna permutation: first half up,
/// second half down.
pub fn monna_afm(n: usize) -> Result<SpinConfiguration> {
    Ok(euclidean_afm(n).permuted(&monna_permutation(n)?))
}

/// `2^-v` with `v` the 2-adic valuation of `(i - j) mod n`; zero on the diagonal.
pub fn two_adic_distance(n: usize, i: usize, j: usize) -> Result<f64> {
    log2_exact(n)?;
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexError { index: idx, n });
        }
    }
    if i == j {
        return Ok(0.0);
    }
    let diff = (i + n - j) % n;
    Ok(0.5f64.powi(diff.trailing_zeros() as i32))
}

/// Dense symmetric distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    dist: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::SizeMismatch { expected: n, got: row.len() });
            }
            if row[i] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
            }
            dist.extend_from_slice(row);
        }
        let m = Self { n, dist };
        for i in 0..n {
            for j in 0..i {
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::InvalidInput(format!("asymmetric entry ({i},{j})")));
                }
            }
        }
        Ok(m)
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { n: self.n, dist: self.dist.iter().map(|d| d * factor).collect() }
    }
}

/// How coupling strengths become node distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    /// Complete the edge lengths with all-pairs shortest paths; otherwise
    /// uncoupled pairs are infinitely far apart.
    pub shortest_path: bool,
    /// Edge length is `|coupling|^-exponent`.
    pub exponent: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { shortest_path: true, exponent: 1.0 }
    }
}

impl MetricOptions {
    fn edge_length(&self, coupling: f64) -> f64 {
        coupling.abs().powf(-self.exponent)
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from `source`, stopping once `limit` nodes (source included) are
/// settled. Returns `(node, distance)` in settling order.
pub(crate) fn dijkstra(
    g: &CouplingGraph,
    source: usize,
    limit: usize,
    opts: &MetricOptions,
) -> Vec<(usize, f64)> {
    let n = g.n_sites();
    let mut best = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut settled = Vec::with_capacity(limit.min(n));
    let mut heap = BinaryHeap::new();
    best[source] = 0.0;
    heap.push(HeapItem { dist: 0.0, node: source });
    while let Some(HeapItem { dist, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        settled.push((node, dist));
        if settled.len() >= limit {
            break;
        }
        for &(nb, c) in g.neighbors(node) {
            if c == 0.0 || done[nb] {
                continue;
            }
            let cand = dist + opts.edge_length(c);
            if cand < best[nb] {
                best[nb] = cand;
                heap.push(HeapItem { dist: cand, node: nb });
            }
        }
    }
    settled
}

/// Inverse-coupling shortest-path metric.
pub fn graph_metric(g: &CouplingGraph) -> Result<DistanceMatrix> {
    graph_metric_with(g, &MetricOptions::default())
}

pub fn graph_metric_with(g: &CouplingGraph, opts: &MetricOptions) -> Result<DistanceMatrix> {
    use rayon::prelude::*;
    let n = g.n_sites();
    let rows: Vec<Vec<f64>> = if opts.shortest_path {
        (0..n)
            .into_par_iter()
            .map(|src| {
                let mut row = vec![f64::INFINITY; n];
                for (node, d) in dijkstra(g, src, n, opts) {
                    row[node] = d;
                }
                row
            })
            .collect()
    } else {
        (0..n)
            .map(|i| {
                let mut row = vec![f64::INFINITY; n];
                row[i] = 0.0;
                for &(j, c) in g.neighbors(i) {
                    if c != 0.0 {
                        row[j] = opts.edge_length(c);
                    }
                }
                row
            })
            .collect()
    };
    if opts.shortest_path {
        if let Some(site) = rows[0].iter().position(|d| !d.is_finite()) {
            return Err(Error::DisconnectedGraph { site });
        }
    }
    Ok(DistanceMatrix { n, dist: rows.concat() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pwr2_coupling_values() {
        let g = build_pwr2_couplings(8, 0.0, 1.0).unwrap();
        for d in [1, 2, 4] {
            assert_eq!(g.coupling(0, d), 1.0);
        }
        assert_eq!(g.coupling(0, 3), 0.0);

        let g = build_pwr2_couplings(8, 1.0, 1.0).unwrap();
        assert_relative_eq!(g.coupling(0, 1), 0.25);
        assert_relative_eq!(g.coupling(0, 2), 0.5);
        assert_relative_eq!(g.coupling(0, 4), 1.0);

        let g = build_pwr2_couplings(16, -2.0, 1.0).unwrap();
        assert_eq!(g.coupling(3, 4), 1.0);
        assert_eq!(g.coupling(3, 5), 0.25);
        assert_eq!(g.coupling(3, 7), 0.0625);
        assert_eq!(g.coupling(3, 11), 0.015625);
    }

    #[test]
    fn pair_once_edge_count() {
        for n in [4usize, 8, 16, 64] {
            let g = build_pwr2_couplings(n, 0.3, 1.0).unwrap();
            let levels = n.trailing_zeros() as usize;
            assert_eq!(g.edges().len(), n * (levels - 1) + n / 2);
            let far = g.edges().iter().filter(|e| e.j - e.i == n / 2).count();
            assert_eq!(far, n / 2);
        }
    }

    #[test]
    fn pwr2_rejects_bad_sizes() {
        assert!(matches!(build_pwr2_couplings(12, 0.0, 1.0), Err(Error::InvalidSize { .. })));
        assert!(matches!(build_pwr2_couplings(2, 0.0, 1.0), Err(Error::InvalidSize { .. })));
    }

    #[test]
    fn monna_examples() {
        assert_eq!(monna_map(8, 0).unwrap(), 0);
        assert_eq!(monna_map(8, 1).unwrap(), 4);
        assert_eq!(monna_map(8, 3).unwrap(), 6);
        assert!(matches!(monna_map(8, 8), Err(Error::IndexError { .. })));
    }

    #[test]
    fn monna_is_involution_up_to_2_16() {
        for bits in 0..=16 {
            let n = 1usize << bits;
            for i in 0..n {
                assert_eq!(monna_map(n, monna_map(n, i).unwrap()).unwrap(), i);
            }
        }
    }

    #[test]
    fn monna_afm_is_half_up_half_down() {
        for n in [4usize, 8, 16, 32] {
            let c = monna_afm(n).unwrap();
            for i in 0..n {
                assert_eq!(c.is_up(i), i < n / 2, "n={n} site {i}");
            }
        }
    }

    #[test]
    fn recursive_state_listing() {
        assert_eq!(recursive_ground_state(2).unwrap().to_string(), "↑↓");
        assert_eq!(recursive_ground_state(4).unwrap().to_string(), "↑↓↓↑");
        assert_eq!(recursive_ground_state(8).unwrap().to_string(), "↑↓↓↑↓↑↑↓");
        assert_eq!(
            recursive_ground_state(16).unwrap().to_string(),
            "↑↓↓↑↓↑↑↓↓↑↑↓↑↓↓↑"
        );
        assert!(recursive_ground_state(6).is_err());
    }

    #[test]
    fn recursive_state_properties() {
        for bits in 1..=10 {
            let n = 1usize << bits;
            let g = recursive_ground_state(n).unwrap();
            for i in 0..n / 2 {
                assert_ne!(g.is_up(i), g.is_up(i + n / 2));
            }
            if n >= 4 {
                let half = recursive_ground_state(n / 2).unwrap();
                for i in 0..n / 2 {
                    assert_eq!(g.is_up(i), half.is_up(i));
                }
            }
        }
    }

    #[test]
    fn two_adic_examples() {
        assert_eq!(two_adic_distance(8, 0, 4).unwrap(), 0.25);
        assert_eq!(two_adic_distance(8, 0, 3).unwrap(), 1.0);
        assert_eq!(two_adic_distance(8, 2, 2).unwrap(), 0.0);
        assert!(two_adic_distance(8, 9, 2).is_err());
    }

    #[test]
    fn metric_examples() {
        let m = graph_metric(&build_pwr2_couplings(8, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(m.get(0, 3), 2.0);
        assert_eq!(m.get(0, 4), 1.0);
        let m = graph_metric(&build_pwr2_couplings(8, -12.0, 1.0).unwrap()).unwrap();
        assert_eq!(m.get(0, 4), 4.0);
        for i in 0..8 {
            assert_eq!(m.get(i, i), 0.0);
        }
    }

    #[test]
    fn metric_triangle_inequality() {
        for s in [-4.0, -1.5, 0.0, 0.7, 3.0] {
            for n in [8usize, 32, 64] {
                let m = graph_metric(&build_pwr2_couplings(n, s, 1.0).unwrap()).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        assert_eq!(m.get(i, j), m.get(j, i));
                        for k in 0..n {
                            assert!(m.get(i, j) <= m.get(i, k) + m.get(k, j) + 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn disconnected_graph_is_reported() {
        let g = CouplingGraph::from_edges(
            4,
            [Edge { i: 0, j: 1, coupling: 1.0 }, Edge { i: 2, j: 3, coupling: 1.0 }],
            GraphKind::PowerLawRing,
            ControlParam::S(0.0),
            SignConvention::AfmFavoring,
        )
        .unwrap();
        assert!(matches!(graph_metric(&g), Err(Error::DisconnectedGraph { .. })));
    }

    #[test]
    fn max_coupling_for_positive_s() {
        for n in [8usize, 16, 128] {
            for s in [0.1, 1.0, 4.5] {
                let g = build_pwr2_couplings(n, s, 1.0).unwrap();
                assert_eq!(g.max_abs_coupling(), 1.0);
                for e in g.edges() {
                    if e.coupling == 1.0 {
                        assert_eq!(e.j - e.i, n / 2);
                    }
                }
            }
        }
    }

    #[test]
    fn truncated_ring_and_pair_once_at_n2() {
        let g = build_ring_couplings(2, &[1], 0.0, 1.0, SignConvention::AfmFavoring).unwrap();
        assert_eq!(g.edges().len(), 1);
        let g = build_ring_couplings(16, &[1], -3.0, 1.0, SignConvention::AfmFavoring).unwrap();
        assert_eq!(g.edges().len(), 16);
        assert_eq!(g.coupling(15, 0), 1.0);
    }

    #[test]
    fn fm_sign_flips_couplings() {
        let g = build_pwr2_couplings_signed(8, -1.0, 1.0, SignConvention::FmFavoring).unwrap();
        assert_eq!(g.coupling(0, 1), -1.0);
        assert_eq!(g.sign(), SignConvention::FmFavoring);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let g = build_pwr2_couplings(16, 0.37, 1.0).unwrap();
        g.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("i,j,coupling\n"));
        assert_eq!(CouplingGraph::load(&path).unwrap(), g);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn monna_is_an_involution(bits in 1u32..14, seed in any::<usize>()) {
            let n = 1usize << bits;
            let i = seed % n;
            prop_assert_eq!(monna_map(n, monna_map(n, i).unwrap()).unwrap(), i);
        }

        #[test]
        fn recursive_state_satisfies_antipodal_bonds(bits in 1u32..12) {
            let n = 1usize << bits;
            let g = recursive_ground_state(n).unwrap();
            for i in 0..n / 2 {
                prop_assert_ne!(g.is_up(i), g.is_up(i + n / 2));
            }
        }

        #[test]
        fn pwr2_couplings_are_translation_invariant(bits in 2u32..8, s in -6.0f64..6.0, shift in 0usize..256) {
            let n = 1usize << bits;
            let g = build_pwr2_couplings(n, s, 1.0).unwrap();
            let t = shift % n;
            for e in g.edges() {
                let (a, b) = ((e.i + t) % n, (e.j + t) % n);
                prop_assert_eq!(g.coupling(a, b), e.coupling);
                prop_assert_eq!(g.coupling(b, a), e.coupling);
            }
        }
    }
}
