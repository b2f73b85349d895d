//! Pairwise finite-size scaling: Phi-curve crossings, nu and z estimates,
//! thermodynamic extrapolation with leave-one-out systematics, and
//! central-charge fits.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::graph::{build_pwr2_couplings, build_ring_couplings, SignConvention};
use crate::quantum::{
    build_hamiltonian, build_hamiltonian_in_sector, correlations, ground_and_gap, ground_state,
    lowest_eigenpairs, second_moment_xi, spectral_gap, EigenSolution, HamiltonianSpec, LanczosOptions,
    Sector, XiFlag,
};
use crate::rydgeo::{rydberg_couplings, species_pattern, tambourine_positions};

/// A value with its one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveSource {
    Ed,
    ExternalFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiCurve {
    pub n: usize,
    pub grid: Vec<f64>,
    pub phi: Vec<f64>,
    /// Lowest gap per point when known.
    pub gap: Vec<Option<f64>>,
    pub sources: Vec<CurveSource>,
    /// Control values dropped because xi hit a sentinel.
    #[serde(default)]
    pub excluded: Vec<f64>,
}

impl PhiCurve {
    pub fn new(n: usize, grid: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let len = grid.len();
        let c = Self {
            n,
            grid,
            phi,
            gap: vec![None; len],
            sources: vec![CurveSource::ExternalFile; len],
            excluded: Vec::new(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.grid.len();
        if self.phi.len() != len || self.gap.len() != len || self.sources.len() != len {
            return Err(Error::SizeMismatch { expected: len, got: self.phi.len() });
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("curve grid must be strictly ascending".into()));
        }
        if let Some(p) = self.phi.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput(format!("phi value {p} is not a finite non-negative number")));
        }
        Ok(())
    }

    /// Writes `n,control,phi,gap` and a JSON sidecar; returns the sidecar path.
    pub fn save(&self, csv_path: &Path) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(csv_path)?));
        w.write_record(["n", "control", "phi", "gap"])?;
        for i in 0..self.grid.len() {
            w.write_record([
                self.n.to_string(),
                fmt_f64(self.grid[i]),
                fmt_f64(self.phi[i]),
                self.gap[i].map(fmt_f64).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        let side = csv_path.with_extension("json");
        let meta = CurveSidecar { n: self.n, sources: self.sources.clone(), excluded: self.excluded.clone() };
        serde_json::to_writer_pretty(BufWriter::new(File::create(&side)?), &meta)?;
        Ok(side)
    }

    /// Reads a curve CSV; the sidecar is optional.
    pub fn load(csv_path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_reader(BufReader::new(File::open(csv_path)?));
        let (mut n, mut grid, mut phi, mut gap) = (None, Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            let field = |k: usize| rec.get(k).unwrap_or("").trim().to_string();
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidInput(format!("{s:?}: {e}")));
            let rn: usize = field(0).parse().map_err(|e| Error::InvalidInput(format!("bad n: {e}")))?;
            if *n.get_or_insert(rn) != rn {
                return Err(Error::InvalidInput("curve file mixes system sizes".into()));
            }
            grid.push(parse(&field(1))?);
            phi.push(parse(&field(2))?);
            let g = field(3);
            gap.push(if g.is_empty() { None } else { Some(parse(&g)?) });
        }
        let n = n.ok_or_else(|| Error::InvalidInput("empty curve file".into()))?;
        let side = csv_path.with_extension("json");
        let (sources, excluded) = if side.exists() {
            let meta: CurveSidecar = serde_json::from_reader(BufReader::new(File::open(&side)?))?;
            (meta.sources, meta.excluded)
        } else {
            (vec![CurveSource::ExternalFile; grid.len()], Vec::new())
        };
        let c = Self { n, grid, phi, gap, sources, excluded };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CurveSidecar {
    n: usize,
    sources: Vec<CurveSource>,
    excluded: Vec<f64>,
}

/// Model whose ground states feed a Phi curve, with the scanned parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelFamily {
    /// PWR2 graph scanned in `s` at fixed field.
    Pwr2S { b_field: f64, j: f64 },
    /// Ring over `distances` at fixed `s`, scanned in the field.
    RingField { distances: Vec<usize>, s: f64, j: f64 },
    /// Tambourine array scanned in `h` at fixed field.
    TambourineH { b_field: f64, dual: bool },
}

impl ModelFamily {
    pub fn nearest_neighbour_chain() -> Self {
        ModelFamily::RingField { distances: vec![1], s: 0.0, j: 1.0 }
    }

    pub fn hamiltonian_spec(&self, n: usize, control: f64) -> Result<HamiltonianSpec> {
        Ok(match self {
            ModelFamily::Pwr2S { b_field, j } => HamiltonianSpec::new(build_pwr2_couplings(n, control, *j)?, *b_field),
            ModelFamily::RingField { distances, s, j } => HamiltonianSpec::new(
                build_ring_couplings(n, distances, *s, *j, SignConvention::AfmFavoring)?,
                control,
            ),
            ModelFamily::TambourineH { b_field, dual } => {
                let pos = tambourine_positions(n, control)?;
                let species = if *dual { Some(species_pattern(n)?) } else { None };
                HamiltonianSpec::new(rydberg_couplings(&pos, species.as_ref())?, *b_field)
            }
        })
    }
}

/// Lowest gap with degenerate levels excluded. Flip sectors are solved
/// separately when the symmetry holds.
pub fn lowest_gap(spec: &HamiltonianSpec, opts: &LanczosOptions) -> Result<f64> {
    let n = spec.graph.n_sites();
    if spec.detuning != 0.0 || n % 2 == 1 {
        return ground_and_gap(&build_hamiltonian(spec)?, opts).map(|p| p.1);
    }
    let even = lowest_eigenpairs(&build_hamiltonian_in_sector(spec, Sector::Even)?, 2, opts)?;
    let odd = lowest_eigenpairs(&build_hamiltonian_in_sector(spec, Sector::Odd)?, 2, opts)?;
    let mut energies: Vec<f64> = even.energies.iter().chain(&odd.energies).copied().collect();
    energies.sort_by(f64::total_cmp);
    let merged = EigenSolution { residuals: vec![0.0; energies.len()], states: Vec::new(), energies };
    match spectral_gap(&merged, None) {
        Err(Error::ManifoldNotExited(_)) => ground_and_gap(&build_hamiltonian(spec)?, opts).map(|p| p.1),
        other => other,
    }
}

/// `xi(pi) / n` and the gap at each grid point from exact diagonalization.
pub fn phi_curve(family: &ModelFamily, n: usize, grid: &[f64], opts: &LanczosOptions) -> Result<PhiCurve> {
    let points = grid
        .par_iter()
        .map(|&x| -> Result<(f64, Option<f64>, f64)> {
            let spec = family.hamiltonian_spec(n, x)?;
            let (_, psi) = ground_state(&spec, opts)?;
            let xi = second_moment_xi(&correlations(&psi)?, std::f64::consts::PI)?;
            let gap = lowest_gap(&spec, opts)?;
            Ok((x, (xi.flag == XiFlag::Finite).then_some(xi.xi / n as f64), gap))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut curve = PhiCurve {
        n,
        grid: Vec::new(),
        phi: Vec::new(),
        gap: Vec::new(),
        sources: Vec::new(),
        excluded: Vec::new(),
    };
    for (x, phi, gap) in points {
        match phi {
            Some(p) => {
                curve.grid.push(x);
                curve.phi.push(p);
                curve.gap.push(Some(gap));
                curve.sources.push(CurveSource::Ed);
            }
            None => curve.excluded.push(x),
        }
    }
    curve.validate()?;
    Ok(curve)
}

/// Fritsch-Carlson monotone cubic interpolant.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let m = x.len();
        if m < 2 || y.len() != m {
            return Err(Error::InvalidInput("interpolation needs two or more matching points".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..m - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; m];
        d[0] = delta[0];
        d[m - 1] = delta[m - 2];
        for k in 1..m - 1 {
            if delta[k - 1] * delta[k] <= 0.0 {
                d[k] = 0.0;
            } else {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        // end slopes must not overshoot
        for (k, nb) in [(0, 0), (m - 1, m - 2)] {
            if d[k] * delta[nb] <= 0.0 {
                d[k] = 0.0;
            } else if d[k].abs() > 3.0 * delta[nb].abs() {
                d[k] = 3.0 * delta[nb];
            }
        }
        Ok(Self { x: x.to_vec(), y: y.to_vec(), d })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let m = self.x.len();
        let k = self.x.partition_point(|&v| v <= t).clamp(1, m - 1) - 1;
        let h = self.x[k + 1] - self.x[k];
        let u = (t - self.x[k]) / h;
        let (h00, h10) = ((1.0 + 2.0 * u) * (1.0 - u).powi(2), u * (1.0 - u).powi(2));
        let (h01, h11) = (u * u * (3.0 - 2.0 * u), u * u * (u - 1.0));
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

const CROSSING_TOL: f64 = 1e-10;

/// Crossing of two curves on a shared grid whose sizes differ by 2x.
/// Sigma is the distance between the cubic root and the secant root of the
/// bracketing cell.
pub fn find_crossing(a: &PhiCurve, b: &PhiCurve) -> Result<Estimate> {
    if a.grid != b.grid {
        return Err(Error::InvalidInput("curves must share a control grid".into()));
    }
    if !(a.n == 2 * b.n || b.n == 2 * a.n) {
        return Err(Error::InvalidInput(format!("sizes {} and {} do not differ by 2x", a.n, b.n)));
    }
    let ia = MonotoneCubic::new(&a.grid, &a.phi)?;
    let ib = MonotoneCubic::new(&b.grid, &b.phi)?;
    let diff: Vec<f64> = a.phi.iter().zip(&b.phi).map(|(x, y)| x - y).collect();
    let f = |t: f64| ia.eval(t) - ib.eval(t);
    let grid = &a.grid;

    let mut roots = Vec::new();
    let mut last: Option<usize> = None;
    for k in 0..diff.len() {
        if diff[k] == 0.0 {
            continue;
        }
        if let Some(p) = last {
            if diff[p].signum() != diff[k].signum() {
                roots.push(root_in_cell(&f, grid, &diff, p, k));
            }
        }
        last = Some(k);
    }
    match roots.len() {
        0 => Err(Error::NoCrossing),
        1 => Ok(roots[0]),
        _ => Err(Error::AmbiguousCrossing(roots.iter().map(|r| r.value).collect())),
    }
}

fn root_in_cell(f: &impl Fn(f64) -> f64, grid: &[f64], diff: &[f64], p: usize, k: usize) -> Estimate {
    // an exact zero strictly inside the bracket is the crossing
    if let Some(z) = (p + 1..k).find(|&i| diff[i] == 0.0) {
        return Estimate { value: grid[z], sigma: 0.0 };
    }
    let (mut lo, mut hi) = (grid[p], grid[k]);
    let secant = lo - diff[p] * (hi - lo) / (diff[k] - diff[p]);
    let sign_lo = diff[p].signum();
    while hi - lo > CROSSING_TOL {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    Estimate { value: root, sigma: (root - secant).abs() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FssOptions {
    /// Half-width of the scaled fit window.
    pub x_win: f64,
    pub nu_guess: f64,
    /// Statistical floor assigned to z.
    pub z_floor: f64,
}

impl Default for FssOptions {
    fn default() -> Self {
        Self { x_win: 0.5, nu_guess: 1.0, z_floor: 0.01 }
    }
}

/// Ordinary least squares `y = c0 + c1 x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_se: f64,
    pub slope_se: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let m = x.len();
    if m < 3 || y.len() != m {
        return Err(Error::WindowTooNarrow { got: m, need: 3 });
    }
    let mf = m as f64;
    let xm = x.iter().sum::<f64>() / mf;
    let ym = y.iter().sum::<f64>() / mf;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::FitFailure("abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let s2 = ssr / (mf - 2.0);
    Ok(LineFit {
        intercept,
        slope,
        slope_se: (s2 / sxx).sqrt(),
        intercept_se: (s2 * (1.0 / mf + xm * xm / sxx)).sqrt(),
    })
}

const MIN_WINDOW_POINTS: usize = 4;

fn window_slope(c: &PhiCurve, crossing: f64, x_win: f64, nu_guess: f64) -> Result<LineFit> {
    let scale = (c.n as f64).powf(1.0 / nu_guess);
    let (xs, ys): (Vec<f64>, Vec<f64>) = c
        .grid
        .iter()
        .zip(&c.phi)
        .filter(|(s, _)| ((**s - crossing) * scale).abs() <= x_win)
        .map(|(s, p)| (*s, *p))
        .unzip();
    if xs.len() < MIN_WINDOW_POINTS {
        return Err(Error::WindowTooNarrow { got: xs.len(), need: MIN_WINDOW_POINTS });
    }
    line_fit(&xs, &ys)
}

/// `nu = 1 / log2(slope_2n / slope_n)` from window regressions at the
/// crossing, with the slope errors propagated.
pub fn estimate_nu(a: &PhiCurve, b: &PhiCurve, crossing: f64, x_win: f64, nu_guess: f64) -> Result<Estimate> {
    let (small, big) = if a.n < b.n { (a, b) } else { (b, a) };
    let fs = window_slope(small, crossing, x_win, nu_guess)?;
    let fb = window_slope(big, crossing, x_win, nu_guess)?;
    let ratio = fb.slope / fs.slope;
    if !(ratio > 0.0) || ratio == 1.0 || !ratio.is_finite() {
        return Err(Error::FitFailure(format!("slope ratio {ratio} gives no exponent")));
    }
    let inv = ratio.log2();
    let sigma_inv = ((fb.slope_se / fb.slope).powi(2) + (fs.slope_se / fs.slope).powi(2)).sqrt()
        / std::f64::consts::LN_2;
    Ok(Estimate { value: 1.0 / inv, sigma: sigma_inv / (inv * inv) })
}

/// `z = -log2(gap_2n / gap_n)` with the statistical floor as sigma.
pub fn estimate_z(gap_n: f64, gap_2n: f64, floor: f64) -> Result<Estimate> {
    for g in [gap_n, gap_2n] {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::InvalidGap(g));
        }
    }
    Ok(Estimate { value: -(gap_2n / gap_n).log2(), sigma: floor })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingEstimate {
    pub pair: (usize, usize),
    pub critical_point: Estimate,
    pub nu: Estimate,
    pub z: Option<Estimate>,
    /// `sqrt(n * 2n)`.
    pub m_eff: f64,
}

/// Crossing and exponents for one size pair. Gaps at the crossing are taken
/// from `gaps` if given, otherwise interpolated from the curves.
pub fn pairwise_scaling(a: &PhiCurve, b: &PhiCurve, gaps: Option<(f64, f64)>, opts: &FssOptions) -> Result<ScalingEstimate> {
    let (small, big) = if a.n < b.n { (a, b) } else { (b, a) };
    let crossing = find_crossing(small, big)?;
    let nu = estimate_nu(small, big, crossing.value, opts.x_win, opts.nu_guess)?;
    let gaps = match gaps {
        Some(g) => Some(g),
        None => match (interpolated_gap(small, crossing.value)?, interpolated_gap(big, crossing.value)?) {
            (Some(x), Some(y)) => Some((x, y)),
            _ => None,
        },
    };
    let z = gaps.map(|(gs, gb)| estimate_z(gs, gb, opts.z_floor)).transpose()?;
    Ok(ScalingEstimate {
        pair: (small.n, big.n),
        critical_point: crossing,
        nu,
        z,
        m_eff: ((small.n * big.n) as f64).sqrt(),
    })
}

fn interpolated_gap(c: &PhiCurve, at: f64) -> Result<Option<f64>> {
    if c.gap.iter().any(|g| g.is_none()) {
        return Ok(None);
    }
    let g: Vec<f64> = c.gap.iter().map(|g| g.unwrap()).collect();
    Ok(Some(MonotoneCubic::new(&c.grid, &g)?.eval(at)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exponent {
    Nu,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationResult {
    pub y_inf: f64,
    pub a: f64,
    pub omega: f64,
    pub sigma_stat: f64,
    pub sigma_sys: f64,
    pub sigma_final: f64,
    pub chi2: f64,
    pub pairs_used: Vec<(usize, usize)>,
}

const OMEGA_MAX: f64 = 4.0;
const OMEGA_GRID: usize = 4000;
const OMEGA_RESOLVED_CHI2: f64 = 1.0;

struct FixedOmegaFit {
    y_inf: f64,
    a: f64,
    chi2: f64,
    se: f64,
}

fn fit_fixed_omega(pts: &[(f64, f64, f64)], omega: f64) -> Option<FixedOmegaFit> {
    let (mut s0, mut s1, mut s2, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(n, y, w) in pts {
        let t = n.powf(-omega);
        s0 += w;
        s1 += w * t;
        s2 += w * t * t;
        sy += w * y;
        sty += w * t * y;
    }
    let det = s0 * s2 - s1 * s1;
    if !(det.abs() > 0.0) || !det.is_finite() {
        return None;
    }
    let y_inf = (s2 * sy - s1 * sty) / det;
    let a = (s0 * sty - s1 * sy) / det;
    let chi2 = pts.iter().map(|&(n, y, w)| w * (y - y_inf - a * n.powf(-omega)).powi(2)).sum();
    Some(FixedOmegaFit { y_inf, a, chi2, se: (s2 / det).sqrt() })
}

/// Weighted fit of `y = y_inf + a n^-omega` over `(n_eff, y, sigma)`, with
/// omega profiled on `(0, 4]`.
pub fn fit_power_correction(data: &[(f64, f64, f64)]) -> Result<(f64, f64, f64, f64, f64)> {
    if data.len() < 3 {
        return Err(Error::InsufficientPairs { got: data.len(), need: 3 });
    }
    // unit weights when any uncertainty vanishes
    let weighted = data.iter().all(|p| p.2 > 0.0 && p.2.is_finite());
    let pts: Vec<(f64, f64, f64)> =
        data.iter().map(|&(n, y, s)| (n, y, if weighted { 1.0 / (s * s) } else { 1.0 })).collect();
    let chi = |w: f64| fit_fixed_omega(&pts, w).map(|f| f.chi2).unwrap_or(f64::INFINITY);
    let step = OMEGA_MAX / OMEGA_GRID as f64;
    let profile: Vec<f64> = (1..=OMEGA_GRID).map(|k| chi(k as f64 * step)).collect();
    let (kbest, &cbest) = profile
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid");
    if !cbest.is_finite() {
        return Err(Error::FitFailure("no omega gives a solvable fit".into()));
    }
    let omega = {
        let (mut lo, mut hi) = ((kbest as f64 * step).max(step * 1e-3), ((kbest + 2) as f64 * step).min(OMEGA_MAX));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut d) = (hi - g * (hi - lo), lo + g * (hi - lo));
        let (mut fc, mut fd) = (chi(c), chi(d));
        for _ in 0..200 {
            if fc <= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - g * (hi - lo);
                fc = chi(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + g * (hi - lo);
                fd = chi(d);
            }
        }
        let w = 0.5 * (lo + hi);
        let (w, cmin) = if chi(w) <= cbest { (w, chi(w)) } else { ((kbest + 1) as f64 * step, cbest) };
        // omega stays at 1 unless the data resolve it at one sigma
        if chi(1.0) - cmin > OMEGA_RESOLVED_CHI2 { w } else { 1.0 }
    };
    let fit = fit_fixed_omega(&pts, omega).ok_or_else(|| Error::FitFailure(format!("singular fit at omega {omega}")))?;
    Ok((fit.y_inf, fit.a, omega, fit.se, fit.chi2))
}

fn exponent_points(estimates: &[ScalingEstimate], which: Exponent) -> Result<Vec<(f64, f64, f64)>> {
    estimates
        .iter()
        .map(|e| {
            let v = match which {
                Exponent::Nu => e.nu,
                Exponent::Z => e.z.ok_or_else(|| Error::InvalidInput(format!("pair {:?} has no z estimate", e.pair)))?,
            };
            Ok((e.m_eff, v.value, v.sigma))
        })
        .collect()
}

/// Thermodynamic value of `nu` or `z` from at least three size pairs.
pub fn extrapolate_exponent(estimates: &[ScalingEstimate], which: Exponent) -> Result<ExtrapolationResult> {
    if estimates.len() < 3 {
        return Err(Error::InsufficientPairs { got: estimates.len(), need: 3 });
    }
    let pts = exponent_points(estimates, which)?;
    let (y_inf, a, omega, se, chi2) = fit_power_correction(&pts)?;
    Ok(ExtrapolationResult {
        y_inf,
        a,
        omega,
        sigma_stat: se,
        sigma_sys: 0.0,
        sigma_final: se,
        chi2,
        pairs_used: estimates.iter().map(|e| e.pair).collect(),
    })
}

/// Extrapolation with the leave-one-out systematic added in quadrature.
pub fn leave_one_out_systematics(estimates: &[ScalingEstimate], which: Exponent) -> Result<ExtrapolationResult> {
    if estimates.len() < 4 {
        return Err(Error::InsufficientPairs { got: estimates.len(), need: 4 });
    }
    let mut sorted = estimates.to_vec();
    sorted.sort_by(|a, b| a.m_eff.total_cmp(&b.m_eff));
    let mut all = extrapolate_exponent(&sorted, which)?;
    let drop_small = extrapolate_exponent(&sorted[1..], which)?;
    let drop_large = extrapolate_exponent(&sorted[..sorted.len() - 1], which)?;
    all.sigma_sys = (all.y_inf - drop_small.y_inf).abs().max((all.y_inf - drop_large.y_inf).abs());
    all.sigma_final = all.sigma_stat.hypot(all.sigma_sys);
    Ok(all)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralCharge {
    pub c: f64,
    pub delta_c: f64,
    pub window: (usize, usize),
}

/// `ln[(n/pi) sin(pi l/n)]`.
pub fn chord_log(n: usize, l: usize) -> f64 {
    let nf = n as f64;
    (nf / std::f64::consts::PI * (std::f64::consts::PI * l as f64 / nf).sin()).ln()
}

/// OLS of `S(l)` against the chord log; `profile[l - 1] = S(l)`. The default
/// window is `[log2 n, n - log2 n]` cut at `n/2`.
pub fn central_charge_fit(profile: &[f64], n: usize, window: Option<(usize, usize)>) -> Result<CentralCharge> {
    let top = (n / 2).min(profile.len());
    let (lo, hi) = window.unwrap_or_else(|| {
        let lg = (n as f64).log2().floor() as usize;
        (lg.max(1), n.saturating_sub(lg).min(n / 2))
    });
    if lo < 1 || hi > top || lo > hi {
        return Err(Error::InvalidInput(format!("window [{lo}, {hi}] outside [1, {top}]")));
    }
    if hi - lo + 1 < 3 {
        return Err(Error::WindowTooNarrow { got: hi - lo + 1, need: 3 });
    }
    let xs: Vec<f64> = (lo..=hi).map(|l| chord_log(n, l)).collect();
    let ys: Vec<f64> = (lo..=hi).map(|l| profile[l - 1]).collect();
    let fit = line_fit(&xs, &ys)?;
    Ok(CentralCharge { c: 3.0 * fit.slope, delta_c: 3.0 * fit.slope_se, window: (lo, hi) })
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn line_curve(n: usize, grid: &[f64], x0: f64, slope: f64) -> PhiCurve {
        PhiCurve::new(n, grid.to_vec(), grid.iter().map(|s| 20.0 + slope * (s - x0)).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn crossing_is_symmetric(x0 in -0.9f64..0.9, s1 in 0.1f64..2.0, ds in 0.1f64..2.0) {
            let g: Vec<f64> = (0..=40).map(|k| -1.0 + 0.05 * k as f64).collect();
            let a = line_curve(8, &g, x0, s1);
            let b = line_curve(16, &g, x0, s1 + ds);
            let c = find_crossing(&a, &b).unwrap();
            prop_assert_eq!(c, find_crossing(&b, &a).unwrap());
            prop_assert!((c.value - x0).abs() < 1e-8);
        }

        #[test]
        fn nu_is_rescale_invariant(scale in 0.01f64..100.0, r in 1.2f64..3.5) {
            let g: Vec<f64> = (0..=200).map(|k| -0.1 + 0.001 * k as f64).collect();
            let a = line_curve(8, &g, 0.0, 1.0);
            let b = line_curve(16, &g, 0.0, r);
            let mut a2 = a.clone();
            let mut b2 = b.clone();
            a2.phi.iter_mut().for_each(|p| *p *= scale);
            b2.phi.iter_mut().for_each(|p| *p *= scale);
            let x = estimate_nu(&a, &b, 0.0, 0.5, 1.0).unwrap();
            let y = estimate_nu(&a2, &b2, 0.0, 0.5, 1.0).unwrap();
            prop_assert!((x.value - y.value).abs() < 1e-9 * x.value.abs());
        }

        #[test]
        fn central_charge_ignores_constant_shift(shift in -10.0f64..10.0, noise in proptest::collection::vec(-0.01f64..0.01, 32)) {
            let n = 64;
            let prof: Vec<f64> = (1..=32).map(|l| chord_log(n, l) / 6.0 + noise[l - 1]).collect();
            let shifted: Vec<f64> = prof.iter().map(|s| s + shift).collect();
            let a = central_charge_fit(&prof, n, None).unwrap();
            let b = central_charge_fit(&shifted, n, None).unwrap();
            prop_assert!((a.c - b.c).abs() < 1e-9);
        }
    }
}
