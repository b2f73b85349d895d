//! Tambourine ring geometry for Rydberg arrays and its mapping onto an
//! effective PWR2 exponent.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{is_power_of_two, ControlParam, CouplingGraph, Edge, GraphKind, SignConvention};

pub type Position = [f64; 3];

/// Bond lengths whose exponents are averaged into `s_eff`.
pub const MAPPING_BONDS: [usize; 3] = [2, 4, 8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    A,
    B,
}

impl Species {
    pub fn as_str(self) -> &'static str {
        match self {
            Species::A => "a",
            Species::B => "b",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesAssignment {
    pub n: usize,
    pub pattern: Vec<Species>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryMapping {
    pub n: usize,
    pub h: f64,
    pub positions: Vec<Position>,
    /// `d_tilde[k - 1]` for `k = 1..=n/2`.
    pub d_tilde: Vec<f64>,
    /// `v[k - 1] = d_tilde[k - 1]^-6`.
    pub v: Vec<f64>,
    /// `(k, s_k)` for the mapping bonds.
    pub s_k: Vec<(usize, f64)>,
    pub s_eff: f64,
}

impl GeometryMapping {
    pub fn d_tilde_at(&self, k: usize) -> f64 {
        self.d_tilde[k - 1]
    }

    pub fn v_at(&self, k: usize) -> f64 {
        self.v[k - 1]
    }

    pub fn s_at(&self, k: usize) -> Option<f64> {
        self.s_k.iter().find(|p| p.0 == k).map(|p| p.1)
    }

    /// Largest relative deviation of `V_k` from the PWR2 coupling `k^s_eff`
    /// over the mapping bonds.
    pub fn residual(&self) -> f64 {
        MAPPING_BONDS
            .iter()
            .map(|&k| {
                let pwr2 = (k as f64).powf(self.s_eff);
                (self.v_at(k) - pwr2).abs() / pwr2
            })
            .fold(0.0, f64::max)
    }
}

fn check_n(n: usize, min: usize) -> Result<()> {
    if !is_power_of_two(n) {
        return Err(Error::InvalidSize { n, reason: "must be a power of two" });
    }
    if n < min {
        return Err(Error::InvalidSize { n, reason: "ring too small for this quantity" });
    }
    Ok(())
}

fn check_h(h: f64) -> Result<()> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::InvalidDisplacement(h));
    }
    Ok(())
}

/// Ring of unit NN spacing in the x-y plane, odd sites raised by `h`.
pub fn tambourine_positions(n: usize, h: f64) -> Result<Vec<Position>> {
    check_n(n, 4)?;
    check_h(h)?;
    let r = 0.5 / (PI / n as f64).sin();
    Ok((0..n)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / n as f64;
            let z = if i % 2 == 1 { h } else { 0.0 };
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect())
}

/// `d_k(h) / d_1(h)` with `d_k(0) = sin(pi k/n) / sin(pi/n)`.
pub fn chord_distance(n: usize, h: f64, k: usize) -> Result<f64> {
    check_n(n, 2)?;
    check_h(h)?;
    if k == 0 || k > n / 2 {
        return Err(Error::IndexError { index: k, n: n / 2 + 1 });
    }
    if k == 1 {
        return Ok(1.0);
    }
    let flat = (PI * k as f64 / n as f64).sin() / (PI / n as f64).sin();
    let raw = if k % 2 == 1 { (flat * flat + h * h).sqrt() } else { flat };
    Ok(raw / (1.0 + h * h).sqrt())
}

/// `d_tilde[k]` for `k = 1..=n/2`.
pub fn chord_distances(n: usize, h: f64) -> Result<Vec<f64>> {
    (1..=n / 2).map(|k| chord_distance(n, h, k)).collect()
}

/// Couplings, per-bond exponents and the averaged effective exponent.
pub fn s_of_h(n: usize, h: f64) -> Result<GeometryMapping> {
    check_n(n, 16)?;
    let positions = tambourine_positions(n, h)?;
    let d_tilde = chord_distances(n, h)?;
    let v: Vec<f64> = d_tilde.iter().map(|d| d.powi(-6)).collect();
    let s_k: Vec<(usize, f64)> = MAPPING_BONDS
        .iter()
        .map(|&k| (k, v[k - 1].ln() / (k as f64).ln()))
        .collect();
    let s_eff = s_k.iter().map(|p| p.1).sum::<f64>() / s_k.len() as f64;
    Ok(GeometryMapping { n, h, positions, d_tilde, v, s_k, s_eff })
}

/// Site `i` is species `a` iff `i` has an even number of set bits.
pub fn species_pattern(n: usize) -> Result<SpeciesAssignment> {
    check_n(n, 2)?;
    let pattern = (0..n)
        .map(|i: usize| if i.count_ones() % 2 == 0 { Species::A } else { Species::B })
        .collect();
    Ok(SpeciesAssignment { n, pattern })
}

fn dist(a: &Position, b: &Position) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Dense van der Waals couplings (`C6 = 1`) with distances measured in units
/// of `|r_0 - r_1|`. With species, cross-species pairs decay as `r^-3`.
pub fn rydberg_couplings(positions: &[Position], species: Option<&SpeciesAssignment>) -> Result<CouplingGraph> {
    let n = positions.len();
    if n < 2 {
        return Err(Error::InvalidSize { n, reason: "need at least two atoms" });
    }
    if let Some(sp) = species {
        if sp.pattern.len() != n {
            return Err(Error::SizeMismatch { expected: n, got: sp.pattern.len() });
        }
    }
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            if dist(&positions[i], &positions[j]) == 0.0 {
                return Err(Error::DegenerateGeometry(i, j));
            }
        }
    }
    let unit = dist(&positions[0], &positions[1]);
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(&positions[i], &positions[j]) / unit;
            let power = match species {
                Some(sp) if sp.pattern[i] != sp.pattern[j] => 3,
                _ => 6,
            };
            edges.push(Edge { i, j, coupling: d.powi(-power) });
        }
    }
    // h is recovered from the first bond: in-plane spacing vs lift
    let dz = (positions[1][2] - positions[0][2]).abs();
    let planar = (unit * unit - dz * dz).max(0.0).sqrt();
    let h = if planar > 0.0 { dz / planar } else { 0.0 };
    let kind = if species.is_some() { GraphKind::RydbergDual } else { GraphKind::RydbergTambourine };
    CouplingGraph::from_edges(n, edges, kind, ControlParam::H(h), SignConvention::AfmFavoring)
}
