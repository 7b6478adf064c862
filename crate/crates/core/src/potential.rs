//! Symbolic potential specifications a(x), b(x): constants, radially
//! γ-homogeneous wells ν|x−x₀|^γ, envelopes min{μ, ν|x−aᵢ|^γ}, flat
//! wells vanishing on a prescribed zone, and tabulated grid data.
//!
//! Every variant evaluates to a nonnegative value everywhere. Zero sets
//! are located numerically through [`zero_set_mask`].

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{sample, Field, GridSpec};
use crate::{Error, Result};

/// Region with a prescribed potential zero set: an axis-aligned box or
/// a ball.
#[derive(Debug, Clone, PartialEq)]
pub enum Zone {
    /// `lo[ax] ≤ x[ax] ≤ hi[ax]` per axis.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Zone {
    /// Euclidean distance from `x` to the zone (0 inside).
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Zone::Box { lo, hi } => {
                let mut d2 = 0.0;
                for ax in 0..x.len() {
                    let excess = if x[ax] < lo[ax] {
                        lo[ax] - x[ax]
                    } else if x[ax] > hi[ax] {
                        x[ax] - hi[ax]
                    } else {
                        0.0
                    };
                    d2 += excess * excess;
                }
                libm::sqrt(d2)
            }
            Zone::Ball { center, radius } => {
                let mut d2 = 0.0;
                for ax in 0..x.len() {
                    let d = x[ax] - center[ax];
                    d2 += d * d;
                }
                (libm::sqrt(d2) - radius).max(0.0)
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.distance(x) == 0.0
    }

    fn dim_ok(&self, dim: usize) -> bool {
        match self {
            Zone::Box { lo, hi } => lo.len() == dim && hi.len() == dim,
            Zone::Ball { center, .. } => center.len() == dim,
        }
    }
}

/// Symbolic description of one nonnegative potential.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Constant { tau: f64 },
    /// `ν |x - x0|^γ`.
    RadialHomogeneous { nu: f64, gamma: f64, x0: Vec<f64> },
    /// `min{μ, ν|x-a₁|^γ, …, ν|x-aₗ|^γ}`: the envelope lower bound for
    /// potentials vanishing with γ-homogeneous behaviour at finitely
    /// many points.
    Envelope { mu: f64, nu: f64, gamma: f64, centers: Vec<Vec<f64>> },
    /// `ρ · min(1, dist(x, Z)/δ)`: exactly 0 on the zone, exactly ρ at
    /// distance ≥ δ, piecewise linear in the distance between.
    FlatWell { zero_set: Zone, ramp: f64, margin: f64 },
    Tabulated { values: Field },
}

impl PotentialSpec {
    /// Check parameter ranges and dimensional consistency with `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            PotentialSpec::Constant { tau } => {
                if !(*tau >= 0.0 && tau.is_finite()) {
                    return Err(Error::InvalidParameter("constant potential needs tau >= 0"));
                }
            }
            PotentialSpec::RadialHomogeneous { nu, gamma, x0 } => {
                if !(*nu > 0.0 && *gamma > 0.0) {
                    return Err(Error::NonPositive("radial homogeneous nu, gamma"));
                }
                if x0.len() != dim {
                    return Err(Error::InvalidParameter("x0 has wrong dimension"));
                }
            }
            PotentialSpec::Envelope { mu, nu, gamma, centers } => {
                if !(*mu > 0.0 && *nu > 0.0 && *gamma > 0.0) {
                    return Err(Error::NonPositive("envelope mu, nu, gamma"));
                }
                if centers.is_empty() {
                    return Err(Error::InvalidParameter("envelope needs at least one center"));
                }
                if centers.iter().any(|c| c.len() != dim) {
                    return Err(Error::InvalidParameter("envelope center has wrong dimension"));
                }
            }
            PotentialSpec::FlatWell { zero_set, ramp, margin } => {
                if !(*ramp > 0.0 && *margin > 0.0) {
                    return Err(Error::NonPositive("flat well ramp, margin"));
                }
                if !zero_set.dim_ok(dim) {
                    return Err(Error::InvalidParameter("flat well zone has wrong dimension"));
                }
            }
            PotentialSpec::Tabulated { values } => {
                if values.grid().dim() != dim {
                    return Err(Error::InvalidParameter("tabulated grid has wrong dimension"));
                }
                if values.values().iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidParameter("tabulated potential has negative entries"));
                }
            }
        }
        Ok(())
    }

    /// The homogeneity exponent γ when the spec has one.
    pub fn homogeneity_gamma(&self) -> Option<f64> {
        match self {
            PotentialSpec::RadialHomogeneous { gamma, .. }
            | PotentialSpec::Envelope { gamma, .. } => Some(*gamma),
            _ => None,
        }
    }
}

fn radial(nu: f64, gamma: f64, x0: &[f64], x: &[f64]) -> f64 {
    let mut d2 = 0.0;
    for ax in 0..x.len() {
        let d = x[ax] - x0[ax];
        d2 += d * d;
    }
    if d2 == 0.0 {
        return 0.0;
    }
    nu * libm::pow(libm::sqrt(d2), gamma)
}

/// Evaluate the potential at a point. Tabulated specs reject points
/// outside their box.
pub fn eval_potential(spec: &PotentialSpec, x: &[f64]) -> Result<f64> {
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("evaluation point"));
    }
    let v = match spec {
        PotentialSpec::Constant { tau } => *tau,
        PotentialSpec::RadialHomogeneous { nu, gamma, x0 } => radial(*nu, *gamma, x0, x),
        PotentialSpec::Envelope { mu, nu, gamma, centers } => {
            let mut best = *mu;
            for c in centers {
                best = best.min(radial(*nu, *gamma, c, x));
            }
            best
        }
        PotentialSpec::FlatWell { zero_set, ramp, margin } => {
            ramp * (zero_set.distance(x) / margin).min(1.0)
        }
        PotentialSpec::Tabulated { values } => {
            sample(values, x).ok_or(Error::OutsideTabulatedBox)?
        }
    };
    Ok(v)
}

/// Sample `spec(σ·x)` at every node of `grid`. With σ = ε this is the
/// rescaled coefficient entering the flow; with σ = 1 the potential
/// itself.
pub fn sample_scaled(spec: &PotentialSpec, grid: GridSpec, sigma: f64) -> Result<Field> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::NonPositive("sample scale"));
    }
    let dim = grid.dim();
    let mut out = Field::zeros(grid);
    let mut p = [0.0f64; 3];
    for i in 0..grid.node_count() {
        let x = grid.node_coord(i);
        for ax in 0..dim {
            p[ax] = sigma * x[ax];
        }
        out.values_mut()[i] = eval_potential(spec, &p[..dim])?;
    }
    Ok(out)
}

/// Sample `spec(ε^k·x + x_i) / ε^{kγ}` at every node: the blow-up
/// normalization of the potential around a zero `x_i`. For a radially
/// γ-homogeneous spec centered at `x_i` the ε-dependence cancels.
pub fn sample_blowup(
    spec: &PotentialSpec,
    grid: GridSpec,
    eps: f64,
    k: f64,
    gamma: f64,
    x_i: &[f64],
) -> Result<Field> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::NonPositive("eps"));
    }
    if x_i.len() != grid.dim() {
        return Err(Error::InvalidParameter("x_i has wrong dimension"));
    }
    let scale = libm::pow(eps, k);
    let denom = libm::pow(eps, k * gamma);
    let dim = grid.dim();
    let mut out = Field::zeros(grid);
    let mut p = [0.0f64; 3];
    for i in 0..grid.node_count() {
        let x = grid.node_coord(i);
        for ax in 0..dim {
            p[ax] = scale * x[ax] + x_i[ax];
        }
        out.values_mut()[i] = eval_potential(spec, &p[..dim])? / denom;
    }
    Ok(out)
}

/// Node mask: `inside[i]` marks nodes belonging to a region.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    grid: GridSpec,
    inside: Vec<bool>,
}

impl Mask {
    pub fn new(grid: GridSpec, inside: Vec<bool>) -> Result<Mask> {
        if inside.len() != grid.node_count() {
            return Err(Error::ShapeMismatch);
        }
        Ok(Mask { grid, inside })
    }

    pub fn full(grid: GridSpec) -> Mask {
        Mask { grid, inside: vec![true; grid.node_count()] }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.inside.iter().all(|&b| !b)
    }

    pub fn intersect(&self, other: &Mask) -> Result<Mask> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let inside = self
            .inside
            .iter()
            .zip(&other.inside)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(Mask { grid: self.grid, inside })
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let inside = self
            .inside
            .iter()
            .zip(&other.inside)
            .map(|(&a, &b)| a || b)
            .collect();
        Ok(Mask { grid: self.grid, inside })
    }
}

/// Nodes where the potential is ≤ tol. With tol = 0 this is the exact
/// zero set on the grid.
pub fn zero_set_mask(spec: &PotentialSpec, grid: GridSpec, tol: f64) -> Result<Mask> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter("tol must be >= 0"));
    }
    let dim = grid.dim();
    let mut inside = vec![false; grid.node_count()];
    for (i, flag) in inside.iter_mut().enumerate() {
        let x = grid.node_coord(i);
        *flag = eval_potential(spec, &x[..dim])? <= tol;
    }
    Mask::new(grid, inside)
}

/// Minimum of `a(σx) + b(σx)` over the boundary nodes of the grid.
/// Used by the box-size policy: the truncation is trustworthy only if
/// the potential stays above a floor on the boundary.
pub fn boundary_potential_min(
    a: &PotentialSpec,
    b: &PotentialSpec,
    grid: GridSpec,
    sigma: f64,
) -> Result<f64> {
    let dim = grid.dim();
    let mut min = f64::INFINITY;
    let mut p = [0.0f64; 3];
    for i in 0..grid.node_count() {
        if !grid.is_boundary(i) {
            continue;
        }
        let x = grid.node_coord(i);
        for ax in 0..dim {
            p[ax] = sigma * x[ax];
        }
        let va = eval_potential(a, &p[..dim])?;
        let vb = eval_potential(b, &p[..dim])?;
        if va + vb < min {
            min = va + vb;
        }
    }
    Ok(min)
}
