//! Uniform box discretization of ℝ^N (N ∈ {1,2,3}) with Dirichlet
//! truncation: second-order stencils, trapezoidal quadrature, and the
//! blow-up resampling map used by the concentration experiments.
//!
//! Fields are stored flat in row-major axis order with x fastest, so
//! dumps are bit-reproducible. Every operation here is a pure function;
//! fields are immutable values safe to share across threads.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Uniform tensor grid on `[-L, L]^dim` with `n` nodes per axis.
///
/// Spacing is `h = 2L/(n-1)`, nodes sit at `-L + i·h`. The outermost
/// node layer is the Dirichlet boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
    spacing: f64,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid("dim must be 1, 2 or 3"));
        }
        if points_per_axis < 8 {
            return Err(Error::InvalidGrid("need at least 8 points per axis"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid("half width must be positive and finite"));
        }
        let spacing = 2.0 * half_width / (points_per_axis as f64 - 1.0);
        Ok(GridSpec { dim, half_width, points_per_axis, spacing })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Node spacing `h = 2L/(n-1)`, exactly as computed in `new`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of nodes, `n^dim`.
    pub fn node_count(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    /// Axis extents as (nx, ny, nz); absent axes have extent 1.
    pub fn extents(&self) -> [usize; 3] {
        let n = self.points_per_axis;
        match self.dim {
            1 => [n, 1, 1],
            2 => [n, n, 1],
            _ => [n, n, n],
        }
    }

    /// Coordinate of node `i` along one axis.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing
    }

    /// Decompose a flat index (x fastest) into per-axis indices.
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        match self.dim {
            1 => [idx, 0, 0],
            2 => [idx % n, idx / n, 0],
            _ => [idx % n, (idx / n) % n, idx / (n * n)],
        }
    }

    pub fn flat_index(&self, mi: [usize; 3]) -> usize {
        let n = self.points_per_axis;
        match self.dim {
            1 => mi[0],
            2 => mi[0] + n * mi[1],
            _ => mi[0] + n * (mi[1] + n * mi[2]),
        }
    }

    /// Physical coordinates of a node; entries past `dim` are zero.
    pub fn node_coord(&self, idx: usize) -> [f64; 3] {
        let mi = self.multi_index(idx);
        let mut x = [0.0; 3];
        for ax in 0..self.dim {
            x[ax] = self.axis_coord(mi[ax]);
        }
        x
    }

    /// True if the node lies on the outermost layer (Dirichlet boundary).
    pub fn is_boundary(&self, idx: usize) -> bool {
        let mi = self.multi_index(idx);
        let last = self.points_per_axis - 1;
        (0..self.dim).any(|ax| mi[ax] == 0 || mi[ax] == last)
    }

    /// Trapezoidal quadrature weight of a node (includes the `h^dim` factor).
    pub fn quad_weight(&self, idx: usize) -> f64 {
        let mi = self.multi_index(idx);
        let last = self.points_per_axis - 1;
        let mut w = 1.0;
        for ax in 0..self.dim {
            if mi[ax] == 0 || mi[ax] == last {
                w *= 0.5;
            }
        }
        w * self.cell_volume()
    }

    /// `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        let mut v = 1.0;
        for _ in 0..self.dim {
            v *= self.spacing;
        }
        v
    }
}

/// One real-valued grid function, stored flat with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Field {
        Field { grid, values: vec![0.0; grid.node_count()] }
    }

    /// Wrap raw values; rejects wrong length and non-finite entries.
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.node_count() {
            return Err(Error::ShapeMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Field { grid, values })
    }

    /// Sample a function of the node coordinates.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Field {
        let values = (0..grid.node_count())
            .map(|i| {
                let x = grid.node_coord(i);
                f(&x[..grid.dim()])
            })
            .collect();
        Field { grid, values }
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Field {
        debug_assert_eq!(values.len(), grid.node_count());
        Field { grid, values }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn scaled(&self, c: f64) -> Field {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// `self += a·x`; grids must match.
    pub fn axpy(&mut self, a: f64, x: &Field) {
        assert_eq!(self.grid, x.grid, "axpy on mismatched grids");
        for (v, xv) in self.values.iter_mut().zip(&x.values) {
            *v += a * xv;
        }
    }

    pub fn clamp_nonneg(&mut self) {
        for v in &mut self.values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    /// Zero the outermost node layer (Dirichlet truncation).
    pub fn zero_boundary(&mut self) {
        for i in 0..self.values.len() {
            if self.grid.is_boundary(i) {
                self.values[i] = 0.0;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    /// Same values under a different grid spec with the same node count.
    /// This is the coordinate relabeling used by the rescaling maps
    /// (solver coordinates ↔ physical coordinates).
    pub fn relabeled(&self, grid: GridSpec) -> Result<Field> {
        if grid.dim() != self.grid.dim() || grid.node_count() != self.values.len() {
            return Err(Error::ShapeMismatch);
        }
        Ok(Field { grid, values: self.values.clone() })
    }
}

/// Neumaier compensated accumulator; keeps long quadrature sums exact
/// to a few ulps independently of node count.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Second-order central Laplacian with zero Dirichlet extension:
/// neighbours outside the box count as 0.
pub fn laplacian(f: &Field) -> Field {
    let g = f.grid();
    let [nx, ny, nz] = g.extents();
    let sy = nx;
    let sz = nx * ny;
    let inv_h2 = 1.0 / (g.spacing() * g.spacing());
    let src = f.values();
    let mut out = vec![0.0; src.len()];
    for iz in 0..nz {
        for iy in 0..ny {
            let base = iz * sz + iy * sy;
            for ix in 0..nx {
                let i = base + ix;
                let c = src[i];
                let mut acc = -2.0 * c;
                if ix > 0 {
                    acc += src[i - 1];
                }
                if ix + 1 < nx {
                    acc += src[i + 1];
                }
                if ny > 1 {
                    acc += -2.0 * c;
                    if iy > 0 {
                        acc += src[i - sy];
                    }
                    if iy + 1 < ny {
                        acc += src[i + sy];
                    }
                }
                if nz > 1 {
                    acc += -2.0 * c;
                    if iz > 0 {
                        acc += src[i - sz];
                    }
                    if iz + 1 < nz {
                        acc += src[i + sz];
                    }
                }
                out[i] = acc * inv_h2;
            }
        }
    }
    Field::from_raw(g, out)
}

/// Composite trapezoidal rule over the box.
pub fn integrate(f: &Field) -> f64 {
    let g = f.grid();
    let mut acc = KahanSum::default();
    for (i, v) in f.values().iter().enumerate() {
        acc.add(g.quad_weight(i) * v);
    }
    acc.value()
}

/// Trapezoidal quadrature of a pointwise product, `∫ f·g`.
pub fn integrate_product(f: &Field, g: &Field) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    let spec = f.grid();
    let mut acc = KahanSum::default();
    for (i, (a, b)) in f.values().iter().zip(g.values()).enumerate() {
        acc.add(spec.quad_weight(i) * a * b);
    }
    Ok(acc.value())
}

/// Trapezoidal quadrature restricted to `mask` nodes.
pub fn integrate_where(f: &Field, mask: &[bool]) -> Result<f64> {
    if mask.len() != f.values().len() {
        return Err(Error::ShapeMismatch);
    }
    let g = f.grid();
    let mut acc = KahanSum::default();
    for (i, v) in f.values().iter().enumerate() {
        if mask[i] {
            acc.add(g.quad_weight(i) * v);
        }
    }
    Ok(acc.value())
}

/// Discrete `∫ |∇f|²`: per axis, the sum of squared forward differences
/// over the n-1 cells of each grid line, weighted by `h^dim`.
///
/// Nonnegative, and zero only for constants; with the Dirichlet boundary
/// held at zero that means only for the zero field.
pub fn grad_norm_sq(f: &Field) -> f64 {
    let g = f.grid();
    let [nx, ny, nz] = g.extents();
    let sy = nx;
    let sz = nx * ny;
    let src = f.values();
    let scale = g.cell_volume() / (g.spacing() * g.spacing());
    let mut acc = KahanSum::default();
    for iz in 0..nz {
        for iy in 0..ny {
            let base = iz * sz + iy * sy;
            for ix in 0..nx {
                let i = base + ix;
                let c = src[i];
                if ix + 1 < nx {
                    let d = src[i + 1] - c;
                    acc.add(d * d);
                }
                if iy + 1 < ny {
                    let d = src[i + sy] - c;
                    acc.add(d * d);
                }
                if iz + 1 < nz {
                    let d = src[i + sz] - c;
                    acc.add(d * d);
                }
            }
        }
    }
    scale * acc.value()
}

/// `sqrt(∫ f²)` with trapezoidal quadrature.
pub fn l2_norm(f: &Field) -> f64 {
    let g = f.grid();
    let mut acc = KahanSum::default();
    for (i, v) in f.values().iter().enumerate() {
        acc.add(g.quad_weight(i) * v * v);
    }
    libm::sqrt(acc.value())
}

/// Multilinear interpolation of `f` at an arbitrary point; `None`
/// outside the closed box.
pub fn sample(f: &Field, point: &[f64]) -> Option<f64> {
    let g = f.grid();
    debug_assert_eq!(point.len(), g.dim());
    let n = g.points_per_axis();
    let mut cell = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for ax in 0..g.dim() {
        let t = (point[ax] + g.half_width()) / g.spacing();
        if !(-1e-12..=(n as f64 - 1.0) + 1e-12).contains(&t) {
            return None;
        }
        let c = libm::floor(t.max(0.0)) as usize;
        let c = c.min(n - 2);
        cell[ax] = c;
        frac[ax] = (t - c as f64).clamp(0.0, 1.0);
    }
    let mut acc = 0.0;
    let corners = 1usize << g.dim();
    for corner in 0..corners {
        let mut w = 1.0;
        let mut mi = [0usize; 3];
        for ax in 0..g.dim() {
            if corner >> ax & 1 == 1 {
                w *= frac[ax];
                mi[ax] = cell[ax] + 1;
            } else {
                w *= 1.0 - frac[ax];
                mi[ax] = cell[ax];
            }
        }
        acc += w * f.values()[g.flat_index(mi)];
    }
    Some(acc)
}

/// Blow-up resampling: `g(y) = A · f(center + s·y)` on `target`, by
/// multilinear interpolation, zero where the argument leaves the source
/// box. First-order accurate at kinks, second-order elsewhere.
pub fn resample_blowup(
    f: &Field,
    center: &[f64],
    scale: f64,
    amplitude: f64,
    target: GridSpec,
) -> Result<Field> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::NonPositive("resample scale"));
    }
    let src_grid = f.grid();
    if center.len() != src_grid.dim() || target.dim() != src_grid.dim() {
        return Err(Error::GridMismatch);
    }
    let dim = src_grid.dim();
    if center
        .iter()
        .any(|&c| c.abs() > src_grid.half_width() || !c.is_finite())
    {
        return Err(Error::InvalidParameter("resample center outside source box"));
    }
    let mut out = Field::zeros(target);
    let mut p = [0.0f64; 3];
    for i in 0..target.node_count() {
        let y = target.node_coord(i);
        for ax in 0..dim {
            p[ax] = center[ax] + scale * y[ax];
        }
        out.values_mut()[i] = match sample(f, &p[..dim]) {
            Some(v) => amplitude * v,
            None => 0.0,
        };
    }
    Ok(out)
}

/// A pair (u, v) of fields on one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Field,
    pub v: Field,
}

impl State {
    pub fn new(u: Field, v: Field) -> Result<State> {
        if u.grid() != v.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(State { u, v })
    }

    pub fn zeros(grid: GridSpec) -> State {
        State { u: Field::zeros(grid), v: Field::zeros(grid) }
    }

    pub fn grid(&self) -> GridSpec {
        self.u.grid()
    }

    pub fn scale(&mut self, c: f64) {
        self.u.scale(c);
        self.v.scale(c);
    }

    pub fn scaled(&self, c: f64) -> State {
        State { u: self.u.scaled(c), v: self.v.scaled(c) }
    }

    pub fn axpy(&mut self, a: f64, x: &State) {
        self.u.axpy(a, &x.u);
        self.v.axpy(a, &x.v);
    }

    pub fn is_zero(&self) -> bool {
        self.u.values().iter().all(|&x| x == 0.0) && self.v.values().iter().all(|&x| x == 0.0)
    }
}
