//! Functional algebra for the coupled system: the energy functional and
//! its breakdown, the quartic form F, Nehari projection, the
//! scale-invariant quotient J, the pointwise Euler–Lagrange residual,
//! the segregation criterion for two-component quotients, and the
//! coupling thresholds β₀, β₁, β₂, β̂.
//!
//! All quadratic and quartic forms are built from the potential sampled
//! on the grid, so the Nehari algebra (projection, quotient, ray
//! identities) holds to machine precision at the discrete level,
//! independent of quadrature error against the continuum.


use crate::grid::{grad_norm_sq, laplacian, Field, GridSpec, KahanSum, State};
use crate::potential::{sample_scaled, Mask, PotentialSpec};
use crate::{Error, Result};

/// Which system the energy describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemForm {
    /// Coefficients a(εx), b(εx) on the solver grid.
    Scaled,
    /// ε plays no role; the potentials enter as given.
    Limit,
    /// Potentials ≡ 0; fields are constrained to masks by the solver.
    Dirichlet,
}

/// One instance of the coupled problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mu1: f64,
    pub mu2: f64,
    pub beta: f64,
    pub eps: f64,
    pub a: PotentialSpec,
    pub b: PotentialSpec,
    pub grid: GridSpec,
    pub form: ProblemForm,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu1 > 0.0 && self.mu2 > 0.0) {
            return Err(Error::NonPositive("mu1, mu2"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::NonPositive("eps"));
        }
        if !self.beta.is_finite() {
            return Err(Error::NonFinite("beta"));
        }
        self.a.validate(self.grid.dim())?;
        self.b.validate(self.grid.dim())?;
        Ok(())
    }

    /// Potentials sampled on the grid according to the form.
    pub fn sampled_potentials(&self) -> Result<(Field, Field)> {
        match self.form {
            ProblemForm::Scaled => Ok((
                sample_scaled(&self.a, self.grid, self.eps)?,
                sample_scaled(&self.b, self.grid, self.eps)?,
            )),
            ProblemForm::Limit => Ok((
                sample_scaled(&self.a, self.grid, 1.0)?,
                sample_scaled(&self.b, self.grid, 1.0)?,
            )),
            ProblemForm::Dirichlet => {
                Ok((Field::zeros(self.grid), Field::zeros(self.grid)))
            }
        }
    }
}

/// Energy pieces of a state; all quadratic parts are nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// ∫ |∇u|²
    pub kinetic_u: f64,
    /// ∫ a_ε u²
    pub potential_u: f64,
    pub kinetic_v: f64,
    pub potential_v: f64,
    /// μ₁ ∫ u⁴
    pub quartic_u: f64,
    /// μ₂ ∫ v⁴
    pub quartic_v: f64,
    /// ∫ u² v² (β applied in the total)
    pub cross: f64,
    /// ½‖(u,v)‖²_E − ¼ F(u,v)
    pub total: f64,
    /// ‖(u,v)‖²_E − F(u,v), the Nehari constraint value
    pub nehari_residual: f64,
}

impl EnergyBreakdown {
    /// ‖(u,v)‖²_E = kinetic + potential parts.
    pub fn norm_e_sq(&self) -> f64 {
        self.kinetic_u + self.potential_u + self.kinetic_v + self.potential_v
    }

    /// F(u,v) = μ₁∫u⁴ + 2β∫u²v² + μ₂∫v⁴.
    pub fn quartic_form(&self, beta: f64) -> f64 {
        self.quartic_u + 2.0 * beta * self.cross + self.quartic_v
    }

    /// Recompose the total from the parts (self-consistency check).
    pub fn recompute_total(&self, beta: f64) -> f64 {
        0.5 * self.norm_e_sq() - 0.25 * self.quartic_form(beta)
    }
}

/// A problem with its potentials frozen on the grid: the workhorse the
/// solver iterates with, avoiding re-sampling per step.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    pub mu1: f64,
    pub mu2: f64,
    pub beta: f64,
    pub a_eps: Field,
    pub b_eps: Field,
}

impl DiscreteProblem {
    pub fn new(p: &Problem) -> Result<DiscreteProblem> {
        p.validate()?;
        let (a_eps, b_eps) = p.sampled_potentials()?;
        Ok(DiscreteProblem { mu1: p.mu1, mu2: p.mu2, beta: p.beta, a_eps, b_eps })
    }

    pub fn grid(&self) -> GridSpec {
        self.a_eps.grid()
    }

    fn check_state(&self, s: &State) -> Result<()> {
        if s.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// All quadrature pieces in one pass over the nodes.
    pub fn energy(&self, s: &State) -> Result<EnergyBreakdown> {
        self.check_state(s)?;
        let g = self.grid();
        let mut pot_u = KahanSum::default();
        let mut pot_v = KahanSum::default();
        let mut q_u = KahanSum::default();
        let mut q_v = KahanSum::default();
        let mut q_x = KahanSum::default();
        let u = s.u.values();
        let v = s.v.values();
        let a = self.a_eps.values();
        let b = self.b_eps.values();
        for i in 0..u.len() {
            let w = g.quad_weight(i);
            let (ui, vi) = (u[i], v[i]);
            let (u2, v2) = (ui * ui, vi * vi);
            pot_u.add(w * a[i] * u2);
            pot_v.add(w * b[i] * v2);
            q_u.add(w * u2 * u2);
            q_v.add(w * v2 * v2);
            q_x.add(w * u2 * v2);
        }
        let kinetic_u = grad_norm_sq(&s.u);
        let kinetic_v = grad_norm_sq(&s.v);
        let potential_u = pot_u.value();
        let potential_v = pot_v.value();
        let quartic_u = self.mu1 * q_u.value();
        let quartic_v = self.mu2 * q_v.value();
        let cross = q_x.value();
        let norm_e_sq = kinetic_u + potential_u + kinetic_v + potential_v;
        let f = quartic_u + 2.0 * self.beta * cross + quartic_v;
        Ok(EnergyBreakdown {
            kinetic_u,
            potential_u,
            kinetic_v,
            potential_v,
            quartic_u,
            quartic_v,
            cross,
            total: 0.5 * norm_e_sq - 0.25 * f,
            nehari_residual: norm_e_sq - f,
        })
    }

    /// F(u,v) alone.
    pub fn quartic(&self, s: &State) -> Result<f64> {
        let e = self.energy(s)?;
        Ok(e.quartic_form(self.beta))
    }

    /// The unique t > 0 with t·(u,v) on the Nehari manifold:
    /// t = sqrt(‖(u,v)‖²_E / F(u,v)).
    pub fn nehari_scale(&self, s: &State) -> Result<f64> {
        let e = self.energy(s)?;
        self.nehari_scale_from(&e, s)
    }

    fn nehari_scale_from(&self, e: &EnergyBreakdown, s: &State) -> Result<f64> {
        let norm = e.norm_e_sq();
        if norm == 0.0 || s.is_zero() {
            return Err(Error::ZeroState);
        }
        let f = e.quartic_form(self.beta);
        if !(f > 0.0) {
            return Err(Error::NonPositiveQuartic);
        }
        Ok(libm::sqrt(norm / f))
    }

    /// Scale-invariant quotient J(u,v) = ‖(u,v)‖⁴_E / (4 F(u,v)); its
    /// value equals the maximum of the energy along the ray t ↦ t(u,v).
    pub fn quotient(&self, s: &State) -> Result<f64> {
        let e = self.energy(s)?;
        let norm = e.norm_e_sq();
        if norm == 0.0 || s.is_zero() {
            return Err(Error::ZeroState);
        }
        let f = e.quartic_form(self.beta);
        if !(f > 0.0) {
            return Err(Error::NonPositiveQuartic);
        }
        Ok(norm * norm / (4.0 * f))
    }

    /// Pointwise Euler–Lagrange residual
    /// G = (−Δu + a_ε u − μ₁u³ − βv²u, −Δv + b_ε v − μ₂v³ − βu²v).
    pub fn gradient(&self, s: &State) -> Result<State> {
        self.check_state(s)?;
        let mut gu = laplacian(&s.u);
        let mut gv = laplacian(&s.v);
        let u = s.u.values();
        let v = s.v.values();
        let a = self.a_eps.values();
        let b = self.b_eps.values();
        let (mu1, mu2, beta) = (self.mu1, self.mu2, self.beta);
        for i in 0..u.len() {
            let (ui, vi) = (u[i], v[i]);
            let (u2, v2) = (ui * ui, vi * vi);
            gu.values_mut()[i] = -gu.values()[i] + a[i] * ui - mu1 * u2 * ui - beta * v2 * ui;
            gv.values_mut()[i] = -gv.values()[i] + b[i] * vi - mu2 * v2 * vi - beta * u2 * vi;
        }
        Ok(State { u: gu, v: gv })
    }
}

/// See [`DiscreteProblem::quartic`].
pub fn quartic_form(s: &State, p: &Problem) -> Result<f64> {
    DiscreteProblem::new(p)?.quartic(s)
}

/// See [`DiscreteProblem::energy`].
pub fn energy(s: &State, p: &Problem) -> Result<EnergyBreakdown> {
    DiscreteProblem::new(p)?.energy(s)
}

/// See [`DiscreteProblem::nehari_scale`].
pub fn nehari_scale(s: &State, p: &Problem) -> Result<f64> {
    DiscreteProblem::new(p)?.nehari_scale(s)
}

/// See [`DiscreteProblem::quotient`].
pub fn quotient_j(s: &State, p: &Problem) -> Result<f64> {
    DiscreteProblem::new(p)?.quotient(s)
}

/// See [`DiscreteProblem::gradient`].
pub fn l2_gradient(s: &State, p: &Problem) -> Result<State> {
    DiscreteProblem::new(p)?.gradient(s)
}

/// Minimum of (a·s + b·t)² / (c·s² + 2d·st + e·t²) over the closed
/// first quadrant minus the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegregationMin {
    /// True when the minimum is attained away from both axes.
    pub interior: bool,
    pub s: f64,
    pub t: f64,
    pub value: f64,
}

/// Decide where the two-component quotient attains its minimum. The
/// minimum leaves the axes exactly when `ad − bc > 0` and `bd − ae > 0`,
/// and is then attained at (s, t) = (ad − bc, bd − ae); otherwise it is
/// the smaller of the two axis values a²/c and b²/e.
pub fn segregation_min(a: f64, b: f64, c: f64, d: f64, e: f64) -> Result<SegregationMin> {
    for (name, x) in [("a", a), ("b", b), ("c", c), ("d", d), ("e", e)] {
        if !(x > 0.0 && x.is_finite()) {
            let _ = name;
            return Err(Error::NonPositive("segregation inputs"));
        }
    }
    let s = a * d - b * c;
    let t = b * d - a * e;
    if s > 0.0 && t > 0.0 {
        let num = a * s + b * t;
        let den = c * s * s + 2.0 * d * s * t + e * t * t;
        Ok(SegregationMin { interior: true, s, t, value: num * num / den })
    } else {
        let on_s = a * a / c;
        let on_t = b * b / e;
        if on_s <= on_t {
            Ok(SegregationMin { interior: false, s: 1.0, t: 0.0, value: on_s })
        } else {
            Ok(SegregationMin { interior: false, s: 0.0, t: 1.0, value: on_t })
        }
    }
}

/// Coupling thresholds; the theorems require β > β̂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaThresholds {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta_hat: f64,
}

/// Thresholds from scalar ground states:
///
/// * β₀ = max{ μ₂ ∫V⁴ / ∫U²V², μ₁ ∫U⁴ / ∫U²V² } with U, V the scalar
///   ground states of the two decoupled equations,
/// * β₁ = max{μ₁, μ₂},
/// * β₂ = the same quotients for the Dirichlet ground states U₀ on 𝒜
///   and V₀ on ℬ, with integrals restricted to the masks (Ω = 𝒜 ∩ ℬ
///   for the cross term),
/// * β̂ = max of the three.
///
/// Vanishing cross integrals mean the supports are disjoint and are
/// reported as errors, never clamped.
#[allow(clippy::too_many_arguments)]
pub fn beta_thresholds(
    u: &Field,
    v: &Field,
    u0: &Field,
    v0: &Field,
    mask_a: &Mask,
    mask_b: &Mask,
    mask_omega: &Mask,
    p: &Problem,
) -> Result<BetaThresholds> {
    if u.grid() != v.grid() {
        return Err(Error::GridMismatch);
    }
    if u0.grid() != v0.grid()
        || u0.grid() != mask_a.grid()
        || u0.grid() != mask_b.grid()
        || u0.grid() != mask_omega.grid()
    {
        return Err(Error::GridMismatch);
    }
    let full = Mask::full(u.grid());
    let u4 = masked_power_integral(u, &full, 4);
    let v4 = masked_power_integral(v, &full, 4);
    let uv = masked_cross_integral(u, v, &full);
    if !(uv > 0.0) {
        return Err(Error::VanishingCrossIntegral("∫U²V²"));
    }
    let beta0 = (p.mu2 * v4 / uv).max(p.mu1 * u4 / uv);
    let beta1 = p.mu1.max(p.mu2);
    let u04 = masked_power_integral(u0, mask_a, 4);
    let v04 = masked_power_integral(v0, mask_b, 4);
    let uv0 = masked_cross_integral(u0, v0, mask_omega);
    if !(uv0 > 0.0) {
        return Err(Error::VanishingCrossIntegral("∫_Ω U₀²V₀²"));
    }
    let beta2 = (p.mu2 * v04 / uv0).max(p.mu1 * u04 / uv0);
    Ok(BetaThresholds { beta0, beta1, beta2, beta_hat: beta0.max(beta1).max(beta2) })
}

fn masked_power_integral(f: &Field, mask: &Mask, power: u32) -> f64 {
    let g = f.grid();
    let mut acc = KahanSum::default();
    for (i, &x) in f.values().iter().enumerate() {
        if mask.inside()[i] {
            let mut p = 1.0;
            for _ in 0..power {
                p *= x;
            }
            acc.add(g.quad_weight(i) * p);
        }
    }
    acc.value()
}

fn masked_cross_integral(f: &Field, g: &Field, mask: &Mask) -> f64 {
    let spec = f.grid();
    let mut acc = KahanSum::default();
    for (i, (&a, &b)) in f.values().iter().zip(g.values()).enumerate() {
        if mask.inside()[i] {
            acc.add(spec.quad_weight(i) * a * a * b * b);
        }
    }
    acc.value()
}

/// Empirical constant of the weighted quartic inequality
/// C ∫(u⁴+v⁴) ≤ (∫|∇u|² + W_a u²)² + (∫|∇v|² + W_b v²)²,
/// evaluated for the given quadratic forms. Returns the largest C for
/// which the state satisfies it, i.e. the quotient itself.
pub fn sobolev_quotient(e: &EnergyBreakdown, mu1: f64, mu2: f64) -> f64 {
    let nu = e.kinetic_u + e.potential_u;
    let nv = e.kinetic_v + e.potential_v;
    let quartic_raw = e.quartic_u / mu1 + e.quartic_v / mu2;
    if quartic_raw <= 0.0 {
        return f64::INFINITY;
    }
    (nu * nu + nv * nv) / quartic_raw
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::integrate;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn grid20() -> GridSpec {
        GridSpec::new(1, 20.0, 801).unwrap()
    }

    fn soliton(grid: GridSpec) -> Field {
        Field::from_fn(grid, |x| core::f64::consts::SQRT_2 / libm::cosh(x[0]))
    }

    fn const_problem(grid: GridSpec, mu1: f64, mu2: f64, beta: f64, tau: f64) -> Problem {
        Problem {
            mu1,
            mu2,
            beta,
            eps: 1.0,
            a: PotentialSpec::Constant { tau },
            b: PotentialSpec::Constant { tau },
            grid,
            form: ProblemForm::Limit,
        }
    }

    #[test]
    fn quartic_zero_state_and_homogeneity() {
        let g = grid20();
        let p = const_problem(g, 1.0, 1.0, 3.0, 1.0);
        let zero = State::zeros(g);
        assert_eq!(quartic_form(&zero, &p).unwrap(), 0.0);

        let s = State::new(soliton(g), Field::from_fn(g, |x| libm::exp(-x[0] * x[0]))).unwrap();
        let f1 = quartic_form(&s, &p).unwrap();
        for &t in &[0.5, 2.0] {
            let ft = quartic_form(&s.scaled(t), &p).unwrap();
            assert_relative_eq!(ft, t.powi(4) * f1, max_relative = 1e-12);
        }
    }

    #[test]
    fn quartic_of_soliton_closed_form() {
        // μ₁ ∫ (√2 sech)⁴ = ∫ 4 sech⁴ = 16/3
        let g = grid20();
        let p = const_problem(g, 1.0, 1.0, 0.0, 1.0);
        let s = State::new(soliton(g), Field::zeros(g)).unwrap();
        assert!((quartic_form(&s, &p).unwrap() - 16.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn energy_zero_state() {
        let g = grid20();
        let p = const_problem(g, 1.0, 1.0, 3.0, 1.0);
        let e = energy(&State::zeros(g), &p).unwrap();
        assert_eq!(e.total, 0.0);
        assert_eq!(e.nehari_residual, 0.0);
    }

    #[test]
    fn soliton_is_on_nehari_manifold_with_energy_four_thirds() {
        // u = √2 sech solves −u″ + u = u³, so (u, 0) lies on the
        // manifold and its energy is ¼‖u‖² = 4/3
        let g = grid20();
        let p = const_problem(g, 1.0, 1.0, 0.0, 1.0);
        let s = State::new(soliton(g), Field::zeros(g)).unwrap();
        let e = energy(&s, &p).unwrap();
        assert!((e.total - 4.0 / 3.0).abs() < 2e-3, "total {}", e.total);
        assert!(e.nehari_residual.abs() < 2e-3, "residual {}", e.nehari_residual);
    }

    #[test]
    fn energy_scaling_under_doubling() {
        let g = grid20();
        let p = const_problem(g, 1.0, 2.0, 3.0, 1.0);
        let s = State::new(
            soliton(g),
            Field::from_fn(g, |x| 0.7 / libm::cosh(0.9 * x[0])),
        )
        .unwrap();
        let e1 = energy(&s, &p).unwrap();
        let e2 = energy(&s.scaled(2.0), &p).unwrap();
        assert_relative_eq!(e2.kinetic_u, 4.0 * e1.kinetic_u, max_relative = 1e-12);
        assert_relative_eq!(e2.potential_v, 4.0 * e1.potential_v, max_relative = 1e-12);
        assert_relative_eq!(e2.quartic_u, 16.0 * e1.quartic_u, max_relative = 1e-12);
        assert_relative_eq!(e2.cross, 16.0 * e1.cross, max_relative = 1e-12);
        assert_relative_eq!(
            e1.total,
            e1.recompute_total(p.beta),
            max_relative = 1e-12
        );
    }

    #[test]
    fn nehari_scale_identities() {
        let g = grid20();
        let p = const_problem(g, 1.0, 1.0, 0.0, 1.0);
        let s = State::new(soliton(g), Field::zeros(g)).unwrap();
        // already on the manifold up to discretization
        let t = nehari_scale(&s, &p).unwrap();
        assert!((t - 1.0).abs() < 1e-3);
        // doubling the state halves the projection scale, exactly
        let t2 = nehari_scale(&s.scaled(2.0), &p).unwrap();
        assert_relative_eq!(t2, t / 2.0, max_relative = 1e-12);
        // projected state satisfies the constraint to machine precision
        let dp = DiscreteProblem::new(&p).unwrap();
        let proj = s.scaled(t);
        let e = dp.energy(&proj).unwrap();
        assert!(e.nehari_residual.abs() <= 1e-10 * e.norm_e_sq());
    }

    #[test]
    fn nehari_scale_matches_bisection_oracle() {
        // independent oracle: solve t²‖s‖² = t⁴F(s) for t by bisection
        // on r(t) = ‖ts‖² − F(ts) evaluated through the full quadrature
        let g = GridSpec::new(1, 20.0, 401).unwrap();
        let p = const_problem(g, 1.0, 1.0, 3.0, 1.0);
        let sech = Field::from_fn(g, |x| 1.0 / libm::cosh(x[0]));
        let s = State::new(sech.clone(), sech).unwrap();
        let dp = DiscreteProblem::new(&p).unwrap();
        let t_closed = dp.nehari_scale(&s).unwrap();

        let residual_at = |t: f64| dp.energy(&s.scaled(t)).unwrap().nehari_residual;
        let (mut lo, mut hi) = (1e-6, 1e3);
        assert!(residual_at(lo) > 0.0 && residual_at(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual_at(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t_bisect = 0.5 * (lo + hi);
        assert!((t_closed - t_bisect).abs() < 1e-10, "{t_closed} vs {t_bisect}");
    }

    #[test]
    fn nehari_scale_rejects_zero_and_nonpositive_quartic() {
        let g = GridSpec::new(1, 5.0, 65).unwrap();
        let p = const_problem(g, 1.0, 1.0, 3.0, 1.0);
        assert!(matches!(
            nehari_scale(&State::zeros(g), &p),
            Err(Error::ZeroState)
        ));
        // β < 0 large enough makes F negative for overlapping components
        let mut pneg = const_problem(g, 1.0, 1.0, -40.0, 1.0);
        pneg.beta = -40.0;
        let f = Field::from_fn(g, |x| libm::exp(-x[0] * x[0]));
        let s = State::new(f.clone(), f).unwrap();
        assert!(matches!(
            nehari_scale(&s, &pneg),
            Err(Error::NonPositiveQuartic)
        ));
    }

    #[test]
    fn quotient_scale_invariant_and_equals_projected_energy() {
        let g = grid20();
        let p = const_problem(g, 1.0, 2.0, 3.0, 1.0);
        let s = State::new(
            soliton(g),
            Field::from_fn(g, |x| 0.8 / libm::cosh(1.1 * x[0])),
        )
        .unwrap();
        let j = quotient_j(&s, &p).unwrap();
        let j2 = quotient_j(&s.scaled(2.0), &p).unwrap();
        assert_relative_eq!(j2, j, max_relative = 1e-12);
        let t = nehari_scale(&s, &p).unwrap();
        let e = energy(&s.scaled(t), &p).unwrap();
        assert_relative_eq!(e.total, j, max_relative = 1e-10);
    }

    #[test]
    fn quotient_of_soliton_is_its_energy() {
        let g = grid20();
        let p = const_problem(g, 1.0, 1.0, 0.0, 1.0);
        let s = State::new(soliton(g), Field::zeros(g)).unwrap();
        assert!((quotient_j(&s, &p).unwrap() - 4.0 / 3.0).abs() < 2e-3);
    }

    #[test]
    fn gradient_zero_state_and_soliton_residual() {
        let g = grid20();
        let p = const_problem(g, 1.0, 1.0, 0.0, 1.0);
        let gz = l2_gradient(&State::zeros(g), &p).unwrap();
        assert!(gz.is_zero());
        // exact soliton leaves only the discretization residual
        let s = State::new(soliton(g), Field::zeros(g)).unwrap();
        let gr = l2_gradient(&s, &p).unwrap();
        let norm = libm::sqrt(integrate(&Field::from_fn(g, |_| 0.0)).max(0.0)
            + crate::grid::integrate_product(&gr.u, &gr.u).unwrap()
            + crate::grid::integrate_product(&gr.v, &gr.v).unwrap());
        assert!(norm <= 5e-3, "residual norm {norm}");
    }

    #[test]
    fn gradient_matches_finite_differences_of_energy() {
        // ⟨G, φ⟩_{L²} vs central differences of the energy, for states
        // supported away from the boundary
        let g = GridSpec::new(1, 10.0, 321).unwrap();
        let p = Problem {
            mu1: 1.0,
            mu2: 2.0,
            beta: 3.0,
            eps: 1.0,
            a: PotentialSpec::RadialHomogeneous { nu: 0.5, gamma: 2.0, x0: vec![0.3] },
            b: PotentialSpec::Constant { tau: 1.0 },
            grid: g,
            form: ProblemForm::Limit,
        };
        let bump = |c: f64, w: f64| {
            Field::from_fn(g, move |x| {
                let r = (x[0] - c) / w;
                libm::exp(-r * r) * if x[0].abs() < 8.0 { 1.0 } else { 0.0 }
            })
        };
        let s = State::new(bump(0.0, 1.0), bump(0.5, 1.3)).unwrap();
        let phi = State::new(bump(-0.4, 0.8), bump(0.2, 1.1)).unwrap();
        let dp = DiscreteProblem::new(&p).unwrap();
        let grad = dp.gradient(&s).unwrap();
        let pairing = crate::grid::integrate_product(&grad.u, &phi.u).unwrap()
            + crate::grid::integrate_product(&grad.v, &phi.v).unwrap();
        let h = 1e-5;
        let mut plus = s.clone();
        plus.axpy(h, &phi);
        let mut minus = s.clone();
        minus.axpy(-h, &phi);
        let fd = (dp.energy(&plus).unwrap().total - dp.energy(&minus).unwrap().total) / (2.0 * h);
        assert_relative_eq!(pairing, fd, max_relative = 1e-6);
    }

    #[test]
    fn segregation_paper_case_interior() {
        let m = segregation_min(1.0, 1.0, 1.0, 2.0, 1.0).unwrap();
        assert!(m.interior);
        assert_eq!((m.s, m.t), (1.0, 1.0));
        assert_relative_eq!(m.value, 2.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn segregation_boundary_case() {
        let m = segregation_min(1.0, 1.0, 1.0, 0.5, 1.0).unwrap();
        assert!(!m.interior);
        assert_relative_eq!(m.value, 1.0, max_relative = 1e-14);
        assert!(m.s == 0.0 || m.t == 0.0);
    }

    #[test]
    fn segregation_rejects_nonpositive() {
        assert!(segregation_min(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(segregation_min(1.0, 1.0, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn thresholds_symmetric_case_collapse_to_mu() {
        let g = grid20();
        let p = const_problem(g, 2.0, 2.0, 3.0, 1.0);
        let u = soliton(g);
        let full = Mask::full(g);
        let th = beta_thresholds(&u, &u, &u, &u, &full, &full, &full, &p).unwrap();
        assert_relative_eq!(th.beta0, 2.0, max_relative = 1e-12);
        assert_relative_eq!(th.beta1, 2.0, max_relative = 1e-12);
        assert_relative_eq!(th.beta2, 2.0, max_relative = 1e-12);
        assert_relative_eq!(th.beta_hat, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn thresholds_reject_disjoint_supports() {
        let g = GridSpec::new(1, 4.0, 65).unwrap();
        let p = const_problem(g, 1.0, 1.0, 3.0, 1.0);
        let left = Field::from_fn(g, |x| if x[0] < -1.0 { 1.0 } else { 0.0 });
        let right = Field::from_fn(g, |x| if x[0] > 1.0 { 1.0 } else { 0.0 });
        let full = Mask::full(g);
        assert!(matches!(
            beta_thresholds(&left, &right, &left, &right, &full, &full, &full, &p),
            Err(Error::VanishingCrossIntegral(_))
        ));
    }
}
