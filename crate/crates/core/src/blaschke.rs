//! Wang's equation on the torus, Blaschke metrics and the convex projective
//! structures they carry.
//!
//! For `g = e^{2u} g₀` and `C = c dz³`, `z = x¹ + τ x²`, the equation
//! `K_g = −1 + 2|C|²_g` reads `Δ₀u = e^{2u} − 2|c|² e^{−4u}`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frames::{frame_tensor_from_a, from_frame, ConformalStructure, CoframeField};
use crate::grid::{
    gradient, pairwise_sum, spectral_laplacian, ComplexField, Field, Mat2, ScalarField, TorusGrid,
};
use crate::projective::{canonical_pair, ProjectiveStructure};
use crate::tensor_calc::{curvature_ricci_schouten, inv2, levi_civita, MetricField};

/// Cubic differential `c dz³` in the flat chart.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicDifferential(ComplexField);

impl CubicDifferential {
    pub fn new(c: ComplexField) -> Result<Self> {
        c.check_finite()?;
        Ok(Self(c))
    }

    pub fn constant(grid: &TorusGrid, c: Complex64) -> Self {
        Self(Field::constant(grid, c))
    }

    pub fn field(&self) -> &ComplexField {
        &self.0
    }

    pub fn grid(&self) -> &TorusGrid {
        self.0.grid()
    }

    /// `max |∂c/∂z̄|` with `∂_z̄ = (τ∂₁ − ∂₂)/(τ − τ̄)`.
    pub fn dbar_max(&self) -> Result<f64> {
        let tau = self.grid().tau();
        let [d1, d2] = gradient(&self.0)?;
        let den = tau - tau.conj();
        Ok(d1.zip_map(&d2, |a, b| (tau * a - b) / den)?.max_abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WangSolution {
    pub u: ScalarField,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct WangReport {
    pub residual: f64,
    pub iterations: usize,
}

impl WangSolution {
    pub fn report(&self) -> WangReport {
        WangReport {
            residual: self.residual,
            iterations: self.iterations,
        }
    }

    /// Blaschke metric `e^{2u} g₀`.
    pub fn metric(&self) -> MetricField {
        let g0 = self.u.grid().reference_metric();
        MetricField::new(self.u.map(|u| {
            let s = (2.0 * u).exp();
            [[s * g0[0][0], s * g0[0][1]], [s * g0[1][0], s * g0[1][1]]]
        }))
        .expect("conformal to the reference metric")
    }
}

fn wang_residual(u: &ScalarField, c2: &[f64], h: Mat2) -> Result<ScalarField> {
    let lap = spectral_laplacian(u, h)?;
    Ok(Field::from_index_fn(u.grid(), |i| {
        let v = u.at(i);
        lap.at(i) - (2.0 * v).exp() + 2.0 * c2[i] * (-4.0 * v).exp()
    }))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&p)
}

/// Solve `(w − Δ₀) x = rhs` by conjugate gradients preconditioned with
/// `(w̄ − Δ₀)^{-1}`.
fn solve_shifted(grid: &TorusGrid, w: &[f64], h: Mat2, rhs: &[f64]) -> Result<Vec<f64>> {
    let wbar = pairwise_sum(w) / w.len() as f64;
    let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    let apply = |x: &[f64]| -> Result<Vec<f64>> {
        let f = Field::from_values(grid, x.to_vec())?;
        let lap = spectral_laplacian(&f, h)?;
        Ok(x.iter()
            .zip(w)
            .zip(lap.values())
            .map(|((xv, wv), l)| wv * xv - l)
            .collect())
    };
    let precond = |r: &[f64]| -> Result<Vec<f64>> {
        let f = Field::from_values(grid, r.to_vec())?;
        Ok(f.apply_multiplier(|k1, k2| {
            let q = h[0][0] * k1 * k1 + 2.0 * h[0][1] * k1 * k2 + h[1][1] * k2 * k2;
            Complex64::new(1.0 / (wbar + four_pi2 * q), 0.0)
        })
        .into_values())
    };
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let bnorm = dot(rhs, rhs).sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut z = precond(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..500 {
        let ap = apply(&p)?;
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= 1e-14 * bnorm {
            break;
        }
        z = precond(&r)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(x)
}

/// Damped Newton iteration from the constant branch
/// `u₀ = ln(2 mean|c|²)/6`.
pub fn wang_solve(c: &CubicDifferential, tol: f64, max_iter: usize) -> Result<WangSolution> {
    let grid = c.grid().clone();
    let c2: Vec<f64> = c.field().values().iter().map(|z| z.norm_sqr()).collect();
    let mean = pairwise_sum(&c2) / c2.len() as f64;
    if mean == 0.0 {
        return Err(Error::NoSolution);
    }
    let h = inv2(&grid.reference_metric());
    let mut u = ScalarField::constant(&grid, (2.0 * mean).ln() / 6.0);
    let mut f = wang_residual(&u, &c2, h)?;
    let mut res = f.max_abs();
    let mut iterations = 0;
    while res >= tol {
        if iterations >= max_iter || !res.is_finite() {
            return Err(Error::Convergence {
                iterations,
                residual: res,
            });
        }
        let w: Vec<f64> = u
            .values()
            .iter()
            .zip(&c2)
            .map(|(v, c)| 2.0 * (2.0 * v).exp() + 8.0 * c * (-4.0 * v).exp())
            .collect();
        let delta = solve_shifted(&grid, &w, h, f.values())?;
        let mut t = 1.0;
        loop {
            let trial = Field::from_index_fn(&grid, |i| u.at(i) + t * delta[i]);
            let ft = wang_residual(&trial, &c2, h)?;
            let rt = ft.max_abs();
            if rt < res || t < 1e-6 {
                u = trial;
                f = ft;
                res = rt;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
    }
    Ok(WangSolution {
        u,
        residual: res,
        iterations,
    })
}

/// Coframe with `ω¹ + iω² = e^u dz`.
pub fn blaschke_coframe(u: &ScalarField) -> Result<CoframeField> {
    let tau = u.grid().tau();
    CoframeField::new(u.map(|u| {
        let s = u.exp();
        [[s, s * tau.re], [0.0, s * tau.im]]
    }))
}

/// `∇^g + 2Re(α)` with `g` the Blaschke metric and `a = c e^{−3u}` the
/// frame coefficient of `α`.
pub fn convex_connection(sol: &WangSolution, c: &CubicDifferential) -> Result<ProjectiveStructure> {
    let g = sol.metric();
    let e = blaschke_coframe(&sol.u)?;
    let f = e.dual();
    let a = Field::from_index_fn(c.grid(), |i| {
        from_frame(
            &frame_tensor_from_a(c.field().at(i) * (-3.0 * sol.u.at(i)).exp()),
            &e.at(i),
            &f.at(i),
        )
    });
    Ok(ProjectiveStructure::new(levi_civita(&g)?.add_tensor(&a)?))
}

#[derive(Clone, Debug)]
pub struct Titeica {
    pub p: ProjectiveStructure,
    pub metric: MetricField,
    pub solution: WangSolution,
}

impl Titeica {
    pub fn conformal_class(&self) -> ConformalStructure {
        ConformalStructure::from_metric(&self.metric).expect("valid Blaschke metric")
    }
}

/// Constant-coefficient structure on the torus of modulus `tau`.
pub fn titeica(tau: Complex64, c: Complex64, n: usize) -> Result<Titeica> {
    if c == Complex64::new(0.0, 0.0) || !c.re.is_finite() || !c.im.is_finite() {
        return Err(Error::InvalidArgument("cubic coefficient must be nonzero".into()));
    }
    let grid = TorusGrid::with_tau(n, tau)?;
    let cd = CubicDifferential::constant(&grid, c);
    let solution = wang_solve(&cd, 1e-12, 50)?;
    let p = convex_connection(&solution, &cd)?;
    Ok(Titeica {
        metric: solution.metric(),
        p,
        solution,
    })
}

/// `max |Ric₁₂ − Ric₂₁| / 2` of the conformal representative.
pub fn closedness_check_with_metric(p: &ProjectiveStructure, g: &MetricField) -> Result<f64> {
    let conf = canonical_pair(p, g)?.conformal_rep;
    let ric = curvature_ricci_schouten(&conf)?.ricci;
    Ok(ric
        .values()
        .iter()
        .fold(0.0, |m, r| m.max(0.5 * (r[0][1] - r[1][0]).abs())))
}

pub fn closedness_check(p: &ProjectiveStructure, m: &ConformalStructure) -> Result<f64> {
    closedness_check_with_metric(p, &m.metric())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatness::liouville_curvature;
    use crate::frames::frame_scalars;
    use crate::projective::energy;
    use crate::samples;
    use crate::tensor_calc::{conformal_connection, t3_max_abs, t3_sub};

    #[test]
    fn half_norm_constant_gives_zero() {
        let g = TorusGrid::new(32).unwrap();
        let c = CubicDifferential::constant(&g, Complex64::new(0.5f64.sqrt(), 0.0));
        let s = wang_solve(&c, 1e-12, 20).unwrap();
        assert!(s.u.max_abs() < 1e-12);
        assert!(s.residual < 1e-12);
        assert!(s.iterations <= 2);
    }

    #[test]
    fn norm_two_constant_branch() {
        let g = TorusGrid::new(32).unwrap();
        let c = CubicDifferential::constant(&g, Complex64::new(0.0, 2f64.sqrt()));
        let s = wang_solve(&c, 1e-12, 20).unwrap();
        let want = 4f64.ln() / 6.0;
        assert!(s.u.values().iter().all(|u| (u - want).abs() < 1e-12));
    }

    #[test]
    fn vanishing_cubic_has_no_solution() {
        let g = TorusGrid::new(16).unwrap();
        let c = CubicDifferential::constant(&g, Complex64::new(0.0, 0.0));
        assert!(matches!(wang_solve(&c, 1e-10, 20), Err(Error::NoSolution)));
    }

    #[test]
    fn generic_cubic_converges_within_bracket() {
        let g = TorusGrid::with_tau(64, Complex64::new(0.2, 1.1)).unwrap();
        let c = samples::random_cubic(&g, 3, Complex64::new(0.8, 0.3), 0.5);
        let s = wang_solve(&c, 1e-10, 20).unwrap();
        assert!(s.residual < 1e-10);
        assert!(s.iterations <= 20);
        let c2: Vec<f64> = c.field().values().iter().map(|z| z.norm_sqr()).collect();
        let lo = (2.0 * c2.iter().cloned().fold(f64::INFINITY, f64::min)).ln() / 6.0;
        let hi = (2.0 * c2.iter().cloned().fold(0.0, f64::max)).ln() / 6.0;
        let umin = s.u.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let umax = s.u.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo - 1e-12 <= umin && umax <= hi + 1e-12);
        assert!(umax - umin > 1e-3);
    }

    #[test]
    fn titeica_is_flat_closed_extremal_with_expected_energy() {
        let t = titeica(Complex64::new(0.0, 1.0), Complex64::new(0.5f64.sqrt(), 0.0), 32).unwrap();
        let g0 = MetricField::reference(t.metric.grid());
        assert_eq!(t.metric, g0);
        let first = t.p.rep().at(0);
        for v in t.p.rep().field().values() {
            assert!(t3_max_abs(&t3_sub(v, &first)) < 1e-14);
        }
        let m = t.conformal_class();
        assert!((energy(&t.p, &m).unwrap() - 2.0).abs() < 1e-12);
        assert!(liouville_curvature(&t.p, &m).unwrap().max_abs() < 1e-9);
        assert!(closedness_check(&t.p, &m).unwrap() < 1e-9);
        let fs = frame_scalars(&t.p, &m).unwrap();
        assert!(fs.q_covariant.max_abs() < 1e-10);
        assert!(fs.q_schouten.max_abs() < 1e-10);
        let a0 = fs.a.at(0);
        assert!((a0.norm() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(fs.a.values().iter().all(|a| (a - a0).norm() < 1e-12));
    }

    #[test]
    fn titeica_on_sheared_lattice() {
        let tau = Complex64::new(0.3, 0.8);
        let c = Complex64::new(0.6, -0.9);
        let t = titeica(tau, c, 32).unwrap();
        let m = t.conformal_class();
        let u = t.solution.u.at(0);
        let fs = frame_scalars(&t.p, &m).unwrap();
        // |a| for the unit-det representative; |a|² dμ is scale invariant.
        let e = energy(&t.p, &m).unwrap();
        let want = 4.0 * c.norm_sqr() * (-6.0 * u).exp() * (2.0 * u).exp() * tau.im;
        assert!((e - want).abs() < 1e-10 * want);
        assert!(fs.q_covariant.max_abs() < 1e-10);
        assert!(liouville_curvature(&t.p, &m).unwrap().max_abs() < 1e-9);
        assert!(closedness_check(&t.p, &m).unwrap() < 1e-9);
    }

    #[test]
    fn titeica_rejects_zero() {
        assert!(titeica(Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0), 16).is_err());
    }

    #[test]
    fn closedness_witnesses() {
        let g = TorusGrid::new(64).unwrap();
        let m = samples::random_conformal(&g, 1, 0.3);
        let p = ProjectiveStructure::new(levi_civita(&m.metric()).unwrap());
        assert!(closedness_check(&p, &m).unwrap() < 1e-10);
        let beta = Field::from_fn(&g, |x| [0.0, (2.0 * std::f64::consts::PI * x[0]).sin()]);
        let flat = ConformalStructure::flat(&g);
        let p = ProjectiveStructure::new(conformal_connection(&flat.metric(), &beta).unwrap());
        assert!(closedness_check(&p, &flat).unwrap() > 1.0);
    }

    #[test]
    fn constant_cubic_is_holomorphic() {
        let g = TorusGrid::new(16).unwrap();
        let c = CubicDifferential::constant(&g, Complex64::new(1.0, 2.0));
        assert!(c.dbar_max().unwrap() < 1e-13);
        let c = samples::random_cubic(&g, 1, Complex64::new(1.0, 0.0), 0.3);
        assert!(c.dbar_max().unwrap() > 1e-3);
    }
}
