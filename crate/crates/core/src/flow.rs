//! First variation of the energy over conformal structures, a descent flow
//! with Armijo backtracking, and the integral identities on the torus.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frames::{conformal_curvature, frame_scalars, ConformalStructure, FrameScalars};
use crate::grid::{integrate_chart, AffineTorusMap, ComplexField, Field, Mat2};
use crate::projective::{energy, ProjectiveStructure};
use crate::tensor_calc::{inv2, mat_mul, MetricField};

/// Euler characteristic of the torus.
pub const EULER_CHARACTERISTIC: f64 = 0.0;

#[derive(Clone, Debug)]
pub struct Gradient {
    /// Trace-free symmetric perturbation `D_ij` of `m` (steepest descent).
    pub direction: Field<Mat2>,
    pub q: ComplexField,
    /// `(∫|q|² dμ)^{1/2}`.
    pub q_l2: f64,
    /// First-order change of the energy along `direction`: `−4∫|q|² dμ`.
    pub slope: f64,
}

impl Gradient {
    pub fn max_abs(&self) -> f64 {
        self.direction
            .values()
            .iter()
            .fold(0.0, |m, d| m.max(d.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))))
    }
}

fn q_l2_sq(fs: &FrameScalars) -> Result<f64> {
    integrate_chart(&fs.q_covariant.zip_map(&fs.coframe.volume(), |q, v| q.norm_sqr() * v)?)
}

/// Steepest-descent direction from the first variation
/// `f′(0) = 4∫Re(qB) dμ` for `g_t = g − tB`; the choice `B = −q̄` becomes the
/// frame matrix `[[Re q, −Im q], [−Im q, −Re q]]`.
pub fn gradient_from_scalars(fs: &FrameScalars) -> Result<Gradient> {
    let direction = fs.q_covariant.zip_map(fs.coframe.field(), |q, e| {
        let d = [[q.re, -q.im], [-q.im, -q.re]];
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        v += e[a][i] * e[b][j] * d[a][b];
                    }
                }
                out[i][j] = v;
            }
        }
        let o = 0.5 * (out[0][1] + out[1][0]);
        out[0][1] = o;
        out[1][0] = o;
        out
    })?;
    let qq = q_l2_sq(fs)?;
    Ok(Gradient {
        direction,
        q: fs.q_covariant.clone(),
        q_l2: qq.sqrt(),
        slope: -4.0 * qq,
    })
}

pub fn gradient(p: &ProjectiveStructure, m: &ConformalStructure) -> Result<Gradient> {
    gradient_from_scalars(&frame_scalars(p, m)?)
}

/// `m + t D`, rescaled back to unit determinant.
pub fn perturb(m: &ConformalStructure, direction: &Field<Mat2>, t: f64) -> Result<ConformalStructure> {
    let g = m.field().zip_map(direction, |a, d| {
        [
            [a[0][0] + t * d[0][0], a[0][1] + t * d[0][1]],
            [a[1][0] + t * d[1][0], a[1][1] + t * d[1][1]],
        ]
    })?;
    ConformalStructure::from_metric(&MetricField::new(g)?)
}

/// Search direction `B = (1 − κΔ₀)^{-1} m^{-1} D m^{-1}` and its exact slope
/// `E′(B) = −2∫⟨D, B⟩_m dμ`. Since `P = (1 − κΔ₀)^{-1}` is positive and
/// symmetric on `L²(dx)` and `dμ = dx` for unit determinant, the slope is
/// never positive. `κ = 0` gives the plain gradient.
pub fn preconditioned_direction(
    m: &ConformalStructure,
    grad: &Gradient,
    kappa: f64,
) -> Result<(Field<Mat2>, f64)> {
    if kappa == 0.0 {
        return Ok((grad.direction.clone(), grad.slope));
    }
    let raised = m.field().zip_map(&grad.direction, |a, d| {
        let ai = inv2(&a);
        mat_mul(&ai, &mat_mul(&d, &ai))
    })?;
    let h = inv2(&m.grid().reference_metric());
    let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    let b = raised.apply_multiplier(|k1, k2| {
        let q = h[0][0] * k1 * k1 + 2.0 * h[0][1] * k1 * k2 + h[1][1] * k2 * k2;
        Complex64::new(1.0 / (1.0 + kappa * four_pi2 * q), 0.0)
    });
    let pairing = raised.zip_map(&b, |r, b| {
        r[0][0] * b[0][0] + r[0][1] * b[0][1] + r[1][0] * b[1][0] + r[1][1] * b[1][1]
    })?;
    let slope = -2.0 * integrate_chart(&pairing)?;
    Ok((b, slope))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowOptions {
    /// Initial trial step of every line search.
    pub step: f64,
    pub max_iter: usize,
    pub tol_q: f64,
    pub armijo: f64,
    pub contraction: f64,
    pub min_step: f64,
    /// Smoothing length `κ` of the Sobolev preconditioner; 0 for plain
    /// steepest descent.
    pub sobolev: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            step: 0.5,
            max_iter: 500,
            tol_q: 1e-6,
            armijo: 0.1,
            contraction: 0.5,
            min_step: 1e-12,
            sobolev: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowRecord {
    pub iter: usize,
    pub energy: f64,
    pub q_l2: f64,
    /// Step accepted after this record (0 at the final record).
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    pub records: Vec<FlowRecord>,
    pub final_structure: ConformalStructure,
    pub converged: bool,
}

impl FlowTrajectory {
    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }

    pub fn final_q_l2(&self) -> f64 {
        self.records.last().map(|r| r.q_l2).unwrap_or(f64::NAN)
    }
}

pub fn descend(
    p: &ProjectiveStructure,
    m0: &ConformalStructure,
    opts: &FlowOptions,
) -> Result<FlowTrajectory> {
    if !(opts.step > 0.0
        && opts.tol_q > 0.0
        && opts.contraction > 0.0
        && opts.contraction < 1.0
        && opts.sobolev >= 0.0)
    {
        return Err(Error::InvalidArgument("flow options must be positive".into()));
    }
    let mut m = m0.clone();
    let mut e = energy(p, &m)?;
    let mut records = Vec::new();
    for iter in 0..=opts.max_iter {
        let grad = gradient(p, &m)?;
        if grad.q_l2 < opts.tol_q || iter == opts.max_iter {
            records.push(FlowRecord {
                iter,
                energy: e,
                q_l2: grad.q_l2,
                step: 0.0,
            });
            return Ok(FlowTrajectory {
                records,
                final_structure: m,
                converged: grad.q_l2 < opts.tol_q,
            });
        }
        let (dir, slope) = preconditioned_direction(&m, &grad, opts.sobolev)?;
        let mut t = opts.step;
        let accepted = loop {
            if t < opts.min_step {
                break None;
            }
            if let Ok(trial) = perturb(&m, &dir, t) {
                let et = energy(p, &trial)?;
                if et <= e + opts.armijo * t * slope {
                    break Some((trial, et));
                }
            }
            t *= opts.contraction;
        };
        match accepted {
            Some((trial, et)) => {
                records.push(FlowRecord {
                    iter,
                    energy: e,
                    q_l2: grad.q_l2,
                    step: t,
                });
                m = trial;
                e = et;
            }
            None => {
                records.push(FlowRecord {
                    iter,
                    energy: e,
                    q_l2: grad.q_l2,
                    step: 0.0,
                });
                return Err(Error::Stalled {
                    iteration: iter,
                    trajectory: Box::new(FlowTrajectory {
                        records,
                        final_structure: m,
                        converged: false,
                    }),
                });
            }
        }
    }
    unreachable!("loop returns at max_iter")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    /// `E_p` from the compatibility tensor.
    pub energy: f64,
    /// `∫4|a|² dμ` from the frame scalars.
    pub energy_frame: f64,
    /// Real part of `i∫dφ`.
    pub gauss_bonnet_phi: f64,
    pub gauss_bonnet_phi_imag: f64,
    /// `∫(2|a|² − Re k) dμ`.
    pub gauss_bonnet_omega: f64,
    /// `E − 2πχ − ½∫(4|a|² + k + k̄) dμ`.
    pub dirichlet_residual: f64,
    /// `½∫(4|a|² + k + k̄) dμ`.
    pub lower_bound: f64,
    pub euler_char_target: f64,
}

/// Integral identities for the frame scalars `fs`; `energy` is `E_p`
/// evaluated independently of the frame.
pub fn identity_report_from_scalars(fs: &FrameScalars, energy: f64) -> Result<IdentityReport> {
    let vol = fs.coframe.volume();
    let integ = |f: &(dyn Fn(Complex64, Complex64) -> f64 + Sync)| -> Result<f64> {
        let d = Field::from_index_fn(fs.grid(), |i| f(fs.a.at(i), fs.k.at(i)) * vol.at(i));
        integrate_chart(&d)
    };
    let energy_frame = integ(&|a, _| 4.0 * a.norm_sqr())?;
    let omega = integ(&|a, k| 2.0 * a.norm_sqr() - k.re)?;
    let trace = integ(&|a, k| 4.0 * a.norm_sqr() + 2.0 * k.re)?;
    let cc = conformal_curvature(fs)?;
    let target = 2.0 * std::f64::consts::PI * EULER_CHARACTERISTIC;
    Ok(IdentityReport {
        energy,
        energy_frame,
        gauss_bonnet_phi: cc.integral.re,
        gauss_bonnet_phi_imag: cc.integral.im,
        gauss_bonnet_omega: omega,
        dirichlet_residual: energy - target - 0.5 * trace,
        lower_bound: 0.5 * trace,
        euler_char_target: target,
    })
}

pub fn identity_report(p: &ProjectiveStructure, m: &ConformalStructure) -> Result<IdentityReport> {
    identity_report_from_scalars(&frame_scalars(p, m)?, energy(p, m)?)
}

/// `|E(Φ*p, Φ*m) − E(p, m)|`.
pub fn diffeo_invariance_check(
    p: &ProjectiveStructure,
    m: &ConformalStructure,
    map: &AffineTorusMap,
) -> Result<f64> {
    let e0 = energy(p, m)?;
    let e1 = energy(&p.pullback(map)?, &m.pullback(map)?)?;
    Ok((e1 - e0).abs())
}
