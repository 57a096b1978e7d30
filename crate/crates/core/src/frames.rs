//! Moving-frame reduction over a conformal structure: orthonormal coframes,
//! the complex scalars `a, k, q`, the connection form `φ` and its curvature.
//!
//! With `ζ₁ = ω¹ + iω²`, a real 1-form `θ = θ₁ω¹ + θ₂ω²` splits as
//! `θ = ½(θ₁ − iθ₂) ζ₁ + ½(θ₁ + iθ₂) ζ̄₁`, and `ζ₁∧ζ̄₁ = −2i ω¹∧ω²`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{
    gradient, integrate_chart_complex, resample, spectral_derivative, AffineTorusMap, Axis,
    ComplexField, Field, Mat2, ScalarField, Tensor3, TorusGrid,
};
use crate::projective::{canonical_pair, EndoOneForm, ProjectiveStructure};
use crate::tensor_calc::{
    curvature_ricci_schouten, det2, inv2, levi_civita, mat_mul, transpose, ConnectionField,
    MetricField, ZERO3,
};

const UNIMODULAR_TOL: f64 = 1e-10;

/// Unit-determinant representative `m_ij` of a conformal class.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalStructure(Field<Mat2>);

impl ConformalStructure {
    pub fn new(field: Field<Mat2>) -> Result<Self> {
        let g = MetricField::new(field)?;
        for (index, m) in g.field().values().iter().enumerate() {
            if (det2(m) - 1.0).abs() > UNIMODULAR_TOL {
                return Err(Error::NotUnimodular { index });
            }
        }
        Ok(Self(g.field().clone()))
    }

    /// `g / √det g`.
    pub fn from_metric(g: &MetricField) -> Result<Self> {
        Ok(Self(g.field().map(|m| {
            let s = det2(&m).sqrt();
            [[m[0][0] / s, m[0][1] / s], [m[1][0] / s, m[1][1] / s]]
        })))
    }

    /// Class of the reference flat metric of the grid.
    pub fn flat(grid: &TorusGrid) -> Self {
        Self::from_metric(&MetricField::reference(grid)).expect("reference metric is valid")
    }

    pub fn field(&self) -> &Field<Mat2> {
        &self.0
    }

    pub fn grid(&self) -> &TorusGrid {
        self.0.grid()
    }

    pub fn at(&self, idx: usize) -> Mat2 {
        self.0.at(idx)
    }

    /// The unit-determinant representative as a metric.
    pub fn metric(&self) -> MetricField {
        MetricField::new(self.0.clone()).expect("validated on construction")
    }

    pub fn pullback(&self, map: &AffineTorusMap) -> Result<Self> {
        let m = map.matrix_f64();
        let moved = resample(&self.0, map)?;
        Ok(Self(moved.map(|v| mat_mul(&transpose(&m), &mat_mul(&v, &m)))))
    }
}

/// Coframe `e^a_i` (row `a` is the covector `e^a`).
#[derive(Clone, Debug, PartialEq)]
pub struct CoframeField(Field<Mat2>);

impl CoframeField {
    pub fn new(field: Field<Mat2>) -> Result<Self> {
        field.check_finite()?;
        if let Some(index) = field.values().iter().position(|e| !(det2(e) > 0.0)) {
            return Err(Error::CoframeOrientation { index });
        }
        Ok(Self(field))
    }

    /// Upper-triangular coframe with `e^1⊗e^1 + e^2⊗e^2 = g`.
    pub fn cholesky(g: &MetricField) -> Result<Self> {
        for (index, m) in g.field().values().iter().enumerate() {
            if !(m[0][0] > 0.0) || !(det2(m) > 0.0) {
                return Err(Error::NotPositiveDefinite { index });
            }
        }
        Ok(Self(g.field().map(|m| {
            let r = m[0][0].sqrt();
            [[r, m[0][1] / r], [0.0, det2(&m).sqrt() / r]]
        })))
    }

    pub fn field(&self) -> &Field<Mat2> {
        &self.0
    }

    pub fn at(&self, idx: usize) -> Mat2 {
        self.0.at(idx)
    }

    pub fn grid(&self) -> &TorusGrid {
        self.0.grid()
    }

    /// Frame `f^i_a` dual to the coframe.
    pub fn dual(&self) -> Field<Mat2> {
        self.0.map(|e| inv2(&e))
    }

    /// `e^1∧e^2 = det(e) dx^1∧dx^2`.
    pub fn volume(&self) -> ScalarField {
        self.0.map(|e| det2(&e))
    }

    /// `Σ e^a ⊗ e^a`.
    pub fn metric(&self) -> Field<Mat2> {
        self.0.map(|e| mat_mul(&transpose(&e), &e))
    }

    /// `ζ₁ ↦ e^{iθ} ζ₁` pointwise.
    pub fn rotated(&self, theta: &ScalarField) -> Result<Self> {
        Ok(Self(self.0.zip_map(theta, |e, t| {
            let (s, c) = t.sin_cos();
            let r = [[c, -s], [s, c]];
            mat_mul(&r, &e)
        })?))
    }
}

pub fn orthonormal_coframe(m: &ConformalStructure) -> Result<CoframeField> {
    CoframeField::cholesky(&m.metric())
}

/// Connection forms `η^a_b(∂_i) = e^a_k (∂_i f^k_b + Γ^k_{ij} f^j_b)`;
/// entry `i` of the result holds the matrix `η(∂_i)`.
pub fn connection_forms(conn: &ConnectionField, coframe: &CoframeField) -> Result<[Field<Mat2>; 2]> {
    let f = coframe.dual();
    let df = gradient(&f)?;
    let make = |i: usize| {
        Field::from_index_fn(coframe.grid(), |idx| {
            let e = coframe.at(idx);
            let fv = f.at(idx);
            let d = df[i].at(idx);
            let gam = conn.at(idx);
            let mut eta = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    let mut v = 0.0;
                    for k in 0..2 {
                        let mut w = d[k][b];
                        for j in 0..2 {
                            w += gam[k][i][j] * fv[j][b];
                        }
                        v += e[a][k] * w;
                    }
                    eta[a][b] = v;
                }
            }
            eta
        })
    };
    Ok([make(0), make(1)])
}

/// `A^a_{bc} = e^a_i A^i_{jk} f^j_b f^k_c`.
pub fn to_frame(t: &Tensor3, e: &Mat2, f: &Mat2) -> Tensor3 {
    let mut out = ZERO3;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                let mut v = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        for k in 0..2 {
                            v += e[a][i] * t[i][j][k] * f[j][b] * f[k][c];
                        }
                    }
                }
                out[a][b][c] = v;
            }
        }
    }
    out
}

/// Inverse of [`to_frame`].
pub fn from_frame(t: &Tensor3, e: &Mat2, f: &Mat2) -> Tensor3 {
    to_frame(t, f, e)
}

/// Frame components of the `A`-type tensor with `a = A¹₁₁ + i A²₂₂`:
/// trace-free, symmetric and totally symmetric after lowering.
pub fn frame_tensor_from_a(a: Complex64) -> Tensor3 {
    let (x, y) = (a.re, a.im);
    let mut t = ZERO3;
    t[0][0][0] = x;
    t[0][0][1] = -y;
    t[0][1][0] = -y;
    t[0][1][1] = -x;
    t[1][0][0] = -y;
    t[1][0][1] = -x;
    t[1][1][0] = -x;
    t[1][1][1] = y;
    t
}

/// Rebuild `A_[g]` in coordinates from `a` alone.
pub fn reconstruct_a_form(a: &ComplexField, coframe: &CoframeField) -> Result<EndoOneForm> {
    let f = coframe.dual();
    let field = Field::from_index_fn(a.grid(), |idx| {
        from_frame(&frame_tensor_from_a(a.at(idx)), &coframe.at(idx), &f.at(idx))
    });
    EndoOneForm::new(field)
}

/// Complex scalars of the frame reduction. `phi1`, `phi2` are the
/// coordinate components `φ(∂_1)`, `φ(∂_2)`.
#[derive(Clone, Debug)]
pub struct FrameScalars {
    pub coframe: CoframeField,
    pub a: ComplexField,
    pub k: ComplexField,
    pub q_schouten: ComplexField,
    pub q_covariant: ComplexField,
    pub phi1: ComplexField,
    pub phi2: ComplexField,
}

impl FrameScalars {
    pub fn grid(&self) -> &TorusGrid {
        self.a.grid()
    }

    pub fn max_q_discrepancy(&self) -> f64 {
        self.q_schouten
            .zip_map(&self.q_covariant, |x, y| (x - y).norm())
            .map(|f| f.max_abs())
            .unwrap_or(f64::INFINITY)
    }
}

/// Split a real 1-form with frame components `θ_c` into its
/// `(ζ₁, ζ̄₁)` coefficients.
pub fn split_frame_form(t1: Complex64, t2: Complex64) -> (Complex64, Complex64) {
    let i = Complex64::i();
    (0.5 * (t1 - i * t2), 0.5 * (t1 + i * t2))
}

/// `k` and `q` from the frame Schouten components.
pub fn k_and_q(s: &Mat2) -> (Complex64, Complex64) {
    let k = Complex64::new(-0.5 * (s[0][0] + s[1][1]), 0.5 * (s[0][1] - s[1][0]));
    let qbar = Complex64::new(-0.25 * (s[0][0] - s[1][1]), -0.25 * (s[0][1] + s[1][0]));
    (k, qbar.conj())
}

/// `φ` from the Levi-Civita forms `ψ` and `β = b_a ω^a`:
/// `φ = (ψ¹₁ − b₁ω¹ − b₂ω²) + i(ψ²₁ + b₂ω¹ − b₁ω²)`.
fn phi_from_levi_civita(psi: &Mat2, b: [f64; 2], e_col: [f64; 2]) -> Complex64 {
    Complex64::new(
        psi[0][0] - b[0] * e_col[0] - b[1] * e_col[1],
        psi[1][0] + b[1] * e_col[0] - b[0] * e_col[1],
    )
}

/// `φ = ½(η¹₁ + η²₂) + (i/2)(η²₁ − η¹₂)` for a conformal connection.
pub fn phi_from_conformal(conn: &ConnectionField, coframe: &CoframeField) -> Result<[ComplexField; 2]> {
    let eta = connection_forms(conn, coframe)?;
    let f = |e: Mat2| Complex64::new(0.5 * (e[0][0] + e[1][1]), 0.5 * (e[1][0] - e[0][1]));
    Ok([eta[0].map(f), eta[1].map(f)])
}

/// Frame scalars for the unit-determinant representative and the
/// Cholesky coframe.
pub fn frame_scalars(p: &ProjectiveStructure, m: &ConformalStructure) -> Result<FrameScalars> {
    let g = m.metric();
    let coframe = CoframeField::cholesky(&g)?;
    frame_scalars_in(p, &g, &coframe)
}

/// Frame scalars for any representative `g` and any `g`-orthonormal,
/// positively oriented coframe.
pub fn frame_scalars_in(
    p: &ProjectiveStructure,
    g: &MetricField,
    coframe: &CoframeField,
) -> Result<FrameScalars> {
    let grid = g.grid().clone();
    let pair = canonical_pair(p, g)?;
    let psi = connection_forms(&levi_civita(g)?, coframe)?;
    let schouten = curvature_ricci_schouten(&pair.projective_rep)?.schouten;
    let f = coframe.dual();

    let mut a = Vec::with_capacity(grid.len());
    let mut k = Vec::with_capacity(grid.len());
    let mut q = Vec::with_capacity(grid.len());
    let mut phi = [Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len())];
    for idx in 0..grid.len() {
        let e = coframe.at(idx);
        let fv = f.at(idx);
        let gm = g.at(idx);
        let x = pair.x_g.at(idx);
        let af = to_frame(&pair.a.at(idx), &e, &fv);
        a.push(Complex64::new(af[0][0][0], af[1][1][1]));

        let xl = crate::tensor_calc::lower(&gm, x);
        let b = [
            xl[0] * fv[0][0] + xl[1] * fv[1][0],
            xl[0] * fv[0][1] + xl[1] * fv[1][1],
        ];
        for (i, ph) in phi.iter_mut().enumerate() {
            ph.push(phi_from_levi_civita(&psi[i].at(idx), b, [e[0][i], e[1][i]]));
        }

        let s = schouten.at(idx);
        let sf = mat_mul(&transpose(&fv), &mat_mul(&s, &fv));
        let (kv, qv) = k_and_q(&sf);
        k.push(kv);
        q.push(qv);
    }
    let a = Field::from_values(&grid, a)?;
    let [phi1, phi2] = phi;
    let phi1 = Field::from_values(&grid, phi1)?;
    let phi2 = Field::from_values(&grid, phi2)?;

    let da = gradient(&a)?;
    let q_covariant = Field::from_index_fn(&grid, |idx| {
        let av = a.at(idx);
        let ph = [phi1.at(idx), phi2.at(idx)];
        let th: Vec<Complex64> = (0..2)
            .map(|i| da[i].at(idx) - 2.0 * av * ph[i] + av * ph[i].conj())
            .collect();
        let fv = f.at(idx);
        let t1 = th[0] * fv[0][0] + th[1] * fv[1][0];
        let t2 = th[0] * fv[0][1] + th[1] * fv[1][1];
        -split_frame_form(t1, t2).1
    });

    Ok(FrameScalars {
        coframe: coframe.clone(),
        a,
        k: Field::from_values(&grid, k)?,
        q_schouten: Field::from_values(&grid, q)?,
        q_covariant,
        phi1,
        phi2,
    })
}

/// Curvature `dφ = R ζ₁∧ζ̄₁` and the residual of
/// `R = |a|² + ½k − k̄`.
#[derive(Clone, Debug)]
pub struct ConformalCurvature {
    pub r: ComplexField,
    pub residual: ComplexField,
    pub max_residual: f64,
    /// `i∫dφ`.
    pub integral: Complex64,
}

pub fn conformal_curvature(fs: &FrameScalars) -> Result<ConformalCurvature> {
    let d1 = spectral_derivative(&fs.phi2, Axis::X1)?;
    let d2 = spectral_derivative(&fs.phi1, Axis::X2)?;
    let dphi = d1.zip_map(&d2, |a, b| a - b)?;
    let vol = fs.coframe.volume();
    let r = dphi.zip_map(&vol, |d, v| d / (Complex64::new(0.0, -2.0) * v))?;
    let residual = Field::from_index_fn(fs.grid(), |idx| {
        let a = fs.a.at(idx);
        let k = fs.k.at(idx);
        r.at(idx) - (a.norm_sqr() + 0.5 * k - k.conj())
    });
    let integral = Complex64::i() * integrate_chart_complex(&dphi)?;
    Ok(ConformalCurvature {
        max_residual: residual.max_abs(),
        r,
        residual,
        integral,
    })
}

/// Trace of the pulled-back lift metric: `4|a|² + k + k̄`.
pub fn h_pullback_trace(fs: &FrameScalars) -> Result<ScalarField> {
    fs.a.zip_map(&fs.k, |a, k| 4.0 * a.norm_sqr() + 2.0 * k.re)
}

/// `4|a|² · det e`, a density relative to `dx^1∧dx^2`.
pub fn frame_energy_density(fs: &FrameScalars) -> Result<ScalarField> {
    fs.a.zip_map(&fs.coframe.volume(), |a, v| 4.0 * a.norm_sqr() * v)
}
