//! Flatness of a projective structure: the Cartan connection matrix at a
//! point and the Liouville curvature.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::frames::{ConformalStructure, CoframeField};
use crate::grid::{ComplexField, Field, Mat2};
use crate::projective::{canonical_pair, ProjectiveStructure};
use crate::tensor_calc::{covariant_derivative_bilinear, curvature_ricci_schouten, det2, MetricField};

/// One-form components `(θ(∂_1), θ(∂_2))` at a point.
pub type Form = [f64; 2];

/// Scale between the antisymmetrised covariant derivative of the Schouten
/// tensor and the Cartan curvature functions. Pinned by the `dq` structure
/// equation in the tests below.
pub const LIOUVILLE_NORMALIZATION: f64 = 1.0;

fn form_add(a: Form, b: Form) -> Form {
    [a[0] + b[0], a[1] + b[1]]
}

fn form_scale(a: Form, s: f64) -> Form {
    [a[0] * s, a[1] * s]
}

/// Assemble the sl(3)-valued Cartan matrix at a point. Index 0 is the
/// projective row/column; `eta[i][j]` is `η^i_j`, `omega[i]` is `ω^i`,
/// `dxi[j]` is the caller-supplied `dξ_j`.
pub fn cartan_matrix(
    eta: &[[Form; 2]; 2],
    omega: &[Form; 2],
    xi: [f64; 2],
    s: &Mat2,
    dxi: &[Form; 2],
) -> [[Form; 3]; 3] {
    let tr = form_add(eta[0][0], eta[1][1]);
    let xw = form_add(form_scale(omega[0], xi[0]), form_scale(omega[1], xi[1]));
    let mut th = [[[0.0; 2]; 3]; 3];
    th[0][0] = form_add(form_scale(tr, -1.0 / 3.0), form_scale(xw, -1.0));
    for j in 0..2 {
        let mut v = dxi[j];
        for k in 0..2 {
            v = form_add(v, form_scale(eta[k][j], -xi[k]));
            v = form_add(v, form_scale(omega[k], -s[j][k]));
        }
        th[0][j + 1] = form_add(v, form_scale(xw, -xi[j]));
        th[j + 1][0] = omega[j];
        for i in 0..2 {
            let mut w = form_add(eta[i][j], form_scale(omega[i], xi[j]));
            if i == j {
                w = form_add(w, form_scale(tr, -1.0 / 3.0));
            }
            th[i + 1][j + 1] = w;
        }
    }
    th
}

/// Chart coefficients `ℓ_j` of the Liouville curvature.
#[derive(Clone, Debug, PartialEq)]
pub struct LiouvilleField(Field<[f64; 2]>);

impl LiouvilleField {
    pub fn field(&self) -> &Field<[f64; 2]> {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .values()
            .iter()
            .fold(0.0, |m, v| m.max(v[0].abs()).max(v[1].abs()))
    }

    /// Complex curvature `L = −½(L₂ − iL₁)` with `L_a = ℓ_i f^i_a / det e`.
    pub fn to_frame(&self, coframe: &CoframeField) -> Result<ComplexField> {
        self.0.zip_map(coframe.field(), |l, e| {
            let fv = crate::tensor_calc::inv2(&e);
            let d = det2(&e);
            let la = [
                (l[0] * fv[0][0] + l[1] * fv[1][0]) / d,
                (l[0] * fv[0][1] + l[1] * fv[1][1]) / d,
            ];
            -0.5 * Complex64::new(la[1], -la[0])
        })
    }
}

pub fn liouville_curvature_with_metric(
    p: &ProjectiveStructure,
    g: &MetricField,
) -> Result<LiouvilleField> {
    let rep = canonical_pair(p, g)?.projective_rep;
    let s = curvature_ricci_schouten(&rep)?.schouten;
    let [d1, d2] = covariant_derivative_bilinear(s.field(), &rep)?;
    let l = d1.zip_map(&d2, |a, b| {
        [
            LIOUVILLE_NORMALIZATION * (b[0][0] - a[0][1]),
            LIOUVILLE_NORMALIZATION * (b[1][0] - a[1][1]),
        ]
    })?;
    Ok(LiouvilleField(l))
}

pub fn liouville_curvature(p: &ProjectiveStructure, m: &ConformalStructure) -> Result<LiouvilleField> {
    liouville_curvature_with_metric(p, &m.metric())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlatnessReport {
    pub max_abs_liouville: f64,
    pub tol: f64,
    pub flat: bool,
}

pub fn is_flat(p: &ProjectiveStructure, m: &ConformalStructure, tol: f64) -> Result<FlatnessReport> {
    let max = liouville_curvature(p, m)?.max_abs();
    Ok(FlatnessReport {
        max_abs_liouville: max,
        tol,
        flat: max < tol,
    })
}
