//! Compatibility of a projective structure with a conformal structure: the
//! vector field `X_g`, the trace-free form `A_[g]`, the canonical pair of
//! connections and the energy `E_p`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frames::ConformalStructure;
use crate::grid::{integrate_chart, AffineTorusMap, Field, Mat2, ScalarField, Tensor3, TorusGrid, VectorField};
use crate::tensor_calc::{
    det2, inv2, iota2, levi_civita, lower, metric_times_vector, pullback_connection, t3_add,
    t3_max_abs, t3_sub, trace2, trace_free, trace_free2, ConnectionField, MetricField,
    PointTensor,
};

/// A projective structure, stored as one representative torsion-free
/// connection.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectiveStructure {
    rep: ConnectionField,
}

impl ProjectiveStructure {
    pub fn new(rep: ConnectionField) -> Self {
        Self { rep }
    }

    pub fn rep(&self) -> &ConnectionField {
        &self.rep
    }

    pub fn grid(&self) -> &TorusGrid {
        self.rep.grid()
    }

    /// Same structure, representative `∇ + ι(Υ)`.
    pub fn with_projective_change(&self, upsilon: &crate::grid::OneFormField) -> Result<Self> {
        Ok(Self::new(self.rep.projective_change(upsilon)?))
    }

    pub fn pullback(&self, map: &AffineTorusMap) -> Result<Self> {
        Ok(Self::new(pullback_connection(&self.rep, map)?))
    }
}

/// The tensor `A_[g]`, components `A^i_{jk}`.
#[derive(Clone, Debug, PartialEq)]
pub struct EndoOneForm(Field<Tensor3>);

/// Worst violations of the algebraic identities an `A_[g]` must satisfy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EndoResiduals {
    pub trace: f64,
    pub symmetry: f64,
    pub g_symmetry: f64,
}

impl EndoResiduals {
    pub fn max(&self) -> f64 {
        self.trace.max(self.symmetry).max(self.g_symmetry)
    }
}

impl EndoOneForm {
    pub fn new(field: Field<Tensor3>) -> Result<Self> {
        field.check_finite()?;
        Ok(Self(field))
    }

    pub fn field(&self) -> &Field<Tensor3> {
        &self.0
    }

    pub fn at(&self, idx: usize) -> Tensor3 {
        self.0.at(idx)
    }

    pub fn invariant_residuals(&self, g: &MetricField) -> EndoResiduals {
        let mut r = EndoResiduals {
            trace: 0.0,
            symmetry: 0.0,
            g_symmetry: 0.0,
        };
        for (idx, a) in self.0.values().iter().enumerate() {
            let t = trace2(a);
            r.trace = r.trace.max(t[0].abs()).max(t[1].abs());
            let m = g.at(idx);
            for i in 0..2 {
                r.symmetry = r.symmetry.max((a[i][0][1] - a[i][1][0]).abs());
                for j in 0..2 {
                    for k in 0..2 {
                        let lhs: f64 = (0..2).map(|l| m[i][l] * a[l][j][k]).sum();
                        let rhs: f64 = (0..2).map(|l| m[k][l] * a[l][j][i]).sum();
                        r.g_symmetry = r.g_symmetry.max((lhs - rhs).abs());
                    }
                }
            }
        }
        r
    }

    /// `|A|²_g = g_{il} g^{jm} g^{kp} A^i_{jk} A^l_{mp}` at every node.
    pub fn norm_sqr(&self, g: &MetricField) -> Result<ScalarField> {
        self.0.zip_map(g.field(), |a, m| norm_sqr_point(&a, &m))
    }
}

pub fn norm_sqr_point(a: &Tensor3, g: &Mat2) -> f64 {
    let h = inv2(g);
    let mut s = 0.0;
    for i in 0..2 {
        for l in 0..2 {
            for j in 0..2 {
                for m in 0..2 {
                    for k in 0..2 {
                        for p in 0..2 {
                            s += g[i][l] * h[j][m] * h[k][p] * a[i][j][k] * a[l][m][p];
                        }
                    }
                }
            }
        }
    }
    s
}

/// `c_n = (n+1)/((n+2)(n−1))`.
pub fn x_g_constant(n: usize) -> f64 {
    let n = n as f64;
    (n + 1.0) / ((n + 2.0) * (n - 1.0))
}

/// `X^i = c_n g^{jk} (D_0)^i_{jk}` at one point, for the difference tensor
/// `D = ∇ − ∇^g` and metric `g` (`n x n`).
pub fn x_g_point(d: &PointTensor, g: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = d.dim();
    if n < 2 {
        return Err(Error::Dimension(n));
    }
    if g.nrows() != n || g.ncols() != n {
        return Err(Error::Dimension(g.nrows()));
    }
    let h = g
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite { index: 0 })?;
    let d0 = trace_free(d);
    let c = x_g_constant(n);
    Ok((0..n)
        .map(|i| {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    s += h[(j, k)] * d0.get(i, j, k);
                }
            }
            c * s
        })
        .collect())
}

/// `(D − g⊗X_g)_0` at one point, any dimension.
pub fn a_form_point(d: &PointTensor, g: &DMatrix<f64>) -> Result<PointTensor> {
    let x = x_g_point(d, g)?;
    let gx = PointTensor::from_fn(d.dim(), |i, j, k| g[(j, k)] * x[i])?;
    Ok(trace_free(&d.sub(&gx)))
}

/// Pointwise `|A|_g^p` in any dimension.
pub fn a_norm_power_point(a: &PointTensor, g: &DMatrix<f64>, power: f64) -> Result<f64> {
    let n = a.dim();
    let h = g
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite { index: 0 })?;
    let mut s = 0.0;
    for i in 0..n {
        for l in 0..n {
            for j in 0..n {
                for m in 0..n {
                    for k in 0..n {
                        for p in 0..n {
                            s += g[(i, l)] * h[(j, m)] * h[(k, p)] * a.get(i, j, k) * a.get(l, m, p);
                        }
                    }
                }
            }
        }
    }
    Ok(s.max(0.0).powf(power / 2.0))
}

fn x_g_2d(d: &Tensor3, g: &Mat2) -> [f64; 2] {
    let h = inv2(g);
    let d0 = trace_free2(d);
    let c = x_g_constant(2);
    let mut x = [0.0; 2];
    for (i, xi) in x.iter_mut().enumerate() {
        let mut s = 0.0;
        for j in 0..2 {
            for k in 0..2 {
                s += h[j][k] * d0[i][j][k];
            }
        }
        *xi = c * s;
    }
    x
}

fn a_form_2d(d: &Tensor3, g: &Mat2) -> Tensor3 {
    let x = x_g_2d(d, g);
    trace_free2(&t3_sub(d, &metric_times_vector(g, x)))
}

/// `X_g` for the connection `conn` relative to `g`.
pub fn x_g(conn: &ConnectionField, g: &MetricField) -> Result<VectorField> {
    let d = conn.difference(&levi_civita(g)?)?;
    d.zip_map(g.field(), |d, m| x_g_2d(&d, &m))
}

pub fn a_form(p: &ProjectiveStructure, g: &MetricField) -> Result<EndoOneForm> {
    let d = p.rep().difference(&levi_civita(g)?)?;
    EndoOneForm::new(d.zip_map(g.field(), |d, m| a_form_2d(&d, &m))?)
}

/// The `[g]`-conformal connection of the canonical pair and its
/// projective partner `conformal_rep + A_[g] ∈ p`.
#[derive(Clone, Debug)]
pub struct CanonicalPair {
    pub conformal_rep: ConnectionField,
    pub projective_rep: ConnectionField,
    pub x_g: VectorField,
    pub a: EndoOneForm,
}

impl CanonicalPair {
    /// The one-form `β` with `∇g = 2β⊗g` for `conformal_rep`; equals `X_g♭`.
    pub fn beta(&self, g: &MetricField) -> Result<crate::grid::OneFormField> {
        self.x_g.zip_map(g.field(), |x, m| lower(&m, x))
    }
}

pub fn canonical_pair(p: &ProjectiveStructure, g: &MetricField) -> Result<CanonicalPair> {
    let lc = levi_civita(g)?;
    let d = p.rep().difference(&lc)?;
    let grid = g.grid();
    let mut xs = Vec::with_capacity(grid.len());
    let mut conf = Vec::with_capacity(grid.len());
    let mut proj = Vec::with_capacity(grid.len());
    let mut aa = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let m = g.at(idx);
        let dv = d.at(idx);
        let x = x_g_2d(&dv, &m);
        let a = trace_free2(&t3_sub(&dv, &metric_times_vector(&m, x)));
        let corr = t3_sub(&metric_times_vector(&m, x), &iota2(lower(&m, x)));
        let c = t3_add(&lc.at(idx), &corr);
        xs.push(x);
        proj.push(t3_add(&c, &a));
        conf.push(c);
        aa.push(a);
    }
    Ok(CanonicalPair {
        conformal_rep: ConnectionField::new(Field::from_values(grid, conf)?)?,
        projective_rep: ConnectionField::new(Field::from_values(grid, proj)?)?,
        x_g: Field::from_values(grid, xs)?,
        a: EndoOneForm::new(Field::from_values(grid, aa)?)?,
    })
}

/// `|A_[g]|²_g √det g`, a density relative to `dx^1∧dx^2`.
pub fn energy_density_with_metric(p: &ProjectiveStructure, g: &MetricField) -> Result<ScalarField> {
    let d = p.rep().difference(&levi_civita(g)?)?;
    d.zip_map(g.field(), |d, m| {
        norm_sqr_point(&a_form_2d(&d, &m), &m) * det2(&m).sqrt()
    })
}

pub fn energy_with_metric(p: &ProjectiveStructure, g: &MetricField) -> Result<f64> {
    integrate_chart(&energy_density_with_metric(p, g)?)
}

pub fn energy_density(p: &ProjectiveStructure, m: &ConformalStructure) -> Result<ScalarField> {
    energy_density_with_metric(p, &m.metric())
}

pub fn energy(p: &ProjectiveStructure, m: &ConformalStructure) -> Result<f64> {
    energy_with_metric(p, &m.metric())
}

/// Largest entry of a tensor field.
pub fn tensor_field_max_abs(t: &Field<Tensor3>) -> f64 {
    t.values().iter().fold(0.0, |m, v| m.max(t3_max_abs(v)))
}

/// `max |trace_free(a − b)|` over the grid.
pub fn trace_free_difference(a: &ConnectionField, b: &ConnectionField) -> Result<f64> {
    Ok(tensor_field_max_abs(&a.difference(b)?.map(|t| trace_free2(&t))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;
    use crate::tensor_calc::{conformal_connection, ZERO3};
    use proptest::prelude::*;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(n).unwrap()
    }

    #[test]
    fn conformal_connection_gives_x_equal_beta_and_zero_a() {
        let gr = grid(32);
        let g = samples::random_metric(&gr, 3, 0.3);
        let beta = samples::random_one_form(&gr, 4, 0.5);
        let conn = conformal_connection(&g, &beta).unwrap();
        let x = x_g(&conn, &g).unwrap();
        let ginv = g.inverse();
        for idx in 0..gr.len() {
            let want = crate::tensor_calc::raise(&ginv.at(idx), beta.at(idx));
            assert!((x.at(idx)[0] - want[0]).abs() < 1e-10);
            assert!((x.at(idx)[1] - want[1]).abs() < 1e-10);
        }
        let a = a_form(&ProjectiveStructure::new(conn), &g).unwrap();
        assert!(tensor_field_max_abs(a.field()) < 1e-10);
    }

    #[test]
    fn levi_civita_has_zero_x() {
        let gr = grid(16);
        let g = samples::random_metric(&gr, 5, 0.3);
        let x = x_g(&levi_civita(&g).unwrap(), &g).unwrap();
        assert!(x.values().iter().all(|v| v[0].abs() < 1e-13 && v[1].abs() < 1e-13));
    }

    /// Coordinate formulas for flat `g = δ` and constant `Γ`.
    fn w_oracle(gam: &Tensor3) -> (Tensor3, [f64; 2]) {
        let w0 = gam[1][0][0];
        let w1 = (-gam[0][0][0] + 2.0 * gam[1][0][1]) / 3.0;
        let w2 = (-2.0 * gam[0][0][1] + gam[1][1][1]) / 3.0;
        let w3 = -gam[0][1][1];
        let a1 = 0.5 * (w3 - 3.0 * w1);
        let a2 = 0.5 * (3.0 * w2 - w0);
        let x = 0.5 * a1;
        let y = 0.5 * a2;
        let mut a = ZERO3;
        a[0][0][0] = x;
        a[0][0][1] = -y;
        a[0][1][0] = -y;
        a[0][1][1] = -x;
        a[1][0][0] = -y;
        a[1][0][1] = -x;
        a[1][1][0] = -x;
        a[1][1][1] = y;
        (a, [-0.75 * (w1 + w3), 0.75 * (w0 + w2)])
    }

    #[test]
    fn single_christoffel_symbol_on_flat_metric() {
        let gr = grid(8);
        let c = 0.8;
        let mut gam = ZERO3;
        gam[1][0][0] = c;
        let p = ProjectiveStructure::new(ConnectionField::from_fn(&gr, |_| gam).unwrap());
        let g = MetricField::euclidean(&gr);
        let a = a_form(&p, &g).unwrap().at(0);
        let (want, _) = w_oracle(&gam);
        assert!(t3_max_abs(&t3_sub(&a, &want)) < 1e-15);
        // direct evaluation: X = (0, 3c/4), A^1_12 = A^2_11 = c/4, A^2_22 = −c/4
        assert!((a[0][0][1] - c / 4.0).abs() < 1e-15);
        assert!((a[1][0][0] - c / 4.0).abs() < 1e-15);
        assert!((a[1][1][1] + c / 4.0).abs() < 1e-15);
        assert!(a[0][0][0].abs() < 1e-15 && a[0][1][1].abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn constant_connection_matches_coordinate_formulas(
            v in proptest::collection::vec(-2.0f64..2.0, 6)
        ) {
            let mut gam = ZERO3;
            gam[0][0][0] = v[0];
            gam[0][0][1] = v[1];
            gam[0][1][0] = v[1];
            gam[0][1][1] = v[2];
            gam[1][0][0] = v[3];
            gam[1][0][1] = v[4];
            gam[1][1][0] = v[4];
            gam[1][1][1] = v[5];
            let (want_a, want_x) = w_oracle(&gam);
            let x = x_g_2d(&gam, &crate::tensor_calc::IDENTITY);
            let a = a_form_2d(&gam, &crate::tensor_calc::IDENTITY);
            prop_assert!(t3_max_abs(&t3_sub(&a, &want_a)) < 1e-13);
            prop_assert!((x[0] - want_x[0]).abs() < 1e-13 && (x[1] - want_x[1]).abs() < 1e-13);
        }

        #[test]
        fn pointwise_three_dimensional_properties(
            d in proptest::collection::vec(-1.0f64..1.0, 27),
            l in proptest::collection::vec(-0.5f64..0.5, 6),
            u in proptest::collection::vec(-1.0f64..1.0, 3),
            f in -1.0f64..1.0,
        ) {
            let dt = PointTensor::from_fn(3, |i, j, k| d[(i * 3 + j) * 3 + k]).unwrap();
            // g = L L^t + I
            let lm = DMatrix::from_row_slice(3, 3, &[l[0], 0.0, 0.0, l[1], l[2], 0.0, l[3], l[4], l[5]]);
            let g = &lm * lm.transpose() + DMatrix::identity(3, 3);
            let a = a_form_point(&dt, &g).unwrap();
            // (i) trace-free, (ii) symmetric
            prop_assert!(crate::tensor_calc::trace(&a).iter().all(|t| t.abs() < 1e-12));
            for i in 0..3 { for j in 0..3 { for k in 0..3 {
                prop_assert!((a.get(i, j, k) - a.get(i, k, j)).abs() < 1e-15);
            }}}
            // (iii) projective change of ∇ leaves A unchanged
            let changed = dt.add(&crate::tensor_calc::iota(&u).unwrap());
            prop_assert!(a_form_point(&changed, &g).unwrap().sub(&a).max_abs() < 1e-12);
            // (iv) conformal rescaling e^{2f} g: D changes by g⊗∇f − ι(df) at
            // a point; with a pointwise-constant rescale only g changes.
            let g2 = &g * (2.0 * f).exp();
            prop_assert!(a_form_point(&dt, &g2).unwrap().sub(&a).max_abs() < 1e-12);
            // (v) a conformal difference tensor g⊗β♯ − ι(β) has A = 0
            let h = g.clone().try_inverse().unwrap();
            let bup: Vec<f64> = (0..3).map(|i| (0..3).map(|k| h[(i, k)] * u[k]).sum()).collect();
            let conf = PointTensor::from_fn(3, |i, j, k| g[(j, k)] * bup[i]).unwrap()
                .sub(&crate::tensor_calc::iota(&u).unwrap());
            prop_assert!(a_form_point(&conf, &g).unwrap().max_abs() < 1e-12);
            let x = x_g_point(&conf, &g).unwrap();
            for i in 0..3 { prop_assert!((x[i] - bup[i]).abs() < 1e-12); }
        }
    }

    /// Term-by-term evaluation of `X^i = c_n g^{jk}(D_0)^i_{jk}` with its own
    /// trace-free projection.
    #[test]
    fn x_g_matches_contraction_oracle_in_three_dimensions() {
        let d = PointTensor::from_fn(3, |i, j, k| ((i * 7 + j * 3 + k * 5) % 11) as f64 * 0.1 - 0.4).unwrap();
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]);
        let h = g.clone().try_inverse().unwrap();
        let mut tr = [0.0; 3];
        for (j, t) in tr.iter_mut().enumerate() {
            for i in 0..3 {
                *t += d.get(i, j, i);
            }
        }
        let mut x = [0.0; 3];
        for (i, xi) in x.iter_mut().enumerate() {
            for j in 0..3 {
                for k in 0..3 {
                    let dij = if i == j { 1.0 } else { 0.0 };
                    let dik = if i == k { 1.0 } else { 0.0 };
                    let d0 = d.get(i, j, k) - 0.25 * (tr[j] * dik + dij * tr[k]);
                    *xi += h[(j, k)] * d0;
                }
            }
            *xi *= 4.0 / 10.0;
        }
        let got = x_g_point(&d, &g).unwrap();
        for i in 0..3 {
            assert!((got[i] - x[i]).abs() < 1e-14);
        }
        assert!(matches!(
            x_g_point(&PointTensor::zeros(2).unwrap(), &DMatrix::identity(3, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn theorem_properties_on_random_fields() {
        let gr = grid(64);
        let g = samples::random_metric(&gr, 40, 0.3);
        let p = samples::random_projective(&gr, 41, 0.5);
        let a = a_form(&p, &g).unwrap();
        assert!(a.invariant_residuals(&g).max() < 1e-11);
        let ups = samples::random_one_form(&gr, 42, 0.7);
        let a2 = a_form(&p.with_projective_change(&ups).unwrap(), &g).unwrap();
        let diff = a.field().zip_map(a2.field(), |x, y| t3_sub(&x, &y)).unwrap();
        assert!(tensor_field_max_abs(&diff) < 1e-11);
        let f = samples::random_scalar(&gr, 43, 0.4);
        let a3 = a_form(&p, &g.conformal_rescale(&f).unwrap()).unwrap();
        let diff = a.field().zip_map(a3.field(), |x, y| t3_sub(&x, &y)).unwrap();
        assert!(tensor_field_max_abs(&diff) < 1e-10);
    }

    #[test]
    fn canonical_pair_contract() {
        let gr = grid(64);
        let g = samples::random_metric(&gr, 50, 0.3);
        let p = samples::random_projective(&gr, 51, 0.5);
        let pair = canonical_pair(&p, &g).unwrap();
        assert!(trace_free_difference(p.rep(), &pair.projective_rep).unwrap() < 1e-9);
        let beta = pair.beta(&g).unwrap();
        let want = conformal_connection(&g, &beta).unwrap();
        let diff = want.difference(&pair.conformal_rep).unwrap();
        assert!(tensor_field_max_abs(&diff) < 1e-10);
    }

    #[test]
    fn canonical_pair_of_conformal_connection_is_itself() {
        let gr = grid(32);
        let g = samples::random_metric(&gr, 52, 0.3);
        let beta = samples::random_one_form(&gr, 53, 0.5);
        let conn = conformal_connection(&g, &beta).unwrap();
        let pair = canonical_pair(&ProjectiveStructure::new(conn.clone()), &g).unwrap();
        assert!(tensor_field_max_abs(&pair.projective_rep.difference(&conn).unwrap()) < 1e-10);
        assert!(tensor_field_max_abs(&pair.conformal_rep.difference(&conn).unwrap()) < 1e-10);
    }

    #[test]
    fn energy_vanishes_for_conformal_structure_and_is_conformally_invariant() {
        let gr = grid(32);
        let g = samples::random_metric(&gr, 60, 0.3);
        let beta = samples::random_one_form(&gr, 61, 0.5);
        let p0 = ProjectiveStructure::new(conformal_connection(&g, &beta).unwrap());
        assert!(energy_with_metric(&p0, &g).unwrap() < 1e-12);
        let p = samples::random_projective(&gr, 62, 0.5);
        let e1 = energy_with_metric(&p, &g).unwrap();
        let f = samples::random_scalar(&gr, 63, 0.4);
        let e2 = energy_with_metric(&p, &g.conformal_rescale(&f).unwrap()).unwrap();
        assert!(e1 > 1e-3);
        assert!((e1 - e2).abs() < 1e-11);
    }

    /// Two conformal connections of one metric differing by pure trace
    /// share their one-form: the 8x2 linear map β ↦ g⊗β♯ − ι(β), followed
    /// by the trace-free projection complement, is injective.
    #[test]
    fn conformal_connections_meet_at_most_once() {
        let gr = grid(8);
        let g = samples::random_metric(&gr, 70, 0.4);
        for idx in 0..gr.len() {
            let m = g.at(idx);
            // columns: image of β = e_1, e_2 under β ↦ trace_free(g⊗β♯ − ι(β))
            let cols: Vec<Tensor3> = [[1.0, 0.0], [0.0, 1.0]]
                .iter()
                .map(|b| trace_free2(&crate::tensor_calc::conformal_correction(&m, *b)))
                .collect();
            let flat = |t: &Tensor3| -> Vec<f64> { t.iter().flatten().flatten().copied().collect() };
            let a = DMatrix::from_fn(8, 2, |r, c| flat(&cols[c])[r]);
            let sv = a.svd(false, false).singular_values;
            assert!(sv.min() > 1e-3);
        }
    }
}
