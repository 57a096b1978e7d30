//! Pointwise tensor algebra and field-level differential operators.
//!
//! Index conventions: `Γ[i][j][k] = Γ^i_{jk}` with `∇_{∂j} ∂k = Γ^i_{jk} ∂i`;
//! curvature `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]}Z` and
//! `Ric(Y,Z) = tr(X ↦ R(X,Y)Z)`.

use crate::error::{Error, Result};
use crate::grid::{
    gradient, resample, spectral_laplacian, AffineTorusMap, Field, Mat2, OneFormField,
    ScalarField, Tensor3, TorusGrid, VectorField,
};

pub const ZERO3: Tensor3 = [[[0.0; 2]; 2]; 2];
pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn inv2(m: &Mat2) -> Mat2 {
    let d = det2(m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// Raise a one-form index: `β^i = h^{il} β_l`.
pub fn raise(h_inv: &Mat2, beta: [f64; 2]) -> [f64; 2] {
    [
        h_inv[0][0] * beta[0] + h_inv[0][1] * beta[1],
        h_inv[1][0] * beta[0] + h_inv[1][1] * beta[1],
    ]
}

/// Lower a vector index: `X_i = g_{il} X^l`.
pub fn lower(g: &Mat2, x: [f64; 2]) -> [f64; 2] {
    raise(g, x)
}

pub fn t3_add(a: &Tensor3, b: &Tensor3) -> Tensor3 {
    let mut c = *a;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                c[i][j][k] += b[i][j][k];
            }
        }
    }
    c
}

pub fn t3_sub(a: &Tensor3, b: &Tensor3) -> Tensor3 {
    t3_add(a, &t3_scale(b, -1.0))
}

pub fn t3_scale(a: &Tensor3, s: f64) -> Tensor3 {
    let mut c = *a;
    c.iter_mut().flatten().flatten().for_each(|v| *v *= s);
    c
}

pub fn t3_max_abs(a: &Tensor3) -> f64 {
    a.iter().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

/// `ι(ν)^i_{jk} = ν_j δ^i_k + δ^i_j ν_k` in dimension 2.
pub fn iota2(nu: [f64; 2]) -> Tensor3 {
    let mut v = ZERO3;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let dik = if i == k { 1.0 } else { 0.0 };
                let dij = if i == j { 1.0 } else { 0.0 };
                v[i][j][k] = nu[j] * dik + dij * nu[k];
            }
        }
    }
    v
}

/// `(tr v)_j = v^i_{ji}`.
pub fn trace2(v: &Tensor3) -> [f64; 2] {
    [v[0][0][0] + v[1][0][1], v[0][1][0] + v[1][1][1]]
}

pub fn trace_free2(v: &Tensor3) -> Tensor3 {
    let t = trace2(v);
    t3_sub(v, &iota2([t[0] / 3.0, t[1] / 3.0]))
}

/// `(g ⊗ X)^i_{jk} = g_{jk} X^i`.
pub fn metric_times_vector(g: &Mat2, x: [f64; 2]) -> Tensor3 {
    let mut v = ZERO3;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                v[i][j][k] = g[j][k] * x[i];
            }
        }
    }
    v
}

/// Average the two lower slots.
pub fn symmetrize_lower(v: &Tensor3) -> Tensor3 {
    let mut s = *v;
    for row in s.iter_mut() {
        let m = 0.5 * (row[0][1] + row[1][0]);
        row[0][1] = m;
        row[1][0] = m;
    }
    s
}

/// Value of a section of `S²(T*M)⊗TM` at one point, any dimension `n ≥ 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointTensor {
    n: usize,
    data: Vec<f64>,
}

impl PointTensor {
    pub fn zeros(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(n));
        }
        Ok(Self {
            n,
            data: vec![0.0; n * n * n],
        })
    }

    /// Build from `f(i, j, k)`, symmetrising the lower pair.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let mut t = Self::zeros(n)?;
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    let v = if j == k {
                        f(i, j, k)
                    } else {
                        0.5 * (f(i, j, k) + f(i, k, j))
                    };
                    t.set(i, j, k, v);
                    t.set(i, k, j, v);
                }
            }
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.n + j) * self.n + k] = v;
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn from_tensor3(t: &Tensor3) -> Self {
        Self {
            n: 2,
            data: t.iter().flatten().flatten().copied().collect(),
        }
    }

    pub fn to_tensor3(&self) -> Result<Tensor3> {
        if self.n != 2 {
            return Err(Error::Dimension(self.n));
        }
        let mut t = ZERO3;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    t[i][j][k] = self.get(i, j, k);
                }
            }
        }
        Ok(t)
    }
}

/// `ν⊗Id + Id⊗ν` in dimension `nu.len()`.
pub fn iota(nu: &[f64]) -> Result<PointTensor> {
    let n = nu.len();
    let mut v = PointTensor::zeros(n)?;
    for i in 0..n {
        v.set(i, i, i, 2.0 * nu[i]);
        for j in 0..n {
            if j != i {
                v.set(i, j, i, nu[j]);
                v.set(i, i, j, nu[j]);
            }
        }
    }
    Ok(v)
}

pub fn trace(v: &PointTensor) -> Vec<f64> {
    let n = v.n;
    (0..n).map(|j| (0..n).map(|i| v.get(i, j, i)).sum()).collect()
}

pub fn trace_free(v: &PointTensor) -> PointTensor {
    let s = 1.0 / (v.n as f64 + 1.0);
    let t: Vec<f64> = trace(v).iter().map(|x| x * s).collect();
    v.sub(&iota(&t).expect("dimension already validated"))
}

fn check_metric_point(m: &Mat2, index: usize) -> Result<()> {
    if !m.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let scale = m[0][0].abs().max(m[1][1].abs()).max(f64::MIN_POSITIVE);
    if (m[0][1] - m[1][0]).abs() > 1e-12 * scale {
        return Err(Error::NotSymmetric { index });
    }
    if !(m[0][0] > 0.0) || !(det2(m) > 0.0) {
        return Err(Error::NotPositiveDefinite { index });
    }
    Ok(())
}

fn symmetric_mat(m: &Mat2) -> Mat2 {
    let off = 0.5 * (m[0][1] + m[1][0]);
    [[m[0][0], off], [off, m[1][1]]]
}

/// Riemannian metric `g_ij` at every node.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField(Field<Mat2>);

impl MetricField {
    pub fn new(field: Field<Mat2>) -> Result<Self> {
        for (index, m) in field.values().iter().enumerate() {
            check_metric_point(m, index)?;
        }
        Ok(Self(field.map(|m| symmetric_mat(&m))))
    }

    pub fn from_components(g11: &ScalarField, g12: &ScalarField, g22: &ScalarField) -> Result<Self> {
        if g11.grid() != g12.grid() || g11.grid() != g22.grid() {
            return Err(Error::GridMismatch);
        }
        let grid = g11.grid();
        Self::new(Field::from_index_fn(grid, |i| {
            [[g11.at(i), g12.at(i)], [g12.at(i), g22.at(i)]]
        }))
    }

    pub fn from_fn(grid: &TorusGrid, f: impl Fn([f64; 2]) -> Mat2 + Sync) -> Result<Self> {
        Self::new(Field::from_fn(grid, f))
    }

    /// `δ_ij`.
    pub fn euclidean(grid: &TorusGrid) -> Self {
        Self(Field::constant(grid, IDENTITY))
    }

    /// Reference flat metric `|dx^1 + tau dx^2|^2`.
    pub fn reference(grid: &TorusGrid) -> Self {
        Self(Field::constant(grid, grid.reference_metric()))
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

    pub fn inverse(&self) -> Field<Mat2> {
        self.0.map(|m| inv2(&m))
    }

    pub fn det(&self) -> ScalarField {
        self.0.map(|m| det2(&m))
    }

    pub fn sqrt_det(&self) -> ScalarField {
        self.0.map(|m| det2(&m).sqrt())
    }

    /// `e^{2f} g`.
    pub fn conformal_rescale(&self, f: &ScalarField) -> Result<Self> {
        let scaled = self.0.zip_map(f, |m, f| {
            let s = (2.0 * f).exp();
            [[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]]
        })?;
        Self::new(scaled)
    }
}

/// Torsion-free connection, Christoffel symbols `Γ^i_{jk}` at every node.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionField(Field<Tensor3>);

impl ConnectionField {
    /// Validates lower-index symmetry and finiteness.
    pub fn new(field: Field<Tensor3>) -> Result<Self> {
        field.check_finite()?;
        for (index, t) in field.values().iter().enumerate() {
            let scale = t3_max_abs(t).max(1.0);
            if t.iter().any(|r| (r[0][1] - r[1][0]).abs() > 1e-12 * scale) {
                return Err(Error::NotSymmetric { index });
            }
        }
        Ok(Self(field.map(|t| symmetrize_lower(&t))))
    }

    /// Symmetrises whatever `f` returns in the lower pair.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn([f64; 2]) -> Tensor3 + Sync) -> Result<Self> {
        let field = Field::from_fn(grid, |x| symmetrize_lower(&f(x)));
        field.check_finite()?;
        Ok(Self(field))
    }

    pub fn zero(grid: &TorusGrid) -> Self {
        Self(Field::constant(grid, ZERO3))
    }

    pub fn field(&self) -> &Field<Tensor3> {
        &self.0
    }

    pub fn grid(&self) -> &TorusGrid {
        self.0.grid()
    }

    pub fn at(&self, idx: usize) -> Tensor3 {
        self.0.at(idx)
    }

    /// `self + t` for a tensor field symmetric in its lower pair.
    pub fn add_tensor(&self, t: &Field<Tensor3>) -> Result<Self> {
        Self::new(self.0.zip_map(t, |a, b| t3_add(&a, &b))?)
    }

    /// `self − other` as a (1,2)-tensor field.
    pub fn difference(&self, other: &Self) -> Result<Field<Tensor3>> {
        self.0.zip_map(&other.0, |a, b| t3_sub(&a, &b))
    }

    /// Projective change `∇ + ι(Υ)`.
    pub fn projective_change(&self, upsilon: &OneFormField) -> Result<Self> {
        Ok(Self(self.0.zip_map(upsilon, |t, u| t3_add(&t, &iota2(u)))?))
    }
}

/// Schouten tensor `S_ij` of a connection; not symmetric in general.
#[derive(Clone, Debug, PartialEq)]
pub struct SchoutenField(Field<Mat2>);

impl SchoutenField {
    pub fn field(&self) -> &Field<Mat2> {
        &self.0
    }

    pub fn at(&self, idx: usize) -> Mat2 {
        self.0.at(idx)
    }

    /// Largest `|S_12 − S_21| / 2` over the grid.
    pub fn max_antisymmetric(&self) -> f64 {
        self.0
            .values()
            .iter()
            .fold(0.0, |m, s| m.max(0.5 * (s[0][1] - s[1][0]).abs()))
    }
}

pub fn levi_civita(g: &MetricField) -> Result<ConnectionField> {
    let [d1, d2] = gradient(g.field())?;
    let ginv = g.inverse();
    let field = Field::from_index_fn(g.grid(), |idx| {
        let h = ginv.at(idx);
        let dg = [d1.at(idx), d2.at(idx)];
        // lowered symbols Γ_{l,jk}
        let mut low = [[[0.0; 2]; 2]; 2];
        for (l, low_l) in low.iter_mut().enumerate() {
            for j in 0..2 {
                for k in 0..2 {
                    low_l[j][k] = 0.5 * (dg[j][l][k] + dg[k][l][j] - dg[l][j][k]);
                }
            }
        }
        let mut out = ZERO3;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    out[i][j][k] = h[i][0] * low[0][j][k] + h[i][1] * low[1][j][k];
                }
            }
        }
        // the two off-diagonal metric slots are differentiated in separate
        // transforms, so equalise rounding
        symmetrize_lower(&out)
    });
    Ok(ConnectionField(field))
}

/// Pointwise correction turning `∇^g` into `∇^{(g,β)}`:
/// `g_{jk} β^i − δ^i_j β_k − δ^i_k β_j`.
pub fn conformal_correction(g: &Mat2, beta: [f64; 2]) -> Tensor3 {
    let up = raise(&inv2(g), beta);
    t3_sub(&metric_times_vector(g, up), &iota2(beta))
}

/// `∇^{(g,β)} = ∇^g + g⊗β♯ − β⊗Id − Id⊗β`, the connection with `∇g = 2β⊗g`.
pub fn conformal_connection(g: &MetricField, beta: &OneFormField) -> Result<ConnectionField> {
    let lc = levi_civita(g)?;
    let corr = g.field().zip_map(beta, |m, b| conformal_correction(&m, b))?;
    let field = lc.0.zip_map(&corr, |a, c| t3_add(&a, &c))?;
    Ok(ConnectionField(field))
}

/// `(∇_m t)_{jl} = ∂_m t_{jl} − Γ^k_{mj} t_{kl} − Γ^k_{ml} t_{jk}` for a
/// bilinear form `t`; entry `m` of the result is `∇_m t`.
pub fn covariant_derivative_bilinear(
    t: &Field<Mat2>,
    conn: &ConnectionField,
) -> Result<[Field<Mat2>; 2]> {
    let dt = gradient(t)?;
    let make = |m: usize| -> Result<Field<Mat2>> {
        let f = Field::from_index_fn(t.grid(), |idx| {
            let tv = t.at(idx);
            let gam = conn.at(idx);
            let d = dt[m].at(idx);
            let mut out = [[0.0; 2]; 2];
            for j in 0..2 {
                for l in 0..2 {
                    let mut v = d[j][l];
                    for k in 0..2 {
                        v -= gam[k][m][j] * tv[k][l] + gam[k][m][l] * tv[j][k];
                    }
                    out[j][l] = v;
                }
            }
            out
        });
        crate::grid::same_grid(t.grid(), conn.grid())?;
        Ok(f)
    };
    Ok([make(0)?, make(1)?])
}

/// `max |∇g − 2β⊗g|`; zero exactly when `conn` is the conformal connection
/// of `(g, β)`.
pub fn metricity_residual(conn: &ConnectionField, g: &MetricField, beta: &OneFormField) -> Result<f64> {
    let dg = covariant_derivative_bilinear(g.field(), conn)?;
    let mut worst: f64 = 0.0;
    for (m, d) in dg.iter().enumerate() {
        let r = Field::from_index_fn(g.grid(), |idx| {
            let (dv, gv, b) = (d.at(idx), g.at(idx), beta.at(idx)[m]);
            let mut e: f64 = 0.0;
            for j in 0..2 {
                for l in 0..2 {
                    e = e.max((dv[j][l] - 2.0 * b * gv[j][l]).abs());
                }
            }
            e
        });
        worst = worst.max(r.max_abs());
    }
    Ok(worst)
}

/// Curvature of a connection and its contractions.
#[derive(Clone, Debug)]
pub struct Curvature {
    /// `riemann[i][j] = R^i_{j12}`, the only independent slot pair in 2D.
    pub riemann: Field<Mat2>,
    pub ricci: Field<Mat2>,
    pub schouten: SchoutenField,
}

pub fn curvature_ricci_schouten(conn: &ConnectionField) -> Result<Curvature> {
    let [d1, d2] = gradient(conn.field())?;
    let grid = conn.grid();
    let riemann = Field::from_index_fn(grid, |idx| {
        let g = conn.at(idx);
        let a = d1.at(idx);
        let b = d2.at(idx);
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut v = a[i][1][j] - b[i][0][j];
                for m in 0..2 {
                    v += g[i][0][m] * g[m][1][j] - g[i][1][m] * g[m][0][j];
                }
                r[i][j] = v;
            }
        }
        r
    });
    let ricci = riemann.map(|r| [[-r[1][0], -r[1][1]], [r[0][0], r[0][1]]]);
    let schouten = SchoutenField(ricci.map(|ric| {
        let sym = 0.5 * (ric[0][1] + ric[1][0]);
        let anti = 0.5 * (ric[0][1] - ric[1][0]);
        [
            [ric[0][0], sym - anti / 3.0],
            [sym + anti / 3.0, ric[1][1]],
        ]
    }));
    Ok(Curvature {
        riemann,
        ricci,
        schouten,
    })
}

/// How [`gauss_curvature`] obtains `K_g`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GaussRoute {
    /// Conformal-factor route when `g/√det g` is constant, else general.
    Auto,
    /// `K = −e^{−2u} Δ_m u` for `g = e^{2u} m` with `m` constant.
    Conformal,
    /// Contraction of the Levi-Civita curvature tensor.
    General,
}

/// Constant unimodular `m` with `g = e^{2u} m`, if one exists.
pub fn conformal_flat_factor(g: &MetricField) -> Option<(Mat2, ScalarField)> {
    let unit = g.field().map(|m| {
        let s = det2(&m).sqrt();
        [[m[0][0] / s, m[0][1] / s], [m[1][0] / s, m[1][1] / s]]
    });
    let m0 = unit.at(0);
    let dev = unit.values().iter().fold(0.0f64, |acc, m| {
        acc.max((0..2).flat_map(|i| (0..2).map(move |j| (i, j))).fold(0.0f64, |a, (i, j)| {
            a.max((m[i][j] - m0[i][j]).abs())
        }))
    });
    if dev > 1e-12 * (1.0 + m0[0][0].abs().max(m0[1][1].abs())) {
        return None;
    }
    Some((m0, g.det().map(|d| 0.25 * d.ln())))
}

pub fn gauss_curvature_conformal(u: &ScalarField, m: Mat2) -> Result<ScalarField> {
    let lap = spectral_laplacian(u, inv2(&m))?;
    lap.zip_map(u, |l, u| -(-2.0 * u).exp() * l)
}

pub fn gauss_curvature_general(g: &MetricField) -> Result<ScalarField> {
    let curv = curvature_ricci_schouten(&levi_civita(g)?)?;
    // K = g(R(∂1,∂2)∂2, ∂1) / det g
    curv.riemann.zip_map(g.field(), |r, m| {
        (m[0][0] * r[0][1] + m[0][1] * r[1][1]) / det2(&m)
    })
}

pub fn gauss_curvature_with(g: &MetricField, route: GaussRoute) -> Result<ScalarField> {
    match route {
        GaussRoute::General => gauss_curvature_general(g),
        GaussRoute::Conformal => match conformal_flat_factor(g) {
            Some((m, u)) => gauss_curvature_conformal(&u, m),
            None => Err(Error::InvalidArgument(
                "metric is not conformal to a constant metric".into(),
            )),
        },
        GaussRoute::Auto => match conformal_flat_factor(g) {
            Some((m, u)) => gauss_curvature_conformal(&u, m),
            None => gauss_curvature_general(g),
        },
    }
}

pub fn gauss_curvature(g: &MetricField) -> Result<ScalarField> {
    gauss_curvature_with(g, GaussRoute::Auto)
}

/// `M^t (g∘Φ) M`.
pub fn pullback_metric(g: &MetricField, map: &AffineTorusMap) -> Result<MetricField> {
    let m = map.matrix_f64();
    let moved = resample(g.field(), map)?;
    MetricField::new(moved.map(|gv| mat_mul(&transpose(&m), &mat_mul(&gv, &m))))
}

/// Pull back a (1,2)-tensor: `M^{-1} (t∘Φ)(M·, M·)`.
pub fn pullback_tensor3(t: &Field<Tensor3>, map: &AffineTorusMap) -> Result<Field<Tensor3>> {
    let m = map.matrix_f64();
    let mi = map.inverse_matrix_f64();
    let moved = resample(t, map)?;
    Ok(moved.map(|g| {
        let mut out = ZERO3;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut v = 0.0;
                    for l in 0..2 {
                        for a in 0..2 {
                            for b in 0..2 {
                                v += mi[i][l] * g[l][a][b] * m[a][j] * m[b][k];
                            }
                        }
                    }
                    out[i][j][k] = v;
                }
            }
        }
        out
    }))
}

/// Affine maps have no second derivative, so Γ pulls back as a tensor.
pub fn pullback_connection(
    conn: &ConnectionField,
    map: &AffineTorusMap,
) -> Result<ConnectionField> {
    Ok(ConnectionField(
        pullback_tensor3(conn.field(), map)?.map(|t| symmetrize_lower(&t)),
    ))
}

pub fn pullback_one_form(beta: &OneFormField, map: &AffineTorusMap) -> Result<OneFormField> {
    let m = map.matrix_f64();
    Ok(resample(beta, map)?.map(|b| {
        [
            b[0] * m[0][0] + b[1] * m[1][0],
            b[0] * m[0][1] + b[1] * m[1][1],
        ]
    }))
}

pub fn pullback_vector(x: &VectorField, map: &AffineTorusMap) -> Result<VectorField> {
    let mi = map.inverse_matrix_f64();
    Ok(resample(x, map)?.map(|v| raise(&mi, v)))
}
