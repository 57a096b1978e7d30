//! Periodic grids on the unit torus, field storage and Fourier-spectral
//! differentiation.
//!
//! Node `(a, b)` sits at `x = (a/n, b/n)` and is stored at flat index
//! `a * n + b`, so the second coordinate is contiguous in memory.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// 2x2 matrix, row-major: `m[i][j]`.
pub type Mat2 = [[f64; 2]; 2];
/// Rank-3 array `t[i][j][k]`, used for Christoffel symbols `Γ^i_{jk}` and
/// other (1,2)-tensors.
pub type Tensor3 = [[[f64; 2]; 2]; 2];

pub const MIN_RESOLUTION: usize = 8;
pub const DEFAULT_RESOLUTION: usize = 64;

struct FftPlans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform `n x n` grid on `[0,1)^2` with periodic identification.
///
/// `tau` is the modulus of the reference lattice `{1, tau}`; it only enters
/// through the reference flat metric `|dx^1 + tau dx^2|^2` and its area.
#[derive(Clone)]
pub struct TorusGrid {
    n: usize,
    tau: Complex64,
    plans: Arc<FftPlans>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("n", &self.n)
            .field("tau", &self.tau)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.tau == other.tau
    }
}

impl TorusGrid {
    /// Square torus (`tau = i`).
    pub fn new(n: usize) -> Result<Self> {
        Self::with_tau(n, Complex64::new(0.0, 1.0))
    }

    pub fn with_tau(n: usize, tau: Complex64) -> Result<Self> {
        if n < MIN_RESOLUTION || n % 2 != 0 {
            return Err(Error::Resolution(n));
        }
        if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(Error::Modulus {
                re: tau.re,
                im: tau.im,
            });
        }
        let mut planner = FftPlanner::new();
        let plans = FftPlans {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        };
        Ok(Self {
            n,
            tau,
            plans: Arc::new(plans),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    /// Area of the fundamental domain for the reference flat metric.
    pub fn area(&self) -> f64 {
        self.tau.im
    }

    /// Reference flat metric `|dx^1 + tau dx^2|^2` in chart components.
    pub fn reference_metric(&self) -> Mat2 {
        let t = self.tau;
        [[1.0, t.re], [t.re, t.norm_sqr()]]
    }

    pub fn index(&self, a: usize, b: usize) -> usize {
        a * self.n + b
    }

    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        [(idx / self.n) as f64 * h, (idx % self.n) as f64 * h]
    }

    /// Signed wavenumber of FFT bin `j`; the Nyquist bin maps to `-n/2`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Wavenumber used for differentiation: the Nyquist mode is dropped.
    fn derivative_wavenumber(&self, j: usize) -> f64 {
        let k = self.wavenumber(j);
        if k == -(self.n as i64) / 2 {
            0.0
        } else {
            k as f64
        }
    }

    fn fft_rows(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse {
            &self.plans.inverse
        } else {
            &self.plans.forward
        };
        plan.process(data);
    }

    fn transpose(&self, data: &mut [Complex64]) {
        let n = self.n;
        for a in 0..n {
            for b in (a + 1)..n {
                data.swap(a * n + b, b * n + a);
            }
        }
    }

    /// Unnormalised forward 2D DFT in place.
    pub fn fft2(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        self.fft_rows(data, false);
        self.transpose(data);
        self.fft_rows(data, false);
        self.transpose(data);
    }

    /// Inverse 2D DFT in place, normalised so that `ifft2(fft2(x)) = x`.
    pub fn ifft2(&self, data: &mut [Complex64]) {
        self.fft_rows(data, true);
        self.transpose(data);
        self.fft_rows(data, true);
        self.transpose(data);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// Apply a Fourier multiplier `symbol(k1, k2)` to a complex sample array.
    ///
    /// The wavenumbers passed are the differentiation wavenumbers (Nyquist
    /// set to zero), so any polynomial symbol is real-preserving.
    pub fn apply_multiplier(
        &self,
        data: &[Complex64],
        symbol: impl Fn(f64, f64) -> Complex64,
    ) -> Vec<Complex64> {
        let mut buf = data.to_vec();
        self.fft2(&mut buf);
        let n = self.n;
        for a in 0..n {
            let k1 = self.derivative_wavenumber(a);
            for b in 0..n {
                let k2 = self.derivative_wavenumber(b);
                buf[a * n + b] *= symbol(k1, k2);
            }
        }
        self.ifft2(&mut buf);
        buf
    }
}

/// Values that can live at a grid node.
pub trait FieldValue: Copy + Send + Sync + PartialEq + fmt::Debug {
    /// Number of real components.
    const NCOMP: usize;
    fn component(&self, c: usize) -> f64;
    fn from_components(c: &[f64]) -> Self;

    fn is_finite(&self) -> bool {
        (0..Self::NCOMP).all(|c| self.component(c).is_finite())
    }
}

impl FieldValue for f64 {
    const NCOMP: usize = 1;
    fn component(&self, _c: usize) -> f64 {
        *self
    }
    fn from_components(c: &[f64]) -> Self {
        c[0]
    }
}

impl FieldValue for Complex64 {
    const NCOMP: usize = 2;
    fn component(&self, c: usize) -> f64 {
        if c == 0 {
            self.re
        } else {
            self.im
        }
    }
    fn from_components(c: &[f64]) -> Self {
        Complex64::new(c[0], c[1])
    }
}

impl FieldValue for [f64; 2] {
    const NCOMP: usize = 2;
    fn component(&self, c: usize) -> f64 {
        self[c]
    }
    fn from_components(c: &[f64]) -> Self {
        [c[0], c[1]]
    }
}

impl FieldValue for Mat2 {
    const NCOMP: usize = 4;
    fn component(&self, c: usize) -> f64 {
        self[c / 2][c % 2]
    }
    fn from_components(c: &[f64]) -> Self {
        [[c[0], c[1]], [c[2], c[3]]]
    }
}

impl FieldValue for Tensor3 {
    const NCOMP: usize = 8;
    fn component(&self, c: usize) -> f64 {
        self[c / 4][(c / 2) % 2][c % 2]
    }
    fn from_components(c: &[f64]) -> Self {
        let mut t = [[[0.0; 2]; 2]; 2];
        for (idx, v) in c.iter().enumerate().take(8) {
            t[idx / 4][(idx / 2) % 2][idx % 2] = *v;
        }
        t
    }
}

/// Coordinate axis of the chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X1, Axis::X2];

    pub fn index(self) -> usize {
        match self {
            Axis::X1 => 0,
            Axis::X2 => 1,
        }
    }
}

/// Values sampled at every node of a [`TorusGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: TorusGrid,
    values: Vec<T>,
}

pub type ScalarField = Field<f64>;
pub type ComplexField = Field<Complex64>;
/// Vector field, components `X^i`.
pub type VectorField = Field<[f64; 2]>;
/// One-form field, components `β_i`.
pub type OneFormField = Field<[f64; 2]>;

impl<T: FieldValue> Field<T> {
    pub fn from_values(grid: &TorusGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Length {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Sample `f` at every node coordinate.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn([f64; 2]) -> T + Sync) -> Self {
        Self::from_index_fn(grid, |idx| f(grid.coords(idx)))
    }

    pub fn from_index_fn(grid: &TorusGrid, f: impl Fn(usize) -> T + Sync) -> Self {
        let values = (0..grid.len()).into_par_iter().map(&f).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &TorusGrid, value: T) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![value; grid.len()],
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn at(&self, idx: usize) -> T {
        self.values[idx]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<U: FieldValue>(&self, f: impl Fn(T) -> U + Sync) -> Field<U> {
        Field::from_index_fn(&self.grid, |i| f(self.values[i]))
    }

    pub fn zip_map<U: FieldValue, V: FieldValue>(
        &self,
        other: &Field<U>,
        f: impl Fn(T, U) -> V + Sync,
    ) -> Result<Field<V>> {
        same_grid(&self.grid, &other.grid)?;
        Ok(Field::from_index_fn(&self.grid, |i| {
            f(self.values[i], other.values[i])
        }))
    }

    /// First node holding a non-finite component, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn component(&self, c: usize) -> ScalarField {
        self.map(|v| v.component(c))
    }

    fn from_component_vecs(grid: &TorusGrid, comps: &[Vec<f64>]) -> Self {
        let mut buf = vec![0.0; T::NCOMP];
        let values = (0..grid.len())
            .map(|i| {
                for (c, comp) in comps.iter().enumerate() {
                    buf[c] = comp[i];
                }
                T::from_components(&buf)
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    fn component_vecs(&self) -> Vec<Vec<f64>> {
        (0..T::NCOMP)
            .map(|c| self.values.iter().map(|v| v.component(c)).collect())
            .collect()
    }

    /// Apply a real-preserving Fourier multiplier componentwise. Two real
    /// components share one complex transform.
    pub fn apply_multiplier(&self, symbol: impl Fn(f64, f64) -> Complex64 + Copy) -> Self {
        let comps = self.component_vecs();
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(comps.len());
        for pair in comps.chunks(2) {
            let packed: Vec<Complex64> = if pair.len() == 2 {
                pair[0]
                    .iter()
                    .zip(&pair[1])
                    .map(|(&re, &im)| Complex64::new(re, im))
                    .collect()
            } else {
                pair[0].iter().map(|&re| Complex64::new(re, 0.0)).collect()
            };
            let res = self.grid.apply_multiplier(&packed, symbol);
            out.push(res.iter().map(|z| z.re).collect());
            if pair.len() == 2 {
                out.push(res.iter().map(|z| z.im).collect());
            }
        }
        Self::from_component_vecs(&self.grid, &out)
    }

    /// Evaluate the trigonometric interpolant at arbitrary points.
    pub fn interpolate_at(&self, points: &[[f64; 2]]) -> Vec<T> {
        let n = self.grid.n;
        let coeffs: Vec<Vec<Complex64>> = self
            .component_vecs()
            .into_iter()
            .map(|c| {
                let mut buf: Vec<Complex64> =
                    c.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
                self.grid.fft2(&mut buf);
                let s = 1.0 / self.grid.len() as f64;
                buf.iter_mut().for_each(|z| *z *= s);
                buf
            })
            .collect();
        let basis = |x: f64| -> Vec<Complex64> {
            (0..n)
                .map(|j| {
                    let k = self.grid.wavenumber(j);
                    if k == -(n as i64) / 2 {
                        Complex64::new((std::f64::consts::PI * n as f64 * x).cos(), 0.0)
                    } else {
                        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * x)
                    }
                })
                .collect()
        };
        points
            .par_iter()
            .map(|p| {
                let w1 = basis(p[0]);
                let w2 = basis(p[1]);
                let comps: Vec<f64> = coeffs
                    .iter()
                    .map(|c| {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for a in 0..n {
                            let row = &c[a * n..(a + 1) * n];
                            let inner: Complex64 =
                                row.iter().zip(&w2).map(|(ci, wi)| ci * wi).sum();
                            acc += w1[a] * inner;
                        }
                        acc.re
                    })
                    .collect();
                T::from_components(&comps)
            })
            .collect()
    }
}

impl ScalarField {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl ComplexField {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

pub(crate) fn same_grid(a: &TorusGrid, b: &TorusGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Exact derivative of the trigonometric interpolant along `axis`.
pub fn spectral_derivative<T: FieldValue>(f: &Field<T>, axis: Axis) -> Result<Field<T>> {
    f.check_finite()?;
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(match axis {
        Axis::X1 => f.apply_multiplier(|k1, _| Complex64::new(0.0, two_pi * k1)),
        Axis::X2 => f.apply_multiplier(|_, k2| Complex64::new(0.0, two_pi * k2)),
    })
}

/// Both first derivatives `[∂_1 f, ∂_2 f]`.
pub fn gradient<T: FieldValue>(f: &Field<T>) -> Result<[Field<T>; 2]> {
    Ok([
        spectral_derivative(f, Axis::X1)?,
        spectral_derivative(f, Axis::X2)?,
    ])
}

/// Laplacian `h^{ij} ∂_i ∂_j f` for a constant inverse metric `h`.
pub fn spectral_laplacian(f: &ScalarField, inverse_metric: Mat2) -> Result<ScalarField> {
    f.check_finite()?;
    let c = -4.0 * std::f64::consts::PI * std::f64::consts::PI;
    let h = inverse_metric;
    Ok(f.apply_multiplier(|k1, k2| {
        Complex64::new(
            c * (h[0][0] * k1 * k1 + 2.0 * h[0][1] * k1 * k2 + h[1][1] * k2 * k2),
            0.0,
        )
    }))
}

/// Pairwise summation, deterministic for a fixed input order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        v.iter().sum()
    } else {
        let mid = v.len() / 2;
        pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
    }
}

/// Integral of a scalar density against the reference area form
/// `Im(tau) dx^1∧dx^2`.
pub fn integrate(density: &ScalarField) -> Result<f64> {
    Ok(integrate_chart(density)? * density.grid().area())
}

/// Integral of a 2-form coefficient relative to `dx^1∧dx^2`.
pub fn integrate_chart(density: &ScalarField) -> Result<f64> {
    density.check_finite()?;
    let h = density.grid().spacing();
    Ok(h * h * pairwise_sum(density.values()))
}

pub fn integrate_chart_complex(density: &ComplexField) -> Result<Complex64> {
    density.check_finite()?;
    let h2 = density.grid().spacing().powi(2);
    let re: Vec<f64> = density.values().iter().map(|z| z.re).collect();
    let im: Vec<f64> = density.values().iter().map(|z| z.im).collect();
    Ok(Complex64::new(pairwise_sum(&re), pairwise_sum(&im)) * h2)
}

/// Orientation-preserving affine torus map `x ↦ M x + b (mod 1)` with
/// `M ∈ SL(2, Z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineTorusMap {
    matrix: [[i64; 2]; 2],
    shift: [f64; 2],
}

impl AffineTorusMap {
    pub fn new(matrix: [[i64; 2]; 2], shift: [f64; 2]) -> Result<Self> {
        let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
        if det != 1 {
            return Err(Error::Orientation(det));
        }
        Ok(Self { matrix, shift })
    }

    pub fn identity() -> Self {
        Self {
            matrix: [[1, 0], [0, 1]],
            shift: [0.0, 0.0],
        }
    }

    pub fn translation(shift: [f64; 2]) -> Self {
        Self {
            matrix: [[1, 0], [0, 1]],
            shift,
        }
    }

    pub fn matrix(&self) -> [[i64; 2]; 2] {
        self.matrix
    }

    pub fn matrix_f64(&self) -> Mat2 {
        let m = self.matrix;
        [
            [m[0][0] as f64, m[0][1] as f64],
            [m[1][0] as f64, m[1][1] as f64],
        ]
    }

    pub fn inverse_matrix_f64(&self) -> Mat2 {
        let m = self.matrix;
        [
            [m[1][1] as f64, -m[0][1] as f64],
            [-m[1][0] as f64, m[0][0] as f64],
        ]
    }

    pub fn shift(&self) -> [f64; 2] {
        self.shift
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        let m = self.matrix_f64();
        let y = [
            m[0][0] * x[0] + m[0][1] * x[1] + self.shift[0],
            m[1][0] * x[0] + m[1][1] * x[1] + self.shift[1],
        ];
        [y[0].rem_euclid(1.0), y[1].rem_euclid(1.0)]
    }

    /// Integer node shift when `b` is a multiple of the grid spacing.
    fn node_shift(&self, n: usize) -> Option<[i64; 2]> {
        let mut out = [0i64; 2];
        for (o, b) in out.iter_mut().zip(self.shift) {
            let s = b * n as f64;
            let r = s.round();
            if (s - r).abs() > 1e-9 {
                return None;
            }
            *o = r as i64;
        }
        Some(out)
    }
}

/// `f ∘ map`: an index permutation when nodes land on nodes, otherwise an
/// evaluation of the trigonometric interpolant.
pub fn resample<T: FieldValue>(f: &Field<T>, map: &AffineTorusMap) -> Result<Field<T>> {
    f.check_finite()?;
    let grid = f.grid();
    let n = grid.n() as i64;
    match map.node_shift(grid.n()) {
        Some(s) => {
            let m = map.matrix;
            Ok(Field::from_index_fn(grid, |idx| {
                let a = (idx / grid.n()) as i64;
                let b = (idx % grid.n()) as i64;
                let a2 = (m[0][0] * a + m[0][1] * b + s[0]).rem_euclid(n) as usize;
                let b2 = (m[1][0] * a + m[1][1] * b + s[1]).rem_euclid(n) as usize;
                f.values[grid.index(a2, b2)]
            }))
        }
        None => {
            let points: Vec<[f64; 2]> = (0..grid.len())
                .map(|i| map.apply(grid.coords(i)))
                .collect();
            Field::from_values(grid, f.interpolate_at(&points))
        }
    }
}
