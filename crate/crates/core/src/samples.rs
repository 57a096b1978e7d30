//! Seeded band-limited random fields for tests, suites and examples.
//!
//! Every generator draws a trigonometric polynomial of degree
//! `clamp(n/16, 1, 3)` with coefficients decaying like `1/(1+|k|^2)`,
//! normalised so that the sup-norm never exceeds the requested amplitude.
//! The band limit stays well below Nyquist so that exponentials, inverses
//! and products of samples remain resolved on the grid.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::blaschke::CubicDifferential;
use crate::frames::ConformalStructure;
use crate::grid::{Field, OneFormField, ScalarField, Tensor3, TorusGrid};
use crate::projective::ProjectiveStructure;
use crate::tensor_calc::{ConnectionField, MetricField, ZERO3};

pub fn degree(grid: &TorusGrid) -> i64 {
    ((grid.n() / 16) as i64).clamp(1, 3)
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

struct TrigPoly {
    modes: Vec<(f64, f64, f64, f64)>,
}

impl TrigPoly {
    fn draw(r: &mut ChaCha8Rng, deg: i64, amp: f64) -> Self {
        let mut modes = Vec::new();
        let mut total = 0.0;
        for k1 in -deg..=deg {
            for k2 in 0..=deg {
                if k2 == 0 && k1 < 0 {
                    continue;
                }
                let w = 1.0 / (1.0 + (k1 * k1 + k2 * k2) as f64);
                let (a, b) = if k1 == 0 && k2 == 0 {
                    (r.gen_range(-1.0..1.0) * w, 0.0)
                } else {
                    (r.gen_range(-1.0..1.0) * w, r.gen_range(-1.0..1.0) * w)
                };
                total += a.abs() + b.abs();
                modes.push((k1 as f64, k2 as f64, a, b));
            }
        }
        let s = if total > 0.0 { amp / total } else { 0.0 };
        for m in modes.iter_mut() {
            m.2 *= s;
            m.3 *= s;
        }
        Self { modes }
    }

    fn eval(&self, x: [f64; 2]) -> f64 {
        self.modes
            .iter()
            .map(|&(k1, k2, a, b)| {
                let t = 2.0 * PI * (k1 * x[0] + k2 * x[1]);
                a * t.cos() + b * t.sin()
            })
            .sum()
    }
}

fn polys(grid: &TorusGrid, seed: u64, stream: u64, count: usize, amp: f64) -> Vec<TrigPoly> {
    let mut r = rng(seed, stream);
    let deg = degree(grid);
    (0..count).map(|_| TrigPoly::draw(&mut r, deg, amp)).collect()
}

pub fn random_scalar(grid: &TorusGrid, seed: u64, amp: f64) -> ScalarField {
    let p = polys(grid, seed, 1, 1, amp);
    Field::from_fn(grid, |x| p[0].eval(x))
}

pub fn random_complex(grid: &TorusGrid, seed: u64, amp: f64) -> Field<Complex64> {
    let p = polys(grid, seed, 2, 2, amp);
    Field::from_fn(grid, |x| Complex64::new(p[0].eval(x), p[1].eval(x)))
}

pub fn random_one_form(grid: &TorusGrid, seed: u64, amp: f64) -> OneFormField {
    let p = polys(grid, seed, 3, 2, amp);
    Field::from_fn(grid, |x| [p[0].eval(x), p[1].eval(x)])
}

/// (1,2)-tensor field symmetric in the lower pair.
pub fn random_sym_tensor(grid: &TorusGrid, seed: u64, amp: f64) -> Field<Tensor3> {
    let p = polys(grid, seed, 4, 6, amp);
    Field::from_fn(grid, |x| {
        let mut t = ZERO3;
        for i in 0..2 {
            t[i][0][0] = p[3 * i].eval(x);
            t[i][0][1] = p[3 * i + 1].eval(x);
            t[i][1][0] = t[i][0][1];
            t[i][1][1] = p[3 * i + 2].eval(x);
        }
        t
    })
}

pub fn random_connection(grid: &TorusGrid, seed: u64, amp: f64) -> ConnectionField {
    ConnectionField::new(random_sym_tensor(grid, seed, amp)).expect("finite and symmetric")
}

pub fn random_projective(grid: &TorusGrid, seed: u64, amp: f64) -> ProjectiveStructure {
    ProjectiveStructure::new(random_connection(grid, seed, amp))
}

/// `exp(S)` for `S = [[s, t], [t, −s]]`.
fn exp_trace_free(s: f64, t: f64) -> [[f64; 2]; 2] {
    let r = (s * s + t * t).sqrt();
    let (c, sh) = if r < 1e-8 {
        (1.0 + 0.5 * r * r, 1.0 + r * r / 6.0)
    } else {
        (r.cosh(), r.sinh() / r)
    };
    [[c + sh * s, sh * t], [sh * t, c - sh * s]]
}

pub fn random_conformal(grid: &TorusGrid, seed: u64, amp: f64) -> ConformalStructure {
    let p = polys(grid, seed, 5, 2, amp);
    let f = Field::from_fn(grid, |x| exp_trace_free(p[0].eval(x), p[1].eval(x)));
    ConformalStructure::new(f).expect("exp of a trace-free matrix is unimodular")
}

/// `e^{2f} exp(S)` with `S` trace-free.
pub fn random_metric(grid: &TorusGrid, seed: u64, amp: f64) -> MetricField {
    let p = polys(grid, seed, 6, 3, amp);
    let f = Field::from_fn(grid, |x| {
        let m = exp_trace_free(p[0].eval(x), p[1].eval(x));
        let s = (2.0 * p[2].eval(x)).exp();
        [[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]]
    });
    MetricField::new(f).expect("positive definite by construction")
}

/// `c0 + amp·(band-limited)`; nonvanishing whenever `amp < |c0|`.
pub fn random_cubic(grid: &TorusGrid, seed: u64, c0: Complex64, amp: f64) -> CubicDifferential {
    let z = random_complex(grid, seed, amp);
    CubicDifferential::new(z.map(|v| v + c0)).expect("finite")
}

/// `m · exp(eps S)` renormalised, a nearby conformal structure.
pub fn perturb_conformal(m: &ConformalStructure, seed: u64, eps: f64) -> ConformalStructure {
    let grid = m.grid();
    let p = polys(grid, seed, 7, 2, eps);
    let f = Field::from_index_fn(grid, |idx| {
        let x = grid.coords(idx);
        let e = exp_trace_free(p[0].eval(x), p[1].eval(x));
        crate::tensor_calc::mat_mul(&m.at(idx), &e)
    });
    let sym = f.map(|a| {
        let o = 0.5 * (a[0][1] + a[1][0]);
        [[a[0][0], o], [o, a[1][1]]]
    });
    ConformalStructure::from_metric(&MetricField::new(sym).expect("near a valid structure"))
        .expect("positive definite")
}
