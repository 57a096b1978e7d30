//! Verification suites behind one trait, registered by name and selected
//! with `verify --suite`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use pgt_core::blaschke::{closedness_check, titeica, wang_solve, CubicDifferential};
use pgt_core::flatness::liouville_curvature;
use pgt_core::flow::{descend, diffeo_invariance_check, gradient, identity_report, perturb, FlowOptions};
use pgt_core::frames::{conformal_curvature, frame_energy_density, frame_scalars};
use pgt_core::pgfb::{decode, encode, PgfbField};
use pgt_core::projective::{
    a_form, canonical_pair, energy, energy_density, tensor_field_max_abs, trace_free_difference,
    x_g, ProjectiveStructure,
};
use pgt_core::tensor_calc::{conformal_connection, metricity_residual, raise, t3_sub};
use pgt_core::{samples, AffineTorusMap, Error, TorusGrid};

/// One checked invariant: passes when `residual < tol`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Invariant {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Invariant {
    pub fn new(name: &str, residual: f64, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            residual,
            tol,
            pass: residual < tol,
        }
    }

    /// A yes/no condition recorded as residual 0 or 1.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self::new(name, if ok { 0.0 } else { 1.0 }, 0.5)
    }
}

pub struct SuiteContext {
    pub grid: TorusGrid,
    pub seed: u64,
}

pub trait VerificationSuite: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self, ctx: &SuiteContext) -> pgt_core::Result<Vec<Invariant>>;
}

/// Name → suite, in registration order for `all`.
#[derive(Default)]
pub struct SuiteRegistry {
    order: Vec<&'static str>,
    suites: BTreeMap<&'static str, Box<dyn VerificationSuite>>,
}

impl SuiteRegistry {
    pub fn register(&mut self, suite: Box<dyn VerificationSuite>) {
        let name = suite.name();
        if self.suites.insert(name, suite).is_none() {
            self.order.push(name);
        }
    }

    pub fn get(&self, name: &str) -> Option<&dyn VerificationSuite> {
        self.suites.get(name).map(|s| s.as_ref())
    }

    pub fn names(&self) -> &[&'static str] {
        &self.order
    }

    /// The suites named by `selector` (`all` or one name).
    pub fn select(&self, selector: &str) -> Option<Vec<&dyn VerificationSuite>> {
        if selector == "all" {
            Some(self.order.iter().filter_map(|n| self.get(n)).collect())
        } else {
            self.get(selector).map(|s| vec![s])
        }
    }
}

pub fn default_registry() -> SuiteRegistry {
    let mut r = SuiteRegistry::default();
    r.register(Box::new(Compatibility));
    r.register(Box::new(CanonicalPairSuite));
    r.register(Box::new(Frames));
    r.register(Box::new(Identities));
    r.register(Box::new(Wang));
    r.register(Box::new(TiteicaLoop));
    r.register(Box::new(Flow));
    r.register(Box::new(Diffeo));
    r.register(Box::new(Io));
    r
}

const ENSEMBLE: u64 = 5;

fn tensor_diff(a: &pgt_core::Field<pgt_core::Tensor3>, b: &pgt_core::Field<pgt_core::Tensor3>) -> pgt_core::Result<f64> {
    Ok(tensor_field_max_abs(&a.zip_map(b, |x, y| t3_sub(&x, &y))?))
}

struct Compatibility;

impl VerificationSuite for Compatibility {
    fn name(&self) -> &'static str {
        "compatibility"
    }

    fn description(&self) -> &'static str {
        "trace-free, symmetric, g-symmetric, projectively and conformally invariant A, vanishing on conformal connections"
    }

    fn run(&self, ctx: &SuiteContext) -> pgt_core::Result<Vec<Invariant>> {
        let gr = &ctx.grid;
        let mut w = [0.0f64; 7];
        for k in 0..ENSEMBLE {
            let s = ctx.seed.wrapping_mul(1000).wrapping_add(10 * k);
            let g = samples::random_metric(gr, s, 0.3);
            let p = samples::random_projective(gr, s + 1, 0.5);
            let a = a_form(&p, &g)?;
            let r = a.invariant_residuals(&g);
            w[0] = w[0].max(r.trace);
            w[1] = w[1].max(r.symmetry);
            w[2] = w[2].max(r.g_symmetry);
            let ups = samples::random_one_form(gr, s + 2, 0.5);
            w[3] = w[3].max(tensor_diff(a.field(), a_form(&p.with_projective_change(&ups)?, &g)?.field())?);
            let f = samples::random_scalar(gr, s + 3, 0.3);
            w[4] = w[4].max(tensor_diff(a.field(), a_form(&p, &g.conformal_rescale(&f)?)?.field())?);
            let beta = samples::random_one_form(gr, s + 4, 0.5);
            let conf = conformal_connection(&g, &beta)?;
            w[5] = w[5].max(tensor_field_max_abs(a_form(&ProjectiveStructure::new(conf.clone()), &g)?.field()));
            let x = x_g(&conf, &g)?;
            let inv = g.inverse();
            for idx in 0..gr.len() {
                let want = raise(&inv.at(idx), beta.at(idx));
                let got = x.at(idx);
                w[6] = w[6].max((got[0] - want[0]).abs()).max((got[1] - want[1]).abs());
            }
        }
        let names = [
            "a_trace_free",
            "a_symmetric",
            "a_g_symmetric",
            "a_projective_invariance",
            "a_conformal_invariance",
            "a_vanishes_on_conformal",
            "x_equals_beta_sharp",
        ];
        Ok(names.iter().zip(w).map(|(n, r)| Invariant::new(n, r, 1e-9)).collect())
    }
}

struct CanonicalPairSuite;

impl VerificationSuite for CanonicalPairSuite {
    fn name(&self) -> &'static str {
        "canonical-pair"
    }

    fn description(&self) -> &'static str {
        "projective partner lies in p, conformal partner is a Weyl connection of g"
    }

    fn run(&self, ctx: &SuiteContext) -> pgt_core::Result<Vec<Invariant>> {
        let gr = &ctx.grid;
        let (mut tf, mut met) = (0.0f64, 0.0f64);
        for k in 0..ENSEMBLE {
            let s = ctx.seed.wrapping_mul(1000).wrapping_add(10 * k + 5);
            let g = samples::random_metric(gr, s, 0.3);
            let p = samples::random_projective(gr, s + 1, 0.5);
            let pair = canonical_pair(&p, &g)?;
            tf = tf.max(trace_free_difference(p.rep(), &pair.projective_rep)?);
            met = met.max(metricity_residual(&pair.conformal_rep, &g, &pair.beta(&g)?)?);
        }
        Ok(vec![
            Invariant::new("projective_rep_trace_free_difference", tf, 1e-9),
            Invariant::new("conformal_rep_metricity", met, 1e-9),
        ])
    }
}

struct Frames;

impl VerificationSuite for Frames {
    fn name(&self) -> &'static str {
        "frames"
    }

    fn description(&self) -> &'static str {
        "q from the Schouten tensor agrees with q from the structure equation of a; curvature of φ"
    }

    fn run(&self, ctx: &SuiteContext) -> pgt_core::Result<Vec<Invariant>> {
        let gr = &ctx.grid;
        let (mut dq, mut se) = (0.0f64, 0.0f64);
        for k in 0..ENSEMBLE {
            let s = ctx.seed.wrapping_mul(1000).wrapping_add(10 * k + 7);
            let p = samples::random_projective(gr, s, 0.5);
            let m = samples::random_conformal(gr, s + 1, 0.3);
            let fs = frame_scalars(&p, &m)?;
            dq = dq.max(fs.max_q_discrepancy());
            se = se.max(conformal_curvature(&fs)?.max_residual);
        }
        Ok(vec![
            Invariant::new("q_cross_oracle", dq, 1e-7),
            Invariant::new("phi_structure_equation", se, 1e-7),
        ])
    }
}

struct Identities;

impl VerificationSuite for Identities {
    fn name(&self) -> &'static str {
        "identities"
    }

    fn description(&self) -> &'static str {
        "energy density, integral identities and the lower bound"
    }

    fn run(&self, ctx: &SuiteContext) -> pgt_core::Result<Vec<Invariant>> {
        let gr = &ctx.grid;
        let s = ctx.seed.wrapping_mul(1000).wrapping_add(400);
        let p = samples::random_projective(gr, s, 0.5);
        let m = samples::random_conformal(gr, s + 1, 0.3);
        let fs = frame_scalars(&p, &m)?;
        let density = energy_density(&p, &m)?
            .zip_map(&frame_energy_density(&fs)?, |a, b| (a - b).abs())?
            .max_abs();
        let r = identity_report(&p, &m)?;
        let beta = samples::random_one_form(gr, s + 2, 0.5);
        let pc = ProjectiveStructure::new(conformal_connection(&m.metric(), &beta)?);
        let rc = identity_report(&pc, &m)?;
        Ok(vec![
            Invariant::new("energy_density_equals_4a2", density, 1e-10),
            Invariant::new("phi_integral", r.gauss_bonnet_phi.abs().max(r.gauss_bonnet_phi_imag.abs()), 1e-8),
            Invariant::new("omega_integral", r.gauss_bonnet_omega.abs(), 1e-8),
            Invariant::new("dirichlet_residual", r.dirichlet_residual.abs(), 1e-8),
            Invariant::holds("lower_bound_positive_off_conformal", r.lower_bound > 0.0),
            Invariant::new("lower_bound_zero_on_conformal", rc.lower_bound.abs(), 1e-8),
        ])
    }
}

struct Wang;

impl VerificationSuite for Wang {
    fn name(&self) -> &'static str {
        "wang"
    }

    fn description(&self) -> &'static str {
        "constant solutions, the vanishing case and a generic cubic"
    }

    fn run(&self, ctx: &SuiteContext) -> pgt_core::Result<Vec<Invariant>> {
        let gr = &ctx.grid;
        let half = wang_solve(&CubicDifferential::constant(gr, Complex64::new(0.5f64.sqrt(), 0.0)), 1e-12, 50)?;
        let two = wang_solve(&CubicDifferential::constant(gr, Complex64::new(0.0, 2f64.sqrt())), 1e-12, 50)?;
        let want = 4f64.ln() / 6.0;
        let dev = two.u.values().iter().fold(0.0f64, |m, v| m.max((v - want).abs()));
        let zero = wang_solve(&CubicDifferential::constant(gr, Complex64::new(0.0, 0.0)), 1e-12, 50);
        let c = samples::random_cubic(gr, ctx.seed.wrapping_add(500), Complex64::new(0.8, 0.3), 0.4);
        let generic = wang_solve(&c, 1e-10, 20);
        let mut out = vec![
            Invariant::new("half_gives_zero", half.u.max_abs(), 1e-11),
            Invariant::new("two_gives_log4_over_6", dev, 1e-11),
            Invariant::holds("zero_has_no_solution", matches!(zero, Err(Error::NoSolution))),
        ];
        out.push(match generic {
            Ok(sol) => Invariant::new("generic_residual", sol.residual, 1e-10),
            Err(_) => Invariant::holds("generic_residual", false),
        });
        Ok(out)
    }
}

struct TiteicaLoop;

impl VerificationSuite for TiteicaLoop {
    fn name(&self) -> &'static str {
        "titeica"
    }

    fn description(&self) -> &'static str {
        "the constant-coefficient convex structure is flat, closed and extremal"
    }

    fn run(&self, ctx: &SuiteContext) -> pgt_core::Result<Vec<Invariant>> {
        let t = titeica(ctx.grid.tau(), Complex64::new(0.5f64.sqrt(), 0.0), ctx.grid.n())?;
        let m = t.conformal_class();
        let grad = gradient(&t.p, &m)?;
        Ok(vec![
            Invariant::new("flat", liouville_curvature(&t.p, &m)?.max_abs(), 1e-8),
            Invariant::new("closed", closedness_check(&t.p, &m)?, 1e-8),
            Invariant::new("extremal_q_l2", grad.q_l2, 1e-8),
            Invariant::new("gradient", grad.max_abs(), 1e-7),
        ])
    }
}

struct Flow;

impl VerificationSuite for Flow {
    fn name(&self) -> &'static str {
        "flow"
    }

    fn description(&self) -> &'static str {
        "first variation against finite differences and descent back to the Blaschke class"
    }

    fn run(&self, ctx: &SuiteContext) -> pgt_core::Result<Vec<Invariant>> {
        let gr = &ctx.grid;
        let s = ctx.seed.wrapping_mul(1000).wrapping_add(700);
        let p = samples::random_projective(gr, s, 0.5);
        let m = samples::random_conformal(gr, s + 1, 0.3);
        let g = gradient(&p, &m)?;
        let mut rel = 0.0f64;
        for eps in [1e-3, 1e-4, 1e-5] {
            let ep = energy(&p, &perturb(&m, &g.direction, eps)?)?;
            let em = energy(&p, &perturb(&m, &g.direction, -eps)?)?;
            rel = rel.max(((ep - em) / (2.0 * eps) - g.slope).abs() / g.slope.abs());
        }
        let t = titeica(gr.tau(), Complex64::new(0.5f64.sqrt(), 0.0), gr.n())?;
        let m0 = samples::perturb_conformal(&t.conformal_class(), s + 2, 0.05);
        let traj = descend(&t.p, &m0, &FlowOptions::default())?;
        let mono = traj.records.windows(2).all(|w| w[1].energy <= w[0].energy);
        Ok(vec![
            Invariant::new("first_variation_relative_error", rel, 0.02),
            Invariant::new("descent_q_l2", traj.final_q_l2(), 1e-6),
            Invariant::holds("descent_monotone", mono),
        ])
    }
}

struct Diffeo;

impl VerificationSuite for Diffeo {
    fn name(&self) -> &'static str {
        "diffeo"
    }

    fn description(&self) -> &'static str {
        "energy is unchanged by translations and the shear"
    }

    fn run(&self, ctx: &SuiteContext) -> pgt_core::Result<Vec<Invariant>> {
        let gr = &ctx.grid;
        let s = ctx.seed.wrapping_mul(1000).wrapping_add(800);
        let p = samples::random_projective(gr, s, 0.5);
        let m = samples::random_conformal(gr, s + 1, 0.3);
        let h = 1.0 / gr.n() as f64;
        let mut trans = 0.0f64;
        for shift in [[h, 0.0], [3.0 * h, 5.0 * h], [0.3, 0.71]] {
            trans = trans.max(diffeo_invariance_check(&p, &m, &AffineTorusMap::translation(shift))?);
        }
        let shear = AffineTorusMap::new([[1, 1], [0, 1]], [0.0, 0.0])?;
        Ok(vec![
            Invariant::new("translation", trans, 1e-9),
            Invariant::new("shear", diffeo_invariance_check(&p, &m, &shear)?, 1e-8),
        ])
    }
}

struct Io;

impl VerificationSuite for Io {
    fn name(&self) -> &'static str {
        "io"
    }

    fn description(&self) -> &'static str {
        "bit-exact PGFB round trip of every kind"
    }

    fn run(&self, ctx: &SuiteContext) -> pgt_core::Result<Vec<Invariant>> {
        let gr = &ctx.grid;
        let s = ctx.seed.wrapping_mul(1000).wrapping_add(900);
        let fields = [
            PgfbField::ScalarReal(samples::random_scalar(gr, s, 1.0)),
            PgfbField::ScalarComplex(samples::random_complex(gr, s + 1, 1.0)),
            PgfbField::Metric(samples::random_metric(gr, s + 2, 0.3).field().clone()),
            PgfbField::Connection(samples::random_connection(gr, s + 3, 1.0).field().clone()),
            PgfbField::EndoOneForm(samples::random_sym_tensor(gr, s + 4, 1.0)),
            PgfbField::OneForm(samples::random_one_form(gr, s + 5, 1.0)),
            PgfbField::Vector(samples::random_one_form(gr, s + 6, 1.0)),
        ];
        let mut ok = true;
        for f in &fields {
            let bytes = encode(f);
            let back = decode(&bytes, gr.tau())?;
            ok &= encode(&back) == bytes && &back == f;
        }
        Ok(vec![Invariant::holds("pgfb_round_trip", ok)])
    }
}
