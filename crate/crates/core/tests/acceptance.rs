//! End-to-end acceptance run. Every criterion is evaluated, one line is
//! printed per criterion, and the test fails afterwards if any failed.
//!
//! Run with `cargo test --release -p pgt-core --test acceptance -- --nocapture`.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pgt_core::blaschke::{closedness_check, titeica, wang_solve, CubicDifferential};
use pgt_core::flatness::liouville_curvature;
use pgt_core::flow::{descend, diffeo_invariance_check, gradient, identity_report, perturb, FlowOptions};
use pgt_core::frames::{conformal_curvature, frame_energy_density, frame_scalars};
use pgt_core::pgfb::{decode, encode, PgfbField};
use pgt_core::projective::{
    a_form, a_form_point, canonical_pair, energy, energy_density, tensor_field_max_abs,
    trace_free_difference, x_g, x_g_point, ProjectiveStructure,
};
use pgt_core::samples;
use pgt_core::tensor_calc::{
    conformal_connection, iota, metricity_residual, t3_sub, trace, PointTensor,
};
use pgt_core::{AffineTorusMap, Error, Field, TorusGrid};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn field_diff(a: &Field<[[[f64; 2]; 2]; 2]>, b: &Field<[[[f64; 2]; 2]; 2]>) -> f64 {
    tensor_field_max_abs(&a.zip_map(b, |x, y| t3_sub(&x, &y)).unwrap())
}

/// `(max residual of the field suite, max canonical-pair residuals)`.
fn field_ensemble() -> (f64, f64, f64) {
    let gr = TorusGrid::new(32).unwrap();
    let mut worst: f64 = 0.0;
    let (mut tf, mut metricity): (f64, f64) = (0.0, 0.0);
    for s in 0..100u64 {
        let seed = 1000 + 10 * s;
        let g = samples::random_metric(&gr, seed, 0.3);
        let p = samples::random_projective(&gr, seed + 1, 0.5);
        let a = a_form(&p, &g).unwrap();
        // trace-free, symmetric, g-symmetric
        worst = worst.max(a.invariant_residuals(&g).max());
        // projective invariance
        let ups = samples::random_one_form(&gr, seed + 2, 0.5);
        let a_p = a_form(&p.with_projective_change(&ups).unwrap(), &g).unwrap();
        worst = worst.max(field_diff(a.field(), a_p.field()));
        // conformal invariance
        let f = samples::random_scalar(&gr, seed + 3, 0.3);
        let a_c = a_form(&p, &g.conformal_rescale(&f).unwrap()).unwrap();
        worst = worst.max(field_diff(a.field(), a_c.field()));
        // vanishing on conformal connections, with X_g = β♯
        let beta = samples::random_one_form(&gr, seed + 4, 0.5);
        let conf = conformal_connection(&g, &beta).unwrap();
        let pc = ProjectiveStructure::new(conf.clone());
        worst = worst.max(tensor_field_max_abs(a_form(&pc, &g).unwrap().field()));
        let x = x_g(&conf, &g).unwrap();
        for idx in 0..gr.len() {
            let h = g.inverse().at(idx);
            let b = beta.at(idx);
            let want = [h[0][0] * b[0] + h[0][1] * b[1], h[1][0] * b[0] + h[1][1] * b[1]];
            let got = x.at(idx);
            worst = worst.max((got[0] - want[0]).abs()).max((got[1] - want[1]).abs());
        }
        let pair = canonical_pair(&p, &g).unwrap();
        tf = tf.max(trace_free_difference(p.rep(), &pair.projective_rep).unwrap());
        let b = pair.beta(&g).unwrap();
        metricity = metricity.max(metricity_residual(&pair.conformal_rep, &g, &b).unwrap());
    }
    (worst, tf, metricity)
}

fn pointwise_ensemble() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let raw: Vec<f64> = (0..27).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = PointTensor::from_fn(3, |i, j, k| raw[(i * 3 + j) * 3 + k]).unwrap();
        let l = DMatrix::from_fn(3, 3, |r, c| if c <= r { rng.gen_range(-0.5..0.5) } else { 0.0 });
        let g = &l * l.transpose() + DMatrix::identity(3, 3);
        let h = g.clone().try_inverse().unwrap();
        let a = a_form_point(&d, &g).unwrap();
        worst = worst.max(trace(&a).iter().fold(0.0, |m, t| m.max(t.abs())));
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    worst = worst.max((a.get(i, j, k) - a.get(i, k, j)).abs());
                }
            }
        }
        let ups: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let changed = d.add(&iota(&ups).unwrap());
        worst = worst.max(a_form_point(&changed, &g).unwrap().sub(&a).max_abs());
        // g → e^{2f} g moves ∇^g by ι(df) − g⊗∇f, so D moves by the negative
        let f: f64 = rng.gen_range(-1.0..1.0);
        let df: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grad: Vec<f64> = (0..3).map(|i| (0..3).map(|k| h[(i, k)] * df[k]).sum()).collect();
        let shift = PointTensor::from_fn(3, |i, j, k| g[(j, k)] * grad[i]).unwrap();
        let d2 = d.sub(&iota(&df).unwrap()).add(&shift);
        let g2 = &g * (2.0 * f).exp();
        worst = worst.max(a_form_point(&d2, &g2).unwrap().sub(&a).max_abs());
        let bup: Vec<f64> = (0..3).map(|i| (0..3).map(|k| h[(i, k)] * ups[k]).sum()).collect();
        let conf = PointTensor::from_fn(3, |i, j, k| g[(j, k)] * bup[i])
            .unwrap()
            .sub(&iota(&ups).unwrap());
        worst = worst.max(a_form_point(&conf, &g).unwrap().max_abs());
        let x = x_g_point(&conf, &g).unwrap();
        for i in 0..3 {
            worst = worst.max((x[i] - bup[i]).abs());
        }
    }
    worst
}

fn criteria_1_and_2() -> (Outcome, Outcome) {
    let (fields, tf, metricity) = field_ensemble();
    let points = pointwise_ensemble();
    (
        outcome(
            fields < 1e-9 && points < 1e-9,
            format!("field suite {fields:.2e}, pointwise dim 3 {points:.2e} (tol 1e-9)"),
        ),
        outcome(
            tf < 1e-9 && metricity < 1e-9,
            format!("trace-free difference {tf:.2e}, metricity {metricity:.2e} (tol 1e-9)"),
        ),
    )
}

fn criterion_3() -> Outcome {
    let gr = TorusGrid::new(64).unwrap();
    let (mut dq, mut se): (f64, f64) = (0.0, 0.0);
    for s in 0..20u64 {
        let p = samples::random_projective(&gr, 3000 + 2 * s, 0.5);
        let m = samples::random_conformal(&gr, 3001 + 2 * s, 0.3);
        let fs = frame_scalars(&p, &m).unwrap();
        dq = dq.max(fs.max_q_discrepancy());
        se = se.max(conformal_curvature(&fs).unwrap().max_residual);
    }
    outcome(
        dq < 1e-7 && se < 1e-7,
        format!("q cross-oracle {dq:.2e}, structure equation {se:.2e} (tol 1e-7)"),
    )
}

fn criterion_4() -> Outcome {
    let gr = TorusGrid::new(64).unwrap();
    let p = samples::random_projective(&gr, 4000, 0.5);
    let m = samples::random_conformal(&gr, 4001, 0.3);
    let fs = frame_scalars(&p, &m).unwrap();
    let dens = energy_density(&p, &m).unwrap();
    let frame = frame_energy_density(&fs).unwrap();
    let density = dens.zip_map(&frame, |a, b| (a - b).abs()).unwrap().max_abs();
    let r = identity_report(&p, &m).unwrap();
    let phi = r.gauss_bonnet_phi.abs().max(r.gauss_bonnet_phi_imag.abs());
    let beta = samples::random_one_form(&gr, 4002, 0.5);
    let pc = ProjectiveStructure::new(conformal_connection(&m.metric(), &beta).unwrap());
    let rc = identity_report(&pc, &m).unwrap();
    let pass = density < 1e-10
        && phi < 1e-8
        && r.gauss_bonnet_omega.abs() < 1e-8
        && r.dirichlet_residual.abs() < 1e-8
        && r.lower_bound > 1e-3
        && rc.lower_bound.abs() < 1e-8
        && rc.energy.abs() < 1e-8;
    outcome(
        pass,
        format!(
            "density {density:.2e}, i∫φ {phi:.2e}, ω-identity {:.2e}, Dirichlet {:.2e}, bound {:.3e} / conformal {:.2e}",
            r.gauss_bonnet_omega.abs(),
            r.dirichlet_residual.abs(),
            r.lower_bound,
            rc.lower_bound.abs()
        ),
    )
}

fn criterion_5() -> Outcome {
    let gr = TorusGrid::new(64).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    let half = wang_solve(&CubicDifferential::constant(&gr, Complex64::new(0.5f64.sqrt(), 0.0)), 1e-12, 50).unwrap();
    let u_half = half.u.max_abs();
    pass &= u_half < 1e-11;
    notes.push(format!("|c|²=½ max|u| {u_half:.1e}"));
    let two = wang_solve(&CubicDifferential::constant(&gr, Complex64::new(0.0, 2f64.sqrt())), 1e-12, 50).unwrap();
    let want = 4f64.ln() / 6.0;
    let dev = two.u.values().iter().fold(0.0f64, |m, v| m.max((v - want).abs()));
    pass &= dev < 1e-11;
    notes.push(format!("|c|²=2 deviation {dev:.1e}"));
    let zero = wang_solve(&CubicDifferential::constant(&gr, Complex64::new(0.0, 0.0)), 1e-12, 50);
    let no_solution = matches!(zero, Err(Error::NoSolution));
    pass &= no_solution;
    notes.push(format!("c=0 no-solution {no_solution}"));
    for seed in [5000u64, 5001, 5002] {
        let c = samples::random_cubic(&gr, seed, Complex64::new(0.8, 0.3), 0.4);
        let start = Instant::now();
        match wang_solve(&c, 1e-10, 20) {
            Ok(sol) => {
                let ok = sol.residual < 1e-10 && sol.iterations <= 20 && start.elapsed().as_secs() < 10;
                pass &= ok;
                notes.push(format!("generic {} steps res {:.1e}", sol.iterations, sol.residual));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("generic failed: {e}"));
            }
        }
    }
    outcome(pass, notes.join(", "))
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (tau, c) in [
        (Complex64::new(0.0, 1.0), Complex64::new(0.5f64.sqrt(), 0.0)),
        (Complex64::new(0.3, 1.1), Complex64::new(0.9, 0.4)),
    ] {
        let t = titeica(tau, c, 64).unwrap();
        let m = t.conformal_class();
        let flat = liouville_curvature(&t.p, &m).unwrap().max_abs();
        let closed = closedness_check(&t.p, &m).unwrap();
        let grad = gradient(&t.p, &m).unwrap();
        pass &= flat < 1e-8 && closed < 1e-8 && grad.q_l2 < 1e-8 && grad.max_abs() < 1e-7;
        notes.push(format!(
            "τ={tau}: L {flat:.1e}, closed {closed:.1e}, q {:.1e}, grad {:.1e}",
            grad.q_l2,
            grad.max_abs()
        ));
    }
    outcome(pass, notes.join("; "))
}

fn criterion_7() -> Outcome {
    let gr = TorusGrid::new(64).unwrap();
    let p = samples::random_projective(&gr, 7000, 0.5);
    let m = samples::random_conformal(&gr, 7001, 0.3);
    let g = gradient(&p, &m).unwrap();
    let mut worst_rel: f64 = 0.0;
    for eps in [1e-3, 1e-4, 1e-5] {
        let ep = energy(&p, &perturb(&m, &g.direction, eps).unwrap()).unwrap();
        let em = energy(&p, &perturb(&m, &g.direction, -eps).unwrap()).unwrap();
        let fd = (ep - em) / (2.0 * eps);
        worst_rel = worst_rel.max((fd - g.slope).abs() / g.slope.abs());
    }
    let t = titeica(Complex64::new(0.0, 1.0), Complex64::new(0.5f64.sqrt(), 0.0), 64).unwrap();
    let m0 = samples::perturb_conformal(&t.conformal_class(), 7002, 0.05);
    let start = Instant::now();
    let (flow_ok, flow_note) = match descend(&t.p, &m0, &FlowOptions::default()) {
        Ok(traj) => {
            let mono = traj.records.windows(2).all(|w| w[1].energy <= w[0].energy);
            let iters = traj.records.len() - 1;
            (
                traj.converged && mono && iters <= 500,
                format!(
                    "descent {iters} iterations, q {:.1e}, monotone {mono}, {:.1}s",
                    traj.final_q_l2(),
                    start.elapsed().as_secs_f64()
                ),
            )
        }
        Err(e) => (false, format!("descent failed: {e}")),
    };
    outcome(
        worst_rel < 0.02 && flow_ok,
        format!("first variation rel err {worst_rel:.1e}, {flow_note}"),
    )
}

fn criterion_8() -> Outcome {
    let gr = TorusGrid::new(64).unwrap();
    let p = samples::random_projective(&gr, 8000, 0.5);
    let m = samples::random_conformal(&gr, 8001, 0.3);
    let mut trans: f64 = 0.0;
    for shift in [[1.0 / 64.0, 0.0], [5.0 / 64.0, 11.0 / 64.0], [0.3, 0.71]] {
        trans = trans.max(diffeo_invariance_check(&p, &m, &AffineTorusMap::translation(shift)).unwrap());
    }
    let shear = AffineTorusMap::new([[1, 1], [0, 1]], [0.0, 0.0]).unwrap();
    let sh = diffeo_invariance_check(&p, &m, &shear).unwrap();
    outcome(
        trans < 1e-9 && sh < 1e-8,
        format!("translations {trans:.1e} (tol 1e-9), shear {sh:.1e} (tol 1e-8)"),
    )
}

fn pipeline_bytes() -> Vec<u8> {
    let gr = TorusGrid::new(32).unwrap();
    let p = samples::random_projective(&gr, 9000, 0.5);
    let m = samples::random_conformal(&gr, 9001, 0.3);
    let fs = frame_scalars(&p, &m).unwrap();
    let opts = FlowOptions {
        max_iter: 5,
        ..Default::default()
    };
    let traj = descend(&p, &m, &opts).unwrap();
    let mut out = encode(&PgfbField::ScalarComplex(fs.q_covariant));
    out.extend(encode(&PgfbField::Metric(traj.final_structure.field().clone())));
    for r in traj.records {
        out.extend(r.energy.to_le_bytes());
        out.extend(r.q_l2.to_le_bytes());
    }
    out
}

fn criterion_9() -> Outcome {
    let gr = TorusGrid::new(16).unwrap();
    let tau = gr.tau();
    let fields = vec![
        PgfbField::ScalarReal(samples::random_scalar(&gr, 1, 1.0)),
        PgfbField::ScalarComplex(samples::random_complex(&gr, 2, 1.0)),
        PgfbField::Metric(samples::random_metric(&gr, 3, 0.3).field().clone()),
        PgfbField::Connection(samples::random_connection(&gr, 4, 1.0).field().clone()),
        PgfbField::EndoOneForm(samples::random_sym_tensor(&gr, 5, 1.0)),
        PgfbField::OneForm(samples::random_one_form(&gr, 6, 1.0)),
        PgfbField::Vector(samples::random_one_form(&gr, 7, 1.0)),
    ];
    let round_trip = fields.iter().all(|f| {
        let bytes = encode(f);
        decode(&bytes, tau).map(|back| encode(&back) == bytes && &back == f).unwrap_or(false)
    });
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let first = pool.install(pipeline_bytes);
    let second = pool.install(pipeline_bytes);
    let identical = first == second;
    outcome(
        round_trip && identical,
        format!("round trip bit-exact {round_trip}, single-threaded reruns identical {identical}"),
    )
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let start = Instant::now();
    let (c1, c2) = criteria_1_and_2();
    let t12 = start.elapsed().as_secs_f64();
    results.push(("1 compatibility tensor properties", c1, t12));
    results.push(("2 canonical pair", c2, t12));
    type Criterion = fn() -> Outcome;
    let rest: [(&str, Criterion); 7] = [
        ("3 frame cross-oracle", criterion_3),
        ("4 energy identities", criterion_4),
        ("5 Wang solver", criterion_5),
        ("6 Titeica loop", criterion_6),
        ("7 gradient and descent", criterion_7),
        ("8 diffeomorphism invariance", criterion_8),
        ("9 determinism and I/O", criterion_9),
    ];
    for (name, run) in rest {
        let t = Instant::now();
        let o = run();
        results.push((name, o, t.elapsed().as_secs_f64()));
    }
    for (name, o, secs) in &results {
        println!(
            "criterion {name}: {} ({}; {secs:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
