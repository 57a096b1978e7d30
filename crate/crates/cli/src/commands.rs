//! One function per subcommand. Each returns a JSON body and, for checks
//! that can fail, the name of the first failed invariant.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde_json::{json, Value};

use pgt_core::blaschke::{closedness_check, titeica, wang_solve, CubicDifferential};
use pgt_core::flatness::{is_flat, liouville_curvature};
use pgt_core::flow::{descend, gradient_from_scalars, identity_report_from_scalars, FlowOptions, FlowRecord, FlowTrajectory};
use pgt_core::frames::{frame_scalars, ConformalStructure, FrameScalars};
use pgt_core::pgfb::{self, PgfbField};
use pgt_core::projective::{energy, energy_density, ProjectiveStructure};
use pgt_core::tensor_calc::{ConnectionField, MetricField};
use pgt_core::{ComplexField, Error, TorusGrid};

use crate::config::{required, Settings};
use crate::heatmap::emit_heatmap;
use crate::report::{self, value};
use crate::suites::{default_registry, SuiteContext};
use crate::CliError;

pub struct Outcome {
    pub body: Value,
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(body: Value) -> Self {
        Self { body, failure: None }
    }
}

fn load_p(path: &Path, tau: Complex64) -> Result<ProjectiveStructure, CliError> {
    match pgfb::read(path, tau)? {
        PgfbField::Connection(f) => Ok(ProjectiveStructure::new(ConnectionField::new(f)?)),
        other => Err(CliError::Usage(format!(
            "{}: expected a connection, found {:?}",
            path.display(),
            other.kind()
        ))),
    }
}

fn load_m(path: &Path, tau: Complex64) -> Result<ConformalStructure, CliError> {
    match pgfb::read(path, tau)? {
        PgfbField::Metric(f) => Ok(ConformalStructure::from_metric(&MetricField::new(f)?)?),
        other => Err(CliError::Usage(format!(
            "{}: expected a metric, found {:?}",
            path.display(),
            other.kind()
        ))),
    }
}

fn load_pair(s: &Settings) -> Result<(ProjectiveStructure, ConformalStructure), CliError> {
    let tau = s.tau()?;
    let p = load_p(required(&s.p, "p")?, tau)?;
    let m = load_m(required(&s.m, "m")?, tau)?;
    if p.grid() != m.grid() {
        return Err(Error::GridMismatch.into());
    }
    Ok((p, m))
}

fn heatmap(s: &Settings, field: &pgt_core::ScalarField, body: &mut Value) -> Result<(), CliError> {
    if let Some(prefix) = &s.heatmap {
        let (csv, ppm) = emit_heatmap(field, prefix)?;
        body["heatmap"] = json!({ "csv": csv.display().to_string(), "ppm": ppm.display().to_string() });
    }
    Ok(())
}

fn tau_json(tau: Complex64) -> Value {
    json!([tau.re, tau.im])
}

pub fn verify(s: &Settings) -> Result<Outcome, CliError> {
    let n = s.n_or(32)?;
    let grid = TorusGrid::with_tau(n, s.tau()?)?;
    let seed = s.seed.unwrap_or(0);
    let registry = default_registry();
    let selector = s.suite.as_deref().unwrap_or("all");
    let suites = registry.select(selector).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown suite {selector}; available: all, {}",
            registry.names().join(", ")
        ))
    })?;
    let ctx = SuiteContext { grid, seed };
    let mut failure = None;
    let mut out = Vec::new();
    for suite in suites {
        let invariants = suite.run(&ctx)?;
        let pass = invariants.iter().all(|i| i.pass);
        if failure.is_none() {
            if let Some(bad) = invariants.iter().find(|i| !i.pass) {
                failure = Some(format!("{}/{}", suite.name(), bad.name));
            }
        }
        out.push(json!({
            "name": suite.name(),
            "description": suite.description(),
            "pass": pass,
            "invariants": value(&invariants),
        }));
    }
    Ok(Outcome {
        body: json!({
            "n": n,
            "tau": tau_json(ctx.grid.tau()),
            "seed": seed,
            "pass": failure.is_none(),
            "suites": out,
        }),
        failure,
    })
}

pub fn energy_cmd(s: &Settings) -> Result<Outcome, CliError> {
    let (p, m) = load_pair(s)?;
    let e = energy(&p, &m)?;
    let mut body = json!({ "n": p.grid().n(), "energy": e });
    heatmap(s, &energy_density(&p, &m)?, &mut body)?;
    Ok(Outcome::ok(body))
}

fn write_scalars(dir: &Path, fs: &FrameScalars) -> Result<Value, CliError> {
    std::fs::create_dir_all(dir)?;
    let parts: [(&str, &ComplexField, &str); 5] = [
        ("a", &fs.a, "cubic coefficient a"),
        ("k", &fs.k, "trace part k of the Schouten tensor"),
        ("q", &fs.q_covariant, "Hopf coefficient q"),
        ("phi1", &fs.phi1, "connection form component phi(d/dx1)"),
        ("phi2", &fs.phi2, "connection form component phi(d/dx2)"),
    ];
    let mut components = serde_json::Map::new();
    for (name, field, what) in parts {
        let file = format!("{name}.pgfb");
        pgfb::write(dir.join(&file), &PgfbField::ScalarComplex(field.clone()))?;
        components.insert(name.into(), json!({ "file": file, "description": what }));
    }
    let sidecar = report::envelope(
        "frame-scalars",
        json!({
            "n": fs.grid().n(),
            "tau": tau_json(fs.grid().tau()),
            "kind": pgfb::Kind::ScalarComplex as u8,
            "components": components,
        }),
    );
    let path = dir.join("frame_scalars.json");
    std::fs::write(&path, report::to_string(&sidecar) + "\n")?;
    Ok(Value::from(path.display().to_string()))
}

pub fn extremality(s: &Settings) -> Result<Outcome, CliError> {
    let (p, m) = load_pair(s)?;
    let tol = s.tol_or(1e-8)?;
    let fs = frame_scalars(&p, &m)?;
    let grad = gradient_from_scalars(&fs)?;
    let mut body = json!({
        "n": p.grid().n(),
        "q_l2": grad.q_l2,
        "gradient_max": grad.max_abs(),
        "q_cross_oracle": fs.max_q_discrepancy(),
        "tol": tol,
        "extremal": grad.q_l2 < tol,
    });
    heatmap(s, &fs.q_covariant.map(|q| q.norm()), &mut body)?;
    if let Some(dir) = &s.scalars_dir {
        body["scalars"] = write_scalars(dir, &fs)?;
    }
    Ok(Outcome::ok(body))
}

pub fn wang(s: &Settings) -> Result<Outcome, CliError> {
    let tau = s.tau()?;
    let c = match &s.c_field {
        Some(path) => match pgfb::read(path, tau)? {
            PgfbField::ScalarComplex(f) => CubicDifferential::new(f)?,
            other => {
                return Err(CliError::Usage(format!(
                    "{}: expected a complex scalar, found {:?}",
                    path.display(),
                    other.kind()
                )))
            }
        },
        None => CubicDifferential::constant(&TorusGrid::with_tau(s.n_or(64)?, tau)?, s.cubic()?),
    };
    let tol = s.tol_or(1e-12)?;
    let sol = wang_solve(&c, tol, s.max_iter.unwrap_or(50))?;
    if let Some(out) = &s.out {
        pgfb::write(out, &PgfbField::ScalarReal(sol.u.clone()))?;
    }
    let (lo, hi) = sol
        .u
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mut body = json!({
        "n": c.grid().n(),
        "residual": sol.residual,
        "iterations": sol.iterations,
        "u_min": lo,
        "u_max": hi,
    });
    heatmap(s, &sol.u, &mut body)?;
    Ok(Outcome::ok(body))
}

pub fn titeica_cmd(s: &Settings) -> Result<Outcome, CliError> {
    let tau = s.tau()?;
    let n = s.n_or(64)?;
    let t = titeica(tau, s.cubic()?, n)?;
    let m = t.conformal_class();
    let fs = frame_scalars(&t.p, &m)?;
    let grad = gradient_from_scalars(&fs)?;
    if let Some(path) = &s.out_p {
        pgfb::write(path, &PgfbField::Connection(t.p.rep().field().clone()))?;
    }
    if let Some(path) = &s.out_m {
        pgfb::write(path, &PgfbField::Metric(m.field().clone()))?;
    }
    Ok(Outcome::ok(json!({
        "n": n,
        "tau": tau_json(tau),
        "wang": value(&t.solution.report()),
        "liouville_max": liouville_curvature(&t.p, &m)?.max_abs(),
        "closedness": closedness_check(&t.p, &m)?,
        "q_l2": grad.q_l2,
        "energy": energy(&t.p, &m)?,
    })))
}

fn write_trace(path: &Path, records: &[FlowRecord]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iter,energy,q_l2,step")?;
    for r in records {
        writeln!(w, "{},{:.16e},{:.16e},{:.16e}", r.iter, r.energy, r.q_l2, r.step)?;
    }
    w.flush()?;
    Ok(())
}

fn trajectory_body(traj: &FlowTrajectory, opts: &FlowOptions) -> Value {
    let first = traj.records.first();
    let last = traj.records.last();
    json!({
        "options": value(opts),
        "iterations": traj.records.len().saturating_sub(1),
        "converged": traj.converged,
        "initial_energy": first.map(|r| r.energy),
        "final_energy": last.map(|r| r.energy),
        "final_q_l2": last.map(|r| r.q_l2),
    })
}

pub fn flow(s: &Settings) -> Result<Outcome, CliError> {
    let tau = s.tau()?;
    let p = load_p(required(&s.p, "p")?, tau)?;
    let m0 = load_m(required(&s.init, "init")?, tau)?;
    let d = FlowOptions::default();
    let opts = FlowOptions {
        step: s.step.unwrap_or(d.step),
        max_iter: s.max_iter.unwrap_or(d.max_iter),
        tol_q: s.tol_q.unwrap_or(d.tol_q),
        sobolev: s.sobolev.unwrap_or(d.sobolev),
        ..d
    };
    let (traj, stalled) = match descend(&p, &m0, &opts) {
        Ok(t) => (t, false),
        Err(Error::Stalled { trajectory, .. }) => (*trajectory, true),
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = &s.trace {
        write_trace(path, &traj.records)?;
    }
    if let Some(path) = &s.out {
        pgfb::write(path, &PgfbField::Metric(traj.final_structure.field().clone()))?;
    }
    let mut body = trajectory_body(&traj, &opts);
    body["stalled"] = Value::from(stalled);
    Ok(Outcome {
        body,
        failure: stalled.then(|| "flow/line_search".to_string()),
    })
}

pub fn flatness(s: &Settings) -> Result<Outcome, CliError> {
    let (p, m) = load_pair(s)?;
    let tol = s.tol_or(1e-8)?;
    let mut body = value(&is_flat(&p, &m, tol)?);
    let l = liouville_curvature(&p, &m)?;
    heatmap(s, &l.field().map(|v| v[0].hypot(v[1])), &mut body)?;
    Ok(Outcome::ok(body))
}

pub fn gauss_bonnet(s: &Settings) -> Result<Outcome, CliError> {
    let (p, m) = load_pair(s)?;
    let fs = frame_scalars(&p, &m)?;
    let r = identity_report_from_scalars(&fs, energy(&p, &m)?)?;
    Ok(Outcome::ok(value(&r)))
}
