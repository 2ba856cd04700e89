//! Bodies of the named experiment suites run by the CLI.

use std::path::Path;

use crate::bounds::{
    compare_with_bound, comparisons_csv, compute_constants, compute_constants_with, fit_fourth_moment_constant,
    gaussian_fourth_moment, jacobian_shape_fit, mc_flow_fourth_moment, mc_inverse_jacobian_moment,
    mc_jacobian_moment_p, weighted_apriori_sweep, apriori_csv, Adaptive, QuadSettings, Z99,
};
use crate::cli::{write_artifact, ExperimentConfig, SuiteReport};
use crate::commutator::{commutator_lebris_lions, commutator_lebris_lions_with, decay_curve, NormKind};
use crate::error::{Error, Result};
use crate::exec;
use crate::field::{DriftField, MollifierKernel};
use crate::flow::{integrate_path, integrate_path_2d, FlowConfig, Record};
use crate::grid::{Grid1, Grid2, GridFunction, GridFunction2};
use crate::paths::sample_brownian;
use crate::report::{fmt_num, Check, Csv};
use crate::solution::{
    continuity_solution, mass, transport_solution, transport_solution_2d, InitialCondition, TestFunction,
    TestFunction2,
};
use crate::weakform::{composition_identity_check, continuity_residual_refinement, uniqueness_experiment};

/// Fully resolved parameters of one suite.
#[derive(Debug, Clone)]
pub struct Params {
    pub drift: DriftField,
    pub initial: InitialCondition,
    pub paths: usize,
    pub steps: usize,
    pub horizon: f64,
    pub h: f64,
    pub domain: f64,
    pub eps: Vec<f64>,
    pub x_probes: Vec<f64>,
    pub t_probes: Vec<f64>,
    pub k: Option<f64>,
    pub dim: usize,
    pub guard_box: Option<f64>,
    pub seed: u64,
}

struct Defaults {
    drift: &'static str,
    initial: &'static str,
    paths: usize,
    steps: usize,
    horizon: f64,
    h: f64,
    domain: f64,
    eps: &'static [f64],
}

const FLOWS: Defaults = Defaults {
    drift: "zero",
    initial: "bump(0,1)",
    paths: 4,
    steps: 100,
    horizon: 1.0,
    h: 1.0 / 64.0,
    domain: 6.0,
    eps: &[0.1],
};
const BOUNDS: Defaults = Defaults {
    drift: "tanh(0.01)",
    initial: "bump(0,1)",
    paths: 10_000,
    steps: 100,
    horizon: 1.0,
    h: 1.0 / 128.0,
    domain: 5.0,
    eps: &[0.2, 0.1, 0.05],
};
const COMMUTATORS: Defaults = Defaults {
    drift: "holder(0.5)",
    initial: "bump(0,1)",
    paths: 1,
    steps: 1,
    horizon: 1.0,
    h: 1.0 / 1024.0,
    domain: 3.0,
    eps: &[0.1, 0.05, 0.025],
};
const WEAKFORM: Defaults = Defaults {
    drift: "tanh(0.01)",
    initial: "gauss(0,0.4)",
    paths: 256,
    steps: 128,
    horizon: 0.25,
    h: 1.0 / 256.0,
    domain: 4.0,
    eps: &[0.1],
};
const UNIQUENESS: Defaults = Defaults {
    drift: "holder(0.5,0.01)",
    initial: "bump(0,1)",
    paths: 200,
    steps: 50,
    horizon: 1.0,
    h: 1.0 / 256.0,
    domain: 6.0,
    eps: &[0.2, 0.1, 0.05, 0.025],
};

fn resolve(cfg: &ExperimentConfig, d: &Defaults) -> Result<Params> {
    let horizon = cfg.horizon.unwrap_or(d.horizon);
    let steps = match cfg.dt {
        Some(dt) => {
            let n = (horizon / dt).round();
            if n < 1.0 || ((n * dt - horizon) / horizon).abs() > 1e-9 {
                return Err(Error::Config {
                    field: "dt".into(),
                    reason: format!("dt = {dt} does not divide the horizon {horizon}"),
                });
            }
            n as usize
        }
        None => cfg.steps.unwrap_or(d.steps),
    };
    Ok(Params {
        drift: DriftField::parse(cfg.drift.as_deref().unwrap_or(d.drift))?,
        initial: InitialCondition::parse(cfg.initial.as_deref().unwrap_or(d.initial))?,
        paths: cfg.paths.unwrap_or(d.paths),
        steps,
        horizon,
        h: cfg.h.unwrap_or(d.h),
        domain: cfg.domain.unwrap_or(d.domain),
        eps: cfg.eps.clone().unwrap_or_else(|| d.eps.to_vec()),
        x_probes: cfg.x_probes.clone().unwrap_or_else(|| vec![0.0, 1.0]),
        t_probes: cfg.t_probes.clone().unwrap_or_else(|| vec![0.25, horizon]),
        k: cfg.k,
        dim: cfg.dim.unwrap_or(1),
        guard_box: cfg.guard_box,
        seed: cfg.seed.unwrap_or(0),
    })
}

/// Runs the configured suite (or all of them), writing artifacts below
/// `cfg.output/<suite>/`.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let seed = cfg.seed.unwrap_or(0);
    let names: Vec<&str> = if cfg.experiment == "all" {
        vec!["flows", "bounds", "commutators", "weakform", "uniqueness"]
    } else {
        vec![cfg.experiment.as_str()]
    };
    let mut report = SuiteReport::new(&cfg.experiment, seed);
    for name in names {
        let dir = cfg.output.join(name);
        let r = match name {
            "flows" => flows(&resolve(cfg, &FLOWS)?, &dir),
            "bounds" => bounds(&resolve(cfg, &BOUNDS)?, &dir),
            "commutators" => commutators(&resolve(cfg, &COMMUTATORS)?, &dir),
            "weakform" => weakform(&resolve(cfg, &WEAKFORM)?, &dir),
            "uniqueness" => uniqueness(&resolve(cfg, &UNIQUENESS)?, &dir),
            other => Err(Error::UnknownExperiment {
                name: other.to_string(),
                valid: crate::cli::SUITES.join(", "),
            }),
        }?;
        report.merge(r);
    }
    Ok(report)
}

fn art(dir: &Path, file: &str) -> String {
    let suite = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    format!("{suite}/{file}")
}

/// Representation formulas on the configured drift, the OU oracle and the
/// planar rotation field.
pub fn flows(p: &Params, dir: &Path) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("flows", p.seed);
    if p.dim == 2 {
        planar_configured(p, dir, &mut rep)?;
    } else {
        line_configured(p, dir, &mut rep)?;
    }
    ou_oracle(p, dir, &mut rep)?;
    rotation(p, dir, &mut rep)?;
    Ok(rep)
}

fn line_configured(p: &Params, dir: &Path, rep: &mut SuiteReport) -> Result<()> {
    let grid = Grid1::with_spacing(-p.domain, p.domain, p.h)?;
    let w = sample_brownian(p.paths, p.steps, p.horizon, p.seed, 1)?;
    let u0 = p.initial.sample(grid)?;
    let snap_steps = vec![0, p.steps / 2, p.steps];
    let cfg = FlowConfig {
        record: Record::Steps(snap_steps.clone()),
        jacobian: true,
        guard_box: p.guard_box,
    };
    let zero = p.drift == DriftField::zero();
    let m0 = mass(&u0);
    let per_path = exec::map_indexed(p.paths, |m| -> Result<(Vec<(usize, GridFunction)>, f64, f64, f64)> {
        let pf = integrate_path(&p.drift, &w, m, &grid.points(), Some(grid), &cfg)?;
        let (mut mass_def, mut shift_err, mut jac_dev) = (0.0f64, 0.0f64, 0.0f64);
        let mut snaps = Vec::new();
        for &n in pf.recorded_steps() {
            let u = continuity_solution(&u0, &pf, n)?.field;
            mass_def = mass_def.max((mass(&u) - m0).abs() / m0.abs().max(f64::MIN_POSITIVE));
            if zero {
                let tr = transport_solution(&u0, &pf, n)?.field;
                let bt = w.position(m, n, 0);
                for j in 0..grid.len() {
                    let expect = u0.interpolate(grid.x(j) - bt).0;
                    shift_err = shift_err.max((u.values()[j] - expect).abs()).max((tr.values()[j] - expect).abs());
                }
                for j in 0..grid.len() {
                    jac_dev = jac_dev.max((pf.jacobian(n, j)? - 1.0).abs());
                }
            }
            if m < 2 {
                snaps.push((n, u));
            }
        }
        Ok((snaps, mass_def, shift_err, jac_dev))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut mass_csv = Csv::new(&["m", "mass_defect_relative"]);
    let (mut md, mut se, mut jd) = (0.0f64, 0.0f64, 0.0f64);
    for (m, (snaps, a, b, c)) in per_path.iter().enumerate() {
        for (n, u) in snaps {
            write_artifact(dir, &format!("u_t{n}_m{m}.csv"), &u.to_csv())?;
        }
        mass_csv.push(vec![m.to_string(), fmt_num(*a)]);
        md = md.max(*a);
        se = se.max(*b);
        jd = jd.max(*c);
    }
    write_artifact(dir, "mass.csv", &mass_csv.render())?;
    let dt = w.dt();
    rep.checks.push(Check::at_most(
        "flows.continuity_mass_defect",
        md,
        2.0 * (p.h * p.h + dt),
        &art(dir, "mass.csv"),
    ));
    if zero {
        let mut csv = Csv::new(&["shift_error", "jacobian_deviation"]);
        csv.push_nums(&[se, jd]);
        write_artifact(dir, "zero_drift.csv", &csv.render())?;
        rep.checks.push(Check::at_most("flows.zero_drift_shift_error", se, 1e-10, &art(dir, "zero_drift.csv")));
        rep.checks.push(Check::at_most("flows.zero_drift_jacobian_deviation", jd, 0.0, &art(dir, "zero_drift.csv")));
    }
    Ok(())
}

fn planar_configured(p: &Params, dir: &Path, rep: &mut SuiteReport) -> Result<()> {
    if p.drift.dimension() != 2 {
        return Err(Error::Config {
            field: "drift".into(),
            reason: format!("`{}` is not a planar field but dim=2", p.drift),
        });
    }
    let g = Grid2::square(-p.domain, p.domain, p.h)?;
    let w = sample_brownian(p.paths, p.steps, p.horizon, p.seed, 2)?;
    let u0 = GridFunction2::from_fn(g, "u0", |q| p.initial.eval(q[0]) * p.initial.eval(q[1]))?;
    let n0 = u0.map(|_, v| v * v).integrate();
    let mut csv = Csv::new(&["m", "l2_defect_relative"]);
    let mut worst = 0.0f64;
    for m in 0..p.paths {
        let (u, _) = transport_solution_2d(&u0, &p.drift, &w, m, p.steps, &g)?;
        let d = ((u.map(|_, v| v * v).integrate() - n0) / n0).abs();
        worst = worst.max(d);
        csv.push(vec![m.to_string(), fmt_num(d)]);
    }
    write_artifact(dir, "planar_l2.csv", &csv.render())?;
    if p.drift.divergence_free() {
        rep.checks.push(Check::at_most("flows.planar_l2_conservation", worst, 1e-2, &art(dir, "planar_l2.csv")));
    } else {
        rep.notes.push(format!("planar drift is not divergence free; L2 defect {}", fmt_num(worst)));
    }
    Ok(())
}

fn ou_oracle(p: &Params, dir: &Path, rep: &mut SuiteReport) -> Result<()> {
    let (t, n) = (0.02, 200);
    let w = sample_brownian(4, n, t, p.seed.wrapping_add(101), 1)?;
    let grid = Grid1::with_spacing(-4.0, 4.0, 1.0 / 128.0)?;
    let ic = InitialCondition::Bump { center: 0.0, width: 1.0 };
    let u0 = ic.sample(grid)?;
    let dt = w.dt();
    let mut flow_err = 0.0f64;
    let mut jac_err = 0.0f64;
    let mut sol_err = 0.0f64;
    for m in 0..w.paths() {
        let pf = integrate_path(&DriftField::ou(), &w, m, &grid.points(), Some(grid), &FlowConfig::final_only())?;
        // X_t(x) = e^{-t} x + sum_j e^{-(t - t_{j+1})} dB_j
        let noise: f64 = (0..n).map(|j| (-(t - (j + 1) as f64 * dt)).exp() * w.increment(m, j, 0)).sum();
        let xs = pf.positions(n)?;
        for (j, x) in grid.points().iter().enumerate() {
            let exact = (-t).exp() * x + noise;
            flow_err = flow_err.max((xs[j] - exact).abs() / (1.0 + x.abs()));
            jac_err = jac_err.max((pf.jacobian(n, j)? / (-t).exp() - 1.0).abs());
        }
        let u = continuity_solution(&u0, &pf, n)?.field;
        for (j, y) in grid.points().iter().enumerate() {
            let exact = ic.eval((y - noise) * t.exp()) * t.exp();
            sol_err = sol_err.max((u.values()[j] - exact).abs());
        }
    }
    let mut csv = Csv::new(&["flow_error", "jacobian_error", "solution_error"]);
    csv.push_nums(&[flow_err, jac_err, sol_err]);
    write_artifact(dir, "ou_oracle.csv", &csv.render())?;
    let a = art(dir, "ou_oracle.csv");
    rep.checks.push(Check::at_most("flows.ou_flow_error", flow_err, 1e-3, &a));
    rep.checks.push(Check::at_most("flows.ou_jacobian_error", jac_err, 1e-5, &a));
    rep.checks.push(Check::at_most("flows.ou_solution_error", sol_err, 5e-3, &a));
    Ok(())
}

/// Planar rotation: L2 conservation of the transport solution and
/// first-order convergence of det(DX) to 1.
fn rotation(p: &Params, dir: &Path, rep: &mut SuiteReport) -> Result<()> {
    let (t, n) = (0.5, 500);
    let b = DriftField::rotation();
    let w = sample_brownian(2, 2 * n, t, p.seed.wrapping_add(202), 2)?;
    let coarse = w.coarsen(2)?;
    let g = Grid2::square(-3.0, 3.0, 1.0 / 64.0)?;
    let s2 = 2.0 * 0.3 * 0.3;
    let u0 = GridFunction2::from_fn(g, "u0", |q| (-((q[0] - 0.5).powi(2) + q[1] * q[1]) / s2).exp())?;
    let n0 = u0.map(|_, v| v * v).integrate();
    let mut csv = Csv::new(&["m", "l2_defect_relative", "det_defect_dt", "det_defect_dt_half"]);
    let (mut worst, mut worst_ratio) = (0.0f64, f64::INFINITY);
    let starts = [[0.5, 0.0], [-1.0, 0.7], [0.0, -1.5]];
    for m in 0..1 {
        let (u, _) = transport_solution_2d(&u0, &b, &coarse, m, n, &g)?;
        let d = ((u.map(|_, v| v * v).integrate() - n0) / n0).abs();
        let det_defect = |ens: &crate::paths::BrownianEnsemble| -> Result<f64> {
            let pf = integrate_path_2d(&b, ens, m, &starts, &FlowConfig::final_only())?;
            Ok(pf
                .jacobians(ens.steps())?
                .iter()
                .map(|j| (crate::flow::det2(j) - 1.0).abs())
                .fold(0.0, f64::max))
        };
        let (dc, df) = (det_defect(&coarse)?, det_defect(&w)?);
        worst = worst.max(d);
        worst_ratio = worst_ratio.min(dc / df);
        csv.push(vec![m.to_string(), fmt_num(d), fmt_num(dc), fmt_num(df)]);
    }
    write_artifact(dir, "rotation.csv", &csv.render())?;
    let a = art(dir, "rotation.csv");
    rep.checks.push(Check::at_most("flows.rotation_l2_defect", worst, 1e-2, &a));
    rep.checks.push(Check::at_least("flows.rotation_det_halving_ratio", worst_ratio, 1.8, &a));
    Ok(())
}

/// Constants by quadrature and Monte Carlo moment checks.
pub fn bounds(p: &Params, dir: &Path) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("bounds", p.seed);
    let k = p.k.unwrap_or_else(|| p.drift.growth());
    let t = p.horizon;
    let c = compute_constants(k, t);
    write_artifact(dir, "constants.csv", &c.to_csv())?;
    let a = art(dir, "constants.csv");
    rep.checks.push(Check::flag("bounds.guards_pass", c.converges(), &a));
    if c.converges() {
        let wide = compute_constants_with(k, t, QuadSettings { z_scale: 2.0, ..Default::default() });
        let fine = compute_constants_with(
            k,
            t,
            QuadSettings {
                adaptive: Adaptive {
                    initial_panels: 16,
                    ..Adaptive::default()
                },
                ..Default::default()
            },
        );
        let rel = |x: Option<f64>, y: Option<f64>| match (x, y) {
            (Some(x), Some(y)) => ((x - y) / x).abs(),
            _ => f64::INFINITY,
        };
        let drift = [rel(c.c1, wide.c1), rel(c.c2, wide.c2), rel(c.c1, fine.c1), rel(c.c2, fine.c2)]
            .into_iter()
            .fold(0.0, f64::max);
        rep.checks.push(Check::at_most("bounds.quadrature_refinement", drift, 1e-10, &a));
        if k == 0.0 {
            let closed = [
                (c.c1.unwrap_or(f64::NAN) - t.sqrt()).abs(),
                (c.c2.unwrap_or(f64::NAN) - 4.0 * t.sqrt()).abs(),
            ];
            rep.checks.push(Check::at_most("bounds.c1_closed_form", closed[0], 1e-12, &a));
            rep.checks.push(Check::at_most("bounds.c2_closed_form", closed[1], 1e-12, &a));
        }
    }

    let w = sample_brownian(p.paths, p.steps, t, p.seed.wrapping_add(1), 1)?;
    let mut rows = Vec::new();
    for &x in &p.x_probes {
        for &tp in &p.t_probes {
            let e = mc_inverse_jacobian_moment(&p.drift, x, tp, &w)?;
            rows.push(compare_with_bound(e, &c));
        }
    }
    write_artifact(dir, "inverse_jacobian.csv", &comparisons_csv(&rows))?;
    for r in &rows {
        rep.checks.push(Check::at_most(
            format!("bounds.inverse_jacobian_moment x={} t={}", r.estimate.point, r.estimate.time),
            r.estimate.ci_hi,
            r.bound.unwrap_or(f64::NAN),
            &art(dir, "inverse_jacobian.csv"),
        ));
    }

    let p4 = mc_jacobian_moment_p(&p.drift, 0.0, t, 4.0, &w)?;
    let shape = jacobian_shape_fit(&p.drift, t, 2.0, &w)?;
    let mut csv = Csv::new(&["x", "t", "p", "estimate", "stderr"]);
    csv.push_nums(&[0.0, t, 4.0, p4.estimate, p4.stderr]);
    for e in &shape.estimates {
        csv.push_nums(&[e.point, e.time, 2.0, e.estimate, e.stderr]);
    }
    write_artifact(dir, "jacobian_moments.csv", &csv.render())?;
    rep.checks.push(Check::at_most(
        "bounds.jacobian_p4_relative_stderr",
        p4.stderr / p4.estimate,
        0.05,
        &art(dir, "jacobian_moments.csv"),
    ));
    rep.notes.push(format!(
        "log E[J^2] vs x^2: slope {} intercept {} max residual {}",
        fmt_num(shape.slope),
        fmt_num(shape.intercept),
        fmt_num(shape.max_residual)
    ));

    let probes = [0.0, 1.0, 2.0, 10.0];
    let mut csv = Csv::new(&["x", "t", "estimate", "stderr", "exact", "ratio"]);
    let mut ests = Vec::new();
    for &x in &probes {
        let e = mc_flow_fourth_moment(&DriftField::zero(), x, t, &w)?;
        let exact = gaussian_fourth_moment(x, t);
        csv.push_nums(&[x, t, e.estimate, e.stderr, exact, e.estimate / (x.powi(4) + t.powi(4))]);
        rep.checks.push(Check::at_most(
            format!("bounds.fourth_moment_gaussian x={x}"),
            (e.estimate - exact).abs(),
            Z99 * e.stderr,
            &art(dir, "fourth_moment.csv"),
        ));
        ests.push(e);
    }
    write_artifact(dir, "fourth_moment.csv", &csv.render())?;
    rep.notes.push(format!(
        "fitted fourth-moment constant C = {}",
        fmt_num(fit_fourth_moment_constant(&ests, t))
    ));

    if c.converges() {
        let grid = Grid1::with_spacing(-p.domain, p.domain, p.h)?;
        let u0 = p.initial.sample(grid)?;
        let sub = w.truncate_paths(p.paths.min(32));
        let stride = (p.steps / 10).max(1);
        let sweep = weighted_apriori_sweep(&u0, &p.drift, &p.eps, &sub, &c, stride)?;
        write_artifact(dir, "apriori.csv", &apriori_csv(&sweep.checks))?;
        rep.checks.push(Check::at_most(
            "bounds.apriori_ratio_variation",
            sweep.variation,
            0.1,
            &art(dir, "apriori.csv"),
        ));
    }
    Ok(rep)
}

/// Commutator decay for a smooth pair and for the configured rough field.
pub fn commutators(p: &Params, dir: &Path) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("commutators", p.seed);
    let grid = Grid1::with_spacing(-p.domain, p.domain, p.h)?;
    let window = (-2.0, 2.0);
    let f = GridFunction::from_fn(grid, "f", |x| x)?;
    let g = GridFunction::from_fn(grid, "g", f64::sin)?;
    let dg = GridFunction::from_fn(grid, "dg", f64::cos)?;
    let smooth = decay_curve(
        |k| commutator_lebris_lions_with(&f, &g, &dg, k),
        &p.eps,
        NormKind::L2,
        window,
    )?;
    write_artifact(dir, "smooth.csv", &smooth.to_csv())?;
    let a = art(dir, "smooth.csv");
    // ||g''||_{L2(-2,2)} for g = sin
    let g2 = (2.0 - (4.0f64).sin() / 2.0).sqrt();
    for &(eps, norm) in &smooth.points {
        let predicted = MollifierKernel::new(eps)?.second_moment() * g2;
        rep.checks.push(Check::at_most(
            format!("commutators.taylor_fit eps={eps}"),
            (norm / predicted - 1.0).abs(),
            0.2,
            &a,
        ));
    }
    if smooth.points.len() >= 2 {
        rep.checks.push(Check::at_least("commutators.slope_lower", smooth.slope, 1.7, &a));
        rep.checks.push(Check::at_most("commutators.slope_upper", smooth.slope, 2.3, &a));
    }

    let rough = p.drift.sample(grid)?;
    let curve = decay_curve(|k| commutator_lebris_lions(&rough, &g, k), &p.eps, NormKind::L1, window)?;
    write_artifact(dir, "rough.csv", &curve.to_csv())?;
    rep.checks.push(Check::flag(
        "commutators.rough_strictly_decreasing",
        curve.strictly_decreasing(),
        &art(dir, "rough.csv"),
    ));

    let constant = GridFunction::from_fn(grid, "c", |_| 1.5)?;
    let flat = decay_curve(|k| commutator_lebris_lions(&constant, &g, k), &p.eps, NormKind::L2, window)?;
    write_artifact(dir, "constant.csv", &flat.to_csv())?;
    rep.checks.push(Check::at_most(
        "commutators.constant_field_max_norm",
        flat.norms().into_iter().fold(0.0, f64::max),
        1e-8,
        &art(dir, "constant.csv"),
    ));
    Ok(rep)
}

/// Composition identity and Itô residual refinement studies.
pub fn weakform(p: &Params, dir: &Path) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("weakform", p.seed);
    let kernel = MollifierKernel::new(p.eps[0])?;

    // composition identity: three simultaneous (dt, h) halvings of one path
    let fine = sample_brownian(1, 160, 0.5, p.seed.wrapping_add(3), 1)?;
    let starts = [-0.6, -0.2, 0.0, 0.3, 0.7];
    let mut csv = Csv::new(&["dt", "h", "max_defect"]);
    let mut defects = Vec::new();
    for (f, h) in [(4usize, 1.0 / 64.0), (2, 1.0 / 128.0), (1, 1.0 / 256.0)] {
        let w = fine.coarsen(f)?;
        let grid = Grid1::with_spacing(-p.domain, p.domain, h)?;
        let u0 = p.initial.sample(grid)?;
        let c = composition_identity_check(&u0, &p.drift, kernel, 0, &w, w.steps(), &starts)?;
        csv.push_nums(&[w.dt(), h, c.max_defect()]);
        defects.push(c.max_defect());
    }
    write_artifact(dir, "composition.csv", &csv.render())?;
    for (i, d) in defects.windows(2).enumerate() {
        rep.checks.push(Check::at_least(
            format!("weakform.composition_ratio level={i}"),
            d[0] / d[1],
            1.5,
            &art(dir, "composition.csv"),
        ));
    }

    // residuals of the continuity equation under coupled dt-halving
    let w = sample_brownian(p.paths, p.steps, p.horizon, p.seed.wrapping_add(4), 1)?;
    let flow = Grid1::with_spacing(-1.5, 1.5, p.h)?;
    let out = Grid1::with_spacing(-2.0, 2.0, p.h)?;
    let u0 = InitialCondition::Bump { center: 0.0, width: 1.0 }.sample(flow)?;
    let phi = TestFunction::bump(0.0, 2.0);
    for (name, b) in [("zero", DriftField::zero()), ("ou", DriftField::ou())] {
        let st = continuity_residual_refinement(&b, &u0, &phi, &w, &[4, 2, 1], &out)?;
        let file = format!("residual_{name}.csv");
        write_artifact(dir, &file, &st.to_csv())?;
        for (i, r) in st.ratios().iter().enumerate() {
            rep.checks.push(Check::at_least(
                format!("weakform.residual_ratio drift={name} level={i}"),
                *r,
                1.3,
                &art(dir, &file),
            ));
        }
    }
    let planar = planar_residual_note(p)?;
    rep.notes.push(planar);
    Ok(rep)
}

fn planar_residual_note(p: &Params) -> Result<String> {
    let g = Grid2::square(-2.0, 2.0, 1.0 / 16.0)?;
    let w = sample_brownian(1, 32, 0.125, p.seed.wrapping_add(5), 2)?;
    let u0 = GridFunction2::from_fn(g, "u0", |q| (-((q[0] - 0.4).powi(2) + q[1] * q[1]) / 0.2).exp())?;
    let phi = TestFunction2 {
        x: TestFunction::bump(0.0, 1.5),
        y: TestFunction::bump(0.0, 1.5),
    };
    let series = crate::solution::transport_series_2d(&u0, &DriftField::rotation(), &w, 0, &g)?;
    let r = crate::weakform::ito_residual_transport(&series, &DriftField::rotation(), &phi, 0, &w)?;
    Ok(format!("planar transport residual sup|r| = {}", fmt_num(r.sup())))
}

/// Shared-noise convergence of mollified problems.
pub fn uniqueness(p: &Params, dir: &Path) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("uniqueness", p.seed);
    let grid = Grid1::with_spacing(-p.domain, p.domain, p.h)?;
    let flow = Grid1::with_spacing(-1.5, 1.5, p.h)?;
    let w = sample_brownian(p.paths, p.steps, p.horizon, p.seed.wrapping_add(6), 1)?;
    let u0 = p.initial.sample(grid)?;
    let record = Record::Every((p.steps / 10).max(1));
    let r = uniqueness_experiment(&p.drift, &u0, &p.eps, &w, &flow, record.clone())?;
    write_artifact(dir, "distance.csv", &r.to_csv())?;
    let a = art(dir, "distance.csv");
    rep.checks.push(Check::flag("uniqueness.distance_decreasing_at_horizon", r.decreasing_at_horizon(), &a));
    rep.checks.push(Check::below("uniqueness.trend", r.trend, 1.0, &a));
    rep.checks.push(Check::at_most("uniqueness.tainted_paths", r.tainted as f64, 0.0, &a));

    let few = w.truncate_paths(p.paths.min(4));
    let z = uniqueness_experiment(&p.drift, &GridFunction::zeros(grid, "0"), &p.eps, &few, &flow, record)?;
    write_artifact(dir, "distance_zero_data.csv", &z.to_csv())?;
    let worst = z.distances.iter().flatten().fold(0.0f64, |m, d| m.max(d.abs()));
    rep.checks.push(Check::at_most("uniqueness.zero_data_distance", worst, 0.0, &art(dir, "distance_zero_data.csv")));
    Ok(rep)
}
