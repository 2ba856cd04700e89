//! End-to-end acceptance checks. Runs as a plain program so that every
//! PASS/FAIL line is printed; exits non-zero if any check fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use spdechar::bounds::{
    compute_constants, compute_constants_with, fit_fourth_moment_constant, mc_flow_fourth_moment,
    mc_inverse_jacobian_moment, Adaptive, QuadSettings, Z99,
};
use spdechar::commutator::{commutator_lebris_lions, commutator_lebris_lions_with, decay_curve, NormKind};
use spdechar::flow::{det2, integrate_path, integrate_path_2d, FlowConfig, Record};
use spdechar::solution::{continuity_solution, transport_solution, transport_solution_2d, InitialCondition, TestFunction};
use spdechar::weakform::{composition_identity_check, continuity_residual_refinement, uniqueness_experiment};
use spdechar::{sample_brownian, DriftField, Grid1, Grid2, GridFunction, GridFunction2, MollifierKernel};

type Outcome = Result<String, String>;

fn require(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Piecewise-linear interpolation of grid samples, constant outside.
fn lerp(grid: &Grid1, v: &[f64], x: f64) -> f64 {
    let s = ((x - grid.x_min()) / grid.h()).clamp(0.0, (grid.len() - 1) as f64);
    let j = (s.floor() as usize).min(grid.len() - 2);
    let f = s - j as f64;
    v[j] * (1.0 - f) + v[j + 1] * f
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn zero_drift_exactness() -> Outcome {
    let grid = Grid1::with_spacing(-6.0, 6.0, 1.0 / 64.0).unwrap();
    let u0 = InitialCondition::Bump { center: 0.0, width: 1.0 }.sample(grid).unwrap();
    let w = sample_brownian(8, 100, 1.0, 101, 1).unwrap();
    let steps = vec![0, 1, 25, 50, 100];
    let cfg = FlowConfig {
        record: Record::Steps(steps.clone()),
        jacobian: true,
        guard_box: None,
    };
    let (mut err, mut jdev) = (0.0f64, 0.0f64);
    for m in 0..w.paths() {
        let pf = integrate_path(&DriftField::zero(), &w, m, &grid.points(), Some(grid), &cfg).unwrap();
        let mut bt = 0.0;
        let mut last = 0;
        for &n in &steps {
            bt += (last..n).map(|j| w.increment(m, j, 0)).sum::<f64>();
            last = n;
            let tr = transport_solution(&u0, &pf, n).unwrap().field;
            let co = continuity_solution(&u0, &pf, n).unwrap().field;
            for j in 0..grid.len() {
                let exact = lerp(&grid, u0.values(), grid.x(j) - bt);
                err = err.max((tr.values()[j] - exact).abs()).max((co.values()[j] - exact).abs());
                jdev = jdev.max((pf.jacobian(n, j).unwrap() - 1.0).abs());
            }
        }
    }
    let c = compute_constants(0.0, 1.0);
    let mut bound_ok = true;
    let mut worst_moment = 0.0f64;
    for t in [0.01, 0.1, 0.25, 0.5, 1.0] {
        for x in [0.0, 1.0, 3.0] {
            let e = mc_inverse_jacobian_moment(&DriftField::zero(), x, t, &w).unwrap();
            worst_moment = worst_moment.max((e.estimate - 1.0).abs());
            let bound = 2f64.sqrt() * t.powf(-0.375);
            bound_ok &= e.estimate <= bound && c.bound(x, t).is_some_and(|b| e.estimate <= b);
        }
    }
    require(
        err <= 1e-10 && jdev == 0.0 && worst_moment == 0.0 && bound_ok,
        format!("shift error {err:.3e}, |J-1| {jdev:.1e}, |E[J^-2]-1| {worst_moment:.1e}, bound holds {bound_ok}"),
    )
}

fn ou_oracle() -> Outcome {
    let (t, n) = (0.02, 200);
    let grid = Grid1::with_spacing(-4.0, 4.0, 1.0 / 128.0).unwrap();
    let ic = InitialCondition::Bump { center: 0.0, width: 1.0 };
    let u0 = ic.sample(grid).unwrap();
    let w = sample_brownian(8, n, t, 202, 1).unwrap();
    let dt = t / n as f64;
    let (mut fe, mut je, mut se) = (0.0f64, 0.0f64, 0.0f64);
    for m in 0..w.paths() {
        let pf = integrate_path(&DriftField::ou(), &w, m, &grid.points(), Some(grid), &FlowConfig::final_only()).unwrap();
        let shift: f64 = (0..n).map(|j| (-(t - (j + 1) as f64 * dt)).exp() * w.increment(m, j, 0)).sum();
        let xs = pf.positions(n).unwrap();
        for (j, x) in grid.points().into_iter().enumerate() {
            fe = fe.max((xs[j] - ((-t).exp() * x + shift)).abs() / (1.0 + x.abs()));
            je = je.max((pf.jacobian(n, j).unwrap() - (-t).exp()).abs() / (-t).exp());
        }
        let u = continuity_solution(&u0, &pf, n).unwrap().field;
        for (j, y) in grid.points().into_iter().enumerate() {
            se = se.max((u.values()[j] - ic.eval((y - shift) * t.exp()) * t.exp()).abs());
        }
    }
    require(
        fe <= 1e-3 && je <= 1e-5 && se <= 5e-3,
        format!("flow {fe:.3e}, jacobian rel {je:.3e}, continuity sup {se:.3e}"),
    )
}

fn explicit_constants() -> Outcome {
    let c = compute_constants(0.01, 1.0);
    let wide = compute_constants_with(0.01, 1.0, QuadSettings { z_scale: 2.0, ..Default::default() });
    let fine = compute_constants_with(
        0.01,
        1.0,
        QuadSettings {
            adaptive: Adaptive {
                initial_panels: 32,
                rel_tol: 1e-15,
                ..Adaptive::default()
            },
            ..Default::default()
        },
    );
    let rel = |a: Option<f64>, b: Option<f64>| (a.unwrap() - b.unwrap()).abs() / a.unwrap().abs();
    let stability = [rel(c.c1, wide.c1), rel(c.c2, wide.c2), rel(c.c1, fine.c1), rel(c.c2, fine.c2)]
        .into_iter()
        .fold(0.0, f64::max);
    let k2 = c.k2.unwrap();
    let z = compute_constants(0.0, 1.0);
    let zero_err = [
        (z.c1.unwrap() - 1.0).abs(),
        (z.c2.unwrap() - 4.0).abs(),
        (z.k1.unwrap() - 2f64.sqrt()).abs(),
        z.k2.unwrap().abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let diverges = !compute_constants(1.0, 1.0).converges() && compute_constants(1.0, 1.0).k1.is_none();
    require(
        c.converges() && stability <= 1e-10 && (k2 - 0.0398).abs() <= 1e-15 && zero_err <= 1e-12 && diverges,
        format!(
            "guards {}, refinement drift {stability:.2e}, k2 {k2}, k=0 error {zero_err:.1e}, c2 {:.6}",
            c.converges(),
            c.c2.unwrap()
        ),
    )
}

fn inverse_jacobian_bound() -> Outcome {
    let start = Instant::now();
    let b = DriftField::tanh(0.01);
    let c = compute_constants(0.01, 1.0);
    let w = sample_brownian(10_000, 100, 1.0, 404, 1).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for x in [0.0, 1.0] {
        for t in [0.25, 1.0] {
            let e = mc_inverse_jacobian_moment(&b, x, t, &w).unwrap();
            let bound = c.bound(x, t).unwrap();
            ok &= e.ci_hi <= bound && e.tainted == 0;
            detail.push(format!("({x},{t}) {:.4}<={:.4}", e.ci_hi, bound));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    require(ok && secs <= 60.0, format!("{} in {secs:.1}s", detail.join(", ")))
}

fn fourth_moment_bound() -> Outcome {
    let t = 1.0;
    let w = sample_brownian(10_000, 100, t, 505, 1).unwrap();
    let mut within_ci = true;
    let mut estimates = Vec::new();
    for x in [0.0, 1.0, 2.0, 10.0] {
        let e = mc_flow_fourth_moment(&DriftField::zero(), x, t, &w).unwrap();
        // E[(x + B_t)^4] = x^4 + 6 x^2 t + 3 t^2
        let exact = x.powi(4) + 6.0 * x * x * t + 3.0 * t * t;
        within_ci &= (e.estimate - exact).abs() <= Z99 * e.stderr;
        estimates.push(e);
    }
    let c = fit_fourth_moment_constant(&estimates, t);
    require(
        within_ci && c <= 1.5,
        format!("Gaussian formula within CI {within_ci}, fitted C {c:.4} (threshold 1.5)"),
    )
}

fn commutator_rates() -> Outcome {
    let grid = Grid1::with_spacing(-3.0, 3.0, 1.0 / 1024.0).unwrap();
    let eps = [0.1, 0.05, 0.025];
    let window = (-2.0, 2.0);
    let f = GridFunction::from_fn(grid, "f", |x| x).unwrap();
    let g = GridFunction::from_fn(grid, "g", f64::sin).unwrap();
    let dg = GridFunction::from_fn(grid, "dg", f64::cos).unwrap();
    let curve = decay_curve(|k| commutator_lebris_lions_with(&f, &g, &dg, k), &eps, NormKind::L2, window).unwrap();
    // ||sin''||_{L2(-2,2)}^2 = 2 - sin(4)/2
    let g2 = (2.0 - 4f64.sin() / 2.0).sqrt();
    let fit = curve
        .points
        .iter()
        .map(|&(e, n)| (n / (e * e * g2 / 11.0) - 1.0).abs())
        .fold(0.0, f64::max);
    let rough = DriftField::holder(0.5).unwrap().sample(grid).unwrap();
    let rc = decay_curve(|k| commutator_lebris_lions(&rough, &g, k), &eps, NormKind::L1, window).unwrap();
    require(
        fit <= 0.2 && (1.7..=2.3).contains(&curve.slope) && rc.strictly_decreasing(),
        format!(
            "Taylor fit deviation {fit:.3}, slope {:.3}, holder norms {}",
            curve.slope,
            sci(&rc.norms())
        ),
    )
}

fn composition_identity() -> Outcome {
    let fine = sample_brownian(1, 160, 0.5, 707, 1).unwrap();
    let b = DriftField::tanh(0.5);
    let kernel = MollifierKernel::new(0.1).unwrap();
    let starts = [-0.6, -0.2, 0.0, 0.3, 0.7];
    let mut defects = Vec::new();
    for (factor, h) in [(4usize, 1.0 / 64.0), (2, 1.0 / 128.0), (1, 1.0 / 256.0)] {
        let w = fine.coarsen(factor).unwrap();
        let grid = Grid1::with_spacing(-4.0, 4.0, h).unwrap();
        let u0 = InitialCondition::Gauss { center: 0.0, width: 0.4 }.sample(grid).unwrap();
        let c = composition_identity_check(&u0, &b, kernel, 0, &w, w.steps(), &starts).unwrap();
        defects.push(c.max_defect());
    }
    let ratios: Vec<f64> = defects.windows(2).map(|d| d[0] / d[1]).collect();
    require(
        ratios.iter().all(|r| *r >= 1.5),
        format!("defects {}, ratios {ratios:.3?}", sci(&defects)),
    )
}

fn weak_form_residual() -> Outcome {
    let h = 1.0 / 256.0;
    let w = sample_brownian(256, 128, 0.25, 808, 1).unwrap();
    let flow = Grid1::with_spacing(-1.5, 1.5, h).unwrap();
    let out = Grid1::with_spacing(-2.0, 2.0, h).unwrap();
    let u0 = InitialCondition::Bump { center: 0.0, width: 1.0 }.sample(flow).unwrap();
    let phi = TestFunction::bump(0.0, 2.0);
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, b) in [("zero", DriftField::zero()), ("ou", DriftField::ou())] {
        let st = continuity_residual_refinement(&b, &u0, &phi, &w, &[4, 2, 1], &out).unwrap();
        let r = st.ratios();
        ok &= r.iter().all(|v| *v >= 1.3);
        detail.push(format!("{name}: sup {} ratios {r:.3?}", sci(&st.mean_sup)));
    }
    require(ok, detail.join("; "))
}

fn uniqueness_coupling() -> Outcome {
    let start = Instant::now();
    let grid = Grid1::with_spacing(-6.0, 6.0, 1.0 / 256.0).unwrap();
    let flow = Grid1::with_spacing(-1.5, 1.5, 1.0 / 256.0).unwrap();
    let b = DriftField::holder_scaled(0.5, 0.01).unwrap();
    let eps = [0.2, 0.1, 0.05, 0.025];
    let w = sample_brownian(200, 50, 1.0, 909, 1).unwrap();
    let u0 = InitialCondition::Bump { center: 0.0, width: 1.0 }.sample(grid).unwrap();
    let r = uniqueness_experiment(&b, &u0, &eps, &w, &flow, Record::Final).unwrap();
    let d = r.final_distances();
    let strictly = d.windows(2).all(|p| p[1] < p[0]);
    let z = uniqueness_experiment(&b, &GridFunction::zeros(grid, "zero"), &eps, &w.truncate_paths(8), &flow, Record::Final)
        .unwrap();
    let zero_exact = z.distances.iter().flatten().all(|v| *v == 0.0);
    let secs = start.elapsed().as_secs_f64();
    require(
        strictly && zero_exact && secs <= 120.0,
        format!("distances {}, zero data exact {zero_exact}, {secs:.1}s", sci(&d)),
    )
}

fn divergence_free_conservation() -> Outcome {
    let b = DriftField::rotation();
    let t = 0.5;
    let fine = sample_brownian(2, 1000, t, 1010, 2).unwrap();
    let w = fine.coarsen(2).unwrap();
    let g = Grid2::square(-3.0, 3.0, 1.0 / 64.0).unwrap();
    let u0 = GridFunction2::from_fn(g, "u0", |q| (-((q[0] - 0.5).powi(2) + q[1] * q[1]) / 0.18).exp()).unwrap();
    let sq = |u: &GridFunction2| u.map(|_, v| v * v).integrate();
    let n0 = sq(&u0);
    let starts = [[0.5, 0.0], [-1.0, 0.7], [0.0, -1.5], [1.2, 1.2]];
    let mut l2 = 0.0f64;
    let mut ratios = Vec::new();
    for m in 0..w.paths() {
        let (u, _) = transport_solution_2d(&u0, &b, &w, m, w.steps(), &g).unwrap();
        l2 = l2.max((sq(&u) - n0).abs() / n0);
        let defect = |ens: &spdechar::BrownianEnsemble| {
            let pf = integrate_path_2d(&b, ens, m, &starts, &FlowConfig::final_only()).unwrap();
            pf.jacobians(ens.steps()).unwrap().iter().map(|j| (det2(j) - 1.0).abs()).fold(0.0, f64::max)
        };
        ratios.push(defect(&w) / defect(&fine));
    }
    require(
        l2 <= 1e-2 && ratios.iter().all(|r| (1.8..=2.2).contains(r)),
        format!("L2 defect {l2:.3e}, det defect ratios {ratios:.3?}"),
    )
}

fn csv_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(csv_tree(&p));
        } else if p.extension().is_some_and(|e| e == "csv") {
            out.push((p.display().to_string().replace(&dir.display().to_string(), ""), fs::read(&p).unwrap()));
        }
    }
    out.sort();
    out
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for (i, threads) in ["1", "1", "3"].iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        let cfg = tmp.path().join(format!("run{i}.cfg"));
        fs::write(&cfg, format!("experiment=all\nseed=1111\noutput={}\n", out.display())).unwrap();
        let status = Command::new(env!("CARGO_BIN_EXE_spdechar"))
            .args(["run", "--config", cfg.to_str().unwrap(), "--threads", threads])
            .env_remove("SPDECHAR_SEED")
            .output()
            .unwrap()
            .status;
        if status.code() != Some(0) {
            return Err(format!("run {i} exited with {status}"));
        }
        trees.push(csv_tree(&out));
    }
    require(
        !trees[0].is_empty() && trees[0] == trees[1] && trees[0] == trees[2],
        format!("{} CSV files compared across 3 runs", trees[0].len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("zero_drift_exactness", zero_drift_exactness),
        ("ou_oracle", ou_oracle),
        ("explicit_constants", explicit_constants),
        ("inverse_jacobian_moment_bound", inverse_jacobian_bound),
        ("fourth_moment_bound", fourth_moment_bound),
        ("commutator_rates", commutator_rates),
        ("composition_identity", composition_identity),
        ("weak_form_residual", weak_form_residual),
        ("uniqueness_coupling", uniqueness_coupling),
        ("divergence_free_conservation", divergence_free_conservation),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (verdict, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{verdict} {:2} {name}: {detail} [{:.1}s]",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
