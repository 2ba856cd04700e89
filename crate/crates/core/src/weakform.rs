//! Pathwise Itô weak formulation, the composition identity along mollified
//! characteristics, and the coupled-mollification uniqueness experiment.

use crate::commutator::commutator_primitive;
use crate::error::{Error, Result};
use crate::exec::{self, pairwise_sum};
use crate::field::{mollify, DriftField, MollifierKernel};
use crate::flow::{integrate_path, FlowConfig, Record};
use crate::grid::{trapezoid, Grid1, Grid2, GridFunction, GridFunction2};
use crate::paths::BrownianEnsemble;
use crate::report::Csv;
use crate::solution::{
    continuity_series, continuity_solution, continuity_solution_on, primitive, transport_series_2d, weighted_norm_sq,
    TestFunction, TestFunction2, WeightSpec,
};

/// `r(t_n)` together with the terms it is assembled from, so that
/// `residual = data - initial - drift - martingale - laplacian`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    pub times: Vec<f64>,
    pub residual: Vec<f64>,
    /// `int u(t_n) phi`
    pub data: Vec<f64>,
    /// `int u0 phi`
    pub initial: f64,
    pub drift: Vec<f64>,
    pub martingale: Vec<f64>,
    pub laplacian: Vec<f64>,
    pub dt: f64,
    pub h: f64,
}

impl ResidualSeries {
    pub fn sup(&self) -> f64 {
        self.residual.iter().fold(0.0, |a, r| a.max(r.abs()))
    }

    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["t", "residual", "data", "initial", "drift", "martingale", "laplacian"]);
        for n in 0..self.times.len() {
            csv.push_nums(&[
                self.times[n],
                self.residual[n],
                self.data[n],
                self.initial,
                self.drift[n],
                self.martingale[n],
                self.laplacian[n],
            ]);
        }
        csv.render()
    }
}

/// Per-step integrals: `a = int u phi`, drift integrand, martingale
/// integrands (one per noise component) and Laplacian integrand.
struct StepTerms {
    a: f64,
    drift: f64,
    mart: [f64; 2],
    lap: f64,
}

/// Left-point accumulation shared by the 1-D and 2-D assemblers.
fn assemble(terms: &[StepTerms], w: &BrownianEnsemble, m: usize, h: f64) -> ResidualSeries {
    let dt = w.dt();
    let n = terms.len();
    let initial = terms[0].a;
    let (mut drift, mut mart, mut lap) = (0.0, 0.0, 0.0);
    let mut out = ResidualSeries {
        times: Vec::with_capacity(n),
        residual: Vec::with_capacity(n),
        data: Vec::with_capacity(n),
        initial,
        drift: Vec::with_capacity(n),
        martingale: Vec::with_capacity(n),
        laplacian: Vec::with_capacity(n),
        dt,
        h,
    };
    for (k, t) in terms.iter().enumerate() {
        out.times.push(w.time(k));
        out.data.push(t.a);
        out.drift.push(drift);
        out.martingale.push(mart);
        out.laplacian.push(lap);
        out.residual.push(if k == 0 { 0.0 } else { t.a - initial - drift - mart - lap });
        if k + 1 == n {
            break;
        }
        drift += t.drift * dt;
        for c in 0..w.dim() {
            mart += t.mart[c] * w.increment(m, k, c);
        }
        lap += 0.5 * t.lap * dt;
    }
    out
}

fn check_series_len(len: usize, w: &BrownianEnsemble) -> Result<()> {
    if len != w.steps() + 1 {
        return Err(Error::Alignment(format!(
            "{len} snapshots for a path with {} steps (need every step)",
            w.steps()
        )));
    }
    Ok(())
}

/// Residual of the Itô weak form of the continuity equation
/// `du + d/dx(b u) dt + d/dx u o dB = 0` tested against `phi` on path `m`.
///
/// `series` must hold `(n, u(t_n))` for every `n = 0..=N` of `w`.
pub fn ito_residual_continuity(
    series: &[(usize, GridFunction)],
    b: &DriftField,
    phi: &TestFunction,
    m: usize,
    w: &BrownianEnsemble,
) -> Result<ResidualSeries> {
    check_series_len(series.len(), w)?;
    if let Some((i, _)) = series.iter().enumerate().find(|(i, s)| s.0 != *i) {
        return Err(Error::Alignment(format!("snapshot {i} is not step {i}")));
    }
    let grid = *series[0].1.grid();
    let (p0, p1, p2) = phi.sample(&grid);
    let bx: Vec<f64> = grid.points().iter().map(|&x| b.eval1(x)).collect();
    let mut buf = vec![0.0; grid.len()];
    let terms = series
        .iter()
        .map(|(_, u)| {
            u.check_same_grid(&series[0].1)?;
            let v = u.values();
            let mut int = |f: &dyn Fn(usize) -> f64| {
                for (j, slot) in buf.iter_mut().enumerate() {
                    *slot = f(j);
                }
                trapezoid(&buf, grid.h())
            };
            let a = int(&|j| v[j] * p0[j]);
            let drift = int(&|j| v[j] * bx[j] * p1[j]);
            let mart = int(&|j| v[j] * p1[j]);
            let lap = int(&|j| v[j] * p2[j]);
            Ok(StepTerms {
                a,
                drift,
                mart: [mart, 0.0],
                lap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(&terms, w, m, grid.h()))
}

/// Residual of the Itô weak form of the planar transport equation
/// `du + b . grad u dt + grad u o dB = 0`, with `grad u` by central
/// differences.
pub fn ito_residual_transport(
    series: &[GridFunction2],
    b: &DriftField,
    phi: &TestFunction2,
    m: usize,
    w: &BrownianEnsemble,
) -> Result<ResidualSeries> {
    if b.dimension() != 2 || w.dim() != 2 {
        return Err(Error::UnsupportedDimension(b.dimension().max(w.dim())));
    }
    check_series_len(series.len(), w)?;
    let grid: Grid2 = *series[0].grid();
    let pts = grid.points();
    let phis: Vec<(f64, [f64; 2], f64)> = pts.iter().map(|&p| phi.eval(p)).collect();
    let bs: Vec<[f64; 2]> = pts.iter().map(|&p| b.eval2(p)).collect();
    let integrate = |vals: Vec<f64>| GridFunction2::new(grid, vals, "i").map(|g| g.integrate());
    let terms = series
        .iter()
        .map(|u| {
            if u.grid() != &grid {
                return Err(Error::GridMismatch("snapshots live on different grids".into()));
            }
            let (ux, uy) = u.gradient();
            let (v, gx, gy) = (u.values(), ux.values(), uy.values());
            let n = v.len();
            Ok(StepTerms {
                a: integrate((0..n).map(|i| v[i] * phis[i].0).collect())?,
                // transport form enters with the opposite sign of the divergence form
                drift: -integrate((0..n).map(|i| (bs[i][0] * gx[i] + bs[i][1] * gy[i]) * phis[i].0).collect())?,
                mart: [
                    -integrate((0..n).map(|i| gx[i] * phis[i].0).collect())?,
                    -integrate((0..n).map(|i| gy[i] * phis[i].0).collect())?,
                ],
                lap: integrate((0..n).map(|i| v[i] * phis[i].2).collect())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(&terms, w, m, grid.x.h()))
}

/// Mean over paths of `sup_t |r(t)|` at each time-refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub dts: Vec<f64>,
    pub mean_sup: Vec<f64>,
}

impl RefinementStudy {
    /// `mean_sup[i] / mean_sup[i+1]`, coarse over fine.
    pub fn ratios(&self) -> Vec<f64> {
        self.mean_sup.windows(2).map(|p| p[0] / p[1]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["dt", "mean_sup_residual"]);
        for (d, r) in self.dts.iter().zip(&self.mean_sup) {
            csv.push_nums(&[*d, *r]);
        }
        csv.render()
    }
}

/// Continuity-equation residuals on coarsenings of one fine ensemble.
///
/// `factors` are coarsening factors, coarsest first. The flow starts from
/// the grid of `u0`; the residual integrals run over `out`, which only has
/// to cover the support of `phi`.
pub fn continuity_residual_refinement(
    b: &DriftField,
    u0: &GridFunction,
    phi: &TestFunction,
    fine: &BrownianEnsemble,
    factors: &[usize],
    out: &Grid1,
) -> Result<RefinementStudy> {
    let mut dts = Vec::new();
    let mut mean_sup = Vec::new();
    for &f in factors {
        let w = fine.coarsen(f)?;
        let sups = exec::map_indexed(w.paths(), |m| {
            let s = continuity_series(u0, b, &w, m, u0.grid(), out, Record::All)?;
            Ok(ito_residual_continuity(&s, b, phi, m, &w)?.sup())
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        dts.push(w.dt());
        mean_sup.push(pairwise_sum(&sups) / sups.len() as f64);
    }
    Ok(RefinementStudy { dts, mean_sup })
}

/// Planar transport residuals on coarsenings of one fine ensemble.
pub fn transport_residual_refinement(
    b: &DriftField,
    u0: &GridFunction2,
    phi: &TestFunction2,
    fine: &BrownianEnsemble,
    factors: &[usize],
) -> Result<RefinementStudy> {
    let mut dts = Vec::new();
    let mut mean_sup = Vec::new();
    for &f in factors {
        let w = fine.coarsen(f)?;
        let sups = (0..w.paths())
            .map(|m| {
                let s = transport_series_2d(u0, b, &w, m, u0.grid())?;
                Ok(ito_residual_transport(&s, b, phi, m, &w)?.sup())
            })
            .collect::<Result<Vec<f64>>>()?;
        dts.push(w.dt());
        mean_sup.push(pairwise_sum(&sups) / sups.len() as f64);
    }
    Ok(RefinementStudy { dts, mean_sup })
}

/// Both sides of `V_eps(t, X^eps_t(x)) = V_eps(0, x) + int_0^t R_eps(V, b)(s, X^eps_s) ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionCheck {
    pub starts: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub defect: Vec<f64>,
}

impl CompositionCheck {
    pub fn max_defect(&self) -> f64 {
        self.defect.iter().fold(0.0, |a, d| a.max(*d))
    }

    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["x", "lhs", "rhs", "defect"]);
        for i in 0..self.starts.len() {
            csv.push_nums(&[self.starts[i], self.lhs[i], self.rhs[i], self.defect[i]]);
        }
        csv.render()
    }
}

/// Checks the composition identity on path `m` up to `step`.
///
/// `V` is the primitive of the continuity solution with drift `b` and data
/// `u0` (on the grid of `u0`); `X^eps` uses the mollified drift.
pub fn composition_identity_check(
    u0: &GridFunction,
    b: &DriftField,
    kernel: MollifierKernel,
    m: usize,
    w: &BrownianEnsemble,
    step: usize,
    starts: &[f64],
) -> Result<CompositionCheck> {
    let grid = *u0.grid();
    let eps = kernel.eps();
    let (lo, hi) = (grid.x_min() + 2.0 * eps, grid.x_max() - 2.0 * eps);
    let b_eps = b.mollified(kernel, false)?;
    let b_grid = b.sample(grid)?;
    let record = Record::Steps((0..=step).collect());
    let pf = integrate_path(
        b,
        w,
        m,
        &grid.points(),
        Some(grid),
        &FlowConfig {
            record: record.clone(),
            jacobian: true,
            guard_box: None,
        },
    )?;
    let chars = integrate_path(
        &b_eps,
        w,
        m,
        starts,
        None,
        &FlowConfig {
            record,
            jacobian: false,
            guard_box: None,
        },
    )?;
    let mut rhs = vec![0.0; starts.len()];
    let mut lhs = vec![0.0; starts.len()];
    for n in 0..=step {
        let xs = chars.positions(n)?;
        if let Some(i) = xs.iter().position(|x| !(*x >= lo && *x <= hi)) {
            return Err(Error::Window {
                point: starts[i],
                step: n,
                lo,
                hi,
            });
        }
        let u = continuity_solution(u0, &pf, n)?.field;
        let v = primitive(&u);
        let v_eps = mollify(&v, &kernel)?;
        if n == 0 {
            for (r, x) in rhs.iter_mut().zip(xs) {
                *r += v_eps.interpolate(*x).0;
            }
        }
        if n == step {
            for (l, x) in lhs.iter_mut().zip(xs) {
                *l = v_eps.interpolate(*x).0;
            }
        } else {
            let r_eps = commutator_primitive(&b_grid, &v, &kernel)?;
            for (r, x) in rhs.iter_mut().zip(xs) {
                *r += r_eps.interpolate(*x).0 * w.dt();
            }
        }
    }
    let defect = lhs.iter().zip(&rhs).map(|(l, r)| (l - r).abs()).collect();
    Ok(CompositionCheck {
        starts: starts.to_vec(),
        lhs,
        rhs,
        defect,
    })
}

/// Coupled mollifications driven by the same noise.
#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub eps: Vec<f64>,
    pub times: Vec<f64>,
    /// `[i][k]`: path mean of `||u^{eps_i}(t_k) - u^{eps_{i+1}}(t_k)||^2_{L^2(mu)}`.
    pub distances: Vec<Vec<f64>>,
    /// Largest ratio of successive distances over all recorded times.
    pub trend: f64,
    /// Paths dropped because some trajectory left the guard box.
    pub tainted: usize,
}

impl UniquenessReport {
    pub fn final_distances(&self) -> Vec<f64> {
        self.distances.iter().map(|d| *d.last().unwrap_or(&0.0)).collect()
    }

    /// Distances at the horizon strictly decrease along the sweep, or all vanish.
    pub fn decreasing_at_horizon(&self) -> bool {
        let d = self.final_distances();
        d.iter().all(|v| *v == 0.0) || d.windows(2).all(|p| p[1] < p[0])
    }

    pub fn to_csv(&self) -> String {
        let mut header = vec!["t".to_string()];
        for p in self.eps.windows(2) {
            header.push(format!("d_{}_{}", p[0], p[1]));
        }
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut csv = Csv::new(&refs);
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![*t];
            row.extend(self.distances.iter().map(|d| d[k]));
            csv.push_nums(&row);
        }
        csv.render()
    }
}

/// Solves the continuity equation for every `eps` in `eps_list` (mollified
/// drift with cutoff, mollified data) on shared noise and measures the
/// `mu`-weighted distance between successive widths.
///
/// `u0` must resolve the smallest width; flows start from `flow_grid`, which
/// should cover the support of the mollified data.
pub fn uniqueness_experiment(
    b: &DriftField,
    u0: &GridFunction,
    eps_list: &[f64],
    w: &BrownianEnsemble,
    flow_grid: &Grid1,
    record: Record,
) -> Result<UniquenessReport> {
    if eps_list.len() < 2 || eps_list.windows(2).any(|p| !(p[1] < p[0])) {
        return Err(Error::Range {
            name: "eps",
            value: eps_list.first().copied().unwrap_or(f64::NAN),
            reason: "need at least two strictly decreasing widths",
        });
    }
    let out = *u0.grid();
    let setups = eps_list
        .iter()
        .map(|&eps| {
            let k = MollifierKernel::new(eps)?;
            Ok((b.mollified(k, true)?, mollify(u0, &k)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = FlowConfig {
        record,
        jacobian: true,
        guard_box: None,
    };
    let points = flow_grid.points();
    let per_path = exec::map_indexed(w.paths(), |m| -> Result<Option<(Vec<usize>, Vec<Vec<f64>>)>> {
        let mut snaps: Vec<Vec<GridFunction>> = Vec::with_capacity(setups.len());
        let mut steps = Vec::new();
        for (b_eps, u0_eps) in &setups {
            let pf = match integrate_path(b_eps, w, m, &points, Some(*flow_grid), &cfg) {
                Ok(pf) => pf,
                Err(Error::BlowUp { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            steps = pf.recorded_steps().to_vec();
            snaps.push(
                steps
                    .iter()
                    .map(|&n| Ok(continuity_solution_on(u0_eps, &pf, n, &out)?.field))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let d = snaps
            .windows(2)
            .map(|pair| {
                pair[0]
                    .iter()
                    .zip(&pair[1])
                    .map(|(a, c)| Ok(weighted_norm_sq(&a.zip_with(c, |x, y| x - y)?, &WeightSpec::mu()).value))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Some((steps, d)))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let tainted = per_path.iter().filter(|p| p.is_none()).count();
    let good: Vec<&(Vec<usize>, Vec<Vec<f64>>)> = per_path.iter().flatten().collect();
    let steps = good.first().map(|g| g.0.clone()).unwrap_or_default();
    let npairs = eps_list.len() - 1;
    let distances: Vec<Vec<f64>> = (0..npairs)
        .map(|i| {
            (0..steps.len())
                .map(|k| {
                    let v: Vec<f64> = good.iter().map(|g| g.1[i][k]).collect();
                    if v.is_empty() {
                        f64::NAN
                    } else {
                        pairwise_sum(&v) / v.len() as f64
                    }
                })
                .collect()
        })
        .collect();
    let mut trend: f64 = 0.0;
    for p in distances.windows(2) {
        for k in 0..steps.len() {
            let (a, c) = (p[0][k], p[1][k]);
            let r = if a == 0.0 && c == 0.0 { 0.0 } else { c / a };
            trend = trend.max(r);
        }
    }
    Ok(UniquenessReport {
        eps: eps_list.to_vec(),
        times: steps.iter().map(|&n| w.time(n)).collect(),
        distances,
        trend,
        tainted,
    })
}
