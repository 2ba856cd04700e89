//! Explicit constants of the inverse-Jacobian moment bound and Monte Carlo
//! estimates of the flow's moments.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec::{self, pairwise_sum};
use crate::field::{mollify, DriftField, MollifierKernel};
use crate::flow::{integrate_path, FlowConfig, Record};
use crate::grid::GridFunction;
use crate::paths::BrownianEnsemble;
use crate::quad;
pub use crate::quad::Adaptive;
use crate::report::{fmt_num, Csv};
use crate::solution::{continuity_solution, weighted_norm_sq, WeightSpec};

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.576;

/// Constants of `E[J_t(x)^-2] <= k1 t^{-3/8} exp(k2 x^2)`.
///
/// `c1`, `c2`, `k1`, `k2` are `None` when the Gaussian integrals diverge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub k: f64,
    pub horizon: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    /// `16 k T < 1`
    pub c1_converges: bool,
    /// `1584 T^2 k^2 < 1`
    pub c2_converges: bool,
}

impl BoundConstants {
    pub fn converges(&self) -> bool {
        self.c1_converges && self.c2_converges
    }

    /// `k1 t^{-3/8} exp(k2 x^2)`, or `None` when divergent.
    pub fn bound(&self, x: f64, t: f64) -> Option<f64> {
        Some(self.k1? * t.powf(-0.375) * (self.k2? * x * x).exp())
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "divergent".to_string(), fmt_num);
        let mut csv = Csv::new(&["k", "T", "c1", "c2", "k1", "k2", "guards"]);
        csv.push(vec![
            fmt_num(self.k),
            fmt_num(self.horizon),
            opt(self.c1),
            opt(self.c2),
            opt(self.k1),
            opt(self.k2),
            if self.converges() { "pass" } else { "fail" }.to_string(),
        ]);
        csv.render()
    }
}

/// Quadrature controls, exposed for refinement studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    /// Truncation stops once the analytic tail bound is below this fraction
    /// of the integral over `[-Z, Z]`.
    pub tail_tol: f64,
    /// Multiplies the chosen `Z`.
    pub z_scale: f64,
    pub adaptive: Adaptive,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            tail_tol: 1e-15,
            z_scale: 1.0,
            adaptive: Adaptive::default(),
        }
    }
}

pub fn compute_constants(k: f64, horizon: f64) -> BoundConstants {
    compute_constants_with(k, horizon, QuadSettings::default())
}

/// Integrates the even integrand `f` over the real line given a bound
/// `tail(Z) >= int_Z^inf f`.
fn even_integral(f: impl Fn(f64) -> f64, tail: impl Fn(f64) -> f64, z0: f64, s: &QuadSettings) -> f64 {
    let mut z = z0.max(1.0);
    loop {
        let (half, _) = quad::integrate(&f, 0.0, z, s.adaptive);
        if tail(z) < s.tail_tol * half || z > 1e6 {
            break;
        }
        z *= 1.5;
    }
    let (half, _) = quad::integrate(&f, 0.0, z * s.z_scale, s.adaptive);
    2.0 * half
}

pub fn compute_constants_with(k: f64, horizon: f64, s: QuadSettings) -> BoundConstants {
    let t = horizon;
    let c1_converges = 16.0 * k * t < 1.0;
    let c2_converges = 1584.0 * t * t * k * k < 1.0;
    let norm = 1.0 / (2.0 * PI).sqrt();

    let c1 = c1_converges.then(|| {
        // exp(8k(z + z^2) - z^2/(2T)) = exp(-a (z - z0)^2 + 16 k^2 / a) for z >= 0
        let a = 0.5 / t - 8.0 * k;
        let zc = 4.0 * k / a;
        let peak = 16.0 * k * k / a;
        let f = move |z: f64| (8.0 * k * (z + z * z) - z * z / (2.0 * t)).exp();
        let tail = move |z: f64| {
            let d = z - zc;
            if d <= 0.0 {
                f64::INFINITY
            } else {
                (peak - a * d * d).exp() / (2.0 * a * d)
            }
        };
        norm * even_integral(f, tail, zc + 1.0 / a.sqrt(), &s)
    });
    let c2 = c2_converges.then(|| {
        let a = 0.5 / t - 792.0 * t * k * k;
        let f = move |z: f64| (-a * z * z).exp();
        let tail = move |z: f64| (-a * z * z).exp() / (2.0 * a * z);
        4.0 * norm * even_integral(f, tail, 1.0 / a.sqrt(), &s)
    });
    let both = c1.zip(c2);
    BoundConstants {
        k,
        horizon,
        c1,
        c2,
        k1: both.map(|(c1, c2)| c1.sqrt() * c2.powf(0.25) * (99.0 * t * k * k).exp()),
        k2: both.map(|_| 2.0 * (k + 99.0 * t * k * k)),
        c1_converges,
        c2_converges,
    }
}

/// Sample mean with a 99% normal confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub point: f64,
    pub time: f64,
    /// Finite samples used.
    pub samples: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Paths whose sample was non-finite or whose trajectory blew up.
    pub tainted: usize,
}

impl MomentEstimate {
    pub fn from_samples(point: f64, time: f64, samples: &[Option<f64>]) -> Self {
        let good: Vec<f64> = samples.iter().flatten().copied().filter(|v| v.is_finite()).collect();
        let n = good.len();
        let mean = if n > 0 { pairwise_sum(&good) / n as f64 } else { f64::NAN };
        let stderr = if n > 1 {
            let sq: Vec<f64> = good.iter().map(|v| (v - mean) * (v - mean)).collect();
            (pairwise_sum(&sq) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            point,
            time,
            samples: n,
            estimate: mean,
            stderr,
            ci_lo: mean - Z99 * stderr,
            ci_hi: mean + Z99 * stderr,
            tainted: samples.len() - n,
        }
    }

    pub fn is_tainted(&self) -> bool {
        self.tainted > 0
    }
}

/// Per-path `(X_t(x_i), log J_t(x_i))` at one step, `None` on blow-up.
fn path_states(
    b: &DriftField,
    w: &BrownianEnsemble,
    points: &[f64],
    step: usize,
    jacobian: bool,
) -> Result<Vec<Option<(Vec<f64>, Vec<f64>)>>> {
    let cfg = FlowConfig {
        record: Record::Steps(vec![step]),
        jacobian,
        guard_box: None,
    };
    exec::map_indexed(w.paths(), |m| match integrate_path(b, w, m, points, None, &cfg) {
        Ok(pf) => {
            let x = pf.positions(step)?.to_vec();
            let lj = if jacobian { pf.log_jacobians(step)?.to_vec() } else { Vec::new() };
            Ok(Some((x, lj)))
        }
        Err(Error::BlowUp { .. }) => Ok(None),
        Err(e) => Err(e),
    })
    .into_iter()
    .collect()
}

fn moments_at(
    b: &DriftField,
    w: &BrownianEnsemble,
    points: &[f64],
    t: f64,
    jacobian: bool,
    sample: impl Fn(f64, f64) -> f64,
) -> Result<Vec<MomentEstimate>> {
    let step = w.step_of(t)?;
    let states = path_states(b, w, points, step, jacobian)?;
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let s: Vec<Option<f64>> = states
                .iter()
                .map(|st| st.as_ref().map(|(xs, lj)| sample(xs[i], lj.get(i).copied().unwrap_or(0.0))))
                .collect();
            MomentEstimate::from_samples(x, t, &s)
        })
        .collect())
}

/// `E[J_t(x)^-2]` over the ensemble.
pub fn mc_inverse_jacobian_moment(b: &DriftField, x: f64, t: f64, w: &BrownianEnsemble) -> Result<MomentEstimate> {
    Ok(moments_at(b, w, &[x], t, true, |_, lj| (-2.0 * lj).exp())?[0])
}

/// `E[J_t(x)^p]` over the ensemble.
pub fn mc_jacobian_moment_p(b: &DriftField, x: f64, t: f64, p: f64, w: &BrownianEnsemble) -> Result<MomentEstimate> {
    if !(p >= 1.0) {
        return Err(Error::Range {
            name: "p",
            value: p,
            reason: "moment order must be at least 1",
        });
    }
    Ok(moments_at(b, w, &[x], t, true, |_, lj| (p * lj).exp())?[0])
}

/// `E[|X_t(x)|^4]` over the ensemble.
pub fn mc_flow_fourth_moment(b: &DriftField, x: f64, t: f64, w: &BrownianEnsemble) -> Result<MomentEstimate> {
    Ok(moments_at(b, w, &[x], t, false, |y, _| y.powi(4))?[0])
}

/// `max_i estimate_i / (|x_i|^4 + T^4)`.
pub fn fit_fourth_moment_constant(estimates: &[MomentEstimate], horizon: f64) -> f64 {
    estimates
        .iter()
        .map(|e| e.estimate / (e.point.powi(4) + horizon.powi(4)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `E[(x + B_t)^4]` for standard Brownian motion.
pub fn gaussian_fourth_moment(x: f64, t: f64) -> f64 {
    x.powi(4) + 6.0 * x * x * t + 3.0 * t * t
}

/// Outcome of comparing a moment's upper confidence edge with the bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundComparison {
    pub estimate: MomentEstimate,
    pub bound: Option<f64>,
    pub pass: bool,
}

pub fn compare_with_bound(estimate: MomentEstimate, constants: &BoundConstants) -> BoundComparison {
    let bound = constants.bound(estimate.point, estimate.time);
    BoundComparison {
        estimate,
        bound,
        pass: !estimate.is_tainted() && bound.is_some_and(|b| estimate.ci_hi <= b),
    }
}

/// `x,t,estimate,stderr,bound,pass` rows.
pub fn comparisons_csv(rows: &[BoundComparison]) -> String {
    let mut csv = Csv::new(&["x", "t", "estimate", "stderr", "bound", "pass"]);
    for r in rows {
        csv.push(vec![
            fmt_num(r.estimate.point),
            fmt_num(r.estimate.time),
            fmt_num(r.estimate.estimate),
            fmt_num(r.estimate.stderr),
            r.bound.map_or_else(|| "divergent".to_string(), fmt_num),
            r.pass.to_string(),
        ]);
    }
    csv.render()
}

/// Affine least-squares fit of `log E[J^p]` against `x^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFit {
    pub estimates: Vec<MomentEstimate>,
    pub intercept: f64,
    pub slope: f64,
    pub max_residual: f64,
}

pub const SHAPE_PROBES: [f64; 4] = [0.0, 0.5, 1.0, 1.5];

pub fn jacobian_shape_fit(b: &DriftField, t: f64, p: f64, w: &BrownianEnsemble) -> Result<ShapeFit> {
    if !(p >= 1.0) {
        return Err(Error::Range {
            name: "p",
            value: p,
            reason: "moment order must be at least 1",
        });
    }
    let estimates = moments_at(b, w, &SHAPE_PROBES, t, true, |_, lj| (p * lj).exp())?;
    let xs: Vec<f64> = SHAPE_PROBES.iter().map(|x| x * x).collect();
    let ys: Vec<f64> = estimates.iter().map(|e| e.estimate.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(ShapeFit {
        estimates,
        intercept,
        slope,
        max_residual,
    })
}

/// Result of the weighted a-priori estimate for one mollification width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriCheck {
    pub eps: f64,
    /// Path average of `int_0^T ||u^eps(t)||^2_{L^2(mu)} dt`.
    pub lhs: f64,
    /// `||u0||^2_{L^2(w)}`.
    pub rhs_scale: f64,
    pub ratio: f64,
    pub tainted: usize,
}

/// Trapezoid rule on a non-uniform set of nodes.
fn trapezoid_nonuniform(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2)
        .zip(v.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Compares the time-integrated `mu`-weighted energy of the mollified
/// continuity solution with `||u0||^2` in the `w`-weighted norm.
///
/// `time_stride` selects which steps enter the time trapezoid.
pub fn weighted_apriori_check(
    u0: &GridFunction,
    b: &DriftField,
    kernel: MollifierKernel,
    w: &BrownianEnsemble,
    constants: &BoundConstants,
    time_stride: usize,
) -> Result<AprioriCheck> {
    let weight = WeightSpec::w(constants)?;
    let rhs_scale = weighted_norm_sq(u0, &weight).value;
    let b_eps = b.mollified(kernel, true)?;
    let u0_eps = mollify(u0, &kernel)?;
    let grid = *u0.grid();
    let cfg = FlowConfig {
        record: Record::Every(time_stride),
        jacobian: true,
        guard_box: None,
    };
    let per_path = exec::map_indexed(w.paths(), |m| -> Result<Option<f64>> {
        let pf = match integrate_path(&b_eps, w, m, &grid.points(), Some(grid), &cfg) {
            Ok(pf) => pf,
            Err(Error::BlowUp { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for &n in pf.recorded_steps() {
            let u = continuity_solution(&u0_eps, &pf, n)?.field;
            ts.push(w.time(n));
            vs.push(weighted_norm_sq(&u, &WeightSpec::mu()).value);
        }
        Ok(Some(trapezoid_nonuniform(&ts, &vs)))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let est = MomentEstimate::from_samples(0.0, w.horizon(), &per_path);
    let lhs = est.estimate;
    Ok(AprioriCheck {
        eps: kernel.eps(),
        lhs,
        rhs_scale,
        ratio: if rhs_scale > 0.0 { lhs / rhs_scale } else { 0.0 },
        tainted: est.tainted,
    })
}

/// Sweep of [`weighted_apriori_check`] over mollification widths.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriSweep {
    pub checks: Vec<AprioriCheck>,
    /// `max ratio / min ratio - 1`.
    pub variation: f64,
    /// Every ratio finite and the variation within 10%.
    pub stable: bool,
}

pub fn weighted_apriori_sweep(
    u0: &GridFunction,
    b: &DriftField,
    eps_list: &[f64],
    w: &BrownianEnsemble,
    constants: &BoundConstants,
    time_stride: usize,
) -> Result<AprioriSweep> {
    let checks = eps_list
        .iter()
        .map(|&eps| {
            MollifierKernel::new(eps)
                .and_then(|k| weighted_apriori_check(u0, b, k, w, constants, time_stride))
                .map_err(|e| Error::Sweep { eps, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = checks.iter().map(|c| c.ratio).collect();
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let variation = if min > 0.0 { max / min - 1.0 } else if max == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(AprioriSweep {
        stable: ratios.iter().all(|r| r.is_finite()) && variation <= 0.1,
        checks,
        variation,
    })
}

pub fn apriori_csv(checks: &[AprioriCheck]) -> String {
    let mut csv = Csv::new(&["epsilon", "lhs", "rhs_scale", "ratio"]);
    for c in checks {
        csv.push_nums(&[c.eps, c.lhs, c.rhs_scale, c.ratio]);
    }
    csv.render()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1;
    use crate::paths::sample_brownian;
    use crate::solution::InitialCondition;

    #[test]
    fn constants_at_zero_growth() {
        let c = compute_constants(0.0, 1.0);
        assert!(c.converges());
        assert!((c.c1.unwrap() - 1.0).abs() < 1e-12);
        assert!((c.c2.unwrap() - 4.0).abs() < 1e-12);
        assert!((c.k1.unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(c.k2, Some(0.0));
    }

    #[test]
    fn constants_small_growth() {
        let c = compute_constants(0.01, 1.0);
        assert!(c.c1_converges && c.c2_converges);
        let a2: f64 = 0.5 - 792.0 * 1e-4;
        assert!((c.c2.unwrap() - 4.0 / (2.0 * a2).sqrt()).abs() < 1e-12);
        assert!((c.k2.unwrap() - 0.0398).abs() < 1e-15);
        // independent oracle for c1: erfc closed form of the completed square
        let (k, t) = (0.01f64, 1.0f64);
        let a = 0.5 / t - 8.0 * k;
        let zc = 4.0 * k / a;
        let erfc = |x: f64| statrs::function::erf::erfc(x);
        let half = (16.0 * k * k / a).exp() * 0.5 * (PI / a).sqrt() * erfc(-zc * a.sqrt());
        assert!((c.c1.unwrap() - 2.0 * half / (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constants_divergent_state() {
        let c = compute_constants(1.0, 1.0);
        assert!(!c.c1_converges && !c.c2_converges);
        assert_eq!((c.c1, c.c2, c.k1, c.k2), (None, None, None, None));
        assert!(c.bound(0.0, 1.0).is_none());
        assert!(c.to_csv().contains("divergent"));
    }

    #[test]
    fn constants_stable_under_refinement() {
        let base = compute_constants(0.01, 1.0);
        let wide = compute_constants_with(0.01, 1.0, QuadSettings { z_scale: 2.0, ..Default::default() });
        let fine = compute_constants_with(
            0.01,
            1.0,
            QuadSettings {
                adaptive: Adaptive {
                    initial_panels: 16,
                    ..Adaptive::default()
                },
                ..Default::default()
            },
        );
        for other in [wide, fine] {
            for (a, b) in [(base.c1, other.c1), (base.c2, other.c2)] {
                let (a, b) = (a.unwrap(), b.unwrap());
                assert!(((a - b) / a).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constants_monotone_in_growth() {
        let cs: Vec<_> = [0.0, 0.005, 0.01].iter().map(|&k| compute_constants(k, 1.0)).collect();
        for p in cs.windows(2) {
            assert!(p[1].c1 >= p[0].c1 && p[1].c2 >= p[0].c2);
            assert!(p[1].k1 >= p[0].k1 && p[1].k2 >= p[0].k2);
            assert!(p[1].k2.unwrap() >= 2.0 * p[1].k);
        }
    }

    #[test]
    fn zero_drift_moments_are_trivial() {
        let w = sample_brownian(200, 20, 1.0, 1, 1).unwrap();
        let c = compute_constants(0.0, 1.0);
        for t in [0.25, 1.0] {
            let e = mc_inverse_jacobian_moment(&DriftField::zero(), 0.3, t, &w).unwrap();
            assert_eq!(e.estimate, 1.0);
            assert_eq!(e.stderr, 0.0);
            assert!(compare_with_bound(e, &c).pass);
            let p = mc_jacobian_moment_p(&DriftField::zero(), 0.3, t, 3.0, &w).unwrap();
            assert_eq!(p.estimate, 1.0);
        }
    }

    #[test]
    fn ou_jacobian_is_deterministic() {
        let w = sample_brownian(50, 200, 0.02, 2, 1).unwrap();
        let e = mc_inverse_jacobian_moment(&DriftField::ou(), 0.7, 0.02, &w).unwrap();
        // EM gives J = (1 - dt)^N; compare to the continuum value e^{2t}
        assert!((e.estimate - (0.04f64).exp()).abs() < 1e-5);
        assert!(e.stderr < 1e-12);
        let p = mc_jacobian_moment_p(&DriftField::ou(), 0.7, 0.02, 2.0, &w).unwrap();
        assert!((p.estimate - (-0.04f64).exp()).abs() < 1e-5);
        assert!(mc_jacobian_moment_p(&DriftField::ou(), 0.0, 0.02, 0.5, &w).is_err());
    }

    #[test]
    fn small_tanh_respects_bound() {
        let w = sample_brownian(2000, 100, 1.0, 5, 1).unwrap();
        let c = compute_constants(0.01, 1.0);
        let e = mc_inverse_jacobian_moment(&DriftField::tanh(0.01), 0.0, 0.25, &w).unwrap();
        assert!(compare_with_bound(e, &c).pass);
        let p = mc_jacobian_moment_p(&DriftField::tanh(0.01), 0.0, 1.0, 4.0, &w).unwrap();
        assert!(p.stderr / p.estimate < 0.05);
    }

    #[test]
    fn fourth_moment_matches_gaussian_formula() {
        let w = sample_brownian(4000, 10, 1.0, 9, 1).unwrap();
        for x in [0.0, 1.0, 2.0] {
            let e = mc_flow_fourth_moment(&DriftField::zero(), x, 1.0, &w).unwrap();
            let exact = gaussian_fourth_moment(x, 1.0);
            assert!(e.ci_lo <= exact && exact <= e.ci_hi, "{x}: {e:?} vs {exact}");
        }
        let e = mc_flow_fourth_moment(&DriftField::linear(-1.0), 2.0, 0.0, &w).unwrap();
        assert_eq!(e.estimate, 16.0);
    }

    #[test]
    fn fitted_constant_is_worst_ratio() {
        let mk = |x: f64, v: f64| MomentEstimate::from_samples(x, 1.0, &[Some(v)]);
        let c = fit_fourth_moment_constant(&[mk(0.0, 3.0), mk(1.0, 10.0), mk(10.0, 10603.0)], 1.0);
        assert_eq!(c, 5.0);
    }

    #[test]
    fn tainted_samples_are_counted() {
        let e = MomentEstimate::from_samples(0.0, 1.0, &[Some(1.0), None, Some(f64::INFINITY), Some(3.0)]);
        assert_eq!(e.tainted, 2);
        assert_eq!(e.estimate, 2.0);
        assert!((e.ci_hi - e.estimate - Z99 * e.stderr).abs() < 1e-15);
    }

    #[test]
    fn shape_fit_is_flat_for_zero_drift() {
        let w = sample_brownian(10, 10, 1.0, 1, 1).unwrap();
        let f = jacobian_shape_fit(&DriftField::zero(), 1.0, 2.0, &w).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.max_residual, 0.0);
    }

    #[test]
    fn apriori_zero_data_and_guard() {
        let g = Grid1::with_spacing(-4.0, 4.0, 1.0 / 32.0).unwrap();
        let w = sample_brownian(4, 10, 1.0, 1, 1).unwrap();
        let k = MollifierKernel::new(0.25).unwrap();
        let zero = GridFunction::zeros(g, "u0");
        let r = weighted_apriori_check(&zero, &DriftField::tanh(0.01), k, &w, &compute_constants(0.01, 1.0), 1).unwrap();
        assert_eq!((r.lhs, r.ratio), (0.0, 0.0));
        assert!(matches!(
            weighted_apriori_check(&zero, &DriftField::tanh(0.01), k, &w, &compute_constants(1.0, 1.0), 1),
            Err(Error::DivergentWeight { .. })
        ));
    }

    #[test]
    fn apriori_ratio_is_stable_in_eps() {
        let g = Grid1::with_spacing(-5.0, 5.0, 1.0 / 128.0).unwrap();
        let w = sample_brownian(16, 20, 1.0, 3, 1).unwrap();
        let u0 = InitialCondition::Bump { center: 0.0, width: 1.0 }.sample(g).unwrap();
        let s = weighted_apriori_sweep(&u0, &DriftField::tanh(0.01), &[0.2, 0.1, 0.05], &w, &compute_constants(0.01, 1.0), 2)
            .unwrap();
        assert!(s.stable, "{s:?}");
        assert!(s.checks.iter().all(|c| c.ratio > 0.0 && c.ratio.is_finite()));
    }
}
