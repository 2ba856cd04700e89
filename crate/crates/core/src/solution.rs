//! Representation-formula solutions built from flows, plus primitives,
//! weights, norms and test functions.

use crate::bounds::BoundConstants;
use crate::error::{Error, Result};
use crate::exec;
use crate::field::{CutoffSpec, DriftField};
use crate::flow::{self, inverse_flow, FlowConfig, PathFlow, Record};
use crate::paths::BrownianEnsemble;

pub use crate::grid::{Grid1, Grid2, GridFunction, GridFunction2};

/// A solution snapshot and the number of grid points whose preimage fell
/// outside the range covered by the flow (those use edge continuation).
#[derive(Debug, Clone, PartialEq)]
pub struct Represented {
    pub field: GridFunction,
    pub out_of_range: usize,
}

/// `u(t, x) = u0(psi_t(x))` on the flow's own grid.
pub fn transport_solution(u0: &GridFunction, flow: &PathFlow, step: usize) -> Result<Represented> {
    let out = *flow
        .grid()
        .ok_or_else(|| Error::GridMismatch("flow was not started from a grid".into()))?;
    transport_solution_on(u0, flow, step, &out)
}

/// As [`transport_solution`], evaluated on an arbitrary output grid.
pub fn transport_solution_on(u0: &GridFunction, flow: &PathFlow, step: usize, out: &Grid1) -> Result<Represented> {
    let inv = inverse_flow(flow, step)?;
    let mut clamped = 0;
    let values = inv
        .eval_sorted(&out.points())
        .into_iter()
        .map(|p| {
            let (v, c) = u0.interpolate(p.psi);
            if p.out_of_range || c {
                clamped += 1;
            }
            v
        })
        .collect();
    Ok(Represented {
        field: GridFunction::new(*out, values, "u")?,
        out_of_range: clamped,
    })
}

/// `u(t, x) = u0(psi_t(x)) / J_t(psi_t(x))`, with `J` interpolated linearly
/// in the initial point.
pub fn continuity_solution(u0: &GridFunction, flow: &PathFlow, step: usize) -> Result<Represented> {
    let out = *flow
        .grid()
        .ok_or_else(|| Error::GridMismatch("flow was not started from a grid".into()))?;
    continuity_solution_on(u0, flow, step, &out)
}

pub fn continuity_solution_on(u0: &GridFunction, flow: &PathFlow, step: usize, out: &Grid1) -> Result<Represented> {
    let inv = inverse_flow(flow, step)?;
    let lj = flow.log_jacobians(step)?;
    let mut clamped = 0;
    let mut values = Vec::with_capacity(out.len());
    for p in inv.eval_sorted(&out.points()) {
        let i = p.cell;
        let jac = (1.0 - p.frac) * lj[i].exp() + p.frac * lj[i + 1].exp();
        if !(jac >= 1e-12) {
            return Err(Error::Conditioning { point: p.psi, value: jac });
        }
        let (v, c) = u0.interpolate(p.psi);
        if p.out_of_range || c {
            clamped += 1;
        }
        values.push(v / jac);
    }
    Ok(Represented {
        field: GridFunction::new(*out, values, "u")?,
        out_of_range: clamped,
    })
}

/// Continuity-equation snapshots of path `m` at every recorded step.
///
/// The flow is started only from `flow_grid` (which should cover the support
/// of `u0` with some margin); output lives on `out`.
pub fn continuity_series(
    u0: &GridFunction,
    b: &DriftField,
    w: &BrownianEnsemble,
    m: usize,
    flow_grid: &Grid1,
    out: &Grid1,
    record: Record,
) -> Result<Vec<(usize, GridFunction)>> {
    let cfg = FlowConfig {
        record,
        jacobian: true,
        guard_box: None,
    };
    let pf = flow::integrate_path(b, w, m, &flow_grid.points(), Some(*flow_grid), &cfg)?;
    pf.recorded_steps()
        .iter()
        .map(|&n| Ok((n, continuity_solution_on(u0, &pf, n, out)?.field)))
        .collect()
}

/// Transport-equation snapshots of path `m` at every recorded step.
pub fn transport_series(
    u0: &GridFunction,
    b: &DriftField,
    w: &BrownianEnsemble,
    m: usize,
    flow_grid: &Grid1,
    out: &Grid1,
    record: Record,
) -> Result<Vec<(usize, GridFunction)>> {
    let cfg = FlowConfig {
        record,
        jacobian: false,
        guard_box: None,
    };
    let pf = flow::integrate_path(b, w, m, &flow_grid.points(), Some(*flow_grid), &cfg)?;
    pf.recorded_steps()
        .iter()
        .map(|&n| Ok((n, transport_solution_on(u0, &pf, n, out)?.field)))
        .collect()
}

/// 2-D transport solution `u(t, y) = u0(psi_t(y))` on `out`, with `psi_t`
/// from step-wise inversion of the Euler–Maruyama map.
pub fn transport_solution_2d(
    u0: &GridFunction2,
    b: &DriftField,
    w: &BrownianEnsemble,
    m: usize,
    step: usize,
    out: &Grid2,
) -> Result<(GridFunction2, usize)> {
    let vals = exec::map_indexed(out.len(), |i| {
        let psi = flow::inverse_map_2d(b, w, m, step, out.point(i))?;
        Ok(u0.interpolate(psi))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let clamped = vals.iter().filter(|v| v.1).count();
    let field = GridFunction2::new(*out, vals.into_iter().map(|v| v.0).collect(), "u")?;
    Ok((field, clamped))
}

/// 2-D transport snapshots of path `m` at every step `0..=N`.
pub fn transport_series_2d(
    u0: &GridFunction2,
    b: &DriftField,
    w: &BrownianEnsemble,
    m: usize,
    out: &Grid2,
) -> Result<Vec<GridFunction2>> {
    (0..=w.steps())
        .map(|n| transport_solution_2d(u0, b, w, m, n, out).map(|r| r.0))
        .collect()
}

/// `V(x_j) = int_{x_min}^{x_j} u`, cumulative trapezoid.
pub fn primitive(u: &GridFunction) -> GridFunction {
    let h = u.grid().h();
    let v = u.values();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(v.len());
    out.push(0.0);
    for w in v.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    GridFunction::from_parts(*u.grid(), out, "V")
}

/// Trapezoid integral of `u`.
pub fn mass(u: &GridFunction) -> f64 {
    u.integrate()
}

/// Spatial weights `mu = (1 + |x|)^2` and `w = exp(2 k2 x^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSpec {
    Mu,
    W { k2: f64 },
}

impl WeightSpec {
    pub fn mu() -> Self {
        WeightSpec::Mu
    }

    /// `w` with `k2` from the bound constants; fails when they diverge.
    pub fn w(constants: &BoundConstants) -> Result<Self> {
        match constants.k2 {
            Some(k2) => Ok(WeightSpec::W { k2 }),
            None => Err(Error::DivergentWeight {
                k: constants.k,
                horizon: constants.horizon,
            }),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            WeightSpec::Mu => (1.0 + x.abs()).powi(2),
            WeightSpec::W { k2 } => (2.0 * k2 * x * x).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedNorm {
    pub value: f64,
    /// `u^2 w` at a grid end exceeds 1e-8 of its maximum.
    pub truncated: bool,
}

/// Trapezoid integral of `u^2 * weight`.
pub fn weighted_norm_sq(u: &GridFunction, w: &WeightSpec) -> WeightedNorm {
    let g = u.grid();
    let dens: Vec<f64> = u
        .values()
        .iter()
        .enumerate()
        .map(|(j, v)| v * v * w.eval(g.x(j)))
        .collect();
    let max = dens.iter().fold(0.0f64, |a, b| a.max(*b));
    let tail = dens[0].max(dens[dens.len() - 1]);
    WeightedNorm {
        value: crate::grid::trapezoid(&dens, g.h()),
        truncated: max > 0.0 && tail > 1e-8 * max,
    }
}

/// Named initial conditions: `gauss(c,s)` (normalised density), `bump(c,s)`
/// (normalised `(1-r^2)^4` bump of half-width `s`) and `step_smoothed(c,s)`
/// (indicator of `[c-s, c+s]` with edges smoothed over `s/10`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    Gauss { center: f64, width: f64 },
    Bump { center: f64, width: f64 },
    StepSmoothed { center: f64, width: f64 },
    Zero,
}

impl InitialCondition {
    pub fn parse(spec: &str) -> Result<Self> {
        let s = spec.trim();
        let bad = || Error::Config {
            field: "initial".into(),
            reason: format!("unknown or malformed initial condition `{s}`"),
        };
        if s == "zero" {
            return Ok(Self::Zero);
        }
        let open = s.find('(').ok_or_else(bad)?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let args: Vec<f64> = inner
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let [center, width] = args[..] else {
            return Err(bad());
        };
        if !(width > 0.0) {
            return Err(Error::Config {
                field: "initial".into(),
                reason: "width must be positive".into(),
            });
        }
        match &s[..open] {
            "gauss" => Ok(Self::Gauss { center, width }),
            "bump" => Ok(Self::Bump { center, width }),
            "step_smoothed" => Ok(Self::StepSmoothed { center, width }),
            _ => Err(bad()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Gauss { center, width } => {
                let z = (x - center) / width;
                (-0.5 * z * z).exp() / (width * (2.0 * std::f64::consts::PI).sqrt())
            }
            Self::Bump { center, width } => {
                crate::field::MollifierKernel::unit((x - center) / width) / width
            }
            Self::StepSmoothed { center, width } => {
                let d = width / 10.0;
                let r = (x - center).abs();
                // quintic smoothstep from 1 at r = width - d to 0 at r = width + d
                let s = ((r - (width - d)) / (2.0 * d)).clamp(0.0, 1.0);
                1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
            }
        }
    }

    pub fn sample(&self, grid: Grid1) -> Result<GridFunction> {
        GridFunction::from_fn(grid, "u0", |x| self.eval(x))
    }
}

/// Smooth compactly supported test function with analytic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `amp * (1 - r^2)^5`, `r = (x - center)/half_width`.
    Bump { center: f64, half_width: f64, amp: f64 },
    /// `phi * eta_R`.
    Localized { inner: Box<TestFunction>, cutoff: CutoffSpec },
}

impl TestFunction {
    pub fn bump(center: f64, half_width: f64) -> Self {
        TestFunction::Bump {
            center,
            half_width,
            amp: 1.0,
        }
    }

    pub fn localized(self, cutoff: CutoffSpec) -> Self {
        TestFunction::Localized {
            inner: Box::new(self),
            cutoff,
        }
    }

    pub fn translated(&self, shift: f64) -> Self {
        match self {
            TestFunction::Bump {
                center,
                half_width,
                amp,
            } => TestFunction::Bump {
                center: center + shift,
                half_width: *half_width,
                amp: *amp,
            },
            TestFunction::Localized { inner, cutoff } => TestFunction::Localized {
                inner: Box::new(inner.translated(shift)),
                cutoff: *cutoff,
            },
        }
    }

    /// Closed interval outside of which the function vanishes.
    pub fn support(&self) -> (f64, f64) {
        match self {
            TestFunction::Bump { center, half_width, .. } => (center - half_width, center + half_width),
            TestFunction::Localized { inner, cutoff } => {
                let (a, b) = inner.support();
                let r = 2.0 * cutoff.radius();
                (a.max(-r), b.min(r))
            }
        }
    }

    /// `(phi, phi', phi'')`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        match self {
            TestFunction::Bump {
                center,
                half_width,
                amp,
            } => {
                let r = (x - center) / half_width;
                if r.abs() >= 1.0 {
                    return (0.0, 0.0, 0.0);
                }
                let s = 1.0 - r * r;
                let s3 = s * s * s;
                let v = s3 * s * s;
                let dr = -10.0 * r * s3 * s;
                let d2r = -10.0 * s3 * s + 80.0 * r * r * s3;
                (amp * v, amp * dr / half_width, amp * d2r / (half_width * half_width))
            }
            TestFunction::Localized { inner, cutoff } => {
                let (p, p1, p2) = inner.eval(x);
                let (e, e1, e2) = cutoff.eval_with_derivs(x);
                (p * e, p1 * e + p * e1, p2 * e + 2.0 * p1 * e1 + p * e2)
            }
        }
    }

    /// `theta(x) = int_{-inf}^x phi` (bumps only; exact polynomial antiderivative).
    pub fn primitive(&self, x: f64) -> Option<f64> {
        match self {
            TestFunction::Bump {
                center,
                half_width,
                amp,
            } => {
                let r = ((x - center) / half_width).clamp(-1.0, 1.0);
                // int_{-1}^{r} (1 - s^2)^5 ds = P(r) - P(-1), P(r) = sum C(5,k)(-1)^k r^{2k+1}/(2k+1)
                let p = |r: f64| -> f64 {
                    const C: [f64; 6] = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
                    (0..6)
                        .map(|k| {
                            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                            sign * C[k] * r.powi(2 * k as i32 + 1) / (2 * k + 1) as f64
                        })
                        .sum()
                };
                Some(amp * half_width * (p(r) - p(-1.0)))
            }
            TestFunction::Localized { .. } => None,
        }
    }

    /// Samples of `phi`, `phi'`, `phi''` on a grid.
    pub fn sample(&self, grid: &Grid1) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut a = Vec::with_capacity(grid.len());
        let mut b = Vec::with_capacity(grid.len());
        let mut c = Vec::with_capacity(grid.len());
        for j in 0..grid.len() {
            let (p, p1, p2) = self.eval(grid.x(j));
            a.push(p);
            b.push(p1);
            c.push(p2);
        }
        (a, b, c)
    }
}

/// Product test function `phi(x) phi(y)` on the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction2 {
    pub x: TestFunction,
    pub y: TestFunction,
}

impl TestFunction2 {
    /// `(phi, grad phi, laplacian phi)`.
    pub fn eval(&self, p: [f64; 2]) -> (f64, [f64; 2], f64) {
        let (a, a1, a2) = self.x.eval(p[0]);
        let (b, b1, b2) = self.y.eval(p[1]);
        (a * b, [a1 * b, a * b1], a2 * b + a * b2)
    }
}
