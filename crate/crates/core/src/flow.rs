//! Euler–Maruyama characteristics, their Jacobians and inverse maps.

use crate::error::{Error, Result};
use crate::exec;
use crate::field::DriftField;
use crate::grid::Grid1;
use crate::paths::BrownianEnsemble;
use crate::report::{fmt_num, Csv};

pub type Mat2 = [[f64; 2]; 2];

/// Which time steps a flow keeps in memory.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    All,
    Final,
    Every(usize),
    Steps(Vec<usize>),
}

impl Record {
    fn indices(&self, steps: usize) -> Vec<usize> {
        let mut v: Vec<usize> = match self {
            Record::All => (0..=steps).collect(),
            Record::Final => vec![0, steps],
            Record::Every(k) => {
                let k = (*k).max(1);
                let mut v: Vec<usize> = (0..=steps).step_by(k).collect();
                v.push(steps);
                v
            }
            Record::Steps(s) => {
                let mut v: Vec<usize> = s.iter().copied().filter(|&n| n <= steps).collect();
                v.push(0);
                v
            }
        };
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub record: Record,
    pub jacobian: bool,
    /// Half-width of the guard box; `None` uses `10 (1 + max|x|) e^{kT}`.
    pub guard_box: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            record: Record::All,
            jacobian: true,
            guard_box: None,
        }
    }
}

impl FlowConfig {
    pub fn final_only() -> Self {
        Self {
            record: Record::Final,
            ..Self::default()
        }
    }
}

fn guard_limit(b: &DriftField, w: &BrownianEnsemble, max_abs: f64, cfg: &FlowConfig) -> f64 {
    cfg.guard_box
        .unwrap_or_else(|| 10.0 * (1.0 + max_abs) * (b.growth() * w.horizon()).exp())
}

/// Trajectories of one Brownian path started from a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFlow {
    path: usize,
    points: Vec<f64>,
    grid: Option<Grid1>,
    recorded: Vec<usize>,
    /// `[r][j]` positions at recorded steps.
    x: Vec<f64>,
    /// `[r][j]` accumulated `sum b'(X_n) dt`.
    log_jac: Option<Vec<f64>>,
}

impl PathFlow {
    pub fn path(&self) -> usize {
        self.path
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn grid(&self) -> Option<&Grid1> {
        self.grid.as_ref()
    }

    pub fn recorded_steps(&self) -> &[usize] {
        &self.recorded
    }

    fn slot(&self, step: usize) -> Result<usize> {
        self.recorded
            .binary_search(&step)
            .map_err(|_| Error::NotRecorded { step })
    }

    /// Positions `X_{t_n}(x_j)` for all `j`.
    pub fn positions(&self, step: usize) -> Result<&[f64]> {
        let r = self.slot(step)?;
        let n = self.points.len();
        Ok(&self.x[r * n..(r + 1) * n])
    }

    /// `log dX_{t_n}/dx (x_j)` for all `j`.
    pub fn log_jacobians(&self, step: usize) -> Result<&[f64]> {
        let r = self.slot(step)?;
        let n = self.points.len();
        match &self.log_jac {
            Some(l) => Ok(&l[r * n..(r + 1) * n]),
            None => Err(Error::NotRecorded { step }),
        }
    }

    pub fn jacobian(&self, step: usize, j: usize) -> Result<f64> {
        Ok(self.log_jacobians(step)?[j].exp())
    }

    pub fn has_jacobian(&self) -> bool {
        self.log_jac.is_some()
    }
}

/// Integrates one path of `dX = b(X) dt + dB` from every point, accumulating
/// `log J` alongside when requested.
pub fn integrate_path(
    b: &DriftField,
    w: &BrownianEnsemble,
    m: usize,
    points: &[f64],
    grid: Option<Grid1>,
    cfg: &FlowConfig,
) -> Result<PathFlow> {
    if b.dimension() != 1 || w.dim() != 1 {
        return Err(Error::UnsupportedDimension(b.dimension().max(w.dim())));
    }
    let recorded = cfg.record.indices(w.steps());
    let max_abs = points.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let limit = guard_limit(b, w, max_abs, cfg);
    let dt = w.dt();
    let np = points.len();
    let mut x = points.to_vec();
    let mut lj = vec![0.0; np];
    let mut xs = Vec::with_capacity(recorded.len() * np);
    let mut ljs = Vec::with_capacity(if cfg.jacobian { recorded.len() * np } else { 0 });
    let mut next = 0;
    for n in 0..=w.steps() {
        if next < recorded.len() && recorded[next] == n {
            xs.extend_from_slice(&x);
            if cfg.jacobian {
                ljs.extend_from_slice(&lj);
            }
            next += 1;
        }
        if n == w.steps() {
            break;
        }
        let db = w.increment(m, n, 0);
        for j in 0..np {
            let xj = x[j];
            let drift = if cfg.jacobian {
                let (v, d) = b.eval_deriv1(xj);
                lj[j] += d * dt;
                v
            } else {
                b.eval1(xj)
            };
            let nx = xj + drift * dt + db;
            if !(nx.abs() <= limit) {
                return Err(Error::BlowUp {
                    path: m,
                    step: n + 1,
                    point: j,
                    limit,
                });
            }
            x[j] = nx;
        }
    }
    Ok(PathFlow {
        path: m,
        points: points.to_vec(),
        grid,
        recorded,
        x: xs,
        log_jac: cfg.jacobian.then_some(ljs),
    })
}

/// Characteristics of every path of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowEnsemble {
    drift: DriftField,
    dt: f64,
    steps: usize,
    paths: Vec<PathFlow>,
    stiff: bool,
}

/// Initial points of a flow: a uniform grid or a free list.
#[derive(Debug, Clone, Copy)]
pub enum Start<'a> {
    Grid(Grid1),
    Points(&'a [f64]),
}

/// Forward flow `X_{0,t}(x)` for every path of `w`.
pub fn forward_flow(b: &DriftField, w: &BrownianEnsemble, start: Start<'_>, cfg: &FlowConfig) -> Result<FlowEnsemble> {
    let (points, grid) = match start {
        Start::Grid(g) => (g.points(), Some(g)),
        Start::Points(p) => (p.to_vec(), None),
    };
    let dt = w.dt();
    let stiff = points
        .iter()
        .any(|&x| b.deriv1(x).abs() * dt >= 0.5);
    let paths = exec::map_indexed(w.paths(), |m| integrate_path(b, w, m, &points, grid, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(FlowEnsemble {
        drift: b.clone(),
        dt,
        steps: w.steps(),
        paths,
        stiff,
    })
}

/// Fills `log J = sum b'(X_n) dt` from a flow that recorded every step.
pub fn jacobian(flow: FlowEnsemble) -> Result<FlowEnsemble> {
    let FlowEnsemble {
        drift,
        dt,
        steps,
        paths,
        stiff,
    } = flow;
    let paths = paths
        .into_iter()
        .map(|mut pf| {
            if pf.recorded.len() != steps + 1 {
                let missing = (0..=steps).find(|n| pf.recorded.binary_search(n).is_err()).unwrap_or(0);
                return Err(Error::NotRecorded { step: missing });
            }
            let np = pf.points.len();
            let mut lj = vec![0.0; np];
            let mut out = Vec::with_capacity((steps + 1) * np);
            for n in 0..=steps {
                out.extend_from_slice(&lj);
                if n == steps {
                    break;
                }
                for j in 0..np {
                    lj[j] += drift.eval_deriv1(pf.x[n * np + j]).1 * dt;
                }
            }
            pf.log_jac = Some(out);
            Ok(pf)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FlowEnsemble {
        drift,
        dt,
        steps,
        paths,
        stiff,
    })
}

impl FlowEnsemble {
    pub fn drift(&self) -> &DriftField {
        &self.drift
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn path(&self, m: usize) -> &PathFlow {
        &self.paths[m]
    }

    pub fn paths(&self) -> &[PathFlow] {
        &self.paths
    }

    /// `dt * max|b'| >= 0.5` at some initial point.
    pub fn stiffness_warning(&self) -> bool {
        self.stiff
    }

    /// Debug dump with columns `m,n,j,t,x[,J]`.
    pub fn trajectory_csv(&self) -> String {
        let with_j = self.paths.iter().all(|p| p.has_jacobian());
        let mut csv = if with_j {
            Csv::new(&["m", "n", "j", "t", "x", "J"])
        } else {
            Csv::new(&["m", "n", "j", "t", "x"])
        };
        for pf in &self.paths {
            let np = pf.points.len();
            for (r, &n) in pf.recorded.iter().enumerate() {
                for j in 0..np {
                    let mut row = vec![
                        pf.path.to_string(),
                        n.to_string(),
                        j.to_string(),
                        fmt_num(n as f64 * self.dt),
                        fmt_num(pf.x[r * np + j]),
                    ];
                    if let (true, Some(l)) = (with_j, &pf.log_jac) {
                        row.push(fmt_num(l[r * np + j].exp()));
                    }
                    csv.push(row);
                }
            }
        }
        csv.render()
    }
}

/// Numerical inverse `psi_t = X_t^{-1}` of a monotone 1-D flow, by linear
/// interpolation of the graph `{(X_t(x_j), x_j)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseMap<'a> {
    knots_y: &'a [f64],
    knots_x: &'a [f64],
}

/// Location of a query inside the inverse map: `psi = (1-s) x_i + s x_{i+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preimage {
    pub psi: f64,
    pub cell: usize,
    pub frac: f64,
    pub out_of_range: bool,
}

pub fn inverse_flow(flow: &PathFlow, step: usize) -> Result<InverseMap<'_>> {
    let ys = flow.positions(step)?;
    if let Some(k) = ys.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotone {
            path: flow.path,
            step,
            knot: k,
        });
    }
    if ys.len() < 2 {
        return Err(Error::Range {
            name: "points",
            value: ys.len() as f64,
            reason: "an inverse map needs at least two knots",
        });
    }
    Ok(InverseMap {
        knots_y: ys,
        knots_x: &flow.points,
    })
}

impl InverseMap<'_> {
    fn cell(&self, i: usize, y: f64) -> Preimage {
        let (y0, y1) = (self.knots_y[i], self.knots_y[i + 1]);
        let s = (y - y0) / (y1 - y0);
        Preimage {
            psi: self.knots_x[i] + s * (self.knots_x[i + 1] - self.knots_x[i]),
            cell: i,
            frac: s,
            out_of_range: false,
        }
    }

    fn clamp(&self, y: f64) -> Option<Preimage> {
        let last = self.knots_y.len() - 1;
        if y < self.knots_y[0] {
            Some(Preimage {
                psi: self.knots_x[0],
                cell: 0,
                frac: 0.0,
                out_of_range: true,
            })
        } else if y > self.knots_y[last] {
            Some(Preimage {
                psi: self.knots_x[last],
                cell: last - 1,
                frac: 1.0,
                out_of_range: true,
            })
        } else {
            None
        }
    }

    pub fn eval(&self, y: f64) -> Preimage {
        if let Some(p) = self.clamp(y) {
            return p;
        }
        if y == self.knots_y[self.knots_y.len() - 1] {
            return self.cell(self.knots_y.len() - 2, y);
        }
        let i = self.knots_y.partition_point(|&k| k <= y) - 1;
        self.cell(i, y)
    }

    /// Evaluates at ascending queries with a single merge sweep.
    pub fn eval_sorted(&self, ys: &[f64]) -> Vec<Preimage> {
        let mut i = 0;
        let last = self.knots_y.len() - 1;
        ys.iter()
            .map(|&y| {
                if let Some(p) = self.clamp(y) {
                    return p;
                }
                while i + 1 < last && self.knots_y[i + 1] <= y {
                    i += 1;
                }
                self.cell(i, y)
            })
            .collect()
    }
}

#[inline]
pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

#[inline]
pub fn matmul2(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Cofactor matrix, `Cof(M)_{ij} = (-1)^{i+j} minor_{ij}`.
pub fn cofactor(m: &Mat2) -> Mat2 {
    [[m[1][1], -m[1][0]], [-m[0][1], m[0][0]]]
}

/// `Cof(M)^T` (the adjugate), so that `M Cof(M)^T = det(M) I`.
pub fn cofactor_transpose(m: &Mat2) -> Mat2 {
    [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]]
}

/// 2-D trajectories (and optionally `DX`) of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFlow2 {
    path: usize,
    points: Vec<[f64; 2]>,
    recorded: Vec<usize>,
    x: Vec<[f64; 2]>,
    jac: Option<Vec<Mat2>>,
}

impl PathFlow2 {
    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn recorded_steps(&self) -> &[usize] {
        &self.recorded
    }

    fn slot(&self, step: usize) -> Result<usize> {
        self.recorded
            .binary_search(&step)
            .map_err(|_| Error::NotRecorded { step })
    }

    pub fn positions(&self, step: usize) -> Result<&[[f64; 2]]> {
        let r = self.slot(step)?;
        let n = self.points.len();
        Ok(&self.x[r * n..(r + 1) * n])
    }

    pub fn jacobians(&self, step: usize) -> Result<&[Mat2]> {
        let r = self.slot(step)?;
        let n = self.points.len();
        match &self.jac {
            Some(j) => Ok(&j[r * n..(r + 1) * n]),
            None => Err(Error::NotRecorded { step }),
        }
    }
}

/// 2-D Euler–Maruyama flow of one path; `DX` follows
/// `DX_{n+1} = (I + dt Db(X_n)) DX_n`, the exact derivative of the scheme.
pub fn integrate_path_2d(
    b: &DriftField,
    w: &BrownianEnsemble,
    m: usize,
    points: &[[f64; 2]],
    cfg: &FlowConfig,
) -> Result<PathFlow2> {
    if b.dimension() != 2 || w.dim() != 2 {
        return Err(Error::UnsupportedDimension(b.dimension().min(w.dim())));
    }
    let recorded = cfg.record.indices(w.steps());
    let max_abs = points.iter().fold(0.0f64, |a, p| a.max(p[0].hypot(p[1])));
    let limit = guard_limit(b, w, max_abs, cfg);
    let dt = w.dt();
    let mut x = points.to_vec();
    let mut jac = vec![[[1.0, 0.0], [0.0, 1.0]]; points.len()];
    let mut xs = Vec::new();
    let mut js = Vec::new();
    let mut next = 0;
    for n in 0..=w.steps() {
        if next < recorded.len() && recorded[next] == n {
            xs.extend_from_slice(&x);
            if cfg.jacobian {
                js.extend_from_slice(&jac);
            }
            next += 1;
        }
        if n == w.steps() {
            break;
        }
        let db = [w.increment(m, n, 0), w.increment(m, n, 1)];
        for (j, p) in x.iter_mut().enumerate() {
            if cfg.jacobian {
                let d = b.jac2(*p);
                let step = [[1.0 + dt * d[0][0], dt * d[0][1]], [dt * d[1][0], 1.0 + dt * d[1][1]]];
                jac[j] = matmul2(&step, &jac[j]);
                let det = det2(&jac[j]);
                if !(det > 0.0) {
                    return Err(Error::Integrator {
                        path: m,
                        step: n + 1,
                        point: j,
                        det,
                    });
                }
            }
            let v = b.eval2(*p);
            let np = [p[0] + v[0] * dt + db[0], p[1] + v[1] * dt + db[1]];
            if !(np[0].hypot(np[1]) <= limit) {
                return Err(Error::BlowUp {
                    path: m,
                    step: n + 1,
                    point: j,
                    limit,
                });
            }
            *p = np;
        }
    }
    Ok(PathFlow2 {
        path: m,
        points: points.to_vec(),
        recorded,
        x: xs,
        jac: cfg.jacobian.then_some(js),
    })
}

/// `psi_{t_n}(y)`: inverts the Euler–Maruyama steps `n-1, ..., 0` of path `m`
/// one at a time by Newton iteration, so `psi(X_{t_n}(x)) = x` up to
/// round-off.
pub fn inverse_map_2d(b: &DriftField, w: &BrownianEnsemble, m: usize, step: usize, y: [f64; 2]) -> Result<[f64; 2]> {
    let dt = w.dt();
    let mut z = y;
    for n in (0..step).rev() {
        let target = [z[0] - w.increment(m, n, 0), z[1] - w.increment(m, n, 1)];
        let v = b.eval2(target);
        let mut xi = [target[0] - v[0] * dt, target[1] - v[1] * dt];
        let scale = 1.0 + target[0].abs() + target[1].abs();
        let mut converged = false;
        for _ in 0..30 {
            let v = b.eval2(xi);
            let f = [xi[0] + dt * v[0] - target[0], xi[1] + dt * v[1] - target[1]];
            if f[0].abs().max(f[1].abs()) <= 1e-15 * scale {
                converged = true;
                break;
            }
            let d = b.jac2(xi);
            let a: Mat2 = [[1.0 + dt * d[0][0], dt * d[0][1]], [dt * d[1][0], 1.0 + dt * d[1][1]]];
            let det = det2(&a);
            let adj = cofactor_transpose(&a);
            xi[0] -= (adj[0][0] * f[0] + adj[0][1] * f[1]) / det;
            xi[1] -= (adj[1][0] * f[0] + adj[1][1] * f[1]) / det;
        }
        if !converged {
            let v = b.eval2(xi);
            let res = (xi[0] + dt * v[0] - target[0]).abs().max((xi[1] + dt * v[1] - target[1]).abs());
            if !(res <= 1e-12 * scale) {
                return Err(Error::Integrator {
                    path: m,
                    step: n,
                    point: 0,
                    det: f64::NAN,
                });
            }
        }
        z = xi;
    }
    Ok(z)
}
