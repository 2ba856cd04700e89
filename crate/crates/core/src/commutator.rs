//! Commutators between mollification and transport-type products, and
//! their decay as the mollifier shrinks.

use crate::error::{Error, Result};
use crate::exec;
use crate::field::{mollify, MollifierKernel};
use crate::grid::{trapezoid, GridFunction, GridFunction2};
use crate::report::{fmt_num, Csv};

/// `R = f d/dx(rho * g) - rho * (f g')`, with `g'` by central differences.
pub fn commutator_lebris_lions(f: &GridFunction, g: &GridFunction, kernel: &MollifierKernel) -> Result<GridFunction> {
    commutator_lebris_lions_with(f, g, &g.derivative(), kernel)
}

/// As [`commutator_lebris_lions`] with a supplied derivative `dg` of `g`.
///
/// `d/dx(rho * g)` is taken as `rho * dg`, which is exact for the continuum
/// operator and keeps grid effects out of the commutator.
pub fn commutator_lebris_lions_with(
    f: &GridFunction,
    g: &GridFunction,
    dg: &GridFunction,
    kernel: &MollifierKernel,
) -> Result<GridFunction> {
    f.check_same_grid(g)?;
    f.check_same_grid(dg)?;
    let smooth_dg = mollify(dg, kernel)?;
    let f_dg = f.zip_with(dg, |a, b| a * b)?;
    let smooth_f_dg = mollify(&f_dg, kernel)?;
    let first = f.zip_with(&smooth_dg, |a, b| a * b)?;
    Ok(first.zip_with(&smooth_f_dg, |a, b| a - b)?.with_tag("R"))
}

/// `R = b_eps dV_eps/dx - rho * (b dV/dx)`; both `b` and `V` are mollified.
pub fn commutator_primitive(b: &GridFunction, v: &GridFunction, kernel: &MollifierKernel) -> Result<GridFunction> {
    commutator_primitive_with(b, &v.derivative(), kernel)
}

/// As [`commutator_primitive`] given `dv = V'` directly.
pub fn commutator_primitive_with(b: &GridFunction, dv: &GridFunction, kernel: &MollifierKernel) -> Result<GridFunction> {
    b.check_same_grid(dv)?;
    let b_eps = mollify(b, kernel)?;
    let dv_eps = mollify(dv, kernel)?;
    let b_dv = b.zip_with(dv, |a, c| a * c)?;
    let smooth_b_dv = mollify(&b_dv, kernel)?;
    let first = b_eps.zip_with(&dv_eps, |a, c| a * c)?;
    Ok(first.zip_with(&smooth_b_dv, |a, c| a - c)?.with_tag("R"))
}

/// Tensor-product mollification `(rho_eps x rho_eps) * f` with constant edge
/// continuation.
pub fn mollify_2d(f: &GridFunction2, kernel: &MollifierKernel) -> Result<GridFunction2> {
    let g = *f.grid();
    let wx = kernel.weights(g.x.h())?;
    let wy = kernel.weights(g.y.h())?;
    let (nx, ny) = (g.x.len() as isize, g.y.len() as isize);
    let (kx, ky) = ((wx.len() / 2) as isize, (wy.len() / 2) as isize);
    // separable: rows first, then columns
    let mut rows = vec![0.0; f.values().len()];
    for iy in 0..ny {
        for ix in 0..nx {
            rows[(iy * nx + ix) as usize] = wx
                .iter()
                .enumerate()
                .map(|(i, w)| w * f.at(ix - (i as isize - kx), iy))
                .sum();
        }
    }
    let row_at = |ix: isize, iy: isize| rows[(iy.clamp(0, ny - 1) * nx + ix) as usize];
    let mut out = vec![0.0; rows.len()];
    for iy in 0..ny {
        for ix in 0..nx {
            out[(iy * nx + ix) as usize] = wy
                .iter()
                .enumerate()
                .map(|(i, w)| w * row_at(ix, iy - (i as isize - ky)))
                .sum();
        }
    }
    GridFunction2::new(g, out, format!("{}_eps", f.tag()))
}

/// `R = sum_i f_i d_i(rho * g) - rho * (f . grad g)` on the plane.
pub fn commutator_lebris_lions_2d(
    f: &[GridFunction2; 2],
    g: &GridFunction2,
    kernel: &MollifierKernel,
) -> Result<GridFunction2> {
    for fi in f {
        if fi.grid() != g.grid() {
            return Err(Error::GridMismatch("vector field and scalar live on different grids".into()));
        }
    }
    let (gx, gy) = g.gradient();
    let sx = mollify_2d(&gx, kernel)?;
    let sy = mollify_2d(&gy, kernel)?;
    let n = g.values().len();
    let fdg: Vec<f64> = (0..n)
        .map(|i| f[0].values()[i] * gx.values()[i] + f[1].values()[i] * gy.values()[i])
        .collect();
    let smooth = mollify_2d(&GridFunction2::new(*g.grid(), fdg, "fdg")?, kernel)?;
    let vals = (0..n)
        .map(|i| f[0].values()[i] * sx.values()[i] + f[1].values()[i] * sy.values()[i] - smooth.values()[i])
        .collect();
    GridFunction2::new(*g.grid(), vals, "R")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
}

impl NormKind {
    pub fn name(&self) -> &'static str {
        match self {
            NormKind::L1 => "L1",
            NormKind::L2 => "L2",
        }
    }
}

/// Norm of `r` restricted to the grid points inside `window`.
pub fn window_norm(r: &GridFunction, kind: NormKind, window: (f64, f64)) -> f64 {
    let g = r.grid();
    let tol = 1e-9 * g.h();
    let vals: Vec<f64> = (0..g.len())
        .filter(|&j| g.x(j) >= window.0 - tol && g.x(j) <= window.1 + tol)
        .map(|j| r.values()[j])
        .collect();
    if vals.len() < 2 {
        return 0.0;
    }
    match kind {
        NormKind::L1 => trapezoid(&vals.iter().map(|v| v.abs()).collect::<Vec<_>>(), g.h()),
        NormKind::L2 => trapezoid(&vals.iter().map(|v| v * v).collect::<Vec<_>>(), g.h()).sqrt(),
    }
}

/// Norms of a commutator family against the mollifier width.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    pub kind: NormKind,
    pub window: (f64, f64),
    /// `(eps, norm)`, `eps` strictly decreasing.
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope of `log norm` against `log eps`.
    pub slope: f64,
}

fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

impl DecayCurve {
    pub fn norms(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.points.windows(2).all(|p| p[1].1 < p[0].1)
    }

    /// `epsilon,norm,slope_so_far` rows.
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["epsilon", "norm", "slope_so_far"]);
        for i in 0..self.points.len() {
            let (e, n) = self.points[i];
            csv.push(vec![fmt_num(e), fmt_num(n), fmt_num(loglog_slope(&self.points[..=i]))]);
        }
        csv.render()
    }
}

/// Evaluates `build(kernel)` for every width and measures the window norm.
///
/// The window has to stay `2 max(eps)` inside the grid so that edge
/// continuation never reaches it.
pub fn decay_curve<F>(build: F, eps_list: &[f64], kind: NormKind, window: (f64, f64)) -> Result<DecayCurve>
where
    F: Fn(&MollifierKernel) -> Result<GridFunction> + Sync + Send,
{
    if eps_list.is_empty() || eps_list.windows(2).any(|p| !(p[1] < p[0])) {
        return Err(Error::Range {
            name: "eps",
            value: eps_list.first().copied().unwrap_or(f64::NAN),
            reason: "widths must be non-empty and strictly decreasing",
        });
    }
    let eps_max = eps_list[0];
    let norms = exec::map_indexed(eps_list.len(), |i| {
        let eps = eps_list[i];
        let wrap = |e: Error| Error::Sweep { eps, source: Box::new(e) };
        let kernel = MollifierKernel::new(eps).map_err(wrap)?;
        let r = build(&kernel).map_err(wrap)?;
        let g = r.grid();
        if window.0 - 2.0 * eps_max < g.x_min() || window.1 + 2.0 * eps_max > g.x_max() {
            return Err(wrap(Error::Domain {
                x_min: g.x_min(),
                x_max: g.x_max(),
                need: window.0.abs().max(window.1.abs()) + 2.0 * eps_max,
            }));
        }
        Ok(window_norm(&r, kind, window))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> = eps_list.iter().copied().zip(norms).collect();
    Ok(DecayCurve {
        kind,
        window,
        slope: loglog_slope(&points),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::DriftField;
    use crate::grid::{Grid1, Grid2};
    use proptest::prelude::*;

    fn grid() -> Grid1 {
        Grid1::with_spacing(-3.0, 3.0, 1.0 / 512.0).unwrap()
    }

    fn gf(g: Grid1, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_fn(g, "f", f).unwrap()
    }

    #[test]
    fn constant_field_gives_zero() {
        let g = grid();
        let k = MollifierKernel::new(0.1).unwrap();
        let r = commutator_lebris_lions(&gf(g, |_| 2.0), &gf(g, f64::sin), &k).unwrap();
        assert!(window_norm(&r, NormKind::L2, (-2.0, 2.0)) < 1e-12);
        let r = commutator_primitive(&gf(g, |_| 2.0), &gf(g, f64::sin), &k).unwrap();
        assert!(window_norm(&r, NormKind::L2, (-2.0, 2.0)) < 1e-12);
    }

    #[test]
    fn constant_scalar_gives_exact_zero() {
        let g = grid();
        let k = MollifierKernel::new(0.1).unwrap();
        let r = commutator_lebris_lions(&gf(g, |x| x * x), &gf(g, |_| 3.0), &k).unwrap();
        assert!(r.values().iter().all(|v| *v == 0.0));
        let r = commutator_primitive(&gf(g, |x| x * x), &gf(g, |_| 3.0), &k).unwrap();
        assert!(r.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_field_matches_second_order_taylor() {
        // x rho*(g') - rho*(x g') = int rho(z) z g'(x - z) dz = -m2 eps^2 g'' + O(eps^4)
        let g = grid();
        let eps = 0.1;
        let k = MollifierKernel::new(eps).unwrap();
        let r = commutator_lebris_lions_with(&gf(g, |x| x), &gf(g, f64::sin), &gf(g, f64::cos), &k).unwrap();
        let m2 = k.second_moment();
        for j in (0..g.len()).filter(|&j| g.x(j).abs() <= 2.0) {
            let expect = m2 * g.x(j).sin();
            assert!((r.values()[j] - expect).abs() < 1e-5, "{} {}", r.values()[j], expect);
        }
    }

    #[test]
    fn smooth_decay_has_rate_two() {
        let g = grid();
        let c = decay_curve(
            |k| commutator_lebris_lions(&gf(g, |x| x), &gf(g, f64::sin), k),
            &[0.2, 0.1, 0.05],
            NormKind::L2,
            (-2.0, 2.0),
        )
        .unwrap();
        assert!((c.slope - 2.0).abs() < 0.3, "{c:?}");
        let n = c.norms();
        assert!(n[0] / n[1] >= 3.0 && n[1] / n[2] >= 3.0);
        assert!(c.to_csv().starts_with("epsilon,norm,slope_so_far\n"));
    }

    #[test]
    fn holder_field_decays() {
        let g = grid();
        let b = DriftField::holder(0.5).unwrap().sample(g).unwrap();
        let c = decay_curve(
            |k| commutator_lebris_lions(&b, &gf(g, f64::sin), k),
            &[0.1, 0.05, 0.025],
            NormKind::L1,
            (-2.0, 2.0),
        )
        .unwrap();
        assert!(c.strictly_decreasing(), "{c:?}");
    }

    #[test]
    fn primitive_variant_matches_taylor_scale() {
        let g = grid();
        let k = MollifierKernel::new(0.05).unwrap();
        let r = commutator_primitive_with(&gf(g, |x| x), &gf(g, f64::cos), &k).unwrap();
        let n = window_norm(&r, NormKind::L2, (-2.0, 2.0));
        // b_eps = x exactly, so this equals the Le Bris-Lions value m2 eps^2 ||sin||
        let sin_norm = window_norm(&gf(g, f64::sin), NormKind::L2, (-2.0, 2.0));
        let expect = k.second_moment() * sin_norm;
        assert!((n / expect - 1.0).abs() < 0.05);
    }

    #[test]
    fn variants_agree_for_smooth_inputs() {
        let g = grid();
        let eps = 0.05;
        let k = MollifierKernel::new(eps).unwrap();
        let b = gf(g, |x| (0.5 * x).tanh());
        let v = gf(g, |x| x.sin());
        let a = commutator_lebris_lions(&b, &v, &k).unwrap();
        let p = commutator_primitive(&b, &v, &k).unwrap();
        let diff = a.zip_with(&p, |x, y| x - y).unwrap();
        // Lip(b) = 1/2, |V'| <= 1
        assert!(window_norm(&diff, NormKind::L2, (-2.0, 2.0)) <= 2.0 * eps * eps * 0.5);
    }

    #[test]
    fn sweep_rejects_bad_input() {
        let g = grid();
        let build = |k: &MollifierKernel| commutator_lebris_lions(&gf(g, |x| x), &gf(g, f64::sin), k);
        assert!(decay_curve(build, &[0.05, 0.1], NormKind::L2, (-2.0, 2.0)).is_err());
        assert!(matches!(
            decay_curve(build, &[0.8, 0.4], NormKind::L2, (-2.0, 2.0)),
            Err(Error::Sweep { eps, .. }) if eps == 0.8
        ));
        let coarse = Grid1::with_spacing(-3.0, 3.0, 0.05).unwrap();
        let build = |k: &MollifierKernel| commutator_lebris_lions(&gf(coarse, |x| x), &gf(coarse, f64::sin), k);
        assert!(matches!(
            decay_curve(build, &[0.1], NormKind::L2, (-2.0, 2.0)),
            Err(Error::Sweep { source, .. }) if matches!(*source, Error::Resolution { .. })
        ));
    }

    #[test]
    fn plane_commutator_rates() {
        let g = Grid2::square(-2.0, 2.0, 1.0 / 64.0).unwrap();
        let f = [
            GridFunction2::from_fn(g, "f1", |p| -p[1]).unwrap(),
            GridFunction2::from_fn(g, "f2", |p| p[0]).unwrap(),
        ];
        let s = GridFunction2::from_fn(g, "g", |p| (-(p[0] * p[0] + 2.0 * p[1] * p[1])).exp()).unwrap();
        let norm = |eps: f64| {
            let r = commutator_lebris_lions_2d(&f, &s, &MollifierKernel::new(eps).unwrap()).unwrap();
            r.map(|p, v| if p[0].abs() <= 1.0 && p[1].abs() <= 1.0 { v * v } else { 0.0 })
                .integrate()
                .sqrt()
        };
        let (a, b) = (norm(0.2), norm(0.1));
        assert!(a / b >= 3.0, "{a} {b}");
        let c = GridFunction2::from_fn(g, "c", |_| 1.0).unwrap();
        let r = commutator_lebris_lions_2d(&f, &c, &MollifierKernel::new(0.1).unwrap()).unwrap();
        assert!(r.values().iter().all(|v| *v == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn bilinear_in_scalar(a in -2.0f64..2.0, c in -2.0f64..2.0, w in 0.5f64..3.0) {
            let g = Grid1::with_spacing(-3.0, 3.0, 1.0 / 64.0).unwrap();
            let k = MollifierKernel::new(0.1).unwrap();
            let f = gf(g, |x| (a * x).sin() + c);
            let g1 = gf(g, |x| (w * x).cos());
            let g2 = gf(g, |x| x * x * c);
            let sum = g1.zip_with(&g2, |p, q| p + q).unwrap();
            for op in [commutator_lebris_lions, commutator_primitive] {
                let lhs = op(&f, &sum, &k).unwrap();
                let rhs = op(&f, &g1, &k).unwrap().zip_with(&op(&f, &g2, &k).unwrap(), |p, q| p + q).unwrap();
                let scale = lhs.max_abs().max(1e-300);
                prop_assert!(lhs.sup_distance(&rhs).unwrap() <= 1e-12 * scale.max(1.0));
            }
        }
    }
}
