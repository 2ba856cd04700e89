//! Velocity fields, mollifiers, cutoffs and the structural hypotheses on
//! the drift (linear growth, integrability exponent, divergence-free).

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{Grid1, GridFunction};
use crate::quad;

/// Normalisation of the unit bump `(1 - z^2)^4` on `[-1, 1]`.
const BUMP_NORM: f64 = 315.0 / 256.0;

/// Symmetric polynomial mollifier `rho(z) = 315/256 (1 - z^2)^4` on `[-1, 1]`,
/// rescaled to width `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierKernel {
    eps: f64,
}

impl MollifierKernel {
    /// Second moment of the unit kernel, `int rho(z) z^2 dz = 1/11`.
    pub const M2: f64 = 1.0 / 11.0;

    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Range {
                name: "eps",
                value: eps,
                reason: "mollifier width must be positive",
            });
        }
        Ok(Self { eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `m2 * eps^2`, the second moment of the rescaled kernel.
    pub fn second_moment(&self) -> f64 {
        Self::M2 * self.eps * self.eps
    }

    #[inline]
    pub fn unit(z: f64) -> f64 {
        if z.abs() >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - z * z;
        let s2 = s * s;
        BUMP_NORM * s2 * s2
    }

    #[inline]
    pub fn unit_deriv(z: f64) -> f64 {
        if z.abs() >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - z * z;
        -8.0 * BUMP_NORM * z * s * s * s
    }

    /// `rho_eps(x) = rho(x/eps)/eps`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        Self::unit(x / self.eps) / self.eps
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        Self::unit_deriv(x / self.eps) / (self.eps * self.eps)
    }

    /// Sampled weights on offsets `-K..=K` (spacing `h`), renormalised to sum to 1.
    pub fn weights(&self, h: f64) -> Result<Vec<f64>> {
        if h > self.eps / 4.0 {
            return Err(Error::Resolution { h, eps: self.eps });
        }
        let k = (self.eps / h).floor() as isize;
        let raw: Vec<f64> = (-k..=k).map(|i| Self::unit(i as f64 * h / self.eps)).collect();
        let total: f64 = raw.iter().sum();
        Ok(raw.into_iter().map(|w| w / total).collect())
    }
}

/// Smooth cutoff `eta_R(x) = eta(|x|/R)` with `eta = 1` on `[0, 1]` and `0` on `[2, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    radius: f64,
}

impl CutoffSpec {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Range {
                name: "radius",
                value: radius,
                reason: "cutoff radius must be positive",
            });
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Base profile and its first two derivatives in `r`.
    ///
    /// On `(1, 2)`, `eta = 1/(1 + exp(s))` with `s = 1/(2-r) - 1/(r-1)`.
    pub fn profile(r: f64) -> (f64, f64, f64) {
        if r <= 1.0 {
            return (1.0, 0.0, 0.0);
        }
        if r >= 2.0 {
            return (0.0, 0.0, 0.0);
        }
        let (a, b) = (2.0 - r, r - 1.0);
        let s = 1.0 / a - 1.0 / b;
        let ds = 1.0 / (a * a) + 1.0 / (b * b);
        let d2s = 2.0 / (a * a * a) - 2.0 / (b * b * b);
        // logistic form, guarded against overflow of exp(s)
        let eta = if s > 0.0 {
            let e = (-s).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + s.exp())
        };
        let q = eta * (1.0 - eta);
        let d1 = -q * ds;
        let d2 = -(d1 * (1.0 - 2.0 * eta) * ds + q * d2s);
        (eta, d1, d2)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        Self::profile(x.abs() / self.radius).0
    }

    /// `(eta_R, d/dx eta_R, d^2/dx^2 eta_R)` on the line.
    pub fn eval_with_derivs(&self, x: f64) -> (f64, f64, f64) {
        let (e, d1, d2) = Self::profile(x.abs() / self.radius);
        let sgn = if x < 0.0 { -1.0 } else { 1.0 };
        (e, sgn * d1 / self.radius, d2 / (self.radius * self.radius))
    }
}

/// A drift `b` for the characteristic SDE `dX = b(X) dt + dB`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftField {
    kind: DriftKind,
    dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DriftKind {
    Zero,
    /// `b = c`.
    Constant(f64),
    /// `b = a x`.
    Linear(f64),
    /// `b = k tanh(x)`.
    Tanh(f64),
    /// `b = sum c_i x^i`.
    Polynomial(Vec<f64>),
    /// `b = scale |x|^alpha sign(x)`, `0 < alpha < 1`.
    Holder { alpha: f64, scale: f64 },
    /// `b = (-x2, x1)`.
    Rotation,
    /// `eta_{1/eps}(x) (rho_eps * b)(x)`, cutoff optional.
    Mollified {
        base: Box<DriftField>,
        kernel: MollifierKernel,
        cutoff: Option<CutoffSpec>,
    },
}

impl DriftField {
    pub fn zero() -> Self {
        Self { kind: DriftKind::Zero, dim: 1 }
    }

    pub fn zero_2d() -> Self {
        Self { kind: DriftKind::Zero, dim: 2 }
    }

    pub fn constant(c: f64) -> Self {
        Self { kind: DriftKind::Constant(c), dim: 1 }
    }

    pub fn linear(a: f64) -> Self {
        Self { kind: DriftKind::Linear(a), dim: 1 }
    }

    /// Ornstein–Uhlenbeck drift `b = -x`.
    pub fn ou() -> Self {
        Self::linear(-1.0)
    }

    pub fn tanh(k: f64) -> Self {
        Self { kind: DriftKind::Tanh(k), dim: 1 }
    }

    /// `b = coeffs[0] + coeffs[1] x + coeffs[2] x^2 + ...`.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self {
            kind: DriftKind::Polynomial(coeffs),
            dim: 1,
        }
    }

    pub fn holder(alpha: f64) -> Result<Self> {
        Self::holder_scaled(alpha, 1.0)
    }

    pub fn holder_scaled(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Range {
                name: "alpha",
                value: alpha,
                reason: "Hoelder exponent must lie in (0, 1)",
            });
        }
        Ok(Self {
            kind: DriftKind::Holder { alpha, scale },
            dim: 1,
        })
    }

    pub fn rotation() -> Self {
        Self { kind: DriftKind::Rotation, dim: 2 }
    }

    /// `rho_eps * b`, optionally truncated by `eta(eps x)`.
    pub fn mollified(&self, kernel: MollifierKernel, truncate: bool) -> Result<Self> {
        if self.dim != 1 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        let cutoff = if truncate {
            Some(CutoffSpec::new(1.0 / kernel.eps())?)
        } else {
            None
        };
        Ok(Self {
            kind: DriftKind::Mollified {
                base: Box::new(self.clone()),
                kernel,
                cutoff,
            },
            dim: 1,
        })
    }

    /// Parses the CLI names `zero`, `linear(a)`, `ou`, `tanh(k)`, `rotation`,
    /// `holder(alpha)` and `holder(alpha,scale)`.
    pub fn parse(spec: &str) -> Result<Self> {
        let s = spec.trim();
        let bad = |reason: &str| Error::Config {
            field: "drift".into(),
            reason: format!("{reason}: `{s}`"),
        };
        let (name, args) = match s.find('(') {
            Some(i) => {
                let inner = s[i + 1..].strip_suffix(')').ok_or_else(|| bad("missing `)`"))?;
                let args = inner
                    .split(',')
                    .map(|a| a.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad("bad numeric argument"))?;
                (&s[..i], args)
            }
            None => (s, Vec::new()),
        };
        match (name, args.as_slice()) {
            ("zero", []) => Ok(Self::zero()),
            ("zero2", []) => Ok(Self::zero_2d()),
            ("ou", []) => Ok(Self::ou()),
            ("rotation", []) => Ok(Self::rotation()),
            ("linear", [a]) => Ok(Self::linear(*a)),
            ("constant", [c]) => Ok(Self::constant(*c)),
            ("tanh", [k]) => Ok(Self::tanh(*k)),
            ("holder", [a]) => Self::holder(*a),
            ("holder", [a, sc]) => Self::holder_scaled(*a, *sc),
            ("polynomial", c) if !c.is_empty() => Ok(Self::polynomial(c.to_vec())),
            _ => Err(bad("unknown drift")),
        }
    }

    pub fn kind(&self) -> &DriftKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Growth constant `k` with `|b(x)| <= k (1 + |x|)`.
    pub fn growth(&self) -> f64 {
        match &self.kind {
            DriftKind::Zero => 0.0,
            DriftKind::Constant(c) => c.abs(),
            DriftKind::Linear(a) => a.abs(),
            DriftKind::Tanh(k) => k.abs(),
            DriftKind::Polynomial(c) => match c.len() {
                0 => 0.0,
                1 => c[0].abs(),
                2 => c[0].abs().max(c[1].abs()),
                _ if c[2..].iter().all(|v| *v == 0.0) => c[0].abs().max(c[1].abs()),
                _ => f64::INFINITY,
            },
            DriftKind::Holder { scale, .. } => scale.abs(),
            DriftKind::Rotation => 1.0,
            DriftKind::Mollified { base, kernel, .. } => base.growth() * (1.0 + kernel.eps()),
        }
    }

    pub fn divergence_free(&self) -> bool {
        matches!(
            self.kind,
            DriftKind::Zero | DriftKind::Constant(_) | DriftKind::Rotation
        )
    }

    pub fn has_analytic_derivative(&self) -> bool {
        !matches!(self.kind, DriftKind::Holder { .. })
    }

    /// Points where the field is not differentiable.
    fn kinks(&self) -> &'static [f64] {
        match self.kind {
            DriftKind::Holder { .. } => &[0.0],
            _ => &[],
        }
    }

    /// Mollifier width when the field is a mollification, else `None`.
    pub fn mollifier_width(&self) -> Option<f64> {
        match &self.kind {
            DriftKind::Mollified { kernel, .. } => Some(kernel.eps()),
            _ => None,
        }
    }

    /// Step for central differences when no analytic derivative exists.
    pub fn fd_step(&self) -> f64 {
        1e-5f64.max(self.mollifier_width().unwrap_or(0.0) / 100.0)
    }

    #[inline]
    pub fn eval1(&self, x: f64) -> f64 {
        match &self.kind {
            DriftKind::Zero => 0.0,
            DriftKind::Constant(c) => *c,
            DriftKind::Linear(a) => a * x,
            DriftKind::Tanh(k) => k * x.tanh(),
            DriftKind::Polynomial(c) => c.iter().rev().fold(0.0, |acc, ci| acc * x + ci),
            DriftKind::Holder { alpha, scale } => scale * x.abs().powf(*alpha) * x.signum_or_zero(),
            DriftKind::Rotation => f64::NAN,
            DriftKind::Mollified { .. } => self.eval_deriv1(x).0,
        }
    }

    #[inline]
    pub fn deriv1(&self, x: f64) -> f64 {
        self.eval_deriv1(x).1
    }

    /// `(b(x), b'(x))`; analytic where available, central differences otherwise.
    pub fn eval_deriv1(&self, x: f64) -> (f64, f64) {
        match &self.kind {
            DriftKind::Zero => (0.0, 0.0),
            DriftKind::Constant(c) => (*c, 0.0),
            DriftKind::Linear(a) => (a * x, *a),
            DriftKind::Tanh(k) => {
                let t = x.tanh();
                (k * t, k * (1.0 - t * t))
            }
            DriftKind::Polynomial(c) => {
                let (mut v, mut d) = (0.0, 0.0);
                for ci in c.iter().rev() {
                    d = d * x + v;
                    v = v * x + ci;
                }
                (v, d)
            }
            DriftKind::Holder { .. } => {
                let h = self.fd_step();
                (self.eval1(x), (self.eval1(x + h) - self.eval1(x - h)) / (2.0 * h))
            }
            DriftKind::Rotation => (f64::NAN, f64::NAN),
            DriftKind::Mollified { base, kernel, cutoff } => {
                let (v, d) = convolve_with_kernel(base, kernel, x);
                match cutoff {
                    None => (v, d),
                    Some(c) => {
                        let (e, de, _) = c.eval_with_derivs(x);
                        (e * v, de * v + e * d)
                    }
                }
            }
        }
    }

    #[inline]
    pub fn eval2(&self, p: [f64; 2]) -> [f64; 2] {
        match self.kind {
            DriftKind::Zero => [0.0, 0.0],
            DriftKind::Rotation => [-p[1], p[0]],
            _ => [f64::NAN, f64::NAN],
        }
    }

    /// `Db` with `jac[i][j] = d b_i / d x_j`.
    #[inline]
    pub fn jac2(&self, _p: [f64; 2]) -> [[f64; 2]; 2] {
        match self.kind {
            DriftKind::Zero => [[0.0, 0.0], [0.0, 0.0]],
            DriftKind::Rotation => [[0.0, -1.0], [1.0, 0.0]],
            _ => [[f64::NAN; 2]; 2],
        }
    }

    /// Samples `b` on a grid.
    pub fn sample(&self, grid: Grid1) -> Result<GridFunction> {
        GridFunction::from_fn(grid, "b", |x| self.eval1(x))
    }
}

impl fmt::Display for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DriftKind::Zero if self.dim == 2 => write!(f, "zero2"),
            DriftKind::Zero => write!(f, "zero"),
            DriftKind::Constant(c) => write!(f, "constant({c})"),
            DriftKind::Linear(a) if *a == -1.0 => write!(f, "ou"),
            DriftKind::Linear(a) => write!(f, "linear({a})"),
            DriftKind::Tanh(k) => write!(f, "tanh({k})"),
            DriftKind::Polynomial(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "polynomial({})", parts.join(","))
            }
            DriftKind::Holder { alpha, scale } if *scale == 1.0 => write!(f, "holder({alpha})"),
            DriftKind::Holder { alpha, scale } => write!(f, "holder({alpha},{scale})"),
            DriftKind::Rotation => write!(f, "rotation"),
            DriftKind::Mollified { base, kernel, .. } => write!(f, "mollified[{}]({base})", kernel.eps()),
        }
    }
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    #[inline]
    fn signum_or_zero(self) -> f64 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

/// `((rho_eps * b)(x), (rho_eps' * b)(x))` by Kronrod panels on `[-eps, eps]`.
///
/// Panels are split where `x - z` hits a kink of `b`; panels adjacent to a
/// kink use `z = z0 +- L u^2` so algebraic endpoint behaviour is smoothed out.
fn convolve_with_kernel(base: &DriftField, kernel: &MollifierKernel, x: f64) -> (f64, f64) {
    let eps = kernel.eps();
    let mut cuts: [f64; 4] = [-eps, 0.0, 0.0, eps];
    let mut ncut = 1;
    for &k in base.kinks() {
        let z = x - k;
        if z > -eps && z < eps {
            cuts[ncut] = z;
            ncut += 1;
        }
    }
    cuts[ncut] = eps;
    let kinked = ncut > 1;
    let mut acc = (0.0, 0.0);
    let mut add = |z: f64, w: f64| {
        let b = base.eval1(x - z);
        acc.0 += w * kernel.eval(z) * b;
        acc.1 += w * kernel.deriv(z) * b;
    };
    for p in 0..ncut {
        let (lo, hi) = (cuts[p], cuts[p + 1]);
        if !kinked {
            for (z, w) in quad::kronrod_nodes(lo, hi) {
                add(z, w);
            }
        } else if p == 0 {
            // kink at the right end
            let len = hi - lo;
            for (u, w) in quad::kronrod_nodes(0.0, 1.0) {
                add(hi - len * u * u, w * 2.0 * len * u);
            }
        } else {
            // kink at the left end
            let len = hi - lo;
            for (u, w) in quad::kronrod_nodes(0.0, 1.0) {
                add(lo + len * u * u, w * 2.0 * len * u);
            }
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    pub holds: bool,
    pub worst_ratio: f64,
    pub argmax: f64,
}

/// Checks `|b(x)| <= k (1 + |x|)` on the sample points.
pub fn verify_linear_growth(b: &DriftField, samples: &[f64], k: f64) -> Result<GrowthReport> {
    if samples.is_empty() {
        return Err(Error::Range {
            name: "samples",
            value: 0.0,
            reason: "need at least one sample point",
        });
    }
    let mut worst = (0.0, samples[0]);
    for &x in samples {
        let v = b.eval1(x);
        if !v.is_finite() {
            return Err(Error::Evaluation { point: vec![x] });
        }
        let ratio = v.abs() / (1.0 + x.abs());
        if ratio > worst.0 {
            worst = (ratio, x);
        }
    }
    Ok(GrowthReport {
        holds: worst.0 <= k,
        worst_ratio: worst.0,
        argmax: worst.1,
    })
}

/// 2-D variant of [`verify_linear_growth`] with Euclidean norms.
pub fn verify_linear_growth_2d(b: &DriftField, samples: &[[f64; 2]], k: f64) -> Result<(bool, f64, [f64; 2])> {
    if samples.is_empty() {
        return Err(Error::Range {
            name: "samples",
            value: 0.0,
            reason: "need at least one sample point",
        });
    }
    let mut worst = (0.0, samples[0]);
    for &p in samples {
        let v = b.eval2(p);
        if !v[0].is_finite() || !v[1].is_finite() {
            return Err(Error::Evaluation { point: p.to_vec() });
        }
        let ratio = v[0].hypot(v[1]) / (1.0 + p[0].hypot(p[1]));
        if ratio > worst.0 {
            worst = (ratio, p);
        }
    }
    Ok((worst.0 <= k, worst.0, worst.1))
}

/// Largest `|trace(Db)|` over the samples.
pub fn max_divergence_2d(b: &DriftField, samples: &[[f64; 2]]) -> f64 {
    samples
        .iter()
        .map(|&p| {
            let j = b.jac2(p);
            (j[0][0] + j[1][1]).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpsQuery {
    pub p: f64,
    pub q: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpsResult {
    pub value: f64,
    pub satisfied: bool,
}

/// `d/p + 2/q` and whether it is strictly below 1.
pub fn lps_exponent(qry: LpsQuery) -> Result<LpsResult> {
    for (name, v) in [("p", qry.p), ("q", qry.q)] {
        if !(v >= 2.0) || !v.is_finite() {
            return Err(Error::Range {
                name,
                value: v,
                reason: "integrability exponents must lie in [2, inf)",
            });
        }
    }
    let value = qry.dim as f64 / qry.p + 2.0 / qry.q;
    Ok(LpsResult {
        value,
        satisfied: value < 1.0,
    })
}

/// Discrete convolution with the renormalised sampled kernel; edge values
/// are continued as constants.
pub fn mollify(f: &GridFunction, kernel: &MollifierKernel) -> Result<GridFunction> {
    let w = kernel.weights(f.grid().h())?;
    let k = (w.len() / 2) as isize;
    let n = f.grid().len() as isize;
    let values = (0..n)
        .map(|j| {
            w.iter()
                .enumerate()
                .map(|(i, wi)| wi * f.at(j - (i as isize - k)))
                .sum()
        })
        .collect();
    Ok(GridFunction::from_parts(*f.grid(), values, format!("{}_eps", f.tag())))
}

/// Pointwise product with `eta_R`.
pub fn compose_cutoff(f: &GridFunction, cut: &CutoffSpec) -> Result<GridFunction> {
    let g: &Grid1 = f.grid();
    let need = 2.0 * cut.radius();
    if g.x_min() > -need || g.x_max() < need {
        return Err(Error::Domain {
            x_min: g.x_min(),
            x_max: g.x_max(),
            need,
        });
    }
    Ok(f.map(|x, v| cut.eval(x) * v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: f64, hi: f64, h: f64) -> Grid1 {
        Grid1::with_spacing(lo, hi, h).unwrap()
    }

    #[test]
    fn kernel_normalised_and_second_moment() {
        let (mass, _) = quad::integrate(MollifierKernel::unit, -1.0, 1.0, Default::default());
        assert!((mass - 1.0).abs() < 1e-14);
        let (m2, _) = quad::integrate(|z| z * z * MollifierKernel::unit(z), -1.0, 1.0, Default::default());
        assert!((m2 - MollifierKernel::M2).abs() < 1e-14);
        assert_eq!(MollifierKernel::unit(0.3), MollifierKernel::unit(-0.3));
        assert_eq!(MollifierKernel::unit(1.0), 0.0);
    }

    #[test]
    fn kernel_derivative_matches_finite_difference() {
        let h = 1e-6;
        for z in [-0.7, -0.2, 0.1, 0.55] {
            let fd = (MollifierKernel::unit(z + h) - MollifierKernel::unit(z - h)) / (2.0 * h);
            assert!((fd - MollifierKernel::unit_deriv(z)).abs() < 1e-7);
        }
    }

    #[test]
    fn growth_examples() {
        let xs: Vec<f64> = (0..=200).map(|i| -10.0 + 0.1 * i as f64).collect();
        let r = verify_linear_growth(&DriftField::zero(), &xs, 0.5).unwrap();
        assert!(r.holds);
        assert_eq!(r.worst_ratio, 0.0);

        let r = verify_linear_growth(&DriftField::linear(1.0), &xs, 1.0).unwrap();
        assert!(r.holds);
        assert!((r.worst_ratio - 10.0 / 11.0).abs() < 1e-15);
        assert_eq!(r.argmax.abs(), 10.0);
    }

    #[test]
    fn growth_fails_for_quadratic() {
        let b = DriftField::polynomial(vec![0.0, 0.0, 1.0]);
        let r = verify_linear_growth(&b, &[-1.0, 0.0, 2.0, 5.0], 1.0).unwrap();
        assert!(!r.holds);
        assert_eq!(r.argmax, 5.0);
        assert!((r.worst_ratio - 25.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn growth_rejects_empty_and_non_finite() {
        assert!(verify_linear_growth(&DriftField::zero(), &[], 1.0).is_err());
        let err = verify_linear_growth(&DriftField::rotation(), &[1.5], 1.0).unwrap_err();
        assert_eq!(err, Error::Evaluation { point: vec![1.5] });
    }

    #[test]
    fn lps_examples() {
        let r = lps_exponent(LpsQuery { p: 4.0, q: 8.0, dim: 1 }).unwrap();
        assert_eq!(r.value, 0.5);
        assert!(r.satisfied);
        let r = lps_exponent(LpsQuery { p: 2.0, q: 2.0, dim: 2 }).unwrap();
        assert_eq!(r.value, 2.0);
        assert!(!r.satisfied);
        let r = lps_exponent(LpsQuery { p: 1e9, q: 2.0, dim: 1 }).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8);
        assert!(!r.satisfied);
        assert!(lps_exponent(LpsQuery { p: 1.5, q: 4.0, dim: 1 }).is_err());
    }

    #[test]
    fn mollify_constants_linear_quadratic() {
        let g = grid(-2.0, 2.0, 0.01);
        let k = MollifierKernel::new(0.1).unwrap();
        let c = GridFunction::from_fn(g, "c", |_| 3.25).unwrap();
        let mc = mollify(&c, &k).unwrap();
        assert!(mc.values().iter().all(|v| (v - 3.25).abs() < 1e-14));

        let lin = GridFunction::from_fn(g, "x", |x| x).unwrap();
        let ml = mollify(&lin, &k).unwrap();
        let sq = GridFunction::from_fn(g, "x2", |x| x * x).unwrap();
        let ms = mollify(&sq, &k).unwrap();
        // Taylor oracle: rho*x^2 = x^2 + m2 eps^2, with the discrete m2 of the weights
        let w = k.weights(0.01).unwrap();
        let kk = (w.len() / 2) as f64;
        let m2_discrete: f64 = w
            .iter()
            .enumerate()
            .map(|(i, wi)| wi * ((i as f64 - kk) * 0.01).powi(2))
            .sum();
        assert!((m2_discrete - k.second_moment()).abs() < 1e-5);
        for j in 20..g.len() - 20 {
            let x = g.x(j);
            assert!((ml.values()[j] - x).abs() < 1e-13);
            assert!((ms.values()[j] - (x * x + m2_discrete)).abs() < 1e-13);
            assert!((ms.values()[j] - (x * x + k.second_moment())).abs() < 1e-5);
        }
    }

    #[test]
    fn mollify_requires_resolution() {
        let g = grid(-1.0, 1.0, 0.05);
        let f = GridFunction::zeros(g, "f");
        let err = mollify(&f, &MollifierKernel::new(0.1).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }));
    }

    #[test]
    fn mollifications_commute_in_interior() {
        let g = grid(-3.0, 3.0, 0.01);
        let f = GridFunction::from_fn(g, "f", |x| (3.0 * x).sin() + x.abs()).unwrap();
        let k1 = MollifierKernel::new(0.1).unwrap();
        let k2 = MollifierKernel::new(0.05).unwrap();
        let a = mollify(&mollify(&f, &k1).unwrap(), &k2).unwrap();
        let b = mollify(&mollify(&f, &k2).unwrap(), &k1).unwrap();
        for j in 30..g.len() - 30 {
            assert!((a.values()[j] - b.values()[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_commutes_with_mollification() {
        let g = grid(-3.0, 3.0, 0.005);
        let k = MollifierKernel::new(0.05).unwrap();
        let f = GridFunction::from_fn(g, "f", |x| (2.0 * x).sin()).unwrap();
        let a = mollify(&f, &k).unwrap().derivative();
        let b = mollify(&f.derivative(), &k).unwrap();
        for j in 20..g.len() - 20 {
            assert!((a.values()[j] - b.values()[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn cutoff_examples() {
        let g = grid(-3.0, 3.0, 0.01);
        let one = GridFunction::from_fn(g, "1", |_| 1.0).unwrap();
        let cut = CutoffSpec::new(1.0).unwrap();
        let out = compose_cutoff(&one, &cut).unwrap();
        for (j, v) in out.values().iter().enumerate() {
            let x = g.x(j);
            if x.abs() <= 1.0 {
                assert_eq!(*v, 1.0);
            }
            if x.abs() >= 2.0 {
                assert_eq!(*v, 0.0);
            }
            assert!((0.0..=1.0).contains(v));
        }
        let zero = GridFunction::zeros(g, "0");
        assert!(compose_cutoff(&zero, &cut).unwrap().values().iter().all(|v| *v == 0.0));

        let g8 = grid(-8.0, 8.0, 0.01);
        let lin = GridFunction::from_fn(g8, "x", |x| x).unwrap();
        let out = compose_cutoff(&lin, &CutoffSpec::new(4.0).unwrap()).unwrap();
        let j = ((3.0 + 8.0) / 0.01f64).round() as usize;
        assert!((0.0..=3.0).contains(&out.values()[j]));

        assert!(matches!(
            compose_cutoff(&one, &CutoffSpec::new(2.0).unwrap()),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn cutoff_derivatives_match_finite_differences() {
        let c = CutoffSpec::new(1.5).unwrap();
        let h = 1e-5;
        for x in [-2.7, -1.9, 1.6, 2.2, 2.9] {
            let (_, d1, d2) = c.eval_with_derivs(x);
            let fd1 = (c.eval(x + h) - c.eval(x - h)) / (2.0 * h);
            let fd2 = (c.eval(x + h) - 2.0 * c.eval(x) + c.eval(x - h)) / (h * h);
            assert!((d1 - fd1).abs() < 1e-7, "{x}: {d1} vs {fd1}");
            assert!((d2 - fd2).abs() < 1e-3, "{x}: {d2} vs {fd2}");
        }
    }

    #[test]
    fn mollified_drift_matches_grid_mollification() {
        let k = MollifierKernel::new(0.1).unwrap();
        for base in [DriftField::tanh(1.0), DriftField::holder_scaled(0.5, 1.0).unwrap()] {
            let g = grid(-2.0, 2.0, 1.0 / 2048.0);
            let sampled = mollify(&base.sample(g).unwrap(), &k).unwrap();
            let field = base.mollified(k, false).unwrap();
            for j in (200..g.len() - 200).step_by(37) {
                let x = g.x(j);
                assert!(
                    (field.eval1(x) - sampled.values()[j]).abs() < 2e-6,
                    "{base} at {x}"
                );
            }
        }
    }

    #[test]
    fn mollified_derivative_matches_finite_difference() {
        let k = MollifierKernel::new(0.05).unwrap();
        let f = DriftField::holder_scaled(0.5, 0.01).unwrap().mollified(k, true).unwrap();
        let h = 1e-6;
        for x in [-0.3, -0.04, 0.0, 0.01, 0.2, 1.5] {
            let fd = (f.eval1(x + h) - f.eval1(x - h)) / (2.0 * h);
            assert!((fd - f.deriv1(x)).abs() < 1e-6 * (1.0 + fd.abs()), "{x}: {fd} vs {}", f.deriv1(x));
        }
    }

    #[test]
    fn rotation_is_divergence_free() {
        let pts: Vec<[f64; 2]> = (0..25).map(|i| [i as f64 * 0.3 - 3.0, 1.0 - 0.2 * i as f64]).collect();
        assert_eq!(max_divergence_2d(&DriftField::rotation(), &pts), 0.0);
        let (holds, ratio, _) = verify_linear_growth_2d(&DriftField::rotation(), &pts, 1.0).unwrap();
        assert!(holds && ratio < 1.0);
    }

    #[test]
    fn parse_round_trips_names() {
        for s in ["zero", "ou", "rotation", "linear(2)", "tanh(0.01)", "holder(0.5)", "holder(0.5,0.01)", "polynomial(0,0,1)"] {
            let b = DriftField::parse(s).unwrap();
            assert_eq!(b.to_string(), s);
        }
        assert!(DriftField::parse("sin(1)").is_err());
        assert!(DriftField::parse("holder(1.5)").is_err());
    }
}
