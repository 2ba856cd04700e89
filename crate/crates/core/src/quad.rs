//! Gauss–Kronrod (7, 15) quadrature: a fixed panel rule and a globally
//! adaptive driver.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod nodes and weights mapped to `[a, b]`.
pub(crate) fn kronrod_nodes(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    (0..15).map(move |i| {
        let (k, s) = if i < 7 { (i, -1.0) } else if i == 7 { (7, 0.0) } else { (14 - i, 1.0) };
        (c + s * r * XGK[k], r * WGK[k])
    })
}

/// One GK15 panel: (Kronrod estimate, |Kronrod - Gauss|).
pub(crate) fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let dx = r * XGK[k];
        let pair = f(c - dx) + f(c + dx);
        kron += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    (kron * r, ((kron - gauss) * r).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adaptive {
    /// Relative error target on the whole integral.
    pub rel_tol: f64,
    /// Number of equal panels the interval starts with.
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self {
            rel_tol: 1e-14,
            initial_panels: 8,
            max_panels: 20_000,
        }
    }
}

/// Globally adaptive GK15: repeatedly bisects the panel with the largest
/// error estimate until the summed estimate meets the tolerance.
pub(crate) fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, opts: Adaptive) -> (f64, f64) {
    let n0 = opts.initial_panels.max(1);
    let w = (b - a) / n0 as f64;
    let mut panels: Vec<(f64, f64, f64, f64)> = (0..n0)
        .map(|i| {
            let lo = a + i as f64 * w;
            let hi = if i + 1 == n0 { b } else { lo + w };
            let (v, e) = gk15(&f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= opts.rel_tol * total.abs() || panels.len() >= opts.max_panels {
            return (total, err);
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}
