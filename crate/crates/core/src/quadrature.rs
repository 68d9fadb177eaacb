//! Adaptive quadrature for smooth complex integrands.
//!
//! Two routines live here: a globally adaptive Gauss–Kronrod (7/15) rule for
//! plain integrals, and a nested Gauss–Legendre scheme that returns both
//! G = ∫ₐᵇ g and the running-area term I = Im ∫ₐᵇ (∫ₐᵗ g)* g(t) dt.
//! Neither routine should be handed an interval containing a discontinuity.

use std::sync::OnceLock;

use num_complex::Complex64;

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Gauss weights for the odd-indexed Kronrod nodes (plus the centre).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

struct Piece {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    abs: f64,
}

fn kronrod_piece<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Piece {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = fc.norm() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        kronrod += (f1 + f2) * WGK[j];
        abs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    Piece {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).norm(),
        abs: abs * half.abs(),
    }
}

/// Integrates `f` over [a, b] until the estimated absolute error is below
/// `rel_tol · ∫|f|`.
pub fn adaptive_gauss_kronrod<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, rel_tol: f64) -> QuadResult {
    if a == b {
        return QuadResult { value: Complex64::new(0.0, 0.0), error: 0.0, evaluations: 0, converged: true };
    }
    let mut pieces = vec![kronrod_piece(&f, a, b)];
    let mut evaluations = 15;
    loop {
        let value: Complex64 = pieces.iter().map(|p| p.value).sum();
        let error: f64 = pieces.iter().map(|p| p.error).sum();
        let abs: f64 = pieces.iter().map(|p| p.abs).sum();
        let tol = rel_tol * abs.max(f64::MIN_POSITIVE);
        if error <= tol || pieces.len() >= MAX_INTERVALS {
            return QuadResult { value, error, evaluations, converged: error <= tol };
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        pieces.push(kronrod_piece(&f, p.a, mid));
        pieces.push(kronrod_piece(&f, mid, p.b));
        evaluations += 30;
    }
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pm) = (p1, p0);
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

const AREA_NODES: usize = 10;

fn area_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(AREA_NODES))
}

/// Displacement increment and running-area term over one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathIntegral {
    /// G = ∫ₐᵇ g(t) dt.
    pub increment: Complex64,
    /// I = Im ∫ₐᵇ (∫ₐᵗ g)* g(t) dt.
    pub area: f64,
}

impl PathIntegral {
    pub const ZERO: PathIntegral = PathIntegral { increment: Complex64 { re: 0.0, im: 0.0 }, area: 0.0 };

    /// Joins consecutive intervals: the later one sees the earlier increment
    /// as its starting offset.
    pub fn then(self, later: PathIntegral) -> PathIntegral {
        PathIntegral {
            increment: self.increment + later.increment,
            area: self.area + later.area + (self.increment.conj() * later.increment).im,
        }
    }
}

fn path_leaf<F: Fn(f64) -> Complex64>(g: &F, a: f64, b: f64) -> PathIntegral {
    let (x, w) = area_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut increment = Complex64::new(0.0, 0.0);
    let mut area = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        let t = mid + half * xi;
        let gt = g(t);
        increment += gt * (wi * half);
        // inner integral ∫ₐᵗ g by the same rule mapped to [a, t]
        let ih = 0.5 * (t - a);
        let im = 0.5 * (t + a);
        let inner: Complex64 = x.iter().zip(w).map(|(xj, wj)| g(im + ih * xj) * wj).sum::<Complex64>() * ih;
        area += wi * half * (inner.conj() * gt).im;
    }
    PathIntegral { increment, area }
}

fn path_recurse<F: Fn(f64) -> Complex64>(
    g: &F,
    a: f64,
    b: f64,
    whole: PathIntegral,
    tol_inc: f64,
    tol_area: f64,
    depth: usize,
) -> PathIntegral {
    let mid = 0.5 * (a + b);
    let left = path_leaf(g, a, mid);
    let right = path_leaf(g, mid, b);
    let joined = left.then(right);
    let ok = (joined.increment - whole.increment).norm() <= tol_inc
        && (joined.area - whole.area).abs() <= tol_area;
    if ok || depth >= 40 {
        return joined;
    }
    let l = path_recurse(g, a, mid, left, 0.5 * tol_inc, 0.5 * tol_area, depth + 1);
    let r = path_recurse(g, mid, b, right, 0.5 * tol_inc, 0.5 * tol_area, depth + 1);
    l.then(r)
}

/// Adaptive evaluation of [`PathIntegral`] for a smooth `g` with |g| ≲ `scale`.
/// Tolerances are `rel_tol·scale·(b−a)` on G and `rel_tol·(scale·(b−a))²` on I.
pub fn path_integral<F: Fn(f64) -> Complex64>(g: F, a: f64, b: f64, scale: f64, rel_tol: f64) -> PathIntegral {
    if a == b {
        return PathIntegral::ZERO;
    }
    let len = (b - a).abs() * scale.max(f64::MIN_POSITIVE);
    let whole = path_leaf(&g, a, b);
    path_recurse(&g, a, b, whole, rel_tol * len, rel_tol * len * len, 0)
}
