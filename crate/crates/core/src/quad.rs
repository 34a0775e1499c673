//! One-dimensional and tensor-product quadrature.

use std::sync::OnceLock;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
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
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = -x;
        xs[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

const GL_ORDER: usize = 8;

fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Tensor Gauss-Legendre rule over the box `∏ [lo_i, lo_i + side]`.
pub fn tensor_gauss<F: Fn(&[f64]) -> f64>(f: &F, lo: &[f64], side: f64) -> f64 {
    let (xs, ws) = gl8();
    let d = lo.len();
    let half = side / 2.0;
    let mut idx = vec![0usize; d];
    let mut pt = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..d {
            pt[k] = lo[k] + half * (xs[idx[k]] + 1.0);
            w *= ws[idx[k]];
        }
        total += w * f(&pt);
        let mut k = 0;
        loop {
            if k == d {
                return total * half.powi(d as i32);
            }
            idx[k] += 1;
            if idx[k] < GL_ORDER {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

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
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and its difference from the embedded 7-point Gauss rule.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadFailure {
    pub a: f64,
    pub b: f64,
    pub estimate: f64,
}

/// Adaptive bisection on the Gauss-Kronrod pair.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64, QuadFailure> {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64, QuadFailure> {
        let (v, e) = gk15(f, a, b);
        if !v.is_finite() {
            return Err(QuadFailure { a, b, estimate: v });
        }
        if e <= tol.max(1e-300) {
            return Ok(v);
        }
        if depth == 0 {
            return if e <= 1e-6 * v.abs() { Ok(v) } else { Err(QuadFailure { a, b, estimate: v }) };
        }
        let m = 0.5 * (a + b);
        Ok(rec(f, a, m, tol / 2.0, depth - 1)? + rec(f, m, b, tol / 2.0, depth - 1)?)
    }
    let (v0, _) = gk15(f, a, b);
    let tol = tol * v0.abs().max(1e-300);
    rec(f, a, b, tol, 40)
}

/// Result of integrating over `(a, b]` when the integrand may be singular at `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellSum {
    pub value: f64,
    /// Number of dyadic shells integrated explicitly.
    pub shells: u32,
    /// Whether a geometric tail was appended.
    pub extrapolated: bool,
}

/// Integrates `f` over `(a, b]` shell by shell, `[a + h 2^{-k-1}, a + h 2^{-k}]`.
///
/// With `truncate_at = Some(eps)` the shells stop at distance `eps` from `a`
/// and no tail is added (finite section of a divergent integral). Otherwise
/// shells continue until the geometric tail estimate is negligible.
pub fn shells_toward_left<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    truncate_at: Option<f64>,
) -> Result<ShellSum, QuadFailure> {
    let h = b - a;
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    let mut prev_rho: Option<f64> = None;
    let max_shells = 1000u32;
    for k in 0..max_shells {
        let hi = h * 0.5f64.powi(k as i32);
        let lo = hi * 0.5;
        if a + lo == a + hi || lo < f64::MIN_POSITIVE * 1e20 {
            return Err(QuadFailure { a, b, estimate: total });
        }
        if let Some(eps) = truncate_at {
            if hi <= eps {
                return Ok(ShellSum { value: total, shells: k, extrapolated: false });
            }
            let lo = lo.max(eps);
            total += adaptive(f, a + lo, a + hi, rel_tol)?;
            continue;
        }
        let s = adaptive(f, a + lo, a + hi, rel_tol)?;
        total += s;
        if let Some(p) = prev {
            if p > 0.0 && s >= 0.0 {
                let rho = s / p;
                if rho < 0.999 && k >= 3 {
                    let tail = s * rho / (1.0 - rho);
                    // A negligible tail, or shells that have settled into an
                    // exact geometric progression (pure power behaviour).
                    let settled = prev_rho.is_some_and(|r: f64| (r - rho).abs() <= 1e-9 * rho);
                    if tail <= rel_tol * total.abs() || settled {
                        return Ok(ShellSum { value: total + tail, shells: k + 1, extrapolated: true });
                    }
                }
                prev_rho = Some(rho);
            }
        }
        if s == 0.0 && k >= 3 {
            return Ok(ShellSum { value: total, shells: k + 1, extrapolated: false });
        }
        prev = Some(s);
    }
    Err(QuadFailure { a, b, estimate: total })
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in it {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}
