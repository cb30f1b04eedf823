//! Reference values used to verify the solvers, chiefly the Mittag–Leffler function on the
//! negative real axis and the exact single-mode solutions built from it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cq::validate_alpha;
use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of `Γ(z)` for `z > 0`.
pub fn ln_gamma(z: f64) -> f64 {
    if z < 0.5 {
        // reflection keeps the Lanczos sum in its accurate range
        return (PI / (PI * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut sum = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + sum.ln()
}

/// `Γ(z)` for real `z` away from the poles.
pub fn gamma(z: f64) -> f64 {
    if z < 0.5 {
        PI / ((PI * z).sin() * gamma(1.0 - z))
    } else {
        let z = z - 1.0;
        let mut sum = LANCZOS[0];
        for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
            sum += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * sum
    }
}

/// `1/Γ(z)`, exactly zero at the poles `z = 0, -1, -2, ...`.
pub fn rgamma(z: f64) -> f64 {
    if z <= 0.0 && z == z.round() {
        0.0
    } else if z < 0.5 {
        (PI * z).sin() * gamma(1.0 - z) / PI
    } else {
        1.0 / gamma(z)
    }
}

/// Scaled complementary error function `e^{x²} erfc(x)` for `x ≥ 0`.
pub fn erfcx(x: f64) -> f64 {
    assert!(x >= 0.0, "erfcx is only provided for nonnegative arguments");
    if x < 2.0 {
        // Maclaurin series of erf
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        let mut n = 0.0;
        while term.abs() > 1e-17 * sum.abs() {
            n += 1.0;
            term *= -x2 / n;
            sum += term / (2.0 * n + 1.0);
        }
        (x2).exp() * (1.0 - 2.0 / PI.sqrt() * sum)
    } else {
        // continued fraction, evaluated backwards
        let mut f = x;
        for k in (1..=600).rev() {
            f = x + 0.5 * k as f64 / f;
        }
        1.0 / (PI.sqrt() * f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MlMethod {
    Series,
    Asymptotic,
    /// Laplace-type integral representation, used where neither expansion is accurate.
    Integral,
    SpecialCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlEval {
    pub alpha: f64,
    /// Evaluates `E_α(-x)`.
    pub x: f64,
    pub value: f64,
    pub method: MlMethod,
}

/// Largest `x^{1/α}` for which the power series is summed directly.
const SERIES_LIMIT: f64 = 8.0;
/// Required size of the smallest asymptotic term before that branch is trusted.
const ASYMPTOTIC_TOL: f64 = 1e-14;

/// `E_α(-x)` for `0 < α ≤ 1`, `x ≥ 0`, to absolute accuracy well below `1e-8`.
pub fn mittag_leffler_neg(alpha: f64, x: f64) -> Result<f64> {
    Ok(mittag_leffler_eval(alpha, x)?.value)
}

pub fn mittag_leffler_eval(alpha: f64, x: f64) -> Result<MlEval> {
    validate_alpha(alpha)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidConfig(format!("Mittag-Leffler argument must be finite and nonnegative, got {x}")));
    }
    let (value, method) = if alpha == 1.0 {
        ((-x).exp(), MlMethod::SpecialCase)
    } else if x == 0.0 {
        (1.0, MlMethod::SpecialCase)
    } else if x.powf(1.0 / alpha) <= SERIES_LIMIT {
        (ml_series(alpha, x), MlMethod::Series)
    } else if let Some(v) = ml_asymptotic(alpha, x) {
        (v, MlMethod::Asymptotic)
    } else {
        (ml_integral(alpha, x), MlMethod::Integral)
    };
    Ok(MlEval { alpha, x, value, method })
}

/// Power series `Σ (-x)^k / Γ(αk + 1)` with compensated summation.
pub fn ml_series(alpha: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let lnx = x.ln();
    let mut sum = 1.0;
    let mut comp = 0.0;
    for k in 1..10_000 {
        let kf = k as f64;
        let magnitude = (kf * lnx - ln_gamma(alpha * kf + 1.0)).exp();
        let term = if k % 2 == 0 { magnitude } else { -magnitude };
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if magnitude < 1e-17 && alpha * kf > x {
            break;
        }
    }
    sum
}

/// Asymptotic expansion `-Σ_{k≥1} (-x)^{-k} / Γ(1 - αk)`, truncated at its smallest term.
///
/// Returns `None` when the smallest term exceeds the accuracy target.
pub fn ml_asymptotic(alpha: f64, x: f64) -> Option<f64> {
    let lnx = x.ln();
    let mut sum = 0.0;
    let mut inv_pow = 1.0;
    let mut envelope_prev = f64::INFINITY;
    for k in 1..1000 {
        let kf = k as f64;
        // |1/Γ(1-αk)| ≤ Γ(αk)/π bounds the oscillating coefficients
        let envelope = (ln_gamma(alpha * kf) - kf * lnx).exp() / PI;
        if envelope > envelope_prev {
            return (envelope_prev <= ASYMPTOTIC_TOL).then_some(sum);
        }
        envelope_prev = envelope;
        inv_pow /= -x;
        sum -= inv_pow * rgamma(1.0 - alpha * kf);
        if envelope < 1e-17 {
            return Some(sum);
        }
    }
    None
}

/// `E_α(-x) = sin(απ)/(απ) ∫_0^∞ exp(-x^{1/α} u^{1/α}) / (u² + 2u cos(απ) + 1) du`, for `0 < α < 1`.
pub fn ml_integral(alpha: f64, x: f64) -> f64 {
    let t = x.powf(1.0 / alpha);
    let c = (alpha * PI).cos();
    let integrand = |u: f64| (-t * u.powf(1.0 / alpha)).exp() / (u * u + 2.0 * u * c + 1.0);
    // beyond u_max the exponential factor is below e^{-45}
    let u_max = (45.0 / t).powf(alpha);
    let integral = adaptive_gauss_kronrod(&integrand, 0.0, u_max, 1e-14, 40);
    (alpha * PI).sin() / (alpha * PI) * integral
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_639,
    0.949_107_912_342_758_525,
    0.864_864_423_359_769_073,
    0.741_531_185_599_394_440,
    0.586_087_235_467_691_130,
    0.405_845_151_377_397_167,
    0.207_784_955_007_898_468,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_553,
    0.104_790_010_322_250_184,
    0.140_653_259_715_525_919,
    0.169_004_726_639_267_903,
    0.190_350_578_064_785_410,
    0.204_432_940_075_298_892,
    0.209_482_141_084_727_828,
];
const GK_WEIGHTS_G: [f64; 4] =
    [0.129_484_966_168_869_693, 0.279_705_391_489_276_668, 0.381_830_050_505_118_945, 0.417_959_183_673_469_388];

fn gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, (&node, &wk)) in GK_NODES.iter().zip(&GK_WEIGHTS_K).enumerate() {
        if node == 0.0 {
            let v = f(mid);
            kronrod += wk * v;
            gauss += GK_WEIGHTS_G[3] * v;
        } else {
            let v = f(mid - half * node) + f(mid + half * node);
            kronrod += wk * v;
            if i % 2 == 1 {
                gauss += GK_WEIGHTS_G[i / 2] * v;
            }
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Bisects until the Kronrod error estimate on every piece is below `density * width`.
fn adaptive_gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64, density: f64, depth: usize) -> f64 {
    let (value, err) = gauss_kronrod(f, a, b);
    if err <= density * (b - a) || depth == 0 {
        return value;
    }
    let mid = 0.5 * (a + b);
    adaptive_gauss_kronrod(f, a, mid, density, depth - 1) + adaptive_gauss_kronrod(f, mid, b, density, depth - 1)
}

/// Exact amplitude `E_α(-π²(k²+l²) t^α)` of the mode `sin(kπx) sin(lπy)` for `∂_t^α u - Δu = 0`.
pub fn exact_single_mode(alpha: f64, k: u32, l: u32, t: f64) -> Result<f64> {
    if k == 0 || l == 0 {
        return Err(Error::InvalidConfig("mode indices must be at least 1".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidConfig(format!("time must be nonnegative, got {t}")));
    }
    let lambda = mode_eigenvalue(k, l);
    mittag_leffler_neg(alpha, lambda * t.powf(alpha))
}

/// Dirichlet eigenvalue `π²(k²+l²)` of `-Δ` on the unit square.
pub fn mode_eigenvalue(k: u32, l: u32) -> f64 {
    PI * PI * f64::from(k * k + l * l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForms {
    /// `‖xy(1-x)(1-y)‖_{L²(Ω)}`
    pub case_a_l2_norm: f64,
    /// Area of the quarter disk `x² + y² ≤ 1` inside the unit square.
    pub quarter_disk_area: f64,
    pub reference_triangle_area: f64,
}

pub fn closed_form_norms() -> ClosedForms {
    ClosedForms { case_a_l2_norm: 1.0 / 30.0, quarter_disk_area: PI / 4.0, reference_triangle_area: 0.5 }
}

/// `∫ x^i y^j` over the reference triangle with vertices `(0,0)`, `(1,0)`, `(0,1)`.
pub fn reference_moment(i: u32, j: u32) -> f64 {
    let fact = |n: u32| -> f64 { (1..=n).map(f64::from).product() };
    fact(i) * fact(j) / fact(i + j + 2)
}
