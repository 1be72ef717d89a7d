//! Independent oracles shared by the integration tests.
#![allow(dead_code)]
// Published tables, kept digit for digit.
#![allow(clippy::excessive_precision)]

// Gauss-Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]` to absolute
/// tolerance `tol` (bisection on the worst panel estimate).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (value, err) = gk15(f, a, b);
        // Rounding floors the error estimate near a few ulps of the panel.
        if err <= tol || err <= 1e-14 * value.abs() || depth >= 40 {
            return value;
        }
        let m = 0.5 * (a + b);
        recurse(f, a, m, 0.5 * tol, depth + 1) + recurse(f, m, b, 0.5 * tol, depth + 1)
    }
    recurse(&f, a, b, tol, 0)
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `∫ e^{−tθ}(tθ)^n/n! · θ^{α−1}e^{−βθ} dθ / ∫ θ^{α−1}e^{−βθ} dθ`, both
/// integrals numerical (no gamma-function evaluation anywhere).
pub fn gamma_mixture_pmf_by_quadrature(shape: f64, rate: f64, t: f64, n: u64) -> f64 {
    let k = (shape + n as f64).max(1.0);
    let upper = (k + 40.0 * k.sqrt() + 60.0) / rate;
    // Shift both integrands by the mode of the mixing density to keep them
    // O(1) where they matter.
    let mode = ((shape - 1.0) / rate).max(0.0);
    let log_shift = if mode > 0.0 {
        (shape - 1.0) * mode.ln() - rate * mode
    } else {
        0.0
    };
    let log_base = |theta: f64| {
        if theta == 0.0 {
            if shape == 1.0 {
                -log_shift
            } else {
                f64::NEG_INFINITY
            }
        } else {
            (shape - 1.0) * theta.ln() - rate * theta - log_shift
        }
    };
    let lnf = ln_factorial(n);
    let mixed = |theta: f64| {
        let lt = t * theta;
        let log_poisson = if n == 0 {
            -lt
        } else if lt == 0.0 {
            return 0.0;
        } else {
            -lt + n as f64 * lt.ln() - lnf
        };
        (log_base(theta) + log_poisson).exp()
    };
    let base = |theta: f64| log_base(theta).exp();
    let tol = 1e-15;
    let numerator = integrate(mixed, 0.0, upper, tol);
    let denominator = integrate(base, 0.0, upper, tol);
    numerator / denominator
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// The 50 `(α, β, t, n)` combinations used for the pmf oracle comparison.
pub fn pmf_grid() -> Vec<(f64, f64, f64, u64)> {
    let shapes = [1.0, 1.5, 2.0, 3.7, 8.0];
    let rates = [0.5, 1.0, 2.5];
    let times = [0.3, 1.0, 4.0];
    let counts = [0u64, 1, 2, 5, 12, 20, 33, 50];
    (0..50)
        .map(|i| {
            (
                shapes[i % 5],
                rates[(i / 5) % 3],
                times[(i / 15 + i) % 3],
                counts[(i * 3) % 8],
            )
        })
        .collect()
}
