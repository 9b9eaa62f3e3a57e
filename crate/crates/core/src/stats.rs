//! Paired t-test and the Student t distribution.
//!
//! The t CDF goes through the regularized incomplete beta function, evaluated
//! with a Lentz continued fraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub label: String,
    pub t_statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub significant: bool,
    /// Mean of `xs - ys`.
    pub mean_difference: f64,
    pub ci95: (f64, f64),
    /// Set when the differences had zero variance and the result was
    /// reported as non-significant instead of failing.
    #[serde(default)]
    pub degenerate: bool,
}

impl ComparisonResult {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub(crate) fn degenerate(label: impl Into<String>, n: usize, mean_difference: f64) -> Self {
        Self {
            label: label.into(),
            t_statistic: 0.0,
            p_value: 1.0,
            n,
            significant: false,
            mean_difference,
            ci95: (mean_difference, mean_difference),
            degenerate: true,
        }
    }
}

/// Two-tailed paired t-test on `xs - ys` with `n - 1` degrees of freedom.
///
/// Identical sequences give `t = 0, p = 1`. Differences that are constant
/// but nonzero have no finite statistic and return [`Error::Degenerate`].
pub fn paired_ttest(xs: &[f64], ys: &[f64]) -> Result<ComparisonResult> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidConfig(format!(
            "paired samples differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::EmptyInput(format!("paired t-test needs n >= 2, got {n}")));
    }
    let diffs: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidConfig("non-finite value in paired samples".into()));
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let df = nf - 1.0;
    if var == 0.0 {
        if mean == 0.0 {
            return Ok(ComparisonResult {
                label: String::new(),
                t_statistic: 0.0,
                p_value: 1.0,
                n,
                significant: false,
                mean_difference: 0.0,
                ci95: (0.0, 0.0),
                degenerate: false,
            });
        }
        return Err(Error::Degenerate(format!(
            "paired differences are constant ({mean}) with zero variance"
        )));
    }
    let se = (var / nf).sqrt();
    let t = mean / se;
    let p = student_t_two_tailed_p(t, df);
    let margin = student_t_quantile_two_tailed(ALPHA, df) * se;
    Ok(ComparisonResult {
        label: String::new(),
        t_statistic: t,
        p_value: p,
        n,
        significant: p < ALPHA,
        mean_difference: mean,
        ci95: (mean - margin, mean + margin),
        degenerate: false,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_tailed_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * student_t_two_tailed_p(t, df);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Positive `t` with `P(|T| >= t) = alpha`, by bisection on the tail probability.
pub fn student_t_quantile_two_tailed(alpha: f64, df: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while student_t_two_tailed_p(hi, df) > alpha {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_two_tailed_p(mid, df) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `I_x(a, b)`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
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
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
