//! One-way analysis of variance with an F-distribution tail computed from
//! the regularized incomplete beta function.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult<T> {
    pub f: T,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: T,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnovaError {
    #[error("need at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {index} has {len} observations; at least two are required")]
    GroupTooSmall { index: usize, len: usize },
}

pub fn anova_one_way<T: Real>(groups: &[Vec<T>]) -> Result<AnovaResult<T>, AnovaError> {
    if groups.len() < 2 {
        return Err(AnovaError::TooFewGroups(groups.len()));
    }
    if let Some((index, g)) = groups.iter().enumerate().find(|(_, g)| g.len() < 2) {
        return Err(AnovaError::GroupTooSmall {
            index,
            len: g.len(),
        });
    }
    let n_obs: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().fold(T::zero(), |a, &x| a + x) / T::from_usize_lossy(n_obs);

    let mut ssb = T::zero();
    let mut ssw = T::zero();
    for g in groups {
        let n = T::from_usize_lossy(g.len());
        let mean = g.iter().fold(T::zero(), |a, &x| a + x) / n;
        ssb = ssb + n * (mean - grand) * (mean - grand);
        ssw = g.iter().fold(ssw, |a, &x| a + (x - mean) * (x - mean));
    }
    let df_between = groups.len() - 1;
    let df_within = n_obs - groups.len();
    let (f, p_value) = if ssw == T::zero() {
        if ssb == T::zero() {
            (T::zero(), T::one())
        } else {
            (T::infinity(), T::zero())
        }
    } else {
        let f = (ssb / T::from_usize_lossy(df_between)) / (ssw / T::from_usize_lossy(df_within));
        (
            f,
            f_survival(
                f,
                T::from_usize_lossy(df_between),
                T::from_usize_lossy(df_within),
            ),
        )
    };
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p_value,
    })
}

/// `P(X > f)` for `X ~ F(d1, d2)`.
pub fn f_survival<T: Real>(f: T, d1: T, d2: T) -> T {
    if f.is_nan() {
        return T::nan();
    }
    if f <= T::zero() {
        return T::one();
    }
    if f.is_infinite() {
        return T::zero();
    }
    let two = T::lit(2.0);
    let x = d2 / (d2 + d1 * f);
    regularized_incomplete_beta(x, d2 / two, d1 / two)
}

/// `P(X <= f)` for `X ~ F(d1, d2)`.
pub fn f_cdf<T: Real>(f: T, d1: T, d2: T) -> T {
    T::one() - f_survival(f, d1, d2)
}

/// `I_x(a, b)` for `a, b > 0`, `x` in `[0, 1]`.
pub fn regularized_incomplete_beta<T: Real>(x: T, a: T, b: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x >= T::one() {
        return T::one();
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (T::one() - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fast below the mean; use the
    // symmetry I_x(a, b) = 1 - I_{1-x}(b, a) above it.
    if x < (a + T::one()) / (a + b + T::lit(2.0)) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        T::one() - front * beta_continued_fraction(T::one() - x, b, a) / b
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction<T: Real>(x: T, a: T, b: T) -> T {
    let tiny = T::min_positive_value() / T::epsilon();
    let eps = T::epsilon();
    let one = T::one();
    let qab = a + b;
    let qap = a + one;
    let qam = a - one;

    let mut c = one;
    let mut d = one - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = one / d;
    let mut h = d;
    for m in 1..=300 {
        let m = T::from_usize_lossy(m);
        let m2 = m + m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        h = h * d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        let delta = d * c;
        h = h * delta;
        if (delta - one).abs() <= eps {
            break;
        }
    }
    h
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: Real>(x: T) -> T {
    const COEFFS: [f64; 9] = [
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
    if x < T::lit(0.5) {
        // reflection
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(COEFFS[0]);
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::from_usize_lossy(i));
    }
    let t = x + T::lit(7.5);
    T::lit(0.5) * (T::lit(2.0) * T::PI()).ln() + (x + T::lit(0.5)) * t.ln() - t + acc.ln()
}
