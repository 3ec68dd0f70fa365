//! Wigner 3-j and 6-j symbols from the Racah closed-form sums.
//!
//! Public entry points take ordinary `f64` quantum numbers and reject anything
//! that is not a non-negative half-integer (for `j`) or a half-integer (for `m`).
//! Internally everything runs on doubled integers so parity checks are exact.

use crate::error::{Error, Result};

const MAX_FACTORIAL: usize = 170;

fn factorial(n: i32) -> f64 {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![1.0; MAX_FACTORIAL + 1];
        for i in 1..=MAX_FACTORIAL {
            t[i] = t[i - 1] * i as f64;
        }
        t
    });
    debug_assert!(n >= 0);
    table[n as usize]
}

fn sign(exponent: i32) -> f64 {
    if exponent.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Converts a half-integer to twice its value.
fn twice(value: f64, what: &str) -> Result<i32> {
    let doubled = 2.0 * value;
    if !doubled.is_finite() || (doubled - doubled.round()).abs() > 1e-9 {
        return Err(Error::AngularMomentum(format!("{what} = {value} is not a half-integer")));
    }
    let doubled = doubled.round();
    if doubled.abs() > (MAX_FACTORIAL / 2) as f64 {
        return Err(Error::AngularMomentum(format!("{what} = {value} is too large")));
    }
    Ok(doubled as i32)
}

fn twice_j(value: f64, what: &str) -> Result<i32> {
    let t = twice(value, what)?;
    if t < 0 {
        return Err(Error::AngularMomentum(format!("{what} = {value} is negative")));
    }
    Ok(t)
}

/// Triangle condition on doubled angular momenta, including integer perimeter.
fn triangle(a: i32, b: i32, c: i32) -> bool {
    c >= (a - b).abs() && c <= a + b && (a + b + c) % 2 == 0
}

/// Triangle coefficient Δ(abc) for doubled arguments that satisfy `triangle`.
fn delta(a: i32, b: i32, c: i32) -> f64 {
    factorial((a + b - c) / 2) * factorial((a - b + c) / 2) * factorial((-a + b + c) / 2)
        / factorial((a + b + c) / 2 + 1)
}

/// Wigner 3-j symbol `(j1 j2 j3; m1 m2 m3)`.
///
/// Selection-rule violations give 0; non-half-integer or negative `j` are errors,
/// as is `|m| > j`.
pub fn wigner3j(j1: f64, j2: f64, j3: f64, m1: f64, m2: f64, m3: f64) -> Result<f64> {
    let (tj1, tj2, tj3) = (twice_j(j1, "j1")?, twice_j(j2, "j2")?, twice_j(j3, "j3")?);
    let (tm1, tm2, tm3) = (twice(m1, "m1")?, twice(m2, "m2")?, twice(m3, "m3")?);
    for (tj, tm, name) in [(tj1, tm1, "m1"), (tj2, tm2, "m2"), (tj3, tm3, "m3")] {
        if tm.abs() > tj {
            return Err(Error::AngularMomentum(format!("|{name}| exceeds its j")));
        }
        if (tj - tm) % 2 != 0 {
            return Err(Error::AngularMomentum(format!("{name} and its j differ by a half-integer")));
        }
    }
    Ok(wigner3j_twice(tj1, tj2, tj3, tm1, tm2, tm3))
}

/// 3-j symbol on doubled arguments. Assumes `|m| <= j` and matching parity.
pub(crate) fn wigner3j_twice(tj1: i32, tj2: i32, tj3: i32, tm1: i32, tm2: i32, tm3: i32) -> f64 {
    if tm1 + tm2 + tm3 != 0 || !triangle(tj1, tj2, tj3) {
        return 0.0;
    }
    // Evaluate with m1 > 0 (or m1 = 0, m2 >= 0) so that (j; m) and (j; -m) agree to the last bit.
    if tm1 < 0 || (tm1 == 0 && tm2 < 0) {
        let phase = sign((tj1 + tj2 + tj3) / 2);
        return phase * racah_3j(tj1, tj2, tj3, -tm1, -tm2, -tm3);
    }
    racah_3j(tj1, tj2, tj3, tm1, tm2, tm3)
}

fn racah_3j(tj1: i32, tj2: i32, tj3: i32, tm1: i32, tm2: i32, tm3: i32) -> f64 {
    let k_min = 0.max((tj2 - tj3 - tm1) / 2).max((tj1 - tj3 + tm2) / 2);
    let k_max = ((tj1 + tj2 - tj3) / 2).min((tj1 - tm1) / 2).min((tj2 + tm2) / 2);
    if k_min > k_max {
        return 0.0;
    }
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let denom = factorial(k)
            * factorial((tj3 - tj2 + tm1) / 2 + k)
            * factorial((tj3 - tj1 - tm2) / 2 + k)
            * factorial((tj1 + tj2 - tj3) / 2 - k)
            * factorial((tj1 - tm1) / 2 - k)
            * factorial((tj2 + tm2) / 2 - k);
        sum += sign(k) / denom;
    }
    let prefactor = (delta(tj1, tj2, tj3)
        * factorial((tj1 + tm1) / 2)
        * factorial((tj1 - tm1) / 2)
        * factorial((tj2 + tm2) / 2)
        * factorial((tj2 - tm2) / 2)
        * factorial((tj3 + tm3) / 2)
        * factorial((tj3 - tm3) / 2))
        .sqrt();
    sign((tj1 - tj2 - tm3) / 2) * prefactor * sum
}

/// Wigner 6-j symbol `{j1 j2 j3; j4 j5 j6}`. Zero unless all four triads close.
pub fn wigner6j(j1: f64, j2: f64, j3: f64, j4: f64, j5: f64, j6: f64) -> Result<f64> {
    Ok(wigner6j_twice(
        twice_j(j1, "j1")?,
        twice_j(j2, "j2")?,
        twice_j(j3, "j3")?,
        twice_j(j4, "j4")?,
        twice_j(j5, "j5")?,
        twice_j(j6, "j6")?,
    ))
}

pub(crate) fn wigner6j_twice(a: i32, b: i32, c: i32, d: i32, e: i32, f: i32) -> f64 {
    if !(triangle(a, b, c) && triangle(a, e, f) && triangle(d, b, f) && triangle(d, e, c)) {
        return 0.0;
    }
    let a1 = (a + b + c) / 2;
    let a2 = (a + e + f) / 2;
    let a3 = (d + b + f) / 2;
    let a4 = (d + e + c) / 2;
    let b1 = (a + b + d + e) / 2;
    let b2 = (b + c + e + f) / 2;
    let b3 = (c + a + f + d) / 2;
    let t_min = a1.max(a2).max(a3).max(a4);
    let t_max = b1.min(b2).min(b3);
    let mut sum = 0.0;
    for t in t_min..=t_max {
        let denom = factorial(t - a1)
            * factorial(t - a2)
            * factorial(t - a3)
            * factorial(t - a4)
            * factorial(b1 - t)
            * factorial(b2 - t)
            * factorial(b3 - t);
        sum += sign(t) * factorial(t + 1) / denom;
    }
    (delta(a, b, c) * delta(a, e, f) * delta(d, b, f) * delta(d, e, c)).sqrt() * sum
}
