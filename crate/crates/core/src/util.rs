//! Small numeric helpers shared across modules.

/// Binomial coefficient as a float; exact while the value fits in a `u128`.
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after the multiplication.
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i as u128 + 1),
            None => return ln_binomial(n, k).exp(),
        }
    }
    acc as f64
}

pub(crate) fn ln_binomial(n: usize, k: usize) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Recover `num / den` with `den <= max_den` when `x` is that fraction up to
/// floating-point noise. Continued-fraction convergents are tried in order.
pub(crate) fn rationalize(x: f64, max_den: i64) -> Option<(i64, i64)> {
    if !x.is_finite() || x.abs() > 1e9 {
        return None;
    }
    let tol = 1e-12 * x.abs().max(1.0);
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            return None;
        }
        (h0, h1) = (h1, h2);
        (k0, k1) = (k1, k2);
        if ((h1 as f64) / (k1 as f64) - x).abs() <= tol {
            return Some((h1 as i64, k1 as i64));
        }
        let frac = r - a;
        if frac.abs() < 1e-15 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

pub(crate) fn check_probability_vector(probs: &[f64], what: &str) -> Result<(), String> {
    if probs.iter().any(|v| !v.is_finite()) {
        return Err(format!("{what} has non-finite entries"));
    }
    if let Some(v) = probs.iter().find(|&&v| v < 0.0) {
        return Err(format!("{what} has negative entry {v}"));
    }
    Ok(())
}
