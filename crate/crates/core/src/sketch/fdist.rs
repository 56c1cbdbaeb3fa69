//! F(K, K) distribution of squared effectivities and goodness-of-fit helpers.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const MAX_ITER: usize = 200;
const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;

/// Continued fraction for I_x(a, b), modified Lentz.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
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
    for m in 1..=MAX_ITER {
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

/// Regularized incomplete beta function I_x(a, b).
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!("beta parameters must be positive, got ({a}, {b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("incomplete beta argument {x} outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The fraction converges fast for x < (a+1)/(a+b+2); reflect otherwise.
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(x, a, b) / a)
    } else {
        Ok(1.0 - front * beta_cf(1.0 - x, b, a) / b)
    }
}

/// CDF of the F(d1, d2) distribution.
pub fn f_cdf_general(x: f64, d1: f64, d2: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::Domain(format!("F argument {x} must be nonnegative")));
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    reg_inc_beta(d1 * x / (d1 * x + d2), d1 / 2.0, d2 / 2.0)
}

/// CDF of F(K, K) at x.
pub fn f_cdf(x: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("F distribution needs K >= 1".into()));
    }
    f_cdf_general(x, k as f64, k as f64)
}

/// Density of F(K, K).
pub fn f_pdf(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let h = k as f64 / 2.0;
    let ln_b = 2.0 * ln_gamma(h) - ln_gamma(2.0 * h);
    ((h - 1.0) * x.ln() - 2.0 * h * (1.0 + x).ln() - ln_b).exp()
}

/// Density of √X for X ~ F(K, K).
pub fn sqrt_f_pdf(y: f64, k: usize) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    2.0 * y * f_pdf(y * y, k)
}

/// 1 − #P·(P{η² < w⁻²} + P{η² > w²}) under the F(K, K) law.
pub fn f_effectivity_bound(w: f64, k: usize, cardinality: f64) -> Result<f64> {
    if !(w > 1.0) {
        return Err(Error::Domain(format!("effectivity factor must exceed 1, got {w}")));
    }
    if cardinality == 0.0 {
        return Ok(1.0);
    }
    let h = k as f64 / 2.0;
    let w2 = w * w;
    let lower = reg_inc_beta(1.0 / (1.0 + w2), h, h)?;
    let upper = 1.0 - reg_inc_beta(w2 / (w2 + 1.0), h, h)?;
    Ok(1.0 - cardinality * (lower + upper))
}

/// Kolmogorov–Smirnov statistic sup |F_n − F| of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic p-value of a KS statistic `d` from `n` samples.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = sign * (-2.0 * j * j * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{ChiSquared, Distribution};

    #[test]
    fn symmetry_points() {
        for k in [1, 2, 3, 6, 20, 101] {
            assert!((f_cdf(1.0, k).unwrap() - 0.5).abs() < 1e-12, "K={k}");
        }
        for a in [0.3, 1.0, 2.5, 10.0, 80.0] {
            assert!((reg_inc_beta(0.5, a, a).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_statrs_beta() {
        for &(x, a, b) in &[(0.1, 0.5, 0.5), (0.3, 2.0, 5.0), (0.9, 10.0, 3.0), (0.5, 1.0, 1.0), (0.77, 30.0, 30.0)] {
            let ours = reg_inc_beta(x, a, b).unwrap();
            let theirs = statrs::function::beta::beta_reg(a, b, x);
            assert!((ours - theirs).abs() < 1e-12, "({x},{a},{b}) {ours} vs {theirs}");
        }
        // I_x(1, 1) = x and I_x(a, 1) = x^a.
        assert!((reg_inc_beta(0.37, 1.0, 1.0).unwrap() - 0.37).abs() < 1e-14);
        assert!((reg_inc_beta(0.6, 3.0, 1.0).unwrap() - 0.216).abs() < 1e-13);
    }

    #[test]
    fn f_cdf_monte_carlo() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let chi = ChiSquared::new(10.0).unwrap();
        let n = 1_000_000;
        let hits = (0..n).filter(|_| chi.sample(&mut rng) / chi.sample(&mut rng) <= 2.0).count();
        let p = hits as f64 / n as f64;
        let cdf = f_cdf(2.0, 10).unwrap();
        let se = (cdf * (1.0 - cdf) / n as f64).sqrt();
        assert!((p - cdf).abs() < 3.0 * se, "{p} vs {cdf}");
    }

    #[test]
    fn domain_errors() {
        assert!(reg_inc_beta(1.5, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 0.0, 1.0).is_err());
        assert!(f_cdf(-1.0, 3).is_err());
        assert!(f_effectivity_bound(1.0, 3, 1.0).is_err());
        assert_eq!(f_effectivity_bound(2.0, 20, 0.0).unwrap(), 1.0);
        assert!(f_effectivity_bound(1e3, 20, 1.0).unwrap() >= 0.999);
    }

    #[test]
    fn bound_is_monotone_in_w() {
        let mut last = f64::NEG_INFINITY;
        for w in [1.5, 2.0, 3.0, 5.0, 10.0] {
            let b = f_effectivity_bound(w, 20, 500.0).unwrap();
            assert!(b > last);
            last = b;
        }
    }

    #[test]
    fn pdf_integrates_to_cdf() {
        let k = 6;
        let (a, b) = (0.2, 3.0);
        let n = 20_000;
        let h = (b - a) / n as f64;
        let integral: f64 = (0..n).map(|i| f_pdf(a + (i as f64 + 0.5) * h, k) * h).sum();
        let diff = f_cdf(b, k).unwrap() - f_cdf(a, k).unwrap();
        assert!((integral - diff).abs() < 1e-7);
    }

    #[test]
    fn ks_accepts_own_distribution() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let chi = ChiSquared::new(6.0).unwrap();
        let xs: Vec<f64> = (0..5000).map(|_| chi.sample(&mut rng) / chi.sample(&mut rng)).collect();
        let d = ks_statistic(&xs, |x| f_cdf(x, 6).unwrap());
        assert!(ks_pvalue(d, xs.len()) > 0.01);
        let shifted: Vec<f64> = xs.iter().map(|x| x * 1.3).collect();
        let d2 = ks_statistic(&shifted, |x| f_cdf(x, 6).unwrap());
        assert!(ks_pvalue(d2, xs.len()) < 0.01);
    }
}
