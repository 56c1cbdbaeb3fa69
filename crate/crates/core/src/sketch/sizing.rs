use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizingMode {
    /// Union bound over #M vectors: K ≥ (ln #M + ln δ⁻¹) / ln(w/√e).
    Absolute,
    /// Relative errors over #P points: K ≥ (2 ln(2#P) + 2 ln δ⁻¹) / ln(w/e),
    /// with 2#P replaced by 2·m_max·#P when m_max is given.
    Relative,
}

/// Smallest number of Gaussian samples K for which the effectivity lies in
/// [1/w, w] with probability at least 1 − δ. Never less than 3.
///
/// `ln_cardinality` is the natural log of #M (absolute) or #P (relative) so that
/// huge grids need not be materialized.
pub fn sample_size_ln(delta: f64, w: f64, ln_cardinality: f64, mode: SizingMode, m_max: Option<usize>) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("failure probability {delta} not in (0, 1)")));
    }
    if !(ln_cardinality >= 0.0) {
        return Err(Error::Domain("cardinality must be at least 1".into()));
    }
    let half_e = 0.5f64.exp();
    let k = match mode {
        SizingMode::Absolute => {
            if !(w > half_e) {
                return Err(Error::Domain(format!("absolute mode needs w > sqrt(e), got {w}")));
            }
            (ln_cardinality - delta.ln()) / (w / half_e).ln()
        }
        SizingMode::Relative => {
            if !(w > std::f64::consts::E) {
                return Err(Error::Domain(format!("relative mode needs w > e, got {w}")));
            }
            let ln_card = 2f64.ln() + m_max.map_or(0.0, |m| (m.max(1) as f64).ln()) + ln_cardinality;
            (2.0 * ln_card - 2.0 * delta.ln()) / (w / std::f64::consts::E).ln()
        }
    };
    // Guard against 59.99999999 style rounding of exact integers.
    let k = (k - 1e-9).ceil();
    Ok((k.max(3.0)) as usize)
}

pub fn sample_size(delta: f64, w: f64, cardinality: f64, mode: SizingMode, m_max: Option<usize>) -> Result<usize> {
    if !(cardinality >= 1.0) {
        return Err(Error::Domain(format!("cardinality {cardinality} must be at least 1")));
    }
    sample_size_ln(delta, w, cardinality.ln(), mode, m_max)
}

/// (√e / w)^K, the bound on P{Q ∉ [K/w², K w²]} for Q ~ χ²(K).
pub fn chi2_tail_bound(w: f64, k: usize) -> Result<f64> {
    let half_e = 0.5f64.exp();
    if !(w > half_e) {
        return Err(Error::Domain(format!("tail bound needs w > sqrt(e), got {w}")));
    }
    if k < 3 {
        return Err(Error::Domain(format!("tail bound needs K >= 3, got {k}")));
    }
    Ok((half_e / w).powi(k as i32))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimal K from the published table, rows δ × #M, columns w ∈ {2, 4, 10}.
    pub(crate) const TABLE: [(f64, f64, [usize; 3]); 8] = [
        (1e-2, 1.0, [24, 6, 3]),
        (1e-2, 1e3, [60, 13, 7]),
        (1e-2, 1e6, [96, 21, 11]),
        (1e-2, 1e9, [132, 29, 15]),
        (1e-4, 1.0, [48, 11, 6]),
        (1e-4, 1e3, [84, 19, 9]),
        (1e-4, 1e6, [120, 26, 13]),
        (1e-4, 1e9, [155, 34, 17]),
    ];

    #[test]
    fn reproduces_published_table() {
        for (delta, card, ks) in TABLE {
            for (w, k) in [2.0, 4.0, 10.0].into_iter().zip(ks) {
                assert_eq!(sample_size(delta, w, card, SizingMode::Absolute, None).unwrap(), k, "δ={delta} #M={card} w={w}");
            }
        }
    }

    #[test]
    fn relative_mode() {
        assert_eq!(sample_size(1e-2, 10.0, 500.0, SizingMode::Relative, None).unwrap(), 18);
        let with_m = sample_size(1e-2, 10.0, 500.0, SizingMode::Relative, Some(20)).unwrap();
        let direct = ((2.0 * (2.0 * 20.0 * 500.0f64).ln() + 2.0 * 100f64.ln()) / (10.0 / std::f64::consts::E).ln()).ceil() as usize;
        assert_eq!(with_m, direct);
        assert!(sample_size(1e-2, 2.5, 500.0, SizingMode::Relative, None).is_err());
        assert!(sample_size(1e-2, 1.5, 500.0, SizingMode::Absolute, None).is_err());
        assert!(sample_size(0.0, 4.0, 500.0, SizingMode::Absolute, None).is_err());
    }

    #[test]
    fn tail_bound_values() {
        let b = chi2_tail_bound(2.0, 48).unwrap();
        assert!((b - (0.5f64.exp() / 2.0).powi(48)).abs() < 1e-20);
        assert!(b < 1e-4 && 1.0 - b > 0.9998);
        let at_threshold = chi2_tail_bound(0.5f64.exp() * (1.0 + 1e-12), 3).unwrap();
        assert!((at_threshold - 1.0).abs() < 1e-10);
        let b4 = chi2_tail_bound(4.0, 11).unwrap();
        assert!((b4 - 5.9e-5).abs() < 0.1e-5);
        assert!(chi2_tail_bound(1.0, 10).is_err());
        assert!(chi2_tail_bound(2.0, 2).is_err());
    }
}
