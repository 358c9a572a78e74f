//! Scalar special functions used by the Dirichlet expectations and the
//! evidence bound.

use crate::error::{Error, Result};

/// Digamma function ψ(x) for x > 0.
///
/// Upward recurrence ψ(x) = ψ(x+1) − 1/x until x ≥ 6, then the asymptotic
/// series through the x⁻¹² term. Absolute accuracy is better than 1e-10 over
/// (1e-4, 1e4); the first omitted term at x = 6 is below 2e-12.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::invalid(format!("digamma requires x > 0, got {x}")));
    }
    Ok(digamma_unchecked(x))
}

#[inline]
pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < 6.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
    acc + x.ln() - 0.5 * inv - tail
}

/// Natural log of the gamma function for x > 0.
///
/// Same scheme as [`digamma`]: recurrence ln Γ(x) = ln Γ(x+1) − ln x until
/// x ≥ 10, then the Stirling series.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::invalid(format!("ln_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub(crate) fn ln_gamma_unchecked(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let tail = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0))));
    acc + (x - 0.5) * x.ln() - x + HALF_LN_TWO_PI + tail
}

/// E_q[log θ] for θ ~ Dirichlet(param): ψ(param_k) − ψ(Σ param).
pub fn dirichlet_log_expectation(param: &[f64]) -> Result<Vec<f64>> {
    let mut total = 0.0;
    for &p in param {
        if !(p > 0.0) {
            return Err(Error::invalid(format!(
                "dirichlet parameter entries must be positive, got {p}"
            )));
        }
        total += p;
    }
    let psi_total = digamma_unchecked(total);
    let out: Vec<f64> = param.iter().map(|&p| digamma_unchecked(p) - psi_total).collect();
    // Jensen: sum of exp(E[log theta_k]) never exceeds 1.
    debug_assert!(out.iter().map(|&v| v.exp()).sum::<f64>() <= 1.0 + 1e-9);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn digamma_at_one_is_negative_euler_mascheroni() {
        assert_abs_diff_eq!(digamma(1.0).unwrap(), -EULER_MASCHERONI, epsilon = 1e-10);
    }

    #[test]
    fn digamma_recurrence_identity() {
        // psi(x+1) = psi(x) + 1/x
        assert_abs_diff_eq!(digamma(2.0).unwrap() - digamma(1.0).unwrap(), 1.0, epsilon = 1e-12);
        for x in [0.3, 1.7, 4.9, 55.0] {
            assert_abs_diff_eq!(
                digamma(x + 1.0).unwrap(),
                digamma(x).unwrap() + 1.0 / x,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn digamma_large_argument_expansion() {
        // psi(1000) = ln(1000) - 1/2000 - 1/(12e6) - ...
        assert_abs_diff_eq!(
            digamma(1000.0).unwrap(),
            1000.0_f64.ln() - 1.0 / 2000.0,
            epsilon = 1e-7
        );
    }

    #[test]
    fn digamma_rejects_nonpositive() {
        assert!(digamma(0.0).is_err());
        assert!(digamma(-1.5).is_err());
        assert!(digamma(f64::NAN).is_err());
    }

    #[test]
    fn ln_gamma_known_values() {
        assert_abs_diff_eq!(ln_gamma(1.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(2.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(6.0).unwrap(), 120.0_f64.ln(), epsilon = 1e-11);
        assert_abs_diff_eq!(
            ln_gamma(0.5).unwrap(),
            0.5 * std::f64::consts::PI.ln(),
            epsilon = 1e-11
        );
    }

    #[test]
    fn dirichlet_log_expectation_symmetric_pair() {
        // param=(1,1): each entry psi(1) - psi(2) = -1 exactly by recurrence
        let e = dirichlet_log_expectation(&[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(e[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[0].exp(), 0.36788, epsilon = 1e-5);
    }

    #[test]
    fn dirichlet_log_expectation_symmetry() {
        for c in [0.1, 1.0, 7.3] {
            let e = dirichlet_log_expectation(&[c; 5]).unwrap();
            for k in 1..5 {
                assert_eq!(e[0], e[k]);
            }
        }
    }

    #[test]
    fn dirichlet_log_expectation_two_one() {
        // psi(3) = psi(2) + 1/2 = psi(1) + 3/2, so entries are (-1/2, -3/2)
        let e = dirichlet_log_expectation(&[2.0, 1.0]).unwrap();
        assert_abs_diff_eq!(e[0], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1], -1.5, epsilon = 1e-12);
    }

    #[test]
    fn dirichlet_log_expectation_rejects_nonpositive() {
        assert!(dirichlet_log_expectation(&[1.0, 0.0]).is_err());
    }
}
