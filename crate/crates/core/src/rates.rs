//! Closed-form contraction factors and convex ergodic bounds.

use crate::error::{Error, Result};

/// Constants of a rate statement and the contraction factor they imply.
///
/// Fields that do not enter a particular statement are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConstants {
    pub mu: f64,
    pub l: Option<f64>,
    pub alpha: f64,
    pub m: Option<f64>,
    pub p: Option<f64>,
    pub n: Option<f64>,
    pub big_m: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub rho: Option<f64>,
    pub q: f64,
    pub valid: bool,
    /// First violated precondition when `valid` is false.
    pub violation: Option<&'static str>,
}

impl RateConstants {
    fn blank(mu: f64, alpha: f64) -> Self {
        Self {
            mu,
            l: None,
            alpha,
            m: None,
            p: None,
            n: None,
            big_m: None,
            a: None,
            b: None,
            c: None,
            rho: None,
            q: f64::NAN,
            valid: false,
            violation: None,
        }
    }

    /// `q^k` times `v0`: the envelope of the Lyapunov quantity after `k` steps.
    pub fn envelope(&self, v0: f64, k: u64) -> f64 {
        v0 * libm::pow(self.q, k as f64)
    }
}

fn positive(x: f64, what: &'static str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(what))
    }
}

fn check_mu_l(mu: f64, l: f64) -> Result<()> {
    positive(mu, "mu must be positive")?;
    positive(l, "L must be positive")?;
    if mu > l {
        return Err(Error::InvalidParameter("mu must not exceed L"));
    }
    Ok(())
}

/// Largest stepsize admitted by the SVRP rate: `1/(2(2L − μ))` (exclusive).
pub fn svrp_alpha_limit(mu: f64, l: f64) -> f64 {
    1.0 / (2.0 * (2.0 * l - mu))
}

/// Inner-loop threshold `1/(μα(1 − 2α(2L − μ)))`; `m` must exceed it.
pub fn svrp_m_threshold(mu: f64, l: f64, alpha: f64) -> f64 {
    1.0 / (mu * alpha * (1.0 - 2.0 * alpha * (2.0 * l - mu)))
}

/// Stage contraction of SVRP:
/// `q = 1/(μα(1 − 2Lα)m) + 2α(L − μ)/(1 − 2Lα)`.
pub fn svrp_rate_q(mu: f64, l: f64, alpha: f64, m: u64) -> Result<RateConstants> {
    check_mu_l(mu, l)?;
    positive(alpha, "stepsize alpha must be positive")?;
    let mf = m as f64;
    let mut r = RateConstants::blank(mu, alpha);
    r.l = Some(l);
    r.m = Some(mf);
    r.a = Some(2.0 * l);
    r.b = Some(2.0);
    r.c = Some(0.0);
    r.rho = Some(0.0);
    let denom = 1.0 - 2.0 * l * alpha;
    r.q = 1.0 / (mu * alpha * denom * mf) + 2.0 * alpha * (l - mu) / denom;
    r.violation = if !(alpha < svrp_alpha_limit(mu, l)) {
        Some("alpha < 1/(2(2L - mu))")
    } else if !(mf > svrp_m_threshold(mu, l, alpha)) {
        Some("m > 1/(mu alpha (1 - 2 alpha (2L - mu)))")
    } else if !(r.q > 0.0 && r.q < 1.0) {
        Some("q in (0, 1)")
    } else {
        None
    };
    r.valid = r.violation.is_none();
    Ok(r)
}

/// `q = max{1 − αμ(1 − α(A + MC)), 1 + B/M − ρ}`, valid when `M > B/ρ` and
/// `α < 1/(A + MC)`.
pub fn generic_rate_q(mu: f64, alpha: f64, a: f64, b: f64, c: f64, rho: f64, big_m: f64) -> Result<RateConstants> {
    positive(mu, "mu must be positive")?;
    positive(alpha, "stepsize alpha must be positive")?;
    positive(big_m, "M must be positive")?;
    if !(a >= 0.0 && b >= 0.0 && c >= 0.0) || !(a + b + c).is_finite() {
        return Err(Error::InvalidParameter("A, B, C must be non-negative"));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter("rho must lie in [0, 1]"));
    }
    let mut r = RateConstants::blank(mu, alpha);
    r.a = Some(a);
    r.b = Some(b);
    r.c = Some(c);
    r.rho = Some(rho);
    r.big_m = Some(big_m);
    let load = a + big_m * c;
    let first = 1.0 - alpha * mu * (1.0 - alpha * load);
    let second = 1.0 + b / big_m - rho;
    r.q = first.max(second);
    r.violation = if !(rho > 0.0 && big_m > b / rho) {
        Some("M > B/rho")
    } else if !(alpha * load < 1.0) {
        Some("alpha < 1/(A + MC)")
    } else if !(r.q > 0.0 && r.q < 1.0) {
        Some("q in (0, 1)")
    } else {
        None
    };
    r.valid = r.violation.is_none();
    Ok(r)
}

/// L-SVRP: `A = 2L, B = 2, C = pL, ρ = p`.
pub fn lsvrp_rate_q(mu: f64, l: f64, alpha: f64, p: f64, big_m: f64) -> Result<RateConstants> {
    check_mu_l(mu, l)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter("refresh probability p must lie in (0, 1]"));
    }
    let mut r = generic_rate_q(mu, alpha, 2.0 * l, 2.0, p * l, p, big_m)?;
    r.l = Some(l);
    r.p = Some(p);
    Ok(r)
}

/// SAPA: `A = 2L, B = 2, C = L/n, ρ = 1/n`.
pub fn sapa_rate_q(mu: f64, l: f64, alpha: f64, n: usize, big_m: f64) -> Result<RateConstants> {
    check_mu_l(mu, l)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive"));
    }
    let nf = n as f64;
    let mut r = generic_rate_q(mu, alpha, 2.0 * l, 2.0, l / nf, 1.0 / nf, big_m)?;
    r.l = Some(l);
    r.n = Some(nf);
    Ok(r)
}

/// Default Lyapunov weight `M = 2B/ρ`.
pub fn default_big_m(b: f64, rho: f64) -> f64 {
    2.0 * b / rho
}

/// Ergodic bound for the uniform average of `k` iterates of the unified
/// scheme with constant stepsize:
/// `(dist₀² + α²Mσ₀²) / (2αk(1 − α(A + MC)))`.
pub fn unified_ergodic_bound(dist0_sq: f64, sigma0_sq: f64, alpha: f64, a: f64, c: f64, big_m: f64, k: u64) -> f64 {
    let margin = 1.0 - alpha * (a + big_m * c);
    (dist0_sq + alpha * alpha * big_m * sigma0_sq) / (2.0 * alpha * k as f64 * margin)
}

/// Ergodic bound of SPPA for the `α`-weighted average:
/// `dist₀²/Σα_t + 2σ²Σα_t²/Σα_t`.
pub fn sppa_ergodic_bound(dist0_sq: f64, sigma_sq: f64, sum_alpha: f64, sum_alpha_sq: f64) -> f64 {
    dist0_sq / sum_alpha + 2.0 * sigma_sq * sum_alpha_sq / sum_alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svrp_reference_value() {
        let r = svrp_rate_q(1.0, 2.0, 0.1, 100).unwrap();
        assert!((r.q - 0.5).abs() < 1e-14, "{}", r.q);
        assert!(r.valid);
        assert!((svrp_m_threshold(1.0, 2.0, 0.1) - 25.0).abs() < 1e-12);
        assert!(!svrp_rate_q(1.0, 2.0, 0.1, 25).unwrap().valid);
        assert!(svrp_rate_q(1.0, 2.0, 0.1, 26).unwrap().valid);
    }

    #[test]
    fn svrp_alpha_boundary_is_invalid() {
        let r = svrp_rate_q(1.0, 2.0, svrp_alpha_limit(1.0, 2.0), 1_000_000).unwrap();
        assert!(!r.valid);
        assert_eq!(r.violation, Some("alpha < 1/(2(2L - mu))"));
    }

    #[test]
    fn svrp_large_m_limit() {
        let r = svrp_rate_q(1.0, 2.0, 0.1, 1_000_000_000).unwrap();
        let limit = 2.0 * 0.1 * (2.0 - 1.0) / (1.0 - 2.0 * 2.0 * 0.1);
        assert!((r.q - limit).abs() < 1e-6);
    }

    #[test]
    fn generic_reference_value() {
        let r = generic_rate_q(1.0, 0.1, 2.0, 2.0, 0.5, 0.5, 8.0).unwrap();
        assert!((r.q - 0.96).abs() < 1e-14);
        assert!(r.valid);
    }

    #[test]
    fn generic_small_alpha_limit() {
        let mut prev = 0.0;
        for alpha in [1e-4, 1e-5, 1e-6, 1e-8] {
            let r = generic_rate_q(1.0, alpha, 2.0, 2.0, 1.0, 1.0, 1e3).unwrap();
            assert!(r.q < 1.0 && r.q > prev);
            prev = r.q;
        }
        assert!(1.0 - prev < 1e-7);
    }

    #[test]
    fn sapa_m_equal_two_n_is_invalid() {
        let n = 50;
        let r = sapa_rate_q(0.02, 1.0, 1e-3, n, 2.0 * n as f64).unwrap();
        assert!(!r.valid);
        assert_eq!(r.violation, Some("M > B/rho"));
        assert!(sapa_rate_q(0.02, 1.0, 1e-3, n, 2.0 * n as f64 + 1.0).unwrap().valid);
    }

    #[test]
    fn lsvrp_matches_generic() {
        let (mu, l, alpha, p, m) = (0.1, 2.0, 0.01, 0.2, 20.0);
        let a = lsvrp_rate_q(mu, l, alpha, p, m).unwrap();
        let b = generic_rate_q(mu, alpha, 2.0 * l, 2.0, p * l, p, m).unwrap();
        assert_eq!(a.q, b.q);
        assert_eq!(a.valid, b.valid);
    }

    #[test]
    fn domain_errors() {
        assert!(svrp_rate_q(2.0, 1.0, 0.1, 10).is_err());
        assert!(svrp_rate_q(0.0, 1.0, 0.1, 10).is_err());
        assert!(lsvrp_rate_q(0.1, 1.0, 0.1, 0.0, 10.0).is_err());
        assert!(generic_rate_q(1.0, 0.1, 1.0, 1.0, 1.0, 1.5, 8.0).is_err());
    }

    #[test]
    fn valid_implies_q_in_unit_interval() {
        for &mu in &[0.01, 0.1, 1.0] {
            for &alpha in &[1e-4, 1e-3, 1e-2, 0.05] {
                for &m in &[1u64, 10, 100, 10_000] {
                    let r = svrp_rate_q(mu, 1.0, alpha, m).unwrap();
                    if r.valid {
                        assert!(r.q > 0.0 && r.q < 1.0);
                    }
                }
            }
        }
    }
}
