//! Closed-form references for three solvable systems: the linear SDE with
//! additive noise, geometric Brownian motion, and a planar rotation driven by
//! additive noise. Each exposes the quantities the Monte Carlo pipeline is
//! validated against: means, variances, densities, and density maximizers.

use thiserror::Error;

/// Parameters of `dX = alpha X dt + beta dB`, started at `x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditiveLinearParams {
    pub alpha: f64,
    pub beta: f64,
    pub x0: f64,
}

/// Parameters of `dX = mu X dt + sigma X dB`, started at `x0` (nonzero; zero
/// is an equilibrium and carries no density).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmParams {
    pub mu: f64,
    pub sigma: f64,
    pub x0: f64,
}

/// Initial state of the planar rotation `dX = -Y dt + dB1`, `dY = X dt + dB2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation2dParams {
    pub x0: f64,
    pub y0: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("density requires t > 0, got {0}")]
    NonPositiveTime(f64),
    #[error("zero noise amplitude gives a degenerate (point-mass) density")]
    DegenerateVariance,
}

/// Mean of the additive-noise linear solution: `exp(alpha t) x0`.
pub fn ou_mean(p: &AdditiveLinearParams, t: f64) -> f64 {
    (p.alpha * t).exp() * p.x0
}

/// Variance of the additive-noise linear solution:
/// `beta^2 / (2 alpha) * (exp(2 alpha t) - 1)`, continued by its limit
/// `beta^2 t` at `alpha = 0` (the singularity is removable; `exp_m1` keeps
/// the formula accurate for tiny `alpha t`).
pub fn ou_variance(p: &AdditiveLinearParams, t: f64) -> f64 {
    if p.alpha == 0.0 {
        p.beta * p.beta * t
    } else {
        p.beta * p.beta / (2.0 * p.alpha) * (2.0 * p.alpha * t).exp_m1()
    }
}

/// Gaussian density of the additive-noise linear solution at time `t > 0`.
pub fn ou_density(p: &AdditiveLinearParams, t: f64, x: f64) -> Result<f64, OracleError> {
    if t <= 0.0 {
        return Err(OracleError::NonPositiveTime(t));
    }
    let var = ou_variance(p, t);
    if var <= 0.0 {
        return Err(OracleError::DegenerateVariance);
    }
    Ok(gaussian_pdf(x, ou_mean(p, t), var))
}

/// Maximizer of the solution density: for a Gaussian law this is the mean,
/// so the most probable path obeys the noise-free equation `x' = alpha x`.
/// Shares the formula with [`ou_mean`], and tests pin the exact equality.
pub fn ou_maximizer(p: &AdditiveLinearParams, t: f64) -> f64 {
    ou_mean(p, t)
}

/// Density of geometric Brownian motion at time `t > 0`.
///
/// The solution keeps the sign of `x0`, so the density is supported on one
/// half-line: it vanishes whenever `x` and `x0` have opposite signs, and at
/// `x = 0` by convention. On the support it is the lognormal-type density
/// `exp(-(log(x/x0) - (mu - sigma^2/2) t)^2 / (2 sigma^2 t)) / (|sigma x| sqrt(2 pi t))`.
pub fn gbm_solution_density(p: &GbmParams, t: f64, x: f64) -> Result<f64, OracleError> {
    if t <= 0.0 {
        return Err(OracleError::NonPositiveTime(t));
    }
    if p.sigma == 0.0 {
        return Err(OracleError::DegenerateVariance);
    }
    if x == 0.0 || x.signum() != p.x0.signum() || p.x0 == 0.0 {
        return Ok(0.0);
    }
    let s2t = p.sigma * p.sigma * t;
    let dev = (x / p.x0).ln() - (p.mu - 0.5 * p.sigma * p.sigma) * t;
    let norm = (p.sigma * x).abs() * (2.0 * std::f64::consts::PI * t).sqrt();
    Ok((-dev * dev / (2.0 * s2t)).exp() / norm)
}

/// Maximizer of the GBM density: `x0 exp((mu - 3/2 sigma^2) t)`. The mode sits
/// strictly below the mean `x0 exp(mu t)` for positive `x0` and noise.
pub fn gbm_maximizer(p: &GbmParams, t: f64) -> f64 {
    p.x0 * ((p.mu - 1.5 * p.sigma * p.sigma) * t).exp()
}

/// Most probable state of the planar rotation at time `t`: additive noise
/// leaves the marginals Gaussian around the deterministic flow, so the
/// per-coordinate mode is the rotation of the initial state itself.
pub fn rotation2d_most_probable(p: &Rotation2dParams, t: f64) -> [f64; 2] {
    let (sin, cos) = t.sin_cos();
    [p.x0 * cos - p.y0 * sin, p.x0 * sin + p.y0 * cos]
}

fn gaussian_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let dev = x - mean;
    (-dev * dev / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const UNIT: AdditiveLinearParams = AdditiveLinearParams {
        alpha: 1.0,
        beta: 1.0,
        x0: 1.0,
    };

    #[test]
    fn mean_grows_exponentially() {
        assert_relative_eq!(
            ou_mean(&UNIT, 1.0),
            std::f64::consts::E,
            max_relative = 1e-15
        );
        assert_eq!(ou_mean(&UNIT, 0.0), 1.0);
        let still = AdditiveLinearParams {
            alpha: 0.0,
            beta: 1.0,
            x0: 5.0,
        };
        assert_eq!(ou_mean(&still, 7.0), 5.0);
    }

    #[test]
    fn variance_matches_closed_form() {
        let expected = (2f64.exp() - 1.0) / 2.0; // (e^2 - 1) / 2 = 3.1945...
        assert_relative_eq!(ou_variance(&UNIT, 1.0), expected, max_relative = 1e-14);
        assert_eq!(ou_variance(&UNIT, 0.0), 0.0);
    }

    #[test]
    fn variance_alpha_zero_limit() {
        let zero = AdditiveLinearParams {
            alpha: 0.0,
            beta: 2.0,
            x0: 0.0,
        };
        assert_eq!(ou_variance(&zero, 3.0), 12.0);
        let tiny = AdditiveLinearParams {
            alpha: 1e-8,
            ..zero
        };
        assert!((ou_variance(&tiny, 3.0) - 12.0).abs() < 1e-6);
    }

    #[test]
    fn density_peak_value_and_symmetry() {
        let var = ou_variance(&UNIT, 1.0);
        let mean = ou_mean(&UNIT, 1.0);
        let peak = ou_density(&UNIT, 1.0, mean).unwrap();
        assert_relative_eq!(
            peak,
            1.0 / (2.0 * std::f64::consts::PI * var).sqrt(),
            max_relative = 1e-14
        );
        for delta in [0.1, 0.5, 1.0, 2.5] {
            let hi = ou_density(&UNIT, 1.0, mean + delta).unwrap();
            let lo = ou_density(&UNIT, 1.0, mean - delta).unwrap();
            assert_relative_eq!(hi, lo, max_relative = 1e-12);
        }
    }

    #[test]
    fn density_rejects_bad_time_and_zero_noise() {
        assert_eq!(
            ou_density(&UNIT, 0.0, 1.0),
            Err(OracleError::NonPositiveTime(0.0))
        );
        assert_eq!(
            ou_density(&UNIT, -1.0, 1.0),
            Err(OracleError::NonPositiveTime(-1.0))
        );
        let silent = AdditiveLinearParams { beta: 0.0, ..UNIT };
        assert_eq!(
            ou_density(&silent, 1.0, 1.0),
            Err(OracleError::DegenerateVariance)
        );
    }

    #[test]
    fn maximizer_is_exactly_the_mean() {
        for t in [0.0, 0.3, 1.0, 4.7] {
            assert_eq!(
                ou_maximizer(&UNIT, t).to_bits(),
                ou_mean(&UNIT, t).to_bits()
            );
        }
        let origin = AdditiveLinearParams { x0: 0.0, ..UNIT };
        assert_eq!(ou_maximizer(&origin, 3.0), 0.0);
    }

    const GBM_UNIT: GbmParams = GbmParams {
        mu: 1.0,
        sigma: 1.0,
        x0: 1.0,
    };

    #[test]
    fn gbm_density_at_the_start_point() {
        // At x = x0 = 1, t = 1: exp(-(0 - 1/2)^2 / 2) / sqrt(2 pi).
        let v = gbm_solution_density(&GBM_UNIT, 1.0, 1.0).unwrap();
        let expected = (-0.125f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(v, expected, max_relative = 1e-14);
        assert!((v - 0.35207).abs() < 5e-6);
    }

    #[test]
    fn gbm_density_vanishes_off_support() {
        assert_eq!(gbm_solution_density(&GBM_UNIT, 1.0, -1.0), Ok(0.0));
        assert_eq!(gbm_solution_density(&GBM_UNIT, 1.0, 0.0), Ok(0.0));
        let negative = GbmParams {
            x0: -1.0,
            ..GBM_UNIT
        };
        assert_eq!(gbm_solution_density(&negative, 1.0, 2.0), Ok(0.0));
        assert!(gbm_solution_density(&negative, 1.0, -2.0).unwrap() > 0.0);
    }

    #[test]
    fn gbm_maximizer_value_and_deterministic_limit() {
        assert_relative_eq!(
            gbm_maximizer(&GBM_UNIT, 1.0),
            (-0.5f64).exp(),
            max_relative = 1e-15
        );
        let noiseless = GbmParams {
            sigma: 0.0,
            ..GBM_UNIT
        };
        assert_relative_eq!(
            gbm_maximizer(&noiseless, 2.0),
            2f64.exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn gbm_mode_sits_below_the_mean() {
        for t in [0.1, 0.5, 1.0, 2.0] {
            let mode = gbm_maximizer(&GBM_UNIT, t);
            let mean = GBM_UNIT.x0 * (GBM_UNIT.mu * t).exp();
            assert!(mode < mean);
        }
    }

    #[test]
    fn rotation_examples() {
        let p = Rotation2dParams { x0: 1.0, y0: 1.0 };
        assert_eq!(rotation2d_most_probable(&p, 0.0), [1.0, 1.0]);
        let quarter = rotation2d_most_probable(&p, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(quarter[0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(quarter[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rotation_preserves_norm() {
        let p = Rotation2dParams { x0: 0.8, y0: -1.7 };
        let r0 = (p.x0 * p.x0 + p.y0 * p.y0).sqrt();
        for t in [0.0, 0.5, 1.0, 2.0, std::f64::consts::TAU, 100.0] {
            let [x, y] = rotation2d_most_probable(&p, t);
            assert_relative_eq!((x * x + y * y).sqrt(), r0, max_relative = 1e-12);
        }
    }
}
