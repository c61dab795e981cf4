//! Speedup factor of EDF-VD for IMC task sets as a function of two
//! utilization ratios:
//!
//! - `alpha = U_HI^LO / U_HI^HI` (how much HI tasks grow at the switch),
//! - `lambda = U_LO^HI / U_LO^LO` (how much LO service survives it).
//!
//! `s_threshold` is the largest per-mode load `S(alpha, lambda)` that a
//! clairvoyant scheduler may carry while the EDF-VD test is still guaranteed
//! to pass; the speedup factor is its reciprocal. The remaining functions
//! expose the machinery behind `S`: a piecewise function of the LO load `b`
//! minimized at `b0`, and the two roots of the quadratic that yields `b0`.
//!
//! Everything here is `f64`; no verdict depends on these numbers.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioPair {
    pub alpha: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SpeedupError {
    #[error("alpha must lie in (0, 1] and lambda in [0, 1], got alpha={alpha}, lambda={lambda}")]
    OutOfDomain { alpha: f64, lambda: f64 },
    #[error("the piecewise load function needs alpha < 1 and lambda < 1, got alpha={alpha}, lambda={lambda}")]
    Degenerate { alpha: f64, lambda: f64 },
    #[error("LO load b must lie in (0, 1], got {0}")]
    LoadOutOfRange(f64),
    #[error("grid step must lie in (0, 0.01], got {0}")]
    BadStep(f64),
}

impl RatioPair {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self, SpeedupError> {
        if !(alpha > 0.0 && alpha <= 1.0 && (0.0..=1.0).contains(&lambda)) {
            return Err(SpeedupError::OutOfDomain { alpha, lambda });
        }
        Ok(RatioPair { alpha, lambda })
    }

    /// Either ratio at 1 collapses the problem to plain EDF.
    pub fn is_corner(&self) -> bool {
        self.alpha == 1.0 || self.lambda == 1.0
    }

    fn interior(&self) -> Result<(f64, f64), SpeedupError> {
        if self.is_corner() {
            Err(SpeedupError::Degenerate {
                alpha: self.alpha,
                lambda: self.lambda,
            })
        } else {
            Ok((self.alpha, self.lambda))
        }
    }
}

impl fmt::Display for RatioPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(alpha={}, lambda={})", self.alpha, self.lambda)
    }
}

/// `2(1-a)(al - al^2 - a + 1) / [(1-al)((2-al-a) + (l-1)sqrt(4a-3a^2))]`.
pub fn speedup_factor(r: RatioPair) -> f64 {
    if r.is_corner() {
        return 1.0;
    }
    let (a, l) = (r.alpha, r.lambda);
    let numer = 2.0 * (1.0 - a) * (a * l - a * l * l - a + 1.0);
    let denom = (1.0 - a * l) * ((2.0 - a * l - a) + (l - 1.0) * (4.0 * a - 3.0 * a * a).sqrt());
    numer / denom
}

/// `S(alpha, lambda)`, evaluated from its own closed form.
pub fn s_threshold(r: RatioPair) -> f64 {
    if r.is_corner() {
        return 1.0;
    }
    let (a, l) = (r.alpha, r.lambda);
    let numer = (1.0 - a * l) * ((2.0 - a * l - a) + (l - 1.0) * (4.0 * a - 3.0 * a * a).sqrt());
    let denom = 2.0 * (1.0 - a) * (a * l - a * l * l - a + 1.0);
    numer / denom
}

/// The two roots of
/// `(1 - a + al - al^2) b^2 + (al + a - 2) b + (1 - a) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadRoots {
    /// The root inside `[0, 1]`; the optimal LO load `b0`.
    pub in_range: f64,
    /// The root above 1, outside the admissible loads.
    pub rejected: f64,
}

pub fn roots_b0(r: RatioPair) -> Result<LoadRoots, SpeedupError> {
    let (a, l) = r.interior()?;
    let lead = 2.0 * (-a * l * l + a * l - a + 1.0);
    let mid = 2.0 - a * l - a;
    let disc = (1.0 - l) * (4.0 * a - 3.0 * a * a).sqrt();
    Ok(LoadRoots {
        in_range: (mid - disc) / lead,
        rejected: (mid + disc) / lead,
    })
}

/// The optimum `(b0, c0, s0)` of the load-minimization problem:
/// `c0 = b0 (1 - lambda) / (1 - alpha)` and `s0 = b0 + alpha c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalLoad {
    pub b: f64,
    pub c: f64,
    pub s: f64,
}

pub fn optimal_load(r: RatioPair) -> Result<OptimalLoad, SpeedupError> {
    let (a, l) = r.interior()?;
    let b = roots_b0(r)?.in_range;
    let c = b * (1.0 - l) / (1.0 - a);
    Ok(OptimalLoad { b, c, s: b + a * c })
}

/// Minimal load `s` on the boundary of the feasible region as a function of
/// the LO load `b`; the first branch applies on `(0, b0]`, the second on
/// `(b0, 1]`.
pub fn piecewise_s(b: f64, r: RatioPair) -> Result<f64, SpeedupError> {
    let (a, l) = r.interior()?;
    if !(b > 0.0 && b <= 1.0) {
        return Err(SpeedupError::LoadOutOfRange(b));
    }
    let b0 = roots_b0(r)?.in_range;
    let denom = (a * l - a + 1.0) * b - 1.0;
    let numer = if b <= b0 {
        (a * l * l - a * l) * b * b + b - 1.0
    } else {
        (1.0 - a) * b * b + (a * l + a - 1.0) * b - a
    };
    Ok(numer / denom)
}

/// Maximum of the speedup factor found on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMax {
    pub alpha: f64,
    pub lambda: f64,
    pub f: f64,
}

/// Grid points `k * step` strictly inside `(0, 1)`.
fn open_grid(step: f64) -> impl Iterator<Item = f64> {
    (1..).map(move |k| k as f64 * step).take_while(|v| *v < 1.0 - 1e-12)
}

/// Grid points `k * step` in `[0, 1)`.
fn half_open_grid(step: f64) -> impl Iterator<Item = f64> {
    std::iter::once(0.0).chain(open_grid(step))
}

/// Scans `alpha` over `(0, 1)` and `lambda` over `[0, 1)` with the given step.
pub fn max_speedup_search(step: f64) -> Result<GridMax, SpeedupError> {
    if !(step > 0.0 && step <= 0.01) {
        return Err(SpeedupError::BadStep(step));
    }
    let lambdas: Vec<f64> = half_open_grid(step).collect();
    Ok(max_over(open_grid(step), &lambdas))
}

/// Maximum over an explicit set of grid points.
pub fn max_over(alphas: impl IntoIterator<Item = f64>, lambdas: &[f64]) -> GridMax {
    let mut best = GridMax {
        alpha: f64::NAN,
        lambda: f64::NAN,
        f: f64::NEG_INFINITY,
    };
    for alpha in alphas {
        for &lambda in lambdas {
            let f = speedup_factor(RatioPair { alpha, lambda });
            if f > best.f {
                best = GridMax { alpha, lambda, f };
            }
        }
    }
    best
}

/// Reference grid: columns `alpha`, rows `lambda`.
pub const REFERENCE_ALPHAS: [f64; 7] = [0.1, 0.3, 1.0 / 3.0, 0.5, 0.7, 0.9, 1.0];
pub const REFERENCE_LAMBDAS: [f64; 7] = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0];

/// One `(lambda, alpha, f)` row per grid point, `lambda` major.
pub fn speedup_table(alphas: &[f64], lambdas: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut rows = Vec::with_capacity(alphas.len() * lambdas.len());
    for &lambda in lambdas {
        for &alpha in alphas {
            rows.push((lambda, alpha, speedup_factor(RatioPair { alpha, lambda })));
        }
    }
    rows
}

/// Grid `step, 2 step, ..., 1` for alpha and `0, step, ..., 1` for lambda.
pub fn speedup_grid(step: f64) -> Result<Vec<(f64, f64, f64)>, SpeedupError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(SpeedupError::BadStep(step));
    }
    let closed = |start: usize| -> Vec<f64> {
        let n = (1.0 / step).round() as usize;
        let mut v: Vec<f64> = (start..n).map(|k| k as f64 * step).filter(|v| *v < 1.0).collect();
        v.push(1.0);
        v
    };
    Ok(speedup_table(&closed(1), &closed(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rp(a: f64, l: f64) -> RatioPair {
        RatioPair::new(a, l).unwrap()
    }

    #[test]
    fn speedup_examples() {
        assert_abs_diff_eq!(speedup_factor(rp(1.0 / 3.0, 0.0)), 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(speedup_factor(rp(0.5, 0.5)), 1.206, epsilon = 5e-4);
        assert_eq!(speedup_factor(rp(1.0, 0.3)), 1.0);
        assert_eq!(speedup_factor(rp(0.3, 1.0)), 1.0);
    }

    #[test]
    fn threshold_examples() {
        assert_abs_diff_eq!(s_threshold(rp(1.0 / 3.0, 0.0)), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(s_threshold(rp(0.9, 0.9)), 1.0 / 1.048, epsilon = 5e-4);
        assert_eq!(s_threshold(rp(0.4, 1.0)), 1.0);
        // Continuity towards the corner.
        assert_abs_diff_eq!(s_threshold(rp(0.4, 1.0 - 1e-9)), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn domain_checks() {
        assert!(RatioPair::new(0.0, 0.5).is_err());
        assert!(RatioPair::new(1.1, 0.5).is_err());
        assert!(RatioPair::new(0.5, -0.1).is_err());
        assert!(RatioPair::new(0.5, f64::NAN).is_err());
        assert!(roots_b0(rp(1.0, 0.5)).is_err());
        assert!(piecewise_s(0.0, rp(0.5, 0.5)).is_err());
        assert!(piecewise_s(1.5, rp(0.5, 0.5)).is_err());
        assert!(max_speedup_search(0.02).is_err());
    }

    #[test]
    fn piecewise_examples() {
        let r = rp(1.0 / 3.0, 0.0);
        let b0 = roots_b0(r).unwrap().in_range;
        assert_abs_diff_eq!(b0, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(piecewise_s(b0, r).unwrap(), s_threshold(r), epsilon = 1e-12);
        assert_abs_diff_eq!(piecewise_s(1e-9, rp(0.4, 0.3)).unwrap(), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(piecewise_s(1.0, rp(0.5, 0.5)).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn optimal_load_solves_the_equation_system() {
        for &(a, l) in &[(1.0 / 3.0, 0.0), (0.5, 0.5), (0.1, 0.9), (0.9, 0.1)] {
            let r = rp(a, l);
            let o = optimal_load(r).unwrap();
            // b + a c = s, l b + c = s, and the boundary quadric vanishes.
            assert_abs_diff_eq!(o.b + a * o.c, o.s, epsilon = 1e-12);
            assert_abs_diff_eq!(l * o.b + o.c, o.s, epsilon = 1e-9);
            let quad = l * o.b * o.b + (a * l - a + 1.0) * o.b * o.c - (l + 1.0) * o.b - o.c + 1.0;
            assert_abs_diff_eq!(quad, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(o.s, s_threshold(r), epsilon = 1e-9);
        }
        let o = optimal_load(rp(1.0 / 3.0, 0.0)).unwrap();
        assert_abs_diff_eq!(o.b, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(o.c, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn restricted_maxima() {
        let row = max_over(open_grid(0.001), &[0.9]);
        assert_abs_diff_eq!(row.f, 1.061, epsilon = 2e-3);
        assert!((row.alpha - 0.7).abs() < 0.1, "{row:?}");
        let cell = max_over([0.1], &[0.0]);
        assert_abs_diff_eq!(cell.f, 1.254, epsilon = 5e-4);
    }

    #[test]
    fn grid_output_shape() {
        let g = speedup_grid(0.5).unwrap();
        // alpha in {0.5, 1}, lambda in {0, 0.5, 1}
        assert_eq!(g.len(), 6);
        assert_eq!(g[0].0, 0.0);
        assert_eq!(g.last().unwrap(), &(1.0, 1.0, 1.0));
    }

    #[test]
    fn monotone_in_lambda() {
        for i in 1..100 {
            let a = i as f64 / 100.0;
            let mut prev = f64::INFINITY;
            for j in 0..1000 {
                let f = speedup_factor(rp(a, j as f64 / 1000.0));
                assert!(f <= prev + 1e-12, "alpha={a}");
                assert!(f >= 1.0 - 1e-12);
                prev = f;
            }
        }
    }

    #[test]
    fn reciprocal_identity() {
        for i in 1..200 {
            for j in 0..200 {
                let r = rp(i as f64 / 200.0, j as f64 / 200.0);
                assert_abs_diff_eq!(speedup_factor(r) * s_threshold(r), 1.0, epsilon = 1e-12);
            }
        }
    }
}
