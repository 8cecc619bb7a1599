//! Least-squares plane `z = a x + b y + c` through 3-D samples.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> PlaneFit<T> {
    pub fn eval(&self, x: T, y: T) -> T {
        self.a * x + self.b * y + self.c
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("degenerate-fit: need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate-fit: sample positions are collinear or ill-conditioned")]
    Degenerate,
}

/// Solves the 3x3 normal equations
///
/// ```text
/// | Sxx Sxy Sx | |a|   |Sxz|
/// | Sxy Syy Sy | |b| = |Syz|
/// | Sx  Sy  n  | |c|   |Sz |
/// ```
///
/// after eliminating `c` through the last row, i.e. on mean-centred sums.
/// Rejects point sets whose centred position covariance has a condition
/// number above `1 / sqrt(eps)`.
pub fn fit_plane<T: Real>(points: &[(T, T, T)]) -> Result<PlaneFit<T>, FitError> {
    let n = points.len();
    if n < 3 {
        return Err(FitError::TooFewPoints(n));
    }
    let nf = T::from_usize(n).expect("point count representable");
    let (sx, sy, sz) = points.iter().fold((T::zero(), T::zero(), T::zero()), |acc, p| {
        (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2)
    });
    let (mx, my, mz) = (sx / nf, sy / nf, sz / nf);
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) =
        (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for &(x, y, z) in points {
        let (dx, dy, dz) = (x - mx, y - my, z - mz);
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
        sxz = sxz + dx * dz;
        syz = syz + dy * dz;
    }
    let eps = T::epsilon();
    let floor = |m: T| nf * eps * T::lit(16.0) * (m * m + T::one());
    if sxx <= floor(mx) || syy <= floor(my) {
        return Err(FitError::Degenerate);
    }
    // condition number of the scaled covariance [[1, r], [r, 1]]
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).abs();
    let cond = (T::one() + r) / (T::one() - r);
    if !(cond.is_finite() && cond <= eps.sqrt().recip()) {
        return Err(FitError::Degenerate);
    }
    let det = sxx * syy - sxy * sxy;
    let a = (syy * sxz - sxy * syz) / det;
    let b = (sxx * syz - sxy * sxz) / det;
    let c = mz - a * mx - b * my;
    Ok(PlaneFit { a, b, c })
}
