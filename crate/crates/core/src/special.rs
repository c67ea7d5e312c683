//! Numeric theta functions, the q-logarithm and q-characters on the punctured plane.

use crate::error::{Error, Result};
use crate::qseries::{QContext, C};

/// Hard cap on the number of terms summed on each side.
pub const MAX_TERMS: usize = 200;

/// Relative size of the exclusion disc around pole spirals.
pub const DEFAULT_EXCLUSION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalPoint {
    pub z: C,
    pub exclusion_radius: f64,
}

impl EvalPoint {
    pub fn new(z: C) -> Self {
        EvalPoint {
            z,
            exclusion_radius: DEFAULT_EXCLUSION * z.norm(),
        }
    }

    pub fn with_radius(z: C, exclusion_radius: f64) -> Self {
        EvalPoint { z, exclusion_radius }
    }
}

/// Sums `sum_n w(n) exp(log_coef(n) + n log z)` symmetrically in `n`, returning
/// the plain sum and the `n`-weighted sum.
fn symmetric_sum(ctx: &QContext, z: C, log_coef: impl Fn(i64) -> C) -> Result<(C, C)> {
    if z.norm() == 0.0 {
        return Err(Error::InvalidArgument("z must be nonzero".into()));
    }
    let lz = z.ln();
    let term = |n: i64| (log_coef(n) + lz * n as f64).exp();
    let cutoff = ctx.tol_zero.min(1e-17);
    let t0 = term(0);
    let mut sum = t0;
    let mut wsum = C::new(0.0, 0.0);
    let mut scale = t0.norm();
    // log|t_n| is concave in n; once past its peak the terms only shrink.
    let peak = lz.re / ctx.log_abs_q();
    for n in 1..=MAX_TERMS as i64 {
        let tp = term(n);
        let tm = term(-n);
        sum += tp + tm;
        wsum += tp * n as f64 - tm * n as f64;
        scale = scale.max(tp.norm()).max(tm.norm()).max(sum.norm());
        let past = (n as f64) > peak.abs() + 2.0;
        if past && tp.norm() <= cutoff * scale && tm.norm() <= cutoff * scale {
            return Ok((sum, wsum));
        }
    }
    Err(Error::NonconvergedSum(MAX_TERMS))
}

/// `theta_q(z) = sum (-1)^n q^(-n(n-1)/2) z^n`.
pub fn theta(ctx: &QContext, z: C) -> Result<C> {
    let tau = ctx.tau;
    let ipi = C::new(0.0, std::f64::consts::PI);
    symmetric_sum(ctx, z, |n| ipi * n as f64 - tau * ((n * (n - 1)) as f64 / 2.0)).map(|s| s.0)
}

/// `Theta_q(z) = theta_q(-z/q) = sum q^(-n(n+1)/2) z^n`.
pub fn big_theta(ctx: &QContext, z: C) -> Result<C> {
    big_theta_with_derivative(ctx, z).map(|s| s.0)
}

/// `(Theta_q(z), Theta_q'(z))`, the derivative summed termwise.
pub fn big_theta_with_derivative(ctx: &QContext, z: C) -> Result<(C, C)> {
    let tau = ctx.tau;
    let (s, w) = symmetric_sum(ctx, z, |n| -tau * ((n * (n + 1)) as f64 / 2.0))?;
    Ok((s, w / z))
}

/// Distance from `z` to the spiral `-c q^Z`.
pub fn spiral_distance(ctx: &QContext, c: C, z: C) -> f64 {
    let m = ((z / c).norm().ln() / ctx.log_abs_q()).round() as i64;
    (m - 2..=m + 2)
        .map(|k| (z + c * ctx.q_pow(k)).norm())
        .fold(f64::INFINITY, f64::min)
}

fn check_spiral(ctx: &QContext, c: C, p: &EvalPoint) -> Result<()> {
    if spiral_distance(ctx, c, p.z) < p.exclusion_radius {
        Err(Error::NearPole(p.z))
    } else {
        Ok(())
    }
}

/// `l_q(z) = z Theta'(z) / Theta(z)`, with the default exclusion radius.
pub fn l_q_eval(ctx: &QContext, z: C) -> Result<C> {
    l_q_eval_at(ctx, EvalPoint::new(z))
}

pub fn l_q_eval_at(ctx: &QContext, p: EvalPoint) -> Result<C> {
    check_spiral(ctx, C::new(1.0, 0.0), &p)?;
    let (t, dt) = big_theta_with_derivative(ctx, p.z)?;
    Ok(p.z * dt / t)
}

/// `e_{q,c}(z) = Theta(z) / Theta(z / c)`, with the default exclusion radius.
pub fn e_qc_eval(ctx: &QContext, c: C, z: C) -> Result<C> {
    e_qc_eval_at(ctx, c, EvalPoint::new(z))
}

pub fn e_qc_eval_at(ctx: &QContext, c: C, p: EvalPoint) -> Result<C> {
    if c.norm() == 0.0 {
        return Err(Error::InvalidArgument("character parameter must be nonzero".into()));
    }
    check_spiral(ctx, C::new(1.0, 0.0), &p)?;
    check_spiral(ctx, c, &p)?;
    Ok(big_theta(ctx, p.z)? / big_theta(ctx, p.z / c)?)
}
