//! Factorization into first-order factors `(z^mu sigma - c) u^-1`.
//!
//! Slopes are peeled from the largest to the smallest, so every peel acts on
//! the current last slope and produces the rightmost remaining factors.

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::newton::{exponents, newton_polygon, q_classes, Slope};
use crate::ore::OreOperator;
use crate::qseries::{q_pow, LaurentSeries, QContext, C};

/// `(z^mu sigma - c) u^-1` with `u(0) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstOrderFactor {
    pub mu: i64,
    pub c: C,
    pub u: LaurentSeries,
}

impl FirstOrderFactor {
    pub fn operator(&self, ctx: &QContext) -> Result<OreOperator> {
        Ok(OreOperator::first_order(ctx, self.mu, self.c).right_scale(&self.u.invert()?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Factorization {
    /// Leading unit `a sigma^k`.
    pub unit: (LaurentSeries, i64),
    /// Leftmost first.
    pub factors: Vec<FirstOrderFactor>,
    pub ramification: u32,
    pub residual: OreOperator,
    /// Context of the ramified variable.
    pub ctx: QContext,
}

impl Factorization {
    /// `a sigma^k L_1 ... L_n residual`.
    pub fn remultiply(&self) -> Result<OreOperator> {
        let mut acc = OreOperator::new(&self.ctx, [(self.unit.1, self.unit.0.clone())]);
        for f in &self.factors {
            acc = acc.mul(&f.operator(&self.ctx)?);
        }
        Ok(acc.mul(&self.residual))
    }

    /// The same product with every coefficient replaced by its absolute value
    /// (and `q` by `|q|`): the per-position size of the terms being summed.
    pub fn remultiply_magnitude(&self) -> Result<OreOperator> {
        let unit = OreOperator::new(&self.ctx, [(self.unit.1, self.unit.0.clone())]);
        let mut acc = unit.magnitude();
        for f in &self.factors {
            acc = acc.mul(&f.operator(&self.ctx)?.magnitude());
        }
        Ok(acc.mul(&self.residual.magnitude()))
    }

    /// `(relative error against the largest input coefficient, componentwise
    /// error against the summed term magnitudes)` of the re-multiplication, for
    /// positions up to `order`.
    pub fn remultiplication_error(&self, target: &OreOperator, order: i64) -> Result<(f64, f64)> {
        let back = self.remultiply()?.truncate(order);
        let t = target.truncate(order);
        let scale = self.remultiply_magnitude()?.truncate(order);
        Ok((back.rel_diff(&t), back.componentwise_diff(&t, &scale, order)))
    }
}

/// Power series solution `f`, `f(0) = 1`, of `P.f = 0` when 1 is an exponent
/// at slope 0 and no `q^m`, `m >= 1`, is.
pub fn unit_solution(p: &OreOperator) -> Result<LaurentSeries> {
    let np = newton_polygon(p)?;
    if np.length_at(Ratio::from_integer(0)) == 0 {
        return Err(Error::SlopeMissing("0".into()));
    }
    let ctx = p.ctx();
    let v = p.v0().unwrap();
    let lo = p.terms().iter().find(|(_, a)| a.v0() == v).map(|(i, _)| *i).unwrap();
    let cal = p.shift_left(-lo).shift_z(-v);
    let kt = cal.known_to();
    let rows: Vec<(i64, &LaurentSeries)> = cal.terms().iter().map(|(i, a)| (*i, a)).collect();
    // F_j(X) = sum_i a_{i,j} X^i.
    let big_f = |j: i64, x: i64| -> (C, f64) {
        rows.iter().fold((C::new(0.0, 0.0), 0.0), |(s, m), (i, a)| {
            let t = a.coeff(j) * q_pow(ctx.q, i * x);
            (s + t, m + t.norm())
        })
    };
    let (f01, s01) = big_f(0, 0);
    if f01.norm() > ctx.tol_match * s01 {
        return Err(Error::ExponentMissing(f01.norm() / s01));
    }
    let n = kt.max(-1) + 1;
    let mut f = vec![C::new(0.0, 0.0); n as usize];
    if n > 0 {
        f[0] = C::new(1.0, 0.0);
    }
    for m in 1..n {
        let (den, dscale) = big_f(0, m);
        if den.norm() <= ctx.tol_zero * dscale {
            return Err(Error::ResonantExponent(format!("q^{m} is also an exponent")));
        }
        let mut s = C::new(0.0, 0.0);
        for mp in 0..m {
            s += big_f(m - mp, mp).0 * f[mp as usize];
        }
        f[m as usize] = -s / den;
        if !(f[m as usize].norm() <= crate::qseries::GROWTH_CAP) {
            break;
        }
    }
    Ok(LaurentSeries::new(0, f, kt, ctx.tol_zero).capped())
}

/// One peel at slope `mu` and exponent `c`: `P = Q (z^mu sigma - c) u^-1`.
fn peel_once(p: &OreOperator, mu: i64, c: C) -> Result<(OreOperator, LaurentSeries)> {
    let ctx = p.ctx();
    let one = C::new(1.0, 0.0);
    let hat = p.gauge_monomial(one, -mu).gauge_monomial(c, 0);
    let u = unit_solution(&hat)?;
    // hat u = sum b_i sigma^i with sum b_i = 0, so hat u = P1 (sigma - 1)
    // with P1 = sum_j (-sum_{i<=j} b_i) sigma^j.
    let (lo, hi) = (hat.alpha().unwrap(), hat.beta().unwrap());
    let mut acc: Option<LaurentSeries> = None;
    let mut p1 = Vec::new();
    for j in lo..hi {
        if let Some(a) = hat.coeff(j) {
            let b = a * &u.sigma_pow(ctx.q, j);
            acc = Some(match acc {
                None => b,
                Some(s) => &s + &b,
            });
        }
        if let Some(s) = &acc {
            p1.push((j, s.neg()));
        }
    }
    let p1 = OreOperator::new(ctx, p1);
    let q = p1.gauge_monomial(c.inv(), 0).scale(c.inv()).gauge_monomial(one, mu);
    if q.is_zero() || q.known_to() < q.v0().unwrap() {
        return Err(Error::PrecisionExhausted(
            "peeling consumed the known coefficients".into(),
        ));
    }
    Ok((q, u))
}

/// Peels `m` factors `(z^mu sigma - c) u_i^-1`; `P = Q L_m ... L_1`.
pub fn peel_exponent(p: &OreOperator, mu: i64, c: C, m: usize) -> Result<(OreOperator, Vec<LaurentSeries>)> {
    let mut q = p.clone();
    let mut us = Vec::with_capacity(m);
    for done in 0..m {
        match peel_once(&q, mu, c) {
            Ok((nq, u)) => {
                q = nq;
                us.push(u);
            }
            Err(Error::ExponentMissing(_)) | Err(Error::SlopeMissing(_)) => {
                return Err(Error::MultiplicityMismatch { done, wanted: m })
            }
            Err(e) => return Err(e),
        }
    }
    Ok((q, us))
}

/// Peels every exponent at integer slope `mu`, class by class, the maximal-eps
/// member of a class first. Returns `Q` and the factors, leftmost first, with
/// `P = Q factors[0] ... factors[k-1]`.
pub fn factor_slope(p: &OreOperator, mu: i64) -> Result<(OreOperator, Vec<FirstOrderFactor>)> {
    let ctx = p.ctx().clone();
    let slope = Ratio::from_integer(mu);
    let mut q = p.clone();
    let mut rev: Vec<FirstOrderFactor> = Vec::new();
    let start = newton_polygon(p)?.length_at(slope);
    while newton_polygon(&q)?.length_at(slope) > 0 {
        let exps = exponents(&q, mu)?;
        let classes = q_classes(&ctx, &exps);
        let e = classes[0][0];
        let before = newton_polygon(&q)?.length_at(slope);
        let (nq, us) = peel_exponent(&q, mu, e.c, e.multiplicity)?;
        if newton_polygon(&nq)?.length_at(slope) != before - e.multiplicity as i64 {
            return Err(Error::MultiplicityMismatch {
                done: rev.len(),
                wanted: start as usize,
            });
        }
        for u in us {
            rev.push(FirstOrderFactor { mu, c: e.c, u });
        }
        q = nq;
    }
    rev.reverse();
    Ok((q, rev))
}

/// Ramifies by the lcm of the slope denominators, then peels slopes from the
/// largest to the smallest.
pub fn full_factorization(p: &OreOperator) -> Result<Factorization> {
    let l = newton_polygon(p)?.ramification_index();
    let r = p.ramify(l);
    let ctx = r.ctx().clone();
    let mut slopes: Vec<Slope> = newton_polygon(&r)?.slopes();
    slopes.reverse();
    let mut q = r;
    let mut factors: Vec<FirstOrderFactor> = Vec::new();
    for mu in slopes {
        let (nq, mut fs) = factor_slope(&q, mu.to_integer())?;
        fs.extend(factors);
        factors = fs;
        q = nq;
    }
    let (unit, residual) = if q.terms().len() == 1 {
        let (k, a) = q.terms().iter().next().unwrap();
        ((a.clone(), *k), OreOperator::one(&ctx))
    } else {
        ((ctx.one(), 0), q)
    };
    Ok(Factorization {
        unit,
        factors,
        ramification: l,
        residual,
        ctx,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthReport {
    /// q-Gevrey level: 0 for finite nonzero radius, -1 for Tshakaloff-type
    /// growth, 1 for `q^(-n(n-1)/2)` decay; `None` for polynomials.
    pub level: Option<Slope>,
    pub radius_estimate: f64,
    /// Fitted coefficient of `n^2` in `log|f_n|`.
    pub quadratic: f64,
    pub convergent_like: bool,
}

fn least_squares(xs: &[f64], ys: &[f64], degree: usize) -> Vec<f64> {
    let a = DMatrix::from_fn(xs.len(), degree + 1, |r, c| xs[r].powi(c as i32));
    let b = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    svd.solve(&b, 1e-14)
        .map(|x| x.iter().copied().collect())
        .unwrap_or_else(|_| vec![0.0; degree + 1])
}

/// Fits `log|f_n|` by `a + b n + c n^2` and classifies the growth.
pub fn growth_diagnostic(ctx: &QContext, f: &LaurentSeries) -> Result<GrowthReport> {
    let have = if f.is_zero() {
        0
    } else {
        (f.known_to() - f.v0() + 1).max(0) as usize
    };
    if have < 10 {
        return Err(Error::InsufficientData { needed: 10, have });
    }
    // Isolated dips far below both neighbours are roundoff standing in for zeros.
    let mag = |n: i64| f.coeff(n).norm();
    let (xs, ys): (Vec<f64>, Vec<f64>) = f
        .terms()
        .filter(|(n, c)| c.norm() > f.tol() * mag(n - 1).min(mag(n + 1)))
        .map(|(n, c)| (n as f64, c.norm().ln()))
        .unzip();
    if xs.len() < 3 {
        return Ok(GrowthReport {
            level: None,
            radius_estimate: f64::INFINITY,
            quadratic: 0.0,
            convergent_like: true,
        });
    }
    let lq = ctx.log_abs_q();
    let quad = least_squares(&xs, &ys, 2)[2];
    let level = Ratio::from_integer((-2.0 * quad / lq).round() as i64);
    let threshold = 0.02 * lq;
    let radius = if quad.abs() < threshold {
        (-least_squares(&xs, &ys, 1)[1]).exp()
    } else if quad < 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(GrowthReport {
        level: Some(level),
        radius_estimate: radius,
        quadratic: quad,
        convergent_like: quad < threshold,
    })
}
