//! Operators `sum_i a_i sigma^i` with Laurent series coefficients and the
//! twisted product `sigma a = sigma_q(a) sigma`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::qseries::{q_pow, LaurentSeries, QContext, C};

#[derive(Clone, Debug, PartialEq)]
pub struct OreOperator {
    terms: BTreeMap<i64, LaurentSeries>,
    ctx: QContext,
}

impl OreOperator {
    pub fn new(ctx: &QContext, terms: impl IntoIterator<Item = (i64, LaurentSeries)>) -> Self {
        let mut map: BTreeMap<i64, LaurentSeries> = BTreeMap::new();
        for (i, a) in terms {
            let merged = match map.remove(&i) {
                Some(b) => &b + &a,
                None => a,
            };
            if !merged.is_zero() {
                map.insert(i, merged);
            }
        }
        OreOperator {
            terms: map,
            ctx: ctx.clone(),
        }
    }

    /// `sum_i coeffs[i] sigma^i`.
    pub fn from_coeffs(ctx: &QContext, coeffs: Vec<LaurentSeries>) -> Self {
        Self::new(ctx, coeffs.into_iter().enumerate().map(|(i, a)| (i as i64, a)))
    }

    pub fn zero(ctx: &QContext) -> Self {
        OreOperator {
            terms: BTreeMap::new(),
            ctx: ctx.clone(),
        }
    }

    pub fn one(ctx: &QContext) -> Self {
        Self::sigma_power(ctx, 0)
    }

    pub fn sigma_power(ctx: &QContext, k: i64) -> Self {
        Self::new(ctx, [(k, ctx.one())])
    }

    /// The multiplication operator by `f`.
    pub fn scalar(ctx: &QContext, f: LaurentSeries) -> Self {
        Self::new(ctx, [(0, f)])
    }

    /// `z^mu sigma - c`.
    pub fn first_order(ctx: &QContext, mu: i64, c: C) -> Self {
        Self::new(ctx, [(1, ctx.monomial(C::new(1.0, 0.0), mu)), (0, ctx.constant(-c))])
    }

    pub fn ctx(&self) -> &QContext {
        &self.ctx
    }

    pub fn terms(&self) -> &BTreeMap<i64, LaurentSeries> {
        &self.terms
    }

    pub fn coeff(&self, i: i64) -> Option<&LaurentSeries> {
        self.terms.get(&i)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Lowest sigma-degree.
    pub fn alpha(&self) -> Option<i64> {
        self.terms.keys().next().copied()
    }

    /// Highest sigma-degree.
    pub fn beta(&self) -> Option<i64> {
        self.terms.keys().next_back().copied()
    }

    /// `beta - alpha`, zero for the zero operator.
    pub fn deg_abs(&self) -> i64 {
        match (self.alpha(), self.beta()) {
            (Some(a), Some(b)) => b - a,
            _ => 0,
        }
    }

    /// Smallest coefficient valuation.
    pub fn v0(&self) -> Option<i64> {
        self.terms.values().map(|a| a.v0()).min()
    }

    pub fn known_to(&self) -> i64 {
        self.terms.values().map(|a| a.known_to()).min().unwrap_or(i64::MAX)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|a| a.max_abs()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(&self.ctx, self.terms.clone().into_iter().chain(other.terms.clone()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map(|_, a| a.neg())
    }

    fn map(&self, f: impl Fn(i64, &LaurentSeries) -> LaurentSeries) -> Self {
        Self::new(&self.ctx, self.terms.iter().map(|(i, a)| (*i, f(*i, a))))
    }

    /// Twisted product: `(a sigma^i)(b sigma^j) = a sigma_q^i(b) sigma^(i+j)`.
    pub fn mul(&self, other: &Self) -> Self {
        let q = self.ctx.q;
        let mut out = Vec::new();
        for (i, a) in &self.terms {
            for (j, b) in &other.terms {
                out.push((i + j, a * &b.sigma_pow(q, *i)));
            }
        }
        Self::new(&self.ctx, out)
    }

    /// Multiplication by a constant, exact in precision.
    pub fn scale(&self, c: C) -> Self {
        self.map(|_, a| a.scale(c))
    }

    /// `z^k P`.
    pub fn shift_z(&self, k: i64) -> Self {
        self.map(|_, a| a.shift(k))
    }

    /// `f P`.
    pub fn left_scale(&self, f: &LaurentSeries) -> Self {
        self.map(|_, a| f * a)
    }

    /// `P f`, i.e. `sum a_i sigma_q^i(f) sigma^i`.
    pub fn right_scale(&self, f: &LaurentSeries) -> Self {
        let q = self.ctx.q;
        self.map(|i, a| a * &f.sigma_pow(q, i))
    }

    /// `P sigma^k`.
    pub fn shift_right(&self, k: i64) -> Self {
        Self::new(&self.ctx, self.terms.iter().map(|(i, a)| (i + k, a.clone())))
    }

    /// `sigma^k P`.
    pub fn shift_left(&self, k: i64) -> Self {
        let q = self.ctx.q;
        Self::new(&self.ctx, self.terms.iter().map(|(i, a)| (i + k, a.sigma_pow(q, k))))
    }

    /// `P.f = sum a_i sigma_q^i(f)`.
    pub fn apply(&self, f: &LaurentSeries) -> LaurentSeries {
        let q = self.ctx.q;
        let mut acc: Option<LaurentSeries> = None;
        for (i, a) in &self.terms {
            let t = a * &f.sigma_pow(q, *i);
            acc = Some(match acc {
                None => t,
                Some(s) => &s + &t,
            });
        }
        acc.unwrap_or_else(|| LaurentSeries::zero(f.known_to(), f.tol()))
    }

    /// Right Euclidean division `A = Q B + R` with `deg_abs(R) < deg_abs(B)`.
    ///
    /// `B` is first normalized by `sigma^(-alpha)` and made monic in its top
    /// sigma-degree; `A` is made entire by a left factor `sigma^s`.
    pub fn right_divide(&self, b: &Self) -> Result<(Self, Self)> {
        let ctx = &self.ctx;
        let (Some(b0), Some(_)) = (b.alpha(), b.beta()) else {
            return Err(Error::ZeroDivisor);
        };
        if self.is_zero() {
            return Ok((Self::zero(ctx), Self::zero(ctx)));
        }
        let d = b.deg_abs();
        let bp = b.shift_right(-b0);
        let lead = bp.terms[&d].invert()?;
        let bm = bp.left_scale(&lead);
        let a1 = self.shift_right(-b0);
        let s = (-a1.alpha().unwrap()).max(0);
        let mut rem = a1.shift_left(s);
        let q = ctx.q;
        let mut quot: Vec<(i64, LaurentSeries)> = Vec::new();
        while let Some(top) = rem.beta() {
            if top < d {
                break;
            }
            let t = rem.terms[&top].clone();
            let k = top - d;
            quot.push((k, t.clone()));
            let mut next: Vec<(i64, LaurentSeries)> = Vec::new();
            for (j, c) in &bm.terms {
                if *j == d {
                    continue;
                }
                next.push((j + k, (&t * &c.sigma_pow(q, k)).neg()));
            }
            rem.terms.remove(&top);
            rem = rem.add(&Self::new(ctx, next));
        }
        let qm = Self::new(ctx, quot);
        let quotient = qm.right_scale(&lead).shift_left(-s);
        let remainder = rem.shift_left(-s).shift_right(b0);
        let floor = self.v0().unwrap();
        if quotient.known_to().min(remainder.known_to()) < floor {
            return Err(Error::PrecisionExhausted(
                "right division consumed all known coefficients".into(),
            ));
        }
        Ok((quotient, remainder))
    }

    /// `P^[u] = u^(-1) P u` for `sigma_q u = alpha u`:
    /// `b_i = a_i prod_{j<i} sigma_q^j(alpha)`.
    pub fn gauge(&self, alpha: &LaurentSeries) -> Result<Self> {
        if alpha.is_zero() {
            return Err(Error::ZeroSeries);
        }
        if alpha.terms().count() == 1 {
            return Ok(self.gauge_monomial(alpha.leading(), alpha.v0()));
        }
        self.gauge_series(alpha)
    }

    fn gauge_series(&self, alpha: &LaurentSeries) -> Result<Self> {
        let q = self.ctx.q;
        let inv = alpha.invert()?;
        let mut out = Vec::new();
        for (i, a) in &self.terms {
            let mut prod = self.ctx.one();
            if *i >= 0 {
                for j in 0..*i {
                    prod = &prod * &alpha.sigma_pow(q, j);
                }
            } else {
                for j in *i..0 {
                    prod = &prod * &inv.sigma_pow(q, j);
                }
            }
            out.push((*i, a * &prod));
        }
        Ok(Self::new(&self.ctx, out))
    }

    /// Gauge by `alpha = c z^k`, done exactly: `a_i -> c^i q^(k i(i-1)/2) z^(k i) a_i`.
    pub fn gauge_monomial(&self, c: C, k: i64) -> Self {
        let q = self.ctx.q;
        self.map(|i, a| {
            let f = q_pow(c, i) * q_pow(q, k * i * (i - 1) / 2);
            a.shift(k * i).scale(f)
        })
    }

    /// Substitution `z = z_l^l`, over the context with `q_l = exp(tau / l)`.
    pub fn ramify(&self, l: u32) -> Self {
        if l == 1 {
            return self.clone();
        }
        let ctx = self.ctx.ramified(l);
        Self::new(&ctx, self.terms.iter().map(|(i, a)| (*i, a.compose_power(l))))
    }

    /// Same coefficients over another context (used after unramified bookkeeping).
    pub fn with_ctx(&self, ctx: &QContext) -> Self {
        OreOperator {
            terms: self.terms.clone(),
            ctx: ctx.clone(),
        }
    }

    /// Largest coefficient difference up to common precision.
    pub fn max_diff(&self, other: &Self) -> f64 {
        let zero = LaurentSeries::zero(i64::MAX, 0.0);
        let keys: std::collections::BTreeSet<i64> = self.terms.keys().chain(other.terms.keys()).copied().collect();
        let kt = self.known_to().min(other.known_to());
        keys.into_iter()
            .map(|i| {
                let a = self.terms.get(&i).unwrap_or(&zero).truncate(kt);
                let b = other.terms.get(&i).unwrap_or(&zero).truncate(kt);
                a.max_diff(&b)
            })
            .fold(0.0, f64::max)
    }

    /// `max_diff` relative to the larger operator magnitude.
    pub fn rel_diff(&self, other: &Self) -> f64 {
        let scale = self.max_abs().max(other.max_abs()).max(f64::MIN_POSITIVE);
        self.max_diff(other) / scale
    }

    /// Coefficientwise absolute values over the context with `|q|` in place of `q`.
    /// Products and applications of magnitude operators bound the magnitudes of
    /// the terms summed at each position.
    pub fn magnitude(&self) -> Self {
        let ctx = QContext {
            q: C::new(self.ctx.q.norm(), 0.0),
            tau: C::new(self.ctx.tau.re, 0.0),
            ..self.ctx.clone()
        };
        Self::new(&ctx, self.terms.iter().map(|(i, a)| (*i, a.abs())))
    }

    /// Largest `|self - other| / scale` over positions up to `order` where the
    /// scale operator is nonzero.
    pub fn componentwise_diff(&self, other: &Self, scale: &Self, order: i64) -> f64 {
        let mut worst = 0.0f64;
        for (i, s) in scale.terms() {
            let zero = LaurentSeries::zero(i64::MAX, 0.0);
            let a = self.coeff(*i).unwrap_or(&zero);
            let b = other.coeff(*i).unwrap_or(&zero);
            let top = order.min(a.known_to()).min(b.known_to()).min(s.known_to());
            if s.is_zero() {
                continue;
            }
            for m in s.v0()..=top {
                let sc = s.coeff(m).re;
                if sc > 0.0 {
                    worst = worst.max((a.coeff(m) - b.coeff(m)).norm() / sc);
                }
            }
        }
        worst
    }

    /// Drops every coefficient past `k`.
    pub fn truncate(&self, k: i64) -> Self {
        self.map(|_, a| a.truncate(k))
    }
}

impl fmt::Display for OreOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, a) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "[{a}] S^{i}")?;
        }
        Ok(())
    }
}

/// Splits `alpha = c z^mu beta` with `beta(0) = 1` and returns `(c, mu, v)` where
/// `v(z) = prod_{k>=1} beta(q^-k z)`, so that `e_{q,c} Theta^mu v` is multiplied
/// by `alpha` under `sigma_q`.
pub fn unit_from_alpha(ctx: &QContext, alpha: &LaurentSeries) -> Result<(C, i64, LaurentSeries)> {
    if alpha.is_zero() {
        return Err(Error::ZeroSeries);
    }
    let c = alpha.leading();
    let mu = alpha.v0();
    let beta = alpha.shift(-mu).scale(c.inv());
    // v(qz) = beta(z) v(z) gives (q^m - 1) v_m = sum_{j>=1} beta_j v_{m-j}.
    let kt = beta.known_to();
    let n = kt.max(-1) + 1;
    let mut v = vec![C::new(0.0, 0.0); n as usize];
    if n > 0 {
        v[0] = C::new(1.0, 0.0);
    }
    for m in 1..n {
        let mut s = C::new(0.0, 0.0);
        for j in 1..=m {
            s += beta.coeff(j) * v[(m - j) as usize];
        }
        v[m as usize] = s / (ctx.q_pow(m) - 1.0);
    }
    Ok((c, mu, LaurentSeries::new(0, v, kt, alpha.tol())))
}


#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use rand::Rng;

    /// Random operator of sigma-degrees `0..=deg` with polynomial coefficients
    /// of valuation in `0..=maxval`.
    pub fn random_operator(rng: &mut impl Rng, ctx: &QContext, deg: i64, maxval: i64) -> OreOperator {
        loop {
            let mut terms = Vec::new();
            for i in 0..=deg {
                let v = rng.gen_range(0..=maxval);
                let coeffs: Vec<C> = (0..3)
                    .map(|_| C::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
                    .collect();
                terms.push((i, ctx.series(v, &coeffs)));
            }
            let p = OreOperator::new(ctx, terms);
            if p.alpha() == Some(0) && p.beta() == Some(deg) {
                return p;
            }
        }
    }
}
