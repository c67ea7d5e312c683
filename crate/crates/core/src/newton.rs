//! Newton polygons, characteristic equations and exponents.
//!
//! Slopes follow the convention where the polygon is the lower boundary of
//! `{(i, j) : j >= v0(a_i)}`, so `qz sigma^2 - (1+z) sigma + 1` has slopes 0 and 1.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::ore::OreOperator;
use crate::qseries::{QContext, C};

pub type Slope = Ratio<i64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub slope: Slope,
    pub length: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewtonPolygon {
    pub segments: Vec<Segment>,
}

impl NewtonPolygon {
    pub fn slopes(&self) -> Vec<Slope> {
        self.segments.iter().map(|s| s.slope).collect()
    }

    /// The Newton function `r_P` as slope -> length.
    pub fn function(&self) -> BTreeMap<Slope, i64> {
        self.segments.iter().map(|s| (s.slope, s.length)).collect()
    }

    pub fn from_function(f: &BTreeMap<Slope, i64>) -> Self {
        NewtonPolygon {
            segments: f
                .iter()
                .filter(|(_, l)| **l > 0)
                .map(|(s, l)| Segment { slope: *s, length: *l })
                .collect(),
        }
    }

    /// Polygon of a product: Newton functions add.
    pub fn merge(&self, other: &Self) -> Self {
        let mut f = self.function();
        for (s, l) in other.function() {
            *f.entry(s).or_insert(0) += l;
        }
        Self::from_function(&f)
    }

    /// `r_P(mu)`, zero when `mu` is not a slope.
    pub fn length_at(&self, mu: Slope) -> i64 {
        self.segments.iter().find(|s| s.slope == mu).map_or(0, |s| s.length)
    }

    pub fn total_length(&self) -> i64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// lcm of the slope denominators.
    pub fn ramification_index(&self) -> u32 {
        self.segments
            .iter()
            .fold(1i64, |l, s| num_integer_lcm(l, *s.slope.denom())) as u32
    }
}

fn num_integer_lcm(a: i64, b: i64) -> i64 {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

pub fn newton_polygon(p: &OreOperator) -> Result<NewtonPolygon> {
    if p.is_zero() {
        return Err(Error::ZeroOperator);
    }
    let pts: Vec<(i64, i64)> = p.terms().iter().map(|(i, a)| (*i, a.v0())).collect();
    let mut hull: Vec<(i64, i64)> = Vec::new();
    for pt in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // Drop b unless it lies strictly below the chord a -> pt.
            let cross = (b.0 - a.0) * (pt.1 - a.1) - (b.1 - a.1) * (pt.0 - a.0);
            if cross <= 0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let segments = hull
        .windows(2)
        .map(|w| Segment {
            slope: Ratio::new(w[1].1 - w[0].1, w[1].0 - w[0].0),
            length: w[1].0 - w[0].0,
        })
        .collect();
    Ok(NewtonPolygon { segments })
}

/// `P` in the variable `z_l` with `z = z_l^l`; slopes are multiplied by `l`.
pub fn ramify(p: &OreOperator, l: u32) -> OreOperator {
    p.ramify(l)
}

/// Laurent polynomial `sum coeffs[k] s^(low + k)`, normalized so the lowest
/// coefficient is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct CharPolynomial {
    pub low: i64,
    pub coeffs: Vec<C>,
}

impl CharPolynomial {
    /// Number of roots counted with multiplicity.
    pub fn degree_span(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    pub fn eval(&self, s: C) -> C {
        horner(&self.coeffs, s) * s.powi(self.low as i32)
    }

    /// Polynomial part, lowest degree first.
    pub fn polynomial(&self) -> &[C] {
        &self.coeffs
    }
}

fn horner(c: &[C], x: C) -> C {
    c.iter().rev().fold(C::new(0.0, 0.0), |acc, a| acc * x + a)
}

fn derivative(c: &[C]) -> Vec<C> {
    c.iter().enumerate().skip(1).map(|(k, a)| a * k as f64).collect()
}

/// Characteristic polynomial at integer slope `mu`: gauge by `z^-mu`, divide
/// by `z^v0` and read off the constant terms.
pub fn characteristic_equation(p: &OreOperator, mu: i64) -> Result<CharPolynomial> {
    if p.is_zero() {
        return Err(Error::ZeroOperator);
    }
    let g = p.gauge_monomial(C::new(1.0, 0.0), -mu);
    let v = g.v0().unwrap();
    let raw: Vec<(i64, C)> = g.terms().iter().map(|(i, a)| (*i, a.coeff(v))).collect();
    let scale = raw.iter().fold(0.0f64, |m, (_, b)| m.max(b.norm()));
    let tol = p.ctx().tol_zero * scale;
    let kept: Vec<(i64, C)> = raw.into_iter().filter(|(_, b)| b.norm() > tol).collect();
    let low = kept.first().unwrap().0;
    let high = kept.last().unwrap().0;
    let lead = kept[0].1;
    let mut coeffs = vec![C::new(0.0, 0.0); (high - low + 1) as usize];
    for (i, b) in kept {
        coeffs[(i - low) as usize] = b / lead;
    }
    Ok(CharPolynomial { low, coeffs })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentDatum {
    pub c: C,
    pub multiplicity: usize,
    pub eps: i64,
    pub cbar: C,
}

impl ExponentDatum {
    pub fn new(ctx: &QContext, c: C, multiplicity: usize) -> Self {
        let (eps, cbar) = ctx.decompose(c);
        ExponentDatum {
            c,
            multiplicity,
            eps,
            cbar,
        }
    }
}

/// Roots of a polynomial (lowest degree first) with multiplicities.
pub fn polynomial_roots(coeffs: &[C], tol_match: f64) -> Result<Vec<(C, usize)>> {
    let d = coeffs.len() - 1;
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[d];
    let mut m = DMatrix::<C>::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = C::new(1.0, 0.0);
    }
    for i in 0..d {
        m[(i, d - 1)] = -coeffs[i] / lead;
    }
    let schur = nalgebra::Schur::try_new(m, 1e-15, 10_000)
        .ok_or_else(|| Error::RootFindingFailure("companion Schur iteration did not converge".into()))?;
    let eig = schur
        .eigenvalues()
        .ok_or_else(|| Error::RootFindingFailure("eigenvalues not available".into()))?;
    let dp = derivative(coeffs);
    let roots: Vec<C> = eig
        .iter()
        .map(|r| {
            let d1 = horner(&dp, *r);
            if d1.norm() > 1e-8 * coeff_scale(&dp, *r) {
                r - horner(coeffs, *r) / d1
            } else {
                *r
            }
        })
        .collect();
    Ok(cluster_roots(coeffs, &roots, tol_match))
}

fn coeff_scale(c: &[C], x: C) -> f64 {
    let r = x.norm();
    c.iter()
        .rev()
        .fold(0.0f64, |acc, a| acc * r + a.norm())
        .max(f64::MIN_POSITIVE)
}

/// Groups nearby roots into multiple roots, confirming each cluster through
/// the vanishing of the derivatives up to its size.
fn cluster_roots(coeffs: &[C], roots: &[C], tol_match: f64) -> Vec<(C, usize)> {
    let radius = tol_match.sqrt();
    let mut used = vec![false; roots.len()];
    let mut out = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let mut members = vec![i];
        for j in i + 1..roots.len() {
            if !used[j] && (roots[j] - roots[i]).norm() <= radius * roots[i].norm().max(1.0) {
                members.push(j);
            }
        }
        let centroid = members.iter().map(|k| roots[*k]).sum::<C>() / members.len() as f64;
        let m = members.len();
        let mut ok = true;
        let mut der = coeffs.to_vec();
        for _ in 0..m {
            if horner(&der, centroid).norm() > 1e-6 * coeff_scale(&der, centroid) {
                ok = false;
                break;
            }
            der = derivative(&der);
        }
        if ok {
            for k in &members {
                used[*k] = true;
            }
            out.push((centroid, m));
        } else {
            used[i] = true;
            out.push((roots[i], 1));
        }
    }
    out
}

/// Exponents at integer slope `mu`, with multiplicities summing to `r_P(mu)`.
pub fn exponents(p: &OreOperator, mu: i64) -> Result<Vec<ExponentDatum>> {
    let ch = characteristic_equation(p, mu)?;
    let ctx = p.ctx();
    Ok(polynomial_roots(&ch.coeffs, ctx.tol_match)?
        .into_iter()
        .map(|(c, m)| ExponentDatum::new(ctx, c, m))
        .collect())
}

/// True when no exponent equals `c q^l` with `l >= 1`.
pub fn is_non_resonant(ctx: &QContext, c: C, exps: &[ExponentDatum]) -> bool {
    !exps
        .iter()
        .any(|e| matches!(ctx.q_power_index(e.c / c), Some(l) if l >= 1))
}

/// Partition into `q^Z`-classes; each class is sorted by `eps` descending.
pub fn q_classes(ctx: &QContext, exps: &[ExponentDatum]) -> Vec<Vec<ExponentDatum>> {
    let mut classes: Vec<Vec<ExponentDatum>> = Vec::new();
    for e in exps {
        match classes.iter_mut().find(|cl| ctx.q_power_index(e.c / cl[0].c).is_some()) {
            Some(cl) => cl.push(*e),
            None => classes.push(vec![*e]),
        }
    }
    for cl in &mut classes {
        cl.sort_by(|a, b| b.eps.cmp(&a.eps));
    }
    classes
}
