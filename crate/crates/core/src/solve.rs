//! Solutions in the algebra generated over series by the characters
//! `e_{q,c}`, the powers `Theta^-mu` and the q-logarithm `l_q`.

use crate::error::{Error, Result};
use crate::factor::{full_factorization, FirstOrderFactor};
use crate::ore::OreOperator;
use crate::qseries::{q_pow, LaurentSeries, Mode, QContext, C};
use crate::special::{big_theta, e_qc_eval, l_q_eval, spiral_distance, DEFAULT_EXCLUSION};

/// `sum_k comps[k] l_q^(k)` with `l_q^(k) = binomial(l_q, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogPolynomial {
    comps: Vec<LaurentSeries>,
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl LogPolynomial {
    pub fn new(comps: Vec<LaurentSeries>) -> Self {
        let mut p = LogPolynomial { comps };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.comps.last().is_some_and(|c| c.is_zero()) {
            self.comps.pop();
        }
    }

    pub fn zero() -> Self {
        LogPolynomial { comps: Vec::new() }
    }

    pub fn series(f: LaurentSeries) -> Self {
        Self::new(vec![f])
    }

    /// `l_q^(k)` itself.
    pub fn basis(ctx: &QContext, k: usize) -> Self {
        let mut comps = vec![ctx.zero(); k];
        comps.push(ctx.one());
        Self::new(comps)
    }

    pub fn comps(&self) -> &[LaurentSeries] {
        &self.comps
    }

    /// Component of `l_q^(k)`, `None` past the degree.
    pub fn comp(&self, k: usize) -> Option<&LaurentSeries> {
        self.comps.get(k)
    }

    /// Log-degree; `None` for zero.
    pub fn degree(&self) -> Option<usize> {
        self.comps.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn known_to(&self) -> i64 {
        self.comps.iter().map(|c| c.known_to()).min().unwrap_or(i64::MAX)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.comps.len().max(other.comps.len());
        let comps = (0..n)
            .map(|k| match (self.comps.get(k), other.comps.get(k)) {
                (Some(a), Some(b)) => a + b,
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!(),
            })
            .collect();
        Self::new(comps)
    }

    pub fn neg(&self) -> Self {
        self.map(|c| c.neg())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn map(&self, f: impl Fn(&LaurentSeries) -> LaurentSeries) -> Self {
        Self::new(self.comps.iter().map(f).collect())
    }

    pub fn scale(&self, c: C) -> Self {
        self.map(|a| a.scale(c))
    }

    pub fn shift(&self, k: i64) -> Self {
        self.map(|a| a.shift(k))
    }

    pub fn mul_series(&self, f: &LaurentSeries) -> Self {
        self.map(|a| a * f)
    }

    /// Product, using `l^(a) l^(b) = sum_k C(k,a) C(a,k-b) l^(k)`.
    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out: Vec<Option<LaurentSeries>> = vec![None; self.comps.len() + other.comps.len() - 1];
        for (a, fa) in self.comps.iter().enumerate() {
            for (b, gb) in other.comps.iter().enumerate() {
                let prod = fa * gb;
                for k in a.max(b)..=a + b {
                    let w = binomial(k, a) * binomial(a, k - b);
                    if w == 0.0 {
                        continue;
                    }
                    let t = prod.scale(C::new(w, 0.0));
                    out[k] = Some(match out[k].take() {
                        None => t,
                        Some(s) => &s + &t,
                    });
                }
            }
        }
        let kt = self.known_to().min(other.known_to());
        let tol = self.comps[0].tol();
        Self::new(
            out.into_iter()
                .map(|c| c.unwrap_or_else(|| LaurentSeries::zero(kt, tol)))
                .collect(),
        )
    }

    /// `sigma_q`: component `k` becomes `sigma(F_k) + sigma(F_(k+1))`.
    pub fn sigma(&self, q: C) -> Self {
        let s: Vec<LaurentSeries> = self.comps.iter().map(|c| c.sigma(q)).collect();
        let comps = (0..s.len())
            .map(|k| match s.get(k + 1) {
                Some(next) => &s[k] + next,
                None => s[k].clone(),
            })
            .collect();
        Self::new(comps)
    }

    /// `sigma_q^-1`: component `k` becomes `sum_(m>=k) (-1)^(m-k) sigma^-1(F_m)`.
    pub fn sigma_inv(&self, q: C) -> Self {
        let s: Vec<LaurentSeries> = self.comps.iter().map(|c| c.sigma_pow(q, -1)).collect();
        let comps = (0..s.len())
            .map(|k| {
                let mut acc = s[k].clone();
                for (j, t) in s.iter().enumerate().skip(k + 1) {
                    acc = if (j - k) % 2 == 1 { &acc - t } else { &acc + t };
                }
                acc
            })
            .collect();
        Self::new(comps)
    }

    pub fn sigma_pow(&self, q: C, k: i64) -> Self {
        let mut p = self.clone();
        for _ in 0..k.unsigned_abs() {
            p = if k > 0 { p.sigma(q) } else { p.sigma_inv(q) };
        }
        p
    }

    /// Value with the series parts summed and `l_q` replaced by `l`.
    pub fn eval(&self, z: C, l: C) -> C {
        let mut acc = C::new(0.0, 0.0);
        let mut binom = C::new(1.0, 0.0);
        for (k, f) in self.comps.iter().enumerate() {
            if k > 0 {
                binom = binom * (l - (k - 1) as f64) / k as f64;
            }
            acc += f.eval(z) * binom;
        }
        acc
    }
}

/// `e_{q,c} Theta^-mu poly`, with `c` reduced to the annulus `1 <= |c| < |q|`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicTerm {
    pub c: C,
    pub mu: i64,
    pub poly: LogPolynomial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicSolution {
    terms: Vec<SymbolicTerm>,
    ctx: QContext,
}

impl SymbolicSolution {
    /// Normalizes `e_{q,c} = z^eps e_{q,cbar}` and merges terms with equal keys.
    pub fn new(ctx: &QContext, terms: impl IntoIterator<Item = SymbolicTerm>) -> Self {
        let mut s = SymbolicSolution {
            terms: Vec::new(),
            ctx: ctx.clone(),
        };
        for t in terms {
            s.push(t);
        }
        s
    }

    fn push(&mut self, t: SymbolicTerm) {
        if t.poly.is_zero() {
            return;
        }
        let (eps, mut cbar) = self.ctx.decompose(t.c);
        if (cbar - 1.0).norm() < self.ctx.tol_match {
            cbar = C::new(1.0, 0.0);
        }
        let mut poly = t.poly.shift(eps);
        for (idx, old) in self.terms.iter_mut().enumerate() {
            if old.mu != t.mu {
                continue;
            }
            if let Some(l) = self.ctx.q_power_index(cbar / old.c) {
                poly = poly.shift(l);
                old.poly = old.poly.add(&poly);
                if old.poly.is_zero() {
                    self.terms.remove(idx);
                }
                return;
            }
        }
        self.terms.push(SymbolicTerm {
            c: cbar,
            mu: t.mu,
            poly,
        });
    }

    pub fn zero(ctx: &QContext) -> Self {
        Self::new(ctx, [])
    }

    /// `u e_{q,c} Theta^-mu`.
    pub fn character(ctx: &QContext, c: C, mu: i64, u: LaurentSeries) -> Self {
        Self::new(
            ctx,
            [SymbolicTerm {
                c,
                mu,
                poly: LogPolynomial::series(u),
            }],
        )
    }

    /// The plain series `f`.
    pub fn from_series(ctx: &QContext, f: LaurentSeries) -> Self {
        Self::character(ctx, C::new(1.0, 0.0), 0, f)
    }

    pub fn from_poly(ctx: &QContext, poly: LogPolynomial) -> Self {
        Self::new(
            ctx,
            [SymbolicTerm {
                c: C::new(1.0, 0.0),
                mu: 0,
                poly,
            }],
        )
    }

    pub fn terms(&self) -> &[SymbolicTerm] {
        &self.terms
    }

    pub fn ctx(&self) -> &QContext {
        &self.ctx
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.iter().map(|t| t.poly.max_abs()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(&self.ctx, self.terms.iter().chain(&other.terms).cloned())
    }

    pub fn neg(&self) -> Self {
        self.map_polys(|p| p.neg())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: C) -> Self {
        self.map_polys(|p| p.scale(c))
    }

    pub fn mul_series(&self, f: &LaurentSeries) -> Self {
        self.map_polys(|p| p.mul_series(f))
    }

    fn map_polys(&self, f: impl Fn(&LogPolynomial) -> LogPolynomial) -> Self {
        Self::new(
            &self.ctx,
            self.terms.iter().map(|t| SymbolicTerm {
                c: t.c,
                mu: t.mu,
                poly: f(&t.poly),
            }),
        )
    }

    /// Product under `e_{q,c} e_{q,d} = e_{q,cd}`.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                out.push(SymbolicTerm {
                    c: a.c * b.c,
                    mu: a.mu + b.mu,
                    poly: a.poly.mul(&b.poly),
                });
            }
        }
        Self::new(&self.ctx, out)
    }

    /// `sigma_q^k`, using `sigma e_{q,c} = c e_{q,c}` and
    /// `sigma Theta^-mu = z^-mu Theta^-mu`.
    pub fn sigma_pow(&self, k: i64) -> Self {
        let q = self.ctx.q;
        Self::new(
            &self.ctx,
            self.terms.iter().map(|t| {
                let f = q_pow(t.c, k) * q_pow(q, -t.mu * k * (k - 1) / 2);
                SymbolicTerm {
                    c: t.c,
                    mu: t.mu,
                    poly: t.poly.sigma_pow(q, k).shift(-t.mu * k).scale(f),
                }
            }),
        )
    }

    /// Truncates every series part at `z^k`.
    pub fn truncate(&self, k: i64) -> Self {
        self.map_polys(|p| p.map(|a| a.truncate(k)))
    }

    /// True when every series part is below `rel * scale` up to its known order.
    pub fn negligible(&self, rel: f64, scale: f64) -> bool {
        self.max_abs() <= rel * scale
    }
}

/// `P` acting on `s`, ramifying `P` when `s` lives over a ramified variable.
pub fn apply_symbolic(p: &OreOperator, s: &SymbolicSolution) -> SymbolicSolution {
    let ctx = s.ctx();
    let pr = p.ctx().ramification;
    let p = if ctx.ramification != pr && ctx.ramification % pr == 0 {
        p.ramify(ctx.ramification / pr)
    } else {
        p.clone()
    };
    let mut acc = SymbolicSolution::zero(ctx);
    for (i, a) in p.terms() {
        acc = acc.add(&s.sigma_pow(*i).mul_series(a));
    }
    acc
}

/// Largest `|(P s)_k| / sum |terms contributing to (P s)_k|` over all
/// characters, log components and known positions.
pub fn componentwise_residual(p: &OreOperator, s: &SymbolicSolution) -> f64 {
    let ctx = s.ctx();
    let pr = p.ctx().ramification;
    let p = if ctx.ramification != pr && ctx.ramification % pr == 0 {
        p.ramify(ctx.ramification / pr)
    } else {
        p.clone()
    };
    let aq = C::new(ctx.q.norm(), 0.0);
    let mut worst: f64 = 0.0;
    for t in s.terms() {
        let single = SymbolicSolution {
            terms: vec![t.clone()],
            ctx: ctx.clone(),
        };
        let r = apply_symbolic(&p, &single);
        let base = t.poly.map(|f| f.abs());
        let mut mag = LogPolynomial::zero();
        for (i, a) in p.terms() {
            let f = q_pow(C::new(t.c.norm(), 0.0), *i) * q_pow(aq, -t.mu * i * (i - 1) / 2);
            let part = base.sigma_pow(aq, *i).map(|g| g.abs()).shift(-t.mu * i).scale(f);
            mag = mag.add(&part.mul_series(&a.abs()));
        }
        for rt in r.terms() {
            let Some(l) = ctx.q_power_index(rt.c / t.c) else {
                return f64::INFINITY;
            };
            for (j, comp) in rt.poly.comps().iter().enumerate() {
                let scale = mag.comp(j).map(|m| m.shift(-l)).unwrap_or_else(|| ctx.zero());
                for (k, v) in comp.terms() {
                    if k > comp.known_to() {
                        break;
                    }
                    let den = scale.coeff(k).norm();
                    let ratio = if den > 0.0 { v.norm() / den } else { f64::INFINITY };
                    worst = worst.max(ratio);
                }
            }
        }
    }
    worst
}

/// Solves `(sigma_q - 1) f = g` with the constant of `f_0` set to zero.
pub fn q_integrate(ctx: &QContext, g: &LogPolynomial) -> Result<LogPolynomial> {
    let q = ctx.q;
    let Some(d) = g.degree() else {
        return Ok(LogPolynomial::zero());
    };
    let k = d + 1;
    let kt = g.known_to();
    let mut f: Vec<LaurentSeries> = vec![ctx.zero(); k + 1];
    f[k] = LaurentSeries::monomial(g.comps[k - 1].pi0(), 0, kt, ctx.tol_zero);
    for i in (0..k).rev() {
        let rest = g.comps[i].sub(&f[i + 1].sigma(q)).termless().i_q(q)?;
        f[i] = if i > 0 {
            &LaurentSeries::monomial(g.comps[i - 1].pi0(), 0, kt, ctx.tol_zero) + &rest
        } else {
            rest
        };
    }
    Ok(LogPolynomial::new(f))
}

/// `(C Z^eps sigma_Q - 1) F = G` on one residue class, `eps = +-1`.
fn unit_shift_solve(cc: C, qq: C, eps: i64, g: &LaurentSeries) -> LaurentSeries {
    let tol = g.tol();
    if g.is_zero() {
        return LaurentSeries::zero(g.known_to() + eps.min(0).abs(), tol);
    }
    let lo = g.v0();
    let kt = g.known_to();
    let mut f = Vec::new();
    if eps > 0 {
        // F_k = C Q^(k-1) F_(k-1) - G_k.
        let mut prev = C::new(0.0, 0.0);
        for k in lo..=kt {
            let v = cc * q_pow(qq, k - 1) * prev - g.coeff(k);
            f.push(v);
            prev = v;
        }
        LaurentSeries::new(lo, f, kt, tol).capped()
    } else {
        // F_(k+1) = (G_k + F_k) / (C Q^(k+1)).
        let mut prev = C::new(0.0, 0.0);
        for k in lo..=kt {
            let v = (g.coeff(k) + prev) / (cc * q_pow(qq, k + 1));
            f.push(v);
            prev = v;
        }
        LaurentSeries::new(lo + 1, f, kt + 1, tol).capped()
    }
}

/// `(c z^m sigma - 1) f = g` for a series `g`, `m != 0`, split into residue
/// classes mod `|m|`.
fn shift_solve(ctx: &QContext, c: C, m: i64, g: &LaurentSeries) -> LaurentSeries {
    let big_m = m.abs();
    let qq = ctx.q_pow(big_m);
    let parts: Vec<LaurentSeries> = (0..big_m)
        .map(|i| unit_shift_solve(c * ctx.q_pow(i), qq, m.signum(), &g.residue_class(big_m, i)))
        .collect();
    LaurentSeries::from_residue_classes(&parts, g.tol())
}

/// `(c sigma - 1) f = g` coefficientwise, `c` outside `q^Z`.
fn diagonal_solve(ctx: &QContext, c: C, g: &LaurentSeries) -> LaurentSeries {
    g.map_coeffs(|k, a| a / (c * ctx.q_pow(k) - 1.0))
}

/// `(c z^m sigma - 1) F = G` on `K[l_q]`, solved from the top log-degree down.
fn phi_solve(ctx: &QContext, c: C, m: i64, g: &LogPolynomial) -> Result<LogPolynomial> {
    if m == 0 {
        if let Some(l) = ctx.q_power_index(c) {
            // z^l conjugates c sigma - 1 with q^l c sigma - 1 = sigma - 1.
            return Ok(q_integrate(ctx, &g.shift(l))?.shift(-l));
        }
    }
    let Some(d) = g.degree() else {
        return Ok(LogPolynomial::zero());
    };
    let q = ctx.q;
    let mut f: Vec<LaurentSeries> = vec![ctx.zero(); d + 1];
    for i in (0..=d).rev() {
        let rhs = if i < d {
            // The l^(i) component of c z^m sigma(f^(i+1) l^(i+1)).
            g.comps[i].sub(&f[i + 1].sigma(q).shift(m).scale(c))
        } else {
            g.comps[i].clone()
        };
        f[i] = if m == 0 {
            diagonal_solve(ctx, c, &rhs)
        } else {
            shift_solve(ctx, c, m, &rhs)
        };
    }
    Ok(LogPolynomial::new(f))
}

/// Solves `(d z^nu sigma - 1) f = target` componentwise.
///
/// In convergent mode a component `S_mu` with `nu > mu` has no convergent
/// solution in general and is refused.
pub fn solve_first_order(d: C, nu: i64, target: &SymbolicSolution) -> Result<SymbolicSolution> {
    let ctx = target.ctx();
    let mut out = Vec::new();
    for t in target.terms() {
        if ctx.mode == Mode::Convergent && nu > t.mu {
            return Err(obstruction(ctx, t.c * d, nu - t.mu, &t.poly));
        }
        let poly = phi_solve(ctx, t.c * d, nu - t.mu, &t.poly)?;
        out.push(SymbolicTerm { c: t.c, mu: t.mu, poly });
    }
    Ok(SymbolicSolution::new(ctx, out))
}

fn obstruction(ctx: &QContext, c: C, m: i64, g: &LogPolynomial) -> Error {
    let values = match (m, g.degree()) {
        (m, Some(0)) if m > 0 => crate::index::first_order_obstruction(ctx, c, m, &g.comps[0]),
        _ => Vec::new(),
    };
    Error::ConvergentObstruction { values }
}

/// `L f = g` for `L = (z^mu sigma - c) u^-1`: `f = u w` with
/// `(c^-1 z^mu sigma - 1) w = g / c`.
fn solve_factor(f: &FirstOrderFactor, g: &SymbolicSolution) -> Result<SymbolicSolution> {
    let ci = f.c.inv();
    Ok(solve_first_order(ci, f.mu, &g.scale(ci))?.mul_series(&f.u))
}

/// Basis of solutions of `L_1 ... L_n`, built from the right.
fn solve_chain(ctx: &QContext, factors: &[FirstOrderFactor]) -> Result<Vec<SymbolicSolution>> {
    let Some((last, rest)) = factors.split_last() else {
        return Ok(Vec::new());
    };
    let mut basis = vec![SymbolicSolution::character(ctx, last.c, last.mu, last.u.clone())];
    for j in (0..rest.len()).rev() {
        let l = &factors[j];
        let mut g = SymbolicSolution::character(ctx, l.c, l.mu, l.u.clone());
        for r in &factors[j + 1..] {
            g = solve_factor(r, &g)?;
        }
        basis.push(g);
    }
    Ok(basis)
}

/// Recomputes the series of a log-free single-term solution from the
/// recurrence that `P` induces on its coefficients. Products along the chain
/// cancel badly once the true coefficients drop below their roundoff; the
/// recurrence keeps each coefficient relatively accurate. Positions where the
/// leading part vanishes (resonances) keep the chain's value.
fn refine(p: &OreOperator, s: SymbolicSolution) -> SymbolicSolution {
    let [t] = s.terms() else {
        return s;
    };
    if t.poly.degree() != Some(0) {
        return s;
    }
    let ctx = s.ctx().clone();
    let pr = p.ctx().ramification;
    let p = if ctx.ramification != pr && ctx.ramification % pr == 0 {
        p.ramify(ctx.ramification / pr)
    } else {
        p.clone()
    };
    let (q, c, mu) = (ctx.q, t.c, t.mu);
    let u = &t.poly.comps()[0];
    let terms: Vec<(i64, &LaurentSeries)> = p
        .terms()
        .iter()
        .filter(|(_, a)| !a.is_zero())
        .map(|(i, a)| (*i, a))
        .collect();
    let Some(kappa) = terms.iter().map(|(i, a)| a.v0() - mu * i).min() else {
        return s;
    };
    let top = terms
        .iter()
        .filter(|(i, a)| a.v0() - mu * i == kappa)
        .map(|(i, _)| *i)
        .max()
        .unwrap_or(0);
    let v = u.v0();
    let kt = terms
        .iter()
        .map(|(i, a)| a.known_to() - mu * i - kappa + v)
        .fold(u.known_to(), i64::min);
    if kt <= v {
        return s;
    }
    // Everything is scaled by q^(-top n) so that large n stays representable.
    let weight: Vec<C> = terms
        .iter()
        .map(|(i, _)| q_pow(c, *i) * q_pow(q, -mu * i * (i - 1) / 2))
        .collect();
    let mut coeffs: Vec<C> = (v..=kt).map(|n| u.coeff(n)).collect();
    for n in v + 1..=kt {
        let (mut lead, mut lead_mag) = (C::new(0.0, 0.0), 0.0);
        let mut rest = C::new(0.0, 0.0);
        for ((i, a), w) in terms.iter().zip(&weight) {
            for (j, aij) in a.terms() {
                let m = n - (j - mu * i - kappa);
                if m < v {
                    break;
                }
                let x = aij * w * q_pow(q, i * m - top * n);
                if m == n {
                    lead += x;
                    lead_mag += x.norm();
                } else {
                    rest += x * coeffs[(m - v) as usize];
                }
            }
        }
        if lead.norm() > 1e-8 * lead_mag {
            coeffs[(n - v) as usize] = -rest / lead;
        }
    }
    let refined = LaurentSeries::new(v, coeffs, kt, u.tol()).capped();
    SymbolicSolution::character(&ctx, c, mu, refined)
}

/// `deg_abs(P)` solutions built from the full factorization.
pub fn solve_all_formal(p: &OreOperator) -> Result<Vec<SymbolicSolution>> {
    if p.is_zero() {
        return Err(Error::ZeroOperator);
    }
    let fz = full_factorization(p)?;
    Ok(solve_chain(&fz.ctx, &fz.factors)?
        .into_iter()
        .map(|s| refine(p, s))
        .collect())
}

/// Solutions from the factors of the last slope, which are convergent.
pub fn adams_solutions(p: &OreOperator) -> Result<Vec<SymbolicSolution>> {
    if p.is_zero() {
        return Err(Error::ZeroOperator);
    }
    let fz = full_factorization(p)?;
    let Some(top) = fz.factors.last().map(|f| f.mu) else {
        return Ok(Vec::new());
    };
    let start = fz.factors.iter().rposition(|f| f.mu != top).map_or(0, |i| i + 1);
    let ctx = fz.ctx.clone().with_mode(Mode::Convergent);
    Ok(solve_chain(&ctx, &fz.factors[start..])?
        .into_iter()
        .map(|s| refine(p, s))
        .collect())
}

fn determinant(m: &[Vec<SymbolicSolution>], ctx: &QContext) -> SymbolicSolution {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = SymbolicSolution::zero(ctx);
    for j in 0..n {
        let minor: Vec<Vec<SymbolicSolution>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, x)| x.clone())
                    .collect()
            })
            .collect();
        let t = m[0][j].mul(&determinant(&minor, ctx));
        acc = if j % 2 == 0 { acc.add(&t) } else { acc.sub(&t) };
    }
    acc
}

/// `det(sigma_q^i f_j)` in the symbol algebra.
pub fn q_wronskian(fs: &[SymbolicSolution]) -> Result<SymbolicSolution> {
    let Some(first) = fs.first() else {
        return Err(Error::InvalidArgument("empty family".into()));
    };
    let ctx = first.ctx().clone();
    let rows: Vec<Vec<SymbolicSolution>> = (0..fs.len())
        .map(|i| fs.iter().map(|f| f.sigma_pow(i as i64)).collect())
        .collect();
    Ok(determinant(&rows, &ctx))
}

/// Numeric value at `z` (in the solution's own variable).
pub fn evaluate(s: &SymbolicSolution, z: C) -> Result<C> {
    let ctx = s.ctx();
    let r = z.norm();
    let needs_log = s.terms().iter().any(|t| t.poly.degree().unwrap_or(0) > 0);
    let l = if needs_log { l_q_eval(ctx, z)? } else { C::new(0.0, 0.0) };
    let mut acc = C::new(0.0, 0.0);
    for t in s.terms() {
        for f in t.poly.comps() {
            let tail = f.tail_estimate(r);
            let size = f.abs().eval(C::new(r, 0.0)).re;
            if tail > ctx.tol_match * size {
                return Err(Error::TruncationDominates { tail, radius: r });
            }
        }
        let ch = if t.c == C::new(1.0, 0.0) {
            C::new(1.0, 0.0)
        } else {
            e_qc_eval(ctx, t.c, z)?
        };
        let th = if t.mu == 0 {
            C::new(1.0, 0.0)
        } else {
            if t.mu > 0 && spiral_distance(ctx, C::new(1.0, 0.0), z) < DEFAULT_EXCLUSION * r {
                return Err(Error::NearPole(z));
            }
            big_theta(ctx, z)?.powi(-t.mu as i32)
        };
        acc += ch * th * t.poly.eval(z, l);
    }
    Ok(acc)
}

/// Extends solution values outward: each sample point `z` whose predecessors
/// `q^(1-i) z`, `i = 1..n`, are all sampled yields the value at `q z` through
/// `a_n(w) f(q^n w) = -sum_(j<n) a_j(w) f(q^j w)`, `w = q^(1-n) z`.
pub fn continue_meromorphic(p: &OreOperator, samples: &[(C, C)]) -> Result<Vec<(C, C)>> {
    let (Some(lo), Some(hi)) = (p.alpha(), p.beta()) else {
        return Err(Error::ZeroOperator);
    };
    let ctx = p.ctx();
    let n = hi - lo;
    let lookup = |x: C| -> Option<C> {
        samples
            .iter()
            .find(|(z, _)| (z - x).norm() <= 1e-10 * x.norm().max(1e-300))
            .map(|s| s.1)
    };
    let mut out = Vec::new();
    for (z, _) in samples {
        let target = ctx.q * z;
        let w = target * ctx.q_pow(-n);
        let vals: Option<Vec<C>> = (0..n).map(|j| lookup(w * ctx.q_pow(j))).collect();
        let Some(vals) = vals else { continue };
        let coeff = |j: i64| p.coeff(lo + j).map_or(C::new(0.0, 0.0), |a| a.eval(w));
        let an = coeff(n);
        let scale = (0..=n).map(|j| coeff(j).norm()).fold(0.0, f64::max);
        if an.norm() <= ctx.tol_zero * scale {
            return Err(Error::DivisionNearZero(w));
        }
        let s: C = (0..n).map(|j| coeff(j) * vals[j as usize]).sum();
        out.push((target, -s / an));
    }
    Ok(out)
}
