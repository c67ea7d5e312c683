//! Truncated Laurent series over the complex numbers, the dilation
//! `f(z) -> f(qz)`, the constant-term projector and its complement inverse.
//!
//! Every series records the highest exponent whose coefficient is trusted
//! (`known_to`). Operations compute the precision of their output from the
//! precision of their inputs instead of padding with zeros.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C = Complex64;

/// Valuation reported for the zero series.
pub const ZERO_VALUATION: i64 = i64::MAX;

/// Coefficient magnitude beyond which recurrences stop and shorten `known_to`.
pub const GROWTH_CAP: f64 = 1e150;

pub const DEFAULT_TRUNC_ORDER: i64 = 40;
pub const DEFAULT_TOL_ZERO: f64 = 1e-12;
pub const DEFAULT_TOL_MATCH: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Formal,
    Convergent,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Formal => "formal",
            Mode::Convergent => "convergent",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QContext {
    pub q: C,
    pub tau: C,
    pub trunc_order: i64,
    pub tol_zero: f64,
    pub tol_match: f64,
    pub mode: Mode,
    pub ramification: u32,
}

impl QContext {
    pub fn new(q: C) -> Result<Self> {
        if !(q.norm() > 1.0) || !q.is_finite() {
            return Err(Error::InvalidContext(format!("|q| must exceed 1, got {q}")));
        }
        Ok(QContext {
            q,
            tau: q.ln(),
            trunc_order: DEFAULT_TRUNC_ORDER,
            tol_zero: DEFAULT_TOL_ZERO,
            tol_match: DEFAULT_TOL_MATCH,
            mode: Mode::Formal,
            ramification: 1,
        })
    }

    pub fn real(q: f64) -> Result<Self> {
        Self::new(C::new(q, 0.0))
    }

    pub fn with_order(mut self, n: i64) -> Self {
        assert!(n >= 1, "truncation order must be positive");
        self.trunc_order = n;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_tol_zero(mut self, tol: f64) -> Self {
        self.tol_zero = tol;
        self
    }

    /// Context for the variable `z_l` with `z = z_l^l`, `q_l = exp(tau / l)`.
    pub fn ramified(&self, l: u32) -> QContext {
        assert!(l >= 1);
        let tau = self.tau / l as f64;
        QContext {
            q: tau.exp(),
            tau,
            trunc_order: self.trunc_order,
            ramification: self.ramification * l,
            ..self.clone()
        }
    }

    pub fn q_pow(&self, k: i64) -> C {
        q_pow(self.q, k)
    }

    pub fn log_abs_q(&self) -> f64 {
        self.q.norm().ln()
    }

    pub fn zero(&self) -> LaurentSeries {
        LaurentSeries::zero(self.trunc_order, self.tol_zero)
    }

    pub fn one(&self) -> LaurentSeries {
        self.constant(C::new(1.0, 0.0))
    }

    pub fn constant(&self, c: C) -> LaurentSeries {
        self.monomial(c, 0)
    }

    pub fn monomial(&self, c: C, k: i64) -> LaurentSeries {
        LaurentSeries::monomial(c, k, self.trunc_order, self.tol_zero)
    }

    /// Series `sum coeffs[j] z^(v0+j)` trusted up to the context order.
    pub fn series(&self, v0: i64, coeffs: &[C]) -> LaurentSeries {
        LaurentSeries::new(v0, coeffs.to_vec(), self.trunc_order, self.tol_zero)
    }

    /// Split `c = q^eps * cbar` with `1 <= |cbar| < |q|`.
    pub fn decompose(&self, c: C) -> (i64, C) {
        decompose(self.q, c)
    }

    /// `Some(m)` when `x` equals `q^m` within `tol_match`.
    pub fn q_power_index(&self, x: C) -> Option<i64> {
        if x.norm() == 0.0 {
            return None;
        }
        let m = (x.norm().ln() / self.log_abs_q()).round() as i64;
        let r = x / self.q_pow(m);
        if (r - 1.0).norm() < self.tol_match {
            Some(m)
        } else {
            None
        }
    }
}

pub fn q_pow(q: C, k: i64) -> C {
    if k.unsigned_abs() <= i32::MAX as u64 {
        q.powi(k as i32)
    } else {
        (q.ln() * k as f64).exp()
    }
}

pub fn decompose(q: C, c: C) -> (i64, C) {
    let lq = q.norm().ln();
    let mut eps = (c.norm().ln() / lq).floor() as i64;
    let mut cbar = c / q_pow(q, eps);
    // Snap values that landed on the wrong side of a boundary by roundoff.
    let snap = 1e-10;
    if cbar.norm() >= q.norm() * (1.0 - snap) {
        eps += 1;
        cbar /= q;
    } else if cbar.norm() < 1.0 - snap {
        eps -= 1;
        cbar *= q;
    }
    (eps, cbar)
}

/// Truncated Laurent series `sum_k coeffs[k] z^(v0 + k)`, trusted for exponents
/// up to `known_to`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentSeries {
    v0: i64,
    coeffs: Vec<C>,
    known_to: i64,
    tol: f64,
}

impl LaurentSeries {
    /// Builds a series, dropping coefficients past `known_to` and leading exact zeros.
    pub fn new(v0: i64, mut coeffs: Vec<C>, known_to: i64, tol: f64) -> Self {
        let keep = (known_to - v0 + 1).max(0) as usize;
        coeffs.truncate(keep);
        coeffs.resize(keep, C::new(0.0, 0.0));
        Self::strip(v0, coeffs, known_to, tol)
    }

    fn strip(v0: i64, coeffs: Vec<C>, known_to: i64, tol: f64) -> Self {
        match coeffs.iter().position(|c| *c != C::new(0.0, 0.0)) {
            None => Self::zero(known_to, tol),
            Some(first) => LaurentSeries {
                v0: v0 + first as i64,
                coeffs: coeffs[first..].to_vec(),
                known_to,
                tol,
            },
        }
    }

    pub fn zero(known_to: i64, tol: f64) -> Self {
        LaurentSeries {
            v0: ZERO_VALUATION,
            coeffs: Vec::new(),
            known_to,
            tol,
        }
    }

    pub fn monomial(c: C, k: i64, known_to: i64, tol: f64) -> Self {
        if c == C::new(0.0, 0.0) || k > known_to {
            return Self::zero(known_to, tol);
        }
        let mut coeffs = vec![C::new(0.0, 0.0); (known_to - k + 1) as usize];
        coeffs[0] = c;
        LaurentSeries {
            v0: k,
            coeffs,
            known_to,
            tol,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Exponent of the first nonzero coefficient, `ZERO_VALUATION` for zero.
    pub fn v0(&self) -> i64 {
        self.v0
    }

    pub fn valuation(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.v0)
        }
    }

    pub fn known_to(&self) -> i64 {
        self.known_to
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    /// Coefficient of `z^m`; zero outside the stored range.
    pub fn coeff(&self, m: i64) -> C {
        if self.is_zero() || m < self.v0 || m > self.known_to {
            C::new(0.0, 0.0)
        } else {
            self.coeffs[(m - self.v0) as usize]
        }
    }

    pub fn leading(&self) -> C {
        self.coeffs.first().copied().unwrap_or(C::new(0.0, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Nonzero `(exponent, coefficient)` pairs.
    pub fn terms(&self) -> impl Iterator<Item = (i64, C)> + '_ {
        let v0 = self.v0;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != C::new(0.0, 0.0))
            .map(move |(k, c)| (v0 + k as i64, *c))
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// Lowers `known_to` to `k` (no effect if already lower).
    pub fn truncate(&self, k: i64) -> Self {
        if k >= self.known_to {
            return self.clone();
        }
        if self.is_zero() {
            return Self::zero(k, self.tol);
        }
        let keep = (k - self.v0 + 1).max(0) as usize;
        Self::strip(
            self.v0,
            self.coeffs[..keep.min(self.coeffs.len())].to_vec(),
            k,
            self.tol,
        )
    }

    /// Flushes leading coefficients below `tol` times the largest magnitude.
    pub fn flushed(&self) -> Self {
        let scale = self.max_abs();
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                if c.norm() <= self.tol * scale {
                    C::new(0.0, 0.0)
                } else {
                    *c
                }
            })
            .collect();
        Self::strip(self.v0, coeffs, self.known_to, self.tol)
    }

    /// Shortens `known_to` before the first coefficient above `GROWTH_CAP`
    /// (or non-finite), so that divergent recurrences stay representable.
    pub fn capped(&self) -> Self {
        match self.coeffs.iter().position(|c| !(c.norm() <= GROWTH_CAP)) {
            None => self.clone(),
            Some(p) => self.truncate(self.v0 + p as i64 - 1),
        }
    }

    /// Builds a series from values and per-position magnitudes, flushing
    /// values that are roundoff relative to their magnitude.
    fn from_scaled(lo: i64, vals: Vec<C>, scale: Vec<f64>, known_to: i64, tol: f64) -> Self {
        let vals = vals
            .into_iter()
            .zip(scale)
            .map(|(v, s)| if v.norm() <= tol * s { C::new(0.0, 0.0) } else { v })
            .collect();
        Self::strip(lo, vals, known_to, tol)
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        let kt = self.known_to.min(other.known_to);
        let tol = self.tol.max(other.tol);
        let lo = self.v0.min(other.v0);
        if lo == ZERO_VALUATION || lo > kt {
            return Self::zero(kt, tol);
        }
        let len = (kt - lo + 1) as usize;
        let mut vals = Vec::with_capacity(len);
        let mut scale = Vec::with_capacity(len);
        for m in lo..=kt {
            let a = self.coeff(m);
            let b = other.coeff(m);
            vals.push(a + b * sign);
            scale.push(a.norm().max(b.norm()));
        }
        Self::from_scaled(lo, vals, scale, kt, tol)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, -1.0)
    }

    pub fn neg(&self) -> Self {
        self.scale(C::new(-1.0, 0.0))
    }

    pub fn scale(&self, c: C) -> Self {
        if c == C::new(0.0, 0.0) {
            return Self::zero(self.known_to, self.tol);
        }
        LaurentSeries {
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
            ..self.clone()
        }
    }

    /// Multiplication by `z^k`.
    pub fn shift(&self, k: i64) -> Self {
        if self.is_zero() {
            return Self::zero(self.known_to + k, self.tol);
        }
        LaurentSeries {
            v0: self.v0 + k,
            coeffs: self.coeffs.clone(),
            known_to: self.known_to + k,
            tol: self.tol,
        }
    }

    /// Cauchy product; trusted up to `min(a.known_to + b.v0, b.known_to + a.v0)`.
    pub fn mul(&self, other: &Self) -> Self {
        let tol = self.tol.max(other.tol);
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return Self::zero(self.known_to + other.known_to + 1, tol),
            (true, false) => return Self::zero(self.known_to + other.v0, tol),
            (false, true) => return Self::zero(other.known_to + self.v0, tol),
            _ => {}
        }
        let kt = (self.known_to + other.v0).min(other.known_to + self.v0);
        let lo = self.v0 + other.v0;
        if kt < lo {
            return Self::zero(kt, tol);
        }
        let len = (kt - lo + 1) as usize;
        let mut vals = vec![C::new(0.0, 0.0); len];
        let mut scale = vec![0.0; len];
        for (i, a) in self.coeffs.iter().enumerate().take(len) {
            if *a == C::new(0.0, 0.0) {
                continue;
            }
            let an = a.norm();
            for (j, b) in other.coeffs.iter().enumerate().take(len - i) {
                vals[i + j] += a * b;
                scale[i + j] += an * b.norm();
            }
        }
        Self::from_scaled(lo, vals, scale, kt, tol)
    }

    /// Multiplicative inverse, with the same relative precision.
    pub fn invert(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::ZeroSeries);
        }
        let rel = self.known_to - self.v0;
        let n = (rel + 1) as usize;
        let a = &self.coeffs;
        let a0inv = a[0].inv();
        let mut b = vec![C::new(0.0, 0.0); n];
        b[0] = a0inv;
        for k in 1..n {
            let mut s = C::new(0.0, 0.0);
            for j in 1..=k.min(a.len() - 1) {
                s += a[j] * b[k - j];
            }
            b[k] = -s * a0inv;
        }
        Ok(LaurentSeries::new(-self.v0, b, -self.v0 + rel, self.tol))
    }

    /// `f(z) -> f(q^k z)`: the coefficient of `z^m` is multiplied by `q^(k m)`.
    pub fn sigma_pow(&self, q: C, k: i64) -> Self {
        if k == 0 || self.is_zero() {
            return self.clone();
        }
        let qk = q_pow(q, k);
        let mut p = q_pow(qk, self.v0);
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            coeffs.push(c * p);
            p *= qk;
        }
        LaurentSeries { coeffs, ..self.clone() }
    }

    pub fn sigma(&self, q: C) -> Self {
        self.sigma_pow(q, 1)
    }

    /// Constant term.
    pub fn pi0(&self) -> C {
        self.coeff(0)
    }

    /// The series without its constant term.
    pub fn termless(&self) -> Self {
        let c = self.pi0();
        if c == C::new(0.0, 0.0) {
            return self.clone();
        }
        let mut coeffs = self.coeffs.clone();
        coeffs[(0 - self.v0) as usize] = C::new(0.0, 0.0);
        Self::strip(self.v0, coeffs, self.known_to, self.tol)
    }

    /// Inverse of `sigma_q - 1` on series without constant term:
    /// `a_i z^i -> a_i / (q^i - 1) z^i`.
    pub fn i_q(&self, q: C) -> Result<Self> {
        let c0 = self.pi0();
        if c0.norm() > self.tol * self.max_abs().max(1.0) {
            return Err(Error::NonzeroConstantTerm(c0));
        }
        if self.is_zero() {
            return Ok(self.clone());
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (k, c) in self.coeffs.iter().enumerate() {
            let m = self.v0 + k as i64;
            if m == 0 {
                coeffs.push(C::new(0.0, 0.0));
            } else {
                coeffs.push(c / (q_pow(q, m) - 1.0));
            }
        }
        Ok(Self::strip(self.v0, coeffs, self.known_to, self.tol))
    }

    /// Substitution `z -> z^l`.
    pub fn compose_power(&self, l: u32) -> Self {
        let l64 = l as i64;
        let kt = l64 * (self.known_to + 1) - 1;
        if self.is_zero() {
            return Self::zero(kt, self.tol);
        }
        let lo = l64 * self.v0;
        let mut coeffs = vec![C::new(0.0, 0.0); (kt - lo + 1) as usize];
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs[k * l as usize] = *c;
        }
        Self::strip(lo, coeffs, kt, self.tol)
    }

    /// The part `z^i F(z^m)` with exponents `= i mod m`, returned as `F`.
    pub fn residue_class(&self, m: i64, i: i64) -> Self {
        assert!(m >= 1 && (0..m).contains(&i));
        let kt = (self.known_to - i).div_euclid(m);
        if self.is_zero() {
            return Self::zero(kt, self.tol);
        }
        let lo = (self.v0 - i).div_euclid(m);
        let mut coeffs = Vec::new();
        for k in lo..=kt {
            coeffs.push(self.coeff(k * m + i));
        }
        Self::new(lo, coeffs, kt, self.tol)
    }

    /// Reassembles `sum_i z^i F_i(z^m)` from its residue classes.
    pub fn from_residue_classes(parts: &[LaurentSeries], tol: f64) -> Self {
        let m = parts.len() as i64;
        let kt = parts
            .iter()
            .enumerate()
            .map(|(i, p)| (p.known_to + 1) * m + i as i64 - 1)
            .min()
            .unwrap_or(0);
        let lo = parts
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(i, p)| p.v0 * m + i as i64)
            .min();
        let Some(lo) = lo else {
            return Self::zero(kt, tol);
        };
        if lo > kt {
            return Self::zero(kt, tol);
        }
        let mut coeffs = vec![C::new(0.0, 0.0); (kt - lo + 1) as usize];
        for (idx, slot) in coeffs.iter_mut().enumerate() {
            let e = lo + idx as i64;
            let i = e.rem_euclid(m);
            *slot = parts[i as usize].coeff((e - i) / m);
        }
        Self::new(lo, coeffs, kt, tol)
    }

    pub fn map_coeffs(&self, f: impl Fn(i64, C) -> C) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| f(self.v0 + k as i64, *c))
            .collect();
        Self::strip(self.v0, coeffs, self.known_to, self.tol)
    }

    /// Coefficientwise absolute values.
    pub fn abs(&self) -> Self {
        self.map_coeffs(|_, c| C::new(c.norm(), 0.0))
    }

    /// Partial sum at `z`.
    pub fn eval(&self, z: C) -> C {
        if self.is_zero() {
            return C::new(0.0, 0.0);
        }
        let mut acc = C::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc * z.powi(self.v0 as i32)
    }

    /// Largest of the last three tracked terms `|a_n z^n|`, a proxy for the tail.
    pub fn tail_estimate(&self, r: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let n = self.coeffs.len();
        (n.saturating_sub(3)..n)
            .map(|k| self.coeffs[k].norm() * r.powi((self.v0 + k as i64) as i32))
            .fold(0.0, f64::max)
    }

    /// Largest coefficient difference up to the common precision.
    pub fn max_diff(&self, other: &Self) -> f64 {
        let kt = self.known_to.min(other.known_to);
        let lo = self.v0.min(other.v0);
        if lo == ZERO_VALUATION || lo > kt {
            return 0.0;
        }
        (lo..=kt)
            .map(|m| (self.coeff(m) - other.coeff(m)).norm())
            .fold(0.0, f64::max)
    }

    /// Equality up to the common precision, relative to the larger magnitude.
    pub fn approx_eq(&self, other: &Self, rel: f64) -> bool {
        let scale = self.max_abs().max(other.max_abs()).max(f64::MIN_POSITIVE);
        self.max_diff(other) <= rel * scale
    }
}

impl fmt::Display for LaurentSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0 + O(z^{})", self.known_to + 1);
        }
        for (e, c) in self.terms() {
            write!(f, "({}{:+}i)z^{} + ", c.re, c.im, e)?;
        }
        write!(f, "O(z^{})", self.known_to + 1)
    }
}

impl Add for &LaurentSeries {
    type Output = LaurentSeries;
    fn add(self, rhs: Self) -> LaurentSeries {
        LaurentSeries::add(self, rhs)
    }
}

impl Sub for &LaurentSeries {
    type Output = LaurentSeries;
    fn sub(self, rhs: Self) -> LaurentSeries {
        LaurentSeries::sub(self, rhs)
    }
}

impl Mul for &LaurentSeries {
    type Output = LaurentSeries;
    fn mul(self, rhs: Self) -> LaurentSeries {
        LaurentSeries::mul(self, rhs)
    }
}

impl Neg for &LaurentSeries {
    type Output = LaurentSeries;
    fn neg(self) -> LaurentSeries {
        LaurentSeries::neg(self)
    }
}
