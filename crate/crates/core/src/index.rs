//! Kernel and cokernel dimensions of operators acting on series, companion
//! systems, and the q-Borel description of the convergent cokernel.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::factor::full_factorization;
use crate::factor::growth_diagnostic;
use crate::ore::OreOperator;
use crate::qseries::{q_pow, LaurentSeries, Mode, QContext, C};
use crate::solve::solve_all_formal;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexReport {
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub index: i64,
    pub mode: Mode,
}

impl IndexReport {
    pub fn new(dim_ker: usize, dim_coker: usize, mode: Mode) -> Self {
        IndexReport {
            dim_ker,
            dim_coker,
            index: dim_ker as i64 - dim_coker as i64,
            mode,
        }
    }
}

/// Dimensions for `sigma_q - d z^nu` acting on series.
pub fn first_order_index(ctx: &QContext, d: C, nu: i64) -> Result<IndexReport> {
    if d.norm() == 0.0 {
        return Err(Error::InvalidArgument("d must be nonzero".into()));
    }
    let (_, dbar) = ctx.decompose(d);
    let trivial_class = ctx.q_power_index(dbar).is_some();
    let (k, c) = match nu {
        0 if trivial_class => (1, 1),
        0 => (0, 0),
        n if n > 0 => (0, 0),
        n => match ctx.mode {
            Mode::Formal => (0, 0),
            Mode::Convergent => (0, (-n) as usize),
        },
    };
    Ok(IndexReport::new(k, c, ctx.mode))
}

/// Kernel dimension from the formal solution basis: combinations whose symbolic
/// parts other than a plain series in the original variable cancel. In
/// convergent mode, divergent directions are removed as well.
fn kernel_dimension(p: &OreOperator) -> Result<usize> {
    let ctx = p.ctx();
    let sols = solve_all_formal(&p.with_ctx(&ctx.clone().with_mode(Mode::Formal)))?;
    if sols.is_empty() {
        return Ok(0);
    }
    let ram = sols[0].ctx().ramification / ctx.ramification.max(1);
    let n = sols.len();
    // Columns: per solution, the flattened coefficients that are not in K.
    let mut keys: Vec<(C, i64, usize)> = Vec::new();
    for s in &sols {
        for t in s.terms() {
            for k in 0..t.poly.comps().len() {
                if !keys
                    .iter()
                    .any(|(c, mu, kk)| (c - t.c).norm() < ctx.tol_match && *mu == t.mu && *kk == k)
                {
                    keys.push((t.c, t.mu, k));
                }
            }
        }
    }
    let plain = |c: C, mu: i64, k: usize| (c - 1.0).norm() < ctx.tol_match && mu == 0 && k == 0;
    let lo = sols
        .iter()
        .flat_map(|s| s.terms().iter().flat_map(|t| t.poly.comps().iter().map(|c| c.v0())))
        .min()
        .unwrap_or(0);
    let hi = sols
        .iter()
        .map(|s| s.terms().iter().map(|t| t.poly.known_to()).min().unwrap_or(i64::MAX))
        .min()
        .unwrap_or(0);
    let hi = hi.min(lo + 400);
    let coeff_of = |s: &crate::solve::SymbolicSolution, key: (C, i64, usize), m: i64| -> C {
        s.terms()
            .iter()
            .find(|t| (t.c - key.0).norm() < ctx.tol_match && t.mu == key.1)
            .and_then(|t| t.poly.comp(key.2))
            .map_or(C::new(0.0, 0.0), |f| f.coeff(m))
    };
    let mut rows: Vec<Vec<C>> = Vec::new();
    let mut series_rows: Vec<(i64, Vec<C>)> = Vec::new();
    for key in &keys {
        for m in lo..=hi {
            let row: Vec<C> = sols.iter().map(|s| coeff_of(s, *key, m)).collect();
            if plain(key.0, key.1, key.2) {
                if ram > 1 && m.rem_euclid(ram as i64) != 0 {
                    rows.push(row);
                } else {
                    series_rows.push((m, row));
                }
            } else {
                rows.push(row);
            }
        }
    }
    let null = nullspace(&rows, n)?;
    if null.is_empty() || ctx.mode == Mode::Formal {
        return Ok(null.len());
    }
    // Kernel series in the nullspace basis.
    let series: Vec<LaurentSeries> = null
        .iter()
        .map(|v| {
            let coeffs: Vec<C> = series_rows
                .iter()
                .map(|(_, r)| r.iter().zip(v).map(|(a, b)| a * b).sum())
                .collect();
            let start = series_rows.first().map_or(0, |r| r.0);
            LaurentSeries::new(start, coeffs, series_rows.last().map_or(0, |r| r.0), ctx.tol_zero)
        })
        .collect();
    let all_convergent = series
        .iter()
        .all(|f| growth_diagnostic(ctx, f).map(|g| g.convergent_like).unwrap_or(true));
    if all_convergent {
        return Ok(series.len());
    }
    // Row-normalized tail coefficients: convergent directions are negligible
    // next to any divergent one, so the rank counts divergent directions.
    let top = series.iter().map(|f| f.known_to()).min().unwrap_or(0);
    let tail: Vec<Vec<C>> = ((top - 10).max(lo)..=top)
        .map(|m| {
            let row: Vec<C> = series.iter().map(|f| f.coeff(m)).collect();
            let s = row.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if s > 0.0 {
                row.iter().map(|c| c / s).collect()
            } else {
                row
            }
        })
        .collect();
    let divergent = series.len() - nullspace_with_tol(&tail, series.len(), 1e-13)?.len();
    Ok(series.len() - divergent)
}

fn nullspace(rows: &[Vec<C>], n: usize) -> Result<Vec<Vec<C>>> {
    // Columns are normalized first: solution coefficients span many decades.
    let scale: Vec<f64> = (0..n)
        .map(|j| rows.iter().map(|r| r[j].norm()).fold(0.0, f64::max))
        .collect();
    let scaled: Vec<Vec<C>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&scale)
                .map(|(c, s)| if *s > 0.0 { c / s } else { *c })
                .collect()
        })
        .collect();
    Ok(nullspace_with_tol(&scaled, n, 1e-8)?
        .into_iter()
        .map(|v| {
            v.iter()
                .zip(&scale)
                .map(|(c, s)| if *s > 0.0 { c / s } else { *c })
                .collect()
        })
        .collect())
}

fn nullspace_with_tol(rows: &[Vec<C>], n: usize, tol: f64) -> Result<Vec<Vec<C>>> {
    if rows.is_empty() {
        return Ok((0..n)
            .map(|j| (0..n).map(|i| C::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect());
    }
    // Pad to at least n rows so the SVD returns a full right basis.
    let m = rows.len().max(n);
    let a = DMatrix::from_fn(m, n, |r, c| rows.get(r).map_or(C::new(0.0, 0.0), |row| row[c]));
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::PrecisionExhausted("non-finite solution coefficients".into()));
    }
    let svd = a
        .try_svd(false, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::PrecisionExhausted("singular value iteration did not converge".into()))?;
    let vt = svd.v_t.unwrap();
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= tol * smax || smax == 0.0 {
            out.push((0..n).map(|j| vt[(i, j)].conj()).collect());
        }
    }
    Ok(out)
}

/// Index as the sum of the first-order factor indices; kernel from the
/// solution basis, cokernel from the two.
pub fn operator_index(p: &OreOperator) -> Result<IndexReport> {
    if p.is_zero() {
        return Err(Error::ZeroOperator);
    }
    let ctx = p.ctx();
    let fz = full_factorization(p)?;
    let l = fz.ramification as i64;
    // Each ramified factor z_l^mu sigma - c has the index of sigma - c z_l^-mu;
    // a de-ramified slope mu / l contributes mu / l per factor, so the sum over
    // all factors is divided by l at the end.
    let mut chi_ram: i64 = 0;
    for f in &fz.factors {
        chi_ram += first_order_index(&fz.ctx, f.c, -f.mu)?.index;
    }
    if chi_ram % l != 0 {
        return Err(Error::InvalidArgument(format!(
            "ramified index {chi_ram} not divisible by {l}"
        )));
    }
    let chi = chi_ram / l;
    let ker = kernel_dimension(p)?;
    let coker = ker as i64 - chi;
    if coker < 0 {
        return Err(Error::InvalidArgument(format!(
            "inconsistent kernel {ker} for index {chi}"
        )));
    }
    Ok(IndexReport::new(ker, coker as usize, ctx.mode))
}

/// Matrix of `P` on the exponent window `[lo, hi]` after normalizing to
/// `alpha = 0` and lowest valuation 0. Entries lost to cancellation are zeroed.
fn window_matrix(p: &OreOperator, lo: i64, hi: i64) -> DMatrix<C> {
    let ctx = p.ctx();
    let p = p.shift_left(-p.alpha().unwrap()).shift_z(-p.v0().unwrap());
    let n = (hi - lo + 1) as usize;
    let mut a = DMatrix::from_element(n, n, C::new(0.0, 0.0));
    let mut mass = DMatrix::from_element(n, n, 0.0f64);
    for (i, coef) in p.terms() {
        for (j, c) in coef.terms() {
            for col in 0..n {
                let k = lo + col as i64;
                let row = k + j - lo;
                if (0..n as i64).contains(&row) {
                    let t = c * ctx.q_pow(i * k);
                    a[(row as usize, col)] += t;
                    mass[(row as usize, col)] += t.norm();
                }
            }
        }
    }
    for (e, m) in a.iter_mut().zip(mass.iter()) {
        if e.norm() <= ctx.tol_zero * m {
            *e = C::new(0.0, 0.0);
        }
    }
    a
}

/// Row and column scalings minimizing `sum (log|a_ij| + r_i + c_j)^2` over the
/// nonzero entries. Triangular chains with geometric diagonals become
/// unit-sized, which max-norm equilibration cannot achieve.
fn log_balance(a: &mut DMatrix<C>) {
    let (m, n) = a.shape();
    let nz: Vec<(usize, usize, f64)> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let v = a[(i, j)].norm();
            (v > 0.0).then(|| (i, j, v.ln()))
        })
        .collect();
    if nz.is_empty() {
        return;
    }
    let mut lhs = DMatrix::from_element(nz.len(), m + n, 0.0f64);
    let mut rhs = nalgebra::DVector::from_element(nz.len(), 0.0f64);
    for (r, (i, j, l)) in nz.iter().enumerate() {
        lhs[(r, *i)] = 1.0;
        lhs[(r, m + j)] = 1.0;
        rhs[r] = -l;
    }
    // Normal equations with a small ridge for the one-dimensional gauge
    // freedom (r + t, c - t); the scaling only needs to be roughly right.
    let mut normal = lhs.transpose() * &lhs;
    for i in 0..m + n {
        normal[(i, i)] += 1e-9;
    }
    let Some(chol) = normal.cholesky() else { return };
    let x = chol.solve(&(lhs.transpose() * rhs));
    if x.iter().any(|v| !v.is_finite()) {
        return;
    }
    // Only the nonzero entries: a zero row or column has no constraint and its
    // factor can overflow.
    for (i, j, _) in nz {
        a[(i, j)] *= (x[i] + x[m + j]).exp();
    }
}

fn numerical_rank(mut a: DMatrix<C>, tol: f64) -> Result<usize> {
    log_balance(&mut a);
    let svd = a
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::UnstableWindow("singular value iteration did not converge".into()))?;
    let sv = svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    Ok(sv.iter().filter(|s| **s > tol * smax).count())
}

fn window_report(p: &OreOperator, lo: i64, hi: i64) -> Result<IndexReport> {
    let a = window_matrix(p, lo, hi);
    let n = a.nrows();
    let r = numerical_rank(a, p.ctx().tol_zero)?;
    Ok(IndexReport::new(n - r, n - r, Mode::Formal))
}

/// Kernel and cokernel measured by numerical rank on `[lo, hi]` and on the
/// doubled window; the two must agree.
pub fn truncated_rank_oracle(p: &OreOperator, window: (i64, i64)) -> Result<IndexReport> {
    if p.is_zero() {
        return Err(Error::ZeroOperator);
    }
    let (lo, hi) = window;
    if hi <= lo {
        return Err(Error::InvalidArgument("empty window".into()));
    }
    let a = window_report(p, lo, hi)?;
    let b = window_report(p, 2 * lo, 2 * hi)?;
    if a != b {
        return Err(Error::UnstableWindow(format!(
            "({}, {}) on [{lo}, {hi}] vs ({}, {}) on [{}, {}]",
            a.dim_ker,
            a.dim_coker,
            b.dim_ker,
            b.dim_coker,
            2 * lo,
            2 * hi
        )));
    }
    Ok(a)
}

/// `sigma X = A X` with entries in series.
#[derive(Clone, Debug, PartialEq)]
pub struct CompanionSystem {
    pub a: Vec<Vec<LaurentSeries>>,
    pub ctx: QContext,
}

type SeriesMatrix = Vec<Vec<LaurentSeries>>;

fn mat_mul(a: &SeriesMatrix, b: &SeriesMatrix, zero: &LaurentSeries) -> SeriesMatrix {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = zero.clone();
                    for (k, bk) in b.iter().enumerate() {
                        if !a[i][k].is_zero() && !bk[j].is_zero() {
                            acc = &acc + &(&a[i][k] * &bk[j]);
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn mat_vec(a: &SeriesMatrix, x: &[LaurentSeries], zero: &LaurentSeries) -> Vec<LaurentSeries> {
    let col: SeriesMatrix = x.iter().map(|e| vec![e.clone()]).collect();
    mat_mul(a, &col, zero).into_iter().map(|mut r| r.remove(0)).collect()
}

/// Gauss-Jordan over series, pivoting on the lowest valuation.
fn mat_inverse(f: &SeriesMatrix, ctx: &QContext) -> Result<SeriesMatrix> {
    let n = f.len();
    let mut a = f.clone();
    let mut inv: SeriesMatrix = (0..n)
        .map(|i| (0..n).map(|j| if i == j { ctx.one() } else { ctx.zero() }).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .filter(|r| !a[*r][col].is_zero())
            .min_by(|x, y| {
                let (ax, ay) = (&a[*x][col], &a[*y][col]);
                ax.v0()
                    .cmp(&ay.v0())
                    .then(ay.leading().norm().total_cmp(&ax.leading().norm()))
            })
            .ok_or(Error::SingularGauge)?;
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col].invert().map_err(|_| Error::SingularGauge)?;
        a[col] = a[col].iter().map(|e| e * &p).collect();
        inv[col] = inv[col].iter().map(|e| e * &p).collect();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            a[r] = a[r].iter().zip(&a[col]).map(|(x, y)| x - &(&factor * y)).collect();
            inv[r] = inv[r].iter().zip(&inv[col]).map(|(x, y)| x - &(&factor * y)).collect();
        }
    }
    Ok(inv)
}

impl CompanionSystem {
    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// `sigma X - A X`.
    pub fn residual(&self, x: &[LaurentSeries]) -> Vec<LaurentSeries> {
        let ax = mat_vec(&self.a, x, &self.ctx.zero());
        x.iter().zip(ax).map(|(xi, axi)| &xi.sigma(self.ctx.q) - &axi).collect()
    }
}

/// Companion matrix of a monic entire operator `sigma^n + ... + a_0`.
pub fn vectorialize(p: &OreOperator) -> Result<CompanionSystem> {
    let ctx = p.ctx();
    let (Some(0), Some(n)) = (p.alpha(), p.beta()) else {
        return Err(Error::SingularConstantTerm);
    };
    if p.v0().unwrap() < 0 {
        return Err(Error::InvalidArgument(
            "operator coefficients must be power series".into(),
        ));
    }
    let top = p.coeff(n).unwrap();
    if !top.approx_eq(&ctx.one(), ctx.tol_zero) || top.known_to() < 0 {
        return Err(Error::NotMonic);
    }
    let n = n as usize;
    if n == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    let mut a: SeriesMatrix = vec![vec![ctx.zero(); n]; n];
    for i in 0..n - 1 {
        a[i][i + 1] = ctx.one();
    }
    for j in 0..n {
        a[n - 1][j] = p.coeff(j as i64).map_or(ctx.zero(), |c| c.neg());
    }
    Ok(CompanionSystem { a, ctx: ctx.clone() })
}

/// `F[A] = sigma(F) A F^-1`.
pub fn gauge_system(a: &CompanionSystem, f: &[Vec<LaurentSeries>]) -> Result<CompanionSystem> {
    let ctx = &a.ctx;
    let n = a.dim();
    if f.len() != n || f.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("gauge matrix has the wrong shape".into()));
    }
    let finv = mat_inverse(&f.to_vec(), ctx)?;
    let sf: SeriesMatrix = f.iter().map(|r| r.iter().map(|e| e.sigma(ctx.q)).collect()).collect();
    let zero = ctx.zero();
    Ok(CompanionSystem {
        a: mat_mul(&mat_mul(&sf, &a.a, &zero), &finv, &zero),
        ctx: ctx.clone(),
    })
}

/// `sum f_n z^n -> sum f_n q^(-n(n-1)/2) z^n`.
pub fn borel_ramis(ctx: &QContext, f: &LaurentSeries) -> LaurentSeries {
    f.map_coeffs(|n, c| c * ctx.q_pow(-(n * (n - 1) / 2)))
}

fn check_a0(a0: &DMatrix<C>, n: usize) -> Result<DMatrix<C>> {
    if a0.nrows() != n || a0.ncols() != n {
        return Err(Error::InvalidArgument("A0 has the wrong shape".into()));
    }
    let inv = a0.clone().try_inverse().ok_or(Error::SingularA0)?;
    let cond = a0.norm() * inv.norm();
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::SingularA0);
    }
    Ok(inv)
}

/// Residue class `i` mod `d` of every component, as coefficient vectors indexed
/// from the lowest exponent `lo` up to `top`.
fn class_vectors(y: &[LaurentSeries], d: i64, i: i64) -> (i64, i64, Vec<nalgebra::DVector<C>>) {
    let parts: Vec<LaurentSeries> = y.iter().map(|c| c.residue_class(d, i)).collect();
    let lo = parts
        .iter()
        .filter(|p| !p.is_zero())
        .map(|p| p.v0())
        .min()
        .unwrap_or(0)
        .min(0);
    let top = parts.iter().map(|p| p.known_to()).min().unwrap_or(0);
    let vecs = (lo..=top)
        .map(|k| nalgebra::DVector::from_iterator(parts.len(), parts.iter().map(|p| p.coeff(k))))
        .collect();
    (lo, top, vecs)
}

/// Per class `i` and component, `sum_k B^k Q^(-k(k-1)/2) Y_(i,k)` with
/// `B = q^-i A0`, `Q = q^d`: the cokernel functionals of `z^d sigma - A0`.
/// All values vanish exactly when `g` is in the image over convergent series.
pub fn borel_obstruction(ctx: &QContext, g: &[LaurentSeries], d: i64, a0: &DMatrix<C>) -> Result<Vec<C>> {
    if d < 1 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    let n = g.len();
    let a0inv = check_a0(a0, n)?;
    let qq = ctx.q_pow(d);
    let mut out = Vec::with_capacity(n * d as usize);
    for i in 0..d {
        let s = ctx.q_pow(-i);
        let b = a0 * s;
        let binv = &a0inv / s;
        let (lo, _, ys) = class_vectors(g, d, i);
        let mut pow = if lo >= 0 {
            b.pow(lo as u32)
        } else {
            binv.pow((-lo) as u32)
        };
        let mut acc = nalgebra::DVector::from_element(n, C::new(0.0, 0.0));
        let mut peak = 0.0f64;
        let mut last = 0.0f64;
        for (idx, y) in ys.iter().enumerate() {
            let k = lo + idx as i64;
            let t = &pow * y * q_pow(qq, -(k * (k - 1) / 2));
            peak = peak.max(t.norm());
            last = t.norm();
            acc += t;
            pow = &b * &pow;
        }
        if last > 1e-13 * peak.max(acc.norm()) && ys.len() > 1 {
            return Err(Error::NonconvergedSum(ys.len()));
        }
        out.extend(acc.iter().copied());
    }
    Ok(out)
}

/// Obstruction values for `(c z^m sigma - 1) f = g` over convergent series.
pub fn first_order_obstruction(ctx: &QContext, c: C, m: i64, g: &LaurentSeries) -> Vec<C> {
    let a0 = DMatrix::from_element(1, 1, c.inv());
    borel_obstruction(ctx, &[g.scale(c.inv())], m, &a0).unwrap_or_default()
}

/// Splits `Y = (z^d sigma - A0) X + Z` with `Z` polynomial of degree `< d`.
pub fn cokernel_projection(
    ctx: &QContext,
    y: &[LaurentSeries],
    d: i64,
    a0: &DMatrix<C>,
) -> Result<(Vec<LaurentSeries>, Vec<LaurentSeries>)> {
    if d < 1 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    let n = y.len();
    check_a0(a0, n)?;
    let z = borel_obstruction(ctx, y, d, a0)?;
    let qq = ctx.q_pow(d);
    let tol = ctx.tol_zero;
    let mut x_parts: Vec<Vec<LaurentSeries>> = vec![Vec::new(); n];
    for i in 0..d {
        let s = ctx.q_pow(-i);
        let b = a0 * s;
        let (lo, top, ys) = class_vectors(y, d, i);
        let zi = nalgebra::DVector::from_iterator(n, (0..n).map(|j| z[(i as usize) * n + j]));
        // phi = Borel(q^-i (Y_i - Z_i)); psi_k = phi_(k+1) + B psi_(k+1).
        let phi = |k: i64| -> nalgebra::DVector<C> {
            let mut v = ys[(k - lo) as usize].clone();
            if k == 0 {
                v -= &zi;
            }
            v * (s * q_pow(qq, -(k * (k - 1) / 2)))
        };
        let len = (top - lo).max(0) as usize;
        let mut psi = vec![nalgebra::DVector::from_element(n, C::new(0.0, 0.0)); len];
        let mut next = nalgebra::DVector::from_element(n, C::new(0.0, 0.0));
        for k in (lo..top).rev() {
            next = phi(k + 1) + &b * &next;
            psi[(k - lo) as usize] = next.clone();
        }
        for j in 0..n {
            let coeffs: Vec<C> = psi
                .iter()
                .enumerate()
                .map(|(idx, v)| {
                    let k = lo + idx as i64;
                    v[j] * q_pow(qq, k * (k - 1) / 2)
                })
                .collect();
            x_parts[j].push(LaurentSeries::new(lo, coeffs, top - 1, tol));
        }
    }
    let xs = x_parts
        .iter()
        .map(|parts| LaurentSeries::from_residue_classes(parts, tol))
        .collect();
    let kt = y.iter().map(|c| c.known_to()).min().unwrap_or(0);
    let zs = (0..n)
        .map(|j| {
            let coeffs: Vec<C> = (0..d).map(|i| z[(i as usize) * n + j]).collect();
            LaurentSeries::new(0, coeffs, kt, tol)
        })
        .collect();
    Ok((xs, zs))
}

/// `(z^d sigma - A0) X + Z`, for checking a projection.
pub fn reassemble(
    ctx: &QContext,
    x: &[LaurentSeries],
    z: &[LaurentSeries],
    d: i64,
    a0: &DMatrix<C>,
) -> Vec<LaurentSeries> {
    let n = x.len();
    (0..n)
        .map(|j| {
            let mut acc = &x[j].sigma(ctx.q).shift(d) + &z[j];
            for (k, xk) in x.iter().enumerate() {
                acc = &acc - &xk.scale(a0[(j, k)]);
            }
            acc
        })
        .collect()
}
