//! Operator text format and the command layer behind the `qdiff` binary.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := ('-' | '+')? power ('*' power)*
//! power  := atom ('^' ('-')? integer)?
//! atom   := number | number 'i' | 'i' | 'z' | 'q' | 'S' | '(' expr ')'
//! ```
//!
//! `S` is the dilation operator, so `S*z` is `q z S`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::factor::full_factorization;
use crate::index::{operator_index, truncated_rank_oracle};
use crate::newton::{characteristic_equation, exponents, is_non_resonant, newton_polygon, NewtonPolygon, Slope};
use crate::ore::OreOperator;
use crate::qseries::{q_pow, LaurentSeries, Mode, QContext, C};
use crate::solve::{adams_solutions, apply_symbolic, evaluate, q_wronskian, solve_all_formal, SymbolicSolution};

/// `sum c z^a S^b`, keyed by `(b, a)`.
#[derive(Clone, Debug, PartialEq)]
struct Poly(BTreeMap<(i64, i64), C>);

impl Poly {
    fn constant(c: C) -> Self {
        Poly(BTreeMap::from([((0, 0), c)]))
    }

    fn add(mut self, other: Poly, sign: f64) -> Self {
        for (k, v) in other.0 {
            *self.0.entry(k).or_insert(C::new(0.0, 0.0)) += v * sign;
        }
        self
    }

    fn mul(&self, other: &Poly, q: Option<C>) -> std::result::Result<Poly, String> {
        let mut out = BTreeMap::new();
        for ((b1, a1), c1) in &self.0 {
            for ((b2, a2), c2) in &other.0 {
                // S^b1 z^a2 = q^(b1 a2) z^a2 S^b1
                let comm = if *b1 == 0 || *a2 == 0 {
                    C::new(1.0, 0.0)
                } else {
                    q_pow(q.ok_or("z and S do not commute without q")?, b1 * a2)
                };
                *out.entry((b1 + b2, a1 + a2)).or_insert(C::new(0.0, 0.0)) += c1 * c2 * comm;
            }
        }
        Ok(Poly(out))
    }

    fn inverse_monomial(&self, q: Option<C>) -> Option<Poly> {
        let nz: Vec<_> = self.0.iter().filter(|(_, c)| c.norm() != 0.0).collect();
        let [((b, a), c)] = nz.as_slice() else { return None };
        if c.norm() == 0.0 {
            return None;
        }
        // (c z^a S^b)^-1 = S^-b z^-a c^-1 = c^-1 q^(ab) z^-a S^-b
        let comm = if *a == 0 || *b == 0 {
            C::new(1.0, 0.0)
        } else {
            q_pow(q?, a * b)
        };
        Some(Poly(BTreeMap::from([((-b, -a), c.inv() * comm)])))
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    q: Option<C>,
}

impl Parser {
    fn new(src: &str, q: Option<C>) -> Self {
        Parser {
            chars: src.chars().collect(),
            pos: 0,
            q,
        }
    }

    fn line_col(&self, pos: usize) -> (usize, usize) {
        let mut line = 1;
        let mut col = 1;
        for ch in self.chars.iter().take(pos) {
            if *ch == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        (line, col)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let (line, col) = self.line_col(self.pos);
        Error::SyntaxError {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Poly> {
        let mut acc = self.term()?;
        while let Some(ch @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let t = self.term()?;
            acc = acc.add(t, if ch == '+' { 1.0 } else { -1.0 });
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Poly> {
        let mut sign = 1.0;
        if let Some(ch @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            if ch == '-' {
                sign = -1.0;
            }
        }
        let mut acc = self.power()?;
        while self.peek() == Some('*') {
            self.pos += 1;
            let rhs = self.power()?;
            acc = acc.mul(&rhs, self.q).map_err(|m| self.err(m))?;
        }
        if sign < 0.0 {
            acc = Poly(BTreeMap::new()).add(acc, -1.0);
        }
        Ok(acc)
    }

    fn power(&mut self) -> Result<Poly> {
        let base = self.atom()?;
        if self.peek() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        let neg = if self.peek() == Some('-') {
            self.pos += 1;
            true
        } else {
            false
        };
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an integer exponent"));
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let n: u32 = text.parse().map_err(|_| self.err("exponent too large"))?;
        let base = if neg {
            base.inverse_monomial(self.q)
                .ok_or_else(|| self.err("negative power of a non-monomial"))?
        } else {
            base
        };
        let mut acc = Poly::constant(C::new(1.0, 0.0));
        for _ in 0..n {
            acc = acc.mul(&base, self.q).map_err(|m| self.err(m))?;
        }
        Ok(acc)
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        let at = |p: usize, s: &Self| s.chars.get(p).copied();
        while at(self.pos, self).is_some_and(|c| c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if matches!(at(self.pos, self), Some('e' | 'E')) {
            let mut p = self.pos + 1;
            if matches!(at(p, self), Some('+' | '-')) {
                p += 1;
            }
            if at(p, self).is_some_and(|c| c.is_ascii_digit()) {
                self.pos = p;
                while at(self.pos, self).is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map_err(|_| {
            self.pos = start;
            self.err(format!("malformed number `{text}`"))
        })
    }

    fn atom(&mut self) -> Result<Poly> {
        let Some(ch) = self.peek() else {
            return Err(self.err("unexpected end of input"));
        };
        if ch.is_ascii_digit() || ch == '.' {
            let x = self.number()?;
            if self.chars.get(self.pos) == Some(&'i')
                && !self
                    .chars
                    .get(self.pos + 1)
                    .is_some_and(|c| c.is_alphanumeric() || *c == '_')
            {
                self.pos += 1;
                return Ok(Poly::constant(C::new(0.0, x)));
            }
            return Ok(Poly::constant(C::new(x, 0.0)));
        }
        if ch == '(' {
            self.pos += 1;
            let e = self.expr()?;
            if self.peek() != Some(')') {
                return Err(self.err("expected `)`"));
            }
            self.pos += 1;
            return Ok(e);
        }
        if ch.is_alphabetic() || ch == '_' {
            let start = self.pos;
            while self
                .chars
                .get(self.pos)
                .is_some_and(|c| c.is_alphanumeric() || *c == '_')
            {
                self.pos += 1;
            }
            let name: String = self.chars[start..self.pos].iter().collect();
            let one = C::new(1.0, 0.0);
            return match name.as_str() {
                "z" => Ok(Poly(BTreeMap::from([((0, 1), one)]))),
                "S" => Ok(Poly(BTreeMap::from([((1, 0), one)]))),
                "i" => Ok(Poly::constant(C::new(0.0, 1.0))),
                "q" if self.q.is_some() => Ok(Poly::constant(self.q.unwrap())),
                _ => {
                    let (line, col) = self.line_col(start);
                    Err(Error::UnknownSymbol { name, line, col })
                }
            };
        }
        Err(self.err(format!("unexpected character `{ch}`")))
    }

    fn finish(mut self) -> Result<Poly> {
        let e = self.expr()?;
        if self.peek().is_some() {
            return Err(self.err("unexpected trailing input"));
        }
        Ok(e)
    }
}

pub fn parse_operator(text: &str, ctx: &QContext) -> Result<OreOperator> {
    let poly = Parser::new(text, Some(ctx.q)).finish()?;
    let mut by_sigma: BTreeMap<i64, Vec<(i64, C)>> = BTreeMap::new();
    for ((b, a), c) in poly.0 {
        if c.norm() != 0.0 {
            by_sigma.entry(b).or_default().push((a, c));
        }
    }
    let terms = by_sigma.into_iter().map(|(b, monos)| {
        let lo = monos.iter().map(|m| m.0).min().unwrap();
        let hi = monos.iter().map(|m| m.0).max().unwrap();
        let mut coeffs = vec![C::new(0.0, 0.0); (hi - lo + 1) as usize];
        for (a, c) in monos {
            coeffs[(a - lo) as usize] = c;
        }
        (b, ctx.series(lo, &coeffs))
    });
    Ok(OreOperator::new(ctx, terms))
}

/// A constant expression: numbers, `i`, and arithmetic.
pub fn parse_complex(text: &str) -> Result<C> {
    let poly = Parser::new(text, None).finish()?;
    let mut out = C::new(0.0, 0.0);
    for ((b, a), c) in poly.0 {
        if c.norm() != 0.0 && (a, b) != (0, 0) {
            return Err(Error::InvalidArgument(format!("`{text}` is not a constant")));
        }
        out += c;
    }
    Ok(out)
}

fn render_complex(c: C) -> String {
    if c.im == 0.0 {
        format!("({:?})", c.re)
    } else if c.im < 0.0 || (c.im == 0.0 && c.im.is_sign_negative()) {
        format!("({:?}-{:?}i)", c.re, -c.im)
    } else {
        format!("({:?}+{:?}i)", c.re, c.im)
    }
}

/// Text that parses back to `p` (coefficients as exact decimal literals).
pub fn render(p: &OreOperator) -> String {
    let mut parts = Vec::new();
    for (i, a) in p.terms().iter().rev() {
        for (j, c) in a.terms() {
            let mut t = render_complex(c);
            if j != 0 {
                let _ = write!(t, "*z^{j}");
            }
            if *i != 0 {
                let _ = write!(t, "*S^{i}");
            }
            parts.push(t);
        }
    }
    if parts.is_empty() {
        "0".to_string()
    } else {
        parts.join(" + ")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Newton,
    Factor,
    Solve,
    Index,
    Eval,
}

impl Command {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "newton" => Command::Newton,
            "factor" => Command::Factor,
            "solve" => Command::Solve,
            "index" => Command::Index,
            "eval" => Command::Eval,
            _ => return Err(Error::InvalidArgument(format!("unknown command `{s}`"))),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Flags {
    pub q: C,
    pub order: i64,
    pub mode: Mode,
    pub tol: f64,
    pub svg: Option<PathBuf>,
    pub points: Vec<C>,
}

impl Default for Flags {
    fn default() -> Self {
        Flags {
            q: C::new(2.0, 0.0),
            order: 40,
            mode: Mode::Formal,
            tol: 1e-12,
            svg: None,
            points: Vec::new(),
        }
    }
}

impl Flags {
    pub fn context(&self) -> Result<QContext> {
        if self.order < 1 {
            return Err(Error::InvalidArgument("order must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        Ok(QContext::new(self.q)?
            .with_order(self.order)
            .with_mode(self.mode)
            .with_tol_zero(self.tol))
    }
}

pub struct OperatorSource {
    pub text: String,
    pub parsed: OreOperator,
}

impl OperatorSource {
    pub fn new(text: &str, ctx: &QContext) -> Result<Self> {
        Ok(OperatorSource {
            text: text.to_string(),
            parsed: parse_operator(text, ctx)?,
        })
    }
}

fn cjson(c: C) -> Value {
    // + 0.0 turns -0.0 into 0.0
    json!([c.re + 0.0, c.im + 0.0])
}

fn slope_json(s: Slope) -> Value {
    if *s.denom() == 1 {
        json!(s.numer())
    } else {
        json!(format!("{}/{}", s.numer(), s.denom()))
    }
}

fn series_json(f: &LaurentSeries) -> Value {
    let cs = f.coeffs();
    let len = cs.iter().rposition(|c| c.norm() != 0.0).map_or(0, |k| k + 1);
    json!({
        "v0": f.v0(),
        "known_to": f.known_to(),
        "coefficients": cs[..len].iter().map(|c| cjson(*c)).collect::<Vec<_>>(),
    })
}

fn newton_json(p: &OreOperator) -> Result<Value> {
    let np = newton_polygon(p)?;
    let mut chars = Vec::new();
    let mut exps = Vec::new();
    for seg in &np.segments {
        let l = *seg.slope.denom() as u32;
        let pr = p.ramify(l);
        let mu = *seg.slope.numer();
        let ch = characteristic_equation(&pr, mu)?;
        chars.push(json!({
            "slope": slope_json(seg.slope),
            "ramification": l,
            "low": ch.low,
            "coefficients": ch.coeffs.iter().map(|c| cjson(*c)).collect::<Vec<_>>(),
        }));
        let ex = exponents(&pr, mu)?;
        for e in &ex {
            exps.push(json!({
                "slope": slope_json(seg.slope),
                "ramification": l,
                "c": cjson(e.c),
                "multiplicity": e.multiplicity,
                "eps": e.eps,
                "cbar": cjson(e.cbar),
                "non_resonant": is_non_resonant(pr.ctx(), e.c, &ex),
            }));
        }
    }
    Ok(json!({
        "segments": np.segments.iter().map(|s| json!([slope_json(s.slope), s.length])).collect::<Vec<_>>(),
        "characteristic_equations": chars,
        "exponents": exps,
    }))
}

/// Lattice points `(i, v0(a_i))` and the lower hull, slopes labelled as fractions.
pub fn polygon_svg(p: &OreOperator, np: &NewtonPolygon) -> String {
    let pts: Vec<(i64, i64)> = p.terms().iter().map(|(i, a)| (*i, a.v0())).collect();
    let (xmin, xmax) = (
        pts.iter().map(|p| p.0).min().unwrap_or(0),
        pts.iter().map(|p| p.0).max().unwrap_or(0),
    );
    let (ymin, ymax) = (
        pts.iter().map(|p| p.1).min().unwrap_or(0),
        pts.iter().map(|p| p.1).max().unwrap_or(0),
    );
    let unit = 60;
    let pad = 40;
    let w = (xmax - xmin) * unit + 2 * pad;
    let h = (ymax - ymin) * unit + 2 * pad;
    let px = |x: i64| (x - xmin) * unit + pad;
    let py = |y: i64| h - ((y - ymin) * unit + pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    for x in xmin..=xmax {
        for y in ymin..=ymax {
            let _ = writeln!(s, r##"<circle cx="{}" cy="{}" r="1.5" fill="#bbb"/>"##, px(x), py(y));
        }
    }
    let mut vertex = pts.iter().find(|p| p.0 == xmin).copied().unwrap_or((0, 0));
    let mut poly = format!("{},{}", px(vertex.0), py(vertex.1));
    for seg in &np.segments {
        let next = (vertex.0 + seg.length, vertex.1 + (seg.slope * seg.length).to_integer());
        let _ = write!(poly, " {},{}", px(next.0), py(next.1));
        let label = if *seg.slope.denom() == 1 {
            seg.slope.numer().to_string()
        } else {
            seg.slope.to_string()
        };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="14" font-family="monospace">{}</text>"#,
            (px(vertex.0) + px(next.0)) / 2,
            (py(vertex.1) + py(next.1)) / 2 - 8,
            label
        );
        vertex = next;
    }
    let _ = writeln!(
        s,
        r#"<polyline points="{poly}" fill="none" stroke="black" stroke-width="2"/>"#
    );
    for (x, y) in &pts {
        let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="4" fill="black"/>"#, px(*x), py(*y));
    }
    s.push_str("</svg>\n");
    s
}

fn factor_json(p: &OreOperator) -> Result<Value> {
    let fz = full_factorization(p)?;
    let target = p.ramify(fz.ramification).with_ctx(&fz.ctx);
    let (strict, componentwise) = fz.remultiplication_error(&target, p.ctx().trunc_order)?;
    Ok(json!({
        "unit": {"sigma_power": fz.unit.1, "coefficient": series_json(&fz.unit.0)},
        "ramification": fz.ramification,
        "factors": fz.factors.iter().map(|f| json!({
            "mu": f.mu,
            "c": cjson(f.c),
            "u": series_json(&f.u),
        })).collect::<Vec<_>>(),
        "residual": strict,
        "residual_componentwise": componentwise,
    }))
}

fn solutions_for(p: &OreOperator) -> Result<Vec<SymbolicSolution>> {
    match p.ctx().mode {
        Mode::Formal => solve_all_formal(p),
        Mode::Convergent => adams_solutions(p),
    }
}

fn solution_json(s: &SymbolicSolution) -> Value {
    json!({
        "ramification": s.ctx().ramification,
        "terms": s.terms().iter().map(|t| json!({
            "c": cjson(t.c),
            "mu": t.mu,
            "log_degree": t.poly.degree(),
            "components": t.poly.comps().iter().map(series_json).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

fn solve_json(p: &OreOperator) -> Result<Value> {
    let sols = solutions_for(p)?;
    let residuals: Vec<f64> = sols
        .iter()
        .map(|s| {
            let r = apply_symbolic(p, s);
            let k = r.terms().iter().map(|t| t.poly.known_to()).min().unwrap_or(0);
            r.truncate(k).max_abs() / s.max_abs().max(f64::MIN_POSITIVE)
        })
        .collect();
    let wronskian = if sols.is_empty() {
        json!(null)
    } else {
        let w = q_wronskian(&sols)?;
        let lead = w.terms().iter().find_map(|t| {
            t.poly
                .comps()
                .first()
                .filter(|f| !f.is_zero())
                .map(|f| (t, f.v0(), f.leading()))
        });
        json!({
            "nonzero": !w.is_zero(),
            "terms": w.terms().len(),
            "leading": lead.map(|(t, v, c)| json!({"c": cjson(t.c), "mu": t.mu, "v0": v, "coefficient": cjson(c)})),
        })
    };
    Ok(json!({
        "count": sols.len(),
        "solutions": sols.iter().map(solution_json).collect::<Vec<_>>(),
        "wronskian": wronskian,
        "residuals": residuals,
    }))
}

fn index_json(p: &OreOperator) -> Result<Value> {
    let r = operator_index(p)?;
    // The truncated oracle only sees the formal structure.
    let formal = match r.mode {
        Mode::Formal => r,
        Mode::Convergent => operator_index(&p.with_ctx(&p.ctx().clone().with_mode(Mode::Formal)))?,
    };
    let window = (-20, 20);
    let oracle = match truncated_rank_oracle(p, window) {
        Ok(o) => json!({
            "dim_ker": o.dim_ker,
            "dim_coker": o.dim_coker,
            "window": [window.0, window.1],
            "agrees_with_formal": o.dim_ker == formal.dim_ker && o.dim_coker == formal.dim_coker,
        }),
        Err(e) => json!({"error": e.kind(), "message": e.to_string()}),
    };
    Ok(json!({
        "dim_ker": r.dim_ker,
        "dim_coker": r.dim_coker,
        "index": r.index,
        "mode": r.mode.as_str(),
        "oracle": oracle,
    }))
}

fn err_json(e: &Error) -> Value {
    json!({"error": e.kind()})
}

fn eval_json(p: &OreOperator, points: &[C]) -> Result<Value> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("eval needs --points".into()));
    }
    let sols = solutions_for(p)?;
    let ctx = p.ctx();
    let mut out = Vec::new();
    for (k, s) in sols.iter().enumerate() {
        let l = s.ctx().ramification / ctx.ramification.max(1);
        let mut samples = Vec::new();
        for z in points {
            // Solutions live in z_l with z = z_l^l; the principal root is used.
            let zl = if l > 1 { z.powf(1.0 / l as f64) } else { *z };
            let value = evaluate(s, zl);
            // P.f(z) = sum a_i(z) f(q^i z), with q^i z = (q_l^i z_l)^l.
            let residual = (|| -> Result<f64> {
                let mut acc = C::new(0.0, 0.0);
                let mut mag = 0.0;
                for (i, a) in p.terms() {
                    let fv = evaluate(s, zl * q_pow(s.ctx().q, *i))?;
                    let t = a.eval(*z) * fv;
                    acc += t;
                    mag += t.norm();
                }
                Ok(if mag > 0.0 { acc.norm() / mag } else { 0.0 })
            })();
            samples.push(json!({
                "z": cjson(*z),
                "value": value.as_ref().map(|v| cjson(*v)).unwrap_or_else(err_json),
                "residual": residual.as_ref().map(|r| json!(r)).unwrap_or_else(err_json),
            }));
        }
        out.push(json!({"solution": k, "samples": samples}));
    }
    Ok(json!({"solutions": out}))
}

/// Runs one command; the result is deterministic for fixed inputs.
pub fn run_command(cmd: Command, source: &OperatorSource, flags: &Flags) -> Result<Value> {
    let p = &source.parsed;
    if p.is_zero() {
        return Err(Error::ZeroOperator);
    }
    let body = match cmd {
        Command::Newton => {
            let v = newton_json(p)?;
            if let Some(path) = &flags.svg {
                let svg = polygon_svg(p, &newton_polygon(p)?);
                std::fs::write(path, svg).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
            }
            v
        }
        Command::Factor => factor_json(p)?,
        Command::Solve => solve_json(p)?,
        Command::Index => index_json(p)?,
        Command::Eval => eval_json(p, &flags.points)?,
    };
    let mut doc = Map::new();
    doc.insert("operator".into(), json!(render(p)));
    doc.insert("q".into(), cjson(flags.q));
    doc.insert("order".into(), json!(flags.order));
    doc.insert("mode".into(), json!(flags.mode.as_str()));
    doc.insert("result".into(), body);
    Ok(Value::Object(doc))
}

pub fn error_json(e: &Error) -> Value {
    json!({"error": {"kind": e.kind(), "message": e.to_string()}})
}

/// `"0.5, 1+0.2i; 2i"`: separated by commas or semicolons.
pub fn parse_points(text: &str) -> Result<Vec<C>> {
    text.split([',', ';'])
        .filter(|s| !s.trim().is_empty())
        .map(parse_complex)
        .collect()
}
