//! Text forms of sets, functions, gauges, closed-set descriptions and
//! function sequences. Numeric slots take `p/q`, exact decimals or constant
//! arithmetic such as `2^-3` or `1-1/(4)`.

use std::collections::HashMap;

use crate::error::{Error, ParseError, Result};
use crate::expr::Expr;
use crate::functions::{FunctionBuilder, PieceSpec, PiecewiseFunction, Side};
use crate::harnack::{ClosedSetDescription, Grouping};
use crate::interval_sets::{ElementarySet, Interval};
use crate::partitions::Gauge;
use crate::scalar::{parse_rational, Rational, Scalar};
use crate::sequences::FunctionSequence;

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { src, pos: 0 }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        self.err_at(self.pos, msg)
    }

    fn err_at(&self, at: usize, msg: impl Into<String>) -> ParseError {
        ParseError::new(msg, 0, 0).at(self.src, at)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.ws();
        self.rest().chars().next()
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn word(&mut self) -> &'a str {
        self.ws();
        let rest = self.rest();
        let n = rest.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(rest.len());
        self.pos += n;
        &rest[..n]
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let at = self.pos;
        let w = self.word();
        if w == kw {
            Ok(())
        } else {
            Err(self.err_at(at, format!("expected `{kw}`, found `{w}`")))
        }
    }

    /// Text up to the first of `stops` outside brackets; the stop is not consumed.
    fn until(&mut self, stops: &[char]) -> Result<(usize, &'a str), ParseError> {
        self.ws();
        let start = self.pos;
        let mut depth = 0i32;
        for (i, c) in self.rest().char_indices() {
            if depth == 0 && stops.contains(&c) {
                self.pos = start + i;
                return Ok((start, self.src[start..start + i].trim_end()));
            }
            match c {
                '(' | '[' | '{' => depth += 1,
                ')' | ']' | '}' => depth -= 1,
                _ => {}
            }
            if depth < 0 {
                break;
            }
        }
        Err(self.err_at(start, format!("expected one of {}", stops.iter().map(|c| format!("`{c}`")).collect::<Vec<_>>().join(" "))))
    }

    fn rational(&mut self, stops: &[char]) -> Result<Rational, ParseError> {
        let (at, text) = self.until(stops)?;
        number(text).ok_or_else(|| self.err_at(at, format!("`{text}` is not a rational constant")))
    }

    fn interval(&mut self) -> Result<Interval, ParseError> {
        let at = self.pos;
        let open = self.peek().ok_or_else(|| self.err("expected an interval"))?;
        match open {
            '{' => {
                self.pos += 1;
                let c = self.rational(&['}'])?;
                self.expect('}')?;
                Ok(Interval::singleton(c))
            }
            '[' | '(' => {
                self.pos += 1;
                let lo = self.rational(&[','])?;
                self.expect(',')?;
                let hi = self.rational(&[']', ')'])?;
                let close = self.peek().unwrap();
                self.pos += 1;
                Interval::new(lo, hi, open == '[', close == ']').map_err(|e| self.err_at(at, e.to_string()))
            }
            c => Err(self.err(format!("expected an interval, found `{c}`"))),
        }
    }

    /// `name{` … returns the name.
    fn head(&mut self) -> Result<&'a str, ParseError> {
        let at = self.pos;
        let name = self.word();
        if name.is_empty() {
            return Err(self.err_at(at, "expected a literal such as `step{ … }`"));
        }
        self.expect('{')?;
        Ok(name)
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err(format!("unexpected `{}`", self.rest().trim())))
        }
    }
}

/// A rational constant: `p/q`, an exact decimal, or constant arithmetic.
pub fn number(text: &str) -> Option<Rational> {
    parse_rational(text).ok().or_else(|| Expr::parse(text).ok()?.to_rational())
}

fn wrap(src: &str, at: usize, e: Error) -> Error {
    match e {
        Error::Parse(p) => Error::Parse(p),
        other => Error::Parse(ParseError::new(other.to_string(), 0, 0).at(src, at)),
    }
}

/// `[0,1) (2,3] {5/2}`, read as the union of the tokens; commas between
/// intervals are optional and `∅` is the empty set.
pub fn parse_set(src: &str) -> Result<ElementarySet> {
    let mut cur = Cursor::new(src);
    let mut set = ElementarySet::empty();
    loop {
        while cur.eat(',') {}
        if cur.at_end() {
            break;
        }
        if cur.eat('∅') {
            continue;
        }
        set = set.union(&ElementarySet::from_interval(cur.interval()?));
    }
    Ok(set)
}

/// `step{ [0,1/2):0, {1/2}:1, (1/2,1]:1 }`, `poly{ [0,1]: 3/2*t^2 - t }` or
/// `expr{ (0,1]: 2*t*cos(pi/t^2); value(0)=0 }`. Expression pieces also take
/// `limit(x+)=v`, `nolimit(x-)` and `primitive(x,y)=P`.
pub fn parse_function(src: &str) -> Result<PiecewiseFunction> {
    let mut cur = Cursor::new(src);
    let f = function_at(&mut cur)?;
    cur.finish()?;
    Ok(f)
}

fn function_at(cur: &mut Cursor<'_>) -> Result<PiecewiseFunction> {
    let start = cur.pos;
    let kind = cur.head()?;
    if !matches!(kind, "step" | "poly" | "expr") {
        return Err(cur.err_at(start, format!("unknown function kind `{kind}`")).into());
    }
    let mut pieces: Vec<(usize, Interval, Expr)> = Vec::new();
    let mut primitives: HashMap<(Rational, Rational), Expr> = HashMap::new();
    let mut b = FunctionBuilder::new();
    loop {
        while cur.eat(',') || cur.eat(';') {}
        if cur.eat('}') {
            break;
        }
        let at = cur.pos;
        match cur.peek() {
            None => return Err(cur.err("unterminated function literal").into()),
            Some('[' | '(' | '{') => {
                let iv = cur.interval()?;
                cur.expect(':')?;
                let (bat, body) = cur.until(&[',', ';', '}'])?;
                let e = Expr::parse(body).map_err(|e| ParseError::new(e.message.clone(), 0, 0).at(cur.src, bat + e_offset(&e, body)))?;
                pieces.push((bat, iv, e));
            }
            Some(_) => {
                let word = cur.word();
                cur.expect('(')?;
                match word {
                    "value" => {
                        let x = cur.rational(&[')'])?;
                        cur.expect(')')?;
                        cur.expect('=')?;
                        let (vat, v) = cur.until(&[',', ';', '}'])?;
                        b.value(x, scalar(v).ok_or_else(|| cur.err_at(vat, format!("`{v}` is not a value")))?);
                    }
                    "limit" | "nolimit" => {
                        let (xat, text) = cur.until(&[')'])?;
                        cur.expect(')')?;
                        let (x, side) = match text.strip_suffix('+') {
                            Some(x) => (x, Side::Right),
                            None => match text.strip_suffix('-') {
                                Some(x) => (x, Side::Left),
                                None => return Err(cur.err_at(xat, "one-sided point needs a trailing `+` or `-`").into()),
                            },
                        };
                        let x = number(x).ok_or_else(|| cur.err_at(xat, format!("`{x}` is not a rational constant")))?;
                        if word == "limit" {
                            cur.expect('=')?;
                            let (vat, v) = cur.until(&[',', ';', '}'])?;
                            let v: f64 = v.parse().map_err(|_| cur.err_at(vat, format!("`{v}` is not a number")))?;
                            b.limit(x, side, Some(v));
                        } else {
                            b.limit(x, side, None);
                        }
                    }
                    "primitive" => {
                        let lo = cur.rational(&[','])?;
                        cur.expect(',')?;
                        let hi = cur.rational(&[')'])?;
                        cur.expect(')')?;
                        cur.expect('=')?;
                        let (pat, body) = cur.until(&[',', ';', '}'])?;
                        let e = Expr::parse(body).map_err(|e| ParseError::new(e.message.clone(), 0, 0).at(cur.src, pat + e_offset(&e, body)))?;
                        primitives.insert((lo, hi), e);
                    }
                    w => return Err(cur.err_at(at, format!("unknown item `{w}`")).into()),
                }
            }
        }
    }
    for (at, iv, e) in pieces {
        let primitive = primitives.remove(&(iv.lo().clone(), iv.hi().clone()));
        let spec = match (kind, e.to_poly()) {
            ("step", Some(p)) if p.is_constant() => PieceSpec::Poly(p),
            ("step", _) => return Err(cur.err_at(at, "step pieces must be constant").into()),
            ("poly", Some(p)) => PieceSpec::Poly(p),
            ("poly", None) => return Err(cur.err_at(at, "not a polynomial in t").into()),
            (_, Some(p)) if primitive.is_none() => PieceSpec::Poly(p),
            _ => PieceSpec::Expr { expr: e, primitive },
        };
        b.piece(iv, spec);
    }
    if let Some(((lo, hi), _)) = primitives.into_iter().next() {
        return Err(cur
            .err_at(start, format!("primitive on ({},{}) matches no piece", crate::scalar::fmt_rational(&lo), crate::scalar::fmt_rational(&hi)))
            .into());
    }
    b.build().map_err(|e| wrap(cur.src, start, e))
}

fn e_offset(e: &ParseError, body: &str) -> usize {
    // the expression parser reports line and column within `body`
    let mut line = 1;
    let mut off = 0;
    for (i, c) in body.char_indices() {
        if line == e.line {
            off = i;
            break;
        }
        if c == '\n' {
            line += 1;
        }
    }
    (off + e.column.saturating_sub(1)).min(body.len())
}

fn scalar(text: &str) -> Option<Scalar> {
    match number(text) {
        Some(r) => Some(Scalar::Exact(r)),
        None => text.parse::<f64>().ok().filter(|x| x.is_finite()).map(Scalar::Approx),
    }
}

/// `gauge{ base: [0,1/2):1/8, [1/2,1]:1/16; at 1/3: 1/1024 }`.
pub fn parse_gauge(src: &str) -> Result<Gauge> {
    let mut cur = Cursor::new(src);
    let start = cur.pos;
    let name = cur.head()?;
    if name != "gauge" {
        return Err(cur.err_at(start, format!("expected `gauge{{`, found `{name}{{`")).into());
    }
    cur.keyword("base")?;
    cur.expect(':')?;
    let mut entries = Vec::new();
    let mut overrides = Vec::new();
    loop {
        while cur.eat(',') {}
        match cur.peek() {
            Some('[' | '(' | '{') => {
                let iv = cur.interval()?;
                cur.expect(':')?;
                entries.push((iv, cur.rational(&[',', ';', '}'])?));
            }
            _ => break,
        }
    }
    if cur.eat(';') {
        loop {
            while cur.eat(',') {}
            if cur.peek() == Some('}') {
                break;
            }
            cur.keyword("at")?;
            let x = cur.rational(&[':'])?;
            cur.expect(':')?;
            overrides.push((x, cur.rational(&[',', '}'])?));
        }
    }
    cur.expect('}')?;
    cur.finish()?;
    let mut g = Gauge::from_entries(&entries).map_err(|e| wrap(src, start, e))?;
    for (x, v) in overrides {
        g = g.with_override(x, v).map_err(|e| wrap(src, start, e))?;
    }
    Ok(g)
}

/// `cantor{hull:[0,1], ratio:1/3}` (optionally `grouping:interval`) or
/// `complement{hull:[0,1], intervals: (1/3,2/3), (1/9,2/9)}`, one cover
/// element per interval.
pub fn parse_closed_set(src: &str) -> Result<ClosedSetDescription> {
    let mut cur = Cursor::new(src);
    let start = cur.pos;
    let kind = cur.head()?;
    let mut hull = None;
    let mut ratio = None;
    let mut grouping = Grouping::Generation;
    let mut cover = Vec::new();
    loop {
        while cur.eat(',') {}
        if cur.eat('}') {
            break;
        }
        let at = cur.pos;
        let key = cur.word();
        cur.expect(':')?;
        match (kind, key) {
            (_, "hull") => hull = Some(cur.interval()?),
            ("cantor", "ratio") => ratio = Some(cur.rational(&[',', '}'])?),
            ("cantor", "grouping") => {
                let gat = cur.pos;
                grouping = match cur.word() {
                    "interval" => Grouping::Interval,
                    "generation" => Grouping::Generation,
                    w => return Err(cur.err_at(gat, format!("unknown grouping `{w}`")).into()),
                }
            }
            ("complement", "intervals") => loop {
                while cur.eat(',') {}
                match cur.peek() {
                    Some('[' | '(' | '{') => cover.push(ElementarySet::from_interval(cur.interval()?)),
                    _ => break,
                }
            },
            _ => return Err(cur.err_at(at, format!("unknown key `{key}` for `{kind}`")).into()),
        }
    }
    cur.finish()?;
    let hull = hull.ok_or_else(|| cur.err_at(start, "missing `hull`"))?;
    match kind {
        "cantor" => {
            if !hull.is_closed() {
                return Err(cur.err_at(start, "a Cantor hull must be closed").into());
            }
            let ratio = ratio.ok_or_else(|| cur.err_at(start, "missing `ratio`"))?;
            let t = ClosedSetDescription::cantor(hull.lo().clone(), hull.hi().clone(), ratio).map_err(|e| wrap(src, start, e))?;
            Ok(t.with_grouping(grouping))
        }
        "complement" => ClosedSetDescription::finite(hull, cover),
        other => Err(cur.err_at(start, format!("unknown closed-set kind `{other}`")).into()),
    }
}

/// Replaces the identifier `n` by `(value)`.
fn instantiate(template: &str, n: u64) -> String {
    let mut out = String::with_capacity(template.len() + 16);
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        if word == "n" {
            out.push_str(&format!("({n})"));
        } else {
            out.push_str(word);
        }
        word.clear();
    };
    for c in template.chars() {
        if c.is_ascii_alphanumeric() || c == '_' {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            out.push(c);
        }
    }
    flush(&mut word, &mut out);
    out
}

/// `seq{ n in 1..: step{ [0,1/n):n, [1/n,1]:0 } }`, optionally followed by
/// `; limit: <function>` (spot-checked) and `; bound: <rational>`.
pub fn parse_sequence(src: &str) -> Result<FunctionSequence> {
    let mut cur = Cursor::new(src);
    let start = cur.pos;
    let name = cur.head()?;
    if name != "seq" {
        return Err(cur.err_at(start, format!("expected `seq{{`, found `{name}{{`")).into());
    }
    cur.keyword("n")?;
    cur.keyword("in")?;
    let from_at = cur.pos;
    let from = cur.word();
    if from != "1" {
        return Err(cur.err_at(from_at, "sequences start at n = 1").into());
    }
    cur.expect('.')?;
    cur.expect('.')?;
    cur.expect(':')?;
    let (tat, template) = cur.until(&[';', '}'])?;
    let template = template.to_string();
    // report template errors against the whole literal
    let probe = instantiate(&template, 1);
    parse_function(&probe).map_err(|e| match e {
        Error::Parse(p) if probe == template => Error::Parse(ParseError::new(p.message, 0, 0).at(src, tat + p.column.saturating_sub(1))),
        other => wrap(src, tat, other),
    })?;
    let mut limit = None;
    let mut bound = None;
    while cur.eat(';') {
        let at = cur.pos;
        match cur.word() {
            "limit" => {
                cur.expect(':')?;
                limit = Some(function_at(&mut cur)?);
            }
            "bound" => {
                cur.expect(':')?;
                bound = Some(cur.rational(&[';', '}'])?);
            }
            w => return Err(cur.err_at(at, format!("unknown sequence clause `{w}`")).into()),
        }
    }
    cur.expect('}')?;
    cur.finish()?;
    let mut seq = FunctionSequence::new(move |n| parse_function(&instantiate(&template, n)));
    if let Some(b) = bound {
        seq = seq.with_pointwise_bound(b);
    }
    if let Some(l) = limit {
        seq = seq.with_limit(l)?;
    }
    Ok(seq)
}

/// Set, function, gauge or closed-set literal, by its leading keyword.
pub fn literal_kind(src: &str) -> Option<&'static str> {
    let head = src.trim_start();
    let word: String = head.chars().take_while(|c| c.is_ascii_alphanumeric()).collect();
    Some(match word.as_str() {
        "step" | "poly" | "expr" => "function",
        "gauge" => "gauge",
        "cantor" | "complement" => "closed_set",
        "seq" => "sequence",
        "" if head.starts_with(['[', '(', '{', '∅']) || head.is_empty() => "set",
        _ => return None,
    })
}
