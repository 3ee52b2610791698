//! Expression language for objectives and constraints.
//!
//! Scalar expressions over decision variables `x1..xn` and uncertainty
//! variables `u1..up` with arithmetic and a few elementary functions.
//! The grammar, smallest one covering the benchmark constraint families:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := ['-'] power
//! power  := atom ['^' factor]          (^ is right-associative)
//! atom   := number | xN | uN | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | log | sqrt | abs
//! ```
//!
//! Numbers are decimal with an optional exponent. Whitespace is insignificant.
//! Expressions are immutable after parsing and safe to share across threads.

use thiserror::Error;

use crate::problem::Point;

/// One of the supported unary functions. `log` is the natural logarithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Function {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Function {
    pub fn name(self) -> &'static str {
        match self {
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Exp => "exp",
            Function::Log => "log",
            Function::Sqrt => "sqrt",
            Function::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Function> {
        Some(match name {
            "sin" => Function::Sin,
            "cos" => Function::Cos,
            "exp" => Function::Exp,
            "log" => Function::Log,
            "sqrt" => Function::Sqrt,
            "abs" => Function::Abs,
            _ => return None,
        })
    }
}

/// Parsed expression tree. Variable indices are 1-based as in the surface
/// syntax (`x1` is `VarX(1)`).
#[derive(Clone, Debug, PartialEq)]
pub enum Expression {
    Constant(f64),
    VarX(usize),
    VarU(usize),
    Neg(Box<Expression>),
    Add(Box<Expression>, Box<Expression>),
    Sub(Box<Expression>, Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
    Div(Box<Expression>, Box<Expression>),
    Pow(Box<Expression>, Box<Expression>),
    Func(Function, Box<Expression>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {}", expected.join(" | "))]
    Syntax {
        offset: usize,
        expected: Vec<&'static str>,
    },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unknown variable `{name}` at byte {offset}")]
    UnknownVariable { name: String, offset: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {reason} in `{node}`")]
    Domain { reason: String, node: String },
    #[error("variable `{0}` is not bound by the supplied point")]
    Unbound(String),
}

/// A variable reference whose index exceeds the declared dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingViolation {
    X(usize),
    U(usize),
}

impl std::fmt::Display for BindingViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BindingViolation::X(i) => write!(f, "x{i}"),
            BindingViolation::U(i) => write!(f, "u{i}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token plus its starting byte offset.
    fn next(&mut self) -> Result<(Token, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Token::End, start));
        }
        let c = self.src[self.pos];
        let simple = match c {
            b'+' => Some(Token::Plus),
            b'-' => Some(Token::Minus),
            b'*' => Some(Token::Star),
            b'/' => Some(Token::Slash),
            b'^' => Some(Token::Caret),
            b'(' => Some(Token::LParen),
            b')' => Some(Token::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            self.pos += 1;
            return Ok((tok, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.lex_number(start);
        }
        if c.is_ascii_alphabetic() {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos])
                .expect("identifier bytes are ASCII")
                .to_string();
            return Ok((Token::Ident(name), start));
        }
        Err(ParseError::Syntax {
            offset: start,
            expected: vec!["number", "variable", "function", "operator", "'('"],
        })
    }

    fn lex_number(&mut self, start: usize) -> Result<(Token, usize), ParseError> {
        let mut saw_digit = false;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
            saw_digit = true;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
                saw_digit = true;
            }
        }
        if !saw_digit {
            return Err(ParseError::Syntax {
                offset: start,
                expected: vec!["digit"],
            });
        }
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                // 'e' not followed by an exponent: treat it as the next token
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("number bytes are ASCII");
        let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            expected: vec!["number"],
        })?;
        Ok((Token::Number(value), start))
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: Token,
    offset: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let (current, offset) = lexer.next()?;
        Ok(Parser {
            lexer,
            current,
            offset,
        })
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let (tok, off) = self.lexer.next()?;
        self.current = tok;
        self.offset = off;
        Ok(())
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.current {
                Token::Plus => {
                    self.advance()?;
                    lhs = Expression::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.advance()?;
                    lhs = Expression::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.current {
                Token::Star => {
                    self.advance()?;
                    lhs = Expression::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Token::Slash => {
                    self.advance()?;
                    lhs = Expression::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expression, ParseError> {
        if self.current == Token::Minus {
            self.advance()?;
            // A minus applied directly to a number literal folds into a
            // negative constant so printed constants round-trip structurally.
            // An exponent still binds tighter: -2^2 is -(2^2), not (-2)^2.
            if let Token::Number(v) = self.current {
                self.advance()?;
                if self.current == Token::Caret {
                    self.advance()?;
                    let exponent = self.factor()?;
                    return Ok(Expression::Neg(Box::new(Expression::Pow(
                        Box::new(Expression::Constant(v)),
                        Box::new(exponent),
                    ))));
                }
                return Ok(Expression::Constant(-v));
            }
            return Ok(Expression::Neg(Box::new(self.power()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.atom()?;
        self.maybe_pow(base)
    }

    fn maybe_pow(&mut self, base: Expression) -> Result<Expression, ParseError> {
        if self.current == Token::Caret {
            self.advance()?;
            let exponent = self.factor()?;
            return Ok(Expression::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        match self.current.clone() {
            Token::Number(v) => {
                self.advance()?;
                Ok(Expression::Constant(v))
            }
            Token::LParen => {
                self.advance()?;
                let inner = self.expr()?;
                if self.current != Token::RParen {
                    return Err(ParseError::Syntax {
                        offset: self.offset,
                        expected: vec!["')'"],
                    });
                }
                self.advance()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                let ident_offset = self.offset;
                self.advance()?;
                if self.current == Token::LParen {
                    let func = Function::from_name(&name).ok_or(ParseError::UnknownFunction {
                        name: name.clone(),
                        offset: ident_offset,
                    })?;
                    self.advance()?;
                    let arg = self.expr()?;
                    if self.current != Token::RParen {
                        return Err(ParseError::Syntax {
                            offset: self.offset,
                            expected: vec!["')'"],
                        });
                    }
                    self.advance()?;
                    return Ok(Expression::Func(func, Box::new(arg)));
                }
                parse_variable(&name, ident_offset)
            }
            _ => Err(ParseError::Syntax {
                offset: self.offset,
                expected: vec!["number", "variable", "function", "'('", "'-'"],
            }),
        }
    }
}

fn parse_variable(name: &str, offset: usize) -> Result<Expression, ParseError> {
    let unknown = || ParseError::UnknownVariable {
        name: name.to_string(),
        offset,
    };
    let mut chars = name.chars();
    let head = chars.next().ok_or_else(unknown)?;
    let digits: &str = &name[1..];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(unknown());
    }
    let index: usize = digits.parse().map_err(|_| unknown())?;
    if index == 0 {
        return Err(unknown());
    }
    match head {
        'x' => Ok(Expression::VarX(index)),
        'u' => Ok(Expression::VarU(index)),
        _ => Err(unknown()),
    }
}

/// Parse an expression from source text.
pub fn parse(source: &str) -> Result<Expression, ParseError> {
    let mut parser = Parser::new(source)?;
    let e = parser.expr()?;
    if parser.current != Token::End {
        return Err(ParseError::Syntax {
            offset: parser.offset,
            expected: vec!["operator", "end of input"],
        });
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

// Precedence levels used to insert the minimal set of parentheses:
// additive 1, multiplicative 2, unary minus 3, power 4, atoms 5.
fn precedence(e: &Expression) -> u8 {
    match e {
        Expression::Add(..) | Expression::Sub(..) => 1,
        Expression::Mul(..) | Expression::Div(..) => 2,
        Expression::Neg(..) => 3,
        Expression::Pow(..) => 4,
        Expression::Constant(v) if *v < 0.0 => 3,
        _ => 5,
    }
}

impl std::fmt::Display for Expression {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fn child(
            f: &mut std::fmt::Formatter<'_>,
            e: &Expression,
            min_level: u8,
        ) -> std::fmt::Result {
            if precedence(e) < min_level {
                write!(f, "(")?;
                write(f, e)?;
                write!(f, ")")
            } else {
                write(f, e)
            }
        }

        fn write(f: &mut std::fmt::Formatter<'_>, e: &Expression) -> std::fmt::Result {
            match e {
                Expression::Constant(v) => write!(f, "{v}"),
                Expression::VarX(i) => write!(f, "x{i}"),
                Expression::VarU(i) => write!(f, "u{i}"),
                Expression::Neg(a) => {
                    write!(f, "-")?;
                    // A literal constant directly under a negation must keep its
                    // parentheses, otherwise reparsing folds it into the constant.
                    if matches!(**a, Expression::Constant(_)) {
                        write!(f, "(")?;
                        write(f, a)?;
                        write!(f, ")")
                    } else {
                        child(f, a, 4)
                    }
                }
                Expression::Add(a, b) => {
                    child(f, a, 1)?;
                    write!(f, " + ")?;
                    child(f, b, 2)
                }
                Expression::Sub(a, b) => {
                    child(f, a, 1)?;
                    write!(f, " - ")?;
                    child(f, b, 2)
                }
                Expression::Mul(a, b) => {
                    child(f, a, 2)?;
                    write!(f, "*")?;
                    child(f, b, 3)
                }
                Expression::Div(a, b) => {
                    child(f, a, 2)?;
                    write!(f, "/")?;
                    child(f, b, 3)
                }
                Expression::Pow(a, b) => {
                    child(f, a, 5)?;
                    write!(f, "^")?;
                    child(f, b, 3)
                }
                Expression::Func(func, a) => {
                    write!(f, "{}(", func.name())?;
                    write(f, a)?;
                    write!(f, ")")
                }
            }
        }

        write(f, self)
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn domain_error(reason: impl Into<String>, node: &Expression) -> EvalError {
    EvalError::Domain {
        reason: reason.into(),
        node: node.to_string(),
    }
}

/// Evaluate `e` at decision point `x` and uncertainty point `u`.
///
/// Fails with a `Domain` error on log of a nonpositive value, square root of a
/// negative value, division by zero, or any operation whose IEEE result is not
/// finite; the error carries the offending subexpression.
pub fn evaluate(e: &Expression, x: &Point, u: &Point) -> Result<f64, EvalError> {
    let v = match e {
        Expression::Constant(c) => *c,
        Expression::VarX(i) => *x
            .as_slice()
            .get(i - 1)
            .ok_or_else(|| EvalError::Unbound(format!("x{i}")))?,
        Expression::VarU(i) => *u
            .as_slice()
            .get(i - 1)
            .ok_or_else(|| EvalError::Unbound(format!("u{i}")))?,
        Expression::Neg(a) => -evaluate(a, x, u)?,
        Expression::Add(a, b) => evaluate(a, x, u)? + evaluate(b, x, u)?,
        Expression::Sub(a, b) => evaluate(a, x, u)? - evaluate(b, x, u)?,
        Expression::Mul(a, b) => evaluate(a, x, u)? * evaluate(b, x, u)?,
        Expression::Div(a, b) => {
            let denom = evaluate(b, x, u)?;
            if denom == 0.0 {
                return Err(domain_error("division by zero", e));
            }
            evaluate(a, x, u)? / denom
        }
        Expression::Pow(a, b) => {
            let base = evaluate(a, x, u)?;
            let exponent = evaluate(b, x, u)?;
            base.powf(exponent)
        }
        Expression::Func(func, a) => {
            let v = evaluate(a, x, u)?;
            match func {
                Function::Sin => v.sin(),
                Function::Cos => v.cos(),
                Function::Exp => v.exp(),
                Function::Log => {
                    if v <= 0.0 {
                        return Err(domain_error(format!("log of nonpositive value {v}"), e));
                    }
                    v.ln()
                }
                Function::Sqrt => {
                    if v < 0.0 {
                        return Err(domain_error(format!("sqrt of negative value {v}"), e));
                    }
                    v.sqrt()
                }
                Function::Abs => v.abs(),
            }
        }
    };
    if !v.is_finite() {
        return Err(domain_error("non-finite result", e));
    }
    Ok(v)
}

/// List every variable reference whose index exceeds the declared dimensions
/// (`n` decision variables, `p` uncertainty variables). Empty means ok.
pub fn check_bindings(e: &Expression, n: usize, p: usize) -> Vec<BindingViolation> {
    let mut out = Vec::new();
    collect_violations(e, n, p, &mut out);
    out.sort_by_key(|v| match v {
        BindingViolation::X(i) => (0, *i),
        BindingViolation::U(i) => (1, *i),
    });
    out.dedup();
    out
}

fn collect_violations(e: &Expression, n: usize, p: usize, out: &mut Vec<BindingViolation>) {
    match e {
        Expression::Constant(_) => {}
        Expression::VarX(i) => {
            if *i > n {
                out.push(BindingViolation::X(*i));
            }
        }
        Expression::VarU(i) => {
            if *i > p {
                out.push(BindingViolation::U(*i));
            }
        }
        Expression::Neg(a) | Expression::Func(_, a) => collect_violations(a, n, p, out),
        Expression::Add(a, b)
        | Expression::Sub(a, b)
        | Expression::Mul(a, b)
        | Expression::Div(a, b)
        | Expression::Pow(a, b) => {
            collect_violations(a, n, p, out);
            collect_violations(b, n, p, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec())
    }

    #[test]
    fn parses_sum_of_variable_and_product() {
        let e = parse("x1 + 2*u1").unwrap();
        assert_eq!(
            e,
            Expression::Add(
                Box::new(Expression::VarX(1)),
                Box::new(Expression::Mul(
                    Box::new(Expression::Constant(2.0)),
                    Box::new(Expression::VarU(1)),
                )),
            )
        );
    }

    #[test]
    fn unary_minus_binds_looser_than_pow() {
        let e = parse("-x1^2").unwrap();
        assert_eq!(
            e,
            Expression::Neg(Box::new(Expression::Pow(
                Box::new(Expression::VarX(1)),
                Box::new(Expression::Constant(2.0)),
            )))
        );
    }

    #[test]
    fn parses_function_application() {
        let e = parse("exp(u2)*x2 - 1").unwrap();
        assert_eq!(
            e,
            Expression::Sub(
                Box::new(Expression::Mul(
                    Box::new(Expression::Func(
                        Function::Exp,
                        Box::new(Expression::VarU(2)),
                    )),
                    Box::new(Expression::VarX(2)),
                )),
                Box::new(Expression::Constant(1.0)),
            )
        );
    }

    #[test]
    fn pow_is_right_associative() {
        let e = parse("2^3^2").unwrap();
        let (x0, u0) = (pt(&[]), pt(&[]));
        assert_eq!(evaluate(&e, &x0, &u0).unwrap(), 512.0);
    }

    #[test]
    fn negated_literal_keeps_pow_precedence() {
        let e = parse("-2^2").unwrap();
        let (x0, u0) = (pt(&[]), pt(&[]));
        assert_eq!(evaluate(&e, &x0, &u0).unwrap(), -4.0);
        // parenthesized negative literals fold into the constant itself
        assert_eq!(
            parse("(-2)^2").unwrap(),
            Expression::Pow(
                Box::new(Expression::Constant(-2.0)),
                Box::new(Expression::Constant(2.0)),
            )
        );
    }

    #[test]
    fn whitespace_is_insignificant() {
        assert_eq!(parse(" x1+2 * u1 ").unwrap(), parse("x1+2*u1").unwrap());
    }

    #[test]
    fn scientific_numbers_parse() {
        assert_eq!(parse("1e-3").unwrap(), Expression::Constant(1e-3));
        assert_eq!(parse("2.5E+2").unwrap(), Expression::Constant(250.0));
        assert_eq!(parse(".5").unwrap(), Expression::Constant(0.5));
    }

    #[test]
    fn unknown_function_and_variable_are_reported() {
        match parse("tan(x1)") {
            Err(ParseError::UnknownFunction { name, offset }) => {
                assert_eq!(name, "tan");
                assert_eq!(offset, 0);
            }
            other => panic!("expected UnknownFunction, got {other:?}"),
        }
        assert!(matches!(
            parse("y1 + 1"),
            Err(ParseError::UnknownVariable { .. })
        ));
        // index 0 is not a valid variable
        assert!(matches!(
            parse("x0"),
            Err(ParseError::UnknownVariable { .. })
        ));
    }

    #[test]
    fn syntax_error_carries_offset() {
        match parse("x1 + ") {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("expected Syntax error, got {other:?}"),
        }
    }

    #[test]
    fn evaluates_arithmetic() {
        let e = parse("x1+2*u1").unwrap();
        assert_eq!(evaluate(&e, &pt(&[3.0]), &pt(&[1.0])).unwrap(), 5.0);
    }

    #[test]
    fn evaluates_abs() {
        let e = parse("abs(x1)").unwrap();
        assert_eq!(evaluate(&e, &pt(&[-2.0]), &pt(&[])).unwrap(), 2.0);
    }

    #[test]
    fn log_of_zero_is_domain_error() {
        let e = parse("log(x1)").unwrap();
        match evaluate(&e, &pt(&[0.0]), &pt(&[])) {
            Err(EvalError::Domain { node, .. }) => assert_eq!(node, "log(x1)"),
            other => panic!("expected Domain error, got {other:?}"),
        }
    }

    #[test]
    fn division_by_zero_is_domain_error() {
        let e = parse("1/x1").unwrap();
        assert!(matches!(
            evaluate(&e, &pt(&[0.0]), &pt(&[])),
            Err(EvalError::Domain { .. })
        ));
    }

    #[test]
    fn check_bindings_lists_excess_indices() {
        let e = parse("x1+u3").unwrap();
        assert_eq!(check_bindings(&e, 2, 2), vec![BindingViolation::U(3)]);
        let e = parse("x2*u1").unwrap();
        assert!(check_bindings(&e, 2, 1).is_empty());
        let e = parse("x3").unwrap();
        assert_eq!(check_bindings(&e, 2, 0), vec![BindingViolation::X(3)]);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let e = parse("sin(x1)*exp(u1) - x1/u2 + x1^3").unwrap();
        let x = pt(&[0.7]);
        let u = pt(&[1.3, 2.1]);
        let a = evaluate(&e, &x, &u).unwrap();
        let b = evaluate(&e, &x, &u).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn display_round_trips_spec_examples() {
        for src in [
            "x1 + 2*u1",
            "-x1^2",
            "exp(u2)*x2 - 1",
            "x1^-2",
            "-(2)",
            "(x1+u1)^(x2-1)",
            "1/(2*x1)",
            "x1 - (x2 - x3)",
        ] {
            let e = parse(src).unwrap();
            let printed = e.to_string();
            let reparsed = parse(&printed).unwrap();
            assert_eq!(e, reparsed, "round-trip failed for {src:?} -> {printed:?}");
        }
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        fn arb_expr() -> impl Strategy<Value = Expression> {
            let leaf = prop_oneof![
                (-100.0f64..100.0).prop_map(Expression::Constant),
                (1usize..4).prop_map(Expression::VarX),
                (1usize..4).prop_map(Expression::VarU),
            ];
            leaf.prop_recursive(8, 64, 2, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expression::Add(
                        Box::new(a),
                        Box::new(b)
                    )),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expression::Sub(
                        Box::new(a),
                        Box::new(b)
                    )),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expression::Mul(
                        Box::new(a),
                        Box::new(b)
                    )),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expression::Div(
                        Box::new(a),
                        Box::new(b)
                    )),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expression::Pow(
                        Box::new(a),
                        Box::new(b)
                    )),
                    inner.clone().prop_map(|a| Expression::Neg(Box::new(a))),
                    (
                        prop_oneof![
                            Just(Function::Sin),
                            Just(Function::Cos),
                            Just(Function::Exp),
                            Just(Function::Log),
                            Just(Function::Sqrt),
                            Just(Function::Abs),
                        ],
                        inner
                    )
                        .prop_map(|(f, a)| Expression::Func(f, Box::new(a))),
                ]
            })
        }

        proptest! {
            #[test]
            fn print_parse_round_trip(e in arb_expr()) {
                let printed = e.to_string();
                let reparsed = parse(&printed).unwrap();
                prop_assert_eq!(e, reparsed, "printed form: {}", printed);
            }

            #[test]
            fn plus_binds_looser_than_times(
                a in atom_src(), b in atom_src(), c in atom_src()
            ) {
                let bare = parse(&format!("{a}+{b}*{c}")).unwrap();
                let grouped = parse(&format!("{a}+({b}*{c})")).unwrap();
                prop_assert_eq!(bare, grouped);
            }
        }

        fn atom_src() -> impl Strategy<Value = String> {
            prop_oneof![
                (0u32..1000).prop_map(|v| v.to_string()),
                (1usize..5).prop_map(|i| format!("x{i}")),
                (1usize..5).prop_map(|i| format!("u{i}")),
                (1usize..5).prop_map(|i| format!("sin(x{i})")),
            ]
        }
    }
}
