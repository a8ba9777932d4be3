//! Tree-walking evaluation of model expressions.

use std::collections::BTreeMap;

use super::ast::{BinOp, Expr, ExprKind};
use crate::bt::{EvalError, Status};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Real(f64),
    Bool(bool),
    Status(Status),
}

/// `sgn(0) = 0`.
pub fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Clamp to `[-limit, limit]`.
pub fn sat(v: f64, limit: f64) -> Result<f64, EvalError> {
    if limit.is_nan() || limit < 0.0 {
        return Err(EvalError::Other(format!("saturation limit {limit} is negative")));
    }
    Ok(v.max(-limit).min(limit))
}

pub fn call1(f: &str, v: f64) -> Result<f64, EvalError> {
    Ok(match f {
        "sin" => v.sin(),
        "cos" => v.cos(),
        "sqrt" => v.sqrt(),
        "abs" => v.abs(),
        "sgn" => sgn(v),
        _ => return Err(EvalError::UnboundIdentifier(f.to_string())),
    })
}

pub fn binary(op: BinOp, a: f64, b: f64) -> Result<f64, EvalError> {
    Ok(match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            a / b
        }
    })
}

fn real(e: &Expr, env: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
    match evaluate_expr(e, env)? {
        Value::Real(v) => Ok(v),
        other => Err(EvalError::Other(format!("expected a real, got {other:?}"))),
    }
}

/// Strict evaluation with every free identifier looked up in `env`.
pub fn evaluate_expr(e: &Expr, env: &BTreeMap<String, f64>) -> Result<Value, EvalError> {
    Ok(match &e.kind {
        ExprKind::Num(v) => Value::Real(*v),
        ExprKind::Status(s) => Value::Status(*s),
        ExprKind::Ident(name) => Value::Real(
            *env
                .get(name)
                .ok_or_else(|| EvalError::UnboundIdentifier(name.clone()))?,
        ),
        ExprKind::Neg(inner) => Value::Real(-real(inner, env)?),
        ExprKind::Binary(op, l, r) => Value::Real(binary(*op, real(l, env)?, real(r, env)?)?),
        ExprKind::Compare(op, l, r) => Value::Bool(op.apply(real(l, env)?, real(r, env)?)),
        ExprKind::Call(f, args) => {
            let vals = args.iter().map(|a| real(a, env)).collect::<Result<Vec<_>, _>>()?;
            match (f.as_str(), vals.as_slice()) {
                ("sat", [v, l]) => Value::Real(sat(*v, *l)?),
                (_, [v]) => Value::Real(call1(f, *v)?),
                _ => return Err(EvalError::Other(format!("wrong number of arguments to `{f}`"))),
            }
        }
        ExprKind::If(c, t, f) => match evaluate_expr(c, env)? {
            Value::Bool(true) => evaluate_expr(t, env)?,
            Value::Bool(false) => evaluate_expr(f, env)?,
            other => return Err(EvalError::Other(format!("expected a predicate, got {other:?}"))),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parser::parse_expr;

    fn env(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn eval(src: &str, e: &BTreeMap<String, f64>) -> Result<Value, EvalError> {
        evaluate_expr(&parse_expr(src).unwrap(), e)
    }

    #[test]
    fn hand_computed_table() {
        use std::f64::consts::PI;
        let e = env(&[("x0", PI), ("x1", 0.0), ("a", 2.0), ("b", -3.5)]);
        let e0 = env(&[("x0", 0.0), ("x1", 0.0)]);
        let energy = "x1 * x1 / 2 + cos(x0) - 1";
        let cases: Vec<(&str, &BTreeMap<String, f64>, Value)> = vec![
            (energy, &e, Value::Real(-2.0)),
            (energy, &e0, Value::Real(0.0)),
            ("sat(5.0, 2.0)", &e, Value::Real(2.0)),
            ("sat(-5.0, 2.0)", &e, Value::Real(-2.0)),
            ("sat(1.5, 2.0)", &e, Value::Real(1.5)),
            ("sgn(b)", &e, Value::Real(-1.0)),
            ("sgn(a)", &e, Value::Real(1.0)),
            ("sgn(x1 * cos(x0))", &e, Value::Real(0.0)),
            ("sqrt(16)", &e, Value::Real(4.0)),
            ("abs(b)", &e, Value::Real(3.5)),
            ("sin(0)", &e, Value::Real(0.0)),
            ("cos(0) * a", &e, Value::Real(2.0)),
            ("a - b * 2", &e, Value::Real(9.0)),
            ("(a - b) * 2", &e, Value::Real(11.0)),
            ("-a - -b", &e, Value::Real(-5.5)),
            ("7 / a", &e, Value::Real(3.5)),
            ("1 - 2 - 3", &e, Value::Real(-4.0)),
            ("a <= 2", &e, Value::Bool(true)),
            ("a < 2", &e, Value::Bool(false)),
            ("if b >= 0 then S else if b > -4 then F else R", &e, Value::Status(Status::Failure)),
        ];
        assert_eq!(cases.len(), 20);
        for (src, env, want) in cases {
            let got = eval(src, env).unwrap();
            match (got, want) {
                (Value::Real(g), Value::Real(w)) => assert!((g - w).abs() < 1e-12, "{src}: {g} vs {w}"),
                _ => assert_eq!(got, want, "{src}"),
            }
        }
    }

    #[test]
    fn errors() {
        let e = env(&[("a", 0.0)]);
        assert_eq!(eval("1 / a", &e), Err(EvalError::DivisionByZero));
        assert_eq!(eval("q + 1", &e), Err(EvalError::UnboundIdentifier("q".into())));
        assert!(eval("sat(1, -1)", &e).is_err());
    }
}
