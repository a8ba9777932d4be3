//! Canonical source rendering. Parsing the output yields the same model up
//! to source positions.

use std::fmt::Write as _;

use super::ast::{BinOp, CompositeKind, Expr, ExprKind, ModelFile, NodeDeclKind};

fn precedence(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::If(..) => 0,
        ExprKind::Compare(..) => 1,
        ExprKind::Binary(BinOp::Add | BinOp::Sub, ..) => 2,
        ExprKind::Binary(BinOp::Mul | BinOp::Div, ..) => 3,
        ExprKind::Neg(_) => 4,
        _ => 5,
    }
}

fn write_expr(out: &mut String, e: &Expr, min: u8) {
    let p = precedence(e);
    if p < min {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Num(v) => write!(out, "{v}").expect("write to String"),
        ExprKind::Ident(name) => out.push_str(name),
        ExprKind::Status(s) => out.push(s.letter()),
        ExprKind::Neg(inner) => {
            out.push('-');
            write_expr(out, inner, 4);
        }
        ExprKind::Binary(op, l, r) => {
            write_expr(out, l, p);
            write!(out, " {} ", op.symbol()).expect("write to String");
            write_expr(out, r, p + 1);
        }
        ExprKind::Compare(op, l, r) => {
            write_expr(out, l, 2);
            write!(out, " {} ", op.symbol()).expect("write to String");
            write_expr(out, r, 2);
        }
        ExprKind::Call(f, args) => {
            out.push_str(f);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, 0);
            }
            out.push(')');
        }
        ExprKind::If(c, t, f) => {
            out.push_str("if ");
            write_expr(out, c, 1);
            out.push_str(" then ");
            write_expr(out, t, 0);
            out.push_str(" else ");
            write_expr(out, f, 0);
        }
    }
    if p < min {
        out.push(')');
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn list(items: &[Expr]) -> String {
    items.iter().map(expr_to_string).collect::<Vec<_>>().join(", ")
}

pub fn print_model(m: &ModelFile) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!("model \"{}\" {{", m.name));
    line(format!("    state_dim = {};", m.state_dim));
    line(format!("    control_dim = {};", m.control_dim));
    for c in &m.constants {
        line(format!("    const {} = {};", c.name.text, expr_to_string(&c.expr)));
    }
    if let Some(d) = &m.domain {
        let bounds: Vec<String> = d
            .iter()
            .map(|(lo, hi)| format!("{}:{}", expr_to_string(lo), expr_to_string(hi)))
            .collect();
        line(format!("    domain = [{}];", bounds.join(", ")));
    }
    for a in &m.avoid {
        line(format!("    avoid [{}] radius {};", list(&a.center), expr_to_string(&a.radius)));
    }
    line("    plant {".into());
    for (k, e) in m.plant.iter().enumerate() {
        line(format!("        dx{k} = {};", expr_to_string(e)));
    }
    line("    }".into());
    for n in &m.nodes {
        match &n.kind {
            NodeDeclKind::Leaf { u, status } => {
                line(format!("    leaf {} {{", n.name.text));
                line(format!("        u = [{}];", list(u)));
                line(format!("        status = {};", expr_to_string(status)));
                line("    }".into());
            }
            NodeDeclKind::Composite { kind, children } => {
                let kw = match kind {
                    CompositeKind::Seq => "seq",
                    CompositeKind::Fal => "fal",
                };
                let names: Vec<&str> = children.iter().map(|c| c.text.as_str()).collect();
                line(format!("    {kw} {} = [{}];", n.name.text, names.join(", ")));
            }
        }
    }
    line(format!("    root = {};", m.root.text));
    line("}".into());
    out
}
