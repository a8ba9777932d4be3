//! Recursive-descent parser producing declarations in source order.

use super::ast::{BinOp, CmpOp, CompositeKind, Decl, Expr, ExprKind, Name, Pos, RawModel};
use super::lexer::{lex, Tok, Token};
use super::DslError;
use crate::bt::Status;

pub const RESERVED: [&str; 6] = ["if", "then", "else", "R", "S", "F"];

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

type PResult<T> = Result<T, DslError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        let t = self.peek();
        Err(DslError::Parse {
            pos: t.pos,
            message: format!("expected {expected}, found {}", t.tok.describe()),
        })
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek().tok, Tok::Sym(x) if x == s)
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(x) if x == w)
    }

    fn sym(&mut self, s: &str) -> PResult<Pos> {
        if self.at_sym(s) {
            Ok(self.bump().pos)
        } else {
            self.error(&format!("`{s}`"))
        }
    }

    fn word(&mut self, w: &str) -> PResult<Pos> {
        if self.at_word(w) {
            Ok(self.bump().pos)
        } else {
            self.error(&format!("`{w}`"))
        }
    }

    fn name(&mut self) -> PResult<Name> {
        match &self.peek().tok {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let t = self.bump();
                let Tok::Ident(text) = t.tok else { unreachable!() };
                Ok(Name { text, pos: t.pos })
            }
            _ => self.error("a name"),
        }
    }

    fn count(&mut self) -> PResult<usize> {
        match self.peek().tok {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                self.bump();
                Ok(v as usize)
            }
            _ => self.error("a non-negative integer"),
        }
    }

    fn model(&mut self) -> PResult<RawModel> {
        let pos = self.word("model")?;
        let name = match &self.peek().tok {
            Tok::Str(s) => s.clone(),
            _ => return self.error("a model name string"),
        };
        self.bump();
        self.sym("{")?;
        let mut decls = Vec::new();
        while !self.at_sym("}") {
            decls.push(self.decl()?);
        }
        let end = self.sym("}")?;
        if self.peek().tok != Tok::Eof {
            return self.error("end of input");
        }
        Ok(RawModel { name, pos, end, decls })
    }

    fn comma_list<T>(&mut self, close: &str, mut item: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let mut out = vec![item(self)?];
        while self.at_sym(",") {
            self.bump();
            out.push(item(self)?);
        }
        self.sym(close)?;
        Ok(out)
    }

    fn decl(&mut self) -> PResult<Decl> {
        let keyword = match &self.peek().tok {
            Tok::Ident(s) => s.clone(),
            _ => return self.error("a declaration"),
        };
        let pos = self.peek().pos;
        match keyword.as_str() {
            "const" => {
                self.bump();
                let name = self.name()?;
                self.sym("=")?;
                let value = self.expr()?;
                self.sym(";")?;
                Ok(Decl::Const { name, value })
            }
            "state_dim" | "control_dim" => {
                self.bump();
                self.sym("=")?;
                let value = self.count()?;
                self.sym(";")?;
                Ok(if keyword == "state_dim" {
                    Decl::StateDim { value, pos }
                } else {
                    Decl::ControlDim { value, pos }
                })
            }
            "domain" => {
                self.bump();
                self.sym("=")?;
                self.sym("[")?;
                let bounds = self.comma_list("]", |p| {
                    let lo = p.expr()?;
                    p.sym(":")?;
                    Ok((lo, p.expr()?))
                })?;
                self.sym(";")?;
                Ok(Decl::Domain { bounds, pos })
            }
            "avoid" => {
                self.bump();
                self.sym("[")?;
                let center = self.comma_list("]", Self::expr)?;
                self.word("radius")?;
                let radius = self.expr()?;
                self.sym(";")?;
                Ok(Decl::Avoid { center, radius, pos })
            }
            "plant" => {
                self.bump();
                self.sym("{")?;
                let mut equations = vec![self.equation()?];
                while !self.at_sym("}") {
                    equations.push(self.equation()?);
                }
                self.sym("}")?;
                Ok(Decl::Plant { equations, pos })
            }
            "leaf" => {
                self.bump();
                let name = self.name()?;
                self.sym("{")?;
                self.word("u")?;
                self.sym("=")?;
                self.sym("[")?;
                let u = self.comma_list("]", Self::expr)?;
                self.sym(";")?;
                self.word("status")?;
                self.sym("=")?;
                let status = self.expr()?;
                self.sym(";")?;
                self.sym("}")?;
                Ok(Decl::Leaf { name, u, status })
            }
            "seq" | "fal" => {
                self.bump();
                let kind = if keyword == "seq" { CompositeKind::Seq } else { CompositeKind::Fal };
                let name = self.name()?;
                self.sym("=")?;
                self.sym("[")?;
                let children = self.comma_list("]", Self::name)?;
                self.sym(";")?;
                Ok(Decl::Composite { name, kind, children })
            }
            "root" => {
                self.bump();
                self.sym("=")?;
                let name = self.name()?;
                self.sym(";")?;
                Ok(Decl::Root { name, pos })
            }
            _ => self.error("a declaration"),
        }
    }

    /// `dx0 = e;` or `d x0 = e;`.
    fn equation(&mut self) -> PResult<(Name, Expr)> {
        let t = self.peek().clone();
        let var = match &t.tok {
            Tok::Ident(s) if s == "d" => {
                self.bump();
                self.name()?
            }
            Tok::Ident(s) if s.len() > 1 && s.starts_with('d') => {
                self.bump();
                Name {
                    text: s[1..].to_string(),
                    pos: Pos {
                        line: t.pos.line,
                        col: t.pos.col + 1,
                    },
                }
            }
            _ => return self.error("a derivative `dx<k>`"),
        };
        self.sym("=")?;
        let e = self.expr()?;
        self.sym(";")?;
        Ok((var, e))
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        if self.at_word("if") {
            let pos = self.bump().pos;
            let c = self.expr()?;
            self.word("then")?;
            let t = self.expr()?;
            self.word("else")?;
            let e = self.expr()?;
            return Ok(Expr::new(ExprKind::If(Box::new(c), Box::new(t), Box::new(e)), pos));
        }
        let lhs = self.additive()?;
        let op = match self.peek().tok {
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => return Ok(lhs),
        };
        let pos = self.bump().pos;
        let rhs = self.additive()?;
        Ok(Expr::new(ExprKind::Compare(op, Box::new(lhs), Box::new(rhs)), pos))
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let pos = self.bump().pos;
            let rhs = self.term()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos);
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym("*") => BinOp::Mul,
                Tok::Sym("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            let pos = self.bump().pos;
            let rhs = self.unary()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.at_sym("-") {
            let pos = self.bump().pos;
            let inner = self.unary()?;
            return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), pos));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::new(ExprKind::Num(v), t.pos))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.sym(")")?;
                Ok(e)
            }
            Tok::Ident(ref s) => {
                let status = match s.as_str() {
                    "R" => Some(Status::Running),
                    "S" => Some(Status::Success),
                    "F" => Some(Status::Failure),
                    _ => None,
                };
                if let Some(st) = status {
                    self.bump();
                    return Ok(Expr::new(ExprKind::Status(st), t.pos));
                }
                let name = self.name()?;
                if self.at_sym("(") {
                    self.bump();
                    let args = self.comma_list(")", Self::expr)?;
                    return Ok(Expr::new(ExprKind::Call(name.text, args), t.pos));
                }
                Ok(Expr::new(ExprKind::Ident(name.text), t.pos))
            }
            _ => self.error("an expression"),
        }
    }
}

pub fn parse_raw(src: &str) -> Result<RawModel, DslError> {
    let toks = lex(src)?;
    Parser { toks, at: 0 }.model()
}

/// Parses a standalone expression (used by tests and tooling).
pub fn parse_expr(src: &str) -> Result<Expr, DslError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, at: 0 };
    let e = p.expr()?;
    if p.peek().tok != Tok::Eof {
        return p.error("end of expression");
    }
    Ok(e)
}
