use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bt::Status;

/// 1-based line and column (in characters).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExprKind {
    Num(f64),
    Ident(String),
    Status(Status),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Compare(CmpOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

impl Expr {
    pub fn new(kind: ExprKind, pos: Pos) -> Self {
        Expr { kind, pos }
    }

    pub fn without_spans(&self) -> Expr {
        let b = |e: &Expr| Box::new(e.without_spans());
        let kind = match &self.kind {
            ExprKind::Neg(e) => ExprKind::Neg(b(e)),
            ExprKind::Binary(op, l, r) => ExprKind::Binary(*op, b(l), b(r)),
            ExprKind::Compare(op, l, r) => ExprKind::Compare(*op, b(l), b(r)),
            ExprKind::Call(f, args) => ExprKind::Call(f.clone(), args.iter().map(Expr::without_spans).collect()),
            ExprKind::If(c, t, e) => ExprKind::If(b(c), b(t), b(e)),
            other => other.clone(),
        };
        Expr { kind, pos: Pos::default() }
    }
}

/// Value sort of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Type {
    Real,
    Predicate,
    Status,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Real => "real",
            Type::Predicate => "predicate",
            Type::Status => "status",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Name {
    pub text: String,
    pub pos: Pos,
}

/// One declaration as written, before cross-declaration checks.
#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Const { name: Name, value: Expr },
    StateDim { value: usize, pos: Pos },
    ControlDim { value: usize, pos: Pos },
    Domain { bounds: Vec<(Expr, Expr)>, pos: Pos },
    Avoid { center: Vec<Expr>, radius: Expr, pos: Pos },
    Plant { equations: Vec<(Name, Expr)>, pos: Pos },
    Leaf { name: Name, u: Vec<Expr>, status: Expr },
    Composite { name: Name, kind: CompositeKind, children: Vec<Name> },
    Root { name: Name, pos: Pos },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompositeKind {
    Seq,
    Fal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawModel {
    pub name: String,
    pub pos: Pos,
    pub end: Pos,
    pub decls: Vec<Decl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub name: Name,
    pub expr: Expr,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidBall {
    pub center: Vec<Expr>,
    pub radius: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeDeclKind {
    Leaf { u: Vec<Expr>, status: Expr },
    Composite { kind: CompositeKind, children: Vec<Name> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDecl {
    pub name: Name,
    pub kind: NodeDeclKind,
}

/// A checked model: every identifier resolves, types agree and the node
/// references form a single tree under `root`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub name: String,
    pub state_dim: usize,
    pub control_dim: usize,
    pub constants: Vec<Constant>,
    pub domain: Option<Vec<(Expr, Expr)>>,
    pub avoid: Vec<AvoidBall>,
    /// `plant[k]` is the right-hand side of `dx{k}`.
    pub plant: Vec<Expr>,
    /// Declaration order.
    pub nodes: Vec<NodeDecl>,
    pub root: Name,
}

impl ModelFile {
    pub fn node(&self, name: &str) -> Option<&NodeDecl> {
        self.nodes.iter().find(|n| n.name.text == name)
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|c| c.name.text == name).map(|c| c.value)
    }

    /// Copy with every position reset, for structural comparison.
    pub fn without_spans(&self) -> ModelFile {
        let name = |n: &Name| Name {
            text: n.text.clone(),
            pos: Pos::default(),
        };
        let exprs = |v: &[Expr]| v.iter().map(Expr::without_spans).collect::<Vec<_>>();
        ModelFile {
            name: self.name.clone(),
            state_dim: self.state_dim,
            control_dim: self.control_dim,
            constants: self
                .constants
                .iter()
                .map(|c| Constant {
                    name: name(&c.name),
                    expr: c.expr.without_spans(),
                    value: c.value,
                })
                .collect(),
            domain: self
                .domain
                .as_ref()
                .map(|d| d.iter().map(|(lo, hi)| (lo.without_spans(), hi.without_spans())).collect()),
            avoid: self
                .avoid
                .iter()
                .map(|a| AvoidBall {
                    center: exprs(&a.center),
                    radius: a.radius.without_spans(),
                    pos: Pos::default(),
                })
                .collect(),
            plant: exprs(&self.plant),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDecl {
                    name: name(&n.name),
                    kind: match &n.kind {
                        NodeDeclKind::Leaf { u, status } => NodeDeclKind::Leaf {
                            u: exprs(u),
                            status: status.without_spans(),
                        },
                        NodeDeclKind::Composite { kind, children } => NodeDeclKind::Composite {
                            kind: *kind,
                            children: children.iter().map(name).collect(),
                        },
                    },
                })
                .collect(),
            root: name(&self.root),
        }
    }
}
