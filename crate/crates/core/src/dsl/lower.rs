//! Compilation of a checked model into an executable behavior tree and plant.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::ast::{BinOp, CmpOp, CompositeKind, Expr, ExprKind, ModelFile, NodeDeclKind};
use super::check::indexed_var;
use super::eval::{binary, call1, sat};
use crate::bt::{BehaviorTree, BtError, BtNode, EvalError, LeafBehavior, Plant, Status};
use crate::sampling::{Ball, DomainBox};

/// Expression with identifiers resolved to slots and constants folded.
#[derive(Debug, Clone, PartialEq)]
pub enum Code {
    Num(f64),
    State(usize),
    Control(usize),
    Neg(Box<Code>),
    Binary(BinOp, Box<Code>, Box<Code>),
    Compare(CmpOp, Box<Code>, Box<Code>),
    Call(String, Box<Code>),
    Sat(Box<Code>, Box<Code>),
    Status(Status),
    If(Box<Code>, Box<Code>, Box<Code>),
}

impl Code {
    pub fn compile(e: &Expr, constants: &BTreeMap<String, f64>) -> Code {
        let c = |e: &Expr| Box::new(Code::compile(e, constants));
        let code = match &e.kind {
            ExprKind::Num(v) => Code::Num(*v),
            ExprKind::Status(s) => Code::Status(*s),
            ExprKind::Ident(name) => {
                if let Some(v) = constants.get(name) {
                    Code::Num(*v)
                } else if let Some(k) = indexed_var(name, 'x') {
                    Code::State(k)
                } else if let Some(k) = indexed_var(name, 'u') {
                    Code::Control(k)
                } else {
                    unreachable!("identifiers are resolved by the checker")
                }
            }
            ExprKind::Neg(inner) => Code::Neg(c(inner)),
            ExprKind::Binary(op, l, r) => Code::Binary(*op, c(l), c(r)),
            ExprKind::Compare(op, l, r) => Code::Compare(*op, c(l), c(r)),
            ExprKind::Call(f, args) if f == "sat" => Code::Sat(c(&args[0]), c(&args[1])),
            ExprKind::Call(f, args) => Code::Call(f.clone(), c(&args[0])),
            ExprKind::If(cond, t, f) => Code::If(c(cond), c(t), c(f)),
        };
        code.fold()
    }

    fn is_const(&self) -> bool {
        matches!(self, Code::Num(_) | Code::Status(_))
    }

    /// Replaces variable-free subterms by their values. Subterms whose
    /// evaluation fails are left in place so the error surfaces at run time.
    fn fold(self) -> Code {
        let foldable = match &self {
            Code::Neg(a) | Code::Call(_, a) => a.is_const(),
            Code::Binary(_, a, b) | Code::Sat(a, b) => a.is_const() && b.is_const(),
            _ => false,
        };
        if let Code::If(cond, t, f) = &self {
            if let Code::Compare(op, a, b) = &**cond {
                if let (Code::Num(x), Code::Num(y)) = (&**a, &**b) {
                    return if op.apply(*x, *y) { (**t).clone() } else { (**f).clone() };
                }
            }
        }
        if foldable {
            if let Ok(v) = self.real(&[], &[]) {
                return Code::Num(v);
            }
        }
        self
    }

    pub fn real(&self, x: &[f64], u: &[f64]) -> Result<f64, EvalError> {
        let slot = |v: &[f64], k: usize, p: char| {
            v.get(k)
                .copied()
                .ok_or_else(|| EvalError::UnboundIdentifier(format!("{p}{k}")))
        };
        match self {
            Code::Num(v) => Ok(*v),
            Code::State(k) => slot(x, *k, 'x'),
            Code::Control(k) => slot(u, *k, 'u'),
            Code::Neg(a) => Ok(-a.real(x, u)?),
            Code::Binary(op, a, b) => binary(*op, a.real(x, u)?, b.real(x, u)?),
            Code::Call(f, a) => call1(f, a.real(x, u)?),
            Code::Sat(a, b) => sat(a.real(x, u)?, b.real(x, u)?),
            _ => Err(EvalError::Other("expected a real expression".into())),
        }
    }

    pub fn status(&self, x: &[f64]) -> Result<Status, EvalError> {
        match self {
            Code::Status(s) => Ok(*s),
            Code::If(c, t, f) => {
                let Code::Compare(op, a, b) = &**c else {
                    return Err(EvalError::Other("expected a predicate".into()));
                };
                if op.apply(a.real(x, &[])?, b.real(x, &[])?) {
                    t.status(x)
                } else {
                    f.status(x)
                }
            }
            _ => Err(EvalError::Other("expected a status expression".into())),
        }
    }
}

/// An executable model.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub source: ModelFile,
    pub bt: BehaviorTree,
    pub plant: Plant,
    pub domain: Option<DomainBox>,
    pub avoid: Vec<Ball>,
}

fn constants_of(m: &ModelFile) -> BTreeMap<String, f64> {
    m.constants.iter().map(|c| (c.name.text.clone(), c.value)).collect()
}

fn const_real(e: &Expr, consts: &BTreeMap<String, f64>) -> f64 {
    match Code::compile(e, consts) {
        Code::Num(v) => v,
        other => other.real(&[], &[]).expect("checked constant expression"),
    }
}

fn build_node(m: &ModelFile, name: &str, consts: &BTreeMap<String, f64>) -> BtNode {
    let decl = m.node(name).expect("checked reference");
    match &decl.kind {
        NodeDeclKind::Leaf { u, status } => {
            let u: Arc<Vec<Code>> = Arc::new(u.iter().map(|e| Code::compile(e, consts)).collect());
            let status = Arc::new(Code::compile(status, consts));
            BtNode::Leaf(LeafBehavior::fallible(
                name,
                Arc::new(move |x: &[f64]| u.iter().map(|c| c.real(x, &[])).collect()),
                Arc::new(move |x: &[f64]| status.status(x)),
            ))
        }
        NodeDeclKind::Composite { kind, children } => {
            let kids = children.iter().map(|c| build_node(m, &c.text, consts)).collect();
            let node = match kind {
                CompositeKind::Seq => BtNode::seq(kids),
                CompositeKind::Fal => BtNode::fal(kids),
            };
            node.labeled(name)
        }
    }
}

/// Node ids follow a depth-first preorder walk from the root, so the root is
/// 0 and each subtree occupies a contiguous id range.
pub fn lower(m: &ModelFile) -> Result<Model, BtError> {
    let consts = constants_of(m);
    let root = build_node(m, &m.root.text, &consts);
    let bt = BehaviorTree::new(root, m.state_dim, m.control_dim)?;
    let rhs: Arc<Vec<Code>> = Arc::new(m.plant.iter().map(|e| Code::compile(e, &consts)).collect());
    let plant = Plant::fallible(
        m.state_dim,
        m.control_dim,
        Arc::new(move |x: &[f64], u: &[f64]| rhs.iter().map(|c| c.real(x, u)).collect()),
    );
    let domain = m.domain.as_ref().map(|d| {
        DomainBox::new(d.iter().map(|(lo, hi)| (const_real(lo, &consts), const_real(hi, &consts))).collect())
            .expect("checked bounds")
    });
    let avoid = m
        .avoid
        .iter()
        .map(|a| Ball {
            center: a.center.iter().map(|e| const_real(e, &consts)).collect(),
            radius: const_real(&a.radius, &consts),
        })
        .collect();
    Ok(Model {
        name: m.name.clone(),
        source: m.clone(),
        bt,
        plant,
        domain,
        avoid,
    })
}
