//! Name resolution, type checking and tree-shape validation.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::{
    AvoidBall, Constant, Decl, Expr, ExprKind, ModelFile, Name, NodeDecl, NodeDeclKind, Pos, RawModel, Type,
};
use super::eval::{evaluate_expr, Value};
use super::DslError;

pub const FUNCTIONS: [(&str, usize); 6] = [("sin", 1), ("cos", 1), ("sqrt", 1), ("abs", 1), ("sgn", 1), ("sat", 2)];

/// Index `k` if `name` is exactly `{prefix}{k}` with canonical digits.
pub fn indexed_var(name: &str, prefix: char) -> Option<usize> {
    let digits = name.strip_prefix(prefix)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || (digits.len() > 1 && digits.starts_with('0')) {
        return None;
    }
    digits.parse().ok()
}

pub struct Scope<'a> {
    pub constants: &'a BTreeMap<String, f64>,
    pub state_dim: usize,
    /// Zero where controls are not in scope.
    pub control_dim: usize,
}

impl Scope<'_> {
    fn resolves(&self, name: &str) -> bool {
        self.constants.contains_key(name)
            || indexed_var(name, 'x').is_some_and(|k| k < self.state_dim)
            || indexed_var(name, 'u').is_some_and(|k| k < self.control_dim)
    }
}

fn type_error(pos: Pos, expected: impl ToString, found: impl ToString) -> DslError {
    DslError::TypeError {
        pos,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

pub fn type_of(e: &Expr, scope: &Scope) -> Result<Type, DslError> {
    let expect = |e: &Expr, want: Type| -> Result<(), DslError> {
        let got = type_of(e, scope)?;
        if got == want {
            Ok(())
        } else {
            Err(type_error(e.pos, want, got))
        }
    };
    match &e.kind {
        ExprKind::Num(_) => Ok(Type::Real),
        ExprKind::Status(_) => Ok(Type::Status),
        ExprKind::Ident(name) => {
            if scope.resolves(name) {
                Ok(Type::Real)
            } else {
                Err(DslError::UndeclaredIdentifier {
                    pos: e.pos,
                    name: name.clone(),
                })
            }
        }
        ExprKind::Neg(inner) => {
            expect(inner, Type::Real)?;
            Ok(Type::Real)
        }
        ExprKind::Binary(_, l, r) => {
            expect(l, Type::Real)?;
            expect(r, Type::Real)?;
            Ok(Type::Real)
        }
        ExprKind::Compare(_, l, r) => {
            expect(l, Type::Real)?;
            expect(r, Type::Real)?;
            Ok(Type::Predicate)
        }
        ExprKind::Call(f, args) => {
            let arity = FUNCTIONS
                .iter()
                .find(|(n, _)| n == f)
                .map(|(_, a)| *a)
                .ok_or_else(|| DslError::UndeclaredIdentifier {
                    pos: e.pos,
                    name: f.clone(),
                })?;
            if args.len() != arity {
                return Err(type_error(
                    e.pos,
                    format!("{arity} argument(s) to `{f}`"),
                    format!("{} argument(s)", args.len()),
                ));
            }
            for a in args {
                expect(a, Type::Real)?;
            }
            Ok(Type::Real)
        }
        ExprKind::If(c, t, f) => {
            expect(c, Type::Predicate)?;
            expect(t, Type::Status)?;
            expect(f, Type::Status)?;
            Ok(Type::Status)
        }
    }
}

fn require(e: &Expr, want: Type, scope: &Scope) -> Result<(), DslError> {
    let got = type_of(e, scope)?;
    if got == want {
        Ok(())
    } else {
        Err(type_error(e.pos, want, got))
    }
}

fn constant_value(e: &Expr, constants: &BTreeMap<String, f64>) -> Result<f64, DslError> {
    let scope = Scope {
        constants,
        state_dim: 0,
        control_dim: 0,
    };
    require(e, Type::Real, &scope)?;
    match evaluate_expr(e, constants) {
        Ok(Value::Real(v)) if v.is_finite() => Ok(v),
        Ok(other) => Err(DslError::InvalidValue {
            pos: e.pos,
            message: format!("constant expression evaluates to {other:?}"),
        }),
        Err(err) => Err(DslError::InvalidValue {
            pos: e.pos,
            message: err.to_string(),
        }),
    }
}

fn once<T>(slot: &mut Option<(T, Pos)>, value: T, pos: Pos, what: &str) -> Result<(), DslError> {
    if let Some((_, first)) = slot {
        return Err(DslError::DuplicateDefinition {
            pos,
            name: what.to_string(),
            first: *first,
        });
    }
    *slot = Some((value, pos));
    Ok(())
}

pub fn check(raw: RawModel) -> Result<ModelFile, DslError> {
    // Dimensions first: every expression depends on them.
    let mut state_dim = None;
    let mut control_dim = None;
    for d in &raw.decls {
        match d {
            Decl::StateDim { value, pos } => once(&mut state_dim, *value, *pos, "state_dim")?,
            Decl::ControlDim { value, pos } => once(&mut control_dim, *value, *pos, "control_dim")?,
            _ => {}
        }
    }
    let missing = |what: &str| DslError::Parse {
        pos: raw.pos,
        message: format!("model has no `{what}` declaration"),
    };
    let (n, _) = state_dim.ok_or_else(|| missing("state_dim"))?;
    let (m, _) = control_dim.ok_or_else(|| missing("control_dim"))?;
    if n == 0 {
        return Err(DslError::InvalidValue {
            pos: raw.pos,
            message: "state_dim must be positive".into(),
        });
    }

    let mut values: BTreeMap<String, f64> = BTreeMap::new();
    let mut constants: Vec<Constant> = Vec::new();
    let mut domain = None;
    let mut avoid = Vec::new();
    let mut plant: Option<(Vec<Option<Expr>>, Pos)> = None;
    let mut nodes: Vec<NodeDecl> = Vec::new();
    let mut node_pos: BTreeMap<String, Pos> = BTreeMap::new();
    let mut root: Option<(Name, Pos)> = None;

    for d in raw.decls {
        match d {
            Decl::StateDim { .. } | Decl::ControlDim { .. } => {}
            Decl::Const { name, value } => {
                if let Some(c) = constants.iter().find(|c| c.name.text == name.text) {
                    return Err(DslError::DuplicateDefinition {
                        pos: name.pos,
                        name: name.text,
                        first: c.name.pos,
                    });
                }
                if indexed_var(&name.text, 'x').is_some() || indexed_var(&name.text, 'u').is_some() {
                    return Err(DslError::DuplicateDefinition {
                        pos: name.pos,
                        name: name.text,
                        first: Pos::default(),
                    });
                }
                let v = constant_value(&value, &values)?;
                values.insert(name.text.clone(), v);
                constants.push(Constant {
                    name,
                    expr: value,
                    value: v,
                });
            }
            Decl::Domain { bounds, pos } => {
                if bounds.len() != n {
                    return Err(type_error(pos, format!("{n} bounds"), format!("{} bounds", bounds.len())));
                }
                for (lo, hi) in &bounds {
                    let (a, b) = (constant_value(lo, &values)?, constant_value(hi, &values)?);
                    if a > b {
                        return Err(DslError::InvalidValue {
                            pos: lo.pos,
                            message: format!("empty interval {a}:{b}"),
                        });
                    }
                }
                once(&mut domain, bounds, pos, "domain")?;
            }
            Decl::Avoid { center, radius, pos } => {
                if center.len() != n {
                    return Err(type_error(pos, format!("{n} coordinates"), format!("{} coordinates", center.len())));
                }
                for c in &center {
                    constant_value(c, &values)?;
                }
                if constant_value(&radius, &values)? < 0.0 {
                    return Err(DslError::InvalidValue {
                        pos: radius.pos,
                        message: "negative radius".into(),
                    });
                }
                avoid.push(AvoidBall { center, radius, pos });
            }
            Decl::Plant { equations, pos } => {
                let mut rhs: Vec<Option<Expr>> = vec![None; n];
                let mut seen: BTreeMap<usize, Pos> = BTreeMap::new();
                let scope = Scope {
                    constants: &values,
                    state_dim: n,
                    control_dim: m,
                };
                for (var, e) in equations {
                    let k = indexed_var(&var.text, 'x').filter(|k| *k < n).ok_or_else(|| {
                        DslError::UndeclaredIdentifier {
                            pos: var.pos,
                            name: var.text.clone(),
                        }
                    })?;
                    if let Some(first) = seen.insert(k, var.pos) {
                        return Err(DslError::DuplicateDefinition {
                            pos: var.pos,
                            name: format!("d{}", var.text),
                            first,
                        });
                    }
                    require(&e, Type::Real, &scope)?;
                    rhs[k] = Some(e);
                }
                if let Some(k) = rhs.iter().position(Option::is_none) {
                    return Err(DslError::Parse {
                        pos,
                        message: format!("plant has no equation for dx{k}"),
                    });
                }
                once(&mut plant, rhs, pos, "plant")?;
            }
            Decl::Leaf { name, u, status } => {
                if let Some(first) = node_pos.get(&name.text) {
                    return Err(DslError::DuplicateDefinition {
                        pos: name.pos,
                        name: name.text,
                        first: *first,
                    });
                }
                if u.len() != m {
                    return Err(type_error(
                        u[0].pos,
                        format!("{m} control component(s)"),
                        format!("{} component(s)", u.len()),
                    ));
                }
                let scope = Scope {
                    constants: &values,
                    state_dim: n,
                    control_dim: 0,
                };
                for e in &u {
                    require(e, Type::Real, &scope)?;
                }
                require(&status, Type::Status, &scope)?;
                node_pos.insert(name.text.clone(), name.pos);
                nodes.push(NodeDecl {
                    name,
                    kind: NodeDeclKind::Leaf { u, status },
                });
            }
            Decl::Composite { name, kind, children } => {
                if let Some(first) = node_pos.get(&name.text) {
                    return Err(DslError::DuplicateDefinition {
                        pos: name.pos,
                        name: name.text,
                        first: *first,
                    });
                }
                node_pos.insert(name.text.clone(), name.pos);
                nodes.push(NodeDecl {
                    name,
                    kind: NodeDeclKind::Composite { kind, children },
                });
            }
            Decl::Root { name, pos } => once(&mut root, name, pos, "root")?,
        }
    }

    let (plant, _) = plant.ok_or_else(|| missing("plant"))?;
    let (root, _) = root.ok_or(DslError::MissingRoot { pos: raw.end })?;
    check_tree(&nodes, &node_pos, &root)?;
    Ok(ModelFile {
        name: raw.name,
        state_dim: n,
        control_dim: m,
        constants,
        domain: domain.map(|(d, _)| d),
        avoid,
        plant: plant.into_iter().map(|e| e.expect("checked above")).collect(),
        nodes,
        root,
    })
}

/// Every reference names a declared node, no node is referenced twice (the
/// root not at all), and every node hangs under the root.
fn check_tree(nodes: &[NodeDecl], declared: &BTreeMap<String, Pos>, root: &Name) -> Result<(), DslError> {
    if !declared.contains_key(&root.text) {
        return Err(DslError::UndeclaredIdentifier {
            pos: root.pos,
            name: root.text.clone(),
        });
    }
    let mut referenced: BTreeSet<&str> = BTreeSet::new();
    for node in nodes {
        if let NodeDeclKind::Composite { children, .. } = &node.kind {
            for c in children {
                if !declared.contains_key(&c.text) {
                    return Err(DslError::UndeclaredIdentifier {
                        pos: c.pos,
                        name: c.text.clone(),
                    });
                }
                if c.text == root.text || !referenced.insert(&c.text) {
                    return Err(DslError::NodeReusedInTree {
                        pos: c.pos,
                        name: c.text.clone(),
                    });
                }
            }
        }
    }
    // With single references and an unreferenced root, the reference graph
    // is a forest; anything not reached from the root is a detached part.
    let by_name: BTreeMap<&str, &NodeDecl> = nodes.iter().map(|n| (n.name.text.as_str(), n)).collect();
    let mut reached: BTreeSet<&str> = BTreeSet::new();
    let mut stack = vec![root.text.as_str()];
    while let Some(name) = stack.pop() {
        if !reached.insert(name) {
            continue;
        }
        if let NodeDeclKind::Composite { children, .. } = &by_name[name].kind {
            stack.extend(children.iter().map(|c| c.text.as_str()));
        }
    }
    if let Some(lost) = nodes.iter().find(|n| !reached.contains(n.name.text.as_str())) {
        return Err(DslError::UnreachableNode {
            pos: lost.name.pos,
            name: lost.name.text.clone(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexed_vars() {
        assert_eq!(indexed_var("x0", 'x'), Some(0));
        assert_eq!(indexed_var("x12", 'x'), Some(12));
        assert_eq!(indexed_var("x01", 'x'), None);
        assert_eq!(indexed_var("x", 'x'), None);
        assert_eq!(indexed_var("xa", 'x'), None);
        assert_eq!(indexed_var("u3", 'x'), None);
    }
}
