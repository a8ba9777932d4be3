//! The `.btm` model language.
//!
//! ```text
//! model "thermostat" {
//!     state_dim = 1;
//!     control_dim = 1;
//!     const T = 21;
//!     plant { dx0 = u0; }
//!     leaf too_warm { u = [0]; status = if x0 > T then S else F; }
//!     leaf heater_on { u = [1]; status = R; }
//!     leaf heater_off { u = [-1]; status = R; }
//!     fal regulate = [too_warm, heater_on];
//!     seq main = [regulate, heater_off];
//!     root = main;
//! }
//! ```
//!
//! Besides the tree and plant, a model may carry a sampling `domain` and any
//! number of `avoid [c...] radius r;` balls that sampled initial conditions
//! are pushed out of.

pub mod ast;
pub mod check;
pub mod eval;
pub mod lexer;
pub mod lower;
pub mod parser;
pub mod printer;

use thiserror::Error;

pub use ast::{ModelFile, Pos};
pub use eval::{evaluate_expr, Value};
pub use lower::{lower, Model};
pub use printer::print_model;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("{pos}: lex error: {message}")]
    Lex { pos: Pos, message: String },
    #[error("{pos}: parse error: {message}")]
    Parse { pos: Pos, message: String },
    #[error("{pos}: undeclared identifier `{name}`")]
    UndeclaredIdentifier { pos: Pos, name: String },
    #[error("{pos}: type error: expected {expected}, found {found}")]
    TypeError { pos: Pos, expected: String, found: String },
    #[error("{pos}: `{name}` is already defined (first at {first})")]
    DuplicateDefinition { pos: Pos, name: String, first: Pos },
    #[error("{pos}: node `{name}` is used more than once in the tree")]
    NodeReusedInTree { pos: Pos, name: String },
    #[error("{pos}: model has no `root = ...;` declaration")]
    MissingRoot { pos: Pos },
    #[error("{pos}: node `{name}` is not reachable from the root")]
    UnreachableNode { pos: Pos, name: String },
    #[error("{pos}: invalid value: {message}")]
    InvalidValue { pos: Pos, message: String },
}

impl DslError {
    pub fn pos(&self) -> Pos {
        match self {
            DslError::Lex { pos, .. }
            | DslError::Parse { pos, .. }
            | DslError::UndeclaredIdentifier { pos, .. }
            | DslError::TypeError { pos, .. }
            | DslError::DuplicateDefinition { pos, .. }
            | DslError::NodeReusedInTree { pos, .. }
            | DslError::MissingRoot { pos }
            | DslError::UnreachableNode { pos, .. }
            | DslError::InvalidValue { pos, .. } => *pos,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DslError::Lex { .. } => "LexError",
            DslError::Parse { .. } => "ParseError",
            DslError::UndeclaredIdentifier { .. } => "UndeclaredIdentifier",
            DslError::TypeError { .. } => "TypeError",
            DslError::DuplicateDefinition { .. } => "DuplicateDefinition",
            DslError::NodeReusedInTree { .. } => "NodeReusedInTree",
            DslError::MissingRoot { .. } => "MissingRoot",
            DslError::UnreachableNode { .. } => "UnreachableNode",
            DslError::InvalidValue { .. } => "InvalidValue",
        }
    }
}

/// Parses and checks a model source.
pub fn parse(src: &str) -> Result<ModelFile, DslError> {
    check::check(parser::parse_raw(src)?)
}

/// Parses, checks and lowers a model source.
pub fn load(src: &str) -> Result<Model, DslError> {
    let file = parse(src)?;
    lower(&file).map_err(|e| DslError::InvalidValue {
        pos: Pos::default(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::Status;
    use crate::tree::NodeId;

    const THERMO: &str = r#"
model "t" {
    state_dim = 1;
    control_dim = 1;
    const T = 21;
    plant { dx0 = u0; }
    leaf too_warm { u = [0]; status = if x0 > T then S else F; }
    leaf heater_on { u = [1]; status = R; }
    leaf heater_off { u = [-1]; status = R; }
    seq main = [regulate, heater_off];
    fal regulate = [too_warm, heater_on];
    root = main;
}
"#;

    #[test]
    fn preorder_ids_regardless_of_declaration_order() {
        let m = load(THERMO).unwrap();
        let labels: Vec<&str> = (0..5).map(|i| m.bt.label(NodeId(i)).unwrap()).collect();
        assert_eq!(labels, ["main", "regulate", "too_warm", "heater_on", "heater_off"]);
        assert_eq!(m.bt.tick(&[20.0]).unwrap(), (vec![1.0], Status::Running));
        assert_eq!(m.bt.tick(&[22.0]).unwrap(), (vec![-1.0], Status::Running));
    }

    #[test]
    fn round_trip() {
        let m = parse(THERMO).unwrap();
        let printed = print_model(&m);
        let again = parse(&printed).unwrap();
        assert_eq!(again.without_spans(), m.without_spans());
        assert_eq!(print_model(&again), printed);
    }

    #[test]
    fn single_leaf_model() {
        let m = load("model \"one\" { state_dim = 1; control_dim = 1; plant { dx0 = u0; } leaf a { u = [x0 * 2]; status = R; } root = a; }")
            .unwrap();
        assert_eq!(m.bt.tree().node_count(), 1);
        assert_eq!(m.bt.tick(&[1.5]).unwrap(), (vec![3.0], Status::Running));
        assert_eq!(m.plant.eval(&[0.0], &[4.0]).unwrap(), vec![4.0]);
    }

    #[test]
    fn undeclared_state_var_location() {
        let src = "model \"m\" {\n  state_dim = 1;\n  control_dim = 1;\n  plant { dx0 = x9; }\n  leaf a { u = [0]; status = R; }\n  root = a;\n}";
        let err = parse(src).unwrap_err();
        assert_eq!(err, DslError::UndeclaredIdentifier { pos: Pos { line: 4, col: 17 }, name: "x9".into() });
    }

    #[test]
    fn controls_not_visible_in_leaves() {
        let src = "model \"m\" { state_dim = 1; control_dim = 1; plant { dx0 = u0; } leaf a { u = [u0]; status = R; } root = a; }";
        assert_eq!(parse(src).unwrap_err().kind(), "UndeclaredIdentifier");
    }
}
