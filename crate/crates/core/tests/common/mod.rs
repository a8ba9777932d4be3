#![allow(dead_code)]

use std::path::PathBuf;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/malformed")
}

/// (file, error kind, line, column). Positions were counted by hand from the
/// fixture text; line 1 of every fixture is a comment.
pub const MALFORMED: [(&str, &str, u32, u32); 10] = [
    ("broken.btm", "NodeReusedInTree", 8, 22),
    ("bad_character.btm", "LexError", 5, 22),
    ("unterminated_string.btm", "LexError", 2, 7),
    ("missing_semicolon.btm", "ParseError", 4, 5),
    ("undeclared_identifier.btm", "UndeclaredIdentifier", 6, 40),
    ("status_as_control.btm", "TypeError", 6, 19),
    ("real_as_status.btm", "TypeError", 7, 33),
    ("duplicate_leaf.btm", "DuplicateDefinition", 7, 10),
    ("missing_root.btm", "MissingRoot", 9, 1),
    ("unreachable_node.btm", "UnreachableNode", 8, 10),
];

/// Returns a description of every fixture whose error differs from the table.
pub fn malformed_mismatches() -> Vec<String> {
    let mut out = Vec::new();
    for (file, kind, line, col) in MALFORMED {
        let src = std::fs::read_to_string(fixture_dir().join(file)).expect("fixture exists");
        match ctbt::dsl::parse(&src) {
            Ok(_) => out.push(format!("{file}: parsed without error")),
            Err(e) => {
                let p = e.pos();
                if e.kind() != kind || (p.line, p.col) != (line, col) {
                    out.push(format!("{file}: expected {kind} at {line}:{col}, got {} at {}:{} ({e})", e.kind(), p.line, p.col));
                }
            }
        }
    }
    out
}
