//! Concrete syntax, name sets, substitution and the translation to the core calculus.

pub mod ast;
pub mod desugar;
pub mod fragment;
mod lexer;
pub mod names;
mod parser;
mod print;
pub mod subst;

pub use ast::*;
pub use desugar::{desugar, desugar_with, DesugarError};
pub use fragment::{check_core_fragment, FragmentReport, Violation, ViolationKind};
pub use lexer::is_keyword;
pub use names::{name_sets, NameSets};
pub use parser::{parse, parse_definition, parse_expression};
pub use print::{pretty, render_pattern, render_process};
pub use subst::{substitute, substitute_with};

/// First error found while reading a program.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: expected {}, found {found}", expected.join(" or "))]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl SyntaxError {
    pub fn new(line: usize, column: usize, expected: Vec<String>, found: String) -> SyntaxError {
        SyntaxError { line, column, expected, found }
    }
}
