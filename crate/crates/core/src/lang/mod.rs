//! The knowledge-base language: concrete syntax, type checking, desugaring
//! and direct (reference) semantics.
//!
//! A knowledge-base file holds up to three blocks:
//!
//! ```text
//! vocabulary V {
//!     type Node = {a, b, c}
//!     type N = {0..20}
//!     data pred Edge(Node, Node)
//!     pred Reach(Node, Node)
//! }
//! theory T : V {
//!     { ! x y : Reach(x,y) <- Edge(x,y).
//!       ! x y z : Reach(x,z) <- Reach(x,y) & Edge(y,z). }
//!     ! x : ~Reach(x,x).
//! }
//! structure S : V {
//!     Edge = { (a,b); (b,c) }
//! }
//! ```
//!
//! Structure blocks list certainly-true tuples as `p = {...}` and
//! certainly-false tuples as `p.cf = {...}`. Unlisted atoms of `data`
//! predicates are false; a block written as `total structure` makes every
//! unlisted atom false.

pub mod ast;
pub mod desugar;
pub mod eval;
mod lexer;
mod parser;
pub mod printer;
pub mod typecheck;

use thiserror::Error;

pub use ast::*;
pub use desugar::desugar;
pub use parser::{parse, parse_atom_list, parse_structure, parse_term};
pub use typecheck::{typecheck, typecheck_objective, TypedTheory};

use crate::structure::ThreeValuedStructure;

/// The three parts of a knowledge-base file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnowledgeBase {
    pub vocabulary: Vocabulary,
    pub theory: Theory,
    pub structure: ThreeValuedStructure,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LangError {
    #[error("{span}: syntax error: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        span: Span,
        expected: Vec<String>,
        found: String,
    },
    #[error("{span}: duplicate {what} `{name}`")]
    Duplicate {
        span: Span,
        what: &'static str,
        name: String,
    },
    #[error("{span}: undeclared {what} `{name}`")]
    Undeclared {
        span: Span,
        what: &'static str,
        name: String,
    },
    #[error("{span}: sort `{name}` has an empty domain")]
    EmptySort { span: Span, name: String },
    #[error("{span}: sort mismatch: {message}")]
    SortMismatch { span: Span, message: String },
    #[error("{span}: unbound variable `{name}`")]
    UnboundVariable { span: Span, name: String },
    #[error("{span}: integer term over symbolic sort: {message}")]
    IntegerOverSymbolic { span: Span, message: String },
    #[error("{span}: cannot infer the sort of variable `{name}`; annotate it as `{name}[Sort]`")]
    CannotInferSort { span: Span, name: String },
    #[error("{span}: integer term is not provably bounded: {message}")]
    Unbounded { span: Span, message: String },
    #[error("{span}: invalid definition: {message}")]
    Definition { span: Span, message: String },
    #[error("{span}: invalid aggregate: {message}")]
    Aggregate { span: Span, message: String },
    #[error("{span}: atom {atom} is both certainly true and certainly false")]
    Inconsistent { span: Span, atom: String },
}

impl LangError {
    pub fn span(&self) -> Span {
        match self {
            LangError::Syntax { span, .. }
            | LangError::Duplicate { span, .. }
            | LangError::Undeclared { span, .. }
            | LangError::EmptySort { span, .. }
            | LangError::SortMismatch { span, .. }
            | LangError::UnboundVariable { span, .. }
            | LangError::IntegerOverSymbolic { span, .. }
            | LangError::CannotInferSort { span, .. }
            | LangError::Unbounded { span, .. }
            | LangError::Definition { span, .. }
            | LangError::Aggregate { span, .. }
            | LangError::Inconsistent { span, .. } => *span,
        }
    }
}

/// Parses, type checks and desugars a knowledge-base source in one go.
pub fn load(src: &str) -> Result<(KnowledgeBase, TypedTheory), Vec<LangError>> {
    let kb = parse(src).map_err(|e| vec![e])?;
    let typed = typecheck(&kb.vocabulary, &kb.theory)?;
    Ok((kb, desugar(&typed)))
}
