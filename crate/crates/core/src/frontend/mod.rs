//! Tokenizer, parser and pretty-printer for kernel source files.
//!
//! The frontend checks shape only; every semantic restriction lives in
//! [`crate::sema`].

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;

pub use ast::*;
pub use lexer::{tokenize, LexError, Token, TokenKind};
pub use parser::{parse_expression, parse_module, parse_source, FrontendError, ParseError, REGION_CPY, REGION_PTR};
pub use printer::{print_expr, print_kernel, print_module};
