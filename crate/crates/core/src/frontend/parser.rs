//! Recursive-descent parser for kernel modules.
//!
//! The grammar is line oriented: each line (after `&` joining) holds one
//! declaration, one or more `;`-separated statements, a directive, or a
//! subroutine/function header or trailer. Declarations are merged per
//! identifier and classified once the enclosing unit is complete.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::ast::*;
use super::lexer::{literal_value, tokenize, LexError, Token, TokenKind, DIRECTIVE_PREFIX};
use crate::region::Halo;

pub const REGION_CPY: &str = "region_cpy";
pub const REGION_PTR: &str = "region_ptr";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: expected {expected}, found {found}")]
pub struct ParseError {
    pub line: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("lex error at {0}")]
    Lex(#[from] LexError),
    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Parse(Vec<ParseError>),
}

/// Tokenizes and parses a whole source file.
pub fn parse_source(source: &str) -> Result<Module, FrontendError> {
    let tokens = tokenize(source)?;
    parse_module(&tokens).map_err(FrontendError::Parse)
}

/// Parses a token stream into kernels and elemental functions.
///
/// Errors inside one subroutine or function do not stop parsing: the parser
/// skips to the end of the failing unit and continues, so every broken unit
/// is reported.
pub fn parse_module(tokens: &[Token]) -> Result<Module, Vec<ParseError>> {
    let mut p = Parser::new(tokens);
    let mut module = Module::default();
    let mut errors = Vec::new();

    loop {
        p.skip_blank_lines();
        if p.at_end() {
            break;
        }
        let result = p.unit();
        match result {
            Ok(Some(Unit::Kernel(k))) => module.kernels.push(k),
            Ok(Some(Unit::Elemental(e))) => module.elementals.push(e),
            Ok(None) => {}
            Err(e) => {
                errors.push(e);
                p.recover();
            }
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    for k in &mut module.kernels {
        k.elementals = module.elementals.clone();
    }
    Ok(module)
}

/// Parses a single expression; trailing tokens are an error.
pub fn parse_expression(text: &str) -> Result<Expr, FrontendError> {
    let tokens = tokenize(text)?;
    let mut p = Parser::new(&tokens);
    let expr = p.expr().map_err(|e| FrontendError::Parse(vec![e]))?;
    if !p.at_line_end() {
        let e = p.error("end of expression");
        return Err(FrontendError::Parse(vec![e]));
    }
    Ok(expr)
}

enum Unit {
    Kernel(KernelProgram),
    Elemental(ElementalFn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BaseType {
    Real,
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DimSpec {
    Deferred(usize),
    Fixed(usize),
}

#[derive(Debug, Default, Clone)]
struct DeclInfo {
    ty: Option<BaseType>,
    dim: Option<DimSpec>,
    intent: Option<Intent>,
    contiguous: bool,
    target: bool,
    allocatable: bool,
    pointer: bool,
    init: Option<Halo>,
    line: usize,
}

#[derive(Debug, Clone, Copy)]
enum AttrSpec {
    Dim(DimSpec),
    Intent(Intent),
    Contiguous,
    Target,
    Allocatable,
    Pointer,
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'t> Parser<'t> {
    fn new(tokens: &'t [Token]) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&'t Token> {
        self.tokens.get(self.pos + offset)
    }

    fn line(&self) -> usize {
        self.peek()
            .or_else(|| self.tokens.last())
            .map(|t| t.line)
            .unwrap_or(1)
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError {
            line: self.line(),
            expected: expected.to_string(),
            found: self
                .peek()
                .map(|t| t.to_string())
                .unwrap_or_else(|| "end of input".into()),
        }
    }

    fn error_at(&self, line: usize, expected: &str, found: &str) -> ParseError {
        ParseError {
            line,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// True at an end-of-line, a `;` separator, or the end of input.
    fn at_line_end(&self) -> bool {
        match self.peek() {
            None => true,
            Some(t) => t.is_eol() || t.is_punct(";"),
        }
    }

    fn skip_blank_lines(&mut self) {
        while let Some(t) = self.peek() {
            if t.is_eol() || t.is_punct(";") {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn expect_eol(&mut self) -> PResult<()> {
        match self.peek() {
            None => Ok(()),
            Some(t) if t.is_eol() => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error("end of line")),
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_keyword(kw)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(&format!("`{kw}`")))
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_punct(p)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(&format!("`{p}`")))
        }
    }

    fn expect_ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.pos += 1;
                Ok(t.normalized())
            }
            _ => Err(self.error("identifier")),
        }
    }

    /// Identifier or a contextual word such as `in` inside `intent(...)`.
    fn expect_word(&mut self) -> PResult<String> {
        match self.peek() {
            Some(t) if matches!(t.kind, TokenKind::Identifier | TokenKind::Keyword) => {
                self.pos += 1;
                Ok(t.normalized())
            }
            _ => Err(self.error("word")),
        }
    }

    fn expect_int(&mut self) -> PResult<usize> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::IntegerLiteral => {
                self.pos += 1;
                t.lexeme
                    .parse()
                    .map_err(|_| self.error_at(t.line, "integer literal", &t.lexeme))
            }
            _ => Err(self.error("integer literal")),
        }
    }

    /// Skips to the line after the end of the current unit.
    fn recover(&mut self) {
        loop {
            // move to the start of the next line
            while let Some(t) = self.bump() {
                if t.is_eol() {
                    break;
                }
            }
            match self.peek() {
                None => return,
                Some(t) if t.is_keyword("end") => {
                    let next = self.peek_at(1);
                    if next.is_some_and(|n| n.is_keyword("subroutine") || n.is_keyword("function")) {
                        while let Some(t) = self.bump() {
                            if t.is_eol() {
                                break;
                            }
                        }
                        return;
                    }
                }
                Some(t) if t.is_keyword("subroutine") || t.is_keyword("pure") || t.is_keyword("elemental") => {
                    return
                }
                _ => {}
            }
        }
    }

    fn unit(&mut self) -> PResult<Option<Unit>> {
        let start_line = self.line();
        let mut pure = false;
        let mut elemental = false;
        loop {
            if self.eat_keyword("pure") {
                pure = true;
            } else if self.eat_keyword("elemental") {
                elemental = true;
            } else {
                break;
            }
        }
        if self.eat_keyword("subroutine") {
            if elemental {
                return Err(self.error_at(start_line, "`function` after `elemental`", "`subroutine`"));
            }
            return self.subroutine(start_line);
        }
        if self.eat_keyword("real") {
            self.expect_keyword("function")?;
            if !(pure && elemental) {
                return Err(self.error_at(start_line, "`pure elemental real function`", "function without both `pure` and `elemental`"));
            }
            return self.elemental(start_line).map(|e| Some(Unit::Elemental(e)));
        }
        Err(self.error("`subroutine` or `pure elemental real function`"))
    }

    fn name_list_in_parens(&mut self) -> PResult<Vec<String>> {
        self.expect_punct("(")?;
        let mut names = Vec::new();
        if !self.eat_punct(")") {
            loop {
                names.push(self.expect_ident()?);
                if self.eat_punct(")") {
                    break;
                }
                self.expect_punct(",")?;
            }
        }
        Ok(names)
    }

    fn end_of_unit(&mut self, what: &str, name: &str) -> PResult<bool> {
        if !self.peek().is_some_and(|t| t.is_keyword("end")) {
            return Ok(false);
        }
        // `end` followed by end-of-line, `what`, or `what name`
        let save = self.pos;
        self.pos += 1;
        if self.eat_keyword(what) {
            if let Some(t) = self.peek() {
                if t.kind == TokenKind::Identifier {
                    let found = t.normalized();
                    if found != name {
                        return Err(self.error_at(t.line, &format!("`end {what} {name}`"), &format!("`{found}`")));
                    }
                    self.pos += 1;
                }
            }
        } else if !self.at_line_end() {
            self.pos = save;
            return Err(self.error(&format!("`end {what}`")));
        }
        self.expect_eol()?;
        Ok(true)
    }

    fn subroutine(&mut self, line: usize) -> PResult<Option<Unit>> {
        let name = self.expect_ident()?;
        let header = self.name_list_in_parens()?;
        self.expect_eol()?;

        let mut is_kernel = false;
        let mut decls: BTreeMap<String, DeclInfo> = BTreeMap::new();
        let mut order: Vec<String> = Vec::new();
        let mut body = Vec::new();

        loop {
            self.skip_blank_lines();
            let Some(tok) = self.peek() else {
                return Err(self.error(&format!("`end subroutine {name}`")));
            };
            if self.end_of_unit("subroutine", &name)? {
                break;
            }
            if tok.kind == TokenKind::Directive {
                self.pos += 1;
                is_kernel |= self.directive(tok, &name)?;
                self.expect_eol()?;
                continue;
            }
            if self.at_declaration() {
                self.declaration(&mut decls, &mut order)?;
                continue;
            }
            self.statement_line(&mut body)?;
        }

        if !is_kernel {
            return Ok(None);
        }

        let mut params = Vec::new();
        for p in &header {
            let info = decls
                .remove(p)
                .ok_or_else(|| self.error_at(line, &format!("a type declaration for parameter `{p}`"), "none"))?;
            params.push(param_from(p, &info)?);
        }
        let mut locals = Vec::new();
        let mut halo_consts = Vec::new();
        for n in order.iter().filter(|n| !header.contains(n)) {
            let info = &decls[n];
            match classify_local(n, info)? {
                Local::Array(l) => locals.push(l),
                Local::Halo(h) => halo_consts.push(h),
            }
        }

        Ok(Some(Unit::Kernel(KernelProgram {
            name,
            line,
            params,
            locals,
            halo_consts,
            body,
            elementals: Vec::new(),
        })))
    }

    /// Returns whether the directive marks this subroutine as a kernel.
    fn directive(&self, tok: &Token, sub_name: &str) -> PResult<bool> {
        let text = tok.lexeme[DIRECTIVE_PREFIX.len()..].trim();
        let (attrs, named) = match text.split_once("::") {
            Some((a, n)) => (a, Some(n.trim().to_ascii_lowercase())),
            None => (text, None),
        };
        let attrs: BTreeSet<String> = attrs
            .split(',')
            .map(|a| a.trim().to_ascii_lowercase())
            .filter(|a| !a.is_empty())
            .collect();
        let kernel = attrs.contains("pure") && attrs.contains("kernel") && attrs.len() == 2;
        if !kernel {
            return Err(self.error_at(tok.line, "`!$OFP PURE, KERNEL`", &format!("`{}`", tok.lexeme)));
        }
        if let Some(n) = named {
            if n != sub_name {
                return Err(self.error_at(tok.line, &format!("directive naming `{sub_name}`"), &format!("`{n}`")));
            }
        }
        Ok(true)
    }

    fn at_declaration(&self) -> bool {
        let Some(t) = self.peek() else { return false };
        if t.kind != TokenKind::Keyword {
            return false;
        }
        let kw = t.normalized();
        matches!(
            kw.as_str(),
            "real" | "integer" | "dimension" | "intent" | "contiguous" | "target" | "allocatable" | "pointer"
        )
    }

    fn attr_spec(&mut self) -> PResult<AttrSpec> {
        let t = self.peek().ok_or_else(|| self.error("attribute"))?;
        let kw = t.normalized();
        if t.kind != TokenKind::Keyword {
            return Err(self.error("attribute"));
        }
        self.pos += 1;
        match kw.as_str() {
            "dimension" => {
                self.expect_punct("(")?;
                if self.peek().is_some_and(|t| t.kind == TokenKind::IntegerLiteral) {
                    let n = self.expect_int()?;
                    self.expect_punct(")")?;
                    return Ok(AttrSpec::Dim(DimSpec::Fixed(n)));
                }
                let mut rank = 0;
                loop {
                    self.expect_punct(":")?;
                    rank += 1;
                    if self.eat_punct(")") {
                        break;
                    }
                    self.expect_punct(",")?;
                }
                Ok(AttrSpec::Dim(DimSpec::Deferred(rank)))
            }
            "intent" => {
                self.expect_punct("(")?;
                let line = self.line();
                let w = self.expect_word()?;
                let intent = match w.as_str() {
                    "in" => Intent::In,
                    "out" => Intent::Out,
                    "inout" => Intent::InOut,
                    other => return Err(self.error_at(line, "`in`, `out` or `inout`", &format!("`{other}`"))),
                };
                self.expect_punct(")")?;
                Ok(AttrSpec::Intent(intent))
            }
            "contiguous" => Ok(AttrSpec::Contiguous),
            "target" => Ok(AttrSpec::Target),
            "allocatable" => Ok(AttrSpec::Allocatable),
            "pointer" => Ok(AttrSpec::Pointer),
            _ => {
                self.pos -= 1;
                Err(self.error("attribute"))
            }
        }
    }

    fn declaration(&mut self, decls: &mut BTreeMap<String, DeclInfo>, order: &mut Vec<String>) -> PResult<()> {
        let line = self.line();
        let mut ty = None;
        let mut specs = Vec::new();
        if self.eat_keyword("real") {
            ty = Some(BaseType::Real);
        } else if self.eat_keyword("integer") {
            ty = Some(BaseType::Integer);
        } else {
            specs.push(self.attr_spec()?);
        }
        while self.eat_punct(",") {
            specs.push(self.attr_spec()?);
        }
        self.expect_punct("::")?;

        loop {
            let name_line = self.line();
            let name = self.expect_ident()?;
            let mut init = None;
            if self.peek().is_some_and(|t| t.is_op("=")) {
                self.pos += 1;
                init = Some(self.halo_literal()?);
            }
            if !decls.contains_key(&name) {
                order.push(name.clone());
            }
            let info = decls.entry(name.clone()).or_insert_with(|| DeclInfo {
                line: name_line,
                ..DeclInfo::default()
            });
            merge(info, &name, ty, &specs, init, line)?;
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_eol()
    }

    fn halo_literal(&mut self) -> PResult<Halo> {
        self.expect_punct("[")?;
        let mut v = [0usize; 4];
        for (i, slot) in v.iter_mut().enumerate() {
            if i > 0 {
                self.expect_punct(",")?;
            }
            *slot = self
                .expect_int()
                .map_err(|_| self.error("four integer literals in a halo list"))?;
        }
        self.expect_punct("]")
            .map_err(|_| self.error("`]` closing a four-element halo list"))?;
        Ok(Halo::from_array(v))
    }

    fn statement_line(&mut self, body: &mut Vec<Statement>) -> PResult<()> {
        loop {
            body.push(self.statement()?);
            if self.eat_punct(";") {
                if self.peek().is_none_or(|t| t.is_eol()) {
                    break;
                }
                continue;
            }
            break;
        }
        self.expect_eol()
    }

    fn statement(&mut self) -> PResult<Statement> {
        let line = self.line();
        let lhs = self.expect_ident()?;
        if !self.peek().is_some_and(|t| t.is_op("=")) {
            return Err(self.error("`=`"));
        }
        self.pos += 1;
        let rhs = self.expr()?;
        if !self.at_line_end() {
            return Err(self.error("end of statement"));
        }
        let kind = match rhs {
            Expr::HaloLit(value) => StmtKind::HaloAssign { lhs, value },
            Expr::Call(ref name, ref args) if name == REGION_PTR && args.len() == 2 => match (&args[0], &args[1]) {
                (Expr::Ref(target), Expr::Ref(h)) => StmtKind::PointerAssign {
                    lhs,
                    target: target.clone(),
                    halo: HaloArg::Named(h.clone()),
                },
                (Expr::Ref(target), Expr::HaloLit(h)) => StmtKind::PointerAssign {
                    lhs,
                    target: target.clone(),
                    halo: HaloArg::Literal(*h),
                },
                _ => StmtKind::Assign { lhs, rhs },
            },
            rhs => StmtKind::Assign { lhs, rhs },
        };
        Ok(Statement { kind, line })
    }

    fn elemental(&mut self, line: usize) -> PResult<ElementalFn> {
        let name = self.expect_ident()?;
        let header = self.name_list_in_parens()?;
        self.expect_eol()?;
        let mut decls: BTreeMap<String, DeclInfo> = BTreeMap::new();
        let mut order = Vec::new();
        let mut body: Option<Expr> = None;

        loop {
            self.skip_blank_lines();
            if self.at_end() {
                return Err(self.error(&format!("`end function {name}`")));
            }
            if self.end_of_unit("function", &name)? {
                break;
            }
            if self.at_declaration() {
                self.declaration(&mut decls, &mut order)?;
                continue;
            }
            let stmt_line = self.line();
            let stmt = self.statement()?;
            self.expect_eol()?;
            match stmt.kind {
                StmtKind::Assign { lhs, rhs } if lhs == name && body.is_none() => body = Some(rhs),
                _ => {
                    return Err(self.error_at(
                        stmt_line,
                        &format!("a single assignment to result `{name}`"),
                        "another statement",
                    ))
                }
            }
        }

        let body = body.ok_or_else(|| self.error_at(line, &format!("an assignment to `{name}`"), "none"))?;
        let mut params = Vec::new();
        for p in &header {
            let info = decls
                .get(p)
                .ok_or_else(|| self.error_at(line, &format!("a type declaration for argument `{p}`"), "none"))?;
            if info.ty != Some(BaseType::Real) {
                return Err(self.error_at(info.line, &format!("`real` argument `{p}`"), "non-real declaration"));
            }
            params.push(ElementalParam {
                name: p.clone(),
                intent: info.intent,
                is_array: info.dim.is_some(),
            });
        }
        if let Some(extra) = order.iter().find(|n| !header.contains(n)) {
            return Err(self.error_at(decls[extra].line, "only argument declarations in an elemental function", &format!("`{extra}`")));
        }
        Ok(ElementalFn {
            name,
            params,
            body,
            line,
        })
    }

    // expression grammar: expr := term {(+|-) term}; term := unary {(*|/) unary}
    // unary := - unary | + unary | primary

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(t) if t.is_op("+") => BinOp::Add,
                Some(t) if t.is_op("-") => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(t) if t.is_op("*") => BinOp::Mul,
                Some(t) if t.is_op("/") => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Some(t) if t.is_op("-") => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(t) if t.is_op("+") => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(t) = self.peek() else {
            return Err(self.error("expression"));
        };
        match t.kind {
            TokenKind::RealLiteral | TokenKind::IntegerLiteral => {
                self.pos += 1;
                let v = literal_value(&t.lexeme).ok_or_else(|| self.error_at(t.line, "number", &t.lexeme))?;
                Ok(Expr::Num(v))
            }
            TokenKind::Identifier => {
                self.pos += 1;
                let name = t.normalized();
                if self.eat_punct("(") {
                    let mut args = Vec::new();
                    if !self.eat_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if self.eat_punct(")") {
                                break;
                            }
                            self.expect_punct(",")?;
                        }
                    }
                    Ok(Expr::Call(name, args))
                } else {
                    Ok(Expr::Ref(name))
                }
            }
            TokenKind::Punctuation if t.lexeme == "(" => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_punct(")")?;
                Ok(Expr::Paren(Box::new(inner)))
            }
            TokenKind::Punctuation if t.lexeme == "[" => Ok(Expr::HaloLit(self.halo_literal()?)),
            _ => Err(self.error("expression")),
        }
    }
}

fn merge(
    info: &mut DeclInfo,
    name: &str,
    ty: Option<BaseType>,
    specs: &[AttrSpec],
    init: Option<Halo>,
    line: usize,
) -> PResult<()> {
    let conflict = |what: &str| ParseError {
        line,
        expected: format!("a single {what} for `{name}`"),
        found: format!("conflicting {what}"),
    };
    if let Some(t) = ty {
        if info.ty.is_some_and(|old| old != t) {
            return Err(conflict("type"));
        }
        info.ty = Some(t);
    }
    for s in specs {
        match *s {
            AttrSpec::Dim(d) => {
                if info.dim.is_some_and(|old| old != d) {
                    return Err(conflict("dimension"));
                }
                info.dim = Some(d);
            }
            AttrSpec::Intent(i) => {
                if info.intent.is_some_and(|old| old != i) {
                    return Err(conflict("intent"));
                }
                info.intent = Some(i);
            }
            AttrSpec::Contiguous => info.contiguous = true,
            AttrSpec::Target => info.target = true,
            AttrSpec::Allocatable => info.allocatable = true,
            AttrSpec::Pointer => info.pointer = true,
        }
    }
    if init.is_some() {
        if info.init.is_some() {
            return Err(conflict("initializer"));
        }
        info.init = init;
    }
    Ok(())
}

fn param_from(name: &str, info: &DeclInfo) -> PResult<ParamDecl> {
    let err = |expected: &str, found: &str| ParseError {
        line: info.line,
        expected: expected.to_string(),
        found: found.to_string(),
    };
    if info.ty != Some(BaseType::Real) {
        return Err(err(&format!("`real` parameter `{name}`"), "non-real parameter"));
    }
    if info.allocatable || info.pointer || info.init.is_some() {
        return Err(err(&format!("plain dummy argument `{name}`"), "allocatable, pointer or initialized parameter"));
    }
    let kind = match info.dim {
        None => ParamKind::ScalarReal,
        Some(DimSpec::Deferred(2)) => ParamKind::Array2d,
        Some(DimSpec::Deferred(r)) => return Err(err("a rank-2 array `dimension(:,:)`", &format!("rank {r}"))),
        Some(DimSpec::Fixed(_)) => return Err(err("`dimension(:,:)`", "explicit-size dimension")),
    };
    let mut attrs = BTreeSet::new();
    if info.contiguous {
        attrs.insert(Attr::Contiguous);
    }
    if info.target {
        attrs.insert(Attr::Target);
    }
    Ok(ParamDecl {
        name: name.to_string(),
        kind,
        intent: info.intent,
        attrs,
        line: info.line,
    })
}

enum Local {
    Array(LocalDecl),
    Halo(HaloDecl),
}

fn classify_local(name: &str, info: &DeclInfo) -> PResult<Local> {
    let err = |expected: &str, found: &str| ParseError {
        line: info.line,
        expected: expected.to_string(),
        found: found.to_string(),
    };
    if info.intent.is_some() || info.contiguous || info.target {
        return Err(err(&format!("`{name}` to be a dummy argument"), "argument attributes on a local"));
    }
    match (info.ty, info.dim) {
        (Some(BaseType::Integer), Some(DimSpec::Fixed(4))) if !info.allocatable && !info.pointer => {
            Ok(Local::Halo(HaloDecl {
                name: name.to_string(),
                init: info.init,
                line: info.line,
            }))
        }
        (Some(BaseType::Real), Some(DimSpec::Deferred(2))) if info.init.is_none() => {
            let kind = match (info.allocatable, info.pointer) {
                (true, false) => LocalKind::AllocArray2d,
                (false, true) => LocalKind::PointerArray2d,
                _ => return Err(err(&format!("exactly one of `allocatable` or `pointer` on `{name}`"), "neither or both")),
            };
            Ok(Local::Array(LocalDecl {
                name: name.to_string(),
                kind,
                line: info.line,
            }))
        }
        (Some(BaseType::Real), Some(DimSpec::Deferred(r))) if r != 2 => {
            Err(err("a rank-2 array `dimension(:,:)`", &format!("rank {r}")))
        }
        _ => Err(err(
            &format!("`{name}` declared as a real rank-2 allocatable/pointer or an `integer, dimension(4)` halo"),
            "another kind of local",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INTERFACE: &str = "\
subroutine wave_advance(dx,dy,dt,H,U,V,oH,oU,oV)
  !$OFP PURE, KERNEL   :: wave_advance
  real, intent(in)     :: dx,dy,dt
  real, dimension(:,:) :: H,U,V,oH,oU,oV
  contiguous  :: H,U,V,oH,oU,oV
  intent(in)  :: H,U,V
  intent(out) :: oH,oU,oV
  target      :: oH,oU,oV
end subroutine
";

    const FOO: &str = "\
  pure elemental real function foo(a, b, s)
    real, intent(in) :: a, b, s
    foo = a + s*b
  end function
";

    fn r(n: &str) -> Expr {
        Expr::Ref(n.into())
    }

    #[test]
    fn interface_declarations() {
        let m = parse_source(INTERFACE).unwrap();
        assert_eq!(m.kernels.len(), 1);
        let k = &m.kernels[0];
        assert_eq!(k.name, "wave_advance");
        assert_eq!(k.params.len(), 9);
        let scalars: Vec<_> = k.scalar_params().collect();
        assert_eq!(scalars.len(), 3);
        assert!(scalars.iter().all(|p| p.intent == Some(Intent::In)));
        let ins: Vec<_> = k.input_arrays().map(|p| p.name.as_str()).collect();
        assert_eq!(ins, ["h", "u", "v"]);
        let outs: Vec<_> = k.output_arrays().collect();
        assert_eq!(outs.len(), 3);
        assert!(outs.iter().all(|p| p.has(Attr::Target) && p.has(Attr::Contiguous)));
        assert!(k.input_arrays().all(|p| !p.has(Attr::Target) && p.has(Attr::Contiguous)));
        assert!(k.body.is_empty());
    }

    #[test]
    fn elemental_function_block() {
        let m = parse_source(FOO).unwrap();
        assert_eq!(m.elementals.len(), 1);
        let f = &m.elementals[0];
        assert_eq!(f.name, "foo");
        let names: Vec<_> = f.params.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["a", "b", "s"]);
        assert!(f.params.iter().all(|p| p.intent == Some(Intent::In) && !p.is_array));
        assert_eq!(f.body, Expr::binary(BinOp::Add, r("a"), Expr::binary(BinOp::Mul, r("s"), r("b"))));
    }

    #[test]
    fn empty_source() {
        let m = parse_source("").unwrap();
        assert!(m.kernels.is_empty() && m.elementals.is_empty());
    }

    #[test]
    fn expression_precedence() {
        assert_eq!(
            parse_expression("a + s*b").unwrap(),
            Expr::binary(BinOp::Add, r("a"), Expr::binary(BinOp::Mul, r("s"), r("b")))
        );
        assert_eq!(
            parse_expression("0.5*(H + U)").unwrap(),
            Expr::binary(
                BinOp::Mul,
                Expr::Num(0.5),
                Expr::Paren(Box::new(Expr::binary(BinOp::Add, r("h"), r("u"))))
            )
        );
        assert_eq!(
            parse_expression("region_cpy(H, face_lt)").unwrap(),
            Expr::Call("region_cpy".into(), vec![r("h"), r("face_lt")])
        );
        // unary minus binds tighter than `*`
        assert_eq!(
            parse_expression("-a*b").unwrap(),
            Expr::binary(BinOp::Mul, Expr::Neg(Box::new(r("a"))), r("b"))
        );
        // left associativity
        assert_eq!(
            parse_expression("a - b - c").unwrap(),
            Expr::binary(BinOp::Sub, Expr::binary(BinOp::Sub, r("a"), r("b")), r("c"))
        );
    }

    #[test]
    fn expression_trailing_tokens() {
        assert!(parse_expression("a b").is_err());
        assert!(parse_expression("(a").is_err());
    }

    #[test]
    fn statements_and_halos() {
        let src = "\
subroutine k(A, oA)
  !$OFP PURE, KERNEL :: k
  real, dimension(:,:), intent(in), contiguous :: A
  real, dimension(:,:), intent(out), contiguous, target :: oA
  real, pointer, dimension(:,:) :: pA
  integer, dimension(4) :: halo, face = [0,1,0,0]
  halo = [1,1,1,1];  face = [1,0,0,0]
  pA = region_ptr(oA, halo)
  pA = region_cpy(A, halo)
end subroutine k
";
        let m = parse_source(src).unwrap();
        let k = &m.kernels[0];
        assert_eq!(k.halo_consts.len(), 2);
        assert_eq!(k.halo_consts[1].init, Some(Halo::new(0, 1, 0, 0)));
        assert_eq!(k.body.len(), 4);
        assert_eq!(k.body[0].line, 7);
        assert_eq!(k.body[1].line, 7);
        assert!(matches!(k.body[1].kind, StmtKind::HaloAssign { .. }));
        assert!(matches!(
            &k.body[2].kind,
            StmtKind::PointerAssign { lhs, target, halo: HaloArg::Named(h) } if lhs == "pa" && target == "oa" && h == "halo"
        ));
        assert!(matches!(k.body[3].kind, StmtKind::Assign { .. }));
    }

    #[test]
    fn subroutine_without_directive_is_skipped() {
        let m = parse_source("subroutine helper(a)\n real :: a\nend subroutine\n").unwrap();
        assert!(m.kernels.is_empty());
    }

    #[test]
    fn directive_naming_other_subroutine() {
        let src = "subroutine a(x)\n !$OFP PURE, KERNEL :: b\n real, intent(in) :: x\nend subroutine\n";
        let errs = parse_module(&tokenize(src).unwrap()).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].line, 2);
    }

    #[test]
    fn rejects_non_literal_halo_and_rank() {
        let bad_halo = "subroutine k(A)\n !$OFP PURE, KERNEL :: k\n real, dimension(:,:) :: A\n integer, dimension(4) :: h\n h = [1,n,1,1]\nend subroutine\n";
        assert!(parse_source(bad_halo).is_err());
        let bad_rank = "subroutine k(A)\n !$OFP PURE, KERNEL :: k\n real, dimension(:) :: A\nend subroutine\n";
        let err = parse_source(bad_rank).unwrap_err();
        assert!(err.to_string().contains("rank 1"), "{err}");
    }

    #[test]
    fn recovery_reports_every_broken_unit() {
        let src = "\
subroutine a(x)
  !$OFP PURE, KERNEL :: a
  real, intent(in) :: x
  y = = 1
end subroutine
subroutine b(x)
  !$OFP PURE, KERNEL :: b
  real, intent(in) :: x
  y = (1
end subroutine
subroutine c(x)
  !$OFP PURE, KERNEL :: c
  real, intent(in) :: x
end subroutine
";
        let errs = parse_module(&tokenize(src).unwrap()).unwrap_err();
        let lines: Vec<_> = errs.iter().map(|e| e.line).collect();
        assert_eq!(lines, [4, 9]);
    }

    #[test]
    fn case_insensitive_names() {
        let src = "SUBROUTINE K(A, OA)\n !$OFP PURE, KERNEL :: k\n REAL, DIMENSION(:,:), INTENT(IN), CONTIGUOUS :: a\n real, dimension(:,:), intent(out), contiguous, target :: oa\nEND SUBROUTINE K\n";
        let m = parse_source(src).unwrap();
        assert_eq!(m.kernels[0].name, "k");
        assert_eq!(m.kernels[0].params[0].name, "a");
    }
}
