use std::collections::BTreeSet;

use crate::region::Halo;

/// Everything parsed out of one source file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Module {
    pub kernels: Vec<KernelProgram>,
    pub elementals: Vec<ElementalFn>,
}

impl Module {
    pub fn kernel(&self, name: &str) -> Option<&KernelProgram> {
        self.kernels.iter().find(|k| k.name == name)
    }
}

/// One directive-marked kernel subroutine.
///
/// `elementals` holds every elemental function defined in the same source
/// file, since any of them may be called from the kernel body.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelProgram {
    pub name: String,
    pub line: usize,
    pub params: Vec<ParamDecl>,
    pub locals: Vec<LocalDecl>,
    pub halo_consts: Vec<HaloDecl>,
    pub body: Vec<Statement>,
    pub elementals: Vec<ElementalFn>,
}

impl KernelProgram {
    pub fn param(&self, name: &str) -> Option<&ParamDecl> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn local(&self, name: &str) -> Option<&LocalDecl> {
        self.locals.iter().find(|l| l.name == name)
    }

    pub fn halo_const(&self, name: &str) -> Option<&HaloDecl> {
        self.halo_consts.iter().find(|h| h.name == name)
    }

    pub fn elemental(&self, name: &str) -> Option<&ElementalFn> {
        self.elementals.iter().find(|e| e.name == name)
    }

    /// Array parameters in declaration order.
    pub fn array_params(&self) -> impl Iterator<Item = &ParamDecl> {
        self.params.iter().filter(|p| p.kind == ParamKind::Array2d)
    }

    pub fn scalar_params(&self) -> impl Iterator<Item = &ParamDecl> {
        self.params.iter().filter(|p| p.kind == ParamKind::ScalarReal)
    }

    /// Arrays that are intent(in), in declaration order.
    pub fn input_arrays(&self) -> impl Iterator<Item = &ParamDecl> {
        self.array_params().filter(|p| p.intent == Some(Intent::In))
    }

    /// Arrays that are intent(out), in declaration order.
    pub fn output_arrays(&self) -> impl Iterator<Item = &ParamDecl> {
        self.array_params().filter(|p| p.intent == Some(Intent::Out))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKind {
    ScalarReal,
    Array2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Intent {
    In,
    Out,
    InOut,
}

impl Intent {
    pub fn as_str(self) -> &'static str {
        match self {
            Intent::In => "in",
            Intent::Out => "out",
            Intent::InOut => "inout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attr {
    Contiguous,
    Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub kind: ParamKind,
    pub intent: Option<Intent>,
    pub attrs: BTreeSet<Attr>,
    pub line: usize,
}

impl ParamDecl {
    pub fn has(&self, attr: Attr) -> bool {
        self.attrs.contains(&attr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocalKind {
    AllocArray2d,
    PointerArray2d,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalDecl {
    pub name: String,
    pub kind: LocalKind,
    pub line: usize,
}

/// An `integer, dimension(4)` halo variable. `init` is set when the
/// declaration carries an initializer.
#[derive(Debug, Clone, PartialEq)]
pub struct HaloDecl {
    pub name: String,
    pub init: Option<Halo>,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// A bare identifier; whether it names a scalar or an array is decided
    /// in sema.
    Ref(String),
    Num(f64),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Call(String, Vec<Expr>),
    Paren(Box<Expr>),
    /// `[l, r, d, u]`, only meaningful as a region call argument.
    HaloLit(Halo),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Binary(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
            Expr::Neg(e) | Expr::Paren(e) => e.walk(f),
            Expr::Call(_, args) => args.iter().for_each(|a| a.walk(f)),
            Expr::Ref(_) | Expr::Num(_) | Expr::HaloLit(_) => {}
        }
    }
}

/// Second argument of `region_cpy`/`region_ptr`.
#[derive(Debug, Clone, PartialEq)]
pub enum HaloArg {
    Named(String),
    Literal(Halo),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub kind: StmtKind,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Assign { lhs: String, rhs: Expr },
    HaloAssign { lhs: String, value: Halo },
    /// `p = region_ptr(array, halo)`
    PointerAssign { lhs: String, target: String, halo: HaloArg },
}

impl StmtKind {
    pub fn lhs(&self) -> &str {
        match self {
            StmtKind::Assign { lhs, .. }
            | StmtKind::HaloAssign { lhs, .. }
            | StmtKind::PointerAssign { lhs, .. } => lhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementalParam {
    pub name: String,
    pub intent: Option<Intent>,
    pub is_array: bool,
}

/// `pure elemental real function name(args)` with a single result
/// assignment as its body.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementalFn {
    pub name: String,
    pub params: Vec<ElementalParam>,
    pub body: Expr,
    pub line: usize,
}
