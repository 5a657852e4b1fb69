//! Semantic analysis of kernel programs.
//!
//! [`analyze`] enforces the kernel restrictions, resolves halo constants per
//! statement and infers symbolic region shapes. Downstream passes take the
//! resulting [`CheckedProgram`] at face value.
//!
//! Rule codes:
//!
//! | code | rule |
//! |------|------|
//! | R1 | array params are intent(in) or intent(out); scalars are intent(in) |
//! | R2 | array params are `contiguous` |
//! | R3 | only region functions, elementals and whitelisted intrinsics may be called |
//! | R4 | `region_ptr` targets a `target` intent(out) param and feeds a pointer local |
//! | R5 | intent(in) data is never assigned |
//! | R6 | outputs are written only through a bound pointer, once, within its interior |
//! | R7 | whole-array operands and targets share one shape |
//! | R8 | `region_cpy` (and bare reads) apply to intent(in) arrays or allocatable locals |
//! | R9 | elemental bodies use only their own scalar intent(in) arguments |
//! | H1 | halo read before assignment |
//! | H2 | halo assignment target or value is malformed |
//! | U1 | undeclared identifier |
//! | U2 | allocatable local read before assignment |
//! | A1 | malformed call arguments |
//! | W1 | kernel has no intent(out) arrays (warning) |
//! | W2 | output or pointer never written (warning) |

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::frontend::ast::*;
use crate::frontend::{REGION_CPY, REGION_PTR};
use crate::region::{interior_of, Extent, Halo, RegionError};

/// Math intrinsics callable from kernels and elementals.
pub const INTRINSICS: &[&str] = &["sqrt", "abs", "min", "max", "exp"];

pub fn intrinsic_arity_ok(name: &str, n: usize) -> Option<bool> {
    match name {
        "sqrt" | "abs" | "exp" => Some(n == 1),
        "min" | "max" => Some(n >= 2),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub line: usize,
    pub message: String,
}

impl Diagnostic {
    fn error(code: &'static str, line: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code,
            line,
            message: message.into(),
        }
    }

    fn warning(code: &'static str, line: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            code,
            line,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} {} {}: {}", self.code, self.line, self.message)
    }
}

/// Shape of a whole-array value: the common full extent minus deficits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolicShape {
    pub base: String,
    pub deficit_x: usize,
    pub deficit_y: usize,
}

impl SymbolicShape {
    fn shrink(&self, halo: Halo) -> SymbolicShape {
        SymbolicShape {
            base: self.base.clone(),
            deficit_x: self.deficit_x + halo.width(),
            deficit_y: self.deficit_y + halo.height(),
        }
    }

    /// Concrete extent given the shared full extent.
    pub fn resolve(&self, full: Extent) -> Option<Extent> {
        let nx = full.nx.checked_sub(self.deficit_x)?;
        let ny = full.ny.checked_sub(self.deficit_y)?;
        (nx > 0 && ny > 0).then_some(Extent::new(nx, ny))
    }
}

impl fmt::Display for SymbolicShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(n{0}x-{1}, n{0}y-{2})", self.base, self.deficit_x, self.deficit_y)
    }
}

/// A kernel that passed every rule.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedProgram {
    pub program: KernelProgram,
    /// Halo values visible at each statement (after that statement runs).
    pub halo_table: Vec<BTreeMap<String, Halo>>,
    /// Shape of every array-valued sub-expression, keyed by statement index
    /// and pre-order node index within the statement's right-hand side.
    pub shape_table: BTreeMap<(usize, usize), SymbolicShape>,
    /// Shape of the target of each whole-array assignment statement.
    pub target_shapes: BTreeMap<usize, SymbolicShape>,
    /// Pointer local -> (output array, halo given to `region_ptr`).
    pub output_bindings: BTreeMap<String, (String, Halo)>,
    pub local_array_shapes: BTreeMap<String, SymbolicShape>,
    pub warnings: Vec<Diagnostic>,
}

impl CheckedProgram {
    pub fn name(&self) -> &str {
        &self.program.name
    }

    /// Resolves a halo argument as seen by statement `stmt`.
    pub fn halo_arg(&self, stmt: usize, arg: &HaloArg) -> Halo {
        match arg {
            HaloArg::Literal(h) => *h,
            HaloArg::Named(n) => self.halo_table[stmt][n],
        }
    }

    /// Resolves the halo argument of a region call expression.
    pub fn halo_expr(&self, stmt: usize, e: &Expr) -> Halo {
        match e {
            Expr::HaloLit(h) => *h,
            Expr::Ref(n) => self.halo_table[stmt][n],
            _ => unreachable!("halo argument validated by sema"),
        }
    }

    /// Output array -> halo it is written through.
    pub fn output_halo(&self, output: &str) -> Option<Halo> {
        self.output_bindings
            .values()
            .find(|(o, _)| o == output)
            .map(|(_, h)| *h)
    }
}

/// `(nx, ny)` of a region of an array with full extent `full`.
pub fn infer_region_shape(full: (usize, usize), halo: Halo) -> Result<(usize, usize), RegionError> {
    let r = interior_of(Extent::new(full.0, full.1), halo)?;
    Ok((r.nx, r.ny))
}

/// Halo values live at each statement.
pub fn resolve_halos(program: &KernelProgram) -> Result<Vec<BTreeMap<String, Halo>>, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let table = halo_snapshots(program, &mut diags);
    if diags.is_empty() {
        Ok(table)
    } else {
        Err(diags)
    }
}

fn halo_snapshots(program: &KernelProgram, diags: &mut Vec<Diagnostic>) -> Vec<BTreeMap<String, Halo>> {
    let mut live: BTreeMap<String, Halo> = program
        .halo_consts
        .iter()
        .filter_map(|h| h.init.map(|v| (h.name.clone(), v)))
        .collect();
    let mut table = Vec::with_capacity(program.body.len());

    for st in &program.body {
        let mut reads = Vec::new();
        match &st.kind {
            StmtKind::HaloAssign { lhs, value } => {
                if program.halo_const(lhs).is_some() {
                    live.insert(lhs.clone(), *value);
                } else {
                    diags.push(Diagnostic::error(
                        "H2",
                        st.line,
                        format!("`{lhs}` is assigned a halo list but is not an `integer, dimension(4)` halo"),
                    ));
                }
            }
            StmtKind::PointerAssign {
                halo: HaloArg::Named(n),
                ..
            } => reads.push(n.clone()),
            StmtKind::Assign { rhs, .. } => rhs.walk(&mut |e| {
                if let Expr::Call(name, args) = e {
                    if (name == REGION_CPY || name == REGION_PTR) && args.len() == 2 {
                        if let Expr::Ref(h) = &args[1] {
                            reads.push(h.clone());
                        }
                    }
                }
            }),
            _ => {}
        }
        for r in reads {
            if program.halo_const(&r).is_some() && !live.contains_key(&r) {
                diags.push(Diagnostic::error("H1", st.line, format!("halo `{r}` read before assignment")));
            }
        }
        table.push(live.clone());
    }
    table
}

#[derive(Debug, Clone, PartialEq)]
enum Ty {
    Scalar,
    Array(SymbolicShape),
    /// An error was already reported for this sub-expression.
    Invalid,
}

struct Checker<'p> {
    program: &'p KernelProgram,
    anchor: String,
    halos: Vec<BTreeMap<String, Halo>>,
    diags: Vec<Diagnostic>,
    shape_table: BTreeMap<(usize, usize), SymbolicShape>,
    target_shapes: BTreeMap<usize, SymbolicShape>,
    bindings: BTreeMap<String, (String, Halo)>,
    assigned_pointers: BTreeSet<String>,
    local_shapes: BTreeMap<String, SymbolicShape>,
}

/// Checks every rule and builds a [`CheckedProgram`], or returns all
/// diagnostics (errors and warnings) when any rule fails.
pub fn analyze(program: &KernelProgram) -> Result<CheckedProgram, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let halos = halo_snapshots(program, &mut diags);
    let anchor = program
        .array_params()
        .next()
        .map(|p| p.name.clone())
        .unwrap_or_default();

    let mut c = Checker {
        program,
        anchor,
        halos,
        diags,
        shape_table: BTreeMap::new(),
        target_shapes: BTreeMap::new(),
        bindings: BTreeMap::new(),
        assigned_pointers: BTreeSet::new(),
        local_shapes: BTreeMap::new(),
    };
    c.check_params();
    c.check_elementals();
    for (i, st) in program.body.iter().enumerate() {
        c.check_statement(i, st);
    }
    c.check_outputs();

    let Checker {
        halos,
        mut diags,
        shape_table,
        target_shapes,
        bindings,
        local_shapes,
        ..
    } = c;
    diags.sort_by_key(|d| (d.line, d.severity, d.code));
    if diags.iter().any(Diagnostic::is_error) {
        return Err(diags);
    }
    Ok(CheckedProgram {
        program: program.clone(),
        halo_table: halos,
        shape_table,
        target_shapes,
        output_bindings: bindings,
        local_array_shapes: local_shapes,
        warnings: diags,
    })
}

impl Checker<'_> {
    fn err(&mut self, code: &'static str, line: usize, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(code, line, msg));
    }

    fn full_shape(&self) -> SymbolicShape {
        SymbolicShape {
            base: self.anchor.clone(),
            deficit_x: 0,
            deficit_y: 0,
        }
    }

    fn check_params(&mut self) {
        let program = self.program;
        for p in &program.params {
            match p.kind {
                ParamKind::Array2d => {
                    match p.intent {
                        Some(Intent::In) | Some(Intent::Out) => {}
                        Some(Intent::InOut) => self.err(
                            "R1",
                            p.line,
                            format!("array parameters must be intent(in) or intent(out); `{}` is intent(inout)", p.name),
                        ),
                        None => self.err(
                            "R1",
                            p.line,
                            format!("array parameters must be intent(in) or intent(out); `{}` has no intent", p.name),
                        ),
                    }
                    if !p.has(Attr::Contiguous) {
                        self.err("R2", p.line, format!("array parameter `{}` must be declared contiguous", p.name));
                    }
                }
                ParamKind::ScalarReal => {
                    if p.intent != Some(Intent::In) {
                        self.err("R1", p.line, format!("scalar parameter `{}` must be intent(in)", p.name));
                    }
                }
            }
        }
        // an inout array is already an R1 error, so it counts as an output here
        if !program.array_params().any(|p| matches!(p.intent, Some(Intent::Out | Intent::InOut))) {
            self.diags.push(Diagnostic::warning(
                "W1",
                program.line,
                format!("kernel `{}` has no intent(out) arrays", program.name),
            ));
        }
    }

    fn check_elementals(&mut self) {
        let program = self.program;
        for f in &program.elementals {
            let params: BTreeSet<&str> = f.params.iter().map(|p| p.name.as_str()).collect();
            for p in &f.params {
                if p.intent != Some(Intent::In) || p.is_array {
                    self.err(
                        "R9",
                        f.line,
                        format!("elemental `{}` argument `{}` must be a scalar intent(in)", f.name, p.name),
                    );
                }
            }
            let mut problems = Vec::new();
            f.body.walk(&mut |e| match e {
                Expr::Ref(n) if !params.contains(n.as_str()) => {
                    problems.push(format!("elemental `{}` references `{n}`, which is not one of its arguments", f.name))
                }
                Expr::Call(n, args) => match intrinsic_arity_ok(n, args.len()) {
                    Some(true) => {}
                    Some(false) => problems.push(format!("elemental `{}` calls `{n}` with {} arguments", f.name, args.len())),
                    None => problems.push(format!("elemental `{}` may only call math intrinsics, not `{n}`", f.name)),
                },
                Expr::HaloLit(_) => problems.push(format!("elemental `{}` uses a halo list", f.name)),
                _ => {}
            });
            for m in problems {
                self.err("R9", f.line, m);
            }
        }
    }

    fn check_outputs(&mut self) {
        let program = self.program;
        for o in program.output_arrays() {
            if !self.bindings.values().any(|(t, _)| t == &o.name) {
                self.diags.push(Diagnostic::warning(
                    "W2",
                    o.line,
                    format!("output `{}` is never bound with region_ptr, so it is never written", o.name),
                ));
            }
        }
        let unassigned: Vec<_> = self
            .bindings
            .keys()
            .filter(|p| !self.assigned_pointers.contains(*p))
            .cloned()
            .collect();
        for p in unassigned {
            let line = program.local(&p).map(|l| l.line).unwrap_or(program.line);
            self.diags.push(Diagnostic::warning("W2", line, format!("pointer `{p}` is bound but never assigned")));
        }
    }

    fn check_statement(&mut self, idx: usize, st: &Statement) {
        let program = self.program;
        let line = st.line;
        match &st.kind {
            StmtKind::HaloAssign { .. } => {}
            StmtKind::PointerAssign { lhs, target, halo } => {
                let halo = match halo {
                    HaloArg::Literal(h) => Some(*h),
                    HaloArg::Named(n) => self.lookup_halo(idx, n, line),
                };
                let mut ok = true;
                match program.local(lhs) {
                    Some(l) if l.kind == LocalKind::PointerArray2d => {}
                    _ => {
                        ok = false;
                        self.err("R4", line, format!("region_ptr result must be stored in a pointer local, not `{lhs}`"));
                    }
                }
                match program.param(target) {
                    Some(p) if p.kind == ParamKind::Array2d && writable(p) && p.has(Attr::Target) => {}
                    // still bound below so later assignments through it do not cascade
                    Some(p) if p.kind == ParamKind::Array2d && writable(p) => {
                        self.err("R4", line, format!("region_ptr target `{target}` must have the target attribute"));
                    }
                    Some(p) if p.kind == ParamKind::Array2d => {
                        self.err("R4", line, format!("region_ptr may only be applied to intent(out) arrays, not `{target}`"));
                    }
                    Some(_) => {
                        ok = false;
                        self.err("R4", line, format!("region_ptr may only be applied to intent(out) arrays, not `{target}`"));
                    }
                    None => {
                        ok = false;
                        self.undeclared(line, target);
                    }
                }
                if ok {
                    if self.bindings.contains_key(lhs) {
                        self.err("R6", line, format!("pointer `{lhs}` is bound more than once"));
                    } else if self.bindings.values().any(|(t, _)| t == target) {
                        self.err("R4", line, format!("output `{target}` is already bound to another pointer"));
                    } else if let Some(h) = halo {
                        self.bindings.insert(lhs.clone(), (target.clone(), h));
                    }
                }
            }
            StmtKind::Assign { lhs, rhs } => {
                let mut counter = 0;
                let ty = self.check_expr(idx, line, rhs, &mut counter);
                self.check_target(idx, line, lhs, ty);
            }
        }
    }

    fn check_target(&mut self, idx: usize, line: usize, lhs: &str, ty: Ty) {
        let program = self.program;
        if let Some(p) = program.param(lhs) {
            match (p.kind, p.intent) {
                (ParamKind::Array2d, Some(Intent::Out)) => self.err(
                    "R6",
                    line,
                    format!("output `{lhs}` may only be written through a pointer bound with region_ptr"),
                ),
                (ParamKind::Array2d, Some(Intent::InOut)) => {}
                _ => self.err("R5", line, format!("intent(in) parameter `{lhs}` cannot be assigned")),
            }
            return;
        }
        if program.halo_const(lhs).is_some() {
            self.err("H2", line, format!("halo `{lhs}` must be assigned a list of four integer literals"));
            return;
        }
        let Some(local) = program.local(lhs) else {
            self.undeclared(line, lhs);
            return;
        };
        match local.kind {
            LocalKind::AllocArray2d => match ty {
                Ty::Scalar => self.err("R7", line, format!("cannot infer the shape of `{lhs}` from a scalar expression")),
                Ty::Invalid => {}
                Ty::Array(shape) => match self.local_shapes.get(lhs) {
                    None => {
                        self.local_shapes.insert(lhs.to_string(), shape.clone());
                        self.target_shapes.insert(idx, shape);
                    }
                    Some(prev) if *prev == shape => {
                        self.target_shapes.insert(idx, shape);
                    }
                    Some(prev) => {
                        let msg = format!("`{lhs}` has shape {prev} but is assigned an array of shape {shape}");
                        self.err("R7", line, msg);
                    }
                },
            },
            LocalKind::PointerArray2d => {
                let Some((_, halo)) = self.bindings.get(lhs).cloned() else {
                    self.err("R6", line, format!("pointer `{lhs}` is assigned before being bound with region_ptr"));
                    return;
                };
                if !self.assigned_pointers.insert(lhs.to_string()) {
                    self.err("R6", line, format!("pointer `{lhs}` is assigned more than once"));
                    return;
                }
                let bound = self.full_shape().shrink(halo);
                match ty {
                    Ty::Array(shape) if shape != bound => {
                        if shape.deficit_x < bound.deficit_x || shape.deficit_y < bound.deficit_y {
                            self.err(
                                "R6",
                                line,
                                format!("assignment through `{lhs}` of shape {shape} exceeds its bound interior {bound}"),
                            );
                        } else {
                            self.err("R7", line, format!("`{lhs}` has shape {bound} but is assigned an array of shape {shape}"));
                        }
                    }
                    Ty::Invalid => {}
                    _ => {
                        self.target_shapes.insert(idx, bound);
                    }
                }
            }
        }
    }

    fn undeclared(&mut self, line: usize, name: &str) {
        self.err("U1", line, format!("`{name}` is not declared"));
    }

    fn lookup_halo(&mut self, idx: usize, name: &str, line: usize) -> Option<Halo> {
        if self.program.halo_const(name).is_none() {
            self.err("A1", line, format!("`{name}` is not a halo (`integer, dimension(4)`)"));
            return None;
        }
        // an unassigned read was already reported as H1
        self.halos[idx].get(name).copied()
    }

    fn record(&mut self, idx: usize, node: usize, ty: Ty) -> Ty {
        if let Ty::Array(s) = &ty {
            self.shape_table.insert((idx, node), s.clone());
        }
        ty
    }

    fn combine(&mut self, line: usize, a: Ty, b: Ty) -> Ty {
        match (a, b) {
            (Ty::Invalid, _) | (_, Ty::Invalid) => Ty::Invalid,
            (Ty::Scalar, Ty::Scalar) => Ty::Scalar,
            (Ty::Array(s), Ty::Scalar) | (Ty::Scalar, Ty::Array(s)) => Ty::Array(s),
            (Ty::Array(s), Ty::Array(t)) if s == t => Ty::Array(s),
            (Ty::Array(s), Ty::Array(t)) => {
                self.err("R7", line, format!("array operands have different shapes {s} and {t}"));
                Ty::Invalid
            }
        }
    }

    fn check_expr(&mut self, idx: usize, line: usize, e: &Expr, counter: &mut usize) -> Ty {
        let program = self.program;
        let node = *counter;
        *counter += 1;
        let ty = match e {
            Expr::Num(_) => Ty::Scalar,
            Expr::Ref(name) => self.array_read(idx, line, name, false),
            Expr::Binary(_, l, r) => {
                let a = self.check_expr(idx, line, l, counter);
                let b = self.check_expr(idx, line, r, counter);
                self.combine(line, a, b)
            }
            Expr::Neg(inner) | Expr::Paren(inner) => self.check_expr(idx, line, inner, counter),
            Expr::HaloLit(_) => {
                self.err("A1", line, "a halo list may only appear as a region function argument");
                Ty::Invalid
            }
            Expr::Call(name, args) if name == REGION_CPY => {
                for a in args {
                    *counter += count_nodes(a);
                }
                self.region_cpy(idx, line, args)
            }
            Expr::Call(name, args) => {
                let mut tys = Vec::with_capacity(args.len());
                for a in args {
                    tys.push(self.check_expr(idx, line, a, counter));
                }
                if name == REGION_PTR {
                    self.err("R4", line, "region_ptr may only appear alone on the right of a pointer assignment");
                    Ty::Invalid
                } else if let Some(ok) = intrinsic_arity_ok(name, args.len()) {
                    if !ok {
                        self.err("A1", line, format!("intrinsic `{name}` called with {} arguments", args.len()));
                        Ty::Invalid
                    } else {
                        tys.into_iter().reduce(|a, b| self.combine(line, a, b)).unwrap_or(Ty::Scalar)
                    }
                } else if let Some(f) = program.elemental(name) {
                    if f.params.len() != args.len() {
                        self.err(
                            "A1",
                            line,
                            format!("elemental `{name}` takes {} arguments, {} given", f.params.len(), args.len()),
                        );
                        Ty::Invalid
                    } else {
                        tys.into_iter().reduce(|a, b| self.combine(line, a, b)).unwrap_or(Ty::Scalar)
                    }
                } else {
                    self.err(
                        "R3",
                        line,
                        format!("kernels may only call region functions, elementals and math intrinsics, not `{name}`"),
                    );
                    Ty::Invalid
                }
            }
        };
        self.record(idx, node, ty)
    }

    /// Type of reading `name` as a whole value. `via_region` is set for the
    /// first argument of `region_cpy`.
    fn array_read(&mut self, _idx: usize, line: usize, name: &str, via_region: bool) -> Ty {
        let program = self.program;
        let how = if via_region { "region_cpy" } else { "a whole-array read" };
        if let Some(p) = program.param(name) {
            return match (p.kind, p.intent) {
                (ParamKind::ScalarReal, _) if via_region => {
                    self.err("A1", line, format!("region_cpy needs an array, `{name}` is a scalar"));
                    Ty::Invalid
                }
                (ParamKind::ScalarReal, _) => Ty::Scalar,
                (ParamKind::Array2d, Some(Intent::Out)) => {
                    self.err("R8", line, format!("{how} cannot read intent(out) array `{name}`"));
                    Ty::Invalid
                }
                (ParamKind::Array2d, _) => Ty::Array(self.full_shape()),
            };
        }
        if let Some(l) = program.local(name) {
            return match l.kind {
                LocalKind::PointerArray2d => {
                    self.err("R8", line, format!("{how} cannot read pointer local `{name}`"));
                    Ty::Invalid
                }
                LocalKind::AllocArray2d => match self.local_shapes.get(name) {
                    Some(s) => Ty::Array(s.clone()),
                    None => {
                        self.err("U2", line, format!("`{name}` is read before it is assigned"));
                        Ty::Invalid
                    }
                },
            };
        }
        if program.halo_const(name).is_some() {
            self.err("A1", line, format!("halo `{name}` may only be used as a region function argument"));
            return Ty::Invalid;
        }
        self.undeclared(line, name);
        Ty::Invalid
    }

    fn region_cpy(&mut self, idx: usize, line: usize, args: &[Expr]) -> Ty {
        if args.len() != 2 {
            self.err("A1", line, format!("region_cpy takes 2 arguments, {} given", args.len()));
            return Ty::Invalid;
        }
        let base = match &args[0] {
            Expr::Ref(n) => self.array_read(idx, line, n, true),
            _ => {
                self.err("A1", line, "the first region_cpy argument must be an array name");
                Ty::Invalid
            }
        };
        let halo = match &args[1] {
            Expr::HaloLit(h) => Some(*h),
            Expr::Ref(n) => self.lookup_halo(idx, n, line),
            _ => {
                self.err("A1", line, "the second region_cpy argument must be a halo name or list");
                None
            }
        };
        match (base, halo) {
            (Ty::Array(s), Some(h)) => Ty::Array(s.shrink(h)),
            _ => Ty::Invalid,
        }
    }
}

fn count_nodes(e: &Expr) -> usize {
    let mut n = 0;
    e.walk(&mut |_| n += 1);
    n
}

/// Intent(out), or inout which R1 has already reported.
fn writable(p: &ParamDecl) -> bool {
    matches!(p.intent, Some(Intent::Out | Intent::InOut))
}
