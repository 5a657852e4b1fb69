//! Source pretty-printer. Output re-parses to the same AST (line numbers
//! aside).

use std::fmt::Write;

use super::ast::*;
use crate::region::Halo;

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Ref(n) => out.push_str(n),
        Expr::Num(v) => {
            let _ = write!(out, "{v:?}");
        }
        Expr::Binary(op, l, r) => {
            let wrap_l = matches!(**l, Expr::Binary(lop, ..) if lop.precedence() < op.precedence());
            let wrap_r = matches!(**r, Expr::Binary(rop, ..) if rop.precedence() <= op.precedence());
            write_wrapped(out, l, wrap_l);
            let _ = write!(out, " {} ", op.symbol());
            write_wrapped(out, r, wrap_r);
        }
        Expr::Neg(inner) => {
            out.push('-');
            write_wrapped(out, inner, matches!(**inner, Expr::Binary(..)));
        }
        Expr::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
        Expr::Paren(inner) => {
            out.push('(');
            write_expr(out, inner);
            out.push(')');
        }
        Expr::HaloLit(h) => out.push_str(&halo_text(*h)),
    }
}

fn write_wrapped(out: &mut String, e: &Expr, wrap: bool) {
    if wrap {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn halo_text(h: Halo) -> String {
    format!("[{}, {}, {}, {}]", h.left, h.right, h.down, h.up)
}

pub fn print_elemental(f: &ElementalFn) -> String {
    let mut s = String::new();
    let names: Vec<_> = f.params.iter().map(|p| p.name.as_str()).collect();
    let _ = writeln!(s, "pure elemental real function {}({})", f.name, names.join(", "));
    for p in &f.params {
        let mut attrs = vec!["real".to_string()];
        if p.is_array {
            attrs.push("dimension(:,:)".into());
        }
        if let Some(i) = p.intent {
            attrs.push(format!("intent({})", i.as_str()));
        }
        let _ = writeln!(s, "  {} :: {}", attrs.join(", "), p.name);
    }
    let _ = writeln!(s, "  {} = {}", f.name, print_expr(&f.body));
    let _ = writeln!(s, "end function {}", f.name);
    s
}

/// Prints the kernel only (no elementals).
pub fn print_kernel_body(k: &KernelProgram) -> String {
    let mut s = String::new();
    let names: Vec<_> = k.params.iter().map(|p| p.name.as_str()).collect();
    let _ = writeln!(s, "subroutine {}({})", k.name, names.join(", "));
    let _ = writeln!(s, "  !$OFP PURE, KERNEL :: {}", k.name);
    for p in &k.params {
        let mut attrs = vec!["real".to_string()];
        if p.kind == ParamKind::Array2d {
            attrs.push("dimension(:,:)".into());
        }
        if let Some(i) = p.intent {
            attrs.push(format!("intent({})", i.as_str()));
        }
        if p.has(Attr::Contiguous) {
            attrs.push("contiguous".into());
        }
        if p.has(Attr::Target) {
            attrs.push("target".into());
        }
        let _ = writeln!(s, "  {} :: {}", attrs.join(", "), p.name);
    }
    for l in &k.locals {
        let kind = match l.kind {
            LocalKind::AllocArray2d => "allocatable",
            LocalKind::PointerArray2d => "pointer",
        };
        let _ = writeln!(s, "  real, {kind}, dimension(:,:) :: {}", l.name);
    }
    for h in &k.halo_consts {
        match h.init {
            Some(v) => {
                let _ = writeln!(s, "  integer, dimension(4) :: {} = {}", h.name, halo_text(v));
            }
            None => {
                let _ = writeln!(s, "  integer, dimension(4) :: {}", h.name);
            }
        }
    }
    for st in &k.body {
        let _ = writeln!(s, "  {}", print_statement(&st.kind));
    }
    let _ = writeln!(s, "end subroutine {}", k.name);
    s
}

pub fn print_statement(st: &StmtKind) -> String {
    match st {
        StmtKind::Assign { lhs, rhs } => format!("{lhs} = {}", print_expr(rhs)),
        StmtKind::HaloAssign { lhs, value } => format!("{lhs} = {}", halo_text(*value)),
        StmtKind::PointerAssign { lhs, target, halo } => {
            let h = match halo {
                HaloArg::Named(n) => n.clone(),
                HaloArg::Literal(v) => halo_text(*v),
            };
            format!("{lhs} = region_ptr({target}, {h})")
        }
    }
}

/// Prints a kernel together with the elemental functions it can see.
pub fn print_kernel(k: &KernelProgram) -> String {
    let mut s = String::new();
    for f in &k.elementals {
        s.push_str(&print_elemental(f));
        s.push('\n');
    }
    s.push_str(&print_kernel_body(k));
    s
}

pub fn print_module(m: &Module) -> String {
    let mut s = String::new();
    for f in &m.elementals {
        s.push_str(&print_elemental(f));
        s.push('\n');
    }
    for k in &m.kernels {
        s.push_str(&print_kernel_body(k));
        s.push('\n');
    }
    s
}
