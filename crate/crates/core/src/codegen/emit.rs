//! OpenCL-C kernel text for a [`KernelIR`].

use std::fmt::Write;

use super::{KernelIR, Phase, ScalarExpr};
use crate::frontend::ast::ParamKind;
use crate::refinterp::Precision;

/// Renders `ir` as a single `__kernel` function. Output is deterministic.
pub fn emit_source(ir: &KernelIR, precision: Precision) -> String {
    let real = match precision {
        Precision::F32 => "float",
        Precision::F64 => "double",
    };
    let out_halo = ir.output_halo();
    let mut s = String::new();

    let _ = writeln!(s, "// kernel {}: work-group {}, {}", ir.name, ir.group, precision);
    if precision == Precision::F64 {
        s.push_str("#pragma OPENCL EXTENSION cl_khr_fp64 : enable\n");
    }
    s.push('\n');
    s.push_str("#define LOCAL_INDEX(lx, ly, nlx, halo_lt, halo_rt) ((lx) + (ly) * ((nlx) + (halo_lt) + (halo_rt)))\n");
    let _ = writeln!(s, "#define GLOBAL_HALO_NX {}", out_halo.width());
    let _ = writeln!(s, "#define GLOBAL_HALO_NY {}", out_halo.height());
    for t in &ir.local_tiles {
        let m = macro_name(&t.name);
        let _ = writeln!(s, "#define {m}_NX {}", t.extent.nx);
        let _ = writeln!(s, "#define {m}_NY {}", t.extent.ny);
        let _ = writeln!(s, "#define {m}_SIZE ({m}_NX * {m}_NY)");
    }
    s.push('\n');

    let args: Vec<String> = ir
        .params
        .iter()
        .map(|(n, k)| match k {
            ParamKind::ScalarReal => format!("{real} {n}"),
            ParamKind::Array2d => format!("__global {real} * {n}"),
        })
        .collect();
    let _ = writeln!(s, "__kernel void {}({})", ir.name, args.join(",\n    "));
    s.push_str("{\n");
    s.push_str("    const int NLX = get_local_size(0);\n");
    s.push_str("    const int NLY = get_local_size(1);\n");
    s.push_str("    const int tx = get_local_id(0);\n");
    s.push_str("    const int ty = get_local_id(1);\n");
    s.push_str("    const int gx = get_group_id(0);\n");
    s.push_str("    const int gy = get_group_id(1);\n");
    s.push_str("    const int tid = tx + ty * NLX;\n");
    s.push_str("    const int nthreads = NLX * NLY;\n");
    s.push_str("    const int NX = get_num_groups(0) * NLX + GLOBAL_HALO_NX;\n");
    s.push_str("    const int NY = get_num_groups(1) * NLY + GLOBAL_HALO_NY;\n");
    for t in &ir.local_tiles {
        let _ = writeln!(s, "    __local {real} {}_local[{}_SIZE];", t.name, macro_name(&t.name));
    }

    for phase in &ir.phases {
        s.push('\n');
        match phase {
            Phase::Barrier => s.push_str("    barrier(CLK_LOCAL_MEM_FENCE);\n"),
            Phase::CooperativeLoad { tile, source } => {
                let t = &ir.local_tiles[*tile];
                let m = macro_name(&t.name);
                let _ = writeln!(s, "    for (int i = tid; i < {m}_SIZE; i += nthreads) {{");
                let _ = writeln!(s, "        const int x = gx * NLX + i % {m}_NX;");
                let _ = writeln!(s, "        const int y = gy * NLY + i / {m}_NX;");
                let _ = writeln!(
                    s,
                    "        {}_local[i] = (x < NX && y < NY) ? {source}[x + y * NX] : {};",
                    t.name,
                    literal(0.0, precision)
                );
                s.push_str("    }\n");
            }
            Phase::CooperativeCompute { tile, expr } => {
                let t = &ir.local_tiles[*tile];
                let m = macro_name(&t.name);
                let _ = writeln!(s, "    for (int i = tid; i < {m}_SIZE; i += nthreads) {{");
                let _ = writeln!(s, "        const int lx = i % {m}_NX;");
                let _ = writeln!(s, "        const int ly = i / {m}_NX;");
                let _ = writeln!(s, "        {}_local[i] = {};", t.name, render(ir, expr, precision));
                s.push_str("    }\n");
            }
            Phase::OwnedWrite { target, expr, shift } => {
                let x = offset_text("gx * NLX + tx", out_halo.left as i64 + shift.0);
                let y = offset_text("gy * NLY + ty", out_halo.down as i64 + shift.1);
                let var = format!("{target}_val");
                s.push_str("    {\n");
                s.push_str("        const int lx = tx;\n");
                s.push_str("        const int ly = ty;\n");
                let _ = writeln!(s, "        const {real} {var} = {};", render(ir, expr, precision));
                let _ = writeln!(s, "        {target}[({x}) + ({y}) * NX] = {var};");
                s.push_str("    }\n");
            }
        }
    }
    s.push_str("}\n");
    s
}

fn macro_name(tile: &str) -> String {
    format!("{}_LOCAL", tile.to_ascii_uppercase())
}

fn offset_text(base: &str, off: i64) -> String {
    match off {
        0 => base.to_string(),
        o if o > 0 => format!("{base} + {o}"),
        o => format!("{base} - {}", -o),
    }
}

fn literal(v: f64, precision: Precision) -> String {
    match precision {
        Precision::F32 => format!("{:?}f", v as f32),
        Precision::F64 => format!("{v:?}"),
    }
}

fn render(ir: &KernelIR, e: &ScalarExpr, precision: Precision) -> String {
    let mut s = String::new();
    write_expr(&mut s, ir, e, precision);
    s
}

fn prec(e: &ScalarExpr) -> u8 {
    match e {
        ScalarExpr::Bin(op, ..) => op.precedence(),
        _ => u8::MAX,
    }
}

fn write_expr(out: &mut String, ir: &KernelIR, e: &ScalarExpr, p: Precision) {
    match e {
        ScalarExpr::TileRead { tile, dx, dy } => {
            let t = &ir.local_tiles[*tile];
            let x = offset_text("lx", *dx as i64);
            let y = offset_text("ly", *dy as i64);
            let (lt, rt) = (t.halo.left, t.halo.right);
            let _ = write!(out, "{}_local[LOCAL_INDEX({x}, {y}, NLX, {lt}, {rt})]", t.name);
        }
        ScalarExpr::Scalar(n) => out.push_str(n),
        ScalarExpr::Lit(v) => out.push_str(&literal(*v, p)),
        ScalarExpr::Bin(op, l, r) => {
            let wrap_l = prec(l) < op.precedence();
            let wrap_r = prec(r) <= op.precedence();
            wrapped(out, ir, l, p, wrap_l);
            let _ = write!(out, " {} ", op.symbol());
            wrapped(out, ir, r, p, wrap_r);
        }
        ScalarExpr::Neg(inner) => {
            out.push('-');
            let wrap = matches!(**inner, ScalarExpr::Bin(..) | ScalarExpr::Neg(_) | ScalarExpr::Lit(_));
            wrapped(out, ir, inner, p, wrap);
        }
        ScalarExpr::Intrinsic(name, args) => {
            let f = match name.as_str() {
                "abs" => "fabs",
                "min" => "fmin",
                "max" => "fmax",
                other => other,
            };
            if args.len() > 2 {
                // fold left to right: fmin(fmin(a, b), c)
                let mut acc = render(ir, &args[0], p);
                for a in &args[1..] {
                    acc = format!("{f}({acc}, {})", render(ir, a, p));
                }
                out.push_str(&acc);
            } else {
                let parts: Vec<String> = args.iter().map(|a| render(ir, a, p)).collect();
                let _ = write!(out, "{f}({})", parts.join(", "));
            }
        }
    }
}

fn wrapped(out: &mut String, ir: &KernelIR, e: &ScalarExpr, p: Precision, wrap: bool) {
    if wrap {
        out.push('(');
        write_expr(out, ir, e, p);
        out.push(')');
    } else {
        write_expr(out, ir, e, p);
    }
}

