#![allow(dead_code)]

pub mod checks;

use std::collections::BTreeMap;

use ofpc::codegen::lower;
use ofpc::frontend::parse_source;
use ofpc::refinterp::{eval_kernel, Env, Field, Precision};
use ofpc::region::Extent;
use ofpc::sema::{analyze, CheckedProgram};
use ofpc::sim::{launch, LaunchConfig, Schedule};
use ofpc::swdemo::WAVE_ADVANCE_SOURCE;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ELEMENTALS: &str = "\
pure elemental real function xflux(h, hu, g)
  real, intent(in) :: h, hu, g
  xflux = hu*hu/h + 0.5*g*h*h
end function xflux

pure elemental real function cflux(h, hu, hv)
  real, intent(in) :: h, hu, hv
  cflux = hu*hv/h
end function cflux
";

pub struct CorpusKernel {
    pub name: String,
    pub source: String,
}

/// Builds a one-output kernel. `inputs` are array names; `rhs` is the body of
/// the single pointer assignment.
fn kernel(name: &str, scalars: &[&str], inputs: &[&str], out_halo: &str, rhs: &str) -> CorpusKernel {
    let mut params: Vec<&str> = scalars.to_vec();
    params.extend(inputs);
    params.push("oF");
    let mut s = String::from(ELEMENTALS);
    s.push_str(&format!("\nsubroutine {name}({})\n", params.join(", ")));
    s.push_str(&format!("  !$OFP PURE, KERNEL :: {name}\n"));
    if !scalars.is_empty() {
        s.push_str(&format!("  real, intent(in) :: {}\n", scalars.join(", ")));
    }
    s.push_str(&format!("  real, dimension(:,:), intent(in), contiguous :: {}\n", inputs.join(", ")));
    s.push_str("  real, dimension(:,:), intent(out), contiguous, target :: oF\n");
    s.push_str("  real, pointer, dimension(:,:) :: pF\n");
    s.push_str("  integer, dimension(4) :: halo, face_lt, face_rt, face_dn, face_up\n");
    s.push_str("  halo = [1,1,1,1]\n");
    s.push_str("  face_lt = [0,1,1,1];  face_rt = [1,0,1,1]\n");
    s.push_str("  face_dn = [1,1,0,1];  face_up = [1,1,1,0]\n");
    s.push_str(&format!("  pF = region_ptr(oF, {out_halo})\n"));
    s.push_str(&format!("  pF = {rhs}\n"));
    s.push_str(&format!("end subroutine {name}\n"));
    CorpusKernel {
        name: name.to_string(),
        source: s,
    }
}

/// Region reads of a face array given as a full-size input: the faces to
/// the left/right (or below/above) of each interior cell.
const L: &str = "[1,1,1,1]";
const R: &str = "[2,0,1,1]";
const D: &str = "[1,1,1,1]";
const U: &str = "[1,1,2,0]";

pub fn corpus() -> Vec<CorpusKernel> {
    let cpy = |a: &str, h: &str| format!("region_cpy({a},{h})");
    let mut v = vec![
        kernel("identity", &[], &["A"], "halo", "region_cpy(A, halo)"),
        kernel(
            "axpy",
            &["s"],
            &["A", "B"],
            "[0,0,0,0]",
            "region_cpy(A,[0,0,0,0]) + s*region_cpy(B,[0,0,0,0])",
        ),
        kernel(
            "avg5",
            &[],
            &["A"],
            "halo",
            "(region_cpy(A,[1,1,0,2]) + region_cpy(A,[0,2,1,1]) + region_cpy(A,halo) &\n       + region_cpy(A,[2,0,1,1]) + region_cpy(A,[1,1,2,0])) / 5.0",
        ),
    ];

    // first step, one face quantity per kernel
    let face = |lt: &str, rt: &str, d: &str| {
        (
            format!("0.5*({} + {}) + (0.5*dt/{d})*({} - {})", cpy("H", lt), cpy("H", rt), cpy("U", lt), cpy("U", rt)),
            format!(
                "0.5*({} + {}) + (0.5*dt/{d})*(xflux({}, {}, g) - xflux({}, {}, g))",
                cpy("U", lt),
                cpy("U", rt),
                cpy("H", lt),
                cpy("U", lt),
                cpy("H", rt),
                cpy("U", rt)
            ),
            format!(
                "0.5*({} + {}) + (0.5*dt/{d})*(cflux({}, {}, {}) - cflux({}, {}, {}))",
                cpy("V", lt),
                cpy("V", rt),
                cpy("H", lt),
                cpy("U", lt),
                cpy("V", lt),
                cpy("H", rt),
                cpy("U", rt),
                cpy("V", rt)
            ),
        )
    };
    let (hx, ux, vx) = face("face_lt", "face_rt", "dx");
    v.push(kernel("lw_hx", &["dt", "dx"], &["H", "U"], "face_lt", &hx));
    v.push(kernel("lw_ux", &["dt", "dx", "g"], &["H", "U"], "face_lt", &ux));
    v.push(kernel("lw_vx", &["dt", "dx"], &["H", "U", "V"], "face_lt", &vx));
    let hy = format!(
        "0.5*({} + {}) + (0.5*dt/dy)*({} - {})",
        cpy("H", "face_dn"),
        cpy("H", "face_up"),
        cpy("V", "face_dn"),
        cpy("V", "face_up")
    );
    let uy = format!(
        "0.5*({} + {}) + (0.5*dt/dy)*(cflux({}, {}, {}) - cflux({}, {}, {}))",
        cpy("U", "face_dn"),
        cpy("U", "face_up"),
        cpy("H", "face_dn"),
        cpy("U", "face_dn"),
        cpy("V", "face_dn"),
        cpy("H", "face_up"),
        cpy("U", "face_up"),
        cpy("V", "face_up")
    );
    let vy = format!(
        "0.5*({} + {}) + (0.5*dt/dy)*(xflux({}, {}, g) - xflux({}, {}, g))",
        cpy("V", "face_dn"),
        cpy("V", "face_up"),
        cpy("H", "face_dn"),
        cpy("V", "face_dn"),
        cpy("H", "face_up"),
        cpy("V", "face_up")
    );
    v.push(kernel("lw_hy", &["dt", "dy"], &["H", "V"], "face_dn", &hy));
    v.push(kernel("lw_uy", &["dt", "dy"], &["H", "U", "V"], "face_dn", &uy));
    v.push(kernel("lw_vy", &["dt", "dy", "g"], &["H", "V"], "face_dn", &vy));

    // second step with the face quantities supplied as inputs
    let ph = format!(
        "{} + (dt/dx)*({} - {}) + (dt/dy)*({} - {})",
        cpy("H", "halo"),
        cpy("Ux", L),
        cpy("Ux", R),
        cpy("Vy", D),
        cpy("Vy", U)
    );
    let pu = format!(
        "{} + (dt/dx)*(xflux({}, {}, g) - xflux({}, {}, g)) + (dt/dy)*(cflux({}, {}, {}) - cflux({}, {}, {}))",
        cpy("U", "halo"),
        cpy("Hx", L),
        cpy("Ux", L),
        cpy("Hx", R),
        cpy("Ux", R),
        cpy("Hy", D),
        cpy("Uy", D),
        cpy("Vy", D),
        cpy("Hy", U),
        cpy("Uy", U),
        cpy("Vy", U)
    );
    let pv = format!(
        "{} + (dt/dx)*(cflux({}, {}, {}) - cflux({}, {}, {})) + (dt/dy)*(xflux({}, {}, g) - xflux({}, {}, g))",
        cpy("V", "halo"),
        cpy("Hx", L),
        cpy("Ux", L),
        cpy("Vx", L),
        cpy("Hx", R),
        cpy("Ux", R),
        cpy("Vx", R),
        cpy("Hy", D),
        cpy("Vy", D),
        cpy("Hy", U),
        cpy("Vy", U)
    );
    v.push(kernel("lw_h", &["dt", "dx", "dy"], &["H", "Ux", "Vy"], "halo", &ph));
    v.push(kernel("lw_u", &["dt", "dx", "dy", "g"], &["U", "Hx", "Ux", "Hy", "Uy", "Vy"], "halo", &pu));
    v.push(kernel(
        "lw_v",
        &["dt", "dx", "dy", "g"],
        &["V", "Hx", "Ux", "Vx", "Hy", "Vy"],
        "halo",
        &pv,
    ));

    v.push(CorpusKernel {
        name: "wave_advance".into(),
        source: WAVE_ADVANCE_SOURCE.to_string(),
    });
    v
}

pub fn check(source: &str) -> CheckedProgram {
    let module = parse_source(source).unwrap_or_else(|e| panic!("{e}"));
    analyze(&module.kernels[0]).unwrap_or_else(|d| panic!("{d:?}"))
}

/// Random positive inputs (so divisions are safe) sized so the written
/// interior is `interior`, plus the standard scalars.
pub fn random_env(cp: &CheckedProgram, interior: Extent, seed: u64) -> Env {
    let out_halo = cp.output_bindings.values().next().map(|(_, h)| *h).unwrap_or_default();
    let full = interior.grow(out_halo);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = Env::new();
    for p in cp.program.input_arrays() {
        let f = Field::from_fn(full, Precision::F64, |_, _| rng.gen_range(0.5..1.5));
        env = env.with_array(&p.name, f);
    }
    let standard = [("dx", 1.0), ("dy", 1.25), ("dt", 0.1), ("g", 9.8), ("s", 2.5)];
    for p in cp.program.scalar_params() {
        let v = standard.iter().find(|(n, _)| *n == p.name).map(|(_, v)| *v).unwrap_or(0.75);
        env = env.with_scalar(&p.name, v);
    }
    env
}

/// Runs both engines; `Err` describes the first differing cell.
pub fn differential(
    cp: &CheckedProgram,
    interior: Extent,
    group: Extent,
    precision: Precision,
    seed: u64,
    schedule: Schedule,
) -> Result<(), String> {
    let env = random_env(cp, interior, seed);
    let reference = eval_kernel(cp, &env, precision).map_err(|e| e.to_string())?.outputs;
    let ir = lower(cp, group).map_err(|e| e.to_string())?;
    let cfg = LaunchConfig::new(interior, group, precision).with_schedule(schedule);
    let simulated = launch(&ir, &env, cfg).map_err(|e| e.to_string())?;
    compare_outputs(&reference, &simulated)
}

pub fn compare_outputs(a: &BTreeMap<String, Field>, b: &BTreeMap<String, Field>) -> Result<(), String> {
    if a.keys().ne(b.keys()) {
        return Err(format!("output sets differ: {:?} vs {:?}", a.keys(), b.keys()));
    }
    for (name, fa) in a {
        let fb = &b[name];
        if fa.full != fb.full {
            return Err(format!("`{name}` extents differ: {} vs {}", fa.full, fb.full));
        }
        if let Some(i) = (0..fa.data.len()).find(|&i| fa.data[i].to_bits() != fb.data[i].to_bits()) {
            let (x, y) = fa.full.coords(i);
            return Err(format!("`{name}` differs at ({x},{y}): {:e} vs {:e}", fa.data[i], fb.data[i]));
        }
    }
    Ok(())
}
