//! Checks shared by the integration tests and the acceptance runner. Each
//! returns a one-line summary on success.

use std::path::PathBuf;

use ofpc::codegen::{emit_source, lower, Phase};
use ofpc::frontend::ast::BinOp;
use ofpc::refinterp::{apply_bin, cshift_ref, eval_kernel, Env, Field, Precision};
use ofpc::region::{global_coord, interior_of, local_linear_index, local_tile_extent, Extent, Halo};
use ofpc::sim::{check_hazards, LaunchConfig};
use ofpc::swdemo::wave_advance_program;

use super::check;

pub const MAX_HALO: usize = 3;
pub const MAX_EXTENT: usize = 32;

fn all_halos() -> impl Iterator<Item = Halo> {
    let r = 0..=MAX_HALO;
    r.clone().flat_map(move |l| {
        let r = r.clone();
        r.clone()
            .flat_map(move |rt| r.clone().flat_map(move |d| (0..=MAX_HALO).map(move |u| Halo::new(l, rt, d, u))))
    })
}

pub fn halo_arithmetic() -> Result<String, String> {
    let mut checked = 0usize;

    // interior_of against a membership count along each axis
    for h in all_halos() {
        for ny in 1..=MAX_EXTENT {
            for nx in 1..=MAX_EXTENT {
                let full = Extent::new(nx, ny);
                let inside_x = (0..nx).filter(|&x| x >= h.left && x + h.right < nx).count();
                let inside_y = (0..ny).filter(|&y| y >= h.down && y + h.up < ny).count();
                match interior_of(full, h) {
                    Ok(r) => {
                        if (r.x0, r.y0, r.nx, r.ny) != (h.left, h.down, inside_x, inside_y) || inside_x == 0 || inside_y == 0 {
                            return Err(format!("interior_of({full}, {h}) = {r:?}"));
                        }
                    }
                    Err(_) => {
                        if inside_x > 0 && inside_y > 0 {
                            return Err(format!("interior_of({full}, {h}) rejected a fitting halo"));
                        }
                    }
                }
                checked += 1;
            }
        }
    }

    // tile extent and a bijective tile index
    let mut stamp = vec![0u32; (MAX_EXTENT + 2 * MAX_HALO).pow(2)];
    let mut round = 0u32;
    for h in all_halos() {
        for gny in 1..=MAX_EXTENT {
            for gnx in 1..=MAX_EXTENT {
                let group = Extent::new(gnx, gny);
                let tile = local_tile_extent(group, h);
                if tile != Extent::new(gnx + h.left + h.right, gny + h.down + h.up) {
                    return Err(format!("local_tile_extent({group}, {h}) = {tile}"));
                }
                round += 1;
                for ly in 0..tile.ny {
                    for lx in 0..tile.nx {
                        let i = local_linear_index(lx, ly, gnx, h);
                        if i >= tile.cells() || stamp[i] == round {
                            return Err(format!("local_linear_index({lx}, {ly}, {gnx}, {h}) = {i} is not a bijection"));
                        }
                        stamp[i] = round;
                    }
                }
                checked += 1;
            }
        }
    }

    // owned cells of all groups partition the interior, per axis and halo
    for n in 1..=MAX_EXTENT {
        for g in (1..=n).filter(|g| n % g == 0) {
            for lo in 0..=MAX_HALO {
                for hi in 0..=MAX_HALO {
                    let full = Extent::new(n + lo + hi, 1);
                    let r = interior_of(full, Halo::new(lo, hi, 0, 0)).map_err(|e| e.to_string())?;
                    let group = Extent::new(g, 1);
                    let mut hits = vec![0u8; full.nx];
                    for gid in 0..n / g {
                        // owned cells sit at tile offset `lo`
                        for l in 0..g {
                            let (x, _) = global_coord((gid, 0), (l + lo, 0), group);
                            hits[x] += 1;
                        }
                        // and the whole tile stays inside the full array
                        let last = local_tile_extent(group, Halo::new(lo, hi, 0, 0)).nx - 1;
                        let (x, _) = global_coord((gid, 0), (last, 0), group);
                        if x >= full.nx {
                            return Err(format!("tile of group {gid} (n={n}, g={g}) reaches x={x} past {}", full.nx));
                        }
                    }
                    for (x, c) in hits.iter().enumerate() {
                        if *c != u8::from(r.contains(x, 0)) {
                            return Err(format!("owned cells n={n} group={g} halo=({lo},{hi}) hit x={x} {c} times"));
                        }
                    }
                    checked += 1;
                }
            }
        }
    }
    // and in 2-D for every divisible interior and group
    for ny in 1..=MAX_EXTENT {
        for nx in 1..=MAX_EXTENT {
            let interior = Extent::new(nx, ny);
            let mut seen = vec![0u8; interior.cells()];
            for gny in (1..=ny).filter(|g| ny % g == 0) {
                for gnx in (1..=nx).filter(|g| nx % g == 0) {
                    seen.iter_mut().for_each(|s| *s = 0);
                    let group = Extent::new(gnx, gny);
                    for gy in 0..ny / gny {
                        for gx in 0..nx / gnx {
                            for ty in 0..gny {
                                for tx in 0..gnx {
                                    let (x, y) = global_coord((gx, gy), (tx, ty), group);
                                    seen[interior.linear(x, y)] += 1;
                                }
                            }
                        }
                    }
                    if seen.iter().any(|&c| c != 1) {
                        return Err(format!("global_coord does not partition {interior} with group {group}"));
                    }
                    checked += 1;
                }
            }
        }
    }

    let example = local_linear_index(3, 2, 16, Halo::new(1, 1, 1, 1));
    if example != 39 {
        return Err(format!("local_linear_index(3, 2, 16, [1,1,1,1]) = {example}, expected 39"));
    }
    for n in 1..=MAX_EXTENT {
        let full = Extent::new(n + 2, n + 2);
        let cells = interior_of(full, Halo::new(1, 1, 1, 1)).map_err(|e| e.to_string())?;
        let faces = interior_of(full, Halo::new(0, 1, 1, 1)).map_err(|e| e.to_string())?;
        if faces.nx != cells.nx + 1 || faces.ny != cells.ny {
            return Err(format!("{n} cells have {} x faces", faces.nx));
        }
    }
    Ok(format!("{checked} cases, index example 39, n cells have n+1 faces"))
}

const AVG3: &str = "\
subroutine avg3(X, oY)
  !$OFP PURE, KERNEL :: avg3
  real, dimension(:,:), intent(in), contiguous :: X
  real, dimension(:,:), intent(out), contiguous, target :: oY
  real, pointer, dimension(:,:) :: pY
  integer, dimension(4) :: halo, lt, rt
  halo = [1,1,0,0];  lt = [0,2,0,0];  rt = [2,0,0,0]
  pY = region_ptr(oY, halo)
  pY = (region_cpy(X, lt) + region_cpy(X, halo) + region_cpy(X, rt)) / 3.0
end subroutine avg3
";

/// `(cshift(X,-1) + X + cshift(X,1)) / 3` on a periodic line against the
/// same average written with regions over a wrapped halo.
pub fn cshift_region_duality() -> Result<String, String> {
    let cp = check(AVG3);
    let mut total = 0;
    for n in [1usize, 2, 3, 7, 16, 64] {
        for precision in [Precision::F64, Precision::F32] {
            let x = Field::from_fn(Extent::new(n, 1), precision, |i, _| {
                precision.round(((i * 7919) % 101) as f64 / 13.0 - 2.5)
            });
            let left = cshift_ref(&x, 1, -1);
            let right = cshift_ref(&x, 1, 1);
            let shifted = Field::from_fn(x.full, precision, |i, _| {
                let s = apply_bin(precision, BinOp::Add, left.get(i, 0), x.get(i, 0));
                let s = apply_bin(precision, BinOp::Add, s, right.get(i, 0));
                apply_bin(precision, BinOp::Div, s, 3.0)
            });

            let wrapped = Field::from_fn(Extent::new(n + 2, 1), precision, |i, _| x.get((i + n - 1) % n, 0));
            let env = Env::new().with_array("x", wrapped);
            let out = eval_kernel(&cp, &env, precision).map_err(|e| e.to_string())?.outputs;
            let region = out["oy"].interior(Halo::new(1, 1, 0, 0)).map_err(|e| e.to_string())?;
            if !region.bit_eq(&shifted) {
                return Err(format!("n={n} {precision}: cshift and region averages differ"));
            }
            total += 1;
        }
    }
    Ok(format!("{total} periodic lines bit-identical"))
}

pub fn hazards_per_barrier() -> Result<String, String> {
    let group = Extent::new(16, 8);
    let ir = lower(&wave_advance_program().map_err(|e| e.to_string())?, group).map_err(|e| e.to_string())?;
    let cfg = LaunchConfig::new(Extent::new(64, 64), group, Precision::F64);
    let clean = check_hazards(&ir, &cfg);
    if !clean.is_empty() {
        return Err(format!("unmodified IR reports {} hazards: {}", clean.len(), clean[0]));
    }
    let barriers: Vec<usize> = (0..ir.phases.len()).filter(|&i| matches!(ir.phases[i], Phase::Barrier)).collect();
    if barriers.is_empty() {
        return Err("IR has no barriers".into());
    }
    let mut counts = Vec::new();
    for &b in &barriers {
        let mut cut = ir.clone();
        cut.phases.remove(b);
        let n = check_hazards(&cut, &cfg).len();
        if n == 0 {
            return Err(format!("removing the barrier at phase {b} went undetected"));
        }
        counts.push(n);
    }
    Ok(format!("{} barriers, reports after removal {counts:?}, 0 when intact", barriers.len()))
}

pub const GOLDEN: &str = "wave_advance_16x8_f32.cl";

pub fn golden_path() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "tests", "golden", GOLDEN].iter().collect()
}

pub fn emit_wave_advance() -> Result<String, String> {
    let cp = wave_advance_program().map_err(|e| e.to_string())?;
    let ir = lower(&cp, Extent::new(16, 8)).map_err(|e| e.to_string())?;
    Ok(emit_source(&ir, Precision::F32))
}

pub fn golden_codegen() -> Result<String, String> {
    let first = emit_wave_advance()?;
    let second = emit_wave_advance()?;
    if first != second {
        return Err("two emissions differ".into());
    }
    let path = golden_path();
    let golden = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if first != golden {
        let line = first.lines().zip(golden.lines()).position(|(a, b)| a != b).map(|i| i + 1);
        return Err(format!("emitted text differs from {GOLDEN} (first differing line {line:?})"));
    }
    for needle in ["__kernel void", "__global", "__local", "barrier("] {
        if !first.contains(needle) {
            return Err(format!("missing `{needle}`"));
        }
    }
    Ok(format!("{GOLDEN} matches ({} bytes), structural elements present", first.len()))
}

pub fn sema_fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", "sema", name].iter().collect();
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub const RULE_FIXTURES: [(&str, &str); 9] = [
    ("r1_inout.fk", "R1"),
    ("r2_contiguous.fk", "R2"),
    ("r3_call.fk", "R3"),
    ("r4_target.fk", "R4"),
    ("r5_assign_input.fk", "R5"),
    ("r6_pointer_twice.fk", "R6"),
    ("r7_shape.fk", "R7"),
    ("r8_read_output.fk", "R8"),
    ("r9_elemental.fk", "R9"),
];

pub fn error_codes(src: &str) -> Result<Vec<&'static str>, String> {
    let m = ofpc::frontend::parse_source(src).map_err(|e| e.to_string())?;
    let k = m.kernels.last().ok_or("no kernel")?;
    Ok(match ofpc::sema::analyze(k) {
        Ok(_) => vec![],
        Err(d) => d
            .iter()
            .filter(|d| d.severity == ofpc::sema::Severity::Error)
            .map(|d| d.code)
            .collect(),
    })
}

pub fn restriction_enforcement() -> Result<String, String> {
    let clean = error_codes(&sema_fixture("clean.fk"))?;
    if !clean.is_empty() {
        return Err(format!("clean fixture reports {clean:?}"));
    }
    for (file, code) in RULE_FIXTURES {
        let codes = error_codes(&sema_fixture(file))?;
        if codes.is_empty() || codes.iter().any(|c| *c != code) {
            return Err(format!("{file}: expected only {code}, got {codes:?}"));
        }
    }
    let group = Extent::new(16, 8);
    let ir = lower(&wave_advance_program().map_err(|e| e.to_string())?, group).map_err(|e| e.to_string())?;
    let interior = Extent::new(30, 30);
    let env = super::random_env(&check(ofpc::swdemo::WAVE_ADVANCE_SOURCE), interior, 1);
    match ofpc::sim::launch(&ir, &env, LaunchConfig::new(interior, group, Precision::F64)) {
        Err(ofpc::sim::LaunchError::NotDivisible { .. }) => {}
        other => return Err(format!("30x30 launch with group 16x8 gave {:?}", other.map(|_| ()))),
    }
    Ok("R1-R9 each flagged with only their code, 30x30 over 16x8 rejected".into())
}
