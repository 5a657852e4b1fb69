//! Lowering of checked kernels to work-group IR, and kernel source emission.
//!
//! Tile coordinates are anchored at the group origin: tile cell `(lx, ly)` of
//! group `(gx, gy)` is array element `(gx*gnx + lx, gy*gny + ly)` for input
//! tiles, and element `(gx*gnx + lx, gy*gny + ly)` of the temporary for
//! temporary tiles. A region read with halo `h` then becomes a tile read at
//! constant offset `(h.left, h.down)` from the cell being computed.

mod emit;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::frontend::ast::*;
use crate::frontend::REGION_CPY;
use crate::region::{Extent, Halo};
use crate::sema::CheckedProgram;

pub use emit::emit_source;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TileSource {
    /// Cooperative copy of a global input array.
    Global(String),
    /// Temporary computed in local memory from an allocatable local.
    Temp(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalTile {
    pub name: String,
    pub source: TileSource,
    pub extent: Extent,
    /// `extent = group + (left + right, down + up)`.
    pub halo: Halo,
}

/// Per-element expression over tiles, scalars and literals.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarExpr {
    /// Read of `tile` at `(x + dx, y + dy)`, `(x, y)` being the cell in hand.
    TileRead { tile: usize, dx: usize, dy: usize },
    Scalar(String),
    Lit(f64),
    Bin(BinOp, Box<ScalarExpr>, Box<ScalarExpr>),
    Neg(Box<ScalarExpr>),
    Intrinsic(String, Vec<ScalarExpr>),
}

impl ScalarExpr {
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a ScalarExpr)) {
        f(self);
        match self {
            ScalarExpr::Bin(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            ScalarExpr::Neg(a) => a.walk(f),
            ScalarExpr::Intrinsic(_, args) => args.iter().for_each(|a| a.walk(f)),
            _ => {}
        }
    }

    /// All `(tile, dx, dy)` reads in evaluation order.
    pub fn reads(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let ScalarExpr::TileRead { tile, dx, dy } = e {
                out.push((*tile, *dx, *dy));
            }
        });
        out
    }

    fn remap_tiles(&mut self, map: &[Option<usize>]) {
        match self {
            ScalarExpr::TileRead { tile, .. } => *tile = map[*tile].expect("live tile"),
            ScalarExpr::Bin(_, a, b) => {
                a.remap_tiles(map);
                b.remap_tiles(map);
            }
            ScalarExpr::Neg(a) => a.remap_tiles(map),
            ScalarExpr::Intrinsic(_, args) => args.iter_mut().for_each(|a| a.remap_tiles(map)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Phase {
    CooperativeLoad {
        tile: usize,
        source: String,
    },
    CooperativeCompute {
        tile: usize,
        expr: ScalarExpr,
    },
    Barrier,
    /// Each thread stores into its owned element of `target`, displaced by
    /// `shift` (always `(0, 0)` from [`lower`]).
    OwnedWrite {
        target: String,
        expr: ScalarExpr,
        shift: (i64, i64),
    },
}

impl Phase {
    pub fn expr(&self) -> Option<&ScalarExpr> {
        match self {
            Phase::CooperativeCompute { expr, .. } | Phase::OwnedWrite { expr, .. } => Some(expr),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::CooperativeLoad { tile, source } => write!(f, "load t{tile} <- {source}"),
            Phase::CooperativeCompute { tile, .. } => write!(f, "compute t{tile}"),
            Phase::Barrier => f.write_str("barrier"),
            Phase::OwnedWrite { target, .. } => write!(f, "write {target}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelIR {
    pub name: String,
    /// Kernel parameters in declaration order.
    pub params: Vec<(String, ParamKind)>,
    pub scalar_params: Vec<String>,
    pub global_in: Vec<String>,
    /// Output arrays with the halo they are written through.
    pub global_out: Vec<(String, Halo)>,
    /// Input whose values fill each output's cells outside the written
    /// interior (paired by position).
    pub passthrough: Vec<Option<String>>,
    pub local_tiles: Vec<LocalTile>,
    pub phases: Vec<Phase>,
    pub group: Extent,
}

impl KernelIR {
    pub fn barrier_count(&self) -> usize {
        self.phases.iter().filter(|p| matches!(p, Phase::Barrier)).count()
    }

    /// Halo of the written interior, shared by all outputs' full extents.
    pub fn output_halo(&self) -> Halo {
        self.global_out.first().map(|(_, h)| *h).unwrap_or(Halo::ZERO)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoweringError {
    #[error("work-group extent {0} must be at least 1x1")]
    EmptyGroup(Extent),
    #[error("read of tile `{tile}` at offset ({dx},{dy}) leaves its {extent} extent")]
    ReadOutsideTile { tile: String, dx: usize, dy: usize, extent: Extent },
    #[error("outputs have differing interior sizes ({0} vs {1})")]
    OutputHalos(Halo, Halo),
}

/// Thread `t` of a `group` handles tile linear indices `t, t+T, t+2T, ...`
/// where `T` is the thread count. Returns tile coordinates per thread.
pub fn strided_cover(tile: Extent, group: Extent) -> Vec<Vec<(usize, usize)>> {
    let threads = group.cells();
    (0..threads)
        .map(|t| (t..tile.cells()).step_by(threads).map(|i| tile.coords(i)).collect())
        .collect()
}

enum Item {
    Compute { tile: usize, expr: ScalarExpr },
    Write { target: String, expr: ScalarExpr },
}

struct Lowering<'a> {
    cp: &'a CheckedProgram,
    tiles: Vec<(String, TileSource)>,
    /// Halos applied per tile, for sizing.
    applied: Vec<Vec<Halo>>,
    input_tile: BTreeMap<String, usize>,
    current: BTreeMap<String, usize>,
    versions: BTreeMap<String, usize>,
    stmt: usize,
}

impl Lowering<'_> {
    fn tile_for_array(&mut self, name: &str) -> usize {
        if let Some(&t) = self.current.get(name) {
            return t;
        }
        if let Some(&t) = self.input_tile.get(name) {
            return t;
        }
        let t = self.tiles.len();
        self.tiles.push((name.to_string(), TileSource::Global(name.to_string())));
        self.applied.push(Vec::new());
        self.input_tile.insert(name.to_string(), t);
        t
    }

    fn read(&mut self, array: &str, halo: Halo) -> ScalarExpr {
        let tile = self.tile_for_array(array);
        self.applied[tile].push(halo);
        ScalarExpr::TileRead {
            tile,
            dx: halo.left,
            dy: halo.down,
        }
    }

    fn expr(&mut self, e: &Expr, subst: &BTreeMap<String, ScalarExpr>) -> ScalarExpr {
        match e {
            Expr::Num(v) => ScalarExpr::Lit(*v),
            Expr::Ref(n) => {
                if let Some(s) = subst.get(n) {
                    s.clone()
                } else if self.cp.program.param(n).is_some_and(|p| p.kind == ParamKind::ScalarReal) {
                    ScalarExpr::Scalar(n.clone())
                } else {
                    self.read(n, Halo::ZERO)
                }
            }
            Expr::Paren(inner) => self.expr(inner, subst),
            Expr::Neg(inner) => ScalarExpr::Neg(Box::new(self.expr(inner, subst))),
            Expr::Binary(op, l, r) => {
                let a = self.expr(l, subst);
                let b = self.expr(r, subst);
                ScalarExpr::Bin(*op, Box::new(a), Box::new(b))
            }
            Expr::Call(name, args) if name == REGION_CPY => {
                let Expr::Ref(src) = &args[0] else {
                    unreachable!("sema checks region_cpy arguments")
                };
                let halo = self.cp.halo_expr(self.stmt, &args[1]);
                self.read(src, halo)
            }
            Expr::Call(name, args) => {
                let lowered: Vec<ScalarExpr> = args.iter().map(|a| self.expr(a, subst)).collect();
                match self.cp.program.elemental(name) {
                    Some(f) => {
                        let f = f.clone();
                        let inner: BTreeMap<String, ScalarExpr> =
                            f.params.iter().map(|p| p.name.clone()).zip(lowered).collect();
                        self.expr(&f.body, &inner)
                    }
                    None => ScalarExpr::Intrinsic(name.clone(), lowered),
                }
            }
            Expr::HaloLit(_) => unreachable!("sema rejects halo values"),
        }
    }

    fn new_temp(&mut self, local: &str) -> usize {
        let v = self.versions.entry(local.to_string()).or_insert(0);
        *v += 1;
        let name = if *v == 1 {
            local.to_string()
        } else {
            format!("{local}_{v}")
        };
        let t = self.tiles.len();
        self.tiles.push((name, TileSource::Temp(local.to_string())));
        self.applied.push(Vec::new());
        t
    }
}

/// Lowers a checked kernel for work-groups of extent `group`.
pub fn lower(cp: &CheckedProgram, group: Extent) -> Result<KernelIR, LoweringError> {
    if group.nx == 0 || group.ny == 0 {
        return Err(LoweringError::EmptyGroup(group));
    }
    let program = &cp.program;
    let mut lw = Lowering {
        cp,
        tiles: Vec::new(),
        applied: Vec::new(),
        input_tile: BTreeMap::new(),
        current: BTreeMap::new(),
        versions: BTreeMap::new(),
        stmt: 0,
    };

    // input tiles first, in parameter order
    for p in program.input_arrays() {
        let used = program.body.iter().any(|st| match &st.kind {
            StmtKind::Assign { rhs, .. } => {
                let mut hit = false;
                rhs.walk(&mut |e| hit |= matches!(e, Expr::Ref(n) if n == &p.name));
                hit
            }
            _ => false,
        });
        if used {
            lw.tile_for_array(&p.name);
        }
    }

    let mut items = Vec::new();
    for (i, st) in program.body.iter().enumerate() {
        lw.stmt = i;
        let StmtKind::Assign { lhs, rhs } = &st.kind else {
            continue;
        };
        let expr = lw.expr(rhs, &BTreeMap::new());
        if let Some((target, _)) = cp.output_bindings.get(lhs) {
            items.push(Item::Write {
                target: target.clone(),
                expr,
            });
        } else {
            let tile = lw.new_temp(lhs);
            lw.current.insert(lhs.clone(), tile);
            items.push(Item::Compute { tile, expr });
        }
    }

    // backward reach: tile cells [0, group + need) are read by later phases
    let ntiles = lw.tiles.len();
    let mut need: Vec<Option<(usize, usize)>> = vec![None; ntiles];
    let mut live_items = vec![true; items.len()];
    let mut read_halos: Vec<Vec<Halo>> = vec![Vec::new(); ntiles];
    for (k, item) in items.iter().enumerate().rev() {
        let (base, expr) = match item {
            Item::Write { expr, .. } => ((0, 0), expr),
            Item::Compute { tile, expr } => match need[*tile] {
                Some(r) => (r, expr),
                None => {
                    live_items[k] = false;
                    continue;
                }
            },
        };
        for (t, dx, dy) in expr.reads() {
            let r = need[t].get_or_insert((0, 0));
            r.0 = r.0.max(base.0 + dx);
            r.1 = r.1.max(base.1 + dy);
            read_halos[t].push(Halo::new(dx, 0, dy, 0));
        }
    }

    // drop dead tiles and renumber
    let mut remap = vec![None; ntiles];
    let mut local_tiles = Vec::new();
    for t in 0..ntiles {
        let Some((rx, ry)) = need[t] else { continue };
        remap[t] = Some(local_tiles.len());
        let (name, source) = lw.tiles[t].clone();
        let halo = match &source {
            TileSource::Global(_) => {
                let mut h = lw.applied[t].iter().fold(Halo::ZERO, |a, b| a.max(*b));
                h.right += rx.saturating_sub(h.width());
                h.up += ry.saturating_sub(h.height());
                h
            }
            TileSource::Temp(_) => {
                let ml = read_halos[t].iter().map(|h| h.left).max().unwrap_or(0);
                let md = read_halos[t].iter().map(|h| h.down).max().unwrap_or(0);
                let left = ml.min(rx);
                let down = md.min(ry);
                Halo::new(left, rx - left, down, ry - down)
            }
        };
        local_tiles.push(LocalTile {
            name,
            source,
            extent: Extent::new(group.nx + halo.width(), group.ny + halo.height()),
            halo,
        });
    }

    let mut phases = Vec::new();
    for (t, tile) in local_tiles.iter().enumerate() {
        if let TileSource::Global(src) = &tile.source {
            phases.push(Phase::CooperativeLoad {
                tile: t,
                source: src.clone(),
            });
        }
    }
    if !phases.is_empty() {
        phases.push(Phase::Barrier);
    }
    let mut dirty: Vec<Vec<Option<usize>>> = local_tiles.iter().map(|t| vec![None; t.extent.cells()]).collect();
    for (k, item) in items.into_iter().enumerate() {
        if !live_items[k] {
            continue;
        }
        let phase = match item {
            Item::Compute { tile, mut expr } => {
                expr.remap_tiles(&remap);
                Phase::CooperativeCompute {
                    tile: remap[tile].expect("live temp"),
                    expr,
                }
            }
            Item::Write { target, mut expr } => {
                expr.remap_tiles(&remap);
                Phase::OwnedWrite {
                    target,
                    expr,
                    shift: (0, 0),
                }
            }
        };
        check_reads(&phase, &local_tiles, group)?;
        if reads_foreign_dirty(&phase, &local_tiles, group, &dirty) {
            phases.push(Phase::Barrier);
            dirty.iter_mut().for_each(|d| d.fill(None));
        }
        if let Phase::CooperativeCompute { tile, .. } = &phase {
            for (t, cells) in strided_cover(local_tiles[*tile].extent, group).iter().enumerate() {
                for &(x, y) in cells {
                    dirty[*tile][local_tiles[*tile].extent.linear(x, y)] = Some(t);
                }
            }
        }
        phases.push(phase);
    }

    let mut global_out = Vec::new();
    for o in program.output_arrays() {
        let halo = cp.output_halo(&o.name).unwrap_or(Halo::ZERO);
        global_out.push((o.name.clone(), halo));
    }
    if let Some((_, first)) = global_out.iter().find(|(n, _)| cp.output_halo(n).is_some()) {
        for (n, h) in &global_out {
            if cp.output_halo(n).is_some() && (h.width(), h.height()) != (first.width(), first.height()) {
                return Err(LoweringError::OutputHalos(*first, *h));
            }
        }
    }
    let inputs: Vec<String> = program.input_arrays().map(|p| p.name.clone()).collect();
    let passthrough = (0..global_out.len()).map(|i| inputs.get(i).cloned()).collect();

    Ok(KernelIR {
        name: program.name.clone(),
        params: program.params.iter().map(|p| (p.name.clone(), p.kind)).collect(),
        scalar_params: program.scalar_params().map(|p| p.name.clone()).collect(),
        global_in: inputs,
        global_out,
        passthrough,
        local_tiles,
        phases,
        group,
    })
}

/// Cells each thread computes from in a phase: the coordinates that tile
/// reads are offset from.
pub fn phase_bases(phase: &Phase, tiles: &[LocalTile], group: Extent) -> Vec<Vec<(usize, usize)>> {
    match phase {
        Phase::CooperativeLoad { tile, .. } | Phase::CooperativeCompute { tile, .. } => {
            strided_cover(tiles[*tile].extent, group)
        }
        Phase::OwnedWrite { .. } => (0..group.cells()).map(|t| vec![group.coords(t)]).collect(),
        Phase::Barrier => Vec::new(),
    }
}

fn check_reads(phase: &Phase, tiles: &[LocalTile], group: Extent) -> Result<(), LoweringError> {
    let Some(expr) = phase.expr() else { return Ok(()) };
    let (mx, my) = match phase {
        Phase::CooperativeCompute { tile, .. } => (tiles[*tile].extent.nx - 1, tiles[*tile].extent.ny - 1),
        _ => (group.nx - 1, group.ny - 1),
    };
    for (t, dx, dy) in expr.reads() {
        let e = tiles[t].extent;
        if mx + dx >= e.nx || my + dy >= e.ny {
            return Err(LoweringError::ReadOutsideTile {
                tile: tiles[t].name.clone(),
                dx,
                dy,
                extent: e,
            });
        }
    }
    Ok(())
}

fn reads_foreign_dirty(phase: &Phase, tiles: &[LocalTile], group: Extent, dirty: &[Vec<Option<usize>>]) -> bool {
    let Some(expr) = phase.expr() else { return false };
    let reads = expr.reads();
    phase_bases(phase, tiles, group).iter().enumerate().any(|(t, bases)| {
        bases.iter().any(|&(x, y)| {
            reads.iter().any(|&(tile, dx, dy)| {
                let cell = tiles[tile].extent.linear(x + dx, y + dy);
                matches!(dirty[tile][cell], Some(w) if w != t)
            })
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;
    use crate::sema::analyze;

    const WAVE: &str = include_str!("../../dsl/wave_advance.fk");

    fn lowered(src: &str, group: Extent) -> KernelIR {
        let cp = analyze(&parse_source(src).unwrap().kernels[0]).unwrap();
        lower(&cp, group).unwrap()
    }

    #[test]
    fn strided_cover_examples() {
        let c = strided_cover(Extent::new(18, 10), Extent::new(16, 8));
        assert_eq!(c[0], vec![(0, 0), (2, 7)]);
        assert_eq!(c[51].iter().map(|&(x, y)| x + 18 * y).collect::<Vec<_>>(), [51, 179]);
        assert_eq!(c[127].len(), 1);

        let c = strided_cover(Extent::new(16, 8), Extent::new(16, 8));
        assert!(c.iter().all(|v| v.len() == 1));

        let c = strided_cover(Extent::new(17, 8), Extent::new(16, 8));
        assert!(c[..8].iter().all(|v| v.len() == 2));
        assert!(c[8..].iter().all(|v| v.len() == 1));
    }

    #[test]
    fn identity_pipeline() {
        let src = "\
subroutine ident(A, O)
  !$OFP PURE, KERNEL :: ident
  real, dimension(:,:), intent(in), contiguous :: A
  real, dimension(:,:), intent(out), contiguous, target :: O
  real, pointer, dimension(:,:) :: pO
  integer, dimension(4) :: halo = [1,1,1,1]
  pO = region_ptr(O, halo)
  pO = region_cpy(A, halo)
end subroutine
";
        let ir = lowered(src, Extent::new(16, 8));
        assert!(matches!(ir.phases[0], Phase::CooperativeLoad { .. }));
        assert_eq!(ir.phases[1], Phase::Barrier);
        assert!(matches!(&ir.phases[2], Phase::OwnedWrite { target, .. } if target == "o"));
        assert_eq!(ir.phases.len(), 3);
        assert_eq!(ir.local_tiles[0].extent, Extent::new(18, 10));
    }

    #[test]
    fn demo_tiles_and_barriers() {
        let ir = lowered(WAVE, Extent::new(16, 8));
        assert_eq!(ir.barrier_count(), 2);
        let tile = |n: &str| ir.local_tiles.iter().find(|t| t.name == n).unwrap();
        for n in ["h", "u", "v"] {
            assert_eq!(tile(n).extent, Extent::new(18, 10));
            assert_eq!(tile(n).halo, Halo::new(1, 1, 1, 1));
        }
        assert_eq!(tile("hx").extent, Extent::new(17, 8));
        assert_eq!(tile("vy").extent, Extent::new(16, 9));

        let hx = ir.local_tiles.iter().position(|t| t.name == "hx").unwrap();
        let h = ir.local_tiles.iter().position(|t| t.name == "h").unwrap();
        let u = ir.local_tiles.iter().position(|t| t.name == "u").unwrap();
        let expr = ir
            .phases
            .iter()
            .find_map(|p| match p {
                Phase::CooperativeCompute { tile, expr } if *tile == hx => Some(expr),
                _ => None,
            })
            .unwrap();
        let mut x_offsets: Vec<_> = expr.reads().iter().filter(|r| r.0 == h || r.0 == u).map(|r| r.1).collect();
        x_offsets.sort();
        x_offsets.dedup();
        assert_eq!(x_offsets, [0, 1]);

        let writes: Vec<_> = ir
            .phases
            .iter()
            .filter_map(|p| match p {
                Phase::OwnedWrite { target, .. } => Some(target.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(writes, ["oh", "ou", "ov"]);
    }

    #[test]
    fn dead_temporaries_are_dropped() {
        let src = "\
subroutine k(A, O)
  !$OFP PURE, KERNEL :: k
  real, dimension(:,:), intent(in), contiguous :: A
  real, dimension(:,:), intent(out), contiguous, target :: O
  real, allocatable, dimension(:,:) :: T
  real, pointer, dimension(:,:) :: pO
  T = 2.0*A
  pO = region_ptr(O, [0,0,0,0])
  pO = A
end subroutine
";
        let ir = lowered(src, Extent::new(4, 4));
        assert_eq!(ir.local_tiles.len(), 1);
        assert!(!ir.phases.iter().any(|p| matches!(p, Phase::CooperativeCompute { .. })));
    }

    #[test]
    fn chained_temporaries_grow_input_tile() {
        let src = "\
subroutine k(A, O)
  !$OFP PURE, KERNEL :: k
  real, dimension(:,:), intent(in), contiguous :: A
  real, dimension(:,:), intent(out), contiguous, target :: O
  real, allocatable, dimension(:,:) :: T
  real, pointer, dimension(:,:) :: pO
  T = region_cpy(A, [1,0,0,0]) + region_cpy(A, [0,1,0,0])
  pO = region_ptr(O, [2,1,0,0])
  pO = region_cpy(T, [1,1,0,0]) + region_cpy(T, [0,2,0,0]) + region_cpy(T, [2,0,0,0])
end subroutine
";
        let ir = lowered(src, Extent::new(4, 2));
        // T needs cells [0, 4+2); A then needs [0, 6+1)
        assert_eq!(ir.local_tiles[1].extent, Extent::new(6, 2));
        assert_eq!(ir.local_tiles[0].extent, Extent::new(7, 2));
        assert_eq!(ir.local_tiles[0].halo, Halo::new(1, 2, 0, 0));
    }

    #[test]
    fn reassigned_temporary_gets_new_tile() {
        let src = "\
subroutine k(A, O)
  !$OFP PURE, KERNEL :: k
  real, dimension(:,:), intent(in), contiguous :: A
  real, dimension(:,:), intent(out), contiguous, target :: O
  real, allocatable, dimension(:,:) :: T
  real, pointer, dimension(:,:) :: pO
  T = A + 1.0
  T = T * T
  pO = region_ptr(O, [0,0,0,0])
  pO = T
end subroutine
";
        let ir = lowered(src, Extent::new(2, 2));
        let names: Vec<_> = ir.local_tiles.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["a", "t", "t_2"]);
    }
}
