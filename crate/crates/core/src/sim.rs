//! Work-group simulator for [`KernelIR`].
//!
//! Execution is phase-synchronous: inside a phase every thread reads the
//! state left by the previous phase and all writes land when the phase ends.
//! Groups are independent and may run on worker threads; each writes only its
//! own output cells, so the merged result does not depend on scheduling.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::codegen::{strided_cover, KernelIR, Phase, ScalarExpr};
use crate::frontend::ast::BinOp;
use crate::refinterp::{apply_bin, apply_intrinsic, apply_neg, Env, Field, Precision};
use crate::region::Extent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Groups in parallel, threads in id order.
    #[default]
    Parallel,
    /// Groups and threads in id order on the calling thread.
    Sequential,
    /// Group order and per-phase thread order permuted from a seed.
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaunchConfig {
    /// Global work size: the interior written by the kernel.
    pub interior: Extent,
    pub group: Extent,
    pub precision: Precision,
    pub schedule: Schedule,
}

impl LaunchConfig {
    pub fn new(interior: Extent, group: Extent, precision: Precision) -> Self {
        LaunchConfig {
            interior,
            group,
            precision,
            schedule: Schedule::Parallel,
        }
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn check_divisible(&self) -> Result<(), LaunchError> {
        let (i, g) = (self.interior, self.group);
        if g.nx == 0 || g.ny == 0 || i.nx % g.nx != 0 || i.ny % g.ny != 0 {
            return Err(LaunchError::NotDivisible {
                interior: i,
                group: g,
            });
        }
        Ok(())
    }

    pub fn group_counts(&self) -> (usize, usize) {
        (self.interior.nx / self.group.nx, self.interior.ny / self.group.ny)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HazardKind {
    WriteWrite,
    ReadBeforeWriteWithoutBarrier,
    OutOfOwnedWrite,
}

impl fmt::Display for HazardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HazardKind::WriteWrite => "write-write",
            HazardKind::ReadBeforeWriteWithoutBarrier => "read-before-write-without-barrier",
            HazardKind::OutOfOwnedWrite => "out-of-owned-write",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HazardReport {
    pub kind: HazardKind,
    pub phase: usize,
    /// Tile (`name_local`) or global array name.
    pub target: String,
    pub coord: (i64, i64),
    pub threads: Vec<usize>,
}

impl fmt::Display for HazardReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} in phase {} on {} at ({},{}), threads {:?}",
            self.kind, self.phase, self.target, self.coord.0, self.coord.1, self.threads
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LaunchError {
    #[error("interior {interior} is not divisible by work-group {group}")]
    NotDivisible { interior: Extent, group: Extent },
    #[error("kernel was lowered for work-group {ir}, launched with {cfg}")]
    GroupMismatch { ir: Extent, cfg: Extent },
    #[error("missing input array `{0}`")]
    MissingArray(String),
    #[error("missing scalar parameter `{0}`")]
    MissingScalar(String),
    #[error("array `{name}` has extent {found}, expected {expected}")]
    ExtentMismatch { name: String, expected: Extent, found: Extent },
    #[error("phase {phase}: read of tile `{tile}` at ({x},{y}) is outside the tile")]
    TileRead { phase: usize, tile: String, x: usize, y: usize },
    #[error("phase {phase}: write to `{target}` at ({x},{y}) is outside the array")]
    GlobalWrite { phase: usize, target: String, x: i64, y: i64 },
    #[error("{} hazard(s), first: {}", .0.len(), .0[0])]
    Hazards(Vec<HazardReport>),
}

/// Expression with scalars resolved to constants.
#[derive(Debug, Clone)]
enum CExpr {
    Read { tile: usize, dx: usize, dy: usize },
    Const(f64),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
    Neg(Box<CExpr>),
    Intrinsic(String, Vec<CExpr>),
}

fn compile(e: &ScalarExpr, p: Precision, scalars: &BTreeMap<String, f64>) -> Result<CExpr, LaunchError> {
    Ok(match e {
        ScalarExpr::TileRead { tile, dx, dy } => CExpr::Read {
            tile: *tile,
            dx: *dx,
            dy: *dy,
        },
        ScalarExpr::Scalar(n) => {
            let v = scalars.get(n).ok_or_else(|| LaunchError::MissingScalar(n.clone()))?;
            CExpr::Const(p.round(*v))
        }
        ScalarExpr::Lit(v) => CExpr::Const(p.round(*v)),
        ScalarExpr::Bin(op, a, b) => CExpr::Bin(*op, Box::new(compile(a, p, scalars)?), Box::new(compile(b, p, scalars)?)),
        ScalarExpr::Neg(a) => CExpr::Neg(Box::new(compile(a, p, scalars)?)),
        ScalarExpr::Intrinsic(n, args) => CExpr::Intrinsic(
            n.clone(),
            args.iter().map(|a| compile(a, p, scalars)).collect::<Result<_, _>>()?,
        ),
    })
}

struct Tiles<'a> {
    extents: &'a [Extent],
    data: Vec<Vec<f64>>,
}

impl Tiles<'_> {
    fn eval(&self, e: &CExpr, p: Precision, x: usize, y: usize) -> Option<f64> {
        Some(match e {
            CExpr::Read { tile, dx, dy } => {
                let ext = self.extents[*tile];
                let (rx, ry) = (x + dx, y + dy);
                if rx >= ext.nx || ry >= ext.ny {
                    return None;
                }
                self.data[*tile][rx + ry * ext.nx]
            }
            CExpr::Const(v) => *v,
            CExpr::Bin(op, a, b) => {
                let a = self.eval(a, p, x, y)?;
                let b = self.eval(b, p, x, y)?;
                apply_bin(p, *op, a, b)
            }
            CExpr::Neg(a) => apply_neg(self.eval(a, p, x, y)?),
            CExpr::Intrinsic(n, args) => {
                let mut v = Vec::with_capacity(args.len());
                for a in args {
                    v.push(self.eval(a, p, x, y)?);
                }
                apply_intrinsic(p, n, &v)
            }
        })
    }

    /// Coordinates of the first read in `e` that leaves its tile.
    fn bad_read(&self, e: &CExpr, x: usize, y: usize) -> (usize, usize, usize) {
        let mut found = None;
        fn go(t: &Tiles, e: &CExpr, x: usize, y: usize, found: &mut Option<(usize, usize, usize)>) {
            match e {
                CExpr::Read { tile, dx, dy } => {
                    let ext = t.extents[*tile];
                    if found.is_none() && (x + dx >= ext.nx || y + dy >= ext.ny) {
                        *found = Some((*tile, x + dx, y + dy));
                    }
                }
                CExpr::Bin(_, a, b) => {
                    go(t, a, x, y, found);
                    go(t, b, x, y, found);
                }
                CExpr::Neg(a) => go(t, a, x, y, found),
                CExpr::Intrinsic(_, args) => args.iter().for_each(|a| go(t, a, x, y, found)),
                CExpr::Const(_) => {}
            }
        }
        go(self, e, x, y, &mut found);
        found.expect("a failing read exists")
    }
}

enum CPhase {
    Load { tile: usize, source: usize },
    Compute { tile: usize, expr: CExpr },
    Barrier,
    Write { out: usize, expr: CExpr, shift: (i64, i64) },
}

struct Prepared<'a> {
    ir: &'a KernelIR,
    cfg: LaunchConfig,
    full: Extent,
    inputs: Vec<Field>,
    phases: Vec<CPhase>,
    extents: Vec<Extent>,
    covers: Vec<Vec<Vec<(usize, usize)>>>,
}

type GroupWrites = Vec<(usize, usize, f64)>;

impl Prepared<'_> {
    fn run_group(&self, gid: (usize, usize), rng: Option<&mut ChaCha8Rng>) -> Result<GroupWrites, LaunchError> {
        let group = self.cfg.group;
        let (ox, oy) = (gid.0 * group.nx, gid.1 * group.ny);
        let halo = self.ir.output_halo();
        let mut tiles = Tiles {
            extents: &self.extents,
            data: self.extents.iter().map(|e| vec![0.0; e.cells()]).collect(),
        };
        let mut order: Vec<usize> = (0..group.cells()).collect();
        let mut rng = rng;
        let mut global = Vec::new();

        for (k, phase) in self.phases.iter().enumerate() {
            if let Some(r) = rng.as_deref_mut() {
                order.shuffle(r);
            }
            let mut pending: Vec<(usize, f64)> = Vec::new();
            let target_tile = match phase {
                CPhase::Barrier => continue,
                CPhase::Load { tile, source } => {
                    let src = &self.inputs[*source];
                    let ext = self.extents[*tile];
                    for &t in &order {
                        for &(lx, ly) in &self.covers[*tile][t] {
                            let (x, y) = (ox + lx, oy + ly);
                            let v = if x < self.full.nx && y < self.full.ny {
                                src.get(x, y)
                            } else {
                                0.0
                            };
                            pending.push((lx + ly * ext.nx, v));
                        }
                    }
                    *tile
                }
                CPhase::Compute { tile, expr } => {
                    let ext = self.extents[*tile];
                    for &t in &order {
                        for &(lx, ly) in &self.covers[*tile][t] {
                            let v = self.eval_at(&tiles, expr, k, lx, ly)?;
                            pending.push((lx + ly * ext.nx, v));
                        }
                    }
                    *tile
                }
                CPhase::Write { out, expr, shift } => {
                    for &t in &order {
                        let (tx, ty) = group.coords(t);
                        let v = self.eval_at(&tiles, expr, k, tx, ty)?;
                        let x = (ox + tx + halo.left) as i64 + shift.0;
                        let y = (oy + ty + halo.down) as i64 + shift.1;
                        if !self.full.contains(x, y) {
                            return Err(LaunchError::GlobalWrite {
                                phase: k,
                                target: self.ir.global_out[*out].0.clone(),
                                x,
                                y,
                            });
                        }
                        global.push((*out, self.full.linear(x as usize, y as usize), v));
                    }
                    continue;
                }
            };
            let data = &mut tiles.data[target_tile];
            for (i, v) in pending {
                data[i] = v;
            }
        }
        Ok(global)
    }

    fn eval_at(&self, tiles: &Tiles, e: &CExpr, phase: usize, x: usize, y: usize) -> Result<f64, LaunchError> {
        tiles.eval(e, self.cfg.precision, x, y).ok_or_else(|| {
            let (t, bx, by) = tiles.bad_read(e, x, y);
            LaunchError::TileRead {
                phase,
                tile: self.ir.local_tiles[t].name.clone(),
                x: bx,
                y: by,
            }
        })
    }
}

fn prepare<'a>(ir: &'a KernelIR, env: &Env, cfg: LaunchConfig) -> Result<Prepared<'a>, LaunchError> {
    cfg.check_divisible()?;
    if cfg.group != ir.group {
        return Err(LaunchError::GroupMismatch {
            ir: ir.group,
            cfg: cfg.group,
        });
    }
    let full = cfg.interior.grow(ir.output_halo());
    let p = cfg.precision;

    let mut input_index = BTreeMap::new();
    let mut inputs = Vec::new();
    for name in &ir.global_in {
        let f = env.arrays.get(name).ok_or_else(|| LaunchError::MissingArray(name.clone()))?;
        if f.full != full {
            return Err(LaunchError::ExtentMismatch {
                name: name.clone(),
                expected: full,
                found: f.full,
            });
        }
        input_index.insert(name.clone(), inputs.len());
        inputs.push(f.with_precision(p));
    }

    let out_index: HashMap<&str, usize> = ir.global_out.iter().enumerate().map(|(i, (n, _))| (n.as_str(), i)).collect();
    let mut phases = Vec::with_capacity(ir.phases.len());
    for ph in &ir.phases {
        phases.push(match ph {
            Phase::CooperativeLoad { tile, source } => CPhase::Load {
                tile: *tile,
                source: *input_index.get(source).ok_or_else(|| LaunchError::MissingArray(source.clone()))?,
            },
            Phase::CooperativeCompute { tile, expr } => CPhase::Compute {
                tile: *tile,
                expr: compile(expr, p, &env.scalars)?,
            },
            Phase::Barrier => CPhase::Barrier,
            Phase::OwnedWrite { target, expr, shift } => CPhase::Write {
                out: *out_index.get(target.as_str()).ok_or_else(|| LaunchError::MissingArray(target.clone()))?,
                expr: compile(expr, p, &env.scalars)?,
                shift: *shift,
            },
        });
    }
    for s in &ir.scalar_params {
        if !env.scalars.contains_key(s) {
            return Err(LaunchError::MissingScalar(s.clone()));
        }
    }

    let extents: Vec<Extent> = ir.local_tiles.iter().map(|t| t.extent).collect();
    let covers = extents.iter().map(|e| strided_cover(*e, cfg.group)).collect();
    Ok(Prepared {
        ir,
        cfg,
        full,
        inputs,
        phases,
        extents,
        covers,
    })
}

/// Runs `ir` over every work-group and returns fresh output fields. Cells
/// outside the written interior come from the output's entry in `env` if
/// present, else from the paired input, else zero.
pub fn launch(ir: &KernelIR, env: &Env, cfg: LaunchConfig) -> Result<BTreeMap<String, Field>, LaunchError> {
    let prep = prepare(ir, env, cfg)?;
    let (ngx, ngy) = cfg.group_counts();
    let mut groups: Vec<(usize, usize)> = (0..ngy).flat_map(|gy| (0..ngx).map(move |gx| (gx, gy))).collect();

    let results: Vec<GroupWrites> = match cfg.schedule {
        Schedule::Parallel => groups
            .par_iter()
            .map(|&g| prep.run_group(g, None))
            .collect::<Result<_, _>>()?,
        Schedule::Sequential => groups
            .iter()
            .map(|&g| prep.run_group(g, None))
            .collect::<Result<_, _>>()?,
        Schedule::Shuffled(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            groups.shuffle(&mut rng);
            groups
                .iter()
                .map(|&g| prep.run_group(g, Some(&mut rng)))
                .collect::<Result<_, _>>()?
        }
    };

    let mut outputs: Vec<Field> = ir
        .global_out
        .iter()
        .zip(&ir.passthrough)
        .map(|((name, _), pass)| {
            let src = env.arrays.get(name).filter(|f| f.full == prep.full).or_else(|| {
                pass.as_ref().and_then(|n| env.arrays.get(n))
            });
            match src {
                Some(f) => f.with_precision(cfg.precision),
                None => Field::zeros(prep.full, cfg.precision),
            }
        })
        .collect();
    for writes in results {
        for (o, i, v) in writes {
            outputs[o].data[i] = v;
        }
    }
    Ok(ir.global_out.iter().map(|(n, _)| n.clone()).zip(outputs).collect())
}

/// Like [`launch`], but refuses to run an IR with hazards.
pub fn launch_checked(ir: &KernelIR, env: &Env, cfg: LaunchConfig) -> Result<BTreeMap<String, Field>, LaunchError> {
    cfg.check_divisible()?;
    let reports = check_hazards(ir, &cfg);
    if !reports.is_empty() {
        return Err(LaunchError::Hazards(reports));
    }
    launch(ir, env, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessOp {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessTarget {
    Tile(usize),
    /// Index into `global_out`.
    Global(usize),
}

/// One memory access of one thread of group `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Access {
    pub phase: usize,
    pub thread: usize,
    pub op: AccessOp,
    pub target: AccessTarget,
    pub coord: (i64, i64),
}

/// Every access of one work-group, in phase then thread order. Global
/// coordinates are full-array coordinates for group `(0, 0)`.
pub fn access_log(ir: &KernelIR) -> Vec<Access> {
    let group = ir.group;
    let halo = ir.output_halo();
    let out_index: HashMap<&str, usize> = ir.global_out.iter().enumerate().map(|(i, (n, _))| (n.as_str(), i)).collect();
    let mut log = Vec::new();
    for (k, phase) in ir.phases.iter().enumerate() {
        let mut push = |thread, op, target, x: i64, y: i64| {
            log.push(Access {
                phase: k,
                thread,
                op,
                target,
                coord: (x, y),
            })
        };
        match phase {
            Phase::Barrier => {}
            Phase::CooperativeLoad { tile, .. } => {
                for (t, cells) in strided_cover(ir.local_tiles[*tile].extent, group).iter().enumerate() {
                    for &(x, y) in cells {
                        push(t, AccessOp::Write, AccessTarget::Tile(*tile), x as i64, y as i64);
                    }
                }
            }
            Phase::CooperativeCompute { tile, expr } => {
                let reads = expr.reads();
                for (t, cells) in strided_cover(ir.local_tiles[*tile].extent, group).iter().enumerate() {
                    for &(x, y) in cells {
                        for &(rt, dx, dy) in &reads {
                            push(t, AccessOp::Read, AccessTarget::Tile(rt), (x + dx) as i64, (y + dy) as i64);
                        }
                        push(t, AccessOp::Write, AccessTarget::Tile(*tile), x as i64, y as i64);
                    }
                }
            }
            Phase::OwnedWrite { target, expr, shift } => {
                let reads = expr.reads();
                let out = out_index.get(target.as_str()).copied().unwrap_or(usize::MAX);
                for t in 0..group.cells() {
                    let (x, y) = group.coords(t);
                    for &(rt, dx, dy) in &reads {
                        push(t, AccessOp::Read, AccessTarget::Tile(rt), (x + dx) as i64, (y + dy) as i64);
                    }
                    let gx = (x + halo.left) as i64 + shift.0;
                    let gy = (y + halo.down) as i64 + shift.1;
                    push(t, AccessOp::Write, AccessTarget::Global(out), gx, gy);
                }
            }
        }
    }
    log
}

/// Text trace of [`access_log`], one `phase thread op target (x,y)` per line.
pub fn trace(ir: &KernelIR) -> String {
    let mut s = String::from("# ofpc trace v1: phase thread op target (x,y)\n");
    for a in access_log(ir) {
        let op = match a.op {
            AccessOp::Read => "read",
            AccessOp::Write => "write",
        };
        s.push_str(&format!(
            "{} {} {op} {} ({},{})\n",
            a.phase,
            a.thread,
            target_name(ir, a.target),
            a.coord.0,
            a.coord.1
        ));
    }
    s
}

fn target_name(ir: &KernelIR, t: AccessTarget) -> String {
    match t {
        AccessTarget::Tile(i) => format!("{}_local", ir.local_tiles[i].name),
        AccessTarget::Global(i) => ir.global_out.get(i).map(|(n, _)| n.clone()).unwrap_or_else(|| "?".into()),
    }
}

/// Replays one group's accesses and reports races and stray writes. At most
/// one report is kept per (kind, phase, target).
pub fn check_hazards(ir: &KernelIR, _cfg: &LaunchConfig) -> Vec<HazardReport> {
    let log = access_log(ir);
    let halo = ir.output_halo();
    let group = ir.group;

    // last unsynchronized writer per tile cell: (phase, thread)
    let mut unsynced: HashMap<(usize, i64, i64), (usize, usize)> = HashMap::new();
    let mut global_writers: HashMap<(usize, i64, i64), usize> = HashMap::new();
    let mut reports: Vec<HazardReport> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut report = |r: HazardReport| {
        if seen.insert((r.kind, r.phase, r.target.clone())) {
            reports.push(r);
        }
    };

    let mut start = 0;
    for (k, phase) in ir.phases.iter().enumerate() {
        if matches!(phase, Phase::Barrier) {
            unsynced.clear();
            continue;
        }
        let end = start + log[start..].iter().take_while(|a| a.phase == k).count();
        let accesses = &log[start..end];
        start = end;

        // writes of this phase become visible to racing reads in the same phase
        let mut phase_writes: HashMap<(usize, i64, i64), usize> = HashMap::new();
        for a in accesses.iter().filter(|a| a.op == AccessOp::Write) {
            match a.target {
                AccessTarget::Tile(t) => {
                    let key = (t, a.coord.0, a.coord.1);
                    let prev = phase_writes.insert(key, a.thread).or(unsynced.get(&key).map(|w| w.1));
                    if let Some(w) = prev.filter(|&w| w != a.thread) {
                        report(HazardReport {
                            kind: HazardKind::WriteWrite,
                            phase: k,
                            target: target_name(ir, a.target),
                            coord: a.coord,
                            threads: vec![w, a.thread],
                        });
                    }
                }
                AccessTarget::Global(o) => {
                    let (tx, ty) = group.coords(a.thread);
                    let owned = ((tx + halo.left) as i64, (ty + halo.down) as i64);
                    if a.coord != owned {
                        report(HazardReport {
                            kind: HazardKind::OutOfOwnedWrite,
                            phase: k,
                            target: target_name(ir, a.target),
                            coord: a.coord,
                            threads: vec![a.thread],
                        });
                    }
                    if let Some(w) = global_writers.insert((o, a.coord.0, a.coord.1), a.thread) {
                        if w != a.thread {
                            report(HazardReport {
                                kind: HazardKind::WriteWrite,
                                phase: k,
                                target: target_name(ir, a.target),
                                coord: a.coord,
                                threads: vec![w, a.thread],
                            });
                        }
                    }
                }
            }
        }
        for a in accesses.iter().filter(|a| a.op == AccessOp::Read) {
            let AccessTarget::Tile(t) = a.target else { continue };
            let key = (t, a.coord.0, a.coord.1);
            let writer = phase_writes.get(&key).copied().or(unsynced.get(&key).map(|w| w.1));
            if let Some(w) = writer.filter(|&w| w != a.thread) {
                report(HazardReport {
                    kind: HazardKind::ReadBeforeWriteWithoutBarrier,
                    phase: k,
                    target: target_name(ir, a.target),
                    coord: a.coord,
                    threads: vec![w, a.thread],
                });
            }
        }
        for (key, w) in phase_writes {
            unsynced.insert(key, (k, w));
        }
    }
    reports
}
