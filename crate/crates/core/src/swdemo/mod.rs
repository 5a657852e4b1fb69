//! Shallow-water demo: two-step Lax-Wendroff on a grid with a one-cell halo.
//!
//! State arrays are `H = h`, `U = hu`, `V = hv`. The kernel engines run the
//! shipped DSL source; [`step_native`] is a plain-loop implementation of the
//! same scheme used as an independent oracle.

mod io;

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::codegen::{lower, KernelIR, LoweringError};
use crate::frontend::{parse_source, FrontendError};
use crate::refinterp::{eval_kernel, Env, Field, InterpError, Precision};
use crate::region::{Extent, Halo};
use crate::sema::{analyze, CheckedProgram, Diagnostic};
use crate::sim::{launch, LaunchConfig, LaunchError};

pub use io::{
    parse_config, parse_extent, read_field_csv, write_diagnostics_csv, write_field_csv, ConfigError, FieldCsv,
};

/// DSL source of the `wave_advance` kernel.
pub const WAVE_ADVANCE_SOURCE: &str = include_str!("../../dsl/wave_advance.fk");

pub const HALO: Halo = Halo {
    left: 1,
    right: 1,
    down: 1,
    up: 1,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Reflective,
    Periodic,
}

impl std::str::FromStr for Boundary {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reflective" => Ok(Boundary::Reflective),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(format!("unknown boundary `{other}` (expected reflective or periodic)")),
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Reflective => "reflective",
            Boundary::Periodic => "periodic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Native,
    Ref,
    Sim,
}

impl std::str::FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "native" => Ok(Engine::Native),
            "ref" | "refinterp" => Ok(Engine::Ref),
            "sim" => Ok(Engine::Sim),
            other => Err(format!("unknown engine `{other}` (expected native, ref or sim)")),
        }
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Engine::Native => "native",
            Engine::Ref => "ref",
            Engine::Sim => "sim",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SWConfig {
    pub interior: Extent,
    pub dx: f64,
    pub dy: f64,
    pub g: f64,
    pub cfl_factor: f64,
    pub steps: usize,
    pub boundary: Boundary,
    /// Hump center in physical coordinates; cell `i` is centered at `(i + 0.5) * dx`.
    pub center: (f64, f64),
    pub amplitude: f64,
    pub width: f64,
    pub base: f64,
    pub precision: Precision,
    pub group: Extent,
}

impl Default for SWConfig {
    /// The standard 64x64 periodic case.
    fn default() -> Self {
        SWConfig {
            interior: Extent::new(64, 64),
            dx: 1.0,
            dy: 1.0,
            g: 9.8,
            // the unsplit two-step scheme drifts unstable above ~0.5 over
            // long runs, since x and y Courant numbers add
            cfl_factor: 0.5,
            steps: 100,
            boundary: Boundary::Periodic,
            center: (32.0, 32.0),
            amplitude: 0.1,
            width: 6.0,
            base: 1.0,
            precision: Precision::F64,
            group: Extent::new(16, 8),
        }
    }
}

impl SWConfig {
    pub fn validate(&self) -> Result<(), SwError> {
        let bad = |m: &str| Err(SwError::Config(m.to_string()));
        if self.interior.nx == 0 || self.interior.ny == 0 {
            return bad("interior must be at least 1x1");
        }
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= 1.0) {
            return bad("cfl_factor must be in (0, 1]");
        }
        if !(self.dx > 0.0 && self.dy > 0.0) {
            return bad("dx and dy must be positive");
        }
        if self.g.is_nan() || self.g <= 0.0 {
            return bad("g must be positive");
        }
        if self.width.is_nan() || self.width <= 0.0 {
            return bad("width must be positive");
        }
        if self.group.nx == 0 || self.group.ny == 0 {
            return bad("group must be at least 1x1");
        }
        Ok(())
    }

    pub fn full(&self) -> Extent {
        self.interior.grow(HALO)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SWState {
    pub h: Field,
    pub u: Field,
    pub v: Field,
    pub g: f64,
    pub dx: f64,
    pub dy: f64,
    pub t: f64,
}

impl SWState {
    pub fn interior(&self) -> Extent {
        Extent::new(self.h.full.nx - 2, self.h.full.ny - 2)
    }

    pub fn bit_eq(&self, other: &SWState) -> bool {
        self.h.bit_eq(&other.h) && self.u.bit_eq(&other.u) && self.v.bit_eq(&other.v)
    }
}

#[derive(Debug, Error)]
pub enum SwError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-positive depth {value} at ({x},{y})")]
    NonPositiveDepth { x: usize, y: usize, value: f64 },
    #[error("non-finite value after step {step}")]
    Nonfinite { step: usize },
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error("kernel source failed analysis:\n{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Sema(Vec<Diagnostic>),
    #[error(transparent)]
    Lowering(#[from] LoweringError),
    #[error(transparent)]
    Launch(#[from] LaunchError),
    #[error(transparent)]
    Interp(#[from] InterpError),
}

/// Gaussian hump at rest with halos filled.
pub fn init_state(cfg: &SWConfig) -> SWState {
    let full = cfg.full();
    let p = cfg.precision;
    let (cx, cy) = cfg.center;
    let h = Field::from_fn(full, p, |x, y| {
        if x == 0 || y == 0 || x > cfg.interior.nx || y > cfg.interior.ny {
            return 0.0;
        }
        let px = (x as f64 - 0.5) * cfg.dx;
        let py = (y as f64 - 0.5) * cfg.dy;
        let r2 = (px - cx) * (px - cx) + (py - cy) * (py - cy);
        cfg.base + cfg.amplitude * (-r2 / (cfg.width * cfg.width)).exp()
    });
    let mut s = SWState {
        h,
        u: Field::zeros(full, p),
        v: Field::zeros(full, p),
        g: cfg.g,
        dx: cfg.dx,
        dy: cfg.dy,
        t: 0.0,
    };
    apply_boundary(&mut s, cfg.boundary);
    s
}

/// Fills the one-cell halo: x walls first, then y walls (corners included).
pub fn apply_boundary(s: &mut SWState, mode: Boundary) {
    let Extent { nx, ny } = s.interior();
    for y in 1..=ny {
        for (halo_x, src_x) in [(0, 1), (nx + 1, nx)] {
            let src_x = match mode {
                Boundary::Reflective => src_x,
                Boundary::Periodic => {
                    if halo_x == 0 {
                        nx
                    } else {
                        1
                    }
                }
            };
            let sign = if mode == Boundary::Reflective { -1.0 } else { 1.0 };
            s.h.set(halo_x, y, s.h.get(src_x, y));
            s.u.set(halo_x, y, sign * s.u.get(src_x, y));
            s.v.set(halo_x, y, s.v.get(src_x, y));
        }
    }
    for x in 0..nx + 2 {
        for (halo_y, src_y) in [(0, 1), (ny + 1, ny)] {
            let src_y = match mode {
                Boundary::Reflective => src_y,
                Boundary::Periodic => {
                    if halo_y == 0 {
                        ny
                    } else {
                        1
                    }
                }
            };
            let sign = if mode == Boundary::Reflective { -1.0 } else { 1.0 };
            s.h.set(x, halo_y, s.h.get(x, src_y));
            s.u.set(x, halo_y, s.u.get(x, src_y));
            s.v.set(x, halo_y, sign * s.v.get(x, src_y));
        }
    }
}

/// CFL-limited time step.
pub fn stable_dt(s: &SWState, cfl_factor: f64) -> Result<f64, SwError> {
    let Extent { nx, ny } = s.interior();
    let d = s.dx.min(s.dy);
    let mut best = f64::INFINITY;
    for y in 1..=ny {
        for x in 1..=nx {
            let h = s.h.get(x, y);
            if h.is_nan() || h <= 0.0 {
                return Err(SwError::NonPositiveDepth { x, y, value: h });
            }
            let speed = (s.g * h).sqrt() + s.u.get(x, y).abs().max(s.v.get(x, y).abs()) / h;
            best = best.min(d / speed);
        }
    }
    Ok(cfl_factor * best)
}

/// Sum of interior depths times the cell area.
pub fn total_mass(s: &SWState) -> f64 {
    let Extent { nx, ny } = s.interior();
    let mut m = 0.0;
    for y in 1..=ny {
        for x in 1..=nx {
            m += s.h.get(x, y);
        }
    }
    m * s.dx * s.dy
}

fn max_abs_interior(f: &Field) -> f64 {
    let (nx, ny) = (f.full.nx - 2, f.full.ny - 2);
    let mut m: f64 = 0.0;
    for y in 1..=ny {
        for x in 1..=nx {
            m = m.max(f.get(x, y).abs());
        }
    }
    m
}

/// One step of the scheme written directly over the arrays. Halo cells of
/// the result are copied from `s`. Always computed in f64.
pub fn step_native(s: &SWState, dt: f64) -> Result<SWState, SwError> {
    let full = s.h.full;
    let (nx, ny) = (full.nx - 2, full.ny - 2);
    let g = s.g;
    let h = |x: usize, y: usize| s.h.get(x, y);
    let hu = |x: usize, y: usize| s.u.get(x, y);
    let hv = |x: usize, y: usize| s.v.get(x, y);
    let depth_ok = |x: usize, y: usize, v: f64| {
        if v > 0.0 {
            Ok(())
        } else {
            Err(SwError::NonPositiveDepth { x, y, value: v })
        }
    };
    for y in 0..full.ny {
        for x in 0..full.nx {
            depth_ok(x, y, h(x, y))?;
        }
    }

    // x faces: face i sits between full cells i and i+1, rows 1..=ny
    let fx = Extent::new(nx + 1, ny);
    let (mut hx, mut ux, mut vx) = (vec![0.0; fx.cells()], vec![0.0; fx.cells()], vec![0.0; fx.cells()]);
    let cx = dt / (2.0 * s.dx);
    for j in 0..ny {
        for i in 0..=nx {
            let (l, r, y) = (i, i + 1, j + 1);
            let k = i + j * fx.nx;
            hx[k] = 0.5 * (h(l, y) + h(r, y)) - cx * (hu(r, y) - hu(l, y));
            let fl = hu(l, y) * hu(l, y) / h(l, y) + 0.5 * g * h(l, y) * h(l, y);
            let fr = hu(r, y) * hu(r, y) / h(r, y) + 0.5 * g * h(r, y) * h(r, y);
            ux[k] = 0.5 * (hu(l, y) + hu(r, y)) - cx * (fr - fl);
            let cl = hu(l, y) * hv(l, y) / h(l, y);
            let cr = hu(r, y) * hv(r, y) / h(r, y);
            vx[k] = 0.5 * (hv(l, y) + hv(r, y)) - cx * (cr - cl);
            depth_ok(i, y, hx[k])?;
        }
    }

    // y faces: face j sits between full rows j and j+1, columns 1..=nx
    let fy = Extent::new(nx, ny + 1);
    let (mut hy, mut uy, mut vy) = (vec![0.0; fy.cells()], vec![0.0; fy.cells()], vec![0.0; fy.cells()]);
    let cy = dt / (2.0 * s.dy);
    for j in 0..=ny {
        for i in 0..nx {
            let (x, d, u) = (i + 1, j, j + 1);
            let k = i + j * fy.nx;
            hy[k] = 0.5 * (h(x, d) + h(x, u)) - cy * (hv(x, u) - hv(x, d));
            let cd = hu(x, d) * hv(x, d) / h(x, d);
            let cu = hu(x, u) * hv(x, u) / h(x, u);
            uy[k] = 0.5 * (hu(x, d) + hu(x, u)) - cy * (cu - cd);
            let gd = hv(x, d) * hv(x, d) / h(x, d) + 0.5 * g * h(x, d) * h(x, d);
            let gu = hv(x, u) * hv(x, u) / h(x, u) + 0.5 * g * h(x, u) * h(x, u);
            vy[k] = 0.5 * (hv(x, d) + hv(x, u)) - cy * (gu - gd);
            depth_ok(x, j, hy[k])?;
        }
    }

    let mut out = SWState {
        h: s.h.with_precision(Precision::F64),
        u: s.u.with_precision(Precision::F64),
        v: s.v.with_precision(Precision::F64),
        ..s.clone()
    };
    let (ax, ay) = (dt / s.dx, dt / s.dy);
    for y in 1..=ny {
        for x in 1..=nx {
            // cell x has x faces x-1 (left) and x (right), y faces y-1 (down) and y (up)
            let kl = (x - 1) + (y - 1) * fx.nx;
            let kr = x + (y - 1) * fx.nx;
            let kd = (x - 1) + (y - 1) * fy.nx;
            let ku = (x - 1) + y * fy.nx;

            let nh = h(x, y) - ax * (ux[kr] - ux[kl]) - ay * (vy[ku] - vy[kd]);

            let fxr = ux[kr] * ux[kr] / hx[kr] + 0.5 * g * hx[kr] * hx[kr];
            let fxl = ux[kl] * ux[kl] / hx[kl] + 0.5 * g * hx[kl] * hx[kl];
            let gyu = uy[ku] * vy[ku] / hy[ku];
            let gyd = uy[kd] * vy[kd] / hy[kd];
            let nhu = hu(x, y) - ax * (fxr - fxl) - ay * (gyu - gyd);

            let cxr = ux[kr] * vx[kr] / hx[kr];
            let cxl = ux[kl] * vx[kl] / hx[kl];
            let gvu = vy[ku] * vy[ku] / hy[ku] + 0.5 * g * hy[ku] * hy[ku];
            let gvd = vy[kd] * vy[kd] / hy[kd] + 0.5 * g * hy[kd] * hy[kd];
            let nhv = hv(x, y) - ax * (cxr - cxl) - ay * (gvu - gvd);

            out.h.set(x, y, nh);
            out.u.set(x, y, nhu);
            out.v.set(x, y, nhv);
        }
    }
    out.t = s.t + dt;
    Ok(out)
}

/// A compiled stepping engine.
pub enum Stepper {
    Native,
    Ref { cp: Box<CheckedProgram>, precision: Precision },
    Sim { ir: Box<KernelIR>, cfg: LaunchConfig },
}

/// Parses and checks the shipped kernel.
pub fn wave_advance_program() -> Result<CheckedProgram, SwError> {
    let module = parse_source(WAVE_ADVANCE_SOURCE)?;
    let k = module.kernel("wave_advance").expect("shipped source defines wave_advance");
    analyze(k).map_err(SwError::Sema)
}

impl Stepper {
    pub fn new(engine: Engine, cfg: &SWConfig) -> Result<Stepper, SwError> {
        Ok(match engine {
            Engine::Native => Stepper::Native,
            Engine::Ref => Stepper::Ref {
                cp: Box::new(wave_advance_program()?),
                precision: cfg.precision,
            },
            Engine::Sim => {
                let launch_cfg = LaunchConfig::new(cfg.interior, cfg.group, cfg.precision);
                launch_cfg.check_divisible()?;
                let ir = lower(&wave_advance_program()?, cfg.group)?;
                Stepper::Sim {
                    ir: Box::new(ir),
                    cfg: launch_cfg,
                }
            }
        })
    }

    /// Advances `s` by `dt`; halos of the result are those of `s`.
    pub fn step(&self, s: &SWState, dt: f64) -> Result<SWState, SwError> {
        let env = || {
            Env::new()
                .with_array("h", s.h.clone())
                .with_array("u", s.u.clone())
                .with_array("v", s.v.clone())
                .with_scalar("dx", s.dx)
                .with_scalar("dy", s.dy)
                .with_scalar("dt", dt)
                .with_scalar("g", s.g)
        };
        let mut out = match self {
            Stepper::Native => return step_native(s, dt),
            Stepper::Ref { cp, precision } => {
                let mut r = eval_kernel(cp, &env(), *precision)?.outputs;
                SWState {
                    h: r.remove("oh").expect("output oh"),
                    u: r.remove("ou").expect("output ou"),
                    v: r.remove("ov").expect("output ov"),
                    ..s.clone()
                }
            }
            Stepper::Sim { ir, cfg } => {
                let mut r = launch(ir, &env(), *cfg)?;
                SWState {
                    h: r.remove("oh").expect("output oh"),
                    u: r.remove("ou").expect("output ou"),
                    v: r.remove("ov").expect("output ov"),
                    ..s.clone()
                }
            }
        };
        out.t = s.t + dt;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagRow {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub max_hu: f64,
    pub max_hv: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub initial: SWState,
    pub state: SWState,
    /// Row 0 is the initial state; row `k` follows step `k`.
    pub diagnostics: Vec<DiagRow>,
    pub elapsed: Duration,
}

impl RunResult {
    pub fn mean_step_time(&self) -> Duration {
        let steps = self.diagnostics.len().saturating_sub(1).max(1) as u32;
        self.elapsed / steps
    }
}

fn diag(step: usize, dt: f64, s: &SWState) -> DiagRow {
    DiagRow {
        step,
        t: s.t,
        dt,
        mass: total_mass(s),
        max_hu: max_abs_interior(&s.u),
        max_hv: max_abs_interior(&s.v),
    }
}

/// Time-stepping driver shared by all engines: boundary, CFL step, advance,
/// swap buffers, record diagnostics.
pub fn run(cfg: &SWConfig, engine: Engine) -> Result<RunResult, SwError> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if engine == Engine::Native {
        cfg.precision = Precision::F64;
    }
    let stepper = Stepper::new(engine, &cfg)?;
    let initial = init_state(&cfg);
    let mut state = initial.clone();
    let mut diagnostics = vec![diag(0, 0.0, &state)];

    let start = Instant::now();
    for step in 1..=cfg.steps {
        apply_boundary(&mut state, cfg.boundary);
        let dt = stable_dt(&state, cfg.cfl_factor)?;
        let next = stepper.step(&state, dt)?;
        if next.h.has_nonfinite() || next.u.has_nonfinite() || next.v.has_nonfinite() {
            return Err(SwError::Nonfinite { step });
        }
        state = next;
        diagnostics.push(diag(step, dt, &state));
    }
    let elapsed = start.elapsed();
    apply_boundary(&mut state, cfg.boundary);
    Ok(RunResult {
        initial,
        state,
        diagnostics,
        elapsed,
    })
}

/// `max |a - b| / max |b|` over the interior.
pub fn relative_error(a: &Field, b: &Field, halo: Halo) -> f64 {
    let r = crate::region::interior_of(b.full, halo).expect("halo fits");
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for (x, y) in r.cells() {
        num = num.max((a.get(x, y) - b.get(x, y)).abs());
        den = den.max(b.get(x, y).abs());
    }
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Largest [`relative_error`] over the three state fields.
pub fn state_relative_error(a: &SWState, b: &SWState) -> f64 {
    relative_error(&a.h, &b.h, HALO)
        .max(relative_error(&a.u, &b.u, HALO))
        .max(relative_error(&a.v, &b.v, HALO))
}
