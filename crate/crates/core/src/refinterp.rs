//! Reference interpreter with whole-array copy semantics.
//!
//! Every right-hand side is evaluated to a fresh array before it is stored,
//! and expressions are evaluated exactly in parsed-tree order. The work-group
//! simulator shares the scalar arithmetic in this module so that both agree
//! bit for bit.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use thiserror::Error;

use crate::frontend::ast::*;
use crate::frontend::REGION_CPY;
use crate::region::{interior_of, Extent, Halo, Rect, RegionError};
use crate::sema::CheckedProgram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    /// Rounds an f64 to the storage precision.
    #[inline]
    pub fn round(self, x: f64) -> f64 {
        match self {
            Precision::F64 => x,
            Precision::F32 => x as f32 as f64,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "f32" | "float" => Ok(Precision::F32),
            "f64" | "double" => Ok(Precision::F64),
            other => Err(format!("unknown precision `{other}` (expected f32 or f64)")),
        }
    }
}

/// One arithmetic operation, rounded to `p`.
#[inline]
pub fn apply_bin(p: Precision, op: BinOp, a: f64, b: f64) -> f64 {
    let r = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
    };
    p.round(r)
}

#[inline]
pub fn apply_neg(a: f64) -> f64 {
    -a
}

/// Whitelisted intrinsic applied to already-rounded arguments.
/// `min`/`max` fold left to right.
pub fn apply_intrinsic(p: Precision, name: &str, args: &[f64]) -> f64 {
    let r = match name {
        "sqrt" => args[0].sqrt(),
        "abs" => args[0].abs(),
        "exp" => args[0].exp(),
        "min" => args[1..].iter().fold(args[0], |a, &b| a.min(b)),
        "max" => args[1..].iter().fold(args[0], |a, &b| a.max(b)),
        _ => panic!("unknown intrinsic `{name}`"),
    };
    p.round(r)
}

/// A row-major 2-D array of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub full: Extent,
    pub data: Vec<f64>,
    pub precision: Precision,
}

impl Field {
    pub fn zeros(full: Extent, precision: Precision) -> Field {
        Field {
            full,
            data: vec![0.0; full.cells()],
            precision,
        }
    }

    /// Builds a field from `f(x, y)`, rounding to `precision`.
    pub fn from_fn(full: Extent, precision: Precision, mut f: impl FnMut(usize, usize) -> f64) -> Field {
        let mut data = Vec::with_capacity(full.cells());
        for y in 0..full.ny {
            for x in 0..full.nx {
                data.push(precision.round(f(x, y)));
            }
        }
        Field { full, data, precision }
    }

    pub fn from_data(full: Extent, data: Vec<f64>, precision: Precision) -> Result<Field, InterpError> {
        if data.len() != full.cells() {
            return Err(InterpError::DataLength {
                extent: full,
                len: data.len(),
            });
        }
        let data = data.into_iter().map(|v| precision.round(v)).collect();
        Ok(Field { full, data, precision })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[self.full.linear(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        let i = self.full.linear(x, y);
        self.data[i] = v;
    }

    /// Same values, rounded to another precision.
    pub fn with_precision(&self, precision: Precision) -> Field {
        Field {
            full: self.full,
            data: self.data.iter().map(|&v| precision.round(v)).collect(),
            precision,
        }
    }

    /// Copy of the cells inside `rect`.
    pub fn sub(&self, rect: Rect) -> Field {
        Field::from_fn(rect.extent(), self.precision, |x, y| self.get(rect.x0 + x, rect.y0 + y))
    }

    /// Copy of the interior of `halo`.
    pub fn interior(&self, halo: Halo) -> Result<Field, RegionError> {
        Ok(self.sub(interior_of(self.full, halo)?))
    }

    pub fn has_nonfinite(&self) -> bool {
        self.data.iter().any(|v| !v.is_finite())
    }

    /// Hash of the exact bit patterns, used to detect mutation.
    pub fn bit_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.full.nx.hash(&mut h);
        self.full.ny.hash(&mut h);
        for v in &self.data {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn bit_eq(&self, other: &Field) -> bool {
        self.full == other.full
            && self.data.len() == other.data.len()
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpError {
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error("data of length {len} does not fill a {extent} field")]
    DataLength { extent: Extent, len: usize },
    #[error("missing input array `{0}`")]
    MissingArray(String),
    #[error("missing scalar parameter `{0}`")]
    MissingScalar(String),
    #[error("array `{name}` has extent {found}, expected {expected}")]
    ExtentMismatch { name: String, expected: Extent, found: Extent },
    #[error("line {line}: shape mismatch, {left} vs {right}")]
    ShapeMismatch { line: usize, left: Extent, right: Extent },
}

/// Named arrays and scalars passed to a kernel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Env {
    pub arrays: BTreeMap<String, Field>,
    pub scalars: BTreeMap<String, f64>,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn with_array(mut self, name: &str, f: Field) -> Env {
        self.arrays.insert(name.to_ascii_lowercase(), f);
        self
    }

    pub fn with_scalar(mut self, name: &str, v: f64) -> Env {
        self.scalars.insert(name.to_ascii_lowercase(), v);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutput {
    pub outputs: BTreeMap<String, Field>,
    /// Set when any output holds NaN or an infinity.
    pub nonfinite: bool,
}

/// Initial content of each output array: the paired input (i-th output with
/// i-th input) or zeros. An output array already present in the env wins.
pub fn initial_outputs(
    program: &KernelProgram,
    arrays: &BTreeMap<String, Field>,
    full: Extent,
    precision: Precision,
) -> BTreeMap<String, Field> {
    let inputs: Vec<_> = program.input_arrays().collect();
    program
        .output_arrays()
        .enumerate()
        .map(|(i, o)| {
            let f = match arrays.get(&o.name) {
                Some(f) => f.with_precision(precision),
                None => match inputs.get(i).and_then(|p| arrays.get(&p.name)) {
                    Some(src) => src.with_precision(precision),
                    None => Field::zeros(full, precision),
                },
            };
            (o.name.clone(), f)
        })
        .collect()
}

/// Common full extent of the kernel's input arrays, checked for agreement.
pub fn common_extent(program: &KernelProgram, env: &Env) -> Result<Extent, InterpError> {
    let mut full = None;
    for p in program.input_arrays() {
        let f = env.arrays.get(&p.name).ok_or_else(|| InterpError::MissingArray(p.name.clone()))?;
        match full {
            None => full = Some(f.full),
            Some(e) if e != f.full => {
                return Err(InterpError::ExtentMismatch {
                    name: p.name.clone(),
                    expected: e,
                    found: f.full,
                })
            }
            _ => {}
        }
    }
    if let Some(e) = full {
        for o in program.output_arrays() {
            if let Some(f) = env.arrays.get(&o.name) {
                if f.full != e {
                    return Err(InterpError::ExtentMismatch {
                        name: o.name.clone(),
                        expected: e,
                        found: f.full,
                    });
                }
            }
        }
    }
    full.or_else(|| program.output_arrays().find_map(|o| env.arrays.get(&o.name).map(|f| f.full)))
        .ok_or_else(|| InterpError::MissingArray("<any array>".into()))
}

/// Fresh copy of the interior of `halo`.
pub fn region_cpy_ref(a: &Field, halo: Halo) -> Result<Field, InterpError> {
    Ok(a.interior(halo)?)
}

/// Circular shift: `result(x, y) = a((x + offset) mod nx, y)` for `dim = 1`,
/// and along y for `dim = 2`.
pub fn cshift_ref(a: &Field, dim: u8, offset: i64) -> Field {
    let (nx, ny) = (a.full.nx as i64, a.full.ny as i64);
    Field::from_fn(a.full, a.precision, |x, y| {
        let (x, y) = (x as i64, y as i64);
        let (sx, sy) = if dim == 1 {
            ((x + offset).rem_euclid(nx), y)
        } else {
            (x, (y + offset).rem_euclid(ny))
        };
        a.get(sx as usize, sy as usize)
    })
}

#[derive(Debug, Clone)]
enum Val {
    Scalar(f64),
    Array(Field),
}

struct Interp<'a> {
    cp: &'a CheckedProgram,
    precision: Precision,
    arrays: &'a BTreeMap<String, Field>,
    scalars: BTreeMap<String, f64>,
    locals: BTreeMap<String, Field>,
    stmt: usize,
    line: usize,
}

/// Runs a checked kernel and returns its intent(out) arrays.
pub fn eval_kernel(cp: &CheckedProgram, env: &Env, precision: Precision) -> Result<EvalOutput, InterpError> {
    let program = &cp.program;
    let full = common_extent(program, env)?;

    let arrays: BTreeMap<String, Field> = program
        .input_arrays()
        .map(|p| (p.name.clone(), env.arrays[&p.name].with_precision(precision)))
        .collect();
    let mut scalars = BTreeMap::new();
    for p in program.scalar_params() {
        let v = env.scalars.get(&p.name).ok_or_else(|| InterpError::MissingScalar(p.name.clone()))?;
        scalars.insert(p.name.clone(), precision.round(*v));
    }
    let mut outputs = initial_outputs(program, &env.arrays, full, precision);

    let mut it = Interp {
        cp,
        precision,
        arrays: &arrays,
        scalars,
        locals: BTreeMap::new(),
        stmt: 0,
        line: 0,
    };

    for (i, st) in program.body.iter().enumerate() {
        it.stmt = i;
        it.line = st.line;
        let StmtKind::Assign { lhs, rhs } = &st.kind else {
            continue;
        };
        let value = it.eval(rhs)?;
        if let Some((target, halo)) = cp.output_bindings.get(lhs) {
            let out = outputs.get_mut(target).expect("bound output exists");
            let rect = interior_of(out.full, *halo)?;
            store(out, rect, value, st.line)?;
        } else {
            let f = match value {
                Val::Array(f) => f,
                Val::Scalar(_) => unreachable!("sema rejects scalar values for allocatable locals"),
            };
            it.locals.insert(lhs.clone(), f);
        }
    }

    let nonfinite = outputs.values().any(Field::has_nonfinite);
    Ok(EvalOutput { outputs, nonfinite })
}

fn store(out: &mut Field, rect: Rect, value: Val, line: usize) -> Result<(), InterpError> {
    match value {
        Val::Scalar(v) => {
            for (x, y) in rect.cells() {
                out.set(x, y, v);
            }
        }
        Val::Array(f) => {
            if f.full != rect.extent() {
                return Err(InterpError::ShapeMismatch {
                    line,
                    left: rect.extent(),
                    right: f.full,
                });
            }
            for y in 0..rect.ny {
                for x in 0..rect.nx {
                    out.set(rect.x0 + x, rect.y0 + y, f.get(x, y));
                }
            }
        }
    }
    Ok(())
}

impl Interp<'_> {
    fn array(&self, name: &str) -> &Field {
        self.locals
            .get(name)
            .or_else(|| self.arrays.get(name))
            .expect("sema guarantees the array is readable")
    }

    fn eval(&self, e: &Expr) -> Result<Val, InterpError> {
        let p = self.precision;
        Ok(match e {
            Expr::Num(v) => Val::Scalar(p.round(*v)),
            Expr::Ref(n) => match self.scalars.get(n) {
                Some(v) => Val::Scalar(*v),
                None => Val::Array(self.array(n).clone()),
            },
            Expr::Paren(inner) => self.eval(inner)?,
            Expr::Neg(inner) => self.map(vec![self.eval(inner)?], |a| apply_neg(a[0]))?,
            Expr::Binary(op, l, r) => {
                let a = self.eval(l)?;
                let b = self.eval(r)?;
                self.map(vec![a, b], |v| apply_bin(p, *op, v[0], v[1]))?
            }
            Expr::Call(name, args) if name == REGION_CPY => {
                let Expr::Ref(src) = &args[0] else {
                    unreachable!("sema checks region_cpy arguments")
                };
                let halo = self.cp.halo_expr(self.stmt, &args[1]);
                Val::Array(region_cpy_ref(self.array(src), halo)?)
            }
            Expr::Call(name, args) => {
                let vals = args.iter().map(|a| self.eval(a)).collect::<Result<Vec<_>, _>>()?;
                if let Some(f) = self.cp.program.elemental(name) {
                    self.map(vals, |v| eval_elemental(p, f, v))?
                } else {
                    self.map(vals, |v| apply_intrinsic(p, name, v))?
                }
            }
            Expr::HaloLit(_) => unreachable!("sema rejects halo values"),
        })
    }

    /// Applies `f` pointwise, broadcasting scalars.
    fn map(&self, vals: Vec<Val>, f: impl Fn(&[f64]) -> f64) -> Result<Val, InterpError> {
        let mut shape: Option<&Field> = None;
        for v in &vals {
            if let Val::Array(a) = v {
                match shape {
                    None => shape = Some(a),
                    Some(s) if s.full != a.full => {
                        return Err(InterpError::ShapeMismatch {
                            line: self.line,
                            left: s.full,
                            right: a.full,
                        })
                    }
                    _ => {}
                }
            }
        }
        let mut buf = vec![0.0; vals.len()];
        let Some(shape) = shape else {
            for (b, v) in buf.iter_mut().zip(&vals) {
                if let Val::Scalar(s) = v {
                    *b = *s;
                }
            }
            return Ok(Val::Scalar(f(&buf)));
        };
        let mut out = Field::zeros(shape.full, self.precision);
        for i in 0..out.data.len() {
            for (b, v) in buf.iter_mut().zip(&vals) {
                *b = match v {
                    Val::Scalar(s) => *s,
                    Val::Array(a) => a.data[i],
                };
            }
            out.data[i] = f(&buf);
        }
        Ok(Val::Array(out))
    }
}

/// Evaluates an elemental body on scalar arguments.
pub fn eval_elemental(p: Precision, f: &ElementalFn, args: &[f64]) -> f64 {
    fn go(p: Precision, f: &ElementalFn, args: &[f64], e: &Expr) -> f64 {
        match e {
            Expr::Num(v) => p.round(*v),
            Expr::Ref(n) => {
                let i = f.params.iter().position(|q| &q.name == n).expect("sema checks elemental refs");
                args[i]
            }
            Expr::Paren(inner) => go(p, f, args, inner),
            Expr::Neg(inner) => apply_neg(go(p, f, args, inner)),
            Expr::Binary(op, l, r) => {
                let a = go(p, f, args, l);
                let b = go(p, f, args, r);
                apply_bin(p, *op, a, b)
            }
            Expr::Call(name, cargs) => {
                let v: Vec<f64> = cargs.iter().map(|a| go(p, f, args, a)).collect();
                apply_intrinsic(p, name, &v)
            }
            Expr::HaloLit(_) => unreachable!("sema rejects halo lists in elementals"),
        }
    }
    go(p, f, args, &f.body)
}
