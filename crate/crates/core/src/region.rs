//! Halo and region index arithmetic.
//!
//! Every other module (sema, the reference interpreter, codegen, the
//! simulator) goes through these functions when it needs to relate a region
//! of an array to its full extent, or a work-group's local tile to global
//! memory.
//!
//! Conventions: `x` indexes columns (left/right), `y` indexes rows
//! (down/up). All coordinates are zero-based and arrays are stored
//! row-major, so the linear index of `(x, y)` is `x + y * nx`.

use std::fmt;

use thiserror::Error;

/// Ghost-cell margins `[left, right, down, up]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Halo {
    pub left: usize,
    pub right: usize,
    pub down: usize,
    pub up: usize,
}

impl Halo {
    pub const ZERO: Halo = Halo::new(0, 0, 0, 0);

    pub const fn new(left: usize, right: usize, down: usize, up: usize) -> Self {
        Halo {
            left,
            right,
            down,
            up,
        }
    }

    /// Builds a halo from the `[left, right, down, up]` order used in source.
    pub fn from_array(v: [usize; 4]) -> Self {
        Halo::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [usize; 4] {
        [self.left, self.right, self.down, self.up]
    }

    /// Total margin along x (`left + right`).
    pub fn width(self) -> usize {
        self.left + self.right
    }

    /// Total margin along y (`down + up`).
    pub fn height(self) -> usize {
        self.down + self.up
    }

    /// Componentwise maximum.
    pub fn max(self, other: Halo) -> Halo {
        Halo::new(
            self.left.max(other.left),
            self.right.max(other.right),
            self.down.max(other.down),
            self.up.max(other.up),
        )
    }
}

impl fmt::Display for Halo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{},{},{}]", self.left, self.right, self.down, self.up)
    }
}

/// A two-dimensional size in cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Extent {
    pub nx: usize,
    pub ny: usize,
}

impl Extent {
    pub const fn new(nx: usize, ny: usize) -> Self {
        Extent { nx, ny }
    }

    pub fn cells(self) -> usize {
        self.nx * self.ny
    }

    pub fn is_valid(self) -> bool {
        self.nx >= 1 && self.ny >= 1
    }

    /// Grows the extent by a halo on every side.
    pub fn grow(self, halo: Halo) -> Extent {
        Extent::new(self.nx + halo.width(), self.ny + halo.height())
    }

    /// Row-major linear index of `(x, y)`.
    pub fn linear(self, x: usize, y: usize) -> usize {
        x + y * self.nx
    }

    /// Inverse of [`Extent::linear`].
    pub fn coords(self, i: usize) -> (usize, usize) {
        (i % self.nx, i / self.nx)
    }

    pub fn contains(self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.nx && (y as usize) < self.ny
    }
}

impl fmt::Display for Extent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.nx, self.ny)
    }
}

/// An axis-aligned sub-rectangle of an array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub nx: usize,
    pub ny: usize,
}

impl Rect {
    pub fn extent(self) -> Extent {
        Extent::new(self.nx, self.ny)
    }

    pub fn contains(self, x: usize, y: usize) -> bool {
        x >= self.x0 && y >= self.y0 && x < self.x0 + self.nx && y < self.y0 + self.ny
    }

    /// Iterates the cells of the rectangle in row-major order.
    pub fn cells(self) -> impl Iterator<Item = (usize, usize)> {
        (self.y0..self.y0 + self.ny).flat_map(move |y| (self.x0..self.x0 + self.nx).map(move |x| (x, y)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegionError {
    #[error("halo {halo} does not fit inside an array of extent {full}")]
    HaloTooLarge { full: Extent, halo: Halo },
}

/// The interior of `full` left over once `halo` is stripped from each side.
pub fn interior_of(full: Extent, halo: Halo) -> Result<Rect, RegionError> {
    if full.nx <= halo.width() || full.ny <= halo.height() {
        return Err(RegionError::HaloTooLarge { full, halo });
    }
    Ok(Rect {
        x0: halo.left,
        y0: halo.down,
        nx: full.nx - halo.width(),
        ny: full.ny - halo.height(),
    })
}

/// Size of a work-group's local copy of an array read with `halo`.
pub fn local_tile_extent(group: Extent, halo: Halo) -> Extent {
    group.grow(halo)
}

/// Linear index into a local tile: `lx + ly * (group_nx + left + right)`.
pub fn local_linear_index(lx: usize, ly: usize, group_nx: usize, halo: Halo) -> usize {
    lx + ly * (group_nx + halo.left + halo.right)
}

/// Maps local tile cell `local` of work-group `group_id` to full-array
/// coordinates. The tile origin sits on the group's origin in the full
/// array, so for the first group it lands on the global halo corner and for
/// the others on cells owned by a neighbouring group.
pub fn global_coord(group_id: (usize, usize), local: (usize, usize), group: Extent) -> (usize, usize) {
    (group_id.0 * group.nx + local.0, group_id.1 * group.ny + local.1)
}
