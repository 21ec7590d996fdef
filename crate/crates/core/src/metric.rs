//! Geometry of the product box space `[0,1]^state_dims x [0,1]^action_dims`
//! under the inf-norm metric, and the dyadic covering oracle used to refine it.
//!
//! Regions are dyadic cells. A cell at depth `d` is identified by one integer
//! index per coordinate, so its bounds `idx / 2^d` and `(idx + 1) / 2^d` are
//! exact in binary floating point. Cells are half-open on every coordinate,
//! except that a cell whose upper bound is `1.0` also contains `1.0`. Sibling
//! cells therefore partition their parent with no shared boundary points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deepest cell the oracle will produce. Dyadic bounds stay exact well past this.
pub const MAX_DEPTH: u32 = 50;

/// Upper bound on `state_dims + action_dims`; a split creates `2^dims` children.
pub const MAX_DIMS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceDescriptor {
    state_dims: usize,
    action_dims: usize,
    d_max: f64,
}

impl SpaceDescriptor {
    /// The unit box `[0,1]^(state_dims + action_dims)`. Its inf-norm diameter is 1.
    pub fn unit_box(state_dims: usize, action_dims: usize) -> Result<Self> {
        if state_dims == 0 || action_dims == 0 {
            return Err(Error::InvalidInput(format!(
                "state_dims and action_dims must be >= 1 (got {state_dims}, {action_dims})"
            )));
        }
        if state_dims + action_dims > MAX_DIMS {
            return Err(Error::InvalidInput(format!(
                "at most {MAX_DIMS} total dimensions are supported (got {})",
                state_dims + action_dims
            )));
        }
        Ok(SpaceDescriptor {
            state_dims,
            action_dims,
            d_max: 1.0,
        })
    }

    pub fn state_dims(&self) -> usize {
        self.state_dims
    }

    pub fn action_dims(&self) -> usize {
        self.action_dims
    }

    pub fn dims(&self) -> usize {
        self.state_dims + self.action_dims
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// Number of children produced by one split.
    pub fn branching(&self) -> usize {
        1 << self.dims()
    }

    pub fn root(&self) -> BoxRegion {
        BoxRegion::from_index(self, 0, vec![0; self.dims()])
    }

    pub fn check_state(&self, x: &[f64]) -> Result<()> {
        check_coords(x, self.state_dims)
    }

    pub fn check_action(&self, a: &[f64]) -> Result<()> {
        check_coords(a, self.action_dims)
    }
}

fn check_coords(v: &[f64], dims: usize) -> Result<()> {
    if v.len() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            got: v.len(),
        });
    }
    if let Some(c) = v.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::InvalidInput(format!("coordinate {c} outside [0,1]")));
    }
    Ok(())
}

/// A state-action pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
}

impl Point {
    pub fn new(state: Vec<f64>, action: Vec<f64>) -> Self {
        Point { state, action }
    }

    pub fn coords(&self) -> impl Iterator<Item = f64> + '_ {
        self.state.iter().chain(self.action.iter()).copied()
    }
}

/// Inf-norm distance over all state and action coordinates.
pub fn distance(p: &Point, q: &Point) -> Result<f64> {
    if p.state.len() != q.state.len() {
        return Err(Error::DimensionMismatch {
            expected: p.state.len(),
            got: q.state.len(),
        });
    }
    if p.action.len() != q.action.len() {
        return Err(Error::DimensionMismatch {
            expected: p.action.len(),
            got: q.action.len(),
        });
    }
    Ok(p.coords()
        .zip(q.coords())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// A dyadic cell of the box space.
///
/// `radius` is the cell's inf-norm diameter `d_max * 2^-depth`, so the root
/// carries radius `d_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion {
    depth: u32,
    index: Vec<u64>,
    state_dims: usize,
    center: Point,
    radius: f64,
}

impl BoxRegion {
    fn from_index(space: &SpaceDescriptor, depth: u32, index: Vec<u64>) -> Self {
        let width = dyadic(depth);
        let mut coords = index.iter().map(|&i| (i as f64 + 0.5) * width);
        let state = coords.by_ref().take(space.state_dims).collect();
        let action = coords.collect();
        BoxRegion {
            depth,
            index,
            state_dims: space.state_dims,
            center: Point { state, action },
            radius: space.d_max * width,
        }
    }

    /// Rebuilds a cell from its depth and center, as stored in partition dumps.
    pub fn from_center(space: &SpaceDescriptor, depth: u32, center: &Point) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::DepthLimit { max: MAX_DEPTH });
        }
        if center.state.len() != space.state_dims || center.action.len() != space.action_dims {
            return Err(Error::DimensionMismatch {
                expected: space.dims(),
                got: center.state.len() + center.action.len(),
            });
        }
        let scale = (1u64 << depth) as f64;
        let mut index = Vec::with_capacity(space.dims());
        for c in center.coords() {
            let i = c * scale - 0.5;
            if i < 0.0 || i >= scale || i.fract() != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{c} is not a depth-{depth} dyadic cell center"
                )));
            }
            index.push(i as u64);
        }
        Ok(Self::from_index(space, depth, index))
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    /// Per-coordinate integer cell index at this depth, states first.
    pub fn index(&self) -> &[u64] {
        &self.index
    }

    /// Side length of the cell in every coordinate.
    pub fn width(&self) -> f64 {
        dyadic(self.depth)
    }

    /// Lower and upper bound of coordinate `i` (states first, then actions).
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        let w = self.width();
        (self.index[i] as f64 * w, (self.index[i] + 1) as f64 * w)
    }

    /// Midpoint of the action-coordinate projection.
    pub fn action_midpoint(&self) -> Vec<f64> {
        self.center.action.clone()
    }

    /// Lebesgue volume of the cell, `2^-(depth * dims)`.
    pub fn volume(&self) -> f64 {
        dyadic(self.depth).powi(self.index.len() as i32)
    }

    fn coord_in(&self, i: usize, v: f64) -> bool {
        let (lo, hi) = self.bounds(i);
        lo <= v && (v < hi || (hi == 1.0 && v == 1.0))
    }
}

fn dyadic(depth: u32) -> f64 {
    // powi is exact for powers of two in this range
    0.5f64.powi(depth as i32)
}

/// Membership in the half-open dyadic cell of `b`.
pub fn contains(b: &BoxRegion, p: &Point) -> bool {
    p.state.len() == b.state_dims
        && p.state.len() + p.action.len() == b.index.len()
        && p.coords().enumerate().all(|(i, v)| b.coord_in(i, v))
}

/// Whether some action `a` puts `(x, a)` inside `b`, i.e. `x` lies in the
/// state projection of the cell.
pub fn state_slice_nonempty(b: &BoxRegion, x: &[f64]) -> bool {
    x.len() == b.state_dims && x.iter().enumerate().all(|(i, &v)| b.coord_in(i, v))
}

/// Splits `b` into its `2^dims` dyadic children, ordered with the first
/// coordinate most significant.
pub fn split_region(space: &SpaceDescriptor, b: &BoxRegion) -> Result<Vec<BoxRegion>> {
    if b.depth >= MAX_DEPTH {
        return Err(Error::DepthLimit { max: MAX_DEPTH });
    }
    let dims = b.index.len();
    let children = (0..1usize << dims)
        .map(|mask| {
            let index = b
                .index
                .iter()
                .enumerate()
                .map(|(i, &idx)| 2 * idx + ((mask >> (dims - 1 - i)) & 1) as u64)
                .collect();
            BoxRegion::from_index(space, b.depth + 1, index)
        })
        .collect();
    Ok(children)
}
