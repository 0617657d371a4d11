//! Equispaced computational domains, cell-average storage with ghost frames,
//! and boundary-condition application.
//!
//! Arrays keep the equation index as the fastest axis and include the ghost
//! frame in the same allocation: `q[((j * nx) + i) * num_eqn + m]` where `i`
//! and `j` are ghost-inclusive cell indices and `nx` is the ghosted width.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension '{name}': upper ({upper}) must exceed lower ({lower})")]
    EmptyInterval { name: String, lower: f64, upper: f64 },
    #[error("dimension '{0}' needs at least one cell")]
    NoCells(String),
    #[error("patch rank {0} unsupported (1 or 2 dimensions)")]
    Rank(usize),
    #[error("ghost width mismatch: state has {state}, caller expected {expected}")]
    GhostWidth { state: usize, expected: usize },
    #[error("boundary spec has {spec} dimensions, patch has {patch}")]
    SpecRank { spec: usize, patch: usize },
    #[error("periodic boundary on one side of dimension {0} requires periodic on the other")]
    UnpairedPeriodic(usize),
    #[error("capacity index {index} out of range for {num_aux} aux fields")]
    CapacityIndex { index: usize, num_aux: usize },
    #[error("capacity must be positive, found {value} at cell ({i}, {j})")]
    NonPositiveCapacity { value: f64, i: usize, j: usize },
    #[error("wall reflects component {component} but there are only {num_eqn} equations")]
    WallComponent { component: usize, num_eqn: usize },
    #[error("custom boundary callback failed: {0}")]
    Custom(String),
}

/// One coordinate direction of an equispaced grid.
///
/// A dimension may describe a sub-range of a larger grid (a tile); cell
/// coordinates are always computed from the parent origin and spacing so
/// that a tile and the full grid agree bitwise on shared cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Dimension {
    name: String,
    origin: f64,
    upper: f64,
    delta: f64,
    start: usize,
    num_cells: usize,
}

impl Dimension {
    pub fn new(
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        num_cells: usize,
    ) -> Result<Self, GeometryError> {
        let name = name.into();
        if !(upper > lower) {
            return Err(GeometryError::EmptyInterval { name, lower, upper });
        }
        if num_cells == 0 {
            return Err(GeometryError::NoCells(name));
        }
        Ok(Self {
            name,
            origin: lower,
            upper,
            delta: (upper - lower) / num_cells as f64,
            start: 0,
            num_cells,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    /// Offset of this dimension's first cell within the parent grid.
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lower(&self) -> f64 {
        self.edge(0)
    }

    pub fn upper(&self) -> f64 {
        if self.start == 0 && self.is_full() {
            self.upper
        } else {
            self.edge(self.num_cells as isize)
        }
    }

    fn is_full(&self) -> bool {
        (self.origin + (self.start + self.num_cells) as f64 * self.delta - self.upper).abs()
            <= 1e-12 * self.delta
    }

    /// Lower edge of cell `i` (negative `i` addresses ghost cells).
    pub fn edge(&self, i: isize) -> f64 {
        if self.start as isize + i == 0 {
            return self.origin;
        }
        self.origin + (self.start as isize + i) as f64 * self.delta
    }

    /// Center of cell `i` (negative `i` addresses ghost cells).
    pub fn center(&self, i: isize) -> f64 {
        self.origin + ((self.start as isize + i) as f64 + 0.5) * self.delta
    }

    /// A tile covering cells `start..start + count` of this dimension.
    pub fn subrange(&self, start: usize, count: usize) -> Result<Self, GeometryError> {
        if count == 0 || start + count > self.num_cells {
            return Err(GeometryError::NoCells(self.name.clone()));
        }
        Ok(Self {
            name: self.name.clone(),
            origin: self.origin,
            upper: self.upper,
            delta: self.delta,
            start: self.start + start,
            num_cells: count,
        })
    }
}

/// Cell centers `lower + (i + 1/2) dx` for `i = 0..num_cells`.
pub fn cell_centers(dim: &Dimension) -> Vec<f64> {
    (0..dim.num_cells as isize).map(|i| dim.center(i)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    dims: Vec<Dimension>,
    num_ghost: usize,
}

impl Patch {
    pub fn new(dims: Vec<Dimension>, num_ghost: usize) -> Result<Self, GeometryError> {
        if dims.is_empty() || dims.len() > 2 {
            return Err(GeometryError::Rank(dims.len()));
        }
        Ok(Self { dims, num_ghost })
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn dim(&self, d: usize) -> &Dimension {
        &self.dims[d]
    }

    pub fn num_ghost(&self) -> usize {
        self.num_ghost
    }

    /// Interior cell counts; the second entry is 1 for 1D patches.
    pub fn interior_shape(&self) -> [usize; 2] {
        [
            self.dims[0].num_cells,
            self.dims.get(1).map_or(1, |d| d.num_cells),
        ]
    }

    /// Cell counts including the ghost frame; the second entry is 1 for 1D.
    pub fn ghosted_shape(&self) -> [usize; 2] {
        let [mx, my] = self.interior_shape();
        let g2 = 2 * self.num_ghost;
        if self.rank() == 1 {
            [mx + g2, 1]
        } else {
            [mx + g2, my + g2]
        }
    }

    pub fn num_ghosted_cells(&self) -> usize {
        let [nx, ny] = self.ghosted_shape();
        nx * ny
    }

    /// Ghost-inclusive offset of the first interior cell along each axis.
    pub fn interior_offset(&self) -> [usize; 2] {
        if self.rank() == 1 {
            [self.num_ghost, 0]
        } else {
            [self.num_ghost, self.num_ghost]
        }
    }

    /// Area (2D) or length (1D) of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.dims.iter().map(|d| d.delta).product()
    }

    /// Center coordinates of the ghost-inclusive cell `(i, j)`.
    pub fn center_of(&self, i: usize, j: usize) -> [f64; 2] {
        let g = self.num_ghost as isize;
        let x = self.dims[0].center(i as isize - g);
        let y = self
            .dims
            .get(1)
            .map_or(0.0, |d| d.center(j as isize - g));
        [x, y]
    }

    /// Geometry of the interior cell `(i, j)` (interior-relative indices).
    pub fn cell_geom(&self, i: usize, j: usize) -> CellGeom {
        let (i, j) = (i as isize, j as isize);
        let dx = &self.dims[0];
        let mut geom = CellGeom {
            center: [dx.center(i), 0.0],
            lower: [dx.edge(i), 0.0],
            upper: [dx.edge(i + 1), 0.0],
        };
        if let Some(dy) = self.dims.get(1) {
            geom.center[1] = dy.center(j);
            geom.lower[1] = dy.edge(j);
            geom.upper[1] = dy.edge(j + 1);
        }
        geom
    }
}

/// Rectangle (or interval) occupied by one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeom {
    pub center: [f64; 2],
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

/// Cell averages plus auxiliary coefficients on one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    patch: Patch,
    num_eqn: usize,
    num_aux: usize,
    capacity_index: Option<usize>,
    pub q: Vec<f64>,
    pub aux: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn new(patch: Patch, num_eqn: usize, num_aux: usize) -> Self {
        let cells = patch.num_ghosted_cells();
        Self {
            patch,
            num_eqn,
            num_aux,
            capacity_index: None,
            q: vec![0.0; cells * num_eqn],
            aux: vec![0.0; cells * num_aux],
            t: 0.0,
        }
    }

    pub fn with_capacity_index(mut self, index: Option<usize>) -> Result<Self, GeometryError> {
        if let Some(index) = index {
            if index >= self.num_aux {
                return Err(GeometryError::CapacityIndex {
                    index,
                    num_aux: self.num_aux,
                });
            }
        }
        self.capacity_index = index;
        Ok(self)
    }

    pub fn patch(&self) -> &Patch {
        &self.patch
    }

    pub fn rank(&self) -> usize {
        self.patch.rank()
    }

    pub fn num_eqn(&self) -> usize {
        self.num_eqn
    }

    pub fn num_aux(&self) -> usize {
        self.num_aux
    }

    pub fn num_ghost(&self) -> usize {
        self.patch.num_ghost
    }

    pub fn capacity_index(&self) -> Option<usize> {
        self.capacity_index
    }

    /// Linear index of the ghost-inclusive cell `(i, j)`.
    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.patch.ghosted_shape()[0] + i
    }

    #[inline]
    pub fn q_cell(&self, i: usize, j: usize) -> &[f64] {
        let c = self.cell_index(i, j) * self.num_eqn;
        &self.q[c..c + self.num_eqn]
    }

    #[inline]
    pub fn q_cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let c = self.cell_index(i, j) * self.num_eqn;
        &mut self.q[c..c + self.num_eqn]
    }

    #[inline]
    pub fn aux_cell(&self, i: usize, j: usize) -> &[f64] {
        let c = self.cell_index(i, j) * self.num_aux;
        &self.aux[c..c + self.num_aux]
    }

    #[inline]
    pub fn aux_cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let c = self.cell_index(i, j) * self.num_aux;
        &mut self.aux[c..c + self.num_aux]
    }

    /// Capacity of the ghost-inclusive cell `(i, j)`, 1 when unset.
    #[inline]
    pub fn capacity(&self, i: usize, j: usize) -> f64 {
        match self.capacity_index {
            Some(k) => self.aux[self.cell_index(i, j) * self.num_aux + k],
            None => 1.0,
        }
    }

    /// Checks that capacity is positive on every interior cell.
    pub fn validate_capacity(&self) -> Result<(), GeometryError> {
        if self.capacity_index.is_none() {
            return Ok(());
        }
        for (i, j) in self.interior_cells() {
            let value = self.capacity(i, j);
            if !(value > 0.0) {
                return Err(GeometryError::NonPositiveCapacity { value, i, j });
            }
        }
        Ok(())
    }

    /// Ghost-inclusive indices of every interior cell, x fastest.
    pub fn interior_cells(&self) -> impl Iterator<Item = (usize, usize)> {
        let [mx, my] = self.patch.interior_shape();
        let [ox, oy] = self.patch.interior_offset();
        (0..my).flat_map(move |j| (0..mx).map(move |i| (i + ox, j + oy)))
    }

    /// Interior values of `q`, one cell after another, x fastest.
    pub fn interior_q(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.interior_len() * self.num_eqn);
        for (i, j) in self.interior_cells() {
            out.extend_from_slice(self.q_cell(i, j));
        }
        out
    }

    pub fn set_interior_q(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.interior_len() * self.num_eqn);
        let m = self.num_eqn;
        let cells: Vec<_> = self.interior_cells().collect();
        for (n, (i, j)) in cells.into_iter().enumerate() {
            self.q_cell_mut(i, j)
                .copy_from_slice(&values[n * m..(n + 1) * m]);
        }
    }

    pub fn interior_len(&self) -> usize {
        let [mx, my] = self.patch.interior_shape();
        mx * my
    }

    /// True when every entry of the interior is finite.
    pub fn interior_is_finite(&self) -> bool {
        self.interior_cells()
            .all(|(i, j)| self.q_cell(i, j).iter().all(|v| v.is_finite()))
    }
}

/// Per-equation total `sum_i kappa_i Q_i |cell|` over interior cells.
pub fn weighted_total(state: &State) -> Vec<f64> {
    let mut total = vec![0.0; state.num_eqn];
    for (i, j) in state.interior_cells() {
        let kappa = state.capacity(i, j);
        for (acc, v) in total.iter_mut().zip(state.q_cell(i, j)) {
            *acc += kappa * v;
        }
    }
    let vol = state.patch.cell_volume();
    total.iter_mut().for_each(|v| *v *= vol);
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Lower => 0,
            Side::Upper => 1,
        }
    }
}

/// Everything a custom boundary callback sees about one ghost cell.
#[derive(Debug)]
pub struct GhostCell<'a> {
    pub dim: usize,
    pub side: Side,
    /// 1 for the layer touching the interior, increasing outward.
    pub layer: usize,
    pub center: [f64; 2],
    pub t: f64,
    /// Interior cell at the mirror position (layer counted inward).
    pub mirror: &'a [f64],
    /// Interior cell adjacent to the boundary.
    pub nearest: &'a [f64],
}

pub type CustomBc = Arc<dyn Fn(&GhostCell<'_>, &mut [f64]) -> Result<(), String> + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryCondition {
    Periodic,
    Extrapolation,
    /// Mirror the interior and negate the listed (normal-velocity) components.
    Wall { reflect: Vec<usize> },
    Custom(CustomBc),
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Periodic => write!(f, "Periodic"),
            Self::Extrapolation => write!(f, "Extrapolation"),
            Self::Wall { reflect } => write!(f, "Wall {{ reflect: {reflect:?} }}"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl BoundaryCondition {
    pub fn is_periodic(&self) -> bool {
        matches!(self, Self::Periodic)
    }
}

/// Boundary conditions for each side of each dimension.
#[derive(Clone, Debug)]
pub struct BoundarySpec {
    sides: Vec<[BoundaryCondition; 2]>,
    aux_custom: Option<AuxBc>,
}

/// Custom fill for auxiliary ghost cells on non-periodic sides.
#[derive(Clone)]
pub struct AuxBc(pub CustomBc);

impl fmt::Debug for AuxBc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AuxBc(..)")
    }
}

impl BoundarySpec {
    pub fn new(sides: Vec<[BoundaryCondition; 2]>) -> Result<Self, GeometryError> {
        for (d, [lo, hi]) in sides.iter().enumerate() {
            if lo.is_periodic() != hi.is_periodic() {
                return Err(GeometryError::UnpairedPeriodic(d));
            }
        }
        if sides.is_empty() || sides.len() > 2 {
            return Err(GeometryError::Rank(sides.len()));
        }
        Ok(Self {
            sides,
            aux_custom: None,
        })
    }

    /// The same condition on every side of a `rank`-dimensional patch.
    pub fn uniform(rank: usize, bc: BoundaryCondition) -> Result<Self, GeometryError> {
        Self::new(vec![[bc.clone(), bc]; rank])
    }

    pub fn with_aux_custom(mut self, bc: CustomBc) -> Self {
        self.aux_custom = Some(AuxBc(bc));
        self
    }

    pub fn rank(&self) -> usize {
        self.sides.len()
    }

    pub fn side(&self, dim: usize, side: Side) -> &BoundaryCondition {
        &self.sides[dim][side.index()]
    }

    pub fn is_periodic(&self, dim: usize) -> bool {
        self.sides[dim][0].is_periodic()
    }
}

/// Fills the ghost frame of `state` from `spec`. Interior cells are never
/// written.
pub fn apply_bcs(
    state: &mut State,
    spec: &BoundarySpec,
    num_ghost: usize,
) -> Result<(), GeometryError> {
    if num_ghost != state.num_ghost() {
        return Err(GeometryError::GhostWidth {
            state: state.num_ghost(),
            expected: num_ghost,
        });
    }
    for dim in 0..state.rank() {
        fill_dimension(state, spec, dim, [true, true])?;
    }
    Ok(())
}

/// Fills the ghost layers of one dimension on the sides flagged in `sides`.
///
/// Dimension 0 is filled along interior rows only; dimension 1 spans the
/// full ghosted width so corners pick up the dimension-0 ghosts.
pub fn fill_dimension(
    state: &mut State,
    spec: &BoundarySpec,
    dim: usize,
    sides: [bool; 2],
) -> Result<(), GeometryError> {
    if spec.rank() != state.rank() {
        return Err(GeometryError::SpecRank {
            spec: spec.rank(),
            patch: state.rank(),
        });
    }
    for side in [Side::Lower, Side::Upper] {
        if sides[side.index()] {
            fill_side(state, spec, dim, side)?;
        }
    }
    Ok(())
}

/// Line ids crossing a boundary of `dim` and the interior length along it.
fn lines(state: &State, dim: usize) -> (Vec<usize>, usize) {
    let [nx, _] = state.patch.ghosted_shape();
    let [mx, my] = state.patch.interior_shape();
    let [_, oy] = state.patch.interior_offset();
    if dim == 0 {
        ((oy..oy + my).collect(), mx)
    } else {
        ((0..nx).collect(), my)
    }
}

#[inline]
fn along(dim: usize, line: usize, pos: usize) -> (usize, usize) {
    if dim == 0 {
        (pos, line)
    } else {
        (line, pos)
    }
}

fn fill_side(
    state: &mut State,
    spec: &BoundarySpec,
    dim: usize,
    side: Side,
) -> Result<(), GeometryError> {
    let g = state.num_ghost();
    if g == 0 {
        return Ok(());
    }
    let (line_ids, n) = lines(state, dim);
    let m = state.num_eqn;
    let ma = state.num_aux;
    let bc = spec.side(dim, side).clone();
    if let BoundaryCondition::Wall { reflect } = &bc {
        if let Some(&c) = reflect.iter().find(|&&c| c >= m) {
            return Err(GeometryError::WallComponent {
                component: c,
                num_eqn: m,
            });
        }
    }

    for &line in &line_ids {
        for layer in 1..=g {
            let ghost_pos = match side {
                Side::Lower => g - layer,
                Side::Upper => g + n - 1 + layer,
            };
            let mirror_pos = match side {
                Side::Lower => g + layer - 1,
                Side::Upper => g + n - layer,
            };
            let nearest_pos = match side {
                Side::Lower => g,
                Side::Upper => g + n - 1,
            };
            let wrap_pos = match side {
                Side::Lower => g + n - layer,
                Side::Upper => g + layer - 1,
            };
            let (gi, gj) = along(dim, line, ghost_pos);
            let ghost = state.cell_index(gi, gj);

            let aux_src = if bc.is_periodic() {
                Some(wrap_pos)
            } else if spec.aux_custom.is_none() {
                Some(nearest_pos)
            } else {
                None
            };

            let src_pos = match &bc {
                BoundaryCondition::Periodic => Some(wrap_pos),
                BoundaryCondition::Extrapolation => Some(nearest_pos),
                BoundaryCondition::Wall { .. } => Some(mirror_pos),
                BoundaryCondition::Custom(_) => None,
            };

            if let Some(pos) = src_pos {
                let (si, sj) = along(dim, line, pos);
                let src = state.cell_index(si, sj);
                state.q.copy_within(src * m..(src + 1) * m, ghost * m);
                if let BoundaryCondition::Wall { reflect } = &bc {
                    for &c in reflect {
                        state.q[ghost * m + c] = -state.q[ghost * m + c];
                    }
                }
            }
            if let Some(pos) = aux_src {
                if ma > 0 {
                    let (si, sj) = along(dim, line, pos);
                    let src = state.cell_index(si, sj);
                    state.aux.copy_within(src * ma..(src + 1) * ma, ghost * ma);
                }
            }

            let needs_q_callback = matches!(bc, BoundaryCondition::Custom(_));
            let needs_aux_callback = aux_src.is_none() && ma > 0;
            if needs_q_callback || needs_aux_callback {
                let (mi, mj) = along(dim, line, mirror_pos);
                let (ni, nj) = along(dim, line, nearest_pos);
                let center = state.patch.center_of(gi, gj);
                if let BoundaryCondition::Custom(cb) = &bc {
                    let mirror = state.q_cell(mi, mj).to_vec();
                    let nearest = state.q_cell(ni, nj).to_vec();
                    let cell = GhostCell {
                        dim,
                        side,
                        layer,
                        center,
                        t: state.t,
                        mirror: &mirror,
                        nearest: &nearest,
                    };
                    cb(&cell, &mut state.q[ghost * m..(ghost + 1) * m])
                        .map_err(GeometryError::Custom)?;
                }
                if needs_aux_callback {
                    if let Some(AuxBc(cb)) = &spec.aux_custom {
                        let mirror = state.aux_cell(mi, mj).to_vec();
                        let nearest = state.aux_cell(ni, nj).to_vec();
                        let cell = GhostCell {
                            dim,
                            side,
                            layer,
                            center,
                            t: state.t,
                            mirror: &mirror,
                            nearest: &nearest,
                        };
                        cb(&cell, &mut state.aux[ghost * ma..(ghost + 1) * ma])
                            .map_err(GeometryError::Custom)?;
                    }
                }
            }
        }
    }
    Ok(())
}
