//! Uniform node/cell grid shared by the solver, the discrete 1-forms and the
//! mesh assembly.
//!
//! Nodes sit at `(x0 + i*h, y0 + j*h)` for `0 <= i <= nx`, `0 <= j <= ny`.
//! Cells are indexed by their south-west node, `0 <= i < nx`, `0 <= j < ny`.
//! Storage is column-major (x outer, y inner) so that the Newton system is a
//! band matrix with half-bandwidth `ny + 2`.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub h: f64,
    pub x0: f64,
    pub y0: f64,
    /// cells in x (nodes: nx + 1)
    pub nx: usize,
    /// cells in y (nodes: ny + 1)
    pub ny: usize,
}

impl Grid {
    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Column-major node index.
    #[inline]
    pub fn nidx(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix <= self.nx && iy <= self.ny);
        ix * (self.ny + 1) + iy
    }

    /// Column-major cell index.
    #[inline]
    pub fn cidx(&self, ax: usize, ay: usize) -> usize {
        debug_assert!(ax < self.nx && ay < self.ny);
        ax * self.ny + ay
    }

    #[inline]
    pub fn node_x(&self, ix: usize) -> f64 {
        self.x0 + ix as f64 * self.h
    }

    #[inline]
    pub fn node_y(&self, iy: usize) -> f64 {
        self.y0 + iy as f64 * self.h
    }

    #[inline]
    pub fn cell_center(&self, ax: usize, ay: usize) -> (f64, f64) {
        (
            self.x0 + (ax as f64 + 0.5) * self.h,
            self.y0 + (ay as f64 + 0.5) * self.h,
        )
    }

    /// Node row index of the line y = 0. The strip is symmetric, so this is
    /// also the number of cell rows below the axis.
    pub fn axis_row(&self) -> usize {
        let r = (-self.y0 / self.h).round();
        debug_assert!((r - (-self.y0 / self.h)).abs() < 1e-6);
        r as usize
    }

    pub fn x_hi(&self) -> f64 {
        self.node_x(self.nx)
    }

    pub fn is_boundary_node(&self, ix: usize, iy: usize) -> bool {
        ix == 0 || ix == self.nx || iy == 0 || iy == self.ny
    }

    /// Nearest node index to an x-abscissa, or `None` when off the window.
    pub fn node_of_x(&self, x: f64) -> Option<usize> {
        let t = (x - self.x0) / self.h;
        let i = t.round();
        if i < 0.0 || i > self.nx as f64 {
            return None;
        }
        Some(i as usize)
    }
}

/// Scalar values attached to cell centers. Cells outside the populated region
/// (e.g. the lower half-strip for conjugate potentials) hold NaN.
#[derive(Clone, Debug)]
pub struct CellField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl CellField {
    pub fn filled(grid: Grid, fill: f64) -> Self {
        let n = grid.cell_count();
        CellField {
            grid,
            values: vec![fill; n],
        }
    }

    #[inline]
    pub fn get(&self, ax: usize, ay: usize) -> f64 {
        self.values[self.grid.cidx(ax, ay)]
    }

    #[inline]
    pub fn set(&mut self, ax: usize, ay: usize, v: f64) {
        let i = self.grid.cidx(ax, ay);
        self.values[i] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid {
            h: 0.25,
            x0: -2.0,
            y0: -0.5,
            nx: 16,
            ny: 4,
        }
    }

    #[test]
    fn node_and_cell_indexing_roundtrip() {
        let g = grid();
        assert_eq!(g.node_count(), 17 * 5);
        assert_eq!(g.cell_count(), 16 * 4);
        assert_eq!(g.nidx(0, 0), 0);
        assert_eq!(g.nidx(1, 0), 5);
        assert_eq!(g.axis_row(), 2);
        assert_eq!(g.node_of_x(-2.0), Some(0));
        assert_eq!(g.node_of_x(2.0), Some(16));
        assert_eq!(g.node_of_x(2.6), None);
        let (cx, cy) = g.cell_center(0, 0);
        assert!((cx - (-1.875)).abs() < 1e-15);
        assert!((cy - (-0.375)).abs() < 1e-15);
    }
}
