//! Discrete conjugate 1-forms of a solved field and their path integrals.
//!
//! All four forms are cell-centered: on each cell they are constant with
//! coefficients computed from the cell gradient (gx, gy) and W = sqrt(1-|g|^2),
//!
//!   du   =        gy/W dx  -       gx/W dy        (conjugate differential)
//!   dX1  =  -gx*gy/W dx  + (1-gy^2)/W dy
//!   dX2  = -(1-gx^2)/W dx +   gx*gy/W dy
//!   dX3  =       gx   dx  +      gy   dy          (exactly dv)
//!
//! The gradient of the conjugate function u never appears explicitly: with
//! u_x = gy/W, u_y = -gx/W and sqrt(1+|grad u|^2) = 1/W every integrand is
//! evaluated directly from the cell gradient of v.
//!
//! Paths run through cell centers (dual edges) with midpoint quadrature, so
//! the loop integral around one node equals -h^2 times the discrete
//! Euler-Lagrange residual there, and closedness away from pinned nodes is
//! inherited from the solver.

use crate::grid::{CellField, Grid};
use crate::maximal_solver::ScalarField;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("loop of radius {radius} around node ({0}, {1}) leaves the grid", .node.0, .node.1)]
    LoopOutOfBounds { node: (usize, usize), radius: usize },
    #[error("loop of radius {radius} around singularity {i} touches the exclusion zone of singularity {other}")]
    LoopTouchesSingularity { i: usize, other: usize, radius: usize },
    #[error("no singularity with index {0}")]
    NoSuchSingularity(usize),
    #[error("cell ({0}, {1}) is not in the closed upper half-strip")]
    NotUpperHalf(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormKind {
    Du,
    Dx1,
    Dx2,
    Dx3,
}

/// Coefficients of a cell-centered 1-form p dx + q dy.
#[derive(Clone, Debug)]
pub struct FormCoeffs {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ConjugateForms {
    pub grid: Grid,
    pub du: FormCoeffs,
    pub dx1: FormCoeffs,
    pub dx2: FormCoeffs,
    pub dx3: FormCoeffs,
    /// cells flagged as too close to lightlike to enter closedness checks
    pub lightlike: Vec<bool>,
    /// residual max-norm of the source field; bounds non-closedness
    pub source_residual: f64,
    pub singular_nodes: Vec<(usize, usize)>,
}

/// Evaluate all four integrand coefficient pairs from a cell gradient.
/// Returns ((p_du, q_du), (p1, q1), (p2, q2), (p3, q3)).
pub fn coefficients_from_gradient(
    gx: f64,
    gy: f64,
) -> ((f64, f64), (f64, f64), (f64, f64), (f64, f64)) {
    let w = (1.0 - gx * gx - gy * gy).sqrt();
    (
        (gy / w, -gx / w),
        (-gx * gy / w, (1.0 - gy * gy) / w),
        (-(1.0 - gx * gx) / w, gx * gy / w),
        (gx, gy),
    )
}

/// Reference evaluation through the conjugate gradient, used as the oracle
/// for the substitution identity: builds (u_x, u_y) explicitly and evaluates
/// the immersion integrands in terms of u.
pub fn coefficients_via_conjugate_gradient(
    gx: f64,
    gy: f64,
) -> ((f64, f64), (f64, f64)) {
    let w = (1.0 - gx * gx - gy * gy).sqrt();
    let ux = gy / w;
    let uy = -gx / w;
    let root = (1.0 + ux * ux + uy * uy).sqrt();
    (
        (ux * uy / root, (1.0 + uy * uy) / root),
        (-(1.0 + ux * ux) / root, -ux * uy / root),
    )
}

pub fn build_forms(field: &ScalarField) -> ConjugateForms {
    let g = field.grid;
    let n = g.cell_count();
    let mut du = FormCoeffs {
        p: vec![0.0; n],
        q: vec![0.0; n],
    };
    let mut dx1 = du.clone();
    let mut dx2 = du.clone();
    let mut dx3 = du.clone();
    let mut lightlike = vec![false; n];
    let flag_at = 1.0 - 0.5 * field.eps_cap_final.max(1e-13);
    for ax in 0..g.nx {
        for ay in 0..g.ny {
            let c = g.cidx(ax, ay);
            let (gx, gy) = field.cell_gradient(ax, ay);
            let norm = (gx * gx + gy * gy).sqrt();
            if norm >= flag_at {
                lightlike[c] = true;
            }
            let (cdu, c1, c2, c3) = coefficients_from_gradient(gx, gy);
            du.p[c] = cdu.0;
            du.q[c] = cdu.1;
            dx1.p[c] = c1.0;
            dx1.q[c] = c1.1;
            dx2.p[c] = c2.0;
            dx2.q[c] = c2.1;
            dx3.p[c] = c3.0;
            dx3.q[c] = c3.1;
        }
    }
    ConjugateForms {
        grid: g,
        du,
        dx1,
        dx2,
        dx3,
        lightlike,
        source_residual: field.residual_norm,
        singular_nodes: field.singular_nodes.clone(),
    }
}

impl ConjugateForms {
    pub fn coeffs(&self, kind: FormKind) -> &FormCoeffs {
        match kind {
            FormKind::Du => &self.du,
            FormKind::Dx1 => &self.dx1,
            FormKind::Dx2 => &self.dx2,
            FormKind::Dx3 => &self.dx3,
        }
    }

    /// First cell row of the closed upper half-strip.
    pub fn axis_cell_row(&self) -> usize {
        self.grid.axis_row()
    }

    /// Integral over the dual edge from cell (ax, ay) east to (ax+1, ay).
    #[inline]
    pub fn step_east(&self, kind: FormKind, ax: usize, ay: usize) -> f64 {
        let c = self.coeffs(kind);
        let g = &self.grid;
        0.5 * g.h * (c.p[g.cidx(ax, ay)] + c.p[g.cidx(ax + 1, ay)])
    }

    /// Integral over the dual edge from cell (ax, ay) north to (ax, ay+1).
    #[inline]
    pub fn step_north(&self, kind: FormKind, ax: usize, ay: usize) -> f64 {
        let c = self.coeffs(kind);
        let g = &self.grid;
        0.5 * g.h * (c.q[g.cidx(ax, ay)] + c.q[g.cidx(ax, ay + 1)])
    }

    /// Counterclockwise integral around the ring of cells of half-width
    /// `radius` centered at a node.
    pub fn loop_integral(
        &self,
        kind: FormKind,
        node: (usize, usize),
        radius: usize,
    ) -> Result<f64, FormError> {
        let (ix, iy) = node;
        let g = &self.grid;
        let r = radius as i64;
        let (ix, iy) = (ix as i64, iy as i64);
        if ix - r < 0 || iy - r < 0 || ix + r - 1 >= g.nx as i64 || iy + r - 1 >= g.ny as i64 {
            return Err(FormError::LoopOutOfBounds {
                node: (ix as usize, iy as usize),
                radius,
            });
        }
        let (ax0, ay0) = ((ix - r) as usize, (iy - r) as usize);
        let (ax1, ay1) = ((ix + r - 1) as usize, (iy + r - 1) as usize);
        let mut total = 0.0;
        for a in ax0..ax1 {
            total += self.step_east(kind, a, ay0);
        }
        for b in ay0..ay1 {
            total += self.step_north(kind, ax1, b);
        }
        for a in (ax0..ax1).rev() {
            total -= self.step_east(kind, a, ay1);
        }
        for b in (ay0..ay1).rev() {
            total -= self.step_north(kind, ax0, b);
        }
        Ok(total)
    }

    /// Loop integral around the 2x2 plaquette of cells surrounding one node.
    pub fn plaquette_integral(&self, kind: FormKind, node: (usize, usize)) -> Result<f64, FormError> {
        self.loop_integral(kind, node, 1)
    }

    /// Upper half of the loop around an axis node, from the axis point east
    /// of it to the axis point west of it, with half-edge legs touching y = 0.
    pub fn half_loop_integral(
        &self,
        kind: FormKind,
        node: (usize, usize),
        radius: usize,
    ) -> Result<f64, FormError> {
        let (ix, iy) = node;
        let g = &self.grid;
        let r = radius as i64;
        let (ixi, iyi) = (ix as i64, iy as i64);
        if ixi - r < 0 || ixi + r - 1 >= g.nx as i64 || iyi + r - 1 >= g.ny as i64 {
            return Err(FormError::LoopOutOfBounds { node, radius });
        }
        let ax0 = (ixi - r) as usize;
        let ax1 = (ixi + r - 1) as usize;
        let ay0 = iy; // first upper cell row
        let ay1 = (iyi + r - 1) as usize;
        let c = self.coeffs(kind);
        let mut total = 0.5 * g.h * c.q[g.cidx(ax1, ay0)];
        for b in ay0..ay1 {
            total += self.step_north(kind, ax1, b);
        }
        for a in (ax0..ax1).rev() {
            total -= self.step_east(kind, a, ay1);
        }
        for b in (ay0..ay1).rev() {
            total -= self.step_north(kind, ax0, b);
        }
        total -= 0.5 * g.h * c.q[g.cidx(ax0, ay0)];
        Ok(total)
    }

    /// Bound on loop non-closedness: 4 * residual * h per enclosed free node.
    pub fn closedness_bound(&self, radius: usize) -> f64 {
        let d = 2 * radius - 1;
        let enclosed = (d * d).max(1);
        4.0 * self.source_residual * self.grid.h * enclosed as f64
    }

    fn check_clearance(&self, i: usize, radius: usize) -> Result<(usize, usize), FormError> {
        let node = *self
            .singular_nodes
            .get(i)
            .ok_or(FormError::NoSuchSingularity(i))?;
        for (j, &(ox, oy)) in self.singular_nodes.iter().enumerate() {
            if j == i {
                continue;
            }
            let d = (ox as i64 - node.0 as i64)
                .abs()
                .max((oy as i64 - node.1 as i64).abs());
            if d <= radius as i64 + 1 {
                return Err(FormError::LoopTouchesSingularity {
                    i,
                    other: j,
                    radius,
                });
            }
        }
        Ok(node)
    }

    /// Multi-valuation of u around singularity i: the loop integral of du.
    pub fn handle_size(&self, i: usize, radius: usize) -> Result<f64, FormError> {
        let node = self.check_clearance(i, radius)?;
        self.loop_integral(FormKind::Du, node, radius)
    }

    /// Period integral of dX1 around singularity i.
    pub fn period_integral(&self, i: usize, radius: usize) -> Result<f64, FormError> {
        let node = self.check_clearance(i, radius)?;
        self.loop_integral(FormKind::Dx1, node, radius)
    }

    /// Integrate a form over the dual grid of the closed upper half-strip,
    /// producing a potential on cell centers with value 0 at `base`.
    /// Canonical paths: along the base row, then up each column.
    pub fn integrate_chart(
        &self,
        kind: FormKind,
        base: (usize, usize),
    ) -> Result<CellField, FormError> {
        let g = self.grid;
        let ay_axis = self.axis_cell_row();
        let (bx, by) = base;
        if by < ay_axis || by >= g.ny || bx >= g.nx {
            return Err(FormError::NotUpperHalf(bx, by));
        }
        let mut out = CellField::filled(g, f64::NAN);
        out.set(bx, by, 0.0);
        for a in bx..g.nx - 1 {
            let v = out.get(a, by) + self.step_east(kind, a, by);
            out.set(a + 1, by, v);
        }
        for a in (0..bx).rev() {
            let v = out.get(a + 1, by) - self.step_east(kind, a, by);
            out.set(a, by, v);
        }
        for a in 0..g.nx {
            for b in by..g.ny - 1 {
                let v = out.get(a, b) + self.step_north(kind, a, b);
                out.set(a, b + 1, v);
            }
            for b in (ay_axis..by).rev() {
                let v = out.get(a, b + 1) - self.step_north(kind, a, b);
                out.set(a, b, v);
            }
        }
        Ok(out)
    }

    /// Conjugate potential u on the closed upper half-strip (0 at `base`).
    pub fn integrate_u(&self, base: (usize, usize)) -> Result<CellField, FormError> {
        self.integrate_chart(FormKind::Du, base)
    }

    /// Extrapolation of an upper-half chart value from the bottom cell row
    /// down to the axis point below the cell center: subtract half a vertical
    /// dual edge.
    pub fn axis_mid_value(&self, kind: FormKind, chart: &CellField, ax: usize) -> f64 {
        let ay = self.axis_cell_row();
        let c = self.coeffs(kind);
        chart.get(ax, ay) - 0.5 * self.grid.h * c.q[self.grid.cidx(ax, ay)]
    }

    /// Extrapolation of a chart value from the top cell row up to the
    /// boundary point above the cell center.
    pub fn top_mid_value(&self, kind: FormKind, chart: &CellField, ax: usize) -> f64 {
        let ay = self.grid.ny - 1;
        let c = self.coeffs(kind);
        chart.get(ax, ay) + 0.5 * self.grid.h * c.q[self.grid.cidx(ax, ay)]
    }

    /// Chart value extrapolated to the axis node (ix, y=0): average of the
    /// two adjacent axis mid-edge extrapolations (one-sided at the window
    /// ends).
    pub fn axis_node_value(&self, kind: FormKind, chart: &CellField, ix: usize) -> f64 {
        let nx = self.grid.nx;
        if ix == 0 {
            self.axis_mid_value(kind, chart, 0)
        } else if ix == nx {
            self.axis_mid_value(kind, chart, nx - 1)
        } else {
            0.5 * (self.axis_mid_value(kind, chart, ix - 1)
                + self.axis_mid_value(kind, chart, ix))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maximal_solver::{
        node_residuals, solve_dirichlet, PinKind, ScalarField, SolverOptions,
    };
    use crate::strip_domain::{SingularSet, StripConfig};

    #[test]
    fn substitution_identity_matches_conjugate_gradient_route() {
        // deterministic pseudo-random gradients with |g| <= 0.999
        let mut state = 0x243f6a8885a308d3u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1_000_000 {
            let r = 0.999 * next().sqrt();
            let t = std::f64::consts::TAU * next();
            let (gx, gy) = (r * t.cos(), r * t.sin());
            let (_, d1, d2, _) = coefficients_from_gradient(gx, gy);
            let (e1, e2) = coefficients_via_conjugate_gradient(gx, gy);
            let scale = 1.0 + d1.0.abs() + d1.1.abs() + d2.0.abs() + d2.1.abs();
            assert!((d1.0 - e1.0).abs() / scale < 1e-12);
            assert!((d1.1 - e1.1).abs() / scale < 1e-12);
            assert!((d2.0 - e2.0).abs() / scale < 1e-12);
            assert!((d2.1 - e2.1).abs() / scale < 1e-12);
        }
    }

    fn synthetic_field() -> ScalarField {
        let g = Grid {
            h: 0.1,
            x0: -1.0,
            y0: -0.5,
            nx: 20,
            ny: 10,
        };
        let mut values = vec![0.0; g.node_count()];
        for ix in 0..=g.nx {
            for iy in 0..=g.ny {
                let x = g.node_x(ix);
                let y = g.node_y(iy);
                values[g.nidx(ix, iy)] = 0.25 * (1.3 * x).sin() * (0.9 * y).cos() + 0.2 * y;
            }
        }
        ScalarField {
            grid: g,
            ell: 0.5,
            values,
            pin: vec![PinKind::Free; g.node_count()],
            singular_nodes: vec![],
            residual_norm: 1.0,
            eps_cap_final: 1e-4,
        }
    }

    #[test]
    fn linear_field_gives_constant_du() {
        let mut field = synthetic_field();
        let b = 0.6;
        for ix in 0..=field.grid.nx {
            for iy in 0..=field.grid.ny {
                field.values[field.grid.nidx(ix, iy)] = b * field.grid.node_y(iy);
            }
        }
        let forms = build_forms(&field);
        let want = b / (1.0 - b * b).sqrt();
        for c in 0..field.grid.cell_count() {
            assert!((forms.du.p[c] - want).abs() < 1e-13);
            assert!(forms.du.q[c].abs() < 1e-13);
        }
    }

    #[test]
    fn dx3_loops_vanish_exactly() {
        let forms = build_forms(&synthetic_field());
        for ix in 2..forms.grid.nx - 1 {
            for iy in 2..forms.grid.ny - 1 {
                let v = forms.plaquette_integral(FormKind::Dx3, (ix, iy)).unwrap();
                assert!(v.abs() < 1e-15, "dX3 plaquette {v}");
            }
        }
        let big = forms.loop_integral(FormKind::Dx3, (10, 5), 4).unwrap();
        assert!(big.abs() < 1e-14);
    }

    #[test]
    fn du_plaquette_equals_minus_h2_times_residual() {
        let field = synthetic_field();
        let forms = build_forms(&field);
        let r = node_residuals(&field).unwrap();
        let h2 = field.grid.h * field.grid.h;
        for ix in 1..field.grid.nx {
            for iy in 1..field.grid.ny {
                let lhs = forms.plaquette_integral(FormKind::Du, (ix, iy)).unwrap();
                let rhs = -h2 * r[field.grid.nidx(ix, iy)];
                assert!(
                    (lhs - rhs).abs() < 1e-13,
                    "plaquette/residual pairing broke: {lhs} vs {rhs}"
                );
            }
        }
    }

    fn solved_single_handle() -> (StripConfig, ScalarField) {
        let cfg = StripConfig::new(0.8, 0.1, None, Some((-4.0, 4.0)), &[0]).unwrap();
        let s = SingularSet::centered(&[0], cfg.eta0).unwrap();
        let field = solve_dirichlet(&cfg, &s, &SolverOptions::default()).unwrap();
        (cfg, field)
    }

    #[test]
    fn chart_is_path_independent_within_bound() {
        let (_, field) = solved_single_handle();
        let forms = build_forms(&field);
        let ay = forms.axis_cell_row();
        let base = (5usize, ay);
        let u = forms.integrate_u(base).unwrap();
        // alternative path: up first, then east, then down
        let target = (12usize, ay + 2);
        let mut alt = 0.0;
        for b in ay..ay + 4 {
            alt += forms.step_north(FormKind::Du, base.0, b);
        }
        for a in base.0..target.0 {
            alt += forms.step_east(FormKind::Du, a, ay + 4);
        }
        for b in (target.1..ay + 4).rev() {
            alt -= forms.step_north(FormKind::Du, target.0, b);
        }
        let canonical = u.get(target.0, target.1);
        // enclosed plaquettes only contain free nodes
        let bound = 4.0 * forms.source_residual * field.grid.h * 40.0 + 1e-12;
        assert!((alt - canonical).abs() <= bound);
    }

    #[test]
    fn karcher_axis_u_has_no_jumps() {
        let cfg = StripConfig::new(0.8, 0.1, None, Some((-4.0, 4.0)), &[]).unwrap();
        let field = solve_dirichlet(&cfg, &SingularSet::empty(), &SolverOptions::default()).unwrap();
        let forms = build_forms(&field);
        let ay = forms.axis_cell_row();
        let u = forms.integrate_u((forms.grid.nx / 2, ay)).unwrap();
        // u restricted to the axis is 2-periodic and jump-free; compare
        // neighboring plateau values over one period in the interior
        let mut max_step: f64 = 0.0;
        for ix in forms.grid.nx / 2 - 10..forms.grid.nx / 2 + 10 {
            let a = forms.axis_node_value(FormKind::Du, &u, ix);
            let b = forms.axis_node_value(FormKind::Du, &u, ix + 1);
            max_step = max_step.max((a - b).abs());
        }
        assert!(max_step < 5e-3, "axis u steps by {max_step}");
    }

    #[test]
    fn axis_jump_at_singularity_is_half_the_handle() {
        let (_, field) = solved_single_handle();
        let forms = build_forms(&field);
        let handle = forms.handle_size(0, 4).unwrap();
        assert!(handle.abs() > 1e-3, "degenerate handle {handle}");
        let ay = forms.axis_cell_row();
        let u = forms.integrate_u((2, ay)).unwrap();
        let (sx, _) = forms.singular_nodes[0];
        let left = forms.axis_node_value(FormKind::Du, &u, sx - 5);
        let right = forms.axis_node_value(FormKind::Du, &u, sx + 5);
        let jump = (right - left).abs();
        assert!(
            (jump - handle.abs() / 2.0).abs() < 0.05 * handle.abs(),
            "jump {jump} vs handle/2 {}",
            handle.abs() / 2.0
        );
    }

    #[test]
    fn handle_size_is_stable_in_the_loop_radius() {
        let (_, field) = solved_single_handle();
        let forms = build_forms(&field);
        let h3 = forms.handle_size(0, 3).unwrap();
        let h4 = forms.handle_size(0, 4).unwrap();
        let h6 = forms.handle_size(0, 6).unwrap();
        assert!((h3 - h4).abs() <= 0.1 * h4.abs());
        assert!((h6 - h4).abs() <= 0.1 * h4.abs());
        // a loop around a regular node encloses no singularity
        let regular = forms
            .loop_integral(FormKind::Du, (forms.grid.nx / 2 + 15, forms.grid.axis_row()), 3)
            .unwrap();
        assert!(regular.abs() <= forms.closedness_bound(3) + 1e-12);
    }

    #[test]
    fn mirror_symmetry_of_forms() {
        let (_, field) = solved_single_handle();
        let forms = build_forms(&field);
        let g = forms.grid;
        for ax in 0..g.nx {
            for ay in 0..g.ny {
                let m = g.ny - 1 - ay; // mirrored cell row
                let c = g.cidx(ax, ay);
                let cm = g.cidx(ax, m);
                // tau^* dX2 = dX2 and tau^* dX1 = -dX1
                assert!((forms.dx2.p[c] - forms.dx2.p[cm]).abs() < 1e-12);
                assert!((forms.dx2.q[c] + forms.dx2.q[cm]).abs() < 1e-12);
                assert!((forms.dx1.p[c] + forms.dx1.p[cm]).abs() < 1e-12);
                assert!((forms.dx1.q[c] - forms.dx1.q[cm]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dx2_and_dx3_loops_around_singularities_vanish() {
        let (_, field) = solved_single_handle();
        let forms = build_forms(&field);
        let node = forms.singular_nodes[0];
        let l2 = forms.loop_integral(FormKind::Dx2, node, 4).unwrap();
        let l3 = forms.loop_integral(FormKind::Dx3, node, 4).unwrap();
        let bound = forms.closedness_bound(4) + 1e-12;
        assert!(l2.abs() <= bound, "dX2 loop {l2} vs bound {bound}");
        assert!(l3.abs() <= bound, "dX3 loop {l3} vs bound {bound}");
        // half-loop identity for the period form
        let full = forms.loop_integral(FormKind::Dx1, node, 4).unwrap();
        let half = forms.half_loop_integral(FormKind::Dx1, node, 4).unwrap();
        assert!((full - 2.0 * half).abs() <= bound);
    }
}
