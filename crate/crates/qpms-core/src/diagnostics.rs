//! Numerical shadows of the analytic estimates: divergence-ridge detection,
//! boundary flux classification, gradient floors around special points and
//! discrete Gauss curvature of the graph of u.

use crate::conjugation::{ConjugateForms, FormKind};
use crate::grid::CellField;
use crate::maximal_solver::ScalarField;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagError {
    #[error("fields do not share a common grid")]
    GridMismatch,
    #[error("edge from {0} to {1} is not grid-aligned or leaves the window")]
    EdgeNotAligned(f64, f64),
    #[error("({0}, {1}) is not a recognized special point")]
    UnknownSpecialPoint(f64, f64),
    #[error("no singularity with index {0}")]
    BadIndex(usize),
}

#[derive(Clone, Debug)]
pub struct RidgeOptions {
    /// cells with max |grad v| >= 1 - ridge_eps are marked; None = 10 h^2
    pub ridge_eps: Option<f64>,
    /// Chebyshev exclusion radius (cells) around pinned singular nodes
    pub singular_exclusion: usize,
    /// excluded cell rows next to the horizontal boundaries, which are
    /// near-characteristic by construction
    pub boundary_exclusion: usize,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        RidgeOptions {
            ridge_eps: None,
            singular_exclusion: 2,
            boundary_exclusion: 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RidgeSegment {
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub cells: usize,
    /// unit principal direction of the marked cluster
    pub direction: (f64, f64),
}

/// Mark near-lightlike interior cells across a family of fields and fit
/// maximal straight segments through the connected clusters.
pub fn divergence_ridges(
    fields: &[&ScalarField],
    opts: &RidgeOptions,
) -> Result<Vec<RidgeSegment>, DiagError> {
    let first = match fields.first() {
        Some(f) => f,
        None => return Ok(vec![]),
    };
    let g = first.grid;
    if fields.iter().any(|f| f.grid != g) {
        return Err(DiagError::GridMismatch);
    }
    let eps = opts.ridge_eps.unwrap_or(10.0 * g.h * g.h);
    let threshold = 1.0 - eps;
    let bex = opts.boundary_exclusion;
    let sex = opts.singular_exclusion as f64 + 0.5;

    let mut marked = vec![false; g.cell_count()];
    for ax in 0..g.nx {
        for ay in bex..g.ny.saturating_sub(bex) {
            let mut worst: f64 = 0.0;
            for f in fields {
                let (gx, gy) = f.cell_gradient(ax, ay);
                worst = worst.max((gx * gx + gy * gy).sqrt());
            }
            if worst < threshold {
                continue;
            }
            let (cx, cy) = g.cell_center(ax, ay);
            let near_singular = fields.iter().any(|f| {
                f.singular_nodes.iter().any(|&(ix, iy)| {
                    (cx - g.node_x(ix)).abs().max((cy - g.node_y(iy)).abs()) <= sex * g.h
                })
            });
            if !near_singular {
                marked[g.cidx(ax, ay)] = true;
            }
        }
    }

    // connected components (8-neighborhood) and a principal-axis fit
    let mut seen = vec![false; g.cell_count()];
    let mut segments = Vec::new();
    for ax in 0..g.nx {
        for ay in 0..g.ny {
            let c0 = g.cidx(ax, ay);
            if !marked[c0] || seen[c0] {
                continue;
            }
            let mut stack = vec![(ax, ay)];
            let mut cluster = Vec::new();
            seen[c0] = true;
            while let Some((x, y)) = stack.pop() {
                cluster.push(g.cell_center(x, y));
                for dx in -1i64..=1 {
                    for dy in -1i64..=1 {
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= g.nx as i64 || ny >= g.ny as i64 {
                            continue;
                        }
                        let c = g.cidx(nx as usize, ny as usize);
                        if marked[c] && !seen[c] {
                            seen[c] = true;
                            stack.push((nx as usize, ny as usize));
                        }
                    }
                }
            }
            let n = cluster.len() as f64;
            let (mx, my) = cluster
                .iter()
                .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y));
            let (mx, my) = (mx / n, my / n);
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for &(x, y) in &cluster {
                sxx += (x - mx) * (x - mx);
                sxy += (x - mx) * (y - my);
                syy += (y - my) * (y - my);
            }
            // leading eigenvector of the 2x2 covariance
            let tr = sxx + syy;
            let det = sxx * syy - sxy * sxy;
            let lam = 0.5 * tr + (0.25 * tr * tr - det).max(0.0).sqrt();
            let (dx, dy) = if sxy.abs() > 1e-30 {
                (lam - syy, sxy)
            } else if sxx >= syy {
                (1.0, 0.0)
            } else {
                (0.0, 1.0)
            };
            let norm = (dx * dx + dy * dy).sqrt();
            let dir = (dx / norm, dy / norm);
            let mut t_min = f64::INFINITY;
            let mut t_max = f64::NEG_INFINITY;
            for &(x, y) in &cluster {
                let t = (x - mx) * dir.0 + (y - my) * dir.1;
                t_min = t_min.min(t);
                t_max = t_max.max(t);
            }
            segments.push(RidgeSegment {
                start: (mx + t_min * dir.0, my + t_min * dir.1),
                end: (mx + t_max * dir.0, my + t_max * dir.1),
                cells: cluster.len(),
                direction: dir,
            });
        }
    }
    Ok(segments)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FluxTag {
    /// the conjugate potential diverges to +infinity along the edge
    UPlusInf,
    UMinusInf,
    Finite,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FluxEdge {
    /// top edge (k, k+1) x {ell}
    Top { k: i64 },
    /// bottom edge (k, k+1) x {-ell}
    Bottom { k: i64 },
    /// axis segment [x0, x1] on y = 0
    Axis { x0: f64, x1: f64 },
}

#[derive(Clone, Debug)]
pub struct FluxReport {
    pub tag: FluxTag,
    /// integral of dv along the edge, oriented with the domain on the left
    pub flux_oriented: f64,
    pub edge_length: f64,
}

/// Classify the boundary behavior of the conjugate potential along an edge
/// from the limit of the tangential increment of v on interior node rows
/// (Richardson extrapolation from depths h and 2h).
pub fn boundary_flux_classify(
    field: &ScalarField,
    edge: FluxEdge,
    flux_tol: f64,
) -> Result<FluxReport, DiagError> {
    let g = field.grid;
    let (i0, i1, rows, orient, len) = match edge {
        FluxEdge::Top { k } => {
            let i0 = g.node_of_x(k as f64);
            let i1 = g.node_of_x(k as f64 + 1.0);
            match (i0, i1) {
                (Some(a), Some(b)) if b <= g.nx => {
                    // boundary of the strip is traversed east-to-west on top
                    (a, b, [g.ny - 1, g.ny - 2], -1.0, 1.0)
                }
                _ => return Err(DiagError::EdgeNotAligned(k as f64, k as f64 + 1.0)),
            }
        }
        FluxEdge::Bottom { k } => {
            let i0 = g.node_of_x(k as f64);
            let i1 = g.node_of_x(k as f64 + 1.0);
            match (i0, i1) {
                (Some(a), Some(b)) if b <= g.nx => (a, b, [1, 2], 1.0, 1.0),
                _ => return Err(DiagError::EdgeNotAligned(k as f64, k as f64 + 1.0)),
            }
        }
        FluxEdge::Axis { x0, x1 } => {
            let i0 = g.node_of_x(x0);
            let i1 = g.node_of_x(x1);
            let axis = g.axis_row();
            match (i0, i1) {
                (Some(a), Some(b))
                    if b > a
                        && (g.node_x(a) - x0).abs() < 1e-9
                        && (g.node_x(b) - x1).abs() < 1e-9 =>
                {
                    (a, b, [axis, axis], 1.0, x1 - x0)
                }
                _ => return Err(DiagError::EdgeNotAligned(x0, x1)),
            }
        }
    };
    let f_at = |row: usize| field.value(i1, row) - field.value(i0, row);
    let flux = if rows[0] == rows[1] {
        f_at(rows[0])
    } else {
        2.0 * f_at(rows[0]) - f_at(rows[1])
    };
    let oriented = orient * flux;
    let tag = if (oriented - len).abs() <= flux_tol * len {
        FluxTag::UPlusInf
    } else if (oriented + len).abs() <= flux_tol * len {
        FluxTag::UMinusInf
    } else {
        FluxTag::Finite
    };
    Ok(FluxReport {
        tag,
        flux_oriented: oriented,
        edge_length: len,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpecialPoint {
    Singularity(usize),
    VertexTop(i64),
    VertexBottom(i64),
}

/// Largest radius delta such that |grad u| = |grad v| / W >= c on every cell
/// of the punctured disk D(center, delta) (cells incident to the center are
/// the puncture).
pub fn gradient_floor_check(
    field: &ScalarField,
    center: SpecialPoint,
    c: f64,
) -> Result<f64, DiagError> {
    let g = field.grid;
    let (cx, cy) = match center {
        SpecialPoint::Singularity(i) => {
            let &(ix, iy) = field
                .singular_nodes
                .get(i)
                .ok_or(DiagError::BadIndex(i))?;
            (g.node_x(ix), g.node_y(iy))
        }
        SpecialPoint::VertexTop(k) => {
            let x = k as f64;
            if g.node_of_x(x).is_none() {
                return Err(DiagError::UnknownSpecialPoint(x, field.ell));
            }
            (x, field.ell)
        }
        SpecialPoint::VertexBottom(k) => {
            let x = k as f64;
            if g.node_of_x(x).is_none() {
                return Err(DiagError::UnknownSpecialPoint(x, -field.ell));
            }
            (x, -field.ell)
        }
    };
    // inscribed radius from the center, ignoring sides through the center
    let mut rho_max = f64::INFINITY;
    for d in [
        cx - g.x0,
        g.x_hi() - cx,
        cy - g.y0,
        g.node_y(g.ny) - cy,
    ] {
        if d > 0.5 * g.h {
            rho_max = rho_max.min(d);
        }
    }
    let mut delta = 0.0f64;
    let mut k = 1usize;
    loop {
        let rho = k as f64 * g.h;
        if rho > rho_max {
            return Ok(delta.min(rho_max));
        }
        let mut ok = true;
        for ax in 0..g.nx {
            for ay in 0..g.ny {
                let (x, y) = g.cell_center(ax, ay);
                let dist = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                if dist > rho || dist < 0.9 * g.h {
                    continue;
                }
                let (gx, gy) = field.cell_gradient(ax, ay);
                let s = gx * gx + gy * gy;
                let w = (1.0 - s).max(1e-300).sqrt();
                if s.sqrt() / w < c {
                    ok = false;
                    break;
                }
            }
            if !ok {
                break;
            }
        }
        if !ok {
            return Ok(delta);
        }
        delta = rho;
        k += 1;
    }
}

#[derive(Clone, Debug)]
pub struct CurvatureReport {
    /// discrete Gauss curvature per dual-interior upper cell (NaN elsewhere)
    pub k: CellField,
    /// max |K| over cells at distance >= exclusion from special points
    pub max_abs_probe: f64,
    pub exclusion: f64,
}

/// Discrete Gauss curvature K = (u_xx u_yy - u_xy^2) / (1 + |grad u|^2)^2 of
/// the graph of u on the upper half-strip. Cells next to pinned nodes have no
/// full dual stencil and are excluded automatically.
pub fn curvature_field(
    field: &ScalarField,
    forms: &ConjugateForms,
    u: &CellField,
    exclusion: f64,
) -> CurvatureReport {
    let g = field.grid;
    let ay0 = forms.axis_cell_row();
    let h2 = g.h * g.h;
    let mut k = CellField::filled(g, f64::NAN);
    let mut special: Vec<(f64, f64)> = field
        .singular_nodes
        .iter()
        .map(|&(ix, iy)| (g.node_x(ix), g.node_y(iy)))
        .collect();
    for ix in 0..=g.nx {
        let x = g.node_x(ix);
        if (x - x.round()).abs() < 0.25 * g.h {
            special.push((x, field.ell));
        }
    }
    let mut max_abs: f64 = 0.0;
    for ax in 1..g.nx.saturating_sub(1) {
        for ay in (ay0 + 1)..g.ny.saturating_sub(1) {
            let uc = u.get(ax, ay);
            let ue = u.get(ax + 1, ay);
            let uw = u.get(ax - 1, ay);
            let un = u.get(ax, ay + 1);
            let us = u.get(ax, ay - 1);
            let une = u.get(ax + 1, ay + 1);
            let unw = u.get(ax - 1, ay + 1);
            let use_ = u.get(ax + 1, ay - 1);
            let usw = u.get(ax - 1, ay - 1);
            if !us.is_finite() || !usw.is_finite() || !use_.is_finite() {
                continue;
            }
            let uxx = (ue - 2.0 * uc + uw) / h2;
            let uyy = (un - 2.0 * uc + us) / h2;
            let uxy = (une + usw - unw - use_) / (4.0 * h2);
            let (gx, gy) = field.cell_gradient(ax, ay);
            let s = gx * gx + gy * gy;
            let w2 = 1.0 - s;
            let grad_u2 = s / w2;
            let kv = (uxx * uyy - uxy * uxy) / (1.0 + grad_u2).powi(2);
            k.set(ax, ay, kv);
            let (cx, cy) = g.cell_center(ax, ay);
            let clear = special
                .iter()
                .all(|&(sx, sy)| ((cx - sx).powi(2) + (cy - sy).powi(2)).sqrt() >= exclusion);
            if clear {
                max_abs = max_abs.max(kv.abs());
            }
        }
    }
    CurvatureReport {
        k,
        max_abs_probe: max_abs,
        exclusion,
    }
}

/// Max absolute deviation between |grad u| computed from central differences
/// of the integrated u and from the cellwise substitution |grad v|/W, over
/// dual-interior cells at least `exclusion` from special points.
pub fn grad_u_two_ways_deviation(
    field: &ScalarField,
    forms: &ConjugateForms,
    u: &CellField,
    exclusion: f64,
) -> f64 {
    let g = field.grid;
    let ay0 = forms.axis_cell_row();
    let mut special: Vec<(f64, f64)> = field
        .singular_nodes
        .iter()
        .map(|&(ix, iy)| (g.node_x(ix), g.node_y(iy)))
        .collect();
    for ix in 0..=g.nx {
        let x = g.node_x(ix);
        if (x - x.round()).abs() < 0.25 * g.h {
            special.push((x, field.ell));
            special.push((x, -field.ell));
        }
    }
    let mut worst: f64 = 0.0;
    for ax in 1..g.nx.saturating_sub(1) {
        for ay in (ay0 + 1)..g.ny.saturating_sub(1) {
            let (cx, cy) = g.cell_center(ax, ay);
            if cy > field.ell - exclusion {
                continue;
            }
            if special
                .iter()
                .any(|&(sx, sy)| ((cx - sx).powi(2) + (cy - sy).powi(2)).sqrt() < exclusion)
            {
                continue;
            }
            let ux = (u.get(ax + 1, ay) - u.get(ax - 1, ay)) / (2.0 * g.h);
            let uy = (u.get(ax, ay + 1) - u.get(ax, ay - 1)) / (2.0 * g.h);
            if !ux.is_finite() || !uy.is_finite() {
                continue;
            }
            let direct = (ux * ux + uy * uy).sqrt();
            let (gx, gy) = field.cell_gradient(ax, ay);
            let s = gx * gx + gy * gy;
            let subst = s.sqrt() / (1.0 - s).sqrt();
            worst = worst.max((direct - subst).abs());
        }
    }
    worst
}
