//! Discrete Dirichlet problem for the maximal graph equation
//! div(grad v / sqrt(1 - |grad v|^2)) = 0 on a truncated strip box.
//!
//! Discretization: uniform grid, cell-centered gradients over the four
//! corner nodes. The discrete equation at a free node is the exact discrete
//! divergence of the four adjacent cell fluxes, i.e. the critical-point
//! condition of the concave cell-sum of sqrt(1 - |grad v|^2). This pairing is
//! what later makes the discrete conjugate 1-forms closed up to the solver
//! residual.
//!
//! The functional is maximized by damped Newton with an Armijo line search.
//! Cells are kept strictly spacelike by a C^2 quadratic continuation of the
//! cell energy beyond |grad v| = 1 - eps_cap: iterates may wander into the
//! continuation zone, but the solve only reports success once every cell of
//! the solution is strictly inside, where the continuation is inactive and
//! the true Euler-Lagrange residual is the one that converged. When the
//! solution presses against the cap (boundary cells are near-characteristic
//! by construction) the cap is relaxed geometrically and the solve resumed.

use crate::band::BandMatrix;
use crate::grid::Grid;
use crate::strip_domain::{check_admissible, DomainError, SingularSet, StripConfig};
use std::io::Write as IoWrite;
use std::path::Path;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PinKind {
    Free,
    /// boundary node carrying the truncated data phi_n
    Boundary,
    /// singular node pinned to 0
    Singular,
}

/// Discrete solution container.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Grid,
    pub ell: f64,
    /// node values, column-major
    pub values: Vec<f64>,
    pub pin: Vec<PinKind>,
    /// (ix, iy) of pinned singular nodes, in increasing x
    pub singular_nodes: Vec<(usize, usize)>,
    /// max-norm of the discrete Euler-Lagrange residual over free nodes
    pub residual_norm: f64,
    /// cap width at which the solve finished (cells satisfy |g| <= 1 - cap)
    pub eps_cap_final: f64,
}

impl ScalarField {
    #[inline]
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.nidx(ix, iy)]
    }

    /// Cell gradient (gx, gy) of cell (ax, ay).
    #[inline]
    pub fn cell_gradient(&self, ax: usize, ay: usize) -> (f64, f64) {
        let g = &self.grid;
        let v00 = self.values[g.nidx(ax, ay)];
        let v10 = self.values[g.nidx(ax + 1, ay)];
        let v01 = self.values[g.nidx(ax, ay + 1)];
        let v11 = self.values[g.nidx(ax + 1, ay + 1)];
        let s = 0.5 / g.h;
        ((v10 + v11 - v00 - v01) * s, (v01 + v11 - v00 - v10) * s)
    }

    /// Average of the four corner values of a cell.
    #[inline]
    pub fn cell_average(&self, ax: usize, ay: usize) -> f64 {
        let g = &self.grid;
        0.25 * (self.values[g.nidx(ax, ay)]
            + self.values[g.nidx(ax + 1, ay)]
            + self.values[g.nidx(ax, ay + 1)]
            + self.values[g.nidx(ax + 1, ay + 1)])
    }

    pub fn max_cell_gradient(&self) -> f64 {
        let mut m: f64 = 0.0;
        for ax in 0..self.grid.nx {
            for ay in 0..self.grid.ny {
                let (gx, gy) = self.cell_gradient(ax, ay);
                m = m.max((gx * gx + gy * gy).sqrt());
            }
        }
        m
    }

    /// Dump nodes as CSV rows `x,y,v`.
    pub fn dump_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::from("x,y,v\n");
        for iy in 0..=self.grid.ny {
            for ix in 0..=self.grid.nx {
                out.push_str(&format!(
                    "{},{},{}\n",
                    self.grid.node_x(ix),
                    self.grid.node_y(iy),
                    self.value(ix, iy)
                ));
            }
        }
        std::fs::write(path, out)
    }

    /// Regression fixture format: 4 text header lines (nx, ny, h, L) followed
    /// by little-endian f64 node values, row-major (y outer).
    pub fn dump_binary(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "{}", self.grid.nx)?;
        writeln!(f, "{}", self.grid.ny)?;
        writeln!(f, "{}", self.grid.h)?;
        writeln!(f, "{}", self.grid.x_hi())?;
        for iy in 0..=self.grid.ny {
            for ix in 0..=self.grid.nx {
                f.write_all(&self.value(ix, iy).to_le_bytes())?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// residual max-norm postcondition
    pub tol_pde: f64,
    /// initial cap width; None picks h^2
    pub eps_cap: Option<f64>,
    pub max_newton_iters: usize,
    pub max_cap_relaxations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_pde: 1e-8,
            eps_cap: None,
            max_newton_iters: 400,
            max_cap_relaxations: 14,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("singularity {index} is inadmissible (too close to an odd vertex)")]
    Inadmissible { index: usize },
    #[error("singular abscissa {q} snaps outside or too close to the window edge")]
    SingularOutsideWindow { q: f64 },
    #[error("two singular abscissae snap to the same grid node at x = {x}")]
    SingularOverlap { x: f64 },
    #[error("Newton did not reach tolerance; last residual {residual}")]
    NoConvergence { residual: f64 },
    #[error("lightlike cell at ({0}, {1}): |grad v| >= 1")]
    Lightlike(usize, usize),
    #[error("linear solve failed: {0}")]
    Numerical(String),
}

/// Quadratic C^2 continuation of f(s) = -sqrt(1 - s) past s_bar.
#[inline]
fn cell_energy(s: f64, s_bar: f64) -> (f64, f64, f64) {
    if s <= s_bar {
        let w = (1.0 - s).sqrt();
        let fp = 0.5 / w;
        (-w, fp, 0.25 / (w * w * w))
    } else {
        let w = (1.0 - s_bar).sqrt();
        let fp_bar = 0.5 / w;
        let fpp_bar = 0.25 / (w * w * w);
        let d = s - s_bar;
        (
            -w + fp_bar * d + 0.5 * fpp_bar * d * d,
            fp_bar + fpp_bar * d,
            fpp_bar,
        )
    }
}

/// corner sign pattern: n00, n10, n01, n11
const CORNER_SIGNS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)];

struct Problem {
    grid: Grid,
    ell: f64,
    pin: Vec<PinKind>,
    pinned_values: Vec<f64>,
    singular_nodes: Vec<(usize, usize)>,
    free_index: Vec<i64>,
    free_nodes: Vec<usize>,
}

fn build_problem(cfg: &StripConfig, s: &SingularSet) -> Result<Problem, SolveError> {
    let adm = check_admissible(cfg, s);
    if let Some((index, _)) = adm.violating {
        return Err(SolveError::Inadmissible { index });
    }
    let h = cfg.grid_h;
    let (lo, hi) = cfg.x_window;
    let nx = ((hi - lo) / h).round() as usize;
    let ny = ((2.0 * cfg.ell) / h).round() as usize;
    let grid = Grid {
        h,
        x0: lo,
        y0: -cfg.ell,
        nx,
        ny,
    };
    let axis = grid.axis_row();
    let snapped = s.snapped(h);
    let mut singular_nodes = Vec::with_capacity(snapped.len());
    for &q in &snapped.q {
        let t = (q - lo) / h;
        let ix = t.round() as i64;
        if ix < 2 || ix > nx as i64 - 2 {
            return Err(SolveError::SingularOutsideWindow { q });
        }
        let node = (ix as usize, axis);
        if singular_nodes.contains(&node) {
            return Err(SolveError::SingularOverlap { x: q });
        }
        singular_nodes.push(node);
    }

    let mut pin = vec![PinKind::Free; grid.node_count()];
    let mut pinned_values = vec![0.0; grid.node_count()];
    for ix in 0..=nx {
        for iy in 0..=ny {
            if grid.is_boundary_node(ix, iy) {
                let id = grid.nidx(ix, iy);
                pin[id] = PinKind::Boundary;
                pinned_values[id] = if ix == 0 || ix == nx {
                    0.0
                } else {
                    cfg.phi(grid.node_x(ix))
                };
            }
        }
    }
    for &(ix, iy) in &singular_nodes {
        let id = grid.nidx(ix, iy);
        pin[id] = PinKind::Singular;
        pinned_values[id] = 0.0;
    }

    let mut free_index = vec![-1i64; grid.node_count()];
    let mut free_nodes = Vec::new();
    for ix in 0..=nx {
        for iy in 0..=ny {
            let id = grid.nidx(ix, iy);
            if pin[id] == PinKind::Free {
                free_index[id] = free_nodes.len() as i64;
                free_nodes.push(id);
            }
        }
    }

    Ok(Problem {
        grid,
        ell: cfg.ell,
        pin,
        pinned_values,
        singular_nodes,
        free_index,
        free_nodes,
    })
}

fn initial_guess(prob: &Problem, cfg: &StripConfig) -> Vec<f64> {
    let g = &prob.grid;
    let mut v = vec![0.0; g.node_count()];
    for ix in 0..=g.nx {
        let x = g.node_x(ix);
        let top = cfg.phi(x);
        for iy in 0..=g.ny {
            let id = g.nidx(ix, iy);
            v[id] = match prob.pin[id] {
                PinKind::Free => {
                    let t = g.node_y(iy).abs() / prob.ell;
                    0.5 * (1.0 - t) + top * t
                }
                _ => prob.pinned_values[id],
            };
        }
    }
    v
}

fn symmetrize(grid: &Grid, v: &mut [f64]) {
    let ny = grid.ny;
    for ix in 0..=grid.nx {
        for iy in 0..(ny + 1) / 2 {
            let a = grid.nidx(ix, iy);
            let b = grid.nidx(ix, ny - iy);
            let m = 0.5 * (v[a] + v[b]);
            v[a] = m;
            v[b] = m;
        }
    }
}

struct CellData {
    gx: Vec<f64>,
    gy: Vec<f64>,
    s: Vec<f64>,
    fp: Vec<f64>,
    fpp: Vec<f64>,
}

impl CellData {
    fn new(n: usize) -> Self {
        CellData {
            gx: vec![0.0; n],
            gy: vec![0.0; n],
            s: vec![0.0; n],
            fp: vec![0.0; n],
            fpp: vec![0.0; n],
        }
    }
}

/// energy and per-cell data at the given state
fn eval_cells(grid: &Grid, v: &[f64], s_bar: f64, cd: &mut CellData) -> f64 {
    let h = grid.h;
    let scale = 0.5 / h;
    let mut energy = 0.0;
    for ax in 0..grid.nx {
        let col = ax * (grid.ny + 1);
        for ay in 0..grid.ny {
            let v00 = v[col + ay];
            let v01 = v[col + ay + 1];
            let v10 = v[col + grid.ny + 1 + ay];
            let v11 = v[col + grid.ny + 1 + ay + 1];
            let gx = (v10 + v11 - v00 - v01) * scale;
            let gy = (v01 + v11 - v00 - v10) * scale;
            let s = gx * gx + gy * gy;
            let (f, fp, fpp) = cell_energy(s, s_bar);
            let c = grid.cidx(ax, ay);
            cd.gx[c] = gx;
            cd.gy[c] = gy;
            cd.s[c] = s;
            cd.fp[c] = fp;
            cd.fpp[c] = fpp;
            energy += f;
        }
    }
    energy
}

fn eval_energy_only(grid: &Grid, v: &[f64], s_bar: f64) -> f64 {
    let scale = 0.5 / grid.h;
    let mut energy = 0.0;
    for ax in 0..grid.nx {
        let col = ax * (grid.ny + 1);
        for ay in 0..grid.ny {
            let v00 = v[col + ay];
            let v01 = v[col + ay + 1];
            let v10 = v[col + grid.ny + 1 + ay];
            let v11 = v[col + grid.ny + 1 + ay + 1];
            let gx = (v10 + v11 - v00 - v01) * scale;
            let gy = (v01 + v11 - v00 - v10) * scale;
            energy += cell_energy(gx * gx + gy * gy, s_bar).0;
        }
    }
    energy
}

/// gradient of the (extended) energy w.r.t. free nodes
fn eval_gradient(prob: &Problem, cd: &CellData, grad: &mut [f64]) {
    let g = &prob.grid;
    let inv2h = 0.5 / g.h;
    grad.iter_mut().for_each(|x| *x = 0.0);
    for ax in 0..g.nx {
        for ay in 0..g.ny {
            let c = g.cidx(ax, ay);
            let coef = 2.0 * cd.fp[c];
            let gx = cd.gx[c];
            let gy = cd.gy[c];
            let corners = [
                g.nidx(ax, ay),
                g.nidx(ax + 1, ay),
                g.nidx(ax, ay + 1),
                g.nidx(ax + 1, ay + 1),
            ];
            for (m, &(sx, sy)) in CORNER_SIGNS.iter().enumerate() {
                let fi = prob.free_index[corners[m]];
                if fi >= 0 {
                    grad[fi as usize] += coef * (gx * sx + gy * sy) * inv2h;
                }
            }
        }
    }
}

/// True Euler-Lagrange residual (discrete divergence of the flux
/// grad v / sqrt(1-|grad v|^2)) at every node. Errors on lightlike cells.
pub fn node_residuals(field: &ScalarField) -> Result<Vec<f64>, SolveError> {
    let g = &field.grid;
    let inv2h = 0.5 / g.h;
    let mut r = vec![0.0; g.node_count()];
    for ax in 0..g.nx {
        for ay in 0..g.ny {
            let (gx, gy) = field.cell_gradient(ax, ay);
            let s = gx * gx + gy * gy;
            if s >= 1.0 {
                return Err(SolveError::Lightlike(ax, ay));
            }
            let w = (1.0 - s).sqrt();
            let corners = [
                g.nidx(ax, ay),
                g.nidx(ax + 1, ay),
                g.nidx(ax, ay + 1),
                g.nidx(ax + 1, ay + 1),
            ];
            for (m, &(sx, sy)) in CORNER_SIGNS.iter().enumerate() {
                r[corners[m]] -= (gx * sx + gy * sy) / w * inv2h;
            }
        }
    }
    Ok(r)
}

/// Max-norm of the discrete Euler-Lagrange residual over free nodes.
pub fn residual(field: &ScalarField) -> Result<f64, SolveError> {
    let r = node_residuals(field)?;
    let mut m: f64 = 0.0;
    for (id, &pk) in field.pin.iter().enumerate() {
        if pk == PinKind::Free {
            m = m.max(r[id].abs());
        }
    }
    Ok(m)
}

fn newton(
    prob: &Problem,
    v: &mut Vec<f64>,
    opts: &SolverOptions,
) -> Result<(f64, f64), SolveError> {
    let g = prob.grid;
    let nfree = prob.free_nodes.len();
    let bw = g.ny + 2;
    let mut cd = CellData::new(g.cell_count());
    let mut grad = vec![0.0; nfree];
    let mut eps = opts.eps_cap.unwrap_or(g.h * g.h);
    let tol_inner = (opts.tol_pde * 1e-3).max(1e-12);
    let mut relaxations = 0usize;

    symmetrize(&g, v);
    let mut iter = 0usize;
    loop {
        if iter >= opts.max_newton_iters {
            let res = grad.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            return Err(SolveError::NoConvergence { residual: res });
        }
        let s_bar = (1.0 - eps) * (1.0 - eps);
        let energy = eval_cells(&g, v, s_bar, &mut cd);
        eval_gradient(prob, &cd, &mut grad);
        let grad_inf = grad.iter().fold(0.0f64, |a, &b| a.max(b.abs()));

        if grad_inf <= tol_inner {
            let max_s = cd.s.iter().fold(0.0f64, f64::max);
            if max_s > s_bar {
                // solution presses against the cap: relax and resume
                if relaxations >= opts.max_cap_relaxations {
                    return Err(SolveError::NoConvergence { residual: grad_inf });
                }
                relaxations += 1;
                eps *= 0.25;
                iter += 1;
                continue;
            }
            return Ok((grad_inf, eps));
        }

        // assemble the reduced Hessian (band, lower storage)
        let mut hess = BandMatrix::zeros(nfree, bw);
        let inv2h = 0.5 / g.h;
        for ax in 0..g.nx {
            for ay in 0..g.ny {
                let c = g.cidx(ax, ay);
                let fp2 = 2.0 * cd.fp[c];
                let fpp4 = 4.0 * cd.fpp[c];
                let gx = cd.gx[c];
                let gy = cd.gy[c];
                let corners = [
                    g.nidx(ax, ay),
                    g.nidx(ax + 1, ay),
                    g.nidx(ax, ay + 1),
                    g.nidx(ax + 1, ay + 1),
                ];
                let mut fi = [0i64; 4];
                let mut gb = [0.0f64; 4];
                for m in 0..4 {
                    fi[m] = prob.free_index[corners[m]];
                    let (sx, sy) = CORNER_SIGNS[m];
                    gb[m] = (gx * sx + gy * sy) * inv2h;
                }
                for m in 0..4 {
                    if fi[m] < 0 {
                        continue;
                    }
                    for n in 0..=m {
                        if fi[n] < 0 {
                            continue;
                        }
                        let (sxm, sym) = CORNER_SIGNS[m];
                        let (sxn, syn) = CORNER_SIGNS[n];
                        let bmbn = (sxm * sxn + sym * syn) * inv2h * inv2h;
                        let val = fp2 * bmbn + fpp4 * gb[m] * gb[n];
                        let (i, j) = if fi[m] >= fi[n] {
                            (fi[m] as usize, fi[n] as usize)
                        } else {
                            (fi[n] as usize, fi[m] as usize)
                        };
                        hess.add(i, j, val);
                    }
                }
            }
        }

        // factor with a Levenberg fallback for near-singular cases
        let mut step = grad.iter().map(|x| -x).collect::<Vec<f64>>();
        let mut shift = 0.0;
        let factored = loop {
            let mut m = hess.clone();
            if shift > 0.0 {
                m.add_diagonal(shift);
            }
            match m.cholesky() {
                Ok(f) => break f,
                Err(_) => {
                    shift = if shift == 0.0 {
                        1e-12 * hess.max_diagonal().max(1.0)
                    } else {
                        shift * 100.0
                    };
                    if shift > 1e6 {
                        return Err(SolveError::Numerical(
                            "Hessian factorization failed".into(),
                        ));
                    }
                }
            }
        };
        factored.solve(&mut step);

        let dir_deriv: f64 = grad.iter().zip(step.iter()).map(|(a, b)| a * b).sum();
        // Armijo backtracking
        let mut alpha = 1.0;
        let c1 = 1e-4;
        let mut accepted = false;
        let mut trial = v.clone();
        for _ in 0..60 {
            for (k, &id) in prob.free_nodes.iter().enumerate() {
                trial[id] = v[id] + alpha * step[k];
            }
            let e_trial = eval_energy_only(&g, &trial, s_bar);
            if e_trial <= energy + c1 * alpha * dir_deriv {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // numerically stalled; accept only if already at tolerance
            let max_s = cd.s.iter().fold(0.0f64, f64::max);
            if grad_inf <= opts.tol_pde && max_s <= s_bar {
                return Ok((grad_inf, eps));
            }
            return Err(SolveError::NoConvergence { residual: grad_inf });
        }
        std::mem::swap(v, &mut trial);
        symmetrize(&g, v);
        iter += 1;
    }
}

fn finish(prob: Problem, values: Vec<f64>, eps: f64, opts: &SolverOptions) -> Result<ScalarField, SolveError> {
    let mut field = ScalarField {
        grid: prob.grid,
        ell: prob.ell,
        values,
        pin: prob.pin,
        singular_nodes: prob.singular_nodes,
        residual_norm: f64::INFINITY,
        eps_cap_final: eps,
    };
    let res = residual(&field)?;
    if res > opts.tol_pde {
        return Err(SolveError::NoConvergence { residual: res });
    }
    field.residual_norm = res.max(1e-14);
    Ok(field)
}

/// Solve the Dirichlet problem on the truncated box with pinned singular
/// nodes. Boundary rows carry phi, vertical edges carry 0, singular nodes 0.
pub fn solve_dirichlet(
    cfg: &StripConfig,
    s: &SingularSet,
    opts: &SolverOptions,
) -> Result<ScalarField, SolveError> {
    solve_dirichlet_with_guess(cfg, s, opts, None)
}

/// Same as [`solve_dirichlet`], warm-starting from a previous field on the
/// same grid when available.
pub fn solve_dirichlet_with_guess(
    cfg: &StripConfig,
    s: &SingularSet,
    opts: &SolverOptions,
    guess: Option<&ScalarField>,
) -> Result<ScalarField, SolveError> {
    let prob = build_problem(cfg, s)?;
    let mut v = match guess {
        Some(f) if f.grid == prob.grid => {
            let mut v = f.values.clone();
            for (id, &pk) in prob.pin.iter().enumerate() {
                if pk != PinKind::Free {
                    v[id] = prob.pinned_values[id];
                }
            }
            v
        }
        _ => initial_guess(&prob, cfg),
    };
    let (_, eps) = newton(&prob, &mut v, opts)?;
    finish(prob, v, eps, opts)
}

/// Re-solve on a grid refined by an integer factor, warm-started from the
/// bilinear interpolation of the coarse field.
pub fn refine_and_resolve(
    field: &ScalarField,
    factor: usize,
    opts: &SolverOptions,
) -> Result<ScalarField, SolveError> {
    assert!(factor >= 2, "refinement factor must be >= 2");
    let coarse = &field.grid;
    let cfg = StripConfig {
        ell: field.ell,
        eta: 1.0 - (1.0 - field.ell * field.ell).sqrt(),
        eta0: field.ell, // placeholder wide box; singular positions are kept verbatim
        x_window: (coarse.x0, coarse.x_hi()),
        grid_h: coarse.h / factor as f64,
    };
    let q: Vec<f64> = field
        .singular_nodes
        .iter()
        .map(|&(ix, _)| coarse.node_x(ix))
        .collect();
    let p: Vec<i64> = q.iter().map(|&x| (x / 2.0).round() as i64).collect();
    let s = SingularSet { q, p };

    let prob = build_problem(&cfg, &s)?;
    let fine = prob.grid;
    let f = factor as f64;
    let mut v = vec![0.0; fine.node_count()];
    for ix in 0..=fine.nx {
        let xc = ix as f64 / f;
        let i0 = (xc.floor() as usize).min(coarse.nx - 1);
        let tx = xc - i0 as f64;
        for iy in 0..=fine.ny {
            let yc = iy as f64 / f;
            let j0 = (yc.floor() as usize).min(coarse.ny.saturating_sub(1));
            let ty = yc - j0 as f64;
            let v00 = field.value(i0, j0);
            let v10 = field.value(i0 + 1, j0);
            let v01 = field.value(i0, j0 + 1);
            let v11 = field.value(i0 + 1, j0 + 1);
            v[fine.nidx(ix, iy)] = v00 * (1.0 - tx) * (1.0 - ty)
                + v10 * tx * (1.0 - ty)
                + v01 * (1.0 - tx) * ty
                + v11 * tx * ty;
        }
    }
    for (id, &pk) in prob.pin.iter().enumerate() {
        if pk != PinKind::Free {
            v[id] = prob.pinned_values[id];
        }
    }
    let (_, eps) = newton(&prob, &mut v, opts)?;
    finish(prob, v, eps, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_small() -> StripConfig {
        StripConfig::new(0.8, 0.1, None, Some((-4.0, 4.0)), &[0]).unwrap()
    }

    #[test]
    fn residual_of_constant_and_affine_fields_is_zero() {
        let g = Grid {
            h: 0.1,
            x0: -1.0,
            y0: -0.5,
            nx: 20,
            ny: 10,
        };
        let mut values = vec![0.3; g.node_count()];
        let field = ScalarField {
            grid: g,
            ell: 0.5,
            values: values.clone(),
            pin: vec![PinKind::Free; g.node_count()],
            singular_nodes: vec![],
            residual_norm: 0.0,
            eps_cap_final: 0.0,
        };
        assert_eq!(residual(&field).unwrap(), 0.0);

        for ix in 0..=g.nx {
            for iy in 0..=g.ny {
                values[g.nidx(ix, iy)] = 0.4 * g.node_x(ix) - 0.35 * g.node_y(iy);
            }
        }
        let affine = ScalarField {
            values,
            ..field.clone()
        };
        assert!(residual(&affine).unwrap() < 1e-13);
    }

    #[test]
    fn residual_reports_lightlike_cells() {
        let g = Grid {
            h: 0.1,
            x0: 0.0,
            y0: 0.0,
            nx: 2,
            ny: 2,
        };
        let mut values = vec![0.0; g.node_count()];
        values[g.nidx(1, 1)] = 1.0; // steep spike
        let field = ScalarField {
            grid: g,
            ell: 0.1,
            values,
            pin: vec![PinKind::Free; g.node_count()],
            singular_nodes: vec![],
            residual_norm: 0.0,
            eps_cap_final: 0.0,
        };
        assert!(matches!(residual(&field), Err(SolveError::Lightlike(_, _))));
    }

    #[test]
    fn karcher_layer_solve_satisfies_bounds_symmetry_and_tolerance() {
        let cfg = cfg_small();
        let s = SingularSet::empty();
        let field = solve_dirichlet(&cfg, &s, &SolverOptions::default()).unwrap();
        assert!(field.residual_norm <= 1e-8);
        let g = field.grid;
        let mut pinned_min = f64::INFINITY;
        let mut pinned_max = f64::NEG_INFINITY;
        for (id, &pk) in field.pin.iter().enumerate() {
            if pk != PinKind::Free {
                pinned_min = pinned_min.min(field.values[id]);
                pinned_max = pinned_max.max(field.values[id]);
            }
        }
        for ix in 0..=g.nx {
            for iy in 0..=g.ny {
                let v = field.value(ix, iy);
                assert!(v >= pinned_min && v <= pinned_max, "maximum principle");
                // exact mirror symmetry after symmetrized iteration
                assert_eq!(v, field.value(ix, g.ny - iy));
            }
        }
        assert!(field.max_cell_gradient() < 1.0);
    }

    #[test]
    fn singular_solve_pins_zero_and_keeps_bounds() {
        let cfg = cfg_small();
        let s = SingularSet::centered(&[0], cfg.eta0).unwrap();
        let field = solve_dirichlet(&cfg, &s, &SolverOptions::default()).unwrap();
        let (ix, iy) = field.singular_nodes[0];
        assert_eq!(field.value(ix, iy), 0.0);
        assert!(field.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn interior_periodicity_defect_decays_away_from_edges() {
        // Data is 2-periodic; the truncation breaks exact periodicity by an
        // amount that decays with distance to the vertical edges. Uniqueness
        // on the infinite strip would force |v(x+2,y) - v(x,y)| = 0; at this
        // window size the measured interior defect is small but dominated by
        // truncation, far above tol_pde.
        let cfg = StripConfig::new(0.8, 0.1, None, Some((-6.0, 6.0)), &[0]).unwrap();
        let field = solve_dirichlet(&cfg, &SingularSet::empty(), &SolverOptions::default()).unwrap();
        let g = field.grid;
        let shift = (2.0 / g.h).round() as usize;
        let mut defect_inner: f64 = 0.0;
        for ix in 0..=g.nx {
            let x = g.node_x(ix);
            if x < -2.0 || x + 2.0 > 2.0 {
                continue; // keep 4 units away from both edges
            }
            for iy in 0..=g.ny {
                defect_inner = defect_inner
                    .max((field.value(ix + shift, iy) - field.value(ix, iy)).abs());
            }
        }
        assert!(
            defect_inner < 2e-3,
            "interior periodicity defect {defect_inner}"
        );
    }

    #[test]
    fn refine_keeps_constant_fields_and_tolerance() {
        let cfg = cfg_small();
        let s = SingularSet::empty();
        let coarse = solve_dirichlet(&cfg, &s, &SolverOptions::default()).unwrap();
        let fine = refine_and_resolve(&coarse, 2, &SolverOptions::default()).unwrap();
        assert_eq!(fine.grid.nx, 2 * coarse.grid.nx);
        assert!(fine.residual_norm <= 1e-8);
        // coarse nodes are bilinear-exact start points; solution stays close
        let mut diff: f64 = 0.0;
        for ix in 0..=coarse.grid.nx {
            for iy in 0..=coarse.grid.ny {
                diff = diff.max((coarse.value(ix, iy) - fine.value(2 * ix, 2 * iy)).abs());
            }
        }
        assert!(diff < 0.05, "coarse/fine disagreement {diff}");
    }

    #[test]
    fn richardson_order_on_refinement() {
        let cfg = StripConfig::new(0.8, 0.1, None, Some((-2.0, 2.0)), &[]).unwrap();
        let f1 = solve_dirichlet(&cfg, &SingularSet::empty(), &SolverOptions::default()).unwrap();
        let f2 = refine_and_resolve(&f1, 2, &SolverOptions::default()).unwrap();
        let f4 = refine_and_resolve(&f2, 2, &SolverOptions::default()).unwrap();
        let sup = |a: &ScalarField, b: &ScalarField, f: usize| {
            // compare on interior coarse nodes, two rows off the boundary
            let g = a.grid;
            let mut m: f64 = 0.0;
            for ix in 2..g.nx.saturating_sub(1) {
                for iy in 2..g.ny.saturating_sub(1) {
                    m = m.max((a.value(ix, iy) - b.value(f * ix, f * iy)).abs());
                }
            }
            m
        };
        let d1 = sup(&f1, &f2, 2);
        let d2 = sup(&f2, &f4, 2);
        let order = (d1 / d2).log2();
        assert!(
            order > 1.2,
            "observed refinement order {order} (d1={d1}, d2={d2})"
        );
    }

    #[test]
    fn box_growth_changes_center_monotonically_less() {
        let mk = |l: f64| {
            let cfg = StripConfig::new(0.8, 0.1, None, Some((-l, l)), &[0]).unwrap();
            let s = SingularSet::centered(&[0], cfg.eta0).unwrap();
            solve_dirichlet(&cfg, &s, &SolverOptions::default()).unwrap()
        };
        let fields: Vec<_> = [4.0, 6.0, 8.0, 10.0].iter().map(|&l| mk(l)).collect();
        let sup_center = |a: &ScalarField, b: &ScalarField| {
            let ga = a.grid;
            let gb = b.grid;
            let mut m: f64 = 0.0;
            for ix in 0..=ga.nx {
                let x = ga.node_x(ix);
                if x.abs() > 2.0 {
                    continue;
                }
                let jx = gb.node_of_x(x).unwrap();
                for iy in 0..=ga.ny {
                    m = m.max((a.value(ix, iy) - b.value(jx, iy)).abs());
                }
            }
            m
        };
        let e1 = sup_center(&fields[0], &fields[1]);
        let e2 = sup_center(&fields[1], &fields[2]);
        let e3 = sup_center(&fields[2], &fields[3]);
        assert!(e1 > e2 && e2 > e3, "eps not decreasing: {e1} {e2} {e3}");
    }

    #[test]
    fn near_lightlike_cells_sit_next_to_special_points_or_boundary() {
        let cfg = cfg_small();
        let s = SingularSet::centered(&[0], cfg.eta0).unwrap();
        let field = solve_dirichlet(&cfg, &s, &SolverOptions::default()).unwrap();
        let g = field.grid;
        for ax in 0..g.nx {
            for ay in 0..g.ny {
                let (gx, gy) = field.cell_gradient(ax, ay);
                if (gx * gx + gy * gy).sqrt() < 0.995 {
                    continue;
                }
                // cell centers near: a singular node, a vertex a_k, or the
                // horizontal boundary rows (characteristic data)
                let (cx, cy) = g.cell_center(ax, ay);
                let near_boundary = cy.abs() > field.ell - 2.0 * g.h;
                let near_singular = field.singular_nodes.iter().any(|&(ix, iy)| {
                    let sx = g.node_x(ix);
                    let sy = g.node_y(iy);
                    ((cx - sx).powi(2) + (cy - sy).powi(2)).sqrt() < 3.0 * g.h
                });
                assert!(
                    near_boundary || near_singular,
                    "steep cell far from special points at ({cx}, {cy})"
                );
            }
        }
    }

    #[test]
    fn error_cases() {
        let cfg = cfg_small();
        let bad = SingularSet {
            q: vec![0.5],
            p: vec![0],
        };
        assert!(matches!(
            solve_dirichlet(&cfg, &bad, &SolverOptions::default()),
            Err(SolveError::Inadmissible { index: 0 })
        ));
    }
}
