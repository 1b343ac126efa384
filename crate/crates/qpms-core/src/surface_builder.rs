//! Assembly of the conjugate immersion into a triangulated mesh, symmetry
//! extension, embeddedness probes and OBJ/PLY export.
//!
//! Vertices live on the dual grid of the upper half-strip: one vertex per
//! cell center plus extrapolated rows on the axis (y = 0) and the top
//! boundary (y = ell). Axis and top rows sit at the primal node abscissae, so
//! the third coordinate is an exact nodal value of v there: 0 at singular
//! abscissae, phi at the top. X1 and X2 are cumulative dual-path integrals of
//! the immersion forms, normalized so the axis point below x = -1 maps to
//! (0, 0, v(-1, 0)).

use crate::conjugation::{ConjugateForms, FormError, FormKind};
use crate::grid::CellField;
use crate::maximal_solver::ScalarField;
use std::collections::HashMap;
use std::fmt::Write as FmtWrite;
use std::path::Path;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryTag {
    Interior,
    /// axis image curves C_i (vertical symmetry plane x = 0 after solving)
    PlaneX0,
    /// horizontal symmetry curves in z = 0 (B_i and the even A_k proxies)
    PlaneZ0,
    /// horizontal symmetry curves in z = 1
    PlaneZ1,
    /// images of the boundary vertices a_k
    VerticalLineAk,
    /// open boundary left by the window truncation
    Truncation,
}

impl BoundaryTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryTag::Interior => "interior",
            BoundaryTag::PlaneX0 => "plane_x0",
            BoundaryTag::PlaneZ0 => "plane_z0",
            BoundaryTag::PlaneZ1 => "plane_z1",
            BoundaryTag::VerticalLineAk => "vertical_line_Ak",
            BoundaryTag::Truncation => "truncation",
        }
    }

    pub fn from_id(id: i64) -> BoundaryTag {
        match id {
            1 => BoundaryTag::PlaneX0,
            2 => BoundaryTag::PlaneZ0,
            3 => BoundaryTag::PlaneZ1,
            4 => BoundaryTag::VerticalLineAk,
            5 => BoundaryTag::Truncation,
            _ => BoundaryTag::Interior,
        }
    }

    pub fn id(&self) -> i64 {
        match self {
            BoundaryTag::Interior => 0,
            BoundaryTag::PlaneX0 => 1,
            BoundaryTag::PlaneZ0 => 2,
            BoundaryTag::PlaneZ1 => 3,
            BoundaryTag::VerticalLineAk => 4,
            BoundaryTag::Truncation => 5,
        }
    }

    fn from_name(name: &str) -> Option<BoundaryTag> {
        Some(match name {
            "interior" => BoundaryTag::Interior,
            "plane_x0" => BoundaryTag::PlaneX0,
            "plane_z0" => BoundaryTag::PlaneZ0,
            "plane_z1" => BoundaryTag::PlaneZ1,
            "vertical_line_Ak" => BoundaryTag::VerticalLineAk,
            "truncation" => BoundaryTag::Truncation,
            _ => return None,
        })
    }

    const ALL: [BoundaryTag; 6] = [
        BoundaryTag::Interior,
        BoundaryTag::PlaneX0,
        BoundaryTag::PlaneZ0,
        BoundaryTag::PlaneZ1,
        BoundaryTag::VerticalLineAk,
        BoundaryTag::Truncation,
    ];
}

/// Grid provenance in half-step units: axis nodes at (2 ix, 0), cell centers
/// at (2 ax + 1, 2 r + 1), top nodes at (2 ix, 2 nyu). Vertices from imported
/// files carry copy == u32::MAX.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub copy: u32,
    pub pcol: i32,
    pub prow: i32,
}

#[derive(Clone, Debug)]
pub struct MeshMeta {
    pub ell: f64,
    pub h: f64,
    pub x0: f64,
    pub p: Vec<i64>,
    pub q: Vec<f64>,
    pub f: Vec<f64>,
    pub mesh_tol: f64,
}

#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    pub tags: Vec<BoundaryTag>,
    pub provenance: Vec<Provenance>,
    pub meta: MeshMeta,
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("periods unsolved: max |F| = {max_f} exceeds {allowed}")]
    UnsolvedPeriods { max_f: f64, allowed: f64 },
    #[error("the normalization point x = -1 is not interior to the window")]
    BaseOutsideWindow,
    #[error("at most one mirror copy across x = 0 is supported, got {0}")]
    BadCopies(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },
}

/// Default geometric tolerance for welds and planarity checks.
pub fn default_mesh_tol(h: f64) -> f64 {
    10.0 * h * h
}

pub fn build_fundamental_piece(
    field: &ScalarField,
    forms: &ConjugateForms,
    period_f: &[f64],
    mesh_tol: Option<f64>,
) -> Result<SurfaceMesh, MeshError> {
    let g = field.grid;
    let tol = mesh_tol.unwrap_or_else(|| default_mesh_tol(g.h));
    let max_f = period_f.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if max_f > 2.0 * tol {
        return Err(MeshError::UnsolvedPeriods {
            max_f,
            allowed: 2.0 * tol,
        });
    }
    let ay_axis = forms.axis_cell_row();
    let nyu = g.ny - ay_axis;
    let ix_base = g.node_of_x(-1.0).ok_or(MeshError::BaseOutsideWindow)?;
    if ix_base == 0 || ix_base >= g.nx {
        return Err(MeshError::BaseOutsideWindow);
    }

    let base_cell = (ix_base, ay_axis);
    let mut x1 = forms.integrate_chart(FormKind::Dx1, base_cell)?;
    let mut x2 = forms.integrate_chart(FormKind::Dx2, base_cell)?;
    let n1 = forms.axis_node_value(FormKind::Dx1, &x1, ix_base);
    let n2 = forms.axis_node_value(FormKind::Dx2, &x2, ix_base);
    for v in x1.values.iter_mut() {
        *v -= n1;
    }
    for v in x2.values.iter_mut() {
        *v -= n2;
    }

    let nx = g.nx;
    let n_axis = nx + 1;
    let n_cells = nx * nyu;
    let mut vertices = Vec::with_capacity(2 * n_axis + n_cells);
    let mut tags = Vec::with_capacity(vertices.capacity());
    let mut provenance = Vec::with_capacity(vertices.capacity());

    let singular_cols: Vec<usize> = field.singular_nodes.iter().map(|&(ix, _)| ix).collect();

    // axis row
    for ix in 0..=nx {
        vertices.push([
            forms.axis_node_value(FormKind::Dx1, &x1, ix),
            forms.axis_node_value(FormKind::Dx2, &x2, ix),
            field.value(ix, ay_axis),
        ]);
        let tag = if singular_cols.contains(&ix) {
            BoundaryTag::PlaneZ0
        } else if ix == 0 || ix == nx {
            BoundaryTag::Truncation
        } else {
            BoundaryTag::PlaneX0
        };
        tags.push(tag);
        provenance.push(Provenance {
            copy: 0,
            pcol: 2 * ix as i32,
            prow: 0,
        });
    }
    // cell rows
    for r in 0..nyu {
        let ay = ay_axis + r;
        for ax in 0..nx {
            vertices.push([x1.get(ax, ay), x2.get(ax, ay), field.cell_average(ax, ay)]);
            tags.push(if ax == 0 || ax == nx - 1 {
                BoundaryTag::Truncation
            } else {
                BoundaryTag::Interior
            });
            provenance.push(Provenance {
                copy: 0,
                pcol: 2 * ax as i32 + 1,
                prow: 2 * r as i32 + 1,
            });
        }
    }
    // top row
    for ix in 0..=nx {
        let (v1, v2) = if ix == 0 {
            (
                forms.top_mid_value(FormKind::Dx1, &x1, 0),
                forms.top_mid_value(FormKind::Dx2, &x2, 0),
            )
        } else if ix == nx {
            (
                forms.top_mid_value(FormKind::Dx1, &x1, nx - 1),
                forms.top_mid_value(FormKind::Dx2, &x2, nx - 1),
            )
        } else {
            (
                0.5 * (forms.top_mid_value(FormKind::Dx1, &x1, ix - 1)
                    + forms.top_mid_value(FormKind::Dx1, &x1, ix)),
                0.5 * (forms.top_mid_value(FormKind::Dx2, &x2, ix - 1)
                    + forms.top_mid_value(FormKind::Dx2, &x2, ix)),
            )
        };
        vertices.push([v1, v2, field.value(ix, g.ny)]);
        let x = g.node_x(ix);
        let tag = if ix == 0 || ix == nx {
            BoundaryTag::Truncation
        } else if (x - x.round()).abs() < 0.25 * g.h {
            BoundaryTag::VerticalLineAk
        } else {
            BoundaryTag::Truncation
        };
        tags.push(tag);
        provenance.push(Provenance {
            copy: 0,
            pcol: 2 * ix as i32,
            prow: 2 * nyu as i32,
        });
    }

    let axis_at = |ix: usize| ix as u32;
    let cell_at = |ax: usize, r: usize| (n_axis + r * nx + ax) as u32;
    let top_at = |ix: usize| (n_axis + n_cells + ix) as u32;

    let mut triangles = Vec::new();
    for ax in 0..nx {
        triangles.push([axis_at(ax), axis_at(ax + 1), cell_at(ax, 0)]);
        if ax + 1 < nx {
            triangles.push([axis_at(ax + 1), cell_at(ax + 1, 0), cell_at(ax, 0)]);
        }
    }
    for r in 0..nyu.saturating_sub(1) {
        for ax in 0..nx - 1 {
            triangles.push([cell_at(ax, r), cell_at(ax + 1, r), cell_at(ax + 1, r + 1)]);
            triangles.push([cell_at(ax, r), cell_at(ax + 1, r + 1), cell_at(ax, r + 1)]);
        }
    }
    let last = nyu - 1;
    for ax in 0..nx {
        triangles.push([cell_at(ax, last), top_at(ax + 1), top_at(ax)]);
        if ax + 1 < nx {
            triangles.push([cell_at(ax, last), cell_at(ax + 1, last), top_at(ax + 1)]);
        }
    }

    let q: Vec<f64> = singular_cols.iter().map(|&ix| g.node_x(ix)).collect();
    let p: Vec<i64> = q.iter().map(|&x| (x / 2.0).round() as i64).collect();
    Ok(SurfaceMesh {
        vertices,
        triangles,
        tags,
        provenance,
        meta: MeshMeta {
            ell: field.ell,
            h: g.h,
            x0: g.x0,
            p,
            q,
            f: period_f.to_vec(),
            mesh_tol: tol,
        },
    })
}

/// Append a transformed copy of the whole mesh, welding vertex i onto itself
/// whenever `weld(vertex) <= tol` (the vertex lies on the mirror plane).
fn append_reflection(
    mesh: &mut SurfaceMesh,
    transform: impl Fn(&[f64; 3]) -> [f64; 3],
    on_plane: impl Fn(&[f64; 3]) -> f64,
    copy_offset: u32,
) {
    let tol = mesh.meta.mesh_tol;
    let n = mesh.vertices.len();
    let mut map = vec![0u32; n];
    for i in 0..n {
        if on_plane(&mesh.vertices[i]).abs() <= tol {
            map[i] = i as u32;
        } else {
            map[i] = mesh.vertices.len() as u32;
            let v = transform(&mesh.vertices[i]);
            mesh.vertices.push(v);
            mesh.tags.push(mesh.tags[i]);
            let mut pr = mesh.provenance[i];
            pr.copy += copy_offset;
            mesh.provenance.push(pr);
        }
    }
    let nt = mesh.triangles.len();
    for t in 0..nt {
        let [a, b, c] = mesh.triangles[t];
        let (ma, mb, mc) = (map[a as usize], map[b as usize], map[c as usize]);
        if ma == a && mb == b && mc == c {
            continue; // fully on the plane: the reflection is the same triangle
        }
        mesh.triangles.push([ma, mc, mb]); // reflection flips orientation
    }
}

/// Extend the fundamental piece by the symmetries of the construction:
/// `copies_x` in {0, 1} reflects across the plane x = 0; `copies_z >= 1`
/// reflects across z = 0 and then translates by the vertical period (0,0,2)
/// to cover `copies_z` periods.
pub fn extend_by_symmetry(
    mesh: &SurfaceMesh,
    copies_x: u32,
    copies_z: u32,
) -> Result<SurfaceMesh, MeshError> {
    if copies_x > 1 {
        return Err(MeshError::BadCopies(copies_x));
    }
    let mut out = mesh.clone();
    if copies_x == 1 {
        append_reflection(&mut out, |v| [-v[0], v[1], v[2]], |v| v[0], 1);
    }
    if copies_z >= 1 {
        append_reflection(&mut out, |v| [v[0], v[1], -v[2]], |v| v[2], 2);
    }
    if copies_z >= 2 {
        // translate the slab block by (0, 0, 2k); weld the matching period
        // boundary curves by exact position
        let block_v = out.vertices.clone();
        let block_t = out.triangles.clone();
        let block_tags = out.tags.clone();
        let block_prov = out.provenance.clone();
        let key = |v: &[f64; 3]| (v[0].to_bits(), v[1].to_bits(), v[2].to_bits());
        for k in 1..copies_z {
            let dz = 2.0 * k as f64;
            let mut seam: HashMap<(u64, u64, u64), u32> = HashMap::new();
            let top = 2.0 * k as f64 - 1.0;
            for (i, v) in out.vertices.iter().enumerate() {
                if (v[2] - top).abs() <= 1e-12 {
                    seam.insert(key(v), i as u32);
                }
            }
            let mut map = vec![0u32; block_v.len()];
            for (i, v) in block_v.iter().enumerate() {
                let moved = [v[0], v[1], v[2] + dz];
                if let Some(&j) = seam.get(&key(&moved)) {
                    map[i] = j;
                } else {
                    map[i] = out.vertices.len() as u32;
                    out.vertices.push(moved);
                    out.tags.push(block_tags[i]);
                    let mut pr = block_prov[i];
                    pr.copy += 4 * k;
                    out.provenance.push(pr);
                }
            }
            for t in &block_t {
                let tri = [map[t[0] as usize], map[t[1] as usize], map[t[2] as usize]];
                if tri[0] == t[0] && tri[1] == t[1] && tri[2] == t[2] {
                    continue;
                }
                out.triangles.push(tri);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct EmbeddednessReport {
    /// smallest X1 over interior-tagged vertices
    pub min_interior_x1: f64,
    /// interior vertices with X1 <= 0
    pub x1_violations: usize,
    /// grid columns whose (X2, X3) projection fails injectivity at mesh_tol
    pub column_violations: usize,
    /// closest observed distance between provenance-distinct vertices
    pub min_pair_distance: f64,
    /// provenance-distinct pairs closer than mesh_tol
    pub pairs_below_tol: usize,
}

fn provenance_neighbors(a: &Provenance, b: &Provenance) -> bool {
    a.copy == b.copy && (a.pcol - b.pcol).abs() <= 2 && (a.prow - b.prow).abs() <= 2
}

pub fn embeddedness_probe(mesh: &SurfaceMesh) -> EmbeddednessReport {
    let tol = mesh.meta.mesh_tol;
    let mut min_x1 = f64::INFINITY;
    let mut x1_violations = 0usize;
    for (v, t) in mesh.vertices.iter().zip(mesh.tags.iter()) {
        if *t == BoundaryTag::Interior {
            min_x1 = min_x1.min(v[0]);
            if v[0] <= 0.0 {
                x1_violations += 1;
            }
        }
    }

    // column injectivity of the (X2, X3) projection
    let mut columns: HashMap<(u32, i32), Vec<usize>> = HashMap::new();
    for (i, pr) in mesh.provenance.iter().enumerate() {
        if pr.copy == 0 && pr.pcol % 2 == 1 {
            columns.entry((pr.copy, pr.pcol)).or_default().push(i);
        }
    }
    let mut column_violations = 0usize;
    for (_, ids) in columns.iter() {
        'pairs: for a in 0..ids.len() {
            for b in (a + 1)..ids.len() {
                let va = &mesh.vertices[ids[a]];
                let vb = &mesh.vertices[ids[b]];
                let d = ((va[1] - vb[1]).powi(2) + (va[2] - vb[2]).powi(2)).sqrt();
                if d < tol {
                    column_violations += 1;
                    break 'pairs;
                }
            }
        }
    }

    // near-pair scan over provenance-distinct vertices via a spatial hash
    let cell = (4.0 * tol).max(1e-9);
    let mut buckets: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    let keyf = |v: &[f64; 3]| {
        (
            (v[0] / cell).floor() as i64,
            (v[1] / cell).floor() as i64,
            (v[2] / cell).floor() as i64,
        )
    };
    let mut min_pair = f64::INFINITY;
    let mut below = 0usize;
    for (i, v) in mesh.vertices.iter().enumerate() {
        let (kx, ky, kz) = keyf(v);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = buckets.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &j in ids {
                            let pj = &mesh.provenance[j as usize];
                            if provenance_neighbors(&mesh.provenance[i], pj) {
                                continue;
                            }
                            let w = &mesh.vertices[j as usize];
                            let d = ((v[0] - w[0]).powi(2)
                                + (v[1] - w[1]).powi(2)
                                + (v[2] - w[2]).powi(2))
                            .sqrt();
                            if d < min_pair {
                                min_pair = d;
                            }
                            if d < tol {
                                below += 1;
                            }
                        }
                    }
                }
            }
        }
        buckets.entry((kx, ky, kz)).or_default().push(i as u32);
    }

    EmbeddednessReport {
        min_interior_x1: min_x1,
        x1_violations,
        column_violations,
        min_pair_distance: min_pair,
        pairs_below_tol: below,
    }
}

#[derive(Clone, Debug)]
pub struct PositivityReport {
    pub all_positive: bool,
    /// smallest cumulative integral of dX1 along vertical rays from the axis
    pub min_partial: f64,
}

/// The dy-coefficient of dX1 is (1 - gy^2)/W > 0 on every spacelike cell, so
/// each vertical dual step from the axis adds a positive amount; this records
/// the smallest partial sum as the numeric shadow of the positivity argument.
pub fn vertical_ray_positivity(forms: &ConjugateForms) -> PositivityReport {
    let g = forms.grid;
    let ay_axis = forms.axis_cell_row();
    let mut min_partial = f64::INFINITY;
    for ax in 0..g.nx {
        let mut acc = 0.5 * g.h * forms.dx1.q[g.cidx(ax, ay_axis)];
        min_partial = min_partial.min(acc);
        for ay in ay_axis..g.ny - 1 {
            acc += forms.step_north(FormKind::Dx1, ax, ay);
            min_partial = min_partial.min(acc);
        }
    }
    PositivityReport {
        all_positive: min_partial > 0.0,
        min_partial,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    PlyAscii,
}

fn meta_comment_lines(meta: &MeshMeta, prefix: &str) -> String {
    let join_f = |xs: &[f64]| {
        xs.iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    let join_i = |xs: &[i64]| {
        xs.iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{prefix} ell={} h={} x0={} mesh_tol={}",
        meta.ell, meta.h, meta.x0, meta.mesh_tol
    );
    let _ = writeln!(s, "{prefix} p={}", join_i(&meta.p));
    let _ = writeln!(s, "{prefix} q={}", join_f(&meta.q));
    let _ = writeln!(s, "{prefix} f={}", join_f(&meta.f));
    let _ = writeln!(s, "{prefix} period=0,0,2");
    s
}

pub fn export_mesh(mesh: &SurfaceMesh, path: &Path, format: MeshFormat) -> Result<(), MeshError> {
    let text = match format {
        MeshFormat::Obj => to_obj(mesh),
        MeshFormat::PlyAscii => to_ply(mesh),
    };
    std::fs::write(path, text)?;
    Ok(())
}

fn to_obj(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    s.push_str("# conjugate surface mesh\n");
    s.push_str(&meta_comment_lines(&mesh.meta, "#"));
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    s.push_str("g surface\n");
    for t in &mesh.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    for tag in BoundaryTag::ALL {
        if tag == BoundaryTag::Interior {
            continue;
        }
        let ids: Vec<usize> = (0..mesh.vertices.len())
            .filter(|&i| mesh.tags[i] == tag)
            .collect();
        if ids.is_empty() {
            continue;
        }
        let _ = writeln!(s, "g tag_{}", tag.as_str());
        // maximal runs of consecutive vertex indices become polylines
        let mut run: Vec<usize> = Vec::new();
        let mut flush = |run: &mut Vec<usize>, s: &mut String| {
            if run.len() >= 2 {
                let body = run
                    .iter()
                    .map(|i| (i + 1).to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                let _ = writeln!(s, "l {body}");
            } else if run.len() == 1 {
                let _ = writeln!(s, "p {}", run[0] + 1);
            }
            run.clear();
        };
        for &i in &ids {
            if let Some(&lastv) = run.last() {
                if i != lastv + 1 {
                    flush(&mut run, &mut s);
                }
            }
            run.push(i);
        }
        flush(&mut run, &mut s);
    }
    s
}

fn to_ply(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    s.push_str(&meta_comment_lines(&mesh.meta, "comment"));
    let _ = writeln!(s, "element vertex {}", mesh.vertices.len());
    s.push_str("property double x\nproperty double y\nproperty double z\nproperty int tag\n");
    let _ = writeln!(s, "element face {}", mesh.triangles.len());
    s.push_str("property list uchar uint vertex_indices\nend_header\n");
    for (v, t) in mesh.vertices.iter().zip(mesh.tags.iter()) {
        let _ = writeln!(s, "{} {} {} {}", v[0], v[1], v[2], t.id());
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

fn parse_meta(lines: &[(usize, String)]) -> MeshMeta {
    let mut meta = MeshMeta {
        ell: 0.0,
        h: 0.0,
        x0: 0.0,
        p: vec![],
        q: vec![],
        f: vec![],
        mesh_tol: 0.0,
    };
    for (_, l) in lines {
        for tok in l.split_whitespace() {
            if let Some((k, v)) = tok.split_once('=') {
                let floats = || -> Vec<f64> {
                    v.split(',')
                        .filter(|s| !s.is_empty())
                        .filter_map(|s| s.parse().ok())
                        .collect()
                };
                match k {
                    "ell" => meta.ell = v.parse().unwrap_or(0.0),
                    "h" => meta.h = v.parse().unwrap_or(0.0),
                    "x0" => meta.x0 = v.parse().unwrap_or(0.0),
                    "mesh_tol" => meta.mesh_tol = v.parse().unwrap_or(0.0),
                    "p" => {
                        meta.p = v
                            .split(',')
                            .filter(|s| !s.is_empty())
                            .filter_map(|s| s.parse().ok())
                            .collect()
                    }
                    "q" => meta.q = floats(),
                    "f" => meta.f = floats(),
                    _ => {}
                }
            }
        }
    }
    meta
}

pub fn import_mesh(path: &Path) -> Result<SurfaceMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    if text.starts_with("ply") {
        from_ply(&text)
    } else {
        from_obj(&text)
    }
}

fn from_obj(text: &str) -> Result<SurfaceMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut comments = Vec::new();
    let mut tagged: Vec<(BoundaryTag, Vec<usize>)> = Vec::new();
    let mut current_tag: Option<BoundaryTag> = None;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('#') {
            comments.push((ln, line.trim_start_matches('#').trim().to_string()));
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for k in &mut xyz {
                    *k = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or(MeshError::Parse {
                            line: ln + 1,
                            detail: "bad vertex".into(),
                        })?;
                }
                vertices.push(xyz);
            }
            Some("f") => {
                let mut idx = [0u32; 3];
                for k in &mut idx {
                    let v: i64 = it
                        .next()
                        .and_then(|t| t.split('/').next().unwrap_or(t).parse().ok())
                        .ok_or(MeshError::Parse {
                            line: ln + 1,
                            detail: "bad face".into(),
                        })?;
                    *k = (v - 1) as u32;
                }
                triangles.push(idx);
            }
            Some("g") => {
                let name = it.next().unwrap_or("");
                current_tag = name
                    .strip_prefix("tag_")
                    .and_then(BoundaryTag::from_name);
            }
            Some("l") | Some("p") => {
                if let Some(tag) = current_tag {
                    let ids: Vec<usize> = it
                        .filter_map(|t| t.parse::<usize>().ok())
                        .map(|i| i - 1)
                        .collect();
                    tagged.push((tag, ids));
                }
            }
            _ => {}
        }
    }
    let mut tags = vec![BoundaryTag::Interior; vertices.len()];
    for (tag, ids) in tagged {
        for i in ids {
            if i < tags.len() {
                tags[i] = tag;
            }
        }
    }
    let n = vertices.len();
    Ok(SurfaceMesh {
        vertices,
        triangles,
        tags,
        provenance: vec![
            Provenance {
                copy: u32::MAX,
                pcol: 0,
                prow: 0,
            };
            n
        ],
        meta: parse_meta(&comments),
    })
}

fn from_ply(text: &str) -> Result<SurfaceMesh, MeshError> {
    let mut lines = text.lines().enumerate();
    let mut nv = 0usize;
    let mut nf = 0usize;
    let mut comments = Vec::new();
    for (ln, line) in lines.by_ref() {
        let line = line.trim();
        if line == "end_header" {
            break;
        }
        if let Some(rest) = line.strip_prefix("comment") {
            comments.push((ln, rest.trim().to_string()));
        } else if let Some(rest) = line.strip_prefix("element vertex") {
            nv = rest.trim().parse().map_err(|_| MeshError::Parse {
                line: ln + 1,
                detail: "bad vertex count".into(),
            })?;
        } else if let Some(rest) = line.strip_prefix("element face") {
            nf = rest.trim().parse().map_err(|_| MeshError::Parse {
                line: ln + 1,
                detail: "bad face count".into(),
            })?;
        }
    }
    let mut vertices = Vec::with_capacity(nv);
    let mut tags = Vec::with_capacity(nv);
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nv {
        let (ln, line) = lines.next().ok_or(MeshError::Parse {
            line: 0,
            detail: "truncated vertex list".into(),
        })?;
        let mut it = line.split_whitespace();
        let mut xyz = [0.0; 3];
        for k in &mut xyz {
            *k = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(MeshError::Parse {
                    line: ln + 1,
                    detail: "bad vertex".into(),
                })?;
        }
        let tag: i64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(MeshError::Parse {
                line: ln + 1,
                detail: "missing tag".into(),
            })?;
        vertices.push(xyz);
        tags.push(BoundaryTag::from_id(tag));
    }
    for _ in 0..nf {
        let (ln, line) = lines.next().ok_or(MeshError::Parse {
            line: 0,
            detail: "truncated face list".into(),
        })?;
        let mut it = line.split_whitespace();
        let _count = it.next();
        let mut idx = [0u32; 3];
        for k in &mut idx {
            *k = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(MeshError::Parse {
                    line: ln + 1,
                    detail: "bad face".into(),
                })?;
        }
        triangles.push(idx);
    }
    let n = vertices.len();
    Ok(SurfaceMesh {
        vertices,
        triangles,
        tags,
        provenance: vec![
            Provenance {
                copy: u32::MAX,
                pcol: 0,
                prow: 0,
            };
            n
        ],
        meta: parse_meta(&comments),
    })
}
