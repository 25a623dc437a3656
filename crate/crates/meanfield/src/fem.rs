//! Piecewise-linear finite elements on triangulations.
//!
//! Provides stiffness assembly with Dirichlet elimination, cached
//! factorizations for repeated Poisson solves, harmonic extension of
//! boundary data, and point evaluation of nodal fields via a uniform
//! spatial grid for triangle location.

use std::sync::{Arc, OnceLock};

use crate::error::{MfError, Result};
use crate::geometry::{Mesh, Point2};
use crate::linalg::{LuFactor, SparseMat};

/// Barycentric gradients and area of a triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriGeom {
    pub area: f64,
    /// gradient of each barycentric shape function
    pub grad: [Point2; 3],
}

pub fn tri_geom(mesh: &Mesh, t: usize) -> TriGeom {
    let [a, b, c] = mesh.triangles[t];
    let (pa, pb, pc) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
    let area = 0.5 * pb.sub(pa).cross(pc.sub(pa));
    let s = 1.0 / (2.0 * area);
    // grad lambda_a is perpendicular to the opposite edge (b -> c)
    let g = |p: Point2, q: Point2| Point2::new(s * (p.y - q.y), s * (q.x - p.x));
    TriGeom {
        area,
        grad: [g(pb, pc), g(pc, pa), g(pa, pb)],
    }
}

/// P1 finite element space with homogeneous Dirichlet boundary conditions.
pub struct FemSpace {
    pub mesh: Arc<Mesh>,
    /// interior dof index -> mesh node index
    pub interior_nodes: Vec<usize>,
    /// mesh node index -> interior dof index
    pub node_to_dof: Vec<Option<usize>>,
    /// full n x n stiffness matrix (no boundary conditions applied)
    pub stiffness_full: SparseMat,
    /// stiffness restricted to interior dofs
    pub stiffness_int: SparseMat,
    /// raw triplets of the interior stiffness, kept for Jacobian assembly
    pub stiffness_int_triplets: Vec<(usize, usize, f64)>,
    k_int_lu: OnceLock<LuFactor>,
    grid: SpatialGrid,
}

impl FemSpace {
    pub fn new(mesh: Arc<Mesh>) -> Result<FemSpace> {
        let n = mesh.num_nodes();
        let mut interior_nodes = Vec::new();
        let mut node_to_dof = vec![None; n];
        for i in 0..n {
            if !mesh.is_boundary[i] {
                node_to_dof[i] = Some(interior_nodes.len());
                interior_nodes.push(i);
            }
        }
        let mut trip_full = Vec::new();
        let mut trip_int = Vec::new();
        for t in 0..mesh.num_triangles() {
            let geo = tri_geom(&mesh, t);
            let tri = mesh.triangles[t];
            for i in 0..3 {
                for j in 0..3 {
                    let v = geo.area * geo.grad[i].dot(geo.grad[j]);
                    trip_full.push((tri[i], tri[j], v));
                    if let (Some(di), Some(dj)) = (node_to_dof[tri[i]], node_to_dof[tri[j]]) {
                        trip_int.push((di, dj, v));
                    }
                }
            }
        }
        let stiffness_full = SparseMat::from_triplets(n, n, &trip_full)?;
        let m = interior_nodes.len();
        let stiffness_int = SparseMat::from_triplets(m, m, &trip_int)?;
        let grid = SpatialGrid::new(&mesh);
        Ok(FemSpace {
            mesh,
            interior_nodes,
            node_to_dof,
            stiffness_full,
            stiffness_int,
            stiffness_int_triplets: trip_int,
            k_int_lu: OnceLock::new(),
            grid,
        })
    }

    pub fn num_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn stiffness_factor(&self) -> Result<&LuFactor> {
        if self.k_int_lu.get().is_none() {
            let lu = self.stiffness_int.lu()?;
            let _ = self.k_int_lu.set(lu);
        }
        self.k_int_lu
            .get()
            .ok_or_else(|| MfError::LinearSolve("stiffness factorization missing".into()))
    }

    /// Interior restriction of a full nodal vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.interior_nodes.iter().map(|&i| full[i]).collect()
    }

    /// Zero-extension of an interior vector to all nodes.
    pub fn extend(&self, interior: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.mesh.num_nodes()];
        for (d, &i) in self.interior_nodes.iter().enumerate() {
            full[i] = interior[d];
        }
        full
    }

    /// Solves K u = rhs on interior dofs; returns the zero-extended field.
    pub fn poisson_solve(&self, rhs_interior: &[f64]) -> Result<Vec<f64>> {
        let lu = self.stiffness_factor()?;
        Ok(self.extend(&lu.solve_vec(rhs_interior)))
    }

    /// Discrete harmonic extension: returns the nodal field equal to
    /// `boundary_values` on boundary nodes and discretely harmonic inside.
    pub fn harmonic_extension(&self, boundary_values: &[f64]) -> Result<Vec<f64>> {
        let n = self.mesh.num_nodes();
        let mut g = vec![0.0; n];
        for i in 0..n {
            if self.mesh.is_boundary[i] {
                g[i] = boundary_values[i];
            }
        }
        let kg = self.stiffness_full.mul_vec(&g);
        let rhs: Vec<f64> = self.interior_nodes.iter().map(|&i| -kg[i]).collect();
        let mut u = self.poisson_solve(&rhs)?;
        for i in 0..n {
            if self.mesh.is_boundary[i] {
                u[i] = boundary_values[i];
            }
        }
        Ok(u)
    }

    /// Energy (H^-1) norm of an interior residual: sqrt(r^T K^{-1} r).
    pub fn energy_residual_norm(&self, r_interior: &[f64]) -> Result<f64> {
        let lu = self.stiffness_factor()?;
        let x = lu.solve_vec(r_interior);
        Ok(crate::linalg::dot(r_interior, &x).max(0.0).sqrt())
    }

    /// Dirichlet energy (1/2) int |grad u|^2 of a full nodal field.
    pub fn dirichlet_energy(&self, full: &[f64]) -> f64 {
        let ku = self.stiffness_full.mul_vec(full);
        0.5 * crate::linalg::dot(full, &ku)
    }

    /// Locates the triangle containing `p`, returning barycentric weights.
    pub fn locate(&self, p: Point2) -> Option<(usize, [f64; 3])> {
        self.grid.locate(&self.mesh, p)
    }

    /// Evaluates a nodal field at `p` by P1 interpolation.
    pub fn eval(&self, nodal: &[f64], p: Point2) -> Result<f64> {
        let (t, l) = self
            .locate(p)
            .ok_or_else(|| MfError::invalid(format!("point ({}, {}) outside mesh", p.x, p.y)))?;
        let tri = self.mesh.triangles[t];
        Ok(l[0] * nodal[tri[0]] + l[1] * nodal[tri[1]] + l[2] * nodal[tri[2]])
    }
}

/// Uniform bucket grid over the mesh bounding box for triangle location.
struct SpatialGrid {
    x0: f64,
    y0: f64,
    hx: f64,
    hy: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl SpatialGrid {
    fn new(mesh: &Mesh) -> SpatialGrid {
        let mut x0 = f64::INFINITY;
        let mut y0 = f64::INFINITY;
        let mut x1 = f64::NEG_INFINITY;
        let mut y1 = f64::NEG_INFINITY;
        for p in &mesh.nodes {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let nt = mesh.num_triangles().max(1);
        let n = ((nt as f64).sqrt().ceil() as usize).clamp(1, 512);
        let (nx, ny) = (n, n);
        let hx = ((x1 - x0) / nx as f64).max(1e-300);
        let hy = ((y1 - y0) / ny as f64).max(1e-300);
        let mut buckets = vec![Vec::new(); nx * ny];
        for t in 0..mesh.num_triangles() {
            let tri = mesh.triangles[t];
            let xs: Vec<f64> = tri.iter().map(|&i| mesh.nodes[i].x).collect();
            let ys: Vec<f64> = tri.iter().map(|&i| mesh.nodes[i].y).collect();
            let ix0 = (((xs.iter().cloned().fold(f64::INFINITY, f64::min) - x0) / hx).floor()
                as isize)
                .clamp(0, nx as isize - 1) as usize;
            let ix1 = (((xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x0) / hx).floor()
                as isize)
                .clamp(0, nx as isize - 1) as usize;
            let iy0 = (((ys.iter().cloned().fold(f64::INFINITY, f64::min) - y0) / hy).floor()
                as isize)
                .clamp(0, ny as isize - 1) as usize;
            let iy1 = (((ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y0) / hy).floor()
                as isize)
                .clamp(0, ny as isize - 1) as usize;
            for ix in ix0..=ix1 {
                for iy in iy0..=iy1 {
                    buckets[iy * nx + ix].push(t);
                }
            }
        }
        SpatialGrid {
            x0,
            y0,
            hx,
            hy,
            nx,
            ny,
            buckets,
        }
    }

    fn locate(&self, mesh: &Mesh, p: Point2) -> Option<(usize, [f64; 3])> {
        let ix = (((p.x - self.x0) / self.hx).floor() as isize).clamp(0, self.nx as isize - 1)
            as usize;
        let iy = (((p.y - self.y0) / self.hy).floor() as isize).clamp(0, self.ny as isize - 1)
            as usize;
        // search the home bucket, then widen by one ring for points that sit
        // on bucket borders
        for ring in 0..2isize {
            let mut best: Option<(usize, [f64; 3], f64)> = None;
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    if ring > 0 && dx.abs() < ring && dy.abs() < ring {
                        continue;
                    }
                    let jx = ix as isize + dx;
                    let jy = iy as isize + dy;
                    if jx < 0 || jy < 0 || jx >= self.nx as isize || jy >= self.ny as isize {
                        continue;
                    }
                    for &t in &self.buckets[jy as usize * self.nx + jx as usize] {
                        if let Some((l, slack)) = bary_inside(mesh, t, p) {
                            if best.as_ref().map(|b| slack > b.2).unwrap_or(true) {
                                best = Some((t, l, slack));
                            }
                        }
                    }
                }
            }
            if let Some((t, l, _)) = best {
                return Some((t, l));
            }
        }
        // fallback: linear scan (handles points just outside the polygonal
        // boundary due to circle projection)
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for t in 0..mesh.num_triangles() {
            let (l, slack) = bary_any(mesh, t, p);
            if best.as_ref().map(|b| slack > b.2).unwrap_or(true) {
                best = Some((t, l, slack));
            }
        }
        best.and_then(|(t, l, slack)| if slack > -1e-6 { Some((t, l)) } else { None })
    }
}

fn bary_any(mesh: &Mesh, t: usize, p: Point2) -> ([f64; 3], f64) {
    let [a, b, c] = mesh.triangles[t];
    let (pa, pb, pc) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
    let area2 = pb.sub(pa).cross(pc.sub(pa));
    let l0 = pb.sub(p).cross(pc.sub(p)) / area2;
    let l1 = pc.sub(p).cross(pa.sub(p)) / area2;
    let l2 = pa.sub(p).cross(pb.sub(p)) / area2;
    ([l0, l1, l2], l0.min(l1).min(l2))
}

fn bary_inside(mesh: &Mesh, t: usize, p: Point2) -> Option<([f64; 3], f64)> {
    let (l, slack) = bary_any(mesh, t, p);
    if slack >= -1e-12 {
        Some((l, slack))
    } else {
        None
    }
}
