//! Sobolev smoothing: linear finite-element Laplace–Beltrami operators on
//! the design polyline, a P1 Laplacian on the layered volume mesh, and the
//! hybrid parameter-space operator
//! `B = J_Sᵀ (ε1 M + ε2 K) J_S + ε3 I` used as a Hessian stand-in.
//!
//! The discrete identity term is the consistent mass matrix (the `L²`
//! pairing); `ε3` multiplies the literal parameter identity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::deform::{Design, MeshDeformation};
use crate::error::{check_len, Error, Result};
use crate::geometry::{SurfaceMesh, VolumeMesh, DIM};
use crate::linalg::{Cholesky, Mat, SymSparse, SymSparseBuilder};
use crate::math::hypot;
use crate::param::SurfaceParameterization;

const MIN_EDGE: f64 = 1e-14;

/// Scalar P1 mass and stiffness on the surface polyline (`n_s × n_s`).
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceOperators {
    pub mass: SymSparse,
    pub stiffness: SymSparse,
    pub closed: bool,
}

impl SurfaceOperators {
    pub fn len(&self) -> usize {
        self.mass.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `ε1 M + ε2 K`, or `ε1 I + ε2 K` when `identity_as_matrix` is set.
    pub fn system(&self, eps1: f64, eps2: f64, identity_as_matrix: bool) -> Mat {
        let mut a = self.stiffness.to_dense().scaled(eps2);
        if identity_as_matrix {
            a.add_diagonal(eps1);
        } else {
            a = a.add(&self.mass.to_dense().scaled(eps1));
        }
        a
    }
}

/// Assembles on the given polyline. Closed curves wrap the last edge.
pub fn assemble_surface_operators(mesh: &SurfaceMesh) -> Result<SurfaceOperators> {
    surface_operators_from_coords(&mesh.coords(), mesh.is_closed())
}

/// As [`assemble_surface_operators`] on flattened `(x, y)` coordinates,
/// without any other mesh validation.
pub fn surface_operators_from_coords(coords: &[f64], closed: bool) -> Result<SurfaceOperators> {
    let n = coords.len() / DIM;
    if n < 2 || !coords.len().is_multiple_of(DIM) {
        return Err(Error::Assembly(format!("{} coordinates do not form a polyline", coords.len())));
    }
    let mut mass = SymSparseBuilder::new(n);
    let mut stiff = SymSparseBuilder::new(n);
    let n_edges = if closed { n } else { n - 1 };
    for e in 0..n_edges {
        let (i, j) = (e, (e + 1) % n);
        let h = hypot(coords[DIM * j] - coords[DIM * i], coords[DIM * j + 1] - coords[DIM * i + 1]);
        if !(h >= MIN_EDGE) {
            return Err(Error::Assembly(format!("edge {i}-{j} has length {h:e}")));
        }
        mass.add(i, i, h / 3.0);
        mass.add(j, j, h / 3.0);
        mass.add(i, j, h / 6.0);
        stiff.add(i, i, 1.0 / h);
        stiff.add(j, j, 1.0 / h);
        stiff.add(i, j, -1.0 / h);
    }
    Ok(SurfaceOperators {
        mass: mass.build(),
        stiffness: stiff.build(),
        closed,
    })
}

fn check_smoothing(eps1: f64, eps2: f64) -> Result<()> {
    if !(eps1 >= 0.0) || !(eps2 >= 0.0) {
        return Err(Error::InvalidWeights(format!("ε1 = {eps1}, ε2 = {eps2} must be non-negative")));
    }
    Ok(())
}

/// Applies the scalar solve of `a` to each of the `d` interleaved
/// components of `rhs` (a field of length `n` or `d·n`).
fn solve_componentwise(chol: &Cholesky, n: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    let comps = if rhs.len() == n { 1 } else { DIM };
    check_len("nodal field", comps * n, rhs.len())?;
    let mut out = vec![0.0; rhs.len()];
    let mut col = vec![0.0; n];
    for c in 0..comps {
        for i in 0..n {
            col[i] = rhs[comps * i + c];
        }
        for (i, v) in chol.solve(&col).into_iter().enumerate() {
            out[comps * i + c] = v;
        }
    }
    Ok(out)
}

fn apply_componentwise(a: &SymSparse, f: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    let comps = if f.len() == n { 1 } else { DIM };
    check_len("nodal field", comps * n, f.len())?;
    let mut out = vec![0.0; f.len()];
    let mut col = vec![0.0; n];
    for c in 0..comps {
        for i in 0..n {
            col[i] = f[comps * i + c];
        }
        for (i, v) in a.matvec(&col).into_iter().enumerate() {
            out[comps * i + c] = v;
        }
    }
    Ok(out)
}

/// Nodal-field smoothing: solves `(ε1 M + ε2 K) g = M f`. `f` is either a
/// scalar field or an interleaved vector field.
pub fn smooth_surface_field(ops: &SurfaceOperators, f: &[f64], eps1: f64, eps2: f64) -> Result<Vec<f64>> {
    let mf = apply_componentwise(&ops.mass, f)?;
    reinterpret_gradient(ops, &mf, eps1, eps2)
}

/// Dual-vector smoothing: solves `(ε1 M + ε2 K) g = rhs`.
pub fn reinterpret_gradient(ops: &SurfaceOperators, rhs: &[f64], eps1: f64, eps2: f64) -> Result<Vec<f64>> {
    check_smoothing(eps1, eps2)?;
    let chol = Cholesky::factor(&ops.system(eps1, eps2, false))?;
    solve_componentwise(&chol, ops.len(), rhs)
}

/// Expands a scalar `n × n` matrix to the interleaved `d·n × d·n` block form.
pub fn block_expand(a: &Mat) -> Mat {
    let n = a.rows();
    Mat::from_fn(DIM * n, DIM * n, |r, c| {
        if r % DIM == c % DIM {
            a[(r / DIM, c / DIM)]
        } else {
            0.0
        }
    })
}

/// P1 mass and stiffness on all volume nodes plus the outer-layer mask.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeOperators {
    pub mass: SymSparse,
    pub stiffness: SymSparse,
    /// Indices of nodes kept after the zero-Dirichlet elimination of the
    /// outer layer.
    pub free: Vec<usize>,
}

impl VolumeOperators {
    pub fn reduced_mass(&self) -> SymSparse {
        self.mass.restrict(&self.free)
    }

    pub fn reduced_stiffness(&self) -> SymSparse {
        self.stiffness.restrict(&self.free)
    }
}

pub fn assemble_volume_operators(volume: &VolumeMesh) -> Result<VolumeOperators> {
    volume_operators_from_coords(volume, &volume.coords())
}

/// Volume operators for the topology of `volume` on coordinates `m`.
pub fn volume_operators_from_coords(volume: &VolumeMesh, m: &[f64]) -> Result<VolumeOperators> {
    check_len("volume coordinates", DIM * volume.len(), m.len())?;
    let n = volume.len();
    let mut mass = SymSparseBuilder::new(n);
    let mut stiff = SymSparseBuilder::new(n);
    let pt = |i: usize| [m[DIM * i], m[DIM * i + 1]];
    for tri in volume.triangles() {
        let [a, b, c] = tri.map(pt);
        let twice = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let area = 0.5 * twice.abs();
        if !(area >= MIN_EDGE) {
            return Err(Error::Assembly(format!("cell {tri:?} has area {area:e}")));
        }
        // Gradients of the barycentric basis are (y_j − y_k, x_k − x_j)/2A.
        let pts = [a, b, c];
        let grad: [[f64; 2]; 3] = core::array::from_fn(|r| {
            let (p, q) = (pts[(r + 1) % 3], pts[(r + 2) % 3]);
            [p[1] - q[1], q[0] - p[0]]
        });
        for r in 0..3 {
            for s in 0..=r {
                let (i, j) = (tri[r], tri[s]);
                let k = (grad[r][0] * grad[s][0] + grad[r][1] * grad[s][1]) / (4.0 * area);
                let mm = if r == s { area / 6.0 } else { area / 12.0 };
                stiff.add(i, j, k);
                mass.add(i, j, mm);
            }
        }
    }
    let free = (0..n).filter(|&i| !volume.is_outer(i)).collect();
    Ok(VolumeOperators {
        mass: mass.build(),
        stiffness: stiff.build(),
        free,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingWeights {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    /// Uses the identity in place of the mass matrix for the `ε1` term.
    pub identity_as_matrix: bool,
}

impl SmoothingWeights {
    pub fn new(eps1: f64, eps2: f64, eps3: f64) -> Self {
        Self {
            eps1,
            eps2,
            eps3,
            identity_as_matrix: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.eps1, self.eps2, self.eps3];
        if all.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::InvalidWeights(format!(
                "ε = ({}, {}, {}) must be finite and non-negative",
                self.eps1, self.eps2, self.eps3
            )));
        }
        if all.iter().all(|e| *e == 0.0) {
            return Err(Error::InvalidWeights("all of ε1, ε2, ε3 are zero".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formulation {
    Surface,
    Volume,
}

/// Where the smoothing operator lives.
#[derive(Clone, Copy, Debug)]
pub enum OperatorDomain<'a> {
    Surface,
    /// Volume Laplacian on this topology with the outer layer eliminated.
    Volume(&'a VolumeMesh),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridOperator {
    pub b: Mat,
    pub weights: SmoothingWeights,
    pub formulation: Formulation,
}

/// Assembles `B` at `p`. The Laplacian is built on the current shape.
pub fn assemble_hybrid_operator<P, V>(
    design: &Design<'_, P, V>,
    p: &[f64],
    weights: SmoothingWeights,
    domain: OperatorDomain<'_>,
) -> Result<HybridOperator>
where
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    HybridAssembler::new(weights, domain)?.assemble(design, p)
}

/// Reusable assembler. For linear parameterizations the Jacobian is
/// computed once and kept; the mass and stiffness are always rebuilt on the
/// current shape.
#[derive(Clone, Debug)]
pub struct HybridAssembler<'a> {
    weights: SmoothingWeights,
    domain: OperatorDomain<'a>,
    jacobian: Option<Mat>,
}

impl<'a> HybridAssembler<'a> {
    pub fn new(weights: SmoothingWeights, domain: OperatorDomain<'a>) -> Result<Self> {
        weights.validate()?;
        Ok(Self {
            weights,
            domain,
            jacobian: None,
        })
    }

    pub fn weights(&self) -> SmoothingWeights {
        self.weights
    }

    pub fn assemble<P, V>(&mut self, design: &Design<'_, P, V>, p: &[f64]) -> Result<HybridOperator>
    where
        P: SurfaceParameterization,
        V: MeshDeformation,
    {
        let w = self.weights;
        let np = design.n_params();
        let mut b = Mat::zeros(np, np);
        if w.eps1 != 0.0 || w.eps2 != 0.0 {
            let jac = match (&self.jacobian, design.param.is_linear()) {
                (Some(j), true) => j.clone(),
                _ => {
                    let j = match self.domain {
                        OperatorDomain::Surface => design.surface_jacobian(p)?,
                        OperatorDomain::Volume(_) => design.mesh_jacobian(p)?,
                    };
                    if design.param.is_linear() {
                        self.jacobian = Some(j.clone());
                    }
                    j
                }
            };
            let (system, jac) = match self.domain {
                OperatorDomain::Surface => {
                    let ops = assemble_surface_operators(&design.surface(p)?)?;
                    (ops.system(w.eps1, w.eps2, w.identity_as_matrix), jac)
                }
                OperatorDomain::Volume(volume) => {
                    check_len("volume mesh size", design.mesh_len(), DIM * volume.len())?;
                    let ops = volume_operators_from_coords(volume, &design.mesh(p)?)?;
                    let mut a = ops.reduced_stiffness().to_dense().scaled(w.eps2);
                    if w.identity_as_matrix {
                        a.add_diagonal(w.eps1);
                    } else {
                        a = a.add(&ops.reduced_mass().to_dense().scaled(w.eps1));
                    }
                    let rows: Vec<usize> = ops.free.iter().flat_map(|&i| [DIM * i, DIM * i + 1]).collect();
                    let all: Vec<usize> = (0..np).collect();
                    (a, jac.select(&rows, &all))
                }
            };
            b = jac.congruence(&block_expand(&system));
        }
        b.add_diagonal(w.eps3);
        Ok(HybridOperator {
            b: b.symmetrized(),
            weights: w,
            formulation: match self.domain {
                OperatorDomain::Surface => Formulation::Surface,
                OperatorDomain::Volume(_) => Formulation::Volume,
            },
        })
    }
}
