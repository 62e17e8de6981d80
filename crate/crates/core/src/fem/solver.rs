use super::material::{stress_and_tangent, Mat2};
use super::{DisplacementField, FemError, LoadCase, MaterialParams, SolverOptions};
use crate::geometry::{shape_gradients_physical, Mesh, Side, GAUSS_POINTS};
use crate::par::Execution;
use crate::Vec2;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Mat, Side as TriSide};
use serde::Serialize;
use std::sync::Arc;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct GaussData {
    grads: [[f64; 2]; 6],
    weight: f64,
}

/// Convergence record of one load increment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementReport {
    pub load_factor: f64,
    /// Residual norm after each Newton update.
    pub residuals: Vec<f64>,
    /// Force scale the residuals are measured against.
    pub force_scale: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveReport {
    pub increments: Vec<IncrementReport>,
    pub halvings: usize,
    pub warm_started: bool,
}

impl SolveReport {
    pub fn newton_iterations(&self) -> usize {
        self.increments.iter().map(|i| i.residuals.len()).sum()
    }
}

struct ElementOut {
    ke: [[f64; 12]; 12],
    fe: [f64; 12],
}

struct Assembly {
    values: Vec<f64>,
    residual: Vec<f64>,
    predictor: Vec<f64>,
    reaction_norm: f64,
}

/// A mesh with a fixed set of displacement-controlled nodes.
///
/// Holds the free-DOF numbering, the sparsity pattern of the reduced tangent
/// and its symbolic Cholesky factorization, so repeated solves with different
/// moduli or boundary values only pay for numeric work.
pub struct FemProblem {
    mesh: Arc<Mesh>,
    constrained: Vec<usize>,
    free_index: Vec<u32>,
    n_free: usize,
    pattern: Option<SymbolicSparseColMat<usize>>,
    llt_symbolic: Option<SymbolicLlt<usize>>,
    scatter: Vec<[u32; 144]>,
    gauss: Vec<[GaussData; 3]>,
    execution: Execution,
}

impl std::fmt::Debug for FemProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FemProblem")
            .field("nodes", &self.mesh.node_count())
            .field("constrained", &self.constrained.len())
            .field("free_dofs", &self.n_free)
            .finish()
    }
}

impl FemProblem {
    /// Problem on `mesh` with `constrained_nodes` under displacement control.
    pub fn new(mesh: Arc<Mesh>, constrained_nodes: &[usize]) -> Result<Self, FemError> {
        let n_nodes = mesh.node_count();
        let mut is_constrained = vec![false; n_nodes];
        for &n in constrained_nodes {
            if n >= n_nodes {
                return Err(FemError::InvalidDirichlet(format!("node {n} does not exist")));
            }
            if std::mem::replace(&mut is_constrained[n], true) {
                return Err(FemError::InvalidDirichlet(format!("node {n} constrained twice")));
            }
        }
        let mut free_index = vec![NONE; 2 * n_nodes];
        let mut n_free = 0usize;
        for n in 0..n_nodes {
            if !is_constrained[n] {
                free_index[2 * n] = n_free as u32;
                free_index[2 * n + 1] = n_free as u32 + 1;
                n_free += 2;
            }
        }

        let gauss = mesh
            .elements()
            .iter()
            .enumerate()
            .map(|(e, _)| {
                let x = mesh.element_coords(e);
                GAUSS_POINTS.map(|(a, b, w)| {
                    let (grads, det) = shape_gradients_physical(&x, [a, b]);
                    GaussData { grads, weight: w * det }
                })
            })
            .collect();

        // Lower-triangle pattern of the free-free block.
        let elem_dofs = |conn: &[usize; 6]| -> [u32; 12] {
            std::array::from_fn(|k| free_index[2 * conn[k / 2] + k % 2])
        };
        let mut columns: Vec<Vec<usize>> = vec![Vec::new(); n_free];
        for conn in mesh.elements() {
            let d = elem_dofs(conn);
            for &c in &d {
                if c == NONE {
                    continue;
                }
                for &r in &d {
                    if r != NONE && r >= c {
                        columns[c as usize].push(r as usize);
                    }
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n_free + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0usize);
        for col in &mut columns {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        drop(columns);
        if row_idx.len() >= NONE as usize {
            return Err(FemError::InvalidDirichlet("system too large".into()));
        }
        let scatter = mesh
            .elements()
            .iter()
            .map(|conn| {
                let d = elem_dofs(conn);
                let mut s = [NONE; 144];
                for (a, &r) in d.iter().enumerate() {
                    for (b, &c) in d.iter().enumerate() {
                        if r == NONE || c == NONE || r < c {
                            continue;
                        }
                        let (lo, hi) = (col_ptr[c as usize], col_ptr[c as usize + 1]);
                        let pos = row_idx[lo..hi].binary_search(&(r as usize)).expect("pattern entry");
                        s[a * 12 + b] = (lo + pos) as u32;
                    }
                }
                s
            })
            .collect();

        let (pattern, llt_symbolic) = if n_free > 0 {
            let pattern = SymbolicSparseColMat::new_checked(n_free, n_free, col_ptr, None, row_idx);
            let sym = SymbolicLlt::try_new(pattern.as_ref(), TriSide::Lower)
                .map_err(|e| FemError::Factorization(format!("{e:?}")))?;
            (Some(pattern), Some(sym))
        } else {
            (None, None)
        };

        Ok(FemProblem {
            mesh,
            constrained: constrained_nodes.to_vec(),
            free_index,
            n_free,
            pattern,
            llt_symbolic,
            scatter,
            gauss,
            execution: Execution::default(),
        })
    }

    /// Problem with every node of the outer boundary loop constrained.
    pub fn boundary_controlled(mesh: Arc<Mesh>) -> Result<Self, FemError> {
        let nodes = mesh.boundary().nodes.clone();
        FemProblem::new(mesh, &nodes)
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Constrained nodes, in the order Dirichlet values are expected.
    pub fn constrained_nodes(&self) -> &[usize] {
        &self.constrained
    }

    pub fn free_dofs(&self) -> usize {
        self.n_free
    }

    /// Solves from the undeformed state in `opts.n_increments` proportional
    /// steps towards the Dirichlet values `dirichlet[i]` at
    /// `constrained_nodes()[i]`.
    pub fn solve(
        &self,
        mat: &MaterialParams,
        dirichlet: &[Vec2],
        opts: &SolverOptions,
    ) -> Result<(DisplacementField, SolveReport), FemError> {
        self.solve_from(mat, dirichlet, opts, None)
    }

    /// Like [`FemProblem::solve`], optionally starting from a nearby converged
    /// field and reaching the target in a single increment. Falls back to a
    /// cold incremental solve if the warm start fails.
    pub fn solve_from(
        &self,
        mat: &MaterialParams,
        dirichlet: &[Vec2],
        opts: &SolverOptions,
        initial: Option<&[Vec2]>,
    ) -> Result<(DisplacementField, SolveReport), FemError> {
        opts.validate()?;
        if !mat.is_positive() {
            return Err(FemError::InvalidMaterial(format!("moduli must be positive: {:?}", mat.values)));
        }
        if dirichlet.len() != self.constrained.len() {
            return Err(FemError::InvalidDirichlet(format!(
                "{} values for {} constrained nodes",
                dirichlet.len(),
                self.constrained.len()
            )));
        }
        if let Some(init) = initial {
            if init.len() != self.mesh.node_count() {
                return Err(FemError::LengthMismatch {
                    expected: self.mesh.node_count(),
                    got: init.len(),
                });
            }
            let mut report = SolveReport {
                warm_started: true,
                ..Default::default()
            };
            if let Ok(u) = self.run(mat, dirichlet, init.to_vec(), 1, opts, &mut report) {
                return Ok((DisplacementField::new(self.mesh.clone(), u)?, report));
            }
        }
        let mut report = SolveReport::default();
        let u0 = vec![[0.0; 2]; self.mesh.node_count()];
        let u = self.run(mat, dirichlet, u0, opts.n_increments, opts, &mut report)?;
        Ok((DisplacementField::new(self.mesh.clone(), u)?, report))
    }

    fn run(
        &self,
        mat: &MaterialParams,
        dirichlet: &[Vec2],
        mut u: Vec<Vec2>,
        n_increments: usize,
        opts: &SolverOptions,
        report: &mut SolveReport,
    ) -> Result<Vec<Vec2>, FemError> {
        let base: Vec<Vec2> = self.constrained.iter().map(|&n| u[n]).collect();
        let boundary_at = |t: f64| -> Vec<Vec2> {
            base.iter()
                .zip(dirichlet)
                .map(|(b, d)| [b[0] + t * (d[0] - b[0]), b[1] + t * (d[1] - b[1])])
                .collect()
        };
        let mut t = 0.0;
        let step = 1.0 / n_increments as f64;
        let mut index = 0;
        while t < 1.0 - 1e-12 {
            let mut dt = step.min(1.0 - t);
            let mut halved = false;
            loop {
                let target = if t + dt >= 1.0 - 1e-12 { 1.0 } else { t + dt };
                match self.increment(mat, &mut u.clone(), &boundary_at(target), opts, index) {
                    Ok((next, inc)) => {
                        u = next;
                        report.increments.push(IncrementReport {
                            load_factor: target,
                            ..inc
                        });
                        t = target;
                        break;
                    }
                    Err(
                        e @ (FemError::ElementInverted { .. }
                        | FemError::NewtonDiverged { .. }
                        | FemError::Factorization(_)),
                    ) => {
                        if halved {
                            return Err(e);
                        }
                        halved = true;
                        report.halvings += 1;
                        dt *= 0.5;
                    }
                    Err(e) => return Err(e),
                }
            }
            index += 1;
        }
        Ok(u)
    }

    /// One load increment: a predictor driven by the change of boundary
    /// values, then Newton iterations at fixed boundary values.
    fn increment(
        &self,
        mat: &MaterialParams,
        u: &mut Vec<Vec2>,
        target: &[Vec2],
        opts: &SolverOptions,
        index: usize,
    ) -> Result<(Vec<Vec2>, IncrementReport), FemError> {
        let mut du_d = vec![[0.0; 2]; u.len()];
        for (&n, v) in self.constrained.iter().zip(target) {
            du_d[n] = [v[0] - u[n][0], v[1] - u[n][1]];
        }
        let asm = self.assemble(mat, u, Some(&du_d))?;
        let rhs: Vec<f64> = asm.residual.iter().zip(&asm.predictor).map(|(r, p)| -(r + p)).collect();
        let force_scale = norm(&rhs).max(asm.reaction_norm);
        let mut residuals = Vec::new();
        for (&n, v) in self.constrained.iter().zip(target) {
            u[n] = *v;
        }
        if self.n_free == 0 {
            return Ok((std::mem::take(u), IncrementReport {
                load_factor: 0.0,
                residuals,
                force_scale,
            }));
        }
        if force_scale > 0.0 {
            let delta = self.factor_solve(&asm.values, rhs)?;
            self.update(u, &delta);
        }
        let mut iterations = 0;
        loop {
            let asm = self.assemble(mat, u, None)?;
            let r = norm(&asm.residual);
            residuals.push(r);
            let scale = force_scale.max(asm.reaction_norm);
            if !r.is_finite() {
                return Err(FemError::NewtonDiverged {
                    increment: index,
                    iterations,
                    residual: r,
                });
            }
            if r <= opts.newton_tol * scale || scale == 0.0 {
                return Ok((std::mem::take(u), IncrementReport {
                    load_factor: 0.0,
                    residuals,
                    force_scale: scale,
                }));
            }
            if iterations >= opts.max_newton_iters {
                return Err(FemError::NewtonDiverged {
                    increment: index,
                    iterations,
                    residual: r,
                });
            }
            let rhs: Vec<f64> = asm.residual.iter().map(|v| -v).collect();
            let delta = self.factor_solve(&asm.values, rhs)?;
            self.update(u, &delta);
            iterations += 1;
        }
    }

    fn update(&self, u: &mut [Vec2], delta: &[f64]) {
        for (n, un) in u.iter_mut().enumerate() {
            for c in 0..2 {
                let i = self.free_index[2 * n + c];
                if i != NONE {
                    un[c] += delta[i as usize];
                }
            }
        }
    }

    fn factor_solve(&self, values: &[f64], rhs: Vec<f64>) -> Result<Vec<f64>, FemError> {
        let (Some(pattern), Some(sym)) = (&self.pattern, &self.llt_symbolic) else {
            return Ok(Vec::new());
        };
        let a = SparseColMatRef::new(pattern.as_ref(), values);
        let llt = Llt::try_new_with_symbolic(sym.clone(), a, TriSide::Lower)
            .map_err(|e| FemError::Factorization(format!("{e:?}")))?;
        let mut b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        use faer::linalg::solvers::Solve;
        llt.solve_in_place(&mut b);
        Ok((0..rhs.len()).map(|i| b[(i, 0)]).collect())
    }

    fn element(&self, mat: &MaterialParams, e: usize, u: &[Vec2]) -> Result<ElementOut, FemError> {
        let conn = &self.mesh.elements()[e];
        let phases = &self.mesh.gauss_material()[e];
        let ue: [Vec2; 6] = conn.map(|n| u[n]);
        let mut out = ElementOut {
            ke: [[0.0; 12]; 12],
            fe: [0.0; 12],
        };
        for (gp, phase) in self.gauss[e].iter().zip(phases) {
            let (g, k) = mat.moduli(*phase);
            let mut f: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
            for (ua, ga) in ue.iter().zip(&gp.grads) {
                for i in 0..2 {
                    for j in 0..2 {
                        f[i][j] += ua[i] * ga[j];
                    }
                }
            }
            let (p, a) = stress_and_tangent(&f, g, k).map_err(|err| match err {
                FemError::NonPositiveJacobian(det) => FemError::ElementInverted { element: e, det },
                other => other,
            })?;
            let w = gp.weight;
            for (na, ga) in gp.grads.iter().enumerate() {
                for i in 0..2 {
                    out.fe[2 * na + i] += w * (p[i][0] * ga[0] + p[i][1] * ga[1]);
                }
            }
            // B-contractions: a_ik^{ab} = sum_JL A_iJkL g_aJ g_bL
            for (na, ga) in gp.grads.iter().enumerate() {
                let mut t = [[[0.0; 2]; 2]; 2]; // t[i][k][L] = sum_J A_iJkL g_aJ
                for i in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            t[i][k][l] = a[i][0][k][l] * ga[0] + a[i][1][k][l] * ga[1];
                        }
                    }
                }
                for (nb, gb) in gp.grads.iter().enumerate() {
                    for i in 0..2 {
                        for k in 0..2 {
                            out.ke[2 * na + i][2 * nb + k] += w * (t[i][k][0] * gb[0] + t[i][k][1] * gb[1]);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn assemble(&self, mat: &MaterialParams, u: &[Vec2], du_d: Option<&[Vec2]>) -> Result<Assembly, FemError> {
        let elems = self
            .execution
            .try_map(self.mesh.element_count(), |e| self.element(mat, e, u))?;
        let nnz = self.pattern.as_ref().map_or(0, |p| p.row_idx().len());
        let mut values = vec![0.0; nnz];
        let mut residual = vec![0.0; self.n_free];
        let mut predictor = vec![0.0; self.n_free];
        let mut reaction = vec![0.0; 2 * self.mesh.node_count()];
        for (e, out) in elems.iter().enumerate() {
            let conn = &self.mesh.elements()[e];
            let s = &self.scatter[e];
            let dofs: [usize; 12] = std::array::from_fn(|k| 2 * conn[k / 2] + k % 2);
            for a in 0..12 {
                let fi = self.free_index[dofs[a]];
                if fi == NONE {
                    reaction[dofs[a]] += out.fe[a];
                    continue;
                }
                residual[fi as usize] += out.fe[a];
                for b in 0..12 {
                    let slot = s[a * 12 + b];
                    if slot != NONE {
                        values[slot as usize] += out.ke[a][b];
                    }
                }
                if let Some(du) = du_d {
                    for b in 0..12 {
                        if self.free_index[dofs[b]] == NONE {
                            predictor[fi as usize] += out.ke[a][b] * du[dofs[b] / 2][dofs[b] % 2];
                        }
                    }
                }
            }
        }
        Ok(Assembly {
            values,
            residual,
            predictor,
            reaction_norm: norm(&reaction),
        })
    }

    /// Internal force vector over all DOFs (node-major), for diagnostics.
    pub fn internal_forces(&self, mat: &MaterialParams, u: &[Vec2]) -> Result<Vec<f64>, FemError> {
        let elems = self
            .execution
            .try_map(self.mesh.element_count(), |e| self.element(mat, e, u))?;
        let mut f = vec![0.0; 2 * self.mesh.node_count()];
        for (e, out) in elems.iter().enumerate() {
            for (k, v) in out.fe.iter().enumerate() {
                f[2 * self.mesh.elements()[e][k / 2] + k % 2] += v;
            }
        }
        Ok(f)
    }

    /// First-order change of a converged field `u` along each direction,
    /// from `K_ff du_f = -(dR_f/dmoduli) dm - K_fb du_b` with one
    /// factorization of the tangent at `u`.
    pub fn linear_response(
        &self,
        mat: &MaterialParams,
        u: &[Vec2],
        directions: &[ResponseDirection],
    ) -> Result<Vec<Vec<Vec2>>, FemError> {
        let n_nodes = self.mesh.node_count();
        if u.len() != n_nodes {
            return Err(FemError::LengthMismatch {
                expected: n_nodes,
                got: u.len(),
            });
        }
        if let Some(d) = directions
            .iter()
            .find(|d| !d.boundary.is_empty() && d.boundary.len() != self.constrained.len())
        {
            return Err(FemError::InvalidDirichlet(format!(
                "{} boundary changes for {} constrained nodes",
                d.boundary.len(),
                self.constrained.len()
            )));
        }
        let elems = self
            .execution
            .try_map(self.mesh.element_count(), |e| self.element(mat, e, u))?;
        let nnz = self.pattern.as_ref().map_or(0, |p| p.row_idx().len());
        let mut values = vec![0.0; nnz];
        for (e, out) in elems.iter().enumerate() {
            let s = &self.scatter[e];
            for a in 0..12 {
                for b in 0..12 {
                    let slot = s[a * 12 + b];
                    if slot != NONE {
                        values[slot as usize] += out.ke[a][b];
                    }
                }
            }
        }

        let m = directions.len();
        let mut rhs = Mat::<f64>::zeros(self.n_free, m);
        for i in 0..4 {
            if directions.iter().all(|d| d.moduli[i] == 0.0) {
                continue;
            }
            let mut unit = MaterialParams::new(0.0, 0.0, 0.0, 0.0);
            unit.values[i] = 1.0;
            let f = self.internal_forces(&unit, u)?;
            for (c, d) in directions.iter().enumerate() {
                if d.moduli[i] == 0.0 {
                    continue;
                }
                for (dof, v) in f.iter().enumerate() {
                    let fi = self.free_index[dof];
                    if fi != NONE {
                        rhs[(fi as usize, c)] -= d.moduli[i] * v;
                    }
                }
            }
        }
        let touching: Vec<usize> = (0..elems.len())
            .filter(|&e| {
                self.mesh.elements()[e]
                    .iter()
                    .any(|&n| self.free_index[2 * n] == NONE || self.free_index[2 * n + 1] == NONE)
            })
            .collect();
        let mut du_b = vec![[0.0; 2]; n_nodes];
        for (c, d) in directions.iter().enumerate() {
            if d.boundary.is_empty() {
                continue;
            }
            for (&n, v) in self.constrained.iter().zip(&d.boundary) {
                du_b[n] = *v;
            }
            for &e in &touching {
                let conn = &self.mesh.elements()[e];
                let ke = &elems[e].ke;
                for a in 0..12 {
                    let fi = self.free_index[2 * conn[a / 2] + a % 2];
                    if fi == NONE {
                        continue;
                    }
                    let mut acc = 0.0;
                    for b in 0..12 {
                        if self.free_index[2 * conn[b / 2] + b % 2] == NONE {
                            acc += ke[a][b] * du_b[conn[b / 2]][b % 2];
                        }
                    }
                    rhs[(fi as usize, c)] -= acc;
                }
            }
            for &n in &self.constrained {
                du_b[n] = [0.0; 2];
            }
        }

        if let (Some(pattern), Some(sym)) = (&self.pattern, &self.llt_symbolic) {
            let a = SparseColMatRef::new(pattern.as_ref(), &values);
            let llt = Llt::try_new_with_symbolic(sym.clone(), a, TriSide::Lower)
                .map_err(|e| FemError::Factorization(format!("{e:?}")))?;
            use faer::linalg::solvers::Solve;
            llt.solve_in_place(&mut rhs);
        }
        Ok(directions
            .iter()
            .enumerate()
            .map(|(c, d)| {
                let mut du = vec![[0.0; 2]; n_nodes];
                for (n, v) in du.iter_mut().enumerate() {
                    for k in 0..2 {
                        let fi = self.free_index[2 * n + k];
                        if fi != NONE {
                            v[k] = rhs[(fi as usize, c)];
                        }
                    }
                }
                if !d.boundary.is_empty() {
                    for (&n, v) in self.constrained.iter().zip(&d.boundary) {
                        du[n] = *v;
                    }
                }
                du
            })
            .collect())
    }
}

/// Direction in moduli and boundary-value space for
/// [`FemProblem::linear_response`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseDirection {
    pub moduli: [f64; 4],
    /// Change at each constrained node; empty when the boundary is held.
    pub boundary: Vec<Vec2>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One-shot solve with Dirichlet values on the listed nodes.
pub fn solve(
    mesh: Arc<Mesh>,
    mat: &MaterialParams,
    dirichlet: &[(usize, Vec2)],
    opts: &SolverOptions,
) -> Result<DisplacementField, FemError> {
    let nodes: Vec<usize> = dirichlet.iter().map(|d| d.0).collect();
    let values: Vec<Vec2> = dirichlet.iter().map(|d| d.1).collect();
    let problem = FemProblem::new(mesh, &nodes)?;
    problem.solve(mat, &values, opts).map(|(u, _)| u)
}

/// Specimen test: affine displacement of the load case on the left and right
/// sides, top and bottom traction free.
pub fn solve_dns(
    mesh: Arc<Mesh>,
    mat: &MaterialParams,
    case: LoadCase,
    opts: &SolverOptions,
) -> Result<(DisplacementField, SolveReport), FemError> {
    let mut nodes = mesh.nodes_on_side(Side::Left);
    nodes.extend(mesh.nodes_on_side(Side::Right));
    nodes.sort_unstable();
    nodes.dedup();
    let values: Vec<Vec2> = nodes.iter().map(|&n| case.displacement(mesh.nodes()[n])).collect();
    FemProblem::new(mesh, &nodes)?.solve(mat, &values, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Phase, Rect};

    fn square(n: usize, phase: impl Fn(Vec2) -> Phase) -> Arc<Mesh> {
        Arc::new(Mesh::structured(Rect::new(0.0, 0.0, 1.0, 1.0), n, n, phase).unwrap())
    }

    fn disk(x: Vec2) -> Phase {
        if (x[0] - 0.5).hypot(x[1] - 0.5) <= 0.25 {
            Phase::Inclusion
        } else {
            Phase::Matrix
        }
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let mesh = square(3, disk);
        let p = FemProblem::boundary_controlled(mesh.clone()).unwrap();
        let d = vec![[0.0; 2]; p.constrained_nodes().len()];
        let (u, _) = p.solve(&MaterialParams::reference(), &d, &SolverOptions::default()).unwrap();
        assert!(u.values().iter().all(|v| v == &[0.0, 0.0]));
    }

    #[test]
    fn affine_patch_test() {
        for case in [LoadCase::Tension, LoadCase::Shear] {
            let mesh = square(4, |_| Phase::Matrix);
            let p = FemProblem::boundary_controlled(mesh.clone()).unwrap();
            let d: Vec<Vec2> = p.constrained_nodes().iter().map(|&n| case.displacement(mesh.nodes()[n])).collect();
            let (u, _) = p.solve(&MaterialParams::reference(), &d, &SolverOptions::default()).unwrap();
            for (x, v) in mesh.nodes().iter().zip(u.values()) {
                let e = case.displacement(*x);
                assert!((v[0] - e[0]).abs() < 1e-10 && (v[1] - e[1]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn tangent_matches_residual_derivative() {
        let mesh = square(2, disk);
        let p = FemProblem::new(mesh.clone(), &[]).unwrap();
        let mat = MaterialParams::reference();
        let u: Vec<Vec2> = mesh.nodes().iter().map(|x| [0.05 * x[0] * x[1], -0.03 * x[0] * x[0]]).collect();
        let asm = p.assemble(&mat, &u, None).unwrap();
        let pattern = p.pattern.as_ref().unwrap();
        let dense = |r: usize, c: usize| -> f64 {
            let (r, c) = if r >= c { (r, c) } else { (c, r) };
            let cp = pattern.col_ptr();
            let rows = &pattern.row_idx()[cp[c]..cp[c + 1]];
            rows.binary_search(&r).map(|k| asm.values[cp[c] + k]).unwrap_or(0.0)
        };
        let h = 1e-6;
        for dof in [0usize, 7, 13] {
            let mut up = u.clone();
            let mut um = u.clone();
            up[dof / 2][dof % 2] += h;
            um[dof / 2][dof % 2] -= h;
            let fp = p.internal_forces(&mat, &up).unwrap();
            let fm = p.internal_forces(&mat, &um).unwrap();
            for r in 0..fp.len() {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                assert!((fd - dense(r, dof)).abs() < 1e-6, "({r},{dof}) {fd} vs {}", dense(r, dof));
            }
        }
    }

    #[test]
    fn newton_converges_quadratically() {
        let mesh = square(6, disk);
        let p = FemProblem::boundary_controlled(mesh.clone()).unwrap();
        let d: Vec<Vec2> = p
            .constrained_nodes()
            .iter()
            .map(|&n| LoadCase::Tension.displacement(mesh.nodes()[n]))
            .collect();
        let opts = SolverOptions::default();
        let (_, report) = p.solve(&MaterialParams::reference(), &d, &opts).unwrap();
        assert_eq!(report.increments.len(), 4);
        for inc in &report.increments {
            assert!(inc.residuals.len() <= opts.max_newton_iters);
            let r = &inc.residuals;
            for w in r.windows(2) {
                if w[0] > 1e-12 * inc.force_scale {
                    assert!(w[1] / (w[0] * w[0]) < 1e3 / inc.force_scale, "{r:?}");
                }
            }
        }
    }

    #[test]
    fn moduli_scaling_leaves_field_unchanged() {
        let mesh = square(4, disk);
        let p = FemProblem::boundary_controlled(mesh.clone()).unwrap();
        let d: Vec<Vec2> = p
            .constrained_nodes()
            .iter()
            .map(|&n| {
                let x = mesh.nodes()[n];
                [0.05 * x[1] * x[1], 0.04 * x[0]]
            })
            .collect();
        let opts = SolverOptions::default();
        let mat = MaterialParams::reference();
        let (a, _) = p.solve(&mat, &d, &opts).unwrap();
        let (b, _) = p.solve(&mat.scaled(7.5), &d, &opts).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x[0] - y[0]).abs() < 1e-9 && (x[1] - y[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let mesh = square(4, disk);
        let p = FemProblem::boundary_controlled(mesh.clone()).unwrap();
        let d: Vec<Vec2> = p
            .constrained_nodes()
            .iter()
            .map(|&n| LoadCase::Shear.displacement(mesh.nodes()[n]))
            .collect();
        let opts = SolverOptions::default();
        let (a, _) = p.solve(&MaterialParams::reference(), &d, &opts).unwrap();
        let (b, rep) = p
            .solve_from(&MaterialParams::new(1.1, 3.0, 4.0, 11.0), &d, &opts, Some(a.values()))
            .unwrap();
        assert!(rep.warm_started);
        let (c, _) = p.solve(&MaterialParams::new(1.1, 3.0, 4.0, 11.0), &d, &opts).unwrap();
        for (x, y) in b.values().iter().zip(c.values()) {
            assert!((x[0] - y[0]).abs() < 1e-9 && (x[1] - y[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let mesh = square(5, disk);
        let mat = MaterialParams::reference();
        let opts = SolverOptions::default();
        let d: Vec<Vec2> = mesh.boundary().nodes.iter().map(|&n| LoadCase::Tension.displacement(mesh.nodes()[n])).collect();
        let a = FemProblem::boundary_controlled(mesh.clone())
            .unwrap()
            .with_execution(Execution::Sequential)
            .solve(&mat, &d, &opts)
            .unwrap()
            .0;
        let b = FemProblem::boundary_controlled(mesh)
            .unwrap()
            .with_execution(Execution::Parallel)
            .solve(&mat, &d, &opts)
            .unwrap()
            .0;
        assert_eq!(a, b);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let mesh = square(2, disk);
        let p = FemProblem::boundary_controlled(mesh.clone()).unwrap();
        let opts = SolverOptions::default();
        assert!(p.solve(&MaterialParams::reference(), &[[0.0; 2]; 3], &opts).is_err());
        let d = vec![[0.0; 2]; p.constrained_nodes().len()];
        assert!(p.solve(&MaterialParams::new(-1.0, 3.0, 4.0, 12.0), &d, &opts).is_err());
        assert!(FemProblem::new(mesh, &[0, 0]).is_err());
    }

    #[test]
    fn crushing_boundary_data_fails_cleanly() {
        let mesh = square(2, disk);
        let p = FemProblem::boundary_controlled(mesh.clone()).unwrap();
        let d: Vec<Vec2> = p
            .constrained_nodes()
            .iter()
            .map(|&n| {
                let x = mesh.nodes()[n];
                [-1.5 * x[0], 0.0]
            })
            .collect();
        let opts = SolverOptions {
            n_increments: 1,
            ..Default::default()
        };
        let err = p.solve(&MaterialParams::reference(), &d, &opts).unwrap_err();
        assert!(matches!(
            err,
            FemError::ElementInverted { .. } | FemError::NewtonDiverged { .. } | FemError::Factorization(_)
        ));
    }

    #[test]
    fn linear_response_matches_perturbed_solves() {
        let mesh = square(4, disk);
        let p = FemProblem::boundary_controlled(mesh.clone()).unwrap();
        let opts = SolverOptions {
            newton_tol: 1e-12,
            ..Default::default()
        };
        let base: Vec<Vec2> = p
            .constrained_nodes()
            .iter()
            .map(|&n| LoadCase::Shear.displacement(mesh.nodes()[n]))
            .collect();
        let mat = MaterialParams::reference();
        let u = p.solve(&mat, &base, &opts).unwrap().0;
        let bump: Vec<Vec2> = (0..base.len()).map(|k| [0.01 * (k % 3) as f64, -0.005 * (k % 2) as f64]).collect();
        let dirs = vec![
            ResponseDirection {
                moduli: [0.0, 0.0, 1.0, 0.0],
                boundary: vec![],
            },
            ResponseDirection {
                moduli: [0.5, 0.0, 0.0, 0.0],
                boundary: bump.clone(),
            },
        ];
        let du = p.linear_response(&mat, u.values(), &dirs).unwrap();
        let h = 1e-4;
        for (d, lin) in dirs.iter().zip(&du) {
            let shifted = |s: f64| {
                let mut m = mat;
                for i in 0..4 {
                    m.values[i] += s * d.moduli[i];
                }
                let b: Vec<Vec2> = if d.boundary.is_empty() {
                    base.clone()
                } else {
                    base.iter().zip(&d.boundary).map(|(x, y)| [x[0] + s * y[0], x[1] + s * y[1]]).collect()
                };
                p.solve(&m, &b, &opts).unwrap().0
            };
            let (up, dn) = (shifted(h), shifted(-h));
            let mut err = 0.0f64;
            let mut scale = 0.0f64;
            for ((a, b), l) in up.values().iter().zip(dn.values()).zip(lin) {
                for k in 0..2 {
                    let fd = (a[k] - b[k]) / (2.0 * h);
                    err = err.max((fd - l[k]).abs());
                    scale = scale.max(fd.abs());
                }
            }
            assert!(scale > 0.0 && err < 1e-6 * scale, "{err} vs {scale}");
        }
    }
}
