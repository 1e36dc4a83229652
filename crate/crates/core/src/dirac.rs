//! Discrete spinor bundles, lattice Dirac operators, the crossed-product
//! representation and finite spectral triples.
//!
//! Sections of a rank-`r` bundle over `n` vertices are vectors of length
//! `n * r`; component `c` at vertex `x` sits at index `x * r + c`. The L² inner
//! product is `Σ_x ν(x) ⟨ψ_x, ψ'_x⟩`. Operators are stored in these section
//! coordinates; spectral quantities are computed after conjugating by
//! `diag(√ν)`, which makes the inner product standard.

use std::sync::Arc;

use crate::algebra::{ActionGroupoid, AlgebraElement, GroupAction};
use crate::error::{contract, domain, structural, Result};
use crate::geometry::MetricGraph;
use crate::linalg::{self, c, CMatrix, CVector, C64, I, ONE, ZERO};

/// A trivialized vector bundle over a graph with an equivariant structure:
/// `ρ(g)_x` maps the fiber at `x` to the fiber at `g·x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorBundle {
    base: MetricGraph,
    action: GroupAction,
    rank: usize,
    cocycle: Vec<CMatrix>,
    volumes: Vec<f64>,
}

impl SpinorBundle {
    /// `cocycle[g * n + x] = ρ(g)_x`. Checks unitarity, `ρ(e) = 1`,
    /// the cocycle identity and invariance of the volume weights.
    pub fn new(
        base: MetricGraph,
        action: GroupAction,
        rank: usize,
        cocycle: Vec<CMatrix>,
        volumes: Vec<f64>,
    ) -> Result<Self> {
        let n = base.vertex_count();
        if rank == 0 {
            return domain("bundle rank must be positive");
        }
        if action.points() != n {
            return structural(format!("action on {} points over a graph with {n} vertices", action.points()));
        }
        if volumes.len() != n || volumes.iter().any(|&v| !(v > 0.0)) {
            return domain("volume weights must be positive, one per vertex");
        }
        let grp = action.group();
        if cocycle.len() != grp.order() * n {
            return structural(format!("cocycle has {} entries, expected {}", cocycle.len(), grp.order() * n));
        }
        let id = CMatrix::identity(rank, rank);
        for g in grp.elements() {
            for x in 0..n {
                let m = &cocycle[g * n + x];
                if m.shape() != (rank, rank) {
                    return structural(format!("ρ({g})_{x} is not {rank}×{rank}"));
                }
                if linalg::max_abs_diff(&(m.adjoint() * m), &id) > 1e-12 {
                    return domain(format!("ρ({g})_{x} is not unitary"));
                }
                if (volumes[action.act(g, x)] - volumes[x]).abs() > 1e-12 * volumes[x] {
                    return domain(format!("volume weights are not invariant under element {g} at vertex {x}"));
                }
            }
        }
        for x in 0..n {
            if linalg::max_abs_diff(&cocycle[grp.identity() * n + x], &id) > 1e-12 {
                return domain(format!("ρ(e)_{x} is not the identity"));
            }
        }
        for g in grp.elements() {
            for h in grp.elements() {
                for x in 0..n {
                    let lhs = &cocycle[grp.mul(g, h) * n + x];
                    let rhs = &cocycle[g * n + action.act(h, x)] * &cocycle[h * n + x];
                    if linalg::max_abs_diff(lhs, &rhs) > 1e-12 {
                        return domain(format!("cocycle identity fails for g={g}, h={h}, x={x}"));
                    }
                }
            }
        }
        Ok(Self {
            base,
            action,
            rank,
            cocycle,
            volumes,
        })
    }

    /// Trivial cocycle `ρ(g)_x = 1` and default volumes.
    pub fn trivial(base: MetricGraph, action: GroupAction, rank: usize) -> Result<Self> {
        let count = action.group().order() * base.vertex_count();
        let volumes = base.vertex_volumes();
        Self::new(base, action, rank, vec![CMatrix::identity(rank, rank); count], volumes)
    }

    /// `ρ(g)_x = matrices[g]` at every vertex; `matrices` must be a representation.
    pub fn constant(base: MetricGraph, action: GroupAction, matrices: Vec<CMatrix>) -> Result<Self> {
        if matrices.len() != action.group().order() {
            return structural("one matrix per group element is required");
        }
        let rank = matrices[0].nrows();
        let n = base.vertex_count();
        let cocycle = (0..matrices.len() * n).map(|i| matrices[i / n].clone()).collect();
        let volumes = base.vertex_volumes();
        Self::new(base, action, rank, cocycle, volumes)
    }

    pub fn base(&self) -> &MetricGraph {
        &self.base
    }

    pub fn action(&self) -> &GroupAction {
        &self.action
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn vertex_count(&self) -> usize {
        self.base.vertex_count()
    }

    pub fn section_dim(&self) -> usize {
        self.rank * self.vertex_count()
    }

    pub fn cocycle(&self, g: usize, x: usize) -> &CMatrix {
        &self.cocycle[g * self.vertex_count() + x]
    }

    pub fn cocycle_entries(&self) -> &[CMatrix] {
        &self.cocycle
    }

    /// `(U(g)ψ)_x = ρ(g)_{g⁻¹x} ψ_{g⁻¹x}`.
    pub fn group_unitary(&self, g: usize) -> CMatrix {
        let (n, r) = (self.vertex_count(), self.rank);
        let mut u = CMatrix::zeros(n * r, n * r);
        for y in 0..n {
            let x = self.action.act(g, y);
            u.view_mut((x * r, y * r), (r, r)).copy_from(self.cocycle(g, y));
        }
        u
    }

    /// `diag(√ν)` repeated over fiber components.
    pub fn sqrt_volume(&self) -> Vec<f64> {
        self.volumes
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v.sqrt(), self.rank))
            .collect()
    }

    /// Conjugates an operator in section coordinates to orthonormal coordinates.
    pub fn to_orthonormal(&self, m: &CMatrix) -> CMatrix {
        let s = self.sqrt_volume();
        CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (s[i] / s[j]))
    }

    pub fn from_orthonormal(&self, m: &CMatrix) -> CMatrix {
        let s = self.sqrt_volume();
        CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (s[j] / s[i]))
    }

    pub fn inner(&self, a: &CVector, b: &CVector) -> C64 {
        let r = self.rank;
        (0..a.len())
            .map(|i| a[i].conj() * b[i] * self.volumes[i / r])
            .sum()
    }
}

/// A Dirac operator in section coordinates with an optional grading.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracOperator {
    bundle: SpinorBundle,
    matrix: CMatrix,
    grading: Option<CMatrix>,
}

impl DiracOperator {
    /// Checks shape, ν-hermiticity, locality, and (if present) that the
    /// grading is a ν-hermitian involution anticommuting with the operator.
    pub fn new(bundle: SpinorBundle, matrix: CMatrix, grading: Option<CMatrix>) -> Result<Self> {
        let dim = bundle.section_dim();
        if matrix.shape() != (dim, dim) {
            return structural(format!("Dirac matrix is {:?}, section space has dimension {dim}", matrix.shape()));
        }
        let op = Self {
            bundle,
            matrix,
            grading,
        };
        let herm = linalg::hermitian_defect(&op.hermitian_matrix());
        if herm > 1e-10 {
            return contract(format!("Dirac operator is not self-adjoint (defect {herm:.3e})"));
        }
        let r = op.bundle.rank;
        for x in 0..op.bundle.vertex_count() {
            for y in 0..op.bundle.vertex_count() {
                if x == y || op.bundle.base.edge_length(x, y).is_some() {
                    continue;
                }
                if linalg::max_abs(&op.matrix.view((x * r, y * r), (r, r)).into_owned()) > 0.0 {
                    return contract(format!("Dirac operator couples non-adjacent vertices {x} and {y}"));
                }
            }
        }
        if let Some(w) = &op.grading {
            if w.shape() != (dim, dim) {
                return structural("grading has the wrong shape");
            }
            let wo = op.bundle.to_orthonormal(w);
            if linalg::hermitian_defect(&wo) > 1e-12
                || linalg::max_abs_diff(&(&wo * &wo), &CMatrix::identity(dim, dim)) > 1e-12
            {
                return contract("grading is not a self-adjoint involution");
            }
            if linalg::max_abs(&(w * &op.matrix + &op.matrix * w)) > 1e-10 {
                return contract("grading does not anticommute with the Dirac operator");
            }
        }
        Ok(op)
    }

    pub fn bundle(&self) -> &SpinorBundle {
        &self.bundle
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn grading(&self) -> Option<&CMatrix> {
        self.grading.as_ref()
    }

    /// Grading, or the identity when absent.
    pub fn grading_or_identity(&self) -> CMatrix {
        self.grading
            .clone()
            .unwrap_or_else(|| CMatrix::identity(self.bundle.section_dim(), self.bundle.section_dim()))
    }

    /// The operator in orthonormal coordinates.
    pub fn hermitian_matrix(&self) -> CMatrix {
        self.bundle.to_orthonormal(&self.matrix)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            bundle: self.bundle.clone(),
            matrix: self.matrix.map(|z| z * s),
            grading: self.grading.clone(),
        }
    }

    pub fn norm(&self) -> f64 {
        linalg::spectral_norm(&self.hermitian_matrix())
    }

    /// Lattice Dirac operator on a cycle bundle. Rank 1 is the central
    /// difference `(i/2h)(ψ_{j+1} − ψ_{j−1})`. Rank 2 is
    /// `[[0, −i∇⁻], [−i∇⁺, 0]]` with forward/backward differences and grading
    /// `diag(1, −1)` per vertex.
    pub fn circle(bundle: SpinorBundle) -> Result<Self> {
        let h = bundle
            .base
            .as_cycle()
            .ok_or_else(|| crate::Error::Domain("circle Dirac operator needs a uniform cycle graph".into()))?;
        let n = bundle.vertex_count();
        let next = |j: usize| (j + 1) % n;
        let prev = |j: usize| (j + n - 1) % n;
        match bundle.rank {
            1 => {
                let mut m = CMatrix::zeros(n, n);
                let k = I / (2.0 * h);
                for j in 0..n {
                    m[(j, next(j))] += k;
                    m[(j, prev(j))] -= k;
                }
                Self::new(bundle, m, None)
            }
            2 => {
                let mut m = CMatrix::zeros(2 * n, 2 * n);
                let k = I / h;
                for j in 0..n {
                    // upper: −i(ψ⁻_j − ψ⁻_{j−1})/h
                    m[(2 * j, 2 * j + 1)] -= k;
                    m[(2 * j, 2 * prev(j) + 1)] += k;
                    // lower: −i(ψ⁺_{j+1} − ψ⁺_j)/h
                    m[(2 * j + 1, 2 * next(j))] -= k;
                    m[(2 * j + 1, 2 * j)] += k;
                }
                let w = linalg::kron(&CMatrix::identity(n, n), &linalg::diagonal(&[1.0, -1.0]));
                Self::new(bundle, m, Some(w))
            }
            r => domain(format!("circle Dirac operator supports rank 1 or 2, got {r}")),
        }
    }

    /// Rank-2 naive lattice Dirac operator on an `n × m` periodic grid:
    /// `σ_x ⊗ ∂₁ + σ_y ⊗ ∂₂` with central differences `∂ = (i/2h)(T₊ − T₋)`.
    pub fn torus(n: usize, m: usize, h: f64) -> Result<Self> {
        let graph = MetricGraph::grid_torus(n, m, h)?;
        let bundle = SpinorBundle::trivial(graph, GroupAction::trivial(n * m), 2)?;
        let sx = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let sy = CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]);
        let k = I / (2.0 * h);
        let mut mat = CMatrix::zeros(2 * n * m, 2 * n * m);
        let idx = |i: usize, j: usize| (i % n) * m + (j % m);
        for i in 0..n {
            for j in 0..m {
                let v = idx(i, j);
                let couplings = [
                    (idx(i + 1, j), &sx, k),
                    (idx(i + n - 1, j), &sx, -k),
                    (idx(i, j + 1), &sy, k),
                    (idx(i, j + m - 1), &sy, -k),
                ];
                for (w, s, coef) in couplings {
                    let block = s.map(|z| z * coef);
                    let mut view = mat.view_mut((2 * v, 2 * w), (2, 2));
                    view += block;
                }
            }
        }
        Self::new(bundle, mat, None)
    }
}

/// `circle_dirac` on a cycle with the trivial group.
pub fn circle_dirac(graph: &MetricGraph, rank: usize) -> Result<DiracOperator> {
    let n = graph.vertex_count();
    DiracOperator::circle(SpinorBundle::trivial(graph.clone(), GroupAction::trivial(n), rank)?)
}

/// Matrix of `ψ ↦ a·ψ` with `(a·ψ)_x = w Σ_g a(g, g⁻¹x) ρ(g)_{g⁻¹x} ψ_{g⁻¹x}`.
pub fn crossed_rep_matrix(bundle: &SpinorBundle, a: &AlgebraElement) -> Result<CMatrix> {
    let gd = a.groupoid();
    if gd.action() != bundle.action() {
        return structural("algebra element and bundle carry different actions");
    }
    let (n, r) = (bundle.vertex_count(), bundle.rank());
    let w = c(gd.weight());
    let grp = gd.group();
    let mut m = CMatrix::zeros(n * r, n * r);
    for g in grp.elements() {
        for y in 0..n {
            let coef = a.get(crate::algebra::Arrow::new(g, y)) * w;
            if coef == ZERO {
                continue;
            }
            let x = gd.action().act(g, y);
            let block = bundle.cocycle(g, y).map(|z| z * coef);
            let mut view = m.view_mut((x * r, y * r), (r, r));
            view += block;
        }
    }
    Ok(m)
}

/// `a·ψ` for a section `ψ`.
pub fn crossed_rep(bundle: &SpinorBundle, a: &AlgebraElement, psi: &CVector) -> Result<CVector> {
    if psi.len() != bundle.section_dim() {
        return structural(format!("section has length {}, expected {}", psi.len(), bundle.section_dim()));
    }
    Ok(crossed_rep_matrix(bundle, a)? * psi)
}

/// `F = D(1 + D²)^{-1/2}` in orthonormal coordinates.
pub fn approximate_sign(d: &CMatrix) -> CMatrix {
    linalg::hermitian_function(d, |l| l / (1.0 + l * l).sqrt())
}

/// Ascending eigenvalues of a hermitian matrix.
pub fn spectrum(m: &CMatrix) -> Result<Vec<f64>> {
    let defect = linalg::hermitian_defect(m);
    if defect > 1e-10 {
        return contract(format!("operator is not hermitian (defect {defect:.3e})"));
    }
    Ok(linalg::hermitian_eigenvalues(m))
}

/// A crossed-product spectral triple over `G ⋉ X`.
#[derive(Debug, Clone)]
pub struct SpectralTripleData {
    groupoid: Arc<ActionGroupoid>,
    dirac: DiracOperator,
    declared_dimension: Option<f64>,
}

impl SpectralTripleData {
    pub fn new(groupoid: Arc<ActionGroupoid>, dirac: DiracOperator) -> Result<Self> {
        if groupoid.action() != dirac.bundle().action() {
            return structural("groupoid and Dirac bundle carry different actions");
        }
        Ok(Self {
            groupoid,
            dirac,
            declared_dimension: None,
        })
    }

    pub fn with_declared_dimension(mut self, dim: f64) -> Self {
        self.declared_dimension = Some(dim);
        self
    }

    pub fn declared_dimension(&self) -> Option<f64> {
        self.declared_dimension
    }

    pub fn groupoid(&self) -> &Arc<ActionGroupoid> {
        &self.groupoid
    }

    pub fn dirac(&self) -> &DiracOperator {
        &self.dirac
    }

    pub fn bundle(&self) -> &SpinorBundle {
        self.dirac.bundle()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.bundle().section_dim()
    }

    pub fn with_dirac(&self, dirac: DiracOperator) -> Result<Self> {
        let mut out = Self::new(self.groupoid.clone(), dirac)?;
        out.declared_dimension = self.declared_dimension;
        Ok(out)
    }

    /// Representation in section coordinates.
    pub fn rep(&self, a: &AlgebraElement) -> Result<CMatrix> {
        crossed_rep_matrix(self.bundle(), a)
    }

    /// Representation in orthonormal coordinates.
    pub fn rep_orthonormal(&self, a: &AlgebraElement) -> Result<CMatrix> {
        Ok(self.bundle().to_orthonormal(&self.rep(a)?))
    }

    pub fn group_unitary(&self, g: usize) -> CMatrix {
        self.bundle().group_unitary(g)
    }

    pub fn dirac_orthonormal(&self) -> CMatrix {
        self.dirac.hermitian_matrix()
    }

    pub fn grading_orthonormal(&self) -> CMatrix {
        self.bundle().to_orthonormal(&self.dirac.grading_or_identity())
    }

    /// Largest `‖U(g)D − DU(g)‖` and `‖U(g)ω − ωU(g)‖` over the group.
    pub fn commutation_defect(&self) -> (f64, f64) {
        let d = self.dirac.matrix();
        let w = self.dirac.grading_or_identity();
        let mut worst = (0.0_f64, 0.0_f64);
        for g in self.groupoid.group().elements() {
            let u = self.group_unitary(g);
            worst.0 = worst.0.max(linalg::spectral_norm(&(&u * d - d * &u)));
            worst.1 = worst.1.max(linalg::spectral_norm(&(&u * &w - &w * &u)));
        }
        worst
    }

    /// Dimension of the span of `{rep(δ_σ)}`; faithful iff it equals the arrow count.
    pub fn representation_rank(&self) -> usize {
        let gd = &self.groupoid;
        let dim = self.hilbert_dim();
        let mut stacked = CMatrix::zeros(dim * dim, gd.arrow_count());
        for (k, arrow) in gd.arrows().enumerate() {
            let m = self.rep(&AlgebraElement::delta(gd, arrow)).expect("same groupoid");
            for (i, z) in m.iter().enumerate() {
                stacked[(i, k)] = *z;
            }
        }
        linalg::rank(&stacked, 1e-10)
    }

    pub fn is_faithful(&self) -> bool {
        self.representation_rank() == self.groupoid.arrow_count()
    }

    /// `P_G = (1/#G) Σ U(g)`.
    pub fn invariant_projection(&self) -> CMatrix {
        let dim = self.hilbert_dim();
        let order = self.groupoid.group_order();
        let mut p = CMatrix::zeros(dim, dim);
        for g in self.groupoid.group().elements() {
            p += self.group_unitary(g);
        }
        p.map(|z| z / order as f64)
    }

    /// Compression of the triple to the `G`-invariant sections.
    pub fn invariant_triple(&self) -> Result<InvariantTriple> {
        let (dd, dw) = self.commutation_defect();
        if dd > 1e-10 {
            return contract(format!("group unitaries do not commute with the Dirac operator (defect {dd:.3e})"));
        }
        if dw > 1e-10 {
            return contract(format!("group unitaries do not commute with the grading (defect {dw:.3e})"));
        }
        let basis = linalg::projection_range(&self.invariant_projection());
        let compress = |m: &CMatrix| basis.adjoint() * m * &basis;
        let dirac = compress(&self.dirac_orthonormal());
        let grading = compress(&self.grading_orthonormal());
        let algebra_basis = crate::algebra::invariant_subalgebra_basis(&self.groupoid);
        let algebra = algebra_basis
            .iter()
            .map(|a| self.rep_orthonormal(a).map(|m| compress(&m)))
            .collect::<Result<Vec<_>>>()?;
        Ok(InvariantTriple {
            basis,
            dirac,
            grading,
            algebra_basis,
            algebra,
        })
    }
}

/// `(A^G, 𝓗^G, P D P, P ω P)` in an orthonormal basis of `𝓗^G`.
#[derive(Debug, Clone)]
pub struct InvariantTriple {
    /// Columns: orthonormal basis of `range(P_G)` in orthonormal coordinates.
    pub basis: CMatrix,
    pub dirac: CMatrix,
    pub grading: CMatrix,
    pub algebra_basis: Vec<AlgebraElement>,
    /// Compressed representation of each element of `algebra_basis`.
    pub algebra: Vec<CMatrix>,
}

impl InvariantTriple {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn spectrum(&self) -> Result<Vec<f64>> {
        spectrum(&self.dirac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Arrow, HaarConvention};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sigma_y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
    }

    fn fourier_rank1(n: usize, h: f64) -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).sin() / h).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        linalg::spectrum_deviation(a, b).is_some_and(|d| d <= tol)
    }

    #[test]
    fn rank1_spectrum_matches_fourier() {
        for (n, h) in [(4, 1.0), (6, 1.0), (10, 0.3)] {
            let d = circle_dirac(&MetricGraph::cycle(n, h).unwrap(), 1).unwrap();
            let spec = spectrum(&d.hermitian_matrix()).unwrap();
            assert!(close(&spec, &fourier_rank1(n, h), 1e-10), "{spec:?}");
        }
    }

    #[test]
    fn rank2_spectrum_and_grading() {
        let (n, h) = (8, 0.5);
        let d = circle_dirac(&MetricGraph::cycle(n, h).unwrap(), 2).unwrap();
        let mut expect: Vec<f64> = (0..n)
            .flat_map(|k| {
                let s = 2.0 * (PI * k as f64 / n as f64).sin() / h;
                [s, -s]
            })
            .collect();
        expect.sort_by(f64::total_cmp);
        assert!(close(&spectrum(&d.hermitian_matrix()).unwrap(), &expect, 1e-10));
        let w = d.grading().unwrap();
        assert!(linalg::max_abs_diff(&(w * d.matrix() * w), &d.matrix().map(|z| -z)) < 1e-12);
    }

    #[test]
    fn constant_sections_are_harmonic() {
        for rank in [1, 2] {
            let d = circle_dirac(&MetricGraph::cycle(7, 1.0).unwrap(), rank).unwrap();
            let psi = CVector::from_element(7 * rank, C64::new(0.3, -1.2));
            assert!((d.matrix() * psi).camax() < 1e-12);
        }
    }

    #[test]
    fn non_cycle_rejected() {
        let g = MetricGraph::new(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(matches!(circle_dirac(&g, 1), Err(crate::Error::Domain(_))));
    }

    fn rotation_triple(rank: usize, haar: HaarConvention) -> SpectralTripleData {
        let action = GroupAction::cyclic_rotation(6, 3).unwrap();
        let gd = ActionGroupoid::shared(action.clone(), haar);
        let bundle = SpinorBundle::trivial(MetricGraph::cycle(6, 1.0).unwrap(), action, rank).unwrap();
        SpectralTripleData::new(gd, DiracOperator::circle(bundle).unwrap()).unwrap()
    }

    fn reflection_triple_sigma_y() -> SpectralTripleData {
        let action = GroupAction::reflection(6);
        let gd = ActionGroupoid::shared(action.clone(), HaarConvention::Counting);
        let bundle = SpinorBundle::constant(
            MetricGraph::cycle(6, 1.0).unwrap(),
            action,
            vec![CMatrix::identity(2, 2), sigma_y()],
        )
        .unwrap();
        let d = DiracOperator::circle(bundle).unwrap();
        let d = DiracOperator::new(d.bundle().clone(), d.matrix().clone(), None).unwrap();
        SpectralTripleData::new(gd, d).unwrap()
    }

    #[test]
    fn crossed_rep_unit_and_multiplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for haar in [HaarConvention::Counting, HaarConvention::Normalized] {
            let t = rotation_triple(1, haar);
            let gd = t.groupoid().clone();
            let unit = t.rep(&AlgebraElement::unit(&gd)).unwrap();
            assert!(linalg::max_abs_diff(&unit, &CMatrix::identity(6, 6)) < 1e-12);
            let f = [1.0, 2.0, -1.0, 0.5, 3.0, 0.0];
            let m = t.rep(&AlgebraElement::from_function(&gd, &f).unwrap()).unwrap();
            assert!(linalg::max_abs_diff(&m, &linalg::diagonal(&f)) < 1e-12);
            let a = AlgebraElement::random(&gd, &mut rng);
            let b = AlgebraElement::random(&gd, &mut rng);
            let psi = CVector::from_fn(6, |i, _| C64::new(i as f64, 1.0));
            let lhs = crossed_rep(t.bundle(), &a.convolve(&b).unwrap(), &psi).unwrap();
            let rhs = crossed_rep(t.bundle(), &a, &crossed_rep(t.bundle(), &b, &psi).unwrap()).unwrap();
            assert!((lhs - rhs).camax() < 1e-12);
        }
    }

    #[test]
    fn crossed_rep_is_star_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = reflection_triple_sigma_y();
        let gd = t.groupoid().clone();
        for _ in 0..20 {
            let a = AlgebraElement::random(&gd, &mut rng);
            let lhs = t.rep_orthonormal(&a.involution()).unwrap();
            let rhs = t.rep_orthonormal(&a).unwrap().adjoint();
            assert!(linalg::max_abs_diff(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn faithfulness_tracks_effectiveness() {
        assert!(rotation_triple(1, HaarConvention::Counting).is_faithful());
        assert!(reflection_triple_sigma_y().is_faithful());
        let action = GroupAction::new(crate::algebra::FiniteGroup::cyclic(2), 6, vec![(0..6).collect(); 2]).unwrap();
        assert!(!action.is_effective());
        let gd = ActionGroupoid::shared(action.clone(), HaarConvention::Counting);
        let bundle = SpinorBundle::trivial(MetricGraph::cycle(6, 1.0).unwrap(), action, 1).unwrap();
        let t = SpectralTripleData::new(gd, DiracOperator::circle(bundle).unwrap()).unwrap();
        assert!(!t.is_faithful());
    }

    #[test]
    fn invariant_triple_dimensions() {
        let trivial = {
            let action = GroupAction::trivial(6);
            let gd = ActionGroupoid::shared(action.clone(), HaarConvention::Counting);
            let bundle = SpinorBundle::trivial(MetricGraph::cycle(6, 1.0).unwrap(), action, 1).unwrap();
            SpectralTripleData::new(gd, DiracOperator::circle(bundle).unwrap()).unwrap()
        };
        let inv = trivial.invariant_triple().unwrap();
        assert_eq!(inv.dim(), 6);
        assert!(close(&inv.spectrum().unwrap(), &fourier_rank1(6, 1.0), 1e-10));

        let rot = rotation_triple(1, HaarConvention::Counting).invariant_triple().unwrap();
        assert_eq!(rot.dim(), 3);

        // rank-1 reflection: P_G has rank 4, but r anticommutes with D
        let action = GroupAction::reflection(6);
        let gd = ActionGroupoid::shared(action.clone(), HaarConvention::Counting);
        let bundle = SpinorBundle::trivial(MetricGraph::cycle(6, 1.0).unwrap(), action, 1).unwrap();
        let refl = SpectralTripleData::new(gd, DiracOperator::circle(bundle).unwrap()).unwrap();
        assert_eq!(linalg::rank(&refl.invariant_projection(), 1e-10), 4);
        assert!(matches!(refl.invariant_triple(), Err(crate::Error::Contract(_))));
    }

    #[test]
    fn invariant_spectrum_is_sub_multiset() {
        for t in [rotation_triple(1, HaarConvention::Counting), rotation_triple(2, HaarConvention::Counting), reflection_triple_sigma_y()] {
            let full = spectrum(&t.dirac_orthonormal()).unwrap();
            let inv = t.invariant_triple().unwrap().spectrum().unwrap();
            let mut pool = full.clone();
            for l in inv {
                let pos = pool.iter().position(|&m| (m - l).abs() < 1e-10).expect("eigenvalue present");
                pool.remove(pos);
            }
        }
    }

    #[test]
    fn grading_commutes_with_group_and_algebra() {
        let t = rotation_triple(2, HaarConvention::Counting);
        let (dd, dw) = t.commutation_defect();
        assert!(dd < 1e-12 && dw < 1e-12);
        let w = t.grading_orthonormal();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = AlgebraElement::random(t.groupoid(), &mut rng);
        let m = t.rep_orthonormal(&a).unwrap();
        assert!(linalg::max_abs(&(&w * &m - &m * &w)) < 1e-12);
    }

    #[test]
    fn approximate_sign_examples() {
        assert!(linalg::max_abs(&approximate_sign(&CMatrix::zeros(3, 3))) < 1e-15);
        let f = approximate_sign(&linalg::diagonal(&[1.0, -1.0]));
        let s = 0.5f64.sqrt();
        assert!(linalg::max_abs_diff(&f, &linalg::diagonal(&[s, -s])) < 1e-12);
        let t = rotation_triple(1, HaarConvention::Counting);
        let f = approximate_sign(&t.dirac_orthonormal());
        assert!(linalg::spectral_norm(&f) < 1.0);
        for g in 0..2 {
            let u = t.group_unitary(g);
            assert!(linalg::max_abs(&(&u * &f - &f * &u)) < 1e-10);
        }
    }

    #[test]
    fn spectrum_rejects_non_hermitian_and_is_conjugation_invariant() {
        assert_eq!(spectrum(&linalg::diagonal(&[3.0, 1.0, 2.0])).unwrap(), vec![1.0, 2.0, 3.0]);
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = ONE;
        assert!(spectrum(&m).is_err());
        let t = reflection_triple_sigma_y();
        let d = t.dirac_orthonormal();
        let u = t.group_unitary(1);
        let conj = &u * &d * u.adjoint();
        assert!(close(&spectrum(&d).unwrap(), &spectrum(&conj).unwrap(), 1e-10));
    }

    #[test]
    fn commutator_norm_matches_dense_difference_operator() {
        let n = 9;
        let gd = ActionGroupoid::shared(GroupAction::trivial(n), HaarConvention::Counting);
        let t = {
            let bundle = SpinorBundle::trivial(MetricGraph::cycle(n, 1.0).unwrap(), GroupAction::trivial(n), 1).unwrap();
            SpectralTripleData::new(gd.clone(), DiracOperator::circle(bundle).unwrap()).unwrap()
        };
        let vals: Vec<f64> = (0..n).map(|x| ((x * x) % 5) as f64).collect();
        let a = t.rep(&AlgebraElement::from_function(&gd, &vals).unwrap()).unwrap();
        let d = t.dirac().matrix();
        let comm = d * &a - &a * d;
        // independent dense construction: [D,a]_{j,j±1} = ±(i/2)(a_{j±1} − a_j)
        let mut brute = CMatrix::zeros(n, n);
        for j in 0..n {
            let (p, m) = ((j + 1) % n, (j + n - 1) % n);
            brute[(j, p)] += C64::new(0.0, 0.5) * (vals[p] - vals[j]);
            brute[(j, m)] -= C64::new(0.0, 0.5) * (vals[m] - vals[j]);
        }
        assert!((linalg::spectral_norm(&comm) - linalg::spectral_norm(&brute)).abs() < 1e-12);
        let max_quot = (0..n).map(|j| (vals[(j + 1) % n] - vals[j]).abs()).fold(0.0, f64::max);
        assert!(linalg::spectral_norm(&comm) <= max_quot + 1e-12);
        let _ = Arrow::new(0, 0);
    }

    #[test]
    fn torus_dirac_is_hermitian() {
        let d = DiracOperator::torus(4, 4, 1.0).unwrap();
        assert!(linalg::hermitian_defect(d.matrix()) < 1e-14);
        let spec = spectrum(&d.hermitian_matrix()).unwrap();
        assert_eq!(spec.len(), 32);
    }
}
