//! Induction along a bitorsor: the induced Hilbert space `E ⊗_A 𝓗`, the
//! pushforward bundle `φ_#ξ`, the isomorphism `χ` between them, induced
//! Dirac operators and gradings, and the invariant-level unitary `U_φ`.
//!
//! Sections of `φ_#ξ` are maps `η` on `Q` with `η_q` in the fiber over `ϱ(q)`
//! and `ρ(g)_{g⁻¹ϱ(q)} η_{R(q,g)} = η_q`. They are determined by their values
//! at the canonical points `q_y = min α⁻¹(y)`; those values are the canonical
//! coordinates `η̂`, laid out like sections of a bundle over `Y`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{same_groupoid, AlgebraElement, Arrow};
use crate::bimodule::{left_action, BimoduleElement};
use crate::bitorsor::MoritaBitorsor;
use crate::dirac::{crossed_rep_matrix, DiracOperator, SpectralTripleData, SpinorBundle};
use crate::error::{contract, structural, Error, Result};
use crate::geometry::MetricGraph;
use crate::linalg::{self, c, CMatrix, CVector, C64, ZERO};

/// Which formal tensors `δ_q ⊙ e_{x,c}` span the ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GeneratorSet {
    /// Only `x = ϱ(q)`; the others have zero norm.
    Local,
    /// Every `(q, x, c)`.
    Full,
}

/// `E ⊙ 𝓗` modulo the null space of its Gram form.
#[derive(Debug, Clone)]
pub struct InducedHilbert {
    bitorsor: Arc<MoritaBitorsor>,
    triple: SpectralTripleData,
    generators: Vec<(usize, usize, usize)>,
    gram: CMatrix,
    coords: CMatrix,
    basis: CMatrix,
    gram_floor: f64,
}

/// Builds the Gram matrix `M[i, j] = ⟨gen_i, gen_j⟩` with
/// `⟨u ⊙ ψ, u' ⊙ ψ'⟩ = ⟨ψ, (u, u')_Θ ψ'⟩` and passes to the quotient.
pub fn induced_space(b: &Arc<MoritaBitorsor>, t: &SpectralTripleData, set: GeneratorSet) -> Result<InducedHilbert> {
    if !same_groupoid(b.right(), t.groupoid()) {
        return structural("the right groupoid of the bitorsor is not the groupoid of the triple");
    }
    let bundle = t.bundle();
    let r = bundle.rank();
    let generators: Vec<(usize, usize, usize)> = match set {
        GeneratorSet::Local => (0..b.size())
            .flat_map(|q| (0..r).map(move |ci| (q, b.rho(q), ci)))
            .collect(),
        GeneratorSet::Full => (0..b.size())
            .flat_map(|q| (0..bundle.vertex_count()).flat_map(move |x| (0..r).map(move |ci| (q, x, ci))))
            .collect(),
    };
    let gg = b.right().group();
    let ww = b.right().weight() * b.left().weight();
    let nu = bundle.volumes();
    let n = generators.len();
    let mut gram = CMatrix::zeros(n, n);
    // (δ_q', δ_q)_Θ(g, x) = w_Ξ [ϱ(q') = g·x][R(q', g) = q], so only pairs in
    // one α-fiber with both generators local contribute.
    for (j, &(qp, xp, cp)) in generators.iter().enumerate() {
        if xp != b.rho(qp) {
            continue;
        }
        for g in gg.elements() {
            let q = b.right_elem(qp, g);
            let x = b.rho(q);
            let rho = bundle.cocycle(g, x);
            for (i, &(qi, xi, ci)) in generators.iter().enumerate() {
                if qi == q && xi == x {
                    gram[(j, i)] += rho[(cp, ci)] * (nu[xp] * ww);
                }
            }
        }
    }
    let (values, vectors) = linalg::hermitian_eigen(&gram);
    let top = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let floor = values.first().copied().unwrap_or(0.0);
    if floor < -1e-10 * top.max(1.0) {
        return Err(Error::InvalidBimodule(format!("Gram matrix has eigenvalue {floor:.3e}")));
    }
    let keep: Vec<usize> = (0..n).filter(|&i| values[i] > 1e-10 * top).collect();
    let v = linalg::select_columns(&vectors, &keep);
    let sq: Vec<f64> = keep.iter().map(|&i| values[i].sqrt()).collect();
    let coords = CMatrix::from_fn(keep.len(), n, |a, j| v[(j, a)].conj() * sq[a]);
    let basis = CMatrix::from_fn(n, keep.len(), |j, a| v[(j, a)] / sq[a]);
    Ok(InducedHilbert {
        bitorsor: b.clone(),
        triple: t.clone(),
        generators,
        gram,
        coords,
        basis,
        gram_floor: floor,
    })
}

impl InducedHilbert {
    pub fn bitorsor(&self) -> &Arc<MoritaBitorsor> {
        &self.bitorsor
    }

    pub fn triple(&self) -> &SpectralTripleData {
        &self.triple
    }

    /// Dimension of the quotient.
    pub fn dim(&self) -> usize {
        self.coords.nrows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[(usize, usize, usize)] {
        &self.generators
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    pub fn gram_floor(&self) -> f64 {
        self.gram_floor
    }

    /// Quotient map `C` from generator coordinates to orthonormal coordinates.
    pub fn coords(&self) -> &CMatrix {
        &self.coords
    }

    /// Right inverse `B` of `C`.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// Generator coordinates of `u ⊙ ψ` (`ψ` in section coordinates).
    pub fn tensor(&self, u: &BimoduleElement, psi: &CVector) -> CVector {
        let r = self.triple.bundle().rank();
        CVector::from_iterator(
            self.generators.len(),
            self.generators.iter().map(|&(q, x, ci)| u.get(q) * psi[x * r + ci]),
        )
    }

    /// Orthonormal quotient coordinates of `u ⊙ ψ`.
    pub fn vector(&self, u: &BimoduleElement, psi: &CVector) -> CVector {
        &self.coords * self.tensor(u, psi)
    }

    /// `T_u: ψ ↦ u ⊗ ψ`, from orthonormal coordinates of `𝓗` to the quotient.
    pub fn t_u(&self, u: &BimoduleElement) -> CMatrix {
        let bundle = self.triple.bundle();
        let r = bundle.rank();
        let s = bundle.sqrt_volume();
        let mut z = CMatrix::zeros(self.generators.len(), bundle.section_dim());
        for (i, &(q, x, ci)) in self.generators.iter().enumerate() {
            z[(i, x * r + ci)] = u.get(q) / s[x * r + ci];
        }
        &self.coords * z
    }

    /// Action of `b ∈ C(Ξ)` on generator coordinates: `b·(δ_q ⊙ e) = (b·δ_q) ⊙ e`.
    fn generator_action(&self, a: &AlgebraElement) -> Result<CMatrix> {
        let b = &self.bitorsor;
        let n = self.generators.len();
        let mut m = CMatrix::zeros(n, n);
        for q in 0..b.size() {
            let image = left_action(a, &BimoduleElement::delta(b, q))?;
            for (j, &(qj, xj, cj)) in self.generators.iter().enumerate() {
                if qj != q {
                    continue;
                }
                for (i, &(qi, xi, ci)) in self.generators.iter().enumerate() {
                    if xi == xj && ci == cj {
                        m[(i, j)] += image.get(qi);
                    }
                }
            }
        }
        Ok(m)
    }

    /// `π̃(b)` on the quotient and the leak of the null space under it.
    pub fn left_action_matrix(&self, a: &AlgebraElement) -> Result<(CMatrix, f64)> {
        let g = self.generator_action(a)?;
        let n = self.generators.len();
        let proj_null = CMatrix::identity(n, n) - &self.basis * &self.coords;
        let leak = linalg::spectral_norm(&(&self.coords * &g * proj_null));
        Ok((&self.coords * &g * &self.basis, leak))
    }
}

/// `φ_#ξ` as a bundle over `Y` with the induced `K`-equivariant structure.
#[derive(Debug, Clone)]
pub struct InducedBundle {
    bitorsor: Arc<MoritaBitorsor>,
    source: SpinorBundle,
    q_graph: MetricGraph,
    canonical: Vec<usize>,
    constraints: CMatrix,
    extension: CMatrix,
    bundle: SpinorBundle,
    kernel_dim: usize,
}

/// Solves the equivariance constraints, checks `ν_#` is well defined and
/// builds the induced cocycle `ρ_#(k)_y = ρ(g)_{ϱ(q_y)}` where
/// `R(q_{ky}, g) = L(k, q_y)`.
pub fn pushforward_bundle(b: &Arc<MoritaBitorsor>, xi: &SpinorBundle, y_graph: &MetricGraph) -> Result<InducedBundle> {
    if b.right().action() != xi.action() {
        return structural("the bundle is not over the right groupoid of the bitorsor");
    }
    let q_graph = b.lift_graph(xi.base(), y_graph)?;
    let r = xi.rank();
    let (ny, nq) = (b.left().points(), b.size());
    let gg = b.right().group();
    let kg = b.left().group();
    let ga = b.right().action();

    let canonical: Vec<usize> = (0..ny)
        .map(|y| {
            b.alpha_fiber(y)
                .first()
                .copied()
                .ok_or_else(|| Error::Contract(format!("α⁻¹({y}) is empty")))
        })
        .collect::<Result<_>>()?;

    let mut volumes = Vec::with_capacity(ny);
    for y in 0..ny {
        let fiber = b.alpha_fiber(y);
        let v = xi.volumes()[b.rho(fiber[0])];
        if let Some(&q) = fiber.iter().find(|&&q| (xi.volumes()[b.rho(q)] - v).abs() > 1e-12 * v) {
            return contract(format!(
                "induced volume is ill defined at {y}: ν(ϱ({})) = {v} but ν(ϱ({q})) = {}",
                fiber[0],
                xi.volumes()[b.rho(q)]
            ));
        }
        volumes.push(v);
    }

    let mut constraints = CMatrix::zeros(nq * gg.order() * r, nq * r);
    for q in 0..nq {
        for g in gg.elements() {
            let row = (q * gg.order() + g) * r;
            let p = b.right_elem(q, g);
            let m = xi.cocycle(g, ga.act(gg.inv(g), b.rho(q)));
            let mut blk = constraints.view_mut((row, p * r), (r, r));
            blk += m;
            let mut blk = constraints.view_mut((row, q * r), (r, r));
            blk -= CMatrix::identity(r, r);
        }
    }
    let kernel_dim = linalg::kernel_basis(&constraints, 1e-12).ncols();
    if kernel_dim != r * ny {
        return contract(format!("section space has dimension {kernel_dim}, expected {}", r * ny));
    }

    let mut extension = CMatrix::zeros(nq * r, ny * r);
    for (y, &qy) in canonical.iter().enumerate() {
        for g in gg.elements() {
            let q = b.right_elem(qy, g);
            let m = xi.cocycle(g, ga.act(gg.inv(g), b.rho(qy))).adjoint();
            extension.view_mut((q * r, y * r), (r, r)).copy_from(&m);
        }
    }
    let leak = linalg::max_abs(&(&constraints * &extension));
    if leak > 1e-12 {
        return contract(format!("canonical extension violates the constraints by {leak:.3e}"));
    }

    let mut cocycle = vec![CMatrix::zeros(r, r); kg.order() * ny];
    for k in kg.elements() {
        for y in 0..ny {
            let target = b.left_elem(k, canonical[y]);
            let ky = b.left().action().act(k, y);
            let g = gg
                .elements()
                .find(|&g| b.right_elem(canonical[ky], g) == target)
                .ok_or_else(|| Error::Contract(format!("L({k}, q_{y}) is not in the α-fiber of {ky}")))?;
            cocycle[k * ny + y] = xi.cocycle(g, b.rho(canonical[y])).clone();
        }
    }
    let bundle = SpinorBundle::new(y_graph.clone(), b.left().action().clone(), r, cocycle, volumes)?;
    Ok(InducedBundle {
        bitorsor: b.clone(),
        source: xi.clone(),
        q_graph,
        canonical,
        constraints,
        extension,
        bundle,
        kernel_dim,
    })
}

impl InducedBundle {
    pub fn bundle(&self) -> &SpinorBundle {
        &self.bundle
    }

    pub fn source(&self) -> &SpinorBundle {
        &self.source
    }

    pub fn q_graph(&self) -> &MetricGraph {
        &self.q_graph
    }

    pub fn canonical_points(&self) -> &[usize] {
        &self.canonical
    }

    pub fn section_space_dim(&self) -> usize {
        self.kernel_dim
    }

    pub fn volumes(&self) -> &[f64] {
        self.bundle.volumes()
    }

    /// `η = E η̂`.
    pub fn extension(&self) -> &CMatrix {
        &self.extension
    }

    /// Largest violation of the equivariance constraints.
    pub fn constraint_residual(&self, eta: &CVector) -> f64 {
        (&self.constraints * eta).camax()
    }

    pub fn to_canonical(&self, eta: &CVector) -> CVector {
        let r = self.bundle.rank();
        CVector::from_fn(self.canonical.len() * r, |i, _| eta[self.canonical[i / r] * r + i % r])
    }

    /// `(k·η)_q = η_{L(k⁻¹, q)}` on all of `Q`.
    pub fn k_action_on_q(&self, k: usize) -> CMatrix {
        let b = &self.bitorsor;
        let r = self.bundle.rank();
        let kinv = b.left().group().inv(k);
        let mut m = CMatrix::zeros(b.size() * r, b.size() * r);
        for q in 0..b.size() {
            let p = b.left_elem(kinv, q);
            m.view_mut((q * r, p * r), (r, r)).copy_from(&CMatrix::identity(r, r));
        }
        m
    }

    /// Neighbour of `q` in `Q` lying over `x` (itself when `x = ϱ(q)`).
    fn lift(&self, q: usize, x: usize) -> Option<usize> {
        if x == self.bitorsor.rho(q) {
            return Some(q);
        }
        self.q_graph
            .neighbors(q)
            .iter()
            .map(|&(p, _)| p)
            .find(|&p| self.bitorsor.rho(p) == x)
    }

    /// Pulls a local operator on `X` back along the covering to `Q`.
    fn lift_operator(&self, m: &CMatrix) -> Result<CMatrix> {
        let b = &self.bitorsor;
        let r = self.bundle.rank();
        let nx = self.source.vertex_count();
        let mut out = CMatrix::zeros(b.size() * r, b.size() * r);
        for q in 0..b.size() {
            let x = b.rho(q);
            for xp in 0..nx {
                let blk = m.view((x * r, xp * r), (r, r)).into_owned();
                if linalg::max_abs(&blk) == 0.0 {
                    continue;
                }
                let p = self.lift(q, xp).ok_or_else(|| {
                    Error::Contract(format!("operator couples {x} to {xp}, which has no lift at {q}"))
                })?;
                let mut view = out.view_mut((q * r, p * r), (r, r));
                view += blk;
            }
        }
        Ok(out)
    }

    /// Restricts a lifted operator to sections, in canonical coordinates.
    fn induce(&self, m: &CMatrix, what: &str) -> Result<CMatrix> {
        let lifted = self.lift_operator(m)?;
        let image = &lifted * &self.extension;
        let leak = linalg::max_abs(&(&self.constraints * &image));
        let scale = linalg::max_abs(m).max(1.0);
        if leak > 1e-10 * scale {
            return contract(format!("the lifted {what} does not preserve equivariant sections (defect {leak:.3e})"));
        }
        let r = self.bundle.rank();
        Ok(CMatrix::from_fn(self.canonical.len() * r, image.ncols(), |i, j| {
            image[(self.canonical[i / r] * r + i % r, j)]
        }))
    }
}

/// `(φ_#ð)`: the covering lift of `D` restricted to equivariant sections.
pub fn induced_dirac(bundle: &InducedBundle, d: &DiracOperator) -> Result<DiracOperator> {
    if d.bundle() != bundle.source() {
        return structural("Dirac operator lives on a different bundle");
    }
    let m = bundle.induce(d.matrix(), "Dirac operator")?;
    let grading = d.grading().map(|w| induced_grading(bundle, w)).transpose()?;
    DiracOperator::new(bundle.bundle.clone(), m, grading)
}

/// `(φ_#ω)` for a grading given in section coordinates.
pub fn induced_grading(bundle: &InducedBundle, w: &CMatrix) -> Result<CMatrix> {
    bundle.induce(w, "grading")
}

/// The induced triple over the left groupoid, on `φ_#ξ`.
pub fn induced_triple(
    b: &Arc<MoritaBitorsor>,
    t: &SpectralTripleData,
    y_graph: &MetricGraph,
) -> Result<(InducedBundle, SpectralTripleData)> {
    let bundle = pushforward_bundle(b, t.bundle(), y_graph)?;
    let d = induced_dirac(&bundle, t.dirac())?;
    let mut triple = SpectralTripleData::new(b.left().clone(), d)?;
    if let Some(dim) = t.declared_dimension() {
        triple = triple.with_declared_dimension(dim);
    }
    Ok((bundle, triple))
}

/// `χ(f ⊙ ψ)_q = w_Θ Σ_g f(R(q, g)) ρ(g)_{g⁻¹ϱ(q)} ψ_{g⁻¹ϱ(q)}` as a map on `Q`.
pub fn chi(b: &MoritaBitorsor, xi: &SpinorBundle, f: &BimoduleElement, psi: &CVector) -> Result<CVector> {
    if b.right().action() != xi.action() || f.bitorsor().size() != b.size() {
        return structural("χ inputs live over different structures");
    }
    let r = xi.rank();
    let gg = b.right().group();
    let ga = b.right().action();
    let w = c(b.right().weight());
    let mut out = CVector::zeros(b.size() * r);
    for q in 0..b.size() {
        for g in gg.elements() {
            let fv = f.get(b.right_elem(q, g));
            if fv == ZERO {
                continue;
            }
            let x = ga.act(gg.inv(g), b.rho(q));
            let v = xi.cocycle(g, x) * psi.rows(x * r, r);
            let mut dst = out.rows_mut(q * r, r);
            dst += v * (fv * w);
        }
    }
    Ok(out)
}

/// Matrix of `χ` from the quotient to orthonormal canonical coordinates,
/// with its measured inner-product scale.
#[derive(Debug, Clone)]
pub struct ChiIso {
    pub matrix: CMatrix,
    pub rank: usize,
    /// `c` with `⟨χu, χv⟩ = c ⟨u, v⟩`.
    pub scale: f64,
    /// `max |χ*χ − c·1|`.
    pub scale_deviation: f64,
    /// Norm of `χ` on the Gram null space (zero when `χ` is well defined).
    pub null_leak: f64,
}

pub fn chi_iso(h: &InducedHilbert, bundle: &InducedBundle) -> Result<ChiIso> {
    let b = h.bitorsor();
    let xi = h.triple().bundle();
    if xi != bundle.source() {
        return structural("induced space and bundle come from different bundles");
    }
    let r = xi.rank();
    let sy: Vec<f64> = bundle
        .volumes()
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v.sqrt(), r))
        .collect();
    let dim_y = bundle.canonical.len() * r;
    let mut g = CMatrix::zeros(dim_y, h.ambient_dim());
    for (j, &(q, x, ci)) in h.generators().iter().enumerate() {
        let mut psi = CVector::zeros(xi.section_dim());
        psi[x * r + ci] = c(1.0);
        let eta = chi(b, xi, &BimoduleElement::delta(b, q), &psi)?;
        let hat = bundle.to_canonical(&eta);
        for i in 0..dim_y {
            g[(i, j)] = hat[i] * sy[i];
        }
    }
    let n = h.ambient_dim();
    let null_leak = linalg::spectral_norm(&(&g * (CMatrix::identity(n, n) - h.basis() * h.coords())));
    let matrix = &g * h.basis();
    let rank = linalg::rank(&matrix, 1e-10);
    if rank != dim_y || rank != h.dim() {
        return contract(format!(
            "χ has rank {rank}; quotient dimension {}, section dimension {dim_y}",
            h.dim()
        ));
    }
    let gram = matrix.adjoint() * &matrix;
    let scale = (0..gram.nrows()).map(|i| gram[(i, i)].re).sum::<f64>() / gram.nrows() as f64;
    let scale_deviation = linalg::max_abs_diff(&gram, &CMatrix::identity(rank, rank).map(|z| z * scale));
    Ok(ChiIso {
        matrix,
        rank,
        scale,
        scale_deviation,
        null_leak,
    })
}

impl ChiIso {
    /// Ratios `⟨χu, χv⟩ / ⟨u, v⟩` over random pairs: (mean, max deviation from the mean).
    pub fn random_pair_ratios(&self, pairs: usize, seed: u64) -> (f64, f64) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.matrix.ncols();
        let mut ratios = Vec::with_capacity(pairs);
        for _ in 0..pairs {
            let mut draw = || CVector::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let (u, v) = (draw(), draw());
            let base = u.dotc(&v);
            let image = (&self.matrix * &u).dotc(&(&self.matrix * &v));
            ratios.push(image / base);
        }
        let mean = ratios.iter().sum::<C64>() / ratios.len() as f64;
        let dev = ratios.iter().fold(0.0_f64, |a, z| a.max((z - mean).norm()));
        (mean.re, dev)
    }

    /// `max_b ‖χ π̃(b) − π_#(b) χ‖` over point masses `b` of the left groupoid,
    /// and the worst null-space leak of `π̃(b)`.
    pub fn intertwining_residual(&self, h: &InducedHilbert, bundle: &InducedBundle) -> Result<(f64, f64)> {
        let xi = h.bitorsor().left();
        let mut worst = 0.0_f64;
        let mut leak = 0.0_f64;
        for arrow in xi.arrows() {
            let bb = AlgebraElement::delta(xi, arrow);
            let (pi_tilde, l) = h.left_action_matrix(&bb)?;
            leak = leak.max(l);
            let pi_sharp = bundle.bundle().to_orthonormal(&crossed_rep_matrix(bundle.bundle(), &bb)?);
            worst = worst.max(linalg::spectral_norm(&(&self.matrix * pi_tilde - pi_sharp * &self.matrix)));
        }
        Ok((worst, leak))
    }
}

/// `U_φ = √(#G/#K)·φ_#` between invariant sections, in the invariant
/// orthonormal bases of both triples.
#[derive(Debug, Clone, Serialize)]
pub struct UPhi {
    #[serde(skip)]
    pub matrix: CMatrix,
    pub scale: f64,
    pub isometry_defect: f64,
    pub dirac_residual: f64,
    pub grading_residual: f64,
    pub algebra_residual: f64,
    pub spectral_deviation: Option<f64>,
}

/// Builds `U_φ` from `t1` (over the right groupoid) to `t2` (over the left
/// groupoid, on a bundle laid out like `φ_#ξ`) and measures how well it
/// intertwines the invariant triples.
pub fn u_phi(bundle: &InducedBundle, t1: &SpectralTripleData, t2: &SpectralTripleData) -> Result<UPhi> {
    let b = &bundle.bitorsor;
    if t1.bundle() != bundle.source() {
        return structural("first triple is not on the source bundle");
    }
    if t2.hilbert_dim() != bundle.bundle().section_dim() || !same_groupoid(t2.groupoid(), b.left()) {
        return structural("second triple does not match the induced bundle");
    }
    let inv1 = t1.invariant_triple()?;
    let inv2 = t2.invariant_triple()?;
    let r = t1.bundle().rank();
    let (g, k) = (b.right().group_order() as f64, b.left().group_order() as f64);
    let scale = (g / k).sqrt();
    let s1 = t1.bundle().sqrt_volume();
    let s2 = t2.bundle().sqrt_volume();
    let mut phi = CMatrix::zeros(t2.hilbert_dim(), t1.hilbert_dim());
    for (y, &qy) in bundle.canonical.iter().enumerate() {
        let x = b.rho(qy);
        for ci in 0..r {
            phi[(y * r + ci, x * r + ci)] = c(scale * s2[y * r + ci] / s1[x * r + ci]);
        }
    }
    let matrix = inv2.basis.adjoint() * &phi * &inv1.basis;
    let isometry_defect = if matrix.nrows() == matrix.ncols() {
        linalg::max_abs_diff(&(matrix.adjoint() * &matrix), &CMatrix::identity(matrix.ncols(), matrix.ncols()))
            .max(linalg::max_abs_diff(&(&matrix * matrix.adjoint()), &CMatrix::identity(matrix.nrows(), matrix.nrows())))
    } else {
        f64::INFINITY
    };
    let conj = |m: &CMatrix| &matrix * m * matrix.adjoint();
    let dirac_residual = linalg::spectral_norm(&(conj(&inv1.dirac) - &inv2.dirac));
    let grading_residual = linalg::spectral_norm(&(conj(&inv1.grading) - &inv2.grading));
    let mut algebra_residual = 0.0_f64;
    let n2 = b.left().points();
    for (a, rep) in inv1.algebra_basis.iter().zip(&inv1.algebra) {
        let e = t1.groupoid().group().identity();
        let scale1 = t1.groupoid().unit_scale();
        let pushed: Vec<f64> = (0..n2)
            .map(|y| a.get(Arrow::new(e, b.rho(bundle.canonical[y]))).re / scale1)
            .collect();
        let pa = AlgebraElement::from_function(t2.groupoid(), &pushed)?;
        let rep2 = inv2.basis.adjoint() * t2.rep_orthonormal(&pa)? * &inv2.basis;
        algebra_residual = algebra_residual.max(linalg::spectral_norm(&(conj(rep) - rep2)));
    }
    let spectral_deviation = linalg::spectrum_deviation(&inv1.spectrum()?, &inv2.spectrum()?);
    if isometry_defect > 1e-10 {
        return contract(format!("U_φ is not unitary (defect {isometry_defect:.3e})"));
    }
    Ok(UPhi {
        matrix,
        scale,
        isometry_defect,
        dirac_residual,
        grading_residual,
        algebra_residual,
        spectral_deviation,
    })
}

/// First-order symbol `γ_x = h Σ_{x'} D[x, x']·(x' − x)` of a Dirac operator
/// on a uniform cycle, per vertex.
pub fn cycle_symbol(d: &DiracOperator) -> Result<Vec<CMatrix>> {
    let bundle = d.bundle();
    let h = bundle
        .base()
        .as_cycle()
        .ok_or_else(|| Error::Domain("the symbol is only defined on uniform cycles".into()))?;
    let (n, r) = (bundle.vertex_count(), bundle.rank());
    let m = d.matrix();
    Ok((0..n)
        .map(|x| {
            let next = (x + 1) % n;
            let prev = (x + n - 1) % n;
            let fwd = m.view((x * r, next * r), (r, r)).into_owned();
            let bwd = m.view((x * r, prev * r), (r, r)).into_owned();
            (fwd - bwd).map(|z| z * h)
        })
        .collect())
}

/// Residual of the discrete Leibniz identity for the induced Dirac operator:
/// `‖χ⁻¹ φ_#ð χ(f ⊙ ψ) − (f' ⊙ γψ + f ⊙ ðψ)‖` in the induced Hilbert norm,
/// where `f'` is the central difference of `f` along the lifted graph.
pub fn verify_prop5(
    h: &InducedHilbert,
    bundle: &InducedBundle,
    chi_map: &ChiIso,
    d_sharp: &DiracOperator,
    f: &BimoduleElement,
    psi: &CVector,
) -> Result<f64> {
    let t = h.triple();
    let xi = t.bundle();
    let hx = xi
        .base()
        .as_cycle()
        .ok_or_else(|| Error::Domain("the Leibniz check needs a uniform cycle".into()))?;
    let n = xi.vertex_count();
    let r = xi.rank();
    let b = h.bitorsor();
    let gamma = cycle_symbol(t.dirac())?;
    let mut fprime = vec![ZERO; b.size()];
    for q in 0..b.size() {
        let x = b.rho(q);
        let up = bundle.lift(q, (x + 1) % n);
        let down = bundle.lift(q, (x + n - 1) % n);
        let (Some(up), Some(down)) = (up, down) else {
            return contract(format!("no lift of the neighbours of {x} at {q}"));
        };
        fprime[q] = (f.get(up) - f.get(down)) / (2.0 * hx);
    }
    let fprime = BimoduleElement::new(b, fprime)?;
    let mut gpsi = CVector::zeros(xi.section_dim());
    for x in 0..n {
        let v = &gamma[x] * psi.rows(x * r, r);
        gpsi.rows_mut(x * r, r).copy_from(&v);
    }
    let dpsi = t.dirac().matrix() * psi;
    let rhs = h.vector(&fprime, &gpsi) + h.vector(f, &dpsi);
    let z = h.vector(f, psi);
    let dhat = d_sharp.hermitian_matrix();
    let image = &dhat * (&chi_map.matrix * z);
    let lhs = chi_map
        .matrix
        .clone()
        .lu()
        .solve(&image)
        .ok_or_else(|| Error::Contract("χ is singular".into()))?;
    Ok((lhs - rhs).norm())
}

/// Leibniz residuals on the half-turn quotient of circles of circumference
/// `2π` (rank-2 model), for `f = exp(cos θ)` and a smooth spinor `ψ`.
pub fn prop5_refinement(ns: &[usize], haar: crate::algebra::HaarConvention) -> Result<Vec<(usize, f64)>> {
    ns.iter()
        .map(|&n| {
            let m = crate::models::rotation_quotient(n, 2, std::f64::consts::TAU, haar)?;
            let h = induced_space(&m.bitorsor, &m.crossed, GeneratorSet::Local)?;
            let (pb, t2) = induced_triple(&m.bitorsor, &m.crossed, &m.quotient_graph)?;
            let x = chi_iso(&h, &pb)?;
            let theta = |x: usize| std::f64::consts::TAU * x as f64 / n as f64;
            let f = BimoduleElement::new(
                &m.bitorsor,
                (0..n).map(|q| c(theta(m.bitorsor.rho(q)).cos().exp())).collect(),
            )?;
            let psi = CVector::from_fn(2 * n, |i, _| {
                let t = theta(i / 2);
                if i % 2 == 0 {
                    C64::new((2.0 * t).sin(), t.cos())
                } else {
                    C64::new(t.cos() + 0.5, -(3.0 * t).sin())
                }
            });
            Ok((n, verify_prop5(&h, &pb, &x, t2.dirac(), &f, &psi)?))
        })
        .collect()
}
