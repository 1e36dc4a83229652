//! The imprimitivity bimodule `C(Q)` of a bitorsor: the left `Ξ`- and right
//! `Θ`-actions, the two algebra-valued pairings and a numerical check of the
//! imprimitivity axioms.
//!
//! With `L`, `R` the action tables of the bitorsor and `w_Ξ`, `w_Θ` the
//! fiber weights:
//!
//! ```text
//! (f·a)(q)        = w_Θ Σ_g a(g⁻¹, ϱ(q)) f(R(q, g))
//! (b·f)(q)        = w_Ξ Σ_k b(k, k⁻¹·α(q)) f(L(k⁻¹, q))
//! (f, g)_Θ(g', x) = w_Ξ Σ_k conj f(L(k⁻¹, q)) g(R(L(k⁻¹, q), g'))     ϱ(q) = g'·x
//! _Ξ(f, g)(k, y)  = w_Θ Σ_g f(R(L(k, q), g)) conj g(R(q, g))          α(q) = y
//! ```

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{same_groupoid, AlgebraElement, Arrow};
use crate::bitorsor::MoritaBitorsor;
use crate::error::{structural, Error, Result};
use crate::linalg::{self, c, CMatrix, C64, ZERO};

/// A complex function on the torsor points of a bitorsor.
#[derive(Debug, Clone)]
pub struct BimoduleElement {
    bitorsor: Arc<MoritaBitorsor>,
    values: Vec<C64>,
}

impl BimoduleElement {
    pub fn new(bitorsor: &Arc<MoritaBitorsor>, values: Vec<C64>) -> Result<Self> {
        if values.len() != bitorsor.size() {
            return structural(format!("{} values for {} torsor points", values.len(), bitorsor.size()));
        }
        Ok(Self {
            bitorsor: bitorsor.clone(),
            values,
        })
    }

    pub fn zero(bitorsor: &Arc<MoritaBitorsor>) -> Self {
        Self {
            bitorsor: bitorsor.clone(),
            values: vec![ZERO; bitorsor.size()],
        }
    }

    pub fn delta(bitorsor: &Arc<MoritaBitorsor>, q: usize) -> Self {
        let mut out = Self::zero(bitorsor);
        out.values[q] = c(1.0);
        out
    }

    pub fn constant(bitorsor: &Arc<MoritaBitorsor>, value: C64) -> Self {
        Self {
            bitorsor: bitorsor.clone(),
            values: vec![value; bitorsor.size()],
        }
    }

    pub fn random<R: Rng>(bitorsor: &Arc<MoritaBitorsor>, rng: &mut R) -> Self {
        let values = (0..bitorsor.size())
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        Self {
            bitorsor: bitorsor.clone(),
            values,
        }
    }

    pub fn bitorsor(&self) -> &Arc<MoritaBitorsor> {
        &self.bitorsor
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn get(&self, q: usize) -> C64 {
        self.values[q]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).norm()))
    }

    fn same(&self, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.bitorsor, &other.bitorsor) {
            return structural("bimodule elements over different bitorsors");
        }
        Ok(())
    }
}

/// `f·a` for `a` in the right algebra.
pub fn right_action(f: &BimoduleElement, a: &AlgebraElement) -> Result<BimoduleElement> {
    let b = &f.bitorsor;
    if !same_groupoid(a.groupoid(), b.right()) {
        return structural("algebra element is not over the right groupoid of the bitorsor");
    }
    let grp = b.right().group();
    let w = b.right().weight();
    let values = (0..b.size())
        .map(|q| {
            let x = b.rho(q);
            grp.elements()
                .map(|g| a.get(Arrow::new(grp.inv(g), x)) * f.values[b.right_elem(q, g)])
                .sum::<C64>()
                * w
        })
        .collect();
    Ok(BimoduleElement {
        bitorsor: b.clone(),
        values,
    })
}

/// `b·f` for `b` in the left algebra.
pub fn left_action(a: &AlgebraElement, f: &BimoduleElement) -> Result<BimoduleElement> {
    let b = &f.bitorsor;
    if !same_groupoid(a.groupoid(), b.left()) {
        return structural("algebra element is not over the left groupoid of the bitorsor");
    }
    let grp = b.left().group();
    let act = b.left().action();
    let w = b.left().weight();
    let values = (0..b.size())
        .map(|q| {
            let y = b.alpha(q);
            grp.elements()
                .map(|k| {
                    let kinv = grp.inv(k);
                    a.get(Arrow::new(k, act.act(kinv, y))) * f.values[b.left_elem(kinv, q)]
                })
                .sum::<C64>()
                * w
        })
        .collect();
    Ok(BimoduleElement {
        bitorsor: b.clone(),
        values,
    })
}

/// `(f, g)_Θ` together with the largest deviation between admissible base points.
pub fn pairing_theta_with_spread(f: &BimoduleElement, g: &BimoduleElement) -> Result<(AlgebraElement, f64)> {
    f.same(g)?;
    let b = &f.bitorsor;
    let theta = b.right();
    let kg = b.left().group();
    let w = b.left().weight();
    let mut values = Vec::with_capacity(theta.arrow_count());
    let mut spread = 0.0_f64;
    for sigma in theta.arrows() {
        let fiber = b.rho_fiber(theta.target(sigma));
        if fiber.is_empty() {
            return Err(Error::Contract(format!("no torsor point over t{sigma}")));
        }
        let eval = |q: usize| -> C64 {
            kg.elements()
                .map(|k| {
                    let p = b.left_elem(kg.inv(k), q);
                    f.values[p].conj() * g.values[b.right_elem(p, sigma.g)]
                })
                .sum::<C64>()
                * w
        };
        let first = eval(fiber[0]);
        for &q in &fiber[1..] {
            spread = spread.max((eval(q) - first).norm());
        }
        values.push(first);
    }
    Ok((AlgebraElement::from_values(theta, values)?, spread))
}

pub fn pairing_theta(f: &BimoduleElement, g: &BimoduleElement) -> Result<AlgebraElement> {
    pairing_theta_with_spread(f, g).map(|(a, _)| a)
}

/// `_Ξ(f, g)` together with the largest deviation between admissible base points.
pub fn pairing_xi_with_spread(f: &BimoduleElement, g: &BimoduleElement) -> Result<(AlgebraElement, f64)> {
    f.same(g)?;
    let b = &f.bitorsor;
    let xi = b.left();
    let gg = b.right().group();
    let w = b.right().weight();
    let mut values = Vec::with_capacity(xi.arrow_count());
    let mut spread = 0.0_f64;
    for tau in xi.arrows() {
        let fiber = b.alpha_fiber(xi.source(tau));
        if fiber.is_empty() {
            return Err(Error::Contract(format!("no torsor point over s{tau}")));
        }
        let eval = |q: usize| -> C64 {
            let p = b.left_elem(tau.g, q);
            gg.elements()
                .map(|h| f.values[b.right_elem(p, h)] * g.values[b.right_elem(q, h)].conj())
                .sum::<C64>()
                * w
        };
        let first = eval(fiber[0]);
        for &q in &fiber[1..] {
            spread = spread.max((eval(q) - first).norm());
        }
        values.push(first);
    }
    Ok((AlgebraElement::from_values(xi, values)?, spread))
}

pub fn pairing_xi(f: &BimoduleElement, g: &BimoduleElement) -> Result<AlgebraElement> {
    pairing_xi_with_spread(f, g).map(|(a, _)| a)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprimitivityAxiom {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub witness: Option<String>,
}

/// Outcome of the imprimitivity check. Positivity and norms are evaluated in
/// the left regular representation of each convolution algebra.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprimitivityReport {
    pub passed: bool,
    pub axioms: Vec<ImprimitivityAxiom>,
    pub samples: usize,
    pub choice_spread: f64,
    pub positivity_floor_theta: f64,
    pub positivity_floor_xi: f64,
    pub span_theta: usize,
    pub span_xi: usize,
    pub expected_span_theta: usize,
    pub expected_span_xi: usize,
    pub axiom3_floor: f64,
    pub axiom4_residual: f64,
    pub norm_ratio_min: f64,
    pub norm_ratio_max: f64,
}

impl ImprimitivityReport {
    pub fn axiom(&self, name: &str) -> Option<&ImprimitivityAxiom> {
        self.axioms.iter().find(|a| a.name == name)
    }
}

pub const AXIOM_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;

fn min_eigen(a: &AlgebraElement) -> f64 {
    linalg::hermitian_eigenvalues(&a.regular_operator())
        .first()
        .copied()
        .unwrap_or(0.0)
}

fn span_rank(elements: &[AlgebraElement]) -> usize {
    if elements.is_empty() {
        return 0;
    }
    let dim = elements[0].values().len();
    let m = CMatrix::from_fn(dim, elements.len(), |i, j| elements[j].values()[i]);
    linalg::rank(&m, 1e-10)
}

/// Checks the four imprimitivity axioms on `samples` random triples plus
/// exhaustive span and choice-independence sweeps. Both actions must be
/// effective.
pub fn check_imprimitivity(b: &Arc<MoritaBitorsor>, samples: usize, seed: u64) -> Result<ImprimitivityReport> {
    for (side, gd) in [("left", b.left()), ("right", b.right())] {
        if !gd.action().is_effective() {
            return Err(Error::Precondition(format!("the {side} action is not effective")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = b.right();
    let xi = b.left();

    let mut herm = 0.0_f64;
    let mut linear = 0.0_f64;
    let mut spread = 0.0_f64;
    let mut floor_theta = f64::INFINITY;
    let mut floor_xi = f64::INFINITY;
    let mut ax3 = f64::INFINITY;
    let mut ax3_witness = None;
    let mut ax4 = 0.0_f64;
    let mut ax4_witness = None;
    for s in 0..samples {
        let u = BimoduleElement::random(b, &mut rng);
        let v = BimoduleElement::random(b, &mut rng);
        let w = BimoduleElement::random(b, &mut rng);
        let a = AlgebraElement::random(theta, &mut rng);
        let bb = AlgebraElement::random(xi, &mut rng);

        let (uv, s1) = pairing_theta_with_spread(&u, &v)?;
        let (vu, s2) = pairing_theta_with_spread(&v, &u)?;
        let (xuv, s3) = pairing_xi_with_spread(&u, &v)?;
        let xvu = pairing_xi(&v, &u)?;
        spread = spread.max(s1).max(s2).max(s3);
        herm = herm.max(uv.involution().max_abs_diff(&vu)).max(xuv.involution().max_abs_diff(&xvu));

        // (u, v·a)_Θ = (u, v)_Θ · a and _Ξ(b·u, v) = b · _Ξ(u, v)
        let lhs = pairing_theta(&u, &right_action(&v, &a)?)?;
        linear = linear.max(lhs.max_abs_diff(&uv.convolve(&a)?));
        let lhs = pairing_xi(&left_action(&bb, &u)?, &v)?;
        linear = linear.max(lhs.max_abs_diff(&bb.convolve(&xuv)?));

        let uu = pairing_theta(&u, &u)?;
        let xuu = pairing_xi(&u, &u)?;
        floor_theta = floor_theta.min(min_eigen(&uu));
        floor_xi = floor_xi.min(min_eigen(&xuu));

        // ‖b‖²(u,u)_Θ − (bu,bu)_Θ ≥ 0 and ‖a‖²·_Ξ(u,u) − _Ξ(ua,ua) ≥ 0
        let bu = left_action(&bb, &u)?;
        let nb = bb.cstar_norm();
        let diff = uu.scale(c(nb * nb)).sub(&pairing_theta(&bu, &bu)?)?;
        let scale = (nb * nb * uu.cstar_norm()).max(1.0);
        let m = min_eigen(&diff) / scale;
        if m < ax3 {
            ax3 = m;
            ax3_witness = Some(format!("sample {s}, left side"));
        }
        let ua = right_action(&u, &a)?;
        let na = a.cstar_norm();
        let diff = xuu.scale(c(na * na)).sub(&pairing_xi(&ua, &ua)?)?;
        let scale = (na * na * xuu.cstar_norm()).max(1.0);
        let m = min_eigen(&diff) / scale;
        if m < ax3 {
            ax3 = m;
            ax3_witness = Some(format!("sample {s}, right side"));
        }

        // u·(v, w)_Θ = _Ξ(u, v)·w
        let lhs = right_action(&u, &pairing_theta(&v, &w)?)?;
        let rhs = left_action(&xuv, &w)?;
        let r = lhs.max_abs_diff(&rhs);
        if r > ax4 {
            ax4 = r;
            ax4_witness = Some(format!("sample {s}"));
        }
    }

    let n = b.size();
    let deltas: Vec<BimoduleElement> = (0..n).map(|q| BimoduleElement::delta(b, q)).collect();
    let mut theta_span = Vec::with_capacity(n * n);
    let mut xi_span = Vec::with_capacity(n * n);
    for p in &deltas {
        for q in &deltas {
            let (t, s1) = pairing_theta_with_spread(p, q)?;
            let (x, s2) = pairing_xi_with_spread(p, q)?;
            spread = spread.max(s1).max(s2);
            theta_span.push(t);
            xi_span.push(x);
        }
    }
    let span_theta = span_rank(&theta_span);
    let span_xi = span_rank(&xi_span);

    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = 0.0_f64;
    for _ in 0..200 {
        let u = BimoduleElement::random(b, &mut rng);
        let nt = pairing_theta(&u, &u)?.cstar_norm().sqrt();
        let nx = pairing_xi(&u, &u)?.cstar_norm().sqrt();
        if nx > 0.0 {
            ratio_min = ratio_min.min(nt / nx);
            ratio_max = ratio_max.max(nt / nx);
        }
    }

    let floor = floor_theta.min(floor_xi);
    let axiom = |name: &str, ok: bool, residual: f64, witness: Option<String>| ImprimitivityAxiom {
        name: name.into(),
        passed: ok,
        residual,
        witness: if ok { None } else { witness },
    };
    let ax1_ok = herm <= AXIOM_TOL && linear <= AXIOM_TOL && spread <= AXIOM_TOL && floor >= -POSITIVITY_TOL;
    let axioms = vec![
        axiom(
            "inner products",
            ax1_ok,
            herm.max(linear).max(spread).max((-floor).max(0.0)),
            Some(format!(
                "hermiticity {herm:.3e}, linearity {linear:.3e}, choice spread {spread:.3e}, positivity floor {floor:.3e}"
            )),
        ),
        axiom(
            "full spans",
            span_theta == theta.arrow_count() && span_xi == xi.arrow_count(),
            0.0,
            Some(format!(
                "span dimensions {span_theta}/{} and {span_xi}/{}",
                theta.arrow_count(),
                xi.arrow_count()
            )),
        ),
        axiom(
            "bounded actions",
            ax3 >= -POSITIVITY_TOL,
            (-ax3).max(0.0),
            ax3_witness.map(|w| format!("{w}: relative eigenvalue floor {ax3:.3e}")),
        ),
        axiom(
            "associativity",
            ax4 <= AXIOM_TOL,
            ax4,
            ax4_witness.map(|w| format!("{w}: residual {ax4:.3e}")),
        ),
    ];
    Ok(ImprimitivityReport {
        passed: axioms.iter().all(|a| a.passed),
        axioms,
        samples,
        choice_spread: spread,
        positivity_floor_theta: floor_theta,
        positivity_floor_xi: floor_xi,
        span_theta,
        span_xi,
        expected_span_theta: theta.arrow_count(),
        expected_span_xi: xi.arrow_count(),
        axiom3_floor: ax3,
        axiom4_residual: ax4,
        norm_ratio_min: ratio_min,
        norm_ratio_max: ratio_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{ActionGroupoid, GroupAction, HaarConvention};
    use crate::bitorsor::{identity_bitorsor, quotient_bitorsor};
    use crate::geometry::{DiscreteOrbifold, MetricGraph};

    fn identity(haar: HaarConvention) -> Arc<MoritaBitorsor> {
        Arc::new(identity_bitorsor(&ActionGroupoid::shared(GroupAction::reflection(6), haar)))
    }

    fn quotient(haar: HaarConvention) -> Arc<MoritaBitorsor> {
        let orb = DiscreteOrbifold::new(
            MetricGraph::cycle(6, 1.0).unwrap(),
            GroupAction::cyclic_rotation(6, 3).unwrap(),
        )
        .unwrap();
        Arc::new(quotient_bitorsor(&orb, haar).unwrap())
    }

    #[test]
    fn unit_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for haar in [HaarConvention::Counting, HaarConvention::Normalized] {
            for b in [identity(haar), quotient(haar)] {
                let f = BimoduleElement::random(&b, &mut rng);
                let r = right_action(&f, &AlgebraElement::unit(b.right())).unwrap();
                let l = left_action(&AlgebraElement::unit(b.left()), &f).unwrap();
                assert!(r.max_abs_diff(&f) < 1e-12);
                assert!(l.max_abs_diff(&f) < 1e-12);
            }
        }
    }

    #[test]
    fn actions_are_associative_and_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = identity(HaarConvention::Counting);
        let f = BimoduleElement::random(&b, &mut rng);
        let a1 = AlgebraElement::random(b.right(), &mut rng);
        let a2 = AlgebraElement::random(b.right(), &mut rng);
        let lhs = right_action(&right_action(&f, &a1).unwrap(), &a2).unwrap();
        let rhs = right_action(&f, &a1.convolve(&a2).unwrap()).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        let b1 = AlgebraElement::random(b.left(), &mut rng);
        let b2 = AlgebraElement::random(b.left(), &mut rng);
        let lhs = left_action(&b1.convolve(&b2).unwrap(), &f).unwrap();
        let rhs = left_action(&b1, &left_action(&b2, &f).unwrap()).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        let lhs = left_action(&b1, &right_action(&f, &a1).unwrap()).unwrap();
        let rhs = right_action(&left_action(&b1, &f).unwrap(), &a1).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn identity_right_action_is_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for haar in [HaarConvention::Counting, HaarConvention::Normalized] {
            let b = identity(haar);
            let theta = b.right().clone();
            let f = BimoduleElement::random(&b, &mut rng);
            let a = AlgebraElement::random(&theta, &mut rng);
            let fa = right_action(&f, &a).unwrap();
            let as_alg = AlgebraElement::from_values(&theta, f.values().to_vec()).unwrap();
            let conv = as_alg.convolve(&a).unwrap();
            assert!(conv.values().iter().zip(fa.values()).all(|(x, y)| (x - y).norm() < 1e-12));
        }
    }

    #[test]
    fn pairing_is_choice_independent_and_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b = identity(HaarConvention::Counting);
        let f = BimoduleElement::random(&b, &mut rng);
        let g = BimoduleElement::random(&b, &mut rng);
        let (fg, spread) = pairing_theta_with_spread(&f, &g).unwrap();
        assert!(spread < 1e-12);
        let gf = pairing_theta(&g, &f).unwrap();
        assert!(fg.involution().max_abs_diff(&gf) < 1e-12);
        let (_, spread) = pairing_xi_with_spread(&f, &g).unwrap();
        assert!(spread < 1e-12);
    }

    #[test]
    fn imprimitivity_passes_on_fixtures() {
        for haar in [HaarConvention::Counting, HaarConvention::Normalized] {
            for b in [identity(haar), quotient(haar)] {
                let report = check_imprimitivity(&b, 20, 0).unwrap();
                assert!(report.passed, "{report:#?}");
                assert_eq!(report.span_theta, b.right().arrow_count());
                assert_eq!(report.span_xi, b.left().arrow_count());
            }
        }
    }

    #[test]
    fn non_effective_actions_are_rejected() {
        let action = GroupAction::new(crate::algebra::FiniteGroup::cyclic(2), 3, vec![vec![0, 1, 2]; 2]).unwrap();
        let b = Arc::new(identity_bitorsor(&ActionGroupoid::shared(action, HaarConvention::Counting)));
        assert!(matches!(check_imprimitivity(&b, 2, 0), Err(Error::Precondition(_))));
    }
}
