//! Standard model families used by tests, the CLI and the FFI layer.

use std::sync::Arc;

use crate::algebra::{ActionGroupoid, GroupAction, HaarConvention};
use crate::bitorsor::{identity_bitorsor, identity_edges, quotient_bitorsor, MoritaBitorsor};
use crate::dirac::{DiracOperator, SpectralTripleData, SpinorBundle};
use crate::error::{domain, Result};
use crate::geometry::{DiscreteOrbifold, MetricGraph};
use crate::linalg::{CMatrix, I, ZERO};

/// A free action, its quotient bitorsor and the triples on both sides.
#[derive(Debug, Clone)]
pub struct QuotientModel {
    pub orbifold: DiscreteOrbifold,
    pub bitorsor: Arc<MoritaBitorsor>,
    /// Crossed-product triple over the acting groupoid.
    pub crossed: SpectralTripleData,
    /// Triple of the quotient circle over the trivial groupoid on orbits.
    pub quotient: SpectralTripleData,
    pub quotient_graph: MetricGraph,
}

/// `Z₂` acting on `C_n` by the half-turn, with the circle Dirac operator of
/// the given rank on both `C_n` and `C_{n/2}`.
pub fn rotation_quotient(n: usize, rank: usize, circumference: f64, haar: HaarConvention) -> Result<QuotientModel> {
    if !n.is_multiple_of(2) || n < 6 {
        return domain(format!("rotation quotient needs an even n ≥ 6, got {n}"));
    }
    let graph = MetricGraph::refine_circle(n, circumference)?;
    let action = GroupAction::cyclic_rotation(n, n / 2)?;
    let orbifold = DiscreteOrbifold::new(graph.clone(), action.clone())?;
    let bitorsor = Arc::new(quotient_bitorsor(&orbifold, haar)?);
    let theta = bitorsor.right().clone();
    let crossed = SpectralTripleData::new(theta, DiracOperator::circle(SpinorBundle::trivial(graph, action, rank)?)?)?
        .with_declared_dimension(1.0);
    let quotient_graph = orbifold.quotient_graph()?;
    let xi = bitorsor.left().clone();
    let bundle = SpinorBundle::trivial(quotient_graph.clone(), xi.action().clone(), rank)?;
    let quotient = SpectralTripleData::new(xi, DiracOperator::circle(bundle)?)?.with_declared_dimension(1.0);
    Ok(QuotientModel {
        orbifold,
        bitorsor,
        crossed,
        quotient,
        quotient_graph,
    })
}

/// `σ_y`, the fiber action of the reflection in the rank-2 model.
pub fn sigma_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

/// `Z₂` reflecting `C_n` through vertex 0, with the rank-2 circle Dirac
/// operator and the cocycle `ρ(s) = σ_y`. The grading is dropped because
/// `σ_y` does not commute with it.
pub fn reflection(n: usize, circumference: f64, haar: HaarConvention) -> Result<(DiscreteOrbifold, SpectralTripleData)> {
    let graph = MetricGraph::refine_circle(n, circumference)?;
    let action = GroupAction::reflection(n);
    let orbifold = DiscreteOrbifold::new(graph.clone(), action.clone())?;
    let bundle = SpinorBundle::constant(graph, action.clone(), vec![CMatrix::identity(2, 2), sigma_y()])?;
    let d = DiracOperator::circle(bundle)?;
    let d = DiracOperator::new(d.bundle().clone(), d.matrix().clone(), None)?;
    let triple = SpectralTripleData::new(ActionGroupoid::shared(action, haar), d)?.with_declared_dimension(1.0);
    Ok((orbifold, triple))
}

/// The circle with the trivial group.
pub fn circle(n: usize, rank: usize, circumference: f64, haar: HaarConvention) -> Result<(DiscreteOrbifold, SpectralTripleData)> {
    let graph = MetricGraph::refine_circle(n, circumference)?;
    let action = GroupAction::trivial(n);
    let orbifold = DiscreteOrbifold::new(graph.clone(), action.clone())?;
    let d = DiracOperator::circle(SpinorBundle::trivial(graph, action.clone(), rank)?)?;
    let triple = SpectralTripleData::new(ActionGroupoid::shared(action, haar), d)?.with_declared_dimension(1.0);
    Ok((orbifold, triple))
}

/// The `n × m` torus with the trivial group and the rank-2 Dirac operator.
pub fn torus(n: usize, m: usize, edge_length: f64, haar: HaarConvention) -> Result<SpectralTripleData> {
    let d = DiracOperator::torus(n, m, edge_length)?;
    let action = d.bundle().action().clone();
    Ok(SpectralTripleData::new(ActionGroupoid::shared(action, haar), d)?.with_declared_dimension(2.0))
}

/// The identity bitorsor of a triple's groupoid, with sheet edges over its graph.
pub fn identity_for(t: &SpectralTripleData) -> Result<Arc<MoritaBitorsor>> {
    let theta = t.groupoid();
    let edges = identity_edges(theta, t.bundle().base());
    Ok(Arc::new(identity_bitorsor(theta).with_edges(edges)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn models_build() {
        let q = rotation_quotient(6, 1, 6.0, HaarConvention::Counting).unwrap();
        assert_eq!(q.quotient.hilbert_dim(), 3);
        assert!(q.orbifold.singular_locus().is_empty());
        let (orb, t) = reflection(8, 8.0, HaarConvention::Counting).unwrap();
        assert!(orb.singular_locus().pointlike);
        assert!(t.invariant_triple().is_ok());
        assert_eq!(torus(4, 4, 1.0, HaarConvention::Counting).unwrap().hilbert_dim(), 32);
        assert!(rotation_quotient(7, 1, 1.0, HaarConvention::Counting).is_err());
    }
}
