//! Morita bitorsors `Ξ ⇶ Q ⇇ Θ` between action groupoids `Ξ = K ⋉ Y` and
//! `Θ = G ⋉ X`.
//!
//! The actions are stored as tables over group elements: `L(k, q)` is
//! `(k, α(q))·q` and `R(q, g)` is `q·(g, g⁻¹·ϱ(q))`, so that
//! `α(L(k, q)) = k·α(q)` and `ϱ(R(q, g)) = g⁻¹·ϱ(q)`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use serde::Serialize;

use crate::algebra::{same_groupoid, ActionGroupoid, Arrow, GroupAction, HaarConvention};
use crate::error::{contract, domain, structural, Error, Result};
use crate::geometry::{DiscreteOrbifold, MetricGraph};

#[derive(Debug, Clone)]
pub struct MoritaBitorsor {
    left: Arc<ActionGroupoid>,
    right: Arc<ActionGroupoid>,
    alpha: Vec<usize>,
    rho: Vec<usize>,
    left_table: Vec<usize>,
    right_table: Vec<usize>,
    edges: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomCheck {
    pub name: String,
    pub passed: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<AxiomCheck>,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&AxiomCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn check(name: &str, witness: Option<String>) -> AxiomCheck {
    AxiomCheck {
        name: name.to_string(),
        passed: witness.is_none(),
        witness,
    }
}

impl MoritaBitorsor {
    /// Assembles a bitorsor from its tables. Only shapes and ranges are
    /// checked here; the axioms are checked by [`MoritaBitorsor::validate`].
    pub fn from_tables(
        left: Arc<ActionGroupoid>,
        right: Arc<ActionGroupoid>,
        alpha: Vec<usize>,
        rho: Vec<usize>,
        left_table: Vec<usize>,
        right_table: Vec<usize>,
    ) -> Result<Self> {
        let n = alpha.len();
        if rho.len() != n {
            return structural(format!("α has {n} entries but ϱ has {}", rho.len()));
        }
        if left.haar() != right.haar() {
            return structural("the two groupoids use different Haar conventions");
        }
        if let Some(q) = (0..n).find(|&q| alpha[q] >= left.points()) {
            return domain(format!("α({q}) = {} is not a point of Y", alpha[q]));
        }
        if let Some(q) = (0..n).find(|&q| rho[q] >= right.points()) {
            return domain(format!("ϱ({q}) = {} is not a point of X", rho[q]));
        }
        if left_table.len() != left.group_order() * n {
            return structural(format!("left action table has {} entries, expected {}", left_table.len(), left.group_order() * n));
        }
        if right_table.len() != right.group_order() * n {
            return structural(format!("right action table has {} entries, expected {}", right_table.len(), right.group_order() * n));
        }
        if left_table.iter().chain(&right_table).any(|&q| q >= n) {
            return domain("an action table entry is not a point of Q");
        }
        Ok(Self {
            left,
            right,
            alpha,
            rho,
            left_table,
            right_table,
            edges: None,
        })
    }

    /// Attaches an edge list on `Q` (used by [`MoritaBitorsor::lift_graph`]).
    pub fn with_edges(mut self, edges: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= self.size() || b >= self.size()) {
            return domain(format!("edge ({a}, {b}) uses a point outside Q"));
        }
        self.edges = Some(edges);
        Ok(self)
    }

    pub fn left(&self) -> &Arc<ActionGroupoid> {
        &self.left
    }

    pub fn right(&self) -> &Arc<ActionGroupoid> {
        &self.right
    }

    pub fn size(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self, q: usize) -> usize {
        self.alpha[q]
    }

    pub fn rho(&self, q: usize) -> usize {
        self.rho[q]
    }

    pub fn alpha_map(&self) -> &[usize] {
        &self.alpha
    }

    pub fn rho_map(&self) -> &[usize] {
        &self.rho
    }

    pub fn edges(&self) -> Option<&[(usize, usize)]> {
        self.edges.as_deref()
    }

    /// `L(k, q) = (k, α(q))·q`.
    pub fn left_elem(&self, k: usize, q: usize) -> usize {
        self.left_table[k * self.size() + q]
    }

    /// `R(q, g) = q·(g, g⁻¹·ϱ(q))`.
    pub fn right_elem(&self, q: usize, g: usize) -> usize {
        self.right_table[g * self.size() + q]
    }

    pub fn left_table(&self) -> &[usize] {
        &self.left_table
    }

    pub fn right_table(&self) -> &[usize] {
        &self.right_table
    }

    /// `τ·q`, defined when `s(τ) = α(q)`.
    pub fn left_act(&self, tau: Arrow, q: usize) -> Result<usize> {
        if tau.x != self.alpha[q] {
            return domain(format!("left action of {tau} on {q} needs s = α({q}) = {}", self.alpha[q]));
        }
        Ok(self.left_elem(tau.g, q))
    }

    /// `q·σ`, defined when `t(σ) = ϱ(q)`.
    pub fn right_act(&self, q: usize, sigma: Arrow) -> Result<usize> {
        if self.right.target(sigma) != self.rho[q] {
            return domain(format!("right action of {sigma} on {q} needs t = ϱ({q}) = {}", self.rho[q]));
        }
        Ok(self.right_elem(q, sigma.g))
    }

    pub fn alpha_fiber(&self, y: usize) -> Vec<usize> {
        (0..self.size()).filter(|&q| self.alpha[q] == y).collect()
    }

    pub fn rho_fiber(&self, x: usize) -> Vec<usize> {
        (0..self.size()).filter(|&q| self.rho[q] == x).collect()
    }

    /// Exhaustive check of every bitorsor axiom, with a witness per failure.
    pub fn validate(&self) -> ValidationReport {
        let n = self.size();
        let kg = self.left.group();
        let gg = self.right.group();
        let ka = self.left.action();
        let ga = self.right.action();
        let find = |mut it: Box<dyn Iterator<Item = Option<String>> + '_>| it.find_map(|w| w);

        let mut checks = Vec::new();
        checks.push(check(
            "left action axioms",
            find(Box::new((0..n).flat_map(move |q| {
                let unit = (self.left_elem(kg.identity(), q) != q).then(|| format!("L(e, {q}) ≠ {q}"));
                std::iter::once(unit).chain(kg.elements().flat_map(move |k1| {
                    kg.elements().map(move |k2| {
                        let lhs = self.left_elem(k2, self.left_elem(k1, q));
                        let rhs = self.left_elem(kg.mul(k2, k1), q);
                        (lhs != rhs).then(|| format!("L({k2}, L({k1}, {q})) = {lhs} but L({k2}·{k1}, {q}) = {rhs}"))
                    })
                }))
            }))),
        ));
        checks.push(check(
            "right action axioms",
            find(Box::new((0..n).flat_map(move |q| {
                let unit = (self.right_elem(q, gg.identity()) != q).then(|| format!("R({q}, e) ≠ {q}"));
                std::iter::once(unit).chain(gg.elements().flat_map(move |g1| {
                    gg.elements().map(move |g2| {
                        let lhs = self.right_elem(self.right_elem(q, g1), g2);
                        let rhs = self.right_elem(q, gg.mul(g1, g2));
                        (lhs != rhs).then(|| format!("R(R({q}, {g1}), {g2}) = {lhs} but R({q}, {g1}·{g2}) = {rhs}"))
                    })
                }))
            }))),
        ));
        checks.push(check(
            "alpha equivariance",
            find(Box::new((0..n).flat_map(move |q| {
                kg.elements().map(move |k| {
                    let got = self.alpha[self.left_elem(k, q)];
                    let want = ka.act(k, self.alpha[q]);
                    (got != want).then(|| format!("α(L({k}, {q})) = {got}, expected {want}"))
                })
            }))),
        ));
        checks.push(check(
            "rho equivariance",
            find(Box::new((0..n).flat_map(move |q| {
                gg.elements().map(move |g| {
                    let got = self.rho[self.right_elem(q, g)];
                    let want = ga.act(gg.inv(g), self.rho[q]);
                    (got != want).then(|| format!("ϱ(R({q}, {g})) = {got}, expected {want}"))
                })
            }))),
        ));
        checks.push(check(
            "alpha right invariance",
            find(Box::new((0..n).flat_map(move |q| {
                gg.elements().map(move |g| {
                    let got = self.alpha[self.right_elem(q, g)];
                    (got != self.alpha[q]).then(|| format!("α(R({q}, {g})) = {got} ≠ α({q}) = {}", self.alpha[q]))
                })
            }))),
        ));
        checks.push(check(
            "rho left invariance",
            find(Box::new((0..n).flat_map(move |q| {
                kg.elements().map(move |k| {
                    let got = self.rho[self.left_elem(k, q)];
                    (got != self.rho[q]).then(|| format!("ϱ(L({k}, {q})) = {got} ≠ ϱ({q}) = {}", self.rho[q]))
                })
            }))),
        ));
        checks.push(check(
            "actions commute",
            find(Box::new((0..n).flat_map(move |q| {
                kg.elements().flat_map(move |k| {
                    gg.elements().map(move |g| {
                        let a = self.left_elem(k, self.right_elem(q, g));
                        let b = self.right_elem(self.left_elem(k, q), g);
                        (a != b).then(|| format!("L({k}, R({q}, {g})) = {a} but R(L({k}, {q}), {g}) = {b}"))
                    })
                })
            }))),
        ));
        checks.push(check(
            "right action free and transitive on alpha fibers",
            find(Box::new((0..n).map(move |q| {
                let orbit: BTreeSet<usize> = gg.elements().map(|g| self.right_elem(q, g)).collect();
                let fiber: BTreeSet<usize> = self.alpha_fiber(self.alpha[q]).into_iter().collect();
                if orbit.len() != gg.order() {
                    Some(format!("g ↦ R({q}, g) is not injective"))
                } else if orbit != fiber {
                    Some(format!("R({q}, G) = {orbit:?} differs from α⁻¹({}) = {fiber:?}", self.alpha[q]))
                } else {
                    None
                }
            }))),
        ));
        checks.push(check(
            "left action free and transitive on rho fibers",
            find(Box::new((0..n).map(move |q| {
                let orbit: BTreeSet<usize> = kg.elements().map(|k| self.left_elem(k, q)).collect();
                let fiber: BTreeSet<usize> = self.rho_fiber(self.rho[q]).into_iter().collect();
                if orbit.len() != kg.order() {
                    Some(format!("k ↦ L(k, {q}) is not injective"))
                } else if orbit != fiber {
                    Some(format!("L(K, {q}) = {orbit:?} differs from ϱ⁻¹({}) = {fiber:?}", self.rho[q]))
                } else {
                    None
                }
            }))),
        ));
        let alpha_image: BTreeSet<usize> = self.alpha.iter().copied().collect();
        let rho_image: BTreeSet<usize> = self.rho.iter().copied().collect();
        let missing_y = (0..self.left.points()).find(|y| !alpha_image.contains(y));
        let missing_x = (0..self.right.points()).find(|x| !rho_image.contains(x));
        checks.push(check(
            "anchors surjective",
            missing_y
                .map(|y| format!("{y} ∈ Y is not in the image of α"))
                .or(missing_x.map(|x| format!("{x} ∈ X is not in the image of ϱ"))),
        ));
        ValidationReport {
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    /// Sizes of `ϱ⁻¹(x)` for every `x` and `α⁻¹(y)` for every `y`.
    /// Every `ϱ`-fiber must have `#K` points and every `α`-fiber `#G`.
    pub fn fiber_cardinalities(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut rho_sizes = vec![0; self.right.points()];
        let mut alpha_sizes = vec![0; self.left.points()];
        for q in 0..self.size() {
            rho_sizes[self.rho[q]] += 1;
            alpha_sizes[self.alpha[q]] += 1;
        }
        let (k, g) = (self.left.group_order(), self.right.group_order());
        if let Some(x) = rho_sizes.iter().position(|&s| s != k) {
            return contract(format!("ϱ⁻¹({x}) has {} points, expected #K = {k}", rho_sizes[x]));
        }
        if let Some(y) = alpha_sizes.iter().position(|&s| s != g) {
            return contract(format!("α⁻¹({y}) has {} points, expected #G = {g}", alpha_sizes[y]));
        }
        Ok((rho_sizes, alpha_sizes))
    }

    /// Edges on `Q` lying over edges of both `X` and `Y` with equal lengths.
    pub fn candidate_edges(&self, x_graph: &MetricGraph, y_graph: &MetricGraph) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.size() {
            for b in a + 1..self.size() {
                let lx = x_graph.edge_length(self.rho[a], self.rho[b]);
                let ly = y_graph.edge_length(self.alpha[a], self.alpha[b]);
                if let (Some(lx), Some(ly)) = (lx, ly) {
                    if lx == ly {
                        out.push((a, b));
                    }
                }
            }
        }
        out
    }

    /// Graph on `Q` with lengths pulled back along both anchors, checked to
    /// make `ϱ` and `α` graph coverings. Uses the attached edges if present,
    /// otherwise [`MoritaBitorsor::candidate_edges`].
    pub fn lift_graph(&self, x_graph: &MetricGraph, y_graph: &MetricGraph) -> Result<MetricGraph> {
        if x_graph.vertex_count() != self.right.points() || y_graph.vertex_count() != self.left.points() {
            return structural("base graphs do not match the groupoid unit spaces");
        }
        let edges = match &self.edges {
            Some(e) => e.clone(),
            None => self.candidate_edges(x_graph, y_graph),
        };
        let mut weighted = Vec::with_capacity(edges.len());
        for &(a, b) in &edges {
            let lx = x_graph.edge_length(self.rho[a], self.rho[b]).ok_or_else(|| {
                Error::Structural(format!(
                    "edge ({a}, {b}) of Q maps under ϱ to ({}, {}), which is not an edge of X",
                    self.rho[a], self.rho[b]
                ))
            })?;
            let ly = y_graph.edge_length(self.alpha[a], self.alpha[b]).ok_or_else(|| {
                Error::Structural(format!(
                    "edge ({a}, {b}) of Q maps under α to ({}, {}), which is not an edge of Y",
                    self.alpha[a], self.alpha[b]
                ))
            })?;
            if lx != ly {
                return structural(format!("edge ({a}, {b}) of Q has length {lx} over X but {ly} over Y"));
            }
            weighted.push((a, b, lx));
        }
        let q_graph = MetricGraph::new(self.size(), &weighted)?;
        for q in 0..self.size() {
            covering_at(q, &q_graph, x_graph, &self.rho, "ϱ")?;
            covering_at(q, &q_graph, y_graph, &self.alpha, "α")?;
        }
        Ok(q_graph)
    }

    /// Bijection `Q_self → Q_other` commuting with anchors and both actions, if any.
    pub fn isomorphism(&self, other: &Self) -> Option<Vec<usize>> {
        if !same_groupoid(&self.left, &other.left)
            || !same_groupoid(&self.right, &other.right)
            || self.size() != other.size()
        {
            return None;
        }
        let n = self.size();
        let mut map = vec![usize::MAX; n];
        let mut used = vec![false; n];
        self.extend_isomorphism(other, &mut map, &mut used).then_some(map)
    }

    fn extend_isomorphism(&self, other: &Self, map: &mut Vec<usize>, used: &mut Vec<bool>) -> bool {
        let Some(start) = map.iter().position(|&m| m == usize::MAX) else {
            return true;
        };
        for cand in 0..other.size() {
            if used[cand] || other.alpha[cand] != self.alpha[start] || other.rho[cand] != self.rho[start] {
                continue;
            }
            let (saved_map, saved_used) = (map.clone(), used.clone());
            if self.propagate(other, start, cand, map, used) && self.extend_isomorphism(other, map, used) {
                return true;
            }
            *map = saved_map;
            *used = saved_used;
        }
        false
    }

    /// Forces images along the action orbit of `start`; false on conflict.
    fn propagate(&self, other: &Self, start: usize, image: usize, map: &mut [usize], used: &mut [bool]) -> bool {
        let mut queue = VecDeque::from([(start, image)]);
        while let Some((p, pi)) = queue.pop_front() {
            if map[p] != usize::MAX {
                if map[p] != pi {
                    return false;
                }
                continue;
            }
            if used[pi] || other.alpha[pi] != self.alpha[p] || other.rho[pi] != self.rho[p] {
                return false;
            }
            map[p] = pi;
            used[pi] = true;
            for k in self.left.group().elements() {
                queue.push_back((self.left_elem(k, p), other.left_elem(k, pi)));
            }
            for g in self.right.group().elements() {
                queue.push_back((self.right_elem(p, g), other.right_elem(pi, g)));
            }
        }
        true
    }

    pub fn is_isomorphic(&self, other: &Self) -> bool {
        self.isomorphism(other).is_some()
    }
}

fn covering_at(q: usize, q_graph: &MetricGraph, base: &MetricGraph, anchor: &[usize], name: &str) -> Result<()> {
    let below: Vec<usize> = q_graph.neighbors(q).iter().map(|&(p, _)| anchor[p]).collect();
    let mut sorted = below.clone();
    sorted.sort_unstable();
    let expected: Vec<usize> = base.neighbors(anchor[q]).iter().map(|&(v, _)| v).collect();
    if sorted != expected {
        let offending = q_graph
            .neighbors(q)
            .iter()
            .map(|&(p, _)| p)
            .find(|&p| below.iter().filter(|&&v| v == anchor[p]).count() > 1 || !expected.contains(&anchor[p]));
        return match offending {
            Some(p) => structural(format!(
                "{name} is not a covering at {q}: edge ({}, {}) duplicates or leaves the neighbourhood of {}",
                q.min(p),
                q.max(p),
                anchor[q]
            )),
            None => structural(format!(
                "{name} is not a covering at {q}: neighbours of {} over it are {sorted:?}, expected {expected:?}",
                anchor[q]
            )),
        };
    }
    Ok(())
}

/// The arrow space of `Θ` as a `Θ`–`Θ` bitorsor: `α = t`, `ϱ = s`, both
/// actions by composition. Point `(h, x)` has id `h * |X| + x`.
pub fn identity_bitorsor(theta: &Arc<ActionGroupoid>) -> MoritaBitorsor {
    let grp = theta.group();
    let act = theta.action();
    let n = theta.points();
    let size = theta.arrow_count();
    let alpha = (0..size).map(|i| theta.target(theta.arrow(i))).collect();
    let rho = (0..size).map(|i| theta.arrow(i).x).collect();
    let left_table = grp
        .elements()
        .flat_map(|k| (0..size).map(move |i| (grp.mul(k, i / n)) * n + i % n))
        .collect();
    let right_table = grp
        .elements()
        .flat_map(|g| {
            (0..size).map(move |i| {
                let (h, x) = (i / n, i % n);
                grp.mul(h, g) * n + act.act(grp.inv(g), x)
            })
        })
        .collect();
    MoritaBitorsor::from_tables(theta.clone(), theta.clone(), alpha, rho, left_table, right_table)
        .expect("identity bitorsor tables are well formed")
}

/// Sheets `{h} × X` of the identity bitorsor, each a copy of the graph.
pub fn identity_edges(theta: &ActionGroupoid, graph: &MetricGraph) -> Vec<(usize, usize)> {
    let n = theta.points();
    theta
        .group()
        .elements()
        .flat_map(|h| graph.edges().iter().map(move |e| (h * n + e.a, h * n + e.b)))
        .collect()
}

/// For a free action: the `1 ⋉ (X/G)`–`G ⋉ X` bitorsor with `Q = X`,
/// `α` the orbit projection, `ϱ = id` and `R(q, g) = g⁻¹·q`. Orbits are
/// ordered by smallest representative. `Q` carries the graph of `X`.
pub fn quotient_bitorsor(orb: &DiscreteOrbifold, haar: HaarConvention) -> Result<MoritaBitorsor> {
    let locus = orb.singular_locus();
    if !locus.is_empty() {
        return Err(Error::Precondition(format!(
            "the action is not free; singular vertices {:?}",
            locus.vertex_ids()
        )));
    }
    let action = orb.action().clone();
    let n = action.points();
    let orbits = action.orbits();
    let theta = ActionGroupoid::shared(action.clone(), haar);
    let xi = ActionGroupoid::shared(GroupAction::trivial(orbits.len()), haar);
    let grp = action.group();
    let act = &action;
    let right_table = grp
        .elements()
        .flat_map(|g| (0..n).map(move |q| act.act(grp.inv(g), q)))
        .collect::<Vec<_>>();
    let edges = orb.graph().edges().iter().map(|e| (e.a, e.b)).collect();
    MoritaBitorsor::from_tables(xi, theta, action.orbit_index(), (0..n).collect(), (0..n).collect(), right_table)?
        .with_edges(edges)
}

/// The inverse bitorsor: groupoids and anchors swapped,
/// `L'(g, q) = R(q, g⁻¹)` and `R'(q, k) = L(k⁻¹, q)`.
pub fn dual_bitorsor(b: &MoritaBitorsor) -> MoritaBitorsor {
    let n = b.size();
    let (kg, gg) = (b.left.group(), b.right.group());
    let left_table = gg
        .elements()
        .flat_map(|g| (0..n).map(move |q| b.right_elem(q, gg.inv(g))))
        .collect();
    let right_table = kg
        .elements()
        .flat_map(|k| (0..n).map(move |q| b.left_elem(kg.inv(k), q)))
        .collect();
    MoritaBitorsor {
        left: b.right.clone(),
        right: b.left.clone(),
        alpha: b.rho.clone(),
        rho: b.alpha.clone(),
        left_table,
        right_table,
        edges: b.edges.clone(),
    }
}

/// `P ×_K Q`: pairs with `ϱ_P(p) = α_Q(q)` modulo
/// `(p, q) ~ (R_P(p, k⁻¹), L_Q(k, q))`. Classes are numbered by their
/// smallest pair. Edges are induced when both factors carry edges.
pub fn compose_bitorsors(p: &MoritaBitorsor, q: &MoritaBitorsor) -> Result<MoritaBitorsor> {
    if !same_groupoid(&p.right, &q.left) {
        return structural("the middle groupoids of the two bitorsors differ");
    }
    let k = p.right.group();
    let mut class_of: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut reps = Vec::new();
    for a in 0..p.size() {
        for b in 0..q.size() {
            if p.rho[a] != q.alpha[b] || class_of.contains_key(&(a, b)) {
                continue;
            }
            let id = reps.len();
            reps.push((a, b));
            for kk in k.elements() {
                class_of.insert((p.right_elem(a, k.inv(kk)), q.left_elem(kk, b)), id);
            }
        }
    }
    let size = reps.len();
    let alpha = reps.iter().map(|&(a, _)| p.alpha[a]).collect();
    let rho = reps.iter().map(|&(_, b)| q.rho[b]).collect();
    let lookup = |pair: (usize, usize)| class_of[&pair];
    let left_table = p
        .left
        .group()
        .elements()
        .flat_map(|l| reps.iter().map(move |&(a, b)| lookup((p.left_elem(l, a), b))))
        .collect();
    let right_table = q
        .right
        .group()
        .elements()
        .flat_map(|g| reps.iter().map(move |&(a, b)| lookup((a, q.right_elem(b, g)))))
        .collect();
    let mut out = MoritaBitorsor::from_tables(p.left.clone(), q.right.clone(), alpha, rho, left_table, right_table)?;
    if let (Some(pe), Some(qe)) = (&p.edges, &q.edges) {
        let nbrs = |edges: &[(usize, usize)], v: usize| -> Vec<usize> {
            edges
                .iter()
                .filter_map(|&(a, b)| if a == v { Some(b) } else if b == v { Some(a) } else { None })
                .collect()
        };
        let mut edges = BTreeSet::new();
        for (id, &(a, b)) in reps.iter().enumerate() {
            for b2 in nbrs(qe, b) {
                for a2 in nbrs(pe, a) {
                    if p.rho[a2] == q.alpha[b2] {
                        let other = lookup((a2, b2));
                        if other != id {
                            edges.insert((id.min(other), id.max(other)));
                        }
                    }
                }
            }
        }
        out = out.with_edges(edges.into_iter().collect())?;
    }
    debug_assert_eq!(out.size(), size);
    Ok(out)
}

/// A trivial-group self-equivalence of `n` points.
pub fn trivial_bitorsor(n: usize, haar: HaarConvention) -> MoritaBitorsor {
    let gd = ActionGroupoid::shared(GroupAction::trivial(n), haar);
    identity_bitorsor(&gd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reflection_theta() -> Arc<ActionGroupoid> {
        ActionGroupoid::shared(GroupAction::reflection(6), HaarConvention::Counting)
    }

    fn rotation_orbifold() -> DiscreteOrbifold {
        DiscreteOrbifold::new(
            MetricGraph::cycle(6, 1.0).unwrap(),
            GroupAction::cyclic_rotation(6, 3).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn identity_bitorsor_validates() {
        let b = identity_bitorsor(&reflection_theta());
        assert_eq!(b.size(), 12);
        let report = b.validate();
        assert!(report.passed, "{:?}", report.failures());
        let (rho, alpha) = b.fiber_cardinalities().unwrap();
        assert!(rho.iter().all(|&s| s == 2) && alpha.iter().all(|&s| s == 2));
    }

    #[test]
    fn trivial_group_identity_is_x() {
        let b = trivial_bitorsor(5, HaarConvention::Counting);
        assert_eq!(b.size(), 5);
        assert_eq!(b.alpha_map(), &[0, 1, 2, 3, 4]);
        assert_eq!(b.rho_map(), &[0, 1, 2, 3, 4]);
        let (rho, alpha) = b.fiber_cardinalities().unwrap();
        assert!(rho.iter().chain(&alpha).all(|&s| s == 1));
    }

    #[test]
    fn corrupted_right_table_is_caught() {
        let b = identity_bitorsor(&reflection_theta());
        let mut right = b.right_table().to_vec();
        let n = b.size();
        right.swap(n + 3, n + 4);
        let bad = MoritaBitorsor::from_tables(
            b.left().clone(),
            b.right().clone(),
            b.alpha_map().to_vec(),
            b.rho_map().to_vec(),
            b.left_table().to_vec(),
            right,
        )
        .unwrap();
        let report = bad.validate();
        assert!(!report.passed);
        assert!(report.failures().iter().all(|c| c.witness.is_some()));
    }

    #[test]
    fn quotient_bitorsor_examples() {
        let b = quotient_bitorsor(&rotation_orbifold(), HaarConvention::Counting).unwrap();
        assert_eq!(b.size(), 6);
        assert_eq!(b.left().points(), 3);
        assert!(b.validate().passed);
        let (rho, alpha) = b.fiber_cardinalities().unwrap();
        assert!(rho.iter().all(|&s| s == 1) && alpha.iter().all(|&s| s == 2));

        let refl = DiscreteOrbifold::new(MetricGraph::cycle(6, 1.0).unwrap(), GroupAction::reflection(6)).unwrap();
        let err = quotient_bitorsor(&refl, HaarConvention::Counting).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert!(err.to_string().contains("[0, 3]"), "{err}");

        let triv = DiscreteOrbifold::new(MetricGraph::cycle(5, 1.0).unwrap(), GroupAction::trivial(5)).unwrap();
        let qb = quotient_bitorsor(&triv, HaarConvention::Counting).unwrap();
        assert!(qb.is_isomorphic(&trivial_bitorsor(5, HaarConvention::Counting)));
    }

    #[test]
    fn dual_examples() {
        let q = quotient_bitorsor(&rotation_orbifold(), HaarConvention::Counting).unwrap();
        let d = dual_bitorsor(&q);
        assert!(d.validate().passed);
        assert_eq!(d.left().group_order(), 2);
        let (rho, alpha) = d.fiber_cardinalities().unwrap();
        assert!(rho.iter().all(|&s| s == 2) && alpha.iter().all(|&s| s == 1));
        let dd = dual_bitorsor(&d);
        assert_eq!(dd.left_table(), q.left_table());
        assert_eq!(dd.right_table(), q.right_table());
        assert_eq!(dd.alpha_map(), q.alpha_map());
    }

    #[test]
    fn composition_laws() {
        let theta = reflection_theta();
        let id = identity_bitorsor(&theta);
        let c = compose_bitorsors(&id, &id).unwrap();
        assert!(c.validate().passed);
        assert!(c.is_isomorphic(&id));

        let q = quotient_bitorsor(&rotation_orbifold(), HaarConvention::Counting).unwrap();
        let d = dual_bitorsor(&q);
        let qd = compose_bitorsors(&q, &d).unwrap();
        assert!(qd.validate().passed);
        assert!(qd.is_isomorphic(&identity_bitorsor(q.left())));
        let dq = compose_bitorsors(&d, &q).unwrap();
        assert!(dq.validate().passed);
        assert!(dq.is_isomorphic(&identity_bitorsor(q.right())));
        let idq = compose_bitorsors(&identity_bitorsor(q.left()), &q).unwrap();
        assert!(idq.is_isomorphic(&q));
        assert!(compose_bitorsors(&q, &q).is_err());
    }

    #[test]
    fn lift_graph_examples() {
        let theta = reflection_theta();
        let c6 = MetricGraph::cycle(6, 1.0).unwrap();
        let id = identity_bitorsor(&theta).with_edges(identity_edges(&theta, &c6)).unwrap();
        let g = id.lift_graph(&c6, &c6).unwrap();
        let comps = g.components();
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| c.len() == 6));

        let orb = rotation_orbifold();
        let q = quotient_bitorsor(&orb, HaarConvention::Counting).unwrap();
        let y = orb.quotient_graph().unwrap();
        let lifted = q.lift_graph(orb.graph(), &y).unwrap();
        assert_eq!(lifted.components().len(), 1);
        assert_eq!(lifted.edges().len(), 6);
        for e in lifted.edges() {
            assert_eq!(Some(e.length), orb.graph().edge_length(q.rho(e.a), q.rho(e.b)));
            assert_eq!(Some(e.length), y.edge_length(q.alpha(e.a), q.alpha(e.b)));
        }

        // derived candidates on the identity bitorsor glue sheets together
        let bare = identity_bitorsor(&theta);
        let err = bare.lift_graph(&c6, &c6).unwrap_err().to_string();
        assert!(err.contains("edge ("), "{err}");
    }
}
