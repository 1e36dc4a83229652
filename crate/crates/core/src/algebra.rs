//! Finite groups, group actions on finite point sets, action groupoids and
//! their crossed-product convolution algebras.
//!
//! Arrows of `G ⋉ X` are pairs `(g, x)` with source `x` and target `g·x`.
//! They are stored densely: the arrow `(g, x)` has index `g * |X| + x`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, structural, Result};
use crate::linalg::{c, CMatrix, C64, ZERO};

/// A finite group given by its full multiplication table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    order: usize,
    table: Vec<usize>,
    identity: usize,
    inverse: Vec<usize>,
}

impl FiniteGroup {
    /// Builds a group from `table[a][b] = a·b`, checking closure,
    /// associativity, the identity and inverses.
    pub fn from_table(table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return domain("a group needs at least one element");
        }
        let mut flat = Vec::with_capacity(n * n);
        for (a, row) in table.iter().enumerate() {
            if row.len() != n {
                return domain(format!("row {a} of the group table has {} entries, expected {n}", row.len()));
            }
            for (b, &ab) in row.iter().enumerate() {
                if ab >= n {
                    return domain(format!("table entry {a}·{b} = {ab} is not an element"));
                }
                flat.push(ab);
            }
        }
        let mul = |a: usize, b: usize| flat[a * n + b];
        let identity = (0..n)
            .find(|&e| (0..n).all(|a| mul(e, a) == a && mul(a, e) == a))
            .ok_or_else(|| crate::Error::Domain("group table has no identity element".into()))?;
        let mut inverse = Vec::with_capacity(n);
        for a in 0..n {
            let inv = (0..n)
                .find(|&b| mul(a, b) == identity && mul(b, a) == identity)
                .ok_or_else(|| crate::Error::Domain(format!("element {a} has no inverse")))?;
            inverse.push(inv);
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if mul(mul(a, b), c) != mul(a, mul(b, c)) {
                        return domain(format!("associativity fails on ({a}, {b}, {c})"));
                    }
                }
            }
        }
        Ok(Self {
            order: n,
            table: flat,
            identity,
            inverse,
        })
    }

    pub fn trivial() -> Self {
        Self::cyclic(1)
    }

    /// `Z_n` with element `k` standing for rotation by `k`.
    pub fn cyclic(n: usize) -> Self {
        assert!(n > 0, "cyclic group of order zero");
        let table = (0..n).flat_map(|a| (0..n).map(move |b| (a + b) % n)).collect();
        let inverse = (0..n).map(|a| (n - a) % n).collect();
        Self {
            order: n,
            table,
            identity: 0,
            inverse,
        }
    }

    /// The symmetric group on `degree` letters. Elements are the permutations
    /// in lexicographic order (index 0 is the identity) and `(p·q)(i) = p(q(i))`.
    pub fn symmetric(degree: usize) -> Self {
        let perms = permutations(degree);
        let index = |p: &Vec<usize>| perms.iter().position(|q| q == p).expect("closed");
        let table = perms
            .iter()
            .map(|p| {
                perms
                    .iter()
                    .map(|q| index(&q.iter().map(|&i| p[i]).collect()))
                    .collect()
            })
            .collect();
        Self::from_table(table).expect("symmetric group table is valid")
    }

    /// Permutations of `0..degree` in the element order used by [`FiniteGroup::symmetric`].
    pub fn symmetric_permutations(degree: usize) -> Vec<Vec<usize>> {
        permutations(degree)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order + b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.order
    }

    pub fn table_rows(&self) -> Vec<Vec<usize>> {
        self.table.chunks(self.order).map(<[usize]>::to_vec).collect()
    }
}

fn permutations(degree: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; degree], &mut out);
    out
}

/// A left action of a finite group on the points `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAction {
    group: FiniteGroup,
    points: usize,
    table: Vec<usize>,
}

impl GroupAction {
    /// `images[g][x] = g·x`. Checks `e·x = x` and `g·(h·x) = (gh)·x`.
    pub fn new(group: FiniteGroup, points: usize, images: Vec<Vec<usize>>) -> Result<Self> {
        if images.len() != group.order() {
            return domain(format!(
                "action table has {} rows for a group of order {}",
                images.len(),
                group.order()
            ));
        }
        let mut table = Vec::with_capacity(group.order() * points);
        for (g, row) in images.iter().enumerate() {
            if row.len() != points {
                return domain(format!("action row {g} has {} entries, expected {points}", row.len()));
            }
            for (x, &gx) in row.iter().enumerate() {
                if gx >= points {
                    return domain(format!("{g}·{x} = {gx} is not a point"));
                }
                table.push(gx);
            }
        }
        let action = Self {
            group,
            points,
            table,
        };
        let e = action.group.identity();
        for x in 0..points {
            if action.act(e, x) != x {
                return domain(format!("identity moves point {x}"));
            }
        }
        for g in action.group.elements() {
            for h in action.group.elements() {
                for x in 0..points {
                    if action.act(g, action.act(h, x)) != action.act(action.group.mul(g, h), x) {
                        return domain(format!("compatibility fails for g={g}, h={h}, x={x}"));
                    }
                }
            }
        }
        Ok(action)
    }

    pub fn trivial(points: usize) -> Self {
        Self {
            group: FiniteGroup::trivial(),
            points,
            table: (0..points).collect(),
        }
    }

    /// Rotation `x ↦ x + k·shift (mod n)` by the cyclic group of order `n / gcd`.
    pub fn cyclic_rotation(n: usize, shift: usize) -> Result<Self> {
        if shift == 0 || shift >= n || !n.is_multiple_of(shift) {
            return domain(format!("rotation by {shift} does not generate a cyclic action on {n} points"));
        }
        let order = n / shift;
        let images = (0..order)
            .map(|k| (0..n).map(|x| (x + k * shift) % n).collect())
            .collect();
        Self::new(FiniteGroup::cyclic(order), n, images)
    }

    /// Reflection `x ↦ -x (mod n)` by `Z_2`.
    pub fn reflection(n: usize) -> Self {
        let images = vec![(0..n).collect(), (0..n).map(|x| (n - x) % n).collect()];
        Self::new(FiniteGroup::cyclic(2), n, images).expect("reflection is an action")
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn act(&self, g: usize, x: usize) -> usize {
        self.table[g * self.points + x]
    }

    pub fn images(&self) -> Vec<Vec<usize>> {
        self.table.chunks(self.points.max(1)).map(<[usize]>::to_vec).collect()
    }

    /// True iff no non-identity element fixes every point.
    pub fn is_effective(&self) -> bool {
        let e = self.group.identity();
        self.group
            .elements()
            .filter(|&g| g != e)
            .all(|g| (0..self.points).any(|x| self.act(g, x) != x))
    }

    pub fn is_free(&self) -> bool {
        (0..self.points).all(|x| self.stabilizer(x).len() == 1)
    }

    pub fn stabilizer(&self, x: usize) -> Vec<usize> {
        self.group.elements().filter(|&g| self.act(g, x) == x).collect()
    }

    /// Orbits sorted by their smallest point; each orbit is sorted.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.points];
        let mut out = Vec::new();
        for x in 0..self.points {
            if seen[x] {
                continue;
            }
            let mut orbit: Vec<usize> = self.group.elements().map(|g| self.act(g, x)).collect();
            orbit.sort_unstable();
            orbit.dedup();
            for &y in &orbit {
                seen[y] = true;
            }
            out.push(orbit);
        }
        out
    }

    /// Orbit index (into [`GroupAction::orbits`]) of every point.
    pub fn orbit_index(&self) -> Vec<usize> {
        let mut idx = vec![0; self.points];
        for (k, orbit) in self.orbits().iter().enumerate() {
            for &x in orbit {
                idx[x] = k;
            }
        }
        idx
    }
}

/// Fiber-integral normalization of the Haar system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HaarConvention {
    /// `∫ = Σ`; the unit of the convolution algebra is `1_e`.
    #[default]
    Counting,
    /// `∫ = (1/#G) Σ`; the unit becomes `#G · 1_e`.
    Normalized,
}

impl HaarConvention {
    pub fn weight(self, group_order: usize) -> f64 {
        match self {
            HaarConvention::Counting => 1.0,
            HaarConvention::Normalized => 1.0 / group_order as f64,
        }
    }
}

impl fmt::Display for HaarConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HaarConvention::Counting => f.write_str("counting"),
            HaarConvention::Normalized => f.write_str("normalized"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Arrow {
    pub g: usize,
    pub x: usize,
}

impl Arrow {
    pub fn new(g: usize, x: usize) -> Self {
        Self { g, x }
    }
}

impl fmt::Display for Arrow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.g, self.x)
    }
}

/// The action groupoid `G ⋉ X` with a fixed Haar convention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionGroupoid {
    action: GroupAction,
    haar: HaarConvention,
}

impl ActionGroupoid {
    pub fn new(action: GroupAction, haar: HaarConvention) -> Self {
        Self { action, haar }
    }

    pub fn shared(action: GroupAction, haar: HaarConvention) -> Arc<Self> {
        Arc::new(Self::new(action, haar))
    }

    pub fn action(&self) -> &GroupAction {
        &self.action
    }

    pub fn group(&self) -> &FiniteGroup {
        self.action.group()
    }

    pub fn haar(&self) -> HaarConvention {
        self.haar
    }

    pub fn points(&self) -> usize {
        self.action.points()
    }

    pub fn group_order(&self) -> usize {
        self.action.group().order()
    }

    pub fn arrow_count(&self) -> usize {
        self.group_order() * self.points()
    }

    /// Fiber-integral weight: 1 for counting, `1/#G` for normalized.
    pub fn weight(&self) -> f64 {
        self.haar.weight(self.group_order())
    }

    /// Scalar `s` such that `s · 1_e` is the unit of the convolution algebra.
    pub fn unit_scale(&self) -> f64 {
        1.0 / self.weight()
    }

    pub fn index(&self, a: Arrow) -> usize {
        a.g * self.points() + a.x
    }

    pub fn arrow(&self, index: usize) -> Arrow {
        Arrow::new(index / self.points(), index % self.points())
    }

    pub fn arrows(&self) -> impl Iterator<Item = Arrow> + '_ {
        (0..self.arrow_count()).map(|i| self.arrow(i))
    }

    pub fn source(&self, a: Arrow) -> usize {
        a.x
    }

    pub fn target(&self, a: Arrow) -> usize {
        self.action.act(a.g, a.x)
    }

    pub fn inverse(&self, a: Arrow) -> Arrow {
        Arrow::new(self.group().inv(a.g), self.target(a))
    }

    /// `σ∘τ`, defined when `s(σ) = t(τ)`.
    pub fn compose(&self, sigma: Arrow, tau: Arrow) -> Result<Arrow> {
        if self.source(sigma) != self.target(tau) {
            return domain(format!(
                "arrows {sigma} and {tau} are not composable: s{sigma} = {} but t{tau} = {}",
                self.source(sigma),
                self.target(tau)
            ));
        }
        Ok(Arrow::new(self.group().mul(sigma.g, tau.g), tau.x))
    }

    /// `Θ^x = t⁻¹(x)`: the arrows `(g, g⁻¹·x)`.
    pub fn target_fiber(&self, x: usize) -> impl Iterator<Item = Arrow> + '_ {
        self.group()
            .elements()
            .map(move |g| Arrow::new(g, self.action.act(self.group().inv(g), x)))
    }

    /// `Θ_x = s⁻¹(x)`: the arrows `(g, x)`.
    pub fn source_fiber(&self, x: usize) -> impl Iterator<Item = Arrow> + '_ {
        self.group().elements().map(move |g| Arrow::new(g, x))
    }
}

/// Checks that both handles refer to the same groupoid structure.
pub fn same_groupoid(a: &Arc<ActionGroupoid>, b: &Arc<ActionGroupoid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// A complex function on the arrows of an action groupoid.
#[derive(Debug, Clone)]
pub struct AlgebraElement {
    groupoid: Arc<ActionGroupoid>,
    values: Vec<C64>,
}

impl PartialEq for AlgebraElement {
    fn eq(&self, other: &Self) -> bool {
        same_groupoid(&self.groupoid, &other.groupoid) && self.values == other.values
    }
}

impl AlgebraElement {
    pub fn zero(groupoid: &Arc<ActionGroupoid>) -> Self {
        Self {
            groupoid: groupoid.clone(),
            values: vec![ZERO; groupoid.arrow_count()],
        }
    }

    pub fn from_values(groupoid: &Arc<ActionGroupoid>, values: Vec<C64>) -> Result<Self> {
        if values.len() != groupoid.arrow_count() {
            return structural(format!(
                "{} values supplied for {} arrows",
                values.len(),
                groupoid.arrow_count()
            ));
        }
        Ok(Self {
            groupoid: groupoid.clone(),
            values,
        })
    }

    pub fn delta(groupoid: &Arc<ActionGroupoid>, a: Arrow) -> Self {
        let mut out = Self::zero(groupoid);
        out.values[groupoid.index(a)] = c(1.0);
        out
    }

    /// The unit: `1_e` under counting measure, `#G · 1_e` under the normalized one.
    pub fn unit(groupoid: &Arc<ActionGroupoid>) -> Self {
        let e = groupoid.group().identity();
        let mut out = Self::zero(groupoid);
        let s = c(groupoid.unit_scale());
        for x in 0..groupoid.points() {
            out.values[groupoid.index(Arrow::new(e, x))] = s;
        }
        out
    }

    /// Embeds a function on `X` as the element acting by pointwise
    /// multiplication, i.e. `a` times the unit, supported on `{e} × X`.
    pub fn from_function(groupoid: &Arc<ActionGroupoid>, f: &[f64]) -> Result<Self> {
        if f.len() != groupoid.points() {
            return structural(format!("function has {} values on {} points", f.len(), groupoid.points()));
        }
        let e = groupoid.group().identity();
        let s = groupoid.unit_scale();
        let mut out = Self::zero(groupoid);
        for (x, &v) in f.iter().enumerate() {
            out.values[groupoid.index(Arrow::new(e, x))] = c(v * s);
        }
        Ok(out)
    }

    /// `g ↦ (g, 1)`: the element implementing the group unitary `U(g)`.
    pub fn group_element(groupoid: &Arc<ActionGroupoid>, g: usize) -> Self {
        let s = c(groupoid.unit_scale());
        let mut out = Self::zero(groupoid);
        for x in 0..groupoid.points() {
            out.values[groupoid.index(Arrow::new(g, x))] = s;
        }
        out
    }

    pub fn random<R: Rng>(groupoid: &Arc<ActionGroupoid>, rng: &mut R) -> Self {
        let values = (0..groupoid.arrow_count())
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        Self {
            groupoid: groupoid.clone(),
            values,
        }
    }

    pub fn groupoid(&self) -> &Arc<ActionGroupoid> {
        &self.groupoid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn get(&self, a: Arrow) -> C64 {
        self.values[self.groupoid.index(a)]
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if !same_groupoid(&self.groupoid, &other.groupoid) {
            return structural("algebra elements live on different groupoids");
        }
        Ok(())
    }

    /// `(f·g)(σ) = ∫_{τ ∈ Θ_{s(σ)}} f(στ⁻¹) g(τ)`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let gd = &self.groupoid;
        let w = gd.weight();
        let grp = gd.group();
        let mut out = Self::zero(gd);
        for sigma in gd.arrows() {
            let x = sigma.x;
            let mut acc = ZERO;
            for h in grp.elements() {
                // σ·τ⁻¹ with τ = (h, x) is (g h⁻¹, h·x)
                let left = Arrow::new(grp.mul(sigma.g, grp.inv(h)), gd.action().act(h, x));
                acc += self.get(left) * other.get(Arrow::new(h, x));
            }
            out.values[gd.index(sigma)] = acc * w;
        }
        Ok(out)
    }

    /// `f*(σ) = conj f(σ⁻¹)`.
    pub fn involution(&self) -> Self {
        let gd = &self.groupoid;
        let values = gd
            .arrows()
            .map(|a| self.get(gd.inverse(a)).conj())
            .collect();
        Self {
            groupoid: gd.clone(),
            values,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            groupoid: self.groupoid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            groupoid: self.groupoid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            groupoid: self.groupoid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).norm()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()))
    }

    /// Left convolution `ξ ↦ f·ξ` on `ℓ²(arrows)`: the left regular
    /// representation. It is a faithful *-representation for every finite
    /// groupoid, so its operator norm is the C*-norm and positivity in the
    /// completion is positive semidefiniteness of this matrix.
    pub fn regular_operator(&self) -> CMatrix {
        let gd = &self.groupoid;
        let n = gd.arrow_count();
        let w = c(gd.weight());
        let grp = gd.group();
        let mut m = CMatrix::zeros(n, n);
        for sigma in gd.arrows() {
            for h in grp.elements() {
                let tau = Arrow::new(h, sigma.x);
                let left = Arrow::new(grp.mul(sigma.g, grp.inv(h)), gd.action().act(h, sigma.x));
                m[(gd.index(sigma), gd.index(tau))] += self.get(left) * w;
            }
        }
        m
    }

    pub fn cstar_norm(&self) -> f64 {
        crate::linalg::spectral_norm(&self.regular_operator())
    }
}

/// Largest violation of left invariance of the Haar system,
/// `∫ f(στ) dμ^{s(σ)}(τ) = ∫ f(τ) dμ^{t(σ)}(τ)`, over all arrows `σ`.
pub fn haar_left_invariance_defect(groupoid: &ActionGroupoid, f: &[C64]) -> f64 {
    let w = groupoid.weight();
    let mut worst = 0.0_f64;
    for sigma in groupoid.arrows() {
        let lhs: C64 = groupoid
            .target_fiber(groupoid.source(sigma))
            .map(|tau| f[groupoid.index(groupoid.compose(sigma, tau).expect("composable"))])
            .sum();
        let rhs: C64 = groupoid
            .target_fiber(groupoid.target(sigma))
            .map(|tau| f[groupoid.index(tau)])
            .sum();
        worst = worst.max(((lhs - rhs) * w).norm());
    }
    worst
}

/// Orbit indicators on `X`, embedded on `{e} × X` as multiplication operators.
/// They span the invariant subalgebra `A^G`.
pub fn invariant_subalgebra_basis(groupoid: &Arc<ActionGroupoid>) -> Vec<AlgebraElement> {
    let n = groupoid.points();
    groupoid
        .action()
        .orbits()
        .iter()
        .map(|orbit| {
            let mut f = vec![0.0; n];
            for &x in orbit {
                f[x] = 1.0;
            }
            AlgebraElement::from_function(groupoid, &f).expect("length matches")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reflection_c6(haar: HaarConvention) -> Arc<ActionGroupoid> {
        ActionGroupoid::shared(GroupAction::reflection(6), haar)
    }

    #[test]
    fn group_tables_are_validated() {
        assert!(FiniteGroup::from_table(vec![vec![0, 1], vec![1, 1]]).is_err());
        assert!(FiniteGroup::from_table(vec![vec![0, 1], vec![1, 0]]).is_ok());
        let s3 = FiniteGroup::symmetric(3);
        assert_eq!(s3.order(), 6);
        assert_eq!(s3.identity(), 0);
        // S3 is not abelian
        let non_abelian = s3.elements().any(|a| s3.elements().any(|b| s3.mul(a, b) != s3.mul(b, a)));
        assert!(non_abelian);
    }

    #[test]
    fn action_axioms_are_validated() {
        let bad = GroupAction::new(FiniteGroup::cyclic(2), 2, vec![vec![0, 1], vec![0, 0]]);
        assert!(bad.is_err());
        assert!(GroupAction::cyclic_rotation(6, 4).is_err());
    }

    #[test]
    fn composing_identity_arrows() {
        let gd = reflection_c6(HaarConvention::Counting);
        let id = Arrow::new(0, 2);
        assert_eq!(gd.compose(id, id).unwrap(), id);
    }

    #[test]
    fn composing_reflections_gives_identity() {
        // r·1 = 5, so (r,5)∘(r,1) is composable and equals (e,1)
        let gd = reflection_c6(HaarConvention::Counting);
        let out = gd.compose(Arrow::new(1, 5), Arrow::new(1, 1)).unwrap();
        assert_eq!(out, Arrow::new(0, 1));
        assert_eq!(gd.source(out), 1);
        assert_eq!(gd.target(out), 1);
    }

    #[test]
    fn composing_with_inverse() {
        let gd = reflection_c6(HaarConvention::Counting);
        for a in gd.arrows() {
            let out = gd.compose(a, gd.inverse(a)).unwrap();
            assert_eq!(out, Arrow::new(0, gd.target(a)));
        }
    }

    #[test]
    fn non_composable_arrows_name_both() {
        let gd = reflection_c6(HaarConvention::Counting);
        let err = gd.compose(Arrow::new(1, 2), Arrow::new(0, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(1, 2)") && msg.contains("(0, 3)"), "{msg}");
    }

    #[test]
    fn swap_deltas_convolve_to_identity_arrow() {
        let action = GroupAction::new(FiniteGroup::cyclic(2), 2, vec![vec![0, 1], vec![1, 0]]).unwrap();
        let gd = ActionGroupoid::shared(action, HaarConvention::Counting);
        let f = AlgebraElement::delta(&gd, Arrow::new(1, 0));
        let g = AlgebraElement::delta(&gd, Arrow::new(1, 1));
        let fg = f.convolve(&g).unwrap();
        assert_eq!(fg, AlgebraElement::delta(&gd, Arrow::new(0, 1)));
    }

    #[test]
    fn unit_values_per_convention() {
        let counting = AlgebraElement::unit(&reflection_c6(HaarConvention::Counting));
        let normalized = AlgebraElement::unit(&reflection_c6(HaarConvention::Normalized));
        for x in 0..6 {
            assert_eq!(counting.get(Arrow::new(0, x)), c(1.0));
            assert_eq!(counting.get(Arrow::new(1, x)), c(0.0));
            assert_eq!(normalized.get(Arrow::new(0, x)), c(2.0));
            assert_eq!(normalized.get(Arrow::new(1, x)), c(0.0));
        }
    }

    #[test]
    fn unit_is_idempotent_and_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for haar in [HaarConvention::Counting, HaarConvention::Normalized] {
            let gd = reflection_c6(haar);
            let u = AlgebraElement::unit(&gd);
            assert!(u.convolve(&u).unwrap().max_abs_diff(&u) < 1e-12);
            let f = AlgebraElement::random(&gd, &mut rng);
            assert!(u.convolve(&f).unwrap().max_abs_diff(&f) < 1e-12);
            assert!(f.convolve(&u).unwrap().max_abs_diff(&f) < 1e-12);
        }
    }

    #[test]
    fn involution_examples() {
        let gd = reflection_c6(HaarConvention::Counting);
        let f = AlgebraElement::from_function(&gd, &[1.0, -2.0, 0.5, 3.0, 0.0, 7.0]).unwrap();
        assert_eq!(f.involution(), f);
        let d = AlgebraElement::delta(&gd, Arrow::new(1, 2));
        assert_eq!(d.involution(), AlgebraElement::delta(&gd, Arrow::new(1, 4)));
    }

    #[test]
    fn invariant_basis_counts() {
        let refl = reflection_c6(HaarConvention::Counting);
        assert_eq!(invariant_subalgebra_basis(&refl).len(), 4);
        let rot = ActionGroupoid::shared(GroupAction::cyclic_rotation(6, 3).unwrap(), HaarConvention::Counting);
        assert_eq!(invariant_subalgebra_basis(&rot).len(), 3);
        let triv = ActionGroupoid::shared(GroupAction::trivial(5), HaarConvention::Counting);
        assert_eq!(invariant_subalgebra_basis(&triv).len(), 5);
    }

    #[test]
    fn effectiveness_flag() {
        assert!(GroupAction::reflection(6).is_effective());
        let trivial_z2 = GroupAction::new(FiniteGroup::cyclic(2), 3, vec![vec![0, 1, 2]; 2]).unwrap();
        assert!(!trivial_z2.is_effective());
        assert!(GroupAction::cyclic_rotation(6, 3).unwrap().is_free());
        assert!(!GroupAction::reflection(6).is_free());
    }
}
