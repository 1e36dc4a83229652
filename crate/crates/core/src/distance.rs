//! Spectral distance `sup { a(x) − a(x') : ‖[D, a]‖ ≤ 1 }` on finite triples,
//! the geodesic oracle and the refinement harness comparing them.

use serde::Serialize;

use crate::dirac::SpectralTripleData;
use crate::error::{contract, domain, Error, Result};
use crate::geometry::DiscreteOrbifold;
use crate::linalg::{self, CMatrix, I};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverSettings {
    /// Relative improvement below which a window counts as stalled.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub window: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 10_000,
            window: 50,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DistanceQuery {
    pub invariant_only: bool,
    pub x: usize,
    pub xp: usize,
    pub settings: SolverSettings,
}

impl DistanceQuery {
    pub fn new(x: usize, xp: usize, invariant_only: bool) -> Self {
        Self {
            invariant_only,
            x,
            xp,
            settings: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceBracket {
    pub lower: f64,
    pub upper: f64,
    /// Optimizing function per vertex, normalized to `‖[D, a]‖ = 1`.
    pub certificate: Vec<f64>,
    pub constraint_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `a ↦ ‖i[A, diag(a_{cell(k)})]‖` for a hermitian `A` whose basis vectors are
/// each supported on one cell.
#[derive(Debug, Clone)]
pub struct DistanceProblem {
    matrix: CMatrix,
    labels: Vec<usize>,
    cells: usize,
    coupling: Vec<Vec<(usize, f64)>>,
}

impl DistanceProblem {
    pub fn new(matrix: CMatrix, labels: Vec<usize>, cells: usize) -> Result<Self> {
        if matrix.nrows() != labels.len() || matrix.ncols() != labels.len() {
            return domain("labels must index the rows of the matrix");
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= cells) {
            return domain(format!("cell label {l} out of range"));
        }
        let mut members = vec![Vec::new(); cells];
        for (k, &l) in labels.iter().enumerate() {
            members[l].push(k);
        }
        let mut coupling = vec![Vec::new(); cells];
        for i in 0..cells {
            for j in 0..cells {
                if i == j || members[i].is_empty() || members[j].is_empty() {
                    continue;
                }
                let blk = CMatrix::from_fn(members[i].len(), members[j].len(), |r, c| matrix[(members[i][r], members[j][c])]);
                let s = linalg::spectral_norm(&blk);
                if s > 1e-12 * linalg::max_abs(&matrix).max(1e-300) {
                    coupling[i].push((j, s));
                }
            }
        }
        Ok(Self {
            matrix,
            labels,
            cells,
            coupling,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn commutator(&self, a: &[f64]) -> CMatrix {
        let l = &self.labels;
        CMatrix::from_fn(l.len(), l.len(), |k, m| I * self.matrix[(k, m)] * (a[l[m]] - a[l[k]]))
    }

    /// `‖[D, a]‖` and a supergradient.
    pub fn norm_and_gradient(&self, a: &[f64]) -> (f64, Vec<f64>) {
        let (vals, vecs) = linalg::hermitian_eigen(&self.commutator(a));
        let (idx, lam) = vals
            .iter()
            .copied()
            .enumerate()
            .max_by(|p, q| p.1.abs().total_cmp(&q.1.abs()))
            .unwrap_or((0, 0.0));
        let e = vecs.column(idx);
        let p = &self.matrix * e;
        let sign = lam.signum();
        let mut grad = vec![0.0; self.cells];
        for (k, &cell) in self.labels.iter().enumerate() {
            grad[cell] += -2.0 * sign * (e[k] * p[k].conj()).im;
        }
        (lam.abs(), grad)
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        linalg::spectral_norm(&self.commutator(a))
    }

    /// Shortest path from `from` to `to` with edge weights `1/c_e`, where
    /// `c_e` is the norm of the block of `A` between two cells.
    pub fn upper_bound(&self, from: usize, to: usize) -> f64 {
        let mut dist = vec![f64::INFINITY; self.cells];
        let mut done = vec![false; self.cells];
        dist[from] = 0.0;
        for _ in 0..self.cells {
            let Some(u) = (0..self.cells).filter(|&i| !done[i] && dist[i].is_finite()).min_by(|&i, &j| dist[i].total_cmp(&dist[j])) else {
                break;
            };
            done[u] = true;
            for &(v, c) in &self.coupling[u] {
                let nd = dist[u] + 1.0 / c;
                if nd < dist[v] {
                    dist[v] = nd;
                }
            }
        }
        dist[to]
    }

    /// Supergradient ascent on `(a(x) − a(x'))/‖[D, a]‖` from `warm`, modulo constants.
    pub fn solve(&self, from: usize, to: usize, warm: &[f64], settings: SolverSettings) -> (Vec<f64>, f64, bool, usize) {
        let n = self.cells;
        if from == to {
            return (vec![0.0; n], 0.0, true, 0);
        }
        let center = |a: &mut Vec<f64>| {
            let m = a.iter().sum::<f64>() / n as f64;
            a.iter_mut().for_each(|v| *v -= m);
        };
        let objective = |a: &[f64]| a[from] - a[to];
        let mut a = warm.to_vec();
        center(&mut a);
        if self.norm(&a) < 1e-14 || objective(&a) <= 0.0 {
            a = vec![0.0; n];
            a[from] = 1.0;
            a[to] = -1.0;
            center(&mut a);
        }
        let (mut nrm, mut grad_n) = self.norm_and_gradient(&a);
        let mut value = objective(&a) / nrm;
        let mut history = vec![value];
        let mut step = 0.05;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < settings.max_iterations {
            iterations += 1;
            let obj = objective(&a);
            let mut g: Vec<f64> = grad_n.iter().map(|d| -obj * d / (nrm * nrm)).collect();
            g[from] += 1.0 / nrm;
            g[to] -= 1.0 / nrm;
            center(&mut g);
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let an = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gn < 1e-15 || step < 1e-12 {
                converged = true;
                break;
            }
            let cand: Vec<f64> = a.iter().zip(&g).map(|(x, d)| x + step * an * d / gn).collect();
            let (cn, cg) = self.norm_and_gradient(&cand);
            let cv = objective(&cand) / cn;
            if cn > 0.0 && cv > value {
                a = cand;
                nrm = cn;
                grad_n = cg;
                value = cv;
                step = (step * 1.5).min(0.5);
            } else {
                step *= 0.5;
            }
            history.push(value);
            if history.len() > settings.window {
                let past = history[history.len() - 1 - settings.window];
                if value - past <= settings.tolerance * value.abs() {
                    converged = true;
                    break;
                }
            }
        }
        let scale = 1.0 / nrm;
        let certificate: Vec<f64> = a.iter().map(|v| v * scale).collect();
        (certificate, value, converged, iterations)
    }
}

/// Builds the problem for a triple: every vertex is a cell, or with
/// `invariant_only` every orbit, with the operator compressed to `𝓗^G` in a
/// basis of orbit-supported invariant sections.
pub fn distance_problem(t: &SpectralTripleData, invariant_only: bool) -> Result<(DistanceProblem, Vec<usize>)> {
    let d = t.dirac_orthonormal();
    let r = t.bundle().rank();
    let n = t.bundle().vertex_count();
    if !invariant_only {
        let labels = (0..n * r).map(|k| k / r).collect();
        return Ok((DistanceProblem::new(d, labels, n)?, (0..n).collect()));
    }
    let (dd, _) = t.commutation_defect();
    if dd > 1e-10 {
        return contract(format!("Dirac operator is not invariant (defect {dd:.3e})"));
    }
    let action = t.groupoid().action();
    let orbits = action.orbits();
    let p = t.invariant_projection();
    let mut cols = Vec::new();
    let mut labels = Vec::new();
    for (o, orbit) in orbits.iter().enumerate() {
        let idx: Vec<usize> = orbit.iter().flat_map(|&x| (0..r).map(move |c| x * r + c)).collect();
        let block = linalg::select_columns(&p, &idx);
        let svd = block.svd(true, false);
        let u = svd.u.ok_or_else(|| Error::Contract("SVD failed".into()))?;
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s > 1e-10 {
                cols.push(u.column(k).into_owned());
                labels.push(o);
            }
        }
    }
    let v = CMatrix::from_columns(&cols);
    let compressed = v.adjoint() * d * &v;
    let cell_of = action.orbit_index();
    Ok((DistanceProblem::new(compressed, labels, orbits.len())?, cell_of))
}

/// Spectral distance bracket with a warm start from the geodesic oracle.
pub fn connes_distance(t: &SpectralTripleData, q: DistanceQuery) -> Result<DistanceBracket> {
    let n = t.bundle().vertex_count();
    if q.x >= n || q.xp >= n {
        return domain(format!("endpoints ({}, {}) outside 0..{n}", q.x, q.xp));
    }
    let (problem, cell_of) = distance_problem(t, q.invariant_only)?;
    let graph = t.bundle().base();
    let warm: Vec<f64> = if q.invariant_only {
        let orb = DiscreteOrbifold::new(graph.clone(), t.groupoid().action().clone())?;
        let mut w = vec![0.0; problem.cells()];
        for x in 0..n {
            w[cell_of[x]] = orb.orbifold_distance(x, q.xp)?;
        }
        w
    } else {
        graph.dijkstra(q.xp)
    };
    let warm: Vec<f64> = warm.iter().map(|&v| if v.is_finite() { v } else { 0.0 }).collect();
    let (from, to) = (cell_of[q.x], cell_of[q.xp]);
    let (cert, lower, converged, iterations) = problem.solve(from, to, &warm, q.settings);
    let constraint_norm = problem.norm(&cert);
    Ok(DistanceBracket {
        lower: if from == to { 0.0 } else { lower },
        upper: if from == to { 0.0 } else { problem.upper_bound(from, to) },
        certificate: (0..n).map(|x| cert[cell_of[x]]).collect(),
        constraint_norm,
        converged,
        iterations,
    })
}

/// Orbifold geodesic distance.
pub fn geodesic_oracle(orb: &DiscreteOrbifold, x: usize, xp: usize) -> Result<f64> {
    orb.orbifold_distance(x, xp)
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem3Row {
    pub n: usize,
    pub x: usize,
    pub xp: usize,
    pub spectral_lower: f64,
    pub spectral_upper: f64,
    pub geodesic: f64,
    pub rel_error: f64,
    /// Smallest `ε` with `lower·(1−ε) ≤ geodesic ≤ upper·(1+ε)`.
    pub enclosure_slack: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem3Table {
    pub rows: Vec<Theorem3Row>,
}

impl Theorem3Table {
    /// Rows for one endpoint label in refinement order.
    pub fn series(&self, pair: usize) -> Vec<&Theorem3Row> {
        let per = self.rows.iter().filter(|r| r.n == self.rows[0].n).count();
        self.rows.iter().skip(pair).step_by(per.max(1)).collect()
    }

    /// Number of increases of `rel_error` beyond `slack` along a series.
    pub fn violations(&self, pair: usize, slack: f64) -> usize {
        self.series(pair).windows(2).filter(|w| w[1].rel_error > w[0].rel_error + slack).count()
    }
}

/// Invariant spectral distance against the geodesic oracle along a refinement
/// family. Requires a pointlike or empty singular locus.
pub fn theorem3_harness<F, E>(family: F, ns: &[usize], endpoints: E, settings: SolverSettings) -> Result<Theorem3Table>
where
    F: Fn(usize) -> Result<(DiscreteOrbifold, SpectralTripleData)> + Sync,
    E: Fn(usize) -> Vec<(usize, usize)> + Sync,
{
    let per_n = |n: usize| -> Result<Vec<Theorem3Row>> {
        let (orb, t) = family(n)?;
        let locus = orb.singular_locus();
        if !locus.is_empty() && !locus.pointlike {
            return Err(Error::Precondition(format!(
                "singular locus {:?} is not pointlike",
                locus.vertex_ids()
            )));
        }
        endpoints(n)
            .into_iter()
            .map(|(x, xp)| {
                let br = connes_distance(&t, DistanceQuery { invariant_only: true, x, xp, settings })?;
                let geo = geodesic_oracle(&orb, x, xp)?;
                let rel_error = if geo > 0.0 { (br.lower - geo).abs() / geo } else { br.lower.abs() };
                let low_gap = if br.lower > geo { (br.lower - geo) / br.lower } else { 0.0 };
                let high_gap = if geo > br.upper { (geo - br.upper) / br.upper } else { 0.0 };
                Ok(Theorem3Row {
                    n,
                    x,
                    xp,
                    spectral_lower: br.lower,
                    spectral_upper: br.upper,
                    geodesic: geo,
                    rel_error,
                    enclosure_slack: low_gap.max(high_gap),
                    converged: br.converged,
                })
            })
            .collect()
    };
    let results: Vec<Result<Vec<Theorem3Row>>> = std::thread::scope(|s| {
        let handles: Vec<_> = ns.iter().map(|&n| s.spawn(move || per_n(n))).collect();
        handles.into_iter().map(|h| h.join().expect("distance worker")).collect()
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(Theorem3Table { rows })
}

/// Largest gap between the invariant distance on the half-turn cover and the
/// distance on the quotient circle, over the given vertex pairs of the cover.
pub fn free_companion(n: usize, circumference: f64, pairs: &[(usize, usize)], settings: SolverSettings) -> Result<f64> {
    let m = crate::models::rotation_quotient(n, 2, circumference, crate::algebra::HaarConvention::Counting)?;
    let action = m.crossed.groupoid().action();
    let mut worst = 0.0_f64;
    for &(x, xp) in pairs {
        let up = connes_distance(&m.crossed, DistanceQuery { invariant_only: true, x, xp, settings })?;
        let index = action.orbit_index();
        let (y, yp) = (index[x], index[xp]);
        let down = connes_distance(&m.quotient, DistanceQuery { invariant_only: false, x: y, xp: yp, settings })?;
        worst = worst.max((up.lower - down.lower).abs());
    }
    Ok(worst)
}
