//! JSON scenarios: loading with located errors, building the object graph
//! and running the task list.
//!
//! Reports and tables are returned in memory as [`Artifact`]s; [`write_artifacts`]
//! puts them on disk. Floating-point values in tables use `{:.11e}`
//! (12 significant digits). Dense matrices use a text format with a
//! `rows cols` header followed by one line per row of `re im` pairs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::{ActionGroupoid, FiniteGroup, GroupAction, HaarConvention};
use crate::bimodule::check_imprimitivity;
use crate::bitorsor::{compose_bitorsors, dual_bitorsor, identity_bitorsor, identity_edges, quotient_bitorsor, MoritaBitorsor};
use crate::dirac::{spectrum, DiracOperator, SpectralTripleData, SpinorBundle};
use crate::distance::{connes_distance, geodesic_oracle, theorem3_harness, DistanceQuery, SolverSettings};
use crate::error::{Error, Result, ScenarioErrorKind};
use crate::geometry::{DiscreteOrbifold, MetricGraph};
use crate::linalg::{CMatrix, C64};
use crate::models;
use crate::morita::{full_report, ReportOptions};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub haar: HaarConvention,
    #[serde(default)]
    pub seed: u64,
    pub groups: Vec<GroupSpec>,
    pub graphs: Vec<GraphSpec>,
    pub actions: Vec<ActionSpec>,
    #[serde(default)]
    pub triples: Vec<TripleSpec>,
    #[serde(default)]
    pub bitorsors: Vec<BitorsorSpec>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub id: String,
    #[serde(flatten)]
    pub kind: GroupKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupKind {
    Cyclic { order: usize },
    Symmetric { degree: usize },
    Table { table: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub id: String,
    #[serde(flatten)]
    pub kind: GraphKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    Cycle { n: usize, edge_length: f64 },
    Circle { n: usize, circumference: f64 },
    Torus { n: usize, m: usize, edge_length: f64 },
    Explicit { vertices: Vec<usize>, edges: Vec<(usize, usize, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub id: String,
    pub group: String,
    pub graph: String,
    #[serde(flatten)]
    pub kind: ActionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionKind {
    /// `images[g][x] = g·x`.
    Table { images: Vec<Vec<usize>> },
    Rotation { shift: usize },
    Reflection,
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleSpec {
    pub id: String,
    pub action: String,
    pub rank: usize,
    #[serde(default)]
    pub cocycle: CocycleSpec,
    pub dirac: DiracSpec,
    #[serde(default = "yes")]
    pub grading: bool,
    #[serde(default)]
    pub declared_dimension: Option<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CocycleSpec {
    #[default]
    Trivial,
    /// One matrix per group element, rows of `[re, im]` pairs.
    Constant { matrices: Vec<Vec<Vec<[f64; 2]>>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stencil", rename_all = "snake_case")]
pub enum DiracSpec {
    Circle,
    Torus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitorsorSpec {
    pub id: String,
    #[serde(flatten)]
    pub kind: BitorsorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BitorsorKind {
    /// Quotient of a free action; also defines the triple `<id>/quotient`.
    Quotient { of: String },
    Identity { of: String },
    Dual { of: String },
    Compose { first: String, second: String },
    Tables {
        left: String,
        right: String,
        alpha: Vec<usize>,
        rho: Vec<usize>,
        left_table: Vec<usize>,
        right_table: Vec<usize>,
        #[serde(default)]
        edges: Option<Vec<(usize, usize)>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Endpoint {
    Index(usize),
    /// `"n/k"`: the vertex `n / k` at mesh `n`.
    Fraction(String),
}

impl Endpoint {
    fn resolve(&self, n: usize) -> std::result::Result<usize, String> {
        match self {
            Endpoint::Index(i) => Ok(*i),
            Endpoint::Fraction(s) => s
                .strip_prefix("n/")
                .and_then(|k| k.trim().parse::<usize>().ok())
                .filter(|&k| k > 0)
                .map(|k| n / k)
                .ok_or_else(|| format!("endpoint {s:?} is neither an index nor of the form \"n/k\"")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Reflection,
    Rotation,
    Circle,
}

fn hundred() -> usize {
    100
}

fn tenth() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskSpec {
    Validate,
    Imprimitivity {
        #[serde(default)]
        bitorsor: Option<String>,
        #[serde(default = "hundred")]
        samples: usize,
    },
    Morita {
        bitorsor: String,
        /// Triple over the left groupoid.
        #[serde(default)]
        left: Option<String>,
        /// Triple over the right groupoid.
        #[serde(default)]
        right: Option<String>,
        #[serde(default = "hundred")]
        samples: usize,
    },
    Distance {
        triple: String,
        pairs: Vec<(usize, usize)>,
        #[serde(default)]
        invariant_only: bool,
    },
    Theorem3 {
        family: Family,
        ns: Vec<usize>,
        circumference: f64,
        endpoints: Vec<(Endpoint, Endpoint)>,
        #[serde(default = "tenth")]
        max_rel_error: f64,
    },
    Spectrum { triple: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Validate,
    Imprimitivity,
    Morita,
    Distance,
    Theorem3,
    Spectrum,
}

impl TaskSpec {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskSpec::Validate => TaskKind::Validate,
            TaskSpec::Imprimitivity { .. } => TaskKind::Imprimitivity,
            TaskSpec::Morita { .. } => TaskKind::Morita,
            TaskSpec::Distance { .. } => TaskKind::Distance,
            TaskSpec::Theorem3 { .. } => TaskKind::Theorem3,
            TaskSpec::Spectrum { .. } => TaskKind::Spectrum,
        }
    }
}

/// Error before a source location has been attached.
struct Located {
    kind: ScenarioErrorKind,
    needle: String,
    message: String,
}

type BuildResult<T> = std::result::Result<T, Located>;

fn unresolved(needle: &str, message: String) -> Located {
    Located {
        kind: ScenarioErrorKind::UnresolvedReference,
        needle: needle.into(),
        message,
    }
}

fn violation(needle: &str, message: impl Into<String>) -> Located {
    Located {
        kind: ScenarioErrorKind::InvariantViolation,
        needle: needle.into(),
        message: message.into(),
    }
}

trait AtId<T> {
    fn at(self, needle: &str) -> BuildResult<T>;
}

impl<T> AtId<T> for Result<T> {
    fn at(self, needle: &str) -> BuildResult<T> {
        self.map_err(|e| violation(needle, e.to_string()))
    }
}

/// 1-based line of the first quoted occurrence of `needle`.
fn line_of(text: &str, needle: &str) -> usize {
    let quoted = format!("\"{needle}\"");
    text.find(&quoted)
        .map(|pos| text[..pos].matches('\n').count() + 1)
        .unwrap_or(1)
}

/// Objects built from a scenario.
pub struct Built {
    pub haar: HaarConvention,
    pub groups: BTreeMap<String, FiniteGroup>,
    pub graphs: BTreeMap<String, MetricGraph>,
    pub groupoids: BTreeMap<String, Arc<ActionGroupoid>>,
    pub triples: BTreeMap<String, SpectralTripleData>,
    pub bitorsors: BTreeMap<String, Arc<MoritaBitorsor>>,
    /// Default (left, right) triples for each bitorsor, when known.
    pub sides: BTreeMap<String, (Option<String>, Option<String>)>,
}

fn unique_ids<'a>(ids: impl Iterator<Item = &'a String>, what: &str) -> BuildResult<()> {
    let mut seen = std::collections::BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(violation(id, format!("duplicate {what} id {id:?}")));
        }
    }
    Ok(())
}

fn to_matrix(rows: &[Vec<[f64; 2]>], needle: &str) -> BuildResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(violation(needle, "cocycle matrices must be square"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

impl Scenario {
    /// Builds every object, with `haar` overriding the scenario convention.
    pub fn build(&self, haar: Option<HaarConvention>) -> std::result::Result<Built, (ScenarioErrorKind, String, String)> {
        self.build_inner(haar).map_err(|l| (l.kind, l.needle, l.message))
    }

    fn build_inner(&self, haar: Option<HaarConvention>) -> BuildResult<Built> {
        let haar = haar.unwrap_or(self.haar);
        if self.schema_version != SCHEMA_VERSION {
            return Err(violation(
                "schema_version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        unique_ids(self.groups.iter().map(|g| &g.id), "group")?;
        unique_ids(self.graphs.iter().map(|g| &g.id), "graph")?;
        unique_ids(self.actions.iter().map(|g| &g.id), "action")?;
        unique_ids(self.triples.iter().map(|g| &g.id), "triple")?;
        unique_ids(self.bitorsors.iter().map(|g| &g.id), "bitorsor")?;

        let mut groups = BTreeMap::new();
        for g in &self.groups {
            let group = match &g.kind {
                GroupKind::Cyclic { order } => FiniteGroup::cyclic(*order),
                GroupKind::Symmetric { degree } => FiniteGroup::symmetric(*degree),
                GroupKind::Table { table } => FiniteGroup::from_table(table.clone()).at(&g.id)?,
            };
            groups.insert(g.id.clone(), group);
        }

        let mut graphs = BTreeMap::new();
        for g in &self.graphs {
            let graph = match &g.kind {
                GraphKind::Cycle { n, edge_length } => MetricGraph::cycle(*n, *edge_length).at(&g.id)?,
                GraphKind::Circle { n, circumference } => MetricGraph::refine_circle(*n, *circumference).at(&g.id)?,
                GraphKind::Torus { n, m, edge_length } => MetricGraph::grid_torus(*n, *m, *edge_length).at(&g.id)?,
                GraphKind::Explicit { vertices, edges } => {
                    let mut seen = vec![false; vertices.len()];
                    for &v in vertices {
                        if v >= vertices.len() {
                            return Err(violation(&g.id, format!("vertex id {v} outside 0..{}", vertices.len())));
                        }
                        if std::mem::replace(&mut seen[v], true) {
                            return Err(violation(&g.id, format!("duplicate vertex id {v} in graph {:?}", g.id)));
                        }
                    }
                    if let Some(&(a, b, _)) = edges.iter().find(|e| e.0 >= vertices.len() || e.1 >= vertices.len()) {
                        return Err(unresolved(&g.id, format!("edge ({a}, {b}) of graph {:?} names a missing vertex", g.id)));
                    }
                    MetricGraph::new(vertices.len(), edges).at(&g.id)?
                }
            };
            graphs.insert(g.id.clone(), graph);
        }

        let mut groupoids = BTreeMap::new();
        let mut action_graph = BTreeMap::new();
        for a in &self.actions {
            let group = groups
                .get(&a.group)
                .ok_or_else(|| unresolved(&a.group, format!("action {:?} refers to unknown group {:?}", a.id, a.group)))?;
            let graph = graphs
                .get(&a.graph)
                .ok_or_else(|| unresolved(&a.graph, format!("action {:?} refers to unknown graph {:?}", a.id, a.graph)))?;
            let n = graph.vertex_count();
            let action = match &a.kind {
                ActionKind::Table { images } => {
                    if let Some(g) = (images.len()..group.order()).next() {
                        return Err(unresolved(&a.id, format!("action {:?} has no entry for group element {g}", a.id)));
                    }
                    if let Some((g, row)) = images.iter().enumerate().find(|(_, r)| r.len() != n) {
                        return Err(unresolved(
                            &a.id,
                            format!("action {:?} entry for group element {g} has {} images, expected {n}", a.id, row.len()),
                        ));
                    }
                    GroupAction::new(group.clone(), n, images.clone()).at(&a.id)?
                }
                ActionKind::Rotation { shift } => GroupAction::cyclic_rotation(n, *shift).at(&a.id)?,
                ActionKind::Reflection => GroupAction::reflection(n),
                ActionKind::Trivial => GroupAction::trivial(n),
            };
            if action.group().order() != group.order() {
                return Err(violation(
                    &a.id,
                    format!(
                        "action {:?} needs a group of order {}, but {:?} has order {}",
                        a.id,
                        action.group().order(),
                        a.group,
                        group.order()
                    ),
                ));
            }
            DiscreteOrbifold::new(graph.clone(), action.clone()).at(&a.id)?;
            groupoids.insert(a.id.clone(), ActionGroupoid::shared(action, haar));
            action_graph.insert(a.id.clone(), graph.clone());
        }

        let mut triples = BTreeMap::new();
        for t in &self.triples {
            let gd = groupoids
                .get(&t.action)
                .ok_or_else(|| unresolved(&t.action, format!("triple {:?} refers to unknown action {:?}", t.id, t.action)))?;
            let graph = action_graph[&t.action].clone();
            let action = gd.action().clone();
            let bundle = match &t.cocycle {
                CocycleSpec::Trivial => SpinorBundle::trivial(graph, action, t.rank).at(&t.id)?,
                CocycleSpec::Constant { matrices } => {
                    let ms = matrices.iter().map(|m| to_matrix(m, &t.id)).collect::<BuildResult<Vec<_>>>()?;
                    if ms.len() != gd.group_order() || ms.iter().any(|m| m.nrows() != t.rank) {
                        return Err(violation(&t.id, format!("triple {:?} needs {} cocycle matrices of size {}", t.id, gd.group_order(), t.rank)));
                    }
                    SpinorBundle::constant(graph, action, ms).at(&t.id)?
                }
            };
            let d = match t.dirac {
                DiracSpec::Circle => DiracOperator::circle(bundle).at(&t.id)?,
                DiracSpec::Torus => {
                    let torus = self
                        .actions
                        .iter()
                        .find(|a| a.id == t.action)
                        .and_then(|a| self.graphs.iter().find(|g| g.id == a.graph))
                        .and_then(|g| match g.kind {
                            GraphKind::Torus { n, m, edge_length } => Some((n, m, edge_length)),
                            _ => None,
                        })
                        .ok_or_else(|| violation(&t.id, "the torus stencil needs a torus graph"))?;
                    let d = DiracOperator::torus(torus.0, torus.1, torus.2).at(&t.id)?;
                    if d.bundle().action() != gd.action() || t.rank != 2 {
                        return Err(violation(&t.id, "the torus stencil needs rank 2 and the trivial action"));
                    }
                    d
                }
            };
            let d = if t.grading { d } else { DiracOperator::new(d.bundle().clone(), d.matrix().clone(), None).at(&t.id)? };
            let mut triple = SpectralTripleData::new(gd.clone(), d).at(&t.id)?;
            if let Some(dim) = t.declared_dimension {
                triple = triple.with_declared_dimension(dim);
            }
            triples.insert(t.id.clone(), triple);
        }

        let mut bitorsors: BTreeMap<String, Arc<MoritaBitorsor>> = BTreeMap::new();
        let mut sides = BTreeMap::new();
        for b in &self.bitorsors {
            let triple = |id: &String| {
                triples
                    .get(id)
                    .ok_or_else(|| unresolved(id, format!("bitorsor {:?} refers to unknown triple {id:?}", b.id)))
            };
            let known = |id: &String| {
                bitorsors
                    .get(id)
                    .cloned()
                    .ok_or_else(|| unresolved(id, format!("bitorsor {:?} refers to unknown bitorsor {id:?}", b.id)))
            };
            let (built, side) = match &b.kind {
                BitorsorKind::Quotient { of } => {
                    let t: &SpectralTripleData = triple(of)?;
                    let orb = DiscreteOrbifold::new(t.bundle().base().clone(), t.groupoid().action().clone()).at(&b.id)?;
                    let q = Arc::new(quotient_bitorsor(&orb, haar).at(&b.id)?);
                    let qgraph = orb.quotient_graph().at(&b.id)?;
                    let bundle = SpinorBundle::trivial(qgraph, q.left().action().clone(), t.bundle().rank()).at(&b.id)?;
                    let mut d = DiracOperator::circle(bundle).at(&b.id)?;
                    if t.dirac().grading().is_none() {
                        d = DiracOperator::new(d.bundle().clone(), d.matrix().clone(), None).at(&b.id)?;
                    }
                    let mut qt = SpectralTripleData::new(q.left().clone(), d).at(&b.id)?;
                    if let Some(dim) = t.declared_dimension() {
                        qt = qt.with_declared_dimension(dim);
                    }
                    let qid = format!("{}/quotient", b.id);
                    triples.insert(qid.clone(), qt);
                    (q, (Some(qid), Some(of.clone())))
                }
                BitorsorKind::Identity { of } => {
                    let t = triple(of)?;
                    let theta = t.groupoid();
                    let id = identity_bitorsor(theta).with_edges(identity_edges(theta, t.bundle().base())).at(&b.id)?;
                    (Arc::new(id), (Some(of.clone()), Some(of.clone())))
                }
                BitorsorKind::Dual { of } => {
                    let inner = known(of)?;
                    let (l, r) = sides.get(of).cloned().unwrap_or((None, None));
                    (Arc::new(dual_bitorsor(&inner)), (r, l))
                }
                BitorsorKind::Compose { first, second } => {
                    let (p, q) = (known(first)?, known(second)?);
                    let l = sides.get(first).and_then(|s: &(Option<String>, Option<String>)| s.0.clone());
                    let r = sides.get(second).and_then(|s: &(Option<String>, Option<String>)| s.1.clone());
                    (Arc::new(compose_bitorsors(&p, &q).at(&b.id)?), (l, r))
                }
                BitorsorKind::Tables {
                    left,
                    right,
                    alpha,
                    rho,
                    left_table,
                    right_table,
                    edges,
                } => {
                    let gl = groupoids
                        .get(left)
                        .ok_or_else(|| unresolved(left, format!("bitorsor {:?} refers to unknown action {left:?}", b.id)))?;
                    let gr = groupoids
                        .get(right)
                        .ok_or_else(|| unresolved(right, format!("bitorsor {:?} refers to unknown action {right:?}", b.id)))?;
                    let mut bt = MoritaBitorsor::from_tables(
                        gl.clone(),
                        gr.clone(),
                        alpha.clone(),
                        rho.clone(),
                        left_table.clone(),
                        right_table.clone(),
                    )
                    .at(&b.id)?;
                    if let Some(e) = edges {
                        bt = bt.with_edges(e.clone()).at(&b.id)?;
                    }
                    (Arc::new(bt), (None, None))
                }
            };
            bitorsors.insert(b.id.clone(), built);
            sides.insert(b.id.clone(), side);
        }

        for task in &self.tasks {
            let check_triple = |id: &String| {
                if triples.contains_key(id) {
                    Ok(())
                } else {
                    Err(unresolved(id, format!("task refers to unknown triple {id:?}")))
                }
            };
            match task {
                TaskSpec::Imprimitivity { bitorsor: Some(b), .. } | TaskSpec::Morita { bitorsor: b, .. } => {
                    if !bitorsors.contains_key(b) {
                        return Err(unresolved(b, format!("task refers to unknown bitorsor {b:?}")));
                    }
                }
                TaskSpec::Distance { triple, pairs, .. } => {
                    check_triple(triple)?;
                    let n = triples[triple].bundle().vertex_count();
                    if let Some(p) = pairs.iter().find(|p| p.0 >= n || p.1 >= n) {
                        return Err(violation(triple, format!("distance endpoints {p:?} outside 0..{n}")));
                    }
                }
                TaskSpec::Spectrum { triple } => check_triple(triple)?,
                TaskSpec::Theorem3 { endpoints, ns, .. } => {
                    for (a, b) in endpoints {
                        for n in ns {
                            a.resolve(*n).map_err(|m| violation("endpoints", m))?;
                            b.resolve(*n).map_err(|m| violation("endpoints", m))?;
                        }
                    }
                }
                _ => {}
            }
            if let TaskSpec::Morita { left, right, .. } = task {
                for id in left.iter().chain(right.iter()) {
                    check_triple(id)?;
                }
            }
        }

        Ok(Built {
            haar,
            groups,
            graphs,
            groupoids,
            triples,
            bitorsors,
            sides,
        })
    }
}

/// Parses and fully builds a scenario file; errors carry `path:line`.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text, path)
}

pub fn parse_scenario(text: &str, path: &Path) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| Error::Scenario {
        path: path.to_path_buf(),
        line: e.line(),
        kind: ScenarioErrorKind::Parse,
        message: e.to_string(),
    })?;
    scenario.build(None).map_err(|(kind, needle, message)| Error::Scenario {
        path: path.to_path_buf(),
        line: line_of(text, &needle),
        kind,
        message,
    })?;
    Ok(scenario)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub haar: Option<HaarConvention>,
    /// Relative stopping tolerance of the distance solver.
    pub tolerance: Option<f64>,
    /// Run only tasks of this kind; with no such task listed, a default one
    /// is run where possible.
    pub only: Option<TaskKind>,
}

#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub passed: bool,
    pub report: Value,
    pub artifacts: Vec<Artifact>,
}

fn fmt(v: f64) -> String {
    format!("{v:.11e}")
}

/// Dense text dump: `rows cols`, then one line per row of `re im` pairs.
pub fn dense_matrix_text(m: &CMatrix) -> String {
    let mut s = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{} {}", fmt(m[(i, j)].re), fmt(m[(i, j)].im))).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

fn task_error(kind: TaskKind, e: &Error) -> (bool, Value) {
    (false, json!({ "task": kind, "passed": false, "error": e.to_string() }))
}

/// Executes the task list in order.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutcome> {
    let built = scenario.build(opts.haar).map_err(|(kind, needle, message)| Error::Scenario {
        path: PathBuf::from(&scenario.name),
        line: 0,
        kind,
        message: format!("{message} (at {needle:?})"),
    })?;
    let seed = opts.seed.unwrap_or(scenario.seed);
    let mut settings = SolverSettings::default();
    if let Some(t) = opts.tolerance {
        settings.tolerance = t;
    }
    // Artifact names use the task's position in the scenario.
    let mut tasks: Vec<(usize, TaskSpec)> = scenario
        .tasks
        .iter()
        .enumerate()
        .filter(|(_, t)| opts.only.is_none_or(|k| t.kind() == k))
        .map(|(i, t)| (i, t.clone()))
        .collect();
    if tasks.is_empty() {
        if let Some(kind) = opts.only {
            let defaults = default_tasks(kind, &built).ok_or_else(|| Error::Scenario {
                path: PathBuf::from(&scenario.name),
                line: 0,
                kind: ScenarioErrorKind::UnresolvedReference,
                message: format!("scenario lists no {kind:?} task and none can be inferred"),
            })?;
            tasks = defaults.into_iter().enumerate().collect();
        }
    }
    let mut artifacts = Vec::new();
    let mut reports = Vec::new();
    let mut passed = true;
    for (i, task) in &tasks {
        let (ok, value) = run_task(*i, task, &built, seed, settings, &mut artifacts);
        passed &= ok;
        reports.push(value);
    }
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario.name,
        "seed": seed,
        "convention": built.haar,
        "passed": passed,
        "tasks": reports,
    });
    artifacts.insert(
        0,
        Artifact {
            name: "report.json".into(),
            contents: serde_json::to_string_pretty(&report)? + "\n",
        },
    );
    Ok(RunOutcome {
        passed,
        report,
        artifacts,
    })
}

fn default_tasks(kind: TaskKind, built: &Built) -> Option<Vec<TaskSpec>> {
    match kind {
        TaskKind::Validate => Some(vec![TaskSpec::Validate]),
        TaskKind::Imprimitivity => Some(vec![TaskSpec::Imprimitivity {
            bitorsor: None,
            samples: 100,
        }]),
        TaskKind::Spectrum => {
            let ts: Vec<TaskSpec> = built.triples.keys().map(|t| TaskSpec::Spectrum { triple: t.clone() }).collect();
            (!ts.is_empty()).then_some(ts)
        }
        TaskKind::Morita => {
            let ts: Vec<TaskSpec> = built
                .bitorsors
                .keys()
                .filter(|b| matches!(built.sides.get(*b), Some((Some(_), Some(_)))))
                .map(|b| TaskSpec::Morita {
                    bitorsor: b.clone(),
                    left: None,
                    right: None,
                    samples: 100,
                })
                .collect();
            (!ts.is_empty()).then_some(ts)
        }
        TaskKind::Distance | TaskKind::Theorem3 => None,
    }
}

fn run_task(i: usize, task: &TaskSpec, built: &Built, seed: u64, settings: SolverSettings, artifacts: &mut Vec<Artifact>) -> (bool, Value) {
    let kind = task.kind();
    let result = match task {
        TaskSpec::Validate => Ok(validate(built)),
        TaskSpec::Imprimitivity { bitorsor, samples } => imprimitivity(built, bitorsor.as_ref(), *samples, seed),
        TaskSpec::Morita {
            bitorsor,
            left,
            right,
            samples,
        } => morita(built, bitorsor, left.as_ref(), right.as_ref(), *samples, seed),
        TaskSpec::Distance {
            triple,
            pairs,
            invariant_only,
        } => distance(i, built, triple, pairs, *invariant_only, settings, artifacts),
        TaskSpec::Theorem3 {
            family,
            ns,
            circumference,
            endpoints,
            max_rel_error,
        } => theorem3(i, built.haar, *family, ns, *circumference, endpoints, *max_rel_error, settings, artifacts),
        TaskSpec::Spectrum { triple } => spectrum_task(built, triple, artifacts),
    };
    match result {
        Ok((ok, mut v)) => {
            v["task"] = json!(kind);
            v["passed"] = json!(ok);
            (ok, v)
        }
        Err(e) => task_error(kind, &e),
    }
}

fn validate(built: &Built) -> (bool, Value) {
    let mut ok = true;
    let mut bits = serde_json::Map::new();
    for (id, b) in &built.bitorsors {
        let rep = b.validate();
        ok &= rep.passed;
        bits.insert(id.clone(), serde_json::to_value(&rep).unwrap_or(Value::Null));
    }
    let mut trips = serde_json::Map::new();
    for (id, t) in &built.triples {
        let (dd, dw) = t.commutation_defect();
        trips.insert(id.clone(), json!({ "dirac_defect": dd, "grading_defect": dw, "faithful": t.is_faithful() }));
    }
    (ok, json!({ "bitorsors": bits, "triples": trips }))
}

fn imprimitivity(built: &Built, only: Option<&String>, samples: usize, seed: u64) -> Result<(bool, Value)> {
    let mut ok = true;
    let mut out = serde_json::Map::new();
    for (id, b) in built.bitorsors.iter().filter(|(id, _)| only.is_none_or(|o| o == *id)) {
        let rep = check_imprimitivity(b, samples, seed)?;
        ok &= rep.passed;
        out.insert(id.clone(), serde_json::to_value(&rep)?);
    }
    Ok((ok, json!({ "bitorsors": out })))
}

fn morita(built: &Built, b: &String, left: Option<&String>, right: Option<&String>, samples: usize, seed: u64) -> Result<(bool, Value)> {
    let bt = &built.bitorsors[b];
    let (dl, dr) = built.sides.get(b).cloned().unwrap_or((None, None));
    let pick = |explicit: Option<&String>, default: Option<String>, side: &str| {
        explicit
            .cloned()
            .or(default)
            .ok_or_else(|| Error::Precondition(format!("no {side} triple for bitorsor {b:?}")))
    };
    let l = pick(left, dl, "left")?;
    let r = pick(right, dr, "right")?;
    let rep = full_report(bt, &built.triples[&r], &built.triples[&l], ReportOptions { samples, seed });
    Ok((rep.passed, json!({ "bitorsor": b, "left": l, "right": r, "report": rep })))
}

fn distance(
    i: usize,
    built: &Built,
    triple: &String,
    pairs: &[(usize, usize)],
    invariant_only: bool,
    settings: SolverSettings,
    artifacts: &mut Vec<Artifact>,
) -> Result<(bool, Value)> {
    let t = &built.triples[triple];
    let orb = DiscreteOrbifold::new(t.bundle().base().clone(), t.groupoid().action().clone())?;
    let mut csv = String::from("x,xp,spectral_lower,spectral_upper,geodesic,converged\n");
    let mut certs = String::new();
    let mut geodesics = String::from("x,x',d\n");
    let mut rows = Vec::new();
    let mut ok = true;
    for &(x, xp) in pairs {
        let br = connes_distance(t, DistanceQuery { invariant_only, x, xp, settings })?;
        let geo = geodesic_oracle(&orb, x, xp)?;
        ok &= br.lower <= br.upper * (1.0 + 1e-9) && br.constraint_norm <= 1.0 + 1e-9;
        let _ = writeln!(csv, "{x},{xp},{},{},{},{}", fmt(br.lower), fmt(br.upper), fmt(geo), br.converged);
        let _ = writeln!(geodesics, "{x},{xp},{}", fmt(geo));
        let _ = writeln!(certs, "# {x} {xp}");
        for (v, a) in br.certificate.iter().enumerate() {
            let _ = writeln!(certs, "{v} {}", fmt(*a));
        }
        rows.push(json!({ "x": x, "xp": xp, "lower": br.lower, "upper": br.upper, "geodesic": geo,
            "constraint_norm": br.constraint_norm, "converged": br.converged, "iterations": br.iterations }));
    }
    artifacts.push(Artifact {
        name: format!("distance_{i}.csv"),
        contents: csv,
    });
    artifacts.push(Artifact {
        name: format!("geodesic_{i}.csv"),
        contents: geodesics,
    });
    artifacts.push(Artifact {
        name: format!("certificates_{i}.txt"),
        contents: certs,
    });
    Ok((ok, json!({ "triple": triple, "invariant_only": invariant_only, "rows": rows })))
}

#[allow(clippy::too_many_arguments)]
fn theorem3(
    i: usize,
    haar: HaarConvention,
    family: Family,
    ns: &[usize],
    circumference: f64,
    endpoints: &[(Endpoint, Endpoint)],
    max_rel_error: f64,
    settings: SolverSettings,
    artifacts: &mut Vec<Artifact>,
) -> Result<(bool, Value)> {
    let build = |n: usize| -> Result<(DiscreteOrbifold, SpectralTripleData)> {
        match family {
            Family::Reflection => models::reflection(n, circumference, haar),
            Family::Circle => models::circle(n, 2, circumference, haar),
            Family::Rotation => {
                let m = models::rotation_quotient(n, 2, circumference, haar)?;
                Ok((m.orbifold, m.crossed))
            }
        }
    };
    let ends = |n: usize| {
        endpoints
            .iter()
            .map(|(a, b)| (a.resolve(n).unwrap_or(0), b.resolve(n).unwrap_or(0)))
            .collect()
    };
    let table = theorem3_harness(build, ns, ends, settings)?;
    let mut csv = String::from("n,x,xp,spectral_lower,spectral_upper,geodesic,rel_error\n");
    for r in &table.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.n,
            r.x,
            r.xp,
            fmt(r.spectral_lower),
            fmt(r.spectral_upper),
            fmt(r.geodesic),
            fmt(r.rel_error)
        );
    }
    artifacts.push(Artifact {
        name: format!("theorem3_{i}.csv"),
        contents: csv,
    });
    let mut ok = table.rows.iter().all(|r| r.spectral_lower <= r.spectral_upper * (1.0 + 1e-9));
    let mut trend = Vec::new();
    for p in 0..endpoints.len() {
        let series = table.series(p);
        let last = series.last().map(|r| r.rel_error).unwrap_or(f64::INFINITY);
        let violations = table.violations(p, 1e-9);
        ok &= last <= max_rel_error && violations <= 1;
        trend.push(json!({ "pair": p, "final_rel_error": last, "violations": violations }));
    }
    Ok((ok, json!({ "family": family, "rows": table.rows, "trend": trend })))
}

fn spectrum_task(built: &Built, triple: &String, artifacts: &mut Vec<Artifact>) -> Result<(bool, Value)> {
    let t = &built.triples[triple];
    let d = t.dirac_orthonormal();
    let full = spectrum(&d)?;
    let inv = t.invariant_triple().and_then(|i| i.spectrum()).ok();
    let mut csv = String::from("index,eigenvalue,invariant\n");
    for (k, v) in full.iter().enumerate() {
        let _ = writeln!(csv, "{k},{},false", fmt(*v));
    }
    for (k, v) in inv.iter().flatten().enumerate() {
        let _ = writeln!(csv, "{k},{},true", fmt(*v));
    }
    let safe = triple.replace('/', "_");
    artifacts.push(Artifact {
        name: format!("spectrum_{safe}.csv"),
        contents: csv,
    });
    artifacts.push(Artifact {
        name: format!("dirac_{safe}.txt"),
        contents: dense_matrix_text(&d),
    });
    Ok((true, json!({ "triple": triple, "eigenvalues": full, "invariant_eigenvalues": inv })))
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
    }
    Ok(())
}
