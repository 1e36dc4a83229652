use std::f64::consts::TAU;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ncorbifold::algebra::{ActionGroupoid, AlgebraElement, FiniteGroup, GroupAction, HaarConvention};
use ncorbifold::bimodule::{check_imprimitivity, BimoduleElement};
use ncorbifold::bitorsor::{compose_bitorsors, dual_bitorsor, MoritaBitorsor};
use ncorbifold::dirac::spectrum;
use ncorbifold::distance::{free_companion, theorem3_harness, SolverSettings};
use ncorbifold::geometry::{DiscreteOrbifold, MetricGraph};
use ncorbifold::induction::{chi_iso, induced_space, induced_triple, prop5_refinement, pushforward_bundle, verify_prop5, GeneratorSet};
use ncorbifold::linalg::{CVector, C64};
use ncorbifold::models;
use ncorbifold::morita::{full_report, m3_refinement, smoothness_verdict, ReportOptions};
use ncorbifold::scenario::{load_scenario, Built, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), String>;

struct Criterion {
    name: &'static str,
    limit_secs: u64,
    run: fn() -> Check,
}

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn fixture(name: &str, haar: HaarConvention) -> (Scenario, Built) {
    let s = load_scenario(&fixture_path(name)).expect("fixture loads");
    let b = s.build(Some(haar)).map_err(|e| format!("{e:?}")).expect("fixture builds");
    (s, b)
}

fn rotation_fixture() -> Built {
    fixture("rotation_quotient.json", HaarConvention::Counting).1
}

fn close(a: f64, b: f64) -> f64 {
    (a - b).abs()
}

/// Brute-force convolution: sum over all composable pairs of arrows.
fn convolution_oracle(gd: &ActionGroupoid, f: &AlgebraElement, g: &AlgebraElement) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); gd.arrow_count()];
    for s in gd.arrows() {
        for t in gd.arrows() {
            if let Ok(c) = gd.compose(s, t) {
                out[gd.index(c)] += f.get(s) * g.get(t) * gd.weight();
            }
        }
    }
    out
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn algebra_suite() -> Check {
    let s3 = FiniteGroup::symmetric(3);
    let regular: Vec<Vec<usize>> = s3.elements().map(|g| (0..6).map(|x| s3.mul(g, x)).collect()).collect();
    let actions = [
        ("Z2 reflection on C6", GroupAction::reflection(6)),
        ("Z2 rotation on C6", GroupAction::cyclic_rotation(6, 3).map_err(|e| e.to_string())?),
        ("S3 on 6 points", GroupAction::new(s3.clone(), 6, regular).map_err(|e| e.to_string())?),
    ];
    let mut worst = 0.0_f64;
    for haar in [HaarConvention::Counting, HaarConvention::Normalized] {
        for (_, action) in &actions {
            let gd = ActionGroupoid::shared(action.clone(), haar);
            let e = gd.group().identity();
            let unit_oracle: Vec<C64> = gd
                .arrows()
                .map(|a| C64::new(if a.g == e { 1.0 / gd.weight() } else { 0.0 }, 0.0))
                .collect();
            let unit = AlgebraElement::unit(&gd);
            worst = worst.max(max_diff(unit.values(), &unit_oracle));
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            for _ in 0..100 {
                let a = AlgebraElement::random(&gd, &mut rng);
                let b = AlgebraElement::random(&gd, &mut rng);
                let c = AlgebraElement::random(&gd, &mut rng);
                let ab = a.convolve(&b).map_err(|e| e.to_string())?;
                let bc = b.convolve(&c).map_err(|e| e.to_string())?;
                let left = ab.convolve(&c).map_err(|e| e.to_string())?;
                let right = a.convolve(&bc).map_err(|e| e.to_string())?;
                worst = worst.max(left.max_abs_diff(&right));
                worst = worst.max(max_diff(ab.values(), &convolution_oracle(&gd, &a, &b)));
                worst = worst.max(unit.convolve(&a).map_err(|e| e.to_string())?.max_abs_diff(&a));
                worst = worst.max(a.convolve(&unit).map_err(|e| e.to_string())?.max_abs_diff(&a));
                let star = a.involution();
                let star_oracle: Vec<C64> = gd.arrows().map(|s| a.get(gd.inverse(s)).conj()).collect();
                worst = worst.max(max_diff(star.values(), &star_oracle));
                worst = worst.max(star.involution().max_abs_diff(&a));
                let lhs = ab.involution();
                let rhs = b.involution().convolve(&star).map_err(|e| e.to_string())?;
                worst = worst.max(lhs.max_abs_diff(&rhs));
            }
        }
    }
    Ok((worst <= 1e-12, format!("max residual {worst:.3e} (≤ 1e-12) over 3 groupoids × 2 conventions × 100 triples")))
}

fn fixture_bitorsors() -> Vec<(String, Arc<MoritaBitorsor>)> {
    let built = rotation_fixture();
    ["identity", "quotient"].iter().map(|id| (id.to_string(), built.bitorsors[*id].clone())).collect()
}

fn fibers() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for (id, b) in fixture_bitorsors() {
        let (k, g) = (b.left().group_order(), b.right().group_order());
        let mut rho = vec![0usize; b.right().points()];
        let mut alpha = vec![0usize; b.left().points()];
        for q in 0..b.size() {
            rho[b.rho(q)] += 1;
            alpha[b.alpha(q)] += 1;
        }
        let lib = b.fiber_cardinalities().map_err(|e| e.to_string())?;
        ok &= rho.iter().all(|&c| c == k) && alpha.iter().all(|&c| c == g) && lib == (rho.clone(), alpha.clone());
        notes.push(format!("{id}: ϱ-fibers {rho:?} (#K = {k}), α-fibers {alpha:?} (#G = {g})"));
    }
    Ok((ok, notes.join("; ")))
}

fn imprimitivity_axioms() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for (id, b) in fixture_bitorsors() {
        let r = check_imprimitivity(&b, 100, 0).map_err(|e| e.to_string())?;
        let full_theta = b.right().group_order() * b.right().points();
        let full_xi = b.left().group_order() * b.left().points();
        ok &= r.axiom4_residual <= 1e-12
            && r.positivity_floor_theta >= -1e-10
            && r.positivity_floor_xi >= -1e-10
            && r.span_theta == full_theta
            && r.span_xi == full_xi;
        notes.push(format!(
            "{id}: axiom 4 {:.2e}, floors {:.2e}/{:.2e}, spans {}/{} of {}/{}",
            r.axiom4_residual, r.positivity_floor_theta, r.positivity_floor_xi, r.span_theta, r.span_xi, full_theta, full_xi
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn chi_ratio(haar: HaarConvention) -> Result<(usize, usize, f64, f64, f64, f64), String> {
    let built = fixture("rotation_quotient.json", haar).1;
    let b = &built.bitorsors["quotient"];
    let t = &built.triples["crossed"];
    let y = built.triples["quotient/quotient"].bundle().base().clone();
    let h = induced_space(b, t, GeneratorSet::Local).map_err(|e| e.to_string())?;
    let pb = pushforward_bundle(b, t.bundle(), &y).map_err(|e| e.to_string())?;
    let x = chi_iso(&h, &pb).map_err(|e| e.to_string())?;
    let (res, leak) = x.intertwining_residual(&h, &pb).map_err(|e| e.to_string())?;
    let (mean, dev) = x.random_pair_ratios(200, 0);
    Ok((x.rank, t.bundle().rank() * y.vertex_count(), res.max(leak), mean, dev, b.left().group_order() as f64 / b.right().group_order() as f64))
}

fn chi_isomorphism() -> Check {
    let (rank, expected_rank, residual, mean, dev, kg) = chi_ratio(HaarConvention::Counting)?;
    let normalized = chi_ratio(HaarConvention::Normalized)?.3;
    let ok = rank == expected_rank && residual <= 1e-10 && dev <= 1e-10 && close(mean, kg) <= 1e-10;
    Ok((
        ok,
        format!(
            "rank {rank}/{expected_rank}, intertwining {residual:.2e}, Counting ratio {mean:.12} ± {dev:.1e} vs #K/#G = {kg} \
             (Normalized ratio {normalized:.12})"
        ),
    ))
}

fn leibniz() -> Check {
    let rows = prop5_refinement(&[16, 32, 64], HaarConvention::Counting).map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = rows.windows(2).map(|w| w[1].1 / w[0].1).collect();
    let m = models::rotation_quotient(16, 2, TAU, HaarConvention::Counting).map_err(|e| e.to_string())?;
    let h = induced_space(&m.bitorsor, &m.crossed, GeneratorSet::Local).map_err(|e| e.to_string())?;
    let (pb, t2) = induced_triple(&m.bitorsor, &m.crossed, &m.quotient_graph).map_err(|e| e.to_string())?;
    let x = chi_iso(&h, &pb).map_err(|e| e.to_string())?;
    let one = BimoduleElement::constant(&m.bitorsor, C64::new(1.0, 0.0));
    let psi = CVector::from_fn(32, |i, _| C64::new((i as f64).sin(), 0.3 * (i as f64).cos()));
    let constant = verify_prop5(&h, &pb, &x, t2.dirac(), &one, &psi).map_err(|e| e.to_string())?;
    let ok = ratios.iter().all(|r| (0.3..=0.7).contains(r)) && constant <= 1e-12;
    let res: Vec<String> = rows.iter().map(|(n, r)| format!("{n}: {r:.4e}")).collect();
    Ok((ok, format!("residuals [{}], ratios {ratios:.3?}, constant-f residual {constant:.2e} (round-off floor, ≤ 1e-12)", res.join(", "))))
}

fn morita_instance() -> Check {
    let built = rotation_fixture();
    let q = &built.bitorsors["quotient"];
    let crossed = &built.triples["crossed"];
    let quotient = &built.triples["quotient/quotient"];
    let opts = ReportOptions { samples: 100, seed: 0 };
    let main = full_report(q, crossed, quotient, opts);
    let expected = (q.right().group_order() as f64 / q.left().group_order() as f64).sqrt();
    let scale = main.m5.as_ref().map(|m| m.scale).unwrap_or(f64::NAN);
    let identity = full_report(&built.bitorsors["identity"], crossed, crossed, opts);
    let dual = Arc::new(dual_bitorsor(q));
    let dual_report = full_report(&dual, quotient, crossed, opts);
    let comp = Arc::new(compose_bitorsors(q, &dual).map_err(|e| e.to_string())?);
    let comp_report = full_report(&comp, quotient, quotient, opts);
    let verdicts = |r: &ncorbifold::morita::MoritaReport| {
        r.axioms.iter().map(|a| format!("{}:{:?}", a.name, a.status)).collect::<Vec<_>>().join(" ")
    };
    let ok = main.passed && close(scale, expected) <= 1e-10 && identity.passed && dual_report.passed && comp_report.passed;
    Ok((
        ok,
        format!(
            "quotient [{}], M5 scale {scale:.12} vs √(#G/#K) = {expected:.12}; identity {}, dual {}, composite {}",
            verdicts(&main),
            identity.passed,
            dual_report.passed,
            comp_report.passed
        ),
    ))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn smoothness() -> Check {
    let built = rotation_fixture();
    let crossed = &built.triples["crossed"];
    let quotient = &built.triples["quotient/quotient"];
    let verdict = smoothness_verdict(crossed, HaarConvention::Counting).map_err(|e| e.to_string())?;
    let inv = crossed.invariant_triple().and_then(|t| t.spectrum()).map_err(|e| e.to_string())?;
    let qgraph = quotient.bundle().base();
    let m = qgraph.vertex_count();
    let h = qgraph.as_cycle().ok_or("quotient graph is not a uniform cycle")?;
    let analytic = sorted((0..m).map(|k| -(TAU * k as f64 / m as f64).sin() / h).collect());
    let quotient_spec = spectrum(&quotient.dirac_orthonormal()).map_err(|e| e.to_string())?;
    let inv = sorted(inv);
    let dev = if inv.len() == analytic.len() {
        inv.iter().zip(&analytic).map(|(a, b)| close(*a, *b)).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let qdev = sorted(quotient_spec).iter().zip(&analytic).map(|(a, b)| close(*a, *b)).fold(0.0, f64::max);

    let rbuilt = fixture("reflection_c6.json", HaarConvention::Counting).1;
    let spin = &rbuilt.triples["spin"];
    let rv = smoothness_verdict(spin, HaarConvention::Counting).map_err(|e| e.to_string())?;
    let action = spin.groupoid().action();
    let fixed: Vec<usize> = (0..action.points())
        .filter(|&x| action.group().elements().any(|g| g != action.group().identity() && action.act(g, x) == x))
        .collect();
    let ok = verdict.positive && dev <= 1e-10 && qdev <= 1e-10 && !rv.positive && !fixed.is_empty() && rv.singular_vertices == fixed;
    Ok((
        ok,
        format!(
            "free: positive {}, invariant vs quotient spectrum {dev:.2e}; reflection: positive {}, singular {:?}",
            verdict.positive, rv.positive, rv.singular_vertices
        ),
    ))
}

/// Circle of circumference `L` on `n` vertices, reflected through vertex 0.
fn reflection_geodesic(n: usize, l: f64, x: usize, xp: usize) -> f64 {
    let h = l / n as f64;
    let cyc = |a: usize, b: usize| {
        let d = a.abs_diff(b);
        d.min(n - d) as f64 * h
    };
    cyc(x, xp).min(cyc(x, (n - xp) % n))
}

fn distance_convergence() -> Check {
    let ns = [16, 32, 64, 128, 256];
    let settings = SolverSettings::default();
    let table = theorem3_harness(
        |n| models::reflection(n, TAU, HaarConvention::Counting),
        &ns,
        |n| vec![(0, n / 2), (1, 2)],
        settings,
    )
    .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut notes = Vec::new();
    for pair in 0..2 {
        let series = table.series(pair);
        let errs: Vec<f64> = series
            .iter()
            .map(|r| {
                let geo = reflection_geodesic(r.n, TAU, r.x, r.xp);
                ok &= r.spectral_lower <= r.spectral_upper && close(r.geodesic, geo) <= 1e-12 * geo;
                close(r.spectral_lower, geo) / geo
            })
            .collect();
        let increases = errs.windows(2).filter(|w| w[1] > w[0] + 1e-9).count();
        let last = *errs.last().unwrap_or(&f64::INFINITY);
        ok &= series.len() == ns.len() && last <= 0.1 && increases <= 1;
        let shown: Vec<String> = errs.iter().map(|e| format!("{e:.1e}")).collect();
        notes.push(format!("pair {pair}: rel errors [{}], increases beyond 1e-9: {increases}", shown.join(", ")));
    }
    let pairs: Vec<(usize, usize)> = (0..6).flat_map(|x| (0..6).map(move |y| (x, y))).collect();
    let gap = free_companion(6, 6.0, &pairs, settings).map_err(|e| e.to_string())?;
    ok &= gap <= 1e-8;
    notes.push(format!("free companion gap {gap:.2e}"));
    Ok((ok, notes.join("; ")))
}

fn m3_boundedness() -> Check {
    let sweep = m3_refinement(&[16, 32, 64, 128], 1.0, HaarConvention::Counting).map_err(|e| e.to_string())?;
    let mut ok = sweep.rows.len() == 4;
    for w in sweep.rows.windows(2) {
        ok &= w[1].forward_defect <= 1.1 * w[0].forward_defect
            && w[1].backward_defect <= 1.1 * w[0].backward_defect
            && close(w[1].dirac_norm / w[0].dirac_norm, 2.0) <= 1e-9;
    }
    let rows: Vec<String> = sweep
        .rows
        .iter()
        .map(|r| format!("n={} ‖D‖={:.1} defects {:.4}/{:.4}", r.n, r.dirac_norm, r.forward_defect, r.backward_defect))
        .collect();
    Ok((ok, rows.join("; ")))
}

fn floyd_warshall(g: &MetricGraph) -> Vec<Vec<f64>> {
    let n = g.vertex_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (x, row) in d.iter_mut().enumerate() {
        row[x] = 0.0;
        for &(y, w) in g.neighbors(x) {
            row[y] = row[y].min(w);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

fn metric_axioms() -> Check {
    let mut ok = true;
    let mut checked = 0usize;
    for name in ["reflection_c6.json", "rotation_quotient.json", "corrupted_bitorsor.json"] {
        let (scenario, built) = fixture(name, HaarConvention::Counting);
        for a in &scenario.actions {
            let graph = built.graphs[&a.graph].clone();
            let action = built.groupoids[&a.id].action().clone();
            let orb = DiscreteOrbifold::new(graph.clone(), action.clone()).map_err(|e| e.to_string())?;
            let fw = floyd_warshall(&graph);
            let n = graph.vertex_count();
            let grp = action.group();
            let same_orbit = |x: usize, y: usize| grp.elements().any(|g| action.act(g, x) == y);
            let idx = action.orbit_index();
            let qd: Vec<Vec<f64>> = {
                let qg = orb.quotient_graph().map_err(|e| e.to_string())?;
                (0..qg.vertex_count()).map(|i| qg.dijkstra(i)).collect()
            };
            let mut d = vec![vec![0.0; n]; n];
            for x in 0..n {
                for y in 0..n {
                    let min_g = grp.elements().map(|g| fw[x][action.act(g, y)]).fold(f64::INFINITY, f64::min);
                    d[x][y] = orb.orbifold_distance(x, y).map_err(|e| e.to_string())?;
                    ok &= d[x][y] == min_g && qd[idx[x]][idx[y]] == min_g;
                    ok &= (d[x][y] == 0.0) == same_orbit(x, y);
                }
            }
            for x in 0..n {
                for y in 0..n {
                    ok &= d[x][y] == d[y][x];
                    for z in 0..n {
                        ok &= d[x][z] <= d[x][y] + d[y][z];
                    }
                }
            }
            checked += 1;
        }
    }
    Ok((ok, format!("{checked} fixture actions checked exhaustively; min-over-g, quotient Dijkstra and library agree exactly")))
}

fn main() {
    let criteria = [
        Criterion { name: "algebra suite", limit_secs: 5, run: algebra_suite },
        Criterion { name: "bitorsor fibers", limit_secs: 1, run: fibers },
        Criterion { name: "imprimitivity axioms", limit_secs: 30, run: imprimitivity_axioms },
        Criterion { name: "chi isomorphism", limit_secs: 30, run: chi_isomorphism },
        Criterion { name: "Leibniz identity", limit_secs: 60, run: leibniz },
        Criterion { name: "Morita instance", limit_secs: 120, run: morita_instance },
        Criterion { name: "smoothness", limit_secs: 30, run: smoothness },
        Criterion { name: "spectral distance convergence", limit_secs: 600, run: distance_convergence },
        Criterion { name: "M3 refinement", limit_secs: 300, run: m3_boundedness },
        Criterion { name: "metric axioms", limit_secs: 5, run: metric_axioms },
    ];
    let mut failed = 0;
    for (i, Criterion { name, limit_secs: limit, run }) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*limit);
        let (pass, detail) = match outcome {
            Ok((p, d)) => (p && in_time, d),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {detail} [{:.2} s, limit {limit} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
