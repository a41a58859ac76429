//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_RED` are reported but do not fail the run
//! unless `--strict` is passed (`cargo test --test acceptance -- --strict`).

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::{to_bytes, Body};
use axum::http::Request;
use herec_core::data::InteractionGraph;
use herec_core::hiercluster::{dasgupta_cost, graph_edges, HierarchyTree, RootedTree};
use herec_core::manifold::{tangent_norm, Hyperboloid};
use herec_core::metrics::{div_at_k, epc, ndcg_at_k, recall_at_k, shannon_entropy};
use herec_core::model::{
    align_loss, align_loss_grad, haml_margin, load_sidecar, margin_loss, margin_loss_grad, propagate, Adapter,
    EmbeddingTable,
};
use herec_core::optim::Rsgd;
use herec_core::pipeline::{evaluate, initial_model, layer_sweep, spearman, Artifacts, CheckpointMeta};
use herec_core::recommend::{explore_exploit, retained_count, top_k, Provenance};
use herec_core::rng::stream_rng;
use herec_core::verify::{
    error_bound_report, euclidean_grad_magnitude, hyperbolic_grad_magnitude, probe_points, REFERENCE_NORM,
    REFERENCE_TOLERANCE,
};
use herec_server::{empty_state, router, ServingState};
use rand::Rng;
use serde_json::Value;
use tower::ServiceExt;

const KNOWN_RED: [&str; 1] = ["gradient_approximation"];

const FD_H: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
const GRAD_PROBES: usize = 200;
const HAML_EXPECTED: f64 = 0.698_454_407_987_172_5;

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn run(name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (ok, mut detail) = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    if let Some(l) = limit {
        detail.push_str(&format!("; {:.2}s (limit {}s)", elapsed.as_secs_f64(), l.as_secs()));
    }
    Outcome {
        name,
        passed: ok && in_time,
        detail,
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn random_point<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    let s: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Hyperboloid::default().lift(&s)
}

fn manifold_suite() -> (bool, String) {
    let m = Hyperboloid::default();
    let mut rng = stream_rng(11, 0);
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    let mut far: f64 = 0.0;
    for chain in 0..10 {
        let n = 2 + chain % 8;
        let opt = Rsgd::new(0.05, 1e-3).unwrap();
        let mut x = random_point(&mut rng, n, 1.0);
        for _ in 0..1000 {
            // pull toward a random target, or push off a nearby one as the
            // hinge does once a negative is inside the margin
            let target = random_point(&mut rng, n, 3.0);
            let push = rng.random_bool(0.5) && m.dist(&x, &target) < 2.0;
            let sign = if push { -1.0 } else { 1.0 };
            let g: Vec<f64> = m.dist_sq_grad(&x, &target).1.iter().map(|v| sign * v).collect();
            opt.step(&mut x, &g).unwrap();
            worst = worst.max(m.constraint_residual(&x));
            far = far.max(x[0]);
            steps += 1;
        }
    }
    let mut worst_rt: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..8);
        let x = random_point(&mut rng, n, 2.0);
        let raw: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = m.project_to_tangent(&x, &raw);
        let len = rng.random_range(0.0..5.0);
        let v: Vec<f64> = v.iter().map(|c| c * len / tangent_norm(&v)).collect();
        let back = m.log_map(&x, &m.exp_map(&x, &v));
        let err = back.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst_rt = worst_rt.max(err);
    }
    (
        worst < 1e-9 && worst_rt < 1e-6,
        format!("max |<h,h>+1| {worst:.2e} over {steps} steps (max x0 {far:.1}); max exp/log round trip error {worst_rt:.2e}"),
    )
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Relative gap between the ambient gradient and central differences taken
/// along geodesics in an orthogonal set of tangent directions.
fn projected_fd_gap(f: impl Fn(&[f64]) -> f64, x: &[f64], grad: &[f64]) -> f64 {
    let m = Hyperboloid::default();
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for k in 0..x.len() {
        let mut e = vec![0.0; x.len()];
        e[k] = 1.0;
        let v = m.project_to_tangent(x, &e);
        let v: Vec<f64> = v.iter().map(|c| c / tangent_norm(&v)).collect();
        analytic.push(grad.iter().zip(&v).map(|(g, d)| g * d).sum::<f64>());
        let plus: Vec<f64> = v.iter().map(|c| c * FD_H).collect();
        let minus: Vec<f64> = v.iter().map(|c| -c * FD_H).collect();
        numeric.push((f(&m.exp_map(x, &plus)) - f(&m.exp_map(x, &minus))) / (2.0 * FD_H));
    }
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(&analytic).max(1e-8)
}

fn gradient_suite() -> (bool, String) {
    let m = Hyperboloid::default();
    let mut rng = stream_rng(12, 0);
    let (mut w_dist, mut w_margin, mut w_align, mut w_params) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);

    let mut done = 0;
    while done < GRAD_PROBES {
        let n = rng.random_range(2..8);
        let (x, y) = (random_point(&mut rng, n, 2.0), random_point(&mut rng, n, 2.0));
        if !(0.1..=5.0).contains(&m.dist(&x, &y)) {
            continue;
        }
        w_dist = w_dist.max(projected_fd_gap(|p| m.dist(p, &y), &x, &m.dist_grad(&x, &y)));
        done += 1;
    }

    done = 0;
    while done < GRAD_PROBES {
        let n = rng.random_range(2..8);
        let (u, i, j) = (
            random_point(&mut rng, n, 1.5),
            random_point(&mut rng, n, 1.5),
            random_point(&mut rng, n, 1.5),
        );
        let margin = rng.random_range(0.0..1.0);
        let g = margin_loss_grad(&u, &i, &j, margin);
        let inside = m.dist(&u, &i).powi(2) - m.dist(&u, &j).powi(2) + margin;
        // stay clear of the hinge kink and the inactive region
        if inside < 1e-2 {
            continue;
        }
        w_margin = w_margin
            .max(projected_fd_gap(|p| margin_loss(p, &i, &j, margin), &u, &g.user))
            .max(projected_fd_gap(|p| margin_loss(&u, p, &j, margin), &i, &g.pos))
            .max(projected_fd_gap(|p| margin_loss(&u, &i, p, margin), &j, &g.neg));
        done += 1;
    }

    for probe in 0..GRAD_PROBES {
        let n = rng.random_range(2..6);
        let input = rng.random_range(1..5);
        let adapter = Adapter::new(input, 8, n, probe as u64).unwrap();
        let h = random_point(&mut rng, n, 1.5);
        let e: Vec<f64> = (0..input).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut g_params = vec![0.0; adapter.params().len()];
        let (_, g_h) = align_loss_grad(&h, &e, &adapter, 1.0, &mut g_params);
        w_align = w_align.max(projected_fd_gap(|p| align_loss(p, &e, &adapter), &h, &g_h));
        let at = |params: &[f64]| {
            let a = Adapter::from_params(input, 8, n, params.to_vec()).unwrap();
            align_loss(&h, &e, &a)
        };
        let fd = herec_core::verify::central_difference(at, adapter.params(), FD_H);
        let diff: Vec<f64> = fd.iter().zip(&g_params).map(|(a, b)| a - b).collect();
        w_params = w_params.max(norm(&diff) / norm(&g_params).max(1e-8));
    }
    let worst = w_dist.max(w_margin).max(w_align).max(w_params);
    (
        worst <= GRAD_TOL,
        format!(
            "{GRAD_PROBES} probes each; max relative gap dist {w_dist:.1e}, margin {w_margin:.1e}, align {w_align:.1e}, adapter {w_params:.1e} (limit {GRAD_TOL:.0e})"
        ),
    )
}

fn gradient_approximation() -> (bool, String) {
    let p = error_bound_report(REFERENCE_NORM, REFERENCE_NORM, PI / 2.0).unwrap();
    let mut rng = stream_rng(13, 0);
    let mut worst_euc: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..10);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        worst_euc = worst_euc.max((euclidean_grad_magnitude(&x, &y).unwrap() - 1.0).abs());
    }
    let mags: Vec<f64> = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|&r| {
            let (x, y) = probe_points(r, r, PI / 2.0, 2).unwrap();
            hyperbolic_grad_magnitude(&x, &y).unwrap()
        })
        .collect();
    let decreasing = mags.windows(2).all(|w| w[1] < w[0]);
    let ok_ref = p.rel_err <= REFERENCE_TOLERANCE;
    (
        ok_ref && worst_euc <= 1e-12 && decreasing,
        format!(
            "reference relative error {:.4} (limit {REFERENCE_TOLERANCE:.3}); euclidean max |g-1| {worst_euc:.1e}; adaptivity {}",
            p.rel_err,
            if decreasing { "strictly decreasing" } else { "NOT decreasing" }
        ),
    )
}

fn haml_example() -> (bool, String) {
    let e = [1f64.cosh(), 1f64.sinh()];
    let got = haml_margin(&e, &e);
    (
        (got - HAML_EXPECTED).abs() <= 1e-9,
        format!("margin {got:.10} vs {HAML_EXPECTED:.10}"),
    )
}

fn brute_recall(rec: &[u32], test: &[u32], k: usize) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let mut hits = 0;
    for &t in test {
        if rec.iter().take(k).any(|&r| r == t) {
            hits += 1;
        }
    }
    hits as f64 / test.len() as f64
}

fn brute_ndcg(rec: &[u32], test: &[u32], k: usize) -> f64 {
    if test.is_empty() || k == 0 {
        return 0.0;
    }
    let mut dcg = 0.0;
    for r in 0..k.min(rec.len()) {
        let first = rec[..r].iter().all(|&p| p != rec[r]);
        if first && test.contains(&rec[r]) {
            dcg += 1.0 / (r as f64 + 2.0).log2();
        }
    }
    let mut idcg = 0.0;
    for r in 0..k.min(test.len()) {
        idcg += 1.0 / (r as f64 + 2.0).log2();
    }
    dcg / idcg
}

fn brute_div(rec: &[u32], points: &EmbeddingTable, k: usize) -> Option<f64> {
    let m = Hyperboloid::default();
    let items = &rec[..k.min(rec.len())];
    let mut sum = 0.0;
    let mut n = 0;
    for x in 0..items.len() {
        for y in x + 1..items.len() {
            sum += m.dist(points.item(items[x]), points.item(items[y]));
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

fn brute_entropy(lists: &[Vec<u32>]) -> f64 {
    let all: Vec<u32> = lists.iter().flatten().copied().collect();
    let mut distinct = all.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let total = all.len() as f64;
    distinct
        .iter()
        .map(|d| {
            let p = all.iter().filter(|x| *x == d).count() as f64 / total;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

fn brute_epc(lists: &[Vec<u32>], degrees: &[usize]) -> f64 {
    let mut distinct: Vec<u32> = lists.iter().flatten().copied().collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.is_empty() {
        return 0.0;
    }
    let max = *degrees.iter().max().unwrap();
    if max == 0 {
        return 1.0;
    }
    1.0 - distinct.iter().map(|&i| degrees[i as usize] as f64 / max as f64).sum::<f64>() / distinct.len() as f64
}

fn metric_oracles() -> (bool, String) {
    let mut rng = stream_rng(14, 0);
    let mut mismatches = Vec::new();
    let instances = 500;
    for inst in 0..instances {
        let users = rng.random_range(1..=10);
        let items = rng.random_range(2..=20);
        let k = rng.random_range(1..=5);
        let space: Vec<f64> = (0..(users + items) * 2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let data: Vec<f64> = space.chunks(2).flat_map(|s| Hyperboloid::default().lift(s)).collect();
        let points = EmbeddingTable::from_raw(users, items, 2, data).unwrap();
        let degrees: Vec<usize> = (0..items).map(|_| rng.random_range(0..6)).collect();
        let mut lists = Vec::new();
        for _ in 0..users {
            let len = rng.random_range(0..=k + 2);
            let rec: Vec<u32> = (0..len).map(|_| rng.random_range(0..items as u32)).collect();
            let tlen = rng.random_range(0..4);
            let test: Vec<u32> = {
                let mut t: Vec<u32> = (0..tlen).map(|_| rng.random_range(0..items as u32)).collect();
                t.sort_unstable();
                t.dedup();
                t
            };
            let pairs = [
                ("recall", recall_at_k(&rec, &test, k), brute_recall(&rec, &test, k)),
                ("ndcg", ndcg_at_k(&rec, &test, k), brute_ndcg(&rec, &test, k)),
                (
                    "div",
                    div_at_k(&rec, &points, k).unwrap_or(-1.0),
                    brute_div(&rec, &points, k).unwrap_or(-1.0),
                ),
            ];
            for (name, got, want) in pairs {
                if (got - want).abs() > 1e-12 {
                    mismatches.push(format!("{name} in instance {inst}: {got} vs {want}"));
                }
            }
            lists.push(rec.into_iter().take(k).collect::<Vec<u32>>());
        }
        let h = shannon_entropy(lists.iter().map(Vec::as_slice));
        if (h - brute_entropy(&lists)).abs() > 1e-12 {
            mismatches.push(format!("entropy in instance {inst}"));
        }
        let e = epc(lists.iter().map(Vec::as_slice), &degrees);
        if (e - brute_epc(&lists, &degrees)).abs() > 1e-12 {
            mismatches.push(format!("epc in instance {inst}"));
        }
    }
    let uniform: [&[u32]; 1] = [&[0, 1, 2, 3]];
    let h4 = shannon_entropy(uniform);
    (
        mismatches.is_empty() && h4 == 2.0,
        format!(
            "{instances} instances, {} mismatches{}; entropy of 4 uniform items {h4}",
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    )
}

fn planted_instance(seed: u64) -> (EmbeddingTable, InteractionGraph) {
    let mut rng = stream_rng(seed, 0);
    let (users, items) = (32usize, 32usize);
    let cluster = |idx: usize| idx % 2;
    let m = Hyperboloid::default();
    let mut data = Vec::new();
    for node in 0..users + items {
        let sign = if cluster(node) == 0 { 1.0 } else { -1.0 };
        let s = [sign * 1.5 + rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)];
        data.extend(m.lift(&s));
    }
    let points = EmbeddingTable::from_raw(users, items, 2, data).unwrap();
    let mut train = vec![Vec::new(); users];
    for (u, list) in train.iter_mut().enumerate() {
        for i in 0..items {
            let same = cluster(u) == cluster(users + i);
            let p = if same { 0.4 } else { 0.03 };
            if rng.random_bool(p) {
                list.push(i as u32);
            }
        }
    }
    let graph = InteractionGraph::from_lists(users, items, train, vec![Vec::new(); users]).unwrap();
    (points, graph)
}

fn dasgupta_suite() -> (bool, String) {
    // 4 leaves, edges {0-1, 2-3}: pairing the edges costs 2+2, crossing them 4+4
    let paired = RootedTree::new(4, vec![Some(4), Some(4), Some(5), Some(5), Some(6), Some(6), None]).unwrap();
    let crossed = RootedTree::new(4, vec![Some(4), Some(5), Some(4), Some(5), Some(6), Some(6), None]).unwrap();
    let edges4 = [(0, 1), (2, 3)];
    let (c_paired, c_crossed) = (paired.cost(&edges4).unwrap(), crossed.cost(&edges4).unwrap());
    let small_ok = c_paired == 4.0 && c_crossed == 8.0;

    let mut wins = 0;
    let mut ratios = Vec::new();
    for seed in 0..10u64 {
        let (points, graph) = planted_instance(100 + seed);
        let tree = HierarchyTree::build(&points, seed).unwrap();
        let built = dasgupta_cost(&tree, &graph).unwrap();
        let edges = graph_edges(&graph);
        let mut rng = stream_rng(200 + seed, 0);
        let random: f64 = (0..100)
            .map(|_| RootedTree::random_binary(64, &mut rng).cost(&edges).unwrap())
            .sum::<f64>()
            / 100.0;
        if built <= random {
            wins += 1;
        }
        ratios.push(built / random);
    }
    (
        small_ok && wins >= 9,
        format!(
            "4-leaf costs {c_paired} vs {c_crossed}; built tree beats random mean in {wins}/10 seeds (cost ratios {:.2}..{:.2})",
            ratios.iter().cloned().fold(f64::INFINITY, f64::min),
            ratios.iter().cloned().fold(0.0, f64::max)
        ),
    )
}

fn herec(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_herec"))
        .args(args)
        .env("HEREC_LOG", "warn")
        .output()
        .expect("spawn herec");
    assert!(
        out.status.success(),
        "herec {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn recall10(report: &Value) -> f64 {
    report["cutoffs"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["k"] == 10)
        .unwrap()["overall"]["recall"]
        .as_f64()
        .unwrap()
}

/// Train on the default synthetic set through the binary.
fn train_synthetic(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    let ckpt = dir.join("model.ckpt");
    herec(&["gen-synth", "--out", path_str(&data), "--users", "200", "--items", "300", "--seed", "0"]);
    herec(&["train", "--data", path_str(&data), "--checkpoint", path_str(&ckpt), "--seed", "0"]);
    ckpt
}

fn end_to_end(dir: &Path) -> (bool, String) {
    let ckpt = train_synthetic(dir);
    let out = herec(&["eval", "--checkpoint", path_str(&ckpt), "--baseline", "--json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let (model, popular) = (recall10(&v["model"]), recall10(&v["most_popular"]));

    let art = Artifacts::load(&ckpt).unwrap();
    let meta: CheckpointMeta = load_sidecar(&ckpt).unwrap();
    let semantic = herec_core::data::load_semantic_vectors(dir.join("data").join("semantic.tsv")).unwrap();
    let init = initial_model(&meta.config, &art.graph, Some(&semantic)).unwrap();
    let init_points = propagate(&init.table, &art.graph, meta.config.layers).points;
    let init_recall = evaluate(&init_points, &art.graph, &[10]).unwrap().cutoffs[0].overall.recall;
    (
        model >= 1.2 * popular && model >= 1.5 * init_recall,
        format!(
            "Recall@10 {model:.4} vs most-popular {popular:.4} ({:.2}x) and initialization {init_recall:.4} ({:.2}x)",
            model / popular,
            model / init_recall
        ),
    )
}

fn trade_off(ckpt: &Path) -> (bool, String) {
    let art = Artifacts::load(ckpt).unwrap();
    let tree = art.build_tree().unwrap();
    let sweep = layer_sweep(&art.points, &art.graph, &tree, 20, 0.5, 0).unwrap();
    let layers: Vec<f64> = sweep.iter().map(|p| p.layer as f64).collect();
    let rho_r = spearman(&layers, &sweep.iter().map(|p| p.recall).collect::<Vec<_>>());
    let rho_d = spearman(&layers, &sweep.iter().map(|p| p.div).collect::<Vec<_>>());

    let mut tau0_same = true;
    let mut tau1_explored = true;
    for u in 0..art.graph.user_count() as u32 {
        let plain = top_k(&art.points, &art.graph, u, 20).unwrap();
        for l in 1..=tree.depth() {
            tau0_same &= explore_exploit(&art.points, &art.graph, &tree, u, 20, 0.0, l, 7).unwrap() == plain;
        }
        let all = explore_exploit(&art.points, &art.graph, &tree, u, 20, 1.0, 1, 7).unwrap();
        tau1_explored &= all.len() == 20 && all.items.iter().all(|i| i.provenance == Provenance::Explored);
    }
    tau1_explored &= retained_count(20, 1.0) == 0;
    (
        rho_r >= 0.0 && rho_d <= 0.0 && tau0_same && tau1_explored,
        format!(
            "tau 0.5 over {} layers: spearman(recall@20, l) {rho_r:.3}, spearman(div@20, l) {rho_d:.3}; tau 0 equals top_k: {tau0_same}; tau 1 all explored: {tau1_explored}",
            sweep.len()
        ),
    )
}

fn norm_trend(ckpt: &Path) -> (bool, String) {
    let art = Artifacts::load(ckpt).unwrap();
    let tree = art.build_tree().unwrap();
    let norms = tree.mean_norm_by_layer();
    let layers: Vec<f64> = (1..=norms.len()).map(|l| l as f64).collect();
    let rho = spearman(&layers, &norms);
    (
        rho >= 0.8,
        format!("spearman(layer, mean centroid norm) {rho:.3} (limit 0.8); norms {norms:.3?}"),
    )
}

async fn responses(ckpt: &Path, uris: &[&str]) -> Vec<Vec<u8>> {
    let art = Artifacts::load(ckpt).unwrap();
    let tree = art.build_tree().unwrap();
    let report = evaluate(&art.points, &art.graph, &[10, 20]).unwrap();
    let state = empty_state();
    state
        .set(ServingState::new(art.points, art.graph, tree, Some(report)).unwrap())
        .unwrap();
    let app = router(state, None);
    let mut out = Vec::new();
    for uri in uris {
        let resp = app
            .clone()
            .oneshot(Request::builder().uri(*uri).body(Body::empty()).unwrap())
            .await
            .unwrap();
        out.push(to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec());
    }
    out
}

fn determinism(dir: &Path) -> (bool, String) {
    let a = dir.join("a");
    let b = dir.join("b");
    let (ca, cb) = (train_synthetic(&a), train_synthetic(&b));
    let suffixes = ["", ".json", ".split"];
    let same_files = suffixes.iter().all(|s| {
        let read = |c: &Path| fs::read(format!("{}{s}", c.display())).unwrap();
        read(&ca) == read(&cb)
    });
    let uris = [
        "/api/meta",
        "/api/users/0/recommendations",
        "/api/users/3/recommendations?k=10&tau=0.5&layer=5&seed=1",
        "/api/users/17/recommendations?k=20&tau=1&layer=2&seed=9",
        "/api/tree/path/u5",
        "/api/tree/path/i42",
    ];
    let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
    let (ra, ra2, rb) = rt.block_on(async { (responses(&ca, &uris).await, responses(&ca, &uris).await, responses(&cb, &uris).await) });
    let differing: Vec<&str> = (0..uris.len())
        .filter(|&k| ra[k] != ra2[k] || ra[k] != rb[k])
        .map(|k| uris[k])
        .collect();
    let same_http = differing.is_empty();
    (
        same_files && same_http,
        format!("checkpoint, sidecar and split byte-identical: {same_files}; {} server responses reproducible: {same_http} {differing:?}", uris.len()),
    )
}

fn main() {
    let strict = std::env::args().any(|a| a == "--strict");
    let dir = tempfile::tempdir().unwrap();
    let e2e_dir = dir.path().join("e2e");
    let mut results = vec![
        run("manifold", secs(10), manifold_suite),
        run("gradients", secs(30), gradient_suite),
        run("gradient_approximation", secs(10), gradient_approximation),
        run("haml_example", None, haml_example),
        run("metric_oracles", None, metric_oracles),
        run("dasgupta", secs(60), dasgupta_suite),
        run("end_to_end", secs(300), || end_to_end(&e2e_dir)),
    ];
    let ckpt = e2e_dir.join("model.ckpt");
    results.push(run("trade_off", None, || trade_off(&ckpt)));
    results.push(run("norm_trend", None, || norm_trend(&ckpt)));
    results.push(run("determinism", None, || determinism(&dir.path().join("det"))));

    let mut fatal = 0;
    for r in &results {
        let known = KNOWN_RED.contains(&r.name);
        let tag = match (r.passed, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag} {}: {}", r.name, r.detail);
        if !r.passed && (strict || !known) {
            fatal += 1;
        }
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if fatal > 0 {
        std::process::exit(1);
    }
}
