use std::fs;
use std::path::{Path, PathBuf};

use herec_core::data::{load_interactions, load_semantic_vectors, DatasetManifest, InteractionGraph};
use herec_core::hiercluster::{dasgupta_cost, HierarchyTree};
use herec_core::metrics::{EvalReport, DEFAULT_KS};
use herec_core::model::{load_sidecar, sidecar_path};
use herec_core::pipeline::{
    evaluate, evaluate_most_popular, split_path, train as run_training, Artifacts, CheckpointMeta, TrainConfig,
    DEFAULT_SPLIT_RATIO,
};
use herec_core::recommend::{explore_exploit, top_k, Provenance, RecommendationList};
use herec_core::synth::{generate, SynthConfig, INTERACTIONS_FILE, MANIFEST_FILE, SEMANTIC_FILE};
use herec_core::verify::{grid_csv, probe_grid, run_checks, GRID_NORMS, GRID_THETAS};
use herec_server::{empty_state, router, serve as serve_app, ServingState};
use log::{info, warn};
use serde_json::json;

use crate::{ClusterArgs, EvalArgs, Failure, GenSynthArgs, RecommendArgs, ServeArgs, TrainArgs, VerifyArgs};

/// Write to `out` when given, otherwise to stdout.
fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(herec_core::Error::from)?;
    s.push('\n');
    Ok(s)
}

struct Dataset {
    interactions: PathBuf,
    semantic: Option<PathBuf>,
    manifest: Option<PathBuf>,
}

fn resolve_data(data: &Path, semantic: Option<&Path>) -> Dataset {
    if data.is_dir() {
        let sem = data.join(SEMANTIC_FILE);
        let manifest = data.join(MANIFEST_FILE);
        Dataset {
            interactions: data.join(INTERACTIONS_FILE),
            semantic: semantic.map(Path::to_path_buf).or_else(|| sem.exists().then_some(sem)),
            manifest: manifest.exists().then_some(manifest),
        }
    } else {
        Dataset {
            interactions: data.to_path_buf(),
            semantic: semantic.map(Path::to_path_buf),
            manifest: None,
        }
    }
}

fn load_graph(data: &Dataset, split: f64, seed: u64) -> Result<InteractionGraph, Failure> {
    let (graph, report) = load_interactions(&data.interactions, split, seed)?;
    if report.duplicates > 0 {
        warn!("{} duplicate interactions ignored", report.duplicates);
    }
    if let Some(m) = &data.manifest {
        DatasetManifest::load(m)?.validate(&graph)?;
    }
    info!(
        "loaded {} users, {} items, {} train / {} test interactions",
        graph.user_count(),
        graph.item_count(),
        graph.train_len(),
        graph.test_len()
    );
    Ok(graph)
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    macro_rules! over {
        ($($f:ident),*) => { $(if let Some(v) = a.$f { cfg.$f = v; })* };
    }
    over!(seed, dim, batch, layers, lr, weight_decay, negatives, align_weight, epochs, patience, align_users);
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(a: TrainArgs) -> Result<(), Failure> {
    let cfg = train_config(&a)?;
    info!("resolved config: {cfg}");
    let data = resolve_data(&a.data, a.semantic.as_deref());
    let graph = load_graph(&data, a.split, cfg.seed)?;
    let semantic = data.semantic.as_ref().map(load_semantic_vectors).transpose()?;
    if let Some(s) = &semantic {
        info!("{} semantic vectors of dimension {}", s.len(), s.dim());
    }
    let outcome = run_training(&cfg, &graph, semantic.as_ref(), Some(&a.checkpoint))?;
    let m = &outcome.meta;
    if a.json {
        let summary = json!({
            "checkpoint": a.checkpoint,
            "config": m.config,
            "init_val_recall": m.init_val_recall,
            "best_val_recall": m.best_val_recall,
            "best_epoch": m.best_epoch,
            "epochs_run": m.epochs_run,
            "stopped_early": m.stopped_early,
        });
        emit(&to_json(&summary)?, None)
    } else {
        let text = format!(
            "checkpoint      {}\nepochs run      {}{}\nbest epoch      {}\nval Recall@10   {:.4} (init {:.4})\n",
            a.checkpoint.display(),
            m.epochs_run,
            if m.stopped_early { " (early stop)" } else { "" },
            m.best_epoch,
            m.best_val_recall,
            m.init_val_recall
        );
        emit(&text, None)
    }
}

pub fn eval(a: EvalArgs) -> Result<(), Failure> {
    let art = match &a.data {
        Some(d) => {
            require_artifacts(&a.checkpoint, false)?;
            let meta: CheckpointMeta = load_sidecar(&a.checkpoint)?;
            let data = resolve_data(d, None);
            let graph = load_graph(&data, DEFAULT_SPLIT_RATIO, meta.config.seed)?;
            Artifacts::load_with_graph(&a.checkpoint, graph)?
        }
        None => load_artifacts(&a.checkpoint)?,
    };
    let report = evaluate(&art.points, &art.graph, &DEFAULT_KS)?;
    let baseline = if a.baseline {
        Some(evaluate_most_popular(&art.points, &art.graph, &DEFAULT_KS)?)
    } else {
        None
    };
    let text = if a.json {
        match &baseline {
            Some(b) => to_json(&json!({ "model": report, "most_popular": b }))?,
            None => format!("{}\n", report.to_json()),
        }
    } else {
        let mut t = report_table("model", &report);
        if let Some(b) = &baseline {
            t.push('\n');
            t.push_str(&report_table("most popular", b));
        }
        t
    };
    emit(&text, a.out.as_deref())
}

fn report_table(title: &str, r: &EvalReport) -> String {
    format!("{title}\n{}", r.to_table())
}

/// Name the missing file instead of surfacing a bare I/O error.
fn require_artifacts(ckpt: &Path, with_split: bool) -> Result<(), Failure> {
    let mut needed = vec![ckpt.to_path_buf(), sidecar_path(ckpt)];
    if with_split {
        needed.push(split_path(ckpt));
    }
    match needed.iter().find(|p| !p.is_file()) {
        Some(p) => Err(Failure {
            code: 2,
            message: format!("missing artifact {}", p.display()),
        }),
        None => Ok(()),
    }
}

fn load_artifacts(ckpt: &Path) -> Result<Artifacts, Failure> {
    require_artifacts(ckpt, true)?;
    Ok(Artifacts::load(ckpt)?)
}

fn load_or_build_tree(art: &Artifacts, explicit: Option<&Path>) -> Result<HierarchyTree, Failure> {
    let tree = match explicit {
        Some(p) => HierarchyTree::load(p)?,
        None => {
            let p = art.default_tree_path();
            if p.exists() {
                HierarchyTree::load(&p)?
            } else {
                info!("no tree at {}; building one", p.display());
                art.build_tree()?
            }
        }
    };
    if tree.leaves().len() != art.points.node_count() {
        return Err(herec_core::Error::Dimension {
            expected: art.points.node_count(),
            found: tree.leaves().len(),
        }
        .into());
    }
    Ok(tree)
}

pub fn cluster(a: ClusterArgs) -> Result<(), Failure> {
    let art = load_artifacts(&a.checkpoint)?;
    let seed = a.seed.unwrap_or(art.meta.config.seed);
    let tree = HierarchyTree::build(&art.points, seed)?;
    let out = a.out.clone().unwrap_or_else(|| art.default_tree_path());
    tree.save(&out)?;
    let cost = dasgupta_cost(&tree, &art.graph)?;
    let sizes = tree.layer_sizes();
    let norms = tree.mean_norm_by_layer();
    if a.json {
        let summary = json!({
            "tree": out,
            "layers": tree.depth(),
            "layer_sizes": sizes,
            "mean_norm_by_layer": norms,
            "dasgupta_cost": cost,
        });
        return emit(&to_json(&summary)?, None);
    }
    let mut text = format!("tree            {}\nlayers          {}\ndasgupta cost   {cost:.1}\n", out.display(), tree.depth());
    text.push_str("layer  nodes  mean_norm\n");
    for (l, (n, r)) in sizes.iter().zip(&norms).enumerate() {
        text.push_str(&format!("{:>5}  {n:>5}  {r:>9.4}\n", l + 1));
    }
    emit(&text, None)
}

fn rec_table(list: &RecommendationList) -> String {
    let mut t = String::from("rank  item  score  provenance\n");
    for (r, it) in list.items.iter().enumerate() {
        let p = match it.provenance {
            Provenance::Retained => "retained",
            Provenance::Explored => "explored",
        };
        t.push_str(&format!("{} {} {:.6} {p}\n", r + 1, it.item_id, it.score));
    }
    t
}

pub fn recommend(a: RecommendArgs) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&a.tau) {
        return Err(Failure::usage(format!("--tau must lie in [0, 1], got {}", a.tau)));
    }
    if a.k == 0 {
        return Err(Failure::usage("--k must be positive"));
    }
    if a.tau > 0.0 && a.layer.is_none() {
        return Err(Failure::usage("--layer is required when --tau > 0"));
    }
    let art = load_artifacts(&a.checkpoint)?;
    if a.user as usize >= art.graph.user_count() {
        return Err(herec_core::Error::UnknownNode(format!("user {}", a.user)).into());
    }
    let list = match a.layer {
        None => top_k(&art.points, &art.graph, a.user, a.k)?,
        Some(layer) => {
            let tree = load_or_build_tree(&art, a.tree.as_deref())?;
            if layer == 0 || layer > tree.depth() {
                return Err(Failure::usage(format!("--layer must lie in 1..={}", tree.depth())));
            }
            explore_exploit(&art.points, &art.graph, &tree, a.user, a.k, a.tau, layer, a.seed)?
        }
    };
    let text = if a.json { to_json(&list)? } else { rec_table(&list) };
    emit(&text, None)
}

pub fn verify(a: VerifyArgs) -> Result<(), Failure> {
    let grid = probe_grid(&GRID_NORMS, &GRID_THETAS)?;
    let checks = run_checks(a.seed)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    let summary = if a.json {
        to_json(&checks)?
    } else {
        checks
            .iter()
            .map(|c| format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    };
    match &a.out {
        Some(p) => {
            fs::write(p, grid_csv(&grid))?;
            print!("{summary}");
        }
        None => {
            print!("{}", grid_csv(&grid));
            eprint!("{summary}");
        }
    }
    if failed > 0 {
        return Err(Failure {
            code: 3,
            message: format!("{failed} of {} checks failed", checks.len()),
        });
    }
    Ok(())
}

pub fn serve(a: ServeArgs) -> Result<(), Failure> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.addr).await?;
        let state = empty_state();
        let slot = state.clone();
        let (ckpt, tree_path) = (a.checkpoint.clone(), a.tree.clone());
        let loader = tokio::task::spawn_blocking(move || -> Result<(), Failure> {
            let art = load_artifacts(&ckpt)?;
            let tree = load_or_build_tree(&art, tree_path.as_deref())?;
            let report = evaluate(&art.points, &art.graph, &DEFAULT_KS)?;
            let s = ServingState::new(art.points, art.graph, tree, Some(report))?;
            let _ = slot.set(s);
            info!("model loaded from {}", ckpt.display());
            Ok(())
        });
        let app = router(state, a.static_dir.clone());
        let server = tokio::spawn(serve_app(listener, app));
        // a failed load is fatal; the server keeps answering 503 until then
        loader.await.map_err(|e| Failure {
            code: 2,
            message: e.to_string(),
        })??;
        server.await.map_err(|e| Failure {
            code: 2,
            message: e.to_string(),
        })??;
        Ok(())
    })
}

pub fn gen_synth(a: GenSynthArgs) -> Result<(), Failure> {
    let cfg = SynthConfig {
        users: a.users,
        items: a.items,
        branching: a.branching,
        noise: a.noise,
        seed: a.seed,
    };
    let data = generate(&cfg)?;
    for p in data.write(&a.out)? {
        println!("{}", p.display());
    }
    info!(
        "{} users, {} items, {} interactions, tree depth {}",
        a.users,
        a.items,
        data.pairs.len(),
        data.depth
    );
    Ok(())
}
