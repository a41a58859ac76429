use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use herec_core::data::{split_pairs, LoadReport};
use herec_core::hiercluster::{HierarchyTree, PathStep};
use herec_core::model::{init_embeddings, propagate};
use herec_core::pipeline::evaluate;
use herec_core::recommend::Provenance;
use herec_core::synth::{generate, SynthConfig};
use herec_server::{empty_state, router, MetaResponse, RecResponse, ServingState, SharedState};
use tower::ServiceExt;

fn fixture() -> ServingState {
    let data = generate(&SynthConfig {
        users: 30,
        items: 50,
        seed: 4,
        ..Default::default()
    })
    .unwrap();
    let graph = split_pairs(&data.pairs, 0.8, 1, &mut LoadReport::default()).unwrap();
    let table = init_embeddings(graph.user_count(), graph.item_count(), 8, 0.5, 2).unwrap();
    let points = propagate(&table, &graph, 2).points;
    let tree = HierarchyTree::build(&points, 0).unwrap();
    let report = evaluate(&points, &graph, &[10, 20]).unwrap();
    ServingState::new(points, graph, tree, Some(report)).unwrap()
}

fn loaded() -> SharedState {
    let state = empty_state();
    state.set(fixture()).unwrap();
    state
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    let resp = app
        .clone()
        .oneshot(Request::builder().uri(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
}

async fn get_json<T: serde::de::DeserializeOwned>(app: &Router, uri: &str) -> T {
    let (status, body) = get(app, uri).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    serde_json::from_slice(&body).unwrap()
}

#[tokio::test]
async fn unavailable_before_load() {
    let app = router(empty_state(), None);
    for uri in ["/api/meta", "/api/users/0/recommendations", "/api/tree/path/u0"] {
        assert_eq!(get(&app, uri).await.0, StatusCode::SERVICE_UNAVAILABLE, "{uri}");
    }
}

#[tokio::test]
async fn meta_matches_dataset() {
    let state = loaded();
    let app = router(state.clone(), None);
    let meta: MetaResponse = get_json(&app, "/api/meta").await;
    assert_eq!(meta.user_count, 30);
    assert_eq!(meta.item_count, 50);
    assert_eq!(meta.tree_layers, (80f64).log2().ceil() as usize);
    assert!(meta.metric_summary.is_some());
}

#[tokio::test]
async fn recommendation_provenance_and_determinism() {
    let app = router(loaded(), None);
    let r: RecResponse = get_json(&app, "/api/users/3/recommendations?k=10").await;
    assert_eq!((r.user, r.k, r.tau, r.layer), (3, 10, 0.0, None));
    assert_eq!(r.items.len(), 10);
    assert!(r.items.iter().all(|i| i.provenance == Provenance::Retained));

    let r: RecResponse = get_json(&app, "/api/users/3/recommendations?k=10&tau=1&layer=1&seed=7").await;
    assert!(r.items.iter().all(|i| i.provenance == Provenance::Explored));

    let uri = "/api/users/5/recommendations?k=10&tau=0.5&layer=2&seed=3";
    let (_, a) = get(&app, uri).await;
    let (_, b) = get(&app, uri).await;
    assert_eq!(a, b);
    let r: RecResponse = serde_json::from_slice(&a).unwrap();
    assert_eq!(r.items.iter().filter(|i| i.provenance == Provenance::Retained).count(), 5);

    let d: RecResponse = get_json(&app, "/api/users/5/recommendations").await;
    assert_eq!(d.k, 20);
}

#[tokio::test]
async fn recommendation_errors() {
    let app = router(loaded(), None);
    let cases = [
        ("/api/users/30/recommendations", StatusCode::NOT_FOUND),
        ("/api/users/abc/recommendations", StatusCode::NOT_FOUND),
        ("/api/users/0/recommendations?tau=1.5&layer=1", StatusCode::BAD_REQUEST),
        ("/api/users/0/recommendations?tau=-0.1&layer=1", StatusCode::BAD_REQUEST),
        ("/api/users/0/recommendations?tau=0.5", StatusCode::BAD_REQUEST),
        ("/api/users/0/recommendations?tau=0.5&layer=0", StatusCode::BAD_REQUEST),
        ("/api/users/0/recommendations?tau=0.5&layer=99", StatusCode::BAD_REQUEST),
        ("/api/users/0/recommendations?k=0", StatusCode::BAD_REQUEST),
        ("/api/users/0/recommendations?tau=x", StatusCode::BAD_REQUEST),
    ];
    for (uri, want) in cases {
        assert_eq!(get(&app, uri).await.0, want, "{uri}");
    }
}

#[tokio::test]
async fn tree_paths() {
    let state = loaded();
    let app = router(state.clone(), None);
    let depth = state.get().unwrap().tree().depth();
    let path: Vec<PathStep> = get_json(&app, "/api/tree/path/u0").await;
    assert_eq!(path.len(), depth);
    assert!(path.windows(2).all(|w| w[1].layer < w[0].layer));
    assert_eq!(path.last().unwrap().layer, 1);
    let by_index: Vec<PathStep> = get_json(&app, "/api/tree/path/0").await;
    assert_eq!(path, by_index);
    assert_eq!(get(&app, "/api/tree/path/u999").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/tree/path/zz").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/tree/path/80").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn siblings_share_ancestors() {
    let state = loaded();
    let app = router(state.clone(), None);
    let tree = state.get().unwrap().tree();
    let leaves = tree.layer(tree.depth());
    let (a, b) = (0..leaves.len())
        .flat_map(|x| (x + 1..leaves.len()).map(move |y| (x, y)))
        .find(|&(x, y)| leaves[x].parent == leaves[y].parent)
        .map(|(x, y)| (tree.leaves()[x], tree.leaves()[y]))
        .expect("some parent has two children");
    let pa: Vec<PathStep> = get_json(&app, &format!("/api/tree/path/{a}")).await;
    let pb: Vec<PathStep> = get_json(&app, &format!("/api/tree/path/{b}")).await;
    assert_ne!(pa[0].node_index, pb[0].node_index);
    assert_eq!(pa[1..], pb[1..]);
}

#[tokio::test]
async fn four_leaf_chain() {
    let data = herec_core::model::EmbeddingTable::from_raw(
        2,
        2,
        2,
        [[0.1, 0.0], [0.2, 0.0], [-3.0, 0.1], [-3.1, 0.0]]
            .iter()
            .flat_map(|s| herec_core::manifold::Hyperboloid::default().lift(s))
            .collect(),
    )
    .unwrap();
    let graph = herec_core::data::InteractionGraph::from_lists(2, 2, vec![vec![0], vec![1]], vec![]).unwrap();
    let tree = HierarchyTree::build(&data, 0).unwrap();
    let state = empty_state();
    state.set(ServingState::new(data, graph, tree, None).unwrap()).unwrap();
    let app = router(state, None);
    let path: Vec<PathStep> = get_json(&app, "/api/tree/path/i1").await;
    assert_eq!(path.iter().map(|p| p.layer).collect::<Vec<_>>(), vec![3, 2, 1]);
}

#[tokio::test]
async fn concurrent_requests_agree() {
    let app = router(loaded(), None);
    let uri = "/api/users/7/recommendations?k=15&tau=0.4&layer=3&seed=11";
    let (_, want) = get(&app, uri).await;
    let want = Arc::new(want);
    let handles: Vec<_> = (0..16)
        .map(|_| {
            let app = app.clone();
            let want = want.clone();
            tokio::spawn(async move {
                let (status, body) = get(&app, uri).await;
                assert_eq!(status, StatusCode::OK);
                assert_eq!(&body, &*want);
            })
        })
        .collect();
    for h in handles {
        h.await.unwrap();
    }
}

#[tokio::test]
async fn static_files_and_cors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>ok</html>").unwrap();
    let app = router(loaded(), Some(dir.path().to_path_buf()));
    let (status, body) = get(&app, "/index.html").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"<html>ok</html>");
    let resp = app
        .oneshot(
            Request::builder()
                .uri("/api/meta")
                .header("origin", "http://localhost:5173")
                .body(Body::empty())
                .unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
}
