use log::warn;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::manifold::{inner, Hyperboloid};

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index per input point.
    pub assignment: Vec<usize>,
    /// Number of assign/update rounds performed.
    pub iterations: usize,
    /// Squared Lorentzian distortion `Σ ‖x - μ‖²_L` after every centroid
    /// update. Lloyd iterations never increase it.
    pub objective: Vec<f64>,
}

/// `‖x - μ‖²_L = -2 - 2<x,μ>_L` on the unit hyperboloid.
pub fn lorentz_sq_dist(x: &[f64], mu: &[f64]) -> f64 {
    (-2.0 - 2.0 * inner(x, mu)).max(0.0)
}

/// Sum of squared hyperbolic distances to the assigned centroid.
pub fn hyperbolic_distortion(points: &[&[f64]], centroids: &[Vec<f64>], assignment: &[usize]) -> f64 {
    let m = Hyperboloid::default();
    points
        .iter()
        .zip(assignment)
        .map(|(p, &c)| m.dist(p, &centroids[c]).powi(2))
        .sum()
}

fn lorentz_distortion(points: &[&[f64]], centroids: &[Vec<f64>], assignment: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &c)| lorentz_sq_dist(p, &centroids[c]))
        .sum()
}

fn nearest(m: &Hyperboloid, p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, mu) in centroids.iter().enumerate() {
        let d = m.dist(p, mu);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Give every empty cluster the point farthest from its own centroid, taken
/// from a cluster that keeps at least one member.
fn fill_empty(m: &Hyperboloid, points: &[&[f64]], centroids: &mut [Vec<f64>], assignment: &mut [usize]) {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    assignment.iter().for_each(|&c| sizes[c] += 1);
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let donor = (0..points.len())
            .filter(|&p| sizes[assignment[p]] >= 2)
            .max_by(|&a, &b| {
                let da = m.dist(points[a], &centroids[assignment[a]]);
                let db = m.dist(points[b], &centroids[assignment[b]]);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("fewer clusters than points");
        sizes[assignment[donor]] -= 1;
        assignment[donor] = empty;
        sizes[empty] = 1;
        centroids[empty] = points[donor].to_vec();
    }
}

/// Lloyd iterations on the hyperboloid: nearest-centroid assignment by
/// geodesic distance (ties to the lowest index) and Lorentzian-centroid
/// updates. Initial centroids are `cluster_count` distinct input points
/// drawn with `seed`.
pub fn hyperbolic_kmeans(
    points: &[&[f64]],
    cluster_count: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansResult> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("k-means over an empty point set".into()));
    }
    if cluster_count == 0 {
        return Err(Error::InvalidParameter("cluster count must be >= 1".into()));
    }
    let k = if cluster_count > points.len() {
        warn!(
            "cluster count {cluster_count} exceeds point count {}; reducing",
            points.len()
        );
        points.len()
    } else {
        cluster_count
    };
    let m = Hyperboloid::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = sample(&mut rng, points.len(), k)
        .into_iter()
        .map(|i| points[i].to_vec())
        .collect();
    let mut assignment: Vec<usize> = Vec::new();
    let mut objective = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter {
        let mut next: Vec<usize> = points.iter().map(|p| nearest(&m, p, &centroids)).collect();
        fill_empty(&m, points, &mut centroids, &mut next);
        if next == assignment {
            break;
        }
        assignment = next;
        iterations += 1;
        let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); k];
        for (p, &c) in points.iter().zip(&assignment) {
            members[c].push(p);
        }
        let mut movement: f64 = 0.0;
        for (c, pts) in members.iter().enumerate() {
            let mu = m.centroid(pts, &vec![1.0; pts.len()])?;
            movement = movement.max(m.dist(&mu, &centroids[c]));
            centroids[c] = mu;
        }
        objective.push(lorentz_distortion(points, &centroids, &assignment));
        if movement < tol {
            break;
        }
    }
    if assignment.is_empty() {
        assignment = points.iter().map(|p| nearest(&m, p, &centroids)).collect();
        fill_empty(&m, points, &mut centroids, &mut assignment);
    }
    Ok(KMeansResult {
        centroids,
        assignment,
        iterations,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_embeddings;
    use proptest::prelude::*;

    fn lift(s: &[f64]) -> Vec<f64> {
        Hyperboloid::default().lift(s)
    }

    #[test]
    fn identical_points_one_cluster() {
        let p = lift(&[0.4, 0.1]);
        let pts: Vec<&[f64]> = vec![&p, &p];
        let r = hyperbolic_kmeans(&pts, 1, 0, 100, 1e-5).unwrap();
        assert_eq!(r.assignment, vec![0, 0]);
        for (a, b) in r.centroids[0].iter().zip(&p) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn separated_pairs_recovered_for_any_seed() {
        let raw = [lift(&[2.0, 0.0]), lift(&[2.1, 0.1]), lift(&[-2.0, 0.0]), lift(&[-2.1, -0.1])];
        let pts: Vec<&[f64]> = raw.iter().map(Vec::as_slice).collect();
        for seed in 0..20 {
            let r = hyperbolic_kmeans(&pts, 2, seed, 100, 1e-5).unwrap();
            let a = &r.assignment;
            assert_eq!(a[0], a[1]);
            assert_eq!(a[2], a[3]);
            assert_ne!(a[0], a[2]);
        }
    }

    #[test]
    fn one_cluster_per_point() {
        let raw = [lift(&[1.0, 0.0]), lift(&[0.0, 1.0]), lift(&[-1.0, 0.5])];
        let pts: Vec<&[f64]> = raw.iter().map(Vec::as_slice).collect();
        let r = hyperbolic_kmeans(&pts, 3, 4, 100, 1e-5).unwrap();
        let mut seen = r.assignment.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2]);
        // every centroid coincides with its point from the start
        assert_eq!(r.iterations, 1);
        for (p, &c) in pts.iter().zip(&r.assignment) {
            assert!(Hyperboloid::default().dist(p, &r.centroids[c]) < 1e-7);
        }
    }

    #[test]
    fn too_many_clusters_reduced() {
        let raw = [lift(&[1.0]), lift(&[-1.0])];
        let pts: Vec<&[f64]> = raw.iter().map(Vec::as_slice).collect();
        let r = hyperbolic_kmeans(&pts, 5, 0, 100, 1e-5).unwrap();
        assert_eq!(r.centroids.len(), 2);
        assert!(hyperbolic_kmeans(&[], 1, 0, 10, 1e-5).is_err());
        assert!(hyperbolic_kmeans(&pts, 0, 0, 10, 1e-5).is_err());
    }

    proptest! {
        #[test]
        fn lorentz_objective_never_increases(seed in 0u64..1000, k in 1usize..12) {
            let t = init_embeddings(20, 20, 3, 1.0, seed).unwrap();
            let pts: Vec<&[f64]> = (0..t.node_count()).map(|i| t.node(i)).collect();
            let r = hyperbolic_kmeans(&pts, k, seed, 100, 1e-9).unwrap();
            for w in r.objective.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", r.objective);
            }
            let mut sizes = vec![0; r.centroids.len()];
            r.assignment.iter().for_each(|&c| sizes[c] += 1);
            prop_assert!(sizes.iter().all(|&s| s > 0));
        }
    }
}
