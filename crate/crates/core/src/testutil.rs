use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{laplacian, GraphLaplacian, LaplacianKind};
use crate::sparse::SparseSymMatrix;

/// Connected weighted graph: a path backbone plus `extra` random chords.
pub fn random_connected_graph(n: usize, extra: usize, seed: u64) -> SparseSymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut upper = Vec::new();
    for i in 0..n.saturating_sub(1) {
        upper.push((i, i + 1, rng.gen_range(0.2..1.0)));
    }
    for _ in 0..extra {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i != j {
            upper.push((i.min(j), i.max(j), rng.gen_range(0.2..1.0)));
        }
    }
    SparseSymMatrix::from_upper_triplets(n, &upper).unwrap()
}

pub fn random_laplacian(n: usize, seed: u64, kind: LaplacianKind) -> GraphLaplacian {
    laplacian(&random_connected_graph(n, n, seed), kind).unwrap()
}

pub fn two_node() -> GraphLaplacian {
    let a = SparseSymMatrix::from_upper_triplets(2, &[(0, 1, 1.0)]).unwrap();
    laplacian(&a, LaplacianKind::Combinatorial).unwrap()
}

pub fn path(n: usize, kind: LaplacianKind) -> GraphLaplacian {
    let upper: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    laplacian(&SparseSymMatrix::from_upper_triplets(n, &upper).unwrap(), kind).unwrap()
}

pub fn random_signal(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_distribution(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}
