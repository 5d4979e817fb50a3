//! Exact linear assignment by shortest augmenting paths (Hungarian method).

use ndarray::Array2;

/// Column assigned to each row minimising the total cost of a square matrix.
///
/// O(m^3) with row and column potentials.
pub fn min_cost_assignment(cost: &Array2<f64>) -> Vec<usize> {
    let m = cost.nrows();
    assert_eq!(m, cost.ncols(), "assignment needs a square cost matrix");
    // 1-based arrays; index 0 is the virtual source column
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=m {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; m];
    for j in 1..=m {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(cost: &Array2<f64>) -> f64 {
        fn rec(cost: &Array2<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.nrows() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cost.ncols() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[[row, j]] + rec(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(cost, 0, &mut vec![false; cost.ncols()])
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in 1..=7 {
            for _ in 0..20 {
                let cost = Array2::from_shape_fn((m, m), |_| rng.gen_range(0.0..10.0));
                let a = min_cost_assignment(&cost);
                let mut seen = a.clone();
                seen.sort();
                assert_eq!(seen, (0..m).collect::<Vec<_>>());
                let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
                assert!((total - brute_force(&cost)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn identity_is_optimal_for_diagonal_zero() {
        let cost = Array2::from_shape_fn((4, 4), |(i, j)| if i == j { 0.0 } else { 1.0 });
        assert_eq!(min_cost_assignment(&cost), vec![0, 1, 2, 3]);
    }
}
