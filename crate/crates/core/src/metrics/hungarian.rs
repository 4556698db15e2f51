//! Maximum-weight bipartite matching via the O(n^3) Hungarian algorithm
//! (potentials + augmenting paths on a padded square matrix).

/// Maximum total weight over injective matchings of rows to columns.
/// Weights must be non-negative. Returns (total, assignment) where
/// `assignment[row]` is the matched column or None for padded/unmatched
/// rows.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return (0.0, vec![None; rows]);
    }
    let n = rows.max(cols);
    // Convert to min-cost on a padded square matrix.
    let max_w = weights
        .iter()
        .flat_map(|r| r.iter().copied())
        .fold(0.0f64, f64::max);
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            max_w - weights[i][j]
        } else {
            max_w
        }
    };

    // Standard potentials formulation, 1-indexed internally.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut match_col = vec![0usize; n + 1]; // column -> row (0 = free)
    for i in 1..=n {
        let mut links = vec![0usize; n + 1];
        let mut mins = vec![f64::INFINITY; n + 1];
        let mut visited = vec![false; n + 1];
        match_col[0] = i; // virtual column 0 holds the row being inserted
        let mut marked_i = i;
        let mut marked_j = 0usize;
        loop {
            visited[marked_j] = true;
            let row = marked_i;
            let mut delta = f64::INFINITY;
            let mut next_j = 0;
            for j in 1..=n {
                if visited[j] {
                    continue;
                }
                let reduced = cost(row - 1, j - 1) - u[row] - v[j];
                if reduced < mins[j] {
                    mins[j] = reduced;
                    links[j] = marked_j;
                }
                if mins[j] < delta {
                    delta = mins[j];
                    next_j = j;
                }
            }
            for j in 0..=n {
                if visited[j] {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    mins[j] -= delta;
                }
            }
            marked_j = next_j;
            marked_i = match_col[marked_j];
            if marked_i == 0 {
                break;
            }
        }
        // Augment along the alternating path.
        while marked_j != 0 {
            let prev = links[marked_j];
            match_col[marked_j] = match_col[prev];
            marked_j = prev;
        }
    }

    let mut assignment = vec![None; rows];
    let mut total = 0.0;
    for j in 1..=n {
        let i = match_col[j];
        if i >= 1 && i <= rows && j <= cols {
            assignment[i - 1] = Some(j - 1);
            total += weights[i - 1][j - 1];
        }
    }
    (total, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn brute_force(weights: &[Vec<f64>]) -> f64 {
        let rows = weights.len();
        let cols = weights[0].len();
        fn rec(weights: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == weights.len() {
                return 0.0;
            }
            // Option: leave this row unmatched.
            let mut best = rec(weights, row + 1, used);
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.max(weights[row][j] + rec(weights, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        let _ = (rows, cols);
        rec(weights, 0, &mut vec![false; cols])
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let rows = rng.gen_range(1..=5);
            let cols = rng.gen_range(1..=5);
            let weights: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.gen_range(0..20) as f64).collect())
                .collect();
            let (got, assignment) = max_weight_matching(&weights);
            let expect = brute_force(&weights);
            assert!((got - expect).abs() < 1e-9, "got {got}, expected {expect}");
            // Assignment must be injective and consistent with the total.
            let mut cols_used = std::collections::HashSet::new();
            let mut sum = 0.0;
            for (i, a) in assignment.iter().enumerate() {
                if let Some(j) = a {
                    assert!(cols_used.insert(*j));
                    sum += weights[i][*j];
                }
            }
            assert!((sum - got).abs() < 1e-9);
        }
    }

    #[test]
    fn rectangular_shapes() {
        let weights = vec![vec![5.0, 1.0, 1.0]];
        let (total, assignment) = max_weight_matching(&weights);
        assert_eq!(total, 5.0);
        assert_eq!(assignment, vec![Some(0)]);
    }
}
