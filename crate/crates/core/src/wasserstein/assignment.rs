//! Dense linear assignment by shortest augmenting paths with potentials
//! (the O(n^3) Hungarian method).

use alloc::vec;
use alloc::vec::Vec;

/// Minimum-cost perfect matching on a row-major `n x n` matrix. Returns
/// `(total cost, column assigned to each row)`.
pub fn solve(n: usize, cost: &[f64]) -> (f64, Vec<usize>) {
    debug_assert_eq!(cost.len(), n * n);
    if n == 0 {
        return (0.0, Vec::new());
    }
    // 1-based arrays; column 0 is the virtual source
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - ui0 - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    // sum from the matrix rather than the potentials: exact to rounding
    let total = col_of.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    (total, col_of)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_matrices() {
        assert_eq!(solve(1, &[3.5]).0, 3.5);
        let (c, p) = solve(2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(c, 0.0);
        assert_eq!(p, vec![1, 0]);
        let m = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        assert_eq!(solve(3, &m).0, 5.0);
    }

    #[test]
    fn result_is_a_permutation() {
        let n = 12;
        let m: Vec<f64> = (0..n * n).map(|k| ((k * 7919) % 101) as f64).collect();
        let (_, p) = solve(n, &m);
        let mut seen = vec![false; n];
        for j in p {
            assert!(!seen[j]);
            seen[j] = true;
        }
    }
}
