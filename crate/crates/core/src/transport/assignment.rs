//! Dense linear assignment by shortest augmenting paths with potentials
//! (the Jonker-Volgenant / Kuhn-Munkres family), `O(N^3)`.

/// Minimizes `sum_i cost[i][perm[i]]` over permutations. `cost` is `n x n`,
/// row-major. Returns `perm` with `perm[row] = column`.
pub fn solve(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    // 1-based bookkeeping; index 0 is the virtual root.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let base = (i0 - 1) * n;
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[base + j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[owner[j] - 1] = j - 1;
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_known_instances() {
        assert_eq!(solve(&[], 0), Vec::<usize>::new());
        assert_eq!(solve(&[5.0], 1), vec![0]);
        assert_eq!(solve(&[4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0], 3), vec![1, 0, 2]);
        assert_eq!(solve(&[1.0, 0.0, 0.0, 1.0], 2), vec![1, 0]);
    }

    #[test]
    fn handles_negative_and_repeated_costs() {
        let perm = solve(&[-1.0, -1.0, -1.0, -1.0], 2);
        let mut sorted = perm.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1]);
        assert_eq!(solve(&[0.0, -5.0, -5.0, 0.0], 2), vec![1, 0]);
    }
}
