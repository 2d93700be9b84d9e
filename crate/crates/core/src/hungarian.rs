//! Minimum-cost rectangular assignment (Kuhn–Munkres with potentials).

/// Solves the rectangular assignment problem on a row-major `rows × cols`
/// cost matrix: exactly `min(rows, cols)` pairs, each row and column used at
/// most once, minimizing the summed cost.
///
/// Returns, for each row, the assigned column (if any) and the total cost.
pub fn solve(costs: &[f64], rows: usize, cols: usize) -> (Vec<Option<usize>>, f64) {
    assert_eq!(costs.len(), rows * cols, "cost matrix shape");
    if rows == 0 || cols == 0 {
        return (vec![None; rows], 0.0);
    }
    if rows > cols {
        let transposed: Vec<f64> = (0..cols)
            .flat_map(|c| (0..rows).map(move |r| (r, c)))
            .map(|(r, c)| costs[r * cols + c])
            .collect();
        let (by_col, total) = solve(&transposed, cols, rows);
        let mut by_row = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            if let Some(r) = r {
                by_row[r] = Some(c);
            }
        }
        return (by_row, total);
    }

    // rows <= cols. 1-based arrays; column 0 is the virtual start.
    let (n, m) = (rows, cols);
    let cost = |i: usize, j: usize| costs[(i - 1) * cols + (j - 1)];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0, j) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
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

    let mut by_row = vec![None; n];
    let mut total = 0.0;
    for j in 1..=m {
        if owner[j] != 0 {
            by_row[owner[j] - 1] = Some(j - 1);
            total += cost(owner[j], j);
        }
    }
    (by_row, total)
}

/// Among all minimum-cost assignments, the one that matches the earliest
/// rows first and each to its earliest column.
pub fn solve_lexicographic(costs: &[f64], rows: usize, cols: usize) -> (Vec<Option<usize>>, f64) {
    let (_, best) = solve(costs, rows, cols);
    let tol = 1e-9 * (1.0 + best.abs());
    let mut free_rows: Vec<usize> = (0..rows).collect();
    let mut free_cols: Vec<usize> = (0..cols).collect();
    let mut result = vec![None; rows];
    let mut fixed = 0.0;

    let sub_optimum = |rs: &[usize], cs: &[usize]| -> f64 {
        let sub: Vec<f64> = rs
            .iter()
            .flat_map(|&r| cs.iter().map(move |&c| (r, c)))
            .map(|(r, c)| costs[r * cols + c])
            .collect();
        solve(&sub, rs.len(), cs.len()).1
    };

    while let Some(&row) = free_rows.first() {
        let rest_rows = &free_rows[1..];
        let mut chosen = None;
        for (k, &col) in free_cols.iter().enumerate() {
            let mut rest_cols = free_cols.clone();
            rest_cols.remove(k);
            let total = fixed + costs[row * cols + col] + sub_optimum(rest_rows, &rest_cols);
            if (total - best).abs() <= tol {
                chosen = Some(k);
                break;
            }
        }
        match chosen {
            Some(k) => {
                let col = free_cols.remove(k);
                fixed += costs[row * cols + col];
                result[row] = Some(col);
            }
            // Only possible when rows outnumber the free columns.
            None => debug_assert!(free_rows.len() > free_cols.len()),
        }
        free_rows.remove(0);
        if free_cols.is_empty() {
            break;
        }
    }
    (result, fixed)
}
