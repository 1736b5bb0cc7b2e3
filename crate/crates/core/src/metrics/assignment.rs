//! Maximum-weight one-to-one matching (Hungarian method, O(n^3)).

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Matched `(row, column)` pairs inside the original matrix, by row.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of matched similarities, padding excluded, accumulated in row
    /// order.
    pub total: f64,
}

/// Solve the rectangular assignment problem maximizing total similarity.
/// `sim[i][j]` is the similarity of prediction `i` and gold `j`; missing rows
/// or columns are padded with zeros.
pub fn optimal_assignment(sim: &[Vec<f64>]) -> Assignment {
    let rows = sim.len();
    let cols = sim.first().map_or(0, Vec::len);
    assert!(sim.iter().all(|r| r.len() == cols), "ragged similarity matrix");
    let n = rows.max(cols);
    if n == 0 || rows == 0 || cols == 0 {
        return Assignment {
            pairs: Vec::new(),
            total: 0.0,
        };
    }
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            -sim[i][j]
        } else {
            0.0
        }
    };

    // potentials and matching, 1-based with 0 as the virtual column
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_match = vec![usize::MAX; n];
    for j in 1..=n {
        if col_owner[j] > 0 {
            row_match[col_owner[j] - 1] = j - 1;
        }
    }
    let pairs: Vec<(usize, usize)> = row_match
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < rows && j < cols)
        .map(|(i, &j)| (i, j))
        .collect();
    let total = pairs.iter().map(|&(i, j)| sim[i][j]).sum();
    Assignment { pairs, total }
}
