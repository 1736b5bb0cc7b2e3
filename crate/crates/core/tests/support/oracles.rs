//! Brute-force reference implementations. Slow on purpose; only for tests.

/// Matched characters of Ratcliff/Obershelp matching, found by scanning
/// every `(i, j, len)` triple for the longest common block. Ties go to the
/// smallest `i`, then the smallest `j`.
pub fn gestalt_matches(a: &[char], b: &[char]) -> usize {
    let mut best = (0, 0, 0);
    for i in 0..a.len() {
        for j in 0..b.len() {
            let mut len = 0;
            while i + len < a.len() && j + len < b.len() && a[i + len] == b[j + len] {
                len += 1;
            }
            if len > best.2 {
                best = (i, j, len);
            }
        }
    }
    let (i, j, len) = best;
    if len == 0 {
        return 0;
    }
    len + gestalt_matches(&a[..i], &b[..j]) + gestalt_matches(&a[i + len..], &b[j + len..])
}

pub fn gestalt(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    2.0 * gestalt_matches(&a, &b) as f64 / (a.len() + b.len()) as f64
}

/// Best total similarity over every one-to-one matching, summed in row
/// order.
pub fn best_assignment_total(sim: &[Vec<f64>]) -> f64 {
    let rows = sim.len();
    let cols = sim.first().map_or(0, Vec::len);
    let mut best = 0.0f64;
    let mut used = vec![false; cols];
    let mut chosen: Vec<Option<usize>> = vec![None; rows];
    // a row may stay unmatched only when there are more rows than columns
    let skips = rows.saturating_sub(cols);
    fn go(
        row: usize,
        skips: usize,
        sim: &[Vec<f64>],
        used: &mut [bool],
        chosen: &mut [Option<usize>],
        best: &mut f64,
    ) {
        if row == sim.len() {
            let total = chosen
                .iter()
                .enumerate()
                .filter_map(|(i, c)| c.map(|j| sim[i][j]))
                .fold(0.0, |acc, v| acc + v);
            if total > *best {
                *best = total;
            }
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                chosen[row] = Some(j);
                go(row + 1, skips, sim, used, chosen, best);
                used[j] = false;
                chosen[row] = None;
            }
        }
        if skips > 0 {
            go(row + 1, skips - 1, sim, used, chosen, best);
        }
    }
    go(0, skips, sim, &mut used, &mut chosen, &mut best);
    best
}

/// Dotted TOC numbers computed by walking the heading list and recounting
/// children from scratch for every entry.
pub fn toc_numbers(levels: &[u8]) -> Vec<String> {
    let parent_of = |k: usize| (0..k).rev().find(|&p| levels[p] < levels[k]);
    (0..levels.len())
        .map(|k| {
            let mut parts = Vec::new();
            let mut cur = Some(k);
            while let Some(c) = cur {
                let parent = parent_of(c);
                let ordinal = (0..=c).filter(|&s| parent_of(s) == parent).count();
                parts.push(ordinal.to_string());
                cur = parent;
            }
            parts.reverse();
            parts.join(".")
        })
        .collect()
}
