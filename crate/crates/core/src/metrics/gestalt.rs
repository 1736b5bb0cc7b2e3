//! Ratcliff/Obershelp gestalt pattern matching over unicode scalar values.

/// Longest common substring of `a` and `b` as `(start_a, start_b, len)`.
/// Ties go to the leftmost start in `a`, then the leftmost start in `b`.
fn longest_common_substring(a: &[char], b: &[char]) -> (usize, usize, usize) {
    let mut best = (0, 0, 0);
    // run[j + 1] = length of the common suffix ending at a[i], b[j]
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb { prev[j] + 1 } else { 0 };
            let len = cur[j + 1];
            if len > best.2 {
                best = (i + 1 - len, j + 1 - len, len);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Total characters matched by recursive longest-common-substring
/// decomposition.
pub fn matched_chars(a: &[char], b: &[char]) -> usize {
    let mut total = 0;
    let mut stack = vec![(a, b)];
    while let Some((a, b)) = stack.pop() {
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let (i, j, len) = longest_common_substring(a, b);
        if len == 0 {
            continue;
        }
        total += len;
        stack.push((&a[..i], &b[..j]));
        stack.push((&a[i + len..], &b[j + len..]));
    }
    total
}

/// Similarity `2M / (|a| + |b|)` in `[0, 1]`. Two empty strings are
/// identical (1.0); one empty string matches nothing (0.0).
pub fn gestalt_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let m = matched_chars(&a, &b);
    2.0 * m as f64 / (a.len() + b.len()) as f64
}

/// Mean of heading and body similarity for two `(heading, body)` facts.
pub fn section_similarity(p: (&str, &str), g: (&str, &str)) -> f64 {
    (gestalt_similarity(p.0, g.0) + gestalt_similarity(p.1, g.1)) / 2.0
}
