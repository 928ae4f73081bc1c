//! Integer apportionment and constrained category → operation allocation.

/// Splits `total` into integer parts proportional to `weights` by the
/// largest-remainder method. Ties go to the earlier weight.
///
/// Returns `None` if a weight is negative or not finite. All-zero weights
/// yield all-zero parts (only valid for `total == 0`).
pub fn apportion(total: usize, weights: &[f64]) -> Option<Vec<usize>> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return None;
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return (total == 0).then(|| vec![0; weights.len()]);
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut parts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // stable sort keeps listing order among equal remainders
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).expect("finite remainders")
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        parts[i] += 1;
    }
    Some(parts)
}

/// Finds a non-negative integer matrix `flow[row][col]` with row sums
/// `supply`, column sums `demand`, and zeros wherever `compatible` is false.
///
/// Starts from a proportional greedy fill (most constrained rows first) so
/// rows spread across their columns, then completes it with augmenting
/// paths. Returns `None` when no such matrix exists.
pub fn allocate(
    supply: &[usize],
    demand: &[usize],
    compatible: impl Fn(usize, usize) -> bool,
) -> Option<Vec<Vec<usize>>> {
    let (rows, cols) = (supply.len(), demand.len());
    if supply.iter().sum::<usize>() != demand.iter().sum::<usize>() {
        return None;
    }
    let mut flow = vec![vec![0usize; cols]; rows];
    let mut left = demand.to_vec();

    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by_key(|&r| ((0..cols).filter(|&c| compatible(r, c)).count(), r));
    for &r in &order {
        let open: Vec<usize> = (0..cols)
            .filter(|&c| compatible(r, c) && left[c] > 0)
            .collect();
        let cap: usize = open.iter().map(|&c| left[c]).sum();
        let want = supply[r].min(cap);
        let weights: Vec<f64> = open.iter().map(|&c| left[c] as f64).collect();
        let shares = apportion(want, &weights)?;
        for (&c, s) in open.iter().zip(shares) {
            let s = s.min(left[c]);
            flow[r][c] += s;
            left[c] -= s;
        }
    }

    while let Some(start) = (0..rows).find(|&r| flow[r].iter().sum::<usize>() < supply[r]) {
        let path = augmenting_path(start, &flow, &left, &compatible)?;
        // path alternates row, col, row, col, ..., col
        for pair in path.windows(2).enumerate() {
            let (i, w) = pair;
            if i % 2 == 0 {
                flow[w[0]][w[1]] += 1;
            } else {
                flow[w[1]][w[0]] -= 1;
            }
        }
        left[*path.last().expect("non-empty path")] -= 1;
    }
    Some(flow)
}

/// Breadth-first search from a short row to a column with spare demand.
fn augmenting_path(
    start: usize,
    flow: &[Vec<usize>],
    left: &[usize],
    compatible: &impl Fn(usize, usize) -> bool,
) -> Option<Vec<usize>> {
    let (rows, cols) = (flow.len(), left.len());
    let mut row_parent: Vec<Option<usize>> = vec![None; rows];
    let mut col_parent: Vec<Option<usize>> = vec![None; cols];
    let mut seen_row = vec![false; rows];
    seen_row[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(r) = queue.pop_front() {
        for c in 0..cols {
            if col_parent[c].is_some() || !compatible(r, c) {
                continue;
            }
            col_parent[c] = Some(r);
            if left[c] > 0 {
                let mut path = vec![c];
                let mut col = c;
                loop {
                    let row = col_parent[col].expect("visited column has a parent");
                    path.push(row);
                    match row_parent[row] {
                        Some(prev_col) => {
                            path.push(prev_col);
                            col = prev_col;
                        }
                        None => break,
                    }
                }
                path.reverse();
                return Some(path);
            }
            for (r2, row) in flow.iter().enumerate() {
                if !seen_row[r2] && row[c] > 0 {
                    seen_row[r2] = true;
                    row_parent[r2] = Some(c);
                    queue.push_back(r2);
                }
            }
        }
    }
    None
}
