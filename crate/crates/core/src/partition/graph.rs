//! Multi-source hop distances and Lloyd aggregation.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Directed edges `(i, j)` with `a_ij != 0`, `i != j`, in sorted order.
pub fn matrix_edges(a: &SparseMatrix) -> Vec<(usize, usize)> {
    a.adjacency()
        .into_iter()
        .enumerate()
        .flat_map(|(i, list)| list.into_iter().map(move |j| (i, j)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearestCenters {
    /// Hop distance to the nearest center.
    pub distances: Vec<usize>,
    /// Node id of the nearest center.
    pub nearest: Vec<usize>,
    /// Number of edge relaxation checks performed.
    pub relaxations: u64,
}

/// Multi-source shortest hop distances by repeated sweeps over `edges` with
/// strict relaxation, so the first claimant of a tied node keeps it.
pub fn modified_bellman_ford(
    n: usize,
    edges: &[(usize, usize)],
    centers: &[usize],
) -> Result<NearestCenters> {
    let result = sweep(n, edges, centers)?;
    if let Some(node) = result.distances.iter().position(|&d| d == usize::MAX) {
        return Err(Error::Disconnected { node });
    }
    Ok(result)
}

/// Same sweeps, leaving unreachable nodes at distance `usize::MAX`.
fn sweep(n: usize, edges: &[(usize, usize)], centers: &[usize]) -> Result<NearestCenters> {
    if centers.is_empty() {
        return Err(Error::NoCenters);
    }
    let mut g = vec![usize::MAX; n];
    let mut nearest = vec![usize::MAX; n];
    for &c in centers {
        if c >= n {
            return Err(Error::InvalidPartition(format!("center {c} out of range for {n} nodes")));
        }
        g[c] = 0;
        nearest[c] = c;
    }
    let mut relaxations = 0u64;
    loop {
        let mut finished = true;
        for &(i, j) in edges {
            relaxations += 1;
            if g[i] != usize::MAX && g[i] + 1 < g[j] {
                g[j] = g[i] + 1;
                nearest[j] = nearest[i];
                finished = false;
            }
        }
        if finished {
            break;
        }
    }
    Ok(NearestCenters {
        distances: g,
        nearest,
        relaxations,
    })
}

#[derive(Debug, Clone)]
pub struct LloydOptions {
    pub ratio: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LloydOptions {
    pub fn new(ratio: f64, seed: u64) -> Self {
        Self {
            ratio,
            iterations: 5,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Aggregation {
    /// Subdomain index of every node.
    pub owner: Vec<usize>,
    /// Center node of each subdomain.
    pub centers: Vec<usize>,
    pub relaxations: u64,
    pub warnings: Vec<String>,
}

/// Lloyd aggregation of the graph of `a` with `max(1, round(ratio * n))` seeded centers.
pub fn lloyd_aggregate(a: &SparseMatrix, opts: &LloydOptions) -> Result<Aggregation> {
    if !(opts.ratio > 0.0 && opts.ratio < 1.0) {
        return Err(Error::InvalidPartition(format!(
            "ratio must lie in (0, 1), got {}",
            opts.ratio
        )));
    }
    let n = a.n_rows();
    if n == 0 {
        return Err(Error::InvalidPartition("empty graph".into()));
    }
    let s = ((opts.ratio * n as f64).round() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut centers = sample(&mut rng, n, s).into_vec();
    let edges = matrix_edges(a);
    let extra = cover_components(n, &edges, &mut centers);
    centers.sort_unstable();
    let mut agg = lloyd_from_centers(n, &edges, centers, opts.iterations, &mut rng)?;
    if extra > 0 {
        agg.warnings.insert(
            0,
            format!("graph is disconnected; added {extra} centers so every component has one"),
        );
    }
    Ok(agg)
}

/// Adds the lowest-index node of every connected component that holds no center.
fn cover_components(n: usize, edges: &[(usize, usize)], centers: &mut Vec<usize>) -> usize {
    let mut adjacency = vec![Vec::new(); n];
    for &(i, j) in edges {
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    let mut has_center = vec![false; n];
    for &c in centers.iter() {
        has_center[c] = true;
    }
    let mut seen = vec![false; n];
    let mut added = 0;
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![root];
        let mut covered = false;
        while let Some(v) = stack.pop() {
            covered |= has_center[v];
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if !covered {
            centers.push(root);
            added += 1;
        }
    }
    added
}

/// Lloyd iterations from explicit initial centers.
pub fn lloyd_from_centers<R: Rng>(
    n: usize,
    edges: &[(usize, usize)],
    mut centers: Vec<usize>,
    iterations: usize,
    rng: &mut R,
) -> Result<Aggregation> {
    let mut warnings = Vec::new();
    let mut relaxations = 0u64;
    let mut assignment = modified_bellman_ford(n, edges, &centers)?;
    relaxations += assignment.relaxations;
    for it in 0..iterations.max(1) {
        if it > 0 {
            assignment = modified_bellman_ford(n, edges, &centers)?;
            relaxations += assignment.relaxations;
        }
        reseed_empty(n, &mut centers, &mut assignment, edges, rng, &mut warnings, &mut relaxations)?;

        let mut border = Vec::new();
        let mut in_border = vec![false; n];
        for &(i, j) in edges {
            relaxations += 1;
            if assignment.nearest[i] != assignment.nearest[j] {
                for v in [i, j] {
                    if !in_border[v] {
                        in_border[v] = true;
                        border.push(v);
                    }
                }
            }
        }
        if border.is_empty() || it + 1 == iterations.max(1) {
            break;
        }
        // Components lying inside a single subdomain have no border and stay at usize::MAX.
        let from_border = sweep(n, edges, &border)?;
        relaxations += from_border.relaxations;

        // Farthest node from the border within each subdomain, lowest index on ties.
        let slot = center_slots(n, &centers);
        let mut best: Vec<Option<usize>> = vec![None; centers.len()];
        for v in 0..n {
            let k = slot[assignment.nearest[v]];
            match best[k] {
                Some(b) if from_border.distances[b] >= from_border.distances[v] => {}
                _ => best[k] = Some(v),
            }
        }
        let mut next: Vec<usize> = best.into_iter().map(|b| b.expect("non-empty subdomain")).collect();
        next.sort_unstable();
        if next == centers {
            break;
        }
        centers = next;
    }
    let slot = center_slots(n, &centers);
    let owner = assignment.nearest.iter().map(|&c| slot[c]).collect();
    Ok(Aggregation {
        owner,
        centers,
        relaxations,
        warnings,
    })
}

fn center_slots(n: usize, centers: &[usize]) -> Vec<usize> {
    let mut slot = vec![usize::MAX; n];
    for (k, &c) in centers.iter().enumerate() {
        slot[c] = k;
    }
    slot
}

fn reseed_empty<R: Rng>(
    n: usize,
    centers: &mut [usize],
    assignment: &mut NearestCenters,
    edges: &[(usize, usize)],
    rng: &mut R,
    warnings: &mut Vec<String>,
    relaxations: &mut u64,
) -> Result<()> {
    for _ in 0..centers.len() {
        let slot = center_slots(n, centers);
        let mut size = vec![0usize; centers.len()];
        for &c in &assignment.nearest {
            size[slot[c]] += 1;
        }
        let Some(empty) = size.iter().position(|&s| s == 0) else {
            return Ok(());
        };
        let largest = (0..centers.len()).max_by_key(|&k| (size[k], usize::MAX - k)).unwrap();
        let members: Vec<usize> = (0..n)
            .filter(|&v| assignment.nearest[v] == centers[largest] && v != centers[largest])
            .collect();
        if members.is_empty() {
            return Err(Error::InvalidPartition("cannot re-seed an empty subdomain".into()));
        }
        let pick = members[rng.random_range(0..members.len())];
        warnings.push(format!(
            "subdomain {empty} became empty; re-seeded at node {pick} from subdomain {largest}"
        ));
        centers[empty] = pick;
        centers.sort_unstable();
        *assignment = modified_bellman_ford(n, edges, centers)?;
        *relaxations += assignment.relaxations;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    fn path_edges(n: usize) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for i in 0..n {
            if i > 0 {
                e.push((i, i - 1));
            }
            if i + 1 < n {
                e.push((i, i + 1));
            }
        }
        e
    }

    #[test]
    fn path_with_two_centers() {
        let r = modified_bellman_ford(5, &path_edges(5), &[0, 4]).unwrap();
        assert_eq!(r.distances, vec![0, 1, 2, 1, 0]);
        assert_eq!(r.nearest, vec![0, 0, 0, 4, 4]);
    }

    #[test]
    fn all_nodes_centers() {
        let r = modified_bellman_ford(5, &path_edges(5), &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(r.distances, vec![0; 5]);
        assert_eq!(r.nearest, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn errors() {
        assert!(matches!(modified_bellman_ford(3, &[], &[]), Err(Error::NoCenters)));
        assert!(matches!(
            modified_bellman_ford(3, &[(0, 1), (1, 0)], &[0]),
            Err(Error::Disconnected { node: 2 })
        ));
    }

    #[test]
    fn matches_bfs_on_random_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200;
        let mut e = Vec::new();
        for i in 1..n {
            let j = rng.random_range(0..i);
            e.push((i, j));
            e.push((j, i));
        }
        for _ in 0..150 {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            if i != j {
                e.push((i, j));
                e.push((j, i));
            }
        }
        e.sort_unstable();
        e.dedup();
        let centers = [3, 77, 150];
        let r = modified_bellman_ford(n, &e, &centers).unwrap();

        let mut adj = vec![Vec::new(); n];
        for &(i, j) in &e {
            adj[i].push(j);
        }
        let mut dist = vec![usize::MAX; n];
        let mut q = VecDeque::new();
        for &c in &centers {
            dist[c] = 0;
            q.push_back(c);
        }
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        assert_eq!(r.distances, dist);
        for v in 0..n {
            assert!(centers.contains(&r.nearest[v]));
        }
    }

    #[test]
    fn path_of_ten_splits_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let agg = lloyd_from_centers(10, &path_edges(10), vec![0, 9], 5, &mut rng).unwrap();
        assert_eq!(agg.owner, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn single_center_owns_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let agg = lloyd_from_centers(6, &path_edges(6), vec![2], 5, &mut rng).unwrap();
        assert_eq!(agg.owner, vec![0; 6]);
    }

    #[test]
    fn disconnected_components_each_get_a_center() {
        let mut t = Vec::new();
        for (lo, hi) in [(0usize, 6usize), (6, 10), (10, 11)] {
            for i in lo..hi {
                t.push((i, i, 2.0));
                if i + 1 < hi {
                    t.push((i, i + 1, -1.0));
                    t.push((i + 1, i, -1.0));
                }
            }
        }
        let a = SparseMatrix::from_triplets(11, 11, &t).unwrap();
        let agg = lloyd_aggregate(&a, &LloydOptions::new(0.05, 3)).unwrap();
        assert_eq!(agg.centers.len(), 3);
        assert!(agg.warnings[0].contains("disconnected"));
        let comp = |v: usize| if v < 6 { 0 } else if v < 10 { 1 } else { 2 };
        for v in 0..11 {
            assert_eq!(comp(agg.centers[agg.owner[v]]), comp(v));
        }
    }

    #[test]
    fn bad_ratio_rejected() {
        let a = SparseMatrix::identity(4);
        assert!(lloyd_aggregate(&a, &LloydOptions::new(0.0, 1)).is_err());
        assert!(lloyd_aggregate(&a, &LloydOptions::new(1.0, 1)).is_err());
    }
}
