//! Reverse Cuthill-McKee ordering.

use std::collections::VecDeque;

use super::{DelaunayGraph, VertexSet};

/// RCM ordering of the subgraph induced by `active`.
///
/// Returns the active vertices (global indices) in their new order.
pub fn rcm_order(graph: &DelaunayGraph, active: &VertexSet) -> Vec<usize> {
    let members: Vec<usize> = active.iter().collect();
    let mut local = vec![usize::MAX; graph.num_vertices()];
    for (i, &v) in members.iter().enumerate() {
        local[v] = i;
    }
    let adjacency: Vec<Vec<usize>> = members
        .iter()
        .map(|&v| {
            graph
                .neighbors(v)
                .iter()
                .filter_map(|&w| (local[w] != usize::MAX).then_some(local[w]))
                .collect()
        })
        .collect();
    rcm_order_local(&adjacency).into_iter().map(|i| members[i]).collect()
}

/// RCM ordering of a graph given by adjacency lists.
///
/// `result[k]` is the original index placed at position `k`. Each connected
/// component starts from a pseudo-peripheral vertex.
pub fn rcm_order_local(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adjacency[v].len(), v));

    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        let root = pseudo_peripheral(adjacency, start, &visited);
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adjacency[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adjacency[w].len(), w));
            next.dedup();
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Bandwidth `max |pos(u) - pos(v)|` over edges, with `order[k]` the vertex at position `k`.
pub fn bandwidth(adjacency: &[Vec<usize>], order: &[usize]) -> usize {
    let mut pos = vec![0; adjacency.len()];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    adjacency
        .iter()
        .enumerate()
        .flat_map(|(v, nb)| nb.iter().map(move |&w| (v, w)))
        .map(|(v, w)| pos[v].abs_diff(pos[w]))
        .max()
        .unwrap_or(0)
}

/// BFS level structure from `root` within the unvisited component.
fn levels(adjacency: &[Vec<usize>], root: usize, blocked: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; adjacency.len()];
    seen[root] = true;
    let mut out = vec![vec![root]];
    loop {
        let mut next = Vec::new();
        for &v in out.last().unwrap() {
            for &w in &adjacency[v] {
                if !seen[w] && !blocked[w] {
                    seen[w] = true;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return out;
        }
        out.push(next);
    }
}

/// George-Liu search for a vertex of (nearly) maximal eccentricity.
fn pseudo_peripheral(adjacency: &[Vec<usize>], start: usize, blocked: &[bool]) -> usize {
    let mut root = start;
    let mut depth = levels(adjacency, root, blocked).len();
    loop {
        let structure = levels(adjacency, root, blocked);
        let candidate = *structure
            .last()
            .unwrap()
            .iter()
            .min_by_key(|&&v| (adjacency[v].len(), v))
            .unwrap();
        let candidate_depth = levels(adjacency, candidate, blocked).len();
        if candidate_depth > depth {
            root = candidate;
            depth = candidate_depth;
        } else {
            return root;
        }
    }
}
