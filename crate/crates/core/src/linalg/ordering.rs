//! Reverse Cuthill–McKee bandwidth-reducing ordering.

use std::collections::VecDeque;

use super::sparse::CscMatrix;

/// Symmetric permutation stored as `perm[new] = old` with its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ordering {
    perm: Vec<usize>,
    inv: Vec<usize>,
}

impl Ordering {
    pub fn identity(n: usize) -> Self {
        Ordering {
            perm: (0..n).collect(),
            inv: (0..n).collect(),
        }
    }

    pub fn from_perm(perm: Vec<usize>) -> Self {
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        Ordering { perm, inv }
    }

    /// RCM ordering of the symmetrized pattern of `m`.
    pub fn rcm(m: &CscMatrix) -> Self {
        let n = m.n_cols();
        let adj = symmetric_adjacency(m);
        let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::new();
        let mut nbrs: Vec<usize> = Vec::new();

        // Components are started in order of increasing degree.
        let mut starts: Vec<usize> = (0..n).collect();
        starts.sort_by_key(|&i| (degree[i], i));
        for &s in &starts {
            if visited[s] {
                continue;
            }
            let root = pseudo_peripheral(s, &adj, &degree);
            visited[root] = true;
            queue.push_back(root);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                nbrs.clear();
                nbrs.extend(adj[v].iter().copied().filter(|&w| !visited[w]));
                nbrs.sort_by_key(|&w| (degree[w], w));
                for &w in &nbrs {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
        order.reverse();
        Ordering::from_perm(order)
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inv
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }
}

fn symmetric_adjacency(m: &CscMatrix) -> Vec<Vec<usize>> {
    let n = m.n_cols();
    let mut adj = vec![Vec::new(); n];
    for (i, j, _) in m.iter() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

fn bfs_levels(root: usize, adj: &[Vec<usize>], level: &mut [usize]) -> (usize, Vec<usize>) {
    level.iter_mut().for_each(|l| *l = usize::MAX);
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last = vec![root];
    let mut depth = 0;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                if level[w] > depth {
                    depth = level[w];
                    last.clear();
                }
                if level[w] == depth {
                    last.push(w);
                }
                queue.push_back(w);
            }
        }
    }
    (depth, last)
}

/// George–Liu pseudo-peripheral node search.
fn pseudo_peripheral(start: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut level = vec![usize::MAX; adj.len()];
    let mut root = start;
    let (mut depth, mut last) = bfs_levels(root, adj, &mut level);
    loop {
        let cand = *last
            .iter()
            .min_by_key(|&&w| (degree[w], w))
            .expect("last level is non-empty");
        let (d, l) = bfs_levels(cand, adj, &mut level);
        if d > depth {
            root = cand;
            depth = d;
            last = l;
        } else {
            return root;
        }
    }
}
