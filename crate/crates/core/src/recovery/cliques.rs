//! Maximal clique enumeration (Bron–Kerbosch with pivoting).

use std::collections::BTreeSet;

/// All maximal cliques of an undirected graph given as adjacency sets over
/// node indices `0..adj.len()`. Cliques come out as sorted index lists in a
/// deterministic order.
pub fn maximal_cliques(adj: &[BTreeSet<usize>]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if adj.is_empty() {
        return out;
    }
    let p: BTreeSet<usize> = (0..adj.len()).collect();
    expand(adj, &mut Vec::new(), p, BTreeSet::new(), &mut out);
    for c in &mut out {
        c.sort_unstable();
    }
    out.sort();
    out
}

fn expand(
    adj: &[BTreeSet<usize>],
    r: &mut Vec<usize>,
    mut p: BTreeSet<usize>,
    mut x: BTreeSet<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() {
        if x.is_empty() {
            out.push(r.clone());
        }
        return;
    }
    // pivot: vertex of P ∪ X with most neighbours in P
    let pivot = p
        .iter()
        .chain(x.iter())
        .copied()
        .max_by_key(|&u| (adj[u].intersection(&p).count(), std::cmp::Reverse(u)))
        .expect("P is non-empty");
    let candidates: Vec<usize> = p.difference(&adj[pivot]).copied().collect();
    for v in candidates {
        r.push(v);
        let np = p.intersection(&adj[v]).copied().collect();
        let nx = x.intersection(&adj[v]).copied().collect();
        expand(adj, r, np, nx, out);
        r.pop();
        p.remove(&v);
        x.insert(v);
    }
}
