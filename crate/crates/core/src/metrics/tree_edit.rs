//! Ordered labelled trees and their edit distance (Zhang–Shasha) with unit
//! insert/delete cost and substitution cost 1 iff labels differ.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree<L> {
    pub label: L,
    pub children: Vec<Tree<L>>,
}

impl<L> Tree<L> {
    pub fn leaf(label: L) -> Self {
        Tree { label, children: Vec::new() }
    }

    pub fn node(label: L, children: Vec<Tree<L>>) -> Self {
        Tree { label, children }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Tree::size).sum::<usize>()
    }
}

/// Postorder labels and leftmost-leaf indices.
struct Flat<'a, L> {
    labels: Vec<&'a L>,
    leftmost: Vec<usize>,
}

impl<'a, L> Flat<'a, L> {
    fn new(t: &'a Tree<L>) -> Self {
        let mut f = Flat { labels: Vec::new(), leftmost: Vec::new() };
        f.visit(t);
        f
    }

    fn visit(&mut self, t: &'a Tree<L>) -> usize {
        let mut first = None;
        for c in &t.children {
            let lm = self.visit(c);
            first.get_or_insert(lm);
        }
        let idx = self.labels.len();
        self.labels.push(&t.label);
        self.leftmost.push(first.unwrap_or(idx));
        self.leftmost[idx]
    }

    /// Nodes whose leftmost leaf differs from their parent's, plus the root.
    fn keyroots(&self) -> Vec<usize> {
        let n = self.labels.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for i in (0..n).rev() {
            let lm = self.leftmost[i];
            if !seen[lm] {
                seen[lm] = true;
                out.push(i);
            }
        }
        out.sort_unstable();
        out
    }
}

pub fn tree_edit_distance<L: PartialEq>(a: &Tree<L>, b: &Tree<L>) -> usize {
    let fa = Flat::new(a);
    let fb = Flat::new(b);
    let (n, m) = (fa.labels.len(), fb.labels.len());
    let mut td = vec![vec![0usize; m]; n];
    let mut fd = vec![vec![0usize; m + 1]; n + 1];
    for &i in &fa.keyroots() {
        for &j in &fb.keyroots() {
            let (li, lj) = (fa.leftmost[i], fb.leftmost[j]);
            // forest distances over [li..=x] x [lj..=y], offset by one
            fd[0][0] = 0;
            for x in li..=i {
                fd[x - li + 1][0] = fd[x - li][0] + 1;
            }
            for y in lj..=j {
                fd[0][y - lj + 1] = fd[0][y - lj] + 1;
            }
            for x in li..=i {
                for y in lj..=j {
                    let (dx, dy) = (x - li + 1, y - lj + 1);
                    let del = fd[dx - 1][dy] + 1;
                    let ins = fd[dx][dy - 1] + 1;
                    if fa.leftmost[x] == li && fb.leftmost[y] == lj {
                        let sub = fd[dx - 1][dy - 1] + usize::from(fa.labels[x] != fb.labels[y]);
                        fd[dx][dy] = del.min(ins).min(sub);
                        td[x][y] = fd[dx][dy];
                    } else {
                        let (px, py) = (fa.leftmost[x] - li, fb.leftmost[y] - lj);
                        fd[dx][dy] = del.min(ins).min(fd[px][py] + td[x][y]);
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}
