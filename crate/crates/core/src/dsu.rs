//! Disjoint-set forest and connected-component enumeration.

/// Union by size with path compression.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, v: usize) -> usize {
        let mut root = v;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut node = v;
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn size_of(&mut self, v: usize) -> usize {
        let r = self.find(v);
        self.size[r]
    }

    /// Blocks ordered by their least member, members ascending.
    pub fn blocks(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut slot = vec![usize::MAX; n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for v in 0..n {
            let r = self.find(v);
            if slot[r] == usize::MAX {
                slot[r] = out.len();
                out.push(Vec::new());
            }
            out[slot[r]].push(v);
        }
        out
    }
}

/// Connected components of the graph on `0..n`, enumerated by least unused index.
pub fn components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut dsu = DisjointSet::new(n);
    for &(a, b) in edges {
        dsu.union(a, b);
    }
    dsu.blocks()
}

/// Components of the graph restricted to the vertices flagged in `keep`.
///
/// Vertices outside `keep` are omitted from the result.
pub fn components_within(n: usize, edges: &[(usize, usize)], keep: &[bool]) -> Vec<Vec<usize>> {
    let mut dsu = DisjointSet::new(n);
    for &(a, b) in edges {
        if keep[a] && keep[b] {
            dsu.union(a, b);
        }
    }
    dsu.blocks()
        .into_iter()
        .filter(|b| keep[b[0]])
        .collect()
}
