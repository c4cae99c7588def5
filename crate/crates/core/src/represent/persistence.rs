//! 0-dimensional sublevel-set persistence on the 4-connected pixel grid and
//! the 1-Wasserstein distance between diagrams.

use crate::data::{Grid, Image};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub birth: f64,
    /// `f64::INFINITY` for the essential class.
    pub death: f64,
}

impl Bar {
    pub fn is_essential(&self) -> bool {
        self.death.is_infinite()
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

/// Bars with zero persistence are omitted; they sit on the diagonal and
/// never affect distances.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PersistenceDiagram {
    pub bars: Vec<Bar>,
}

impl PersistenceDiagram {
    pub fn new(bars: Vec<Bar>) -> Self {
        PersistenceDiagram { bars }
    }

    pub fn finite(&self) -> impl Iterator<Item = &Bar> {
        self.bars.iter().filter(|b| !b.is_essential())
    }

    pub fn essential(&self) -> impl Iterator<Item = &Bar> {
        self.bars.iter().filter(|b| b.is_essential())
    }

    pub fn total_finite_persistence(&self) -> f64 {
        self.finite().map(Bar::persistence).sum()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }
}

/// Sublevel filtration of a real-valued grid: pixels enter in ascending
/// intensity (ties by index); when two components meet, the younger one
/// (later birth) dies at the current intensity.
pub fn persistence_diagram_grid(x: &Grid) -> PersistenceDiagram {
    let (h, w) = (x.height, x.width);
    let n = h * w;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x.values[a].total_cmp(&x.values[b]).then(a.cmp(&b)));
    let mut rank = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos;
    }

    let mut uf = UnionFind::new(n);
    let mut active = vec![false; n];
    // the root of every component is the pixel where it was born
    let mut bars = Vec::new();
    for &i in &order {
        let v = x.values[i];
        active[i] = true;
        let (r, c) = (i / w, i % w);
        let mut neighbors = [usize::MAX; 4];
        if r > 0 {
            neighbors[0] = i - w;
        }
        if r + 1 < h {
            neighbors[1] = i + w;
        }
        if c > 0 {
            neighbors[2] = i - 1;
        }
        if c + 1 < w {
            neighbors[3] = i + 1;
        }
        let mut root = i;
        for nb in neighbors.into_iter().filter(|&nb| nb != usize::MAX && active[nb]) {
            let other = uf.find(nb);
            let mine = uf.find(root);
            if other == mine {
                continue;
            }
            let (elder, younger) = if rank[other] < rank[mine] { (other, mine) } else { (mine, other) };
            // the pixel itself is never a younger root with positive persistence
            let birth = x.values[younger];
            if v > birth {
                bars.push(Bar { birth, death: v });
            }
            uf.parent[younger] = elder;
            root = elder;
        }
    }
    let mut roots: Vec<usize> = (0..n).filter(|&i| uf.find(i) == i).collect();
    roots.sort_by_key(|&i| rank[i]);
    bars.extend(roots.into_iter().map(|i| Bar { birth: x.values[i], death: f64::INFINITY }));
    PersistenceDiagram { bars }
}

pub fn persistence_diagram(x: &Image) -> PersistenceDiagram {
    persistence_diagram_grid(&x.to_grid())
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian
/// algorithm with potentials, O(n^3)). Returns the optimal total cost.
pub(crate) fn assignment_cost(cost: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    // 1-based arrays; index 0 is the virtual source column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|m| *m = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[(p[j] - 1) * n + j - 1]).sum()
}

/// 1-Wasserstein distance with L-infinity ground cost. Finite bars may be
/// matched to each other or projected onto the diagonal at cost
/// `persistence / 2`. Essential bars are paired in order of birth; a
/// mismatch in essential counts gives an infinite distance.
pub fn diagram_distance(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> f64 {
    let mut e1: Vec<f64> = d1.essential().map(|b| b.birth).collect();
    let mut e2: Vec<f64> = d2.essential().map(|b| b.birth).collect();
    if e1.len() != e2.len() {
        return f64::INFINITY;
    }
    e1.sort_by(f64::total_cmp);
    e2.sort_by(f64::total_cmp);
    let essential: f64 = e1.iter().zip(&e2).map(|(a, b)| (a - b).abs()).sum();

    let a: Vec<&Bar> = d1.finite().collect();
    let b: Vec<&Bar> = d2.finite().collect();
    let (n, m) = (a.len(), b.len());
    let size = n + m;
    let mut cost = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            cost[i * size + j] = match (i < n, j < m) {
                (true, true) => (a[i].birth - b[j].birth).abs().max((a[i].death - b[j].death).abs()),
                (true, false) => a[i].persistence() / 2.0,
                (false, true) => b[j].persistence() / 2.0,
                (false, false) => 0.0,
            };
        }
    }
    essential + assignment_cost(&cost, size)
}
