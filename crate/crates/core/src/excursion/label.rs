//! Union-find labeling of boolean grids.

use serde::{Deserialize, Serialize};

use crate::fieldgen::{strides, unravel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Connectivity {
    /// Nearest neighbours only (4 in 2D, 6 in 3D).
    #[default]
    FaceOnly,
    /// All neighbours in the unit cube (8 in 2D, 26 in 3D).
    FaceAndDiagonal,
}

impl Connectivity {
    /// The dual partner used for complements.
    pub fn dual(self) -> Self {
        match self {
            Self::FaceOnly => Self::FaceAndDiagonal,
            Self::FaceAndDiagonal => Self::FaceOnly,
        }
    }

    /// Neighbour offsets, each paired with its lexicographic sign (the
    /// "backward" half comes first).
    pub fn offsets(self, dim: usize) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        let r = |a: usize| if a < dim { -1..=1 } else { 0..=0 };
        for dx in r(0) {
            for dy in r(1) {
                for dz in r(2) {
                    let nz = (dx != 0) as u8 + (dy != 0) as u8 + (dz != 0) as u8;
                    let keep = match self {
                        Self::FaceOnly => nz == 1,
                        Self::FaceAndDiagonal => nz >= 1,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

pub(crate) struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[x as usize] != root {
            let next = self.parent[x as usize];
            self.parent[x as usize] = root;
            x = next;
        }
        root
    }

    pub fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (ka, kb) = (self.rank[ra as usize], self.rank[rb as usize]);
        if ka < kb {
            self.parent[ra as usize] = rb;
        } else {
            self.parent[rb as usize] = ra;
            if ka == kb {
                self.rank[ra as usize] += 1;
            }
        }
    }
}

/// Labels the true cells of `mask` (row-major over `shape`). Labels start at
/// 1 and follow the scan order of each component's first node; 0 is
/// background. Returns `(labels, count)`.
pub fn label_grid(shape: &[usize], mask: &[bool], conn: Connectivity) -> (Vec<u32>, usize) {
    let dim = shape.len();
    let n = mask.len();
    debug_assert_eq!(n, shape.iter().product::<usize>());
    let st = strides(shape);
    // backward neighbours: lexicographically negative offsets
    let back: Vec<[i64; 3]> = conn
        .offsets(dim)
        .into_iter()
        .filter(|o| o.iter().find(|&&c| c != 0).is_some_and(|&c| c < 0))
        .collect();
    let mut uf = UnionFind::new(n);
    let mut idx = [0usize; 3];
    for flat in 0..n {
        if !mask[flat] {
            continue;
        }
        unravel(flat, shape, &mut idx[..dim]);
        for o in &back {
            let mut off = 0isize;
            let mut ok = true;
            for a in 0..dim {
                let j = idx[a] as i64 + o[a];
                if j < 0 || j >= shape[a] as i64 {
                    ok = false;
                    break;
                }
                off += o[a] as isize * st[a] as isize;
            }
            if ok {
                let nb = (flat as isize + off) as usize;
                if mask[nb] {
                    uf.union(flat as u32, nb as u32);
                }
            }
        }
    }
    let mut labels = vec![0u32; n];
    let mut root_label = vec![0u32; n];
    let mut count = 0u32;
    for flat in 0..n {
        if mask[flat] {
            let r = uf.find(flat as u32) as usize;
            if root_label[r] == 0 {
                count += 1;
                root_label[r] = count;
            }
            labels[flat] = root_label[r];
        }
    }
    (labels, count as usize)
}
