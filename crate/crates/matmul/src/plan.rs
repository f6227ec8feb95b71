//! Tiling of `C = A·B` into per-task tile products and per-output-tile
//! reduction trees.

use serde::{Deserialize, Serialize};

use crate::error::{MatmulError, Result};

/// One tile product `A[i,k]·B[k,j]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub i: usize,
    pub k: usize,
    pub j: usize,
}

/// The accumulator absorbs the partner's partial result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombineStep {
    pub level: usize,
    pub accumulator: usize,
    pub partner: usize,
}

/// Tasks sharing output tile `(i, j)`, in `k` order, and their reduction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub i: usize,
    pub j: usize,
    pub members: Vec<usize>,
    /// Combine steps in level order; the root is `members[0]`.
    pub tree: Vec<CombineStep>,
}

impl Group {
    pub fn root(&self) -> usize {
        self.members[0]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingPlan {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub tile_m: usize,
    pub tile_k: usize,
    pub tile_n: usize,
    /// Physical worker PEs; task `t` runs on worker `t % workers`.
    pub workers: usize,
    /// Indexed by task (logical worker) id, in `(i, j, k)` order.
    pub tasks: Vec<Task>,
    pub groups: Vec<Group>,
    /// Zero rows/cols added to reach whole tiles: `(m, k, n)`.
    pub padding: (usize, usize, usize),
}

/// Balanced pairwise reduction: pair adjacent survivors, lower id
/// accumulates, an odd survivor carries over, repeat.
pub fn reduction_tree(members: &[usize]) -> Vec<CombineStep> {
    let mut alive = members.to_vec();
    let mut steps = Vec::new();
    let mut level = 0;
    while alive.len() > 1 {
        let mut next = Vec::with_capacity(alive.len().div_ceil(2));
        for pair in alive.chunks(2) {
            if let [a, b] = *pair {
                steps.push(CombineStep {
                    level,
                    accumulator: a.min(b),
                    partner: a.max(b),
                });
                next.push(a.min(b));
            } else {
                next.push(pair[0]);
            }
        }
        alive = next;
        level += 1;
    }
    steps
}

pub fn plan_tiling(
    m: usize,
    k: usize,
    n: usize,
    tile_m: usize,
    tile_k: usize,
    tile_n: usize,
    workers: usize,
) -> Result<TilingPlan> {
    if [m, k, n, tile_m, tile_k, tile_n, workers].contains(&0) {
        return Err(MatmulError::InvalidDims(format!(
            "all of M={m} K={k} N={n}, tiles {tile_m}x{tile_k}x{tile_n} and workers={workers} must be >= 1"
        )));
    }
    let (ti, tk, tj) = (m.div_ceil(tile_m), k.div_ceil(tile_k), n.div_ceil(tile_n));
    let mut tasks = Vec::with_capacity(ti * tk * tj);
    let mut groups = Vec::with_capacity(ti * tj);
    for i in 0..ti {
        for j in 0..tj {
            let members: Vec<usize> = (0..tk)
                .map(|kk| {
                    tasks.push(Task { i, k: kk, j });
                    tasks.len() - 1
                })
                .collect();
            let tree = reduction_tree(&members);
            groups.push(Group { i, j, members, tree });
        }
    }
    Ok(TilingPlan {
        m,
        k,
        n,
        tile_m,
        tile_k,
        tile_n,
        workers,
        tasks,
        groups,
        padding: (ti * tile_m - m, tk * tile_k - k, tj * tile_n - n),
    })
}

impl TilingPlan {
    pub fn tile_counts(&self) -> (usize, usize, usize) {
        (
            self.m.div_ceil(self.tile_m),
            self.k.div_ceil(self.tile_k),
            self.n.div_ceil(self.tile_n),
        )
    }

    pub fn worker_of(&self, task: usize) -> usize {
        task % self.workers
    }

    pub fn group_of(&self, task: usize) -> usize {
        let t = self.tasks[task];
        t.i * self.tile_counts().2 + t.j
    }

    pub fn tasks_on(&self, worker: usize) -> usize {
        (0..self.tasks.len()).filter(|&t| self.worker_of(t) == worker).count()
    }

    /// Partial-result slots each worker reserves. With in-order task issue
    /// a worker never holds more than `⌊log2 G⌋ + 1` unmerged partials of
    /// the open group plus the one being loaded.
    pub fn slots_per_worker(&self) -> usize {
        let g = self.tile_counts().1;
        let need = (usize::BITS - g.leading_zeros()) as usize + 1;
        need.min(self.tasks.len().div_ceil(self.workers))
    }

    pub fn a_tile_bytes(&self) -> usize {
        self.tile_m * self.tile_k
    }

    pub fn b_tile_bytes(&self) -> usize {
        self.tile_k * self.tile_n
    }

    pub fn c_tile_bytes(&self) -> usize {
        self.tile_m * self.tile_n * 4
    }
}
