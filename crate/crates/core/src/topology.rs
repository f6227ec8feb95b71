//! Chip grid of the machine: a two-dimensional torus where every chip has six
//! links (E, NE, N, W, SW, S), i.e. a triangular lattice wrapped on itself.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{FabricError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChipCoord {
    pub x: u16,
    pub y: u16,
}

impl ChipCoord {
    pub const fn new(x: u16, y: u16) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for ChipCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A processing element: one core on one chip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PeId {
    pub chip: ChipCoord,
    pub core: u16,
}

impl PeId {
    pub const fn new(x: u16, y: u16, core: u16) -> Self {
        Self {
            chip: ChipCoord::new(x, y),
            core,
        }
    }

    /// Sort key used everywhere a deterministic PE order is needed:
    /// `(chip_y, chip_x, core)`.
    pub fn order_key(&self) -> (u16, u16, u16) {
        (self.chip.y, self.chip.x, self.core)
    }
}

impl Ord for PeId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

impl PartialOrd for PeId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PE({}, {}, {})", self.chip.x, self.chip.y, self.core)
    }
}

/// One of the six inter-chip links.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Port {
    E,
    NE,
    N,
    W,
    SW,
    S,
}

impl Port {
    /// All ports, in the fixed preference order used for tie-breaking.
    pub const ALL: [Port; 6] = [Port::E, Port::NE, Port::N, Port::W, Port::SW, Port::S];

    pub const fn offset(self) -> (i32, i32) {
        match self {
            Port::E => (1, 0),
            Port::NE => (1, 1),
            Port::N => (0, 1),
            Port::W => (-1, 0),
            Port::SW => (-1, -1),
            Port::S => (0, -1),
        }
    }

    pub const fn opposite(self) -> Port {
        match self {
            Port::E => Port::W,
            Port::NE => Port::SW,
            Port::N => Port::S,
            Port::W => Port::E,
            Port::SW => Port::NE,
            Port::S => Port::N,
        }
    }

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Port::E => "E",
            Port::NE => "NE",
            Port::N => "N",
            Port::W => "W",
            Port::SW => "SW",
            Port::S => "S",
        }
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Torus dimensions (W columns by H rows).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusDims {
    pub width: u16,
    pub height: u16,
}

impl TorusDims {
    pub fn new(width: u16, height: u16) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(FabricError::Config(format!(
                "torus dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn contains(&self, c: ChipCoord) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn chip_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Row-major index, `y * W + x`.
    pub fn index(&self, c: ChipCoord) -> usize {
        c.y as usize * self.width as usize + c.x as usize
    }

    pub fn coord(&self, index: usize) -> ChipCoord {
        let w = self.width as usize;
        ChipCoord::new((index % w) as u16, (index / w) as u16)
    }

    /// Chips in `(y, x)` order.
    pub fn chips(&self) -> impl Iterator<Item = ChipCoord> + '_ {
        (0..self.chip_count()).map(move |i| self.coord(i))
    }

    pub fn neighbor(&self, c: ChipCoord, port: Port) -> ChipCoord {
        let (dx, dy) = port.offset();
        let x = (c.x as i32 + dx).rem_euclid(self.width as i32);
        let y = (c.y as i32 + dy).rem_euclid(self.height as i32);
        ChipCoord::new(x as u16, y as u16)
    }
}

/// Link count of a displacement on the infinite six-neighbour lattice.
fn lattice_norm(dx: i64, dy: i64) -> u64 {
    if (dx >= 0) == (dy >= 0) {
        dx.unsigned_abs().max(dy.unsigned_abs())
    } else {
        dx.unsigned_abs() + dy.unsigned_abs()
    }
}

/// Minimal number of links between two chips on the six-neighbour torus.
pub fn hop_distance(a: ChipCoord, b: ChipCoord, dims: TorusDims) -> u32 {
    let w = dims.width as i64;
    let h = dims.height as i64;
    let dx = (b.x as i64 - a.x as i64).rem_euclid(w);
    let dy = (b.y as i64 - a.y as i64).rem_euclid(h);
    let mut best = u64::MAX;
    for kx in -1..=1 {
        for ky in -1..=1 {
            best = best.min(lattice_norm(dx + kx * w, dy + ky * h));
        }
    }
    best as u32
}

/// First port (in preference order) that moves one hop closer to `to`.
pub fn next_hop(from: ChipCoord, to: ChipCoord, dims: TorusDims) -> Option<Port> {
    if from == to {
        return None;
    }
    let d = hop_distance(from, to, dims);
    Port::ALL
        .into_iter()
        .find(|&p| hop_distance(dims.neighbor(from, p), to, dims) + 1 == d)
}

/// Breadth-first shortest-path tree rooted at one chip.
///
/// Neighbours are expanded in [`Port::ALL`] order, so the first discovery of a
/// chip fixes its parent and the tree is fully deterministic.
#[derive(Clone, Debug)]
pub struct ShortestPathTree {
    dims: TorusDims,
    root: ChipCoord,
    /// For each chip index: the parent chip and the port on the parent that
    /// leads to this chip.
    parent: Vec<Option<(ChipCoord, Port)>>,
    depth: Vec<u32>,
}

impl ShortestPathTree {
    pub fn new(root: ChipCoord, dims: TorusDims) -> Self {
        let n = dims.chip_count();
        let mut parent = vec![None; n];
        let mut depth = vec![u32::MAX; n];
        depth[dims.index(root)] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(c) = queue.pop_front() {
            let d = depth[dims.index(c)];
            for p in Port::ALL {
                let nb = dims.neighbor(c, p);
                let i = dims.index(nb);
                if depth[i] == u32::MAX {
                    depth[i] = d + 1;
                    parent[i] = Some((c, p));
                    queue.push_back(nb);
                }
            }
        }
        Self {
            dims,
            root,
            parent,
            depth,
        }
    }

    pub fn root(&self) -> ChipCoord {
        self.root
    }

    pub fn depth(&self, c: ChipCoord) -> u32 {
        self.depth[self.dims.index(c)]
    }

    pub fn parent(&self, c: ChipCoord) -> Option<(ChipCoord, Port)> {
        self.parent[self.dims.index(c)]
    }

    /// Links from the root to `to`, as `(chip, outgoing port)` pairs.
    pub fn path(&self, to: ChipCoord) -> Vec<(ChipCoord, Port)> {
        let mut hops = Vec::new();
        let mut cur = to;
        while let Some((p, port)) = self.parent(cur) {
            hops.push((p, port));
            cur = p;
        }
        hops.reverse();
        hops
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opposite_is_an_involution() {
        for p in Port::ALL {
            assert_eq!(p.opposite().opposite(), p);
            assert_ne!(p.opposite(), p);
            let (dx, dy) = p.offset();
            assert_eq!(p.opposite().offset(), (-dx, -dy));
        }
    }

    #[test]
    fn identity_and_direct_link() {
        let dims = TorusDims::new(8, 8).unwrap();
        let a = ChipCoord::new(3, 4);
        assert_eq!(hop_distance(a, a, dims), 0);
        assert_eq!(hop_distance(ChipCoord::new(0, 0), ChipCoord::new(1, 1), dims), 1);
    }

    #[test]
    fn neighbor_wraps() {
        let dims = TorusDims::new(4, 3).unwrap();
        assert_eq!(dims.neighbor(ChipCoord::new(3, 2), Port::NE), ChipCoord::new(0, 0));
        assert_eq!(dims.neighbor(ChipCoord::new(0, 0), Port::SW), ChipCoord::new(3, 2));
    }

    #[test]
    fn single_chip_machine() {
        let dims = TorusDims::new(1, 1).unwrap();
        let c = ChipCoord::new(0, 0);
        assert_eq!(hop_distance(c, c, dims), 0);
        assert_eq!(dims.neighbor(c, Port::N), c);
        assert!(TorusDims::new(0, 3).is_err());
    }

    #[test]
    fn tree_depth_matches_distance() {
        let dims = TorusDims::new(5, 7).unwrap();
        let root = ChipCoord::new(2, 1);
        let tree = ShortestPathTree::new(root, dims);
        for c in dims.chips() {
            assert_eq!(tree.depth(c), hop_distance(root, c, dims));
            assert_eq!(tree.path(c).len() as u32, tree.depth(c));
        }
    }

    #[test]
    fn next_hop_prefers_east() {
        let dims = TorusDims::new(8, 8).unwrap();
        // (0,0) -> (2,0): E and nothing else is on a shortest path.
        assert_eq!(next_hop(ChipCoord::new(0, 0), ChipCoord::new(2, 0), dims), Some(Port::E));
        // (0,0) -> (2,2): NE strictly better than E.
        assert_eq!(next_hop(ChipCoord::new(0, 0), ChipCoord::new(2, 2), dims), Some(Port::NE));
    }
}
