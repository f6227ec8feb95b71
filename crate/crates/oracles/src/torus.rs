use std::collections::VecDeque;

/// Six-neighbour torus distances from `src`, by breadth-first search over
/// the explicit link graph. Returns a row-major `height * width` table.
pub fn bfs_distances(width: i64, height: i64, src: (i64, i64)) -> Vec<u32> {
    const OFFSETS: [(i64, i64); 6] = [(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)];
    let idx = |x: i64, y: i64| (y * width + x) as usize;
    let mut dist = vec![u32::MAX; (width * height) as usize];
    dist[idx(src.0, src.1)] = 0;
    let mut q = VecDeque::from([src]);
    while let Some((x, y)) = q.pop_front() {
        let d = dist[idx(x, y)];
        for (dx, dy) in OFFSETS {
            let nx = (x + dx).rem_euclid(width);
            let ny = (y + dy).rem_euclid(height);
            if dist[idx(nx, ny)] == u32::MAX {
                dist[idx(nx, ny)] = d + 1;
                q.push_back((nx, ny));
            }
        }
    }
    dist
}

pub fn bfs_hop_distance(width: i64, height: i64, a: (i64, i64), b: (i64, i64)) -> u32 {
    bfs_distances(width, height, a)[(b.1 * width + b.0) as usize]
}

/// Diameter of the four-neighbour (mesh) torus, for comparison.
pub fn mesh_torus_diameter(width: i64, height: i64) -> u32 {
    (width / 2 + height / 2) as u32
}
