//! Reachability of a multicast key by walking routing decisions hop by hop.

use std::collections::{BTreeMap, VecDeque};

/// Six-neighbour offsets in port order E, NE, N, W, SW, S.
pub const OFFSETS: [(i64, i64); 6] = [(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)];

/// What one router does with a packet: output port indices and local cores.
/// `None` means the router has no opinion (no matching entry).
pub type Decision = Option<(Vec<usize>, Vec<u16>)>;

/// Counts deliveries per `(x, y, core)` for a packet injected at `src`.
/// `decide(x, y, arrival_port)` is the router behaviour; `None` arrival
/// means local injection. Unmatched link arrivals continue straight.
/// Returns `None` if the walk exceeds `max_visits` router visits.
pub fn deliveries(
    width: i64,
    height: i64,
    src: (i64, i64),
    decide: impl Fn(i64, i64, Option<usize>) -> Decision,
    max_visits: usize,
) -> Option<BTreeMap<(i64, i64, u16), usize>> {
    let mut out = BTreeMap::new();
    let mut q = VecDeque::from([(src, None::<usize>)]);
    let mut visits = 0;
    while let Some(((x, y), arrival)) = q.pop_front() {
        visits += 1;
        if visits > max_visits {
            return None;
        }
        let (ports, cores) = match decide(x, y, arrival) {
            Some(d) => d,
            None => match arrival {
                Some(a) => (vec![(a + 3) % 6], vec![]),
                None => return Some(out),
            },
        };
        for c in cores {
            *out.entry((x, y, c)).or_insert(0) += 1;
        }
        for p in ports {
            let (dx, dy) = OFFSETS[p];
            let next = ((x + dx).rem_euclid(width), (y + dy).rem_euclid(height));
            // Arrives through the port facing back to us.
            q.push_back((next, Some((p + 3) % 6)));
        }
    }
    Some(out)
}
