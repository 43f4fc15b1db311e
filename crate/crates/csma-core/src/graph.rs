//! Conflict graphs, on-off states, and independent-set enumeration.
//!
//! A conflict graph has one vertex per link; an edge means the two links
//! cannot transmit at the same time. The induced subgraph over the links
//! active in a slot splits into connected components: singleton components
//! are successful transmissions, larger components are collisions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of links for exhaustive 2^K enumerations.
pub const DEFAULT_ENUM_CAP: usize = 20;

/// Hard limit imposed by the bitmask representation.
pub const MAX_LINKS: usize = 64;

/// On-disk form of a conflict graph: link count plus a 1-based edge list.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphFile {
    num_links: usize,
    edges: Vec<(usize, usize)>,
}

/// A symmetric, irreflexive conflict relation over `num_links` links.
///
/// Links are indexed `0..K` internally; file formats and CLI output use
/// 1-based ids. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct ConflictGraph {
    num_links: usize,
    neighbors: Vec<u64>,
}

impl ConflictGraph {
    /// Build a graph from 0-based edges. Rejects self-loops and out-of-range
    /// indices; duplicate edges are merged.
    pub fn new(num_links: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if num_links == 0 {
            return Err(Error::InvalidGraph("need at least one link".into()));
        }
        if num_links > MAX_LINKS {
            return Err(Error::CapacityExceeded {
                what: "conflict graph links",
                cap: MAX_LINKS,
                requested: num_links,
            });
        }
        let mut neighbors = vec![0u64; num_links];
        for &(i, j) in edges {
            if i >= num_links || j >= num_links {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) out of range for {num_links} links"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop on link {i}")));
            }
            neighbors[i] |= 1 << j;
            neighbors[j] |= 1 << i;
        }
        Ok(Self {
            num_links,
            neighbors,
        })
    }

    /// Build a graph from a 1-based edge list, the convention used by graph
    /// files and the CLI.
    pub fn from_1based_edges(num_links: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let shifted: Vec<(usize, usize)> = edges
            .iter()
            .map(|&(i, j)| {
                if i == 0 || j == 0 {
                    Err(Error::InvalidGraph(format!(
                        "edge ({i}, {j}) uses 0; link ids are 1-based"
                    )))
                } else {
                    Ok((i - 1, j - 1))
                }
            })
            .collect::<Result<_>>()?;
        Self::new(num_links, &shifted)
    }

    /// Path graph 1-2-...-K.
    pub fn path(num_links: usize) -> Result<Self> {
        let edges: Vec<_> = (1..num_links).map(|i| (i - 1, i)).collect();
        Self::new(num_links, &edges)
    }

    /// Complete graph: every pair of links conflicts.
    pub fn complete(num_links: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..num_links {
            for j in (i + 1)..num_links {
                edges.push((i, j));
            }
        }
        Self::new(num_links, &edges)
    }

    /// Graph with no conflicts at all.
    pub fn edgeless(num_links: usize) -> Result<Self> {
        Self::new(num_links, &[])
    }

    /// Line network where each link conflicts with its nearest `reach`
    /// links on each side.
    pub fn line(num_links: usize, reach: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..num_links {
            for d in 1..=reach {
                if i + d < num_links {
                    edges.push((i, i + d));
                }
            }
        }
        Self::new(num_links, &edges)
    }

    /// 2-D lattice of `rows x cols` links; each link conflicts with its
    /// nearest grid neighbors (up to 4).
    pub fn lattice(rows: usize, cols: usize) -> Result<Self> {
        let idx = |r: usize, c: usize| r * cols + c;
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    edges.push((idx(r, c), idx(r, c + 1)));
                }
                if r + 1 < rows {
                    edges.push((idx(r, c), idx(r + 1, c)));
                }
            }
        }
        Self::new(rows * cols, &edges)
    }

    pub fn num_links(&self) -> usize {
        self.num_links
    }

    pub fn are_adjacent(&self, i: usize, j: usize) -> bool {
        self.neighbors[i] & (1 << j) != 0
    }

    /// Bitmask of the links conflicting with `k`.
    pub fn neighbors_mask(&self, k: usize) -> u64 {
        self.neighbors[k]
    }

    pub(crate) fn neighbor_masks(&self) -> &[u64] {
        &self.neighbors
    }

    /// 0-based edge list with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.num_links {
            for j in (i + 1)..self.num_links {
                if self.are_adjacent(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// True if every edge of `self` is also an edge of `other`.
    pub fn is_subgraph_of(&self, other: &ConflictGraph) -> bool {
        self.num_links == other.num_links
            && self
                .neighbors
                .iter()
                .zip(&other.neighbors)
                .all(|(a, b)| a & !b == 0)
    }
}

impl TryFrom<GraphFile> for ConflictGraph {
    type Error = Error;

    fn try_from(f: GraphFile) -> Result<Self> {
        ConflictGraph::from_1based_edges(f.num_links, &f.edges)
    }
}

impl From<ConflictGraph> for GraphFile {
    fn from(g: ConflictGraph) -> Self {
        GraphFile {
            num_links: g.num_links(),
            edges: g.edges().iter().map(|&(i, j)| (i + 1, j + 1)).collect(),
        }
    }
}

/// Which links are transmitting in a slot, as a bitmask over links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OnOffState {
    mask: u64,
    num_links: usize,
}

impl OnOffState {
    pub fn from_mask(mask: u64, num_links: usize) -> Result<Self> {
        if num_links > MAX_LINKS || (num_links < MAX_LINKS && mask >> num_links != 0) {
            return Err(Error::Domain(format!(
                "state mask {mask:#x} does not fit {num_links} links"
            )));
        }
        Ok(Self { mask, num_links })
    }

    pub fn from_active_links(active: &[usize], num_links: usize) -> Result<Self> {
        let mut mask = 0u64;
        for &k in active {
            if k >= num_links {
                return Err(Error::DimensionMismatch {
                    what: "active link index",
                    expected: num_links,
                    got: k + 1,
                });
            }
            mask |= 1 << k;
        }
        Ok(Self { mask, num_links })
    }

    /// Build from a 0/1 vector of length K.
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut mask = 0u64;
        if bits.len() > MAX_LINKS {
            return Err(Error::CapacityExceeded {
                what: "on-off state links",
                cap: MAX_LINKS,
                requested: bits.len(),
            });
        }
        for (k, &b) in bits.iter().enumerate() {
            if b {
                mask |= 1 << k;
            }
        }
        Ok(Self {
            mask,
            num_links: bits.len(),
        })
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn num_links(&self) -> usize {
        self.num_links
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.mask & (1 << k) != 0
    }

    pub fn active_links(&self) -> Vec<usize> {
        (0..self.num_links).filter(|&k| self.is_active(k)).collect()
    }

    pub fn count_active(&self) -> usize {
        self.mask.count_ones() as usize
    }
}

/// Partition of the active links of a state into connected components of the
/// induced subgraph, with the derived success/collision sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    /// Connected components of the induced active subgraph, each sorted,
    /// ordered by smallest member.
    pub components: Vec<Vec<usize>>,
    /// Links in singleton components: transmitting successfully.
    pub successful: Vec<usize>,
    /// Links in components of size > 1: experiencing a collision.
    pub colliding: Vec<usize>,
    /// Number of components of size > 1.
    pub collision_number: usize,
}

/// Classify the active links of `x` into successful and colliding sets.
pub fn classify(g: &ConflictGraph, x: &OnOffState) -> Result<Classification> {
    if x.num_links() != g.num_links() {
        return Err(Error::DimensionMismatch {
            what: "on-off state",
            expected: g.num_links(),
            got: x.num_links(),
        });
    }
    let mut components = Vec::new();
    let mut successful = Vec::new();
    let mut colliding = Vec::new();
    let mut seen = 0u64;
    for k in 0..g.num_links() {
        let bit = 1u64 << k;
        if x.mask() & bit == 0 || seen & bit != 0 {
            continue;
        }
        // BFS over active links from k.
        let mut comp_mask = bit;
        let mut frontier = bit;
        while frontier != 0 {
            let mut next = 0u64;
            let mut f = frontier;
            while f != 0 {
                let v = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= g.neighbors_mask(v) & x.mask() & !comp_mask;
            }
            comp_mask |= next;
            frontier = next;
        }
        seen |= comp_mask;
        let mut members: Vec<usize> = Vec::new();
        let mut m = comp_mask;
        while m != 0 {
            let v = m.trailing_zeros() as usize;
            m &= m - 1;
            members.push(v);
        }
        if members.len() == 1 {
            successful.push(members[0]);
        } else {
            colliding.extend_from_slice(&members);
        }
        components.push(members);
    }
    colliding.sort_unstable();
    let collision_number = components.iter().filter(|c| c.len() > 1).count();
    Ok(Classification {
        components,
        successful,
        colliding,
        collision_number,
    })
}

/// Fast path used by the analytical engine: returns the mask of successful
/// links and the collision number of `mask` under `neighbors`.
pub(crate) fn classify_mask(neighbors: &[u64], mask: u64) -> (u64, u32) {
    let mut s_mask = 0u64;
    let mut h = 0u32;
    let mut seen = 0u64;
    let mut rest = mask;
    while rest != 0 {
        let k = rest.trailing_zeros() as usize;
        let bit = 1u64 << k;
        rest &= rest - 1;
        if seen & bit != 0 {
            continue;
        }
        let mut comp = bit;
        let mut frontier = bit;
        while frontier != 0 {
            let mut next = 0u64;
            let mut f = frontier;
            while f != 0 {
                let v = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= neighbors[v] & mask & !comp;
            }
            comp |= next;
            frontier = next;
        }
        seen |= comp;
        if comp.count_ones() == 1 {
            s_mask |= comp;
        } else {
            h += 1;
        }
    }
    (s_mask, h)
}

/// Enumerate every independent set of `g` (including the empty set and
/// non-maximal sets), with the default link cap.
pub fn independent_sets(g: &ConflictGraph) -> Result<Vec<OnOffState>> {
    independent_sets_with_cap(g, DEFAULT_ENUM_CAP)
}

/// Enumerate independent sets with an explicit link cap (2^K work).
pub fn independent_sets_with_cap(g: &ConflictGraph, cap: usize) -> Result<Vec<OnOffState>> {
    let k = g.num_links();
    if k > cap.min(MAX_LINKS) {
        return Err(Error::CapacityExceeded {
            what: "independent-set enumeration links",
            cap: cap.min(MAX_LINKS),
            requested: k,
        });
    }
    let mut out = Vec::new();
    for mask in 0u64..(1 << k) {
        if is_independent(g, mask) {
            out.push(OnOffState {
                mask,
                num_links: k,
            });
        }
    }
    Ok(out)
}

pub(crate) fn is_independent(g: &ConflictGraph, mask: u64) -> bool {
    let mut m = mask;
    while m != 0 {
        let v = m.trailing_zeros() as usize;
        m &= m - 1;
        if g.neighbors_mask(v) & mask != 0 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_edges() {
        assert!(ConflictGraph::new(3, &[(0, 3)]).is_err());
        assert!(ConflictGraph::new(3, &[(1, 1)]).is_err());
        assert!(ConflictGraph::from_1based_edges(3, &[(0, 1)]).is_err());
        assert!(ConflictGraph::new(0, &[]).is_err());
    }

    #[test]
    fn adjacency_is_symmetric() {
        let g = ConflictGraph::new(4, &[(0, 2), (2, 3)]).unwrap();
        for i in 0..4 {
            assert!(!g.are_adjacent(i, i));
            for j in 0..4 {
                assert_eq!(g.are_adjacent(i, j), g.are_adjacent(j, i));
            }
        }
        assert_eq!(g.edges(), vec![(0, 2), (2, 3)]);
    }

    #[test]
    fn classify_path_graph_example() {
        // Path 1-2-3-4-5 with links 1, 2, 5 active: link 5 succeeds, links
        // 1 and 2 collide, a single collision component.
        let g = ConflictGraph::path(5).unwrap();
        let x = OnOffState::from_active_links(&[0, 1, 4], 5).unwrap();
        let c = classify(&g, &x).unwrap();
        assert_eq!(c.successful, vec![4]);
        assert_eq!(c.colliding, vec![0, 1]);
        assert_eq!(c.collision_number, 1);
        assert_eq!(c.components, vec![vec![0, 1], vec![4]]);
    }

    #[test]
    fn classify_all_idle() {
        let g = ConflictGraph::complete(4).unwrap();
        let x = OnOffState::from_mask(0, 4).unwrap();
        let c = classify(&g, &x).unwrap();
        assert!(c.successful.is_empty());
        assert!(c.colliding.is_empty());
        assert_eq!(c.collision_number, 0);
    }

    #[test]
    fn classify_edgeless_all_active() {
        let g = ConflictGraph::edgeless(3).unwrap();
        let x = OnOffState::from_mask(0b111, 3).unwrap();
        let c = classify(&g, &x).unwrap();
        assert_eq!(c.successful, vec![0, 1, 2]);
        assert!(c.colliding.is_empty());
        assert_eq!(c.collision_number, 0);
    }

    #[test]
    fn classify_rejects_length_mismatch() {
        let g = ConflictGraph::path(3).unwrap();
        let x = OnOffState::from_mask(0b1, 2).unwrap();
        assert!(matches!(
            classify(&g, &x),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn classification_partitions_active_links() {
        let g = ConflictGraph::new(6, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        for mask in 0u64..(1 << 6) {
            let x = OnOffState::from_mask(mask, 6).unwrap();
            let c = classify(&g, &x).unwrap();
            let comp_total: usize = c.components.iter().map(|m| m.len()).sum();
            assert_eq!(comp_total, mask.count_ones() as usize);
            assert_eq!(c.successful.len() + c.colliding.len(), comp_total);
            let (s_mask, h) = classify_mask(g.neighbor_masks(), mask);
            let s_from_mask: Vec<usize> =
                (0..6).filter(|&k| s_mask & (1 << k) != 0).collect();
            assert_eq!(s_from_mask, c.successful);
            assert_eq!(h as usize, c.collision_number);
        }
    }

    #[test]
    fn independent_sets_three_link_path() {
        let g = ConflictGraph::path(3).unwrap();
        let sets = independent_sets(&g).unwrap();
        let masks: Vec<u64> = sets.iter().map(|s| s.mask()).collect();
        assert_eq!(masks, vec![0b000, 0b001, 0b010, 0b100, 0b101]);
    }

    #[test]
    fn independent_sets_edgeless_two() {
        let g = ConflictGraph::edgeless(2).unwrap();
        assert_eq!(independent_sets(&g).unwrap().len(), 4);
    }

    #[test]
    fn independent_sets_complete_six() {
        // A full conflict graph admits only the empty set and singletons.
        let g = ConflictGraph::complete(6).unwrap();
        assert_eq!(independent_sets(&g).unwrap().len(), 7);
    }

    #[test]
    fn independent_sets_cap_is_enforced() {
        let g = ConflictGraph::edgeless(5).unwrap();
        let err = independent_sets_with_cap(&g, 4).unwrap_err();
        match err {
            Error::CapacityExceeded { cap, requested, .. } => {
                assert_eq!(cap, 4);
                assert_eq!(requested, 5);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn graph_file_round_trip() {
        let g = ConflictGraph::new(4, &[(0, 1), (2, 3)]).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains("\"num_links\":4"));
        let back: ConflictGraph = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
        let bad = r#"{"num_links": 2, "edges": [[1, 1]]}"#;
        assert!(serde_json::from_str::<ConflictGraph>(bad).is_err());
    }
}
