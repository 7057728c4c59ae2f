//! Fixed motif and base templates. The shapes are named in the benchmark
//! descriptions but never drawn; these adjacency lists are the declared
//! conventions that make ground-truth edge labels unambiguous.

/// House: 4-cycle 0-1-2-3 plus apex node 4 connected to nodes 2 and 3.
pub const HOUSE: &[(usize, usize)] = &[(0, 1), (1, 2), (2, 3), (0, 3), (2, 4), (3, 4)];
pub const HOUSE_N: usize = 5;

/// Five-node ring.
pub const CYCLE: &[(usize, usize)] = &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)];
pub const CYCLE_N: usize = 5;

/// Crane: path 0-1-2-3-4 with one extra chord (1,3).
pub const CRANE: &[(usize, usize)] = &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)];
pub const CRANE_N: usize = 5;

/// Class index == motif index for the 3-class spurious benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotifKind {
    Cycle,
    House,
    Crane,
}

pub const MOTIF_KINDS: [MotifKind; 3] = [MotifKind::Cycle, MotifKind::House, MotifKind::Crane];

impl MotifKind {
    pub fn template(self) -> (usize, &'static [(usize, usize)]) {
        match self {
            MotifKind::Cycle => (CYCLE_N, CYCLE),
            MotifKind::House => (HOUSE_N, HOUSE),
            MotifKind::Crane => (CRANE_N, CRANE),
        }
    }
}

/// Base kinds for the spurious benchmark; index c is the base that correlates
/// with motif class c at train time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseKind {
    /// Balanced binary tree of depth 3: 15 nodes, 14 edges.
    Tree,
    /// 2 x 6 ladder (grid): 12 nodes, 16 edges.
    Ladder,
    /// 6-spoke wheel: hub + rim ring, 7 nodes, 12 edges.
    Wheel,
}

pub const BASE_KINDS: [BaseKind; 3] = [BaseKind::Tree, BaseKind::Ladder, BaseKind::Wheel];

impl BaseKind {
    pub fn template(self) -> (usize, Vec<(usize, usize)>) {
        match self {
            BaseKind::Tree => {
                let mut edges = Vec::with_capacity(14);
                for parent in 0..7 {
                    edges.push((parent, 2 * parent + 1));
                    edges.push((parent, 2 * parent + 2));
                }
                (15, edges)
            }
            BaseKind::Ladder => {
                let mut edges = Vec::with_capacity(16);
                for c in 0..5 {
                    edges.push((c, c + 1));
                    edges.push((6 + c, 6 + c + 1));
                }
                for c in 0..6 {
                    edges.push((c, c + 6));
                }
                (12, edges)
            }
            BaseKind::Wheel => {
                let mut edges = Vec::with_capacity(12);
                for rim in 1..=6 {
                    edges.push((0, rim));
                }
                for rim in 1..6 {
                    edges.push((rim, rim + 1));
                }
                edges.push((1, 6));
                (7, edges)
            }
        }
    }
}
