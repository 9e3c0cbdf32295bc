//! Kruskal spanning-tree mazes with optional wall pruning.
//!
//! A maze of `rows × cols` rooms lives on a `(2·rows+1) × (2·cols+1)` coarse
//! lattice: rooms sit at odd/odd coordinates, walls between rooms at
//! odd/even or even/odd coordinates, and pillars at even/even coordinates.
//! The outer ring of the lattice is always obstacle.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoarseMaze {
    rows: usize,
    cols: usize,
    /// `(rows-1) × cols`: wall between room (r, c) and (r+1, c).
    h_walls: Vec<bool>,
    /// `rows × (cols-1)`: wall between room (r, c) and (r, c+1).
    v_walls: Vec<bool>,
}

/// Disjoint-set forest with path compression and union by rank.
struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy)]
enum Wall {
    Horizontal(usize),
    Vertical(usize),
}

/// Builds a random spanning-tree maze, then removes each surviving interior
/// wall independently with probability `prune_prob`.
pub fn generate_maze(rows: usize, cols: usize, prune_prob: f64, seed: u64) -> Result<CoarseMaze> {
    if rows < 1 || cols < 1 || rows * cols < 2 {
        return Err(Error::param(format!("maze needs at least two rooms, got {rows}×{cols}")));
    }
    if !(0.0..1.0).contains(&prune_prob) {
        return Err(Error::param(format!("prune probability {prune_prob} not in [0, 1)")));
    }
    let mut rng = rng_from_seed(seed);
    let mut maze =
        CoarseMaze { rows, cols, h_walls: vec![true; (rows - 1) * cols], v_walls: vec![true; rows * (cols - 1)] };

    let mut candidates: Vec<Wall> =
        (0..maze.h_walls.len()).map(Wall::Horizontal).chain((0..maze.v_walls.len()).map(Wall::Vertical)).collect();
    candidates.shuffle(&mut rng);

    let mut sets = UnionFind::new(rows * cols);
    for wall in candidates {
        let (a, b) = match wall {
            Wall::Horizontal(i) => (i, i + cols),
            Wall::Vertical(i) => {
                let (r, c) = (i / (cols - 1), i % (cols - 1));
                (r * cols + c, r * cols + c + 1)
            }
        };
        if sets.union(a, b) {
            match wall {
                Wall::Horizontal(i) => maze.h_walls[i] = false,
                Wall::Vertical(i) => maze.v_walls[i] = false,
            }
        }
    }

    if prune_prob > 0.0 {
        for w in maze.h_walls.iter_mut().chain(maze.v_walls.iter_mut()) {
            if *w && rng.random_bool(prune_prob) {
                *w = false;
            }
        }
    }
    Ok(maze)
}

impl CoarseMaze {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Coarse lattice height, `2·rows + 1`.
    pub fn lattice_rows(&self) -> usize {
        2 * self.rows + 1
    }

    pub fn lattice_cols(&self) -> usize {
        2 * self.cols + 1
    }

    pub fn has_wall_below(&self, r: usize, c: usize) -> bool {
        r + 1 >= self.rows || self.h_walls[r * self.cols + c]
    }

    pub fn has_wall_right(&self, r: usize, c: usize) -> bool {
        c + 1 >= self.cols || self.v_walls[r * (self.cols - 1) + c]
    }

    pub fn interior_wall_count(&self) -> usize {
        self.h_walls.len() + self.v_walls.len()
    }

    pub fn removed_wall_count(&self) -> usize {
        self.h_walls.iter().chain(&self.v_walls).filter(|w| !**w).count()
    }

    /// Free mask over the coarse lattice, row-major.
    pub fn free_mask(&self) -> Vec<bool> {
        let (lr, lc) = (self.lattice_rows(), self.lattice_cols());
        let mut mask = vec![false; lr * lc];
        for r in 0..self.rows {
            for c in 0..self.cols {
                let (y, x) = (2 * r + 1, 2 * c + 1);
                mask[y * lc + x] = true;
                if !self.has_wall_right(r, c) {
                    mask[y * lc + x + 1] = true;
                }
                if !self.has_wall_below(r, c) {
                    mask[(y + 1) * lc + x] = true;
                }
            }
        }
        mask
    }

    /// Number of lattice cells reachable from the first room through free
    /// cells (4-connectivity).
    pub fn reachable_free_cells(&self) -> usize {
        let mask = self.free_mask();
        let (lr, lc) = (self.lattice_rows(), self.lattice_cols());
        let mut seen = vec![false; mask.len()];
        let start = lc + 1;
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0;
        while let Some(i) = stack.pop() {
            count += 1;
            let (y, x) = (i / lc, i % lc);
            let neighbors = [
                (y > 0).then(|| i - lc),
                (y + 1 < lr).then(|| i + lc),
                (x > 0).then(|| i - 1),
                (x + 1 < lc).then(|| i + 1),
            ];
            for j in neighbors.into_iter().flatten() {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_count(m: &CoarseMaze) -> usize {
        m.free_mask().iter().filter(|f| **f).count()
    }

    #[test]
    fn three_by_three_tree_removes_eight_walls() {
        for seed in 0..20 {
            let m = generate_maze(3, 3, 0.0, seed).unwrap();
            assert_eq!(m.removed_wall_count(), 8);
            assert_eq!(m.reachable_free_cells(), free_count(&m));
        }
    }

    #[test]
    fn two_by_one_is_a_corridor() {
        let m = generate_maze(2, 1, 0.0, 3).unwrap();
        assert_eq!(m.removed_wall_count(), 1);
        assert_eq!(m.lattice_rows(), 5);
        assert_eq!(m.lattice_cols(), 3);
        let mask = m.free_mask();
        let free: Vec<usize> = (0..mask.len()).filter(|i| mask[*i]).collect();
        // rooms at (1,1), (3,1) plus the opened wall at (2,1)
        assert_eq!(free, vec![4, 7, 10]);
    }

    #[test]
    fn pruned_maze_stays_connected() {
        let m = generate_maze(5, 5, 0.3, 42).unwrap();
        assert!(m.removed_wall_count() >= 24);
        assert_eq!(m.reachable_free_cells(), free_count(&m));
    }

    #[test]
    fn outer_ring_is_walled() {
        let m = generate_maze(4, 6, 0.5, 9).unwrap();
        let mask = m.free_mask();
        let (lr, lc) = (m.lattice_rows(), m.lattice_cols());
        for y in 0..lr {
            for x in 0..lc {
                if y == 0 || x == 0 || y == lr - 1 || x == lc - 1 {
                    assert!(!mask[y * lc + x]);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_maze(1, 1, 0.0, 0).is_err());
        assert!(generate_maze(3, 3, 1.0, 0).is_err());
        assert!(generate_maze(3, 3, -0.1, 0).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        assert_eq!(generate_maze(6, 6, 0.2, 11).unwrap(), generate_maze(6, 6, 0.2, 11).unwrap());
    }
}
