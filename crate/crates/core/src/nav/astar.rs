use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::grid::NavGrid;

pub type Cell = (usize, usize);

/// Shrinks the heuristic by a relative hair so it stays strictly consistent
/// under floating-point rounding.
const HEURISTIC_SLACK: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum PlanResult {
    Found { cells: Vec<Cell>, cost: f64 },
    NoPath,
}

impl PlanResult {
    pub fn cells(&self) -> Option<&[Cell]> {
        match self {
            PlanResult::Found { cells, .. } => Some(cells),
            PlanResult::NoPath => None,
        }
    }

    pub fn cost(&self) -> Option<f64> {
        match self {
            PlanResult::Found { cost, .. } => Some(*cost),
            PlanResult::NoPath => None,
        }
    }
}

/// Octile distance in cells.
pub fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)
}

/// 8-connected moves out of `c` with their step lengths. Diagonal moves may
/// not cut the corner of a lethal cell.
pub fn moves(side: usize, costs: &[f64], c: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
    let free = move |i: isize, j: isize| i >= 0 && j >= 0 && (i as usize) < side && (j as usize) < side && costs[i as usize * side + j as usize].is_finite();
    let (ci, cj) = (c.0 as isize, c.1 as isize);
    [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)].into_iter().filter_map(move |(di, dj)| {
        let (ni, nj) = (ci + di, cj + dj);
        if !free(ni, nj) {
            return None;
        }
        if di != 0 && dj != 0 {
            if !free(ci + di, cj) || !free(ci, cj + dj) {
                return None;
            }
            return Some(((ni as usize, nj as usize), std::f64::consts::SQRT_2));
        }
        Some(((ni as usize, nj as usize), 1.0))
    })
}

#[derive(PartialEq)]
struct Entry {
    f: f64,
    h: f64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Reversed: BinaryHeap is a max-heap and we pop the smallest (f, h, index).
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then(o.h.total_cmp(&self.h)).then(o.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

pub fn astar(grid: &NavGrid, start: Cell, goal: Cell) -> PlanResult {
    astar_observed(grid, start, goal, |_, _, _| {})
}

/// A* that reports `(cell, g, h)` for every expanded cell.
pub fn astar_observed(grid: &NavGrid, start: Cell, goal: Cell, mut observe: impl FnMut(Cell, f64, f64)) -> PlanResult {
    let (side, costs) = (grid.side, &grid.costs[..]);
    let idx = |c: Cell| c.0 * side + c.1;
    if start.0 >= side || start.1 >= side || goal.0 >= side || goal.1 >= side {
        return PlanResult::NoPath;
    }
    if !costs[idx(start)].is_finite() || !costs[idx(goal)].is_finite() {
        return PlanResult::NoPath;
    }
    let h = |c: Cell| octile(c, goal) * grid.cost_floor * HEURISTIC_SLACK;
    let mut g = vec![f64::INFINITY; side * side];
    let mut parent = vec![usize::MAX; side * side];
    let mut closed = vec![false; side * side];
    let mut open = BinaryHeap::new();
    g[idx(start)] = 0.0;
    open.push(Entry { f: h(start), h: h(start), index: idx(start) });
    while let Some(Entry { index, h: hc, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        let c = (index / side, index % side);
        observe(c, g[index], hc);
        if c == goal {
            let mut cells = vec![c];
            let mut k = index;
            while parent[k] != usize::MAX {
                k = parent[k];
                cells.push((k / side, k % side));
            }
            cells.reverse();
            return PlanResult::Found { cells, cost: g[index] };
        }
        for (n, step) in moves(side, costs, c) {
            let ni = idx(n);
            if closed[ni] {
                continue;
            }
            let cand = g[index] + step * costs[ni];
            if cand < g[ni] {
                g[ni] = cand;
                parent[ni] = index;
                let hn = h(n);
                open.push(Entry { f: cand + hn, h: hn, index: ni });
            }
        }
    }
    PlanResult::NoPath
}
