//! Small two-agent grid games. Cells are indexed row-major from the top-left.

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;
pub const STAY: usize = 4;
pub const FORAGE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
}

impl Grid {
    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn cell(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell / self.cols, cell % self.cols)
    }

    /// Destination of a move; off-grid moves and non-move actions stay put.
    pub fn moved(&self, cell: usize, action: usize) -> usize {
        let (r, c) = self.coords(cell);
        match action {
            UP if r > 0 => self.cell(r - 1, c),
            DOWN if r + 1 < self.rows => self.cell(r + 1, c),
            LEFT if c > 0 => self.cell(r, c - 1),
            RIGHT if c + 1 < self.cols => self.cell(r, c + 1),
            _ => cell,
        }
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        ra.abs_diff(rb) + ca.abs_diff(cb) == 1
    }

    pub fn one_hot(&self, cell: usize, out: &mut Vec<f64>) {
        let start = out.len();
        out.resize(start + self.cells(), 0.0);
        out[start + cell] = 1.0;
    }
}

/// Outcome of one joint move before horizon handling.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub next: u32,
    pub reward: f64,
    pub terminal: bool,
    pub success: bool,
}

/// 3x3 coordination grid: both agents on the top-left cell pays 0.9, one
/// alone pays -0.1, anyone on the bottom-right adds 0.1. Any reward event
/// ends the episode.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    pub grid: Grid,
    pub starts: [usize; 2],
}

impl Default for GridWorld {
    fn default() -> Self {
        let grid = Grid { rows: 3, cols: 3 };
        GridWorld {
            grid,
            starts: [grid.cell(0, 2), grid.cell(2, 0)],
        }
    }
}

impl GridWorld {
    pub const BOTH_GOAL: f64 = 0.9;
    pub const LONE_GOAL: f64 = -0.1;
    pub const SIDE_GOAL: f64 = 0.1;

    pub fn encode(&self, p1: usize, p2: usize) -> u32 {
        (p1 * self.grid.cells() + p2) as u32
    }

    pub fn decode(&self, code: u32) -> (usize, usize) {
        let n = self.grid.cells();
        (code as usize / n, code as usize % n)
    }

    pub fn observe(&self, code: u32, agent: usize) -> Vec<f64> {
        let (p1, p2) = self.decode(code);
        let (own, other) = if agent == 0 { (p1, p2) } else { (p2, p1) };
        let mut obs = Vec::with_capacity(2 * self.grid.cells());
        self.grid.one_hot(own, &mut obs);
        self.grid.one_hot(other, &mut obs);
        obs
    }

    pub fn step(&self, code: u32, actions: &[usize]) -> GridOutcome {
        let (p1, p2) = self.decode(code);
        let q1 = self.grid.moved(p1, actions[0]);
        let q2 = self.grid.moved(p2, actions[1]);
        let goal = self.grid.cell(0, 0);
        let side = self.grid.cell(self.grid.rows - 1, self.grid.cols - 1);
        let on_goal = (q1 == goal) as usize + (q2 == goal) as usize;
        let mut reward = match on_goal {
            2 => Self::BOTH_GOAL,
            1 => Self::LONE_GOAL,
            _ => 0.0,
        };
        let on_side = q1 == side || q2 == side;
        if on_side {
            reward += Self::SIDE_GOAL;
        }
        GridOutcome {
            next: self.encode(q1, q2),
            reward,
            terminal: on_goal > 0 || on_side,
            success: on_goal == 2,
        }
    }
}

/// Two agents push a width-2 boulder up a 5x4 grid. The boulder moves one row
/// only when both agents stand directly beneath its two cells and both move
/// up; it is delivered when it reaches the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct BoulderPush {
    pub grid: Grid,
    /// Leftmost boulder column; the boulder covers this column and the next.
    pub boulder_col: usize,
    pub boulder_start_row: usize,
    pub starts: [usize; 2],
}

impl Default for BoulderPush {
    fn default() -> Self {
        let grid = Grid { rows: 5, cols: 4 };
        BoulderPush {
            grid,
            boulder_col: 1,
            boulder_start_row: 2,
            starts: [grid.cell(4, 0), grid.cell(4, 3)],
        }
    }
}

impl BoulderPush {
    pub const DELIVERED: f64 = 0.1;
    pub const LONE_PUSH: f64 = -0.02;

    fn boulder_rows(&self) -> usize {
        self.boulder_start_row + 1
    }

    pub fn encode(&self, p1: usize, p2: usize, boulder_row: usize) -> u32 {
        ((p1 * self.grid.cells() + p2) * self.boulder_rows() + boulder_row) as u32
    }

    pub fn decode(&self, code: u32) -> (usize, usize, usize) {
        let code = code as usize;
        let br = code % self.boulder_rows();
        let rest = code / self.boulder_rows();
        (rest / self.grid.cells(), rest % self.grid.cells(), br)
    }

    pub fn obs_dim(&self) -> usize {
        2 * self.grid.cells() + self.boulder_rows()
    }

    pub fn observe(&self, code: u32, agent: usize) -> Vec<f64> {
        let (p1, p2, br) = self.decode(code);
        let (own, other) = if agent == 0 { (p1, p2) } else { (p2, p1) };
        let mut obs = Vec::with_capacity(self.obs_dim());
        self.grid.one_hot(own, &mut obs);
        self.grid.one_hot(other, &mut obs);
        let start = obs.len();
        obs.resize(start + self.boulder_rows(), 0.0);
        obs[start + br] = 1.0;
        obs
    }

    fn occupied_by_boulder(&self, cell: usize, br: usize) -> bool {
        let (r, c) = self.grid.coords(cell);
        r == br && (c == self.boulder_col || c == self.boulder_col + 1)
    }

    /// Push slot (0 = left, 1 = right) of an agent standing under the boulder.
    fn push_slot(&self, cell: usize, br: usize) -> Option<usize> {
        let (r, c) = self.grid.coords(cell);
        if r == br + 1 && (c == self.boulder_col || c == self.boulder_col + 1) {
            Some(c - self.boulder_col)
        } else {
            None
        }
    }

    pub fn step(&self, code: u32, actions: &[usize]) -> GridOutcome {
        let (p1, p2, br) = self.decode(code);
        let pos = [p1, p2];
        let attempts: Vec<Option<usize>> = (0..2)
            .map(|i| {
                (actions[i] == UP)
                    .then(|| self.push_slot(pos[i], br))
                    .flatten()
            })
            .collect();
        let pushed = matches!((attempts[0], attempts[1]), (Some(a), Some(b)) if a != b);
        if pushed {
            let nbr = br - 1;
            let q1 = self.grid.moved(p1, UP);
            let q2 = self.grid.moved(p2, UP);
            let delivered = nbr == 0;
            return GridOutcome {
                next: self.encode(q1, q2, nbr),
                reward: if delivered { Self::DELIVERED } else { 0.0 },
                terminal: delivered,
                success: delivered,
            };
        }
        let mut next = pos;
        for i in 0..2 {
            if attempts[i].is_some() {
                continue;
            }
            let q = self.grid.moved(pos[i], actions[i]);
            if !self.occupied_by_boulder(q, br) {
                next[i] = q;
            }
        }
        let lone = attempts.iter().any(Option::is_some);
        GridOutcome {
            next: self.encode(next[0], next[1], br),
            reward: if lone { Self::LONE_PUSH } else { 0.0 },
            terminal: false,
            success: false,
        }
    }
}

/// Level-based foraging with a single food item that needs both agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Lbf {
    pub grid: Grid,
    pub food: usize,
    pub starts: [usize; 2],
}

impl Default for Lbf {
    fn default() -> Self {
        let grid = Grid { rows: 5, cols: 5 };
        Lbf {
            grid,
            food: grid.cell(2, 2),
            starts: [grid.cell(0, 0), grid.cell(4, 4)],
        }
    }
}

impl Lbf {
    pub const FORAGED: f64 = 0.5;
    pub const LONE_FORAGE: f64 = -0.015;

    pub fn encode(&self, p1: usize, p2: usize) -> u32 {
        (p1 * self.grid.cells() + p2) as u32
    }

    pub fn decode(&self, code: u32) -> (usize, usize) {
        let n = self.grid.cells();
        (code as usize / n, code as usize % n)
    }

    pub fn observe(&self, code: u32, agent: usize) -> Vec<f64> {
        let (p1, p2) = self.decode(code);
        let (own, other) = if agent == 0 { (p1, p2) } else { (p2, p1) };
        let mut obs = Vec::with_capacity(2 * self.grid.cells());
        self.grid.one_hot(own, &mut obs);
        self.grid.one_hot(other, &mut obs);
        obs
    }

    pub fn step(&self, code: u32, actions: &[usize]) -> GridOutcome {
        let (p1, p2) = self.decode(code);
        let pos = [p1, p2];
        let attempt: Vec<bool> = (0..2)
            .map(|i| actions[i] == FORAGE && self.grid.adjacent(pos[i], self.food))
            .collect();
        if attempt[0] && attempt[1] {
            return GridOutcome {
                next: code,
                reward: Self::FORAGED,
                terminal: true,
                success: true,
            };
        }
        let mut next = pos;
        for i in 0..2 {
            let q = self.grid.moved(pos[i], actions[i]);
            if q != self.food {
                next[i] = q;
            }
        }
        GridOutcome {
            next: self.encode(next[0], next[1]),
            reward: if attempt.iter().any(|&a| a) {
                Self::LONE_FORAGE
            } else {
                0.0
            },
            terminal: false,
            success: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gridworld_events() {
        let gw = GridWorld::default();
        let g = gw.grid;
        // both step onto the top-left together
        let s = gw.encode(g.cell(0, 1), g.cell(1, 0));
        let o = gw.step(s, &[LEFT, UP]);
        assert_eq!((o.reward, o.terminal, o.success), (0.9, true, true));
        // one arrives alone
        let o = gw.step(s, &[LEFT, STAY]);
        assert_eq!((o.reward, o.terminal, o.success), (-0.1, true, false));
        // bottom-right side goal
        let s = gw.encode(g.cell(2, 1), g.cell(1, 1));
        let o = gw.step(s, &[RIGHT, STAY]);
        assert_eq!((o.reward, o.terminal), (0.1, true));
        // nothing happens
        let s = gw.encode(g.cell(1, 1), g.cell(1, 2));
        let o = gw.step(s, &[UP, STAY]);
        assert_eq!((o.reward, o.terminal), (0.0, false));
    }

    #[test]
    fn boulder_needs_both_pushers() {
        let bp = BoulderPush::default();
        let g = bp.grid;
        let s = bp.encode(g.cell(3, 1), g.cell(3, 2), 2);
        let o = bp.step(s, &[UP, UP]);
        assert_eq!(o.reward, 0.0);
        assert_eq!(bp.decode(o.next), (g.cell(2, 1), g.cell(2, 2), 1));
        let o = bp.step(o.next, &[UP, UP]);
        assert_eq!((o.reward, o.terminal, o.success), (0.1, true, true));

        let o = bp.step(s, &[UP, LEFT]);
        assert_eq!(o.reward, -0.02);
        assert_eq!(bp.decode(o.next), (g.cell(3, 1), g.cell(3, 1), 2));

        let far = bp.encode(g.cell(4, 0), g.cell(4, 3), 2);
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(bp.step(far, &[a, b]).reward, 0.0);
            }
        }
    }

    #[test]
    fn boulder_blocks_movement() {
        let bp = BoulderPush::default();
        let g = bp.grid;
        let s = bp.encode(g.cell(2, 0), g.cell(1, 1), 2);
        let o = bp.step(s, &[RIGHT, DOWN]);
        assert_eq!(bp.decode(o.next), (g.cell(2, 0), g.cell(1, 1), 2));
    }

    #[test]
    fn lbf_foraging() {
        let lbf = Lbf::default();
        let g = lbf.grid;
        let s = lbf.encode(g.cell(1, 2), g.cell(2, 3));
        let o = lbf.step(s, &[FORAGE, FORAGE]);
        assert_eq!((o.reward, o.terminal, o.success), (0.5, true, true));
        let o = lbf.step(s, &[FORAGE, UP]);
        assert_eq!((o.reward, o.terminal), (-0.015, false));
        let far = lbf.encode(g.cell(0, 0), g.cell(4, 4));
        let o = lbf.step(far, &[FORAGE, FORAGE]);
        assert_eq!((o.reward, o.terminal), (0.0, false));
        // the food cell is not walkable
        let o = lbf.step(s, &[DOWN, LEFT]);
        assert_eq!(o.next, s);
    }
}
