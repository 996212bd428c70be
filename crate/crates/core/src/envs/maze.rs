use std::collections::VecDeque;

use rand::RngCore;

use super::{Bounds, Environment, Probe, ProbeSet};
use crate::{Error, Result};

pub type Cell = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];
}

const BUNDLED: &str = include_str!("../../assets/maze20.txt");

/// Grid maze: `#` wall, `.` free, `S` start. Blocked moves leave the agent
/// in place; episodes end after `max_steps` and restart at `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Maze {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    start: Cell,
    pub max_steps: usize,
    current: Cell,
}

impl Maze {
    pub const DEFAULT_MAX_STEPS: usize = 700;

    pub fn parse(text: &str) -> Result<Maze> {
        let lines: Vec<&str> = text
            .lines()
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .collect();
        let lines: &[&str] = match lines.iter().rposition(|l| !l.is_empty()) {
            Some(last) => &lines[..=last],
            None => &[],
        };
        let err = |line: usize, column: usize, message: &str| Error::MazeParse {
            line,
            column,
            message: message.to_string(),
        };
        if lines.is_empty() {
            return Err(err(1, 1, "empty maze"));
        }
        let width = lines[0].chars().count();
        let mut walls = Vec::with_capacity(width * lines.len());
        let mut start = None;
        for (r, line) in lines.iter().enumerate() {
            let n = line.chars().count();
            if n != width {
                return Err(err(r + 1, n.min(width) + 1, &format!("row has {n} cells, expected {width}")));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    'S' => {
                        if start.is_some() {
                            return Err(err(r + 1, c + 1, "more than one start cell"));
                        }
                        start = Some((r, c));
                        walls.push(false);
                    }
                    other => return Err(err(r + 1, c + 1, &format!("unexpected character {other:?}"))),
                }
            }
        }
        let start = start.ok_or_else(|| err(lines.len(), 1, "no start cell 'S'"))?;
        Ok(Maze {
            width,
            height: lines.len(),
            walls,
            start,
            max_steps: Self::DEFAULT_MAX_STEPS,
            current: start,
        })
    }

    /// The bundled 20×20 maze.
    pub fn bundled() -> Maze {
        Maze::parse(BUNDLED).expect("bundled maze is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn current(&self) -> Cell {
        self.current
    }

    pub fn is_wall(&self, (r, c): Cell) -> bool {
        self.walls[r * self.width + c]
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height)
            .flat_map(move |r| (0..self.width).map(move |c| (r, c)))
            .filter(|&cell| !self.is_wall(cell))
    }

    pub fn cell_index(&self, (r, c): Cell) -> usize {
        r * self.width + c
    }

    /// Cell reached by taking `action` from `cell`.
    pub fn step_from(&self, cell: Cell, action: Action) -> Result<Cell> {
        let (r, c) = cell;
        if r >= self.height || c >= self.width || self.is_wall(cell) {
            return Err(Error::invalid(format!("cell {cell:?} is not a free cell")));
        }
        let target = match action {
            Action::Up => r.checked_sub(1).map(|r| (r, c)),
            Action::Down => (r + 1 < self.height).then_some((r + 1, c)),
            Action::Left => c.checked_sub(1).map(|c| (r, c)),
            Action::Right => (c + 1 < self.width).then_some((r, c + 1)),
        };
        Ok(match target {
            Some(t) if !self.is_wall(t) => t,
            _ => cell,
        })
    }

    /// Shortest-path step counts from the start; `None` for walls and
    /// unreachable cells.
    pub fn distances_from_start(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.width * self.height];
        let mut queue = VecDeque::from([self.start]);
        dist[self.cell_index(self.start)] = Some(0);
        while let Some(cell) = queue.pop_front() {
            let d = dist[self.cell_index(cell)].expect("queued cells have a distance");
            for a in Action::ALL {
                let next = self.step_from(cell, a).expect("queued cells are free");
                let slot = &mut dist[next.0 * self.width + next.1];
                if slot.is_none() {
                    *slot = Some(d + 1);
                    queue.push_back(next);
                }
            }
        }
        dist
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.current.0 as f64, self.current.1 as f64]
    }
}

impl Environment for Maze {
    fn num_actions(&self) -> usize {
        Action::ALL.len()
    }

    fn episode_len(&self) -> usize {
        self.max_steps
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.current = self.start;
        self.obs()
    }

    fn step(&mut self, action: usize) -> Vec<f64> {
        self.current = self
            .step_from(self.current, Action::ALL[action])
            .expect("agent stays on free cells");
        self.obs()
    }

    fn state_key(&self) -> u64 {
        self.cell_index(self.current) as u64
    }

    fn position(&self) -> [f64; 2] {
        [self.current.1 as f64, self.current.0 as f64]
    }

    fn coverage_grid(&self) -> (Bounds, usize) {
        let n = self.width.max(self.height);
        (
            Bounds {
                min: [0.0; 2],
                max: [n as f64; 2],
            },
            n,
        )
    }

    fn probes(&self) -> Option<ProbeSet> {
        Some(ProbeSet {
            width: self.width,
            height: self.height,
            cells: self
                .free_cells()
                .map(|(r, c)| Probe {
                    index: self.cell_index((r, c)),
                    observation: vec![r as f64, c as f64],
                    position: [c as f64, r as f64],
                })
                .collect(),
        })
    }
}
