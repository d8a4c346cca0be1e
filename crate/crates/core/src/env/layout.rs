use std::collections::VecDeque;
use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A grid coordinate, `row` counted from the top.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Neighbour in direction `(dr, dc)`, or `None` when it would leave the
    /// non-negative quadrant.
    pub(crate) fn offset(self, dr: isize, dc: isize) -> Option<Cell> {
        let row = self.row.checked_add_signed(dr)?;
        let col = self.col.checked_add_signed(dc)?;
        Some(Cell { row, col })
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Geometry of the rooms world. Rooms sit side by side, separated by
/// single wall columns pierced by doors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutConfig {
    /// Interior rows per room.
    pub room_rows: usize,
    /// Interior columns per room.
    pub room_cols: usize,
    pub rooms: usize,
    /// Door rows for each separating wall, left to right. Every wall must
    /// carry the same number of doors.
    pub door_rows: Vec<Vec<usize>>,
    /// `[row, col]` of the goal.
    pub goal: [usize; 2],
    /// Whether the full-state view carries a goal channel with the goal set.
    pub mark_goal_in_pi: bool,
    /// Episode step limit.
    pub max_steps: usize,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            room_rows: 6,
            room_cols: 6,
            rooms: 3,
            door_rows: vec![vec![3], vec![4]],
            goal: [4, 19],
            mark_goal_in_pi: true,
            max_steps: 100,
        }
    }
}

/// Static maze geometry plus the BFS tables derived from it.
#[derive(Clone, Debug)]
pub struct GridLayout {
    pub height: usize,
    pub width: usize,
    wall: Vec<bool>,
    pub door_cells: Vec<Cell>,
    pub goal_cell: Cell,
    pub room_column_spans: Vec<RangeInclusive<usize>>,
    pub doors_per_wall: usize,
    pub mark_goal_in_pi: bool,
    pub max_steps: usize,
    room_rows: usize,
    room_cols: usize,
    /// Row-major floor cells; the position in this list is the class index
    /// used by the probe.
    floor: Vec<Cell>,
    floor_index: Vec<Option<usize>>,
    goal_distance: Vec<Option<usize>>,
    room_of: Vec<Option<usize>>,
    subgoal: Vec<Option<Cell>>,
    starts: Vec<Cell>,
}

impl Default for GridLayout {
    fn default() -> Self {
        GridLayout::build(&LayoutConfig::default()).expect("default layout is valid")
    }
}

impl GridLayout {
    /// Builds and validates a layout. The floor graph must be connected.
    pub fn build(config: &LayoutConfig) -> Result<Self> {
        let LayoutConfig {
            room_rows,
            room_cols,
            rooms,
            ref door_rows,
            goal,
            mark_goal_in_pi,
            max_steps,
        } = *config;
        if room_rows == 0 || room_cols == 0 {
            return Err(Error::Layout("rooms must have at least one interior row and column".into()));
        }
        if rooms == 0 {
            return Err(Error::Layout("at least one room is required".into()));
        }
        if max_steps == 0 {
            return Err(Error::Layout("max_steps must be positive".into()));
        }
        if door_rows.len() != rooms - 1 {
            return Err(Error::Layout(format!(
                "{} rooms need {} door walls, got {}",
                rooms,
                rooms - 1,
                door_rows.len()
            )));
        }
        let doors_per_wall = door_rows.first().map_or(1, Vec::len);
        if doors_per_wall == 0 {
            return Err(Error::Layout("doors_per_wall must be at least 1".into()));
        }

        let height = room_rows + 2;
        let width = rooms * (room_cols + 1) + 1;
        let spans: Vec<_> = (0..rooms)
            .map(|r| {
                let start = 1 + r * (room_cols + 1);
                start..=start + room_cols - 1
            })
            .collect();

        let mut wall = vec![true; height * width];
        for span in &spans {
            for row in 1..=room_rows {
                for col in span.clone() {
                    wall[row * width + col] = false;
                }
            }
        }

        let mut door_cells = Vec::new();
        for (w, rows) in door_rows.iter().enumerate() {
            if rows.len() != doors_per_wall {
                return Err(Error::Layout(format!(
                    "wall {} has {} doors, expected {}",
                    w,
                    rows.len(),
                    doors_per_wall
                )));
            }
            let col = (w + 1) * (room_cols + 1);
            let mut sorted = rows.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != rows.len() {
                return Err(Error::Layout(format!("wall {w} has duplicate door rows")));
            }
            for row in sorted {
                if row == 0 || row > room_rows {
                    return Err(Error::Layout(format!(
                        "door row {row} on wall column {col} is not interior (1..={room_rows})"
                    )));
                }
                wall[row * width + col] = false;
                door_cells.push(Cell::new(row, col));
            }
        }

        let goal_cell = Cell::new(goal[0], goal[1]);
        if goal_cell.row >= height || goal_cell.col >= width || wall[goal_cell.row * width + goal_cell.col] {
            return Err(Error::Layout(format!("goal {goal_cell} is not a floor cell")));
        }
        let last = spans.last().expect("rooms > 0");
        if !last.contains(&goal_cell.col) {
            return Err(Error::Layout(format!("goal {goal_cell} is not inside the rightmost room")));
        }

        let mut layout = GridLayout {
            height,
            width,
            wall,
            door_cells,
            goal_cell,
            room_column_spans: spans,
            doors_per_wall,
            mark_goal_in_pi,
            max_steps,
            room_rows,
            room_cols,
            floor: Vec::new(),
            floor_index: Vec::new(),
            goal_distance: Vec::new(),
            room_of: Vec::new(),
            subgoal: Vec::new(),
            starts: Vec::new(),
        };
        layout.index_floor();
        layout.goal_distance = layout.bfs_from(goal_cell);
        if let Some(cut) = layout.floor.iter().find(|c| layout.goal_distance[layout.idx(**c)].is_none()) {
            return Err(Error::Layout(format!("floor cell {cut} is not connected to the goal")));
        }
        layout.assign_rooms();
        layout.assign_subgoals();
        layout.starts = layout
            .floor
            .iter()
            .copied()
            .filter(|c| !layout.is_door(*c))
            .filter(|c| matches!(layout.room_of(*c), Some(r) if r + 1 < rooms))
            .collect();
        Ok(layout)
    }

    #[inline]
    pub(crate) fn idx(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    pub fn is_wall(&self, cell: Cell) -> bool {
        !self.in_bounds(cell) || self.wall[self.idx(cell)]
    }

    pub fn is_floor(&self, cell: Cell) -> bool {
        !self.is_wall(cell)
    }

    pub fn is_door(&self, cell: Cell) -> bool {
        self.door_cells.contains(&cell)
    }

    /// Row-major wall mask, `height * width` entries.
    pub fn wall_mask(&self) -> &[bool] {
        &self.wall
    }

    pub fn rooms(&self) -> usize {
        self.room_column_spans.len()
    }

    pub fn room_rows(&self) -> usize {
        self.room_rows
    }

    pub fn room_cols(&self) -> usize {
        self.room_cols
    }

    /// All floor cells in row-major order.
    pub fn floor_cells(&self) -> &[Cell] {
        &self.floor
    }

    /// Class index of a floor cell (its position in [`floor_cells`](Self::floor_cells)).
    pub fn floor_index(&self, cell: Cell) -> Option<usize> {
        if !self.in_bounds(cell) {
            return None;
        }
        self.floor_index[self.idx(cell)]
    }

    /// Room containing `cell`. Door cells belong to the room on their right.
    pub fn room_of(&self, cell: Cell) -> Option<usize> {
        if !self.in_bounds(cell) {
            return None;
        }
        self.room_of[self.idx(cell)]
    }

    /// 4-connected BFS distance from `cell` to the goal.
    pub fn shortest_path_distance(&self, cell: Cell) -> Result<usize> {
        if self.is_wall(cell) {
            return Err(Error::NotFloor {
                row: cell.row,
                col: cell.col,
            });
        }
        Ok(self.goal_distance[self.idx(cell)].expect("connectivity checked at build"))
    }

    /// Cell marked in the sub-goal channel when the agent stands on `cell`:
    /// the door to traverse next, or the goal inside the goal room.
    pub fn subgoal_for(&self, cell: Cell) -> Result<Cell> {
        if self.is_wall(cell) {
            return Err(Error::NotFloor {
                row: cell.row,
                col: cell.col,
            });
        }
        Ok(self.subgoal[self.idx(cell)].expect("every floor cell has a subgoal"))
    }

    /// Floor cells of every room except the goal room, doors excluded,
    /// row-major.
    pub fn enumerate_start_positions(&self) -> &[Cell] {
        &self.starts
    }

    /// Column range (inclusive) of the sub-goal window for `room`: the room
    /// interior plus the wall column on each side.
    pub(crate) fn room_window_cols(&self, room: usize) -> RangeInclusive<usize> {
        let span = &self.room_column_spans[room];
        span.start() - 1..=span.end() + 1
    }

    fn index_floor(&mut self) {
        self.floor_index = vec![None; self.height * self.width];
        self.floor.clear();
        for row in 0..self.height {
            for col in 0..self.width {
                let cell = Cell::new(row, col);
                let at = self.idx(cell);
                if !self.wall[at] {
                    let i = self.floor.len();
                    self.floor_index[at] = Some(i);
                    self.floor.push(cell);
                }
            }
        }
    }

    fn assign_rooms(&mut self) {
        let mut room_of = vec![None; self.height * self.width];
        for &cell in &self.floor {
            let room = self
                .room_column_spans
                .iter()
                .position(|s| s.contains(&cell.col))
                // a door sits on wall column (r + 1) * (room_cols + 1), left of room r + 1
                .unwrap_or(cell.col / (self.room_cols + 1));
            room_of[self.idx(cell)] = Some(room);
        }
        self.room_of = room_of;
    }

    fn assign_subgoals(&mut self) {
        let rooms = self.rooms();
        let mut subgoal = vec![None; self.height * self.width];
        for &cell in &self.floor {
            let room = self.room_of(cell).expect("floor cell has a room");
            let target = if room + 1 == rooms {
                self.goal_cell
            } else {
                let wall_col = (room + 1) * (self.room_cols + 1);
                let from_cell = self.bfs_from(cell);
                self.door_cells
                    .iter()
                    .filter(|d| d.col == wall_col)
                    .min_by_key(|d| {
                        let total = from_cell[self.idx(**d)].unwrap_or(usize::MAX / 2)
                            + self.goal_distance[self.idx(**d)].unwrap_or(usize::MAX / 2);
                        (total, d.row)
                    })
                    .copied()
                    .expect("every wall carries at least one door")
            };
            subgoal[self.idx(cell)] = Some(target);
        }
        self.subgoal = subgoal;
    }

    /// BFS distances from `source` to every cell (`None` for walls and
    /// unreachable cells).
    pub(crate) fn bfs_from(&self, source: Cell) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.height * self.width];
        let mut queue = VecDeque::new();
        dist[self.idx(source)] = Some(0);
        queue.push_back(source);
        while let Some(cell) = queue.pop_front() {
            let d = dist[self.idx(cell)].expect("queued cells have distances");
            for action in super::Action::ALL {
                let (dr, dc) = action.delta();
                if let Some(next) = cell.offset(dr, dc) {
                    if self.is_floor(next) && dist[self.idx(next)].is_none() {
                        dist[self.idx(next)] = Some(d + 1);
                        queue.push_back(next);
                    }
                }
            }
        }
        dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_has_110_floor_cells() {
        let layout = GridLayout::default();
        let count = layout.wall_mask().iter().filter(|w| !**w).count();
        assert_eq!(count, 110);
        assert_eq!(layout.floor_cells().len(), 110);
        assert_eq!(layout.height, 8);
        assert_eq!(layout.width, 22);
        assert_eq!(layout.room_column_spans, vec![1..=6, 8..=13, 15..=20]);
        assert_eq!(layout.door_cells, vec![Cell::new(3, 7), Cell::new(4, 14)]);
    }

    #[test]
    fn borders_and_separators_are_walls() {
        let layout = GridLayout::default();
        for col in 0..layout.width {
            assert!(layout.is_wall(Cell::new(0, col)));
            assert!(layout.is_wall(Cell::new(layout.height - 1, col)));
        }
        for row in 0..layout.height {
            assert!(layout.is_wall(Cell::new(row, 0)));
            assert!(layout.is_wall(Cell::new(row, layout.width - 1)));
            for col in [7, 14] {
                let cell = Cell::new(row, col);
                assert_eq!(layout.is_wall(cell), !layout.is_door(cell));
            }
        }
    }

    #[test]
    fn every_floor_cell_reaches_the_goal() {
        let layout = GridLayout::default();
        // independent flood fill over the raw wall mask
        let mut seen = vec![false; layout.height * layout.width];
        let mut stack = vec![layout.goal_cell];
        seen[layout.idx(layout.goal_cell)] = true;
        while let Some(c) = stack.pop() {
            for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                let Some(n) = c.offset(dr, dc) else { continue };
                if layout.is_floor(n) && !seen[layout.idx(n)] {
                    seen[layout.idx(n)] = true;
                    stack.push(n);
                }
            }
        }
        assert!(layout.floor_cells().iter().all(|c| seen[layout.idx(*c)]));
    }

    #[test]
    fn distances_match_hand_values() {
        let layout = GridLayout::default();
        assert_eq!(layout.shortest_path_distance(layout.goal_cell).unwrap(), 0);
        assert_eq!(layout.shortest_path_distance(Cell::new(4, 18)).unwrap(), 1);
        assert_eq!(layout.shortest_path_distance(Cell::new(1, 1)).unwrap(), 21);
        assert!(matches!(
            layout.shortest_path_distance(Cell::new(0, 0)),
            Err(Error::NotFloor { .. })
        ));
    }

    #[test]
    fn goal_on_wall_column_is_rejected() {
        let config = LayoutConfig {
            goal: [4, 14],
            ..LayoutConfig::default()
        };
        assert!(matches!(GridLayout::build(&config), Err(Error::Layout(_))));
    }

    #[test]
    fn goal_outside_right_room_is_rejected() {
        let config = LayoutConfig {
            goal: [4, 10],
            ..LayoutConfig::default()
        };
        assert!(GridLayout::build(&config).is_err());
    }

    #[test]
    fn border_door_is_rejected() {
        let config = LayoutConfig {
            door_rows: vec![vec![0], vec![4]],
            ..LayoutConfig::default()
        };
        assert!(GridLayout::build(&config).is_err());
        let config = LayoutConfig {
            door_rows: vec![vec![3], vec![7]],
            ..LayoutConfig::default()
        };
        assert!(GridLayout::build(&config).is_err());
    }

    #[test]
    fn missing_doors_are_rejected() {
        let config = LayoutConfig {
            door_rows: vec![vec![], vec![]],
            ..LayoutConfig::default()
        };
        assert!(GridLayout::build(&config).is_err());
        let config = LayoutConfig {
            door_rows: vec![vec![3]],
            ..LayoutConfig::default()
        };
        assert!(GridLayout::build(&config).is_err());
    }

    #[test]
    fn start_positions_are_left_and_centre_interiors() {
        let layout = GridLayout::default();
        let starts = layout.enumerate_start_positions();
        assert_eq!(starts.len(), 72);
        assert!(starts.iter().all(|c| c.col < 14 && !layout.is_door(*c)));
        let mut sorted = starts.to_vec();
        sorted.sort();
        assert_eq!(sorted, starts);
        assert_eq!(layout.enumerate_start_positions(), starts);
    }

    #[test]
    fn doors_belong_to_the_room_on_their_right() {
        let layout = GridLayout::default();
        assert_eq!(layout.room_of(Cell::new(3, 7)), Some(1));
        assert_eq!(layout.room_of(Cell::new(4, 14)), Some(2));
        assert_eq!(layout.room_of(Cell::new(1, 1)), Some(0));
        assert_eq!(layout.room_of(Cell::new(0, 7)), None);
    }

    #[test]
    fn subgoals_follow_the_corridor_sequence() {
        let layout = GridLayout::default();
        for &cell in layout.floor_cells() {
            let expected = match layout.room_of(cell).unwrap() {
                0 => Cell::new(3, 7),
                1 => Cell::new(4, 14),
                _ => layout.goal_cell,
            };
            assert_eq!(layout.subgoal_for(cell).unwrap(), expected, "at {cell}");
        }
    }

    #[test]
    fn two_doors_per_wall_pick_the_nearer_corridor() {
        let config = LayoutConfig {
            door_rows: vec![vec![1, 6], vec![1, 6]],
            goal: [6, 20],
            ..LayoutConfig::default()
        };
        let layout = GridLayout::build(&config).unwrap();
        assert_eq!(layout.doors_per_wall, 2);
        assert_eq!(layout.floor_cells().len(), 112);
        assert_eq!(layout.subgoal_for(Cell::new(6, 1)).unwrap(), Cell::new(6, 7));
        assert_eq!(layout.subgoal_for(Cell::new(1, 1)).unwrap(), Cell::new(1, 7));
    }
}
