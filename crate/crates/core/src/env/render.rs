use super::layout::{Cell, GridLayout};

impl GridLayout {
    /// Text rendering, one character per cell: `#` wall, `.` floor, `A` agent,
    /// `G` goal, `+` door, `*` the agent's current sub-goal.
    pub fn render(&self, agent: Option<Cell>) -> String {
        let subgoal = agent.and_then(|a| self.subgoal_for(a).ok());
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in 0..self.height {
            for col in 0..self.width {
                let cell = Cell::new(row, col);
                let ch = if Some(cell) == agent {
                    'A'
                } else if cell == self.goal_cell {
                    'G'
                } else if Some(cell) == subgoal {
                    '*'
                } else if self.is_door(cell) {
                    '+'
                } else if self.is_wall(cell) {
                    '#'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}
