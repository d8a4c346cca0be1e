//! The three-room gridworld.
//!
//! Rooms are laid out left to right, separated by wall columns with doors.
//! The agent starts anywhere in the non-goal rooms and must reach the goal in
//! the rightmost room within `max_steps` moves. Each action costs 0.1; the
//! step that enters the goal additionally pays 10.
//!
//! Observations are binary channel grids: the egocentric 5x5 view used as the
//! regular input, and two privileged encodings (full state and the current
//! room with its sub-goal marked).

mod dynamics;
mod layout;
mod observe;
mod render;

pub use dynamics::{Action, EnvState, StepResult, GOAL_REWARD, STEP_REWARD};
pub use layout::{Cell, GridLayout, LayoutConfig};
pub use observe::{ObsKind, Observation, ObservationSet, EGO_SIZE};
