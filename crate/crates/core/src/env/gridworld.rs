//! Goal-reaching gridworld with two oracles of complementary competence.
//!
//! Cell `(x, y)` is state `y * width + x`; the start is `(0, 0)` and the goal
//! `(width - 1, height - 1)`. Moving into a wall leaves the agent in place.
//! Entering the goal pays 1; the goal is absorbing and pays nothing after.

use crate::dp::tables::TabularPolicy;
use crate::dp::values::policy_value;
use crate::env::mdp::{deterministic_mdp, TabularMdp};
use crate::error::{invalid, MambaError, Result};
use crate::scalar::Scalar;

pub const RIGHT: usize = 0;
pub const UP: usize = 1;
pub const LEFT: usize = 2;
pub const DOWN: usize = 3;
pub const NUM_MOVES: usize = 4;

#[derive(Debug, Clone)]
pub struct GridWorld<S> {
    pub mdp: TabularMdp<S>,
    /// `[left, right]`: the left oracle always moves right, which is an
    /// optimal move everywhere but stalls against the east wall below the
    /// goal; the right oracle climbs and is optimal in the right half but
    /// stalls against the north wall in the left half.
    pub oracles: Vec<TabularPolicy<S>>,
    pub width: usize,
    pub height: usize,
}

impl<S: Scalar> GridWorld<S> {
    pub fn cell(&self, state: usize) -> (usize, usize) {
        (state % self.width, state / self.width)
    }

    pub fn state(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn goal(&self) -> usize {
        self.state(self.width - 1, self.height - 1)
    }

    pub fn left_oracle(&self) -> &TabularPolicy<S> {
        &self.oracles[0]
    }

    pub fn right_oracle(&self) -> &TabularPolicy<S> {
        &self.oracles[1]
    }
}

fn moved(width: usize, height: usize, s: usize, a: usize) -> usize {
    let (x, y) = (s % width, s / width);
    let (nx, ny) = match a {
        RIGHT => ((x + 1).min(width - 1), y),
        UP => (x, (y + 1).min(height - 1)),
        LEFT => (x.saturating_sub(1), y),
        _ => (x, y.saturating_sub(1)),
    };
    ny * width + nx
}

pub fn make_gridworld<S: Scalar>(width: usize, height: usize, horizon: usize) -> Result<GridWorld<S>> {
    if width < 2 || height < 2 {
        return invalid(format!("gridworld needs width, height >= 2, got {width}x{height}"));
    }
    if horizon == 0 {
        return invalid("gridworld horizon must be at least 1");
    }
    let n = width * height;
    let goal = n - 1;
    let mdp = deterministic_mdp(
        n,
        NUM_MOVES,
        horizon,
        0,
        |_, s, a| if s == goal { goal } else { moved(width, height, s, a) },
        |_, s, a| {
            if s != goal && moved(width, height, s, a) == goal {
                S::one()
            } else {
                S::zero()
            }
        },
    )?;
    let left = TabularPolicy::deterministic(horizon, n, NUM_MOVES, |_, _| RIGHT);
    let right = TabularPolicy::deterministic(horizon, n, NUM_MOVES, |_, s| {
        let (x, y) = (s % width, s / width);
        if x >= width / 2 && y == height - 1 {
            RIGHT
        } else {
            UP
        }
    });

    let v_left = policy_value(&mdp, &left)?;
    let v_right = policy_value(&mdp, &right)?;
    let left_wins = (0..n).any(|s| v_left.get(0, s) > v_right.get(0, s));
    let right_wins = (0..n).any(|s| v_right.get(0, s) > v_left.get(0, s));
    if !(left_wins && right_wins) {
        return Err(MambaError::ConstructionInfeasible {
            searched: 1,
            reason: format!(
                "horizon {horizon} too short for the {width}x{height} oracles to be incomparable"
            ),
        });
    }
    Ok(GridWorld {
        mdp,
        oracles: vec![left, right],
        width,
        height,
    })
}
