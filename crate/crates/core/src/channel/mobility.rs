//! Manhattan-grid vehicle mobility.
//!
//! Roads form a rectangular lattice with spacing `block_m`. A vehicle drives
//! at constant speed along a road; at every intersection it goes straight with
//! probability 0.5 and turns left or right with probability 0.25 each. Options
//! that would leave the grid are dropped and the rest renormalized. A dead end
//! forces a U-turn.

use rand::Rng;

use crate::config::GridConfig;
use crate::error::{Error, Result};
use crate::rng::{self, tag};

pub const P_STRAIGHT: f64 = 0.5;
pub const P_LEFT: f64 = 0.25;
pub const P_RIGHT: f64 = 0.25;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heading {
    East,
    North,
    West,
    South,
}

impl Heading {
    fn unit(self) -> (f64, f64) {
        match self {
            Heading::East => (1.0, 0.0),
            Heading::North => (0.0, 1.0),
            Heading::West => (-1.0, 0.0),
            Heading::South => (0.0, -1.0),
        }
    }

    fn left(self) -> Heading {
        match self {
            Heading::East => Heading::North,
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
        }
    }

    fn right(self) -> Heading {
        self.left().left().left()
    }

    fn reverse(self) -> Heading {
        self.left().left()
    }

    /// Heading angle in radians, counter-clockwise from +x.
    pub fn angle(self) -> f64 {
        let (x, y) = self.unit();
        y.atan2(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Turn {
    Straight,
    Left,
    Right,
    UTurn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnEvent {
    pub slot: usize,
    pub turn: Turn,
    /// All three of straight/left/right were available at this intersection.
    pub full_choice: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Position in meters at the start of each slot.
    pub positions: Vec<(f64, f64)>,
    /// Heading angle (radians from +x) at each slot.
    pub headings: Vec<f64>,
    pub speed: f64,
    pub slot_duration_s: f64,
    pub turn_events: Vec<TurnEvent>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// A vehicle parked at `pos` for `slots` slots.
    pub fn stationary(pos: (f64, f64), heading: f64, slots: usize, slot_duration_s: f64) -> Self {
        Self {
            positions: vec![pos; slots],
            headings: vec![heading; slots],
            speed: 0.0,
            slot_duration_s,
            turn_events: Vec::new(),
        }
    }
}

impl GridConfig {
    pub(crate) fn check(&self) -> Result<()> {
        if !(self.block_m > 0.0 && self.block_m.is_finite()) {
            return Err(Error::config(format!("grid block_m must be positive, got {}", self.block_m)));
        }
        if self.horizontal_roads + self.vertical_roads == 0 {
            return Err(Error::config("grid must contain at least one road"));
        }
        Ok(())
    }

    /// Length of the horizontal roads.
    pub fn extent_x(&self) -> f64 {
        self.vertical_roads.saturating_sub(1).max(1) as f64 * self.block_m
    }

    /// Length of the vertical roads.
    pub fn extent_y(&self) -> f64 {
        self.horizontal_roads.saturating_sub(1).max(1) as f64 * self.block_m
    }

    pub fn intersection_count(&self) -> usize {
        self.horizontal_roads * self.vertical_roads
    }

    fn has_vertical_road_at(&self, x: f64) -> bool {
        let i = (x / self.block_m).round();
        (x - i * self.block_m).abs() < EPS && i >= 0.0 && (i as usize) < self.vertical_roads
    }

    fn has_horizontal_road_at(&self, y: f64) -> bool {
        let j = (y / self.block_m).round();
        (y - j * self.block_m).abs() < EPS && j >= 0.0 && (j as usize) < self.horizontal_roads
    }

    /// Whether `p` lies on some road of the grid.
    pub fn on_road(&self, p: (f64, f64)) -> bool {
        let tol = 1e-6;
        let on_h = self.has_horizontal_road_near(p.1, tol) && p.0 >= -tol && p.0 <= self.extent_x() + tol;
        let on_v = self.has_vertical_road_near(p.0, tol) && p.1 >= -tol && p.1 <= self.extent_y() + tol;
        on_h || on_v
    }

    fn has_horizontal_road_near(&self, y: f64, tol: f64) -> bool {
        let j = (y / self.block_m).round();
        (y - j * self.block_m).abs() < tol && j >= 0.0 && (j as usize) < self.horizontal_roads
    }

    fn has_vertical_road_near(&self, x: f64, tol: f64) -> bool {
        let i = (x / self.block_m).round();
        (x - i * self.block_m).abs() < tol && i >= 0.0 && (i as usize) < self.vertical_roads
    }
}

struct Vehicle<'a> {
    grid: &'a GridConfig,
    pos: (f64, f64),
    heading: Heading,
}

impl Vehicle<'_> {
    fn can_go(&self, h: Heading) -> bool {
        let g = self.grid;
        let (x, y) = self.pos;
        match h {
            Heading::East => g.has_horizontal_road_at(y) && x < g.extent_x() - EPS,
            Heading::West => g.has_horizontal_road_at(y) && x > EPS,
            Heading::North => g.has_vertical_road_at(x) && y < g.extent_y() - EPS,
            Heading::South => g.has_vertical_road_at(x) && y > EPS,
        }
    }

    /// Distance to the next grid line crossing or road end along the heading.
    fn distance_to_next_node(&self) -> f64 {
        let g = self.grid;
        let b = g.block_m;
        let (x, y) = self.pos;
        let next = |v: f64, up: bool, end: f64| -> f64 {
            let target = if up {
                ((v + EPS) / b).floor() * b + b
            } else {
                ((v - EPS) / b).ceil() * b - b
            };
            let target = if up { target.min(end) } else { target.max(0.0) };
            (target - v).abs()
        };
        match self.heading {
            Heading::East => next(x, true, g.extent_x()),
            Heading::West => next(x, false, 0.0),
            Heading::North => next(y, true, g.extent_y()),
            Heading::South => next(y, false, 0.0),
        }
    }

    fn advance(&mut self, d: f64) {
        let (ux, uy) = self.heading.unit();
        self.pos.0 += ux * d;
        self.pos.1 += uy * d;
    }

    fn snap(&mut self) {
        let b = self.grid.block_m;
        self.pos.0 = (self.pos.0 / b).round() * b;
        self.pos.1 = (self.pos.1 / b).round() * b;
    }

    fn choose<R: Rng>(&mut self, rng: &mut R) -> (Turn, bool) {
        let options = [
            (Turn::Straight, self.heading, P_STRAIGHT),
            (Turn::Left, self.heading.left(), P_LEFT),
            (Turn::Right, self.heading.right(), P_RIGHT),
        ];
        let available: Vec<_> = options.iter().filter(|(_, h, _)| self.can_go(*h)).collect();
        let full = available.len() == 3;
        if available.is_empty() {
            self.heading = self.heading.reverse();
            return (Turn::UTurn, false);
        }
        let total: f64 = available.iter().map(|o| o.2).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = available[available.len() - 1];
        for o in &available {
            if u < o.2 {
                pick = o;
                break;
            }
            u -= o.2;
        }
        self.heading = pick.1;
        (pick.0, full)
    }
}

/// Samples a uniformly random start point and heading on the grid's roads.
fn random_start<R: Rng>(grid: &GridConfig, rng: &mut R) -> ((f64, f64), Heading) {
    let h_len = grid.horizontal_roads as f64 * grid.extent_x();
    let v_len = grid.vertical_roads as f64 * grid.extent_y();
    let u = rng.random::<f64>() * (h_len + v_len);
    let forward = rng.random::<bool>();
    if u < h_len {
        let j = ((u / grid.extent_x()) as usize).min(grid.horizontal_roads - 1);
        let x = u - j as f64 * grid.extent_x();
        let heading = if forward { Heading::East } else { Heading::West };
        ((x, j as f64 * grid.block_m), heading)
    } else {
        let u = u - h_len;
        let i = ((u / grid.extent_y()) as usize).min(grid.vertical_roads - 1);
        let y = u - i as f64 * grid.extent_y();
        let heading = if forward { Heading::North } else { Heading::South };
        ((i as f64 * grid.block_m, y), heading)
    }
}

/// Drives one vehicle over the grid for `duration_slots` slots.
pub fn generate_trajectory(
    grid: &GridConfig,
    speed_mps: f64,
    duration_slots: usize,
    slot_duration_s: f64,
    seed: u64,
) -> Result<Trajectory> {
    grid.check()?;
    if !(speed_mps > 0.0 && speed_mps.is_finite()) {
        return Err(Error::config(format!("speed must be positive, got {speed_mps}")));
    }
    if !(slot_duration_s > 0.0) {
        return Err(Error::config("slot duration must be positive"));
    }
    let mut rng = rng::stream(seed, &[tag("trajectory")]);
    let (pos, heading) = random_start(grid, &mut rng);
    let mut car = Vehicle { grid, pos, heading };
    if !car.can_go(car.heading) {
        car.heading = car.heading.reverse();
    }

    let step = speed_mps * slot_duration_s;
    let mut positions = Vec::with_capacity(duration_slots);
    let mut headings = Vec::with_capacity(duration_slots);
    let mut turn_events = Vec::new();
    for slot in 0..duration_slots {
        positions.push(car.pos);
        headings.push(car.heading.angle());
        let mut remaining = step;
        while remaining > 0.0 {
            let to_node = car.distance_to_next_node();
            if remaining < to_node - EPS {
                car.advance(remaining);
                break;
            }
            car.advance(to_node);
            car.snap();
            remaining -= to_node;
            let at_intersection =
                grid.has_horizontal_road_at(car.pos.1) && grid.has_vertical_road_at(car.pos.0);
            if at_intersection {
                let (turn, full_choice) = car.choose(&mut rng);
                turn_events.push(TurnEvent { slot, turn, full_choice });
            } else if !car.can_go(car.heading) {
                car.heading = car.heading.reverse();
                turn_events.push(TurnEvent { slot, turn: Turn::UTurn, full_choice: false });
            }
        }
    }
    Ok(Trajectory {
        positions,
        headings,
        speed: speed_mps,
        slot_duration_s,
        turn_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corridor() -> GridConfig {
        GridConfig {
            horizontal_roads: 1,
            vertical_roads: 0,
            block_m: 100.0,
        }
    }

    #[test]
    fn corridor_motion_is_collinear() {
        let t = generate_trajectory(&corridor(), 11.11, 100, 1e-4, 5).unwrap();
        assert_eq!(t.len(), 100);
        assert!(t.positions.iter().all(|p| p.1 == 0.0));
        assert!(t.turn_events.iter().all(|e| e.turn == Turn::UTurn));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let g = GridConfig::default();
        let a = generate_trajectory(&g, 11.11, 5000, 1e-3, 9).unwrap();
        let b = generate_trajectory(&g, 11.11, 5000, 1e-3, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_trajectory(&g, 11.11, 5000, 1e-3, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn straight_steps_have_constant_length_and_stay_on_roads() {
        let g = GridConfig::default();
        let speed = 11.11;
        let dt = 0.05;
        let t = generate_trajectory(&g, speed, 4000, dt, 3).unwrap();
        let turn_slots: std::collections::HashSet<usize> = t.turn_events.iter().map(|e| e.slot).collect();
        for (m, w) in t.positions.windows(2).enumerate() {
            assert!(g.on_road(w[0]), "{:?}", w[0]);
            if turn_slots.contains(&m) {
                continue;
            }
            let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            assert!((d - speed * dt).abs() <= 1e-9 * speed * dt, "slot {m}: {d}");
        }
    }

    #[test]
    fn invalid_grid_is_a_config_error() {
        let g = GridConfig {
            horizontal_roads: 0,
            vertical_roads: 0,
            block_m: 10.0,
        };
        assert!(matches!(generate_trajectory(&g, 1.0, 10, 1e-3, 0), Err(Error::Config(_))));
        assert!(generate_trajectory(&GridConfig::default(), 0.0, 10, 1e-3, 0).is_err());
    }

    #[test]
    fn intersection_choice_frequencies() {
        // Large grid, fast vehicle: thousands of interior crossings.
        let g = GridConfig {
            horizontal_roads: 50,
            vertical_roads: 50,
            block_m: 10.0,
        };
        let t = generate_trajectory(&g, 100.0, 200_000, 0.05, 21).unwrap();
        let full: Vec<_> = t.turn_events.iter().filter(|e| e.full_choice).collect();
        assert!(full.len() >= 10_000, "only {} crossings", full.len());
        let take = &full[..10_000];
        let frac = |k: Turn| take.iter().filter(|e| e.turn == k).count() as f64 / take.len() as f64;
        assert!((frac(Turn::Straight) - 0.5).abs() < 0.02, "{}", frac(Turn::Straight));
        assert!((frac(Turn::Left) - 0.25).abs() < 0.02);
        assert!((frac(Turn::Right) - 0.25).abs() < 0.02);
    }
}
