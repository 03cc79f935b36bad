//! Simulated image-based servoing of the tool.
//!
//! The planar law drives the projected tool pixel toward a waypoint at
//! constant speed; the vertical law drives the height toward a setpoint with
//! a signed constant speed. The last step of each segment lands exactly on
//! the waypoint. Deformation happens once per contact segment, at its end,
//! from the planned pixels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;
use crate::sandfield::{apply_push, apply_tap, MaterialConfig, SandError, SandGrid, ToolFootprint};
use crate::strategies::Action;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServoError {
    #[error("servo divergence on segment {segment} after {steps} steps")]
    Divergence { segment: usize, steps: usize, trajectory: Vec<TrajectoryRecord> },
    #[error(transparent)]
    Sand(#[from] SandError),
}

pub type Result<T, E = ServoError> = std::result::Result<T, E>;

/// Overhead camera with the image plane parallel to the workspace plane:
/// `u = u0 - scale * x`, `v = v0 + scale * y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Pixels per workspace unit.
    pub scale: f64,
    pub u0: f64,
    pub v0: f64,
}

impl CameraModel {
    /// Optical axis through the image center.
    pub fn centered(width: usize, height: usize, scale: f64) -> Self {
        Self {
            scale,
            u0: width as f64 / 2.0,
            v0: height as f64 / 2.0,
        }
    }

    pub fn project(&self, x: f64, y: f64) -> Point {
        Point::new(self.u0 - self.scale * x, self.v0 + self.scale * y)
    }

    pub fn unproject(&self, p: Point) -> (f64, f64) {
        ((self.u0 - p.u) / self.scale, (p.v - self.v0) / self.scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToolState {
    pub x: f64,
    pub y: f64,
    /// Height above the sandbox base.
    pub z: f64,
}

impl ToolState {
    pub fn at_pixel(camera: &CameraModel, p: Point, z: f64) -> Self {
        let (x, y) = camera.unproject(p);
        Self { x, y, z }
    }

    pub fn pixel(&self, camera: &CameraModel) -> Point {
        camera.project(self.x, self.y)
    }

    pub fn in_contact(&self, cfg: &ServoConfig) -> bool {
        (self.z - cfg.z_base).abs() <= cfg.eps_z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServoConfig {
    /// Planar speed, workspace units per step.
    pub v_xy: f64,
    /// Vertical speed, units per step.
    pub v_z: f64,
    /// Planar arrival threshold, pixels.
    pub eps_px: f64,
    pub eps_z: f64,
    pub dt: f64,
    /// Home pixel H; the workspace's top-left corner when unset.
    pub home: Option<Point>,
    /// Raised height z_U, above any material.
    pub z_up: f64,
    /// Base level z*.
    pub z_base: f64,
    pub max_steps_per_segment: usize,
    /// Pixels per workspace unit.
    pub camera_scale: f64,
}

impl Default for ServoConfig {
    fn default() -> Self {
        Self {
            v_xy: 5.0,
            v_z: 0.5,
            eps_px: 2.0,
            eps_z: 0.25,
            dt: 1.0,
            home: None,
            z_up: 15.0,
            z_base: 0.0,
            max_steps_per_segment: 10_000,
            camera_scale: 1.0,
        }
    }
}

impl ServoConfig {
    pub fn home_pixel(&self, grid: &SandGrid) -> Point {
        self.home.unwrap_or_else(|| {
            let ws = grid.workspace();
            Point::new(ws.u_min as f64, ws.v_min as f64)
        })
    }

    pub fn camera(&self, grid: &SandGrid) -> CameraModel {
        CameraModel::centered(grid.width(), grid.height(), self.camera_scale)
    }
}

/// Constant-norm planar velocity that reduces the pixel error; zero once
/// within `eps_px`.
pub fn xy_velocity(current: Point, target: Point, cfg: &ServoConfig) -> (f64, f64) {
    let err = target - current;
    let n = err.norm();
    if n <= cfg.eps_px {
        return (0.0, 0.0);
    }
    // du = -scale * vx and dv = scale * vy.
    let dir = Point::new(-err.u, err.v) * (1.0 / n);
    (cfg.v_xy * dir.u, cfg.v_xy * dir.v)
}

/// Signed constant vertical speed toward `z_target`; zero inside `eps_z`.
pub fn z_velocity(z: f64, z_target: f64, cfg: &ServoConfig) -> f64 {
    let e = z_target - z;
    if e.abs() <= cfg.eps_z {
        0.0
    } else {
        cfg.v_z * e.signum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    Planar,
    Vertical,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deform {
    None,
    PushContact { start: Point, end: Point },
    TapContact { target: Point },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaypointLabel {
    H,
    B,
    S,
    E,
    U,
    HUp,
    TUp,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub label: WaypointLabel,
    pub pixel: Point,
    pub z: f64,
    pub law: Law,
    pub deform: Deform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPlan {
    pub waypoints: Vec<Waypoint>,
}

impl WaypointPlan {
    pub fn labels(&self) -> Vec<WaypointLabel> {
        self.waypoints.iter().map(|w| w.label).collect()
    }
}

fn wp(label: WaypointLabel, pixel: Point, z: f64, law: Law, deform: Deform) -> Waypoint {
    Waypoint { label, pixel, z, law, deform }
}

/// Approach pixel B: on the row of `start`, at the workspace edge on the side
/// away from the material centroid.
pub fn approach_pixel(start: Point, grid: &SandGrid, tool: ToolFootprint) -> Point {
    let ws = grid.workspace();
    let (lo, hi) = (ws.u_min as f64, (ws.u_end() - 1) as f64);
    let toward_right = grid.sand_centroid(0.05).is_some_and(|c| c.u < start.u);
    let edge = if toward_right { hi } else { lo };
    if (edge - start.u).abs() >= 1.0 {
        return Point::new(edge, start.v);
    }
    let off = if toward_right { tool.w_tcp as f64 } else { -(tool.w_tcp as f64) };
    Point::new((start.u + off).clamp(lo, hi), start.v)
}

/// H, B, S, E (pushing), U (raise), H.
pub fn plan_push(start: Point, end: Point, grid: &SandGrid, tool: ToolFootprint, cfg: &ServoConfig) -> WaypointPlan {
    let h = cfg.home_pixel(grid);
    let b = approach_pixel(start, grid, tool);
    use WaypointLabel as L;
    WaypointPlan {
        waypoints: vec![
            wp(L::H, h, cfg.z_base, Law::Planar, Deform::None),
            wp(L::B, b, cfg.z_base, Law::Planar, Deform::None),
            wp(L::S, start, cfg.z_base, Law::Planar, Deform::None),
            wp(L::E, end, cfg.z_base, Law::Planar, Deform::PushContact { start, end }),
            wp(L::U, end, cfg.z_up, Law::Vertical, Deform::None),
            wp(L::H, h, cfg.z_base, Law::Both, Deform::None),
        ],
    }
}

/// H, raise, above T, lower onto T (tapping), raise, H.
pub fn plan_tap(target: Point, grid: &SandGrid, cfg: &ServoConfig) -> WaypointPlan {
    let h = cfg.home_pixel(grid);
    use WaypointLabel as L;
    WaypointPlan {
        waypoints: vec![
            wp(L::H, h, cfg.z_base, Law::Planar, Deform::None),
            wp(L::HUp, h, cfg.z_up, Law::Vertical, Deform::None),
            wp(L::TUp, target, cfg.z_up, Law::Planar, Deform::None),
            wp(L::T, target, cfg.z_base, Law::Vertical, Deform::TapContact { target }),
            wp(L::TUp, target, cfg.z_up, Law::Vertical, Deform::None),
            wp(L::H, h, cfg.z_base, Law::Both, Deform::None),
        ],
    }
}

pub fn plan_action(action: &Action, grid: &SandGrid, tool: ToolFootprint, cfg: &ServoConfig) -> WaypointPlan {
    match *action {
        Action::Push { start, end } => plan_push(start, end, grid, tool, cfg),
        Action::Tap { target } => plan_tap(target, grid, cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub segment: usize,
    pub state: ToolState,
    pub pixel: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub tool: ToolState,
    pub grid: SandGrid,
    pub trajectory: Vec<TrajectoryRecord>,
}

/// Runs `plan` from `tool`, integrating the active laws each step.
pub fn execute(
    plan: &WaypointPlan,
    tool: ToolState,
    grid: &SandGrid,
    footprint: ToolFootprint,
    material: &MaterialConfig,
    cfg: &ServoConfig,
) -> Result<Execution> {
    let camera = cfg.camera(grid);
    let mut state = tool;
    let mut grid = grid.clone();
    let mut trajectory = vec![TrajectoryRecord { step: 0, segment: 0, state, pixel: state.pixel(&camera) }];
    let mut step = 0;
    for (segment, w) in plan.waypoints.iter().enumerate() {
        let planar = matches!(w.law, Law::Planar | Law::Both);
        let vertical = matches!(w.law, Law::Vertical | Law::Both);
        let mut seg_steps = 0;
        loop {
            let px = state.pixel(&camera);
            let (vx, vy) = if planar { xy_velocity(px, w.pixel, cfg) } else { (0.0, 0.0) };
            let vz = if vertical { z_velocity(state.z, w.z, cfg) } else { 0.0 };
            if vx == 0.0 && vy == 0.0 && vz == 0.0 {
                break;
            }
            if seg_steps == cfg.max_steps_per_segment {
                return Err(ServoError::Divergence { segment, steps: seg_steps, trajectory });
            }
            if vx != 0.0 || vy != 0.0 {
                let reach = cfg.v_xy * cfg.dt * camera.scale;
                if px.dist(w.pixel) <= reach {
                    let (x, y) = camera.unproject(w.pixel);
                    state.x = x;
                    state.y = y;
                } else {
                    state.x += vx * cfg.dt;
                    state.y += vy * cfg.dt;
                }
            }
            if vz != 0.0 {
                if (w.z - state.z).abs() <= cfg.v_z * cfg.dt {
                    state.z = w.z;
                } else {
                    state.z += vz * cfg.dt;
                }
            }
            step += 1;
            seg_steps += 1;
            trajectory.push(TrajectoryRecord { step, segment, state, pixel: state.pixel(&camera) });
        }
        match w.deform {
            Deform::None => {}
            Deform::PushContact { start, end } => grid = apply_push(&grid, start, end, footprint)?,
            Deform::TapContact { target } => {
                grid = apply_tap(&grid, target, footprint, material.tap_level, material.tap_anchor)?
            }
        }
    }
    Ok(Execution { tool: state, grid, trajectory })
}

/// Plans and executes `action` with the tool starting at home.
pub fn execute_action(
    action: &Action,
    grid: &SandGrid,
    footprint: ToolFootprint,
    material: &MaterialConfig,
    cfg: &ServoConfig,
) -> Result<Execution> {
    let camera = cfg.camera(grid);
    let home = ToolState::at_pixel(&camera, cfg.home_pixel(grid), cfg.z_base);
    let plan = plan_action(action, grid, footprint, cfg);
    execute(&plan, home, grid, footprint, material, cfg)
}
