use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Result, SessionError};
use crate::geom::{Point, Roi};
use crate::sandfield::{
    apply_push, apply_tap, render, total_mass, MaterialConfig, RenderConfig, SandGrid, ToolFootprint,
};
use crate::servo::ServoConfig;
use crate::strategies::{DatasetStats, StrategyConfig, TerminationPolicy};
use crate::vision::{GrayImage, DEFAULT_BINS};

pub const SCENARIO_VERSION: u32 = 1;

/// Heightfield edit, applied in order on top of the base level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Primitive {
    /// Sets a rectangle to height `h`.
    Block { roi: Roi, h: f64 },
    /// Adds a cone of the given peak height.
    Pile { center: Point, radius: f64, peak: f64 },
    /// Sets cells within `half_width` of a segment to height `h`.
    Ridge { start: Point, end: Point, half_width: f64, h: f64 },
    /// Removes all material in a rectangle.
    Clear { roi: Roi },
    /// Removes all material in a disk.
    ClearDisk { center: Point, radius: f64 },
    /// Caps a rectangle at height `h`.
    Level { roi: Roi, h: f64 },
    /// Scatters `count` small cones inside `roi`, positions drawn from `seed`.
    Scatter { roi: Roi, count: usize, radius: f64, peak: f64, seed: u64 },
    /// Applies a push with the scenario's tool.
    Push { start: Point, end: Point },
    /// Applies a tap with the scenario's tool and material settings.
    Tap { target: Point },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeightSpec {
    Primitives {
        #[serde(default)]
        base: f64,
        items: Vec<Primitive>,
    },
    /// Row-major heights, `width * height` values.
    Explicit { heights: Vec<f64> },
    /// The initial heightfield followed by further edits.
    FromInitial { items: Vec<Primitive> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesiredSpec {
    Heightfield { spec: HeightSpec },
    Image { image: GrayImage },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    pub width: usize,
    pub height: usize,
    /// Defaults to the whole grid.
    #[serde(default)]
    pub workspace: Option<Roi>,
    pub initial: HeightSpec,
    pub desired: DesiredSpec,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub tool: ToolFootprint,
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub servo: ServoConfig,
    #[serde(default)]
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub termination: TerminationPolicy,
    /// Histogram bins per axis for the error measure.
    #[serde(default = "default_bins")]
    pub mi_bins: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

fn each_cell(grid: &mut SandGrid, roi: Roi, mut f: impl FnMut(usize, usize, &mut f64)) {
    let Some(r) = roi.intersect(&grid.bounds()) else { return };
    for v in r.v_min..r.v_end() {
        for u in r.u_min..r.u_end() {
            let mut h = grid.get(u, v);
            f(u, v, &mut h);
            grid.set(u, v, h);
        }
    }
}

fn disk_roi(center: Point, radius: f64) -> Roi {
    let u0 = (center.u - radius).floor().max(0.0) as usize;
    let v0 = (center.v - radius).floor().max(0.0) as usize;
    let u1 = (center.u + radius).ceil().max(0.0) as usize + 1;
    let v1 = (center.v + radius).ceil().max(0.0) as usize + 1;
    Roi::new(u0, v0, u1.saturating_sub(u0), v1.saturating_sub(v0))
}

fn add_cone(grid: &mut SandGrid, center: Point, radius: f64, peak: f64) {
    each_cell(grid, disk_roi(center, radius), |u, v, h| {
        let d = Point::new(u as f64, v as f64).dist(center);
        if d < radius {
            *h += peak * (1.0 - d / radius);
        }
    });
}

impl Scenario {
    pub fn workspace_roi(&self) -> Roi {
        self.workspace.unwrap_or(Roi::full(self.width, self.height))
    }

    fn empty_grid(&self) -> Result<SandGrid> {
        Ok(SandGrid::new(self.width, self.height).with_workspace(self.workspace_roi())?)
    }

    fn apply(&self, grid: &mut SandGrid, items: &[Primitive]) -> Result<()> {
        for item in items {
            match *item {
                Primitive::Block { roi, h } => each_cell(grid, roi, |_, _, c| *c = h),
                Primitive::Pile { center, radius, peak } => add_cone(grid, center, radius, peak),
                Primitive::Ridge { start, end, half_width, h } => {
                    let pad = half_width.ceil();
                    let roi = disk_roi(start.lerp(end, 0.5), start.dist(end) / 2.0 + pad);
                    let d = end - start;
                    let len2 = d.dot(d);
                    each_cell(grid, roi, |u, v, c| {
                        let p = Point::new(u as f64, v as f64);
                        let t = if len2 > 0.0 { ((p - start).dot(d) / len2).clamp(0.0, 1.0) } else { 0.0 };
                        if p.dist(start + d * t) <= half_width {
                            *c = h;
                        }
                    });
                }
                Primitive::Clear { roi } => each_cell(grid, roi, |_, _, c| *c = 0.0),
                Primitive::ClearDisk { center, radius } => each_cell(grid, disk_roi(center, radius), |u, v, c| {
                    if Point::new(u as f64, v as f64).dist(center) <= radius {
                        *c = 0.0;
                    }
                }),
                Primitive::Level { roi, h } => each_cell(grid, roi, |_, _, c| *c = c.min(h)),
                Primitive::Scatter { roi, count, radius, peak, seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    for _ in 0..count {
                        let c = Point::new(
                            rng.random_range(roi.u_min as f64..roi.u_end() as f64),
                            rng.random_range(roi.v_min as f64..roi.v_end() as f64),
                        );
                        add_cone(grid, c, radius, peak);
                    }
                }
                Primitive::Push { start, end } => *grid = apply_push(grid, start, end, self.tool)?,
                Primitive::Tap { target } => {
                    *grid = apply_tap(grid, target, self.tool, self.material.tap_level, self.material.tap_anchor)?
                }
            }
        }
        Ok(())
    }

    fn build(&self, spec: &HeightSpec, initial: Option<&SandGrid>) -> Result<SandGrid> {
        match spec {
            HeightSpec::Primitives { base, items } => {
                let mut g = self.empty_grid()?;
                each_cell(&mut g, Roi::full(self.width, self.height), |_, _, c| *c = *base);
                self.apply(&mut g, items)?;
                Ok(g)
            }
            HeightSpec::Explicit { heights } => {
                Ok(SandGrid::from_heights(self.width, self.height, heights.clone())?.with_workspace(self.workspace_roi())?)
            }
            HeightSpec::FromInitial { items } => {
                let mut g = initial
                    .ok_or_else(|| SessionError::Scenario("from_initial is only valid for the desired shape".into()))?
                    .clone();
                self.apply(&mut g, items)?;
                Ok(g)
            }
        }
    }

    pub fn initial_grid(&self) -> Result<SandGrid> {
        self.build(&self.initial, None)
    }

    /// Desired heightfield, when the desired shape is given as one.
    pub fn desired_grid(&self) -> Result<Option<SandGrid>> {
        match &self.desired {
            DesiredSpec::Heightfield { spec } => Ok(Some(self.build(spec, Some(&self.initial_grid()?))?)),
            DesiredSpec::Image { .. } => Ok(None),
        }
    }

    pub fn desired_image(&self) -> Result<GrayImage> {
        match &self.desired {
            DesiredSpec::Heightfield { .. } => Ok(render(&self.desired_grid()?.unwrap(), &self.render)),
            DesiredSpec::Image { image } => Ok(image.clone()),
        }
    }

    /// Structural checks plus the no-added-matter rule for heightfield goals:
    /// outside the workspace the goal equals the initial field, and it holds
    /// no more material than the initial field.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SessionError::Scenario(m));
        if self.version != SCENARIO_VERSION {
            return Err(SessionError::Version(self.version));
        }
        if self.mi_bins == 0 || self.mi_bins > 256 {
            return bad(format!("mi_bins {} outside 1..=256", self.mi_bins));
        }
        if self.width == 0 || self.height == 0 {
            return bad("empty grid".into());
        }
        if !self.workspace_roi().fits_in(self.width, self.height) || self.workspace_roi().is_empty() {
            return bad(format!("workspace {:?} does not fit the grid", self.workspace_roi()));
        }
        self.tool.validate(self.width, self.height)?;
        let initial = self.initial_grid()?;
        match self.desired_grid()? {
            Some(goal) => {
                let ws = self.workspace_roi();
                for v in 0..self.height {
                    for u in 0..self.width {
                        if !ws.contains(u, v) && goal.get(u, v) != initial.get(u, v) {
                            return bad(format!("desired shape changes cell ({u}, {v}) outside the workspace"));
                        }
                    }
                }
                let (m0, m1) = (total_mass(&initial), total_mass(&goal));
                if m1 > m0 * (1.0 + 1e-9) + 1e-9 {
                    return bad(format!("desired shape holds more material ({m1:.3}) than the initial one ({m0:.3})"));
                }
            }
            None => {
                let img = self.desired_image()?;
                if img.width() != self.width || img.height() != self.height {
                    return bad("desired image size differs from the grid".into());
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    /// A built-in name, or a path to a scenario document.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(s) = builtin(name_or_path) {
            return Ok(s);
        }
        Self::from_json(&std::fs::read_to_string(name_or_path)?)
    }
}

pub const BUILTIN_NAMES: [&str; 6] = ["c", "e", "sigma", "tap-pile", "tap-square", "tap-two-piles"];

/// Edge row of the material in the push scenarios.
const EDGE_V: usize = 70;

fn desk_scenario(name: &str, initial: HeightSpec, desired: Vec<Primitive>, alpha: f64) -> Scenario {
    Scenario {
        version: SCENARIO_VERSION,
        name: name.into(),
        width: 320,
        height: 240,
        workspace: None,
        initial,
        desired: DesiredSpec::Heightfield { spec: HeightSpec::FromInitial { items: desired } },
        render: RenderConfig::default(),
        tool: ToolFootprint::new(15, 20),
        material: MaterialConfig::default(),
        servo: ServoConfig::default(),
        strategy: StrategyConfig {
            stats: DatasetStats::HUMAN_640X480.scaled(0.5),
            min_blob_area: 60,
            excess_only: true,
            alpha,
            ..StrategyConfig::default()
        },
        termination: TerminationPolicy::default(),
        mi_bins: DEFAULT_BINS,
        seed: 7,
    }
}

fn slab() -> HeightSpec {
    // Saturated material: berms pushed into it stay invisible to the camera.
    HeightSpec::Primitives {
        base: 0.0,
        items: vec![Primitive::Block { roi: Roi::new(0, EDGE_V, 320, 240 - EDGE_V), h: 10.0 }],
    }
}

/// Notch cut by one push from free space `depth` pixels into the material,
/// entering at column `u` and leaving at column `u + lean`.
fn notch(u: f64, lean: f64, depth: f64) -> Primitive {
    let edge = EDGE_V as f64;
    Primitive::Push { start: Point::new(u, edge - 8.0), end: Point::new(u + lean, edge + depth) }
}

/// Taps on every tool cell overlapping `roi`, in raster order.
fn tap_cover(roi: Roi, tool: ToolFootprint) -> Vec<Primitive> {
    let mut out = Vec::new();
    for row in roi.v_min / tool.h_tcp..roi.v_end().div_ceil(tool.h_tcp) {
        for col in roi.u_min / tool.w_tcp..roi.u_end().div_ceil(tool.w_tcp) {
            out.push(Primitive::Tap {
                target: Point::new((col * tool.w_tcp) as f64, (row * tool.h_tcp) as f64),
            });
        }
    }
    out
}

pub fn builtin(name: &str) -> Option<Scenario> {
    let tool = ToolFootprint::new(15, 20);
    let push_alpha = 0.05;
    let tap_alpha = 1.0;
    let s = match name {
        "c" => desk_scenario("c", slab(), vec![notch(160.0, 0.0, 35.0)], push_alpha),
        "e" => desk_scenario("e", slab(), vec![notch(120.0, 0.0, 30.0), notch(200.0, 0.0, 30.0)], push_alpha),
        "sigma" => desk_scenario(
            "sigma",
            slab(),
            vec![notch(90.0, 8.0, 24.0), notch(160.0, 0.0, 20.0), notch(230.0, -8.0, 24.0)],
            push_alpha,
        ),
        "tap-pile" => desk_scenario(
            "tap-pile",
            HeightSpec::Primitives {
                base: 0.0,
                items: vec![Primitive::Pile { center: Point::new(160.0, 120.0), radius: 45.0, peak: 8.0 }],
            },
            tap_cover(Roi::new(105, 70, 110, 100), tool),
            tap_alpha,
        ),
        "tap-square" => {
            let square = Roi::new(120, 80, 75, 80);
            let mut desired = tap_cover(square, tool);
            desired.extend(tap_cover(square, tool));
            desk_scenario(
                "tap-square",
                HeightSpec::Primitives {
                    base: 0.0,
                    items: vec![Primitive::Scatter { roi: square, count: 12, radius: 14.0, peak: 5.0, seed: 3 }],
                },
                desired,
                tap_alpha,
            )
        }
        "tap-two-piles" => {
            let mut desired = tap_cover(Roi::new(60, 80, 80, 80), tool);
            desired.extend(tap_cover(Roi::new(190, 75, 70, 70), tool));
            desk_scenario(
                "tap-two-piles",
                HeightSpec::Primitives {
                    base: 0.0,
                    items: vec![
                        Primitive::Pile { center: Point::new(100.0, 120.0), radius: 35.0, peak: 7.0 },
                        Primitive::Pile { center: Point::new(225.0, 110.0), radius: 30.0, peak: 6.0 },
                    ],
                },
                desired,
                tap_alpha,
            )
        }
        _ => return None,
    };
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid_and_roundtrip() {
        for name in BUILTIN_NAMES {
            let s = builtin(name).unwrap();
            s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(Scenario::from_json(&json).unwrap(), s);
            assert_ne!(s.initial_grid().unwrap().digest(), s.desired_grid().unwrap().unwrap().digest(), "{name}");
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn added_material_is_rejected() {
        let mut s = builtin("c").unwrap();
        s.desired = DesiredSpec::Heightfield {
            spec: HeightSpec::FromInitial {
                items: vec![Primitive::Block { roi: Roi::new(0, 0, 10, 10), h: 3.0 }],
            },
        };
        assert!(matches!(s.validate(), Err(SessionError::Scenario(_))));
    }

    #[test]
    fn version_is_checked() {
        let mut s = builtin("c").unwrap();
        s.version = 2;
        let json = serde_json::to_string(&s).unwrap();
        assert!(matches!(Scenario::from_json(&json), Err(SessionError::Version(2))));
    }

    #[test]
    fn primitives() {
        let mut s = builtin("c").unwrap();
        s.width = 20;
        s.height = 20;
        s.tool = ToolFootprint::new(4, 4);
        s.initial = HeightSpec::Primitives {
            base: 1.0,
            items: vec![
                Primitive::Block { roi: Roi::new(0, 0, 5, 5), h: 3.0 },
                Primitive::Level { roi: Roi::new(0, 0, 2, 20), h: 2.0 },
                Primitive::ClearDisk { center: Point::new(15.0, 15.0), radius: 1.0 },
                Primitive::Pile { center: Point::new(10.0, 10.0), radius: 2.0, peak: 4.0 },
            ],
        };
        let g = s.initial_grid().unwrap();
        assert_eq!(g.get(4, 4), 3.0);
        assert_eq!(g.get(1, 4), 2.0);
        assert_eq!(g.get(1, 10), 1.0);
        assert_eq!(g.get(15, 15), 0.0);
        assert_eq!(g.get(16, 15), 0.0);
        assert_eq!(g.get(17, 15), 1.0);
        assert_eq!(g.get(10, 10), 5.0);
        assert_eq!(g.get(11, 10), 3.0);
    }
}
