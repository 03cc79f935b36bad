use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Demo, Frame};
use crate::geom::Point;
use crate::sandfield::{apply_push, render, RenderConfig, SandGrid, ToolFootprint};

/// Scripted demonstrations: material below a horizontal edge, one straight
/// push into it, then the tool retires along the same line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub tool: ToolFootprint,
    pub render: RenderConfig,
    /// Tool travel between consecutive frames, pixels.
    pub stride: f64,
    /// Row range of the material edge.
    pub edge_v: (f64, f64),
    /// Material height range.
    pub sand_height: (f64, f64),
    /// Distance travelled in free space before contact.
    pub approach: (f64, f64),
    /// Penetration past the edge.
    pub depth: (f64, f64),
    /// Largest deviation of the push direction from +v, degrees.
    pub max_angle_deg: f64,
    /// Unrecorded pushes applied before the recorded one.
    pub max_prior_pushes: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            tool: ToolFootprint::new(15, 20),
            render: RenderConfig::default(),
            stride: 3.0,
            edge_v: (60.0, 150.0),
            sand_height: (10.0, 12.0),
            approach: (6.0, 18.0),
            depth: (15.0, 45.0),
            max_angle_deg: 25.0,
            max_prior_pushes: 2,
        }
    }
}

struct Stroke {
    start: Point,
    end: Point,
}

fn random_stroke(cfg: &SynthConfig, edge_v: f64, rng: &mut ChaCha8Rng) -> Stroke {
    let margin = cfg.tool.w_tcp as f64 + 10.0;
    let theta = rng.random_range(-cfg.max_angle_deg..=cfg.max_angle_deg).to_radians();
    let dir = Point::new(theta.sin(), theta.cos());
    let contact = Point::new(rng.random_range(margin..cfg.width as f64 - margin), edge_v);
    let approach = rng.random_range(cfg.approach.0..=cfg.approach.1);
    let depth = rng.random_range(cfg.depth.0..=cfg.depth.1);
    let clamp = |p: Point| {
        Point::new(
            p.u.clamp(1.0, cfg.width as f64 - 2.0),
            p.v.clamp(1.0, cfg.height as f64 - 2.0),
        )
    };
    Stroke {
        start: clamp(contact - dir * approach),
        end: clamp(contact + dir * depth),
    }
}

/// `count` demos, deterministic in `seed`; demo `i` depends only on
/// `(seed, i)`.
pub fn synthesize_demos(cfg: &SynthConfig, seed: u64, count: usize) -> Vec<Demo> {
    (0..count).map(|id| synthesize_one(cfg, seed, id)).collect()
}

fn synthesize_one(cfg: &SynthConfig, seed: u64, id: usize) -> Demo {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    let edge_v = rng.random_range(cfg.edge_v.0..=cfg.edge_v.1);
    let h = rng.random_range(cfg.sand_height.0..=cfg.sand_height.1);
    let mut grid = SandGrid::new(cfg.width, cfg.height);
    for v in (edge_v.ceil() as usize)..cfg.height {
        for u in 0..cfg.width {
            grid.set(u, v, h);
        }
    }
    for _ in 0..rng.random_range(0..=cfg.max_prior_pushes) {
        let s = random_stroke(cfg, edge_v, &mut rng);
        if let Ok(g) = apply_push(&grid, s.start, s.end, cfg.tool) {
            grid = g;
        }
    }

    let stroke = random_stroke(cfg, edge_v, &mut rng);
    let (s, e) = (stroke.start, stroke.end);
    let len = s.dist(e);
    let dir = (e - s) * (1.0 / len);
    let steps = (len / cfg.stride).ceil() as usize;
    let at = |i: usize| if i >= steps { e } else { s + dir * (i as f64 * cfg.stride) };

    let mut frames = Vec::with_capacity(2 * steps + 1);
    for i in 0..=steps {
        let p = at(i);
        let image = if i == 0 {
            render(&grid, &cfg.render)
        } else {
            let pushed = apply_push(&grid, s, p, cfg.tool).expect("stroke lies in the workspace");
            render(&pushed, &cfg.render)
        };
        frames.push(Frame { index: i, image, tool_pos: Some(p) });
    }
    let final_image = frames[steps].image.clone();
    for j in 1..=steps {
        let back = if j >= steps { s } else { e - dir * (j as f64 * cfg.stride) };
        frames.push(Frame {
            index: steps + j,
            image: final_image.clone(),
            tool_pos: Some(back),
        });
    }
    Demo { id, frames }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{extract_demo, ExtractConfig};

    #[test]
    fn deterministic_and_in_bounds() {
        let cfg = SynthConfig::default();
        let a = synthesize_demos(&cfg, 42, 3);
        let b = synthesize_demos(&cfg, 42, 3);
        assert_eq!(a, b);
        for d in &a {
            for f in &d.frames {
                let p = f.tool_pos.unwrap();
                assert!(p.u >= 0.0 && p.v >= 0.0 && p.u < 320.0 && p.v < 240.0);
            }
        }
        assert_eq!(synthesize_demos(&cfg, 42, 5)[2], a[2]);
    }

    #[test]
    fn every_demo_yields_triplets() {
        let cfg = SynthConfig::default();
        for d in synthesize_demos(&cfg, 7, 12) {
            assert!(!extract_demo(&d, &ExtractConfig::default()).is_empty(), "demo {}", d.id);
        }
    }
}
