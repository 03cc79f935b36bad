use rand::Rng;

use super::{Action, LocalTarget, Result, StrategyError};
use crate::geom::Point;
use crate::learner::MlpModel;

/// Pushes along the matched pair whose current and near points are farthest
/// apart. Exact ties are broken by one uniform draw.
pub fn push_maximum<R: Rng + ?Sized>(target: &LocalTarget, rng: &mut R) -> Result<Action> {
    let dists: Vec<f64> = target
        .current
        .points
        .iter()
        .zip(&target.near.points)
        .map(|(c, n)| c.dist(*n))
        .collect();
    let max = dists.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(StrategyError::NoPushNeeded);
    }
    let ties: Vec<usize> = (0..dists.len()).filter(|&i| dists[i] == max).collect();
    let j = if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    };
    Ok(Action::Push {
        start: target.current.points[j],
        end: target.near.points[j],
    })
}

/// Pushes from the centroid of the current contour to that of the near one.
pub fn push_average(target: &LocalTarget) -> Result<Action> {
    if target.current.is_empty() {
        return Err(StrategyError::NoPushNeeded);
    }
    let start = target.current.centroid();
    let end = target.near.centroid();
    if start == end {
        return Err(StrategyError::NoPushNeeded);
    }
    Ok(Action::Push { start, end })
}

/// Predicts `(u_S, v_S, u_E, v_E)` from the stacked current and near contours.
/// The prediction is rounded to whole pixels and clamped to the image.
pub fn push_learned(target: &LocalTarget, model: &MlpModel, width: usize, height: usize) -> Result<Action> {
    let mut input = target.current.flat();
    input.extend(target.near.flat());
    let out = model.predict(&input).map_err(|e| StrategyError::Model(e.to_string()))?;
    if out.len() != 4 {
        return Err(StrategyError::Model(format!("expected 4 outputs, model has {}", out.len())));
    }
    let clamp = |x: f64, n: usize| {
        let x = if x.is_finite() { x.round() } else { 0.0 };
        x.clamp(0.0, n.saturating_sub(1) as f64)
    };
    Ok(Action::Push {
        start: Point::new(clamp(out[0], width), clamp(out[1], height)),
        end: Point::new(clamp(out[2], width), clamp(out[3], height)),
    })
}
