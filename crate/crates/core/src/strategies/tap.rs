use rand::Rng;

use super::{Action, Result, StrategyError};
use crate::geom::Point;
use crate::vision::ResampledImage;

/// Taps the resampled cell with the largest absolute difference, scaled back
/// to image pixels by the tool size. Exact ties are broken by one uniform draw.
pub fn select_tap<R: Rng + ?Sized>(
    current: &ResampledImage,
    desired: &ResampledImage,
    rng: &mut R,
) -> Result<Action> {
    if current.width != desired.width || current.height != desired.height {
        return Err(StrategyError::DimensionMismatch);
    }
    let diffs: Vec<f64> = current
        .cells
        .iter()
        .zip(&desired.cells)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let max = diffs.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(StrategyError::NothingToTap);
    }
    let ties: Vec<usize> = (0..diffs.len()).filter(|&i| diffs[i] == max).collect();
    let idx = if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    };
    let (col, row) = (idx % current.width, idx / current.width);
    let tool = current.tool;
    Ok(Action::Tap {
        target: Point::new((col * tool.w_tcp) as f64, (row * tool.h_tcp) as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sandfield::ToolFootprint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn resampled(w: usize, h: usize, cells: Vec<f64>) -> ResampledImage {
        ResampledImage {
            width: w,
            height: h,
            tool: ToolFootprint::new(30, 40),
            cells,
        }
    }

    #[test]
    fn sole_maximum_maps_through_tool_size() {
        let a = resampled(21, 12, vec![50.0; 252]);
        let mut b = a.clone();
        b.cells[3 * 21 + 2] = 10.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            select_tap(&a, &b, &mut rng).unwrap(),
            Action::Tap { target: Point::new(60.0, 120.0) }
        );
    }

    #[test]
    fn identical_means_nothing_to_tap() {
        let a = resampled(4, 3, vec![7.0; 12]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_tap(&a, &a, &mut rng), Err(StrategyError::NothingToTap));
    }

    #[test]
    fn ties_are_reproducible_and_cover_all_maxima() {
        let a = resampled(4, 1, vec![0.0, 9.0, 0.0, 9.0]);
        let b = resampled(4, 1, vec![0.0; 4]);
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..64 {
            let t1 = select_tap(&a, &b, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let t2 = select_tap(&a, &b, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(t1, t2);
            if let Action::Tap { target } = t1 {
                seen.insert(target.u as i64);
            }
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![30, 90]);
    }
}
