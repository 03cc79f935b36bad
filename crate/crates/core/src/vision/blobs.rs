use super::{GrayImage, Result, Roi, VisionError};
use crate::geom::Point;

/// Statistics of one 8-connected foreground component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub label: u32,
    pub size: usize,
    pub bbox: Roi,
    pub centroid: Point,
    /// Raster index (row-major, mask coordinates) of the first pixel.
    pub first: usize,
}

/// Per-pixel component labels; 0 is background.
#[derive(Debug, Clone)]
pub struct Labels {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
}

const NEIGHBORS8: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Labels the 8-connected components of `mask`, in raster order of their
/// first pixel.
pub fn connected_components(mask: &[bool], width: usize, height: usize) -> (Labels, Vec<Component>) {
    let mut labels = vec![0u32; width * height];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for start in 0..width * height {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        let label = comps.len() as u32 + 1;
        labels[start] = label;
        stack.push(start);
        let (mut size, mut su, mut sv) = (0usize, 0.0, 0.0);
        let (mut u0, mut v0, mut u1, mut v1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(idx) = stack.pop() {
            let (u, v) = (idx % width, idx / width);
            size += 1;
            su += u as f64;
            sv += v as f64;
            u0 = u0.min(u);
            v0 = v0.min(v);
            u1 = u1.max(u);
            v1 = v1.max(v);
            for (du, dv) in NEIGHBORS8 {
                let (nu, nv) = (u as i64 + du, v as i64 + dv);
                if nu < 0 || nv < 0 || nu >= width as i64 || nv >= height as i64 {
                    continue;
                }
                let n = nv as usize * width + nu as usize;
                if mask[n] && labels[n] == 0 {
                    labels[n] = label;
                    stack.push(n);
                }
            }
        }
        comps.push(Component {
            label,
            size,
            bbox: Roi::new(u0, v0, u1 - u0 + 1, v1 - v0 + 1),
            centroid: Point::new(su / size as f64, sv / size as f64),
            first: start,
        });
    }
    (
        Labels {
            width,
            height,
            labels,
        },
        comps,
    )
}

/// Largest component; the earliest in raster order wins ties.
pub(crate) fn largest(comps: &[Component]) -> Option<&Component> {
    comps.iter().fold(None, |best: Option<&Component>, c| match best {
        Some(b) if b.size >= c.size => Some(b),
        _ => Some(c),
    })
}

/// Bounding box of the largest 8-connected blob of `|current - desired| > threshold`.
pub fn diff_roi(current: &GrayImage, desired: &GrayImage, blob_threshold: u8) -> Result<Roi> {
    diff_roi_filtered(current, desired, blob_threshold, 0, false)
}

/// As [`diff_roi`], treating blobs of fewer than `min_area` pixels as noise.
/// With `excess_only`, only pixels brighter in `current` than in `desired`
/// (material to remove) are considered.
pub fn diff_roi_filtered(
    current: &GrayImage,
    desired: &GrayImage,
    blob_threshold: u8,
    min_area: usize,
    excess_only: bool,
) -> Result<Roi> {
    current.same_dims(desired)?;
    let mask: Vec<bool> = current
        .pixels()
        .iter()
        .zip(desired.pixels())
        .map(|(&a, &b)| if excess_only { a > b && a - b > blob_threshold } else { a.abs_diff(b) > blob_threshold })
        .collect();
    let (_, comps) = connected_components(&mask, current.width(), current.height());
    largest(&comps)
        .filter(|c| c.size >= min_area)
        .map(|c| c.bbox)
        .ok_or(VisionError::NoDifference)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paint(img: &mut GrayImage, roi: Roi, value: u8) {
        for v in roi.v_min..roi.v_end() {
            for u in roi.u_min..roi.u_end() {
                img.set(u, v, value);
            }
        }
    }

    #[test]
    fn identical_images_have_no_difference() {
        let a = GrayImage::new(20, 20, 9);
        assert_eq!(diff_roi(&a, &a, 10), Err(VisionError::NoDifference));
    }

    #[test]
    fn single_patch() {
        let a = GrayImage::new(40, 30, 10);
        let mut b = a.clone();
        paint(&mut b, Roi::new(12, 7, 5, 5), 200);
        assert_eq!(diff_roi(&a, &b, 20).unwrap(), Roi::new(12, 7, 5, 5));
        assert_eq!(diff_roi_filtered(&a, &b, 20, 25, false).unwrap(), Roi::new(12, 7, 5, 5));
        assert_eq!(diff_roi_filtered(&a, &b, 20, 26, false), Err(VisionError::NoDifference));
    }

    #[test]
    fn largest_of_two_blobs() {
        let a = GrayImage::new(100, 100, 10);
        let mut b = a.clone();
        paint(&mut b, Roi::new(2, 2, 5, 6), 200); // 30 px
        paint(&mut b, Roi::new(40, 50, 20, 15), 200); // 300 px
        let mask: Vec<bool> = a.pixels().iter().zip(b.pixels()).map(|(x, y)| x != y).collect();
        let (_, comps) = connected_components(&mask, 100, 100);
        let sizes: Vec<usize> = comps.iter().map(|c| c.size).collect();
        assert_eq!(sizes, vec![30, 300]);
        assert_eq!(diff_roi(&a, &b, 20).unwrap(), Roi::new(40, 50, 20, 15));
    }

    #[test]
    fn diagonal_pixels_are_connected() {
        let mask = vec![true, false, false, true];
        let (_, comps) = connected_components(&mask, 2, 2);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].size, 2);
    }
}
