use super::{GrayImage, Result, VisionError};

/// B x B joint luminance histogram of two equally sized images.
///
/// Luminance `l` falls into bin `l * B / 256`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointHistogram {
    pub bins: usize,
    /// Row index is the first image's bin, column the second's.
    pub counts: Vec<u64>,
    pub marginal_a: Vec<u64>,
    pub marginal_b: Vec<u64>,
    pub total: u64,
}

fn check_bins(bins: usize) -> Result<()> {
    if bins == 0 || bins > 256 {
        return Err(VisionError::InvalidBins(bins));
    }
    Ok(())
}

fn bin_of(l: u8, bins: usize) -> usize {
    l as usize * bins / 256
}

pub fn joint_histogram(a: &GrayImage, b: &GrayImage, bins: usize) -> Result<JointHistogram> {
    check_bins(bins)?;
    a.same_dims(b)?;
    let mut counts = vec![0u64; bins * bins];
    for (&pa, &pb) in a.pixels().iter().zip(b.pixels()) {
        counts[bin_of(pa, bins) * bins + bin_of(pb, bins)] += 1;
    }
    let mut marginal_a = vec![0u64; bins];
    let mut marginal_b = vec![0u64; bins];
    for i in 0..bins {
        for j in 0..bins {
            let c = counts[i * bins + j];
            marginal_a[i] += c;
            marginal_b[j] += c;
        }
    }
    Ok(JointHistogram {
        bins,
        counts,
        marginal_a,
        marginal_b,
        total: a.pixels().len() as u64,
    })
}

/// Mutual information (natural log) of the binned luminances.
pub fn mutual_information(a: &GrayImage, b: &GrayImage, bins: usize) -> Result<f64> {
    let hist = joint_histogram(a, b, bins)?;
    if hist.total == 0 {
        return Ok(0.0);
    }
    let n = hist.total as f64;
    let mut mi = 0.0;
    for i in 0..bins {
        let pa = hist.marginal_a[i] as f64 / n;
        if pa == 0.0 {
            continue;
        }
        for j in 0..bins {
            let c = hist.counts[i * bins + j];
            if c == 0 {
                continue;
            }
            let pab = c as f64 / n;
            let pb = hist.marginal_b[j] as f64 / n;
            mi += pab * (pab / (pa * pb)).ln();
        }
    }
    Ok(mi.max(0.0))
}

/// Shannon entropy (natural log) of the binned luminances.
pub fn entropy(img: &GrayImage, bins: usize) -> Result<f64> {
    check_bins(bins)?;
    let mut counts = vec![0u64; bins];
    for &p in img.pixels() {
        counts[bin_of(p, bins)] += 1;
    }
    let n = img.pixels().len() as f64;
    Ok(counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum())
}

/// Mutual-information error `1 - MI(current, desired) / H(desired)`, in `[0, 1]`.
///
/// Dividing by the desired image's entropy makes `MI(I*, I*)` unitary, so the
/// error is exactly zero for identical images. A constant desired image has
/// zero entropy; the error is then 0 for an identical current image and 1
/// otherwise.
pub fn mi_error(current: &GrayImage, desired: &GrayImage, bins: usize) -> Result<f64> {
    check_bins(bins)?;
    current.same_dims(desired)?;
    if current == desired {
        return Ok(0.0);
    }
    let h = entropy(desired, bins)?;
    if h == 0.0 {
        return Ok(1.0);
    }
    let mi = mutual_information(current, desired, bins)?;
    Ok((1.0 - mi / h).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> GrayImage {
        GrayImage::from_raw(w, h, (0..w * h).map(|_| rng.random()).collect()).unwrap()
    }

    /// H(a) + H(b) - H(a, b) from hash-map probability tables.
    fn oracle_mi(a: &GrayImage, b: &GrayImage, bins: usize) -> f64 {
        let n = a.pixels().len() as f64;
        let mut ja: HashMap<(usize, usize), f64> = HashMap::new();
        let mut pa: HashMap<usize, f64> = HashMap::new();
        let mut pb: HashMap<usize, f64> = HashMap::new();
        for (&x, &y) in a.pixels().iter().zip(b.pixels()) {
            let (bx, by) = (x as usize * bins / 256, y as usize * bins / 256);
            *ja.entry((bx, by)).or_default() += 1.0 / n;
            *pa.entry(bx).or_default() += 1.0 / n;
            *pb.entry(by).or_default() += 1.0 / n;
        }
        let h = |m: &mut dyn Iterator<Item = f64>| -> f64 { m.map(|p| -p * p.ln()).sum() };
        h(&mut pa.values().copied()) + h(&mut pb.values().copied()) - h(&mut ja.values().copied())
    }

    #[test]
    fn matches_oracle_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = random_image(&mut rng, 8, 8);
            let b = random_image(&mut rng, 8, 8);
            let mi = mutual_information(&a, &b, 32).unwrap();
            assert!((mi - oracle_mi(&a, &b, 32)).abs() < 1e-12);
            assert!((mi - mutual_information(&b, &a, 32).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn self_information_is_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_image(&mut rng, 16, 16);
        let mi = mutual_information(&a, &a, 32).unwrap();
        assert!((mi - entropy(&a, 32).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn error_cases() {
        let a = GrayImage::new(4, 4, 3);
        let b = GrayImage::new(4, 5, 3);
        assert!(matches!(mi_error(&a, &b, 32), Err(VisionError::DimensionMismatch(..))));
        assert!(matches!(mutual_information(&a, &a, 0), Err(VisionError::InvalidBins(0))));
    }

    #[test]
    fn error_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_image(&mut rng, 12, 12);
        let b = random_image(&mut rng, 12, 12);
        assert_eq!(mi_error(&a, &a, 32).unwrap(), 0.0);
        let c = GrayImage::new(5, 5, 40);
        assert_eq!(mi_error(&c, &c.clone(), 32).unwrap(), 0.0);
        assert_eq!(mi_error(&GrayImage::new(5, 5, 200), &c, 32).unwrap(), 1.0);
        let e = mi_error(&a, &b, 32).unwrap();
        let expect = 1.0 - oracle_mi(&a, &b, 32) / entropy(&b, 32).unwrap();
        assert!((e - expect).abs() < 1e-12);
    }

    #[test]
    fn histogram_marginals_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_image(&mut rng, 9, 7);
        let b = random_image(&mut rng, 9, 7);
        let h = joint_histogram(&a, &b, 16).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 63);
        assert_eq!(h.marginal_a.iter().sum::<u64>(), 63);
        assert_eq!(h.marginal_b.iter().sum::<u64>(), 63);
    }
}
