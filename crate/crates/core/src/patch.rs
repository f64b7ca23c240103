//! Patch grid, block matching and aggregation.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::image_io::Image;
use crate::Matrix;

/// Top-left corner of a square patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatchRef {
    pub row: usize,
    pub col: usize,
}

impl PatchRef {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// A reference patch together with its most similar neighbours.
///
/// Row `i` of `matrix` is the row-major vectorization of `members[i]`;
/// `members[0]` is always the reference.
#[derive(Debug, Clone)]
pub struct PatchGroup {
    pub reference: PatchRef,
    pub members: Vec<PatchRef>,
    /// Squared Euclidean distance of each member to the reference patch.
    pub distances: Vec<f64>,
    pub matrix: Matrix,
}

impl PatchGroup {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn check_fits(img: &Image, patch_size: usize) -> Result<()> {
    if patch_size == 0 || patch_size > img.width() || patch_size > img.height() {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            patch_size,
        });
    }
    Ok(())
}

/// Positions 0, stride, 2·stride, … plus the last valid offset.
fn grid_positions(len: usize, patch_size: usize, stride: usize) -> Vec<usize> {
    let last = len - patch_size;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

/// Reference-patch grid covering every pixel at least once.
pub fn extract_patch_refs(img: &Image, patch_size: usize, stride: usize) -> Result<Vec<PatchRef>> {
    check_fits(img, patch_size)?;
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    let rows = grid_positions(img.height(), patch_size, stride);
    let cols = grid_positions(img.width(), patch_size, stride);
    Ok(rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| PatchRef::new(r, c)))
        .collect())
}

/// Row-major copy of the patch at `at`.
pub fn patch_vector(img: &Image, at: PatchRef, patch_size: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(patch_size * patch_size);
    for r in at.row..at.row + patch_size {
        let start = r * img.width() + at.col;
        v.extend_from_slice(&img.data()[start..start + patch_size]);
    }
    v
}

fn squared_distance(img: &Image, reference: &[f64], at: PatchRef, patch_size: usize) -> f64 {
    let mut d = 0.0;
    for i in 0..patch_size {
        let start = (at.row + i) * img.width() + at.col;
        let row = &img.data()[start..start + patch_size];
        let refrow = &reference[i * patch_size..(i + 1) * patch_size];
        for (a, b) in row.iter().zip(refrow) {
            let t = a - b;
            d += t * t;
        }
    }
    d
}

/// Inclusive range of top-left offsets inside a window centred on `center`.
fn window_range(center: usize, window: usize, last: usize) -> (usize, usize) {
    let lo = center.saturating_sub(window / 2);
    let hi = (center + window - window / 2 - 1).min(last);
    (lo, hi)
}

/// K-nearest-neighbour block matching inside a square search window.
///
/// Candidates are every top-left position (stride 1) in the `window`×`window`
/// region centred on the reference, clipped to the image. The reference is
/// always first; the other `k − 1` members are the closest candidates by
/// squared Euclidean distance, ties broken by `(row, col)`.
pub fn build_group(
    img: &Image,
    reference: PatchRef,
    patch_size: usize,
    window: usize,
    k: usize,
) -> Result<PatchGroup> {
    check_fits(img, patch_size)?;
    if k == 0 {
        return Err(Error::InvalidParameter("group size must be at least 1".into()));
    }
    if window < patch_size {
        return Err(Error::InvalidParameter(format!(
            "search window {window} is smaller than patch size {patch_size}"
        )));
    }
    let last_row = img.height() - patch_size;
    let last_col = img.width() - patch_size;
    if reference.row > last_row || reference.col > last_col {
        return Err(Error::CoordinateOutOfRange {
            row: reference.row,
            col: reference.col,
        });
    }
    let ref_vec = patch_vector(img, reference, patch_size);
    let (r0, r1) = window_range(reference.row, window, last_row);
    let (c0, c1) = window_range(reference.col, window, last_col);

    let mut candidates: Vec<(f64, PatchRef)> = Vec::with_capacity((r1 - r0 + 1) * (c1 - c0 + 1));
    for r in r0..=r1 {
        for c in c0..=c1 {
            let at = PatchRef::new(r, c);
            if at != reference {
                candidates.push((squared_distance(img, &ref_vec, at, patch_size), at));
            }
        }
    }
    if candidates.len() + 1 < k {
        return Err(Error::TooFewCandidates {
            available: candidates.len() + 1,
            k,
        });
    }
    let by_rank = |a: &(f64, PatchRef), b: &(f64, PatchRef)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k > 1 && candidates.len() > k - 1 {
        candidates.select_nth_unstable_by(k - 2, by_rank);
        candidates.truncate(k - 1);
    }
    candidates.sort_by(by_rank);

    let n = patch_size * patch_size;
    let mut members = Vec::with_capacity(k);
    let mut distances = Vec::with_capacity(k);
    let mut matrix = Array2::zeros((k, n));
    members.push(reference);
    distances.push(0.0);
    matrix
        .row_mut(0)
        .iter_mut()
        .zip(&ref_vec)
        .for_each(|(d, s)| *d = *s);
    for (i, (dist, at)) in candidates.into_iter().take(k - 1).enumerate() {
        members.push(at);
        distances.push(dist);
        let v = patch_vector(img, at, patch_size);
        matrix
            .row_mut(i + 1)
            .iter_mut()
            .zip(&v)
            .for_each(|(d, s)| *d = *s);
    }
    Ok(PatchGroup {
        reference,
        members,
        distances,
        matrix,
    })
}

/// Scatters denoised group rows back to their footprints and averages
/// overlapping contributions with uniform weights.
///
/// Contributions are accumulated in iteration order, so the result is
/// bit-for-bit reproducible for a fixed group order.
pub fn aggregate<'a, I>(groups: I, width: usize, height: usize, patch_size: usize) -> Result<Image>
where
    I: IntoIterator<Item = (&'a PatchGroup, &'a Matrix)>,
{
    let n = patch_size * patch_size;
    let mut sum = vec![0.0; width * height];
    let mut count = vec![0u32; width * height];
    for (group, denoised) in groups {
        if denoised.dim() != (group.len(), n) {
            return Err(Error::DimensionMismatch(format!(
                "denoised group is {:?}, expected ({}, {n})",
                denoised.dim(),
                group.len()
            )));
        }
        for (at, row) in group.members.iter().zip(denoised.rows()) {
            if at.row + patch_size > height || at.col + patch_size > width {
                return Err(Error::CoordinateOutOfRange {
                    row: at.row,
                    col: at.col,
                });
            }
            for (i, v) in row.iter().enumerate() {
                let idx = (at.row + i / patch_size) * width + at.col + i % patch_size;
                sum[idx] += v;
                count[idx] += 1;
            }
        }
    }
    for (idx, &c) in count.iter().enumerate() {
        if c == 0 {
            return Err(Error::UncoveredPixel {
                row: idx / width,
                col: idx % width,
            });
        }
        sum[idx] /= f64::from(c);
    }
    Image::new(width, height, sum)
}
