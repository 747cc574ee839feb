//! Nonlocal patch grouping.
//!
//! Square patches are taken on a stride grid whose last row and column are
//! snapped to the image border, so every pixel is covered. For each reference
//! patch, the `group_size` most similar patches (squared Euclidean distance)
//! inside a search window are stacked as the columns of a `patch_dim x
//! group_size` matrix. Aggregation scatters the columns back and divides by
//! the per-pixel coverage count.
//!
//! Patches are vectorized column-major: element `col * side + row`.

use nalgebra::DMatrix;
use ndarray::Array2;

use crate::error::{RestoreError, Result};

/// Patch and search geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupGeometry {
    /// Patch side in pixels.
    pub patch_side: usize,
    /// Number of patches per group, the reference included.
    pub group_size: usize,
    /// Side `L` of the search window centred on the reference origin. Offsets
    /// `-L/2 ..= L/2` are scanned in each direction, clipped at the borders.
    pub search_window: usize,
    /// Distance between neighbouring reference origins.
    pub stride: usize,
}

impl GroupGeometry {
    pub fn new(patch_side: usize, group_size: usize, search_window: usize, stride: usize) -> Result<Self> {
        let g = Self {
            patch_side,
            group_size,
            search_window,
            stride,
        };
        g.validate()?;
        Ok(g)
    }

    /// Default stride for a patch side: 5 for 10x10 patches, 4 otherwise.
    pub fn default_stride(patch_side: usize) -> usize {
        if patch_side >= 10 {
            5
        } else {
            4
        }
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_side * self.patch_side
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_side == 0 {
            return Err(RestoreError::Geometry("patch side must be at least 1".into()));
        }
        if self.group_size == 0 {
            return Err(RestoreError::Geometry("group size must be at least 1".into()));
        }
        if self.stride == 0 {
            return Err(RestoreError::Geometry("stride must be at least 1".into()));
        }
        // A wider stride leaves gaps between patches that nothing covers.
        if self.stride > self.patch_side {
            return Err(RestoreError::Geometry(format!(
                "stride {} exceeds patch side {}",
                self.stride, self.patch_side
            )));
        }
        Ok(())
    }
}

/// A `patch_dim x group_size` matrix of similar patches.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGroup {
    pub data: DMatrix<f64>,
    /// Top-left `(row, col)` of the patch in each column.
    pub origins: Vec<(usize, usize)>,
    /// Squared distance of each column to the reference patch.
    pub distances: Vec<f64>,
    /// Column holding the reference patch; always 0.
    pub reference_index: usize,
    /// Set when the window held fewer than `group_size` candidates and
    /// columns were repeated to fill the group.
    pub padded: bool,
}

fn axis_positions(len: usize, side: usize, stride: usize) -> Vec<usize> {
    let last = len - side;
    let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
    if *v.last().unwrap() != last {
        v.push(last);
    }
    v
}

/// Reference origins in row-major order.
pub fn extract_reference_positions(
    image_height: usize,
    image_width: usize,
    geom: &GroupGeometry,
) -> Result<Vec<(usize, usize)>> {
    geom.validate()?;
    if image_height < geom.patch_side || image_width < geom.patch_side {
        return Err(RestoreError::ImageTooSmall {
            height: image_height,
            width: image_width,
            patch_side: geom.patch_side,
        });
    }
    let rows = axis_positions(image_height, geom.patch_side, geom.stride);
    let cols = axis_positions(image_width, geom.patch_side, geom.stride);
    Ok(rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
        .collect())
}

/// Every patch of an image, vectorized once so that block matching for many
/// references does not re-read the image.
#[derive(Debug, Clone)]
pub struct PatchIndex {
    side: usize,
    rows: usize,
    cols: usize,
    vectors: Vec<f64>,
}

impl PatchIndex {
    pub fn new(image: &Array2<f64>, side: usize) -> Result<Self> {
        let (h, w) = image.dim();
        if side == 0 || h < side || w < side {
            return Err(RestoreError::ImageTooSmall {
                height: h,
                width: w,
                patch_side: side,
            });
        }
        let rows = h - side + 1;
        let cols = w - side + 1;
        let dim = side * side;
        let mut vectors = vec![0.0; rows * cols * dim];
        for r in 0..rows {
            for c in 0..cols {
                let base = (r * cols + c) * dim;
                let dst = &mut vectors[base..base + dim];
                for dc in 0..side {
                    for dr in 0..side {
                        dst[dc * side + dr] = image[[r + dr, c + dc]];
                    }
                }
            }
        }
        Ok(Self {
            side,
            rows,
            cols,
            vectors,
        })
    }

    pub fn patch(&self, row: usize, col: usize) -> &[f64] {
        let dim = self.side * self.side;
        let base = (row * self.cols + col) * dim;
        &self.vectors[base..base + dim]
    }

    /// Number of valid origins along each axis.
    pub fn origin_grid(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Group the `group_size` nearest patches to the patch at `ref_pos`.
    pub fn block_match(&self, ref_pos: (usize, usize), geom: &GroupGeometry) -> Result<PatchGroup> {
        if geom.patch_side != self.side {
            return Err(RestoreError::Geometry(format!(
                "index built for side {}, geometry has side {}",
                self.side, geom.patch_side
            )));
        }
        let (r0, c0) = ref_pos;
        if r0 >= self.rows || c0 >= self.cols {
            return Err(RestoreError::Geometry(format!(
                "reference origin ({}, {}) outside valid range {}x{}",
                r0, c0, self.rows, self.cols
            )));
        }
        let half = geom.search_window / 2;
        let r_lo = r0.saturating_sub(half);
        let r_hi = (r0 + half).min(self.rows - 1);
        let c_lo = c0.saturating_sub(half);
        let c_hi = (c0 + half).min(self.cols - 1);

        let reference = self.patch(r0, c0);
        let mut candidates: Vec<(f64, (usize, usize))> =
            Vec::with_capacity((r_hi - r_lo + 1) * (c_hi - c_lo + 1));
        for r in r_lo..=r_hi {
            for c in c_lo..=c_hi {
                if (r, c) == (r0, c0) {
                    continue;
                }
                candidates.push((squared_distance(self.patch(r, c), reference), (r, c)));
            }
        }
        // Candidates are in scan order, so breaking distance ties by
        // position keeps the earliest scanned patch first.
        let by_distance = |a: &(f64, (usize, usize)), b: &(f64, (usize, usize))| {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        let wanted = geom.group_size.saturating_sub(1).min(candidates.len());
        if wanted < candidates.len() {
            if wanted > 0 {
                candidates.select_nth_unstable_by(wanted - 1, by_distance);
            }
            candidates.truncate(wanted);
        }
        candidates.sort_unstable_by(by_distance);

        let mut ranked = Vec::with_capacity(candidates.len() + 1);
        ranked.push((0.0, (r0, c0)));
        ranked.extend(candidates);

        let c = geom.group_size;
        let padded = ranked.len() < c;
        let dim = self.side * self.side;
        let mut data = DMatrix::zeros(dim, c);
        let mut origins = Vec::with_capacity(c);
        let mut distances = Vec::with_capacity(c);
        for j in 0..c {
            let (d, pos) = ranked[j % ranked.len()];
            data.column_mut(j).copy_from_slice(self.patch(pos.0, pos.1));
            origins.push(pos);
            distances.push(d);
        }
        Ok(PatchGroup {
            data,
            origins,
            distances,
            reference_index: 0,
            padded,
        })
    }
}

/// Squared Euclidean distance, summed in four lanes so the loop vectorizes.
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            let d = x[k] - y[k];
            lanes[k] += d * d;
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x - y) * (x - y)).sum();
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// Block matching on a single plane.
pub fn block_match(image: &Array2<f64>, ref_pos: (usize, usize), geom: &GroupGeometry) -> Result<PatchGroup> {
    PatchIndex::new(image, geom.patch_side)?.block_match(ref_pos, geom)
}

/// Groups for every reference position of `image`.
pub fn build_groups(image: &Array2<f64>, geom: &GroupGeometry) -> Result<Vec<PatchGroup>> {
    let (h, w) = image.dim();
    let positions = extract_reference_positions(h, w, geom)?;
    let index = PatchIndex::new(image, geom.patch_side)?;
    positions.iter().map(|&p| index.block_match(p, geom)).collect()
}

/// Running numerator/denominator for patch aggregation.
#[derive(Debug, Clone)]
pub struct Accumulator {
    sum: Array2<f64>,
    count: Array2<f64>,
}

impl Accumulator {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            sum: Array2::zeros((height, width)),
            count: Array2::zeros((height, width)),
        }
    }

    pub fn add_group(&mut self, data: &DMatrix<f64>, origins: &[(usize, usize)]) -> Result<()> {
        let dim = data.nrows();
        let side = (dim as f64).sqrt().round() as usize;
        if side * side != dim {
            return Err(RestoreError::Geometry(format!("{} rows is not a square patch", dim)));
        }
        if origins.len() != data.ncols() {
            return Err(RestoreError::Geometry(format!(
                "{} origins for {} columns",
                origins.len(),
                data.ncols()
            )));
        }
        let (h, w) = self.sum.dim();
        for (j, &(r, c)) in origins.iter().enumerate() {
            if r + side > h || c + side > w {
                return Err(RestoreError::Geometry(format!(
                    "patch at ({}, {}) exceeds {}x{}",
                    r, c, h, w
                )));
            }
            let col = data.column(j);
            for dc in 0..side {
                for dr in 0..side {
                    self.sum[[r + dr, c + dc]] += col[dc * side + dr];
                    self.count[[r + dr, c + dc]] += 1.0;
                }
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<Array2<f64>> {
        let Self { mut sum, count } = self;
        for ((r, c), v) in sum.indexed_iter_mut() {
            let n = count[[r, c]];
            if n == 0.0 {
                return Err(RestoreError::UncoveredPixel { row: r, col: c });
            }
            *v /= n;
        }
        Ok(sum)
    }
}

/// Average all group columns back into an image.
pub fn aggregate_groups(groups: &[PatchGroup], image_height: usize, image_width: usize) -> Result<Array2<f64>> {
    let mut acc = Accumulator::new(image_height, image_width);
    for g in groups {
        acc.add_group(&g.data, &g.origins)?;
    }
    acc.finish()
}
