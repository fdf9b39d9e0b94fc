//! Patch tokenization and the random masking operator.
//!
//! Images are cut into a row-major grid of square patches; a [`MaskPlan`]
//! partitions the patch positions into masked and visible sets. Masking is
//! sampled without replacement so the masked count is exact.

use ndarray::{Array2, Array3};
use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of the patch tokenization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub image_size: usize,
    pub patch_size: usize,
    pub channels: usize,
}

impl PatchGrid {
    pub fn new(image_size: usize, patch_size: usize, channels: usize) -> Result<Self> {
        if patch_size == 0 || image_size == 0 || channels == 0 {
            return Err(Error::Config(
                "patch grid dimensions must be positive".into(),
            ));
        }
        if image_size % patch_size != 0 {
            return Err(Error::Config(format!(
                "image_size {image_size} not divisible by patch_size {patch_size}"
            )));
        }
        Ok(Self {
            image_size,
            patch_size,
            channels,
        })
    }

    pub fn tokens_per_side(&self) -> usize {
        self.image_size / self.patch_size
    }

    /// Total patch count T.
    pub fn num_tokens(&self) -> usize {
        self.tokens_per_side() * self.tokens_per_side()
    }

    /// Flattened patch dimensionality p^2 * channels.
    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * self.channels
    }
}

/// One realization of the random mask over `{0..T-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPlan {
    pub mask_ratio: f64,
    pub num_tokens: usize,
    /// Sorted, disjoint from `visible_indices`; together they cover 0..T.
    pub masked_indices: Vec<usize>,
    pub visible_indices: Vec<usize>,
    /// Seed that produced this plan; recorded for reproducibility.
    pub rng_seed: u64,
}

impl MaskPlan {
    pub fn num_masked(&self) -> usize {
        self.masked_indices.len()
    }

    pub fn num_visible(&self) -> usize {
        self.visible_indices.len()
    }
}

/// Cut an image tensor (channels x S x S) into T row-major patch vectors.
/// The inverse is [`unpatchify`]; the round trip is lossless.
pub fn patchify(image: &Array3<f64>, grid: &PatchGrid) -> Result<Array2<f64>> {
    let (c, h, w) = image.dim();
    if c != grid.channels || h != grid.image_size || w != grid.image_size {
        return Err(Error::Config(format!(
            "image shape ({c},{h},{w}) incompatible with grid {}x{}x{}",
            grid.channels, grid.image_size, grid.image_size
        )));
    }
    let p = grid.patch_size;
    let side = grid.tokens_per_side();
    let mut out = Array2::zeros((grid.num_tokens(), grid.patch_dim()));
    for ty in 0..side {
        for tx in 0..side {
            let t = ty * side + tx;
            let mut k = 0;
            for ch in 0..c {
                for py in 0..p {
                    for px in 0..p {
                        out[[t, k]] = image[[ch, ty * p + py, tx * p + px]];
                        k += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Reassemble an image from its T patch vectors.
pub fn unpatchify(patches: &Array2<f64>, grid: &PatchGrid) -> Result<Array3<f64>> {
    let (t_count, dim) = patches.dim();
    if t_count != grid.num_tokens() || dim != grid.patch_dim() {
        return Err(Error::Config(format!(
            "patch matrix {t_count}x{dim} incompatible with grid (T={}, dim={})",
            grid.num_tokens(),
            grid.patch_dim()
        )));
    }
    let p = grid.patch_size;
    let side = grid.tokens_per_side();
    let mut out = Array3::zeros((grid.channels, grid.image_size, grid.image_size));
    for ty in 0..side {
        for tx in 0..side {
            let t = ty * side + tx;
            let mut k = 0;
            for ch in 0..grid.channels {
                for py in 0..p {
                    for px in 0..p {
                        out[[ch, ty * p + py, tx * p + px]] = patches[[t, k]];
                        k += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Sample a uniform random subset of `round(mask_ratio * t)` masked positions
/// without replacement. Deterministic for a fixed seed.
pub fn sample_mask(t: usize, mask_ratio: f64, seed: u64) -> Result<MaskPlan> {
    if !(0.0..=1.0).contains(&mask_ratio) {
        return Err(Error::Config(format!(
            "mask_ratio {mask_ratio} outside [0, 1]"
        )));
    }
    let num_masked = (mask_ratio * t as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Partial Fisher-Yates: the first num_masked entries are a uniform
    // subset without replacement.
    let mut idx: Vec<usize> = (0..t).collect();
    for i in 0..num_masked.min(t.saturating_sub(1)) {
        let j = rng.random_range(i..t);
        idx.swap(i, j);
    }
    let mut masked: Vec<usize> = idx[..num_masked].to_vec();
    let mut visible: Vec<usize> = idx[num_masked..].to_vec();
    masked.sort_unstable();
    visible.sort_unstable();
    Ok(MaskPlan {
        mask_ratio,
        num_tokens: t,
        masked_indices: masked,
        visible_indices: visible,
        rng_seed: seed,
    })
}

/// Select the visible token vectors of a plan, together with their original
/// position indices (needed for positional encoding downstream).
pub fn select_visible(tokens: &Array2<f64>, plan: &MaskPlan) -> Result<(Array2<f64>, Vec<usize>)> {
    if tokens.dim().0 != plan.num_tokens {
        return Err(Error::Internal(format!(
            "plan covers {} tokens but {} were provided",
            plan.num_tokens,
            tokens.dim().0
        )));
    }
    let mut out = Array2::zeros((plan.num_visible(), tokens.dim().1));
    for (r, &i) in plan.visible_indices.iter().enumerate() {
        out.row_mut(r).assign(&tokens.row(i));
    }
    Ok((out, plan.visible_indices.clone()))
}
