// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::string::String;
use alloc::vec::Vec;

use crate::scene::{CONFIDENCE_THRESHOLD, IMAGE_HEIGHT, IMAGE_WIDTH};
use crate::task::TaskId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BundleError {
    #[error("{name} has {got} values, expected {want}")]
    Shape {
        name: &'static str,
        got: usize,
        want: usize,
    },
    #[error("patch grid {0}x{1} does not fit the image")]
    Grid(usize, usize),
    #[error("image is {0}x{1}, expected 480x720")]
    ImageSize(usize, usize),
    #[error("token map is not a bijection onto the patch grid")]
    TokenMap,
    #[error("attention at layer {layer} head {head} token {token} is {value}")]
    BadAttention {
        layer: usize,
        head: usize,
        token: usize,
        value: f32,
    },
    #[error("attention mass {sum} at layer {layer} head {head} exceeds 1")]
    AttentionMass { layer: usize, head: usize, sum: f64 },
    #[error("{name} value {value} at index {index} is out of range")]
    Value {
        name: &'static str,
        index: usize,
        value: f32,
    },
    #[error("depth margin must be positive, got {0}")]
    Delta(f64),
    #[error("mechanistic analysis covers T1-T3 only, got {0}")]
    Task(TaskId),
}

/// Slack on the per-cell attention sum for producer-side f32 rounding.
const MASS_TOLERANCE: f64 = 1e-4;

/// Patch grid over the image. Patch `(r, c)` covers rows
/// `r*H/Hp .. (r+1)*H/Hp` and columns `c*W/Wp .. (c+1)*W/Wp`, integer
/// division.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchGrid {
    pub image_height: usize,
    pub image_width: usize,
    pub rows: usize,
    pub cols: usize,
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row_span(&self, r: usize) -> (usize, usize) {
        (r * self.image_height / self.rows, (r + 1) * self.image_height / self.rows)
    }

    pub fn col_span(&self, c: usize) -> (usize, usize) {
        (c * self.image_width / self.cols, (c + 1) * self.image_width / self.cols)
    }

    /// Row-major pixel indices of patch `p`.
    pub fn pixels(&self, p: usize) -> impl Iterator<Item = usize> + '_ {
        let (r0, r1) = self.row_span(p / self.cols);
        let (c0, c1) = self.col_span(p % self.cols);
        (r0..r1).flat_map(move |r| (c0..c1).map(move |c| r * self.image_width + c))
    }
}

/// One example's recorded attention and geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationBundle {
    pub example_id: String,
    pub task: TaskId,
    pub grid: PatchGrid,
    /// Decoder layer indices the attention rows belong to.
    pub layers: Vec<u32>,
    pub n_heads: usize,
    /// Patch index of each visual token.
    pub token_patch: Vec<u32>,
    /// `attention[(layer * n_heads + head) * n_tokens + token]`.
    pub attention: Vec<f32>,
    /// Meters, row-major `H × W`.
    pub depth: Vec<f32>,
    /// In `[0, 1]`, row-major `H × W`.
    pub confidence: Vec<f32>,
    /// Nonzero marks target pixels, row-major `H × W`.
    pub target_mask: Vec<f32>,
    pub delta: f64,
}

impl ActivationBundle {
    pub fn n_tokens(&self) -> usize {
        self.token_patch.len()
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn attention_row(&self, layer: usize, head: usize) -> &[f32] {
        let n = self.n_tokens();
        let start = (layer * self.n_heads + head) * n;
        &self.attention[start..start + n]
    }

    pub fn validate(&self) -> Result<(), BundleError> {
        if !matches!(self.task, TaskId::T1 | TaskId::T2 | TaskId::T3) {
            return Err(BundleError::Task(self.task));
        }
        let g = self.grid;
        if (g.image_height, g.image_width) != (IMAGE_HEIGHT, IMAGE_WIDTH) {
            return Err(BundleError::ImageSize(g.image_height, g.image_width));
        }
        if g.rows == 0 || g.cols == 0 || g.rows > g.image_height || g.cols > g.image_width {
            return Err(BundleError::Grid(g.rows, g.cols));
        }
        let pixels = g.image_height * g.image_width;
        for (name, arr) in [
            ("depth", &self.depth),
            ("confidence", &self.confidence),
            ("target_mask", &self.target_mask),
        ] {
            if arr.len() != pixels {
                return Err(BundleError::Shape {
                    name,
                    got: arr.len(),
                    want: pixels,
                });
            }
        }
        if self.token_patch.len() != g.len() {
            return Err(BundleError::TokenMap);
        }
        let mut seen = alloc::vec![false; g.len()];
        for &p in &self.token_patch {
            let p = p as usize;
            if p >= g.len() || seen[p] {
                return Err(BundleError::TokenMap);
            }
            seen[p] = true;
        }
        let want = self.n_layers() * self.n_heads * self.n_tokens();
        if self.attention.len() != want {
            return Err(BundleError::Shape {
                name: "attention",
                got: self.attention.len(),
                want,
            });
        }
        for layer in 0..self.n_layers() {
            for head in 0..self.n_heads {
                let mut sum = 0.0f64;
                for (token, &a) in self.attention_row(layer, head).iter().enumerate() {
                    if !(a.is_finite() && a >= 0.0) {
                        return Err(BundleError::BadAttention {
                            layer,
                            head,
                            token,
                            value: a,
                        });
                    }
                    sum += f64::from(a);
                }
                if sum > 1.0 + MASS_TOLERANCE {
                    return Err(BundleError::AttentionMass { layer, head, sum });
                }
            }
        }
        let check = |name, arr: &[f32], ok: &dyn Fn(f32) -> bool| {
            arr.iter()
                .position(|&v| !ok(v))
                .map_or(Ok(()), |index| {
                    Err(BundleError::Value {
                        name,
                        index,
                        value: arr[index],
                    })
                })
        };
        check("depth", &self.depth, &|v| v.is_finite())?;
        check("confidence", &self.confidence, &|v| (0.0..=1.0).contains(&v))?;
        check("target_mask", &self.target_mask, &|v| v.is_finite())?;
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(BundleError::Delta(self.delta));
        }
        Ok(())
    }

    pub(crate) fn pixel_reliable(&self, idx: usize) -> bool {
        f64::from(self.confidence[idx]) >= CONFIDENCE_THRESHOLD
    }

    /// Token reliability: mean patch confidence at least the threshold.
    pub fn reliable_tokens(&self) -> Vec<bool> {
        self.token_patch
            .iter()
            .map(|&p| {
                let (sum, n) = self
                    .grid
                    .pixels(p as usize)
                    .fold((0.0f64, 0usize), |(s, n), i| (s + f64::from(self.confidence[i]), n + 1));
                n > 0 && sum / n as f64 >= CONFIDENCE_THRESHOLD
            })
            .collect()
    }

    /// Mean depth over the reliable pixels of each token's patch; `None`
    /// when the patch has none.
    pub fn token_depths(&self) -> Vec<Option<f64>> {
        self.token_patch
            .iter()
            .map(|&p| {
                let (sum, n) = self
                    .grid
                    .pixels(p as usize)
                    .filter(|&i| self.pixel_reliable(i))
                    .fold((0.0f64, 0usize), |(s, n), i| (s + f64::from(self.depth[i]), n + 1));
                (n > 0).then(|| sum / n as f64)
            })
            .collect()
    }
}
