//! Aggregation of raw cross-attention into per-token heatmaps.
//!
//! Every slice (pathway, timestep, layer, head) contributes one grid per
//! token. Each grid is bicubically upscaled to the target image size and the
//! results are summed. No normalisation happens here: the downstream
//! percentile threshold only depends on value order.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::grid::{bicubic_upscale, Heatmap2D};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Pathway {
    Down,
    Up,
}

impl Pathway {
    pub fn as_str(self) -> &'static str {
        match self {
            Pathway::Down => "down",
            Pathway::Up => "up",
        }
    }
}

/// Identifies one attention slice. The derived ordering is the summation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SliceKey {
    pub pathway: Pathway,
    pub timestep: u32,
    pub layer: u32,
    pub head: u32,
}

impl fmt::Display for SliceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, t={}, l={}, h={})",
            self.pathway.as_str(),
            self.timestep,
            self.layer,
            self.head
        )
    }
}

/// Cross-attention scores of one slice: one grid per token, all the same size.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionSlice {
    pub key: SliceKey,
    pub grids: Vec<Heatmap2D>,
}

impl AttentionSlice {
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.grids.first().map(Heatmap2D::dims)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionStack {
    tokens: Vec<String>,
    slices: Vec<AttentionSlice>,
}

impl AttentionStack {
    pub fn new(tokens: Vec<String>, slices: Vec<AttentionSlice>) -> Result<Self> {
        let mut keys: Vec<SliceKey> = Vec::with_capacity(slices.len());
        for slice in &slices {
            if slice.grids.len() != tokens.len() {
                return Err(Error::SliceTokenCount {
                    key: slice.key,
                    expected: tokens.len(),
                    got: slice.grids.len(),
                });
            }
            if let Some(dims) = slice.dims() {
                if slice.grids.iter().any(|g| g.dims() != dims) {
                    return Err(Error::RaggedSlice(slice.key));
                }
            }
            keys.push(slice.key);
        }
        keys.sort_unstable();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateSlice(w[0]));
        }
        Ok(Self { tokens, slices })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn slices(&self) -> &[AttentionSlice] {
        &self.slices
    }

    pub fn into_parts(self) -> (Vec<String>, Vec<AttentionSlice>) {
        (self.tokens, self.slices)
    }

    fn summation_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.slices.len()).collect();
        order.sort_unstable_by_key(|&i| self.slices[i].key);
        order
    }
}

/// Per-token heatmaps at the target image size, in token order.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenHeatmapSet {
    tokens: Vec<String>,
    heatmaps: Vec<Heatmap2D>,
}

impl TokenHeatmapSet {
    pub fn new(tokens: Vec<String>, heatmaps: Vec<Heatmap2D>) -> Result<Self> {
        if tokens.len() != heatmaps.len() {
            return Err(Error::LengthMismatch {
                expected: tokens.len(),
                got: heatmaps.len(),
            });
        }
        if let Some(first) = heatmaps.first() {
            if let Some(bad) = heatmaps.iter().find(|h| h.dims() != first.dims()) {
                return Err(Error::DimensionMismatch(
                    first.width(),
                    first.height(),
                    bad.width(),
                    bad.height(),
                ));
            }
        }
        Ok(Self { tokens, heatmaps })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn heatmaps(&self) -> &[Heatmap2D] {
        &self.heatmaps
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// First heatmap whose token equals `token`.
    pub fn get(&self, token: &str) -> Option<&Heatmap2D> {
        self.tokens
            .iter()
            .position(|t| t == token)
            .map(|i| &self.heatmaps[i])
    }
}

/// Sum over all slices of the bicubically upscaled grid for one token.
pub fn aggregate_token_heatmap(
    stack: &AttentionStack,
    token_index: usize,
    out_w: usize,
    out_h: usize,
) -> Result<Heatmap2D> {
    if token_index >= stack.tokens.len() {
        return Err(Error::TokenIndex {
            index: token_index,
            len: stack.tokens.len(),
        });
    }
    let mut acc = vec![0.0f64; out_w * out_h];
    // Validates the output size even for an empty stack.
    Heatmap2D::new(out_w, out_h, acc.clone())?;
    for i in stack.summation_order() {
        let up = bicubic_upscale(&stack.slices[i].grids[token_index], out_w, out_h)?;
        for (a, v) in acc.iter_mut().zip(up.values()) {
            *a += v;
        }
    }
    Heatmap2D::new(out_w, out_h, acc)
}

pub fn aggregate_all(stack: &AttentionStack, out_w: usize, out_h: usize) -> Result<TokenHeatmapSet> {
    let heatmaps = (0..stack.tokens.len())
        .map(|k| aggregate_token_heatmap(stack, k, out_w, out_h))
        .collect::<Result<Vec<_>>>()?;
    TokenHeatmapSet::new(stack.tokens.clone(), heatmaps)
}

/// Min-max rescale to `[0, 1]` for display. A constant grid maps to zeros.
pub fn normalize_for_display(hm: &Heatmap2D) -> Heatmap2D {
    let (lo, hi) = hm
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let values = if range > 0.0 {
        hm.values().iter().map(|&v| (v - lo) / range).collect()
    } else {
        vec![0.0; hm.values().len()]
    };
    Heatmap2D::new(hm.width(), hm.height(), values).expect("rescaled values stay in [0, 1]")
}
