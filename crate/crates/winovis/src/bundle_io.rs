//! Heatmap bundles (`WVHM`) and raw attention stacks (`WVAS`).
//!
//! Layout of both: 4-byte magic, `u16` LE version, `u32` LE header length,
//! UTF-8 JSON header, then little-endian `f32` grids, row-major. Bundles hold
//! one `width x height` grid per token in token order; stacks hold, per slice,
//! one `grid_w x grid_h` grid per token.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use winovis_core::attribution::{AttentionSlice, AttentionStack, Pathway, SliceKey, TokenHeatmapSet};
use winovis_core::disambiguation::{RoleHeatmaps, TokenRole};
use winovis_core::grid::Heatmap2D;

pub const BUNDLE_MAGIC: [u8; 4] = *b"WVHM";
pub const STACK_MAGIC: [u8; 4] = *b"WVAS";
pub const FORMAT_VERSION: u16 = 1;
const PREAMBLE: usize = 4 + 2 + 4;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("not a WVHM file")]
    NotBundle,
    #[error("not a WVAS file")]
    NotStack,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated or corrupt payload: {0}")]
    Corrupt(String),
    #[error("invalid header: {0}")]
    Header(String),
    #[error("incomplete role map: {0}")]
    IncompleteRoles(String),
    #[error("invalid grid data: {0}")]
    Grid(#[from] winovis_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T, E = FormatError> = std::result::Result<T, E>;

/// Per-token heatmaps of one generated image.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapBundle {
    pub instance_id: String,
    pub width: usize,
    pub height: usize,
    pub tokens: Vec<String>,
    pub caption_flag: bool,
    pub roles: BTreeMap<String, TokenRole>,
    /// One row-major grid per token.
    pub grids: Vec<Vec<f32>>,
}

#[derive(Serialize, Deserialize)]
struct BundleHeader {
    instance_id: String,
    width: usize,
    height: usize,
    tokens: Vec<String>,
    caption_flag: bool,
    roles: BTreeMap<String, TokenRole>,
}

/// Tokens holding the entity 1, entity 2 and pronoun roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleTokens {
    pub entity1: String,
    pub entity2: String,
    pub pronoun: String,
}

/// Checks that every role token is a bundle token and each of the three
/// referent roles is held by exactly one token.
pub fn role_tokens(tokens: &[String], roles: &BTreeMap<String, TokenRole>) -> Result<RoleTokens> {
    if let Some(t) = roles.keys().find(|t| !tokens.contains(t)) {
        return Err(FormatError::IncompleteRoles(format!("role token {t:?} is not a bundle token")));
    }
    let holder = |role: TokenRole| {
        let mut it = roles.iter().filter(|(_, r)| **r == role).map(|(t, _)| t.clone());
        match (it.next(), it.next()) {
            (Some(t), None) => Ok(t),
            (None, _) => Err(FormatError::IncompleteRoles(format!("no {} token", role.as_str()))),
            (Some(_), Some(_)) => Err(FormatError::IncompleteRoles(format!("several {} tokens", role.as_str()))),
        }
    };
    Ok(RoleTokens {
        entity1: holder(TokenRole::Entity1)?,
        entity2: holder(TokenRole::Entity2)?,
        pronoun: holder(TokenRole::Pronoun)?,
    })
}

fn check_grid(values: &[f32], what: &str) -> Result<()> {
    match values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        Some(v) => Err(FormatError::Corrupt(format!("{what} holds invalid value {v}"))),
        None => Ok(()),
    }
}

impl HeatmapBundle {
    pub fn role_tokens(&self) -> Result<RoleTokens> {
        role_tokens(&self.tokens, &self.roles)
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(FormatError::Header("zero width or height".into()));
        }
        if self.grids.len() != self.tokens.len() {
            return Err(FormatError::Corrupt(format!(
                "{} tokens but {} grids",
                self.tokens.len(),
                self.grids.len()
            )));
        }
        let n = self.width.checked_mul(self.height).ok_or_else(|| FormatError::Header("grid too large".into()))?;
        for (t, g) in self.tokens.iter().zip(&self.grids) {
            if g.len() != n {
                return Err(FormatError::Corrupt(format!("grid of {t:?} has {} values, expected {n}", g.len())));
            }
            check_grid(g, &format!("grid of {t:?}"))?;
        }
        self.role_tokens()?;
        Ok(())
    }

    /// Converts the stored grids to heatmaps in token order.
    pub fn heatmap_set(&self) -> Result<TokenHeatmapSet> {
        let maps = self
            .grids
            .iter()
            .map(|g| Heatmap2D::from_f32(self.width, self.height, g))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TokenHeatmapSet::new(self.tokens.clone(), maps)?)
    }

    /// Packs aggregated heatmaps, narrowing to `f32`.
    pub fn from_heatmaps(
        instance_id: &str,
        set: &TokenHeatmapSet,
        roles: BTreeMap<String, TokenRole>,
        caption_flag: bool,
    ) -> Result<Self> {
        let (width, height) = set.heatmaps().first().map_or((0, 0), Heatmap2D::dims);
        let b = Self {
            instance_id: instance_id.into(),
            width,
            height,
            tokens: set.tokens().to_vec(),
            caption_flag,
            roles,
            grids: set.heatmaps().iter().map(Heatmap2D::to_f32).collect(),
        };
        b.validate()?;
        Ok(b)
    }
}

/// Heatmaps of the three roles, looked up in a converted set.
pub fn role_heatmaps<'a>(set: &'a TokenHeatmapSet, roles: &RoleTokens) -> Result<RoleHeatmaps<'a>> {
    Ok(RoleHeatmaps::from_set(set, &roles.entity1, &roles.entity2, &roles.pronoun)?)
}

fn encode(magic: [u8; 4], header: &[u8], grids: impl Iterator<Item = f32>, payload_len: usize) -> Result<Vec<u8>> {
    let header_len = u32::try_from(header.len()).map_err(|_| FormatError::Header("header too large".into()))?;
    let mut out = Vec::with_capacity(PREAMBLE + header.len() + payload_len);
    out.extend_from_slice(&magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(header);
    for v in grids {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Splits a file into header bytes and payload after checking the preamble.
fn split(bytes: &[u8], magic: [u8; 4], wrong_magic: FormatError) -> Result<(&[u8], &[u8])> {
    if bytes.len() < 4 || bytes[..4] != magic {
        return Err(wrong_magic);
    }
    if bytes.len() < PREAMBLE {
        return Err(FormatError::Corrupt("file shorter than its preamble".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let header_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    let rest = &bytes[PREAMBLE..];
    if rest.len() < header_len {
        return Err(FormatError::Corrupt(format!(
            "header needs {header_len} bytes, {} present",
            rest.len()
        )));
    }
    Ok(rest.split_at(header_len))
}

fn parse_header<T: for<'de> Deserialize<'de>>(header: &[u8]) -> Result<T> {
    let text = std::str::from_utf8(header).map_err(|e| FormatError::Header(e.to_string()))?;
    serde_json::from_str(text).map_err(|e| FormatError::Header(e.to_string()))
}

fn decode_f32(payload: &[u8]) -> Vec<f32> {
    payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn payload_bytes(cells: Option<usize>) -> Result<usize> {
    cells
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| FormatError::Corrupt("declared payload size overflows".into()))
}

pub fn write_bundle(bundle: &HeatmapBundle) -> Result<Vec<u8>> {
    bundle.validate()?;
    let header = serde_json::to_vec(&BundleHeader {
        instance_id: bundle.instance_id.clone(),
        width: bundle.width,
        height: bundle.height,
        tokens: bundle.tokens.clone(),
        caption_flag: bundle.caption_flag,
        roles: bundle.roles.clone(),
    })
    .map_err(|e| FormatError::Header(e.to_string()))?;
    let cells = bundle.grids.len() * bundle.width * bundle.height;
    encode(BUNDLE_MAGIC, &header, bundle.grids.iter().flatten().copied(), cells * 4)
}

pub fn read_bundle(bytes: &[u8]) -> Result<HeatmapBundle> {
    let (header, payload) = split(bytes, BUNDLE_MAGIC, FormatError::NotBundle)?;
    let h: BundleHeader = parse_header(header)?;
    if h.width == 0 || h.height == 0 {
        return Err(FormatError::Header("zero width or height".into()));
    }
    let n = h.width.checked_mul(h.height);
    let expected = payload_bytes(n.and_then(|n| n.checked_mul(h.tokens.len())))?;
    if payload.len() != expected {
        return Err(FormatError::Corrupt(format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let values = decode_f32(payload);
    let grids: Vec<Vec<f32>> = if h.tokens.is_empty() {
        Vec::new()
    } else {
        values.chunks_exact(h.width * h.height).map(<[f32]>::to_vec).collect()
    };
    let bundle = HeatmapBundle {
        instance_id: h.instance_id,
        width: h.width,
        height: h.height,
        tokens: h.tokens,
        caption_flag: h.caption_flag,
        roles: h.roles,
        grids,
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Raw cross-attention of one image, as written by the exporter.
#[derive(Debug, Clone, PartialEq)]
pub struct StackFile {
    pub instance_id: String,
    pub tokens: Vec<String>,
    pub slices: Vec<StackSlice>,
    /// Optional role map; when absent roles come from the instance record.
    pub roles: Option<BTreeMap<String, TokenRole>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackSlice {
    pub key: SliceKey,
    pub grid_w: usize,
    pub grid_h: usize,
    /// One row-major grid per token.
    pub grids: Vec<Vec<f32>>,
}

#[derive(Serialize, Deserialize)]
struct SliceHeader {
    pathway: Pathway,
    timestep: u32,
    layer: u32,
    head: u32,
    grid_w: usize,
    grid_h: usize,
}

#[derive(Serialize, Deserialize)]
struct StackHeader {
    instance_id: String,
    tokens: Vec<String>,
    slices: Vec<SliceHeader>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    roles: Option<BTreeMap<String, TokenRole>>,
}

impl StackFile {
    fn validate(&self) -> Result<()> {
        let mut keys: Vec<SliceKey> = self.slices.iter().map(|s| s.key).collect();
        keys.sort_unstable();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(FormatError::Grid(winovis_core::Error::DuplicateSlice(w[0])));
        }
        for s in &self.slices {
            if s.grid_w == 0 || s.grid_h == 0 {
                return Err(FormatError::Header(format!("slice {} has a zero dimension", s.key)));
            }
            if s.grids.len() != self.tokens.len() {
                return Err(FormatError::Corrupt(format!(
                    "slice {} has {} grids for {} tokens",
                    s.key,
                    s.grids.len(),
                    self.tokens.len()
                )));
            }
            let n = s.grid_w.checked_mul(s.grid_h).ok_or_else(|| FormatError::Header("grid too large".into()))?;
            for g in &s.grids {
                if g.len() != n {
                    return Err(FormatError::Corrupt(format!("slice {} grid has {} values, expected {n}", s.key, g.len())));
                }
                check_grid(g, &format!("slice {}", s.key))?;
            }
        }
        if let Some(roles) = &self.roles {
            role_tokens(&self.tokens, roles)?;
        }
        Ok(())
    }

    pub fn attention_stack(&self) -> Result<AttentionStack> {
        let slices = self
            .slices
            .iter()
            .map(|s| {
                let grids = s
                    .grids
                    .iter()
                    .map(|g| Heatmap2D::from_f32(s.grid_w, s.grid_h, g))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(AttentionSlice { key: s.key, grids })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AttentionStack::new(self.tokens.clone(), slices)?)
    }
}

pub fn write_stack(stack: &StackFile) -> Result<Vec<u8>> {
    stack.validate()?;
    let header = serde_json::to_vec(&StackHeader {
        instance_id: stack.instance_id.clone(),
        tokens: stack.tokens.clone(),
        slices: stack
            .slices
            .iter()
            .map(|s| SliceHeader {
                pathway: s.key.pathway,
                timestep: s.key.timestep,
                layer: s.key.layer,
                head: s.key.head,
                grid_w: s.grid_w,
                grid_h: s.grid_h,
            })
            .collect(),
        roles: stack.roles.clone(),
    })
    .map_err(|e| FormatError::Header(e.to_string()))?;
    let cells: usize = stack.slices.iter().map(|s| s.grids.len() * s.grid_w * s.grid_h).sum();
    let values = stack.slices.iter().flat_map(|s| s.grids.iter().flatten().copied());
    encode(STACK_MAGIC, &header, values, cells * 4)
}

pub fn read_stack(bytes: &[u8]) -> Result<StackFile> {
    let (header, payload) = split(bytes, STACK_MAGIC, FormatError::NotStack)?;
    let h: StackHeader = parse_header(header)?;
    let mut total = Some(0usize);
    for s in &h.slices {
        let cells = s.grid_w.checked_mul(s.grid_h).and_then(|c| c.checked_mul(h.tokens.len()));
        total = total.zip(cells).and_then(|(t, c)| t.checked_add(c));
    }
    let expected = payload_bytes(total)?;
    if payload.len() != expected {
        return Err(FormatError::Corrupt(format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let values = decode_f32(payload);
    let mut at = 0;
    let mut slices = Vec::with_capacity(h.slices.len());
    for s in h.slices {
        if s.grid_w == 0 || s.grid_h == 0 {
            return Err(FormatError::Header("slice with a zero dimension".into()));
        }
        let n = s.grid_w * s.grid_h;
        let grids = (0..h.tokens.len())
            .map(|k| values[at + k * n..at + (k + 1) * n].to_vec())
            .collect();
        at += n * h.tokens.len();
        slices.push(StackSlice {
            key: SliceKey { pathway: s.pathway, timestep: s.timestep, layer: s.layer, head: s.head },
            grid_w: s.grid_w,
            grid_h: s.grid_h,
            grids,
        });
    }
    let stack = StackFile { instance_id: h.instance_id, tokens: h.tokens, slices, roles: h.roles };
    stack.validate()?;
    Ok(stack)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<HeatmapBundle> {
    read_bundle(&std::fs::read(path)?)
}

pub fn save_bundle(path: &Path, bundle: &HeatmapBundle) -> Result<()> {
    Ok(write_atomic(path, &write_bundle(bundle)?)?)
}

pub fn load_stack(path: &Path) -> Result<StackFile> {
    read_stack(&std::fs::read(path)?)
}

pub fn save_stack(path: &Path, stack: &StackFile) -> Result<()> {
    Ok(write_atomic(path, &write_stack(stack)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roles() -> BTreeMap<String, TokenRole> {
        [("cat", TokenRole::Entity1), ("dog", TokenRole::Entity2), ("it", TokenRole::Pronoun)]
            .into_iter()
            .map(|(t, r)| (t.to_string(), r))
            .collect()
    }

    fn bundle() -> HeatmapBundle {
        HeatmapBundle {
            instance_id: "abc".into(),
            width: 3,
            height: 2,
            tokens: vec!["cat".into(), "dog".into(), "it".into(), "the".into()],
            caption_flag: true,
            roles: roles(),
            grids: (0..4).map(|k| (0..6).map(|i| (k * 6 + i) as f32 * 0.25).collect()).collect(),
        }
    }

    fn stack() -> StackFile {
        let key = |pathway, timestep| SliceKey { pathway, timestep, layer: 0, head: 1 };
        StackFile {
            instance_id: "abc".into(),
            tokens: vec!["cat".into(), "it".into()],
            slices: vec![
                StackSlice { key: key(Pathway::Down, 3), grid_w: 2, grid_h: 2, grids: vec![vec![1.0; 4], vec![0.5; 4]] },
                StackSlice { key: key(Pathway::Up, 0), grid_w: 4, grid_h: 2, grids: vec![vec![0.0; 8], vec![2.0; 8]] },
            ],
            roles: None,
        }
    }

    #[test]
    fn bundle_round_trip_and_length() {
        let b = bundle();
        let bytes = write_bundle(&b).unwrap();
        let header_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), 10 + header_len + 4 * 3 * 2 * 4);
        let back = read_bundle(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(write_bundle(&back).unwrap(), bytes);
    }

    #[test]
    fn bundle_rejections() {
        let bytes = write_bundle(&bundle()).unwrap();
        let mut bad = bytes.clone();
        bad[0] ^= 0xff;
        assert_eq!(read_bundle(&bad).unwrap_err().to_string(), "not a WVHM file");
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(read_bundle(&v2).unwrap_err().to_string().starts_with("unsupported version"));
        let short = &bytes[..bytes.len() - 1];
        assert!(read_bundle(short).unwrap_err().to_string().starts_with("truncated or corrupt payload"));

        let mut b = bundle();
        b.roles.remove("it");
        assert!(write_bundle(&b).unwrap_err().to_string().starts_with("incomplete role map"));
    }

    #[test]
    fn negative_or_nan_values_rejected() {
        let mut b = bundle();
        b.grids[1][2] = f32::NAN;
        assert!(matches!(write_bundle(&b), Err(FormatError::Corrupt(_))));
        let mut bytes = write_bundle(&bundle()).unwrap();
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&(-1.0f32).to_le_bytes());
        assert!(matches!(read_bundle(&bytes), Err(FormatError::Corrupt(_))));
    }

    #[test]
    fn stack_round_trip() {
        let s = stack();
        let bytes = write_stack(&s).unwrap();
        assert_eq!(read_stack(&bytes).unwrap(), s);
        let stack = read_stack(&bytes).unwrap().attention_stack().unwrap();
        assert_eq!(stack.slices().len(), 2);
    }

    #[test]
    fn stack_duplicate_key_rejected_at_write() {
        let mut s = stack();
        s.slices[1].key = s.slices[0].key;
        assert!(matches!(write_stack(&s), Err(FormatError::Grid(winovis_core::Error::DuplicateSlice(_)))));
    }

    #[test]
    fn stack_token_count_mismatch_is_corrupt() {
        let s = stack();
        let bytes = write_stack(&s).unwrap();
        // Rewrite the header with a third token while keeping the payload.
        let header_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[10..10 + header_len]).unwrap();
        let forged = header.replace(r#"["cat","it"]"#, r#"["cat","it","dog"]"#);
        let mut out = bytes[..6].to_vec();
        out.extend_from_slice(&(forged.len() as u32).to_le_bytes());
        out.extend_from_slice(forged.as_bytes());
        out.extend_from_slice(&bytes[10 + header_len..]);
        assert!(matches!(read_stack(&out), Err(FormatError::Corrupt(_))));
    }

    #[test]
    fn atomic_save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wvhm");
        save_bundle(&path, &bundle()).unwrap();
        assert_eq!(load_bundle(&path).unwrap(), bundle());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
