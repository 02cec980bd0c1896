//! Tube masking and trajectory-based masking.
//!
//! All target counts use round-half-up. Trajectory masking first hides a
//! fraction `m` of the tokens touched by overlaid objects, then fills the
//! remaining budget `round(m N)` with random tubes. The last tube is trimmed
//! from its highest temporal slice down so the total is exact.

use serde::{Deserialize, Serialize};

use crate::compositor::Footprint;
use crate::error::{config_err, shape_err, Result};
use crate::rng::{choose_distinct, uniform_index, SampleRng};
use crate::tokenizer::{TokenGeometry, Tokens};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Trajectory,
    Tube,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskConfig {
    pub ratio: f64,
    pub use_trajectory: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self { ratio: 0.8, use_trajectory: true, seed: 0 }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<()> {
        check_ratio(self.ratio)
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if ratio > 0.0 && ratio < 1.0 {
        Ok(())
    } else {
        Err(config_err(format!("masking ratio must lie in (0, 1), got {ratio}")))
    }
}

/// `floor(x + 1/2)` for non-negative `x`.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Partition of `0..N` into masked and unmasked token indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSet {
    pub token_count: usize,
    /// Ascending.
    pub masked: Vec<u32>,
    /// Ascending.
    pub unmasked: Vec<u32>,
    /// Provenance of `masked[i]`.
    pub provenance: Vec<Provenance>,
}

impl MaskSet {
    fn from_flags(flags: &[Option<Provenance>]) -> Self {
        let mut masked = Vec::new();
        let mut unmasked = Vec::new();
        let mut provenance = Vec::new();
        for (i, flag) in flags.iter().enumerate() {
            match flag {
                Some(p) => {
                    masked.push(i as u32);
                    provenance.push(*p);
                }
                None => unmasked.push(i as u32),
            }
        }
        Self { token_count: flags.len(), masked, unmasked, provenance }
    }

    pub fn is_masked(&self, index: u32) -> bool {
        self.masked.binary_search(&index).is_ok()
    }

    pub fn provenance_of(&self, index: u32) -> Option<Provenance> {
        self.masked.binary_search(&index).ok().map(|i| self.provenance[i])
    }

    pub fn count(&self, kind: Provenance) -> usize {
        self.provenance.iter().filter(|&&p| p == kind).count()
    }

    pub fn trajectory_indices(&self) -> Vec<u32> {
        self.masked
            .iter()
            .zip(&self.provenance)
            .filter(|(_, &p)| p == Provenance::Trajectory)
            .map(|(&i, _)| i)
            .collect()
    }

    pub fn ratio(&self) -> f64 {
        self.masked.len() as f64 / self.token_count as f64
    }

    /// Rebuilds a mask set from its masked list and trajectory subset.
    pub fn from_parts(token_count: usize, masked: Vec<u32>, trajectory: &[u32]) -> Result<Self> {
        if masked.windows(2).any(|w| w[0] >= w[1]) || masked.last().is_some_and(|&i| i as usize >= token_count) {
            return Err(shape_err("masked indices must be strictly ascending and below the token count"));
        }
        let mut flags = vec![None; token_count];
        for &i in &masked {
            flags[i as usize] = Some(Provenance::Tube);
        }
        for &i in trajectory {
            match flags.get_mut(i as usize) {
                Some(slot @ Some(_)) => *slot = Some(Provenance::Trajectory),
                _ => return Err(shape_err(format!("trajectory index {i} is not masked"))),
            }
        }
        Ok(Self::from_flags(&flags))
    }
}

/// Masks `round(m S)` random spatial positions across every temporal slice.
pub fn tube_mask(geom: &TokenGeometry, ratio: f64, rng: &mut SampleRng) -> Result<MaskSet> {
    geom.validate()?;
    check_ratio(ratio)?;
    let s = geom.spatial_count();
    let tubes = round_half_up(ratio * s as f64).min(s);
    let mut flags = vec![None; geom.token_count()];
    for pos in choose_distinct(rng, s, tubes) {
        for tau in 0..geom.grid_frames() {
            flags[tau * s + pos] = Some(Provenance::Tube);
        }
    }
    Ok(MaskSet::from_flags(&flags))
}

/// Tokens whose cube contains at least one footprint pixel. Ascending.
pub fn object_token_set(footprint: &Footprint, geom: &TokenGeometry) -> Result<Vec<u32>> {
    geom.validate()?;
    if (footprint.frames, footprint.height, footprint.width) != (geom.frames, geom.height, geom.width) {
        return Err(shape_err(format!(
            "footprint is {}x{}x{}, geometry expects {}x{}x{}",
            footprint.frames, footprint.height, footprint.width, geom.frames, geom.height, geom.width
        )));
    }
    let mut hit = vec![false; geom.token_count()];
    let (pt, ps, cols, s) = (geom.temporal_patch, geom.spatial_patch, geom.grid_cols(), geom.spatial_count());
    for t in 0..geom.frames {
        for h in 0..geom.height {
            let row_base = (t / pt) * s + (h / ps) * cols;
            let line = &footprint.mask[(t * geom.height + h) * geom.width..][..geom.width];
            for (w, _) in line.iter().enumerate().filter(|(_, &b)| b) {
                hit[row_base + w / ps] = true;
            }
        }
    }
    Ok(hit.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i as u32).collect())
}

/// Trajectory masking followed by tube filling to exactly `round(m N)`.
pub fn trajectory_mask(geom: &TokenGeometry, ratio: f64, object_tokens: &[u32], rng: &mut SampleRng) -> Result<MaskSet> {
    geom.validate()?;
    check_ratio(ratio)?;
    let n = geom.token_count();
    let s = geom.spatial_count();
    let mut objects = object_tokens.to_vec();
    objects.sort_unstable();
    objects.dedup();
    if objects.last().is_some_and(|&i| i as usize >= n) {
        return Err(shape_err(format!("object token index out of range for {n} tokens")));
    }

    let mut flags: Vec<Option<Provenance>> = vec![None; n];
    let on_path = round_half_up(ratio * objects.len() as f64);
    for k in choose_distinct(rng, objects.len(), on_path) {
        flags[objects[k] as usize] = Some(Provenance::Trajectory);
    }
    let mut count = on_path;

    let target = round_half_up(ratio * n as f64).min(n);
    let mut positions: Vec<usize> = (0..s).collect();
    let mut next = 0;
    let mut last_tube = Vec::new();
    while count < target && next < s {
        let j = uniform_index(rng, next, s - 1);
        positions.swap(next, j);
        let pos = positions[next];
        next += 1;
        last_tube.clear();
        for tau in 0..geom.grid_frames() {
            let idx = tau * s + pos;
            if flags[idx].is_none() {
                flags[idx] = Some(Provenance::Tube);
                last_tube.push(idx);
                count += 1;
            }
        }
    }
    while count > target {
        let idx = last_tube.pop().expect("overshoot comes from the last tube");
        flags[idx] = None;
        count -= 1;
    }
    Ok(MaskSet::from_flags(&flags))
}

/// Unmasked token blocks in ascending index order, plus the masked list.
pub fn mask_apply(tokens: &Tokens, mask: &MaskSet) -> Result<(Tokens, Vec<u32>)> {
    if tokens.len() != mask.token_count {
        return Err(shape_err(format!("{} tokens for a mask over {}", tokens.len(), mask.token_count)));
    }
    let mut data = Vec::with_capacity(mask.unmasked.len() * tokens.block_len);
    for &i in &mask.unmasked {
        data.extend_from_slice(tokens.block(i as usize));
    }
    Ok((Tokens { block_len: tokens.block_len, data }, mask.masked.clone()))
}

/// Inverse of [`mask_apply`]: interleaves unmasked blocks with the blocks for
/// the masked indices back into full token order.
pub fn interleave(unmasked: &Tokens, masked_blocks: &Tokens, mask: &MaskSet) -> Result<Tokens> {
    if unmasked.block_len != masked_blocks.block_len
        || unmasked.len() != mask.unmasked.len()
        || masked_blocks.len() != mask.masked.len()
    {
        return Err(shape_err("block counts do not match the mask"));
    }
    let mut data = vec![0.0f32; mask.token_count * unmasked.block_len];
    let len = unmasked.block_len;
    for (src, &i) in unmasked.blocks().zip(&mask.unmasked) {
        data[i as usize * len..][..len].copy_from_slice(src);
    }
    for (src, &i) in masked_blocks.blocks().zip(&mask.masked) {
        data[i as usize * len..][..len].copy_from_slice(src);
    }
    Ok(Tokens { block_len: len, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn small() -> TokenGeometry {
        TokenGeometry::new(4, 32, 32, 2, 16).unwrap()
    }

    #[test]
    fn rounding() {
        assert_eq!(round_half_up(176.4), 176);
        assert_eq!(round_half_up(2.5), 3);
        assert_eq!(round_half_up(0.8 * 1568.0), 1254);
        assert_eq!(round_half_up(0.95 * 1568.0), 1490);
    }

    #[test]
    fn tube_mask_default_counts() {
        let g = TokenGeometry::default();
        let m = tube_mask(&g, 0.9, &mut seeded(0)).unwrap();
        assert_eq!(m.masked.len(), 1408);
        assert_eq!(m.unmasked.len(), 160);
        assert_eq!(m.count(Provenance::Tube), 1408);
        for &i in &m.masked {
            let pos = i as usize % 196;
            assert!((0..8).all(|tau| m.is_masked((tau * 196 + pos) as u32)));
        }
    }

    #[test]
    fn tube_mask_half_of_2x2() {
        let m = tube_mask(&small(), 0.5, &mut seeded(4)).unwrap();
        assert_eq!(m.masked.len(), 2 * 2);
        assert!(tube_mask(&small(), 1.0, &mut seeded(4)).is_err());
        assert!(tube_mask(&small(), 0.0, &mut seeded(4)).is_err());
    }

    #[test]
    fn object_tokens_from_footprint() {
        let g = TokenGeometry::default();
        let mut fp = Footprint::empty(16, 224, 224);
        assert!(object_token_set(&fp, &g).unwrap().is_empty());
        fp.set(0, 0, 0);
        assert_eq!(object_token_set(&fp, &g).unwrap(), vec![0]);

        let mut fp = Footprint::empty(16, 224, 224);
        for h in 0..224 {
            for w in 0..224 {
                fp.set(5, h, w);
            }
        }
        let tokens = object_token_set(&fp, &g).unwrap();
        assert_eq!(tokens.len(), 196);
        assert!(tokens.iter().all(|&i| g.grid_pos(i as usize).tau == 2));

        assert!(object_token_set(&Footprint::empty(16, 224, 223), &g).is_err());
    }

    #[test]
    fn trajectory_mask_counts() {
        let g = TokenGeometry::default();
        let objects: Vec<u32> = (0..100).map(|i| i * 15).collect();
        let m = trajectory_mask(&g, 0.8, &objects, &mut seeded(1)).unwrap();
        assert_eq!(m.masked.len(), 1254);
        assert_eq!(m.count(Provenance::Trajectory), 80);
        assert!(m.trajectory_indices().iter().all(|i| objects.contains(i)));

        let empty = trajectory_mask(&g, 0.8, &[], &mut seeded(1)).unwrap();
        assert_eq!(empty.masked.len(), 1254);
        assert_eq!(empty.count(Provenance::Trajectory), 0);

        assert!(trajectory_mask(&g, 0.8, &[1568], &mut seeded(1)).is_err());
    }

    #[test]
    fn apply_and_interleave() {
        let g = small();
        let data: Vec<f32> = (0..g.token_count() * g.block_len()).map(|v| (v % 251) as f32 / 251.0).collect();
        let tokens = Tokens::new(g.block_len(), data).unwrap();

        let none = MaskSet::from_parts(g.token_count(), vec![], &[]).unwrap();
        assert_eq!(mask_apply(&tokens, &none).unwrap().0, tokens);

        let first = MaskSet::from_parts(g.token_count(), vec![0], &[]).unwrap();
        let (kept, masked) = mask_apply(&tokens, &first).unwrap();
        assert_eq!(masked, vec![0]);
        assert_eq!(kept.data, tokens.data[g.block_len()..]);

        let m = tube_mask(&g, 0.5, &mut seeded(9)).unwrap();
        let (kept, masked) = mask_apply(&tokens, &m).unwrap();
        let mut hidden = Vec::new();
        for &i in &masked {
            hidden.extend_from_slice(tokens.block(i as usize));
        }
        let hidden = Tokens::new(g.block_len(), hidden).unwrap();
        assert_eq!(interleave(&kept, &hidden, &m).unwrap(), tokens);

        let short = Tokens::new(g.block_len(), tokens.data[..g.block_len()].to_vec()).unwrap();
        assert!(mask_apply(&short, &m).is_err());
    }

    #[test]
    fn from_parts_validates() {
        assert!(MaskSet::from_parts(4, vec![2, 1], &[]).is_err());
        assert!(MaskSet::from_parts(4, vec![1, 4], &[]).is_err());
        assert!(MaskSet::from_parts(4, vec![1], &[2]).is_err());
        let m = MaskSet::from_parts(4, vec![1, 3], &[3]).unwrap();
        assert_eq!(m.provenance, vec![Provenance::Tube, Provenance::Trajectory]);
        assert_eq!(m.unmasked, vec![0, 2]);
    }
}
