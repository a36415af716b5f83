use crate::sift::SiftDescriptor;

use super::vocabulary::Word;

pub const MAX_MEMBERS: usize = 128;
pub const SECTORS: u8 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct BundleParams {
    /// Anchor scale threshold; `None` uses the 75th percentile of the
    /// image's descriptor scales.
    pub scale_thresh: Option<f64>,
    /// Members lie within `radius_mult * anchor.s` of the anchor.
    pub radius_mult: f64,
    pub max_members: usize,
}

impl Default for BundleParams {
    fn default() -> Self {
        Self { scale_thresh: None, radius_mult: 6.0, max_members: MAX_MEMBERS }
    }
}

/// A member visual word and the quadrant it occupies around the anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Member {
    pub word: Word,
    pub sector: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundledSet {
    pub anchor: Word,
    pub members: Vec<Member>,
}

/// Bundle geometry in descriptor indices, before quantisation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub anchor: usize,
    /// `(descriptor index, sector)`, by descending scale.
    pub members: Vec<(usize, u8)>,
}

/// Quadrant of `(dx, dy)` with `y` pointing down: NE = 0, NW = 1, SW = 2,
/// SE = 3. Points on an axis go east / south.
pub fn sector(dx: f64, dy: f64) -> u8 {
    match (dx >= 0.0, dy < 0.0) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    }
}

/// Scale at the given percentile (nearest-rank on the sorted scales).
pub fn scale_percentile(descs: &[SiftDescriptor], pct: f64) -> Option<f64> {
    if descs.is_empty() {
        return None;
    }
    let mut s: Vec<f64> = descs.iter().map(|d| d.s).collect();
    s.sort_by(f64::total_cmp);
    let rank = ((pct / 100.0) * s.len() as f64).ceil().max(1.0) as usize;
    Some(s[rank.min(s.len()) - 1])
}

/// Groups descriptors around large-scale anchors. Descriptors neither
/// anchoring nor belonging to any set become member-less singletons, so the
/// output covers every descriptor.
pub fn bundle_indices(descs: &[SiftDescriptor], params: &BundleParams) -> Vec<Bundle> {
    let Some(thresh) = params.scale_thresh.or_else(|| scale_percentile(descs, 75.0)) else {
        return Vec::new();
    };
    let mut covered = vec![false; descs.len()];
    let mut out = Vec::new();
    for (a, anchor) in descs.iter().enumerate() {
        if anchor.s < thresh {
            continue;
        }
        covered[a] = true;
        let radius = params.radius_mult * anchor.s;
        let mut members: Vec<usize> = descs
            .iter()
            .enumerate()
            .filter(|(i, d)| *i != a && d.s < anchor.s && (d.x - anchor.x).hypot(d.y - anchor.y) <= radius)
            .map(|(i, _)| i)
            .collect();
        members.sort_by(|&i, &j| descs[j].s.total_cmp(&descs[i].s).then(i.cmp(&j)));
        members.truncate(params.max_members);
        for &m in &members {
            covered[m] = true;
        }
        out.push(Bundle {
            anchor: a,
            members: members.into_iter().map(|m| (m, sector(descs[m].x - anchor.x, descs[m].y - anchor.y))).collect(),
        });
    }
    for (i, c) in covered.iter().enumerate() {
        if !c {
            out.push(Bundle { anchor: i, members: Vec::new() });
        }
    }
    out
}

/// [`bundle_indices`] with descriptor indices replaced by their words.
pub fn bundle(descs: &[SiftDescriptor], words: &[Word], params: &BundleParams) -> Vec<BundledSet> {
    assert_eq!(descs.len(), words.len(), "one word per descriptor");
    bundle_indices(descs, params)
        .into_iter()
        .map(|b| BundledSet {
            anchor: words[b.anchor],
            members: b.members.into_iter().map(|(i, sector)| Member { word: words[i], sector }).collect(),
        })
        .collect()
}
