use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::bundle::{bundle, BundleParams, BundledSet, Member, MAX_MEMBERS, SECTORS};
use super::vocabulary::{read_u32, Vocabulary, Word};
use super::RetrievalError;
use crate::image_core::{load_luma, Raster};
use crate::sift::{extract, SiftParams};

const INDEX_MAGIC: &[u8; 8] = b"WSRINDEX";
const INDEX_VERSION: u32 = 1;
/// Geometric weight never drops below this, so a word match always counts.
pub const MIN_GEOMETRIC_WEIGHT: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageEntry {
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    pub descriptors: u32,
    pub sets: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedImage {
    pub path: PathBuf,
    pub reason: String,
}

/// One bundled set of one image, filed under its anchor word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Posting {
    pub image: u32,
    pub members: Vec<Member>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalHit {
    pub image: u32,
    pub score: f64,
    /// Query sets that found a partner in this image.
    pub matched_sets: u32,
}

/// Visual word -> postings, plus the image table and the manifest of files
/// that could not be indexed.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    k: usize,
    images: Vec<ImageEntry>,
    skipped: Vec<SkippedImage>,
    postings: Vec<Vec<Posting>>,
}

impl InvertedIndex {
    pub fn new(k: usize) -> Self {
        Self { k, images: Vec::new(), skipped: Vec::new(), postings: vec![Vec::new(); k] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn images(&self) -> &[ImageEntry] {
        &self.images
    }

    pub fn image(&self, id: u32) -> Option<&ImageEntry> {
        self.images.get(id as usize)
    }

    pub fn skipped(&self) -> &[SkippedImage] {
        &self.skipped
    }

    pub fn postings(&self, word: Word) -> &[Posting] {
        self.postings.get(word as usize).map_or(&[], |p| p.as_slice())
    }

    /// Appends an image and files its sets. Ids are assigned in insertion
    /// order so posting lists stay sorted by image id.
    pub fn add_image(&mut self, mut entry: ImageEntry, sets: &[BundledSet]) -> Result<u32, RetrievalError> {
        let id = self.images.len() as u32;
        for set in sets {
            if set.anchor as usize >= self.k || set.members.iter().any(|m| m.word as usize >= self.k) {
                return Err(RetrievalError::Format(format!("word out of range for k = {}", self.k)));
            }
            if set.members.len() > MAX_MEMBERS || set.members.iter().any(|m| m.sector >= SECTORS) {
                return Err(RetrievalError::Format("malformed bundled set".into()));
            }
        }
        for set in sets {
            self.postings[set.anchor as usize].push(Posting { image: id, members: set.members.clone() });
        }
        entry.sets = sets.len() as u32;
        self.images.push(entry);
        Ok(id)
    }

    pub fn record_skipped(&mut self, path: PathBuf, reason: String) {
        self.skipped.push(SkippedImage { path, reason });
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(INDEX_MAGIC)?;
        put_u32(&mut w, INDEX_VERSION)?;
        put_u32(&mut w, self.k as u32)?;
        put_u32(&mut w, self.images.len() as u32)?;
        for im in &self.images {
            put_str(&mut w, &im.path.to_string_lossy())?;
            for v in [im.width, im.height, im.descriptors, im.sets] {
                put_u32(&mut w, v)?;
            }
        }
        put_u32(&mut w, self.skipped.len() as u32)?;
        for s in &self.skipped {
            put_str(&mut w, &s.path.to_string_lossy())?;
            put_str(&mut w, &s.reason)?;
        }
        for list in &self.postings {
            put_u32(&mut w, list.len() as u32)?;
            for p in list {
                put_u32(&mut w, p.image)?;
                w.write_all(&(p.members.len() as u16).to_le_bytes())?;
                for m in &p.members {
                    put_u32(&mut w, m.word)?;
                    w.write_all(&[m.sector])?;
                }
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, RetrievalError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(RetrievalError::Format("not an index file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != INDEX_VERSION {
            return Err(RetrievalError::Format(format!("unsupported index version {version}")));
        }
        let k = read_u32(&mut r)? as usize;
        let n_images = read_u32(&mut r)?;
        let mut images = Vec::new();
        for _ in 0..n_images {
            let path = PathBuf::from(read_str(&mut r)?);
            let mut v = [0u32; 4];
            for x in &mut v {
                *x = read_u32(&mut r)?;
            }
            images.push(ImageEntry { path, width: v[0], height: v[1], descriptors: v[2], sets: v[3] });
        }
        let n_skipped = read_u32(&mut r)?;
        let mut skipped = Vec::new();
        for _ in 0..n_skipped {
            let path = PathBuf::from(read_str(&mut r)?);
            let reason = read_str(&mut r)?;
            skipped.push(SkippedImage { path, reason });
        }
        let mut postings = Vec::with_capacity(k.min(1 << 24));
        for _ in 0..k {
            let n = read_u32(&mut r)?;
            let mut list = Vec::new();
            let mut last = 0;
            for _ in 0..n {
                let image = read_u32(&mut r)?;
                if image >= n_images || image < last {
                    return Err(RetrievalError::Format("posting references unknown or unsorted image".into()));
                }
                last = image;
                let mut b2 = [0u8; 2];
                r.read_exact(&mut b2)?;
                let n_members = u16::from_le_bytes(b2) as usize;
                if n_members > MAX_MEMBERS {
                    return Err(RetrievalError::Format("too many members".into()));
                }
                let mut members = Vec::with_capacity(n_members);
                for _ in 0..n_members {
                    let word = read_u32(&mut r)?;
                    let mut s = [0u8; 1];
                    r.read_exact(&mut s)?;
                    if word as usize >= k || s[0] >= SECTORS {
                        return Err(RetrievalError::Format("bad member record".into()));
                    }
                    members.push(Member { word, sector: s[0] });
                }
                list.push(Posting { image, members });
            }
            postings.push(list);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(RetrievalError::Format("trailing bytes after index".into()));
        }
        Ok(Self { k, images, skipped, postings })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RetrievalError> {
        self.write_to(BufWriter::new(File::create(path)?))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RetrievalError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    put_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String, RetrievalError> {
    let n = read_u32(r)? as usize;
    if n > 1 << 16 {
        return Err(RetrievalError::Format("string too long".into()));
    }
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| RetrievalError::Format("invalid utf-8".into()))
}

/// Descriptors, words and bundled sets of one image.
pub fn describe_image(
    img: &Raster,
    vocab: &Vocabulary,
    sift: &SiftParams,
    bundling: &BundleParams,
) -> Result<(usize, Vec<BundledSet>), RetrievalError> {
    let descs = extract(img, sift)?;
    let words = vocab.quantize_all(&descs);
    Ok((descs.len(), bundle(&descs, &words, bundling)))
}

/// Extracts and bundles every readable image in parallel, then files them
/// in input order. Unreadable or too-small images are logged and listed in
/// the index manifest.
pub fn index_corpus(
    paths: &[PathBuf],
    vocab: &Vocabulary,
    sift: &SiftParams,
    bundling: &BundleParams,
) -> InvertedIndex {
    let described: Vec<Result<(ImageEntry, Vec<BundledSet>), String>> = paths
        .par_iter()
        .map(|p| {
            let img = load_luma(p).map_err(|e| e.to_string())?;
            let (n, sets) = describe_image(&img, vocab, sift, bundling).map_err(|e| e.to_string())?;
            let entry = ImageEntry {
                path: p.clone(),
                width: img.width() as u32,
                height: img.height() as u32,
                descriptors: n as u32,
                sets: 0,
            };
            Ok((entry, sets))
        })
        .collect();
    let mut index = InvertedIndex::new(vocab.k());
    for (path, d) in paths.iter().zip(described) {
        match d {
            Ok((entry, sets)) => {
                index.add_image(entry, &sets).expect("words come from this vocabulary");
            }
            Err(reason) => {
                log::warn!("skipping {}: {reason}", path.display());
                index.record_skipped(path.clone(), reason);
            }
        }
    }
    index
}

fn sorted_members(members: &[Member]) -> Vec<Member> {
    let mut m = members.to_vec();
    m.sort();
    m
}

/// Size of the multiset intersection of two sorted lists under `key`.
fn intersect<T, K: Ord>(a: &[T], b: &[T], key: impl Fn(&T) -> K) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match key(&a[i]).cmp(&key(&b[j])) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Score of two sets that share their anchor word, from their members
/// sorted by `(word, sector)`: `(1 + shared) * weight`, where `shared` counts
/// common member words (as multisets) and `weight` is the fraction of those
/// that also agree on sector, floored at [`MIN_GEOMETRIC_WEIGHT`]. The 1
/// credits the anchor match itself.
pub fn set_score(query: &[Member], candidate: &[Member]) -> f64 {
    // sorting by (word, sector) also sorts by word
    let shared = intersect(query, candidate, |m| m.word);
    let weight = if shared == 0 {
        1.0
    } else {
        let same_sector = intersect(query, candidate, |m| (m.word, m.sector));
        (same_sector as f64 / shared as f64).max(MIN_GEOMETRIC_WEIGHT)
    };
    (1.0 + shared as f64) * weight
}

/// Scores every indexed image against the query's bundled sets. Each query
/// set contributes its best-scoring partner set per image; image scores are
/// the sums. Returns at most `top_n` hits by descending score, ties by
/// ascending id; images with no matched set are omitted.
pub fn query_sets(sets: &[BundledSet], index: &InvertedIndex, top_n: usize) -> Vec<RetrievalHit> {
    let mut score = vec![0.0f64; index.images.len()];
    let mut matched = vec![0u32; index.images.len()];
    let mut best = vec![f64::NEG_INFINITY; index.images.len()];
    for q in sets {
        let qm = sorted_members(&q.members);
        let list = index.postings(q.anchor);
        let mut touched: Vec<u32> = Vec::new();
        for p in list {
            let s = set_score(&qm, &sorted_members(&p.members));
            let b = &mut best[p.image as usize];
            if *b == f64::NEG_INFINITY {
                touched.push(p.image);
            }
            *b = b.max(s);
        }
        for id in touched {
            score[id as usize] += best[id as usize];
            matched[id as usize] += 1;
            best[id as usize] = f64::NEG_INFINITY;
        }
    }
    let mut hits: Vec<RetrievalHit> = (0..index.images.len())
        .filter(|&i| matched[i] > 0)
        .map(|i| RetrievalHit { image: i as u32, score: score[i], matched_sets: matched[i] })
        .collect();
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.image.cmp(&b.image)));
    hits.truncate(top_n);
    hits
}

pub fn query(
    img: &Raster,
    index: &InvertedIndex,
    vocab: &Vocabulary,
    sift: &SiftParams,
    bundling: &BundleParams,
    top_n: usize,
) -> Result<Vec<RetrievalHit>, RetrievalError> {
    if vocab.k() != index.k() {
        return Err(RetrievalError::VocabularyMismatch { index: index.k(), vocabulary: vocab.k() });
    }
    let (_, sets) = describe_image(img, vocab, sift, bundling)?;
    Ok(query_sets(&sets, index, top_n))
}

/// Ids of hits scoring at least `min_score`, in hit order.
pub fn select_correlated(hits: &[RetrievalHit], min_score: f64) -> Vec<u32> {
    hits.iter().filter(|h| h.score >= min_score).map(|h| h.image).collect()
}
