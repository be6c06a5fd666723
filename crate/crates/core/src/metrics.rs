//! Evaluation metrics: FID, R-precision, MM-Dist, Diversity and MModality
//! over pluggable embeddings, plus the status-histogram similarities TS, HOS
//! and LFS.

use crate::enhance::{parse_statuses, status_timeline, BodyPart, StatusWord, TranslatorConfig};
use crate::error::{invalid, Error, Result};
use crate::motion::GlobalJoints;
use crate::skeleton::SkeletonMap;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Eigenvalues of the FID product more negative than this (relative to the
/// largest magnitude, or absolute below 1) mean the covariances are broken.
pub const PSD_TOLERANCE: f64 = 1e-8;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_set(v: &[Vec<f64>], min: usize, what: &str) -> Result<usize> {
    if v.len() < min {
        return Err(invalid(format!("{what} needs at least {min} embeddings, got {}", v.len())));
    }
    let d = v[0].len();
    if v.iter().any(|e| e.len() != d) {
        return Err(Error::Dimension(format!("{what} embeddings have mixed widths")));
    }
    Ok(d)
}

fn moments(v: &[Vec<f64>], d: usize) -> (DVector<f64>, DMatrix<f64>) {
    let n = v.len() as f64;
    let mut mu = DVector::zeros(d);
    for e in v {
        mu += DVector::from_column_slice(e);
    }
    mu /= n;
    let mut cov = DMatrix::zeros(d, d);
    for e in v {
        let c = DVector::from_column_slice(e) - &mu;
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov /= n - 1.0;
    (mu, cov)
}

fn sqrt_psd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&v| v < -PSD_TOLERANCE * scale) {
        return Err(Error::NotPsd(bad));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let trace = roots.sum();
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    Ok((root, trace))
}

/// Fréchet distance between Gaussians fitted to the two sets, with
/// `Tr((Σ₁Σ₂)^{1/2})` computed as `Tr((Σ₁^{1/2} Σ₂ Σ₁^{1/2})^{1/2})`.
pub fn fid(real: &[Vec<f64>], gen: &[Vec<f64>]) -> Result<f64> {
    let d = check_set(real, 2, "fid")?;
    if check_set(gen, 2, "fid")? != d {
        return Err(Error::Dimension("fid sets have different widths".into()));
    }
    let (m1, s1) = moments(real, d);
    let (m2, s2) = moments(gen, d);
    let (r1, _) = sqrt_psd(&s1)?;
    let (_, cross) = sqrt_psd(&(&r1 * &s2 * &r1))?;
    let v = (m1 - m2).norm_squared() + s1.trace() + s2.trace() - 2.0 * cross;
    Ok(v.max(0.0))
}

/// Top-1/2/3 retrieval accuracy of each motion's own text among itself and
/// `batch − 1` seeded distractor texts, by Euclidean distance. A distractor
/// tied with the true text counts as ranked ahead of it.
pub fn r_precision(motion: &[Vec<f64>], text: &[Vec<f64>], batch: usize, seed: u64) -> Result<[f64; 3]> {
    if motion.len() != text.len() {
        return Err(Error::Dimension("motion and text lists differ in length".into()));
    }
    if batch < 2 {
        return Err(invalid("R-precision batch must be at least 2"));
    }
    check_set(motion, batch, "r_precision")?;
    check_set(text, batch, "r_precision")?;
    let n = motion.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = [0usize; 3];
    for i in 0..n {
        let gt = euclidean(&motion[i], &text[i]);
        let ahead = sample(&mut rng, n - 1, batch - 1)
            .into_iter()
            .map(|j| if j >= i { j + 1 } else { j })
            .filter(|&j| euclidean(&motion[i], &text[j]) <= gt)
            .count();
        for (k, h) in hits.iter_mut().enumerate() {
            if ahead <= k {
                *h += 1;
            }
        }
    }
    Ok(hits.map(|h| h as f64 / n as f64))
}

pub fn mm_dist(motion: &[Vec<f64>], text: &[Vec<f64>]) -> Result<f64> {
    if motion.len() != text.len() || motion.is_empty() {
        return Err(Error::Dimension("mm_dist needs equally long, non-empty lists".into()));
    }
    Ok(motion.iter().zip(text).map(|(a, b)| euclidean(a, b)).sum::<f64>() / motion.len() as f64)
}

fn pair_mean<R: Rng>(v: &[Vec<f64>], pairs: usize, rng: &mut R) -> f64 {
    let total: f64 = (0..pairs)
        .map(|_| {
            let ij = sample(rng, v.len(), 2);
            euclidean(&v[ij.index(0)], &v[ij.index(1)])
        })
        .sum();
    total / pairs as f64
}

/// Mean distance over `pairs` seeded random pairs of distinct items.
pub fn diversity(emb: &[Vec<f64>], pairs: usize, seed: u64) -> Result<f64> {
    check_set(emb, 2, "diversity")?;
    if pairs == 0 {
        return Err(invalid("diversity needs at least one pair"));
    }
    Ok(pair_mean(emb, pairs, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Per caption, mean distance over `pairs` random pairs of its generations;
/// averaged over captions.
pub fn mmodality(sets: &[Vec<Vec<f64>>], pairs: usize, seed: u64) -> Result<f64> {
    if sets.is_empty() || pairs == 0 {
        return Err(invalid("mmodality needs captions and pairs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for s in sets {
        check_set(s, 2, "mmodality")?;
        total += pair_mean(s, pairs, &mut rng);
    }
    Ok(total / sets.len() as f64)
}

/// Normalized frequencies of one part's statuses over its vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusHistogram {
    pub part: BodyPart,
    pub freq: Vec<f64>,
}

impl StatusHistogram {
    pub fn from_statuses(part: BodyPart, words: &[StatusWord]) -> Result<Self> {
        let vocab = part.vocabulary();
        let mut freq = vec![0.0; vocab.len()];
        for w in words {
            let k = vocab.iter().position(|v| v == w).ok_or_else(|| invalid(format!("'{w}' is not a {} status", part.name())))?;
            freq[k] += 1.0;
        }
        if words.is_empty() {
            return Err(invalid("histogram of no statuses"));
        }
        freq.iter_mut().for_each(|f| *f /= words.len() as f64);
        Ok(Self { part, freq })
    }

    pub fn one_hot(part: BodyPart, word: StatusWord) -> Result<Self> {
        Self::from_statuses(part, &[word])
    }

    pub fn of_motion(joints: &GlobalJoints, part: BodyPart, skel: &SkeletonMap, cfg: &TranslatorConfig) -> Result<Self> {
        Self::from_statuses(part, status_timeline(joints, skel, cfg)?.part(part))
    }

    pub fn cosine(&self, other: &Self) -> Result<f64> {
        if self.part != other.part {
            return Err(invalid("histograms of different parts"));
        }
        let dot: f64 = self.freq.iter().zip(&other.freq).map(|(a, b)| a * b).sum();
        let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok((dot / (n(&self.freq) * n(&other.freq))).clamp(0.0, 1.0))
    }
}

/// Cosine similarity of the two motions' status histograms for `part`.
pub fn status_similarity(
    real: &GlobalJoints,
    gen: &GlobalJoints,
    part: BodyPart,
    skel: &SkeletonMap,
    cfg: &TranslatorConfig,
) -> Result<f64> {
    StatusHistogram::of_motion(real, part, skel, cfg)?.cosine(&StatusHistogram::of_motion(gen, part, skel, cfg)?)
}

/// TS, HOS and LFS: per-pair similarities averaged over `(real, generated)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StatusScores {
    pub ts: f64,
    pub hos: f64,
    pub lfs: f64,
}

pub const SCORED_PARTS: [BodyPart; 3] = [BodyPart::BodyDirection, BodyPart::Head, BodyPart::LeftHand];

pub fn status_scores(pairs: &[(&GlobalJoints, &GlobalJoints)], skel: &SkeletonMap, cfg: &TranslatorConfig) -> Result<StatusScores> {
    if pairs.is_empty() {
        return Err(invalid("no motion pairs to score"));
    }
    let mut s = [0.0; 3];
    for (real, gen) in pairs {
        let (a, b) = (status_timeline(real, skel, cfg)?, status_timeline(gen, skel, cfg)?);
        for (k, part) in SCORED_PARTS.iter().enumerate() {
            let ha = StatusHistogram::from_statuses(*part, a.part(*part))?;
            s[k] += ha.cosine(&StatusHistogram::from_statuses(*part, b.part(*part))?)?;
        }
    }
    let n = pairs.len() as f64;
    Ok(StatusScores { ts: s[0] / n, hos: s[1] / n, lfs: s[2] / n })
}

/// Maps motions and captions into one space: the concatenated status
/// histograms of the four parts (31 dims). Captions contribute the statuses
/// named in their clauses; parts a caption does not mention stay zero.
#[derive(Debug, Clone, Default)]
pub struct StatusEmbedder {
    pub skeleton: SkeletonMap,
    pub translator: TranslatorConfig,
}

impl StatusEmbedder {
    pub fn dim() -> usize {
        BodyPart::ALL.iter().map(|p| p.vocabulary().len()).sum()
    }

    pub fn embed_motion(&self, joints: &GlobalJoints) -> Result<Vec<f64>> {
        let tl = status_timeline(joints, &self.skeleton, &self.translator)?;
        let mut out = Vec::with_capacity(Self::dim());
        for part in BodyPart::ALL {
            out.extend(StatusHistogram::from_statuses(part, tl.part(part))?.freq);
        }
        Ok(out)
    }

    pub fn embed_text(&self, text: &str) -> Vec<f64> {
        let parsed = parse_statuses(text);
        let mut out = Vec::with_capacity(Self::dim());
        for part in BodyPart::ALL {
            match parsed.get(&part).and_then(|w| StatusHistogram::from_statuses(part, w).ok()) {
                Some(h) => out.extend(h.freq),
                None => out.extend(std::iter::repeat_n(0.0, part.vocabulary().len())),
            }
        }
        out
    }
}

/// A count attached to each reported value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured<T> {
    pub value: T,
    pub samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub fid: Option<Measured<f64>>,
    pub r_precision: Option<Measured<[f64; 3]>>,
    pub mm_dist: Option<Measured<f64>>,
    pub diversity: Option<Measured<f64>>,
    pub mmodality: Option<Measured<f64>>,
    pub ts: Option<Measured<f64>>,
    pub hos: Option<Measured<f64>>,
    pub lfs: Option<Measured<f64>>,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "fid,top1,top2,top3,mm_dist,diversity,mmodality,ts,hos,lfs";

    pub fn csv_row(&self) -> String {
        let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        let r = self.r_precision.map(|m| m.value);
        [
            f(self.fid.map(|m| m.value)),
            f(r.map(|v| v[0])),
            f(r.map(|v| v[1])),
            f(r.map(|v| v[2])),
            f(self.mm_dist.map(|m| m.value)),
            f(self.diversity.map(|m| m.value)),
            f(self.mmodality.map(|m| m.value)),
            f(self.ts.map(|m| m.value)),
            f(self.hos.map(|m| m.value)),
            f(self.lfs.map(|m| m.value)),
        ]
        .join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn gauss(n: usize, d: usize, shift: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| r.sample::<f64, _>(StandardNormal) + shift).collect()).collect()
    }

    #[test]
    fn fid_identity_symmetry_and_errors() {
        let a = gauss(200, 4, 0.0, 1);
        let b = gauss(150, 4, 0.3, 2);
        assert!(fid(&a, &a).unwrap() < 1e-6);
        assert!((fid(&a, &b).unwrap() - fid(&b, &a).unwrap()).abs() < 1e-8);
        let mut rev = b.clone();
        rev.reverse();
        assert!((fid(&a, &b).unwrap() - fid(&a, &rev).unwrap()).abs() < 1e-8);
        assert!(fid(&a[..1], &b).is_err());
        assert!(fid(&a, &gauss(10, 3, 0.0, 3)).is_err());
    }

    #[test]
    fn r_precision_oracle_and_order() {
        let t = gauss(64, 5, 0.0, 4);
        assert_eq!(r_precision(&t, &t, 32, 1).unwrap(), [1.0; 3]);
        let m = gauss(64, 5, 0.0, 5);
        let r = r_precision(&m, &t, 32, 1).unwrap();
        assert!(r[0] <= r[1] && r[1] <= r[2]);
        assert!(r_precision(&t[..20], &t[..20], 32, 1).is_err());
    }

    #[test]
    fn distances() {
        let a = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let b = vec![vec![1.0, 0.0], vec![0.0, 3.0]];
        assert_eq!(mm_dist(&a, &a).unwrap(), 0.0);
        assert_eq!(mm_dist(&a, &b).unwrap(), 2.0);
        assert_eq!(diversity(&a, 300, 1).unwrap(), 0.0);
        assert_eq!(diversity(&[vec![0.0, 0.0], vec![3.0, 4.0]], 300, 1).unwrap(), 5.0);
        assert_eq!(mmodality(&[vec![vec![0.0, 0.0], vec![1.0, 0.0]]], 10, 2).unwrap(), 1.0);
        assert_eq!(mmodality(&[vec![vec![2.0]; 30]], 10, 2).unwrap(), 0.0);
    }

    #[test]
    fn histogram_cosines() {
        use StatusWord::*;
        let e = StatusHistogram::one_hot(BodyPart::BodyDirection, East).unwrap();
        let w = StatusHistogram::one_hot(BodyPart::BodyDirection, West).unwrap();
        assert_eq!(e.cosine(&e).unwrap(), 1.0);
        assert_eq!(e.cosine(&w).unwrap(), 0.0);
        let mix = StatusHistogram::from_statuses(BodyPart::BodyDirection, &[East, North, East]).unwrap();
        assert!((mix.freq.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let c = mix.cosine(&e).unwrap();
        assert!(c > 0.0 && c < 1.0);
        assert!(StatusHistogram::one_hot(BodyPart::Head, East).is_err());
        assert_eq!(StatusHistogram::one_hot(BodyPart::Head, Forward).unwrap().freq.len(), 9);
    }

    #[test]
    fn text_embedding_reads_clauses() {
        let e = StatusEmbedder::default();
        let v = e.embed_text("a person walks. the person faces east. the left hand raises up.");
        assert_eq!(v.len(), StatusEmbedder::dim());
        assert_eq!(v[0], 1.0);
        assert_eq!(v[4 + 9 + 8], 1.0);
        assert!(e.embed_text("a person walks").iter().all(|x| *x == 0.0));
    }

    #[test]
    fn report_csv_has_every_column() {
        let r = MetricReport { fid: Some(Measured { value: 1.5, samples: 3 }), ..Default::default() };
        assert_eq!(r.csv_row().split(',').count(), MetricReport::CSV_HEADER.split(',').count());
        assert!(r.csv_row().starts_with("1.500000,"));
    }
}
