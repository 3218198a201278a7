//! Agreement between a binary segmentation and a ground truth.

use std::fmt;

use crate::error::{Error, Result};
use crate::graph::VertexSet;

/// Per-vertex foreground/background labels with an optional validity flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    foreground: Vec<bool>,
    valid: Option<Vec<bool>>,
}

impl SegmentationMask {
    pub fn new(foreground: Vec<bool>) -> Self {
        SegmentationMask { foreground, valid: None }
    }

    /// Labels where `valid[v] == false` marks an undefined vertex.
    pub fn with_validity(foreground: Vec<bool>, valid: Vec<bool>) -> Result<Self> {
        if valid.len() != foreground.len() {
            return Err(Error::DimensionMismatch {
                expected: foreground.len(),
                found: valid.len(),
            });
        }
        Ok(SegmentationMask {
            foreground,
            valid: Some(valid),
        })
    }

    pub fn from_set(set: &VertexSet) -> Self {
        SegmentationMask::new(set.as_mask().to_vec())
    }

    /// Inside of a level-set function: `c <= 0`.
    pub fn from_level_set(c: &[f64]) -> Self {
        SegmentationMask::new(c.iter().map(|&v| v <= 0.0).collect())
    }

    pub fn len(&self) -> usize {
        self.foreground.len()
    }

    pub fn is_empty(&self) -> bool {
        self.foreground.is_empty()
    }

    pub fn labels(&self) -> &[bool] {
        &self.foreground
    }

    pub fn validity(&self) -> Option<&[bool]> {
        self.valid.as_deref()
    }

    pub fn is_foreground(&self, v: usize) -> bool {
        self.foreground[v]
    }

    pub fn is_valid(&self, v: usize) -> bool {
        self.valid.as_ref().is_none_or(|m| m[v])
    }

    pub fn set(&mut self, v: usize, foreground: bool) {
        self.foreground[v] = foreground;
    }

    pub fn foreground_count(&self) -> usize {
        self.foreground.iter().filter(|&&f| f).count()
    }

    pub fn to_vertex_set(&self) -> VertexSet {
        VertexSet::from_mask(self.foreground.clone())
    }

    /// Fraction of vertices on which both masks carry the same label.
    pub fn agreement(&self, other: &SegmentationMask) -> f64 {
        if self.is_empty() {
            return 1.0;
        }
        let same = self.foreground.iter().zip(&other.foreground).filter(|(a, b)| a == b).count();
        same as f64 / self.len() as f64
    }
}

/// 2x2 table of label co-occurrences, indexed `[seg][gt]` with 1 = foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Contingency {
    pub counts: [[u64; 2]; 2],
}

impl Contingency {
    /// Counts over vertices valid in both masks and inside `eval` (all when `None`).
    pub fn new(seg: &SegmentationMask, gt: &SegmentationMask, eval: Option<&VertexSet>) -> Result<Self> {
        if seg.len() != gt.len() {
            return Err(Error::DimensionMismatch {
                expected: gt.len(),
                found: seg.len(),
            });
        }
        if let Some(e) = eval {
            if e.universe() != gt.len() {
                return Err(Error::DimensionMismatch {
                    expected: gt.len(),
                    found: e.universe(),
                });
            }
        }
        let mut counts = [[0u64; 2]; 2];
        for v in 0..gt.len() {
            if seg.is_valid(v) && gt.is_valid(v) && eval.is_none_or(|e| e.contains(v)) {
                counts[seg.is_foreground(v) as usize][gt.is_foreground(v) as usize] += 1;
            }
        }
        let c = Contingency { counts };
        if c.total() == 0 {
            return Err(Error::UndefinedMetric("evaluation region is empty"));
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn row_sums(&self) -> [u64; 2] {
        [self.counts[0][0] + self.counts[0][1], self.counts[1][0] + self.counts[1][1]]
    }

    fn col_sums(&self) -> [u64; 2] {
        [self.counts[0][0] + self.counts[1][0], self.counts[0][1] + self.counts[1][1]]
    }

    /// Hubert-Arabie adjusted Rand index.
    pub fn adjusted_rand(&self) -> f64 {
        let pairs = |n: u64| n as f64 * (n as f64 - 1.0) / 2.0;
        let index: f64 = self.counts.iter().flatten().map(|&n| pairs(n)).sum();
        let a: f64 = self.row_sums().iter().map(|&n| pairs(n)).sum();
        let b: f64 = self.col_sums().iter().map(|&n| pairs(n)).sum();
        let total = pairs(self.total());
        let expected = if total > 0.0 { a * b / total } else { 0.0 };
        let max = 0.5 * (a + b);
        if max == expected {
            // Both partitions trivial: agreement is perfect exactly when they coincide.
            return if index == max { 1.0 } else { 0.0 };
        }
        (index - expected) / (max - expected)
    }

    /// Variation of information in nats.
    pub fn variation_of_information(&self) -> f64 {
        let n = self.total() as f64;
        let h = |counts: &[u64]| -> f64 {
            counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / n;
                    -p * p.ln()
                })
                .sum()
        };
        let joint = h(&[self.counts[0][0], self.counts[0][1], self.counts[1][0], self.counts[1][1]]);
        let hs = h(&self.row_sums());
        let hg = h(&self.col_sums());
        // VI = 2 H(S,G) - H(S) - H(G)
        (2.0 * joint - hs - hg).max(0.0)
    }

    pub fn error_rate(&self) -> f64 {
        (self.counts[0][1] + self.counts[1][0]) as f64 / self.total() as f64
    }

    pub fn iou(&self) -> Iou {
        let inter = self.counts[1][1];
        let union = self.counts[1][1] + self.counts[0][1] + self.counts[1][0];
        if union == 0 {
            Iou {
                value: 1.0,
                both_empty: true,
            }
        } else {
            Iou {
                value: inter as f64 / union as f64,
                both_empty: false,
            }
        }
    }
}

/// Intersection over union; `both_empty` flags the convention value 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Iou {
    pub value: f64,
    pub both_empty: bool,
}

pub fn adjusted_rand(seg: &SegmentationMask, gt: &SegmentationMask, eval: Option<&VertexSet>) -> Result<f64> {
    Ok(Contingency::new(seg, gt, eval)?.adjusted_rand())
}

pub fn iou(seg: &SegmentationMask, gt: &SegmentationMask, eval: Option<&VertexSet>) -> Result<Iou> {
    Ok(Contingency::new(seg, gt, eval)?.iou())
}

pub fn voi(seg: &SegmentationMask, gt: &SegmentationMask, eval: Option<&VertexSet>) -> Result<f64> {
    Ok(Contingency::new(seg, gt, eval)?.variation_of_information())
}

pub fn error_rate(seg: &SegmentationMask, gt: &SegmentationMask, eval: Option<&VertexSet>) -> Result<f64> {
    Ok(Contingency::new(seg, gt, eval)?.error_rate())
}

/// All four scores over one evaluation region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub ari: f64,
    pub iou: Iou,
    pub voi: f64,
    pub error_rate: f64,
    pub evaluated: u64,
}

impl MetricsReport {
    pub fn compute(seg: &SegmentationMask, gt: &SegmentationMask, eval: Option<&VertexSet>) -> Result<Self> {
        let c = Contingency::new(seg, gt, eval)?;
        Ok(MetricsReport {
            ari: c.adjusted_rand(),
            iou: c.iou(),
            voi: c.variation_of_information(),
            error_rate: c.error_rate(),
            evaluated: c.total(),
        })
    }

    /// Mean of several reports; `evaluated` is summed.
    pub fn mean(reports: &[MetricsReport]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let k = reports.len() as f64;
        let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
        Some(MetricsReport {
            ari: avg(|r| r.ari),
            iou: Iou {
                value: avg(|r| r.iou.value),
                both_empty: reports.iter().all(|r| r.iou.both_empty),
            },
            voi: avg(|r| r.voi),
            error_rate: avg(|r| r.error_rate),
            evaluated: reports.iter().map(|r| r.evaluated).sum(),
        })
    }

    /// Machine-readable `key=value` lines.
    pub fn key_values(&self) -> String {
        format!(
            "ari={}\niou={}\niou_both_empty={}\nvoi={}\nerror_rate={}\nevaluated={}\n",
            self.ari, self.iou.value, self.iou.both_empty, self.voi, self.error_rate, self.evaluated
        )
    }
}

/// `RI <ari> IoU <iou> VoI <voi> Err <percent>`.
impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "RI {:.4} IoU {:.4} VoI {:.4} Err {:.3}",
            self.ari,
            self.iou.value,
            self.voi,
            100.0 * self.error_rate
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mask(bits: &[u8]) -> SegmentationMask {
        SegmentationMask::new(bits.iter().map(|&b| b == 1).collect())
    }

    /// Rand index adjusted by brute-force pair enumeration.
    fn brute_ari(seg: &[bool], gt: &[bool]) -> f64 {
        let n = seg.len();
        let (mut same_both, mut same_s, mut same_g, mut pairs) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let s = seg[i] == seg[j];
                let g = gt[i] == gt[j];
                same_both += (s && g) as u8 as f64;
                same_s += s as u8 as f64;
                same_g += g as u8 as f64;
                pairs += 1.0;
            }
        }
        let expected = same_s * same_g / pairs;
        (same_both - expected) / (0.5 * (same_s + same_g) - expected)
    }

    #[test]
    fn identical_masks_are_perfect() {
        let m = mask(&[1, 0, 0, 1, 1, 0, 1]);
        let r = MetricsReport::compute(&m, &m, None).unwrap();
        assert_eq!((r.ari, r.iou.value, r.voi, r.error_rate), (1.0, 1.0, 0.0, 0.0));
        assert!(!r.iou.both_empty);
    }

    #[test]
    fn six_pixel_contingency() {
        // seg/gt pairs: (1,1) x2, (1,0) x1, (0,1) x1, (0,0) x2
        let seg = mask(&[1, 1, 1, 0, 0, 0]);
        let gt = mask(&[1, 1, 0, 1, 0, 0]);
        let c = Contingency::new(&seg, &gt, None).unwrap();
        assert_eq!(c.counts, [[2, 1], [1, 2]]);
        // index 2, row/col pair sums 6 each, 15 pairs: (2 - 36/15) / (6 - 36/15) = -1/9
        let closed = (2.0 - 36.0 / 15.0) / (6.0 - 36.0 / 15.0);
        assert!((c.adjusted_rand() - closed).abs() < 1e-12);
        assert!((closed + 1.0 / 9.0).abs() < 1e-15);
        assert!((c.adjusted_rand() - brute_ari(seg.labels(), gt.labels())).abs() < 1e-12);
    }

    #[test]
    fn iou_examples() {
        let seg = mask(&[1, 1, 0, 0]);
        let gt = mask(&[0, 1, 1, 0]);
        assert!((iou(&seg, &gt, None).unwrap().value - 1.0 / 3.0).abs() < 1e-15);
        let a = mask(&[1, 1, 0, 0]);
        let b = mask(&[0, 0, 1, 1]);
        assert_eq!(iou(&a, &b, None).unwrap().value, 0.0);
        let empty = mask(&[0, 0, 0]);
        let v = iou(&empty, &empty, None).unwrap();
        assert_eq!(v.value, 1.0);
        assert!(v.both_empty);
    }

    #[test]
    fn error_examples() {
        let seg = mask(&[1, 1, 1, 0, 0, 0, 1, 0, 1, 0]);
        let mut gt_bits = seg.labels().to_vec();
        for v in [0, 4, 7] {
            gt_bits[v] = !gt_bits[v];
        }
        let gt = SegmentationMask::new(gt_bits);
        assert!((error_rate(&seg, &gt, None).unwrap() - 0.3).abs() < 1e-15);
        let comp = SegmentationMask::new(seg.labels().iter().map(|b| !b).collect());
        assert_eq!(error_rate(&seg, &comp, None).unwrap(), 1.0);
    }

    #[test]
    fn voi_single_class() {
        let a = mask(&[1, 1, 1, 1]);
        assert_eq!(voi(&a, &a, None).unwrap(), 0.0);
        // one class against a balanced split: VI = H(G) = ln 2
        let b = mask(&[1, 1, 0, 0]);
        assert!((voi(&a, &b, None).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn empty_region_is_undefined() {
        let a = mask(&[1, 0]);
        let eval = VertexSet::empty(2);
        assert!(matches!(adjusted_rand(&a, &a, Some(&eval)), Err(Error::UndefinedMetric(_))));
        assert!(matches!(voi(&a, &a, Some(&eval)), Err(Error::UndefinedMetric(_))));
        assert!(matches!(error_rate(&a, &a, Some(&eval)), Err(Error::UndefinedMetric(_))));
        let invalid = SegmentationMask::with_validity(vec![true, false], vec![false, false]).unwrap();
        assert!(iou(&a, &invalid, None).is_err());
    }

    #[test]
    fn random_labels_have_zero_expected_ari() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let gt = SegmentationMask::new((0..n).map(|i| i % 2 == 0).collect());
        let trials = 1000;
        let mut sum = 0.0;
        let mut vi_sum = 0.0;
        for _ in 0..trials {
            let seg = SegmentationMask::new((0..n).map(|_| rng.random::<bool>()).collect());
            let c = Contingency::new(&seg, &gt, None).unwrap();
            sum += c.adjusted_rand();
            vi_sum += c.variation_of_information();
        }
        assert!((sum / trials as f64).abs() < 0.02);
        assert!((vi_sum / trials as f64 - 2.0 * std::f64::consts::LN_2).abs() < 0.05);
    }

    #[test]
    fn report_format() {
        let m = mask(&[1, 0, 1, 0]);
        let r = MetricsReport::compute(&m, &m, None).unwrap();
        assert_eq!(r.to_string(), "RI 1.0000 IoU 1.0000 VoI 0.0000 Err 0.000");
        assert!(r.key_values().contains("error_rate=0\n"));
    }

    fn labels(n: usize) -> impl Strategy<Value = (Vec<bool>, Vec<bool>, Vec<bool>)> {
        (
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(any::<bool>(), n),
        )
    }

    proptest! {
        #[test]
        fn swap_invariance((s, g, _) in labels(24)) {
            let a = SegmentationMask::new(s.clone());
            let b = SegmentationMask::new(g.clone());
            let sa = SegmentationMask::new(s.iter().map(|x| !x).collect());
            let sb = SegmentationMask::new(g.iter().map(|x| !x).collect());
            let c1 = Contingency::new(&a, &b, None).unwrap();
            let c2 = Contingency::new(&sa, &sb, None).unwrap();
            prop_assert!((c1.adjusted_rand() - c2.adjusted_rand()).abs() < 1e-12);
            prop_assert!((c1.variation_of_information() - c2.variation_of_information()).abs() < 1e-12);
            prop_assert_eq!(c1.error_rate(), c2.error_rate());
        }

        #[test]
        fn voi_symmetric_and_zero_iff_same_partition((s, g, _) in labels(20)) {
            let a = SegmentationMask::new(s.clone());
            let b = SegmentationMask::new(g.clone());
            let ab = voi(&a, &b, None).unwrap();
            let ba = voi(&b, &a, None).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            let same_partition = s == g || s.iter().zip(&g).all(|(x, y)| x != y);
            prop_assert_eq!(ab < 1e-12, same_partition);
        }

        #[test]
        fn outside_eval_region_is_ignored((s, g, e) in labels(30), flips in prop::collection::vec(any::<bool>(), 30)) {
            prop_assume!(e.iter().any(|&x| x));
            let eval = VertexSet::from_mask(e.clone());
            let a = SegmentationMask::new(s.clone());
            let b = SegmentationMask::new(g);
            let mutated: Vec<bool> = s.iter().zip(&e).zip(&flips).map(|((&x, &inside), &f)| if inside { x } else { x ^ f }).collect();
            let m = SegmentationMask::new(mutated);
            prop_assert_eq!(MetricsReport::compute(&a, &b, Some(&eval)).unwrap(), MetricsReport::compute(&m, &b, Some(&eval)).unwrap());
        }

        #[test]
        fn ari_matches_pair_counting((s, g, _) in labels(12)) {
            let a = SegmentationMask::new(s.clone());
            let b = SegmentationMask::new(g.clone());
            let c = Contingency::new(&a, &b, None).unwrap();
            let pairs = |n: u64| n * n.saturating_sub(1) / 2;
            let rs = [c.counts[0][0] + c.counts[0][1], c.counts[1][0] + c.counts[1][1]];
            let cs = [c.counts[0][0] + c.counts[1][0], c.counts[0][1] + c.counts[1][1]];
            let degenerate = pairs(rs[0]) + pairs(rs[1]) == 66 || pairs(cs[0]) + pairs(cs[1]) == 66;
            prop_assume!(!degenerate);
            prop_assert!((c.adjusted_rand() - brute_ari(&s, &g)).abs() < 1e-12);
        }
    }
}
