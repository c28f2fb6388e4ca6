//! Instance-level scoring with IoU-matched precision and recall.
//!
//! A predicted and a ground-truth instance of the same class match when
//! their IoU is at least the threshold `t`. Matching is one-to-one and
//! greedy: candidate pairs are taken by descending IoU (ties by lower
//! predicted id, then lower ground-truth id) whenever both sides are still
//! free. Noise points belong to no predicted instance.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::pointcloud::ClassLabel;
use crate::segmentation::{InstanceLabeling, ObjectFragmentation};

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.25, 0.5, 0.75];

/// `|A ∩ B| / |A ∪ B|` for two sets of point indices. Duplicate indices
/// are ignored.
pub fn iou(pred: &[usize], gt: &[usize]) -> Result<f64> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::invalid("IoU of an empty set"));
    }
    let mut a = pred.to_vec();
    let mut b = gt.to_vec();
    a.sort_unstable();
    a.dedup();
    b.sort_unstable();
    b.dedup();
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(inter as f64 / (a.len() + b.len() - inter) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchedPair {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    pub threshold: f64,
    /// Accepted pairs in acceptance order.
    pub pairs: Vec<MatchedPair>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
}

/// All same-class (pred, gt) pairs with non-zero overlap, with their IoU.
fn overlapping_pairs(pred: &InstanceLabeling, gt: &InstanceLabeling) -> Vec<MatchedPair> {
    let mut inter: HashMap<(u32, u32), usize> = HashMap::new();
    for (p, g) in pred.assignment().iter().zip(gt.assignment()) {
        if let (Some(p), Some(g)) = (p, g) {
            *inter.entry((*p, *g)).or_default() += 1;
        }
    }
    let mut pairs: Vec<MatchedPair> = inter
        .into_iter()
        .filter(|((p, g), _)| {
            pred.instance_classes()[*p as usize] == gt.instance_classes()[*g as usize]
        })
        .map(|((p, g), n)| {
            let (p, g) = (p as usize, g as usize);
            let union = pred.instances()[p].len() + gt.instances()[g].len() - n;
            MatchedPair {
                pred: p,
                gt: g,
                iou: n as f64 / union as f64,
            }
        })
        .collect();
    pairs.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then(a.pred.cmp(&b.pred))
            .then(a.gt.cmp(&b.gt))
    });
    pairs
}

pub fn match_instances(
    pred: &InstanceLabeling,
    gt: &InstanceLabeling,
    threshold: f64,
) -> Result<MatchResult> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!(
            "prediction covers {} points, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    check_threshold(threshold)?;
    Ok(greedy(&overlapping_pairs(pred, gt), pred, gt, threshold))
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("IoU threshold must be in (0, 1], got {t}")))
    }
}

fn greedy(
    sorted_pairs: &[MatchedPair],
    pred: &InstanceLabeling,
    gt: &InstanceLabeling,
    threshold: f64,
) -> MatchResult {
    let mut pred_used = vec![false; pred.num_instances()];
    let mut gt_used = vec![false; gt.num_instances()];
    let mut pairs = Vec::new();
    for pair in sorted_pairs.iter().take_while(|p| p.iou >= threshold) {
        if !pred_used[pair.pred] && !gt_used[pair.gt] {
            pred_used[pair.pred] = true;
            gt_used[pair.gt] = true;
            pairs.push(pair.clone());
        }
    }
    let free = |used: Vec<bool>| -> Vec<usize> {
        used.iter()
            .enumerate()
            .filter(|(_, &u)| !u)
            .map(|(i, _)| i)
            .collect()
    };
    MatchResult {
        threshold,
        pairs,
        unmatched_pred: free(pred_used),
        unmatched_gt: free(gt_used),
    }
}

/// Counts and rates for one class at one threshold. Rates are `None` when
/// their denominator is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClassScore {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl ClassScore {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        Self {
            tp,
            fp,
            fn_,
            precision: rate(tp, tp + fp),
            recall: rate(tp, tp + fn_),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdReport {
    pub threshold: f64,
    pub per_class: BTreeMap<ClassLabel, ClassScore>,
    /// Unweighted mean precision over object classes with a defined value.
    pub m_prec: Option<f64>,
    pub m_rec: Option<f64>,
    /// TP/FP/FN summed over the object classes.
    pub totals: ClassScore,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub thresholds: Vec<ThresholdReport>,
}

impl EvalReport {
    pub fn at(&self, threshold: f64) -> Option<&ThresholdReport> {
        self.thresholds.iter().find(|r| r.threshold == threshold)
    }
}

/// Mean of the defined values, `None` if there are none.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-class and mean precision/recall at each threshold. Means run over
/// the seven object classes and skip the clutter class.
pub fn score(
    pred: &InstanceLabeling,
    gt: &InstanceLabeling,
    thresholds: &[f64],
) -> Result<EvalReport> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!(
            "prediction covers {} points, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    for &t in thresholds {
        check_threshold(t)?;
    }
    let pairs = overlapping_pairs(pred, gt);
    let mut reports = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let m = greedy(&pairs, pred, gt, t);
        let mut counts: BTreeMap<ClassLabel, (usize, usize, usize)> =
            ClassLabel::ALL.iter().map(|&c| (c, (0, 0, 0))).collect();
        for p in &m.pairs {
            counts.get_mut(&gt.instance_classes()[p.gt]).unwrap().0 += 1;
        }
        for &p in &m.unmatched_pred {
            counts.get_mut(&pred.instance_classes()[p]).unwrap().1 += 1;
        }
        for &g in &m.unmatched_gt {
            counts.get_mut(&gt.instance_classes()[g]).unwrap().2 += 1;
        }
        let per_class: BTreeMap<ClassLabel, ClassScore> = counts
            .into_iter()
            .map(|(c, (tp, fp, fn_))| (c, ClassScore::from_counts(tp, fp, fn_)))
            .collect();
        let cloi = ClassLabel::CLOI.iter().map(|c| per_class[c]);
        let m_prec = mean_defined(cloi.clone().map(|s| s.precision));
        let m_rec = mean_defined(cloi.clone().map(|s| s.recall));
        let (tp, fp, fn_) = cloi.fold((0, 0, 0), |(a, b, c), s| (a + s.tp, b + s.fp, c + s.fn_));
        reports.push(ThresholdReport {
            threshold: t,
            per_class,
            m_prec,
            m_rec,
            totals: ClassScore::from_counts(tp, fp, fn_),
        });
    }
    Ok(EvalReport {
        thresholds: reports,
    })
}

/// Fraction of objects whose largest single-object component has IoU
/// strictly greater than `threshold` against the object itself. An object
/// split exactly in half therefore does not count at `t = 0.5`.
pub fn rec_ins(objects: &[ObjectFragmentation], threshold: f64) -> Result<f64> {
    if objects.is_empty() {
        return Err(Error::invalid("no ground-truth instances"));
    }
    check_threshold(threshold)?;
    let hits = objects
        .iter()
        .filter(|o| o.largest_fraction() > threshold)
        .count();
    Ok(hits as f64 / objects.len() as f64)
}

/// Writes the report as CSV: one row per class plus a `mean` row; columns
/// `prec@t`, `rec@t` for every threshold, then `tp@t`, `fp@t`, `fn@t`.
/// Undefined rates are empty fields. The mean row's counts are sums over
/// the object classes.
pub fn write_report_csv(report: &EvalReport, out: &mut impl std::io::Write) -> std::io::Result<()> {
    let mut header = vec!["class".to_string()];
    for r in &report.thresholds {
        header.push(format!("prec@{}", r.threshold));
        header.push(format!("rec@{}", r.threshold));
    }
    for r in &report.thresholds {
        header.push(format!("tp@{}", r.threshold));
        header.push(format!("fp@{}", r.threshold));
        header.push(format!("fn@{}", r.threshold));
    }
    writeln!(out, "{}", header.join(","))?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    type Row = (String, Vec<(Option<f64>, Option<f64>)>, Vec<ClassScore>);
    let mut rows: Vec<Row> = ClassLabel::ALL
        .iter()
        .map(|c| {
            let scores: Vec<ClassScore> = report.thresholds.iter().map(|r| r.per_class[c]).collect();
            (
                c.name().to_string(),
                scores.iter().map(|s| (s.precision, s.recall)).collect(),
                scores,
            )
        })
        .collect();
    rows.push((
        "mean".to_string(),
        report.thresholds.iter().map(|r| (r.m_prec, r.m_rec)).collect(),
        report.thresholds.iter().map(|r| r.totals).collect(),
    ));
    for (name, rates, counts) in rows {
        let mut fields = vec![name];
        for (p, r) in rates {
            fields.push(opt(p));
            fields.push(opt(r));
        }
        for c in counts {
            fields.push(c.tp.to_string());
            fields.push(c.fp.to_string());
            fields.push(c.fn_.to_string());
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeling(ids: &[Option<u32>], class: ClassLabel) -> InstanceLabeling {
        InstanceLabeling::from_assignment(ids, &vec![class; ids.len()]).unwrap()
    }

    #[test]
    fn iou_cases() {
        assert_eq!(iou(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(iou(&[1, 2, 3], &[2, 3, 4]).unwrap(), 0.5);
        assert_eq!(iou(&[1, 2], &[3, 4]).unwrap(), 0.0);
        assert_eq!(iou(&[3, 1, 2], &[4, 2, 3]).unwrap(), iou(&[2, 3, 4], &[1, 2, 3]).unwrap());
        assert!(iou(&[], &[1]).is_err());
    }

    #[test]
    fn split_prediction_does_not_match() {
        // gts: points 0..100 and 100..200; one pred covers 50 of each, rest noise
        let gt_ids: Vec<Option<u32>> = (0..200).map(|i| Some(i / 100)).collect();
        let pred_ids: Vec<Option<u32>> =
            (0..200u32).map(|i| ((50..150).contains(&i)).then_some(0)).collect();
        let gt = labeling(&gt_ids, ClassLabel::Cylinder);
        let pred = labeling(&pred_ids, ClassLabel::Cylinder);
        let m = match_instances(&pred, &gt, 0.5).unwrap();
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_pred, vec![0]);
        assert_eq!(m.unmatched_gt, vec![0, 1]);
    }

    #[test]
    fn partial_cover_matches() {
        let gt_ids: Vec<Option<u32>> = vec![Some(0); 100];
        let pred_ids: Vec<Option<u32>> = (0..100).map(|i| (i < 60).then_some(0)).collect();
        let m = match_instances(
            &labeling(&pred_ids, ClassLabel::Elbow),
            &labeling(&gt_ids, ClassLabel::Elbow),
            0.5,
        )
        .unwrap();
        assert_eq!(m.pairs, vec![MatchedPair { pred: 0, gt: 0, iou: 0.6 }]);
    }

    #[test]
    fn class_mismatch_never_matches() {
        let ids = vec![Some(0); 10];
        let pred = labeling(&ids, ClassLabel::Angle);
        let gt = labeling(&ids, ClassLabel::Channel);
        assert!(match_instances(&pred, &gt, 0.25).unwrap().pairs.is_empty());
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let ids: Vec<Option<u32>> = (0..60).map(|i| Some(i / 20)).collect();
        let classes: Vec<ClassLabel> = (0..60)
            .map(|i| [ClassLabel::Valve, ClassLabel::Flange, ClassLabel::Other][i / 20])
            .collect();
        let gt = InstanceLabeling::from_assignment(&ids, &classes).unwrap();
        let report = score(&gt, &gt, &DEFAULT_THRESHOLDS).unwrap();
        for r in &report.thresholds {
            assert_eq!(r.m_prec, Some(1.0));
            assert_eq!(r.m_rec, Some(1.0));
        }

        let none = InstanceLabeling::from_assignment(&[None; 60], &classes).unwrap();
        let report = score(&none, &gt, &[0.5]).unwrap();
        let r = &report.thresholds[0];
        assert_eq!(r.per_class[&ClassLabel::Valve].recall, Some(0.0));
        assert_eq!(r.per_class[&ClassLabel::Valve].precision, None);
        assert_eq!(r.m_rec, Some(0.0));
        assert_eq!(r.m_prec, None);
    }

    #[test]
    fn mismatched_sizes_and_thresholds() {
        let a = labeling(&[Some(0)], ClassLabel::Valve);
        let b = labeling(&[Some(0), Some(0)], ClassLabel::Valve);
        assert!(match_instances(&a, &b, 0.5).is_err());
        assert!(match_instances(&a, &a, 0.0).is_err());
        assert!(match_instances(&a, &a, 1.5).is_err());
    }

    #[test]
    fn greedy_prefers_higher_iou() {
        // gt0 = 0..10, gt1 = 10..20; pred0 = 0..12 (iou 10/12 with gt0), pred1 = 2..10 (iou 0.8)
        let gt_ids: Vec<Option<u32>> = (0..20).map(|i| Some(i / 10)).collect();
        let mut pred_ids: Vec<Option<u32>> = vec![None; 20];
        let pred_classes = vec![ClassLabel::Cylinder; 20];
        for (i, id) in pred_ids.iter_mut().enumerate() {
            *id = if i < 12 { Some(0) } else { None };
        }
        let pred0 = InstanceLabeling::from_assignment(&pred_ids, &pred_classes).unwrap();
        let gt = labeling(&gt_ids, ClassLabel::Cylinder);
        let m = match_instances(&pred0, &gt, 0.5).unwrap();
        assert_eq!(m.pairs.len(), 1);
        assert_eq!((m.pairs[0].pred, m.pairs[0].gt), (0, 0));
    }

    #[test]
    fn rec_ins_cases() {
        let whole = ObjectFragmentation { points: 100, components: 1, largest: 100 };
        let halves = ObjectFragmentation { points: 100, components: 2, largest: 50 };
        let thirds = ObjectFragmentation { points: 99, components: 3, largest: 33 };
        assert_eq!(rec_ins(&[whole, whole], 0.5).unwrap(), 1.0);
        assert_eq!(rec_ins(&[whole, halves], 0.5).unwrap(), 0.5);
        assert_eq!(rec_ins(&[whole, halves], 0.25).unwrap(), 1.0);
        assert_eq!(rec_ins(&[whole, thirds], 0.5).unwrap(), 0.5);
        assert_eq!(rec_ins(&[thirds, thirds], 0.5).unwrap(), 0.0);
        assert!(rec_ins(&[], 0.5).is_err());
    }

    #[test]
    fn csv_layout() {
        let ids: Vec<Option<u32>> = vec![Some(0); 5];
        let gt = labeling(&ids, ClassLabel::Valve);
        let report = score(&gt, &gt, &[0.5]).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "class,prec@0.5,rec@0.5,tp@0.5,fp@0.5,fn@0.5");
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[8], "valve,1,1,1,0,0");
        assert_eq!(lines[9], "mean,1,1,1,0,0");
        assert_eq!(lines[1], "other,,,0,0,0");
    }
}
