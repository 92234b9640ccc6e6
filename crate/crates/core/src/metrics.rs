//! IoU, confidence-ranked greedy matching and all-points interpolated average
//! precision, evaluated per distance section.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{filter_by_section, Annotation, BBox, SectionMap};
use crate::error::{Error, Result};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledDetection {
    /// Index into the detection slice passed to [`match_detections`].
    pub index: usize,
    pub confidence: f64,
    pub true_positive: bool,
    /// Index of the matched ground truth.
    pub matched: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    /// Detections in processing order (descending confidence, ties in input
    /// order).
    pub detections: Vec<LabeledDetection>,
    pub gt_count: usize,
    pub false_negatives: usize,
}

impl MatchOutcome {
    pub fn true_positives(&self) -> usize {
        self.detections.iter().filter(|d| d.true_positive).count()
    }

    pub fn false_positives(&self) -> usize {
        self.detections.len() - self.true_positives()
    }
}

/// Stable descending sort by confidence.
fn rank_by_confidence(confidences: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    order.sort_by(|&a, &b| confidences[b].total_cmp(&confidences[a]));
    order
}

/// Greedy matching: detections are taken in descending confidence and each
/// claims the still-unmatched ground truth of the same image and category
/// with the highest IoU, provided that IoU reaches `iou_threshold`.
pub fn match_detections(dets: &[Annotation], gts: &[Annotation], iou_threshold: f64) -> Result<MatchOutcome> {
    let mut confidences = Vec::with_capacity(dets.len());
    for (index, d) in dets.iter().enumerate() {
        match d.confidence {
            Some(c) => confidences.push(c),
            None => return Err(Error::MissingConfidence { index, image_id: d.image_id.clone() }),
        }
    }
    let mut by_image: HashMap<(&str, &str), Vec<usize>> = HashMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_image.entry((g.image_id.as_str(), g.category.as_str())).or_default().push(i);
    }
    let mut taken = vec![false; gts.len()];
    let mut labeled = Vec::with_capacity(dets.len());
    for index in rank_by_confidence(&confidences) {
        let d = &dets[index];
        let mut best: Option<(usize, f64)> = None;
        if let Some(candidates) = by_image.get(&(d.image_id.as_str(), d.category.as_str())) {
            for &g in candidates {
                if taken[g] {
                    continue;
                }
                let o = iou(&d.bbox, &gts[g].bbox);
                if best.is_none_or(|(_, b)| o > b) {
                    best = Some((g, o));
                }
            }
        }
        let matched = best.filter(|&(_, o)| o >= iou_threshold).map(|(g, _)| g);
        if let Some(g) = matched {
            taken[g] = true;
        }
        labeled.push(LabeledDetection {
            index,
            confidence: confidences[index],
            true_positive: matched.is_some(),
            matched,
        });
    }
    let tp = labeled.iter().filter(|l| l.true_positive).count();
    Ok(MatchOutcome { detections: labeled, gt_count: gts.len(), false_negatives: gts.len() - tp })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PRPoint {
    pub recall: f64,
    pub precision: f64,
    pub threshold: f64,
}

/// Raw precision/recall after each ranked detection.
pub fn precision_recall_curve(labeled: &[LabeledDetection], total_gt: usize) -> Vec<PRPoint> {
    let confidences: Vec<f64> = labeled.iter().map(|l| l.confidence).collect();
    let (mut tp, mut fp) = (0usize, 0usize);
    rank_by_confidence(&confidences)
        .into_iter()
        .map(|i| {
            if labeled[i].true_positive {
                tp += 1;
            } else {
                fp += 1;
            }
            PRPoint {
                recall: if total_gt == 0 { 0.0 } else { tp as f64 / total_gt as f64 },
                precision: tp as f64 / (tp + fp) as f64,
                threshold: labeled[i].confidence,
            }
        })
        .collect()
}

/// All-points interpolated AP: each precision is replaced by the maximum
/// precision at any equal or higher recall, and the resulting step function
/// is integrated over recall.
///
/// With no ground truth, AP is 1 when there are also no detections and 0
/// otherwise.
pub fn average_precision(labeled: &[LabeledDetection], total_gt: usize) -> f64 {
    if total_gt == 0 {
        return if labeled.is_empty() { 1.0 } else { 0.0 };
    }
    let curve = precision_recall_curve(labeled, total_gt);
    let mut envelope: Vec<f64> = curve.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, env) in curve.iter().zip(envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    ap.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionEval {
    /// 0-based section index; `None` for the pooled row.
    pub section: Option<usize>,
    pub ap: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub gt_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub sections: Vec<SectionEval>,
    pub overall: SectionEval,
}

fn evaluate_subset(
    gts: &[Annotation],
    dets: &[Annotation],
    iou_threshold: f64,
    section: Option<usize>,
) -> Result<SectionEval> {
    let outcome = match_detections(dets, gts, iou_threshold)?;
    Ok(SectionEval {
        section,
        ap: average_precision(&outcome.detections, outcome.gt_count),
        tp: outcome.true_positives(),
        fp: outcome.false_positives(),
        fn_: outcome.false_negatives,
        gt_count: outcome.gt_count,
    })
}

/// Per-section AP where both ground truth and detections are restricted to
/// the section before matching, plus AP pooled over everything.
pub fn evaluate_by_section(
    gts: &[Annotation],
    dets: &[Annotation],
    m: &SectionMap,
    iou_threshold: f64,
) -> Result<EvalResult> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::InvalidParameter(format!(
            "IoU threshold must lie in [0, 1], got {iou_threshold}"
        )));
    }
    let sections = (0..m.section_count)
        .into_par_iter()
        .map(|s| {
            let g = filter_by_section(gts, m, s);
            let d = filter_by_section(dets, m, s);
            evaluate_subset(&g, &d, iou_threshold, Some(s))
        })
        .collect::<Result<Vec<_>>>()?;
    let overall = evaluate_subset(gts, dets, iou_threshold, None)?;
    Ok(EvalResult { sections, overall })
}

impl EvalResult {
    pub const CSV_HEADER: &'static str = "section,ap,tp,fp,fn,gt_count";

    /// Sections are numbered from 1; the pooled row is labeled `all`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for s in self.sections.iter().chain(std::iter::once(&self.overall)) {
            let label = s.section.map_or("all".to_string(), |k| (k + 1).to_string());
            out += &format!("{label},{},{},{},{},{}\n", s.ap, s.tp, s.fp, s.fn_, s.gt_count);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some(Self::CSV_HEADER) {
            return Err(Error::InvalidManifest(format!(
                "evaluation CSV must start with `{}`",
                Self::CSV_HEADER
            )));
        }
        let bad = |line: &str| Error::InvalidManifest(format!("malformed evaluation row `{line}`"));
        let mut sections = Vec::new();
        let mut overall = None;
        for line in lines {
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 6 {
                return Err(bad(line));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|_| bad(line));
            let row = SectionEval {
                section: match f[0] {
                    "all" => None,
                    k => Some(num(k)?.checked_sub(1).ok_or_else(|| bad(line))?),
                },
                ap: f[1].parse().map_err(|_| bad(line))?,
                tp: num(f[2])?,
                fp: num(f[3])?,
                fn_: num(f[4])?,
                gt_count: num(f[5])?,
            };
            match row.section {
                None => overall = Some(row),
                Some(_) => sections.push(row),
            }
        }
        let overall =
            overall.ok_or_else(|| Error::InvalidManifest("evaluation CSV lacks the `all` row".into()))?;
        Ok(EvalResult { sections, overall })
    }

    pub fn section_aps(&self) -> Vec<f64> {
        self.sections.iter().map(|s| s.ap).collect()
    }
}

impl fmt::Display for EvalResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>8} {:>6} {:>6} {:>6} {:>6}", "section", "AP", "TP", "FP", "FN", "GT")?;
        for s in self.sections.iter().chain(std::iter::once(&self.overall)) {
            let label = s.section.map_or("all".to_string(), |k| format!("section {}", k + 1));
            writeln!(f, "{label:<10} {:>8.4} {:>6} {:>6} {:>6} {:>6}", s.ap, s.tp, s.fp, s.fn_, s.gt_count)?;
        }
        Ok(())
    }
}
