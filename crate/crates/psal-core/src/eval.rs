//! Detection labeling, average precision, AUC, and error diagnosis.
//!
//! Detections are the top-scoring proposal per action per test video. A
//! detection is positive at threshold `tau` when its tube IoU against a
//! still-unmatched ground-truth instance of the same action in the same
//! video reaches `tau`; matching is greedy in score order and each instance
//! absorbs at most one detection. Ranking ties always break by video id so
//! every metric is deterministic.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{tube_iou, Tube};

/// One ranked detection.
#[derive(Debug, Clone)]
pub struct Detection {
    pub video_id: String,
    pub action: usize,
    pub score: f64,
    pub tube: Tube,
}

/// Ground-truth tubes per (video, action), plus the set of known videos.
/// Multiple instances per video and action are allowed.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    videos: BTreeMap<String, BTreeMap<usize, Vec<Tube>>>,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    /// Make a video known to the evaluator, with or without instances.
    pub fn register_video(&mut self, video_id: &str) {
        self.videos.entry(video_id.to_string()).or_default();
    }

    pub fn insert(&mut self, video_id: &str, action: usize, tube: Tube) {
        self.videos
            .entry(video_id.to_string())
            .or_default()
            .entry(action)
            .or_default()
            .push(tube);
    }

    pub fn knows_video(&self, video_id: &str) -> bool {
        self.videos.contains_key(video_id)
    }

    pub fn instances(&self, video_id: &str, action: usize) -> &[Tube] {
        self.videos
            .get(video_id)
            .and_then(|m| m.get(&action))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Does the video contain the action at all?
    pub fn video_is_positive(&self, video_id: &str, action: usize) -> bool {
        !self.instances(video_id, action).is_empty()
    }

    /// Total instance count for one action over all videos.
    pub fn instance_count(&self, action: usize) -> usize {
        self.videos
            .values()
            .map(|m| m.get(&action).map_or(0, Vec::len))
            .sum()
    }

    /// Actions with at least one instance, ascending.
    pub fn actions(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for m in self.videos.values() {
            for (&a, tubes) in m {
                if !tubes.is_empty() && !out.contains(&a) {
                    out.push(a);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Highest IoU of a tube against the action's instances in a video.
    pub fn max_iou(&self, video_id: &str, action: usize, tube: &Tube) -> f64 {
        self.instances(video_id, action)
            .iter()
            .map(|g| tube_iou(tube, g))
            .fold(0.0, f64::max)
    }

    /// Highest IoU against instances of any action other than `action`.
    pub fn max_other_action_iou(&self, video_id: &str, action: usize, tube: &Tube) -> f64 {
        self.videos
            .get(video_id)
            .map(|m| {
                m.iter()
                    .filter(|(&a, _)| a != action)
                    .flat_map(|(_, tubes)| tubes.iter())
                    .map(|g| tube_iou(tube, g))
                    .fold(0.0, f64::max)
            })
            .unwrap_or(0.0)
    }
}

/// Detection indices ordered by descending score, ties by ascending video id.
fn ranked_order(detections: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        detections[b]
            .score
            .partial_cmp(&detections[a].score)
            .unwrap()
            .then_with(|| detections[a].video_id.cmp(&detections[b].video_id))
    });
    order
}

/// Label detections of one action as positive/negative at threshold `tau`.
///
/// Greedy in rank order: a detection is positive when its best IoU over the
/// action's still-unmatched instances in its video reaches `tau`, and that
/// instance is then consumed. Output follows rank order.
pub fn label_detections(
    detections: &[Detection],
    gt: &GroundTruth,
    tau: f64,
) -> Result<Vec<(f64, bool)>> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidConfig(format!("tau must be in (0, 1], got {tau}")));
    }
    for det in detections {
        if !gt.knows_video(&det.video_id) {
            return Err(Error::UnknownVideo(det.video_id.clone()));
        }
    }

    let mut matched: BTreeMap<(String, usize), Vec<bool>> = BTreeMap::new();
    let mut labeled = Vec::with_capacity(detections.len());
    for &i in &ranked_order(detections) {
        let det = &detections[i];
        let instances = gt.instances(&det.video_id, det.action);
        let used = matched
            .entry((det.video_id.clone(), det.action))
            .or_insert_with(|| vec![false; instances.len()]);

        let mut best_iou = 0.0;
        let mut best_idx = None;
        for (k, inst) in instances.iter().enumerate() {
            if used[k] {
                continue;
            }
            let iou = tube_iou(&det.tube, inst);
            if iou > best_iou {
                best_iou = iou;
                best_idx = Some(k);
            }
        }
        let positive = best_iou >= tau && best_idx.is_some();
        if positive {
            used[best_idx.unwrap()] = true;
        }
        labeled.push((det.score, positive));
    }
    Ok(labeled)
}

/// Continuous (non-interpolated) average precision: the mean of
/// precision-at-rank over positive ranks, normalized by the ground-truth
/// instance count. Input order breaks score ties (the sort is stable).
pub fn average_precision(labeled: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    order.sort_by(|&a, &b| labeled[b].0.partial_cmp(&labeled[a].0).unwrap());
    let mut tp = 0usize;
    let mut ap = 0.0;
    for (rank0, &i) in order.iter().enumerate() {
        if labeled[i].1 {
            tp += 1;
            ap += tp as f64 / (rank0 + 1) as f64;
        }
    }
    ap / n_gt as f64
}

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs where the
/// positive outranks the negative, ties counting one half. `None` when
/// either class is empty.
pub fn roc_auc(labeled: &[(f64, bool)]) -> Option<f64> {
    let positives: Vec<f64> = labeled.iter().filter(|l| l.1).map(|l| l.0).collect();
    let negatives: Vec<f64> = labeled.iter().filter(|l| !l.1).map(|l| l.0).collect();
    if positives.is_empty() || negatives.is_empty() {
        return None;
    }
    let mut favorable = 0.0;
    for &p in &positives {
        for &n in &negatives {
            if p > n {
                favorable += 1.0;
            } else if p == n {
                favorable += 0.5;
            }
        }
    }
    Some(favorable / (positives.len() * negatives.len()) as f64)
}

/// Per-action AP at one threshold, for actions with ground truth.
pub fn per_action_ap(
    detections: &[Detection],
    gt: &GroundTruth,
    tau: f64,
) -> Result<Vec<(usize, f64, usize)>> {
    let mut out = Vec::new();
    for action in gt.actions() {
        let of_action: Vec<Detection> = detections
            .iter()
            .filter(|d| d.action == action)
            .cloned()
            .collect();
        let labeled = label_detections(&of_action, gt, tau)?;
        let n_gt = gt.instance_count(action);
        out.push((action, average_precision(&labeled, n_gt), n_gt));
    }
    Ok(out)
}

/// Mean AP over actions at each threshold of the grid.
pub fn map_over_thresholds(
    detections: &[Detection],
    gt: &GroundTruth,
    taus: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        let per_action = per_action_ap(detections, gt, tau)?;
        if per_action.is_empty() {
            return Err(Error::EmptyInput("ground truth"));
        }
        let map = per_action.iter().map(|(_, ap, _)| ap).sum::<f64>() / per_action.len() as f64;
        out.push((tau, map));
    }
    Ok(out)
}

/// Mean per-action AUC at one threshold; `None` when no action has both a
/// positive and a negative detection.
pub fn mean_auc(detections: &[Detection], gt: &GroundTruth, tau: f64) -> Result<Option<f64>> {
    let mut aucs = Vec::new();
    for action in gt.actions() {
        let of_action: Vec<Detection> = detections
            .iter()
            .filter(|d| d.action == action)
            .cloned()
            .collect();
        let labeled = label_detections(&of_action, gt, tau)?;
        if let Some(auc) = roc_auc(&labeled) {
            aucs.push(auc);
        }
    }
    if aucs.is_empty() {
        Ok(None)
    } else {
        Ok(Some(aucs.iter().sum::<f64>() / aucs.len() as f64))
    }
}

/// The five detection categories of the error diagnosis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorType {
    Correct,
    Localization,
    Confusion,
    BackgroundOwn,
    BackgroundOther,
}

impl ErrorType {
    pub const ALL: [ErrorType; 5] = [
        ErrorType::Correct,
        ErrorType::Localization,
        ErrorType::Confusion,
        ErrorType::BackgroundOwn,
        ErrorType::BackgroundOther,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ErrorType::Correct => "correct",
            ErrorType::Localization => "localization",
            ErrorType::Confusion => "confusion",
            ErrorType::BackgroundOwn => "background_own",
            ErrorType::BackgroundOther => "background_other",
        }
    }
}

/// Counts per error category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DiagnosisCounts {
    pub correct: usize,
    pub localization: usize,
    pub confusion: usize,
    pub background_own: usize,
    pub background_other: usize,
}

impl DiagnosisCounts {
    pub fn total(&self) -> usize {
        self.correct + self.localization + self.confusion + self.background_own + self.background_other
    }

    fn bump(&mut self, ty: ErrorType) {
        match ty {
            ErrorType::Correct => self.correct += 1,
            ErrorType::Localization => self.localization += 1,
            ErrorType::Confusion => self.confusion += 1,
            ErrorType::BackgroundOwn => self.background_own += 1,
            ErrorType::BackgroundOther => self.background_other += 1,
        }
    }

    pub fn get(&self, ty: ErrorType) -> usize {
        match ty {
            ErrorType::Correct => self.correct,
            ErrorType::Localization => self.localization,
            ErrorType::Confusion => self.confusion,
            ErrorType::BackgroundOwn => self.background_own,
            ErrorType::BackgroundOther => self.background_other,
        }
    }
}

/// Category of one detection at threshold `tau`. The inner 0.1 threshold
/// separates localization errors and action confusion from background hits;
/// an overlap of exactly 0.1 counts as localization or confusion.
pub fn categorize(detection: &Detection, gt: &GroundTruth, tau: f64) -> ErrorType {
    if gt.video_is_positive(&detection.video_id, detection.action) {
        let iou = gt.max_iou(&detection.video_id, detection.action, &detection.tube);
        if iou >= tau {
            ErrorType::Correct
        } else if iou >= 0.1 {
            ErrorType::Localization
        } else {
            ErrorType::BackgroundOwn
        }
    } else {
        let other = gt.max_other_action_iou(&detection.video_id, detection.action, &detection.tube);
        if other >= 0.1 {
            ErrorType::Confusion
        } else {
            ErrorType::BackgroundOther
        }
    }
}

/// Per-action diagnosis over the top-R detections, R being the action's
/// ground-truth instance count. Requires `tau > 0.1`.
pub fn diagnose_per_action(
    detections: &[Detection],
    gt: &GroundTruth,
    tau: f64,
) -> Result<Vec<(usize, DiagnosisCounts)>> {
    if tau <= 0.1 {
        return Err(Error::InvalidConfig(format!(
            "diagnosis threshold must exceed 0.1, got {tau}"
        )));
    }
    for det in detections {
        if !gt.knows_video(&det.video_id) {
            return Err(Error::UnknownVideo(det.video_id.clone()));
        }
    }
    let mut out = Vec::new();
    for action in gt.actions() {
        let of_action: Vec<&Detection> = detections.iter().filter(|d| d.action == action).collect();
        let r = gt.instance_count(action);
        let mut order: Vec<usize> = (0..of_action.len()).collect();
        order.sort_by(|&a, &b| {
            of_action[b]
                .score
                .partial_cmp(&of_action[a].score)
                .unwrap()
                .then_with(|| of_action[a].video_id.cmp(&of_action[b].video_id))
        });
        let mut counts = DiagnosisCounts::default();
        for &i in order.iter().take(r) {
            counts.bump(categorize(of_action[i], gt, tau));
        }
        out.push((action, counts));
    }
    Ok(out)
}

/// Aggregate diagnosis over all actions.
pub fn diagnose(detections: &[Detection], gt: &GroundTruth, tau: f64) -> Result<DiagnosisCounts> {
    let mut total = DiagnosisCounts::default();
    for (_, counts) in diagnose_per_action(detections, gt, tau)? {
        total.correct += counts.correct;
        total.localization += counts.localization;
        total.confusion += counts.confusion;
        total.background_own += counts.background_own;
        total.background_other += counts.background_other;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Box2D;
    use crate::oracles;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bx(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Box2D {
        Box2D::new(xmin, ymin, xmax, ymax).unwrap()
    }

    fn tube(b: Box2D) -> Tube {
        Tube::new(1, vec![b; 4]).unwrap()
    }

    fn unit_gt() -> (GroundTruth, Tube) {
        let g = tube(bx(10.0, 10.0, 30.0, 30.0));
        let mut gt = GroundTruth::new();
        gt.insert("v0", 0, g.clone());
        (gt, g)
    }

    fn det(video: &str, action: usize, score: f64, t: Tube) -> Detection {
        Detection {
            video_id: video.into(),
            action,
            score,
            tube: t,
        }
    }

    #[test]
    fn perfect_detection_is_positive() {
        let (gt, g) = unit_gt();
        let labeled = label_detections(&[det("v0", 0, 0.9, g)], &gt, 0.5).unwrap();
        assert_eq!(labeled, vec![(0.9, true)]);
    }

    #[test]
    fn detection_without_gt_is_negative() {
        let (mut gt, g) = unit_gt();
        gt.register_video("v1");
        let labeled = label_detections(&[det("v1", 0, 0.9, g)], &gt, 0.5).unwrap();
        assert_eq!(labeled, vec![(0.9, false)]);
    }

    #[test]
    fn unknown_video_errors() {
        let (gt, g) = unit_gt();
        assert!(matches!(
            label_detections(&[det("ghost", 0, 0.9, g)], &gt, 0.5),
            Err(Error::UnknownVideo(_))
        ));
    }

    #[test]
    fn greedy_matching_consumes_instance_once() {
        let (gt, g) = unit_gt();
        // both overlap the single instance above tau; the higher-scored one wins
        let near = tube(bx(11.0, 11.0, 31.0, 31.0));
        let detections = vec![det("v0", 0, 0.4, near), det("v0", 0, 0.8, g)];
        let labeled = label_detections(&detections, &gt, 0.5).unwrap();
        // rank order: score 0.8 first
        assert_eq!(labeled[0], (0.8, true));
        assert_eq!(labeled[1], (0.4, false));
    }

    #[test]
    fn threshold_subset_property() {
        let (gt, g) = unit_gt();
        let mut gt2 = gt.clone();
        gt2.register_video("v1");
        let near = tube(bx(14.0, 10.0, 34.0, 30.0));
        let detections = vec![det("v0", 0, 0.9, near), det("v1", 0, 0.5, g)];
        let low = label_detections(&detections, &gt2, 0.2).unwrap();
        let high = label_detections(&detections, &gt2, 0.6).unwrap();
        for (l, h) in low.iter().zip(&high) {
            assert!(!h.1 || l.1, "positive at high tau must be positive at low tau");
        }
    }

    #[test]
    fn ap_trivial_cases() {
        assert_eq!(average_precision(&[(0.9, true), (0.8, true)], 2), 1.0);
        assert_eq!(average_precision(&[(0.9, false), (0.8, false)], 2), 0.0);
    }

    #[test]
    fn ap_staircase_hand_value() {
        let labeled = vec![(0.9, true), (0.8, false), (0.7, true)];
        let ap = average_precision(&labeled, 2);
        assert_relative_eq!(ap, (1.0 + 2.0 / 3.0) / 2.0, epsilon = 1e-12);
        assert!((ap - 0.8333).abs() < 1e-4);
    }

    #[test]
    fn ap_single_positive_ranked_first() {
        let labeled = vec![(0.9, true), (0.5, false), (0.4, false), (0.1, false)];
        assert_relative_eq!(average_precision(&labeled, 3), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn auc_trivial_and_hand_values() {
        let separated = vec![(0.9, true), (0.8, true), (0.2, false)];
        assert_eq!(roc_auc(&separated), Some(1.0));

        let all_tied = vec![(0.5, true), (0.5, false), (0.5, true)];
        assert_eq!(roc_auc(&all_tied), Some(0.5));

        // positives {0.9, 0.4} vs negative {0.6}: one win, one loss
        let mixed = vec![(0.9, true), (0.4, true), (0.6, false)];
        assert_eq!(roc_auc(&mixed), Some(0.5));

        assert_eq!(roc_auc(&[(0.9, true)]), None);
    }

    #[test]
    fn metrics_invariant_under_monotone_score_transform() {
        let labeled = vec![
            (0.9, true),
            (0.7, false),
            (0.5, true),
            (0.3, false),
            (0.1, true),
        ];
        let transformed: Vec<(f64, bool)> =
            labeled.iter().map(|&(s, p)| (2.0 * s + 1.0, p)).collect();
        assert_eq!(
            average_precision(&labeled, 3),
            average_precision(&transformed, 3)
        );
        assert_eq!(roc_auc(&labeled), roc_auc(&transformed));
    }

    #[test]
    fn map_single_action_equals_ap() {
        let (gt, g) = unit_gt();
        let detections = vec![det("v0", 0, 0.9, g)];
        let maps = map_over_thresholds(&detections, &gt, &[0.2, 0.5]).unwrap();
        let aps = per_action_ap(&detections, &gt, 0.2).unwrap();
        assert_eq!(maps[0].1, aps[0].1);
        assert_eq!(maps[0].1, 1.0);
    }

    #[test]
    fn map_perfect_detector_is_one_everywhere() {
        let mut gt = GroundTruth::new();
        let g0 = tube(bx(10.0, 10.0, 30.0, 30.0));
        let g1 = tube(bx(40.0, 40.0, 80.0, 80.0));
        gt.insert("v0", 0, g0.clone());
        gt.insert("v1", 1, g1.clone());
        let detections = vec![
            det("v0", 0, 0.9, g0.clone()),
            det("v1", 0, 0.1, g1.clone()),
            det("v0", 1, 0.2, g0),
            det("v1", 1, 0.8, g1),
        ];
        let taus: Vec<f64> = (1..=6).map(|i| i as f64 / 10.0).collect();
        for (_, map) in map_over_thresholds(&detections, &gt, &taus).unwrap() {
            assert_eq!(map, 1.0);
        }
    }

    #[test]
    fn diagnosis_categories() {
        let (gt, g) = unit_gt();
        let mut gt = gt;
        gt.register_video("v1");
        gt.insert("v1", 1, g.clone());

        // positive video, iou 0.25 at tau 0.2: correct. One matching frame
        // of the four-frame ground truth.
        let quarter = Tube::new(1, vec![bx(10.0, 10.0, 30.0, 30.0)]).unwrap();
        assert_eq!(tube_iou(&quarter, &g), 0.25);
        let d = det("v0", 0, 0.9, quarter);
        assert_eq!(categorize(&d, &gt, 0.2), ErrorType::Correct);

        // positive video, iou between 0.1 and tau: localization error
        let shifted = tube(bx(20.0, 10.0, 40.0, 30.0));
        let iou = gt.max_iou("v0", 0, &shifted);
        assert!(iou > 0.1 && iou < 0.5, "iou {iou}");
        assert_eq!(
            categorize(&det("v0", 0, 0.9, shifted), &gt, 0.5),
            ErrorType::Localization
        );

        // positive video, iou below 0.1: background from own action
        let far = tube(bx(60.0, 60.0, 80.0, 80.0));
        assert_eq!(
            categorize(&det("v0", 0, 0.9, far.clone()), &gt, 0.5),
            ErrorType::BackgroundOwn
        );

        // negative video for action 0, overlapping action 1's instance: confusion
        assert_eq!(
            categorize(&det("v1", 0, 0.9, g), &gt, 0.5),
            ErrorType::Confusion
        );

        // negative video, no overlap: background from other action
        assert_eq!(
            categorize(&det("v1", 0, 0.9, far), &gt, 0.5),
            ErrorType::BackgroundOther
        );
    }

    #[test]
    fn diagnosis_counts_sum_to_instance_count() {
        let mut gt = GroundTruth::new();
        let g = tube(bx(10.0, 10.0, 30.0, 30.0));
        gt.insert("v0", 0, g.clone());
        gt.insert("v1", 0, g.clone());
        gt.insert("v2", 0, g.clone());
        gt.register_video("v3");
        let detections = vec![
            det("v0", 0, 0.9, g.clone()),
            det("v1", 0, 0.8, tube(bx(60.0, 60.0, 80.0, 80.0))),
            det("v2", 0, 0.7, tube(bx(14.0, 10.0, 34.0, 30.0))),
            det("v3", 0, 0.6, g.clone()),
        ];
        for tau in [0.2, 0.3, 0.5] {
            let per_action = diagnose_per_action(&detections, &gt, tau).unwrap();
            for (action, counts) in per_action {
                assert_eq!(counts.total(), gt.instance_count(action));
            }
        }
    }

    #[test]
    fn diagnosis_rejects_low_tau() {
        let (gt, g) = unit_gt();
        assert!(diagnose(&[det("v0", 0, 0.9, g)], &gt, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn ap_matches_brute_force(
            labels in proptest::collection::vec(any::<bool>(), 1..20),
            seed in 0u64..1000,
        ) {
            let mut rng = crate::rng::DetRng::new(seed);
            let labeled: Vec<(f64, bool)> =
                labels.iter().map(|&p| (rng.uniform(), p)).collect();
            let n_gt = labels.iter().filter(|&&p| p).count().max(1);
            let got = average_precision(&labeled, n_gt);
            let want = oracles::brute_force_average_precision(&labeled, n_gt);
            prop_assert!((got - want).abs() < 1e-12);
        }

        #[test]
        fn auc_matches_rank_sum_oracle(
            labels in proptest::collection::vec(any::<bool>(), 2..20),
            seed in 0u64..1000,
        ) {
            let mut rng = crate::rng::DetRng::new(seed);
            // quantized scores so ties actually occur
            let labeled: Vec<(f64, bool)> = labels
                .iter()
                .map(|&p| ((rng.uniform() * 4.0).floor() / 4.0, p))
                .collect();
            let got = roc_auc(&labeled);
            let want = oracles::rank_sum_auc(&labeled);
            match (got, want) {
                (None, None) => {}
                (Some(g), Some(w)) => prop_assert!((g - w).abs() < 1e-12),
                _ => prop_assert!(false, "oracle disagrees on definedness"),
            }
        }
    }
}
