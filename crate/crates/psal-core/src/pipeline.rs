//! End-to-end orchestration: per-action training under each supervision
//! regime, top-1 inference with optional pseudo-point rescoring, and metric
//! evaluation. The CLI and the experiment sweeps both drive this module.

use std::collections::BTreeMap;

use crate::data::{Dataset, Split, VideoData};
use crate::error::{Error, Result};
use crate::eval::{
    diagnose_per_action, mean_auc, per_action_ap, DiagnosisCounts, Detection, GroundTruth,
};
use crate::geometry::MatchMode;
use crate::mining::{
    best_proposal_train, box_supervised_train, mil_train, LinearModel, MiningConfig, TrainVideo,
};
use crate::pseudo::{
    pp_center, pp_independent_motion, pp_person, pp_self_supervision, spatial_adjusted_scores,
    temporal_adjusted_scores, temporal_stats, weight_pseudo, PseudoKind, PseudoTrack, PseudoWeight,
};
use crate::rng::{mix_seed, stream};

/// Default IoU threshold grid of the metric tables.
pub const DEFAULT_TAU_GRID: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];

/// Supervision regime used for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prior {
    /// Point annotations guide the mining (the full method).
    Point,
    /// Mining from video labels alone.
    VideoLabel,
    /// Ground-truth boxes, thresholded positives and negatives.
    Box,
    /// Ground truth reduced to the single best proposal per video.
    BestProposal,
}

impl Prior {
    pub fn name(&self) -> &'static str {
        match self {
            Prior::Point => "point",
            Prior::VideoLabel => "video-label",
            Prior::Box => "box",
            Prior::BestProposal => "best-proposal",
        }
    }

    pub fn parse(name: &str) -> Option<Prior> {
        [
            Prior::Point,
            Prior::VideoLabel,
            Prior::Box,
            Prior::BestProposal,
        ]
        .into_iter()
        .find(|p| p.name() == name)
    }
}

/// One trained per-action model plus its mining trace.
#[derive(Debug, Clone)]
pub struct ActionModel {
    pub action: usize,
    pub model: LinearModel,
    /// Final mined proposal index per positive training video (mining
    /// regimes only).
    pub mined: Option<Vec<usize>>,
    /// Mined indices after each round, round 0 being prior-only selection.
    pub round_mined: Option<Vec<Vec<usize>>>,
}

fn train_view(video: &VideoData) -> TrainVideo<'_> {
    TrainVideo {
        proposals: &video.proposals,
        features: &video.features,
        points: &video.points,
        meta: &video.meta,
    }
}

/// Train the model for one action under the given regime. The per-action
/// seed is derived from the config seed and the action index.
pub fn train_action(
    dataset: &Dataset,
    action: usize,
    config: &MiningConfig,
    prior: Prior,
) -> Result<ActionModel> {
    let positives: Vec<&VideoData> = dataset
        .train_videos()
        .filter(|v| v.has_label(action))
        .collect();
    let negatives: Vec<TrainVideo> = dataset
        .train_videos()
        .filter(|v| !v.has_label(action))
        .map(train_view)
        .collect();
    if positives.is_empty() {
        return Err(Error::EmptyInput("positive video"));
    }

    let action_config = MiningConfig {
        seed: mix_seed(config.seed, stream::TRAIN, action as u64),
        prior_weight: match prior {
            Prior::VideoLabel => 0.0,
            _ => config.prior_weight,
        },
        ..config.clone()
    };

    match prior {
        Prior::Point | Prior::VideoLabel => {
            let views: Vec<TrainVideo> = positives.iter().map(|v| train_view(v)).collect();
            let outcome = mil_train(&views, &negatives, &action_config)?;
            Ok(ActionModel {
                action,
                model: outcome.model,
                mined: Some(outcome.mined),
                round_mined: Some(outcome.round_mined),
            })
        }
        Prior::Box | Prior::BestProposal => {
            let pairs: Vec<(TrainVideo, Vec<&crate::geometry::Tube>)> = positives
                .iter()
                .map(|v| (train_view(v), v.gt_tubes(action)))
                .collect();
            if pairs.iter().any(|(_, gt)| gt.is_empty()) {
                return Err(Error::EmptyInput("ground-truth tube"));
            }
            let outcome = if prior == Prior::Box {
                box_supervised_train(&pairs, &negatives, &action_config)?
            } else {
                best_proposal_train(&pairs, &negatives, &action_config)?
            };
            Ok(ActionModel {
                action,
                model: outcome.model,
                mined: None,
                round_mined: None,
            })
        }
    }
}

/// Train models for all actions.
pub fn train_all(dataset: &Dataset, config: &MiningConfig, prior: Prior) -> Result<Vec<ActionModel>> {
    (0..dataset.actions.len())
        .map(|a| train_action(dataset, a, config, prior))
        .collect()
}

/// Inference-time options.
#[derive(Debug, Clone, Default)]
pub struct InferOptions {
    /// Spatial pseudo-point cue, if any.
    pub pseudo: Option<PseudoKind>,
    /// Weight for the cue; `None` calibrates it on the training split.
    pub lambda_p: Option<f64>,
    /// Temporal-extent penalty weight; `None` disables temporal rescoring.
    pub lambda_t: Option<f64>,
    pub match_mode: MatchMode,
}

/// One top-1 selection: the chosen proposal of one test video for one action.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub action: usize,
    pub video_id: String,
    pub proposal: usize,
    pub score: f64,
}

/// Inference result: one record per (action, test video), plus the cue
/// calibration and any degenerate-frame flags.
#[derive(Debug, Clone)]
pub struct InferenceOutput {
    pub records: Vec<DetectionRecord>,
    pub pseudo_weight: Option<PseudoWeight>,
    /// (video id, cue, frame) for every frame that fell back to the center.
    pub degenerate_frames: Vec<(String, PseudoKind, u32)>,
}

/// Build the pseudo track of one cue for one video.
fn pseudo_track_for(
    kind: PseudoKind,
    video: &VideoData,
    action_stats: &BTreeMap<usize, (f64, f64)>,
    action: usize,
) -> Result<PseudoTrack> {
    match kind {
        PseudoKind::TrainStats => {
            let &(rx, ry) = action_stats
                .get(&action)
                .ok_or(Error::EmptyInput("training point track"))?;
            Ok(PseudoTrack {
                kind,
                points: vec![
                    crate::geometry::Point::new(
                        rx * video.meta.width as f64,
                        ry * video.meta.height as f64,
                    );
                    video.meta.frame_count as usize
                ],
                boxes: None,
                degenerate_frames: Vec::new(),
            })
        }
        PseudoKind::SelfSupervision => Ok(pp_self_supervision(&video.proposals, &video.meta)),
        PseudoKind::Person => {
            let dets = video.detections.as_ref().ok_or_else(|| {
                Error::InvalidConfig(format!("video {} has no detection file", video.id))
            })?;
            Ok(pp_person(dets, &video.meta))
        }
        PseudoKind::IndependentMotion => {
            let map = video.mass_map.as_ref().ok_or_else(|| {
                Error::InvalidConfig(format!("video {} has no mass-map file", video.id))
            })?;
            pp_independent_motion(map, &video.meta)
        }
        PseudoKind::Center => Ok(pp_center(&video.meta)),
    }
}

/// Per-action mean annotated point (relative coordinates) over the train split.
fn train_stats_by_action(dataset: &Dataset) -> Result<BTreeMap<usize, (f64, f64)>> {
    let mut out = BTreeMap::new();
    for action in 0..dataset.actions.len() {
        let pairs: Vec<_> = dataset
            .train_videos()
            .filter(|v| v.has_label(action) && !v.points.is_empty())
            .map(|v| (&v.points, &v.meta))
            .collect();
        if !pairs.is_empty() {
            out.insert(action, crate::pseudo::train_point_statistic(&pairs)?);
        }
    }
    Ok(out)
}

/// Calibrate one cue on the training split: pseudo tracks are computed on
/// every annotated training video and matched against the manual points.
pub fn calibrate_pseudo_weight(
    dataset: &Dataset,
    kind: PseudoKind,
    mode: MatchMode,
) -> Result<PseudoWeight> {
    let action_stats = train_stats_by_action(dataset)?;
    let mut tracks = Vec::new();
    for video in dataset.train_videos() {
        if video.points.is_empty() {
            continue;
        }
        let action = *video.labels.first().ok_or(Error::EmptyInput("video label"))?;
        let track = pseudo_track_for(kind, video, &action_stats, action)?;
        tracks.push((track, video));
    }
    if tracks.is_empty() {
        return Err(Error::EmptyInput("training video"));
    }
    let pairs: Vec<_> = tracks
        .iter()
        .map(|(t, v)| (t, &v.points, &v.meta))
        .collect();
    weight_pseudo(kind, &pairs, mode)
}

/// Mean relative annotation extent per action on the train split.
fn temporal_stats_by_action(
    dataset: &Dataset,
    lambda_t: f64,
) -> Result<BTreeMap<usize, crate::pseudo::TemporalStats>> {
    let mut out = BTreeMap::new();
    for action in 0..dataset.actions.len() {
        let pairs: Vec<_> = dataset
            .train_videos()
            .filter(|v| v.has_label(action) && !v.points.is_empty())
            .map(|v| (&v.points, &v.meta))
            .collect();
        if !pairs.is_empty() {
            out.insert(action, temporal_stats(&pairs, lambda_t)?);
        }
    }
    Ok(out)
}

/// Select the top proposal of every test video for every action.
pub fn infer_all(
    dataset: &Dataset,
    models: &[ActionModel],
    options: &InferOptions,
) -> Result<InferenceOutput> {
    let dim = dataset.feature_dim();
    for m in models {
        if m.model.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.model.dim(),
            });
        }
    }

    let action_stats = if options.pseudo == Some(PseudoKind::TrainStats) {
        train_stats_by_action(dataset)?
    } else {
        BTreeMap::new()
    };
    let pseudo_weight = match options.pseudo {
        Some(kind) => Some(match options.lambda_p {
            Some(lambda_p) => PseudoWeight { kind, lambda_p },
            None => calibrate_pseudo_weight(dataset, kind, options.match_mode)?,
        }),
        None => None,
    };
    let temporal = options
        .lambda_t
        .map(|lt| temporal_stats_by_action(dataset, lt))
        .transpose()?;

    let mut records = Vec::new();
    let mut degenerate_frames = Vec::new();
    for model in models {
        for video in dataset.test_videos() {
            let mut scores: Vec<f64> = (0..video.proposals.len())
                .map(|i| model.model.decision(video.features.row(i)))
                .collect();

            if let Some(weight) = &pseudo_weight {
                let track = pseudo_track_for(weight.kind, video, &action_stats, model.action)?;
                for &frame in &track.degenerate_frames {
                    degenerate_frames.push((video.id.clone(), weight.kind, frame));
                }
                scores = spatial_adjusted_scores(
                    &model.model,
                    &video.features,
                    &video.proposals,
                    &track,
                    &video.meta,
                    weight.lambda_p,
                    options.match_mode,
                );
            }

            if let Some(stats_map) = &temporal {
                if let Some(stats) = stats_map.get(&model.action) {
                    let extents: Vec<f64> = video
                        .proposals
                        .iter()
                        .map(|t| t.relative_extent(&video.meta))
                        .collect();
                    scores = temporal_adjusted_scores(&scores, &extents, stats);
                }
            }

            let mut best = 0usize;
            for i in 1..scores.len() {
                if scores[i] > scores[best] {
                    best = i;
                }
            }
            records.push(DetectionRecord {
                action: model.action,
                video_id: video.id.clone(),
                proposal: best,
                score: scores[best],
            });
        }
    }
    // person-cue degenerate flags repeat identically per action; dedupe
    degenerate_frames.sort();
    degenerate_frames.dedup();
    Ok(InferenceOutput {
        records,
        pseudo_weight,
        degenerate_frames,
    })
}

/// Ground truth of the test split, with every test video registered.
pub fn test_ground_truth(dataset: &Dataset) -> GroundTruth {
    let mut gt = GroundTruth::new();
    for video in dataset.test_videos() {
        gt.register_video(&video.id);
        for (action, tube) in &video.ground_truth {
            gt.insert(&video.id, *action, tube.clone());
        }
    }
    gt
}

/// Materialize detection records against the dataset's proposals.
pub fn detections_from_records(
    dataset: &Dataset,
    records: &[DetectionRecord],
) -> Result<Vec<Detection>> {
    let by_id: BTreeMap<&str, &VideoData> =
        dataset.videos.iter().map(|v| (v.id.as_str(), v)).collect();
    records
        .iter()
        .map(|r| {
            let video = by_id
                .get(r.video_id.as_str())
                .ok_or_else(|| Error::UnknownVideo(r.video_id.clone()))?;
            let tube = video.proposals.get(r.proposal).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "detection references proposal {} of video {} ({} proposals)",
                    r.proposal,
                    r.video_id,
                    video.proposals.len()
                ))
            })?;
            Ok(Detection {
                video_id: r.video_id.clone(),
                action: r.action,
                score: r.score,
                tube: tube.clone(),
            })
        })
        .collect()
}

/// Metric tables over a threshold grid.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// (action, tau, ap, n_gt) per action and threshold.
    pub per_action: Vec<(usize, f64, f64, usize)>,
    /// (tau, mAP, mean AUC) per threshold; AUC is absent when undefined.
    pub summary: Vec<(f64, f64, Option<f64>)>,
}

impl EvalReport {
    pub fn map_at(&self, tau: f64) -> Option<f64> {
        self.summary
            .iter()
            .find(|(t, _, _)| (*t - tau).abs() < 1e-9)
            .map(|(_, m, _)| *m)
    }
}

/// AP/mAP/AUC tables at each threshold of the grid.
pub fn evaluate(
    dataset: &Dataset,
    records: &[DetectionRecord],
    taus: &[f64],
) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput("detection"));
    }
    if taus.is_empty() {
        return Err(Error::EmptyInput("threshold grid"));
    }
    let gt = test_ground_truth(dataset);
    let detections = detections_from_records(dataset, records)?;
    let mut per_action = Vec::new();
    let mut summary = Vec::new();
    for &tau in taus {
        let rows = per_action_ap(&detections, &gt, tau)?;
        if rows.is_empty() {
            return Err(Error::EmptyInput("ground truth"));
        }
        let map = rows.iter().map(|(_, ap, _)| ap).sum::<f64>() / rows.len() as f64;
        let auc = mean_auc(&detections, &gt, tau)?;
        for (action, ap, n_gt) in rows {
            per_action.push((action, tau, ap, n_gt));
        }
        summary.push((tau, map, auc));
    }
    Ok(EvalReport {
        per_action,
        summary,
    })
}

/// Error-diagnosis table: per-action counts at each threshold, plus an
/// aggregate row per threshold (action index `None`).
pub fn diagnosis_report(
    dataset: &Dataset,
    records: &[DetectionRecord],
    taus: &[f64],
) -> Result<Vec<(Option<usize>, f64, DiagnosisCounts)>> {
    if records.is_empty() {
        return Err(Error::EmptyInput("detection"));
    }
    let gt = test_ground_truth(dataset);
    let detections = detections_from_records(dataset, records)?;
    let mut out = Vec::new();
    for &tau in taus {
        let rows = diagnose_per_action(&detections, &gt, tau)?;
        let mut total = DiagnosisCounts::default();
        for (action, counts) in rows {
            total.correct += counts.correct;
            total.localization += counts.localization;
            total.confusion += counts.confusion;
            total.background_own += counts.background_own;
            total.background_other += counts.background_other;
            out.push((Some(action), tau, counts));
        }
        out.push((None, tau, total));
    }
    Ok(out)
}

/// Mean IoU of the selected tubes against ground truth, over (action, video)
/// pairs where the video carries that action. The localization quality probe
/// used by tests and experiment summaries.
pub fn mean_top1_iou(dataset: &Dataset, records: &[DetectionRecord]) -> Result<f64> {
    let gt = test_ground_truth(dataset);
    let detections = detections_from_records(dataset, records)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for det in &detections {
        if gt.video_is_positive(&det.video_id, det.action) {
            total += gt.max_iou(&det.video_id, det.action, &det.tube);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyInput("positive detection"));
    }
    Ok(total / count as f64)
}

/// Mean IoU of mined training proposals against ground truth for one
/// action's mining trace, one value per round.
pub fn mining_quality_per_round(
    dataset: &Dataset,
    action: usize,
    round_mined: &[Vec<usize>],
) -> Vec<f64> {
    let positives: Vec<&VideoData> = dataset
        .train_videos()
        .filter(|v| v.has_label(action))
        .collect();
    round_mined
        .iter()
        .map(|mined| {
            let mut total = 0.0;
            for (video, &idx) in positives.iter().zip(mined) {
                let proposal = &video.proposals[idx];
                total += video
                    .gt_tubes(action)
                    .iter()
                    .map(|g| crate::geometry::tube_iou(proposal, g))
                    .fold(0.0_f64, f64::max);
            }
            total / positives.len().max(1) as f64
        })
        .collect()
}

/// Does any video of the split lack the file a cue needs?
pub fn check_pseudo_inputs(dataset: &Dataset, kind: PseudoKind, split: Split) -> Result<()> {
    for video in dataset.videos.iter().filter(|v| v.split == split) {
        match kind {
            PseudoKind::Person if video.detections.is_none() => {
                return Err(Error::InvalidConfig(format!(
                    "video {} has no detection file",
                    video.id
                )));
            }
            PseudoKind::IndependentMotion if video.mass_map.is_none() => {
                return Err(Error::InvalidConfig(format!(
                    "video {} has no mass-map file",
                    video.id
                )));
            }
            _ => {}
        }
    }
    Ok(())
}
