//! Proposal mining: the point-guided multiple-instance training loop and the
//! supervision baselines it is compared against.
//!
//! One model is trained per action. Each training round alternates between
//! (a) fitting a linear max-margin classifier on the currently mined
//! proposal per positive video and (b) re-mining each video with the score
//! of a model that never saw it, by splitting the positive videos into
//! folds. The mining score of a proposal is the model decision value plus a
//! weighted overlap between the proposal's tube and the video's point
//! annotations; weight zero recovers the video-label-only baseline.

mod svm;

pub use svm::{hinge_objective, train_linear_svm, LinearModel};

use crate::error::{Error, Result};
use crate::geometry::{overlap, MatchMode, PointTrack, Tube, VideoMeta};
use crate::rng::{mix_seed, stream, DetRng};

/// Dense row-major feature storage, one row per proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::InvalidConfig(format!(
                "feature buffer of {} values is not a multiple of dim {dim}",
                data.len()
            )));
        }
        Ok(FeatureMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn raw(&self) -> &[f32] {
        &self.data
    }

    /// Copy with each row scaled to unit L2 norm (zero rows left untouched).
    /// Applied once at dataset load; the files on disk stay raw.
    pub fn normalized(&self) -> FeatureMatrix {
        let mut data = self.data.clone();
        for r in 0..self.rows() {
            let row = &mut data[r * self.dim..(r + 1) * self.dim];
            let norm = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in row.iter_mut() {
                    *v = (*v as f64 / norm) as f32;
                }
            }
        }
        FeatureMatrix { dim: self.dim, data }
    }

    /// Copy containing only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix { dim: self.dim, data }
    }
}

/// Borrowed view of one training video.
#[derive(Debug, Clone, Copy)]
pub struct TrainVideo<'a> {
    pub proposals: &'a [Tube],
    pub features: &'a FeatureMatrix,
    pub points: &'a PointTrack,
    pub meta: &'a VideoMeta,
}

impl<'a> TrainVideo<'a> {
    fn proposal_overlaps(&self, mode: MatchMode) -> Vec<f64> {
        self.proposals
            .iter()
            .map(|t| overlap(t, self.points, self.meta, mode))
            .collect()
    }
}

/// Training-loop parameters.
#[derive(Debug, Clone)]
pub struct MiningConfig {
    pub lambda_reg: f64,
    pub iterations: usize,
    pub folds: usize,
    pub negatives_per_video: usize,
    /// Weight of the point-overlap prior in the mining score. 1 trains from
    /// points, 0 is the video-label-only baseline; fractional values are
    /// accepted for experimentation.
    pub prior_weight: f64,
    pub match_mode: MatchMode,
    pub seed: u64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            lambda_reg: 10.0,
            iterations: 5,
            folds: 3,
            negatives_per_video: 100,
            prior_weight: 1.0,
            match_mode: MatchMode::ClampOutside,
            seed: 0,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_reg <= 0.0 {
            return Err(Error::InvalidConfig("lambda_reg must be > 0".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig("folds must be >= 2".into()));
        }
        if self.negatives_per_video == 0 {
            return Err(Error::InvalidConfig("negatives_per_video must be >= 1".into()));
        }
        Ok(())
    }

    /// Seed for the solver run at (round, fold); the final fit uses
    /// `final_solver_seed`.
    fn solver_seed(&self, round: usize, fold: usize) -> u64 {
        mix_seed(self.seed, stream::SOLVER, ((round as u64) << 16) | fold as u64)
    }

    fn final_solver_seed(&self) -> u64 {
        mix_seed(self.seed, stream::SOLVER, u64::MAX)
    }
}

/// Model decision value plus the weighted point-overlap prior.
pub fn mining_score(
    model: &LinearModel,
    feature: &[f32],
    tube: &Tube,
    points: &PointTrack,
    meta: &VideoMeta,
    prior_weight: f64,
    mode: MatchMode,
) -> f64 {
    model.decision(feature) + prior_weight * overlap(tube, points, meta, mode)
}

fn argmax(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0;
    for (i, s) in scores.enumerate() {
        if s > best {
            best = s;
            best_idx = i;
        }
    }
    best_idx
}

/// Index of the proposal with the highest mining score; ties break to the
/// lowest index.
pub fn mine_best_proposal(
    model: &LinearModel,
    video: &TrainVideo,
    prior_weight: f64,
    mode: MatchMode,
) -> usize {
    let overlaps = video.proposal_overlaps(mode);
    argmax(
        (0..video.proposals.len())
            .map(|i| model.decision(video.features.row(i)) + prior_weight * overlaps[i]),
    )
}

fn argmax_with_overlaps(
    model: &LinearModel,
    video: &TrainVideo,
    overlaps: &[f64],
    prior_weight: f64,
) -> usize {
    argmax(
        (0..video.proposals.len())
            .map(|i| model.decision(video.features.row(i)) + prior_weight * overlaps[i]),
    )
}

/// Result of one per-action training.
#[derive(Debug, Clone)]
pub struct MilOutcome {
    pub model: LinearModel,
    /// Final mined proposal index per positive video.
    pub mined: Vec<usize>,
    /// Mined indices after every round; entry 0 is the prior-only selection.
    pub round_mined: Vec<Vec<usize>>,
}

/// Sample `negatives_per_video` proposal features from every negative video.
/// Videos with fewer proposals contribute all of them, in shuffled order.
fn sample_negatives<'a>(
    negative_videos: &[TrainVideo<'a>],
    per_video: usize,
    rng: &mut DetRng,
) -> Vec<&'a [f32]> {
    let mut out = Vec::new();
    for video in negative_videos {
        for idx in rng.sample_indices(video.proposals.len(), per_video) {
            out.push(video.features.row(idx));
        }
    }
    out
}

/// Split `n` video indices into `folds` seeded groups of near-equal size.
fn fold_assignment(n: usize, folds: usize, rng: &mut DetRng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut groups = vec![Vec::new(); folds];
    for (pos, video) in order.into_iter().enumerate() {
        groups[pos % folds].push(video);
    }
    groups
}

/// Train one action model from positive videos (carrying point annotations)
/// and a pool of other-action videos used as negatives.
///
/// Round 0 mines with the zero model, so the selection is driven by the
/// overlap prior alone (or falls to the first proposal when the prior weight
/// is zero). Every subsequent round re-partitions the positive videos into
/// seeded folds and re-mines each fold with a model trained on the others;
/// the final model is fit on the last mined set against the last round's
/// negative sample.
pub fn mil_train(
    positives: &[TrainVideo],
    negative_videos: &[TrainVideo],
    config: &MiningConfig,
) -> Result<MilOutcome> {
    config.validate()?;
    if positives.is_empty() {
        return Err(Error::EmptyInput("positive video"));
    }
    if negative_videos.is_empty() {
        return Err(Error::EmptyInput("negative video"));
    }

    let overlaps: Vec<Vec<f64>> = positives
        .iter()
        .map(|v| v.proposal_overlaps(config.match_mode))
        .collect();

    // Round 0: zero model, prior-only mining.
    let zero = LinearModel::zeros(positives[0].features.dim());
    let mut mined: Vec<usize> = positives
        .iter()
        .zip(&overlaps)
        .map(|(v, o)| argmax_with_overlaps(&zero, v, o, config.prior_weight))
        .collect();
    let mut round_mined = vec![mined.clone()];

    let mut negatives: Vec<&[f32]> = Vec::new();
    for round in 1..=config.iterations {
        let mut neg_rng = DetRng::derived(config.seed, stream::NEGATIVES, round as u64);
        negatives = sample_negatives(negative_videos, config.negatives_per_video, &mut neg_rng);

        let mut fold_rng = DetRng::derived(config.seed, stream::FOLDS, round as u64);
        let folds = fold_assignment(positives.len(), config.folds, &mut fold_rng);

        let mut next = mined.clone();
        for (fold_idx, fold) in folds.iter().enumerate() {
            let in_fold = |v: &usize| fold.contains(v);
            let train_features: Vec<&[f32]> = (0..positives.len())
                .filter(|v| !in_fold(v))
                .map(|v| positives[v].features.row(mined[v]))
                .collect();
            if train_features.is_empty() {
                // Degenerate split (fewer videos than folds): keep the
                // previous selection for this fold.
                continue;
            }
            let model = train_linear_svm(
                &train_features,
                &negatives,
                config.lambda_reg,
                config.solver_seed(round, fold_idx),
            )?;
            for &v in fold {
                next[v] =
                    argmax_with_overlaps(&model, &positives[v], &overlaps[v], config.prior_weight);
            }
        }
        mined = next;
        round_mined.push(mined.clone());
    }

    // Final fit on all mined proposals, reusing the last round's negatives.
    if negatives.is_empty() {
        let mut neg_rng = DetRng::derived(config.seed, stream::NEGATIVES, config.iterations as u64);
        negatives = sample_negatives(negative_videos, config.negatives_per_video, &mut neg_rng);
    }
    let final_features: Vec<&[f32]> = positives
        .iter()
        .zip(&mined)
        .map(|(v, &i)| v.features.row(i))
        .collect();
    let model = train_linear_svm(
        &final_features,
        &negatives,
        config.lambda_reg,
        config.final_solver_seed(),
    )?;

    Ok(MilOutcome {
        model,
        mined,
        round_mined,
    })
}

/// Result of a ground-truth-supervised baseline training.
#[derive(Debug, Clone)]
pub struct SupervisedOutcome {
    pub model: LinearModel,
    /// Per positive video, the proposal indices used as positives.
    pub positive_sets: Vec<Vec<usize>>,
}

/// Highest IoU of each proposal against any ground-truth instance.
fn gt_ious(video: &TrainVideo, gt: &[&Tube]) -> Vec<f64> {
    video
        .proposals
        .iter()
        .map(|p| {
            gt.iter()
                .map(|g| crate::geometry::tube_iou(p, g))
                .fold(0.0_f64, f64::max)
        })
        .collect()
}

/// Index of the proposal with the highest IoU to ground truth; ties break to
/// the lowest index.
pub fn best_proposal_index(video: &TrainVideo, gt: &[&Tube]) -> usize {
    argmax(gt_ious(video, gt).into_iter())
}

/// Positive/negative proposal indices for box-supervised training: positives
/// overlap ground truth above 0.6 plus the best proposal standing in for the
/// ground-truth feature itself, negatives fall below 0.1.
pub fn box_supervision_sets(video: &TrainVideo, gt: &[&Tube]) -> (Vec<usize>, Vec<usize>) {
    let ious = gt_ious(video, gt);
    let best = argmax(ious.iter().copied());
    let mut pos: Vec<usize> = (0..ious.len()).filter(|&i| ious[i] > 0.6).collect();
    if !pos.contains(&best) {
        pos.push(best);
    }
    let neg: Vec<usize> = (0..ious.len()).filter(|&i| ious[i] < 0.1).collect();
    (pos, neg)
}

fn supervised_train(
    positives: &[(TrainVideo, Vec<&Tube>)],
    negative_videos: &[TrainVideo],
    config: &MiningConfig,
    select: impl Fn(&TrainVideo, &[&Tube]) -> (Vec<usize>, Vec<usize>),
) -> Result<SupervisedOutcome> {
    if positives.is_empty() {
        return Err(Error::EmptyInput("positive video"));
    }
    if negative_videos.is_empty() {
        return Err(Error::EmptyInput("negative video"));
    }

    let mut positive_sets = Vec::with_capacity(positives.len());
    let mut pos_features: Vec<&[f32]> = Vec::new();
    let mut neg_features: Vec<&[f32]> = Vec::new();
    for (video, gt) in positives {
        let (pos, neg) = select(video, gt);
        for &i in &pos {
            pos_features.push(video.features.row(i));
        }
        for &i in &neg {
            neg_features.push(video.features.row(i));
        }
        positive_sets.push(pos);
    }

    let mut neg_rng = DetRng::derived(config.seed, stream::NEGATIVES, 0);
    neg_features.extend(sample_negatives(
        negative_videos,
        config.negatives_per_video,
        &mut neg_rng,
    ));

    let model = train_linear_svm(
        &pos_features,
        &neg_features,
        config.lambda_reg,
        config.solver_seed(0, 0),
    )?;
    Ok(SupervisedOutcome {
        model,
        positive_sets,
    })
}

/// Baseline trained on ground-truth-derived positives and negatives.
pub fn box_supervised_train(
    positives: &[(TrainVideo, Vec<&Tube>)],
    negative_videos: &[TrainVideo],
    config: &MiningConfig,
) -> Result<SupervisedOutcome> {
    supervised_train(positives, negative_videos, config, box_supervision_sets)
}

/// Baseline trained on the single highest-IoU proposal per positive video.
pub fn best_proposal_train(
    positives: &[(TrainVideo, Vec<&Tube>)],
    negative_videos: &[TrainVideo],
    config: &MiningConfig,
) -> Result<SupervisedOutcome> {
    supervised_train(positives, negative_videos, config, |video, gt| {
        let ious = gt_ious(video, gt);
        let best = argmax(ious.iter().copied());
        let neg = (0..ious.len()).filter(|&i| ious[i] < 0.1).collect();
        (vec![best], neg)
    })
}
