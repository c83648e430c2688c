//! Experiment protocols: annotation-stride and point-noise robustness,
//! proposal-quality filtering, and the pseudo-point ablation. Each sweep
//! perturbs a copy of the dataset in memory, reruns the full train/infer/
//! evaluate pipeline, and reports mAP over the threshold grid; the input
//! dataset is never modified.

use crate::data::{filter_low_quality, perturb_points, subsample_points, Dataset, Split};
use crate::error::Result;
use crate::geometry::MatchMode;
use crate::mining::MiningConfig;
use crate::pipeline::{evaluate, infer_all, train_all, InferOptions, Prior};
use crate::pseudo::PseudoKind;
use crate::rng::{mix_seed, stream};

/// One sweep configuration and its mAP per threshold.
#[derive(Debug, Clone)]
pub struct SweepRow {
    /// Grid value ("1", "0.5", a cue name, ...).
    pub label: String,
    /// Calibrated cue weight, for the pseudo ablation.
    pub lambda_p: Option<f64>,
    /// (tau, mAP) pairs over the threshold grid.
    pub maps: Vec<(f64, f64)>,
}

fn run_pipeline(
    dataset: &Dataset,
    config: &MiningConfig,
    prior: Prior,
    options: &InferOptions,
    taus: &[f64],
) -> Result<(Vec<(f64, f64)>, Option<f64>)> {
    let models = train_all(dataset, config, prior)?;
    let output = infer_all(dataset, &models, options)?;
    let report = evaluate(dataset, &output.records, taus)?;
    let maps = report
        .summary
        .iter()
        .map(|(tau, map, _)| (*tau, *map))
        .collect();
    Ok((maps, output.pseudo_weight.map(|w| w.lambda_p)))
}

/// Copy with training annotations kept only every `stride` frames.
pub fn dataset_with_stride(dataset: &Dataset, stride: u32) -> Dataset {
    let mut out = dataset.clone();
    for video in out.videos.iter_mut().filter(|v| v.split == Split::Train) {
        video.points = subsample_points(&video.points, stride);
    }
    out
}

/// Copy with seeded Gaussian noise on the training annotations. The noise
/// stream folds the sweep seed, the grid position, and the video position.
pub fn dataset_with_point_noise(
    dataset: &Dataset,
    sigma: f64,
    seed: u64,
    grid_index: usize,
) -> Dataset {
    let mut out = dataset.clone();
    for (v_idx, video) in out.videos.iter_mut().enumerate() {
        if video.split != Split::Train {
            continue;
        }
        let noise_seed = mix_seed(
            seed,
            stream::POINT_NOISE,
            ((grid_index as u64) << 32) | v_idx as u64,
        );
        video.points = perturb_points(&video.points, sigma, noise_seed, &video.meta);
    }
    out
}

/// Copy with a seeded `epsilon` fraction of each video's low-quality
/// proposals removed (both splits), feature rows filtered in lockstep.
pub fn dataset_with_epsilon(dataset: &Dataset, epsilon: f64, seed: u64, grid_index: usize) -> Dataset {
    let mut out = dataset.clone();
    for (v_idx, video) in out.videos.iter_mut().enumerate() {
        let gt: Vec<&crate::geometry::Tube> =
            video.ground_truth.iter().map(|(_, t)| t).collect();
        let filter_seed = mix_seed(
            seed,
            stream::PROPOSAL_FILTER,
            ((grid_index as u64) << 32) | v_idx as u64,
        );
        let kept = filter_low_quality(&video.proposals, &gt, epsilon, filter_seed);
        video.proposals = kept.iter().map(|&i| video.proposals[i].clone()).collect();
        video.features = video.features.select_rows(&kept);
    }
    out
}

/// Annotation-stride sweep: train at each stride, report mAP per threshold.
pub fn stride_sweep(
    dataset: &Dataset,
    config: &MiningConfig,
    prior: Prior,
    strides: &[u32],
    taus: &[f64],
) -> Result<Vec<SweepRow>> {
    strides
        .iter()
        .map(|&stride| {
            let ds = dataset_with_stride(dataset, stride);
            let (maps, _) =
                run_pipeline(&ds, config, prior, &InferOptions::default(), taus)?;
            Ok(SweepRow {
                label: stride.to_string(),
                lambda_p: None,
                maps,
            })
        })
        .collect()
}

/// Annotation-noise sweep over Gaussian sigmas in pixels.
pub fn sigma_sweep(
    dataset: &Dataset,
    config: &MiningConfig,
    prior: Prior,
    sigmas: &[f64],
    taus: &[f64],
) -> Result<Vec<SweepRow>> {
    sigmas
        .iter()
        .enumerate()
        .map(|(idx, &sigma)| {
            let ds = dataset_with_point_noise(dataset, sigma, config.seed, idx);
            let (maps, _) =
                run_pipeline(&ds, config, prior, &InferOptions::default(), taus)?;
            Ok(SweepRow {
                label: format_grid_value(sigma),
                lambda_p: None,
                maps,
            })
        })
        .collect()
}

/// Proposal-quality sweep: remove a growing fraction of low-quality
/// proposals before training and testing.
pub fn epsilon_sweep(
    dataset: &Dataset,
    config: &MiningConfig,
    prior: Prior,
    epsilons: &[f64],
    taus: &[f64],
) -> Result<Vec<SweepRow>> {
    epsilons
        .iter()
        .enumerate()
        .map(|(idx, &epsilon)| {
            let ds = dataset_with_epsilon(dataset, epsilon, config.seed, idx);
            let (maps, _) =
                run_pipeline(&ds, config, prior, &InferOptions::default(), taus)?;
            Ok(SweepRow {
                label: format_grid_value(epsilon),
                lambda_p: None,
                maps,
            })
        })
        .collect()
}

/// Pseudo-point ablation: a no-cue baseline, each spatial cue with its
/// calibrated weight, and a temporal-only row.
pub fn pseudo_ablation(
    dataset: &Dataset,
    config: &MiningConfig,
    prior: Prior,
    kinds: &[PseudoKind],
    lambda_t: f64,
    taus: &[f64],
) -> Result<Vec<SweepRow>> {
    let models = train_all(dataset, config, prior)?;
    let mut rows = Vec::new();

    let baseline = infer_all(dataset, &models, &InferOptions::default())?;
    let report = evaluate(dataset, &baseline.records, taus)?;
    rows.push(SweepRow {
        label: "none".into(),
        lambda_p: None,
        maps: report.summary.iter().map(|(t, m, _)| (*t, *m)).collect(),
    });

    for &kind in kinds {
        let options = InferOptions {
            pseudo: Some(kind),
            lambda_p: None,
            lambda_t: None,
            match_mode: MatchMode::ClampOutside,
        };
        let output = infer_all(dataset, &models, &options)?;
        let report = evaluate(dataset, &output.records, taus)?;
        rows.push(SweepRow {
            label: kind.name().into(),
            lambda_p: output.pseudo_weight.map(|w| w.lambda_p),
            maps: report.summary.iter().map(|(t, m, _)| (*t, *m)).collect(),
        });
    }

    let temporal = InferOptions {
        pseudo: None,
        lambda_p: None,
        lambda_t: Some(lambda_t),
        match_mode: MatchMode::ClampOutside,
    };
    let output = infer_all(dataset, &models, &temporal)?;
    let report = evaluate(dataset, &output.records, taus)?;
    rows.push(SweepRow {
        label: "temporal".into(),
        lambda_p: None,
        maps: report.summary.iter().map(|(t, m, _)| (*t, *m)).collect(),
    });

    Ok(rows)
}

/// Grid values print as plain decimals ("0.5", "5", "0.05").
pub fn format_grid_value(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
