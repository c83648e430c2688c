//! Scratch probe for benchmark calibration (not part of the deliverable API).

use psal_core::data::{synth_generate, SynthConfig};
use psal_core::experiments;
use psal_core::geometry::MatchMode;
use psal_core::mining::MiningConfig;
use psal_core::pipeline::{
    self, evaluate, infer_all, mean_top1_iou, train_all, InferOptions, Prior,
};
use psal_core::pseudo::PseudoKind;

fn main() {
    let taus: Vec<f64> = pipeline::DEFAULT_TAU_GRID.to_vec();
    let cfg = SynthConfig {
        seed: 7,
        ..Default::default()
    };
    let ds = synth_generate(&cfg).unwrap();
    let mining = MiningConfig {
        seed: 7,
        ..Default::default()
    };

    let t0 = std::time::Instant::now();
    for prior in [Prior::Point, Prior::VideoLabel, Prior::Box, Prior::BestProposal] {
        let models = train_all(&ds, &mining, prior).unwrap();
        let out = infer_all(&ds, &models, &InferOptions::default()).unwrap();
        let report = evaluate(&ds, &out.records, &taus).unwrap();
        let iou = mean_top1_iou(&ds, &out.records).unwrap();
        println!(
            "{:14} mAP@0.2={:.3} mAP@0.5={:.3} mean_iou={:.3}",
            prior.name(),
            report.map_at(0.2).unwrap(),
            report.map_at(0.5).unwrap(),
            iou
        );
        if prior == Prior::Point {
            for m in &models {
                let q = pipeline::mining_quality_per_round(&ds, m.action, m.round_mined.as_ref().unwrap());
                println!("  action {} round quality: {:?}", m.action, q.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
            }
        }
    }
    println!("ladder elapsed: {:?}", t0.elapsed());

    let t0 = std::time::Instant::now();
    let rows = experiments::stride_sweep(&ds, &mining, Prior::Point, &[1, 2, 5, 10, 20], &taus).unwrap();
    for r in &rows {
        println!("stride {:3}: map@0.2={:.3} map@0.5={:.3}", r.label, r.maps[1].1, r.maps[4].1);
    }
    println!("stride sweep elapsed: {:?}", t0.elapsed());

    let t0 = std::time::Instant::now();
    let rows = experiments::sigma_sweep(&ds, &mining, Prior::Point, &[0.0, 1.0, 5.0, 50.0], &taus).unwrap();
    for r in &rows {
        println!("sigma {:4}: map@0.2={:.3} map@0.5={:.3}", r.label, r.maps[1].1, r.maps[4].1);
    }
    println!("sigma sweep elapsed: {:?}", t0.elapsed());

    let t0 = std::time::Instant::now();
    let oracle_cfg = SynthConfig {
        seed: 7,
        include_oracle: true,
        ..Default::default()
    };
    let oracle_ds = synth_generate(&oracle_cfg).unwrap();
    let rows = experiments::epsilon_sweep(&oracle_ds, &mining, Prior::Point, &[0.0, 0.5, 0.9, 1.0], &taus).unwrap();
    for r in &rows {
        println!("epsilon {:4}: map@0.5={:.3}", r.label, r.maps[4].1);
    }
    println!("epsilon sweep elapsed: {:?}", t0.elapsed());

    // criterion 6 fixture: off-center ground truth, noisier features
    let t0 = std::time::Instant::now();
    for feature_noise in [0.2, 0.3, 0.4, 0.5] {
        let off_cfg = SynthConfig {
            seed: 7,
            offcenter_gt: true,
            person_noise: 3.0,
            feature_noise,
            ..Default::default()
        };
        let off_ds = synth_generate(&off_cfg).unwrap();
        let w_person =
            pipeline::calibrate_pseudo_weight(&off_ds, PseudoKind::Person, MatchMode::ClampOutside)
                .unwrap();
        let w_center =
            pipeline::calibrate_pseudo_weight(&off_ds, PseudoKind::Center, MatchMode::ClampOutside)
                .unwrap();
        let models = train_all(&off_ds, &mining, Prior::Point).unwrap();
        let plain = infer_all(&off_ds, &models, &InferOptions::default()).unwrap();
        let person = infer_all(
            &off_ds,
            &models,
            &InferOptions {
                pseudo: Some(PseudoKind::Person),
                ..Default::default()
            },
        )
        .unwrap();
        println!(
            "offcenter sigf={feature_noise}: lambda_person={:.3} lambda_center={:.3} iou_plain={:.3} iou_person={:.3}",
            w_person.lambda_p,
            w_center.lambda_p,
            mean_top1_iou(&off_ds, &plain.records).unwrap(),
            mean_top1_iou(&off_ds, &person.records).unwrap()
        );
    }
    println!("pseudo probe elapsed: {:?}", t0.elapsed());
}
