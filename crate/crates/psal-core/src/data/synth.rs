//! Seeded synthetic dataset generator.
//!
//! Every video gets a random-walk ground-truth tube. Proposals are a mix of
//! IoU-controlled jitters of the ground truth and unrelated background
//! tubes, shuffled so the index carries no signal. Features correlate with
//! localization quality: each proposal's vector blends the action prototype
//! (scaled by IoU to ground truth) with a per-action context signature
//! (scaled by 1 - IoU) plus isotropic noise. The context component makes
//! mining without spatial supervision genuinely hard: every proposal of an
//! action's videos is discriminative for the action label, but only the
//! well-localized ones point at the action itself, so a miner with no
//! spatial prior can lock onto background. Point annotations are
//! ground-truth box centers, optionally strided and noised; person
//! detections track the ground-truth box; motion mass concentrates on it.
//! Everything is a pure function of the config.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{tube_iou, Box2D, Point, PointTrack, Tube, VideoMeta};
use crate::mining::FeatureMatrix;
use crate::pseudo::{MassMap, PersonDetection};
use crate::rng::{stream, DetRng};

use super::io;
use super::{
    filter_low_quality, subsample_points, Dataset, Manifest, ManifestVideo, Split, VideoData,
    VideoFiles,
};

/// Generator parameters. Defaults give the desk-scale benchmark used by the
/// acceptance suite: 3 actions, 20 train + 20 test videos each, 60 frames
/// at 320x240 with 64 proposals per video.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_actions: usize,
    pub train_videos_per_action: usize,
    pub test_videos_per_action: usize,
    pub frames_per_video: u32,
    pub frame_width: u32,
    pub frame_height: u32,
    pub proposals_per_video: usize,
    /// Fraction of proposals drawn as jittered copies of the ground truth;
    /// the rest are background tubes.
    pub overlap_mixture: f64,
    pub feature_dim: usize,
    /// Isotropic noise added to each feature component.
    pub feature_noise: f64,
    /// Strength of the per-action context signature carried by poorly
    /// localized proposals.
    pub context_strength: f64,
    /// Annotate every `point_stride`-th frame of the ground-truth span.
    pub point_stride: u32,
    /// Gaussian noise on the point annotations, in pixels.
    pub point_noise: f64,
    /// Generation-time removal fraction of low-quality proposals.
    pub epsilon: f64,
    /// Append the ground-truth tube verbatim as the last proposal.
    pub include_oracle: bool,
    /// Plant ground-truth tubes away from the frame center.
    pub offcenter_gt: bool,
    /// Center noise of the synthetic person detections, in pixels.
    pub person_noise: f64,
    /// Down-sampling factor of the motion mass maps.
    pub mass_downsample: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_actions: 3,
            train_videos_per_action: 20,
            test_videos_per_action: 20,
            frames_per_video: 60,
            frame_width: 320,
            frame_height: 240,
            proposals_per_video: 64,
            overlap_mixture: 0.15,
            feature_dim: 32,
            feature_noise: 0.05,
            context_strength: 1.0,
            point_stride: 1,
            point_noise: 0.0,
            epsilon: 0.0,
            include_oracle: false,
            offcenter_gt: false,
            person_noise: 3.0,
            mass_downsample: 8,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_actions == 0
            || self.train_videos_per_action == 0
            || self.test_videos_per_action == 0
            || self.frames_per_video == 0
            || self.frame_width == 0
            || self.frame_height == 0
            || self.proposals_per_video == 0
            || self.feature_dim == 0
            || self.point_stride == 0
            || self.mass_downsample == 0
        {
            return Err(Error::InvalidConfig("all synth sizes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.overlap_mixture) {
            return Err(Error::InvalidConfig(format!(
                "overlap mixture {} outside [0, 1]",
                self.overlap_mixture
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(format!(
                "epsilon {} outside [0, 1]",
                self.epsilon
            )));
        }
        if self.feature_noise < 0.0
            || self.point_noise < 0.0
            || self.person_noise < 0.0
            || self.context_strength < 0.0
        {
            return Err(Error::InvalidConfig("noise levels must be non-negative".into()));
        }
        Ok(())
    }

    fn meta(&self) -> VideoMeta {
        VideoMeta {
            frame_count: self.frames_per_video,
            width: self.frame_width,
            height: self.frame_height,
        }
    }

    fn action_name(&self, idx: usize) -> String {
        format!("action{idx:02}")
    }
}

/// One generated video before feature normalization; the feature matrix
/// holds the raw values that go to disk.
struct RawVideo {
    id: String,
    split: Split,
    action: usize,
    meta: VideoMeta,
    ground_truth: Tube,
    proposals: Vec<Tube>,
    features_raw: FeatureMatrix,
    points: PointTrack,
    detections: Vec<PersonDetection>,
    mass_map: MassMap,
}

/// Box from a center and size, clamped to stay inside the frame.
fn make_box(cx: f64, cy: f64, w: f64, h: f64, meta: &VideoMeta) -> Box2D {
    let fw = meta.width as f64;
    let fh = meta.height as f64;
    let w = w.clamp(1.0, fw);
    let h = h.clamp(1.0, fh);
    let cx = cx.clamp(w / 2.0, fw - w / 2.0);
    let cy = cy.clamp(h / 2.0, fh - h / 2.0);
    Box2D {
        xmin: cx - w / 2.0,
        ymin: cy - h / 2.0,
        xmax: cx + w / 2.0,
        ymax: cy + h / 2.0,
    }
}

/// Random-walk tube of the given span and size. Consumes two Gaussians per
/// frame for the center walk.
fn walk_tube(
    rng: &mut DetRng,
    start: u32,
    len: usize,
    w: f64,
    h: f64,
    cx0: f64,
    cy0: f64,
    walk_sigma: f64,
    meta: &VideoMeta,
) -> Tube {
    let mut cx = cx0;
    let mut cy = cy0;
    let mut boxes = Vec::with_capacity(len);
    for _ in 0..len {
        boxes.push(make_box(cx, cy, w, h, meta));
        cx += walk_sigma * rng.gaussian();
        cy += walk_sigma * rng.gaussian();
    }
    Tube { start_frame: start, boxes }
}

fn gen_ground_truth(rng: &mut DetRng, cfg: &SynthConfig) -> Tube {
    let meta = cfg.meta();
    let fw = meta.width as f64;
    let fh = meta.height as f64;
    let w = rng.uniform_in(0.18, 0.32) * fw;
    let h = rng.uniform_in(0.25, 0.45) * fh;
    let frames = cfg.frames_per_video as f64;
    let len = ((rng.uniform_in(0.55, 0.9) * frames).round() as usize)
        .clamp(1, cfg.frames_per_video as usize);
    let start = 1 + (rng.uniform() * (frames - len as f64 + 1.0)).floor() as u32;
    let (cx0, cy0) = if cfg.offcenter_gt {
        let sx = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        let sy = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        (
            fw * (0.5 + sx * rng.uniform_in(0.15, 0.28)),
            fh * (0.5 + sy * rng.uniform_in(0.12, 0.24)),
        )
    } else {
        (rng.uniform_in(0.25, 0.75) * fw, rng.uniform_in(0.3, 0.7) * fh)
    };
    walk_tube(rng, start, len, w, h, cx0, cy0, 0.008 * fw, &meta)
}

/// Jittered copy of the ground truth. The severity draw controls spatial
/// offset, scale, and temporal crop together, so IoU to ground truth spans
/// a wide range.
fn gen_jittered(rng: &mut DetRng, gt: &Tube, cfg: &SynthConfig) -> Tube {
    let meta = cfg.meta();
    let severity = rng.uniform_in(0.05, 0.5);
    let gt_w = gt.boxes[0].width();
    let gt_h = gt.boxes[0].height();
    let dx = rng.gaussian() * severity * gt_w;
    let dy = rng.gaussian() * severity * gt_h;
    let sx = (rng.gaussian() * 0.4 * severity).exp();
    let sy = (rng.gaussian() * 0.4 * severity).exp();

    let len = gt.len() as f64;
    let dt = (rng.gaussian() * severity * 0.3 * len).round() as i64;
    let start = (gt.start_frame as i64 + dt).clamp(1, cfg.frames_per_video as i64) as u32;
    let new_len = ((len * (rng.gaussian() * 0.2 * severity).exp()).round() as usize)
        .clamp(1, (cfg.frames_per_video - start + 1) as usize);

    let wobble = 0.01 * meta.width as f64;
    let mut boxes = Vec::with_capacity(new_len);
    for i in 0..new_len {
        let frame = start + i as u32;
        // follow the ground-truth center, extending flat beyond its span
        let base = gt
            .box_at(frame.clamp(gt.start_frame, gt.end_frame()))
            .expect("clamped frame is covered")
            .center();
        let cx = base.x + dx + wobble * rng.gaussian();
        let cy = base.y + dy + wobble * rng.gaussian();
        boxes.push(make_box(cx, cy, gt_w * sx, gt_h * sy, &meta));
    }
    Tube { start_frame: start, boxes }
}

fn gen_background(rng: &mut DetRng, cfg: &SynthConfig) -> Tube {
    let meta = cfg.meta();
    let fw = meta.width as f64;
    let fh = meta.height as f64;
    let w = rng.uniform_in(0.1, 0.45) * fw;
    let h = rng.uniform_in(0.12, 0.5) * fh;
    let frames = cfg.frames_per_video as f64;
    let len = ((rng.uniform_in(0.3, 1.0) * frames).round() as usize)
        .clamp(1, cfg.frames_per_video as usize);
    let start = 1 + (rng.uniform() * (frames - len as f64 + 1.0)).floor() as u32;
    let cx0 = rng.uniform_in(0.1, 0.9) * fw;
    let cy0 = rng.uniform_in(0.1, 0.9) * fh;
    walk_tube(rng, start, len, w, h, cx0, cy0, 0.01 * fw, &meta)
}

fn gen_mass_map(gt: &Tube, cfg: &SynthConfig) -> MassMap {
    let ds = cfg.mass_downsample;
    let grid_w = cfg.frame_width.div_ceil(ds);
    let grid_h = cfg.frame_height.div_ceil(ds);
    let cell_area = (ds * ds) as f64;
    let mut frames = Vec::with_capacity(cfg.frames_per_video as usize);
    for frame in 1..=cfg.frames_per_video {
        let mut grid = vec![0.0f32; (grid_w * grid_h) as usize];
        match gt.box_at(frame) {
            Some(b) => {
                for gy in 0..grid_h {
                    for gx in 0..grid_w {
                        let x0 = (gx * ds) as f64;
                        let y0 = (gy * ds) as f64;
                        let ix = (b.xmax.min(x0 + ds as f64) - b.xmin.max(x0)).max(0.0);
                        let iy = (b.ymax.min(y0 + ds as f64) - b.ymin.max(y0)).max(0.0);
                        grid[(gy * grid_w + gx) as usize] = (ix * iy / cell_area + 1e-3) as f32;
                    }
                }
            }
            None => grid.fill(1.0),
        }
        frames.push(grid);
    }
    MassMap {
        downsample: ds,
        grid_width: grid_w,
        grid_height: grid_h,
        frames,
    }
}

fn gen_video(
    cfg: &SynthConfig,
    prototypes: &[Vec<f64>],
    contexts: &[Vec<f64>],
    action: usize,
    split: Split,
    index: usize,
    global_index: u64,
) -> RawVideo {
    let meta = cfg.meta();
    let mut rng = DetRng::derived(cfg.seed, stream::VIDEO, global_index);

    let gt = gen_ground_truth(&mut rng, cfg);

    // proposals: jittered copies first, then background, then a shuffle
    let n_jittered = (cfg.overlap_mixture * cfg.proposals_per_video as f64).round() as usize;
    let n_jittered = n_jittered.min(cfg.proposals_per_video);
    let mut proposals = Vec::with_capacity(cfg.proposals_per_video + 1);
    for _ in 0..n_jittered {
        proposals.push(gen_jittered(&mut rng, &gt, cfg));
    }
    for _ in n_jittered..cfg.proposals_per_video {
        proposals.push(gen_background(&mut rng, cfg));
    }
    rng.shuffle(&mut proposals);
    if cfg.include_oracle {
        proposals.push(gt.clone());
    }
    if cfg.epsilon > 0.0 {
        let filter_seed = crate::rng::mix_seed(cfg.seed, stream::PROPOSAL_FILTER, global_index);
        let kept = filter_low_quality(&proposals, &[&gt], cfg.epsilon, filter_seed);
        proposals = kept.into_iter().map(|i| proposals[i].clone()).collect();
    }

    // features: action prototype scaled by IoU, context signature scaled
    // by 1 - IoU, plus noise
    let proto = &prototypes[action];
    let context = &contexts[action];
    let mut data = Vec::with_capacity(proposals.len() * cfg.feature_dim);
    for p in &proposals {
        let iou = tube_iou(p, &gt);
        let ctx = cfg.context_strength * (1.0 - iou);
        for (&a, &c) in proto.iter().zip(context) {
            data.push((iou * a + ctx * c + cfg.feature_noise * rng.gaussian()) as f32);
        }
    }
    let features_raw = FeatureMatrix::new(cfg.feature_dim, data).expect("row-aligned buffer");

    // points: noisy centers over the full ground-truth span, then strided
    let mut dense = PointTrack::new();
    for frame in gt.start_frame..=gt.end_frame() {
        let c = gt.box_at(frame).expect("span frame").center();
        let x = (c.x + cfg.point_noise * rng.gaussian()).clamp(0.0, meta.width as f64);
        let y = (c.y + cfg.point_noise * rng.gaussian()).clamp(0.0, meta.height as f64);
        dense.insert(frame, Point::new(x, y));
    }
    let points = subsample_points(&dense, cfg.point_stride);

    // person detections: a tracking box over the span plus one distractor
    // per frame; off-span frames get the distractor only
    let mut detections = Vec::new();
    for frame in 1..=cfg.frames_per_video {
        if let Some(b) = gt.box_at(frame) {
            let c = b.center();
            let tracked = make_box(
                c.x + cfg.person_noise * rng.gaussian(),
                c.y + cfg.person_noise * rng.gaussian(),
                b.width(),
                b.height(),
                &meta,
            );
            detections.push(PersonDetection {
                frame,
                bbox: tracked,
                confidence: rng.uniform_in(0.7, 0.95),
            });
        }
        let dw = rng.uniform_in(0.08, 0.3) * meta.width as f64;
        let dh = rng.uniform_in(0.1, 0.35) * meta.height as f64;
        let dx = rng.uniform_in(0.1, 0.9) * meta.width as f64;
        let dy = rng.uniform_in(0.1, 0.9) * meta.height as f64;
        detections.push(PersonDetection {
            frame,
            bbox: make_box(dx, dy, dw, dh, &meta),
            confidence: rng.uniform_in(0.05, 0.5),
        });
    }

    let mass_map = gen_mass_map(&gt, cfg);

    let split_name = match split {
        Split::Train => "train",
        Split::Test => "test",
    };
    RawVideo {
        id: format!("{split_name}_{action:02}_{index:03}"),
        split,
        action,
        meta,
        ground_truth: gt,
        proposals,
        features_raw,
        points,
        detections,
        mass_map,
    }
}

fn unit_vectors(cfg: &SynthConfig, tag: u64) -> Vec<Vec<f64>> {
    (0..cfg.n_actions)
        .map(|a| {
            let mut rng = DetRng::derived(cfg.seed, tag, a as u64);
            let mut v: Vec<f64> = (0..cfg.feature_dim).map(|_| rng.gaussian()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut v {
                *x /= norm;
            }
            v
        })
        .collect()
}

fn gen_prototypes(cfg: &SynthConfig) -> Vec<Vec<f64>> {
    unit_vectors(cfg, stream::PROTOTYPE)
}

fn gen_contexts(cfg: &SynthConfig) -> Vec<Vec<f64>> {
    unit_vectors(cfg, stream::CONTEXT)
}

fn generate_raw(cfg: &SynthConfig) -> Result<(Vec<String>, Vec<RawVideo>)> {
    cfg.validate()?;
    let actions: Vec<String> = (0..cfg.n_actions).map(|a| cfg.action_name(a)).collect();
    let prototypes = gen_prototypes(cfg);
    let contexts = gen_contexts(cfg);
    let mut videos = Vec::new();
    let mut global_index = 0u64;
    for (split, count) in [
        (Split::Train, cfg.train_videos_per_action),
        (Split::Test, cfg.test_videos_per_action),
    ] {
        for action in 0..cfg.n_actions {
            for index in 0..count {
                videos.push(gen_video(cfg, &prototypes, &contexts, action, split, index, global_index));
                global_index += 1;
            }
        }
    }
    Ok((actions, videos))
}

impl RawVideo {
    fn into_video_data(self, actions: &[String]) -> VideoData {
        let _ = actions;
        VideoData {
            id: self.id,
            split: self.split,
            labels: vec![self.action],
            meta: self.meta,
            proposals: self.proposals,
            features: self.features_raw.normalized(),
            points: self.points,
            ground_truth: vec![(self.action, self.ground_truth)],
            detections: Some(self.detections),
            mass_map: Some(self.mass_map),
        }
    }
}

/// Generate the dataset in memory. Bit-identical to writing with
/// [`synth_generate_to_dir`] and loading the directory back.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    let (actions, raw) = generate_raw(cfg)?;
    let videos = raw
        .into_iter()
        .map(|v| v.into_video_data(&actions))
        .collect();
    let dataset = Dataset { actions, videos };
    dataset.validate()?;
    Ok(dataset)
}

/// Generate the dataset as a directory: `manifest.json` plus one
/// subdirectory of artifact files per video.
pub fn synth_generate_to_dir(cfg: &SynthConfig, dir: &Path) -> Result<()> {
    let (actions, raw) = generate_raw(cfg)?;
    let mut manifest_videos = Vec::with_capacity(raw.len());
    for video in &raw {
        let rel = format!("videos/{}", video.id);
        let files = VideoFiles {
            proposals: format!("{rel}/proposals.json"),
            features: format!("{rel}/features.bin"),
            points: format!("{rel}/points.json"),
            ground_truth: format!("{rel}/ground_truth.json"),
            detections: Some(format!("{rel}/detections.json")),
            mass_map: Some(format!("{rel}/mass_map.bin")),
        };
        io::write_tubes(&dir.join(&files.proposals), &video.proposals)?;
        io::write_features(&dir.join(&files.features), &video.features_raw)?;
        io::write_points(&dir.join(&files.points), &video.points)?;
        io::write_ground_truth(
            &dir.join(&files.ground_truth),
            &[(actions[video.action].clone(), video.ground_truth.clone())],
        )?;
        io::write_detections(&dir.join(files.detections.as_ref().unwrap()), &video.detections)?;
        io::write_mass_map(&dir.join(files.mass_map.as_ref().unwrap()), &video.mass_map)?;
        manifest_videos.push(ManifestVideo {
            id: video.id.clone(),
            meta: video.meta,
            split: video.split,
            labels: vec![actions[video.action].clone()],
            files,
        });
    }
    let manifest = Manifest {
        actions,
        videos: manifest_videos,
    };
    io::write_json(&dir.join("manifest.json"), &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tube_iou;

    fn small_config() -> SynthConfig {
        SynthConfig {
            seed: 7,
            n_actions: 2,
            train_videos_per_action: 3,
            test_videos_per_action: 2,
            frames_per_video: 20,
            proposals_per_video: 16,
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_points_sit_on_gt_centers() {
        let cfg = small_config();
        let ds = synth_generate(&cfg).unwrap();
        for v in &ds.videos {
            let (_, gt) = &v.ground_truth[0];
            assert_eq!(v.points.len(), gt.len());
            for (frame, p) in v.points.iter() {
                let c = gt.box_at(frame).unwrap().center();
                assert_eq!(p, c);
            }
        }
    }

    #[test]
    fn oracle_appears_verbatim_as_last_proposal() {
        let cfg = SynthConfig {
            include_oracle: true,
            ..small_config()
        };
        let ds = synth_generate(&cfg).unwrap();
        for v in &ds.videos {
            let (_, gt) = &v.ground_truth[0];
            assert_eq!(v.proposals.last().unwrap(), gt);
        }
    }

    #[test]
    fn same_seed_gives_byte_identical_directories() {
        let cfg = small_config();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        synth_generate_to_dir(&cfg, dir_a.path()).unwrap();
        synth_generate_to_dir(&cfg, dir_b.path()).unwrap();

        let mut paths: Vec<_> = walk(dir_a.path());
        paths.sort();
        assert!(!paths.is_empty());
        for rel in paths {
            let a = std::fs::read(dir_a.path().join(&rel)).unwrap();
            let b = std::fs::read(dir_b.path().join(&rel)).unwrap();
            assert_eq!(a, b, "file {rel} differs between identical runs");
        }
    }

    fn walk(root: &Path) -> Vec<String> {
        fn rec(dir: &Path, root: &Path, out: &mut Vec<String>) {
            for entry in std::fs::read_dir(dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    rec(&path, root, out);
                } else {
                    out.push(path.strip_prefix(root).unwrap().display().to_string());
                }
            }
        }
        let mut out = Vec::new();
        rec(root, root, &mut out);
        out
    }

    #[test]
    fn written_dataset_loads_back_identically() {
        let cfg = small_config();
        let in_memory = synth_generate(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        synth_generate_to_dir(&cfg, dir.path()).unwrap();
        let loaded = Dataset::load(dir.path()).unwrap();

        assert_eq!(loaded.actions, in_memory.actions);
        assert_eq!(loaded.videos.len(), in_memory.videos.len());
        for (a, b) in loaded.videos.iter().zip(&in_memory.videos) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.proposals, b.proposals);
            assert_eq!(a.features, b.features, "normalized features differ for {}", a.id);
            assert_eq!(a.points, b.points);
            assert_eq!(a.ground_truth, b.ground_truth);
            assert_eq!(a.mass_map, b.mass_map);
        }
    }

    #[test]
    fn features_correlate_with_gt_overlap() {
        let cfg = SynthConfig {
            seed: 13,
            feature_noise: 0.1,
            ..SynthConfig::default()
        };
        let ds = synth_generate(&cfg).unwrap();

        // cosine to the action prototype, binned by IoU; bin means must be
        // strongly rank-correlated with IoU
        let protos = gen_prototypes(&cfg);
        let mut bins: Vec<Vec<f64>> = vec![Vec::new(); 10];
        for v in &ds.videos {
            let proto = &protos[v.labels[0]];
            let (_, gt) = &v.ground_truth[0];
            for (i, p) in v.proposals.iter().enumerate() {
                let iou = tube_iou(p, gt);
                let row = v.features.row(i);
                let cos: f64 = row
                    .iter()
                    .zip(proto)
                    .map(|(&x, &w)| x as f64 * w)
                    .sum();
                let bin = ((iou * 10.0) as usize).min(9);
                bins[bin].push(cos);
            }
        }
        let means: Vec<(usize, f64)> = bins
            .iter()
            .enumerate()
            .filter(|(_, b)| b.len() >= 5)
            .map(|(i, b)| (i, b.iter().sum::<f64>() / b.len() as f64))
            .collect();
        assert!(means.len() >= 4, "need a spread of IoU bins, got {}", means.len());
        let rho = spearman(&means);
        assert!(rho > 0.8, "rank correlation {rho}");
    }

    fn spearman(pairs: &[(usize, f64)]) -> f64 {
        let n = pairs.len() as f64;
        let mut by_value: Vec<usize> = (0..pairs.len()).collect();
        by_value.sort_by(|&a, &b| pairs[a].1.partial_cmp(&pairs[b].1).unwrap());
        let mut rank = vec![0.0; pairs.len()];
        for (r, &i) in by_value.iter().enumerate() {
            rank[i] = r as f64;
        }
        // bins are already in increasing IoU order
        let mean = (n - 1.0) / 2.0;
        let mut num = 0.0;
        let mut da = 0.0;
        let mut db = 0.0;
        for (i, r) in rank.iter().enumerate() {
            let a = i as f64 - mean;
            let b = r - mean;
            num += a * b;
            da += a * a;
            db += b * b;
        }
        num / (da.sqrt() * db.sqrt())
    }

    #[test]
    fn epsilon_prunes_low_quality_at_generation() {
        let base = SynthConfig {
            include_oracle: true,
            ..small_config()
        };
        let pruned_cfg = SynthConfig {
            epsilon: 1.0,
            ..base.clone()
        };
        let ds = synth_generate(&pruned_cfg).unwrap();
        for v in &ds.videos {
            let (_, gt) = &v.ground_truth[0];
            for p in &v.proposals {
                assert!(tube_iou(p, gt) > 0.5);
            }
        }
        let full = synth_generate(&base).unwrap();
        assert!(full.videos[0].proposals.len() > ds.videos[0].proposals.len());
    }

    #[test]
    fn invalid_mixture_rejected() {
        let cfg = SynthConfig {
            overlap_mixture: 1.5,
            ..small_config()
        };
        assert!(synth_generate(&cfg).is_err());
    }
}
