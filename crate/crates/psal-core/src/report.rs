//! CSV emission. Every table starts with a versioned schema comment so
//! downstream scripts can detect format changes; floats print with six
//! decimals so identical runs produce identical bytes.

use crate::data::Dataset;
use crate::eval::DiagnosisCounts;
use crate::experiments::SweepRow;
use crate::pipeline::{DetectionRecord, EvalReport};
use crate::pseudo::{PseudoKind, PseudoWeight};

pub const SCHEMA_VERSION: u32 = 1;

fn header(name: &str) -> String {
    format!("# psal csv v{SCHEMA_VERSION}: {name}\n")
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

pub fn detections_csv(records: &[DetectionRecord], dataset: &Dataset) -> String {
    let mut out = header("detections");
    out.push_str("action,video,proposal,score\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            dataset.actions[r.action],
            r.video_id,
            r.proposal,
            fmt(r.score)
        ));
    }
    out
}

/// Parse a detections CSV back into records. The inverse of
/// [`detections_csv`].
pub fn parse_detections_csv(text: &str, dataset: &Dataset) -> crate::Result<Vec<DetectionRecord>> {
    let mut records = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with("action,") || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(crate::Error::InvalidConfig(format!(
                "detections row has {} fields: {line}",
                fields.len()
            )));
        }
        records.push(DetectionRecord {
            action: dataset.action_index(fields[0])?,
            video_id: fields[1].to_string(),
            proposal: fields[2]
                .parse()
                .map_err(|_| crate::Error::InvalidConfig(format!("bad proposal index: {line}")))?,
            score: fields[3]
                .parse()
                .map_err(|_| crate::Error::InvalidConfig(format!("bad score: {line}")))?,
        });
    }
    Ok(records)
}

pub fn per_action_ap_csv(report: &EvalReport, dataset: &Dataset) -> String {
    let mut out = header("per_action_ap");
    out.push_str("action,tau,ap,n_gt\n");
    for (action, tau, ap, n_gt) in &report.per_action {
        out.push_str(&format!(
            "{},{},{},{}\n",
            dataset.actions[*action],
            fmt(*tau),
            fmt(*ap),
            n_gt
        ));
    }
    out
}

pub fn summary_csv(report: &EvalReport) -> String {
    let mut out = header("summary");
    out.push_str("tau,map,auc\n");
    for (tau, map, auc) in &report.summary {
        let auc_str = auc.map(fmt).unwrap_or_else(|| "NA".into());
        out.push_str(&format!("{},{},{auc_str}\n", fmt(*tau), fmt(*map)));
    }
    out
}

pub fn diagnosis_csv(
    rows: &[(Option<usize>, f64, DiagnosisCounts)],
    dataset: &Dataset,
) -> String {
    let mut out = header("diagnosis");
    out.push_str(
        "action,tau,correct,localization,confusion,background_own,background_other,total\n",
    );
    for (action, tau, c) in rows {
        let name = action
            .map(|a| dataset.actions[a].as_str())
            .unwrap_or("all");
        out.push_str(&format!(
            "{name},{},{},{},{},{},{},{}\n",
            fmt(*tau),
            c.correct,
            c.localization,
            c.confusion,
            c.background_own,
            c.background_other,
            c.total()
        ));
    }
    out
}

pub fn sweep_csv(name: &str, value_column: &str, rows: &[SweepRow], with_lambda: bool) -> String {
    let mut out = header(name);
    out.push_str(value_column);
    if with_lambda {
        out.push_str(",lambda_p");
    }
    if let Some(first) = rows.first() {
        for (tau, _) in &first.maps {
            out.push_str(&format!(",map@{tau}"));
        }
    }
    out.push('\n');
    for row in rows {
        out.push_str(&row.label);
        if with_lambda {
            match row.lambda_p {
                Some(l) => out.push_str(&format!(",{}", fmt(l))),
                None => out.push_str(",NA"),
            }
        }
        for (_, map) in &row.maps {
            out.push_str(&format!(",{}", fmt(*map)));
        }
        out.push('\n');
    }
    out
}

pub fn pseudo_weights_csv(weights: &[PseudoWeight]) -> String {
    let mut out = header("pseudo_weights");
    out.push_str("kind,lambda_p\n");
    for w in weights {
        out.push_str(&format!("{},{}\n", w.kind.name(), fmt(w.lambda_p)));
    }
    out
}

pub fn degenerate_frames_csv(flags: &[(String, PseudoKind, u32)]) -> String {
    let mut out = header("pseudo_degenerate_frames");
    out.push_str("video,kind,frame\n");
    for (video, kind, frame) in flags {
        out.push_str(&format!("{video},{},{frame}\n", kind.name()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthConfig};

    #[test]
    fn detections_csv_round_trips() {
        let cfg = SynthConfig {
            seed: 5,
            n_actions: 2,
            train_videos_per_action: 2,
            test_videos_per_action: 2,
            frames_per_video: 12,
            proposals_per_video: 8,
            ..Default::default()
        };
        let ds = synth_generate(&cfg).unwrap();
        let records = vec![
            DetectionRecord {
                action: 0,
                video_id: ds.test_videos().next().unwrap().id.clone(),
                proposal: 3,
                score: -0.125,
            },
            DetectionRecord {
                action: 1,
                video_id: ds.test_videos().nth(1).unwrap().id.clone(),
                proposal: 0,
                score: 1.5,
            },
        ];
        let csv = detections_csv(&records, &ds);
        let back = parse_detections_csv(&csv, &ds).unwrap();
        assert_eq!(back, records);
    }
}
