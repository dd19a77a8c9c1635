use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use sbi_forge::scoring::{aggregate_video_score, compute_auc};
use serde::{Deserialize, Serialize};

use crate::{write_json, ScoreArgs, EXIT_OK};

#[derive(Debug, Deserialize)]
struct FaceRecord {
    video_id: String,
    frame_index: u64,
    /// Empty for a frame without a detected face.
    confidence: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct LabelRecord {
    video_id: String,
    label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoScore {
    pub video_id: String,
    pub frames: usize,
    pub frames_with_face: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub videos: Vec<VideoScore>,
    /// Present when labels were supplied.
    pub auc: Option<f64>,
}

fn read_faces(path: &Path) -> anyhow::Result<BTreeMap<String, BTreeMap<u64, Vec<f64>>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut videos: BTreeMap<String, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for (i, row) in reader.deserialize::<FaceRecord>().enumerate() {
        let row = row.with_context(|| format!("{}: record {}", path.display(), i + 1))?;
        let faces = videos.entry(row.video_id).or_default().entry(row.frame_index).or_default();
        if let Some(c) = row.confidence {
            faces.push(c);
        }
    }
    Ok(videos)
}

fn read_labels(path: &Path) -> anyhow::Result<BTreeMap<String, bool>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut labels = BTreeMap::new();
    for (i, row) in reader.deserialize::<LabelRecord>().enumerate() {
        let row = row.with_context(|| format!("{}: record {}", path.display(), i + 1))?;
        if row.label > 1 {
            bail!("{}: record {}: label must be 0 or 1", path.display(), i + 1);
        }
        labels.insert(row.video_id, row.label == 1);
    }
    Ok(labels)
}

/// Aggregates per-face confidences into per-video scores and, given labels,
/// the video-level AUC.
pub fn run_score(input: &Path, labels: Option<&Path>) -> anyhow::Result<ScoreReport> {
    let faces = read_faces(input)?;
    let mut videos = Vec::with_capacity(faces.len());
    for (video_id, frames) in faces {
        let frames: Vec<Vec<f64>> = frames.into_values().collect();
        let score = aggregate_video_score(&frames).with_context(|| format!("video {video_id}"))?;
        videos.push(VideoScore {
            frames: frames.len(),
            frames_with_face: frames.iter().filter(|f| !f.is_empty()).count(),
            video_id,
            score,
        });
    }
    let auc = match labels {
        None => None,
        Some(path) => {
            let labels = read_labels(path)?;
            let mut y = Vec::with_capacity(videos.len());
            for v in &videos {
                match labels.get(&v.video_id) {
                    Some(&l) => y.push(l),
                    None => bail!("no label for video {}", v.video_id),
                }
            }
            let scores: Vec<f64> = videos.iter().map(|v| v.score).collect();
            Some(compute_auc(&y, &scores)?)
        }
    };
    Ok(ScoreReport { videos, auc })
}

pub(crate) fn command(args: &ScoreArgs) -> anyhow::Result<i32> {
    let report = run_score(&args.input, args.labels.as_deref())?;
    let sink: Box<dyn std::io::Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["video_id", "score"])?;
    for v in &report.videos {
        w.write_record([v.video_id.as_str(), &v.score.to_string()])?;
    }
    w.flush()?;
    if let Some(path) = &args.summary {
        write_json(path, &report)?;
    }
    eprintln!("{} videos", report.videos.len());
    if let Some(auc) = report.auc {
        eprintln!("AUC {auc:.6}");
    }
    Ok(EXIT_OK)
}
