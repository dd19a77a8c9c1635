//! Video-level score aggregation and rank-based AUC.

use crate::error::{Result, SbiError};

/// Neutral score for videos in which no frame has a detected face.
pub const NO_FACE_SCORE: f64 = 0.5;

/// Per-frame fakeness confidences, one per detected face. Empty means no face.
pub type FrameScores = Vec<f64>;

/// Max over faces within a frame, mean over frames that have a face, and
/// [`NO_FACE_SCORE`] when no frame has one.
///
/// Frame maxima are summed in sorted order, so the result does not depend on
/// frame order even in the last bit.
pub fn aggregate_video_score(frames: &[FrameScores]) -> Result<f64> {
    let mut per_frame = Vec::with_capacity(frames.len());
    for (i, faces) in frames.iter().enumerate() {
        if let Some(c) = faces.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(SbiError::Validation(format!(
                "frame {i}: confidence {c} outside [0, 1]"
            )));
        }
        if let Some(max) = faces.iter().copied().reduce(f64::max) {
            per_frame.push(max);
        }
    }
    if per_frame.is_empty() {
        return Ok(NO_FACE_SCORE);
    }
    per_frame.sort_by(f64::total_cmp);
    Ok(per_frame.iter().sum::<f64>() / per_frame.len() as f64)
}

/// Area under the ROC curve via the rank-sum statistic; tied scores
/// contribute one half.
pub fn compute_auc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(SbiError::Validation(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(SbiError::Validation("scores must not be NaN".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(SbiError::UndefinedMetric(format!(
            "AUC needs both classes, got {positives} positive and {negatives} negative"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of 1-based mid-ranks of the positives, accumulated in half-units
    // so ties stay exact.
    let mut rank_sum_x2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid_x2 = (i + 1 + j + 1) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        rank_sum_x2 += mid_x2 * pos_in_group;
        i = j + 1;
    }
    let (p, n) = (positives as u128, negatives as u128);
    let u_x2 = rank_sum_x2 - p * (p + 1);
    Ok(u_x2 as f64 / (2 * p * n) as f64)
}
