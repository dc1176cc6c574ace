//! Label-distribution reports: friction histograms before and after the
//! balancing resample, as structured text and rendered charts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{friction_histogram, weighted_resample, DatasetManifest};
use crate::error::{CoreError, Result};
use crate::eval::render::{render_bar_chart, save_png};

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    /// Per-bin counts over the raw manifest labels.
    pub pre: Vec<usize>,
    /// Per-bin counts after drawing `resample_target` balanced samples.
    pub post: Vec<usize>,
    pub resample_target: usize,
    /// One line per bin: `[lo, hi) pre=a post=b`.
    pub text: String,
}

/// Ratio of the fullest to the emptiest occupied bin; 1.0 is perfectly flat.
pub fn occupancy_ratio(counts: &[usize]) -> f64 {
    let occupied: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    match (occupied.iter().max(), occupied.iter().min()) {
        (Some(&max), Some(&min)) => max as f64 / min as f64,
        _ => 1.0,
    }
}

pub fn histogram_report(
    manifest: &DatasetManifest,
    resample_target: usize,
    seed: u64,
) -> Result<HistogramReport> {
    if manifest.samples.is_empty() {
        return Err(CoreError::MissingData("manifest has no samples".into()));
    }
    let pre = friction_histogram(&manifest.samples, HISTOGRAM_BINS);
    let balanced = weighted_resample(&manifest.samples, HISTOGRAM_BINS, resample_target, seed)?;
    let post = friction_histogram(&balanced, HISTOGRAM_BINS);

    let mut text = String::new();
    for b in 0..HISTOGRAM_BINS {
        let lo = b as f64 / HISTOGRAM_BINS as f64;
        let hi = (b + 1) as f64 / HISTOGRAM_BINS as f64;
        text.push_str(&format!(
            "[{lo:.1}, {hi:.1}) pre={} post={}\n",
            pre[b], post[b]
        ));
    }
    Ok(HistogramReport {
        pre,
        post,
        resample_target,
        text,
    })
}

/// Write `pre.png`, `post.png` and `histogram.txt` under `out_dir`.
pub fn plot_histograms(
    manifest: &DatasetManifest,
    out_dir: &Path,
    resample_target: usize,
    seed: u64,
) -> Result<(HistogramReport, Vec<PathBuf>)> {
    let report = histogram_report(manifest, resample_target, seed)?;
    std::fs::create_dir_all(out_dir)?;
    let pre_png = out_dir.join("friction-histogram-pre.png");
    let post_png = out_dir.join("friction-histogram-post.png");
    let txt = out_dir.join("friction-histogram.txt");
    save_png(
        &render_bar_chart(&report.pre, "friction labels: raw"),
        &pre_png,
    )?;
    save_png(
        &render_bar_chart(&report.post, "friction labels: resampled"),
        &post_png,
    )?;
    std::fs::write(&txt, &report.text)?;
    Ok((report, vec![pre_png, post_png, txt]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use chrono::{TimeZone, Utc};

    use crate::dataset::{LabeledSample, Normalization, Split};
    use crate::synth::sample_frictions;

    /// Manifest with the given labels; images are never touched here.
    fn manifest_of(frictions: &[f64]) -> DatasetManifest {
        let samples = frictions
            .iter()
            .enumerate()
            .map(|(i, &f)| LabeledSample {
                image_ref: format!("img-{i:05}.png"),
                camera_station_id: "synth-cam-00".into(),
                weather_station_id: "synth-wx-00".into(),
                timestamp: Utc.with_ymd_and_hms(2026, 3, 1, 0, 0, 0).unwrap(),
                friction_factor: f,
            })
            .collect();
        let mut split_assignment = BTreeMap::new();
        split_assignment.insert("synth-cam-00".to_string(), Split::Train);
        DatasetManifest {
            samples,
            split_assignment,
            normalization: Normalization::identity(),
            seed: 0,
        }
    }

    #[test]
    fn counts_partition_the_sample_set() {
        let labels = sample_frictions(9, 500, 1.0);
        let manifest = manifest_of(&labels);
        let report = histogram_report(&manifest, 250, 1).unwrap();
        assert_eq!(report.pre.iter().sum::<usize>(), 500);
        assert_eq!(report.post.iter().sum::<usize>(), 250);
        assert_eq!(report.pre.len(), HISTOGRAM_BINS);
    }

    #[test]
    fn uniform_labels_give_a_near_flat_histogram() {
        // χ² with 9 degrees of freedom, critical value 21.666 at α = 0.01
        let labels = sample_frictions(4, 2000, 1.0);
        let report = histogram_report(&manifest_of(&labels), 1000, 1).unwrap();
        let expected = 2000.0 / HISTOGRAM_BINS as f64;
        let chi2: f64 = report
            .pre
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 21.666, "uniform labels rejected: chi^2 = {chi2:.2}");
    }

    #[test]
    fn text_counts_match_a_loop_counted_oracle() {
        let labels = sample_frictions(17, 700, 2.5);
        let manifest = manifest_of(&labels);
        let report = histogram_report(&manifest, 350, 3).unwrap();

        let mut oracle = [0usize; HISTOGRAM_BINS];
        for &f in &labels {
            let mut b = (f * 10.0) as usize;
            if b == 10 {
                b = 9;
            }
            oracle[b] += 1;
        }
        let parsed: Vec<usize> = report
            .text
            .lines()
            .map(|line| {
                let pre = line.split("pre=").nth(1).unwrap();
                pre.split_whitespace().next().unwrap().parse().unwrap()
            })
            .collect();
        assert_eq!(parsed, oracle, "emitted text disagrees with the loop count");
        let parsed_post: Vec<usize> = report
            .text
            .lines()
            .map(|line| line.split("post=").nth(1).unwrap().trim().parse().unwrap())
            .collect();
        assert_eq!(parsed_post, report.post);
    }

    #[test]
    fn resampling_flattens_a_skewed_distribution() {
        let labels = sample_frictions(8, 1500, 3.0);
        let report = histogram_report(&manifest_of(&labels), 750, 2).unwrap();
        let before = occupancy_ratio(&report.pre);
        let after = occupancy_ratio(&report.post);
        assert!(
            after < before,
            "resampling must flatten: ratio went {before:.2} -> {after:.2}"
        );
        assert!(before > 3.0, "cubic skew should start visibly imbalanced");
    }

    #[test]
    fn plots_are_written_and_deterministic() {
        let labels = sample_frictions(5, 300, 1.0);
        let manifest = manifest_of(&labels);
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let (report_a, paths_a) = plot_histograms(&manifest, dir_a.path(), 150, 4).unwrap();
        let (report_b, paths_b) = plot_histograms(&manifest, dir_b.path(), 150, 4).unwrap();
        assert_eq!(report_a, report_b);
        assert_eq!(paths_a.len(), 3);
        for (a, b) in paths_a.iter().zip(&paths_b) {
            let bytes_a = std::fs::read(a).unwrap();
            let bytes_b = std::fs::read(b).unwrap();
            assert!(!bytes_a.is_empty());
            assert_eq!(bytes_a, bytes_b, "artifacts must not depend on the directory");
        }
        assert!(paths_a[0].to_string_lossy().ends_with(".png"));
        let png = std::fs::read(&paths_a[0]).unwrap();
        assert_eq!(&png[..8], b"\x89PNG\r\n\x1a\n");
    }

    #[test]
    fn empty_manifest_is_rejected() {
        let manifest = manifest_of(&[]);
        assert!(histogram_report(&manifest, 10, 1).is_err());
    }
}
