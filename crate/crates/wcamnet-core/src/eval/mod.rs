//! Metrics, split evaluation, benchmark and ablation tables, token-PCA
//! visualization, and label-histogram rendering.

pub mod ablation;
pub mod benchmark;
pub mod histogram;
mod metrics;
pub mod pca;
pub mod render;
mod report;

pub use ablation::{ablation_variants, run_ablations, AblationRow, AblationTable};
pub use benchmark::{benchmark_recipes, run_benchmark, BenchmarkRow, BenchmarkTable};
pub use histogram::{
    histogram_report, occupancy_ratio, plot_histograms, HistogramReport, HISTOGRAM_BINS,
};
pub use metrics::{mae, rmse};
pub use pca::{pca_to_image, pca_token_visualization, pca_top3, PcaDecomposition, TokenPca};
pub use render::{render_bar_chart, render_text_lines, save_png};
pub use report::{evaluate, MetricsReport, FULL_SCALE_REFERENCE};
