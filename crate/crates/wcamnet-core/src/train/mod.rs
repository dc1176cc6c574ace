//! Training protocol: loss, optimizer, schedules, recipes, grid search.

mod gridsearch;
mod loss;
mod optimizer;
mod report;
mod schedule;
mod trainer;

pub use gridsearch::{grid_search, select_best, GridCell, DEFAULT_LRS, DEFAULT_WDS};
pub use loss::{mse_loss, mse_loss_with_grad};
pub use optimizer::Sgd;
pub use report::{EpochRecord, RunReport};
pub use schedule::{ScheduleKind, ScheduleSpec};
pub use trainer::{load_checkpoint_into, predict_stream, save_checkpoint, train, TrainConfig};
