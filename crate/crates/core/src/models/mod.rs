//! Lin, FFNN and BiRNN predictors of loudness from basis functions, their
//! training, per-performance fitting and persistence.

mod model;
mod nets;
mod params;
mod train;

pub use model::{fit_to_performance, train, train_with_rng, write_training_log, Model, PieceRef, Vocabulary};
pub use nets::{BirnnParams, FfnnParams, LinParams, RnnCell};
pub use params::{ModelKind, Params, Tensor};
pub use train::{
    active_columns, fit_params, mse_loss, objective, objective_gradient, pooled_mse, solve_ridge,
    train_params, EpochRecord, OptimizerKind, Piece, TrainConfig, TrainingLog,
};
