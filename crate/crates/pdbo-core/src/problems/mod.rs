//! Built-in problem instances.

mod hyperopt;
mod quadratic;
mod toys;

pub use hyperopt::{
    load_hyperopt, parse_labeled_csv, Dataset, HyperOpt, HyperOptOptions, BUNDLED_TRAIN_CSV, BUNDLED_VAL_CSV,
};
pub use quadratic::strongly_convex_quadratic;
pub use toys::{toy1, toy1_smoothed_inner, toy2};
