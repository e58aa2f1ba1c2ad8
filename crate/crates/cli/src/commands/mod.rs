pub mod answer;
pub mod build_dataset;
pub mod calibrate;
pub mod evaluate;
pub mod oracle_check;
pub mod train_scorer;
