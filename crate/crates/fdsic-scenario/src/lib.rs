//! Flexible-duplex SIC scenarios: configuration, end-to-end runs,
//! reports and the reference checks behind `fdsic validate`.

pub mod config;
pub mod report;
pub mod run;
pub mod validate;

pub use config::{Canceller, DuplexPreset, ScenarioSpec};
pub use report::{emit_report, residual_cdf, sicr, Format, MetricsReport};
pub use run::run_scenario;
pub use validate::Check;
