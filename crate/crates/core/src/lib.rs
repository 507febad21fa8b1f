//! Correlation networks of exchange rates seen from a chosen base currency.
//!
//! The pipeline runs from a [`RatePanel`] of quote-denominated rates to
//! base-relative cross rates, normalized log returns, a Pearson
//! [`CorrelationNetwork`], its minimal [`SpanningTree`] and a
//! [`MetricsReport`]. The [`rolling`] module repeats this over sliding
//! windows or date blocks and tracks edge survival between windows.

pub mod config;
pub mod correlation;
pub mod currency;
pub mod error;
pub mod export;
pub mod fetch;
pub mod ingest;
pub mod metrics;
pub mod mst;
pub mod returns;
pub mod rolling;
pub mod synth;

pub use correlation::{correlation_matrix, distance, CorrelationNetwork};
pub use currency::CurrencyCode;
pub use error::{Error, Result};
pub use ingest::{cross_rates, parse_panel, IngestOptions, RatePanel};
pub use metrics::{metrics_report, MetricsReport};
pub use mst::{build_mst, SpanningTree};
pub use returns::{return_matrix, ReturnMatrix};
pub use rolling::{rolling_metrics, survival_curves, SurvivalSeries, WindowSpec};
pub use synth::{generate_panel, BlockModelSpec, BlockSpec};
