//! Forecasting and outbreak-classification engine for weekly disease surveillance.

pub mod timeseries;
pub mod arima;
pub mod ingest;
pub mod lstm;
pub mod synthetic;
pub mod classify;
