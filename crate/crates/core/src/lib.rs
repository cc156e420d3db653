//! Scientometric assessment of autonomous-driving datasets.
//!
//! The crate covers the whole pipeline:
//!
//! * [`ingest`] pulls dataset metadata, the citation graph and online
//!   attention data into a [`corpus::Snapshot`],
//! * [`metrics`] computes the per-dataset feature vectors (h3-indices,
//!   windowed citations, attention, size),
//! * [`influence`] turns features into peer-group percentiles and the
//!   Influence Score,
//! * [`regression`] fits the early-citation model with robust errors and
//!   diagnostics,
//! * [`cluster`] groups citation trajectories with k-means.
//!
//! Only [`ingest`] performs network I/O.

pub mod cli;
pub mod cluster;
pub mod corpus;
pub mod influence;
pub mod ingest;
pub mod metrics;
pub mod regression;
pub mod synth;
