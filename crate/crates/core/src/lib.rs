pub mod annotate;
pub mod config;
pub mod evalkbp;
pub mod fairness;
pub mod graph;
pub mod ingest;
pub mod linkpred;
pub mod inventory;
pub mod numcore;
pub mod pipeline;
pub mod sketch;
pub mod synth;
pub mod table;
pub mod text;
