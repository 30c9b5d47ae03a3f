//! Chain-of-thought traces, state rendering and dataset serialization.

pub mod dataset;
pub mod glyph;
pub mod raster;
pub mod render;
pub mod trace;

use thiserror::Error;

use crate::envs::EnvError;

pub use raster::{Paint, RasterImage};
pub use render::{decode, render, BallView, MazeView, StateView};
pub use trace::{build_cot, input_states, BuiltCot, CotSegment, CotTrace, WmFormat};

#[derive(Debug, Error)]
pub enum CotError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("cannot render: {0}")]
    Render(String),
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("png: {0}")]
    Png(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CotError>;
