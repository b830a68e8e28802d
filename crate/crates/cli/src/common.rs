use std::fmt;
use std::path::Path;

use ganmut_core::networks::ImageBatch;
use ndarray::{Array3, Axis};

/// Why a command stopped, mapped onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or inputs, detected before any side effect.
    Usage(String),
    /// An output exists and `--force` was not given.
    Overwrite(String),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Overwrite(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Overwrite(m) => write!(f, "{m} (pass --force to overwrite)"),
            Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<ganmut_core::Error> for Failure {
    fn from(e: ganmut_core::Error) -> Self {
        match e {
            ganmut_core::Error::Validation(_) | ganmut_core::Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type Outcome = Result<(), Failure>;

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub fn require_dir(path: &Path, what: &str) -> Outcome {
    if path.is_dir() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} is not a directory", path.display())))
    }
}

pub fn require_file(path: &Path, what: &str) -> Outcome {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} does not exist", path.display())))
    }
}

/// Refuses to replace an existing file unless forced.
pub fn guard_file(path: &Path, force: bool) -> Outcome {
    if path.exists() && !force {
        return Err(Failure::Overwrite(format!("{} already exists", path.display())));
    }
    Ok(())
}

/// Refuses to write into a non-empty directory unless forced.
pub fn guard_dir(path: &Path, force: bool) -> Outcome {
    let occupied = path.is_file() || std::fs::read_dir(path).map(|mut d| d.next().is_some()).unwrap_or(false);
    if occupied && !force {
        return Err(Failure::Overwrite(format!("{} is not empty", path.display())));
    }
    Ok(())
}

pub fn check_unit(value: f64, name: &str) -> Outcome {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(usage(format!("{name} must lie in [0, 1], got {value}")))
    }
}

pub fn stack(images: &[Array3<f64>]) -> Result<ImageBatch, Failure> {
    let views: Vec<_> = images.iter().map(|a| a.view()).collect();
    let data = ndarray::stack(Axis(0), &views).map_err(|e| usage(format!("cannot stack images: {e}")))?;
    Ok(ImageBatch::new(data)?)
}

/// `path.png` -> `path.json`.
pub fn sidecar(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}
