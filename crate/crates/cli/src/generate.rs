use std::f64::consts::TAU;
use std::path::PathBuf;

use anyhow::Context;
use ganmut_core::datapipe::load_image;
use ganmut_core::emotion_space::{label_for_code, EmotionCode, EmotionLabel};
use ganmut_core::metrics::intensity_ladder;
use ganmut_core::networks::ImageBatch;
use ganmut_core::render::tile_rows;
use ganmut_core::trainer::{generate_batch, load_checkpoint};
use serde_json::json;

use crate::common::{guard_file, require_file, sidecar, stack, usage, Outcome};

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Every label at full intensity; neutral at the origin.
    Grid,
    /// Intensity ladder along one emotion direction.
    Interpolate,
    /// Rings of increasing intensity over evenly spaced angles.
    Gamut,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(value_enum)]
    mode: Mode,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Source faces; one block of rows per input.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Output PNG; tile codes go to the JSON file next to it.
    #[arg(long)]
    out: PathBuf,
    /// Emotion name for `interpolate`.
    #[arg(long)]
    emotion: Option<String>,
    /// Pixels between tiles.
    #[arg(long, default_value_t = 2)]
    gap: u32,
    #[arg(long, default_value_t = 4)]
    rings: usize,
    #[arg(long, default_value_t = 12)]
    sectors: usize,
    #[arg(long)]
    force: bool,
}

struct Tile {
    input: usize,
    code: EmotionCode,
}

pub fn run(a: Args) -> Outcome {
    require_file(&a.checkpoint, "checkpoint")?;
    for p in &a.input {
        require_file(p, "input")?;
    }
    if a.mode == Mode::Gamut && (a.rings == 0 || a.sectors == 0) {
        return Err(usage("--rings and --sectors must be positive"));
    }
    if a.mode != Mode::Interpolate && a.emotion.is_some() {
        return Err(usage("--emotion only applies to interpolate"));
    }
    let meta_path = sidecar(&a.out);
    guard_file(&a.out, a.force)?;
    guard_file(&meta_path, a.force)?;

    let state = load_checkpoint(&a.checkpoint)?;
    let table = &state.table;
    let labels = table.labels();
    let rows_per_input: Vec<Vec<EmotionCode>> = match a.mode {
        Mode::Grid => vec![labels
            .labels()
            .map(|l| match table.direction(l) {
                Some(theta) => EmotionCode::new(theta, 1.0),
                None => Ok(EmotionCode::ORIGIN),
            })
            .collect::<Result<_, _>>()?],
        Mode::Interpolate => {
            let name = a
                .emotion
                .as_deref()
                .ok_or_else(|| usage("interpolate needs --emotion"))?;
            let label = labels.by_name(name).ok_or_else(|| {
                usage(format!(
                    "unknown emotion `{name}` (known: {})",
                    labels.names().join(", ")
                ))
            })?;
            let theta = table
                .direction(label)
                .ok_or_else(|| usage(format!("`{name}` has no direction to interpolate along")))?;
            vec![intensity_ladder()
                .into_iter()
                .map(|rho| EmotionCode::new(theta, rho))
                .collect::<Result<_, _>>()?]
        }
        Mode::Gamut => (1..=a.rings)
            .map(|r| {
                (0..a.sectors)
                    .map(|s| EmotionCode::new(TAU * s as f64 / a.sectors as f64, r as f64 / a.rings as f64))
                    .collect::<Result<_, _>>()
            })
            .collect::<Result<_, _>>()?,
    };

    let size = state.model_config().image_size;
    let mut rows = Vec::new();
    let mut tiles: Vec<Vec<Tile>> = Vec::new();
    for (i, path) in a.input.iter().enumerate() {
        let face = load_image(path, size)?;
        for codes in &rows_per_input {
            let sources = stack(&vec![face.clone(); codes.len()])?;
            rows.push(generate_batch(&state.generator, &sources, codes, 16)?);
            tiles.push(codes.iter().map(|&code| Tile { input: i, code }).collect());
        }
    }
    write_outputs(
        &a,
        &rows,
        &tiles,
        |code| label_for_code(table, code),
        |l| labels.name(l).unwrap_or("?").to_string(),
    )?;
    log::info!("wrote {} rows to {}", rows.len(), a.out.display());
    Ok(())
}

fn write_outputs(
    a: &Args,
    rows: &[ImageBatch],
    tiles: &[Vec<Tile>],
    decode: impl Fn(EmotionCode) -> EmotionLabel,
    name: impl Fn(EmotionLabel) -> String,
) -> Outcome {
    let canvas = tile_rows(rows, a.gap)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    canvas
        .save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let meta = json!({
        "mode": format!("{:?}", a.mode).to_lowercase(),
        "checkpoint": a.checkpoint.display().to_string(),
        "inputs": a.input.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "image_size": rows[0].image_size(),
        "gap": a.gap,
        "rows": tiles.iter().map(|row| row.iter().map(|t| json!({
            "input": t.input,
            "theta": t.code.theta(),
            "rho": t.code.rho(),
            "label": name(decode(t.code)),
        })).collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    let path = sidecar(&a.out);
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&meta).context("encoding metadata")? + "\n",
    )
    .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
