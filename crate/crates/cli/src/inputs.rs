//! Input resolution: spaces, measures, probe fields, and default lines.

use mms_core::calculus::ScalarField;
use mms_core::formats;
use mms_core::space::{GeneratorSpec, MetricMeasureSpace};
use mms_core::splitting::LineSpec;
use mms_core::transport::ProbMeasure;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

pub struct LoadedSpace {
    pub space: MetricMeasureSpace,
    /// Present when the space came from a generator descriptor; used to
    /// derive canonical lines.
    pub generator: Option<GeneratorSpec>,
}

/// `--space` accepts a JSON file path, an inline JSON document, or (with
/// `--weights`) a CSV distance matrix.
pub fn load_space(arg: &str, weights: Option<&str>) -> Result<LoadedSpace, String> {
    if let Some(wpath) = weights {
        let space = formats::space_from_csv(Path::new(arg), Path::new(wpath))
            .map_err(|e| e.to_string())?;
        return Ok(LoadedSpace { space, generator: None });
    }
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| format!("read {arg}: {e}"))?
    };
    let space = formats::space_from_json(&text).map_err(|e| e.to_string())?;
    let generator = extract_generator(&text);
    Ok(LoadedSpace { space, generator })
}

fn extract_generator(text: &str) -> Option<GeneratorSpec> {
    let doc: serde_json::Value = serde_json::from_str(text).ok()?;
    let gen = doc.get("dist")?.get("generator")?;
    serde_json::from_value(gen.clone()).ok()
}

/// `--mu` / `--nu` accept `dirac:IDX`, `uniform`, `uniform:A..B` (index
/// range, inclusive-exclusive), or a measure file path.
pub fn load_measure(space: &MetricMeasureSpace, arg: &str) -> Result<ProbMeasure, String> {
    if let Some(idx) = arg.strip_prefix("dirac:") {
        let i: usize = idx.parse().map_err(|e| format!("bad dirac index: {e}"))?;
        if i >= space.n() {
            return Err(format!("dirac index {i} out of range (n = {})", space.n()));
        }
        return ProbMeasure::dirac(space, i).map_err(|e| e.to_string());
    }
    if arg == "uniform" {
        return ProbMeasure::uniform(space).map_err(|e| e.to_string());
    }
    if let Some(range) = arg.strip_prefix("uniform:") {
        let (a, b) = range
            .split_once("..")
            .ok_or_else(|| format!("bad range '{range}', expected A..B"))?;
        let a: usize = a.parse().map_err(|e| format!("bad range start: {e}"))?;
        let b: usize = b.parse().map_err(|e| format!("bad range end: {e}"))?;
        if a >= b || b > space.n() {
            return Err(format!("range {a}..{b} invalid for n = {}", space.n()));
        }
        let ids: Vec<usize> = (a..b).collect();
        return ProbMeasure::uniform_on(space, &ids).map_err(|e| e.to_string());
    }
    formats::read_measure(space, Path::new(arg)).map_err(|e| e.to_string())
}

#[derive(serde::Deserialize)]
struct LineDoc {
    indices: Vec<usize>,
    times: Vec<f64>,
}

/// The line for splitting tasks: an explicit `--line` JSON file, or the
/// canonical line of the generator the space came from.
pub fn resolve_line(
    loaded: &LoadedSpace,
    line_path: Option<&str>,
    line_tol: f64,
) -> Result<LineSpec, String> {
    if let Some(path) = line_path {
        let text = std::fs::read_to_string(path).map_err(|e| format!("read {path}: {e}"))?;
        let doc: LineDoc =
            serde_json::from_str(&text).map_err(|e| format!("parse {path}: {e}"))?;
        return LineSpec::new(&loaded.space, doc.indices, doc.times, line_tol)
            .map_err(|e| e.to_string());
    }
    let (indices, times) = derive_line(loaded)
        .ok_or("no --line given and the space has no canonical line; supply one")?;
    LineSpec::new(&loaded.space, indices, times, line_tol).map_err(|e| e.to_string())
}

fn derive_line(loaded: &LoadedSpace) -> Option<(Vec<usize>, Vec<f64>)> {
    let space = &loaded.space;
    match loaded.generator.as_ref()? {
        GeneratorSpec::Product { base: _, interval, h } => {
            // the fiber of base point 0: indices 0..levels
            let levels = ((interval[1] - interval[0]) / h).round() as usize + 1;
            let indices: Vec<usize> = (0..levels).collect();
            let times: Vec<f64> = (0..levels).map(|k| interval[0] + h * k as f64).collect();
            Some((indices, times))
        }
        GeneratorSpec::NormedPlane { side, h, .. } => {
            // the centered coordinate line along the middle row
            let per_axis = (side / h).round() as usize + 1;
            let mid = per_axis / 2;
            let indices: Vec<usize> = (0..per_axis).map(|ix| ix * per_axis + mid).collect();
            let times: Vec<f64> =
                (0..per_axis).map(|ix| h * ix as f64 - side / 2.0).collect();
            Some((indices, times))
        }
        GeneratorSpec::EuclideanGrid { dims, h } if dims.len() == 1 => {
            let indices: Vec<usize> = (0..dims[0]).collect();
            let mid = (dims[0] - 1) as f64 / 2.0;
            let times: Vec<f64> = (0..dims[0]).map(|k| h * (k as f64 - mid)).collect();
            Some((indices, times))
        }
        GeneratorSpec::EuclideanGrid { dims, h } if dims.len() == 2 => {
            let (nx, ny) = (dims[0], dims[1]);
            let mid = ny / 2;
            let indices: Vec<usize> = (0..nx).map(|ix| ix * ny + mid).collect();
            let half = (nx - 1) as f64 / 2.0;
            let times: Vec<f64> = (0..nx).map(|ix| h * (ix as f64 - half)).collect();
            Some((indices, times))
        }
        GeneratorSpec::Cone { radius, h, .. } => {
            // the theta = 0 ray: apex, then the first angular slot
            let n_r = (radius / h).round() as usize;
            let mut indices = vec![0usize];
            indices.extend(1..=n_r);
            let times: Vec<f64> = (0..=n_r).map(|k| h * k as f64).collect();
            Some((indices, times))
        }
        _ => {
            let _ = space;
            None
        }
    }
}

/// Deterministic smooth probe from the seed (low-frequency coordinate
/// harmonics).
pub fn seeded_probe(space: &MetricMeasureSpace, seed: u64, amplitude: f64) -> Option<ScalarField> {
    space.points()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(0.3..1.2),
                rng.random_range(0.3..1.2),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    ScalarField::from_fn(space, |i| {
        let x = space.coord(i, 0).unwrap_or(0.0);
        let y = space.coord(i, 1).unwrap_or(0.0);
        amplitude
            * coeffs
                .iter()
                .map(|(a, kx, ky, ph)| a * (kx * x + ky * y + ph).sin())
                .sum::<f64>()
    })
    .ok()
}
