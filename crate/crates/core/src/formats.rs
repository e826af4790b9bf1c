//! File formats: the space JSON document, CSV import, measure files, and
//! the CSV emitters used for plot data.
//!
//! Distances are serialized with 17 significant digits so the stored decimal
//! reconstructs every f64 bit-exactly.

use crate::error::{Error, Result};
use crate::space::{generate_space, GeneratorSpec, MetricMeasureSpace};
use crate::transport::{Coupling, ProbMeasure};
use serde::Deserialize;
use serde_json::value::RawValue;
use std::io::Write;
use std::path::Path;

fn io_err(context: &str) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { context: context.to_string(), source }
}

fn json_err(context: &str) -> impl FnOnce(serde_json::Error) -> Error + '_ {
    move |source| Error::Json { context: context.to_string(), source }
}

/// Formats a float with enough digits to round-trip exactly.
pub fn full_precision(v: f64) -> String {
    format!("{v:.16e}")
}

fn number_array(values: &[f64]) -> Vec<Box<RawValue>> {
    values
        .iter()
        .map(|v| RawValue::from_string(full_precision(*v)).expect("valid json number"))
        .collect()
}

#[derive(serde::Serialize)]
struct SpaceDoc<'a> {
    label: &'a str,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<Vec<Vec<f64>>>,
    dist: Vec<Box<RawValue>>,
    weight: Vec<Box<RawValue>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    resolution: Option<f64>,
}

/// Writes a space as a single JSON document with the row-major distance
/// matrix inline.
pub fn write_space(space: &MetricMeasureSpace, path: &Path) -> Result<()> {
    let doc = SpaceDoc {
        label: space.label(),
        n: space.n(),
        points: space.points().map(|p| p.to_vec()),
        dist: number_array(space.dist_matrix()),
        weight: number_array(space.weights()),
        resolution: space.resolution(),
    };
    let text = serde_json::to_string_pretty(&doc).map_err(json_err("serialize space"))?;
    std::fs::write(path, text).map_err(io_err(&format!("write {}", path.display())))
}

#[derive(Deserialize)]
struct SpaceDocIn {
    label: Option<String>,
    n: Option<usize>,
    points: Option<Vec<Vec<f64>>>,
    dist: DistIn,
    weight: Option<Vec<f64>>,
    resolution: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DistIn {
    Matrix(Vec<f64>),
    Generator { generator: GeneratorSpec },
}

/// Parses a space document: either an inline distance matrix plus weights,
/// or `{"dist": {"generator": ...}}`, in which case the generator is
/// materialized and the other fields are cross-checked when present.
pub fn space_from_json(text: &str) -> Result<MetricMeasureSpace> {
    let doc: SpaceDocIn = serde_json::from_str(text).map_err(json_err("parse space document"))?;
    match doc.dist {
        DistIn::Generator { generator } => {
            let space = generate_space(&generator)?;
            if let Some(n) = doc.n {
                if n != space.n() {
                    return Err(Error::ShapeMismatch(format!(
                        "document says n = {n}, generator yields {}",
                        space.n()
                    )));
                }
            }
            Ok(space)
        }
        DistIn::Matrix(dist) => {
            let weight = doc
                .weight
                .ok_or_else(|| Error::Format("space document with a matrix needs weights".into()))?;
            let label = doc.label.unwrap_or_else(|| "unnamed".into());
            MetricMeasureSpace::from_parts(label, dist, weight, doc.points, doc.resolution)
        }
    }
}

/// Loads a space from a JSON file.
pub fn read_space(path: &Path) -> Result<MetricMeasureSpace> {
    let text =
        std::fs::read_to_string(path).map_err(io_err(&format!("read {}", path.display())))?;
    space_from_json(&text)
}

/// CSV import: an `n x n` distance matrix file plus a weight column file.
pub fn space_from_csv(dist_path: &Path, weight_path: &Path) -> Result<MetricMeasureSpace> {
    let parse = |path: &Path| -> Result<Vec<Vec<f64>>> {
        let text =
            std::fs::read_to_string(path).map_err(io_err(&format!("read {}", path.display())))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                line.split(',')
                    .map(|cell| {
                        cell.trim().parse::<f64>().map_err(|e| {
                            Error::Format(format!("{}: bad number {cell:?}: {e}", path.display()))
                        })
                    })
                    .collect()
            })
            .collect()
    };
    let rows = parse(dist_path)?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Format("distance matrix is not square".into()));
    }
    let dist: Vec<f64> = rows.into_iter().flatten().collect();
    let weight: Vec<f64> = parse(weight_path)?.into_iter().flatten().collect();
    if weight.len() != n {
        return Err(Error::Format(format!("{} weights for {} points", weight.len(), n)));
    }
    MetricMeasureSpace::from_parts(
        dist_path.file_stem().and_then(|s| s.to_str()).unwrap_or("csv"),
        dist,
        weight,
        None,
        None,
    )
}

#[derive(serde::Serialize, Deserialize)]
struct MeasureDoc {
    space_ref: String,
    density: Vec<f64>,
}

/// Writes a measure as `{"space_ref", "density"}`.
pub fn write_measure(
    space: &MetricMeasureSpace,
    measure: &ProbMeasure,
    path: &Path,
) -> Result<()> {
    let doc = MeasureDoc {
        space_ref: space.label().to_string(),
        density: measure.density().to_vec(),
    };
    let text = serde_json::to_string_pretty(&doc).map_err(json_err("serialize measure"))?;
    std::fs::write(path, text).map_err(io_err(&format!("write {}", path.display())))
}

/// Reads a measure file and binds it to the given space; the `space_ref`
/// label must match.
pub fn read_measure(space: &MetricMeasureSpace, path: &Path) -> Result<ProbMeasure> {
    let text =
        std::fs::read_to_string(path).map_err(io_err(&format!("read {}", path.display())))?;
    let doc: MeasureDoc = serde_json::from_str(&text).map_err(json_err("parse measure"))?;
    if doc.space_ref != space.label() {
        return Err(Error::MismatchedSpaces {
            left: space.label().to_string(),
            right: doc.space_ref,
        });
    }
    ProbMeasure::from_density(space, doc.density)
}

/// Writes a scalar field as a plain JSON vector.
pub fn write_field(field: &crate::calculus::ScalarField, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&field.values).map_err(json_err("serialize field"))?;
    std::fs::write(path, text).map_err(io_err(&format!("write {}", path.display())))
}

/// Reads a scalar field (JSON vector) and binds it to the space.
pub fn read_field(
    space: &MetricMeasureSpace,
    path: &Path,
) -> Result<crate::calculus::ScalarField> {
    let text =
        std::fs::read_to_string(path).map_err(io_err(&format!("read {}", path.display())))?;
    let values: Vec<f64> = serde_json::from_str(&text).map_err(json_err("parse field"))?;
    crate::calculus::ScalarField::new(space, values)
}

/// Exports a coupling as sparse triplet CSV `i,j,mass`.
pub fn write_coupling_csv(coupling: &Coupling, path: &Path) -> Result<()> {
    let mut out = String::from("i,j,mass\n");
    for (i, j, m) in coupling.support() {
        out.push_str(&format!("{i},{j},{}\n", full_precision(m)));
    }
    std::fs::write(path, out).map_err(io_err(&format!("write {}", path.display())))
}

/// Writes a generic CSV table with full-precision numbers.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(&format!("create {}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{}", header.join(",")).map_err(io_err("write csv header"))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| full_precision(*v)).collect();
        writeln!(w, "{}", line.join(",")).map_err(io_err("write csv row"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::PNorm;

    #[test]
    fn space_roundtrip_is_bit_exact() {
        let space = generate_space(&GeneratorSpec::NormedPlane {
            p: PNorm::Finite(1.5),
            side: 0.4,
            h: 0.2,
        })
        .unwrap();
        let dir = std::env::temp_dir().join(format!("mms-fmt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("space.json");
        write_space(&space, &path).unwrap();
        let loaded = read_space(&path).unwrap();
        assert_eq!(loaded.n(), space.n());
        for (a, b) in loaded.dist_matrix().iter().zip(space.dist_matrix()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in loaded.weights().iter().zip(space.weights()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn generator_document_materializes() {
        let text = r#"{"dist": {"generator": {"type": "euclidean_grid", "dims": [3, 3], "h": 1.0}}}"#;
        let space = space_from_json(text).unwrap();
        assert_eq!(space.n(), 9);
        assert!(space.validate().is_empty());
    }

    #[test]
    fn measure_roundtrip_checks_label() {
        let space = generate_space(&GeneratorSpec::EuclideanGrid { dims: vec![4], h: 1.0 }).unwrap();
        let mu = ProbMeasure::uniform(&space).unwrap();
        let dir = std::env::temp_dir().join(format!("mms-meas-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mu.json");
        write_measure(&space, &mu, &path).unwrap();
        let back = read_measure(&space, &path).unwrap();
        assert_eq!(back.density(), mu.density());
        let other = generate_space(&GeneratorSpec::EuclideanGrid { dims: vec![5], h: 1.0 }).unwrap();
        assert!(read_measure(&other, &path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn field_roundtrip() {
        let space = generate_space(&GeneratorSpec::EuclideanGrid { dims: vec![3], h: 1.0 }).unwrap();
        let field =
            crate::calculus::ScalarField::from_fn(&space, |i| i as f64 * 0.5 - 0.3).unwrap();
        let dir = std::env::temp_dir().join(format!("mms-field-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("field.json");
        write_field(&field, &path).unwrap();
        let back = read_field(&space, &path).unwrap();
        assert_eq!(back.values, field.values);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn csv_import() {
        let dir = std::env::temp_dir().join(format!("mms-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let dpath = dir.join("dist.csv");
        let wpath = dir.join("weights.csv");
        std::fs::write(&dpath, "0,1,2\n1,0,1\n2,1,0\n").unwrap();
        std::fs::write(&wpath, "1\n1\n1\n").unwrap();
        let space = space_from_csv(&dpath, &wpath).unwrap();
        assert_eq!(space.n(), 3);
        assert!(space.validate().is_empty());
        std::fs::remove_dir_all(&dir).ok();
    }
}
