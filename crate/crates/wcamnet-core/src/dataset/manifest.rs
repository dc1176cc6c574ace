//! Line-delimited manifest serialization.
//!
//! A `#`-prefixed header block (version, seed, interpolation, train-split
//! normalization) followed by one tab-separated record per sample:
//! image path, camera station, weather station, RFC 3339 timestamp at
//! second precision, friction factor at six decimals, split tag. Output is
//! canonical: the same manifest always serializes to identical bytes.

use std::io::{self, BufRead, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use crate::error::{CoreError, Result};

use super::{DatasetManifest, LabeledSample, Normalization, Split};

pub const MANIFEST_VERSION: u32 = 1;
const MAGIC: &str = "wcamnet-dataset-manifest";

pub fn write_manifest<W: Write>(m: &DatasetManifest, w: &mut W) -> Result<()> {
    m.validate()?;
    writeln!(w, "# {MAGIC} v{MANIFEST_VERSION}")?;
    writeln!(w, "# seed: {}", m.seed)?;
    writeln!(w, "# interpolation: bilinear")?;
    writeln!(
        w,
        "# normalization-mean: {} {} {}",
        m.normalization.mean[0], m.normalization.mean[1], m.normalization.mean[2]
    )?;
    writeln!(
        w,
        "# normalization-std: {} {} {}",
        m.normalization.std[0], m.normalization.std[1], m.normalization.std[2]
    )?;
    writeln!(
        w,
        "# columns: image_path\tcamera_station\tweather_station\ttimestamp\tfriction\tsplit"
    )?;
    for s in &m.samples {
        for field in [&s.image_ref, &s.camera_station_id, &s.weather_station_id] {
            if field.contains(['\t', '\n', '\r']) || field.is_empty() {
                return Err(CoreError::Manifest(format!(
                    "field {field:?} in sample {} is empty or contains separators",
                    s.image_ref
                )));
            }
        }
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{:.6}\t{}",
            s.image_ref,
            s.camera_station_id,
            s.weather_station_id,
            s.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
            s.friction_factor,
            m.split_of(s)?
        )?;
    }
    Ok(())
}

pub fn read_manifest<R: BufRead>(reader: R) -> Result<DatasetManifest> {
    let mut lines = reader.lines();
    let first = lines
        .next()
        .transpose()?
        .ok_or_else(|| CoreError::Manifest("empty manifest".into()))?;
    let expected = format!("# {MAGIC} v{MANIFEST_VERSION}");
    if first != expected {
        return Err(CoreError::Manifest(format!(
            "unsupported manifest header {first:?}; expected {expected:?}"
        )));
    }

    let mut seed: Option<u64> = None;
    let mut mean: Option<[f64; 3]> = None;
    let mut std: Option<[f64; 3]> = None;
    let mut samples = Vec::new();
    let mut assignment = std::collections::BTreeMap::new();

    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# ") {
            let (key, value) = rest
                .split_once(':')
                .ok_or_else(|| CoreError::Manifest(format!("malformed header line {line:?}")))?;
            let value = value.trim();
            match key {
                "seed" => {
                    seed = Some(value.parse().map_err(|_| {
                        CoreError::Manifest(format!("unparseable seed {value:?}"))
                    })?)
                }
                "interpolation" => {
                    if value != "bilinear" {
                        return Err(CoreError::Manifest(format!(
                            "unsupported interpolation {value:?}"
                        )));
                    }
                }
                "normalization-mean" => mean = Some(parse_triple(value)?),
                "normalization-std" => std = Some(parse_triple(value)?),
                "columns" => {}
                other => {
                    return Err(CoreError::Manifest(format!("unknown header key {other:?}")))
                }
            }
            continue;
        }

        let (sample, split) = parse_record(&line)?;
        match assignment.insert(sample.camera_station_id.clone(), split) {
            Some(prev) if prev != split => {
                return Err(CoreError::Manifest(format!(
                    "station {} assigned to both {prev} and {split}",
                    sample.camera_station_id
                )))
            }
            _ => {}
        }
        samples.push(sample);
    }

    let manifest = DatasetManifest {
        samples,
        split_assignment: assignment,
        normalization: Normalization {
            mean: mean.ok_or_else(|| CoreError::Manifest("missing normalization-mean".into()))?,
            std: std.ok_or_else(|| CoreError::Manifest("missing normalization-std".into()))?,
        },
        seed: seed.ok_or_else(|| CoreError::Manifest("missing seed".into()))?,
    };
    manifest.normalization.validate()?;
    manifest.validate()?;
    Ok(manifest)
}

fn parse_triple(value: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = value
        .split_whitespace()
        .map(|p| p.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CoreError::Manifest(format!("unparseable float triple {value:?}")))?;
    parts
        .try_into()
        .map_err(|_| CoreError::Manifest(format!("expected three floats in {value:?}")))
}

fn parse_record(line: &str) -> Result<(LabeledSample, Split)> {
    let fields: Vec<&str> = line.split('\t').collect();
    let [image_ref, camera, weather, timestamp, friction, split]: [&str; 6] = fields
        .try_into()
        .map_err(|_| CoreError::Manifest(format!("expected 6 tab-separated fields in {line:?}")))?;
    let timestamp: DateTime<Utc> = DateTime::parse_from_rfc3339(timestamp)
        .map_err(|e| CoreError::Manifest(format!("bad timestamp {timestamp:?}: {e}")))?
        .with_timezone(&Utc);
    let friction: f64 = friction
        .parse()
        .map_err(|_| CoreError::Manifest(format!("bad friction value {friction:?}")))?;
    Ok((
        LabeledSample {
            image_ref: image_ref.to_string(),
            camera_station_id: camera.to_string(),
            weather_station_id: weather.to_string(),
            timestamp,
            friction_factor: friction,
        },
        Split::parse(split)?,
    ))
}

pub fn save_manifest(m: &DatasetManifest, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_manifest(m, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = std::fs::File::open(path)?;
    read_manifest(io::BufReader::new(file))
}
