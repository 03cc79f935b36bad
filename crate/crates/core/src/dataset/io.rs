//! On-disk formats.
//!
//! * Demo directory: `frame_NNNNN.png` (8-bit grayscale) with a
//!   `frame_NNNNN.json` sidecar `{"version", "index", "tool_pos"}`;
//!   `tool_pos` may be null, in which case the marker is detected.
//! * Triplets: JSON lines, a header `{"format", "version"}` then one
//!   `{"demo", "m", "n", "p", "x_m", "x_n"}` record per triplet, contours
//!   flattened as `u, v` pairs.
//! * Stats: one JSON object.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DatasetError, Demo, Frame, PushTriplet, Result};
use crate::geom::Point;
use crate::strategies::DatasetStats;
use crate::vision::{Contour, GrayImage};

pub const TRIPLET_FORMAT_VERSION: u32 = 1;
const TRIPLET_FORMAT: &str = "sandshape-triplets";
const SIDECAR_VERSION: u32 = 1;
const STATS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Sidecar {
    version: u32,
    index: usize,
    tool_pos: Option<Point>,
}

pub fn save_demo(dir: impl AsRef<Path>, demo: &Demo) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for f in &demo.frames {
        let stem = format!("frame_{:05}", f.index);
        f.image.write_png(dir.join(format!("{stem}.png")))?;
        let side = Sidecar {
            version: SIDECAR_VERSION,
            index: f.index,
            tool_pos: f.tool_pos,
        };
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_vec(&side)?)?;
    }
    Ok(())
}

pub fn load_demo(dir: impl AsRef<Path>, id: usize) -> Result<Demo> {
    let dir = dir.as_ref();
    let mut sidecars: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("frame_"))
        })
        .collect();
    sidecars.sort();
    let mut frames = Vec::with_capacity(sidecars.len());
    for path in sidecars {
        let side: Sidecar = serde_json::from_slice(&fs::read(&path)?)?;
        if side.version != SIDECAR_VERSION {
            return Err(DatasetError::Version(side.version));
        }
        let image = GrayImage::read_png(path.with_extension("png"))?;
        frames.push(Frame {
            index: side.index,
            image,
            tool_pos: side.tool_pos,
        });
    }
    frames.sort_by_key(|f| f.index);
    Ok(Demo { id, frames })
}

pub fn save_demos(root: impl AsRef<Path>, demos: &[Demo]) -> Result<()> {
    for d in demos {
        save_demo(root.as_ref().join(format!("demo_{:04}", d.id)), d)?;
    }
    Ok(())
}

/// Loads every `demo_NNNN` subdirectory, in name order.
pub fn load_demos(root: impl AsRef<Path>) -> Result<Vec<Demo>> {
    let mut dirs: Vec<(usize, PathBuf)> = fs::read_dir(root.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .filter_map(|p| {
            let name = p.file_name()?.to_string_lossy().into_owned();
            let id = name.strip_prefix("demo_")?.parse().ok()?;
            Some((id, p))
        })
        .collect();
    dirs.sort();
    dirs.into_iter().map(|(id, p)| load_demo(p, id)).collect()
}

#[derive(Serialize, Deserialize)]
struct TripletHeader {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct TripletRecord {
    demo: usize,
    m: usize,
    n: usize,
    p: [f64; 4],
    x_m: Vec<f64>,
    x_n: Vec<f64>,
}

pub fn write_triplets(path: impl AsRef<Path>, triplets: &[PushTriplet]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let header = TripletHeader {
        format: TRIPLET_FORMAT.into(),
        version: TRIPLET_FORMAT_VERSION,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for t in triplets {
        let rec = TripletRecord {
            demo: t.demo,
            m: t.m,
            n: t.n,
            p: t.p,
            x_m: t.x_m.flat(),
            x_n: t.x_n.flat(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_triplets(path: impl AsRef<Path>) -> Result<Vec<PushTriplet>> {
    let mut lines = BufReader::new(fs::File::open(path)?).lines();
    let header: TripletHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => return Err(DatasetError::Format("missing header".into())),
    };
    if header.format != TRIPLET_FORMAT {
        return Err(DatasetError::Format(format!("unexpected format {:?}", header.format)));
    }
    if header.version != TRIPLET_FORMAT_VERSION {
        return Err(DatasetError::Version(header.version));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: TripletRecord = serde_json::from_str(&line)?;
        if r.x_m.len() != r.x_n.len() || r.x_m.len() % 2 != 0 {
            return Err(DatasetError::Format(format!("contour lengths {} / {}", r.x_m.len(), r.x_n.len())));
        }
        out.push(PushTriplet {
            demo: r.demo,
            m: r.m,
            n: r.n,
            p: r.p,
            x_m: Contour::from_flat(&r.x_m),
            x_n: Contour::from_flat(&r.x_n),
        });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct StatsDoc {
    version: u32,
    count: usize,
    #[serde(flatten)]
    stats: DatasetStats,
}

pub fn write_stats(path: impl AsRef<Path>, stats: &DatasetStats, count: usize) -> Result<()> {
    let doc = StatsDoc {
        version: STATS_VERSION,
        count,
        stats: *stats,
    };
    fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

/// Returns the stats and the number of triplets they were computed from.
pub fn read_stats(path: impl AsRef<Path>) -> Result<(DatasetStats, usize)> {
    let doc: StatsDoc = serde_json::from_slice(&fs::read(path)?)?;
    if doc.version != STATS_VERSION {
        return Err(DatasetError::Version(doc.version));
    }
    Ok((doc.stats, doc.count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{extract_all, synthesize_demos, ExtractConfig, SynthConfig};

    #[test]
    fn demo_and_triplet_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let demos = synthesize_demos(&SynthConfig::default(), 3, 2);
        save_demos(dir.path(), &demos).unwrap();
        let back = load_demos(dir.path()).unwrap();
        assert!(back == demos);

        let triplets = extract_all(&back, &ExtractConfig::default());
        let path = dir.path().join("t.jsonl");
        write_triplets(&path, &triplets).unwrap();
        assert!(read_triplets(&path).unwrap() == triplets);

        let stats = crate::dataset::compute_stats(&triplets).unwrap();
        let sp = dir.path().join("stats.json");
        write_stats(&sp, &stats, triplets.len()).unwrap();
        assert_eq!(read_stats(&sp).unwrap(), (stats, triplets.len()));
    }

    #[test]
    fn wrong_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        fs::write(&path, "{\"format\":\"sandshape-triplets\",\"version\":9}\n").unwrap();
        assert!(matches!(read_triplets(&path), Err(DatasetError::Version(9))));
    }
}
