//! On-disk dataset bundle: `vocab_entities.txt`, `vocab_relations.txt`,
//! `vocab_times.txt` (line number = index) and `<split>.quads` with
//! `head relation tail time_index` per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Quadruple, Split, TkgDataset};
use crate::error::{Error, Result};

const ENTITIES: &str = "vocab_entities.txt";
const RELATIONS: &str = "vocab_relations.txt";
const TIMES: &str = "vocab_times.txt";

fn write_lines<'a>(path: &Path, lines: impl Iterator<Item = &'a String>) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        if l.contains('\n') {
            return Err(Error::format(path, format!("label {l:?} contains a newline")));
        }
        text.push_str(l);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Write the dataset's original (non-inverse) facts.
pub fn save_bundle(dataset: &TkgDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let base = dataset.base();
    write_lines(&dir.join(ENTITIES), base.entity_names().iter())?;
    write_lines(&dir.join(RELATIONS), base.relation_names().iter())?;
    write_lines(&dir.join(TIMES), base.timestamps().iter())?;
    for split in Split::ALL {
        let path = dir.join(format!("{}.quads", split.name()));
        let mut out = Vec::new();
        for q in base.split(split) {
            writeln!(out, "{} {} {} {}", q.head, q.relation, q.tail, q.time)
                .expect("write to vec");
        }
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Load a bundle. Missing split files are treated as empty splits.
pub fn load_bundle(dir: &Path) -> Result<TkgDataset> {
    let entities = read_lines(&dir.join(ENTITIES))?;
    let relations = read_lines(&dir.join(RELATIONS))?;
    let times = read_lines(&dir.join(TIMES))?;
    let mut splits: [Vec<Quadruple>; 4] = Default::default();
    for split in Split::ALL {
        let path = dir.join(format!("{}.quads", split.name()));
        if !path.exists() {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format(&path, format!("line {}: expected integers", n + 1)))?;
            if nums.len() != 4 {
                return Err(Error::format(&path, format!("line {}: expected 4 integers", n + 1)));
            }
            splits[split as usize].push(Quadruple::new(nums[0], nums[1], nums[2], nums[3]));
        }
    }
    TkgDataset::from_parts(entities, relations, times, splits).map_err(|e| match e {
        Error::IndexOutOfRange { .. } | Error::OverlappingSplits { .. } => {
            Error::format(dir, e.to_string())
        }
        other => other,
    })
}
