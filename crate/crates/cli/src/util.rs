use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use stereozoom::zoom::StereoRoI;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Settings from an optional JSON file, falling back to defaults for absent keys.
pub fn load_settings<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => serde_json::from_str(&read_text(p)?).with_context(|| format!("parsing config {}", p.display())),
        None => Ok(T::default()),
    }
}

/// `"256x128"` → `(256, 128)`.
pub fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let parse = |v: &str, name: &str| {
        v.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("{name} {v:?} is not a positive integer"))
    };
    Ok((parse(w, "width")?, parse(h, "height")?))
}

/// `"x,x_bar,y,w,h"` → RoI.
pub fn parse_roi(s: &str) -> Result<StereoRoI> {
    const NAMES: [&str; 5] = ["x", "x_bar", "y", "w", "h"];
    let fields: Vec<&str> = s.split(',').map(str::trim).collect();
    if fields.len() != 5 {
        bail!("RoI needs 5 comma-separated fields (x,x_bar,y,w,h), found {}", fields.len());
    }
    let mut v = [0.0; 5];
    for (i, f) in fields.iter().enumerate() {
        v[i] = f
            .parse()
            .map_err(|e| anyhow!("RoI field {} ({}): cannot parse {f:?}: {e}", i + 1, NAMES[i]))?;
    }
    Ok(StereoRoI::new(v[0], v[1], v[2], v[3], v[4])?)
}

/// `"20-40"` → `[20, 40)`; `"40-inf"` is open-ended.
pub fn parse_bucket(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s
        .split_once('-')
        .ok_or_else(|| anyhow!("distance bucket {s:?} must look like MIN-MAX"))?;
    let lo: f64 = lo.trim().parse().with_context(|| format!("bucket {s:?}"))?;
    let hi: f64 = match hi.trim() {
        "inf" => f64::INFINITY,
        v => v.parse().with_context(|| format!("bucket {s:?}"))?,
    };
    if !(lo < hi) {
        bail!("distance bucket {s:?} is empty");
    }
    Ok((lo, hi))
}

/// Files written by one run, relative to its output directory.
pub struct Outputs {
    root: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(rel.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text)
    }

    /// Write `manifest.json` listing every other output.
    pub fn finish<C: Serialize>(mut self, subcommand: &str, inputs: Vec<String>, config: &C) -> Result<()> {
        let mut outputs = self.files.clone();
        outputs.sort();
        let manifest = RunManifest {
            tool: "stereozoom",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            inputs,
            config: serde_json::to_value(config)?,
            outputs,
        };
        self.write_json("manifest.json", &manifest)
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'a str,
    version: &'a str,
    subcommand: &'a str,
    inputs: Vec<String>,
    config: serde_json::Value,
    outputs: Vec<String>,
}

pub fn path_string(p: &Path) -> String {
    p.display().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(parse_size("256x128").unwrap(), (256, 128));
        assert!(parse_size("256").is_err());
        assert!(parse_size("0x5").is_err());
    }

    #[test]
    fn rois() {
        let r = parse_roi("400,380,100,128,64").unwrap();
        assert_eq!((r.x, r.x_bar, r.w), (400.0, 380.0, 128.0));
        let err = parse_roi("400,abc,100,128,64").unwrap_err().to_string();
        assert!(err.contains("field 2 (x_bar)"), "{err}");
        assert!(parse_roi("1,2,3").is_err());
    }

    #[test]
    fn buckets() {
        assert_eq!(parse_bucket("0-20").unwrap(), (0.0, 20.0));
        assert_eq!(parse_bucket("40-inf").unwrap().1, f64::INFINITY);
        assert!(parse_bucket("20-10").is_err());
        assert!(parse_bucket("20").is_err());
    }
}
