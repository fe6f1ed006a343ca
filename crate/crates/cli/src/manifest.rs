use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SUFFIX: &str = ".manifest.json";

/// Record of one command run: what was asked, on which scene, and which
/// files it wrote (relative to the output directory).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub scene_hash: Option<String>,
    pub seeds: Vec<u64>,
    pub params: Value,
    pub outputs: Vec<String>,
    /// Seconds per stage.
    pub wall_times: BTreeMap<String, f64>,
}

/// Collects outputs and stage timings while a command runs.
pub struct Run {
    dir: Option<PathBuf>,
    stem: String,
    manifest: RunManifest,
    stage: Option<(String, Instant)>,
}

impl Run {
    pub fn new(dir: Option<&Path>, stem: &str, command: &str, params: Value) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Run {
            dir: dir.map(Path::to_path_buf),
            stem: stem.to_string(),
            manifest: RunManifest {
                command: command.to_string(),
                scene_hash: None,
                seeds: vec![],
                params,
                outputs: vec![],
                wall_times: BTreeMap::new(),
            },
            stage: None,
        })
    }

    pub fn scene(&mut self, hash: String) {
        self.manifest.scene_hash = Some(hash);
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seeds.push(seed);
    }

    pub fn stage(&mut self, name: &str) {
        self.close_stage();
        self.stage = Some((name.to_string(), Instant::now()));
    }

    fn close_stage(&mut self) {
        if let Some((name, t)) = self.stage.take() {
            *self.manifest.wall_times.entry(name).or_default() += t.elapsed().as_secs_f64();
        }
    }

    pub fn writes(&self) -> bool {
        self.dir.is_some()
    }

    /// Writes `name` into the output directory, if there is one.
    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        if !self.manifest.outputs.iter().any(|o| o == name) {
            self.manifest.outputs.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if !self.writes() {
            return Ok(());
        }
        let text = serde_json::to_string_pretty(value)?;
        self.write(name, text + "\n")
    }

    pub fn finish(mut self) -> Result<()> {
        self.close_stage();
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(format!("{}{SUFFIX}", self.stem));
        std::fs::write(&path, serde_json::to_string_pretty(&self.manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Reads every manifest in `dir`, sorted by file name.
pub fn read_all(dir: &Path) -> Result<Vec<(String, RunManifest)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(SUFFIX) {
            let text = std::fs::read_to_string(dir.join(&name))?;
            let m: RunManifest = serde_json::from_str(&text).with_context(|| format!("parsing {name}"))?;
            out.push((stem.to_string(), m));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    if out.is_empty() {
        bail!("no manifests in {}", dir.display());
    }
    Ok(out)
}
