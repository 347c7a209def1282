use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::gridstore::text;

/// What ran, with which inputs and settings. Written next to the outputs as
/// `manifest-<subcommand>.txt`; only `wall_time_s` varies between
/// identical runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub args: String,
    pub config_path: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub tool_version: String,
    pub wall_time_s: f64,
    /// Normalized config, every key with its effective value.
    pub config: String,
}

impl RunManifest {
    pub fn file_name(subcommand: &str) -> String {
        format!("manifest-{subcommand}.txt")
    }

    /// Command line that reproduces the run.
    pub fn command_line(&self) -> String {
        let mut s = String::from("subsight");
        if let Some(c) = &self.config_path {
            let _ = write!(s, " --config {}", c.display());
        }
        for i in &self.inputs {
            let _ = write!(s, " --in {}", i.display());
        }
        let _ = write!(s, " --out {} --seed {} {}", self.out.display(), self.seed, self.subcommand);
        if !self.args.is_empty() {
            let _ = write!(s, " {}", self.args);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "subcommand = {}", self.subcommand);
        let _ = writeln!(s, "command = {}", self.command_line());
        let _ = writeln!(
            s,
            "config_path = {}",
            self.config_path.as_ref().map_or("(defaults)".into(), |p| p.display().to_string())
        );
        let inputs: Vec<String> = self.inputs.iter().map(|p| p.display().to_string()).collect();
        let _ = writeln!(s, "inputs = {}", inputs.join(" "));
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "tool_version = {}", self.tool_version);
        let _ = writeln!(s, "wall_time_s = {:.3}", self.wall_time_s);
        s.push_str("\n[config]\n");
        s.push_str(&self.config);
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        text::write_string(&dir.join(Self::file_name(&self.subcommand)), &self.to_text())
    }
}
