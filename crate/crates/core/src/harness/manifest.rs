use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::kv::KeyValues;
use crate::{Error, Result};

/// A pass/fail check evaluated by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!("[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// Output directory of one run. Files are only ever created or appended.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn register(&mut self, name: &str) {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
    }

    pub fn create_file(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.register(name);
        Ok(BufWriter::new(f))
    }

    pub fn append_file(&mut self, name: &str) -> Result<File> {
        let path = self.path(name);
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        self.register(name);
        Ok(f)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let mut w = self.create_file(name)?;
        w.write_all(text.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(self.path(name), e))
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    /// `manifest.txt`: command, seed, versions, full configuration, output
    /// files and check outcomes.
    pub fn write_manifest(&mut self, command: &str, seed: u64, config: &KeyValues, checks: &[Check]) -> Result<()> {
        let mut kv = KeyValues::new();
        kv.insert("command", command);
        kv.insert("seed", seed);
        kv.insert("stripfold_version", env!("CARGO_PKG_VERSION"));
        kv.insert("f64_format", "shortest round-trip decimal");
        kv.extend("config.", config);
        kv.insert("outputs", self.outputs.join(","));
        for c in checks {
            kv.insert(&format!("check.{}", c.name), if c.passed { "pass" } else { "fail" });
            kv.insert(&format!("check.{}.detail", c.name), c.detail.replace(['\n', '#'], " "));
        }
        kv.insert("all_checks_passed", all_passed(checks));
        let path = self.path("manifest.txt");
        kv.write(&path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_outputs_and_checks() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let mut run = RunDir::create(dir).unwrap();
        run.write_text("a.csv", "x\n1\n").unwrap();
        let mut f = run.append_file("b.csv").unwrap();
        writeln!(f, "y").unwrap();
        let checks = [Check::new("one", true, "ok"), Check::new("two", false, "bad")];
        run.write_manifest("test", 3, &KeyValues::new(), &checks).unwrap();
        let kv = KeyValues::read(&dir.join("manifest.txt")).unwrap();
        assert_eq!(kv.get_str("outputs"), Some("a.csv,b.csv"));
        assert_eq!(kv.get_str("check.two"), Some("fail"));
        assert_eq!(kv.get_str("all_checks_passed"), Some("false"));
    }
}
