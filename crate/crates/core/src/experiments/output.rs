use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Criterion, ExperimentError};

/// Output directory for one experiment. Every file is written whole by a
/// single writer.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, ExperimentError> {
        fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn write<F>(&mut self, name: &str, body: F) -> Result<PathBuf, ExperimentError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.root.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        self.files.push(path.clone());
        Ok(path)
    }

    pub fn write_summary(&mut self, criteria: &[Criterion]) -> Result<PathBuf, ExperimentError> {
        self.write("summary.csv", |w| write_summary_csv(w, criteria))
    }
}

fn clean(s: &str) -> String {
    s.replace([',', '\n'], ";")
}

pub fn write_summary_csv<W: Write>(w: &mut W, criteria: &[Criterion]) -> std::io::Result<()> {
    writeln!(w, "criterion,name,value,bound,pass,detail")?;
    for c in criteria {
        let id = c.id.map_or_else(|| "-".to_string(), |i| i.to_string());
        writeln!(w, "{},{},{:?},{},{},{}", id, c.name, c.value, clean(&c.bound), c.pass, clean(&c.detail))?;
    }
    Ok(())
}
