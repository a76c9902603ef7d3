//! Run output files.
//!
//! Every file is first written as `<name>.partial`. A successful run renames
//! them all at the end; a failed run leaves the `.partial` files behind.
//! Floats use Rust's shortest round-trip formatting.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use opinion_lab::Trajectory;
use serde::Serialize;

pub const TRAJECTORY: &str = "trajectory.csv";
pub const SUMMARY: &str = "summary.csv";
pub const REPORT: &str = "report.json";
pub const RUN_META: &str = "run_meta.json";

const ALL: &[&str] = &[TRAJECTORY, SUMMARY, REPORT, RUN_META];

#[derive(Debug)]
pub struct ArtifactError {
    pub path: PathBuf,
    pub source: io::Error,
}

impl std::fmt::Display for ArtifactError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cannot write {}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for ArtifactError {}

pub fn partial_name(name: &str) -> String {
    format!("{name}.partial")
}

/// The output directory of one run.
#[derive(Debug)]
pub struct ArtifactDir {
    dir: PathBuf,
    pending: Vec<&'static str>,
}

impl ArtifactDir {
    /// Create `dir` and clear artifacts left by an earlier run.
    pub fn create(dir: &Path) -> Result<Self, ArtifactError> {
        let err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ArtifactError { path, source }
        };
        fs::create_dir_all(dir).map_err(err(dir))?;
        for name in ALL {
            for file in [dir.join(name), dir.join(partial_name(name))] {
                match fs::remove_file(&file) {
                    Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(err(&file)(e)),
                    _ => {}
                }
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            pending: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write_with<F>(&mut self, name: &'static str, body: F) -> Result<(), ArtifactError>
    where
        F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    {
        let path = self.dir.join(partial_name(name));
        let result = File::create(&path).and_then(|f| {
            let mut w = BufWriter::new(f);
            body(&mut w)?;
            w.flush()
        });
        result.map_err(|source| ArtifactError { path, source })?;
        if !self.pending.contains(&name) {
            self.pending.push(name);
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &'static str, value: &T) -> Result<(), ArtifactError> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::other)?;
            writeln!(w)
        })
    }

    /// Final paths of the files written so far.
    pub fn final_paths(&self) -> Vec<PathBuf> {
        self.pending.iter().map(|n| self.dir.join(n)).collect()
    }

    /// Rename every pending file to its final name.
    pub fn commit(self) -> Result<Vec<PathBuf>, ArtifactError> {
        let mut out = Vec::with_capacity(self.pending.len());
        for name in &self.pending {
            let from = self.dir.join(partial_name(name));
            let to = self.dir.join(name);
            fs::rename(&from, &to).map_err(|source| ArtifactError { path: to.clone(), source })?;
            out.push(to);
        }
        Ok(out)
    }
}

pub fn write_trajectory(w: &mut impl Write, traj: &Trajectory) -> io::Result<()> {
    writeln!(w, "t,agent_index,opinion")?;
    for snap in &traj.snapshots {
        let t = snap.time();
        for (i, x) in snap.opinions().iter().enumerate() {
            writeln!(w, "{t:?},{i},{x:?}")?;
        }
    }
    Ok(())
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryRow {
    pub t: f64,
    pub moments: [f64; 6],
    pub dissipation: f64,
    pub w1_to_final: f64,
    pub max_velocity: f64,
}

pub fn write_summary(w: &mut impl Write, rows: &[SummaryRow]) -> io::Result<()> {
    writeln!(w, "t,m1,m2,m3,m4,m5,m6,dissipation,w1_to_final,max_velocity")?;
    for r in rows {
        write!(w, "{:?}", r.t)?;
        for m in &r.moments {
            write!(w, ",{m:?}")?;
        }
        writeln!(w, ",{:?},{:?},{:?}", r.dissipation, r.w1_to_final, r.max_velocity)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use opinion_lab::uniform_ensemble;

    #[test]
    fn partial_files_become_final_on_commit() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = ArtifactDir::create(dir.path()).unwrap();
        out.write_json(REPORT, &serde_json::json!({"pass": true})).unwrap();
        assert!(dir.path().join("report.json.partial").exists());
        assert!(!dir.path().join("report.json").exists());
        let paths = out.commit().unwrap();
        assert_eq!(paths, vec![dir.path().join("report.json")]);
        assert!(!dir.path().join("report.json.partial").exists());
    }

    #[test]
    fn create_clears_stale_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(SUMMARY), "old").unwrap();
        fs::write(dir.path().join("summary.csv.partial"), "old").unwrap();
        fs::write(dir.path().join("keep.txt"), "mine").unwrap();
        ArtifactDir::create(dir.path()).unwrap();
        assert!(!dir.path().join(SUMMARY).exists());
        assert!(!dir.path().join("summary.csv.partial").exists());
        assert!(dir.path().join("keep.txt").exists());
    }

    #[test]
    fn csv_uses_round_trip_floats() {
        let e = uniform_ensemble(2, |a| a / 3.0).unwrap();
        let traj = Trajectory::from_snapshots(vec![e], 1.0);
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,agent_index,opinion"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "0.0");
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.25 / 3.0);
    }

    #[test]
    fn summary_has_ten_columns() {
        let row = SummaryRow {
            t: 0.5,
            moments: [1e-7, 0.1, 0.2, 0.3, 0.4, 0.5],
            dissipation: 0.0,
            w1_to_final: 0.25,
            max_velocity: 1.0,
        };
        let mut buf = Vec::new();
        write_summary(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0].split(',').count(), 10);
        assert_eq!(lines[1], "0.5,1e-7,0.1,0.2,0.3,0.4,0.5,0.0,0.25,1.0");
    }
}
