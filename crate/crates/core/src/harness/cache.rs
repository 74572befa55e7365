use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::objectives::CompositeObjective;
use crate::solvers::{reference::reference_key, reference_solution, Reference};

/// Reference minimizers stored as decimal text, one file per `(objective, tol)` hash.
#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DiskCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, f: &CompositeObjective, tol: f64) -> PathBuf {
        self.dir
            .join(format!("{}.ref", hex::encode(reference_key(f, tol))))
    }

    pub fn load(&self, f: &CompositeObjective, tol: f64) -> Result<Option<Reference>> {
        let path = self.entry_path(f, tol);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        parse_entry(&text, f.d())
            .map(Some)
            .map_err(|m| Error::Data(format!("corrupt cache entry {}: {m}", path.display())))
    }

    /// Writes the entry atomically (temporary file, then rename).
    pub fn store(&self, f: &CompositeObjective, tol: f64, r: &Reference) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(format_entry(r).as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.entry_path(f, tol)).map_err(|e| e.error)?;
        Ok(())
    }

    /// Cached reference, computing and storing it on a miss.
    pub fn get_or_compute(&self, f: &CompositeObjective, tol: f64) -> Result<Reference> {
        if let Some(r) = self.load(f, tol)? {
            return Ok(r);
        }
        let r = reference_solution(f, tol)?;
        self.store(f, tol, &r)?;
        Ok(r)
    }
}

fn format_entry(r: &Reference) -> String {
    let mut s = format!("value {:?}\ncertificate {:?}\n", r.value, r.certificate);
    for v in &r.x {
        s.push_str(&format!("{v:?}\n"));
    }
    s
}

fn parse_entry(text: &str, d: usize) -> std::result::Result<Reference, String> {
    let mut lines = text.lines();
    let mut field = |name: &str| -> std::result::Result<f64, String> {
        let l = lines.next().ok_or("truncated")?;
        let v = l
            .strip_prefix(name)
            .ok_or_else(|| format!("expected '{name}'"))?;
        v.trim().parse().map_err(|_| format!("bad {name}"))
    };
    let value = field("value")?;
    let certificate = field("certificate")?;
    let x: Vec<f64> = lines
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad coordinate '{l}'"))
        })
        .collect::<std::result::Result<_, _>>()?;
    if x.len() != d {
        return Err(format!("expected {d} coordinates, found {}", x.len()));
    }
    Ok(Reference {
        x,
        value,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::data::Dataset;
    use crate::losses::LossKind;
    use crate::regularizers::Regularizer;

    #[test]
    fn store_then_load_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::new(dir.path());
        let ds = Dataset::from_dense(&[vec![1.0, 2.0], vec![0.5, -1.0]], vec![1.0, 0.3]).unwrap();
        let f = CompositeObjective::new(Arc::new(ds), LossKind::Squared, Regularizer::l2(0.1));
        assert!(cache.load(&f, 1e-12).unwrap().is_none());
        let r = cache.get_or_compute(&f, 1e-12).unwrap();
        let back = cache.load(&f, 1e-12).unwrap().unwrap();
        assert_eq!(r, back);
        assert!(cache.load(&f, 1e-10).unwrap().is_none());
    }

    #[test]
    fn corrupt_entry_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::new(dir.path());
        let ds = Dataset::from_dense(&[vec![1.0]], vec![1.0]).unwrap();
        let f = CompositeObjective::new(Arc::new(ds), LossKind::Squared, Regularizer::l2(0.1));
        std::fs::write(cache.entry_path(&f, 1e-12), "value x\n").unwrap();
        assert!(matches!(cache.load(&f, 1e-12), Err(Error::Data(_))));
    }
}
