//! On-disk cache of the universal TF solution and per-Z atoms.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use heavy_atom::tf_atom::{
    solve_universal_with, TfAtomRecord, UniversalGridSpec, CACHE_FORMAT_VERSION,
};
use heavy_atom::{TfAtom, TfUniversalSolution};

use crate::error::{CliError, CliResult};

fn universal_path(dir: &Path, spec: &UniversalGridSpec) -> PathBuf {
    dir.join(format!(
        "tf_universal_v{CACHE_FORMAT_VERSION}_x{:e}-{:e}_n{}_tol{:e}.json",
        spec.x_min, spec.x_max, spec.nodes, spec.tolerance
    ))
}

/// Loads the universal solution for `spec` from `dir`, solving and storing
/// it when absent, stale or unreadable.
pub fn universal(dir: &Path, spec: UniversalGridSpec) -> CliResult<Arc<TfUniversalSolution>> {
    let path = universal_path(dir, &spec);
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(cached) = serde_json::from_str::<TfUniversalSolution>(&text) {
            if cached.version == CACHE_FORMAT_VERSION && cached.spec == spec {
                return Ok(Arc::new(cached));
            }
        }
    }
    let solved = solve_universal_with(spec)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let text = serde_json::to_string(&solved).expect("universal solution serializes");
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(Arc::new(solved))
}

/// Stores the grid, density, potential and energies of `atom`.
pub fn store_atom(dir: &Path, atom: &TfAtom) -> CliResult<PathBuf> {
    let path = dir.join(format!(
        "tf_atom_v{CACHE_FORMAT_VERSION}_Z{:e}.json",
        atom.z()
    ));
    let record: TfAtomRecord = atom.record();
    let text = serde_json::to_string(&record).expect("atom record serializes");
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cached_solution_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let fresh = universal(dir.path(), UniversalGridSpec::default()).unwrap();
        let cached = universal(dir.path(), UniversalGridSpec::default()).unwrap();
        assert_eq!(*fresh, *cached);
        let a = heavy_atom::build_atom(50.0, fresh).unwrap();
        let b = heavy_atom::build_atom(50.0, cached).unwrap();
        assert_eq!(a.energies(), b.energies());
        assert_eq!(a.density().values(), b.density().values());
    }

    #[test]
    fn corrupt_cache_is_replaced() {
        let dir = tempfile::tempdir().unwrap();
        let spec = UniversalGridSpec::default();
        std::fs::write(universal_path(dir.path(), &spec), "{not json").unwrap();
        assert!(universal(dir.path(), spec).is_ok());
    }
}
