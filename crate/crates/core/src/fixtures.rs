//! Libraries shipped under `fixtures/` at the repository root.

use std::path::{Path, PathBuf};

use crate::plan_library::{parse_library, PlanLibrary};

/// Overrides the directory used to resolve fixture-relative library paths.
pub const FIXTURE_DIR_ENV: &str = "PLANREC_FIXTURE_DIR";

pub const KSCGR_SOURCE: &str = include_str!("../../../fixtures/kscgr.lib");
pub const L0_SOURCE: &str = include_str!("../../../fixtures/l0.lib");

/// Kitchen-scene library: five egg recipes over the nine gesture classes.
pub fn kscgr() -> PlanLibrary {
    parse_library(KSCGR_SOURCE).expect("shipped kscgr fixture is valid")
}

/// Two-goal toy library: A = breaking, mixing; B = breaking, baking.
pub fn l0() -> PlanLibrary {
    parse_library(L0_SOURCE).expect("shipped l0 fixture is valid")
}

pub fn fixture_dir() -> PathBuf {
    match std::env::var_os(FIXTURE_DIR_ENV) {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"),
    }
}

/// Resolves a library path. Existing paths are returned unchanged; otherwise
/// the path is looked up inside the fixture directory, first as given, then
/// by file name, then with a `.lib` extension appended.
pub fn resolve_library_path(path: &Path) -> PathBuf {
    if path.exists() {
        return path.to_path_buf();
    }
    let dir = fixture_dir();
    let mut candidates = vec![dir.join(path)];
    if let Some(name) = path.file_name() {
        candidates.push(dir.join(name));
        let mut with_ext = name.to_os_string();
        with_ext.push(".lib");
        candidates.push(dir.join(with_ext));
    }
    candidates
        .into_iter()
        .find(|p| p.exists())
        .unwrap_or_else(|| path.to_path_buf())
}
