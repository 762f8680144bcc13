//! Loading profile files from disk.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use chanleak_core::profile::{parse_profile, GoroutineProfile};

use crate::CliError;

pub const PROFILE_EXT: &str = ".gprof.txt";

/// Expands directories into their `.gprof.txt` files, sorted by name.
/// Plain file arguments are kept as given.
pub fn profile_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| CliError::no_input(format!("cannot read {}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.to_string_lossy().ends_with(PROFILE_EXT))
                .collect();
            found.sort();
            out.extend(found);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(CliError::no_input(format!("no such file or directory: {}", p.display())));
        }
    }
    Ok(out)
}

/// File name without the profile extension.
pub fn stem(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    match name.strip_suffix(PROFILE_EXT) {
        Some(s) => s.to_string(),
        None => path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or(name),
    }
}

#[derive(Debug)]
pub struct Loaded {
    pub profiles: Vec<GoroutineProfile>,
    /// Files that failed to read or parse, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

/// Parses `files` in parallel. Results keep the input order. A profile
/// without an `instance:` line takes its file stem as instance id.
pub fn load_profiles(files: &[PathBuf]) -> Loaded {
    let parsed: Vec<_> = files
        .par_iter()
        .map(|f| {
            let r = std::fs::read_to_string(f)
                .map_err(|e| e.to_string())
                .and_then(|t| parse_profile(&t).map_err(|e| e.to_string()));
            (f, r)
        })
        .collect();
    let mut loaded = Loaded { profiles: Vec::new(), skipped: Vec::new() };
    for (f, r) in parsed {
        match r {
            Ok(mut p) => {
                if p.instance_id.is_empty() {
                    p.instance_id = stem(f);
                }
                loaded.profiles.push(p);
            }
            Err(e) => loaded.skipped.push((f.clone(), e)),
        }
    }
    loaded
}
