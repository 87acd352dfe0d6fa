//! CSV emission helpers shared by every exporter in the crate.

use crate::error::EbmResult;
use std::path::Path;

/// Decimal rendering with 17 significant digits — enough to reproduce any
/// f64 bit pattern on parse.
pub fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `contents` through a temp file plus rename so readers never see a
/// partially written artifact.
pub fn atomic_write(path: &Path, contents: &str) -> EbmResult<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp_path = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp_path, contents)?;
    std::fs::rename(&tmp_path, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_round_trips_awkward_values() {
        for v in [0.1, 1.0 / 3.0, 2.0_f64.sqrt(), -1e-300, 6.02214076e23] {
            let s = g17(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{s}");
        }
    }
}
