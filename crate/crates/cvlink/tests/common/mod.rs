//! Helpers shared by the integration suites: least-squares fitting for the
//! scaling-law gates and recursive directory snapshots for byte-identity
//! checks.

use std::fs;
use std::path::Path;

/// Ordinary least-squares line fit; returns `(intercept, slope, r_squared)`.
/// A flat response with zero residuals reports `r_squared = 1`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert!(xs.len() == ys.len() && xs.len() >= 2, "fit needs at least two matched points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    assert!(sxx > 0.0, "fit needs at least two distinct x values");
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res < 1e-24 {
        1.0
    } else {
        0.0
    };
    (intercept, slope, r2)
}

/// Reads every file under `root` into `(relative path, bytes)` rows sorted
/// by path, so two output trees can be compared byte for byte.
pub fn snapshot_dir(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        let mut entries: Vec<_> =
            fs::read_dir(dir).expect("readable directory").map(|e| e.expect("entry").path()).collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).expect("child path").to_string_lossy().into_owned();
                out.push((rel, fs::read(&path).expect("readable file")));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out
}

/// Describes the first difference between two snapshots, or `None` when
/// they are byte-identical.
pub fn first_difference(
    a: &[(String, Vec<u8>)],
    b: &[(String, Vec<u8>)],
) -> Option<String> {
    if a.len() != b.len() {
        return Some(format!("file count differs: {} vs {}", a.len(), b.len()));
    }
    for ((pa, ba), (pb, bb)) in a.iter().zip(b) {
        if pa != pb {
            return Some(format!("path order differs: {pa} vs {pb}"));
        }
        if ba != bb {
            let at = ba.iter().zip(bb).position(|(x, y)| x != y).unwrap_or(ba.len().min(bb.len()));
            return Some(format!("{pa} differs at byte {at} ({} vs {} bytes)", ba.len(), bb.len()));
        }
    }
    None
}
