//! Consolidation of sweep runs: merged table and the least-squares rate `C/ln(1/ε)`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::output::{RunManifest, MANIFEST};
use crate::CliError;

/// One sweep row tagged with its run.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub run: String,
    pub mode: String,
    pub eps: f64,
    pub l3_norm: f64,
    pub linf_norm: f64,
}

/// Least-squares `C` in `l3 ≈ C/ln(1/ε)` and the fit residual of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub c: f64,
    pub residuals: Vec<f64>,
}

pub fn fit_rate(eps: &[f64], norms: &[f64]) -> RateFit {
    let a: Vec<f64> = eps.iter().map(|e| 1.0 / (1.0 / e).ln()).collect();
    let c = a.iter().zip(norms).map(|(a, y)| a * y).sum::<f64>() / a.iter().map(|a| a * a).sum::<f64>();
    let residuals = a.iter().zip(norms).map(|(a, y)| y - c * a).collect();
    RateFit { c, residuals }
}

/// Reads the sweep table listed by the manifest at `path` (a manifest file or its directory).
pub fn load_sweep(path: &Path) -> Result<Vec<Row>, CliError> {
    let manifest_path: PathBuf = if path.is_dir() { path.join(MANIFEST) } else { path.to_path_buf() };
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let text = fs::read_to_string(&manifest_path).map_err(|e| CliError::Config(format!("{}: {e}", manifest_path.display())))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", manifest_path.display())))?;
    if m.verb != "sweep" {
        return Err(CliError::Config(format!("{} records a `{}` run; report only merges sweeps", manifest_path.display(), m.verb)));
    }
    if m.status != "ok" {
        return Err(CliError::Config(format!("{} records a failed run", manifest_path.display())));
    }
    let mode = m.summary.get("mode").and_then(|v| v.as_str()).unwrap_or("unknown").to_string();
    let csv = fs::read_to_string(dir.join("sweep.csv")).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    let run = dir.display().to_string();
    csv.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|c| c.parse::<f64>()).collect::<Result<_, _>>().map_err(|e| CliError::Config(format!("{run}: {e}")))?;
            if f.len() < 3 {
                return Err(CliError::Config(format!("{run}: short sweep row")));
            }
            Ok(Row { run: run.clone(), mode: mode.clone(), eps: f[0], l3_norm: f[1], linf_norm: f[2] })
        })
        .collect()
}

/// Merged CSV and a text table, one block per run.
pub fn consolidate(runs: &[Vec<Row>]) -> (String, String) {
    let mut csv = String::from("run,mode,eps,l3_norm,linf_norm,l3_fit,l3_fit_residual\n");
    let mut text = String::new();
    for rows in runs {
        let Some(first) = rows.first() else { continue };
        let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
        let l3: Vec<f64> = rows.iter().map(|r| r.l3_norm).collect();
        let fit = fit_rate(&eps, &l3);
        text.push_str(&format!("{} ({}): C = {:.6}\n", first.run, first.mode, fit.c));
        text.push_str(&format!("  {:>12} {:>14} {:>14} {:>14}\n", "eps", "l3_norm", "linf_norm", "fit_residual"));
        for (r, res) in rows.iter().zip(&fit.residuals) {
            let pred = r.l3_norm - res;
            csv.push_str(&format!("{},{},{:e},{:e},{:e},{:e},{:e}\n", r.run, r.mode, r.eps, r.l3_norm, r.linf_norm, pred, res));
            text.push_str(&format!("  {:>12.4e} {:>14.6} {:>14.6} {:>14.3e}\n", r.eps, r.l3_norm, r.linf_norm, res));
        }
    }
    (csv, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_rate_is_recovered() {
        let eps = [1e-2, 1e-3, 1e-4];
        let y: Vec<f64> = eps.iter().map(|e: &f64| 2.5 / (1.0 / e).ln()).collect();
        let f = fit_rate(&eps, &y);
        assert!((f.c - 2.5).abs() < 1e-12);
        assert!(f.residuals.iter().all(|r| r.abs() < 1e-12));
    }
}
