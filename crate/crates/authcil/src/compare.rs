//! Markdown comparison of run reports: strategies by sessions plus PD.

use crate::error::{Error, Result};
use crate::report::RunReport;

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())
}

/// Renders one row per report. The lowest PD is bolded (all ties).
/// Reports must share a session count, and a config hash unless `force`.
pub fn compare_table(reports: &[RunReport], force: bool) -> Result<String> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Usage("compare needs at least one report".into()))?;
    let n = first.sessions.len();
    for r in reports {
        if r.sessions.len() != n {
            return Err(Error::Data(format!(
                "{} (seed {}) has {} sessions, {} (seed {}) has {n}",
                r.strategy,
                r.seed,
                r.sessions.len(),
                first.strategy,
                first.seed
            )));
        }
        if !force && r.config_hash != first.config_hash {
            return Err(Error::ConfigHashMismatch {
                expected: first.config_hash.clone(),
                found: r.config_hash.clone(),
            });
        }
    }
    let best = reports
        .iter()
        .filter_map(|r| r.pd)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));

    let mut out = String::from("| strategy | seed |");
    for t in 0..n {
        out.push_str(&format!(" s{t} |"));
    }
    out.push_str(" PD | AvgA |\n|---|---|");
    out.push_str(&"---|".repeat(n + 2));
    out.push('\n');
    for r in reports {
        out.push_str(&format!("| {} | {} |", r.strategy, r.seed));
        for s in &r.sessions {
            out.push_str(&format!(" {:.2} |", s.accuracy));
        }
        let pd = cell(r.pd);
        if r.pd.is_some() && r.pd == best {
            out.push_str(&format!(" **{pd}** |"));
        } else {
            out.push_str(&format!(" {pd} |"));
        }
        out.push_str(&format!(" {} |\n", cell(r.avg_a)));
    }
    Ok(out)
}
