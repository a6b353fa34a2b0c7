use std::fmt::Write as _;

use super::config::ExperimentConfig;
use crate::dataset::{group_by_user, group_evolution, ingest, EvolutionMatrix};
use crate::error::{Error, Result};

/// Writes the periods x K group-level drift matrix as `evolution.csv` and a
/// whitespace-separated `evolution.dat` for gnuplot.
pub fn cmd_report_evolution(cfg: &ExperimentConfig) -> Result<EvolutionMatrix> {
    let periods = cfg.evolution.periods;
    if periods < 2 {
        return Err(Error::Config(format!(
            "periods must be >= 2, got {periods}"
        )));
    }
    let space = cfg.space()?;
    let ingested = ingest(
        cfg.corpus_path()?,
        cfg.data.format,
        &cfg.data.schema,
        &space,
    )?;
    let users = group_by_user(ingested.records);
    let m = group_evolution(&users, periods, cfg.data.weighting, &space)?;

    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut w = csv::Writer::from_path(cfg.output_dir.join("evolution.csv"))?;
    let mut header = vec!["period".to_string()];
    header.extend(space.labels().iter().cloned());
    w.write_record(&header)?;
    for (p, row) in m.rows.iter().enumerate() {
        let mut rec = vec![(p + 1).to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut dat = String::from("# period");
    for (i, label) in space.labels().iter().enumerate() {
        let _ = write!(
            dat,
            " {}:{}",
            i + 2,
            label.replace(char::is_whitespace, "_")
        );
    }
    dat.push('\n');
    for (p, row) in m.rows.iter().enumerate() {
        let _ = write!(dat, "{}", p + 1);
        for v in row {
            let _ = write!(dat, " {v}");
        }
        dat.push('\n');
    }
    std::fs::write(cfg.output_dir.join("evolution.dat"), dat)?;
    Ok(m)
}
