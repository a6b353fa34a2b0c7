//! Raw interactions to evaluation samples: ingest a CSV, sessionize by day,
//! split 80/20 in time, label with the empirical proxy, export SFT pairs.

use std::io::Write;

use prefprobe::dataset::{
    build_eval_samples, export_sft_pairs, group_by_user, ingest, HistoryStyle, InputFormat,
    SchemaConfig, SessionRule, SplitSpec, Weighting,
};
use prefprobe::ClusterSpace;

fn main() -> prefprobe::Result<()> {
    let dir = tempfile::tempdir()?;
    let csv = dir.path().join("ratings.csv");
    let mut f = std::fs::File::create(&csv)?;
    writeln!(f, "user_id,item_id,timestamp,clusters,weight,title")?;
    let genres = ["Action", "Comedy", "Drama"];
    for day in 0..6i64 {
        for (u, g) in [("alice", day % 2), ("bob", 2)] {
            let t = 1_700_000_000 + day * 86_400;
            writeln!(
                f,
                "{u},m{day},{t},{},{},Movie {day}",
                genres[g as usize],
                3 + day % 3
            )?;
        }
    }
    drop(f);

    let space = ClusterSpace::new(genres)?;
    let ingested = ingest(&csv, InputFormat::Csv, &SchemaConfig::default(), &space)?;
    println!(
        "{} records, {} rejected",
        ingested.records.len(),
        ingested.rejects.len()
    );
    let users = group_by_user(ingested.records);
    let set = build_eval_samples(
        &users,
        &SplitSpec::default(),
        SessionRule::CalendarDay,
        Weighting::Recorded,
        &space,
    )?;
    for s in &set.samples {
        println!(
            "{}: {} context sessions, label {:?}",
            s.user_id,
            s.context.len(),
            s.label.probs()
        );
    }
    let out = dir.path().join("sft.jsonl");
    export_sft_pairs(&set.samples, &out, HistoryStyle::Rating)?;
    print!("{}", std::fs::read_to_string(out)?);
    Ok(())
}
