//! Temperature-scaled softmax, empirical proxy labels and rankings.

use prefprobe::{empirical_proxy, rank_descending, ClusterSpace, PreferenceDistribution};

fn main() -> prefprobe::Result<()> {
    let space = ClusterSpace::new(["Action", "Comedy", "Drama", "Horror"])?;
    let scores = [0.9, 0.2, 0.9, -1.0];
    for tau in [0.5, 1.0, 4.0] {
        let d = PreferenceDistribution::from_scores(&space, &scores, tau)?;
        let r = rank_descending(&d);
        println!("tau={tau:<4} probs={:.3?} order={:?}", d.probs(), r.order());
    }

    // each interaction splits its weight evenly over its clusters
    let window: [(&[usize], f64); 3] = [(&[0, 2], 1.0), (&[2], 1.0), (&[1], 2.0)];
    let proxy = empirical_proxy(window, &space)?;
    println!("proxy {:?}", proxy.probs());
    Ok(())
}
