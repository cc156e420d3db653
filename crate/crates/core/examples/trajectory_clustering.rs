//! k-means on citation trajectories, with restarts and an elbow series.
//!
//! `cargo run --release --example trajectory_clustering [seed]`

use ad_influence::cluster::{centroids_to_csv, elbow_to_csv};
use ad_influence::cluster::{build_trajectories, cluster_trajectories, same_partition, ClusterConfig, TrajectoryConfig};
use ad_influence::synth::trajectory_corpus;

fn main() {
    let seed = std::env::args().nth(1).map_or(11, |s| s.parse().expect("seed is an integer"));
    let (snapshot, truth) = trajectory_corpus(seed, 25);
    let trajectories = build_trajectories(&snapshot, &TrajectoryConfig::default());
    let config = ClusterConfig { seed, ..ClusterConfig::default() };
    let model = cluster_trajectories(&trajectories, &config).expect("enough trajectories");

    println!("{} trajectories, k = {}, inertia {:.1}", trajectories.len(), model.k, model.inertia);
    println!("sizes {:?}\n", model.sizes);
    println!("centroids\n{}", centroids_to_csv(&model));
    println!("elbow\n{}", elbow_to_csv(&model));

    let found: Vec<usize> = trajectories.iter().map(|t| model.assignments[&t.paper_id]).collect();
    let planted: Vec<usize> = trajectories.iter().map(|t| truth[&t.paper_id]).collect();
    println!("planted groups recovered: {}", same_partition(&found, &planted));
}
