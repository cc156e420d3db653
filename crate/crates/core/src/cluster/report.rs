use super::ClusterModel;

fn offset_label(t: i32) -> String {
    match t {
        0 => "t0".to_string(),
        t if t > 0 => format!("t+{t}"),
        t => format!("t{t}"),
    }
}

/// `paper_id,cluster` rows ordered by paper id.
pub fn assignments_to_csv(model: &ClusterModel) -> String {
    let mut out = String::from("paper_id,cluster\n");
    for (id, c) in &model.assignments {
        out.push_str(&format!("{},{c}\n", csv_field(id)));
    }
    out
}

/// Mean trajectory and size of each cluster.
pub fn centroids_to_csv(model: &ClusterModel) -> String {
    let mut out = String::from("cluster,size");
    for &t in &model.offsets {
        out.push(',');
        out.push_str(&offset_label(t));
    }
    out.push('\n');
    for (j, c) in model.centroids.iter().enumerate() {
        out.push_str(&format!("{j},{}", model.sizes[j]));
        for v in c {
            out.push_str(&format!(",{v:.4}"));
        }
        out.push('\n');
    }
    out
}

pub fn elbow_to_csv(model: &ClusterModel) -> String {
    let mut out = String::from("k,inertia\n");
    for (k, v) in &model.per_k_inertia {
        out.push_str(&format!("{k},{v:.6}\n"));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
