use super::RegressionResult;

const COLUMNS: [&str; 7] = ["term", "coef", "std err", "z", "P>|z|", "[0.025", "0.975]"];

fn num(x: f64) -> String {
    format!("{x:.4}")
}

fn cells(result: &RegressionResult) -> Vec<[String; 7]> {
    result
        .terms
        .iter()
        .map(|t| {
            [
                t.name.clone(),
                num(t.coef),
                num(t.std_err),
                format!("{:.3}", t.z),
                format!("{:.3}", t.p),
                num(t.ci_low),
                num(t.ci_high),
            ]
        })
        .collect()
}

pub fn regression_to_markdown(result: &RegressionResult) -> String {
    let mut out = format!("Complete cases: {}\n\n", result.n_obs);
    out.push_str(&format!("| {} |\n", COLUMNS.join(" | ").replace("P>|z|", "P>\\|z\\|")));
    out.push_str(&format!("|{}\n", "---|".repeat(COLUMNS.len())));
    for row in cells(result) {
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    if let Some(d) = &result.diagnostics {
        out.push_str("\n| regressor | VIF |\n|---|---|\n");
        for (name, v) in &d.vif {
            out.push_str(&format!("| {name} | {:.3} |\n", v));
        }
        out.push_str(&format!(
            "\nBreusch-Pagan: statistic {:.4}, df {}, p {:.4}\n",
            d.breusch_pagan.statistic, d.breusch_pagan.df, d.breusch_pagan.p_value
        ));
        out.push_str(&format!(
            "White: statistic {:.4}, df {}, p {:.4}",
            d.white.statistic, d.white.df, d.white.p_value
        ));
        if !d.white.dropped.is_empty() {
            out.push_str(&format!(" ({} collinear auxiliary term(s) dropped)", d.white.dropped.len()));
        }
        out.push('\n');
    }
    for note in &result.notes {
        out.push_str(&format!("\nNote: {note}"));
    }
    if !result.notes.is_empty() {
        out.push('\n');
    }
    out
}

/// Coefficient table followed by `diagnostic,name,value` rows.
pub fn regression_to_csv(result: &RegressionResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).unwrap();
    for row in cells(result) {
        w.write_record(&row).unwrap();
    }
    let mut out = String::from_utf8(w.into_inner().unwrap()).unwrap();
    out.push_str(&format!("\ndiagnostic,name,value\nn_obs,,{}\n", result.n_obs));
    if let Some(d) = &result.diagnostics {
        for (name, v) in &d.vif {
            out.push_str(&format!("vif,{name},{v}\n"));
        }
        out.push_str(&format!("breusch_pagan,statistic,{}\n", d.breusch_pagan.statistic));
        out.push_str(&format!("breusch_pagan,p,{}\n", d.breusch_pagan.p_value));
        out.push_str(&format!("white,statistic,{}\n", d.white.statistic));
        out.push_str(&format!("white,p,{}\n", d.white.p_value));
    }
    out
}

pub fn regression_to_json(result: &RegressionResult) -> String {
    let mut s = serde_json::to_string_pretty(result).unwrap();
    s.push('\n');
    s
}
