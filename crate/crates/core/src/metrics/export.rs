use super::{Feature, FeatureVector, QualityFlag};

pub const CSV_HEADER: [&str; 13] = [
    "dataset_id",
    "eval_year",
    "n_frames",
    "n_sensors",
    "a_pub",
    "ref_h3",
    "aut_mu_h3",
    "n_cit3",
    "cit_h3",
    "aas_curr",
    "aas_3m",
    "n_readers",
    "flags",
];

fn flag_name(flag: QualityFlag) -> &'static str {
    match flag {
        QualityFlag::CitH3BeforeAvailability => "cit_h3_before_availability",
        QualityFlag::AltmetricStale => "altmetric_stale",
        QualityFlag::NoLinkedPaper => "no_linked_paper",
    }
}

/// One row per vector; absent features are empty cells.
pub fn features_to_csv(vectors: &[FeatureVector]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).unwrap();
    for fv in vectors {
        let mut row = vec![fv.dataset_id.clone(), fv.eval_year.to_string()];
        row.extend(
            Feature::ALL
                .iter()
                .map(|&f| fv.get(f).map(|v| v.to_string()).unwrap_or_default()),
        );
        row.push(fv.flags.iter().map(|&f| flag_name(f)).collect::<Vec<_>>().join(";"));
        w.write_record(&row).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Reads a table written by [`features_to_csv`].
pub fn features_from_csv(text: &str) -> Result<Vec<FeatureVector>, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("dataset_id").ok_or("missing dataset_id column")?;
    let year_col = col("eval_year").ok_or("missing eval_year column")?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = i + 2;
        let year = rec[year_col]
            .parse()
            .map_err(|_| format!("line {line}: bad eval_year {:?}", &rec[year_col]))?;
        let mut fv = FeatureVector::empty(&rec[id_col], year);
        for f in Feature::ALL {
            let Some(c) = col(f.name()) else { continue };
            let cell = rec.get(c).unwrap_or("").trim();
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| format!("line {line}: bad {} value {cell:?}", f.name()))?;
            fv.set(f, Some(v));
        }
        if let Some(c) = col("flags") {
            for name in rec.get(c).unwrap_or("").split(';').filter(|s| !s.is_empty()) {
                let flag = [
                    QualityFlag::CitH3BeforeAvailability,
                    QualityFlag::AltmetricStale,
                    QualityFlag::NoLinkedPaper,
                ]
                .into_iter()
                .find(|&f| flag_name(f) == name)
                .ok_or_else(|| format!("line {line}: unknown flag {name:?}"))?;
                fv.flags.push(flag);
            }
        }
        out.push(fv);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absent_values_are_empty_cells() {
        let mut fv = FeatureVector::empty("d,1", 2022);
        fv.n_frames = Some(1000);
        fv.aut_mu_h3 = Some(2.5);
        fv.flags.push(QualityFlag::AltmetricStale);
        let csv = features_to_csv(&[fv.clone()]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "\"d,1\",2022,1000,,,,2.5,,,,,,altmetric_stale");
        assert_eq!(features_from_csv(&csv).unwrap(), vec![fv]);
    }
}
