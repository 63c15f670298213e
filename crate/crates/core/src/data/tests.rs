use proptest::prelude::*;

use super::*;

const HEADER: &str = "encounter_id,patient_nbr,race,gender,age,weight,admission_type_id,discharge_disposition_id,admission_source_id,time_in_hospital,payer_code,medical_specialty,num_lab_procedures,num_procedures,num_medications,number_outpatient,number_emergency,number_inpatient,diag_1,diag_2,diag_3,number_diagnoses,insulin,readmitted,extra_note";

fn row(race: &str, age: &str, time: &str, diag: &str, readmit: &str) -> String {
    format!("1,2,{race},Female,{age},?,1,1,7,{time},?,?,40,1,10,0,0,0,{diag},250,?,5,No,{readmit},hello")
}

fn table(rows: &[String]) -> RawTable {
    let mut text = String::from(HEADER);
    for r in rows {
        text.push('\n');
        text.push_str(r);
    }
    read_records(text.as_bytes()).unwrap()
}

fn feature(ds: &Dataset, name: &str) -> Vec<f64> {
    let j = ds.names.iter().position(|n| n == name).unwrap_or_else(|| panic!("no feature {name}"));
    (0..ds.len()).map(|i| ds.row(i)[j]).collect()
}

#[test]
fn empty_data_section_gives_empty_table() {
    let t = read_records(HEADER.as_bytes()).unwrap();
    assert!(t.is_empty());
    assert_eq!(t.names.len(), 25);
}

#[test]
fn missing_columns_are_listed() {
    let err = read_records("race,gender,readmitted\nA,B,NO".as_bytes()).unwrap_err();
    match err {
        DataError::Schema(cols) => {
            assert!(cols.contains(&"age".to_string()) && cols.contains(&"diag_1".to_string()));
            assert!(!cols.contains(&"race".to_string()));
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn question_mark_is_missing_and_extras_are_kept() {
    let t = table(&[row("?", "[50-60)", "3", "428", "<30")]);
    let race = t.column_index("race").unwrap();
    assert_eq!(t.text(0, race), None);
    assert_eq!(t.text(0, t.column_index("extra_note").unwrap()), Some("hello"));
    assert_eq!(t.number(0, t.column_index("time_in_hospital").unwrap()), Some(3.0));
    let bad = table(&[row("A", "[50-60)", "3", "428", "NO")]);
    assert!(bad.len() == 1);
    let text = format!("{HEADER}\n{}", row("A", "[50-60)", "x", "428", "NO"));
    assert!(matches!(read_records(text.as_bytes()), Err(DataError::Format(_))));
}

#[test]
fn icd9_grouping() {
    let g = |c: &str| ICD9_GROUPS[icd9_group(Some(c))];
    assert_eq!(g("250.83"), "diabetes");
    assert_eq!(g("250"), "diabetes");
    assert_eq!(g("428"), "circulatory");
    assert_eq!(g("785"), "circulatory");
    assert_eq!(g("486"), "respiratory");
    assert_eq!(g("786"), "respiratory");
    assert_eq!(g("530"), "digestive");
    assert_eq!(g("787"), "digestive");
    assert_eq!(g("996"), "injury");
    assert_eq!(g("715"), "musculoskeletal");
    assert_eq!(g("599"), "genitourinary");
    assert_eq!(g("788"), "genitourinary");
    assert_eq!(g("174"), "neoplasms");
    assert_eq!(g("V57"), "other");
    assert_eq!(g("E888"), "other");
    assert_eq!(g("276"), "other");
    assert_eq!(g("?"), "missing");
    assert_eq!(g("abc"), "missing");
    assert_eq!(ICD9_GROUPS[icd9_group(None)], "missing");
}

#[test]
fn numeric_scaling_and_constant_columns() {
    let t = table(&[
        row("A", "[50-60)", "2", "428", "NO"),
        row("B", "[50-60)", "4", "428", "<30"),
        row("A", "[50-60)", "6", "428", ">30"),
    ]);
    let spec = preprocess_fit(&t, PreprocessOptions::default()).unwrap();
    let FeatureSpec::Numeric(time) = &spec.features[spec
        .features
        .iter()
        .position(|f| matches!(f, FeatureSpec::Numeric(s) if s.name == "time_in_hospital"))
        .unwrap()]
    else {
        unreachable!()
    };
    assert_eq!((time.min, time.max, time.median), (2.0, 6.0, 4.0));
    let ds = preprocess_apply(&spec, &t).unwrap();
    assert_eq!(feature(&ds, "time_in_hospital"), vec![0.0, 0.5, 1.0]);
    assert_eq!(feature(&ds, "num_lab_procedures"), vec![0.0; 3]);
    assert_eq!(feature(&ds, "race=A"), vec![1.0, 0.0, 1.0]);
    assert_eq!(feature(&ds, "race=B"), vec![0.0, 1.0, 0.0]);
    assert_eq!(ds.y, vec![0.0, 1.0, 0.0]);
    assert_eq!(feature(&ds, "diag_1=circulatory"), vec![1.0; 3]);
    for dropped in ["weight", "payer_code", "medical_specialty", "encounter_id", "patient_nbr", "extra_note"] {
        assert!(!ds.names.iter().any(|n| n.starts_with(dropped)), "{dropped} leaked");
    }
    assert!(!ds.names.iter().any(|n| n.starts_with("diag_2")));
}

#[test]
fn unseen_categories_and_out_of_range_values() {
    let train = table(&[row("A", "[50-60)", "2", "428", "NO"), row("B", "[60-70)", "6", "V57", "NO")]);
    let test = table(&[row("C", "[90-100)", "14", "250.1", "<30"), row("?", "[50-60)", "?", "428", "NO")]);
    let spec = preprocess_fit(&train, PreprocessOptions::default()).unwrap();
    let ds = preprocess_apply(&spec, &test).unwrap();
    assert_eq!(feature(&ds, "race=A"), vec![0.0, 0.0]);
    assert_eq!(feature(&ds, "race=B"), vec![0.0, 0.0]);
    assert_eq!(feature(&ds, "age=[50-60)"), vec![0.0, 1.0]);
    // 14 clamps to 1; the missing value takes the train median (4).
    assert_eq!(feature(&ds, "time_in_hospital"), vec![1.0, 0.5]);
    assert!(ds.x.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn missing_category_is_its_own_level() {
    let t = table(&[row("?", "[50-60)", "2", "428", "NO"), row("A", "[50-60)", "3", "428", "NO")]);
    let spec = preprocess_fit(&t, PreprocessOptions::default()).unwrap();
    let ds = preprocess_apply(&spec, &t).unwrap();
    assert_eq!(feature(&ds, "race=<missing>"), vec![1.0, 0.0]);
}

#[test]
fn ordinal_age_and_secondary_diagnoses() {
    let t = table(&[row("A", "[50-60)", "2", "428", "NO"), row("A", "[70-80)", "3", "428", "NO")]);
    let opts = PreprocessOptions { ordinal_age: true, group_secondary: true };
    let spec = preprocess_fit(&t, opts).unwrap();
    let ds = preprocess_apply(&spec, &t).unwrap();
    assert_eq!(feature(&ds, "age"), vec![0.0, 1.0]);
    assert_eq!(feature(&ds, "diag_2=diabetes"), vec![1.0, 1.0]);
    assert_eq!(feature(&ds, "diag_3=missing"), vec![1.0, 1.0]);
}

#[test]
fn spec_text_roundtrip_and_digest() {
    let t = synthesize_records(300, 4).unwrap();
    let spec = preprocess_fit(&t, PreprocessOptions::default()).unwrap();
    let text = spec.to_text();
    let back = PreprocessSpec::from_text(&text).unwrap();
    assert_eq!(back, spec);
    assert_eq!(back.digest(), spec.digest());
    let again = preprocess_fit(&synthesize_records(300, 4).unwrap(), PreprocessOptions::default()).unwrap();
    assert_eq!(again.digest_hex(), spec.digest_hex());
    let other = preprocess_fit(&synthesize_records(300, 5).unwrap(), PreprocessOptions::default()).unwrap();
    assert_ne!(other.digest(), spec.digest());
    assert!(PreprocessSpec::from_text("garbage").is_err());
    assert!(PreprocessSpec::from_text(&text.replace("circulatory", "heart")).is_err());
}

#[test]
fn fitted_range_is_exactly_unit() {
    let t = synthesize_records(500, 1).unwrap();
    let spec = preprocess_fit(&t, PreprocessOptions::default()).unwrap();
    let ds = preprocess_apply(&spec, &t).unwrap();
    assert_eq!(ds.d, spec.dim());
    for j in 0..ds.d {
        let col: Vec<f64> = (0..ds.len()).map(|i| ds.row(i)[j]).collect();
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo != hi {
            assert_eq!((lo, hi), (0.0, 1.0), "feature {}", ds.names[j]);
        }
    }
    assert!(ds.x.iter().all(|v| v.is_finite()));
}

#[test]
fn csv_roundtrip_of_records() {
    let t = synthesize_records(50, 2).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    assert_eq!(read_records(buf.as_slice()).unwrap(), t);
}

#[test]
fn split_sizes_and_determinism() {
    assert_eq!(split_indices(4, 0.75, 1).0.len(), 3);
    assert_eq!(split_indices(4, 0.75, 1).1.len(), 1);
    assert_eq!(split_indices(101, 0.75, 3).0.len(), 75);
    assert_eq!(split_indices(1000, 0.75, 9), split_indices(1000, 0.75, 9));
    assert_ne!(split_indices(1000, 0.75, 9), split_indices(1000, 0.75, 10));
}

proptest! {
    #[test]
    fn split_is_a_partition(n in 4usize..300, seed in any::<u64>()) {
        let ds = synthesize(n, 2, 0.3, 1.0, seed).unwrap();
        let (a, b) = ds.split(0.75, seed);
        prop_assert_eq!(a.len(), n * 3 / 4);
        prop_assert_eq!(a.len() + b.len(), n);
        let key = |d: &Dataset, i: usize| (d.row(i).iter().map(|v| v.to_bits()).collect::<Vec<_>>(), d.y[i].to_bits());
        let mut joined: Vec<_> = (0..a.len()).map(|i| key(&a, i)).chain((0..b.len()).map(|i| key(&b, i))).collect();
        let mut orig: Vec<_> = (0..n).map(|i| key(&ds, i)).collect();
        joined.sort();
        orig.sort();
        prop_assert_eq!(joined, orig);
    }

    #[test]
    fn minmax_output_in_unit_box(seed in any::<u64>()) {
        let ds = mimic_raw_scales(&synthesize(50, 3, 0.5, 1.0, seed).unwrap(), seed);
        let sc = MinMaxScaler::fit(&ds);
        let out = sc.transform(&ds);
        prop_assert!(out.x.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn cache_roundtrip_and_tamper_detection() {
    let ds = synthesize(40, 3, 0.2, 2.0, 1).unwrap();
    let mut buf = Vec::new();
    ds.write_to(&mut buf).unwrap();
    assert_eq!(Dataset::read_from(&mut buf.as_slice()).unwrap(), ds);
    buf[30] ^= 1;
    assert!(matches!(Dataset::read_from(&mut buf.as_slice()), Err(DataError::Digest)));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bin");
    ds.save(&path).unwrap();
    assert_eq!(Dataset::load(&path).unwrap(), ds);
}

fn auc(scores: &[f64], y: &[f64]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(y).filter(|(_, &l)| l == 1.0).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(y).filter(|(_, &l)| l == 0.0).map(|(s, _)| *s).collect();
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

#[test]
fn synthetic_signal_strength() {
    let ds = synthesize(4000, 5, 0.1, 0.0, 3).unwrap();
    assert!((ds.positive_rate() - 0.1).abs() < 0.02);
    assert!(ds.x.iter().all(|v| (0.0..1.0).contains(v)));
    let first: Vec<f64> = (0..ds.len()).map(|i| ds.row(i)[0]).collect();
    assert!((auc(&first, &ds.y) - 0.5).abs() < 0.03);

    // Oracle: a logistic regression fitted by full-batch gradient descent.
    let strong = synthesize(4000, 5, 0.1, 8.0, 3).unwrap();
    let mut w = vec![0.0; 6];
    for _ in 0..2000 {
        let mut g = vec![0.0; 6];
        for i in 0..strong.len() {
            let r = strong.row(i);
            let z = w[5] + r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let e = 1.0 / (1.0 + (-z).exp()) - strong.y[i];
            r.iter().enumerate().for_each(|(j, a)| g[j] += e * a);
            g[5] += e;
        }
        w.iter_mut().zip(&g).for_each(|(v, d)| *v -= 2.0 * d / strong.len() as f64);
    }
    let s: Vec<f64> = (0..strong.len()).map(|i| strong.row(i).iter().zip(&w).map(|(a, b)| a * b).sum()).collect();
    assert!(auc(&s, &strong.y) >= 0.9, "oracle AUC {}", auc(&s, &strong.y));
    assert_eq!(synthesize(100, 3, 0.2, 1.0, 5).unwrap(), synthesize(100, 3, 0.2, 1.0, 5).unwrap());
    assert!(synthesize(10, 3, 0.0, 1.0, 5).is_err());
}
