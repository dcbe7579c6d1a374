use mvrm_core::analysis::{run_analysis, AnalysisRequest};
use mvrm_core::design::{parse_formula, FormulaMode};
use mvrm_core::io::{load_long, load_wide, parse_table, CsvDialect, IngestOptions, LoadedData};
use mvrm_core::Error;

fn o2_long(sep: char, decimal: char) -> String {
    let mut s = format!("O2{sep}Group{sep}Staphylococci{sep}Time{sep}Subject\n");
    let mut k = 0;
    for (g, subjects) in [("P", 1..=3), ("V", 4..=6)] {
        for subj in subjects {
            for staph in ["0", "1"] {
                for time in ["6", "12", "18"] {
                    k += 1;
                    let v = format!("{}.{:03}", k % 7, (k * 37) % 1000)
                        .replace('.', &decimal.to_string());
                    s.push_str(&format!("{v}{sep}{g}{sep}{staph}{sep}{time}{sep}{subj}\n"));
                }
            }
        }
    }
    s
}

fn load_rm(text: &str, dialect: &CsvDialect) -> mvrm_core::Result<LoadedData> {
    let parsed = parse_formula("O2 ~ Group * Staphylococci * Time", FormulaMode::Rm)?;
    let table = parse_table(text.as_bytes(), dialect)?;
    load_long(
        &table,
        &parsed,
        FormulaMode::Rm,
        "Subject",
        2,
        dialect,
        &IngestOptions::default(),
    )
}

#[test]
fn rm_layout_from_long_data() {
    let loaded = load_rm(&o2_long(',', '.'), &CsvDialect::default()).unwrap();
    assert_eq!(loaded.layout.a(), 2);
    assert_eq!(loaded.layout.d(), 6);
    assert_eq!(loaded.dataset.subjects().len(), 6);
    let effects: Vec<&str> = loaded
        .layout
        .effects
        .iter()
        .map(|e| e.name.as_str())
        .collect();
    assert_eq!(
        effects,
        [
            "Group",
            "Staphylococci",
            "Group:Staphylococci",
            "Time",
            "Group:Time",
            "Staphylococci:Time",
            "Group:Staphylococci:Time"
        ]
    );
}

#[test]
fn time_levels_sort_numerically() {
    let loaded = load_rm(&o2_long(',', '.'), &CsvDialect::default()).unwrap();
    let time = loaded
        .layout
        .factors
        .iter()
        .find(|f| f.name == "Time")
        .unwrap();
    assert_eq!(time.levels, ["6", "12", "18"]);
}

#[test]
fn semicolon_and_decimal_comma_match_default_dialect() {
    let plain = load_rm(&o2_long(',', '.'), &CsvDialect::default()).unwrap();
    let euro = CsvDialect {
        separator: b';',
        decimal: ',',
        has_header: true,
    };
    let other = load_rm(&o2_long(';', ','), &euro).unwrap();
    assert_eq!(plain.dataset, other.dataset);
}

#[test]
fn unknown_column_lists_available_columns() {
    let parsed = parse_formula("O2 ~ Group * Time", FormulaMode::Rm).unwrap();
    let table = parse_table(o2_long(',', '.').as_bytes(), &CsvDialect::default()).unwrap();
    let err = load_long(
        &table,
        &parsed,
        FormulaMode::Rm,
        "Patient",
        1,
        &CsvDialect::default(),
        &IngestOptions::default(),
    )
    .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("Patient"), "{msg}");
    assert!(
        msg.contains("O2, Group, Staphylococci, Time, Subject"),
        "{msg}"
    );
}

#[test]
fn omitted_subplot_factor_is_a_duplicate_record() {
    let parsed = parse_formula("O2 ~ Group * Time", FormulaMode::Rm).unwrap();
    let table = parse_table(o2_long(',', '.').as_bytes(), &CsvDialect::default()).unwrap();
    let err = load_long(
        &table,
        &parsed,
        FormulaMode::Rm,
        "Subject",
        1,
        &CsvDialect::default(),
        &IngestOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::DuplicateRecord { .. }), "{err}");
}

const WIDE: &str = "g,y1,y2\na,1.0,10\na,2.0,14\na,4.5,11\nb,3.0,20\nb,NA,25\nb,5.0,21\nb,6.5,30\n";

fn wide(formula: &str, opts: &IngestOptions) -> mvrm_core::Result<LoadedData> {
    let parsed = parse_formula(formula, FormulaMode::ManovaWide)?;
    let table = parse_table(WIDE.as_bytes(), &CsvDialect::default())?;
    load_wide(&table, &parsed, &CsvDialect::default(), opts)
}

#[test]
fn missing_value_fails_without_na_drop() {
    let err = wide("cbind(y1, y2) ~ g", &IngestOptions::default()).unwrap_err();
    assert!(matches!(err, Error::MissingData { .. }), "{err}");
}

#[test]
fn na_drop_removes_the_subject() {
    let opts = IngestOptions {
        na_drop: true,
        ..Default::default()
    };
    let loaded = wide("cbind(y1, y2) ~ g", &opts).unwrap();
    assert_eq!(loaded.dropped_subjects, ["5"]);
    assert_eq!(loaded.dataset.cell_sizes(), [3, 3]);
}

#[test]
fn cbind_order_sets_component_order() {
    let opts = IngestOptions {
        na_drop: true,
        ..Default::default()
    };
    let a = wide("cbind(y1, y2) ~ g", &opts).unwrap();
    let b = wide("cbind(y2, y1) ~ g", &opts).unwrap();
    assert_eq!(a.layout.components, ["y1", "y2"]);
    assert_eq!(b.layout.components, ["y2", "y1"]);
    for (sa, sb) in a.dataset.subjects().iter().zip(b.dataset.subjects()) {
        assert_eq!(sa.values, [sb.values[1], sb.values[0]]);
    }
}

#[test]
fn headerless_input_uses_generated_names() {
    let dialect = CsvDialect {
        has_header: false,
        ..Default::default()
    };
    let body = WIDE
        .lines()
        .skip(1)
        .filter(|l| !l.contains("NA"))
        .collect::<Vec<_>>()
        .join("\n");
    let table = parse_table(body.as_bytes(), &dialect).unwrap();
    assert_eq!(table.headers, ["V1", "V2", "V3"]);
    let parsed = parse_formula("cbind(V2, V3) ~ V1", FormulaMode::ManovaWide).unwrap();
    let loaded = load_wide(&table, &parsed, &dialect, &IngestOptions::default()).unwrap();
    assert_eq!(loaded.dataset.cell_sizes(), [3, 3]);
}

#[test]
fn unparsable_number_names_row_and_column() {
    let text = "g,y1,y2\na,1.0,x7\na,2.0,3\n";
    let parsed = parse_formula("cbind(y1, y2) ~ g", FormulaMode::ManovaWide).unwrap();
    let table = parse_table(text.as_bytes(), &CsvDialect::default()).unwrap();
    let err = load_wide(
        &table,
        &parsed,
        &CsvDialect::default(),
        &IngestOptions::default(),
    )
    .unwrap_err();
    let msg = err.to_string();
    assert!(
        msg.contains("y2") && msg.contains("x7") && msg.contains("row 2"),
        "{msg}"
    );
}

#[test]
fn single_subject_cell_fails_in_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    std::fs::write(&path, "g,y1,y2\na,1,2\na,2,5\na,3,3\nb,4,1\n").unwrap();
    let mut req = AnalysisRequest::new(FormulaMode::ManovaWide, "cbind(y1, y2) ~ g", &path);
    req.iterations = 10;
    let err = run_analysis(&req).unwrap_err();
    let msg = err.to_string();
    assert!(msg.starts_with("summary:"), "{msg}");
    assert!(msg.contains("n = 1"), "{msg}");
}

#[test]
fn long_manova_components_follow_row_order_without_dimension_column() {
    let text =
        "id,g,v\n1,a,1\n1,a,10\n2,a,2\n2,a,12\n3,a,4\n3,a,11\n4,b,3\n4,b,20\n5,b,5\n5,b,24\n";
    let parsed = parse_formula("v ~ g", FormulaMode::ManovaLong).unwrap();
    let table = parse_table(text.as_bytes(), &CsvDialect::default()).unwrap();
    let loaded = load_long(
        &table,
        &parsed,
        FormulaMode::ManovaLong,
        "id",
        0,
        &CsvDialect::default(),
        &IngestOptions::default(),
    )
    .unwrap();
    assert_eq!(loaded.layout.components, ["Mean 1", "Mean 2"]);
    assert_eq!(loaded.dataset.subjects()[0].values, [1.0, 10.0]);
}
