use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn mvrm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvrm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn o2() -> String {
    data("o2cons_like.csv").display().to_string()
}

fn water() -> String {
    data("water_like.csv").display().to_string()
}

const O2_FORMULA: &str = "O2 ~ Group * Staphylococci * Time";
const WATER_FORMULA: &str = "cbind(mortality, hardness) ~ location";

#[test]
fn rm_report() {
    let out = mvrm(&[
        "rm",
        "--formula",
        O2_FORMULA,
        "--data",
        &o2(),
        "--subject",
        "Subject",
        "--no-subf",
        "2",
        "--iter",
        "100",
        "--seed",
        "5",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Wald-Type Statistic (WTS):"));
    assert!(text.contains("ANOVA-Type Statistic (ATS):"));
    assert!(text.contains("p-values resampling (100 iterations, seed 5):"));
    let ats_line = text
        .lines()
        .skip_while(|l| !l.starts_with("p-values resampling"))
        .find(|l| l.starts_with("Group "))
        .unwrap();
    assert!(ats_line.trim_end().ends_with("NA"), "{ats_line}");
}

#[test]
fn manova_wide_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = mvrm(&[
        "manova-wide",
        "--formula",
        WATER_FORMULA,
        "--data",
        &water(),
        "--iter",
        "200",
        "--seed",
        "1",
        "--conf-reg",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = std::fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert_eq!(report, stdout(&out));
    assert!(report.contains("modified ANOVA-Type Statistic (MATS):"));
    assert!(report.contains("Confidence region for location:"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(
        json["confidence_region"]["center"]
            .as_array()
            .unwrap()
            .len(),
        2
    );
    let svg = std::fs::read_to_string(out_dir.join("ellipse.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn manova_long_matches_wide() {
    let dir = tempfile::tempdir().unwrap();
    let wide = std::fs::read_to_string(data("water_like.csv")).unwrap();
    let mut lines = wide.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |n: &str| header.iter().position(|h| *h == n).unwrap();
    let mut long = String::from("town,location,what,value\n");
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        for what in ["mortality", "hardness"] {
            long.push_str(&format!(
                "{},{},{what},{}\n",
                i + 1,
                f[col("location")],
                f[col(what)]
            ));
        }
    }
    let long_path = dir.path().join("long.csv");
    std::fs::write(&long_path, long).unwrap();
    let common = ["--iter", "200", "--seed", "3"];
    let w = mvrm(
        &[
            &[
                "manova-wide",
                "--formula",
                WATER_FORMULA,
                "--data",
                &water(),
            ],
            &common[..],
        ]
        .concat(),
    );
    let l = mvrm(
        &[
            &[
                "manova",
                "--formula",
                "value ~ location",
                "--data",
                long_path.to_str().unwrap(),
                "--subject",
                "town",
                "--dimension",
                "what",
            ],
            &common[..],
        ]
        .concat(),
    );
    assert!(
        w.status.success() && l.status.success(),
        "{}{}",
        stderr(&w),
        stderr(&l)
    );
    let body = |s: String| s.split_once("Descriptive:").unwrap().1.to_string();
    assert_eq!(body(stdout(&w)), body(stdout(&l)));
}

#[test]
fn permutation_rejected_for_manova() {
    let out = mvrm(&[
        "manova-wide",
        "--formula",
        WATER_FORMULA,
        "--data",
        &water(),
        "--iter",
        "10",
        "--resampling",
        "perm",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("permutation"));
}

#[test]
fn unknown_column_exit_code() {
    let out = mvrm(&[
        "rm",
        "--formula",
        "O2 ~ Group * Time",
        "--data",
        &o2(),
        "--subject",
        "Patient",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("unknown column `Patient`") && err.contains("Subject"),
        "{err}"
    );
}

#[test]
fn mixed_design_rejected() {
    let out = mvrm(&[
        "rm",
        "--formula",
        "O2 ~ Group * Time + Group:Staphylococci",
        "--data",
        &o2(),
        "--subject",
        "Subject",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out)
        .contains("Designs involving both crossed and nested factors are not implemented"));
}

#[test]
fn plot_needs_a_factor_selection() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvrm(&[
        "rm",
        "--formula",
        O2_FORMULA,
        "--data",
        &o2(),
        "--subject",
        "Subject",
        "--no-subf",
        "2",
        "--iter",
        "10",
        "--plot",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("Group") && err.contains("Time"), "{err}");
}

#[test]
fn plot_unknown_factor_lists_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvrm(&[
        "rm",
        "--formula",
        O2_FORMULA,
        "--data",
        &o2(),
        "--subject",
        "Subject",
        "--no-subf",
        "2",
        "--iter",
        "10",
        "--plot-factor",
        "Dose",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("Dose") && err.contains("Staphylococci"),
        "{err}"
    );
}

#[test]
fn plot_files_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvrm(&[
        "rm",
        "--formula",
        O2_FORMULA,
        "--data",
        &o2(),
        "--subject",
        "Subject",
        "--no-subf",
        "2",
        "--iter",
        "10",
        "--plot-factor",
        "Group:Time",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("plot.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    assert!(dir.path().join("plot.svg").exists());
}

#[test]
fn separator_option() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("water_like.csv")).unwrap();
    let semi = dir.path().join("semi.csv");
    std::fs::write(&semi, text.replace(',', ";")).unwrap();
    let run = |path: &str, extra: &[&str]| {
        mvrm(
            &[
                &[
                    "manova-wide",
                    "--formula",
                    WATER_FORMULA,
                    "--data",
                    path,
                    "--iter",
                    "50",
                    "--seed",
                    "2",
                ],
                extra,
            ]
            .concat(),
        )
    };
    let a = run(&water(), &[]);
    let b = run(semi.to_str().unwrap(), &["--sep", ";"]);
    assert!(b.status.success(), "{}", stderr(&b));
    assert_eq!(stdout(&a), stdout(&b));
}
