use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use redlab_cli::report::Report;
use tempfile::TempDir;

fn studies() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../studies")
}

fn redlab(args: &[&str], cache: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_redlab"));
    cmd.args(args).env_remove("REDLAB_CACHE_DIR");
    if let Some(c) = cache {
        cmd.env("REDLAB_CACHE_DIR", c);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_study(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn study(name: &str) -> String {
    studies().join(name).to_string_lossy().into_owned()
}

#[test]
fn analyze_reports_verdicts_and_witnesses() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = redlab(
        &[
            "analyze",
            "--study",
            &study("obstruction.study"),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = Report::from_json(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let verdict = |name: &str| {
        let t = report.targets.iter().find(|t| t.name == name).unwrap();
        t.criterion.clone().unwrap()
    };
    assert_eq!(verdict("both1").verdict, "Finite");
    assert_eq!(verdict("both0").verdict, "Finite");
    let both2 = verdict("both2");
    assert_eq!(both2.verdict, "PositiveDensity");
    assert_eq!(both2.witnesses[0].coordinates, vec!["i", "-i"]);
    assert!(!both2.conditional_on_declaration);

    let single = write_study(
        &dir,
        "single.study",
        "[points]\ntorus R = 2\n[primes]\nS = 2\n[targets]\nt = 2:R=0\n",
    );
    let o = redlab(&["analyze", "--study", &single], None);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("criterion: PositiveDensity"));
}

#[test]
fn declared_verdicts_carry_the_flag() {
    let o = redlab(&["analyze", "--study", &study("elliptic.study")], None);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("conditional on the declared presentation"));
}

#[test]
fn oracle_prints_exact_and_decimal() {
    let o = redlab(&["oracle", "--study", &study("hasse.study")], None);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("oracle: 7/24 = 0.291667"), "{s}");
}

#[test]
fn scan_to_ten_writes_four_rows() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s");
    let o = redlab(
        &[
            "scan",
            "--study",
            &study("hasse.study"),
            "--bound",
            "10",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(out.join("scan.csv")).unwrap();
    assert_eq!(
        csv,
        "p,status,reason,v_l2_i0\n2,excluded,in_prime_set,\n3,included,,1\n5,included,,2\n7,included,,0\n"
    );
}

#[test]
fn scan_csv_has_label_columns() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s");
    let o = redlab(
        &[
            "scan",
            "--study",
            &study("obstruction.study"),
            "--bound",
            "20",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(out.join("scan.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("p,status,reason,v_l2_i0,v_l2_i1,lpart_l2_i1"));
    // -2 mod 5 = 3 has order 4; its 2-part is a primitive 4th root of unity, label 1
    assert!(csv.contains("\n5,included,,2,2,1\n"), "{csv}");
    // -2 mod 3 = 1: 2-part trivial, no label
    assert!(csv.contains("\n3,included,,1,0,\n"), "{csv}");
}

#[test]
fn density_agrees_with_oracle_for_three() {
    let dir = TempDir::new().unwrap();
    let s = write_study(
        &dir,
        "three.study",
        "name = three\n[points]\ntorus R = 3\n[primes]\nS = 2\n[targets]\nodd = 2:R=0\n",
    );
    let o = redlab(&["density", "--study", &s, "--bound", "10^7"], None);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("oracle: 1/3") && text.contains("agreement: OK"), "{text}");
}

#[test]
fn report_json_regenerates_identical_csv() {
    let dir = TempDir::new().unwrap();
    for name in ["obstruction.study", "hasse.study", "elliptic.study"] {
        let out = dir.path().join(name);
        let o = redlab(
            &[
                "report",
                "--study",
                &study(name),
                "--bound",
                "30000",
                "--out",
                out.to_str().unwrap(),
                "--checkpoints",
                "1e3,1e4",
            ],
            None,
        );
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let json = std::fs::read_to_string(out.join("report.json")).unwrap();
        let csv = std::fs::read(out.join("report.csv")).unwrap();
        let report = Report::from_json(&json).unwrap();
        assert_eq!(report.to_csv().into_bytes(), csv, "{name}");
        assert_eq!(report.to_json(), json);
        let names: Vec<&str> = report.targets.iter().map(|t| t.name.as_str()).collect();
        let mut dedup = names.clone();
        dedup.dedup();
        assert_eq!(names, dedup);
        assert_eq!(report.targets[0].empirical.as_ref().unwrap().series.len(), 3);
    }
}

#[test]
fn seed_does_not_change_numbers() {
    let dir = TempDir::new().unwrap();
    let mut reports = Vec::new();
    for seed in ["1", "987654321"] {
        let out = dir.path().join(seed);
        let o = redlab(
            &[
                "report",
                "--study",
                &study("elliptic.study"),
                "--bound",
                "50000",
                "--seed",
                seed,
                "--threads",
                "3",
                "--out",
                out.to_str().unwrap(),
            ],
            None,
        );
        assert_eq!(code(&o), 0);
        reports.push((
            std::fs::read(out.join("report.json")).unwrap(),
            std::fs::read(out.join("scan.csv")).unwrap(),
        ));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn exit_codes_follow_the_mapping() {
    let dir = TempDir::new().unwrap();
    let bad = write_study(&dir, "bad.study", "[points]\ntorus R = 2\n[primes]\nS = 4\n");
    assert_eq!(code(&redlab(&["analyze", "--study", &bad], None)), 2);
    let o = redlab(&["analyze", "--study", &bad], None);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));

    let no_targets = write_study(&dir, "nt.study", "[points]\ntorus R = 2\n[primes]\nS = 2\n");
    assert_eq!(code(&redlab(&["analyze", "--study", &no_targets], None)), 2);

    // every prime up to 47 divides the base, so nothing below 50 can match
    let primorial = write_study(
        &dir,
        "primorial.study",
        "[points]\ntorus R = 614889782588491410\n[primes]\nS = 3\n[targets]\nt = 3:R=0\n",
    );
    let o = redlab(&["density", "--study", &primorial, "--bound", "50"], None);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    assert!(stdout(&o).contains("agreement: FAILED"));

    let missing = dir.path().join("missing.study");
    assert_eq!(
        code(&redlab(&["analyze", "--study", missing.to_str().unwrap()], None)),
        4
    );
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let o = redlab(
        &[
            "scan",
            "--study",
            &study("hasse.study"),
            "--bound",
            "100",
            "--out",
            blocker.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 4);

    let o = redlab(&["scan", "--study", &study("torsion5.study"), "--bound", "10^7"], None);
    assert_eq!(code(&o), 5);
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget"));
}

#[test]
fn cache_is_reused_and_rebuilt() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("cache");
    let args = ["density", "--study", &study("obstruction.study"), "--bound", "20000"];
    let first = redlab(&args, Some(&cache));
    assert_eq!(code(&first), 0);
    let files: Vec<_> = std::fs::read_dir(&cache).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 1);
    let second = redlab(&args, Some(&cache));
    assert!(stdout(&second).contains("cache hit"));
    assert_eq!(
        stdout(&first),
        stdout(&second).replacen(&format!("cache hit: {}\n", files[0].display()), "", 1)
    );

    std::fs::write(&files[0], b"RDL1 garbage").unwrap();
    let third = redlab(&args, Some(&cache));
    assert_eq!(code(&third), 0);
    assert!(stdout(&third).contains("ignoring cache"));
    let fourth = redlab(&args, Some(&cache));
    assert!(stdout(&fourth).contains("cache hit"));
}
