use std::path::Path;
use std::process::{Command, Output};

use gridldp::query::aqe;
use gridldp_bench::results::{read_results, summarize};

fn gridldp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridldp"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = gridldp(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: [&str; 6] = ["--users", "8000", "--reps", "2", "--seed", "5"];

#[test]
fn single_uniform_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        ok(&[
            "sweep-uniform",
            "--users",
            "5000",
            "--reps",
            "1",
            "--n",
            "8",
            "--out",
            s(path),
        ]);
    }
    let rows = read_results(&a).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].n, Some(8));
    assert_eq!(rows[0].cell_count, 64);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn compare_emits_a_row_per_method_epsilon_rho_and_rep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let run = ok(&[
        &[
            "compare", "--rho", "0.001", "--rho", "0.01", "--n", "4", "--n", "8",
        ],
        &SMALL[..],
        &["--epsilon", "1", "--epsilon", "2", "--out", s(&out)],
    ]
    .concat());
    let rows = read_results(&out).unwrap();
    assert_eq!(rows.len(), 3 * 2 * 2 * 2);
    assert!(rows
        .iter()
        .all(|r| r.aqe.unwrap() >= 0.0 && r.cell_count >= 1));
    assert!(rows.iter().all(|r| r.wall_time_ms.is_none()));
    assert!(rows
        .iter()
        .filter(|r| r.method == "ug")
        .all(|r| matches!(r.n, Some(4) | Some(8))));
    assert!(rows
        .iter()
        .filter(|r| r.method != "ug")
        .all(|r| r.n.is_none()));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("ug: epsilon 1 uses N ="));
    assert!(stderr.contains("mean_aqe"));
}

#[test]
fn whole_domain_queries_only_measure_the_total() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let answers = dir.path().join("a.csv");
    ok(&[
        &[
            "compare", "--method", "ug", "--n", "6", "--rho", "1", "--gamma", "4",
        ],
        &SMALL[..],
        &["--out", s(&out), "--dump-answers", s(&answers)],
    ]
    .concat());
    let mut r = csv::Reader::from_path(&answers).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[6], "8000");
    }
}

#[test]
fn dumped_answers_reproduce_the_reported_aqe() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let answers = dir.path().join("a.csv");
    let workload = dir.path().join("w.csv");
    ok(&[
        &[
            "compare", "--rho", "0.001", "--rho", "0.05", "--n", "6", "--gamma", "30",
        ],
        &SMALL[..],
        &[
            "--out",
            s(&out),
            "--dump-answers",
            s(&answers),
            "--dump-workload",
            s(&workload),
        ],
    ]
    .concat());
    let rows = read_results(&out).unwrap();
    let mut r = csv::Reader::from_path(&answers).unwrap();
    let recs: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    for row in &rows {
        let (truths, noisy): (Vec<u64>, Vec<f64>) = recs
            .iter()
            .filter(|a| {
                a[0] == *row.method
                    && a[1].parse::<f64>().unwrap() == row.epsilon
                    && a[2].parse::<f64>().unwrap() == row.rho.unwrap()
                    && a[4].parse::<usize>().unwrap() == row.rep
            })
            .map(|a| (a[6].parse::<u64>().unwrap(), a[7].parse::<f64>().unwrap()))
            .unzip();
        assert_eq!(truths.len(), 30);
        assert_eq!(aqe(&truths, &noisy, 8000).unwrap(), row.aqe.unwrap());
    }
    let mut w = csv::Reader::from_path(&workload).unwrap();
    assert_eq!(w.records().count(), 2 * 2 * 30);
}

#[test]
fn methods_share_workloads_within_a_rep() {
    let dir = tempfile::tempdir().unwrap();
    let dump = |method: &str, name: &str| {
        let path = dir.path().join(name);
        ok(&[
            &[
                "compare", "--method", method, "--n", "5", "--rho", "0.01", "--gamma", "20",
            ],
            &SMALL[..],
            &[
                "--out",
                s(&dir.path().join("r.csv")),
                "--dump-workload",
                s(&path),
            ],
        ]
        .concat());
        std::fs::read(path).unwrap()
    };
    assert_eq!(dump("privag", "p.csv"), dump("aag", "a.csv"));
}

#[test]
fn gridinfo_reports_initial_and_final_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    ok(&[
        &[
            "gridinfo",
            "--epsilon",
            "1",
            "--epsilon",
            "3",
            "--out",
            s(&out),
        ],
        &SMALL[..],
    ]
    .concat());
    let rows = read_results(&out).unwrap();
    let g1: Vec<_> = rows.iter().filter(|r| r.method == "g1").collect();
    assert_eq!(g1.len(), 2);
    assert!(rows.iter().all(|r| r.aqe.is_none() && r.rho.is_none()));
    let summary = summarize(&rows);
    for eps in [1.0, 3.0] {
        let cells = |m: &str| {
            summary
                .iter()
                .find(|s| s.method == m && s.epsilon == eps)
                .unwrap()
                .mean_cells
        };
        assert!(cells("privag") >= cells("g1"));
        assert!(cells("aag") >= cells("g1"));
    }
}

#[test]
fn gridinfo_rejects_uniform_grids() {
    let out = gridldp(&["gridinfo", "--method", "ug", "--users", "1000"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("adaptive"));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    let out = dir.path().join("r.csv");
    std::fs::write(
        &cfg,
        format!(
            "# small run\ndataset = uniform\nusers = 4000\nmethods = aag\nreps = 1\nrhos = 0.01\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    ok(&["compare", "--config", s(&cfg), "--epsilon", "2", "--timing"]);
    let rows = read_results(&out).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].method.as_str(), rows[0].epsilon), ("aag", 2.0));
    assert_eq!(rows[0].dataset, "uniform");
    assert!(rows[0].wall_time_ms.is_some());
}

#[test]
fn invalid_settings_fail_with_a_diagnostic() {
    for args in [
        &["compare", "--rho", "1.5"][..],
        &["compare", "--epsilon", "-1"],
        &["compare", "--reps", "0"],
        &["compare", "--method", "quadtree"],
        &["compare", "--bbox", "1,2,3"],
        &["compare", "--dataset", "/no/such/file.csv"],
        &["compare", "--config", "/no/such/config"],
    ] {
        let out = gridldp(args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn synthesized_csv_loads_with_a_bounding_box() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("pts.csv");
    ok(&[
        "synth",
        "--dataset",
        "uniform",
        "--users",
        "2000",
        "--out",
        s(&points),
    ]);
    let text = std::fs::read_to_string(&points).unwrap();
    assert_eq!(text.lines().count(), 2001);
    assert!(text.starts_with("lon,lat\n"));

    let out = dir.path().join("r.csv");
    let run = ok(&[
        "sweep-uniform",
        "--dataset",
        s(&points),
        "--bbox",
        "0,0,0.5,1",
        "--n",
        "3",
        "--reps",
        "1",
        "--out",
        s(&out),
    ]);
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("kept"), "{stderr}");
    let rows = read_results(&out).unwrap();
    assert_eq!(rows[0].dataset, "pts");
}

#[test]
fn results_go_to_stdout_without_an_output_path() {
    let out = ok(&[
        "sweep-uniform",
        "--users",
        "3000",
        "--reps",
        "1",
        "--n",
        "3",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("dataset,method,epsilon,rho,N,rep,aqe,cell_count,wall_time_ms\n"));
    assert_eq!(text.lines().count(), 2);
}
