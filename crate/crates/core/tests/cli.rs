use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singex3d")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn flat_integrate_matches_oracle() {
    let o = run(&["integrate", "--patch", "flat", "--kernel", "g", "--n", "1", "--source", "0.3,0.6", "--oracle"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let json: serde_json::Value = serde_json::from_str(text.split_once('\n').unwrap().1).unwrap();
    let err = json["oracle"]["abs_error"].as_f64().unwrap();
    assert!(err <= 1e-12, "{err}");
    assert_eq!(json["report"]["mode"], "subtract");
}

#[test]
fn exit_codes() {
    let o = run(&["integrate", "--source", "0.5,0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));

    let o = run(&["integrate", "--kernel", "g", "--source", "0.5"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&[
        "integrate", "--kernel", "hbar", "--mode", "divide", "--n", "2", "--source", "0.6,0.6", "--support",
        "0.55,0.65,0.55,0.65",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("division guard"));
}

#[test]
fn nrefine_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("run{i}.csv"))).collect();
    for p in &paths {
        let o = run(&[
            "nrefine", "--patch", "flat", "--kernel", "g", "--n", "0,1", "--N-schedule", "4,8", "--out",
            p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(&paths[0]).unwrap();
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("kernel,mode,n,N,s1,s2,value,oracle,abs_error"));
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let (v, o, e): (f64, f64, f64) = (f[6].parse().unwrap(), f[7].parse().unwrap(), f[8].parse().unwrap());
        assert_eq!(e, (v - o).abs());
        if f[1] == "subtract" {
            assert!(e <= 1e-12, "{line}");
        }
        rows += 1;
    }
    assert_eq!(rows, 16 * 2 * 2);
}

#[test]
fn hrefine_rejects_oversized_supports() {
    let o = run(&["hrefine", "--h-schedule", "0.9"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn table_build_inspect_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = run(&["table", "build", "--p", "-1", "--nb", "3", "--nc", "5", "--tables-dir", d]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["table", "inspect", "--p", "-1", "--node", "1,2", "--tables-dir", d]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("node (1, 2)")).unwrap();
    let value: f64 = line.rsplit("value=").next().unwrap().parse().unwrap();
    assert!(line.contains("b=0.0000000000000000e0"), "{line}");
    assert!(line.contains("c=1.0000000000000000e0"), "{line}");
    assert!((value - 2.0 * (1.0 + 2f64.sqrt()).ln()).abs() < 1e-14);

    let o = run(&["table", "bench", "--p", "-1", "--queries", "200", "--tables-dir", d]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("fallback_rate="));
}
