use std::path::PathBuf;
use std::process::Command;

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/singex3d.h")
}

#[test]
fn every_export_is_declared() {
    let src = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let h = std::fs::read_to_string(header()).unwrap();
    let mut n = 0;
    for line in src.lines() {
        let Some(rest) = line.split("extern \"C\" fn ").nth(1) else { continue };
        let name = rest.split('(').next().unwrap();
        assert!(h.contains(&format!("{name}(")), "{name} missing from header");
        n += 1;
    }
    assert!(n >= 16, "found only {n} exports");
    for c in src.lines().filter_map(|l| l.strip_prefix("pub const ")) {
        let (name, rest) = c.split_once(':').unwrap();
        let val = rest.split('=').nth(1).unwrap().trim().trim_end_matches(';');
        assert!(h.contains(&format!("#define {name} {val}")), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(out) = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(header())
        .output()
    else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
