use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn meanfield(args: &[&str], config: &str, out: &Path) -> Output {
    let cfg = out.join("config.toml");
    fs::create_dir_all(out).unwrap();
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_meanfield"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(out.join("run"))
        .output()
        .unwrap()
}

const SMALL: &str = "[lattice]\nM = 2\nL = 6.283185307179586\ng = 0.5\ndt = 0.01\nT = 0.5\n\n[run]\norder = 2\ncutoff = 12\nn_list = [6, 8, 12, 16]\nstride = 10\n";

#[test]
fn hartree_writes_one_row_per_step_and_site() {
    let dir = tempfile::tempdir().unwrap();
    let o = meanfield(&["hartree"], SMALL, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("run/trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# columns: t,site,re_phi,im_phi,mu"));
    assert_eq!(lines.next(), Some("t,site,re_phi,im_phi,mu"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 51);
    assert_eq!(rows.iter().filter(|r| r.split(',').nth(1) == Some("1")).count(), 51);
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = meanfield(&["hartree"], &format!("{SMALL}colour = 3\n"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    let o = meanfield(&["hartree"], &SMALL.replace("cutoff = 12", "cutoff = 6"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cutoff"));
}

#[test]
fn oversized_fock_space_is_a_resource_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("M = 2", "M = 8").replace("cutoff = 12", "cutoff = 24");
    let o = meanfield(&["hierarchy"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("10518300"));
}

#[test]
fn manifests_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let read = |sub: &str, p: &Path| {
        let o = meanfield(&[sub], SMALL, p);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let run = p.join("run");
        let mut files: Vec<_> = fs::read_dir(&run).unwrap().map(|e| e.unwrap().file_name()).collect();
        files.sort();
        files
            .into_iter()
            .filter(|f| f != "timings.json")
            .map(|f| (f.clone(), fs::read(run.join(f)).unwrap()))
            .collect::<Vec<_>>()
    };
    for sub in ["hierarchy", "sweep"] {
        let a = read(sub, &dir.path().join(format!("{sub}-a")));
        let b = read(sub, &dir.path().join(format!("{sub}-b")));
        // the output directory is echoed in the manifest
        let strip = |v: Vec<(std::ffi::OsString, Vec<u8>)>| -> Vec<(std::ffi::OsString, String)> {
            v.into_iter().map(|(f, c)| (f, String::from_utf8(c).unwrap().replace(&format!("{sub}-b"), &format!("{sub}-a")))).collect()
        };
        assert_eq!(strip(a), strip(b));
    }
}

#[test]
fn every_csv_declares_its_columns() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["hartree", "bogomap", "hierarchy", "sweep"] {
        let p = dir.path().join(sub);
        let o = meanfield(&[sub], SMALL, &p);
        assert!(o.status.success(), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        for e in fs::read_dir(p.join("run")).unwrap() {
            let path = e.unwrap().path();
            if path.extension().is_some_and(|x| x == "csv") {
                let text = fs::read_to_string(&path).unwrap();
                let first = text.lines().next().unwrap();
                let second = text.lines().nth(1).unwrap();
                assert_eq!(first, format!("# columns: {second}"), "{}", path.display());
            }
        }
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("run/manifest.json")).unwrap()).unwrap();
        assert_eq!(m["subcommand"], sub);
        assert_eq!(m["config"]["lattice"]["M"], 2);
    }
}

#[test]
fn oracle_slope_emits_error_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("order = 2", "order = 1").replace("T = 0.5", "T = 0.4") + "t_eval = 0.2\n";
    let o = meanfield(&["oracle-slope"], &cfg, dir.path());
    assert!(o.status.code() == Some(0) || o.status.code() == Some(3));
    let curve: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/error_curve.json")).unwrap()).unwrap();
    assert_eq!(curve["order"], 1);
    let slope = curve["slope"].as_f64().unwrap();
    assert!(slope > 0.7, "{slope}");
    assert_eq!(curve["points"].as_array().unwrap().len(), 4);
}

#[test]
fn wick_check_exit_status_follows_the_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[lattice]\nM = 2\nL = 6.283185307179586\ng = 0.5\ndt = 0.01\nT = 0.5\n\n[run]\norder = 2\ncutoff = 16\n";
    let o = meanfield(&["wick-check"], cfg, &dir.path().join("ok"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    // too small a cutoff for the direct route at t = 2
    let cfg = "[lattice]\nM = 2\nL = 6.283185307179586\ng = 1.0\ndt = 0.01\nT = 2.0\n\n[run]\norder = 2\ncutoff = 8\nt_eval = 2.0\n";
    let o = meanfield(&["wick-check"], cfg, &dir.path().join("bad"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL generalized Wick"));
}
