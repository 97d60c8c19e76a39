#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn tsd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsd"))
        .args(args)
        .current_dir(cwd)
        .env_remove("TSD_THREADS")
        .output()
        .expect("run tsd")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Every file under `dir` with its bytes, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
        }
    }
    out
}

/// A small synthetic data set written by `tsd synth`; returns its path.
pub fn small_synth(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let cfg = write(dir, "synth.toml", &format!("[synth]\nn_samples = {n}\nn_analytes = 8\n"));
    let o = tsd(&["synth", "--config", cfg.to_str().unwrap(), "--seed", &seed.to_string(), "--out", "synth"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    dir.join("synth").join("data.csv")
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(str::to_owned).collect()).collect();
    (header, rows)
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(header).unwrap();
    for r in rows {
        w.write_record(r).unwrap();
    }
    w.flush().unwrap();
}

/// Rewrites a CSV keeping only the columns `keep` selects, in `order`.
pub fn reorder_columns(src: &Path, dst: &Path, order: impl Fn(&[String]) -> Vec<usize>) {
    let (h, rows) = read_csv(src);
    let idx = order(&h);
    let pick = |r: &Vec<String>| idx.iter().map(|&i| r[i].clone()).collect::<Vec<_>>();
    write_csv(dst, &pick(&h), &rows.iter().map(pick).collect::<Vec<_>>());
}
