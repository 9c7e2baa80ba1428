use std::path::PathBuf;
use std::process::{Command, Output};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn locfaults(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locfaults"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

#[allow(dead_code)]
pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).expect("utf-8 output")
}

#[allow(dead_code)]
pub struct Entry {
    pub name: String,
    pub source: PathBuf,
    pub args: Vec<String>,
}

/// Programs listed in the corpus manifest, with the CLI flags that run them.
#[allow(dead_code)]
pub fn manifest() -> Vec<Entry> {
    let text = std::fs::read_to_string(corpus_dir().join("corpus.json")).expect("manifest");
    let doc: serde_json::Value = serde_json::from_str(&text).expect("manifest is JSON");
    doc["programs"]
        .as_array()
        .expect("programs list")
        .iter()
        .map(|p| {
            let mut args = Vec::new();
            for (k, v) in p["counterexample"].as_object().expect("counterexample object") {
                args.push("--in".to_string());
                args.push(format!("{k}={}", v.as_i64().expect("integer")));
            }
            for (flag, key) in [("--bcond", "b_cond"), ("--bmcs", "b_mcs"), ("--kmax", "k_max")] {
                args.push(flag.to_string());
                args.push(p[key].as_u64().expect("bound").to_string());
            }
            Entry {
                name: p["name"].as_str().expect("name").to_string(),
                source: corpus_dir().join(p["source"].as_str().expect("source")),
                args,
            }
        })
        .collect()
}
