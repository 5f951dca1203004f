//! Fixture configuration and in-process invocation shared by the CLI tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Twenty clean scenes rendered from generated pits, analyzed as tiles.
pub const FIXTURE: &str = r#"
seed = 32

[synth]
scenes = 20
preset = "custom"
allow_overlap = false
rendered_dictionary = true
rendered_per_type = 60
background_count = 2

[synth.ranges]
bpd = { lo = 8, hi = 16 }
ted = { lo = 5, hi = 10 }
tsd = { lo = 2, hi = 5 }

[quality]
corpus_per_class = 300
epochs = 200
"#;

/// Writes `body` plus absolute work and tile paths under `dir`.
pub fn write_config(dir: &Path, body: &str) -> PathBuf {
    let work = dir.join("work");
    let tiles = work.join("synth").join("tiles.json");
    let text = format!(
        "{body}\n[paths]\nwork = {:?}\ntiles = {:?}\n",
        work.display().to_string(),
        tiles.display().to_string()
    );
    let path = dir.join("pitmap.toml");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn pitmap(config: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["pitmap".to_string(), "-c".into(), config.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    pitmap::run(argv)
}

pub fn run_all(config: &Path, stages: &[&[&str]]) {
    for s in stages {
        assert_eq!(pitmap(config, s), 0, "stage {s:?} failed");
    }
}

/// SHA-256 of every file under `dir`, keyed by relative path.
pub fn hash_tree(dir: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, d: &Path, out: &mut BTreeMap<String, String>) {
        let mut entries: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let digest = Sha256::digest(std::fs::read(&p).unwrap());
                let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), hex);
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Ground-truth category of the synthetic instance whose box holds
/// `(x, y)` in scene `tile`.
pub struct Truth {
    boxes: BTreeMap<String, Vec<([f64; 4], u64)>>,
}

impl Truth {
    pub fn load(annotations: &Path) -> Truth {
        let v = json(annotations);
        let names: BTreeMap<u64, String> = v["images"]
            .as_array()
            .unwrap()
            .iter()
            .map(|i| {
                let stem = i["file_name"].as_str().unwrap().trim_end_matches(".png").to_string();
                (i["id"].as_u64().unwrap(), stem)
            })
            .collect();
        let mut boxes: BTreeMap<String, Vec<([f64; 4], u64)>> = BTreeMap::new();
        for a in v["annotations"].as_array().unwrap() {
            let b: Vec<f64> = a["bbox"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
            boxes
                .entry(names[&a["image_id"].as_u64().unwrap()].clone())
                .or_default()
                .push(([b[0], b[1], b[2], b[3]], a["category_id"].as_u64().unwrap()));
        }
        Truth { boxes }
    }

    pub fn category_at(&self, tile: &str, x: f64, y: f64) -> Option<u64> {
        self.boxes.get(tile)?.iter().find_map(|(b, c)| {
            (x >= b[0] && x <= b[0] + b[2] - 1.0 && y >= b[1] && y <= b[1] + b[3] - 1.0).then_some(*c)
        })
    }
}
