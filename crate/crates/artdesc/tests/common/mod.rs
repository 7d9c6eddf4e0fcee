//! A tiny self-contained project for driving the CLI end to end.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use artdesc::formats::features::{feature_path, save_features};
use artdesc_core::corpus::FeatureGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tempfile::TempDir;

pub const SAINTS: [&str; 6] = [
    "Saint Jerome",
    "Saint Anne",
    "Saint Lucy",
    "Saint George",
    "Saint Agnes",
    "Saint Mark",
];
pub const ARTISTS: [&str; 6] = ["Memling", "Vasari", "Titian", "Bosch", "Giotto", "Duccio"];
pub const CITIES: [&str; 6] = ["Bruges", "Florence", "Venice", "Antwerp", "Padua", "Siena"];
pub const YEARS: [&str; 6] = ["1478", "1550", "1516", "1490", "1305", "1308"];
pub const FORMS: [&str; 6] = [
    "gold light falls on a red robe .",
    "cool blue tones and soft shadows .",
    "deep green drapery against a dark ground .",
    "small crowded figures in a pale landscape .",
    "flat bright colours and heavy outlines .",
    "thin gilded lines on a blue field .",
];

pub struct ToyProject {
    pub dir: TempDir,
    pub config: PathBuf,
}

impl ToyProject {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn config_arg(&self) -> String {
        self.config.to_string_lossy().into_owned()
    }
}

pub fn sentences(i: usize) -> [String; 3] {
    [
        format!("The panel shows {} beside a river .", SAINTS[i]),
        FORMS[i].to_string(),
        format!(
            "It was painted by {} in {} in {} .",
            ARTISTS[i], CITIES[i], YEARS[i]
        ),
    ]
}

pub fn reference(i: usize) -> String {
    sentences(i).join(" ")
}

fn raw_record(i: usize) -> serde_json::Value {
    let [content, form, context] = sentences(i);
    json!({
        "id": format!("p{i}"),
        "sentences": [
            {"text": content, "topic": "content",
             "entities": [{"value": SAINTS[i], "type": "person"}]},
            {"text": form, "topic": "form", "entities": []},
            {"text": context, "topic": "context",
             "entities": [{"value": ARTISTS[i], "type": "person"},
                          {"value": CITIES[i], "type": "location"},
                          {"value": YEARS[i], "type": "date"}]},
        ],
        "attributes": {"artist": ARTISTS[i], "type": "", "timeframe": YEARS[i], "school": CITIES[i]},
        "objects": ["person", "cell phone"],
        "reference": reference(i),
    })
}

fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

/// Writes corpus, gazetteer, features, knowledge articles and a config
/// tuned so both models memorize the corpus. `mode` is the knowledge mode.
pub fn toy_project(mode: &str, knowledge: bool) -> ToyProject {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let corpus: String = (0..SAINTS.len())
        .map(|i| raw_record(i).to_string() + "\n")
        .collect();
    write(&root.join("data/raw.jsonl"), &corpus);
    let mut gaz = String::from("# surface\ttype\n");
    for i in 0..SAINTS.len() {
        gaz += &format!(
            "{}\tperson\n{}\tperson\n{}\tlocation\n",
            SAINTS[i], ARTISTS[i], CITIES[i]
        );
    }
    write(&root.join("data/gazetteer.tsv"), &gaz);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..SAINTS.len() {
        let values = (0..4 * 8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grid = FeatureGrid::new(4, 8, values).unwrap();
        save_features(
            &feature_path(&root.join("features"), &format!("p{i}")),
            &grid,
        )
        .unwrap();
    }
    fs::create_dir_all(root.join("knowledge")).unwrap();
    if knowledge {
        for i in 0..SAINTS.len() {
            write(
                &root.join(format!("knowledge/{}.txt", ARTISTS[i].to_lowercase())),
                &format!(
                    "{} was a painter active in {} around {}. He painted {} several times.",
                    ARTISTS[i], CITIES[i], YEARS[i], SAINTS[i]
                ),
            );
        }
    }
    let config = root.join("artdesc.toml");
    write(
        &config,
        &format!(
            r#"seed = 7
k = 2
mode = "{mode}"

[paths]
raw_corpus = "data/raw.jsonl"
corpus = "work/corpus.jsonl"
features = "features"
gazetteer = "data/gazetteer.tsv"
knowledge = "knowledge"
checkpoints = "work/ckpt"
index = "work/index.bin"

[decoder]
variant = "parallel"
hidden = 32
embed = 32
attention = 32
init_scale = 0.1
epochs = 150
batch_size = 2
lr = 0.01
lr_decay = 1.0
beam_size = 3

[filler]
hidden = 16
embed = 16
cand_embed = 16
init_scale = 0.2
epochs = 60
batch_size = 1
lr = 0.01
lr_decay = 1.0
"#
        ),
    );
    ToyProject { dir, config }
}

/// Runs the CLI and returns the exit code and stdout.
pub fn run_cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut argv = vec!["artdesc"];
    argv.extend_from_slice(args);
    let code = artdesc::cli::main_with(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

/// Runs every stage up to a usable index; panics on failure.
pub fn train_all(p: &ToyProject) {
    let cfg = p.config_arg();
    for cmd in [
        &["preprocess"][..],
        &["train-decoder"],
        &["train-filler"],
        &["index", "build"],
    ] {
        let mut args = vec!["--config", cfg.as_str()];
        args.extend_from_slice(cmd);
        let (code, out) = run_cli(&args);
        assert_eq!(code, 0, "{cmd:?} failed: {out}");
    }
}
