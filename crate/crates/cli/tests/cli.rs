use std::path::{Path, PathBuf};
use std::process::{Command, Output};

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        ws.write_csv("train.csv", 400, 1);
        ws.write_csv("test.csv", 100, 2);
        std::fs::write(
            ws.path("exp.toml"),
            format!(
                "seed = 3\noutput_dir = \"{}\"\n[data]\ndataset = \"csv\"\ntrain_csv = \"{}\"\ntest_csv = \"{}\"\nthreshold = 0.5\n[train]\nclauses = 24\nepochs = 6\nt = 12\ns = 3.0\n",
                ws.path("out").display(),
                ws.path("train.csv").display(),
                ws.path("test.csv").display()
            ),
        )
        .unwrap();
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Label is the number of set bits among the first two of eight features.
    fn write_csv(&self, name: &str, rows: usize, seed: u64) {
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state & 1
        };
        let mut text = String::from("f0,f1,f2,f3,f4,f5,f6,f7,label\n");
        for _ in 0..rows {
            let f: Vec<u64> = (0..8).map(|_| next()).collect();
            let fields: Vec<String> = f.iter().map(u64::to_string).collect();
            text += &format!("{},{}\n", fields.join(","), f[0] + f[1]);
        }
        std::fs::write(self.path(name), text).unwrap();
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_impact")).args(args).current_dir(self.dir.path()).output().unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
        out
    }

    fn config(&self) -> String {
        self.path("exp.toml").display().to_string()
    }

    fn train(&self, model: &str) -> PathBuf {
        let path = self.path(model);
        self.ok(&["train", "--config", &self.config(), "--out", path.to_str().unwrap()]);
        path
    }
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn train_is_deterministic_and_reports_inputs() {
    let ws = Workspace::new();
    let a = ws.train("a.cotm");
    let b = ws.train("b.cotm");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    let report = json(&ws.path("out/train_report.json"));
    assert_eq!(report["format"], "impact-report/1");
    assert_eq!(report["config"]["seed"], 3);
    assert_eq!(report["inputs"].as_array().unwrap().len(), 3);
    assert_eq!(report["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert!(report["result"]["final_test_accuracy"].as_f64().unwrap() > 0.9);
    assert!(ws.path("out/train_log.csv").is_file());
    assert!(ws.path("out/train_report.config.toml").is_file());
}

#[test]
fn missing_dataset_directory_names_the_flag() {
    let ws = Workspace::new();
    let out = ws.run(&["train", "--dataset", "mnist", "--data-dir", "no/such/dir", "--epochs", "1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--data-dir"));
}

#[test]
fn malformed_dataset_is_a_data_error() {
    let ws = Workspace::new();
    std::fs::create_dir(ws.path("bad")).unwrap();
    std::fs::write(ws.path("bad/train-images-idx3-ubyte"), [0u8, 0, 8, 1, 0, 0, 0, 0]).unwrap();
    std::fs::write(ws.path("bad/train-labels-idx1-ubyte"), [0u8, 0, 8, 1, 0, 0, 0, 0]).unwrap();
    let out = ws.run(&["train", "--dataset", "mnist", "--data-dir", "bad", "--epochs", "1"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn corrupted_model_is_rejected() {
    let ws = Workspace::new();
    std::fs::write(ws.path("broken.cotm"), "not a model\n").unwrap();
    let out = ws.run(&["map", "--model", "broken.cotm"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--model"));
}

#[test]
fn exact_nominal_mapping_matches_golden() {
    let ws = Workspace::new();
    let model = ws.train("m.cotm");
    let m = model.to_str().unwrap();
    let cfg = ws.config();
    ws.ok(&["map", "--config", &cfg, "--model", m, "--exact", "--nominal", "--out", "exact"]);
    ws.ok(&["infer", "--config", &cfg, "--model", m, "--tiles", "exact", "--nominal", "--out", "infer/analog.json"]);
    let r = json(&ws.path("infer/analog.json"));
    assert_eq!(r["result"]["mode"], "analog");
    assert_eq!(r["result"]["agreement_with_golden"], 1.0);
    assert_eq!(r["result"]["accuracy"], r["result"]["golden_accuracy"]);
    assert!(r["result"]["energy"]["clause_pj_per_datapoint"].as_f64().unwrap() > 0.0);
    assert!(ws.path("infer/predictions.csv").is_file());
    assert!(ws.path("infer/energy_ledger.csv").is_file());

    ws.ok(&["infer", "--config", &cfg, "--model", m, "--golden", "--out", "infer/golden.json"]);
    let g = json(&ws.path("infer/golden.json"));
    assert_eq!(g["result"]["mode"], "golden");
    assert_eq!(g["result"]["accuracy"], r["result"]["golden_accuracy"]);
    assert!(g["result"]["energy"].is_null());
}

#[test]
fn tuned_mapping_writes_stage_reports() {
    let ws = Workspace::new();
    let model = ws.train("m.cotm");
    let m = model.to_str().unwrap();
    let cfg = ws.config();
    ws.ok(&["map", "--config", &cfg, "--model", m, "--out", "full"]);
    for f in ["mapping.json", "clause_r0_c0.yfxt", "class_r0_c0.yfxt", "encode.csv", "pretune_histogram.csv", "finetune_summary.json", "map_report.json"] {
        assert!(ws.path("full").join(f).is_file(), "missing {f}");
    }
    let r = json(&ws.path("full/map_report.json"));
    assert_eq!(r["result"]["stages"].as_array().unwrap().len(), 3);
    assert_eq!(r["result"]["clause_tiles"][0]["rows"], 16);

    ws.ok(&["map", "--config", &cfg, "--model", m, "--skip-finetune", "--out", "pre"]);
    assert!(ws.path("pre/pretune.csv").is_file());
    assert!(!ws.path("pre/finetune.csv").exists());

    ws.ok(&["infer", "--config", &cfg, "--model", m, "--tiles", "full", "--out", "full/infer.json"]);
    ws.ok(&["report", "--config", &cfg, "--tiles", "full", "--infer-report", "full/infer.json", "--out", "full/summary.json"]);
    let s = json(&ws.path("full/summary.json"));
    assert!(s["result"]["clause_pj_per_datapoint"].as_f64().unwrap() > 0.0);
    assert!(ws.path("full/summary.csv").is_file());
}

#[test]
fn pulse_cap_below_need_is_non_convergence() {
    let ws = Workspace::new();
    let model = ws.train("m.cotm");
    let capped = ws.path("capped.toml");
    std::fs::write(&capped, std::fs::read_to_string(ws.path("exp.toml")).unwrap() + "[mapping.tune]\npulse_cap = 1\n").unwrap();
    let out = ws.run(&["map", "--config", capped.to_str().unwrap(), "--model", model.to_str().unwrap(), "--out", "capped"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ws.path("capped/map_report.json").is_file());
}

#[test]
fn sweep_rows_and_reruns() {
    let ws = Workspace::new();
    let model = ws.train("m.cotm");
    let m = model.to_str().unwrap();
    let cfg = ws.config();
    let args = |out: &'static str| {
        vec!["sweep", "--config", &cfg, "--model", m, "--param", "c2c-sigma", "--values", "0,0.048,0.2", "--seeds", "1,2", "--out", out]
    };
    ws.ok(&args("s1.csv"));
    ws.ok(&args("s2.csv"));
    let a = std::fs::read_to_string(ws.path("s1.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(ws.path("s2.csv")).unwrap());
    assert_eq!(a.lines().count(), 1 + 3 * 2);
    assert!(a.lines().nth(1).unwrap().starts_with("c2c_sigma,0,1,"));

    let empty = ws.run(&["sweep", "--config", &cfg, "--model", m, "--param", "d2d-sigma", "--seeds", "1"]);
    assert_eq!(code(&empty), 2);
}

#[test]
fn device_config_dump_round_trips() {
    let ws = Workspace::new();
    let out = ws.ok(&["dump-device-config"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[device]") && text.contains("[variability]"));
    std::fs::write(ws.path("dev.toml"), &text).unwrap();
    let model = ws.train("m.cotm");
    ws.ok(&["map", "--config", &ws.config(), "--model", model.to_str().unwrap(), "--device-config", "dev.toml", "--out", "dev"]);
    let bad = ws.run(&["map", "--config", &ws.config(), "--model", model.to_str().unwrap(), "--device-config", "exp.toml"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn usage_errors_exit_2() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.run(&["frobnicate"])), 2);
    assert_eq!(code(&ws.run(&["infer", "--config", &ws.config()])), 2);
}
