#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use msense_core::segment::synthetic::write_synthetic_source;

pub const SOURCES: [&str; 2] = ["syn_a", "syn_b"];

pub const CONFIG: &str = r#"
seed = 3

[adapters]
asr = "table:tables/asr.json"
diarization = "table:tables/diarization.json"
scene = "content"

[splits]
ratios = [0.5, 0.25, 0.25]

[generation]
max_new_tokens = 8

[model.fusion]
n_query = 4
hidden = 32
heads = 4
blocks = 1
ffn_dim = 64
video_feature_dim = 66
audio_feature_dim = 40
lm_dim = 128

[train]
batch_size = 2
epochs = 1
"#;

fn concat_json(values: Vec<serde_json::Value>) -> serde_json::Value {
    serde_json::Value::Array(values.into_iter().flat_map(|v| v.as_array().cloned().unwrap_or_default()).collect())
}

/// Two synthetic recordings with lookup tables, split sidecars and a config.
/// Returns the config path.
pub fn workspace(root: &Path) -> PathBuf {
    let mut media = Vec::new();
    let (mut asr, mut diar) = (Vec::new(), Vec::new());
    std::fs::create_dir_all(root.join("annotations")).unwrap();
    std::fs::create_dir_all(root.join("tables")).unwrap();
    for id in SOURCES {
        let src = write_synthetic_source(&root.join("raw").join(id), id).unwrap();
        media.push(src.media);
        asr.push(serde_json::to_value(&src.asr).unwrap());
        diar.push(serde_json::to_value(&src.diarization).unwrap());
        std::fs::write(
            root.join("annotations").join(format!("{id}.json")),
            serde_json::to_string_pretty(&src.splits).unwrap(),
        )
        .unwrap();
    }
    std::fs::write(root.join("sources.json"), serde_json::to_string_pretty(&media).unwrap()).unwrap();
    std::fs::write(root.join("tables/asr.json"), serde_json::to_string(&concat_json(asr)).unwrap()).unwrap();
    std::fs::write(root.join("tables/diarization.json"), serde_json::to_string(&concat_json(diar)).unwrap()).unwrap();
    let cfg = root.join("msense.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    cfg
}

pub fn msense(config: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_msense"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env_remove("MSENSE_CONFIG")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    out
}

pub fn ok(config: &Path, args: &[&str]) -> String {
    let out = msense(config, args);
    assert!(
        out.status.success(),
        "msense {args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Builds a multipart/form-data body from `(name, filename, bytes)` parts.
pub fn multipart(parts: &[(&str, Option<&str>, &[u8])]) -> (String, Vec<u8>) {
    let boundary = "msense-test-boundary-7d1f";
    let mut body = Vec::new();
    for (name, filename, bytes) in parts {
        body.extend_from_slice(format!("--{boundary}\r\n").as_bytes());
        match filename {
            Some(f) => body.extend_from_slice(
                format!("Content-Disposition: form-data; name=\"{name}\"; filename=\"{f}\"\r\nContent-Type: application/octet-stream\r\n\r\n")
                    .as_bytes(),
            ),
            None => body.extend_from_slice(format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes()),
        }
        body.extend_from_slice(bytes);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}
