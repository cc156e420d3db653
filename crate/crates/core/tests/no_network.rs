//! Only the ingest module may open network connections.

use std::path::{Path, PathBuf};

const NETWORK_MARKERS: [&str; 5] = ["ureq", "tiny_http", "std::net", "TcpStream", "UdpSocket"];

fn rust_files(dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            rust_files(&path, out);
        } else if path.extension().is_some_and(|e| e == "rs") {
            out.push(path);
        }
    }
}

#[test]
fn network_code_lives_only_in_ingest() {
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("src");
    let ingest = src.join("ingest");
    let mut files = Vec::new();
    rust_files(&src, &mut files);
    assert!(files.len() > 10);
    let offenders: Vec<String> = files
        .iter()
        .filter(|f| !f.starts_with(&ingest))
        .filter(|f| {
            let text = std::fs::read_to_string(f).unwrap();
            NETWORK_MARKERS.iter().any(|m| text.contains(m))
        })
        .map(|f| f.display().to_string())
        .collect();
    assert!(offenders.is_empty(), "network code outside ingest: {offenders:?}");
}

#[test]
fn cli_reaches_the_network_only_through_ingest() {
    let cli = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/cli/mod.rs")).unwrap();
    let calls: Vec<&str> = cli.lines().filter(|l| l.contains("ingest::")).collect();
    // every use of the ingest module is confined to the ingest command
    let start = cli.find("fn cmd_ingest").unwrap();
    let end = start + cli[start..].find("\n}\n").unwrap();
    for line in calls {
        let at = cli.find(line).unwrap();
        let in_imports = at < cli.find("pub const EXIT_OK").unwrap();
        let in_args = line.contains("ingest::DEFAULT_");
        assert!(in_imports || in_args || (start..end).contains(&at), "{line}");
    }
}
