use std::path::Path;
use std::process::{Command, Output};

fn psne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psne")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn embed_path_graph() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "p3.txt", "10 20\n20 30\n");
    let out = dir.path().join("emb.tsv");
    let res = psne(&["embed", path(&input), "--dim", "2", "--output", path(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    for (line, id) in lines.iter().zip(["10", "20", "30"]) {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 3);
        assert_eq!(cols[0], id);
        assert!(cols[1..].iter().all(|c| c.parse::<f64>().unwrap().is_finite()));
    }
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("stage=sparsify") && stderr.contains("stage=mp") && stderr.contains("nnz_filtered="));
}

#[test]
fn embed_is_reproducible_and_ablation_differs() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("ba.txt");
    assert!(psne(&["generate", "ba", "--n", "200", "--m", "3", "--seed", "4", "--output", path(&gen)])
        .status
        .success());
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args =
            vec!["embed", path(&gen), "--dim", "8", "--samples-factor", "4", "--seed", "3", "--output", path(&out)];
        args.extend_from_slice(extra);
        assert!(psne(&args).status.success());
        std::fs::read(out).unwrap()
    };
    let a = run("a.tsv", &[]);
    let b = run("b.tsv", &[]);
    assert_eq!(a, b);
    assert_ne!(a, run("nmp.tsv", &["--no-mp"]));
    let t3a = run("t3a.tsv", &["--threads", "3"]);
    let t3b = run("t3b.tsv", &["--threads", "3"]);
    assert_eq!(t3a, t3b);
}

#[test]
fn binary_output_and_weight_dump() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "g.txt", "0 1\n1 2\n2 3\n3 0\n0 2\n");
    let out = dir.path().join("emb.bin");
    let weights = dir.path().join("wp.txt");
    let res = psne(&[
        "embed",
        path(&input),
        "--dim",
        "2",
        "--format",
        "binary",
        "--precision",
        "f32",
        "--dump-weights",
        path(&weights),
        "--output",
        path(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let emb = psne::EmbeddingMatrix::<f64>::read_binary(std::fs::read(&out).unwrap().as_slice()).unwrap();
    assert_eq!((emb.n(), emb.dim()), (4, 2));
    let wp = std::fs::read_to_string(&weights).unwrap();
    assert_eq!(wp.lines().count(), 5);
}

#[test]
fn audit_reports_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "k3.txt", "0 1\n1 2\n2 0\n");
    let res = psne(&["audit", path(&input), "--alpha", "0.5", "--trunc", "2", "--runs", "5"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.lines().all(|l| l.contains('=')));
    assert!(text.contains("truncation_error=") && text.contains("violations=0"));
}

#[test]
fn classify_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut emb = String::new();
    let mut labels = String::new();
    for i in 0..40 {
        let class = i % 2;
        emb.push_str(&format!("{i}\t{}\t{}\n", class as f64 * 4.0 + (i as f64 * 0.37).sin(), (i as f64).cos()));
        labels.push_str(&format!("{i} {}\n", 100 + class));
    }
    let e = write(dir.path(), "emb.tsv", &emb);
    let l = write(dir.path(), "labels.txt", &labels);
    let out = dir.path().join("f1.tsv");
    let res = psne(&["classify", path(&e), path(&l), "--ratios", "0.5,0.9", "--trials", "2", "--output", path(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "ratio\tmicro_mean\tmicro_std\tmacro_mean\tmacro_std");
    assert_eq!(lines.len(), 3);
    let micro: f64 = lines[1].split('\t').nth(1).unwrap().parse().unwrap();
    assert!(micro > 0.9);
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for out in [&a, &b] {
        assert!(psne(&["generate", "er", "--n", "100", "--p", "1", "--seed", "9", "--output", path(out)])
            .status
            .success());
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 4950);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(psne(&["embed"]).status.code(), Some(1));
    assert_eq!(psne(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(psne(&["--help"]).status.code(), Some(0));
    let good = write(dir.path(), "g.txt", "0 1\n1 2\n");
    assert_eq!(psne(&["embed", path(&good), "--alpha", "1.5"]).status.code(), Some(1));
    let missing = dir.path().join("missing.txt");
    assert_eq!(psne(&["embed", path(&missing)]).status.code(), Some(2));
    let bad = write(dir.path(), "bad.txt", "0 1\n2 2\n");
    let res = psne(&["embed", path(&bad), "--dim", "1"]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.contains("line 2"));
    assert_eq!(psne(&["generate", "ba", "--n", "3", "--m", "5"]).status.code(), Some(1));
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let text = "# comment\n1 2 0.5\n2 3\n3 1 2\n";
    let input = write(dir.path(), "g.txt", text);
    let out = dir.path().join("o.tsv");
    assert!(psne(&["embed", path(&input), "--dim", "2", "--output", path(&out)]).status.success());
    assert_eq!(std::fs::read_to_string(&input).unwrap(), text);
}
