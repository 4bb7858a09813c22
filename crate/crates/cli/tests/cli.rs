use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fusim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fusim"))
        .args(args)
        .env_remove("FUSIM_THREADS")
        .output()
        .expect("spawn fusim")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn seeds_line(o: &Output) -> String {
    stdout(o).lines().next().unwrap().to_string()
}

/// Two disjoint five-vertex paths whose vertex IDs are sparse.
const TEN_VERTEX: &str = "\
100 101\n101 102\n102 103\n103 104\n100 102\n\
200 201\n201 202\n202 203\n203 204\n201 203\n102 203\n";

#[test]
fn select_on_triangle() {
    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "triangle.txt", "0 1\n1 2\n2 0\n");
    let out = fusim(&[
        "select",
        "--graph",
        g.to_str().unwrap(),
        "--k",
        "1",
        "--r",
        "8",
        "--weights",
        "const:1.0",
        "--seed",
        "7",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "seeds: 0\nsigma/R: 3.000000\n");
}

#[test]
fn exact_on_single_edge() {
    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "k2.txt", "0 1 0.3\n");
    let s = write(dir.path(), "s0.txt", "0\n");
    let out = fusim(&[
        "exact",
        "--graph",
        g.to_str().unwrap(),
        "--seeds-file",
        s.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "influence: 1.300000\n");
}

#[test]
fn infuser_matches_mixgreedy_on_shared_samples() {
    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "ten.txt", TEN_VERTEX);
    let g = g.to_str().unwrap();
    for seed in ["1", "2", "3"] {
        let run = |algo| {
            fusim(&[
                "select",
                "--graph",
                g,
                "--k",
                "4",
                "--r",
                "32",
                "--weights",
                "const:0.4",
                "--seed",
                seed,
                "--algo",
                algo,
            ])
        };
        let (a, b) = (run("infuser"), run("mixgreedy"));
        assert!(a.status.success() && b.status.success());
        assert_eq!(seeds_line(&a), seeds_line(&b), "seed {seed}");
    }
}

#[test]
fn seeds_are_written_with_original_ids() {
    let dir = TempDir::new().unwrap();
    let g = write(dir.path(), "ten.txt", TEN_VERTEX);
    let out_file = dir.path().join("seeds.txt");
    let out = fusim(&[
        "select",
        "--graph",
        g.to_str().unwrap(),
        "--k",
        "2",
        "--weights",
        "const:1.0",
        "--out",
        out_file.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    // Everything is connected with weight 1: the first seed covers all ten
    // vertices and the smallest original ID wins ties.
    assert_eq!(seeds_line(&out), "seeds: 100 101");
    assert_eq!(fs::read_to_string(&out_file).unwrap(), "100\n101\n");

    let eval = fusim(&[
        "evaluate",
        "--graph",
        g.to_str().unwrap(),
        "--weights",
        "const:1.0",
        "--seeds-file",
        out_file.to_str().unwrap(),
        "--r-eval",
        "100",
    ]);
    assert!(eval.status.success());
    assert!(stdout(&eval).starts_with("sigma: 10.000000\nstd_error: 0.000000\n"));
}

#[test]
fn stdout_is_deterministic_and_thread_invariant() {
    let dir = TempDir::new().unwrap();
    let lines: String = (0..400u32)
        .map(|i| format!("{} {}\n{} {}\n", i, (i * 7 + 3) % 400, i, (i * 13 + 5) % 400))
        .collect();
    let g = write(dir.path(), "g.txt", &lines);
    let g = g.to_str().unwrap();
    let run = |threads: &str| {
        fusim(&[
            "select",
            "--graph",
            g,
            "--k",
            "5",
            "--r",
            "64",
            "--weights",
            "uniform:0,0.1",
            "--seed",
            "9",
            "--threads",
            threads,
        ])
    };
    let one = run("1");
    assert!(one.status.success());
    assert_eq!(one.stdout, run("1").stdout);
    assert_eq!(one.stdout, run("0").stdout);
    if cfg!(feature = "parallel") {
        assert_eq!(one.stdout, run("3").stdout);
    } else {
        // The sequential build rejects explicit multi-threaded runs.
        assert_eq!(run("3").status.code(), Some(1));
    }
}

#[test]
fn cdf_writes_tsv() {
    let dir = TempDir::new().unwrap();
    let lines: String = (0..300u32).map(|i| format!("{} {}\n", i, (i * 17 + 1) % 300)).collect();
    let g = write(dir.path(), "g.txt", &lines);
    let out = fusim(&["cdf", "--graph", g.to_str().unwrap(), "--r", "64", "--bins", "10"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<_> = text.lines().collect();
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[0].split('\t').next(), Some("0.100000"));
    assert_eq!(rows[9], "1.000000\t1.000000");
    assert!(String::from_utf8_lossy(&out.stderr).contains("ks: "));
}

#[test]
fn bench_csv_is_reproducible() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "tiny.txt", "0 1 0.5\n1 2 0.5\n");
    let cfg = write(
        dir.path(),
        "bench.toml",
        r#"
[[row]]
dataset = "tiny.txt"
weights = "file"
algo = "infuser"
k = 1
r = 64
r_eval = 2000

[[row]]
dataset = "er:300:4:2"
weights = "const:0.05"
algo = "mixgreedy"
k = 2
r = 16

[[row]]
dataset = "missing.txt"
algo = "infuser"
k = 1
"#,
    );
    let run = || fusim(&["bench", "--config", cfg.to_str().unwrap(), "--omit-timing"]);
    let first = run();
    assert!(first.status.success());
    assert_eq!(first.stdout, run().stdout);
    let text = stdout(&first);
    let rows: Vec<_> = text.lines().collect();
    assert_eq!(rows[0], "dataset,algo,K,R,threads,seconds,peak_bytes,sigma,sigma_se");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("tiny.txt,infuser,1,64,1,NA,NA,"));
    assert!(rows[3].ends_with("NA,NA,NA,NA"));

    let timed = fusim(&["bench", "--config", cfg.to_str().unwrap()]);
    let text = stdout(&timed);
    let fields: Vec<_> = text.lines().nth(1).unwrap().split(',').collect();
    assert!(fields[5].parse::<f64>().is_ok());
    assert!(fields[6].parse::<u64>().unwrap() > 0);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let tri = write(dir.path(), "tri.txt", "0 1\n1 2\n2 0\n");
    let tri = tri.to_str().unwrap();
    let code = |o: Output| o.status.code().unwrap();

    assert_eq!(code(fusim(&[])), 1);
    assert_eq!(code(fusim(&["select", "--k", "1"])), 1);
    assert_eq!(
        code(fusim(&["select", "--graph", tri, "--k", "1", "--weights", "bogus"])),
        1
    );
    assert_eq!(code(fusim(&["select", "--graph", tri, "--k", "1", "--algo", "imm"])), 1);
    assert_eq!(code(fusim(&["--help"])), 0);

    let missing = dir.path().join("missing.txt");
    assert_eq!(
        code(fusim(&["select", "--graph", missing.to_str().unwrap(), "--k", "1"])),
        2
    );
    let bad = write(dir.path(), "bad.txt", "0 1\nx y\n");
    assert_eq!(
        code(fusim(&["select", "--graph", bad.to_str().unwrap(), "--k", "1"])),
        2
    );

    assert_eq!(code(fusim(&["select", "--graph", tri, "--k", "4"])), 3);
    let big: String = (0..30).map(|i| format!("{i} {}\n", i + 1)).collect();
    let big = write(dir.path(), "big.txt", &big);
    let s = write(dir.path(), "s.txt", "0\n");
    assert_eq!(
        code(fusim(&[
            "exact",
            "--graph",
            big.to_str().unwrap(),
            "--weights",
            "const:0.5",
            "--seeds-file",
            s.to_str().unwrap()
        ])),
        3
    );
}
