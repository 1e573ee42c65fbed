use std::path::Path;
use std::process::{Command, Output};

use npforest_cli::formats::{parse_graph, read_graph, write_graph, GraphFormat};
use npforest_core::Graph;
use proptest::prelude::*;

fn npforest(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npforest"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = npforest(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn stdout_is_only_the_manifest_path() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        dir.path(),
        &["gen", "--d", "3", "--n", "20", "--output-prefix", "g"],
    );
    assert_eq!(stdout, "g.manifest.json\n");
    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "g.manifest.json")).unwrap();
    assert_eq!(manifest["command"], "gen");
    assert_eq!(manifest["parameters"]["n"], 20);
    assert_eq!(manifest["outputs"][0], "g.data.csv");
}

#[test]
fn gen_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for (prefix, seed) in [("a", "4"), ("b", "4"), ("c", "5")] {
        ok(
            dir.path(),
            &[
                "gen",
                "--kind",
                "sparse",
                "--d",
                "6",
                "--edges",
                "5",
                "--family",
                "power",
                "--alpha",
                "0.8",
                "--n",
                "50",
                "--seed",
                seed,
                "--output-prefix",
                prefix,
            ],
        );
    }
    assert_eq!(
        read(dir.path(), "a.data.csv"),
        read(dir.path(), "b.data.csv")
    );
    assert_eq!(
        read(dir.path(), "a.truth.tsv"),
        read(dir.path(), "b.truth.tsv")
    );
    assert_ne!(
        read(dir.path(), "a.data.csv"),
        read(dir.path(), "c.data.csv")
    );
    assert_eq!(
        read_graph(&dir.path().join("a.truth.tsv"))
            .unwrap()
            .n_edges(),
        5
    );
}

#[test]
fn diff_is_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("a.tsv"),
        "# vertices: p,q,r,s\np\tq\tNA\nq\tr\tNA\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("b.dot"), "graph G {\n  \"p\";\n  \"q\";\n  \"r\";\n  \"s\";\n  \"q\" -- \"r\";\n  \"r\" -- \"s\";\n}\n").unwrap();
    ok(
        dir.path(),
        &["diff", "--a", "a.tsv", "--b", "b.dot", "--out-prefix", "ab"],
    );
    ok(
        dir.path(),
        &["diff", "--a", "b.dot", "--b", "a.tsv", "--out-prefix", "ba"],
    );
    assert_eq!(
        read(dir.path(), "ab.symdiff.tsv"),
        read(dir.path(), "ba.symdiff.tsv")
    );
    assert_eq!(
        read(dir.path(), "ab.common.tsv"),
        read(dir.path(), "ba.common.tsv")
    );
    let sym = read_graph(&dir.path().join("ab.symdiff.tsv")).unwrap();
    assert_eq!(sym.edge_set(), [(0, 1), (2, 3)].into_iter().collect());
    assert_eq!(
        read_graph(&dir.path().join("ab.common.tsv"))
            .unwrap()
            .edge_set(),
        [(1, 2)].into_iter().collect()
    );
}

#[test]
fn ingest_turns_three_prices_into_two_returns() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.csv"), "A,B\n100,5\n110,5\n99,5\n").unwrap();
    ok(
        dir.path(),
        &[
            "ingest",
            "--input",
            "p.csv",
            "--log-returns",
            "--winsorize-mad",
            "--output-prefix",
            "r",
        ],
    );
    let text = read(dir.path(), "r.data.csv");
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    let first: f64 = rows[1].split(',').next().unwrap().parse().unwrap();
    assert!((first - 1.1f64.ln()).abs() < 1e-12);
    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "r.manifest.json")).unwrap();
    assert_eq!(manifest["results"]["rows_out"], 2);
    assert_eq!(
        manifest["results"]["constant_columns"],
        serde_json::json!(["B"])
    );
    assert_eq!(manifest["parameters"]["winsorize_mad"], 3.0);
}

#[test]
fn glasso_two_by_two_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.csv"), "u,v\n1,0.5\n0.5,1\n").unwrap();
    ok(
        dir.path(),
        &[
            "glasso",
            "--input",
            "s.csv",
            "--lambda",
            "0.1",
            "--output-prefix",
            "o",
        ],
    );
    let omega = npforest_core::ingest::read_csv(dir.path().join("o.precision.csv")).unwrap();
    // W = [[1.1, 0.4], [0.4, 1.1]] and Ω = W⁻¹.
    let det = 1.1 * 1.1 - 0.4 * 0.4;
    let expected = [[1.1 / det, -0.4 / det], [-0.4 / det, 1.1 / det]];
    for (i, row) in expected.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert!((omega.get(i, j) - v).abs() < 1e-6, "{i},{j}");
        }
    }
    let g = read_graph(&dir.path().join("o.graph.tsv")).unwrap();
    assert_eq!(g.vertices(), ["u", "v"]);
    assert_eq!(g.n_edges(), 1);
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("bad.csv"), "a,b\n1,2\n3,x\n").unwrap();
    std::fs::write(p.join("flat.csv"), "a,b\n1,2\n1,3\n1,4\n1,5\n").unwrap();

    let missing = npforest(
        p,
        &[
            "npn",
            "--input",
            "nope.csv",
            "--lambda",
            "0.1",
            "--output-prefix",
            "x",
        ],
    );
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error[io]"));

    let bad = npforest(
        p,
        &[
            "npn",
            "--input",
            "bad.csv",
            "--lambda",
            "0.1",
            "--output-prefix",
            "x",
        ],
    );
    assert_eq!(bad.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&bad.stderr).into_owned();
    assert!(
        msg.starts_with("error[non_numeric_cell]") && msg.contains("\"x\""),
        "{msg}"
    );
    assert!(bad.stdout.is_empty());

    let flat = npforest(
        p,
        &[
            "ingest",
            "--input",
            "flat.csv",
            "--standardize",
            "--output-prefix",
            "x",
        ],
    );
    assert_eq!(flat.status.code(), Some(2));

    let both = npforest(
        p,
        &[
            "npn",
            "--input",
            "bad.csv",
            "--lambda",
            "0.1",
            "--lambda-grid",
            "0.1:1:3",
            "--output-prefix",
            "x",
        ],
    );
    assert_eq!(both.status.code(), Some(2));

    std::fs::write(
        p.join("s.csv"),
        "a,b,c,d\n1,0.9,0.8,0.7\n0.9,1,0.9,0.8\n0.8,0.9,1,0.9\n0.7,0.8,0.9,1\n",
    )
    .unwrap();
    let capped = npforest(
        p,
        &[
            "glasso",
            "--input",
            "s.csv",
            "--lambda",
            "0.01",
            "--max-iters",
            "1",
            "--output-prefix",
            "x",
        ],
    );
    assert_eq!(
        capped.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&capped.stderr)
    );
    assert!(!p.join("x.manifest.json").exists());
}

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (2usize..8).prop_flat_map(|d| {
        let pairs: Vec<(usize, usize)> = (0..d)
            .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
            .collect();
        let m = pairs.len();
        (
            prop::collection::vec("[A-Za-z][A-Za-z0-9_ .\"\\\\-]{0,6}", d),
            prop::collection::vec(prop::option::of(prop::option::of(-1e6f64..1e6)), m),
        )
            .prop_filter_map("labels must be distinct", move |(labels, choices)| {
                let mut sorted = labels.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != labels.len() {
                    return None;
                }
                let mut g = Graph::new(labels);
                for (&(i, j), c) in pairs.iter().zip(choices) {
                    if let Some(w) = c {
                        g.add_edge(i, j, w).unwrap();
                    }
                }
                Some(g)
            })
    })
}

proptest! {
    #[test]
    fn graph_files_round_trip(g in graph_strategy()) {
        for format in [GraphFormat::Tsv, GraphFormat::Dot, GraphFormat::Json] {
            let text = write_graph(&g, format).unwrap();
            let back = parse_graph(&text, format).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(write_graph(&back, format).unwrap(), text);
        }
    }
}
