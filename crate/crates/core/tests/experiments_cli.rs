use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aggsim::experiments::{CURVES_HEADER, SUMMARY_HEADER};
use aggsim::Topology;

fn aggsim(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.conf");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_aggsim"))
        .arg("run")
        .arg("--config")
        .arg(&path)
        .args(args)
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

const SMALL: &str = "# small run\nprotocol = psp\nnodes = 60\ntrials = 1\nbudget = 2\nseed = 3\n";

#[test]
fn writes_both_files_with_exact_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = aggsim(dir.path(), SMALL, &["--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let curves = read(&out, "curves.csv");
    let lines: Vec<&str> = curves.lines().collect();
    assert_eq!(lines[0], CURVES_HEADER.join(","));
    assert_eq!(
        lines[0],
        "trial,seed,protocol,mode,time,rmse,cv_rmse,mass_s,mass_w,messages_cum,buffer_max,nodes_alive"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,"));
    assert!(lines[1].contains(",psp,sync,0,"));

    let summary = read(&out, "summary.csv");
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], SUMMARY_HEADER.join(","));
    assert_eq!(
        lines[0],
        "protocol,mode,eps,mean_time,std_time,mean_msgs,std_msgs,reach_rate,trials"
    );
    assert_eq!(lines.len(), 5);
    // one trial: the standard deviation is undefined
    assert!(lines[1..].iter().all(|l| l.split(',').nth(4) == Some("NA")));
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let status = aggsim(
        dir.path(),
        SMALL,
        &[
            "--protocol",
            "ppow",
            "--mode",
            "async",
            "--trials",
            "2",
            "--eps",
            "0.5,0.05",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let summary = read(&out, "summary.csv");
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("ppow,async,0.5,"));
    assert!(rows[1].starts_with("ppow,async,0.05,"));
    assert!(rows.iter().all(|r| r.ends_with(",2")));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = "protocol = drg\nnodes = 80\ntrials = 3\nbudget = 30\nseed = 9\nloss_prob = 0.05\n";
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let status = aggsim(dir.path(), config, &["--out", out.to_str().unwrap()]);
        assert!(status.status.success());
        outputs.push((read(&out, "curves.csv"), read(&out, "summary.csv")));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn topology_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let topo = dir.path().join("graph.txt");
    let status = aggsim(
        dir.path(),
        SMALL,
        &[
            "--topology-out",
            topo.to_str().unwrap(),
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ],
    );
    assert!(status.status.success());
    let file = fs::File::open(&topo).unwrap();
    let (graph, _seed) = Topology::read_edge_list(std::io::BufReader::new(file)).unwrap();
    assert_eq!(graph.len(), 60);
    assert!(graph.edge_count() > 0);
}

#[test]
fn configuration_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    for (config, args) in [
        (SMALL, vec!["--protocol", "gossip"]),
        (SMALL, vec!["--loss-prob", "1.5"]),
        (SMALL, vec!["--mode", "lockstep"]),
        (SMALL, vec!["--crash-spec", "round:5 nodes:1000"]),
        ("protocol = psp\nwhatever = 1\n", vec![]),
        ("protocol = psp\nprotocol = drg\n", vec![]),
    ] {
        let mut args = args;
        args.extend(["--out", out]);
        let status = aggsim(dir.path(), config, &args);
        assert!(!status.status.success(), "{config:?} {args:?}");
        assert!(!status.stderr.is_empty());
    }
    let missing = Command::new(env!("CARGO_BIN_EXE_aggsim"))
        .args(["run", "--config", dir.path().join("absent.conf").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("absent.conf"));
}

#[test]
fn unreached_targets_are_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let status = aggsim(dir.path(), SMALL, &["--eps", "1e-12", "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    let summary = read(&out, "summary.csv");
    let row = summary.lines().nth(1).unwrap();
    assert_eq!(row, "psp,sync,1e-12,NA,NA,NA,NA,0,1");
}
