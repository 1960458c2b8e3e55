use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const PEPTIDES: &str = "\
>p1|1\nKWKLFKKIGAVLKVL\n>p2|1\nGLLKKLKKLLKKAG\n>p3|1\nRRWWRFKKLAKK\n>p4|1\nKIAKKGLLKKL\n\
>p5|1\nFLKKWAKKLLK\n>n1|0\nDESTPGSGEAAQ\n>n2|0\nSPEDNQTDAGSA\n>n3|0\nAQSTDEGPNQT\n\
>n4|0\nPGSGEDESTAQN\n>n5|0\nNQTDSPEDGATS\n>n6|0\nTDEGSAPQNES\n>n7|0\nEDSPGTQANSD\n\
>n8|0\nGSEDTQPNAES\n>n9|0\nQNTDSEGAPSD\n>n10|0\nSDEPGNQTSAE\n";

fn ampgan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ampgan"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn setup(extra: &str) -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("pep.fasta"), PEPTIDES).unwrap();
    fs::write(
        tmp.path().join("run.toml"),
        format!(
            "output_dir = \"out\"\n[[datasets]]\nname = \"pep\"\npath = \"pep.fasta\"\n{extra}"
        ),
    )
    .unwrap();
    tmp
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ampgan(tmp.path(), &["--config", "absent.toml", "encode"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("absent.toml"));
}

#[test]
fn missing_dataset_exits_2_and_names_it() {
    let tmp = setup("");
    fs::remove_file(tmp.path().join("pep.fasta")).unwrap();
    let o = ampgan(tmp.path(), &["--config", "run.toml", "encode"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("pep.fasta"), "{}", stderr(&o));
}

#[test]
fn encode_aac_writes_twenty_features() {
    let tmp = setup("[encoders]\nenabled = [\"aac\"]\n");
    let o = ampgan(tmp.path(), &["--config", "run.toml", "encode"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("out/features/pep.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 22);
    assert_eq!(csv.lines().count(), 16);
}

#[test]
fn report_on_empty_dir_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ampgan(tmp.path(), &["report", "."]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no reports found"), "{}", stderr(&o));
}

#[test]
fn encode_balance_train_evaluate_chain() {
    let tmp = setup(
        "[encoders]\nenabled = [\"aac\", \"physchem\"]\n[gan]\ngenerator_steps = 20\nbatch_size = 8\n",
    );
    let cfg = ["--config", "run.toml"];
    let run = |args: &[&str]| {
        let o = ampgan(tmp.path(), &[&cfg[..], args].concat());
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        o
    };
    run(&["encode"]);
    run(&["balance", "--features", "out/features/pep.csv", "--output", "bal.csv"]);
    let bal = fs::read_to_string(tmp.path().join("bal.csv")).unwrap();
    assert!(bal.lines().next().unwrap().ends_with(",provenance"));
    let synthetic = bal.lines().filter(|l| l.ends_with(",synthetic")).count();
    assert_eq!(synthetic, 5);

    run(&["train", "--features", "bal.csv", "--model", "forest", "--output", "rf.json"]);
    let o = run(&[
        "evaluate", "--features", "out/features/pep.csv", "--model", "rf.json", "--output", "m.json",
    ]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("mcc"));
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("m.json")).unwrap()).unwrap();
    assert!(m["metrics"]["mcc"].as_f64().is_some());
}
