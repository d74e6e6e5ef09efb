use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gpuiseux"))
}

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn scratch(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gpuiseux-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn cusp_text_golden() {
    let o = run(&["expand", corpus("cusp.spec").to_str().unwrap()]);
    assert!(o.status.success());
    let want = "series: t^(3/2)\n\
                status: COMPLETE\n\
                chain:\n  \
                1: Q_1=y beta=3/2 b=0 eps=3/2 alpha=1\n  \
                2: Q_2=y^2 - t^3 beta=inf b=0 eps=inf alpha=2\n\
                trace:\n  \
                beta=3/2 coeff=1 i_beta=1 beta_plus=inf branch=STEP\n";
    assert_eq!(stdout(&o), want);
}

#[test]
fn wild_records_golden() {
    let o = run(&["expand", "--format", "records", "--budget-terms", "3", corpus("artin_schreier.spec").to_str().unwrap()]);
    assert!(o.status.success());
    let want = "record=result series=\"t^(1/2) + t^(3/4) + t^(7/8) + O(t^(15/16))\" status=BUDGET\n\
                record=chain index=1 q=y beta=1/2 b=0 eps=1/2 alpha=1\n\
                record=chain index=2 q=\"y^2 + t*y + t\" beta=inf b=0 eps=inf alpha=2\n\
                record=step beta=1/2 coeff=1 i_beta=1 beta_plus=3/4 branch=STEP\n\
                record=step beta=3/4 coeff=1 i_beta=2 beta_plus=7/8 branch=STEP\n\
                record=step beta=7/8 coeff=1 i_beta=2 beta_plus=15/16 branch=STEP\n";
    assert_eq!(stdout(&o), want);
}

#[test]
fn verify_passes_on_corpus() {
    for e in std::fs::read_dir(corpus("")).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "spec") {
            let o = run(&["verify", "--samples", "15", p.to_str().unwrap()]);
            let out = stdout(&o);
            assert!(o.status.success(), "{}:\n{out}", p.display());
            assert!(out.ends_with("verify=PASS\n"));
        }
    }
}

#[test]
fn verify_is_deterministic() {
    let p = corpus("two_level.spec");
    let a = run(&["verify", "--samples", "10", p.to_str().unwrap()]);
    let b = run(&["verify", "--samples", "10", p.to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["verify", "--samples", "10", "--seed", "7", p.to_str().unwrap()]);
    assert!(c.status.success());
}

#[test]
fn corrupted_series_fails_residual() {
    let o = run(&["verify", "--corrupt-series", "5/2", corpus("cusp.spec").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("check=residual status=FAIL residual_val=4"));
    assert!(out.ends_with("verify=FAIL\n"));
}

#[test]
fn parse_errors_exit_2_with_position() {
    let p = scratch("bad.spec", "field = Q\npoly = y^2 - t^3\nbudget_terms = many\n");
    let o = run(&["expand", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("bad.spec:3:16:"), "{err}");
}

#[test]
fn normalize_round_trips() {
    for name in ["artin_schreier_limit.spec", "surd_terminal.spec", "mixed3.spec"] {
        let first = stdout(&run(&["normalize", corpus(name).to_str().unwrap()]));
        let p = scratch(name, &first);
        let second = stdout(&run(&["normalize", p.to_str().unwrap()]));
        assert_eq!(first, second);
    }
}

#[test]
fn trace_file_matches_run() {
    let dir = std::env::temp_dir().join(format!("gpuiseux-trace-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let t = dir.join("trace.txt");
    let o = run(&["expand", "--trace", t.to_str().unwrap(), corpus("linear.spec").to_str().unwrap()]);
    assert!(o.status.success());
    let trace = std::fs::read_to_string(&t).unwrap();
    assert_eq!(
        trace,
        "beta=1 coeff=1 i_beta=1 beta_plus=2 branch=STEP\nbeta=2 coeff=1 i_beta=2 beta_plus=inf branch=STEP\nresult=t + t^2 status=COMPLETE\n"
    );
}

#[test]
fn limit_resolution_flag() {
    let o = run(&["expand", "--resolve-limits", corpus("artin_schreier.spec").to_str().unwrap()]);
    let out = stdout(&o);
    assert!(out.contains("status: COMPLETE\nlimit: y^2 + t*y + t\n"), "{out}");
    assert!(out.contains("branch=LIMIT"));
}

#[test]
fn arith_scripts() {
    let p = scratch("carry.ar", "mode = mixed\np = 2\nlet a = 3*p^(1/2)\na*a\n");
    let o = run(&["arith", p.to_str().unwrap()]);
    assert!(o.status.success());
    // 9p = p + 8p
    assert_eq!(stdout(&o), "a = p^(1/2) + p^(3/2)\np + p^4\n");
    let bad = scratch("bad.ar", "field = Q\nlet a = (1 + t\n");
    let o = run(&["arith", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
