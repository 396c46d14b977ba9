use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use segbench::bench::bench_eval;
use segbench::config::ExperimentConfig;
use segbench::data::{load_or_build, synthetic_evaluators};
use segbench::report::report;
use segbench::runner::{load_run, run_experiment, run_path};
use segbench::sample::{histogram, largest_gap_split, sample_metrics, write_csv};
use segbench::serve::Server;
use segbench_core::encoding::sample_random;
use segbench_core::lut::{MetricKind, NoiseSource};
use segbench_core::moea::{run, Algorithm};
use segbench_core::problems::{evaluate_batch, get_problem, Evaluators};

fn evaluators() -> &'static Evaluators {
    static EV: OnceLock<Evaluators> = OnceLock::new();
    EV.get_or_init(|| synthetic_evaluators().unwrap().0)
}

fn ask(server: &Server, request: Value) -> Value {
    server.handle_line(request.to_string().as_bytes())
}

#[test]
fn protocol_matches_in_process_evaluation() {
    let server = Server::new(evaluators(), true);
    let genotypes = sample_random(40, 3).unwrap();
    let rows: Vec<Vec<i64>> = genotypes.iter().map(|g| g.to_vec()).collect();
    for id in [1, 15] {
        let p = get_problem(id).unwrap();
        let local = evaluate_batch(&p, &genotypes, evaluators(), &mut NoiseSource::new(9)).unwrap();
        for raw in [false, true] {
            let resp = ask(&server, json!({"op": "evaluate", "problem": id, "X": rows, "seed": 9, "raw": raw, "id": 4}));
            assert_eq!(resp["id"], 4);
            let f: Vec<Vec<f64>> = serde_json::from_value(resp["F"].clone()).unwrap();
            let expected: Vec<Vec<f64>> = local.iter().map(|v| if raw { v.raw.clone() } else { v.normalized.clone() }).collect();
            assert_eq!(f, expected, "MOP{id} raw={raw}");
        }
        let s = ask(&server, json!({"op": "settings", "problem": id}));
        assert_eq!(s["M"], p.num_objectives);
        assert_eq!(s["D"], 32);
        assert_eq!(s["lower"].as_array().unwrap().len(), 32);
    }
}

#[test]
fn invalid_rows_keep_later_rows_on_their_streams() {
    let server = Server::new(evaluators(), true);
    let g = sample_random(3, 5).unwrap();
    let p = get_problem(4).unwrap();
    let local = evaluate_batch(&p, &g, evaluators(), &mut NoiseSource::new(2)).unwrap();
    let rows = json!([g[0].to_vec(), [9, 9], g[2].to_vec()]);
    let resp = ask(&server, json!({"op": "evaluate", "problem": 4, "X": rows, "seed": 2}));
    assert!(resp["F"][1].is_null());
    assert_eq!(resp["errors"][0]["index"], 1);
    let third: Vec<f64> = serde_json::from_value(resp["F"][2].clone()).unwrap();
    assert_eq!(third, local[2].normalized);
}

#[test]
fn error_kinds() {
    let server = Server::new(evaluators(), true);
    assert_eq!(server.handle_line(b"{nope")["error"], "parse");
    assert_eq!(ask(&server, json!([1]))["error"], "bad_request");
    assert_eq!(ask(&server, json!({"op": "fly"}))["error"], "unknown_op");
    assert_eq!(ask(&server, json!({"op": "settings", "problem": 16}))["error"], "unknown_problem");
    assert_eq!(ask(&server, json!({"op": "evaluate", "problem": 1}))["error"], "bad_request");
    assert_eq!(ask(&server, json!({"op": "evaluate", "problem": 1, "X": [], "seed": -1}))["error"], "bad_request");
}

#[test]
fn fuzzed_input_gets_one_response_per_line() {
    let server = Server::new(evaluators(), true);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut input = Vec::new();
    let lines = 300;
    for i in 0..lines {
        let len = rng.gen_range(0..200);
        let mut line: Vec<u8> = (0..len).map(|_| rng.gen::<u8>()).filter(|&b| b != b'\n').collect();
        if i % 7 == 0 {
            line = br#"{"op":"evaluate","problem":2,"X":[[1,2,"#.to_vec();
        }
        input.extend(line);
        input.push(b'\n');
    }
    let mut output = Vec::new();
    server.serve_stream(&input[..], &mut output).unwrap();
    let responses: Vec<Value> = output.lines().map(|l| serde_json::from_str(&l.unwrap()).unwrap()).collect();
    assert_eq!(responses.len(), lines);
    assert!(responses.iter().all(|r| r.get("error").is_some()));
}

#[test]
fn tcp_session() {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        Server::new(evaluators(), false).serve_tcp("127.0.0.1:0", |addr| tx.send(addr).unwrap()).unwrap();
    });
    let addr = rx.recv().unwrap();
    for _ in 0..2 {
        let mut stream = TcpStream::connect(addr).unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        writeln!(stream, r#"{{"op":"settings","problem":15}}"#).unwrap();
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let v: Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["M"], 7);
        assert_eq!(v["N_population"], 217);
        assert_eq!(v["perturbation"], false);
    }
}

#[test]
fn full_budget_with_two_objectives_gives_hundred_generations() {
    let p = get_problem(6).unwrap();
    let record = run(Algorithm::Nsga2, &p, 10_000, 3, evaluators()).unwrap();
    assert_eq!(record.population_size, 100);
    assert_eq!(record.generations.len(), 100);
    assert_eq!(record.generations.last().unwrap().evals, 10_000);
}

#[test]
fn resume_skips_finished_runs_and_report_rebuilds() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(vec![1], Algorithm::ALL.to_vec(), dir.path());
    cfg.runs = 2;
    cfg.evaluations = 300;
    let first = run_experiment(&cfg, evaluators(), 2).unwrap();
    assert_eq!((first.executed, first.skipped), (12, 0));
    let path = run_path(dir.path(), 1, Algorithm::Ibea, 1);
    // an interrupted write leaves a partial file behind
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(load_run(&path).unwrap().is_none());
    let second = run_experiment(&cfg, evaluators(), 2).unwrap();
    assert_eq!((second.executed, second.skipped), (1, 11));
    assert_eq!(second.summary, first.summary);
    assert_eq!(report(dir.path()).unwrap(), first.summary);
    assert!(dir.path().join("hv_trace.csv").exists());

    cfg.evaluations = 400;
    assert!(run_experiment(&cfg, evaluators(), 1).is_err(), "mismatched stored runs must be rejected");
}

#[test]
fn cached_data_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let built = load_or_build(dir.path()).unwrap();
    let loaded = load_or_build(dir.path()).unwrap();
    let g = sample_random(20, 1).unwrap();
    let p = get_problem(15).unwrap().with_perturbation(false);
    let a = evaluate_batch(&p, &g, &built, &mut NoiseSource::new(0)).unwrap();
    let b = evaluate_batch(&p, &g, &loaded, &mut NoiseSource::new(0)).unwrap();
    assert_eq!(a, b);
}

fn flops_sample() -> Vec<f64> {
    let table = evaluators().table.as_ref().unwrap();
    sample_metrics(table, 10_000, 1, &[MetricKind::Flops]).unwrap().into_iter().map(|r| r[0]).collect()
}

#[test]
fn sample_csv_shape_and_bound() {
    let table = evaluators().table.as_ref().unwrap();
    let metrics = MetricKind::ALL.to_vec();
    let rows = sample_metrics(table, 10_000, 1, &metrics).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &metrics, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 10_001);
    assert!(text.starts_with("index,flops,"));
    let max = rows.iter().map(|r| r[0]).fold(f64::NEG_INFINITY, f64::max);
    assert!(max <= 3.3107e8 * (1.0 + 1e-12));
    assert!(sample_metrics(table, 0, 1, &metrics).is_err());
}

/// Counts maximal runs of bins above a fifth of the tallest bin.
fn distinct_peaks(h: &[usize]) -> usize {
    let cut = *h.iter().max().unwrap() as f64 / 5.0;
    let mut peaks = 0;
    let mut inside = false;
    for &c in h {
        let above = c as f64 > cut;
        if above && !inside {
            peaks += 1;
        }
        inside = above;
    }
    peaks
}

#[test]
fn flops_histogram_has_several_peaks() {
    let log: Vec<f64> = flops_sample().iter().map(|f| f.ln()).collect();
    let peaks = distinct_peaks(&histogram(&log, 40));
    assert!(peaks >= 2, "{peaks} peaks");
}

#[test]
fn flops_split_into_two_clusters() {
    let log: Vec<f64> = flops_sample().iter().map(|f| f.ln()).collect();
    let s = largest_gap_split(&log).unwrap();
    assert!(s.left.min(s.right) >= 500, "{s:?}");
    assert!(s.separation >= 2.0, "{s:?}");
}

#[test]
fn bench_rejects_empty_batches() {
    let p = get_problem(1).unwrap();
    assert!(bench_eval(&p, evaluators(), 0, 3, 0).is_err());
    assert!(bench_eval(&p, evaluators(), 10, 0, 0).is_err());
    let r = bench_eval(&p, evaluators(), 10, 3, 0).unwrap();
    assert_eq!(r.samples.len(), 3);
}
