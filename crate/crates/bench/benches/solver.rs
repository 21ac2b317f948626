use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hyra_bench::{config, encoded, model};
use hyra_core::encode::encode;
use hyra_core::expr::{Interval, Term};
use hyra_core::hnsolve::{solve_db, Guidance, RunGen};
use hyra_core::icp::{flow_enclosure, prune, Contractor, Space};
use std::collections::BTreeMap;
use std::hint::black_box;

fn encoding(c: &mut Criterion) {
    let mut g = c.benchmark_group("encode");
    for (name, k) in [("generator_linear_2", 11), ("car_linear_1", 6), ("dribble", 12)] {
        let doc = model(name);
        g.bench_with_input(BenchmarkId::new(name, k), &k, |b, &k| {
            b.iter(|| encode(black_box(&doc.network), &doc.goal, k, doc.max_delay).unwrap())
        });
    }
    g.finish();
}

fn run_generation(c: &mut Criterion) {
    let db = encoded("generator_linear_2", 11);
    let gen = RunGen::new(&db.network, db.k);
    c.bench_function("gen_run/generator_linear_2@11", |b| b.iter(|| gen.gen_run(&db, black_box(&[]))));
}

fn solving(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    for (name, k) in [("generator_linear_2", 11), ("car_linear_1", 6)] {
        let doc = model(name);
        let db = encoded(name, k);
        for guidance in Guidance::ALL {
            let cfg = config(&doc, guidance, k);
            g.bench_function(BenchmarkId::new(format!("{name}@{k}"), guidance), |b| {
                b.iter(|| solve_db(&db, &cfg, None).unwrap())
            });
        }
    }
    g.finish();
}

fn intervals(c: &mut Criterion) {
    let sp = Space::new([("x".to_string(), Interval::new(-10.0, 10.0)), ("y".to_string(), Interval::new(-10.0, 10.0))]);
    let (x, y) = (Term::var("x"), Term::var("y"));
    let circle = Contractor::atom(&(x.clone().pow(2) + y.clone().pow(2)).le(Term::constant(4.0)), &sp).unwrap();
    let line = Contractor::atom(&(x - y).ge(Term::constant(1.0)), &sp).unwrap();
    c.bench_function("prune/circle-and-line", |b| b.iter(|| prune(&[&circle, &line], black_box(&sp.root_box()))));

    let drag = Term::constant(-9.8) - Term::constant(0.1) * Term::var("v").pow(2);
    let ball = [("x".to_string(), Term::var("v")), ("v".to_string(), drag)];
    let start = BTreeMap::from([("x".to_string(), Interval::point(1.0)), ("v".to_string(), Interval::new(-0.1, 0.1))]);
    c.bench_function("flow_enclosure/ball", |b| {
        b.iter(|| flow_enclosure(&ball, black_box(&start), Interval::new(0.0, 0.4), 16).unwrap())
    });
}

criterion_group!(benches, encoding, run_generation, solving, intervals);
criterion_main!(benches);
