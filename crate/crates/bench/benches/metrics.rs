use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use stateval_bench::{raw_outputs, workload};
use stateval_core::harness::resolve_predictions;
use stateval_core::{aggregate, judge_instruction, parse_action, CoordinateSpace, CorrectnessConfig, Dimension, EvalConfig};

fn bench_parse(c: &mut Criterion) {
    let (groups, _) = workload(1, 1, Dimension::Mwam);
    let state = &groups[0].state;
    let inputs = raw_outputs();
    let mut g = c.benchmark_group("parse_action");
    g.throughput(Throughput::Elements(inputs.len() as u64));
    g.bench_function("mixed", |b| {
        b.iter(|| {
            for raw in &inputs {
                let _ = black_box(parse_action(black_box(raw), Some(state)));
            }
        })
    });
    g.finish();
}

fn bench_judge(c: &mut Criterion) {
    let cfg = CorrectnessConfig::default();
    let mut g = c.benchmark_group("judge");
    for dim in [Dimension::Mwam, Dimension::Uwiu] {
        let (groups, records) = workload(100, 10, dim);
        let preds = resolve_predictions(&records, &groups, CoordinateSpace::Normalized);
        let instructions: Vec<_> = groups.iter().flat_map(|g| &g.instructions).collect();
        g.throughput(Throughput::Elements(instructions.len() as u64));
        g.bench_with_input(BenchmarkId::from_parameter(dim), &(instructions, preds), |b, (ins, preds)| {
            b.iter(|| {
                for (i, p) in ins.iter().zip(preds) {
                    black_box(judge_instruction(i, Some(p), &cfg));
                }
            })
        });
    }
    g.finish();
}

fn bench_aggregate(c: &mut Criterion) {
    let cfg = EvalConfig::default();
    let mut g = c.benchmark_group("aggregate");
    g.sample_size(20);
    for states in [100, 1_000, 10_000] {
        let (groups, records) = workload(states, 10, Dimension::Mwam);
        let preds = resolve_predictions(&records, &groups, CoordinateSpace::Normalized);
        g.throughput(Throughput::Elements(records.len() as u64));
        g.bench_with_input(BenchmarkId::from_parameter(states), &(groups, preds), |b, (groups, preds)| {
            b.iter(|| aggregate(black_box(groups), black_box(preds), &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_parse, bench_judge, bench_aggregate);
criterion_main!(benches);
