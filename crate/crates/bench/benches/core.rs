use bhw_bench::{formula_sample, ordinal_sample, tree_sample};
use bhw_core::formulas::{class_of, rank};
use bhw_core::ordinals::psi;
use bhw_core::rsstar::{pipeline, CheckConfig};
use bhw_core::taitkp::{check_proof, golden_corpus};
use bhw_core::trees::{alpha_tree, eq_star};
use bhw_core::OrdTerm;
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn ordinals(c: &mut Criterion) {
    let terms = ordinal_sample(5);
    c.bench_function("compare all pairs (size 5)", |b| {
        b.iter(|| {
            let mut less = 0usize;
            for x in &terms {
                for y in &terms {
                    less += (x < y) as usize;
                }
            }
            less
        })
    });
    c.bench_function("psi over size 5", |b| {
        b.iter(|| terms.iter().filter(|t| psi(t).is_ok()).count())
    });
}

fn formulas(c: &mut Criterion) {
    let fs = formula_sample();
    c.bench_function("rank and classes", |b| {
        b.iter(|| {
            fs.iter()
                .map(|f| (rank(f), class_of(f).is_b))
                .collect::<Vec<_>>()
        })
    });
}

fn proofs(c: &mut Criterion) {
    let corpus = golden_corpus();
    c.bench_function("check golden corpus", |b| {
        b.iter(|| corpus.iter().all(|(_, p)| check_proof(p).ok))
    });
    let cfg = CheckConfig {
        depth: 4,
        samples: 2,
        seed: 1,
    };
    c.bench_function("pipeline golden corpus", |b| {
        b.iter(|| {
            corpus
                .iter()
                .filter(|(_, p)| pipeline(p, &OrdTerm::zero(), cfg).is_ok())
                .count()
        })
    });
}

fn trees(c: &mut Criterion) {
    let ts = tree_sample(7);
    let w = OrdTerm::omega();
    c.bench_function("eq_star shapes(7,4) pairs", |b| {
        b.iter(|| {
            let mut n = 0;
            for s in &ts {
                for t in &ts {
                    n += (eq_star(s, t) == Ok(true)) as usize;
                }
            }
            n
        })
    });
    c.bench_function("alpha_tree shapes(7,4)", |b| {
        b.iter(|| {
            ts.iter()
                .filter(|t| matches!(alpha_tree(black_box(t), &w), Ok(Some(_))))
                .count()
        })
    });
}

criterion_group!(benches, ordinals, formulas, proofs, trees);
criterion_main!(benches);
