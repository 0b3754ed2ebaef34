use std::cmp::Ordering;

use bhw_core::formulas::{class_of, parse_formula, rank};
use bhw_core::ordinals::{compare, enumerate_upto, natural_sum, nf_sum, psi};
use bhw_core::rsstar::{pipeline, CheckConfig};
use bhw_core::taitkp::{check_proof, golden_corpus, mutants};
use bhw_core::trees::{alpha_tree, alpha_tree_height, eq_star, mem_star, shapes};
use bhw_core::OrdTerm;
use serde_json::{json, Value};

struct Check {
    name: &'static str,
    cases: usize,
    failures: Vec<String>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Check {
            name,
            cases: 0,
            failures: vec![],
        }
    }

    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok && self.failures.len() < 5 {
            self.failures.push(what());
        }
    }

    fn json(&self) -> Value {
        json!({"name": self.name, "cases": self.cases, "pass": self.failures.is_empty(), "failures": self.failures})
    }
}

fn ordinal_laws() -> Check {
    let mut c = Check::new("ordinal order and sums");
    let ts = enumerate_upto(5);
    for a in &ts {
        for b in &ts {
            c.expect(compare(a, b) == compare(b, a).reverse(), || {
                format!("antisymmetry {a} {b}")
            });
            c.expect((compare(a, b) == Ordering::Equal) == (a == b), || {
                format!("equality {a} {b}")
            });
            let s = nf_sum(a, b);
            c.expect(s >= *b && natural_sum(a, b) >= s, || {
                format!("sums {a} {b}")
            });
            c.expect(natural_sum(a, b) == natural_sum(b, a), || {
                format!("natural sum {a} {b}")
            });
        }
    }
    c
}

fn psi_monotone() -> Check {
    let mut c = Check::new("psi monotone and below W");
    let big = OrdTerm::big_omega();
    let args: Vec<_> = enumerate_upto(5)
        .into_iter()
        .filter_map(|a| psi(&a).ok().map(|p| (a, p)))
        .collect();
    for (a, pa) in &args {
        c.expect(*pa < big, || format!("p({a}) >= W"));
        for (b, pb) in &args {
            if a <= b {
                c.expect(pa <= pb, || format!("p({a}) > p({b})"));
            }
        }
    }
    c
}

fn formula_ranks() -> Check {
    let mut c = Check::new("rank below W iff class B");
    let big = OrdTerm::big_omega();
    let bodies = ["(in x a)", "(rel X x)", "(M w x)", "(nM 1 a)"];
    let mut fs = vec![];
    for b in bodies {
        fs.push(b.to_string());
        for q in [
            "(ex x %)",
            "(all x %)",
            "(rex w x %)",
            "(rall 1 x %)",
            "(bex x a %)",
            "(Rex X %)",
            "(Rall X %)",
        ] {
            fs.push(q.replace('%', b));
            for q2 in ["(ex y %)", "(rall 2 y %)", "(Rex X %)"] {
                fs.push(q2.replace('%', &q.replace('%', b)));
            }
        }
    }
    for s in &fs {
        let f = parse_formula(s).expect("selftest formula");
        c.expect((rank(&f) < big) == class_of(&f).is_b, || {
            format!("{s}: rank {}", rank(&f))
        });
    }
    c
}

fn proofs() -> Check {
    let mut c = Check::new("golden proofs accepted, mutants rejected");
    for (name, p) in golden_corpus() {
        c.expect(check_proof(&p).ok, || format!("{name} rejected"));
        for m in mutants(&p) {
            c.expect(!check_proof(&m.proof).ok, || {
                format!("{name} mutant {:?} at {} accepted", m.kind, m.step)
            });
        }
    }
    c
}

fn trees() -> Check {
    let mut c = Check::new("tree equality laws and alpha-tree agreement");
    let ts = shapes(6, 6);
    let alphas = enumerate_upto(2);
    for s in &ts {
        c.expect(eq_star(s, s) == Ok(true), || format!("{s} not =* itself"));
        for t in &ts {
            let st = eq_star(s, t);
            c.expect(st == eq_star(t, s), || format!("eq symmetry {s} {t}"));
            if st == Ok(true) {
                for u in &ts {
                    c.expect(mem_star(u, s) == mem_star(u, t), || {
                        format!("transport {u} {s} {t}")
                    });
                }
            }
        }
        for a in &alphas {
            let x = alpha_tree(s, a).map(|r| r.is_some());
            let y = alpha_tree_height(s, a).map(|r| r.is_some());
            c.expect(x == y, || format!("{s} as {a}-tree"));
        }
    }
    c
}

fn certificates(seed: u64) -> Check {
    let mut c = Check::new("golden pipeline certificates");
    let cfg = CheckConfig {
        depth: 5,
        samples: 2,
        seed,
    };
    for (name, p) in golden_corpus() {
        match pipeline(&p, &OrdTerm::zero(), cfg) {
            Ok(r) => c.expect(r.check.ok, || format!("{name}: {:?}", r.check.violations)),
            Err(e) => c.expect(false, || format!("{name}: {e}")),
        }
    }
    c
}

pub fn run(seed: u64) -> (String, bool) {
    let checks = [
        ordinal_laws(),
        psi_monotone(),
        formula_ranks(),
        proofs(),
        trees(),
        certificates(seed),
    ];
    let ok = checks.iter().all(|c| c.failures.is_empty());
    let out = json!({"seed": seed, "pass": ok, "checks": checks.iter().map(Check::json).collect::<Vec<_>>()});
    (
        serde_json::to_string_pretty(&out).expect("serializable"),
        ok,
    )
}

#[cfg(test)]
mod tests {
    #[test]
    fn report_passes() {
        let (out, ok) = super::run(1);
        assert!(ok, "{out}");
    }
}
