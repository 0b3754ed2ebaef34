use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bhw_core::formulas::{self, Formula};
use bhw_core::ordinals::{self, OrdTerm};
use bhw_core::rsstar::{self, CheckConfig, DOp};
use bhw_core::taitkp::{self, TaitProof};
use bhw_core::trees::{self, Assignment, Budget, Ranking, TreeSet};
use bhw_core::SetTerm;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

mod selftest;

#[derive(Parser)]
#[command(
    name = "bhw",
    version,
    about = "Ordinal notations, ranked formulas, proof certificates and suitable trees"
)]
struct Cli {
    /// Seed for sampled checks; BHW_SEED takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ordinal notation arithmetic
    #[command(subcommand)]
    Ord(OrdCmd),
    /// Formula ranks, levels and classes
    #[command(subcommand)]
    Fml(FmlCmd),
    /// Tait-style proofs
    #[command(subcommand)]
    Proof(ProofCmd),
    /// Infinitary derivation certificates
    #[command(subcommand)]
    Rs(RsCmd),
    /// Suitable trees
    #[command(subcommand)]
    Tree(TreeCmd),
    /// Truth of a B formula under a tree assignment
    Eval(EvalArgs),
    /// Runs the enumeration property suites
    Selftest,
}

#[derive(Subcommand)]
enum OrdCmd {
    /// LT, EQ or GT
    Cmp {
        a: String,
        b: String,
    },
    /// Normal form of an expression (`#` allowed)
    Nf {
        t: String,
    },
    Add {
        a: String,
        b: String,
    },
    Nsum {
        a: String,
        b: String,
    },
    Wpow {
        a: String,
    },
    Psi {
        a: String,
    },
    /// Whether t ∈ C(a, 0)
    #[command(name = "inC")]
    InC {
        t: String,
        a: String,
    },
    /// ω_n(ξ)
    Tower {
        n: usize,
        xi: String,
    },
}

#[derive(Subcommand)]
enum FmlCmd {
    Rank {
        f: String,
    },
    Level {
        f: String,
    },
    Len {
        f: String,
    },
    Class {
        f: String,
    },
    Neg {
        f: String,
    },
    /// Bounds every unbounded ∃ by the given level
    Bound {
        f: String,
        beta: String,
    },
    /// Restricts unbounded quantifiers to a set term
    Relativize {
        f: String,
        a: String,
    },
}

#[derive(Subcommand)]
enum ProofCmd {
    Check { file: PathBuf },
}

#[derive(Subcommand)]
enum RsCmd {
    /// Embed, eliminate cuts and collapse
    Pipeline {
        file: PathBuf,
        #[arg(long, default_value = "0")]
        sigma: String,
        #[arg(long, default_value_t = 4)]
        samples: usize,
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
    /// One of: tnd, lifting, eps_ind, pair, union, sep, ca, s0_ref, empty_set
    Builders {
        name: String,
        /// Formula used by tnd, lifting, eps_ind, sep, ca and s0_ref
        #[arg(long)]
        formula: Option<String>,
        #[arg(long, default_value_t = 4)]
        samples: usize,
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
}

#[derive(Subcommand)]
enum TreeCmd {
    Eq {
        s: String,
        t: String,
    },
    Mem {
        s: String,
        t: String,
    },
    /// Whether T is an α-tree, with the ranking of the root
    Alpha {
        t: String,
        alpha: String,
    },
    /// Merges ranked children under labels 2^n·3^k
    Merge {
        alpha: String,
        l0: u64,
        /// n,k,TREE; each child is ranked by the least witness below α+ℓ₀
        #[arg(long = "child")]
        children: Vec<String>,
    },
    Suitable {
        t: String,
    },
}

#[derive(Args)]
struct EvalArgs {
    formula: String,
    /// JSON object from variable names to tree literals or tree files
    #[arg(long)]
    assign: PathBuf,
    /// treeSizeMax[,witnessMax]
    #[arg(long, default_value = "16,64")]
    budget: String,
}

type Res = Result<String, String>;

fn ord(s: &str) -> Result<OrdTerm, String> {
    let t = ordinals::parse(s).map_err(|e| e.to_string())?;
    t.check_nf().map_err(|e| e.to_string())?;
    Ok(t)
}

fn fml(s: &str) -> Result<Formula, String> {
    let f = formulas::parse_formula(s).map_err(|e| e.to_string())?;
    formulas::check_levels(&f).map_err(|e| e.to_string())?;
    Ok(f)
}

fn tree(s: &str) -> Result<TreeSet, String> {
    let t = s.trim();
    if t == "omega*" || t.starts_with("n*:") {
        return trees::parse_tree_literal(t).map_err(|e| e.to_string());
    }
    let text = std::fs::read_to_string(Path::new(t)).map_err(|e| format!("{t}: {e}"))?;
    trees::parse_tree_file(&text).map_err(|e| format!("{t}: {e}"))
}

fn json_out(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn tok(b: bool) -> String {
    b.to_string()
}

fn run_ord(c: OrdCmd) -> Res {
    Ok(match c {
        OrdCmd::Cmp { a, b } => match ordinals::compare(&ord(&a)?, &ord(&b)?) {
            std::cmp::Ordering::Less => "LT".into(),
            std::cmp::Ordering::Equal => "EQ".into(),
            std::cmp::Ordering::Greater => "GT".into(),
        },
        OrdCmd::Nf { t } => {
            let v = ordinals::parse_calc(&t).map_err(|e| e.to_string())?;
            v.check_nf().map_err(|e| e.to_string())?;
            v.to_string()
        }
        OrdCmd::Add { a, b } => ordinals::nf_sum(&ord(&a)?, &ord(&b)?).to_string(),
        OrdCmd::Nsum { a, b } => ordinals::natural_sum(&ord(&a)?, &ord(&b)?).to_string(),
        OrdCmd::Wpow { a } => ordinals::omega_pow(&ord(&a)?).to_string(),
        OrdCmd::Psi { a } => ordinals::psi(&ord(&a)?)
            .map_err(|e| e.to_string())?
            .to_string(),
        OrdCmd::InC { t, a } => tok(ordinals::in_c(&ord(&t)?, &ord(&a)?)),
        OrdCmd::Tower { n, xi } => ordinals::omega_tower(n, &ord(&xi)?).to_string(),
    })
}

fn run_fml(c: FmlCmd) -> Res {
    Ok(match c {
        FmlCmd::Rank { f } => formulas::rank(&fml(&f)?).to_string(),
        FmlCmd::Level { f } => formulas::level(&fml(&f)?).to_string(),
        FmlCmd::Len { f } => formulas::length(&fml(&f)?).to_string(),
        FmlCmd::Class { f } => {
            json_out(&serde_json::to_value(formulas::class_of(&fml(&f)?)).unwrap())
        }
        FmlCmd::Neg { f } => formulas::negate(&fml(&f)?).to_string(),
        FmlCmd::Bound { f, beta } => {
            let b = ord(&beta)?;
            if b >= OrdTerm::big_omega() {
                return Err(format!("level {b} is not below W"));
            }
            formulas::bound_exists(&fml(&f)?, &b).to_string()
        }
        FmlCmd::Relativize { f, a } => {
            let t = formulas::parse_term(&a).map_err(|e| e.to_string())?;
            formulas::relativize(&fml(&f)?, &t).to_string()
        }
    })
}

fn load_proof(file: &Path) -> Result<TaitProof, String> {
    let text = std::fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    TaitProof::from_json(&text).map_err(|e| format!("{}: {e}", file.display()))
}

fn run_proof(c: ProofCmd) -> Res {
    let ProofCmd::Check { file } = c;
    let rep = taitkp::check_proof(&load_proof(&file)?);
    let out = json_out(&serde_json::to_value(&rep).unwrap());
    if rep.ok {
        Ok(out)
    } else {
        let f = &rep.failures[0];
        println!("{out}");
        Err(format!("step {}: {}", f.step, f.reason))
    }
}

fn cert_json(name: &str, c: &rsstar::Cert, cfg: CheckConfig) -> Value {
    let rep = rsstar::cert_check(c, cfg);
    json!({
        "name": name,
        "conclusion": c.conclusion.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
        "alpha": c.alpha.to_string(),
        "rho": c.rho.to_string(),
        "rule": c.rule.tag(),
        "status": rep.status(),
        "check": rep,
    })
}

fn builder(name: &str, formula: Option<&str>) -> Result<rsstar::Cert, String> {
    let op = DOp::free();
    let f = |default: &str| -> Result<Formula, String> {
        Ok(formulas::canon(&fml(formula.unwrap_or(default))?))
    };
    let v = SetTerm::var;
    let one = OrdTerm::one();
    let e = |r: Result<rsstar::Cert, rsstar::RsError>| r.map_err(|e| e.to_string());
    Ok(match name {
        "tnd" => rsstar::derive_tnd(&f("(ex x (in x a))")?, &op),
        "lifting" => rsstar::derive_lifting(&OrdTerm::omega(), "z", &f("(in a z)")?, &op),
        "eps_ind" => rsstar::derive_eps_ind("u", &f("(ex v (in u v))")?, &op),
        "pair" => rsstar::derive_pair(&v("a"), &one, &v("b"), &OrdTerm::nat(2), &op),
        "union" => rsstar::derive_union(&v("a"), &one, &op),
        "sep" => e(rsstar::derive_sep(
            &v("a"),
            &one,
            "x",
            &f("(in x b)")?,
            &[(v("b"), OrdTerm::nat(2))],
            &op,
        ))?,
        "ca" => e(rsstar::derive_ca(&f("(rel Y x)")?, "x", "Y", &[], &op))?,
        "s0_ref" => e(rsstar::derive_s0_ref(
            &f("(ball x a (ex y (in x y)))")?,
            &[(v("a"), one)],
            &op,
        ))?,
        "empty_set" => rsstar::derive_empty_set(&op),
        other => return Err(format!("unknown builder '{other}'")),
    })
}

fn run_rs(c: RsCmd, seed: u64) -> Res {
    match c {
        RsCmd::Pipeline {
            file,
            sigma,
            samples,
            depth,
        } => {
            let p = load_proof(&file)?;
            let s = ord(&sigma)?;
            let r = rsstar::pipeline(
                &p,
                &s,
                CheckConfig {
                    depth,
                    samples,
                    seed,
                },
            )
            .map_err(|e| e.to_string())?;
            Ok(json_out(&serde_json::to_value(&r).unwrap()))
        }
        RsCmd::Builders {
            name,
            formula,
            samples,
            depth,
        } => {
            let c = builder(&name, formula.as_deref())?;
            Ok(json_out(&cert_json(
                &name,
                &c,
                CheckConfig {
                    depth,
                    samples,
                    seed,
                },
            )))
        }
    }
}

fn ranking_json(t: &TreeSet, r: &Ranking) -> Value {
    match r {
        Ranking::OmegaStar => {
            json!({"root": r.root().map(|o| o.to_string()), "values": "f(<>) = w, f(<n1..nr>) = nr"})
        }
        Ranking::Explicit(m) => {
            let vals: BTreeMap<String, String> = m
                .iter()
                .map(|(s, v)| {
                    (
                        s.iter()
                            .map(|n| n.to_string())
                            .collect::<Vec<_>>()
                            .join(" "),
                        v.to_string(),
                    )
                })
                .collect();
            json!({"root": r.root().map(|o| o.to_string()), "nodes": t.node_count(), "values": vals})
        }
    }
}

fn run_tree(c: TreeCmd) -> Res {
    let te = |e: trees::TreeError| e.to_string();
    Ok(match c {
        TreeCmd::Eq { s, t } => tok(trees::eq_star(&tree(&s)?, &tree(&t)?).map_err(te)?),
        TreeCmd::Mem { s, t } => tok(trees::mem_star(&tree(&s)?, &tree(&t)?).map_err(te)?),
        TreeCmd::Alpha { t, alpha } => {
            let tr = tree(&t)?;
            let a = ord(&alpha)?;
            match trees::alpha_tree(&tr, &a).map_err(te)? {
                Some(r) => json_out(&json!({"alphaTree": true, "ranking": ranking_json(&tr, &r)})),
                None => json_out(&json!({"alphaTree": false})),
            }
        }
        TreeCmd::Merge {
            alpha,
            l0,
            children,
        } => {
            let a = ord(&alpha)?;
            let top = ordinals::nf_sum(&a, &OrdTerm::nat(l0));
            let mut fam = BTreeMap::new();
            for spec in &children {
                let mut parts = spec.splitn(3, ',');
                let (n, k, t) = (parts.next(), parts.next(), parts.next());
                let (Some(n), Some(k), Some(t)) = (n, k, t) else {
                    return Err(format!("child '{spec}' is not n,k,TREE"));
                };
                let n: u32 = n.parse().map_err(|_| format!("bad n in '{spec}'"))?;
                let k: u32 = k.parse().map_err(|_| format!("bad k in '{spec}'"))?;
                let tr = tree(t)?;
                let r = trees::alpha_tree(&tr, &top)
                    .map_err(te)?
                    .ok_or_else(|| format!("{t} is not a {top}-tree"))?;
                fam.insert((n, k), (tr, r));
            }
            let (t, r) = trees::merge_family(&fam, &a, l0).map_err(te)?;
            let next = top.succ();
            let ok = trees::check_ranking(&t, &r, &next, 0);
            json_out(
                &json!({"tree": t.to_string(), "ranking": ranking_json(&t, &r), "alphaTree": ok, "alpha": next.to_string()}),
            )
        }
        TreeCmd::Suitable { t } => tok(trees::is_suitable(&tree(&t)?)),
    })
}

fn run_eval(a: EvalArgs) -> Res {
    let f = fml(&a.formula)?;
    let text =
        std::fs::read_to_string(&a.assign).map_err(|e| format!("{}: {e}", a.assign.display()))?;
    let raw: BTreeMap<String, String> =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", a.assign.display()))?;
    let base = a.assign.parent().unwrap_or(Path::new("."));
    let mut env = Assignment::new();
    for (k, v) in raw {
        let lit = v.trim();
        let t = if lit == "omega*" || lit.starts_with("n*:") {
            tree(lit)?
        } else {
            tree(&base.join(lit).to_string_lossy())?
        };
        env.insert(k, t);
    }
    let mut parts = a.budget.split(',');
    let num = |s: Option<&str>, d: usize| -> Result<usize, String> {
        s.map_or(Ok(d), |x| {
            x.trim()
                .parse()
                .map_err(|_| format!("bad budget '{}'", a.budget))
        })
    };
    let budget = Budget {
        tree_size_max: num(parts.next(), 16)?,
        witness_max: num(parts.next(), 64)?,
    };
    Ok(trees::eval_truth(&f, &env, &budget)
        .map_err(|e| e.to_string())?
        .to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = match std::env::var("BHW_SEED") {
        Ok(s) => match s.trim().parse() {
            Ok(v) => v,
            Err(_) => {
                eprintln!("error: BHW_SEED is not a number: {s}");
                return ExitCode::from(2);
            }
        },
        Err(_) => cli.seed,
    };
    let res = match cli.cmd {
        Cmd::Ord(c) => run_ord(c),
        Cmd::Fml(c) => run_fml(c),
        Cmd::Proof(c) => run_proof(c),
        Cmd::Rs(c) => run_rs(c, seed),
        Cmd::Tree(c) => run_tree(c),
        Cmd::Eval(a) => run_eval(a),
        Cmd::Selftest => {
            let (out, ok) = selftest::run(seed);
            println!("{out}");
            return if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            };
        }
    };
    match res {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(msg) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
