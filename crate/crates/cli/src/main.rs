//! JSON-in/JSON-out command line for the `exppoly` library: evaluate and
//! transform exponential polynomials, certify annihilation, recover
//! decompositions from samples, build invariant closures and operator
//! matrices, and compare recurrence families on finite abelian groups.
//!
//! Every run prints one JSON document on standard output.  Exit codes:
//! 0 = success (for predicate commands: the property holds), 1 = the
//! property fails, 2 = usage or input error, reported as
//! `{"error": code, "detail": …}`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use exppoly::diffops::{apply_modified_value, apply_sampled_value, OpFactor, PhiSpec};
use exppoly::lattice::LatticePoint;
use exppoly::montel::{
    certify_witness, minimal_orders, verify_annihilation, MontelConfig, Subject,
    WitnessCandidates,
};
use exppoly::oracle::{frechet_nullspaces, FiniteGroupSpec, FrechetOptions};
use exppoly::poly::ExpPoly;
use exppoly::recover::{recover, RecoveryConfig};
use exppoly::sampled::{PhiTable, SampledFunction};
use exppoly::scalar::Scalar;
use exppoly::subspace::{operator_matrix, GradedLexBasis, OperatorMatrix, SpanSpace};
use exppoly::{selftest, Error, Result};

#[derive(Parser)]
#[command(
    name = "exppoly",
    version,
    about = "Exponential polynomials on integer lattices: difference operators, \
             annihilation certificates, and recovery from samples"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// The function a command acts on: symbolic or sampled, exactly one.
#[derive(Args)]
struct SubjectArgs {
    /// Exponential polynomial (JSON file)
    #[arg(long, value_name = "FILE")]
    f: Option<PathBuf>,
    /// Sampled function on a box (JSON file)
    #[arg(long, value_name = "FILE")]
    samples: Option<PathBuf>,
}

/// One weighted difference operator per shift, given inline as JSON.
#[derive(Args)]
struct OperatorArgs {
    /// Shifts as a JSON list of lattice points, e.g. "[[1],[0,1]]"
    #[arg(long, value_name = "JSON")]
    shifts: String,
    /// Power per shift, e.g. "[2,1]" (default: all 1)
    #[arg(long, value_name = "JSON")]
    powers: Option<String>,
    /// Weight value per shift as scalar pairs: "[[2,0]]" is float 2+0i,
    /// "[[\"1/2\",\"0\"]]" is exact (default: all 1, plain differences)
    #[arg(long, value_name = "JSON")]
    phi: Option<String>,
}

/// Tolerance overrides for certification commands.
#[derive(Args)]
struct CertArgs {
    /// Singular-value cutoff of the annihilator search
    #[arg(long, value_name = "TOL")]
    rank_tol: Option<f64>,
    /// Root clustering radius
    #[arg(long, value_name = "TOL")]
    cluster_tol: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a function at lattice points
    Eval {
        /// Exponential polynomial (JSON file)
        #[arg(long, value_name = "FILE")]
        f: PathBuf,
        /// Points as a JSON list, e.g. "[[0],[3]]"
        #[arg(long, value_name = "JSON")]
        shifts: String,
    },
    /// Apply a product of weighted difference operators
    Apply {
        #[command(flatten)]
        subject: SubjectArgs,
        #[command(flatten)]
        op: OperatorArgs,
    },
    /// Check that each weighted difference power annihilates the input
    Verify {
        #[command(flatten)]
        subject: SubjectArgs,
        #[command(flatten)]
        op: OperatorArgs,
        #[command(flatten)]
        cert: CertArgs,
    },
    /// Find the least annihilating power per shift, up to a cap
    Orders {
        #[command(flatten)]
        subject: SubjectArgs,
        /// Shifts as a JSON list of lattice points
        #[arg(long, value_name = "JSON")]
        shifts: String,
        /// Weight value per shift (default: all 1)
        #[arg(long, value_name = "JSON")]
        phi: Option<String>,
        /// Largest power tried
        #[arg(long, default_value_t = 8, value_name = "N")]
        max_order: u32,
        #[command(flatten)]
        cert: CertArgs,
    },
    /// Recover the weight values a single-weight certificate must use
    Witness {
        /// Sampled function on a box (JSON file)
        #[arg(long, value_name = "FILE")]
        samples: PathBuf,
        /// Shifts as a JSON list of lattice points
        #[arg(long, value_name = "JSON")]
        shifts: String,
        /// Certified power per shift
        #[arg(long, default_value_t = 3, value_name = "N")]
        max_order: u32,
        #[command(flatten)]
        cert: CertArgs,
    },
    /// Recover an exponential-polynomial decomposition from samples
    Decompose {
        /// Sampled function on a box (JSON file)
        #[arg(long, value_name = "FILE")]
        samples: PathBuf,
        /// Largest recurrence order tried per direction
        #[arg(long, value_name = "N")]
        max_order: Option<usize>,
        /// Singular-value cutoff of the annihilator search
        #[arg(long, value_name = "TOL")]
        rank_tol: Option<f64>,
        /// Root clustering radius
        #[arg(long, value_name = "TOL")]
        cluster_tol: Option<f64>,
        /// Acceptance threshold for the final relative residual
        #[arg(long, value_name = "TOL")]
        residual_tol: Option<f64>,
        /// Also lift the result to exact rational scalars when possible
        #[arg(long)]
        exact: bool,
    },
    /// Close a span of functions under weighted difference operators
    Closure {
        /// Generators: JSON file with one polynomial or a list of them
        #[arg(long, value_name = "FILE")]
        f: PathBuf,
        /// Steps, one per shift; --powers gives each step's extension depth
        #[command(flatten)]
        op: OperatorArgs,
    },
    /// Matrix of one operator on the graded monomial basis of a witness
    Matrix {
        /// Single-term polynomial whose witness fixes the basis (JSON file)
        #[arg(long, value_name = "FILE")]
        f: PathBuf,
        /// Exactly one shift, e.g. "[[1]]"
        #[arg(long, value_name = "JSON")]
        shifts: String,
        /// Weight value at the shift (default: the witness's own value)
        #[arg(long, value_name = "JSON")]
        phi: Option<String>,
        /// Degree bound of the basis (default: the term's degree)
        #[arg(long, value_name = "N")]
        n: Option<u32>,
    },
    /// Compare the two recurrence families on a finite abelian group
    Frechet {
        /// Cyclic factors, e.g. "4" or "2,3"
        #[arg(long, required = true, value_delimiter = ',', value_name = "M1,M2,...")]
        group: Vec<u64>,
        /// Order parameter (each operator has n+1 difference factors)
        #[arg(long, default_value_t = 1, value_name = "N")]
        n: u32,
        /// Use the float backend even when the group is small
        #[arg(long)]
        float: bool,
        /// Seed for the sampling fallback on large tuple spaces
        #[arg(long, value_name = "SEED")]
        seed: Option<u64>,
    },
    /// Run the built-in checks over every capability
    Selftest {
        #[arg(long, default_value_t = 0, value_name = "SEED")]
        seed: u64,
    },
}

// ---------------------------------------------------------------------------
// Input plumbing.

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn parse_inline<T: DeserializeOwned>(flag: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("--{flag}: {e}")))
}

enum Loaded {
    Symbolic(ExpPoly),
    Sampled(SampledFunction),
}

impl Loaded {
    fn subject(&self) -> Subject<'_> {
        match self {
            Loaded::Symbolic(f) => Subject::Symbolic(f),
            Loaded::Sampled(s) => Subject::Sampled(s),
        }
    }
}

fn load_subject(args: &SubjectArgs) -> Result<Loaded> {
    match (&args.f, &args.samples) {
        (Some(p), None) => Ok(Loaded::Symbolic(read_json(p)?)),
        (None, Some(p)) => Ok(Loaded::Sampled(read_json(p)?)),
        _ => Err(Error::InvalidInput("pass exactly one of --f and --samples".into())),
    }
}

/// A polynomial file may hold one polynomial or a list of generators.
fn read_polys(path: &Path) -> Result<Vec<ExpPoly>> {
    let v: serde_json::Value = read_json(path)?;
    let polys = if v.is_array() {
        serde_json::from_value(v)
    } else {
        serde_json::from_value(v).map(|f| vec![f])
    };
    polys.map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn parse_operator(args: &OperatorArgs) -> Result<(Vec<LatticePoint>, Vec<u32>, Vec<Scalar>)> {
    let shifts: Vec<LatticePoint> = parse_inline("shifts", &args.shifts)?;
    let k = shifts.len();
    let powers: Vec<u32> = match &args.powers {
        Some(s) => parse_inline("powers", s)?,
        None => vec![1; k],
    };
    let phis: Vec<Scalar> = match &args.phi {
        Some(s) => parse_inline("phi", s)?,
        None => vec![Scalar::one(); k],
    };
    if powers.len() != k || phis.len() != k {
        return Err(Error::InvalidInput(format!(
            "got {k} shifts but {} powers and {} weights",
            powers.len(),
            phis.len()
        )));
    }
    Ok((shifts, powers, phis))
}

fn montel_config(args: &CertArgs) -> MontelConfig {
    let mut cfg = MontelConfig::default();
    if let Some(v) = args.rank_tol {
        cfg.rank_tol = v;
    }
    if let Some(v) = args.cluster_tol {
        cfg.cluster_tol = v;
    }
    cfg
}

// ---------------------------------------------------------------------------
// Dispatch.

struct Outcome {
    json: serde_json::Value,
    ok: bool,
}

fn emit<T: Serialize>(value: &T, ok: bool) -> Result<Outcome> {
    let json =
        serde_json::to_value(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(Outcome { json, ok })
}

fn run(cmd: &Cmd) -> Result<Outcome> {
    match cmd {
        Cmd::Eval { f, shifts } => {
            let poly: ExpPoly = read_json(f)?;
            let points: Vec<LatticePoint> = parse_inline("shifts", shifts)?;
            let values: Vec<Scalar> =
                points.iter().map(|p| poly.eval(p)).collect::<Result<_>>()?;
            #[derive(Serialize)]
            struct Report {
                points: Vec<LatticePoint>,
                values: Vec<Scalar>,
            }
            emit(&Report { points: points.clone(), values }, true)
        }

        Cmd::Apply { subject, op } => {
            let (shifts, powers, phis) = parse_operator(op)?;
            let factors = shifts.iter().zip(&powers).zip(&phis);
            match load_subject(subject)? {
                Loaded::Symbolic(mut g) => {
                    for ((h, &p), c) in factors {
                        g = apply_modified_value(&g, c, h, p)?;
                    }
                    emit(&g, true)
                }
                Loaded::Sampled(mut s) => {
                    for ((h, &p), c) in factors {
                        s = apply_sampled_value(&s, c, h, p)?;
                    }
                    emit(&s, true)
                }
            }
        }

        Cmd::Verify { subject, op, cert } => {
            let loaded = load_subject(subject)?;
            let (shifts, powers, phis) = parse_operator(op)?;
            let report = verify_annihilation(
                loaded.subject(),
                &shifts,
                &powers,
                &phis,
                &montel_config(cert),
            )?;
            let ok = report.verdict.is_annihilated();
            emit(&report, ok)
        }

        Cmd::Orders { subject, shifts, phi, max_order, cert } => {
            let loaded = load_subject(subject)?;
            let shifts: Vec<LatticePoint> = parse_inline("shifts", shifts)?;
            let phis: Vec<Scalar> = match phi {
                Some(s) => parse_inline("phi", s)?,
                None => vec![Scalar::one(); shifts.len()],
            };
            let orders = minimal_orders(
                loaded.subject(),
                &shifts,
                &phis,
                *max_order,
                &montel_config(cert),
            )?;
            let ok = orders.iter().all(|o| o.is_some());
            #[derive(Serialize)]
            struct Report {
                shifts: Vec<LatticePoint>,
                phi_values: Vec<Scalar>,
                max_order: u32,
                orders: Vec<Option<u32>>,
            }
            emit(&Report { shifts, phi_values: phis, max_order: *max_order, orders }, ok)
        }

        Cmd::Witness { samples, shifts, max_order, cert } => {
            let s: SampledFunction = read_json(samples)?;
            let shifts: Vec<LatticePoint> = parse_inline("shifts", shifts)?;
            let got = certify_witness(&s, &shifts, *max_order, &montel_config(cert))?;
            let ok =
                !matches!(&got, WitnessCandidates::Assignments { values } if values.is_empty());
            emit(&got, ok)
        }

        Cmd::Decompose { samples, max_order, rank_tol, cluster_tol, residual_tol, exact } => {
            let s: SampledFunction = read_json(samples)?;
            let mut cfg = RecoveryConfig::default();
            if let Some(v) = max_order {
                cfg.max_order = *v;
            }
            if let Some(v) = rank_tol {
                cfg.rank_tol = *v;
            }
            if let Some(v) = cluster_tol {
                cfg.cluster_tol = *v;
            }
            if let Some(v) = residual_tol {
                cfg.residual_tol = *v;
            }
            cfg.exact_lift = *exact;
            let dec = recover(&s, &cfg)?;
            let ok = dec.success;
            emit(&dec, ok)
        }

        Cmd::Closure { f, op } => {
            let gens = read_polys(f)?;
            let Some(first) = gens.first() else {
                return Err(Error::InvalidInput("closure needs at least one generator".into()));
            };
            let space = SpanSpace::new(first.dim(), &gens)?;
            let (shifts, depths, phis) = parse_operator(op)?;
            let steps: Vec<(OpFactor, u32)> = shifts
                .iter()
                .zip(&depths)
                .zip(&phis)
                .map(|((h, &d), c)| {
                    let table = PhiTable::from_entries(vec![(h.clone(), c.clone())]);
                    Ok((OpFactor::new(PhiSpec::Table(table), h.clone(), 1)?, d))
                })
                .collect::<Result<_>>()?;
            let res = space.closure_chain(&steps)?;
            let ok = res.invariant_under_all;
            emit(&res, ok)
        }

        Cmd::Matrix { f, shifts, phi, n } => {
            let poly: ExpPoly = read_json(f)?;
            let term = match poly.terms() {
                [t] => t,
                _ => {
                    return Err(Error::InvalidInput(
                        "matrix needs a single-term polynomial (one witness)".into(),
                    ))
                }
            };
            let shifts: Vec<LatticePoint> = parse_inline("shifts", shifts)?;
            let [h] = shifts.as_slice() else {
                return Err(Error::InvalidInput("matrix takes exactly one shift".into()));
            };
            let degree =
                term.coeffs.keys().map(|a| a.total_degree()).max().unwrap_or(0);
            let bound = n.unwrap_or(degree);
            let phi_value = match phi {
                Some(s) => {
                    let vs: Vec<Scalar> = parse_inline("phi", s)?;
                    let [v] = vs.as_slice() else {
                        return Err(Error::InvalidInput(
                            "matrix takes exactly one weight value".into(),
                        ));
                    };
                    v.clone()
                }
                None => term.witness.eval_at(h)?,
            };
            let basis = GradedLexBasis::new(term.witness.clone(), bound);
            let m = operator_matrix(&basis, &phi_value, h)?;
            #[derive(Serialize)]
            struct Report {
                degree_bound: u32,
                shift: LatticePoint,
                phi_value: Scalar,
                upper_triangular: bool,
                diagonal: Vec<Scalar>,
                matrix: OperatorMatrix,
            }
            let report = Report {
                degree_bound: bound,
                shift: h.clone(),
                phi_value,
                upper_triangular: m.is_upper_triangular(),
                diagonal: m.diagonal(),
                matrix: m,
            };
            emit(&report, true)
        }

        Cmd::Frechet { group, n, float, seed } => {
            let spec = FiniteGroupSpec::new(group.clone())?;
            let opts = FrechetOptions {
                force_float: *float,
                seed: seed.unwrap_or(0),
                ..FrechetOptions::default()
            };
            let rep = frechet_nullspaces(&spec, *n, &opts)?;
            let ok = rep.equal;
            emit(&rep, ok)
        }

        Cmd::Selftest { seed } => {
            let rep = selftest::run(*seed);
            let ok = rep.passed;
            emit(&rep, ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.cmd) {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out.json).expect("serializable"));
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let obj = serde_json::json!({ "error": e.code(), "detail": e.to_string() });
            println!("{}", serde_json::to_string_pretty(&obj).expect("serializable"));
            ExitCode::from(2)
        }
    }
}
