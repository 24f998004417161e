//! Classify, truncate, simulate and cross-validate a configured run.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{build_kraus_circuit_with, Circuit, EffectivePlan};
use crate::config::{Method, Model, Prepared, DEFAULT_DELTA};
use crate::dump::{CircuitDump, TimeSlice};
use crate::error::{Error, Result};
use crate::kraus::{
    kraus_operators, kraus_terms, superops_commute, truncation_order, BoundContext, ScalarSchedule, SeriesOptions,
    TruncationOrder, DEFAULT_TERM_CAP,
};
use crate::lindblad::{classify, exact_propagator, propagate, rk4_evolve, CaseClassification, LindbladSystem};
use crate::statevector::{
    execute_filtered, filtered_expectation, prepare_purification, recombine, reduced_density, sample_counts, Observable,
    StateVector,
};
use crate::tensor::{trace_distance, ComplexMatrix};

pub const CLASSIFY_TOL: f64 = 1e-9;
/// Target RK4 step as a fraction of `1/‖𝓖‖`.
const RK4_STEP: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub values: Vec<f64>,
    pub bound: f64,
    pub method: Method,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub labels: Vec<String>,
    pub rows: Vec<TrajectoryRow>,
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

impl Trajectory {
    /// Header `t,<labels…>,bound,method`; numbers with 17 significant digits.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string()];
        header.extend(self.labels.iter().cloned());
        header.extend(["bound".to_string(), "method".to_string()]);
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![fmt_f64(row.t)];
            rec.extend(row.values.iter().map(|v| fmt_f64(*v)));
            rec.push(fmt_f64(row.bound));
            rec.push(row.method.as_str().to_string());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.rows.iter().map(|r| r.values[i]).collect())
    }
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    /// `ρ(t)` per time on the system's own dimension.
    pub states: Vec<ComplexMatrix>,
    pub orders: Vec<Option<usize>>,
    pub dump: Option<CircuitDump>,
}

fn expectation_values(rho: &ComplexMatrix, obs: &[Observable]) -> Vec<f64> {
    obs.iter().map(|o| o.expectation(rho)).collect()
}

fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.rows(), m.cols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

pub fn classify_model(model: &Model) -> Result<CaseClassification> {
    classify(model.system(), CLASSIFY_TOL)
}

fn supported(model: &Model) -> Result<CaseClassification> {
    let cls = classify_model(model)?;
    cls.require_supported()?;
    Ok(cls)
}

/// Order and bound for the generic series at time `t`.
fn generic_order(sys: &LindbladSystem, cls: &CaseClassification, t: f64, prep: &Prepared) -> Result<(usize, f64)> {
    match prep.config.max_order {
        Some(m) => {
            let bound = match BoundContext::new(sys, cls, t)?.bound(m) {
                Ok(b) => b,
                Err(Error::BoundNotApplicable { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            Ok((m, bound))
        }
        None => {
            let TruncationOrder { order, bound, .. } = truncation_order(sys, cls, t, prep.config.epsilon, DEFAULT_DELTA)?;
            Ok((order, bound))
        }
    }
}

/// Weighted Kraus operators `(K, multiplicity)`, the order used, and the
/// truncation bound (zero for exact finite series).
pub type KrausSet = (Vec<(ComplexMatrix, u64)>, Option<usize>, f64);

/// The [`KrausSet`] at time `t`.
pub fn kraus_set(prep: &Prepared, cls: &CaseClassification, t: f64) -> Result<KrausSet> {
    match &prep.model {
        Model::Pauli { strings, gamma, .. } => {
            let ops = crate::pauli::pauli_kraus_operators(strings, gamma, t)?;
            Ok((ops.into_iter().map(|k| (k, 1)).collect(), None, 0.0))
        }
        Model::Qho { cfg, system } => {
            let (m, bound) = qho_order(prep, system, cls, cfg.m_max(), t)?;
            let ops = (0..=m).map(|k| crate::qho::qho_kraus_matrix(cfg, k, t)).collect::<Result<Vec<_>>>()?;
            Ok((ops.into_iter().map(|k| (k, 1)).collect(), Some(m), bound))
        }
        Model::Generic(sys) => {
            let (m, bound) = generic_order(sys, cls, t, prep)?;
            let opts = SeriesOptions { cap: DEFAULT_TERM_CAP, reduce: true };
            Ok((kraus_operators(sys, cls, t, m, opts)?, Some(m), bound))
        }
    }
}

fn qho_order(prep: &Prepared, sys: &LindbladSystem, cls: &CaseClassification, m_max: usize, t: f64) -> Result<(usize, f64)> {
    match prep.config.max_order {
        Some(m) if m < m_max => {
            let bound = match BoundContext::new(sys, cls, t)?.bound(m) {
                Ok(b) => b,
                Err(Error::BoundNotApplicable { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            Ok((m, bound))
        }
        _ => Ok((m_max, 0.0)),
    }
}

/// Kraus circuits at `t` with multiplicities folded into the weights, the
/// order used, and the truncation bound.
pub fn circuit_set(prep: &Prepared, cls: &CaseClassification, t: f64) -> Result<(Vec<Circuit>, Option<usize>, f64)> {
    match &prep.model {
        Model::Pauli { strings, gamma, .. } => {
            let suite = crate::pauli::build_pauli_kraus(strings, gamma, t)?;
            Ok((suite.into_iter().map(|(_, c)| c).collect(), None, 0.0))
        }
        Model::Qho { cfg, system } => {
            let (m, bound) = qho_order(prep, system, cls, cfg.m_max(), t)?;
            let circuits = (0..=m).map(|k| crate::qho::build_qho_circuit(cfg, k, t)).collect::<Result<Vec<_>>>()?;
            Ok((circuits, Some(m), bound))
        }
        Model::Generic(sys) => {
            let (m, bound) = generic_order(sys, cls, t, prep)?;
            let plan = EffectivePlan::new(sys)?;
            let sched = ScalarSchedule::new(cls)?;
            let terms = kraus_terms(sys, m, superops_commute(sys), DEFAULT_TERM_CAP)?;
            let circuits = terms
                .par_iter()
                .map(|term| {
                    let mut c = build_kraus_circuit_with(&plan, &sched, term, t)?;
                    c.weight *= (term.multiplicity as f64).sqrt();
                    Ok(c)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((circuits, Some(m), bound))
        }
    }
}

/// Result of running a suite of circuits on one purified input.
pub struct CircuitEvaluation {
    pub values: Vec<f64>,
    /// `Σ w² Tr_prep|ψ_out⟩⟨ψ_out|` restricted to the system dimension.
    pub state: ComplexMatrix,
}

/// Runs every circuit on the purification of `rho0` and recombines.
/// `shots = Some((count, seed))` switches to sampled estimates with
/// per-circuit seeds.
pub fn evaluate_circuits(
    circuits: &[Circuit],
    rho0: &ComplexMatrix,
    observables: &[Observable],
    shots: Option<(usize, u64)>,
) -> Result<CircuitEvaluation> {
    let d = rho0.rows();
    let n = crate::circuit::qubits_for(d).max(1);
    let (purified, p) = prepare_purification(rho0, n)?;
    let amps = purified.into_amplitudes();
    if shots.is_some() && !observables.iter().all(Observable::is_diagonal) {
        return Err(Error::Config("shot sampling supports diagonal observables only".into()));
    }
    let per_circuit: Vec<(f64, Vec<f64>, ComplexMatrix)> = circuits
        .par_iter()
        .enumerate()
        .map(|(ci, c)| {
            if c.n_system != n {
                return Err(Error::DimensionMismatch(format!("circuit has {} system qubits, state needs {n}", c.n_system)));
            }
            let prepared = c.with_state_prep(amps.clone(), p)?;
            let out = execute_filtered(&prepared, &StateVector::zero(n + p))?;
            let values = match shots {
                None => observables
                    .iter()
                    .map(|o| filtered_expectation(&out, o, n, 0))
                    .collect::<Result<Vec<_>>>()?,
                Some((count, seed)) => {
                    let success = out.norm_sqr();
                    if success == 0.0 {
                        vec![0.0; observables.len()]
                    } else {
                        let hist = sample_counts(&out, count, seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(ci as u64 + 1)))?;
                        let dim = 1usize << n;
                        observables
                            .iter()
                            .map(|o| {
                                let m = o.matrix();
                                let mean: f64 = hist
                                    .iter()
                                    .map(|(s, k)| {
                                        let idx = s % dim;
                                        let diag = if idx < m.rows() { m[(idx, idx)].re } else { 0.0 };
                                        diag * *k as f64
                                    })
                                    .sum::<f64>()
                                    / count as f64;
                                success * mean
                            })
                            .collect()
                    }
                }
            };
            let rho = reduced_density(&out, n).block(0, 0, d, d);
            Ok((c.weight, values, rho))
        })
        .collect::<Result<_>>()?;
    let values = (0..observables.len())
        .map(|o| recombine(&per_circuit.iter().map(|(w, v, _)| (*w, v[o])).collect::<Vec<_>>()))
        .collect();
    let mut state = ComplexMatrix::zeros(d, d);
    for (w, _, rho) in &per_circuit {
        state += &rho.scale_real(w * w);
    }
    Ok(CircuitEvaluation { values, state: hermitize(&state) })
}

/// Upper bound on `‖𝓖‖` used to size RK4 steps.
fn generator_scale(sys: &LindbladSystem) -> f64 {
    let h = 2.0 * sys.hamiltonian().op_norm() / sys.hbar();
    let l: f64 = sys.lindblads().iter().map(|l| 2.0 * l.rate * l.operator.op_norm().powi(2)).sum();
    (h + l).max(1.0)
}

/// Runs one method over all configured times inside a pool of `jobs` threads.
pub fn run(prep: &Prepared, method: Method) -> Result<RunOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(prep.config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_in_pool(prep, method))
}

fn run_in_pool(prep: &Prepared, method: Method) -> Result<RunOutput> {
    let sys = prep.model.system();
    let times = &prep.config.times;
    let mut rows = Vec::with_capacity(times.len());
    let mut states = Vec::with_capacity(times.len());
    let mut orders = Vec::with_capacity(times.len());
    let mut dump = None;
    match method {
        Method::Expm => {
            for &t in times {
                let rho = hermitize(&propagate(&exact_propagator(sys, t)?, &prep.rho0)?);
                rows.push(TrajectoryRow { t, values: expectation_values(&rho, &prep.observables), bound: f64::NAN, method });
                states.push(rho);
                orders.push(None);
            }
        }
        Method::Rk4 => {
            let scale = generator_scale(sys);
            let (mut rho, mut now) = (prep.rho0.clone(), 0.0);
            for &t in times {
                let dt = t - now;
                if dt > 0.0 {
                    let steps = ((dt * scale / RK4_STEP).ceil() as usize).max(1);
                    rho = hermitize(&rk4_evolve(sys, &rho, dt, steps)?);
                    now = t;
                }
                rows.push(TrajectoryRow { t, values: expectation_values(&rho, &prep.observables), bound: f64::NAN, method });
                states.push(rho.clone());
                orders.push(None);
            }
        }
        Method::KrausMatrix => {
            let cls = supported(&prep.model)?;
            for &t in times {
                let (ops, order, bound) = kraus_set(prep, &cls, t)?;
                let d = sys.dim();
                let mut rho = ComplexMatrix::zeros(d, d);
                for (k, mult) in &ops {
                    rho += &k.matmul(&prep.rho0).matmul(&k.adjoint()).scale_real(*mult as f64);
                }
                let rho = hermitize(&rho);
                rows.push(TrajectoryRow { t, values: expectation_values(&rho, &prep.observables), bound, method });
                states.push(rho);
                orders.push(order);
            }
        }
        Method::KrausCircuit => {
            let cls = supported(&prep.model)?;
            let mut slices = Vec::with_capacity(times.len());
            for (ti, &t) in times.iter().enumerate() {
                let (circuits, order, bound) = circuit_set(prep, &cls, t)?;
                let shots = prep.config.shots.map(|s| (s, prep.config.seed.wrapping_add((ti as u64) << 32)));
                let eval = evaluate_circuits(&circuits, &prep.rho0, &prep.observables, shots)?;
                rows.push(TrajectoryRow { t, values: eval.values, bound, method });
                states.push(eval.state);
                orders.push(order);
                slices.push(TimeSlice { t, circuits });
            }
            dump = Some(CircuitDump { times: slices });
        }
    }
    let labels = prep.observables.iter().map(|o| o.label.clone()).collect();
    Ok(RunOutput { trajectory: Trajectory { labels, rows }, states, orders, dump })
}

/// Circuit suites for every configured time.
pub fn build_dump(prep: &Prepared) -> Result<CircuitDump> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(prep.config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        let cls = supported(&prep.model)?;
        let times = prep
            .config
            .times
            .iter()
            .map(|&t| Ok(TimeSlice { t, circuits: circuit_set(prep, &cls, t)?.0 }))
            .collect::<Result<Vec<_>>>()?;
        Ok(CircuitDump { times })
    })
}

/// Re-simulates a circuit dump on `rho0`, returning one row of values per time.
pub fn simulate_dump(dump: &CircuitDump, rho0: &ComplexMatrix, observables: &[Observable]) -> Result<Vec<Vec<f64>>> {
    dump.times.iter().map(|s| Ok(evaluate_circuits(&s.circuits, rho0, observables, None)?.values)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundRow {
    pub t: f64,
    pub order: usize,
    pub bound: f64,
    pub x: f64,
    pub propagator_norm: f64,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
}

/// Truncation order and bound of the general series at each time.
pub fn bound_table(prep: &Prepared) -> Result<Vec<BoundRow>> {
    let sys = prep.model.system();
    let cls = supported(&prep.model)?;
    prep.config
        .times
        .iter()
        .map(|&t| {
            let ctx = BoundContext::new(sys, &cls, t)?;
            let tr = crate::kraus::truncation_order_from(&ctx, prep.config.epsilon, DEFAULT_DELTA)?;
            Ok(BoundRow {
                t,
                order: tr.order,
                bound: tr.bound,
                x: ctx.x,
                propagator_norm: ctx.propagator_norm,
                m1: tr.analytic.map(|a| a.m1),
                m2: tr.analytic.map(|a| a.m2),
            })
        })
        .collect()
}

pub fn bound_csv(rows: &[BoundRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "order", "bound", "x", "propagator_norm", "m1", "m2"])?;
    for r in rows {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        w.write_record([
            fmt_f64(r.t),
            r.order.to_string(),
            fmt_f64(r.bound),
            fmt_f64(r.x),
            fmt_f64(r.propagator_norm),
            opt(r.m1),
            opt(r.m2),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Clone, Debug, Serialize)]
pub struct PairDeviation {
    pub a: Method,
    pub b: Method,
    pub max_trace_distance: f64,
    pub max_observable_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub model: String,
    pub classification: CaseClassification,
    pub times: Vec<f64>,
    pub pairs: Vec<PairDeviation>,
    pub kraus_vs_expm: f64,
    pub kraus_threshold: f64,
    pub circuit_vs_matrix: f64,
    pub circuit_threshold: f64,
    pub pass: bool,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model: {} ({:?})", self.model, self.classification.label);
        for p in &self.pairs {
            let _ = writeln!(
                s,
                "{} vs {}: trace distance {:.3e}, observable deviation {:.3e}",
                p.a.as_str(),
                p.b.as_str(),
                p.max_trace_distance,
                p.max_observable_deviation
            );
        }
        let _ = writeln!(s, "kraus_matrix vs expm: {:.3e} (threshold {:.1e})", self.kraus_vs_expm, self.kraus_threshold);
        let _ = writeln!(
            s,
            "kraus_circuit vs kraus_matrix: {:.3e} (threshold {:.1e})",
            self.circuit_vs_matrix, self.circuit_threshold
        );
        let _ = writeln!(s, "{}", if self.pass { "PASS" } else { "FAIL" });
        s
    }
}

fn deviation(a: &RunOutput, b: &RunOutput) -> Result<(f64, f64)> {
    let mut td = 0.0f64;
    for (x, y) in a.states.iter().zip(&b.states) {
        td = td.max(trace_distance(x, y)?);
    }
    let mut od = 0.0f64;
    for (x, y) in a.trajectory.rows.iter().zip(&b.trajectory.rows) {
        for (u, v) in x.values.iter().zip(&y.values) {
            od = od.max((u - v).abs());
        }
    }
    Ok((td, od))
}

/// Runs all four methods and compares them pairwise.
pub fn validate_cross(prep: &Prepared) -> Result<(ValidationReport, Vec<RunOutput>)> {
    let classification = supported(&prep.model)?;
    let outputs: Vec<RunOutput> = Method::ALL.iter().map(|&m| run(prep, m)).collect::<Result<_>>()?;
    let mut pairs = Vec::new();
    for i in 0..outputs.len() {
        for j in i + 1..outputs.len() {
            let (td, od) = deviation(&outputs[i], &outputs[j])?;
            pairs.push(PairDeviation { a: Method::ALL[i], b: Method::ALL[j], max_trace_distance: td, max_observable_deviation: od });
        }
    }
    let find = |a: Method, b: Method| {
        pairs.iter().find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a)).expect("all pairs present")
    };
    let ke = find(Method::KrausMatrix, Method::Expm);
    let cm = find(Method::KrausCircuit, Method::KrausMatrix);
    let kraus_vs_expm = ke.max_trace_distance.max(ke.max_observable_deviation);
    let circuit_vs_matrix = cm.max_trace_distance.max(cm.max_observable_deviation);
    let kraus_threshold = prep.config.epsilon.max(1e-7);
    let circuit_threshold = 1e-7;
    let pass = kraus_vs_expm <= kraus_threshold && circuit_vs_matrix <= circuit_threshold;
    let report = ValidationReport {
        model: prep.model.name().to_string(),
        classification,
        times: prep.config.times.clone(),
        pairs,
        kraus_vs_expm,
        kraus_threshold,
        circuit_vs_matrix,
        circuit_threshold,
        pass,
    };
    Ok((report, outputs))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn prepared(text: &str) -> Prepared {
        RunConfig::from_json(text).unwrap().prepare().unwrap()
    }

    const DEPHASING: &str = r#"{"system": {"preset": "dephasing", "gamma": 1.0},
        "initial_state": {"pure": [[1,0],[1,0]]}, "times": [0.0, 1.0], "observables": ["X0"], "method": "expm"}"#;

    #[test]
    fn dephasing_expm_rows() {
        let p = prepared(DEPHASING);
        let out = run(&p, Method::Expm).unwrap();
        let x = out.trajectory.column("X0").unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - (-2.0f64).exp()).abs() < 1e-12);
        let csv = out.trajectory.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,X0,bound,method"));
        assert!(lines.next().unwrap().ends_with(",NaN,expm"));
    }

    #[test]
    fn dephasing_all_methods_agree() {
        let text = DEPHASING.replace("\"expm\"", "\"kraus_matrix\", \"epsilon\": 1e-8");
        let p = prepared(&text);
        let (report, outputs) = validate_cross(&p).unwrap();
        assert!(report.pass, "{}", report.summary());
        for row in &outputs[2].trajectory.rows {
            assert!(row.bound <= 1e-8);
        }
        let circ = &outputs[3];
        assert!(circ.dump.as_ref().unwrap().times.len() == 2);
    }

    #[test]
    fn unsupported_system_is_rejected() {
        let text = r#"{"system": {"preset": "custom", "d": 2,
              "hamiltonian": [[[0,0],[1,0]],[[1,0],[0,0]]],
              "lindblads": [{"operator": [[[1,0],[0,0]],[[0,0],[-1,0]]], "rate": 1.0}]},
            "initial_state": {"basis": 0}, "times": [1], "observables": ["Z0"], "method": "kraus_matrix"}"#;
        let p = prepared(text);
        let err = run(&p, Method::KrausMatrix).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("(iii)"), "{err}");
        assert!(run(&p, Method::Expm).is_ok());
    }

    #[test]
    fn shots_estimate_diagonal_observables() {
        let text = r#"{"system": {"preset": "damped_qho", "n_qubits": 1, "omega": 1.0, "gamma": 1.0},
            "initial_state": {"basis": 1}, "times": [0.7], "observables": ["number"], "method": "kraus_circuit",
            "shots": 200000, "seed": 5}"#;
        let p = prepared(text);
        let out = run(&p, Method::KrausCircuit).unwrap();
        let v = out.trajectory.rows[0].values[0];
        assert!((v - (-0.7f64).exp()).abs() < 0.01, "{v}");
        assert_eq!(run(&p, Method::KrausCircuit).unwrap().trajectory, out.trajectory);
    }
}
