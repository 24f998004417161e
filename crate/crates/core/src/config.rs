//! Run configuration files.
//!
//! ```json
//! {
//!   "system": {"preset": "damped_qho", "n_qubits": 2, "omega": 1.0, "gamma": 0.5},
//!   "initial_state": {"basis": 3},
//!   "times": [0.0, 0.5, 1.0],
//!   "observables": ["number", "Z0", {"label": "P1", "matrix": [[[0,0],[0,0]],[[0,0],[1,0]]]}],
//!   "method": "kraus_circuit",
//!   "epsilon": 1e-6
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dump::matrix_rows;
use crate::error::{Error, Result};
use crate::lindblad::{check_density, LindbladOperator, LindbladSystem};
use crate::pauli::{PauliString, MAX_STRINGS};
use crate::qho::QhoConfig;
use crate::statevector::Observable;
use crate::tensor::{ComplexMatrix, C64, ZERO};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_DELTA: f64 = 0.1;
pub const MAX_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Method {
    KrausMatrix,
    KrausCircuit,
    Expm,
    Rk4,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Expm, Method::Rk4, Method::KrausMatrix, Method::KrausCircuit];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::KrausMatrix => "kraus_matrix",
            Method::KrausCircuit => "kraus_circuit",
            Method::Expm => "expm",
            Method::Rk4 => "rk4",
        }
    }

    pub fn is_kraus(&self) -> bool {
        matches!(self, Method::KrausMatrix | Method::KrausCircuit)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladSpec {
    #[serde(with = "matrix_rows")]
    pub operator: ComplexMatrix,
    pub rate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// One qubit, `H = (ω/2) Z`, `L = Z`.
    Dephasing {
        gamma: f64,
        #[serde(default)]
        omega: f64,
    },
    PauliChannel {
        strings: Vec<String>,
        gamma: Vec<f64>,
    },
    DampedQho {
        n_qubits: usize,
        omega: f64,
        gamma: f64,
        #[serde(default = "unit")]
        hbar: f64,
    },
    Custom {
        d: usize,
        #[serde(with = "matrix_rows")]
        hamiltonian: ComplexMatrix,
        lindblads: Vec<LindbladSpec>,
        #[serde(default = "unit")]
        hbar: f64,
    },
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Density(#[serde(with = "matrix_rows")] ComplexMatrix),
    Pure(Vec<C64>),
    Basis(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Named(String),
    Matrix {
        label: String,
        #[serde(with = "matrix_rows")]
        matrix: ComplexMatrix,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub initial_state: StateSpec,
    pub times: Vec<f64>,
    pub observables: Vec<ObservableSpec>,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub max_order: Option<usize>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub seed: u64,
    /// When set, circuit-path expectations are estimated from this many
    /// samples per circuit instead of exact amplitudes.
    #[serde(default)]
    pub shots: Option<usize>,
}

fn default_method() -> Method {
    Method::KrausMatrix
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_jobs() -> usize {
    1
}

/// The system a config describes, with the structure the presets expose.
#[derive(Clone, Debug)]
pub enum Model {
    Generic(LindbladSystem),
    Pauli { strings: Vec<PauliString>, gamma: Vec<f64>, system: LindbladSystem },
    Qho { cfg: QhoConfig, system: LindbladSystem },
}

impl Model {
    pub fn system(&self) -> &LindbladSystem {
        match self {
            Model::Generic(s) => s,
            Model::Pauli { system, .. } | Model::Qho { system, .. } => system,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Generic(_) => "generic",
            Model::Pauli { .. } => "pauli_channel",
            Model::Qho { .. } => "damped_qho",
        }
    }
}

fn finite(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Config(format!("{name} must be finite, got {x}")));
    }
    Ok(())
}

impl SystemSpec {
    pub fn build(&self) -> Result<Model> {
        match self {
            SystemSpec::Dephasing { gamma, omega } => {
                finite("gamma", *gamma)?;
                finite("omega", *omega)?;
                let z = ComplexMatrix::from_real_diag(&[1.0, -1.0]);
                let sys = LindbladSystem::with_unit_hbar(z.scale_real(omega / 2.0), vec![LindbladOperator::new(z, *gamma)])?;
                Ok(Model::Generic(sys))
            }
            SystemSpec::PauliChannel { strings, gamma } => {
                if strings.is_empty() || strings.len() > MAX_STRINGS {
                    return Err(Error::Config(format!("pauli_channel needs 1..={MAX_STRINGS} strings")));
                }
                gamma.iter().try_for_each(|g| finite("gamma", *g))?;
                let parsed: Vec<PauliString> = strings.iter().map(|s| s.parse()).collect::<Result<_>>()?;
                if parsed[0].n_qubits() > 6 {
                    return Err(Error::Config("pauli_channel supports at most 6 qubits".into()));
                }
                let (strings, gamma) = crate::pauli::merge_duplicates(&parsed, gamma)?;
                let system = crate::pauli::pauli_system(&strings, &gamma)?;
                Ok(Model::Pauli { strings, gamma, system })
            }
            SystemSpec::DampedQho { n_qubits, omega, gamma, hbar } => {
                let cfg = QhoConfig { n_qubits: *n_qubits, omega: *omega, gamma: *gamma, hbar: *hbar };
                if cfg.n_qubits > 6 {
                    return Err(Error::Config("damped_qho supports at most 6 qubits here".into()));
                }
                let system = cfg.system()?;
                Ok(Model::Qho { cfg, system })
            }
            SystemSpec::Custom { d, hamiltonian, lindblads, hbar } => {
                if *d == 0 || *d > MAX_DIM {
                    return Err(Error::Config(format!("custom dimension must be in 1..={MAX_DIM}")));
                }
                if hamiltonian.rows() != *d || hamiltonian.cols() != *d {
                    return Err(Error::DimensionMismatch(format!("hamiltonian is not {d}x{d}")));
                }
                finite("hbar", *hbar)?;
                if !(*hbar > 0.0) {
                    return Err(Error::Config("hbar must be positive".into()));
                }
                let ops = lindblads.iter().map(|l| LindbladOperator::new(l.operator.clone(), l.rate)).collect();
                Ok(Model::Generic(LindbladSystem::new(hamiltonian.clone(), ops, *hbar)?))
            }
        }
    }
}

impl StateSpec {
    pub fn density(&self, d: usize) -> Result<ComplexMatrix> {
        let rho = match self {
            StateSpec::Density(m) => m.clone(),
            StateSpec::Pure(v) => {
                let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                if !(norm > 0.0) || !norm.is_finite() {
                    return Err(Error::InvalidState("pure state has zero or non-finite norm".into()));
                }
                let v: Vec<C64> = v.iter().map(|a| a / norm).collect();
                ComplexMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
            }
            StateSpec::Basis(k) => {
                if *k >= d {
                    return Err(Error::InvalidState(format!("basis index {k} outside dimension {d}")));
                }
                ComplexMatrix::from_fn(d, d, |i, j| if i == *k && j == *k { C64::new(1.0, 0.0) } else { ZERO })
            }
        };
        if rho.rows() != d || rho.cols() != d {
            return Err(Error::DimensionMismatch(format!("initial state is {}x{}, system is {d}", rho.rows(), rho.cols())));
        }
        check_density(&rho, 1e-9)?;
        Ok(rho)
    }
}

fn single_qubit_embed(axis: char, qubit: usize, n: usize) -> Result<ComplexMatrix> {
    if qubit >= n {
        return Err(Error::Config(format!("observable on qubit {qubit} of a {n}-qubit system")));
    }
    let mut s: Vec<char> = vec!['I'; n];
    s[n - 1 - qubit] = axis;
    Ok(s.into_iter().collect::<String>().parse::<PauliString>()?.to_matrix())
}

impl ObservableSpec {
    /// Named forms: `number`, `X0`/`Y1`/`Z2` (Pauli on one qubit), `P3`
    /// (projector on basis state 3), or a full Pauli string such as `XZ`.
    pub fn build(&self, d: usize) -> Result<Observable> {
        match self {
            ObservableSpec::Matrix { label, matrix } => {
                check_label(label)?;
                if matrix.rows() != d || matrix.cols() != d {
                    return Err(Error::DimensionMismatch(format!("observable '{label}' is not {d}x{d}")));
                }
                Observable::new(label.clone(), matrix.clone())
            }
            ObservableSpec::Named(name) => {
                check_label(name)?;
                let matrix = if name == "number" {
                    crate::qho::number_operator(d)
                } else if let Some(idx) = name.strip_prefix('P').and_then(|r| r.parse::<usize>().ok()) {
                    if idx >= d {
                        return Err(Error::Config(format!("projector {name} outside dimension {d}")));
                    }
                    ComplexMatrix::from_fn(d, d, |i, j| if i == idx && j == idx { C64::new(1.0, 0.0) } else { ZERO })
                } else {
                    if !d.is_power_of_two() || d < 2 {
                        return Err(Error::Config(format!("Pauli observable '{name}' needs a qubit system")));
                    }
                    let n = d.trailing_zeros() as usize;
                    let mut chars = name.chars();
                    let first = chars.next().unwrap_or(' ');
                    let rest: String = chars.collect();
                    match (first, rest.parse::<usize>()) {
                        ('X' | 'Y' | 'Z', Ok(q)) if !rest.is_empty() => single_qubit_embed(first, q, n)?,
                        _ => {
                            let p: PauliString = name.parse()?;
                            if p.n_qubits() != n {
                                return Err(Error::Config(format!("Pauli observable '{name}' has wrong length for {n} qubits")));
                            }
                            p.to_matrix()
                        }
                    }
                };
                Observable::new(name.clone(), matrix)
            }
        }
    }
}

fn check_label(label: &str) -> Result<()> {
    let reserved = ["t", "bound", "method"];
    if label.is_empty() || reserved.contains(&label) || label.contains([',', '"', '\n', '\r']) {
        return Err(Error::Config(format!("invalid observable label '{label}'")));
    }
    Ok(())
}

/// A validated configuration with its system, state and observables built.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: RunConfig,
    pub model: Model,
    pub rho0: ComplexMatrix,
    pub observables: Vec<Observable>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() {
            return Err(Error::Config("times must not be empty".into()));
        }
        for w in self.times.windows(2) {
            if !(w[0] <= w[1]) {
                return Err(Error::Config("times must be sorted ascending".into()));
            }
        }
        for &t in &self.times {
            finite("time", t)?;
            if t < 0.0 {
                return Err(Error::NegativeTime(t));
            }
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.jobs == 0 || self.jobs > 1024 {
            return Err(Error::Config("jobs must be in 1..=1024".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if self.observables.is_empty() {
            return Err(Error::Config("at least one observable is required".into()));
        }
        Ok(())
    }

    pub fn prepare(self) -> Result<Prepared> {
        self.validate()?;
        let model = self.system.build()?;
        let d = model.system().dim();
        let rho0 = self.initial_state.density(d)?;
        let observables: Vec<Observable> = self.observables.iter().map(|o| o.build(d)).collect::<Result<_>>()?;
        for (i, o) in observables.iter().enumerate() {
            if observables[..i].iter().any(|p| p.label == o.label) {
                return Err(Error::Config(format!("duplicate observable label '{}'", o.label)));
            }
        }
        Ok(Prepared { config: self, model, rho0, observables })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QHO: &str = r#"{
        "system": {"preset": "damped_qho", "n_qubits": 2, "omega": 1.0, "gamma": 0.5},
        "initial_state": {"basis": 3},
        "times": [0.0, 1.0],
        "observables": ["number", "Z0", "XI", "P2"],
        "method": "kraus_circuit"
    }"#;

    #[test]
    fn parses_presets() {
        let cfg = RunConfig::from_json(QHO).unwrap();
        assert_eq!(cfg.method, Method::KrausCircuit);
        assert_eq!(cfg.epsilon, DEFAULT_EPSILON);
        let p = cfg.prepare().unwrap();
        assert_eq!(p.model.name(), "damped_qho");
        assert_eq!(p.rho0[(3, 3)], C64::new(1.0, 0.0));
        assert_eq!(p.observables.len(), 4);
        assert_eq!(p.observables[1].matrix()[(1, 1)], C64::new(-1.0, 0.0));

        let pauli = r#"{"system": {"preset": "pauli_channel", "strings": ["XI", "IZ", "XI"], "gamma": [0.1, 0.2, 0.3]},
            "initial_state": {"pure": [[1,0],[0,0],[0,0],[1,0]]}, "times": [0.5], "observables": ["Z1"]}"#;
        let p = RunConfig::from_json(pauli).unwrap().prepare().unwrap();
        match &p.model {
            Model::Pauli { strings, gamma, .. } => {
                assert_eq!(strings.len(), 2);
                assert!((gamma[0] - 0.4).abs() < 1e-15);
            }
            _ => panic!("expected a Pauli model"),
        }
        assert!((p.rho0[(0, 3)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn custom_system() {
        let text = r#"{"system": {"preset": "custom", "d": 2,
              "hamiltonian": [[[0,0],[1,0]],[[1,0],[0,0]]],
              "lindblads": [{"operator": [[[1,0],[0,0]],[[0,0],[-1,0]]], "rate": 1.0}]},
            "initial_state": {"density": [[[0.5,0],[0.5,0]],[[0.5,0],[0.5,0]]]},
            "times": [0, 1], "observables": [{"label": "sx", "matrix": [[[0,0],[1,0]],[[1,0],[0,0]]]}], "method": "expm"}"#;
        let p = RunConfig::from_json(text).unwrap().prepare().unwrap();
        assert_eq!(p.model.system().dim(), 2);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_json("{").is_err());
        let unsorted = QHO.replace("[0.0, 1.0]", "[1.0, 0.0]");
        assert!(RunConfig::from_json(&unsorted).is_err());
        let negative = QHO.replace("[0.0, 1.0]", "[-1.0]");
        assert!(RunConfig::from_json(&negative).is_err());
        let eps = QHO.replace("\"method\"", "\"epsilon\": 0, \"method\"");
        assert!(RunConfig::from_json(&eps).is_err());
        let unknown = QHO.replace("\"method\"", "\"bogus\": 1, \"method\"");
        assert!(RunConfig::from_json(&unknown).is_err());
        let bad_obs = QHO.replace("\"P2\"", "\"Z7\"");
        assert!(RunConfig::from_json(&bad_obs).unwrap().prepare().is_err());
        let bad_state = QHO.replace("{\"basis\": 3}", "{\"basis\": 4}");
        assert!(RunConfig::from_json(&bad_state).unwrap().prepare().is_err());
        let reserved = QHO.replace("\"P2\"", "{\"label\": \"bound\", \"matrix\": [[[1,0]]]}");
        assert!(RunConfig::from_json(&reserved).unwrap().prepare().is_err());
    }
}
