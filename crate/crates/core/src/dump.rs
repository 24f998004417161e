//! JSON circuit dumps.
//!
//! Complex numbers are `[re, im]` pairs and matrices are lists of rows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitDump {
    pub times: Vec<TimeSlice>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSlice {
    pub t: f64,
    pub circuits: Vec<Circuit>,
}

impl CircuitDump {
    /// Parses and validates every circuit.
    pub fn from_json(text: &str) -> Result<Self> {
        let dump: CircuitDump = serde_json::from_str(text)?;
        for slice in &dump.times {
            if !(slice.t >= 0.0) {
                return Err(Error::NegativeTime(slice.t));
            }
            slice.circuits.iter().try_for_each(Circuit::validate)?;
        }
        Ok(dump)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Serde adapter storing a `ComplexMatrix` as rows of `[re, im]` pairs.
pub mod matrix_rows {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::tensor::{ComplexMatrix, C64};

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[C64]> = (0..m.rows()).map(|i| m.row(i)).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ComplexMatrix, D::Error> {
        let rows: Vec<Vec<C64>> = Vec::deserialize(d)?;
        ComplexMatrix::from_rows(&rows).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Gate, PauliAxis};
    use crate::tensor::{ComplexMatrix, C64};

    #[test]
    fn round_trip() {
        let mut c = Circuit::new(1);
        let anc = c.add_sznagy_ancilla();
        c.gates.push(Gate::Pauli { axis: PauliAxis::Y, qubit: 0 });
        c.gates.push(Gate::OpaqueUnitary {
            matrix: ComplexMatrix::from_rows(&[vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)], vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]])
                .unwrap(),
            qubits: vec![anc],
        });
        c.weight = 0.25;
        c.global_phase = -0.5;
        let dump = CircuitDump { times: vec![TimeSlice { t: 1.5, circuits: vec![c] }] };
        let text = dump.to_json().unwrap();
        assert!(text.contains("\"postselect_mask\": 2"));
        assert!(text.contains("\"gate\": \"opaque_unitary\""));
        let back = CircuitDump::from_json(&text).unwrap();
        assert_eq!(back, dump);
    }

    #[test]
    fn rejects_invalid_circuits() {
        let text = r#"{"times":[{"t":0.0,"circuits":[{"n_system":1,"ancillas":[],"gates":[{"gate":"pauli","axis":"X","qubit":4}],"weight":1.0,"postselect_mask":0,"global_phase":0.0}]}]}"#;
        assert!(CircuitDump::from_json(text).is_err());
        assert!(CircuitDump::from_json("{").is_err());
    }
}
