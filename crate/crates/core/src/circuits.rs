//! Circuit IR: an ordered gate list whose rotation angles are either fixed
//! reals or affine functions `scale * p[slot] + offset` of a parameter vector.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevec::{GateKind, Statevector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Angle {
    Fixed(f64),
    Param { slot: usize, scale: f64, offset: f64 },
}

impl Angle {
    pub fn param(slot: usize) -> Self {
        Angle::Param {
            slot,
            scale: 1.0,
            offset: 0.0,
        }
    }

    pub fn affine(slot: usize, scale: f64, offset: f64) -> Self {
        Angle::Param {
            slot,
            scale,
            offset,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self, Angle::Param { .. })
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        match *self {
            Angle::Fixed(v) => v,
            Angle::Param {
                slot,
                scale,
                offset,
            } => scale * values[slot] + offset,
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Angle::Fixed(v) => write!(f, "{v}"),
            Angle::Param {
                slot,
                scale,
                offset,
            } => {
                if scale != 1.0 {
                    write!(f, "{scale}*")?;
                }
                write!(f, "p{slot}")?;
                if offset != 0.0 {
                    write!(f, "{offset:+}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    /// Present exactly when `kind` is a rotation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<Angle>,
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>, angle: Option<Angle>) -> Result<Self> {
        if targets.len() != kind.arity() {
            return Err(Error::index(format!(
                "{kind} takes {} target(s), got {}",
                kind.arity(),
                targets.len()
            )));
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::index(format!("{kind} targets must be distinct")));
        }
        match (kind.is_rotation(), angle) {
            (true, None) => Err(Error::Usage(format!("{kind} needs an angle"))),
            (false, Some(_)) => Err(Error::Usage(format!("{kind} takes no angle"))),
            _ => Ok(Self {
                kind,
                targets,
                angle,
            }),
        }
    }

    fn concrete_angle(&self) -> Result<f64> {
        match self.angle {
            None => Ok(0.0),
            Some(Angle::Fixed(v)) => Ok(v),
            Some(Angle::Param { slot, .. }) => Err(Error::Usage(format!(
                "{} on {:?} has unbound parameter p{slot}",
                self.kind, self.targets
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            n_params: 0,
        }
    }

    /// Empty circuit that declares `n_params` slots up front, so slots that
    /// end up unused still count toward the binding arity.
    pub fn with_params(n_qubits: usize, n_params: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            n_params,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn is_concrete(&self) -> bool {
        self.n_params == 0 && self.gates.iter().all(|g| !matches!(g.angle, Some(a) if a.is_symbolic()))
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        if let Some(&t) = gate.targets.iter().find(|&&t| t >= self.n_qubits) {
            return Err(Error::index(format!(
                "target {t} out of range for {} qubit(s)",
                self.n_qubits
            )));
        }
        if let Some(Angle::Param { slot, .. }) = gate.angle {
            self.n_params = self.n_params.max(slot + 1);
        }
        self.gates.push(gate);
        Ok(self)
    }

    pub fn add(&mut self, kind: GateKind, targets: &[usize], angle: Option<Angle>) -> Result<&mut Self> {
        let gate = Gate::new(kind, targets.to_vec(), angle)?;
        self.push(gate)
    }

    pub fn fixed(&mut self, kind: GateKind, targets: &[usize], angle: f64) -> Result<&mut Self> {
        self.add(kind, targets, Some(Angle::Fixed(angle)))
    }

    pub fn param(&mut self, kind: GateKind, targets: &[usize], slot: usize) -> Result<&mut Self> {
        self.add(kind, targets, Some(Angle::param(slot)))
    }

    /// Replaces every symbolic angle with its value under `values`.
    pub fn bind(&self, values: &[f64]) -> Result<Circuit> {
        if values.len() != self.n_params {
            return Err(Error::Arity {
                expected: self.n_params,
                actual: values.len(),
            });
        }
        let gates = self
            .gates
            .iter()
            .map(|g| Gate {
                kind: g.kind,
                targets: g.targets.clone(),
                angle: g.angle.map(|a| Angle::Fixed(a.evaluate(values))),
            })
            .collect();
        Ok(Circuit {
            n_qubits: self.n_qubits,
            gates,
            n_params: 0,
        })
    }

    /// Applies the gates in order to `state`.
    pub fn apply_to(&self, state: &mut Statevector) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                actual: state.n_qubits(),
            });
        }
        if self.n_params != 0 {
            return Err(Error::Usage(format!(
                "circuit has {} unbound parameter(s)",
                self.n_params
            )));
        }
        for g in &self.gates {
            state.apply(g.kind, &g.targets, g.concrete_angle()?)?;
        }
        Ok(())
    }

    pub fn run(&self, initial: &Statevector) -> Result<Statevector> {
        let mut state = initial.clone();
        self.apply_to(&mut state)?;
        Ok(state)
    }

    /// `a` followed by `b`; the parameter slots of `b` are shifted past `a`'s.
    pub fn compose(a: &Circuit, b: &Circuit) -> Result<Circuit> {
        if a.n_qubits != b.n_qubits {
            return Err(Error::Dimension {
                expected: a.n_qubits,
                actual: b.n_qubits,
            });
        }
        let shift = a.n_params;
        let mut gates = a.gates.clone();
        gates.extend(b.gates.iter().map(|g| Gate {
            kind: g.kind,
            targets: g.targets.clone(),
            angle: g.angle.map(|angle| match angle {
                Angle::Param {
                    slot,
                    scale,
                    offset,
                } => Angle::Param {
                    slot: slot + shift,
                    scale,
                    offset,
                },
                fixed => fixed,
            }),
        }));
        Ok(Circuit {
            n_qubits: a.n_qubits,
            gates,
            n_params: a.n_params + b.n_params,
        })
    }

    /// One gate per line: `KIND targets angle`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            out.push_str(g.kind.name());
            for t in &g.targets {
                let _ = write!(out, " {t}");
            }
            if let Some(a) = g.angle {
                let _ = write!(out, " {a}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn bind_slot_and_affine() {
        let mut c = Circuit::new(1);
        c.param(GateKind::Ry, &[0], 0).unwrap();
        let b = c.bind(&[PI]).unwrap();
        assert_eq!(b.gates()[0].angle, Some(Angle::Fixed(PI)));
        assert_eq!(b.n_params(), 0);

        let mut c = Circuit::new(1);
        c.add(GateKind::Rz, &[0], Some(Angle::affine(0, 2.0, 0.0))).unwrap();
        let b = c.bind(&[0.5]).unwrap();
        assert_eq!(b.gates()[0].angle, Some(Angle::Fixed(1.0)));
    }

    #[test]
    fn bind_identity_and_arity() {
        let mut c = Circuit::new(2);
        c.fixed(GateKind::Rx, &[1], 0.25).unwrap();
        c.add(GateKind::Cnot, &[0, 1], None).unwrap();
        assert_eq!(c.bind(&[]).unwrap(), c);
        assert!(matches!(
            c.bind(&[1.0]),
            Err(Error::Arity {
                expected: 0,
                actual: 1
            })
        ));
    }

    #[test]
    fn run_requires_bound_params() {
        let mut c = Circuit::new(1);
        c.param(GateKind::Rx, &[0], 0).unwrap();
        let s = Statevector::zero_state(1).unwrap();
        assert!(matches!(c.run(&s), Err(Error::Usage(_))));
    }

    #[test]
    fn run_simple() {
        let mut c = Circuit::new(1);
        c.add(GateKind::H, &[0], None).unwrap();
        let out = c.run(&Statevector::zero_state(1).unwrap()).unwrap();
        assert!((out.amplitudes()[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((out.amplitudes()[1].re - FRAC_1_SQRT_2).abs() < 1e-15);

        let s = Statevector::zero_state(3).unwrap();
        assert_eq!(Circuit::new(3).run(&s).unwrap(), s);
    }

    #[test]
    fn gate_validation() {
        assert!(Gate::new(GateKind::Rx, vec![0], None).is_err());
        assert!(Gate::new(GateKind::H, vec![0], Some(Angle::Fixed(1.0))).is_err());
        assert!(Gate::new(GateKind::Cnot, vec![0, 0], None).is_err());
        let mut c = Circuit::new(2);
        assert!(c.add(GateKind::X, &[2], None).is_err());
    }

    #[test]
    fn compose_offsets_slots() {
        let mut a = Circuit::new(2);
        a.param(GateKind::Ry, &[0], 0).unwrap();
        let mut b = Circuit::new(2);
        b.param(GateKind::Rz, &[1], 0).unwrap();
        b.param(GateKind::Rx, &[0], 1).unwrap();
        let c = Circuit::compose(&a, &b).unwrap();
        assert_eq!(c.n_params(), 3);
        assert_eq!(c.gates()[2].angle, Some(Angle::param(2)));

        assert_eq!(Circuit::compose(&Circuit::new(2), &b).unwrap(), b);
        assert!(Circuit::compose(&Circuit::new(1), &b).is_err());
    }

    #[test]
    fn text_dump() {
        let mut c = Circuit::new(2);
        c.add(GateKind::H, &[0], None).unwrap();
        c.add(GateKind::Cnot, &[0, 1], None).unwrap();
        c.fixed(GateKind::Rz, &[1], 0.5).unwrap();
        c.add(GateKind::Rzz, &[0, 1], Some(Angle::affine(3, -2.0, 0.25))).unwrap();
        c.param(GateKind::Ry, &[1], 1).unwrap();
        assert_eq!(
            c.to_text(),
            "H 0\nCNOT 0 1\nRZ 1 0.5\nRZZ 0 1 -2*p3+0.25\nRY 1 p1\n"
        );
    }
}
