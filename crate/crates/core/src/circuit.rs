//! Quantum circuits of one- and two-qubit gates, their text formats and
//! benchmark generators.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Gate {
    One { qubit: usize },
    Two { control: usize, target: usize },
}

impl Gate {
    pub fn qubits(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match *self {
            Gate::One { qubit } => (qubit, None),
            Gate::Two { control, target } => (control, Some(target)),
        };
        std::iter::once(a).chain(b)
    }

    pub fn pair(&self) -> Option<(usize, usize)> {
        match *self {
            Gate::Two { control, target } => Some((control, target)),
            Gate::One { .. } => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantumCircuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl QuantumCircuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Self::new(n_qubits);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        if let Some(q) = gate.qubits().find(|&q| q >= self.n_qubits) {
            return Err(Error::param(
                "qubit",
                format!("{q} out of range for {} qubits", self.n_qubits),
            ));
        }
        if let Gate::Two { control, target } = gate {
            if control == target {
                return Err(Error::param("qubit", format!("two-qubit gate on {control} twice")));
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn one(&mut self, qubit: usize) -> Result<()> {
        self.push(Gate::One { qubit })
    }

    pub fn two(&mut self, control: usize, target: usize) -> Result<()> {
        self.push(Gate::Two { control, target })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.pair().is_some()).count()
    }

    /// Two-qubit gate counts per unordered qubit pair `(low, high)`.
    pub fn interaction_weights(&self) -> BTreeMap<(usize, usize), u32> {
        let mut w = BTreeMap::new();
        for (a, b) in self.gates.iter().filter_map(Gate::pair) {
            *w.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
        w
    }

    /// Parses the line format: a header `qubits <n>` (or a bare count),
    /// then one gate per line, `g1 <q>` or `g2 <control> <target>`.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut circuit: Option<QuantumCircuit> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: line_no, message };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let number = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| err(format!("`{s}` is not a qubit index")))
            };
            let Some(c) = circuit.as_mut() else {
                let count = match tokens.as_slice() {
                    ["qubits", n] | [n] => number(n)?,
                    _ => return Err(err(format!("expected header `qubits <n>`, found `{line}`"))),
                };
                circuit = Some(QuantumCircuit::new(count));
                continue;
            };
            let gate = match tokens.as_slice() {
                ["g1", q] => Gate::One { qubit: number(q)? },
                ["g2", a, b] => Gate::Two {
                    control: number(a)?,
                    target: number(b)?,
                },
                [op, ..] => return Err(err(format!("unrecognised gate line `{op}`"))),
                [] => unreachable!(),
            };
            c.push(gate).map_err(|e| err(e.to_string()))?;
        }
        circuit.ok_or(Error::Parse {
            line: 0,
            message: "missing qubit count header".into(),
        })
    }

    /// Writes the line format read by [`QuantumCircuit::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.n_qubits);
        for g in &self.gates {
            match *g {
                Gate::One { qubit } => out.push_str(&format!("g1 {qubit}\n")),
                Gate::Two { control, target } => out.push_str(&format!("g2 {control} {target}\n")),
            }
        }
        out
    }

    /// Imports OpenQASM 2 restricted to single-qubit gates and two-qubit
    /// gates such as `cx`. Registers are laid out in declaration order;
    /// `creg`, `measure`, `barrier` and `reset` are skipped.
    pub fn parse_qasm2(text: &str) -> Result<Self> {
        let mut regs: Vec<(String, usize, usize)> = Vec::new();
        let mut total = 0usize;
        let mut gates = Vec::new();
        let mut line = 1usize;
        let mut stmt = String::new();
        let mut stmt_line = 1usize;
        let mut chars = text.chars().peekable();
        let mut statements = Vec::new();
        while let Some(ch) = chars.next() {
            if ch == '/' && chars.peek() == Some(&'/') {
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                        break;
                    }
                }
                continue;
            }
            if stmt.trim().is_empty() {
                stmt_line = line;
            }
            if ch == '\n' {
                line += 1;
            }
            if ch == ';' {
                statements.push((stmt_line, std::mem::take(&mut stmt)));
            } else if ch == '{' || ch == '}' {
                return Err(Error::Parse {
                    line,
                    message: "gate definitions and blocks are not supported".into(),
                });
            } else {
                stmt.push(ch);
            }
        }
        if !stmt.trim().is_empty() {
            return Err(Error::Parse {
                line: stmt_line,
                message: "statement missing `;`".into(),
            });
        }
        for (ln, s) in statements {
            let s = s.trim();
            let err = |message: String| Error::Parse { line: ln, message };
            let (head, rest) = split_head(s);
            match head {
                "OPENQASM" | "include" | "creg" | "measure" | "barrier" | "reset" => continue,
                "qreg" => {
                    let (name, size) = parse_ref(rest).map_err(err)?;
                    let size = size.ok_or_else(|| err("qreg needs a size".into()))?;
                    regs.push((name, total, size));
                    total += size;
                }
                _ => {
                    let name = head.split('(').next().unwrap_or(head);
                    if name.is_empty() {
                        return Err(err(format!("cannot parse `{s}`")));
                    }
                    let mut operands = Vec::new();
                    for arg in rest.split(',') {
                        let (reg, index) = parse_ref(arg).map_err(err)?;
                        let &(_, offset, size) = regs
                            .iter()
                            .find(|r| r.0 == reg)
                            .ok_or_else(|| err(format!("unknown register `{reg}`")))?;
                        operands.push((offset, size, index));
                    }
                    match operands.as_slice() {
                        [(off, size, None)] => {
                            gates.extend((0..*size).map(|i| Gate::One { qubit: off + i }));
                        }
                        [(off, size, Some(i))] => {
                            if *i >= *size {
                                return Err(err(format!("index {i} out of range")));
                            }
                            gates.push(Gate::One { qubit: off + i });
                        }
                        [(oa, sa, Some(a)), (ob, sb, Some(b))] => {
                            if a >= sa || b >= sb {
                                return Err(err("index out of range".into()));
                            }
                            gates.push(Gate::Two {
                                control: oa + a,
                                target: ob + b,
                            });
                        }
                        [_, _] => return Err(err(format!("`{name}` on whole registers is not supported"))),
                        _ => {
                            return Err(err(format!(
                                "`{name}` acts on {} qubits; only one- and two-qubit gates are supported",
                                operands.len()
                            )))
                        }
                    }
                }
            }
        }
        QuantumCircuit::from_gates(total, gates)
    }
}

fn split_head(s: &str) -> (&str, &str) {
    // The gate name may carry a parenthesised parameter list with spaces.
    let mut depth = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            c if c.is_whitespace() && depth == 0 => return (&s[..i], s[i..].trim()),
            _ => {}
        }
    }
    (s, "")
}

fn parse_ref(s: &str) -> std::result::Result<(String, Option<usize>), String> {
    let s = s.trim();
    match s.split_once('[') {
        Some((name, rest)) => {
            let idx = rest
                .strip_suffix(']')
                .and_then(|i| i.trim().parse::<usize>().ok())
                .ok_or_else(|| format!("bad qubit reference `{s}`"))?;
            Ok((name.trim().to_string(), Some(idx)))
        }
        None if !s.is_empty() => Ok((s.to_string(), None)),
        None => Err("missing operand".into()),
    }
}

/// `depth` layers of two-qubit gates; each layer puts `⌊n/2⌋` gates on a
/// uniformly random perfect matching of the `n` qubits.
pub fn random_matching_circuit<R: Rng + ?Sized>(n: usize, depth: usize, rng: &mut R) -> QuantumCircuit {
    let mut c = QuantumCircuit::new(n);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..depth {
        order.shuffle(rng);
        for pair in order.chunks_exact(2) {
            c.gates.push(Gate::Two {
                control: pair[0],
                target: pair[1],
            });
        }
    }
    c
}

/// Square random circuit: width and depth both `n`.
pub fn random_square_circuit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> QuantumCircuit {
    random_matching_circuit(n, n, rng)
}

/// GHZ preparation: a Hadamard then a CNOT chain.
pub fn ghz_circuit(n: usize) -> QuantumCircuit {
    let mut c = QuantumCircuit::new(n);
    if n > 0 {
        c.gates.push(Gate::One { qubit: 0 });
    }
    for i in 1..n {
        c.gates.push(Gate::Two {
            control: i - 1,
            target: i,
        });
    }
    c
}

/// Bernstein-Vazirani on `n` data qubits plus one ancilla (the last
/// qubit); `secret` bit `i` adds a CNOT from qubit `i`.
pub fn bernstein_vazirani_circuit(n: usize, secret: u128) -> QuantumCircuit {
    let mut c = QuantumCircuit::new(n + 1);
    for q in 0..=n {
        c.gates.push(Gate::One { qubit: q });
    }
    for i in 0..n {
        if (secret >> (i % 128)) & 1 == 1 {
            c.gates.push(Gate::Two { control: i, target: n });
        }
    }
    for q in 0..n {
        c.gates.push(Gate::One { qubit: q });
    }
    c
}

/// Quantum Fourier transform with each controlled phase as one two-qubit
/// gate.
pub fn qft_circuit(n: usize) -> QuantumCircuit {
    let mut c = QuantumCircuit::new(n);
    for i in 0..n {
        c.gates.push(Gate::One { qubit: i });
        for j in i + 1..n {
            c.gates.push(Gate::Two { control: j, target: i });
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn parse_line_format() {
        let c = QuantumCircuit::parse("# demo\nqubits 3\ng1 0\ng2 0 2 # cnot\n\ng2 2 1\n").unwrap();
        assert_eq!(c.n_qubits(), 3);
        assert_eq!(c.gates().len(), 3);
        assert_eq!(c.two_qubit_count(), 2);
        assert_eq!(QuantumCircuit::parse(&c.to_text()).unwrap(), c);
        assert_eq!(QuantumCircuit::parse("2\n").unwrap().n_qubits(), 2);
    }

    #[test]
    fn parse_errors_carry_line() {
        let e = QuantumCircuit::parse("qubits 2\ng1 0\ng3 0 1 2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = QuantumCircuit::parse("qubits 2\ng2 0 5\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = QuantumCircuit::parse("qubits 2\ng2 1 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = QuantumCircuit::parse("g1 0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        assert!(QuantumCircuit::parse("").is_err());
    }

    #[test]
    fn qasm_import() {
        let src = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg a[2];\nqreg b[1];\ncreg c[3];\n\
                   h a;\n// comment\nrz(pi / 4) b[0];\ncx a[1], b[0];\nbarrier a;\nmeasure a[0] -> c[0];\n";
        let c = QuantumCircuit::parse_qasm2(src).unwrap();
        assert_eq!(c.n_qubits(), 3);
        assert_eq!(
            c.gates(),
            &[
                Gate::One { qubit: 0 },
                Gate::One { qubit: 1 },
                Gate::One { qubit: 2 },
                Gate::Two { control: 1, target: 2 },
            ]
        );
    }

    #[test]
    fn qasm_rejects_three_qubit_gates() {
        let src = "OPENQASM 2.0;\nqreg q[3];\n\nccx q[0], q[1], q[2];\n";
        let e = QuantumCircuit::parse_qasm2(src).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e}");
        assert!(QuantumCircuit::parse_qasm2("qreg q[2];\ngate foo a { x a; }\n").is_err());
    }

    #[test]
    fn matching_layers() {
        let mut rng = stream(2, "circuit", 0);
        let c = random_square_circuit(7, &mut rng);
        assert_eq!(c.gates().len(), 7 * 3);
        for layer in c.gates().chunks(3) {
            let mut seen: Vec<usize> = layer.iter().flat_map(|g| g.qubits()).collect();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), 6);
        }
        let mut rng2 = stream(2, "circuit", 0);
        assert_eq!(random_square_circuit(7, &mut rng2), c);
    }

    #[test]
    fn structured_generators() {
        assert_eq!(ghz_circuit(5).two_qubit_count(), 4);
        assert_eq!(bernstein_vazirani_circuit(4, 0b1011).two_qubit_count(), 3);
        assert_eq!(qft_circuit(5).two_qubit_count(), 10);
        let w = ghz_circuit(3).interaction_weights();
        assert_eq!(w.into_iter().collect::<Vec<_>>(), vec![((0, 1), 1), ((1, 2), 1)]);
    }
}
