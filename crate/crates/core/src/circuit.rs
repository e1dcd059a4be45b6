//! Logical circuits made of opaque single-qubit gates and CNOTs.
//!
//! Input circuits are expected to be decomposed already: the only
//! multi-qubit gate accepted is `cx`. Single-qubit gates are carried as
//! labels and never influence routing cost.

use std::fmt;

use thiserror::Error;

/// Index of a qubit in the logical (program) register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LogicalQubit(pub usize);

impl LogicalQubit {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for LogicalQubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cnot {
    pub control: LogicalQubit,
    pub target: LogicalQubit,
}

impl Cnot {
    pub fn new(control: usize, target: usize) -> Self {
        Self {
            control: LogicalQubit(control),
            target: LogicalQubit(target),
        }
    }

    /// Two CNOTs commute iff they share a control, share a target, or act on
    /// disjoint qubits.
    pub fn commutes_with(&self, other: &Cnot) -> bool {
        if self.control == other.control || self.target == other.target {
            return true;
        }
        self.control != other.target && self.target != other.control
    }

    pub fn touches(&self, q: LogicalQubit) -> bool {
        self.control == q || self.target == q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Single {
        name: String,
        params: Vec<f64>,
        qubit: LogicalQubit,
    },
    Cnot(Cnot),
}

impl Gate {
    pub fn single(name: &str, qubit: usize) -> Self {
        Gate::Single {
            name: name.to_string(),
            params: Vec::new(),
            qubit: LogicalQubit(qubit),
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot(Cnot::new(control, target))
    }

    pub fn as_cnot(&self) -> Option<&Cnot> {
        match self {
            Gate::Cnot(c) => Some(c),
            Gate::Single { .. } => None,
        }
    }

    pub fn is_cnot(&self) -> bool {
        matches!(self, Gate::Cnot(_))
    }

    fn max_qubit(&self) -> usize {
        match self {
            Gate::Single { qubit, .. } => qubit.0,
            Gate::Cnot(c) => c.control.0.max(c.target.0),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("line {line}: {message}")]
    MalformedSource { line: usize, message: String },
    #[error("line {line}: gate `{gate}` acts on {arity} qubits; only `cx` may act on more than one")]
    MultiQubitUnsupported { line: usize, gate: String, arity: usize },
    #[error("line {line}: qubit index {index} out of range for register of size {size}")]
    IndexOutOfRange { line: usize, index: usize, size: usize },
    #[error("invalid gate: {0}")]
    InvalidGate(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicalCircuit {
    num_qubits: usize,
    gates: Vec<Gate>,
}

impl LogicalCircuit {
    pub fn new(num_qubits: usize, gates: Vec<Gate>) -> Result<Self, CircuitError> {
        if num_qubits == 0 {
            return Err(CircuitError::InvalidGate("a circuit needs at least one qubit".into()));
        }
        for g in &gates {
            if g.max_qubit() >= num_qubits {
                return Err(CircuitError::InvalidGate(format!(
                    "{g:?} exceeds register size {num_qubits}"
                )));
            }
            match g {
                Gate::Cnot(c) if c.control == c.target => {
                    return Err(CircuitError::InvalidGate(format!(
                        "cx with control == target ({})",
                        c.control
                    )));
                }
                Gate::Single { name, .. } if name.is_empty() => {
                    return Err(CircuitError::InvalidGate("empty gate name".into()));
                }
                _ => {}
            }
        }
        Ok(Self { num_qubits, gates })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_cnot()).count()
    }

    /// Renders the circuit as OpenQASM 2 over a register named `q`.
    pub fn to_qasm(&self) -> String {
        let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
        out.push_str(&format!("qreg q[{}];\n", self.num_qubits));
        for g in &self.gates {
            match g {
                Gate::Single { name, params, qubit } => out.push_str(&format_single(name, params, qubit.0)),
                Gate::Cnot(c) => out.push_str(&format!("cx q[{}],q[{}];\n", c.control.0, c.target.0)),
            }
        }
        out
    }
}

pub(crate) fn format_single(name: &str, params: &[f64], qubit: usize) -> String {
    if params.is_empty() {
        format!("{name} q[{qubit}];\n")
    } else {
        let ps: Vec<String> = params.iter().map(|p| format!("{p:?}")).collect();
        format!("{name}({}) q[{qubit}];\n", ps.join(","))
    }
}

/// The CNOTs of `circuit`, in program order.
pub fn cnot_gates(circuit: &LogicalCircuit) -> Vec<Cnot> {
    circuit.gates.iter().filter_map(|g| g.as_cnot().copied()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SharedRole {
    Control,
    Target,
}

/// A run of mutually commuting CNOTs that share one qubit in the same role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnotGroup {
    pub shared: LogicalQubit,
    pub role: SharedRole,
    pub gates: Vec<Cnot>,
}

impl CnotGroup {
    /// The qubits on the other end of each gate, in order.
    pub fn partners(&self) -> Vec<LogicalQubit> {
        self.gates
            .iter()
            .map(|g| match self.role {
                SharedRole::Control => g.target,
                SharedRole::Target => g.control,
            })
            .collect()
    }
}

/// Splits `gates` into maximal consecutive runs of pairwise-commuting CNOTs
/// sharing a common qubit in a common role. Singleton runs report the
/// control as the shared qubit.
pub fn commuting_shared_groups(gates: &[Cnot]) -> Vec<CnotGroup> {
    let mut groups: Vec<CnotGroup> = Vec::new();
    for &g in gates {
        if let Some(cur) = groups.last_mut() {
            if can_extend(cur, &g) {
                if cur.gates.len() == 1 {
                    let first = cur.gates[0];
                    if first.control == g.control {
                        cur.role = SharedRole::Control;
                        cur.shared = g.control;
                    } else {
                        cur.role = SharedRole::Target;
                        cur.shared = g.target;
                    }
                }
                cur.gates.push(g);
                continue;
            }
        }
        groups.push(CnotGroup {
            shared: g.control,
            role: SharedRole::Control,
            gates: vec![g],
        });
    }
    groups
}

fn can_extend(group: &CnotGroup, g: &Cnot) -> bool {
    if !group.gates.iter().all(|h| h.commutes_with(g)) {
        return false;
    }
    if group.gates.len() == 1 {
        let first = group.gates[0];
        return first.control == g.control || first.target == g.target;
    }
    match group.role {
        SharedRole::Control => g.control == group.shared,
        SharedRole::Target => g.target == group.shared,
    }
}

/// Parses the OpenQASM 2 subset used by the benchmark corpus.
///
/// Exactly one `qreg` is allowed. `include`, `creg`, `measure` and `barrier`
/// statements are skipped, as are `//` comments.
pub fn parse_qasm(text: &str) -> Result<LogicalCircuit, CircuitError> {
    let mut reg: Option<(String, usize)> = None;
    let mut gates = Vec::new();

    for (line, stmt) in statements(text) {
        let malformed = |message: String| CircuitError::MalformedSource { line, message };
        let (head, rest) = split_head(&stmt);
        match head {
            "OPENQASM" | "include" | "creg" | "measure" | "barrier" => continue,
            "qreg" => {
                if reg.is_some() {
                    return Err(malformed("only one qreg is supported".into()));
                }
                let (name, size) =
                    parse_indexed(rest).ok_or_else(|| malformed(format!("bad qreg declaration `{stmt}`")))?;
                if size == 0 {
                    return Err(malformed("qreg must have at least one qubit".into()));
                }
                reg = Some((name.to_string(), size));
            }
            "gate" | "opaque" | "if" | "reset" => {
                return Err(malformed(format!("unsupported statement `{head}`")));
            }
            _ => {
                let (reg_name, size) = reg
                    .as_ref()
                    .ok_or_else(|| malformed("gate before qreg declaration".into()))?;
                let (name, params, operands) = parse_gate(&stmt).map_err(malformed)?;
                let mut qubits = Vec::with_capacity(operands.len());
                for op in &operands {
                    let (r, idx) = parse_indexed(op).ok_or_else(|| malformed(format!("bad operand `{op}`")))?;
                    if r != reg_name {
                        return Err(malformed(format!("unknown register `{r}`")));
                    }
                    if idx >= *size {
                        return Err(CircuitError::IndexOutOfRange {
                            line,
                            index: idx,
                            size: *size,
                        });
                    }
                    qubits.push(idx);
                }
                match (name.as_str(), qubits.as_slice()) {
                    ("cx", [c, t]) => {
                        if c == t {
                            return Err(malformed("cx control equals target".into()));
                        }
                        gates.push(Gate::cnot(*c, *t));
                    }
                    ("cx", _) => return Err(malformed(format!("cx takes two operands, got {}", qubits.len()))),
                    (_, [q]) => gates.push(Gate::Single {
                        name,
                        params,
                        qubit: LogicalQubit(*q),
                    }),
                    (_, []) => return Err(malformed(format!("gate `{name}` has no operands"))),
                    (_, qs) => {
                        return Err(CircuitError::MultiQubitUnsupported {
                            line,
                            gate: name,
                            arity: qs.len(),
                        })
                    }
                }
            }
        }
    }

    let (_, n) = reg.ok_or(CircuitError::MalformedSource {
        line: 1,
        message: "missing qreg declaration".into(),
    })?;
    LogicalCircuit::new(n, gates)
}

/// Yields `(starting line, statement text)` for every `;`-terminated statement.
fn statements(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start_line = 1;
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find("//") {
            Some(p) => &raw[..p],
            None => raw,
        };
        for piece in line.split_inclusive(';') {
            if cur.trim().is_empty() {
                start_line = i + 1;
            }
            if let Some(body) = piece.strip_suffix(';') {
                cur.push_str(body);
                let s = cur.trim().to_string();
                if !s.is_empty() {
                    out.push((start_line, s));
                }
                cur.clear();
            } else {
                cur.push_str(piece);
                cur.push(' ');
            }
        }
    }
    if !cur.trim().is_empty() {
        out.push((start_line, cur.trim().to_string()));
    }
    out
}

fn split_head(stmt: &str) -> (&str, &str) {
    let end = stmt.find(|c: char| c.is_whitespace() || c == '(').unwrap_or(stmt.len());
    (&stmt[..end], stmt[end..].trim())
}

fn parse_indexed(s: &str) -> Option<(&str, usize)> {
    let s = s.trim();
    let open = s.find('[')?;
    let close = s.rfind(']')?;
    if close != s.len() - 1 || close < open {
        return None;
    }
    let name = s[..open].trim();
    if name.is_empty() {
        return None;
    }
    let idx = s[open + 1..close].trim().parse().ok()?;
    Some((name, idx))
}

fn parse_gate(stmt: &str) -> Result<(String, Vec<f64>, Vec<String>), String> {
    let stmt = stmt.trim();
    let name_end = stmt
        .find(|c: char| c.is_whitespace() || c == '(')
        .ok_or_else(|| format!("cannot parse `{stmt}`"))?;
    let name = &stmt[..name_end];
    if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(format!("bad gate name `{name}`"));
    }
    let mut rest = stmt[name_end..].trim_start();
    let mut params = Vec::new();
    if rest.starts_with('(') {
        let close = rest.find(')').ok_or("unclosed parameter list")?;
        let inner = &rest[1..close];
        for p in inner.split(',') {
            params.push(eval_expr(p)?);
        }
        rest = rest[close + 1..].trim_start();
    }
    let operands: Vec<String> = rest
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    Ok((name.to_string(), params, operands))
}

/// Evaluates a parameter expression: numbers, `pi`, `+ - * /`, unary minus
/// and parentheses.
fn eval_expr(src: &str) -> Result<f64, String> {
    let mut p = ExprParser {
        chars: src.chars().filter(|c| !c.is_whitespace()).collect(),
        pos: 0,
    };
    let v = p.sum()?;
    if p.pos != p.chars.len() {
        return Err(format!("trailing input in parameter `{src}`"));
    }
    Ok(v)
}

struct ExprParser {
    chars: Vec<char>,
    pos: usize,
}

impl ExprParser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<f64, String> {
        let mut v = self.product()?;
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let r = self.product()?;
            v = if c == '+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<f64, String> {
        let mut v = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            let r = self.unary()?;
            v = if c == '*' { v * r } else { v / r };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let v = self.sum()?;
                if self.peek() != Some(')') {
                    return Err("missing `)` in parameter".into());
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric()) {
                    self.pos += 1;
                }
                let word: String = self.chars[start..self.pos].iter().collect();
                match word.as_str() {
                    "pi" => Ok(std::f64::consts::PI),
                    _ => Err(format!("unknown identifier `{word}` in parameter")),
                }
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
                    self.pos += 1;
                }
                if matches!(self.peek(), Some('e' | 'E')) {
                    self.pos += 1;
                    if matches!(self.peek(), Some('+' | '-')) {
                        self.pos += 1;
                    }
                    while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        self.pos += 1;
                    }
                }
                let s: String = self.chars[start..self.pos].iter().collect();
                s.parse().map_err(|_| format!("bad number `{s}`"))
            }
            _ => Err("unexpected end of parameter".into()),
        }
    }
}
