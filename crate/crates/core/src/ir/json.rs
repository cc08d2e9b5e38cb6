//! JSON interchange format: an array of single-key objects, one per command.

use serde_json::{json, Map, Value};
use thiserror::Error;

use super::{group_declarations, Angle, Basis, Command, DeclGroup, Program, Qubit, Signal};
use num_complex::Complex64;

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("malformed JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("command {index}: {message}")]
    Schema { index: usize, message: String },
    #[error("program must be a JSON array of command objects")]
    NotAnArray,
}

fn qubits_value(qs: impl IntoIterator<Item = Qubit>) -> Value {
    Value::Array(qs.into_iter().map(Value::from).collect())
}

fn signal_value(s: &Signal) -> Value {
    qubits_value(s.iter())
}

fn complex_value(c: Complex64) -> Value {
    json!([c.re, c.im])
}

pub(crate) fn basis_value(basis: &Basis) -> Value {
    match basis {
        Basis::X => json!("X"),
        Basis::Y => json!("Y"),
        Basis::Z => json!("Z"),
        Basis::FromAngle(a) => json!({ "from_angle": a.radians() }),
        Basis::FromTuples(a, b) => json!({
            "from_tuples": [complex_value(a[0]), complex_value(a[1]), complex_value(b[0]), complex_value(b[1])]
        }),
    }
}

fn command_value(cmd: &Command) -> Value {
    let body = match cmd {
        Command::Input(q) | Command::Prep(q) => json!({ "qubit": q }),
        Command::Entangle(a, b) | Command::CZ(a, b) => json!({ "on_qubits": [a, b] }),
        Command::Measure {
            qubit,
            angle,
            s_domain,
            t_domain,
        } => json!({
            "qubit": qubit,
            "angle": angle.radians(),
            "signal_s": signal_value(s_domain),
            "signal_t": signal_value(t_domain),
        }),
        Command::XCorrect { qubit, signal } | Command::ZCorrect { qubit, signal } => {
            json!({ "qubit": qubit, "signal": signal_value(signal) })
        }
        Command::ReadOut { qubit, basis } => json!({ "qubit": qubit, "basis": basis_value(basis) }),
        Command::J { angle, source, target } => json!({ "angle": angle.radians(), "on_qubits": [source, target] }),
    };
    let mut m = Map::new();
    m.insert(cmd.name().to_string(), body);
    Value::Object(m)
}

/// Serializes a program. Consecutive declaration runs are emitted as
/// `InputList`/`PrepList`; one command object per line.
pub fn to_json(program: &Program) -> String {
    let items: Vec<Value> = group_declarations(program.commands())
        .into_iter()
        .map(|g| match g {
            DeclGroup::Single(c) => command_value(c),
            DeclGroup::Inputs(qs) => json!({ "InputList": { "qubits": qubits_value(qs) } }),
            DeclGroup::Preps(qs) => json!({ "PrepList": { "qubits": qubits_value(qs) } }),
        })
        .collect();
    if items.is_empty() {
        return "[]".to_string();
    }
    let mut out = String::from("[\n");
    for (i, item) in items.iter().enumerate() {
        out.push_str("  ");
        write_spaced(&mut out, item);
        if i + 1 < items.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push(']');
    out
}

/// Renders a value on one line with `", "` and `": "` separators.
pub(crate) fn write_spaced(out: &mut String, v: &Value) {
    match v {
        Value::Array(items) => {
            out.push('[');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_spaced(out, x);
            }
            out.push(']');
        }
        Value::Object(m) => {
            out.push('{');
            for (i, (k, x)) in m.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_spaced(out, x);
            }
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

struct Fields<'a> {
    index: usize,
    name: &'a str,
    body: &'a Map<String, Value>,
}

impl<'a> Fields<'a> {
    fn err(&self, message: impl Into<String>) -> JsonError {
        JsonError::Schema {
            index: self.index,
            message: format!("{}: {}", self.name, message.into()),
        }
    }

    fn get(&self, key: &str) -> Result<&'a Value, JsonError> {
        self.body
            .get(key)
            .ok_or_else(|| self.err(format!("missing field \"{key}\"")))
    }

    fn expect_keys(&self, keys: &[&str]) -> Result<(), JsonError> {
        if let Some(k) = self.body.keys().find(|k| !keys.contains(&k.as_str())) {
            return Err(self.err(format!("unexpected field \"{k}\"")));
        }
        Ok(())
    }

    fn qubit_of(&self, v: &Value) -> Result<Qubit, JsonError> {
        v.as_u64()
            .map(|q| q as Qubit)
            .ok_or_else(|| self.err(format!("expected a qubit label, found {v}")))
    }

    fn qubit(&self, key: &str) -> Result<Qubit, JsonError> {
        self.qubit_of(self.get(key)?)
    }

    fn qubit_list(&self, key: &str) -> Result<Vec<Qubit>, JsonError> {
        let v = self.get(key)?;
        let arr = v
            .as_array()
            .ok_or_else(|| self.err(format!("\"{key}\" must be an array")))?;
        arr.iter().map(|x| self.qubit_of(x)).collect()
    }

    fn pair(&self, key: &str) -> Result<(Qubit, Qubit), JsonError> {
        let qs = self.qubit_list(key)?;
        match qs[..] {
            [a, b] => Ok((a, b)),
            _ => Err(self.err(format!("\"{key}\" must hold exactly two qubits"))),
        }
    }

    fn signal(&self, key: &str) -> Result<Signal, JsonError> {
        Ok(self.qubit_list(key)?.into_iter().collect())
    }

    fn number_of(&self, v: &Value) -> Result<f64, JsonError> {
        v.as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| self.err(format!("expected a number, found {v}")))
    }

    fn angle(&self, key: &str) -> Result<Angle, JsonError> {
        Ok(Angle::new(self.number_of(self.get(key)?)?))
    }

    fn complex(&self, v: &Value) -> Result<Complex64, JsonError> {
        match v.as_array().map(|a| a.as_slice()) {
            Some([re, im]) => Ok(Complex64::new(self.number_of(re)?, self.number_of(im)?)),
            _ => Err(self.err(format!("expected [re, im], found {v}"))),
        }
    }

    fn basis(&self, key: &str) -> Result<Basis, JsonError> {
        let v = self.get(key)?;
        match v {
            Value::String(s) => match s.as_str() {
                "X" => Ok(Basis::X),
                "Y" => Ok(Basis::Y),
                "Z" => Ok(Basis::Z),
                other => Err(self.err(format!("unknown basis \"{other}\""))),
            },
            Value::Object(m) if m.len() == 1 => {
                if let Some(a) = m.get("from_angle") {
                    Ok(Basis::FromAngle(Angle::new(self.number_of(a)?)))
                } else if let Some(t) = m.get("from_tuples") {
                    let parts = t
                        .as_array()
                        .filter(|a| a.len() == 4)
                        .ok_or_else(|| self.err("from_tuples needs four [re, im] pairs"))?;
                    let c: Vec<Complex64> = parts.iter().map(|x| self.complex(x)).collect::<Result<_, _>>()?;
                    Ok(Basis::FromTuples([c[0], c[1]], [c[2], c[3]]))
                } else {
                    Err(self.err(format!("unknown basis {v}")))
                }
            }
            _ => Err(self.err(format!("unknown basis {v}"))),
        }
    }
}

/// Parses the JSON interchange format. List declarations expand in place.
pub fn from_json(text: &str) -> Result<Program, JsonError> {
    let value: Value = serde_json::from_str(text)?;
    let items = value.as_array().ok_or(JsonError::NotAnArray)?;
    let mut commands = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        let obj = item
            .as_object()
            .filter(|o| o.len() == 1)
            .ok_or_else(|| JsonError::Schema {
                index,
                message: format!("expected a single-key command object, found {item}"),
            })?;
        let (name, body) = obj.iter().next().expect("one entry");
        let body = body.as_object().ok_or_else(|| JsonError::Schema {
            index,
            message: format!("{name}: value must be an object"),
        })?;
        let f = Fields { index, name, body };
        match name.as_str() {
            "Input" | "Prep" => {
                f.expect_keys(&["qubit"])?;
                let q = f.qubit("qubit")?;
                commands.push(if name == "Input" {
                    Command::Input(q)
                } else {
                    Command::Prep(q)
                });
            }
            "InputList" | "PrepList" => {
                f.expect_keys(&["qubits"])?;
                for q in f.qubit_list("qubits")? {
                    commands.push(if name == "InputList" {
                        Command::Input(q)
                    } else {
                        Command::Prep(q)
                    });
                }
            }
            "Entangle" | "CZ" => {
                f.expect_keys(&["on_qubits"])?;
                let (a, b) = f.pair("on_qubits")?;
                commands.push(if name == "Entangle" {
                    Command::Entangle(a, b)
                } else {
                    Command::CZ(a, b)
                });
            }
            "Measure" => {
                f.expect_keys(&["qubit", "angle", "signal_s", "signal_t"])?;
                commands.push(Command::Measure {
                    qubit: f.qubit("qubit")?,
                    angle: f.angle("angle")?,
                    s_domain: f.signal("signal_s")?,
                    t_domain: f.signal("signal_t")?,
                });
            }
            "XCorrect" | "ZCorrect" => {
                f.expect_keys(&["qubit", "signal"])?;
                let qubit = f.qubit("qubit")?;
                let signal = f.signal("signal")?;
                commands.push(if name == "XCorrect" {
                    Command::XCorrect { qubit, signal }
                } else {
                    Command::ZCorrect { qubit, signal }
                });
            }
            "ReadOut" => {
                f.expect_keys(&["qubit", "basis"])?;
                commands.push(Command::ReadOut {
                    qubit: f.qubit("qubit")?,
                    basis: f.basis("basis")?,
                });
            }
            "J" => {
                f.expect_keys(&["angle", "on_qubits"])?;
                let (source, target) = f.pair("on_qubits")?;
                commands.push(Command::J {
                    angle: f.angle("angle")?,
                    source,
                    target,
                });
            }
            other => {
                return Err(JsonError::Schema {
                    index,
                    message: format!("unknown command \"{other}\""),
                })
            }
        }
    }
    Ok(Program::new(commands))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entangle_object_shape() {
        let p = Program::new(vec![Command::Entangle(0, 1)]);
        assert_eq!(to_json(&p), "[\n  {\"Entangle\": {\"on_qubits\": [0, 1]}}\n]");
    }

    #[test]
    fn empty_program() {
        assert_eq!(to_json(&Program::default()), "[]");
        assert_eq!(from_json("[]").unwrap(), Program::default());
    }

    #[test]
    fn prep_runs_become_lists() {
        let p = Program::new(vec![Command::Input(0), Command::Prep(1), Command::Prep(2)]);
        let text = to_json(&p);
        assert!(text.contains("{\"PrepList\": {\"qubits\": [1, 2]}}"), "{text}");
        assert!(text.contains("{\"Input\": {\"qubit\": 0}}"), "{text}");
        assert_eq!(from_json(&text).unwrap(), p);
    }

    #[test]
    fn every_variant_round_trips() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let p = Program::new(vec![
            Command::Input(0),
            Command::Prep(1),
            Command::J {
                angle: Angle::new(0.5),
                source: 0,
                target: 1,
            },
            Command::CZ(1, 2),
            Command::measure_dep(1, 1.25, [0], [0]),
            Command::x(2, [0, 1]),
            Command::z(2, [1]),
            Command::readout(
                2,
                Basis::FromTuples(
                    [Complex64::new(h, 0.0), Complex64::new(0.0, h)],
                    [Complex64::new(h, 0.0), Complex64::new(0.0, -h)],
                ),
            ),
            Command::readout(3, Basis::FromAngle(Angle::PI)),
            Command::readout(4, Basis::Y),
        ]);
        assert_eq!(from_json(&to_json(&p)).unwrap(), p);
    }

    #[test]
    fn schema_errors_name_the_command() {
        let e = from_json(r#"[{"Prep": {"qubit": 0}}, {"Entangle": {"on_qubits": [0]}}]"#).unwrap_err();
        match e {
            JsonError::Schema { index, message } => {
                assert_eq!(index, 1);
                assert!(message.starts_with("Entangle"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(from_json("[{"), Err(JsonError::Parse(_))));
        assert!(matches!(from_json("{}"), Err(JsonError::NotAnArray)));
        assert!(matches!(
            from_json(r#"[{"Teleport": {}}]"#),
            Err(JsonError::Schema { index: 0, .. })
        ));
        assert!(matches!(
            from_json(r#"[{"Prep": {"qubit": 0, "extra": 1}}]"#),
            Err(JsonError::Schema { index: 0, .. })
        ));
    }
}
