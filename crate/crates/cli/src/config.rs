//! `--config job.json`: a JSON object whose keys are flag names, expanded
//! into argv ahead of any flags given on the command line.
//!
//! Keys are lowercased and `_` becomes `-`, so a solver config such as
//! `{"nx": 64, "Lx": 6.28, "init_H": "..."}` is accepted as is. Arrays repeat
//! the flag, booleans toggle it, and a `params` object becomes `--param k=v`.

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

pub fn expand(argv: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    let bin = it.next().unwrap_or_else(|| "ewweb".into());
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or_else(|| anyhow!("--config needs a path"))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        let mut out = vec![bin];
        out.extend(rest);
        return Ok(out);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {path}"))?;
    let json: Value = serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?;
    let Value::Object(map) = json else {
        bail!("{path}: expected a JSON object");
    };

    // the subcommand is the first bare word on the command line, else the
    // config's "command"
    let pos = rest.iter().position(|a| !a.starts_with('-'));
    let (command, tail) = match pos {
        Some(i) => {
            let tail = rest.split_off(i + 1);
            let cmd = rest.pop().expect("position is in range");
            if !rest.is_empty() {
                bail!("unexpected arguments before the subcommand: {rest:?}");
            }
            (cmd, tail)
        }
        None => {
            let cmd = match map.get("command") {
                Some(Value::String(s)) => s.clone(),
                _ => bail!("{path}: no subcommand given and no \"command\" key"),
            };
            (cmd, rest)
        }
    };

    let mut out = vec![bin, command.clone()];
    for (key, value) in &map {
        if key == "command" {
            if value.as_str() != Some(command.as_str()) {
                bail!("{path}: \"command\" is {value} but the subcommand is {command}");
            }
            continue;
        }
        let flag = format!("--{}", key.to_lowercase().replace('_', "-"));
        push_value(&mut out, &flag, value).with_context(|| format!("{path}: key {key}"))?;
    }
    out.extend(tail);
    Ok(out)
}

fn push_value(out: &mut Vec<String>, flag: &str, value: &Value) -> Result<()> {
    match value {
        Value::Null => {}
        Value::Bool(true) => out.push(flag.to_string()),
        Value::Bool(false) => {}
        Value::Number(n) => out.push(format!("{flag}={n}")),
        // `=` keeps values such as "-(X)" from reading as flags
        Value::String(s) => out.push(format!("{flag}={s}")),
        Value::Array(items) => {
            for v in items {
                if matches!(v, Value::Array(_) | Value::Object(_)) {
                    bail!("nested arrays and objects are not flags");
                }
                push_value(out, flag, v)?;
            }
        }
        Value::Object(map) if flag == "--params" || flag == "--param" => {
            for (k, v) in map {
                let v = v.as_f64().ok_or_else(|| anyhow!("parameter {k} must be a number"))?;
                out.push(format!("--param={k}={v}"));
            }
        }
        Value::Object(_) => bail!("objects are only allowed for params"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn argv(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn solver_keys_become_flags() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"nx": 16, "Lx": 6.5, "init_H": "X", "forcing": null, "params": {{"eps": 1}}}}"#).unwrap();
        let p = f.path().to_str().unwrap();
        let out = expand(argv(&["ewweb", "--config", p, "solve-hypercr", "--steps", "3"])).unwrap();
        assert_eq!(
            out,
            argv(&["ewweb", "solve-hypercr", "--lx=6.5", "--init-h=X", "--nx=16", "--param=eps=1", "--steps", "3"])
        );
    }

    #[test]
    fn command_from_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"command": "heisenberg", "eps": 1, "lambda": [0, 1]}}"#).unwrap();
        let out = expand(argv(&["ewweb", &format!("--config={}", f.path().display())])).unwrap();
        assert_eq!(out, argv(&["ewweb", "heisenberg", "--eps=1", "--lambda=0", "--lambda=1"]));
        assert!(expand(argv(&["ewweb", "--config", f.path().to_str().unwrap(), "deform"])).is_err());
    }
}
