//! `--config FILE`: a JSON object whose keys are long flag names of the
//! chosen subcommand. Flags given on the command line take precedence.

use std::collections::HashSet;
use std::ffi::OsString;
use std::path::PathBuf;

use serde_json::Value;

/// Removes `--config` from `argv` and splices the file's flags in right
/// after the subcommand, skipping any flag the command line already sets.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config: Option<PathBuf> = None;
    let mut it = argv.into_iter();
    if let Some(program) = it.next() {
        rest.push(program);
    }
    while let Some(arg) = it.next() {
        let text = arg.to_string_lossy();
        if text == "--" {
            rest.push(arg);
            rest.extend(it.by_ref());
            break;
        }
        if text == "--config" {
            let path = it.next().ok_or("--config requires a path")?;
            config = Some(path.into());
        } else if let Some(path) = text.strip_prefix("--config=") {
            config = Some(path.into());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };

    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
    let Value::Object(map) = doc else {
        return Err(format!("config {} must be a JSON object", path.display()));
    };

    let Some(sub) = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')) else {
        return Ok(rest);
    };
    let sub = sub + 1;
    let given: HashSet<String> = rest[sub + 1..]
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .filter_map(|a| {
            a.strip_prefix("--")
                .map(|f| f.split('=').next().unwrap_or_default().to_string())
        })
        .collect();

    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in map {
        let name = key.replace('_', "-");
        if given.contains(&name) {
            continue;
        }
        let flag = format!("--{name}");
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => injected.push(flag.into()),
            Value::String(s) => injected.extend([flag.into(), s.into()]),
            Value::Number(n) => injected.extend([flag.into(), n.to_string().into()]),
            Value::Array(items) => {
                let parts = items
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => Ok(s.clone()),
                        Value::Number(n) => Ok(n.to_string()),
                        _ => Err(format!("config key {key:?}: list items must be strings or numbers")),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                injected.extend([flag.into(), parts.join(",").into()]);
            }
            Value::Object(_) => return Err(format!("config key {key:?}: nested objects are not flags")),
        }
    }
    rest.splice(sub + 1..sub + 1, injected);
    Ok(rest)
}
