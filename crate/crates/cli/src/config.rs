//! `--config FILE` support: a TOML table of flag values spliced into the
//! argument list ahead of the explicit flags, which then override it.

use std::ffi::OsString;
use std::fs;

use crate::CliError;

/// Flags accepted before the subcommand that take a value.
const GLOBAL_VALUED: &[&str] = &[
    "--out",
    "--csv",
    "--budget",
    "--seed",
    "--threads",
    "--config",
];
const GLOBAL_KEYS: &[&str] = &["out", "csv", "budget", "seed", "threads"];

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    let mut found = None;
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            found = it.next().cloned();
        } else if let Some(rest) = s.strip_prefix("--config=") {
            found = Some(rest.into());
        }
    }
    found
}

fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if !s.starts_with('-') {
            return Some(i);
        }
        if GLOBAL_VALUED.contains(&s.as_ref()) {
            i += 1;
        }
        i += 1;
    }
    None
}

fn render(key: &str, value: &toml::Value) -> Result<Option<String>, CliError> {
    let text = match value {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(true) => return Ok(Some(format!("--{key}"))),
        toml::Value::Boolean(false) => return Ok(None),
        toml::Value::Array(items) => items
            .iter()
            .map(|v| match v {
                toml::Value::String(s) => Ok(s.clone()),
                toml::Value::Integer(i) => Ok(i.to_string()),
                toml::Value::Float(f) => Ok(f.to_string()),
                _ => Err(CliError::Input(format!(
                    "config key '{key}': arrays may hold numbers or strings"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        _ => {
            return Err(CliError::Input(format!(
                "config key '{key}': unsupported value type"
            )))
        }
    };
    Ok(Some(format!("--{key}={text}")))
}

/// Returns `argv` with the config file's flags spliced in, or `argv`
/// unchanged when no `--config` is given.
pub fn overlay(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| {
        CliError::Input(format!(
            "cannot read config {}: {e}",
            path.to_string_lossy()
        ))
    })?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Input(format!("config {}: {e}", path.to_string_lossy())))?;
    let Some(sub) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let (mut global, mut local) = (Vec::new(), Vec::new());
    for (key, value) in &table {
        let key = key.replace('_', "-");
        if let Some(arg) = render(&key, value)? {
            if GLOBAL_KEYS.contains(&key.as_str()) {
                global.push(OsString::from(arg));
            } else {
                local.push(OsString::from(arg));
            }
        }
    }
    let mut out = vec![argv[0].clone()];
    out.extend(global);
    out.extend(argv[1..=sub].iter().cloned());
    out.extend(local);
    out.extend(argv[sub + 1..].iter().cloned());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn finds_subcommand_after_global_flags() {
        assert_eq!(
            subcommand_index(&args(&["xnt", "--seed", "3", "boxcount", "--B", "4"])),
            Some(3)
        );
        assert_eq!(subcommand_index(&args(&["xnt", "klsum"])), Some(1));
        assert_eq!(subcommand_index(&args(&["xnt", "--seed=3"])), None);
    }

    #[test]
    fn renders_values() {
        let v: toml::Table = "B = 20\nF = \"X0^2\"\nu = [1, -2]\nno_tallies = true\nx = false"
            .parse()
            .unwrap();
        assert_eq!(render("B", &v["B"]).unwrap().unwrap(), "--B=20");
        assert_eq!(render("F", &v["F"]).unwrap().unwrap(), "--F=X0^2");
        assert_eq!(render("u", &v["u"]).unwrap().unwrap(), "--u=1,-2");
        assert_eq!(
            render("no-tallies", &v["no_tallies"]).unwrap().unwrap(),
            "--no-tallies"
        );
        assert_eq!(render("x", &v["x"]).unwrap(), None);
    }
}
