//! Config-file merging and output files stamped with the resolved config.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

/// Expands `--config FILE` into flags placed right after the subcommand,
/// so anything given on the command line overrides the file.
///
/// Lines are `key = value` (or `key value`), `#` starts a comment, keys are
/// long flag names without the dashes, and `true`/`false` toggle switches.
pub fn merge_config_file(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if s == "--config" {
            let p = argv.get(i + 1).ok_or("--config needs a file")?;
            path = Some(PathBuf::from(p));
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let flags = config_flags(&text)?;
    if argv.len() < 2 {
        return Ok(argv);
    }
    let mut out = argv[..2].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[2..]);
    Ok(out)
}

fn config_flags(text: &str) -> Result<Vec<OsString>, String> {
    let mut flags = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = match line.split_once('=') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => line.split_once(char::is_whitespace).map(|(k, v)| (k, v.trim())).unwrap_or((line, "true")),
        };
        if key.is_empty() || key == "config" {
            return Err(format!("config line {}: bad key in `{raw}`", lineno + 1));
        }
        let value = value.trim_matches('"');
        match value {
            "true" => flags.push(format!("--{key}").into()),
            "false" => {}
            v => {
                flags.push(format!("--{key}").into());
                flags.push(v.into());
            }
        }
    }
    Ok(flags)
}

/// Output directory plus the header every file carries.
pub struct OutDir {
    dir: PathBuf,
    config: Value,
}

impl OutDir {
    /// `args` is the parsed subcommand; its `out`/`config` paths are left
    /// out of the header so reruns into other directories stay identical.
    pub fn create(dir: &Path, subcommand: &str, args: &impl Serialize) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        let mut resolved = serde_json::to_value(args).map_err(std::io::Error::other)?;
        if let Some(obj) = resolved.as_object_mut() {
            obj.insert("subcommand".into(), json!(subcommand));
            if let Some(common) = obj.remove("common") {
                for (k, v) in common.as_object().into_iter().flatten() {
                    if k != "out" && k != "config" {
                        obj.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        Ok(Self { dir: dir.to_path_buf(), config: resolved })
    }

    /// CSV with a leading `# {config json}` line; `extra` is merged into it.
    pub fn csv(
        &self,
        name: &str,
        extra: Option<Value>,
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        let mut header = json!({ "config": self.config });
        if let Some(Value::Object(map)) = extra {
            header.as_object_mut().expect("object").extend(map);
        }
        writeln!(w, "# {header}")?;
        body(&mut w)?;
        w.flush()
    }

    /// JSON object with the config under `"config"` next to `body`'s keys.
    pub fn json(&self, name: &str, body: Value) -> std::io::Result<()> {
        let mut doc = json!({ "config": self.config });
        match body {
            Value::Object(map) => doc.as_object_mut().expect("object").extend(map),
            other => {
                doc["result"] = other;
            }
        }
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        serde_json::to_writer_pretty(&mut w, &doc).map_err(std::io::Error::other)?;
        writeln!(w)?;
        w.flush()
    }

    /// Plain text whose first line is `config: {json}`.
    pub fn text(&self, name: &str, lines: &[String]) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        writeln!(w, "config: {}", self.config)?;
        for l in lines {
            writeln!(w, "{l}")?;
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_lines_become_flags() {
        let flags =
            config_flags("# comment\nk = 64\nmu = \"atom:0,0,1\"\nskip-grid = true\nverbose=false\n\nc 2\n").unwrap();
        assert_eq!(flags, os(&["--k", "64", "--mu", "atom:0,0,1", "--skip-grid", "--c", "2"]));
    }

    #[test]
    fn nested_config_is_rejected() {
        assert!(config_flags("config = other.cfg").is_err());
    }

    #[test]
    fn file_flags_precede_command_line() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "k = 64\n").unwrap();
        let argv = os(&["dtlab", "sample", "--k", "32", "--config", cfg.to_str().unwrap()]);
        let merged = merge_config_file(argv).unwrap();
        assert_eq!(&merged[..4], &os(&["dtlab", "sample", "--k", "64"])[..]);
        assert_eq!(merged[4], OsString::from("--k"));
        assert_eq!(merged[5], OsString::from("32"));
    }
}
