//! Grid configuration files.
//!
//! The native format is flat `key = value` text; a JSON object with the same
//! keys is accepted as an alternative encoding. Keys:
//!
//! ```text
//! n         = 4,8,16,32            dimensions
//! s         = 1,4,16,n             term counts (`n` means "match dimension")
//! bodies    = ball,cube,cross,lp:4 body families, instantiated at volume one
//! patterns  = e1,flat,geometric,twolevel,random
//! n_samples = 100000
//! seed      = 42
//! threshold.<name> = <float>       override one verdict threshold
//! ```
//!
//! Unset keys keep their defaults, so a grid file only states what differs.

use multinorm::bounds::{GridConfig, TermCount, Thresholds};
use multinorm::sampling::Pattern;
use multinorm::BodyFamily;
use std::path::Path;

pub fn load(path: &Path) -> Result<GridConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read grid file {}: {e}", path.display()))?;
    let mut cfg = GridConfig::default();
    let pairs = if text.trim_start().starts_with('{') {
        pairs_from_json(&text)?
    } else {
        pairs_from_text(&text)?
    };
    for (key, value) in &pairs {
        apply(&mut cfg, key, value).map_err(|e| format!("grid key `{key}`: {e}"))?;
    }
    if cfg.n_list.is_empty() {
        return Err("grid needs at least one dimension".into());
    }
    if cfg.s_list.is_empty() {
        return Err("grid needs at least one term count".into());
    }
    Ok(cfg)
}

fn pairs_from_text(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`, got `{line}`", idx + 1))?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Flatten a JSON object to the same `(key, value-text)` pairs the text
/// format produces: arrays become comma lists, the `thresholds` object
/// becomes `threshold.<name>` entries.
fn pairs_from_json(text: &str) -> Result<Vec<(String, String)>, String> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("invalid JSON grid: {e}"))?;
    let object = value
        .as_object()
        .ok_or_else(|| "JSON grid must be an object".to_string())?;
    let mut pairs = Vec::new();
    for (key, val) in object {
        match val {
            serde_json::Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|item| match item {
                        serde_json::Value::String(s) => Ok(s.clone()),
                        serde_json::Value::Number(n) => Ok(n.to_string()),
                        other => Err(format!("key `{key}`: unsupported list entry {other}")),
                    })
                    .collect::<Result<_, _>>()?;
                pairs.push((key.clone(), parts.join(",")));
            }
            serde_json::Value::Object(map) if key == "thresholds" => {
                for (name, num) in map {
                    let v = num
                        .as_f64()
                        .ok_or_else(|| format!("threshold `{name}` must be a number"))?;
                    pairs.push((format!("threshold.{name}"), v.to_string()));
                }
            }
            serde_json::Value::Number(n) => pairs.push((key.clone(), n.to_string())),
            serde_json::Value::String(s) => pairs.push((key.clone(), s.clone())),
            other => return Err(format!("key `{key}`: unsupported value {other}")),
        }
    }
    Ok(pairs)
}

fn apply(cfg: &mut GridConfig, key: &str, value: &str) -> Result<(), String> {
    match key {
        "n" | "n_list" => {
            cfg.n_list = split(value)
                .map(|tok| {
                    tok.parse::<usize>()
                        .map_err(|_| format!("bad dimension `{tok}`"))
                        .and_then(|n| {
                            if n == 0 {
                                Err("dimensions start at 1".into())
                            } else {
                                Ok(n)
                            }
                        })
                })
                .collect::<Result<_, _>>()?;
        }
        "s" | "s_list" => {
            cfg.s_list = split(value)
                .map(|tok| TermCount::parse(tok).map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
        }
        "bodies" => {
            cfg.bodies = split(value)
                .map(|tok| BodyFamily::parse(tok).map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
        }
        "patterns" => {
            cfg.patterns = split(value)
                .map(|tok| Pattern::parse(tok).map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
        }
        "n_samples" => {
            cfg.n_samples = value
                .parse()
                .map_err(|_| format!("bad sample count `{value}`"))?;
        }
        "seed" => {
            cfg.seed = value.parse().map_err(|_| format!("bad seed `{value}`"))?;
        }
        _ => {
            if let Some(name) = key.strip_prefix("threshold.") {
                let v: f64 = value
                    .parse()
                    .map_err(|_| format!("bad threshold value `{value}`"))?;
                set_threshold(&mut cfg.thresholds, name, v)?;
            } else {
                return Err(
                    "unknown key (expected n, s, bodies, patterns, n_samples, seed \
                     or threshold.<name>)"
                        .into(),
                );
            }
        }
    }
    Ok(())
}

fn split(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|tok| !tok.is_empty())
}

fn set_threshold(t: &mut Thresholds, name: &str, v: f64) -> Result<(), String> {
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("threshold `{name}` must be a positive finite number"));
    }
    let slot = match name.replace('-', "_").as_str() {
        "sandwich_upper" => &mut t.sandwich_upper,
        "sandwich_lower" => &mut t.sandwich_lower,
        "general_upper" => &mut t.general_upper,
        "subgaussian_upper" => &mut t.subgaussian_upper,
        "two_convex_upper" => &mut t.two_convex_upper,
        "cotype_lower" => &mut t.cotype_lower,
        "cotype_upper" => &mut t.cotype_upper,
        "type_lower" => &mut t.type_lower,
        "type_upper" => &mut t.type_upper,
        "unconditional_upper" => &mut t.unconditional_upper,
        "e1_lower" => &mut t.e1_lower,
        "e1_upper" => &mut t.e1_upper,
        "cube_qn_lower" => &mut t.cube_qn_lower,
        "cube_qn_upper" => &mut t.cube_qn_upper,
        "khinchine" => &mut t.khinchine,
        "lp_diagonal" => &mut t.lp_diagonal,
        other => return Err(format!("unknown threshold `{other}`")),
    };
    *slot = v;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use multinorm::bodies::Exponent;

    fn write_tmp(name: &str, content: &str) -> std::path::PathBuf {
        let path = std::env::temp_dir().join(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn text_grid_overrides_only_named_keys() {
        let path = write_tmp(
            "grid_text_test.grid",
            "# comment\nn = 4, 8\ns = 2,n\nseed = 7\nthreshold.khinchine = 4.5\n",
        );
        let cfg = load(&path).unwrap();
        assert_eq!(cfg.n_list, vec![4, 8]);
        assert_eq!(cfg.s_list, vec![TermCount::Fixed(2), TermCount::MatchDim]);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.thresholds.khinchine, 4.5);
        // untouched keys keep defaults
        assert_eq!(cfg.n_samples, 100_000);
        assert_eq!(cfg.bodies.len(), 4);
    }

    #[test]
    fn json_grid_is_equivalent() {
        let path = write_tmp(
            "grid_json_test.json",
            r#"{"n": [4, 8], "s": [2, "n"], "seed": 7, "bodies": ["cube", "lp:1.5"],
                "thresholds": {"khinchine": 4.5}}"#,
        );
        let cfg = load(&path).unwrap();
        assert_eq!(cfg.n_list, vec![4, 8]);
        assert_eq!(cfg.s_list, vec![TermCount::Fixed(2), TermCount::MatchDim]);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.thresholds.khinchine, 4.5);
        assert_eq!(cfg.bodies[1], BodyFamily::LpBall(Exponent::Finite(1.5)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let path = write_tmp("grid_bad_key.grid", "dimensions = 4\n");
        let err = load(&path).unwrap_err();
        assert!(err.contains("unknown key"), "{err}");
        let path = write_tmp("grid_bad_thr.grid", "threshold.nope = 1\n");
        let err = load(&path).unwrap_err();
        assert!(err.contains("unknown threshold"), "{err}");
    }
}
