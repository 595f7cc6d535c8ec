//! Load-config parser. The config is `key = value` lines where values are
//! quoted strings, integers, `NULL`, or `c("a", "b", ...)` string vectors.
//! Unknown keys are rejected; the legacy key `dridC` is accepted as an
//! alias for `gridC`.

use crate::ingest::GridGeometry;
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Parsed load configuration. Paths are resolved lazily against
/// `base_dir` (the config file's directory): `data_dir` relative to
/// `base_dir`, the sample sheet / gene map / quantification files relative
/// to `data_dir`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadConfig {
    pub data_dir: String,
    pub ext: Option<String>,
    pub sample_file: String,
    pub dataset_id: String,
    pub gene_map: String,
    pub headers: [String; 5],
    pub skip: usize,
    pub sep: char,
    pub grid: GridGeometry,
    pub base_dir: PathBuf,
}

impl LoadConfig {
    pub fn data_path(&self, file: &str) -> PathBuf {
        self.base_dir.join(&self.data_dir).join(file)
    }

    pub fn quant_path(&self, file_name: &str) -> PathBuf {
        match &self.ext {
            Some(ext) => self.data_path(&format!("{file_name}{ext}")),
            None => self.data_path(file_name),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Str(String),
    Int(i64),
    Null,
    Vector(Vec<String>),
}

fn unquote(raw: &str, line: usize) -> Result<String> {
    let bytes: Vec<char> = raw.chars().collect();
    if bytes.len() < 2 {
        return Err(Error::Config { line, message: format!("unterminated string `{raw}`") });
    }
    let quote = bytes[0];
    if *bytes.last().unwrap() != quote {
        return Err(Error::Config { line, message: format!("unterminated string `{raw}`") });
    }
    let mut out = String::new();
    let inner = &bytes[1..bytes.len() - 1];
    let mut i = 0;
    while i < inner.len() {
        let c = inner[i];
        if c == quote {
            return Err(Error::Config {
                line,
                message: format!("stray quote inside string `{raw}`"),
            });
        }
        if c == '\\' && i + 1 < inner.len() {
            i += 1;
            out.push(match inner[i] {
                't' => '\t',
                'n' => '\n',
                '\\' => '\\',
                '\'' => '\'',
                '"' => '"',
                other => {
                    return Err(Error::Config {
                        line,
                        message: format!("unknown escape `\\{other}`"),
                    })
                }
            });
        } else {
            out.push(c);
        }
        i += 1;
    }
    Ok(out)
}

fn parse_value(raw: &str, line: usize) -> Result<Value> {
    let raw = raw.trim();
    if raw == "NULL" {
        return Ok(Value::Null);
    }
    if raw.starts_with('"') || raw.starts_with('\'') {
        return Ok(Value::Str(unquote(raw, line)?));
    }
    if raw.starts_with("c(") {
        if !raw.ends_with(')') {
            return Err(Error::Config { line, message: format!("malformed vector `{raw}`") });
        }
        let inner = &raw[2..raw.len() - 1];
        let mut items = Vec::new();
        let mut in_quote: Option<char> = None;
        let mut start = 0;
        let chars: Vec<char> = inner.chars().collect();
        let mut pieces = Vec::new();
        for (i, &c) in chars.iter().enumerate() {
            match in_quote {
                Some(q) => {
                    if c == q && (i == 0 || chars[i - 1] != '\\') {
                        in_quote = None;
                    }
                }
                None => {
                    if c == '"' || c == '\'' {
                        in_quote = Some(c);
                    } else if c == ',' {
                        pieces.push(chars[start..i].iter().collect::<String>());
                        start = i + 1;
                    }
                }
            }
        }
        if in_quote.is_some() {
            return Err(Error::Config { line, message: format!("malformed vector `{raw}`") });
        }
        pieces.push(chars[start..].iter().collect::<String>());
        for piece in pieces {
            let piece = piece.trim();
            if piece.is_empty() {
                return Err(Error::Config {
                    line,
                    message: "empty element in vector".to_string(),
                });
            }
            if !(piece.starts_with('"') || piece.starts_with('\'')) {
                return Err(Error::Config {
                    line,
                    message: format!("vector element `{piece}` is not a quoted string"),
                });
            }
            items.push(unquote(piece, line)?);
        }
        return Ok(Value::Vector(items));
    }
    match raw.parse::<i64>() {
        Ok(v) => Ok(Value::Int(v)),
        Err(_) => Err(Error::Config { line, message: format!("cannot parse value `{raw}`") }),
    }
}

const KNOWN_KEYS: &[&str] = &[
    "dataDir", "ext", "sampleFile", "datasetId", "geneMap", "headers", "skip", "sep", "gridR",
    "gridC", "printTipR", "printTipC",
];

/// Parse config text. Relative paths resolve against `.`; use
/// [`parse_config_file`] to anchor them at the config's directory.
pub fn parse_config(text: &str) -> Result<LoadConfig> {
    parse_config_with_base(text, PathBuf::from("."))
}

/// Read and parse a config file; relative paths resolve against its parent
/// directory.
pub fn parse_config_file(path: &Path) -> Result<LoadConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| Error::MissingFile { path: path.display().to_string() })?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    parse_config_with_base(&text, base)
}

fn parse_config_with_base(text: &str, base_dir: PathBuf) -> Result<LoadConfig> {
    let mut seen: BTreeMap<String, (Value, usize)> = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(Error::Config {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key_raw = line[..eq].trim();
        // legacy alias from old configs
        let key = if key_raw == "dridC" { "gridC" } else { key_raw };
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::UnknownKey { key: key_raw.to_string(), line: line_no });
        }
        let value = parse_value(&line[eq + 1..], line_no)?;
        if seen.contains_key(key) {
            return Err(Error::DuplicateKey { key: key.to_string(), line: line_no });
        }
        seen.insert(key.to_string(), (value, line_no));
    }

    let mut take = |key: &str| -> Result<(Value, usize)> {
        seen.remove(key).ok_or_else(|| Error::MissingKey { key: key.to_string() })
    };
    let string_of = |key: &str, v: (Value, usize)| -> Result<String> {
        match v.0 {
            Value::Str(s) => Ok(s),
            _ => Err(Error::Config {
                line: v.1,
                message: format!("`{key}` must be a quoted string"),
            }),
        }
    };
    let positive_of = |key: &str, v: (Value, usize)| -> Result<usize> {
        match v.0 {
            Value::Int(i) if i > 0 => Ok(i as usize),
            Value::Int(i) => Err(Error::Config {
                line: v.1,
                message: format!("`{key}` must be a positive integer, got {i}"),
            }),
            _ => Err(Error::Config { line: v.1, message: format!("`{key}` must be an integer") }),
        }
    };

    let data_dir = string_of("dataDir", take("dataDir")?)?;
    let ext = match take("ext")? {
        (Value::Null, _) => None,
        (Value::Str(s), _) => Some(s),
        (_, line) => {
            return Err(Error::Config {
                line,
                message: "`ext` must be a quoted string or NULL".to_string(),
            })
        }
    };
    let sample_file = string_of("sampleFile", take("sampleFile")?)?;
    let dataset_id = string_of("datasetId", take("datasetId")?)?;
    let gene_map = string_of("geneMap", take("geneMap")?)?;
    let headers_v = take("headers")?;
    let headers: [String; 5] = match headers_v.0 {
        Value::Vector(items) if items.len() == 5 => {
            let mut uniq = items.clone();
            uniq.sort();
            uniq.dedup();
            if uniq.len() != 5 {
                return Err(Error::Config {
                    line: headers_v.1,
                    message: "`headers` entries must be distinct".to_string(),
                });
            }
            items.try_into().unwrap()
        }
        Value::Vector(items) => {
            return Err(Error::Config {
                line: headers_v.1,
                message: format!("`headers` must have exactly 5 entries, got {}", items.len()),
            })
        }
        _ => {
            return Err(Error::Config {
                line: headers_v.1,
                message: "`headers` must be a c(...) vector".to_string(),
            })
        }
    };
    let skip = match take("skip")? {
        (Value::Int(i), _) if i >= 0 => i as usize,
        (_, line) => {
            return Err(Error::Config {
                line,
                message: "`skip` must be a nonnegative integer".to_string(),
            })
        }
    };
    let sep_v = take("sep")?;
    let sep_line = sep_v.1;
    let sep_s = string_of("sep", sep_v)?;
    let mut sep_chars = sep_s.chars();
    let sep = match (sep_chars.next(), sep_chars.next()) {
        (Some(c), None) => c,
        _ => {
            return Err(Error::Config {
                line: sep_line,
                message: format!("`sep` must be a single character, got `{sep_s}`"),
            })
        }
    };
    let grid = GridGeometry {
        grid_r: positive_of("gridR", take("gridR")?)?,
        grid_c: positive_of("gridC", take("gridC")?)?,
        tip_r: positive_of("printTipR", take("printTipR")?)?,
        tip_c: positive_of("printTipC", take("printTipC")?)?,
    };

    Ok(LoadConfig {
        data_dir,
        ext,
        sample_file,
        dataset_id,
        gene_map,
        headers,
        skip,
        sep,
        grid,
        base_dir,
    })
}
