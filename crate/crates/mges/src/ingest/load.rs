//! Strict file loading. Every quantification table is validated before
//! any matrix is built: the preamble is skipped, the header row must
//! contain all five configured column names, the data row count must
//! match the chip geometry exactly, and every cell must parse. Errors
//! carry file, line, and column so problems can be located upstream.

use super::config::LoadConfig;
use super::{Channel, LabelTable, RawDataset, SampleSheet};
use crate::matrix::{BoolMatrix, IntMatrix, Matrix};
use crate::{Error, Result};
use std::path::Path;

/// What was read, for the operator's log.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    /// (file name, data rows parsed)
    pub files: Vec<(String, usize)>,
    pub notes: Vec<String>,
}

/// Split one delimited line; double quotes protect separators and are
/// stripped, doubled quotes inside a quoted field unescape to one.
fn split_line(line: &str, sep: char) -> std::result::Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut field = String::new();
    let mut chars = line.chars().peekable();
    let mut in_quotes = false;
    while let Some(c) = chars.next() {
        if in_quotes {
            if c == '"' {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    field.push('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push(c);
            }
        } else if c == '"' {
            if field.is_empty() {
                in_quotes = true;
            } else {
                return Err("unexpected quote inside unquoted field".to_string());
            }
        } else if c == sep {
            fields.push(std::mem::take(&mut field));
        } else {
            field.push(c);
        }
    }
    if in_quotes {
        return Err("unterminated quoted field".to_string());
    }
    fields.push(field);
    Ok(fields)
}

#[derive(Debug)]
pub(crate) struct DelimitedTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// 1-based file line number of each data row.
    pub row_lines: Vec<usize>,
}

pub(crate) fn read_delimited(path: &Path, sep: char, skip: usize) -> Result<DelimitedTable> {
    let file_name = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|_| Error::MissingFile { path: file_name.clone() })?;
    let mut lines = text.lines().enumerate().skip(skip);
    let (header_idx, header_line) = lines
        .next()
        .ok_or_else(|| Error::Line {
            file: file_name.clone(),
            line: skip,
            message: "no header row after skipped preamble".to_string(),
        })?;
    let headers = split_line(header_line, sep).map_err(|message| Error::Line {
        file: file_name.clone(),
        line: header_idx + 1,
        message,
    })?;
    let mut rows = Vec::new();
    let mut row_lines = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_line(line, sep).map_err(|message| Error::Line {
            file: file_name.clone(),
            line: idx + 1,
            message,
        })?;
        if fields.len() != headers.len() {
            return Err(Error::Line {
                file: file_name.clone(),
                line: idx + 1,
                message: format!(
                    "expected {} fields, found {}",
                    headers.len(),
                    fields.len()
                ),
            });
        }
        rows.push(fields);
        row_lines.push(idx + 1);
    }
    Ok(DelimitedTable { headers, rows, row_lines })
}

fn column_index(table: &DelimitedTable, file: &str, name: &str) -> Result<usize> {
    table
        .headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn { file: file.to_string(), column: name.to_string() })
}

struct QuantColumns {
    ch1_fg: usize,
    ch1_bg: usize,
    ch2_fg: usize,
    ch2_bg: usize,
    flags: usize,
}

fn parse_intensity(
    raw: &str,
    file: &str,
    line: usize,
    column: &str,
) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Cell {
        file: file.to_string(),
        line,
        column: column.to_string(),
        message: format!("cannot parse `{raw}` as a number"),
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Cell {
            file: file.to_string(),
            line,
            column: column.to_string(),
            message: format!("intensity must be finite and >= 0, got {v}"),
        });
    }
    Ok(v)
}

/// Load the full dataset described by a config: sample sheet, gene map,
/// and one quantification table per chip. The returned dataset has every
/// spot selected and none marked bad.
pub fn load_dataset(cfg: &LoadConfig) -> Result<(RawDataset, LoadReport)> {
    let mut report = LoadReport::default();
    let spots = cfg.grid.spots();

    // sample sheet: fileName, interestChannel, then label columns
    let sheet_path = cfg.data_path(&cfg.sample_file);
    let sheet_file = sheet_path.display().to_string();
    let sheet = read_delimited(&sheet_path, cfg.sep, 0)?;
    if sheet.headers.first().map(String::as_str) != Some("fileName") {
        return Err(Error::MissingColumn { file: sheet_file.clone(), column: "fileName".into() });
    }
    if sheet.headers.get(1).map(String::as_str) != Some("interestChannel") {
        return Err(Error::MissingColumn {
            file: sheet_file.clone(),
            column: "interestChannel".into(),
        });
    }
    let mut file_names = Vec::new();
    let mut interest = Vec::new();
    for (row, line) in sheet.rows.iter().zip(&sheet.row_lines) {
        if file_names.contains(&row[0]) {
            return Err(Error::Line {
                file: sheet_file.clone(),
                line: *line,
                message: format!("duplicate fileName `{}`", row[0]),
            });
        }
        file_names.push(row[0].clone());
        interest.push(Channel::parse(&row[1]).map_err(|_| Error::Cell {
            file: sheet_file.clone(),
            line: *line,
            column: "interestChannel".into(),
            message: format!("must be ch1 or ch2, got `{}`", row[1]),
        })?);
    }
    let label_names: Vec<String> = sheet.headers[2..].to_vec();
    let label_columns: Vec<Vec<String>> = (0..label_names.len())
        .map(|i| sheet.rows.iter().map(|r| r[i + 2].clone()).collect())
        .collect();
    let samples = SampleSheet {
        file_names: file_names.clone(),
        interest,
        labels: LabelTable::new(label_names, label_columns),
    };
    report.files.push((cfg.sample_file.clone(), sheet.rows.len()));

    // gene map: header row of label names, one row per spot in scan order
    let map_path = cfg.data_path(&cfg.gene_map);
    let map_file = map_path.display().to_string();
    let map = read_delimited(&map_path, cfg.sep, 0)?;
    if map.rows.len() != spots {
        return Err(Error::RowCount { file: map_file, expected: spots, found: map.rows.len() });
    }
    let gene_columns: Vec<Vec<String>> = (0..map.headers.len())
        .map(|i| map.rows.iter().map(|r| r[i].clone()).collect())
        .collect();
    let gene_map = LabelTable::new(map.headers.clone(), gene_columns);
    report.files.push((cfg.gene_map.clone(), map.rows.len()));

    // quantification tables, one per chip, in sample-sheet order
    let chips = samples.chips();
    let mut ch1_fg = Matrix::filled(spots, chips, 0.0);
    let mut ch1_bg = Matrix::filled(spots, chips, 0.0);
    let mut ch2_fg = Matrix::filled(spots, chips, 0.0);
    let mut ch2_bg = Matrix::filled(spots, chips, 0.0);
    let mut flags = IntMatrix::filled(spots, chips, 0);
    for (chip, file_name) in file_names.iter().enumerate() {
        let path = cfg.quant_path(file_name);
        let file = path.display().to_string();
        let table = read_delimited(&path, cfg.sep, cfg.skip)?;
        if table.rows.len() != spots {
            return Err(Error::RowCount { file, expected: spots, found: table.rows.len() });
        }
        let cols = QuantColumns {
            ch1_fg: column_index(&table, &file, &cfg.headers[0])?,
            ch1_bg: column_index(&table, &file, &cfg.headers[1])?,
            ch2_fg: column_index(&table, &file, &cfg.headers[2])?,
            ch2_bg: column_index(&table, &file, &cfg.headers[3])?,
            flags: column_index(&table, &file, &cfg.headers[4])?,
        };
        for (s, (row, line)) in table.rows.iter().zip(&table.row_lines).enumerate() {
            ch1_fg.set(s, chip, parse_intensity(&row[cols.ch1_fg], &file, *line, &cfg.headers[0])?);
            ch1_bg.set(s, chip, parse_intensity(&row[cols.ch1_bg], &file, *line, &cfg.headers[1])?);
            ch2_fg.set(s, chip, parse_intensity(&row[cols.ch2_fg], &file, *line, &cfg.headers[2])?);
            ch2_bg.set(s, chip, parse_intensity(&row[cols.ch2_bg], &file, *line, &cfg.headers[3])?);
            let flag_raw = row[cols.flags].trim();
            let flag: i64 = flag_raw.parse().or_else(|_| {
                // some scanners write flags as decimals
                flag_raw
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.fract() == 0.0)
                    .map(|v| v as i64)
                    .ok_or(())
            }).map_err(|_| Error::Cell {
                file: file.clone(),
                line: *line,
                column: cfg.headers[4].clone(),
                message: format!("cannot parse `{flag_raw}` as an integer flag"),
            })?;
            flags.set(s, chip, flag);
        }
        report.files.push((file_name.clone(), table.rows.len()));
    }

    let dataset = RawDataset {
        ch1_fg,
        ch1_bg,
        ch2_fg,
        ch2_bg,
        flags,
        use_spot: BoolMatrix::filled(spots, chips, true),
        bad_spot: vec![false; spots],
        gene_map,
        samples,
        gene_groups: Vec::new(),
        gene_networks: Vec::new(),
        grid: cfg.grid,
        dataset_id: cfg.dataset_id.clone(),
        notes: String::new(),
    };
    Ok((dataset, report))
}

/// Gene-group file: one label per line, `#` starts a comment.
pub fn read_group_file(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| Error::MissingFile { path: path.display().to_string() })?;
    let mut members = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if !line.is_empty() {
            members.push(line.to_string());
        }
    }
    Ok(members)
}

/// Network file: two whitespace-separated labels per line (one undirected
/// edge), `#` starts a comment.
pub fn read_network_file(path: &Path) -> Result<Vec<(String, String)>> {
    let file = path.display().to_string();
    let text =
        std::fs::read_to_string(path).map_err(|_| Error::MissingFile { path: file.clone() })?;
    let mut edges = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => edges.push((a.to_string(), b.to_string())),
            _ => {
                return Err(Error::Line {
                    file,
                    line: idx + 1,
                    message: format!("expected two labels per line, got `{line}`"),
                })
            }
        }
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_config, GridGeometry};
    use std::fmt::Write as _;

    /// Write a complete synthetic dataset into `dir` and return the config.
    /// `mutate` can corrupt one quant file's text before it is written.
    pub(crate) fn write_fixture(
        dir: &Path,
        grid: GridGeometry,
        chips: usize,
        mutate: impl Fn(usize, String) -> String,
    ) -> LoadConfig {
        let spots = grid.spots();
        let data = dir.join("data");
        std::fs::create_dir_all(&data).unwrap();

        let mut sheet = String::from("fileName,interestChannel,Sample,Type\n");
        for c in 0..chips {
            let channel = if c % 2 == 0 { "ch1" } else { "ch2" };
            let ty = if c < chips / 2 { "Col" } else { "Sq" };
            writeln!(sheet, "chip{c:02}.csv,{channel},S{c:02},{ty}").unwrap();
        }
        std::fs::write(data.join("samples.csv"), sheet).unwrap();

        let mut map = String::from("Name,GeneName\n");
        for s in 0..spots {
            writeln!(map, "SPOT{s:04},GENE{:03}", s / 2).unwrap();
        }
        std::fs::write(data.join("genemap.csv"), map).unwrap();

        for c in 0..chips {
            let mut quant = String::new();
            quant.push_str("junk preamble line 1\njunk 2\n");
            quant.push_str("Block,Ch1 Mean,Ch1 B Mean,Ch2 Mean,Ch2 B Mean,Flags\n");
            for s in 0..spots {
                let base = 100.0 + s as f64 + c as f64 * 10.0;
                writeln!(
                    quant,
                    "1,{},{},{},{},{}",
                    base * 2.0,
                    50.0,
                    base * 1.5,
                    40.0,
                    if s == 0 { -50 } else { 0 }
                )
                .unwrap();
            }
            std::fs::write(data.join(format!("chip{c:02}.csv")), mutate(c, quant)).unwrap();
        }

        let text = format!(
            "dataDir = \"data\"\next = NULL\nsampleFile = \"samples.csv\"\n\
             datasetId = \"fixture\"\ngeneMap = \"genemap.csv\"\n\
             headers = c('Ch1 Mean', 'Ch1 B Mean', 'Ch2 Mean', 'Ch2 B Mean', 'Flags')\n\
             skip = 2\nsep = \",\"\ngridR = {}\ngridC = {}\nprintTipR = {}\nprintTipC = {}\n",
            grid.grid_r, grid.grid_c, grid.tip_r, grid.tip_c
        );
        let mut cfg = parse_config(&text).unwrap();
        cfg.base_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn loads_a_16_spot_fixture_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridGeometry { grid_r: 2, grid_c: 2, tip_r: 2, tip_c: 2 };
        let cfg = write_fixture(dir.path(), grid, 2, |_, s| s);
        let (ds, report) = load_dataset(&cfg).unwrap();
        assert_eq!(ds.spots(), 16);
        assert_eq!(ds.chips(), 2);
        assert_eq!(ds.ch1_fg.at(0, 0), 200.0);
        assert_eq!(ds.ch1_fg.at(3, 1), (100.0 + 3.0 + 10.0) * 2.0);
        assert_eq!(ds.ch2_bg.at(5, 0), 40.0);
        assert_eq!(*ds.flags.get(0, 1), -50);
        assert_eq!(*ds.flags.get(1, 1), 0);
        assert!(ds.use_spot.data().iter().all(|&b| b));
        assert!(ds.bad_spot.iter().all(|&b| !b));
        // report lists sample sheet, gene map, and both chips
        assert_eq!(report.files.len(), 4);
    }

    #[test]
    fn loading_twice_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridGeometry { grid_r: 1, grid_c: 2, tip_r: 2, tip_c: 2 };
        let cfg = write_fixture(dir.path(), grid, 3, |_, s| s);
        let (a, _) = load_dataset(&cfg).unwrap();
        let (b, _) = load_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.ch1_fg.bits_eq(&b.ch1_fg));
    }

    #[test]
    fn deleted_row_is_reported_with_the_file_name() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridGeometry { grid_r: 2, grid_c: 2, tip_r: 2, tip_c: 2 };
        let cfg = write_fixture(dir.path(), grid, 2, |c, s| {
            if c == 1 {
                // drop the final data row
                let mut lines: Vec<&str> = s.lines().collect();
                lines.pop();
                lines.join("\n") + "\n"
            } else {
                s
            }
        });
        let err = load_dataset(&cfg).unwrap_err();
        match err {
            Error::RowCount { file, expected, found } => {
                assert!(file.contains("chip01"), "error names the file: {file}");
                assert_eq!(expected, 16);
                assert_eq!(found, 15);
            }
            other => panic!("expected RowCount, got {other}"),
        }
    }

    #[test]
    fn corrupted_cell_is_located() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridGeometry { grid_r: 1, grid_c: 1, tip_r: 2, tip_c: 2 };
        let cfg = write_fixture(dir.path(), grid, 1, |_, s| s.replace("150,", "1x0,"));
        let err = load_dataset(&cfg).unwrap_err();
        match err {
            Error::Cell { file, line, column, .. } => {
                assert!(file.contains("chip00"));
                assert!(line >= 4, "line is in the data region, got {line}");
                assert!(!column.is_empty());
            }
            other => panic!("expected Cell, got {other}"),
        }
    }

    #[test]
    fn extra_delimiter_is_a_located_error() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridGeometry { grid_r: 1, grid_c: 1, tip_r: 2, tip_c: 2 };
        let cfg = write_fixture(dir.path(), grid, 1, |_, s| {
            // inject an extra comma into the first data row
            s.replacen("1,200,", "1,,200,", 1)
        });
        let err = load_dataset(&cfg).unwrap_err();
        assert!(matches!(err, Error::Line { .. }), "got {err}");
    }

    #[test]
    fn missing_column_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridGeometry { grid_r: 1, grid_c: 1, tip_r: 2, tip_c: 2 };
        let cfg = write_fixture(dir.path(), grid, 1, |_, s| s.replace("Ch2 B Mean", "Ch2 B"));
        assert!(matches!(load_dataset(&cfg), Err(Error::MissingColumn { .. })));

        let cfg2 = write_fixture(dir.path(), grid, 2, |_, s| s);
        std::fs::remove_file(dir.path().join("data").join("chip01.csv")).unwrap();
        assert!(matches!(load_dataset(&cfg2), Err(Error::MissingFile { .. })));
    }

    #[test]
    fn gastro_shaped_load_gives_500_by_40() {
        let dir = tempfile::tempdir().unwrap();
        // 5 * 2 * 25 * 2 = 500 spots
        let grid = GridGeometry { grid_r: 5, grid_c: 2, tip_r: 25, tip_c: 2 };
        let cfg = write_fixture(dir.path(), grid, 40, |_, s| s);
        let (ds, _) = load_dataset(&cfg).unwrap();
        assert_eq!(ds.ch1_fg.rows(), 500);
        assert_eq!(ds.ch1_fg.cols(), 40);
    }

    #[test]
    fn group_and_network_files_parse() {
        let dir = tempfile::tempdir().unwrap();
        let gpath = dir.path().join("g.txt");
        std::fs::write(&gpath, "# cell cycle\nGENE001\nGENE002 # trailing\n\nGENE003\n").unwrap();
        assert_eq!(read_group_file(&gpath).unwrap(), vec!["GENE001", "GENE002", "GENE003"]);
        let npath = dir.path().join("n.txt");
        std::fs::write(&npath, "GENE001 GENE002\nGENE002\tGENE003\n").unwrap();
        assert_eq!(
            read_network_file(&npath).unwrap(),
            vec![
                ("GENE001".to_string(), "GENE002".to_string()),
                ("GENE002".to_string(), "GENE003".to_string())
            ]
        );
        std::fs::write(&npath, "GENE001 GENE002 GENE003\n").unwrap();
        assert!(read_network_file(&npath).is_err());
    }

    #[test]
    fn quoted_fields_are_respected() {
        let fields = split_line("a,\"b,c\",\"d\"\"e\",f", ',').unwrap();
        assert_eq!(fields, vec!["a", "b,c", "d\"e", "f"]);
        assert!(split_line("\"open", ',').is_err());
    }
}
