//! Readers and writers for the MovingAI benchmark formats: `.map` grid
//! files and `.scen` scenario files.

use std::fmt;

use thiserror::Error;

use crate::grid::{Agent, GridMap, Instance, InstanceError, Position};

/// Cells an agent may stand on: plain ground, ground near a goal region,
/// and swamp (unit cost here).
const PASSABLE: [char; 3] = ['.', 'G', 'S'];
/// Blocked cells: out-of-bounds filler, obstacles, trees, and water.
const BLOCKED: [char; 4] = ['@', 'O', 'T', 'W'];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapParseError {
    #[error("line {line}: expected '{expected}'")]
    BadHeader { line: usize, expected: &'static str },
    #[error("line {line}: '{key}' wants a positive integer, got '{value}'")]
    BadDimension {
        line: usize,
        key: &'static str,
        value: String,
    },
    #[error("line {line}: row has {actual} glyphs, expected {expected}")]
    BadRowLength {
        line: usize,
        expected: usize,
        actual: usize,
    },
    #[error("line {line}: unknown glyph '{glyph}'")]
    UnknownGlyph { line: usize, glyph: char },
    #[error("map body ended after {actual} rows, expected {expected}")]
    MissingRows { expected: usize, actual: usize },
    #[error("grid is unusable: {0}")]
    BadGrid(#[from] crate::grid::GridError),
}

/// Parses a MovingAI `.map` file:
///
/// ```text
/// type octile
/// height 3
/// width 4
/// map
/// .@..
/// ....
/// ..T.
/// ```
///
/// `.`, `G`, `S` are passable; `@`, `O`, `T`, `W` are blocked. Errors carry
/// the offending 1-based line number.
pub fn parse_map(text: &str) -> Result<GridMap, MapParseError> {
    let mut lines = text.lines().enumerate();

    let mut expect = |expected: &'static str| -> Result<(usize, String), MapParseError> {
        match lines.next() {
            Some((idx, line)) => {
                let line = line.trim_end();
                if expected == "map" {
                    if line != "map" {
                        return Err(MapParseError::BadHeader {
                            line: idx + 1,
                            expected,
                        });
                    }
                    Ok((idx + 1, String::new()))
                } else if let Some(rest) = line.strip_prefix(expected) {
                    Ok((idx + 1, rest.trim().to_string()))
                } else {
                    Err(MapParseError::BadHeader {
                        line: idx + 1,
                        expected,
                    })
                }
            }
            None => Err(MapParseError::BadHeader { line: 0, expected }),
        }
    };

    expect("type")?;
    let (line_no, value) = expect("height")?;
    let height: u32 = value.parse().ok().filter(|&h| h > 0).ok_or_else(|| {
        MapParseError::BadDimension {
            line: line_no,
            key: "height",
            value,
        }
    })?;
    let (line_no, value) = expect("width")?;
    let width: u32 = value.parse().ok().filter(|&w| w > 0).ok_or_else(|| {
        MapParseError::BadDimension {
            line: line_no,
            key: "width",
            value,
        }
    })?;
    expect("map")?;

    let mut passable = Vec::with_capacity(width as usize * height as usize);
    let mut rows = 0usize;
    for (idx, line) in lines {
        let line = line.trim_end_matches(['\r', ' ']);
        if rows == height as usize {
            break;
        }
        let mut row_len = 0usize;
        for glyph in line.chars() {
            if PASSABLE.contains(&glyph) {
                passable.push(true);
            } else if BLOCKED.contains(&glyph) {
                passable.push(false);
            } else {
                return Err(MapParseError::UnknownGlyph {
                    line: idx + 1,
                    glyph,
                });
            }
            row_len += 1;
        }
        if row_len != width as usize {
            return Err(MapParseError::BadRowLength {
                line: idx + 1,
                expected: width as usize,
                actual: row_len,
            });
        }
        rows += 1;
    }
    if rows != height as usize {
        return Err(MapParseError::MissingRows {
            expected: height as usize,
            actual: rows,
        });
    }
    Ok(GridMap::new(width, height, passable)?)
}

/// Serializes a grid back to `.map` text, using `.` and `@` only.
/// Round-trips passability with [`parse_map`].
pub fn write_map(map: &GridMap) -> String {
    let mut out = String::new();
    out.push_str("type octile\n");
    out.push_str(&format!("height {}\n", map.height()));
    out.push_str(&format!("width {}\n", map.width()));
    out.push_str("map\n");
    for y in 0..map.height() {
        for x in 0..map.width() {
            out.push(if map.is_passable(Position::new(x, y)) {
                '.'
            } else {
                '@'
            });
        }
        out.push('\n');
    }
    out
}

/// One scenario record: an agent's endpoints on a named map. The optimal
/// length column is `-1` when unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenRecord {
    pub bucket: u32,
    pub map_name: String,
    pub width: u32,
    pub height: u32,
    pub start: Position,
    pub goal: Position,
    pub optimal_length: Option<f64>,
}

/// A parsed scenario file: an ordered list of records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioFile {
    pub records: Vec<ScenRecord>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenParseError {
    #[error("line {line}: expected 9 fields, got {fields}")]
    BadFieldCount { line: usize, fields: usize },
    #[error("line {line}: field '{field}' is not a number: '{value}'")]
    BadNumber {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: {which} ({x},{y}) lies outside the {width}x{height} map")]
    OutOfBounds {
        line: usize,
        which: &'static str,
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },
}

/// Parses a `.scen` file: an optional `version` line, then one record per
/// line with tab- or space-separated fields
/// `bucket map width height start-x start-y goal-x goal-y optimal`.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenParseError> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("version") {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 9 {
            return Err(ScenParseError::BadFieldCount {
                line: idx + 1,
                fields: fields.len(),
            });
        }
        let num = |field: &'static str, value: &str| -> Result<u32, ScenParseError> {
            value.parse().map_err(|_| ScenParseError::BadNumber {
                line: idx + 1,
                field,
                value: value.to_string(),
            })
        };
        let bucket = num("bucket", fields[0])?;
        let width = num("width", fields[2])?;
        let height = num("height", fields[3])?;
        let sx = num("start-x", fields[4])?;
        let sy = num("start-y", fields[5])?;
        let gx = num("goal-x", fields[6])?;
        let gy = num("goal-y", fields[7])?;
        let optimal: f64 = fields[8].parse().map_err(|_| ScenParseError::BadNumber {
            line: idx + 1,
            field: "optimal",
            value: fields[8].to_string(),
        })?;
        for (which, x, y) in [("start", sx, sy), ("goal", gx, gy)] {
            if x >= width || y >= height {
                return Err(ScenParseError::OutOfBounds {
                    line: idx + 1,
                    which,
                    x,
                    y,
                    width,
                    height,
                });
            }
        }
        records.push(ScenRecord {
            bucket,
            map_name: fields[1].to_string(),
            width,
            height,
            start: Position::new(sx, sy),
            goal: Position::new(gx, gy),
            optimal_length: (optimal >= 0.0).then_some(optimal),
        });
    }
    Ok(ScenarioFile { records })
}

/// Serializes a scenario with a `version 1` header and tab-separated
/// records.
pub fn write_scenario(scenario: &ScenarioFile) -> String {
    let mut out = String::from("version 1\n");
    for r in &scenario.records {
        let optimal = match r.optimal_length {
            Some(len) => format!("{len}"),
            None => "-1".to_string(),
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.bucket, r.map_name, r.width, r.height, r.start.x, r.start.y, r.goal.x, r.goal.y,
            optimal
        ));
    }
    out
}

#[derive(Debug, Error)]
pub enum ScenInstanceError {
    #[error("scenario names a {exp_w}x{exp_h} map but the map is {got_w}x{got_h}")]
    DimensionMismatch {
        exp_w: u32,
        exp_h: u32,
        got_w: u32,
        got_h: u32,
    },
    #[error("not enough records: wanted {wanted}, found {found}")]
    NotEnoughRecords { wanted: usize, found: usize },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

impl fmt::Display for ScenarioFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} records", self.records.len())
    }
}

/// Builds one instance from a slice of scenario records.
pub fn instance_from_records(
    map: &GridMap,
    records: &[ScenRecord],
) -> Result<Instance, ScenInstanceError> {
    for r in records {
        if r.width != map.width() || r.height != map.height() {
            return Err(ScenInstanceError::DimensionMismatch {
                exp_w: r.width,
                exp_h: r.height,
                got_w: map.width(),
                got_h: map.height(),
            });
        }
    }
    let agents: Vec<Agent> = records
        .iter()
        .map(|r| Agent {
            start: r.start,
            goal: r.goal,
        })
        .collect();
    Ok(Instance::new(map.clone(), agents)?)
}

/// Splits a scenario into consecutive chunks of `agents_per_instance`
/// records and builds an instance from each full chunk.
pub fn instances_from_scenario(
    map: &GridMap,
    scenario: &ScenarioFile,
    agents_per_instance: usize,
) -> Vec<Result<Instance, ScenInstanceError>> {
    scenario
        .records
        .chunks_exact(agents_per_instance)
        .map(|chunk| instance_from_records(map, chunk))
        .collect()
}
