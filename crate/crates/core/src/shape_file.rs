//! Shape files.
//!
//! Two line-oriented formats are accepted:
//!
//! * ASCII art: lines over `#` (occupied) and `.` (empty), rows top to bottom.
//! * Coordinate list: one `x y` pair per line; lines starting with `#` are comments.
//!
//! The format is picked from the first line that does not start with `#`: a digit
//! or sign selects the coordinate list, a `.` selects ASCII art. A file whose
//! nonblank lines all start with `#` is ASCII art.

use crate::error::{Error, Result};
use crate::grid::{Cell, CellSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeFormat {
    Ascii,
    Coordinates,
}

pub fn detect_format(text: &str) -> ShapeFormat {
    for line in text.lines() {
        let Some(first) = line.trim_start().chars().next() else {
            continue;
        };
        if first == '#' {
            continue;
        }
        return if first.is_ascii_digit() || first == '-' || first == '+' {
            ShapeFormat::Coordinates
        } else {
            ShapeFormat::Ascii
        };
    }
    ShapeFormat::Ascii
}

pub fn parse_cells(text: &str) -> Result<CellSet> {
    match detect_format(text) {
        ShapeFormat::Ascii => parse_ascii(text),
        ShapeFormat::Coordinates => parse_coordinates(text),
    }
}

fn parse_ascii(text: &str) -> Result<CellSet> {
    let mut cells = Vec::new();
    for (row, line) in text.lines().enumerate() {
        for (col, ch) in line.trim_end().chars().enumerate() {
            match ch {
                '#' => cells.push(Cell::new(col as i32, row as i32)),
                '.' => {}
                other => {
                    return Err(Error::Malformed {
                        line: row + 1,
                        message: format!("unexpected character {other:?} in ASCII shape"),
                    })
                }
            }
        }
    }
    CellSet::new(cells)
}

fn parse_coordinates(text: &str) -> Result<CellSet> {
    let mut cells = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let mut coord = |name: &str| -> Result<i32> {
            let raw = fields.next().ok_or_else(|| Error::Malformed {
                line: line_no,
                message: format!("missing {name} coordinate"),
            })?;
            raw.parse().map_err(|_| Error::Malformed {
                line: line_no,
                message: format!("{name} coordinate {raw:?} is not an integer"),
            })
        };
        let cell = Cell::new(coord("x")?, coord("y")?);
        if fields.next().is_some() {
            return Err(Error::Malformed {
                line: line_no,
                message: "expected exactly two integers".into(),
            });
        }
        if seen.insert(cell, line_no).is_some() {
            return Err(Error::DuplicateCell {
                line: Some(line_no),
                x: cell.x,
                y: cell.y,
            });
        }
        cells.push(cell);
    }
    CellSet::new(cells)
}

pub fn serialize_cells(cells: &CellSet, format: ShapeFormat) -> String {
    let mut out = String::new();
    match format {
        ShapeFormat::Ascii => {
            let (w, h) = (cells.width() as usize, cells.height() as usize);
            let mut grid = vec![vec![b'.'; w]; h];
            for c in cells.cells() {
                grid[c.y as usize][c.x as usize] = b'#';
            }
            for row in grid {
                out.push_str(std::str::from_utf8(&row).expect("ascii"));
                out.push('\n');
            }
        }
        ShapeFormat::Coordinates => {
            let mut sorted = cells.cells().to_vec();
            sorted.sort_unstable_by_key(|c| (c.y, c.x));
            for c in sorted {
                out.push_str(&format!("{} {}\n", c.x, c.y));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::rect_cells;
    use crate::grid::RectShape;
    use proptest::prelude::*;

    #[test]
    fn parses_ascii_block() {
        let s = parse_cells("##\n##\n").unwrap();
        assert_eq!(s, rect_cells(RectShape::new(2, 2).unwrap()));
        assert_eq!(parse_cells("##\n##").unwrap(), s);
    }

    #[test]
    fn parses_coordinates() {
        let s = parse_cells("0 0\n1 0\n").unwrap();
        assert_eq!(s, CellSet::new([(0, 0), (1, 0)]).unwrap());
        let s = parse_cells("# a domino\n  5 9\n6\t9\n").unwrap();
        assert_eq!(s, CellSet::new([(0, 0), (1, 0)]).unwrap());
        let s = parse_cells("-1 -1\n-1 0\n").unwrap();
        assert_eq!(s, CellSet::new([(0, 0), (0, 1)]).unwrap());
    }

    #[test]
    fn gap_parses_but_is_disconnected() {
        let s = parse_cells("#.#\n").unwrap();
        assert_eq!(s.len(), 2);
        assert!(!s.is_connected());
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            parse_cells("0 0\n1 0\n0 0\n"),
            Err(Error::DuplicateCell { line: Some(3), x: 0, y: 0 })
        );
        assert!(matches!(parse_cells("0 0\n1\n"), Err(Error::Malformed { line: 2, .. })));
        assert!(matches!(parse_cells("0 0\n1 a\n"), Err(Error::Malformed { line: 2, .. })));
        assert!(matches!(parse_cells("0 0 0\n"), Err(Error::Malformed { line: 1, .. })));
        assert!(matches!(parse_cells("#.\n.x\n"), Err(Error::Malformed { line: 2, .. })));
        assert_eq!(parse_cells("...\n"), Err(Error::EmptyShape));
        assert_eq!(parse_cells(""), Err(Error::EmptyShape));
        assert_eq!(parse_cells("# only a comment\n3 4\n").unwrap().len(), 1);
    }

    #[test]
    fn detect() {
        assert_eq!(detect_format("##\n"), ShapeFormat::Ascii);
        assert_eq!(detect_format(".#\n"), ShapeFormat::Ascii);
        assert_eq!(detect_format("# c\n0 0\n"), ShapeFormat::Coordinates);
    }

    fn arb_cells() -> impl Strategy<Value = CellSet> {
        proptest::collection::btree_set((-6i32..6, -6i32..6), 1..20)
            .prop_map(|s| CellSet::new(s).unwrap())
    }

    proptest! {
        #[test]
        fn round_trip_both_formats(cells in arb_cells()) {
            for format in [ShapeFormat::Ascii, ShapeFormat::Coordinates] {
                let text = serialize_cells(&cells, format);
                prop_assert_eq!(detect_format(&text), format);
                let back = parse_cells(&text).unwrap();
                prop_assert_eq!(&back, &cells);
                prop_assert_eq!(serialize_cells(&back, format), text);
            }
        }
    }
}
