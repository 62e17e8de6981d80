//! Plain-text mesh format.
//!
//! ```text
//! nodes N elements E
//! id x y                                   (N lines)
//! id n1 n2 n3 n4 n5 n6 mat_q1 mat_q2 mat_q3 (E lines)
//! ```
//!
//! Ids are zero-based and must appear in order. Material labels are 1 for the
//! matrix and 2 for inclusions. Coordinates are written with the shortest
//! representation that round-trips exactly.

use super::{GeometryError, Mesh, Phase};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

impl Mesh {
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut s = String::new();
        writeln!(s, "nodes {} elements {}", self.node_count(), self.element_count()).ok();
        for (i, p) in self.nodes().iter().enumerate() {
            writeln!(s, "{i} {} {}", p[0], p[1]).ok();
        }
        for (i, (conn, mat)) in self.elements().iter().zip(self.gauss_material()).enumerate() {
            write!(s, "{i}").ok();
            for n in conn {
                write!(s, " {n}").ok();
            }
            for m in mat {
                write!(s, " {}", m.label()).ok();
            }
            s.push('\n');
        }
        w.write_all(s.as_bytes())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Mesh, GeometryError> {
        let mut lines = r.lines().enumerate();
        let parse_err = |line: usize, message: String| GeometryError::Parse {
            line: line + 1,
            message,
        };
        let (hl, header) = lines.next().ok_or_else(|| parse_err(0, "empty file".into()))?;
        let header = header?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "nodes" || h[2] != "elements" {
            return Err(parse_err(hl, format!("expected `nodes N elements E`, got `{header}`")));
        }
        let n: usize = h[1].parse().map_err(|e| parse_err(hl, format!("node count: {e}")))?;
        let ne: usize = h[3].parse().map_err(|e| parse_err(hl, format!("element count: {e}")))?;
        let mut nodes = Vec::with_capacity(n);
        let mut elements = Vec::with_capacity(ne);
        let mut mats = Vec::with_capacity(ne);
        for k in 0..n + ne {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| parse_err(k + 1, "unexpected end of file".into()))?;
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            let id: usize = f
                .first()
                .ok_or_else(|| parse_err(ln, "empty line".into()))?
                .parse()
                .map_err(|e| parse_err(ln, format!("id: {e}")))?;
            if k < n {
                if f.len() != 3 || id != k {
                    return Err(parse_err(ln, format!("expected `{k} x y`, got `{line}`")));
                }
                let x: f64 = f[1].parse().map_err(|e| parse_err(ln, format!("x: {e}")))?;
                let y: f64 = f[2].parse().map_err(|e| parse_err(ln, format!("y: {e}")))?;
                nodes.push([x, y]);
            } else {
                if f.len() != 10 || id != k - n {
                    return Err(parse_err(ln, format!("expected element `{}` with 9 fields", k - n)));
                }
                let mut conn = [0usize; 6];
                for (c, s) in conn.iter_mut().zip(&f[1..7]) {
                    *c = s.parse().map_err(|e| parse_err(ln, format!("node index: {e}")))?;
                }
                let mut mat = [Phase::Matrix; 3];
                for (m, s) in mat.iter_mut().zip(&f[7..10]) {
                    let label: u8 = s.parse().map_err(|e| parse_err(ln, format!("material: {e}")))?;
                    *m = Phase::from_label(label)
                        .ok_or_else(|| parse_err(ln, format!("material label {label} not in {{1, 2}}")))?;
                }
                elements.push(conn);
                mats.push(mat);
            }
        }
        Mesh::from_parts(nodes, elements, mats)
    }
}

#[cfg(test)]
mod tests {
    use crate::geometry::{Microstructure, Mesh, PackingOptions, Rect};

    #[test]
    fn text_round_trip_is_exact() {
        let micro = Microstructure::generate([3.0, 3.0], 3, 0.8, 0.05, 5, PackingOptions::default()).unwrap();
        let m = Mesh::extract_mve_with_cells(&micro, &Mesh::generate(&micro, 0.5).unwrap(), Rect::new(0.1, 0.2, 2.7, 2.3), 7, 6).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = Mesh::read_text(buf.as_slice()).unwrap();
        assert_eq!(m, back);
        assert_eq!(m.boundary(), back.boundary());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let txt = "nodes 1 elements 0\n0 1.0 abc\n";
        let err = Mesh::read_text(txt.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
