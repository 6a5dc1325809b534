//! `MGWL` binary container and CSV export for symbols and operator matrices.
//!
//! Symbol layout (little endian):
//!
//! ```text
//! "MGWL" | u32 version = 1 | u32 d | u32 n | f64 x_extent | u32 n_out | u32 n_in | (f64 re, f64 im)*
//! ```
//!
//! with values ordered position index outermost, then momentum index, then row, then
//! column. Operator matrices carry the tag `"OPMAT"` right after the magic and store the
//! `(n^d n_out) x (n^d n_in)` matrix row-major, quadrature weight included. The
//! semiclassical `eps` is not part of the format and is supplied on import.

use std::io::{Read, Write};

use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::quantize::OperatorMatrix;
use crate::symbol::Symbol;
use crate::C64;

pub const MAGIC: &[u8; 4] = b"MGWL";
pub const OPERATOR_TAG: &[u8; 5] = b"OPMAT";
pub const VERSION: u32 = 1;

/// Bytes before the first value in a symbol file.
pub const SYMBOL_HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 4 + 4;
/// Bytes before the first value in an operator file.
pub const OPERATOR_HEADER_LEN: usize = SYMBOL_HEADER_LEN + OPERATOR_TAG.len();

/// Expected file size of a symbol container.
pub fn symbol_file_len(d: usize, n: usize, n_out: usize, n_in: usize) -> usize {
    SYMBOL_HEADER_LEN + 16 * n.pow(2 * d as u32) * n_out * n_in
}

/// Expected file size of an operator container.
pub fn operator_file_len(d: usize, n: usize, n_out: usize, n_in: usize) -> usize {
    OPERATOR_HEADER_LEN + 16 * n.pow(2 * d as u32) * n_out * n_in
}

fn grid_header(g: &PhaseGrid) -> Result<(u32, u32, f64)> {
    if !g.is_isotropic() {
        return Err(Error::Container("the container stores isotropic grids only".into()));
    }
    Ok((g.d() as u32, g.n(0) as u32, g.x_extent(0)))
}

fn write_header(w: &mut impl Write, g: &PhaseGrid, n_out: usize, n_in: usize) -> Result<()> {
    let (d, n, l) = grid_header(g)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&d.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&l.to_le_bytes())?;
    w.write_all(&(n_out as u32).to_le_bytes())?;
    w.write_all(&(n_in as u32).to_le_bytes())?;
    Ok(())
}

fn write_values<'a>(w: &mut impl Write, values: impl Iterator<Item = &'a C64>) -> Result<()> {
    for v in values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_symbol(w: &mut impl Write, s: &Symbol) -> Result<()> {
    w.write_all(MAGIC)?;
    write_header(w, &s.grid, s.n_out, s.n_in)?;
    write_values(w, s.values.iter())
}

pub fn write_operator(w: &mut impl Write, op: &OperatorMatrix) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(OPERATOR_TAG)?;
    write_header(w, &op.grid, op.n_out, op.n_in)?;
    let (r, c) = (op.m.nrows(), op.m.ncols());
    let vals: Vec<C64> = (0..r * c).map(|i| op.m[(i / c, i % c)]).collect();
    write_values(w, vals.iter())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Container(format!("truncated file at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

struct Header {
    grid: PhaseGrid,
    n_out: usize,
    n_in: usize,
}

fn read_header(c: &mut Cursor) -> Result<Header> {
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let d = c.u32()? as usize;
    let n = c.u32()? as usize;
    let l = c.f64()?;
    let n_out = c.u32()? as usize;
    let n_in = c.u32()? as usize;
    let grid = PhaseGrid::new(d, n, l)?;
    Ok(Header { grid, n_out, n_in })
}

fn read_values(c: &mut Cursor, count: usize) -> Result<Vec<C64>> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let re = c.f64()?;
        let im = c.f64()?;
        out.push(C64::new(re, im));
    }
    if c.pos != c.buf.len() {
        return Err(Error::Container(format!("{} trailing bytes", c.buf.len() - c.pos)));
    }
    Ok(out)
}

/// Reads a symbol container; `eps` is the scale the samples refer to.
pub fn read_symbol(r: &mut impl Read, eps: f64) -> Result<Symbol> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    if buf.get(4..9) == Some(OPERATOR_TAG.as_slice()) {
        return Err(Error::Container("file holds an operator, not a symbol".into()));
    }
    let h = read_header(&mut c)?;
    let ns = h.grid.n_states();
    let values = read_values(&mut c, ns * ns * h.n_out * h.n_in)?;
    Symbol::from_values(&h.grid, eps, h.n_out, h.n_in, values)
}

pub fn read_operator(r: &mut impl Read, eps: f64) -> Result<OperatorMatrix> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    if c.take(5)? != OPERATOR_TAG {
        return Err(Error::Container("missing OPMAT tag".into()));
    }
    let h = read_header(&mut c)?;
    let ns = h.grid.n_states();
    let (rows, cols) = (ns * h.n_out, ns * h.n_in);
    let v = read_values(&mut c, rows * cols)?;
    let m = Mat::from_fn(rows, cols, |i, j| v[i * cols + j]);
    Ok(OperatorMatrix { grid: h.grid, eps, n_out: h.n_out, n_in: h.n_in, m })
}

/// CSV with one line per stored value, in container order. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_symbol_csv(w: &mut impl Write, s: &Symbol) -> Result<()> {
    let d = s.grid.d();
    let mut head = vec!["ix".to_string(), "ik".to_string()];
    head.extend((0..d).map(|j| format!("r{j}")));
    head.extend((0..d).map(|j| format!("xi{j}")));
    head.extend(["row", "col", "re", "im"].map(String::from));
    writeln!(w, "{}", head.join(","))?;
    let ns = s.grid.n_states();
    for ix in 0..ns {
        let r = s.r_point(ix);
        for ik in 0..ns {
            let xi = s.grid.xi_point(ik);
            for row in 0..s.n_out {
                for col in 0..s.n_in {
                    let v = s.get(ix, ik, row, col);
                    let mut line = format!("{ix},{ik}");
                    for x in r.iter().take(d) {
                        line.push_str(&format!(",{x}"));
                    }
                    for x in xi.iter().take(d) {
                        line.push_str(&format!(",{x}"));
                    }
                    line.push_str(&format!(",{row},{col},{},{}", v.re, v.im));
                    writeln!(w, "{line}")?;
                }
            }
        }
    }
    Ok(())
}

/// Row-major operator entries as CSV `i,j,re,im`.
pub fn write_operator_csv(w: &mut impl Write, op: &OperatorMatrix) -> Result<()> {
    writeln!(w, "i,j,re,im")?;
    for i in 0..op.m.nrows() {
        for j in 0..op.m.ncols() {
            let v = op.m[(i, j)];
            writeln!(w, "{i},{j},{},{}", v.re, v.im)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_round_trip_is_bit_exact() {
        let g = PhaseGrid::new(1, 8, 3.0).unwrap();
        let s = Symbol::from_fn(&g, 0.5, 2, 1, |r, xi, out| {
            out[0] = C64::new(r[0].sin() / 3.0, xi[0] * 0.1);
            out[1] = C64::new(1.0 / 7.0, -r[0]);
        });
        let mut buf = Vec::new();
        write_symbol(&mut buf, &s).unwrap();
        assert_eq!(buf.len(), symbol_file_len(1, 8, 2, 1));
        let back = read_symbol(&mut buf.as_slice(), 0.5).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn operator_tag_is_checked() {
        let g = PhaseGrid::new(1, 4, 1.0).unwrap();
        let op = OperatorMatrix::identity(&g, 1.0, 1);
        let mut buf = Vec::new();
        write_operator(&mut buf, &op).unwrap();
        assert_eq!(buf.len(), operator_file_len(1, 4, 1, 1));
        assert!(read_symbol(&mut buf.as_slice(), 1.0).is_err());
        let back = read_operator(&mut buf.as_slice(), 1.0).unwrap();
        assert_eq!(back.m, op.m);
    }
}
