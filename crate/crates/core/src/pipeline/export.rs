use std::io::{self, Read, Write};

use crate::geometry::{Correspondence, MatchSet, Point2};

pub const BINARY_MAGIC: &[u8; 5] = b"A2PM1";

/// `"A2PM1"`, a little-endian `u32` count, then `N × [qx, qy, px, py]` as
/// little-endian `f32`.
pub fn write_matches_binary(w: &mut impl Write, s: &MatchSet) -> io::Result<()> {
    let n = u32::try_from(s.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "too many matches"))?;
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&n.to_le_bytes())?;
    for c in s.iter() {
        for v in [c.q.x, c.q.y, c.p.x, c.p.y] {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matches_binary(r: &mut impl Read) -> io::Result<Vec<[f32; 4]>> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad magic"));
    }
    let mut n = [0u8; 4];
    r.read_exact(&mut n)?;
    let n = u32::from_le_bytes(n) as usize;
    let mut out = Vec::with_capacity(n);
    let mut buf = [0u8; 16];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        let f = |k: usize| f32::from_le_bytes(buf[4 * k..4 * k + 4].try_into().unwrap());
        out.push([f(0), f(1), f(2), f(3)]);
    }
    Ok(out)
}

/// Converts binary rows back to a match set.
pub fn rows_to_matches(rows: &[[f32; 4]]) -> MatchSet {
    MatchSet::new(rows.iter().map(|r| {
        Correspondence::new(Point2::new(r[0] as f64, r[1] as f64), Point2::new(r[2] as f64, r[3] as f64))
    }))
}
