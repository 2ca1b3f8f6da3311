//! Binary file formats for complex tables and family bit tables.
//!
//! Both formats share a 16-byte header:
//!   magic (4 bytes) | version u8 = 1 | kind u8 | n u16 LE | N u32 LE | 4 zero bytes
//! where kind is 0 = Pairs, 1 = PairsLoops, 2 = Generic (n must be 0) and N
//! is the number of positions. "F2FT" is followed by 2^N little-endian
//! (re, im) f64 pairs; "F2CF" by ceil(2^N / 8) bytes of membership bits,
//! LSB-first within each byte.

use crate::codes::CodeFamily;
use crate::error::{Error, Result};
use crate::f2space::{EdgeIndexSet, SpaceKind, Spectrum, ValueTable};
use num_complex::Complex64;
use std::io::{Read, Write};

pub const MAGIC_TABLE: &[u8; 4] = b"F2FT";
pub const MAGIC_FAMILY: &[u8; 4] = b"F2CF";
pub const FORMAT_VERSION: u8 = 1;

fn kind_byte(kind: SpaceKind) -> u8 {
    match kind {
        SpaceKind::Pairs => 0,
        SpaceKind::PairsLoops => 1,
        SpaceKind::Generic => 2,
    }
}

fn write_header(w: &mut impl Write, magic: &[u8; 4], space: EdgeIndexSet) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&[FORMAT_VERSION, kind_byte(space.kind())])?;
    let n = if space.kind() == SpaceKind::Generic { 0 } else { space.n() };
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&space.len().to_le_bytes())?;
    w.write_all(&[0u8; 4])?;
    Ok(())
}

fn read_header(r: &mut impl Read, magic: &[u8; 4]) -> Result<EdgeIndexSet> {
    let mut buf = [0u8; 16];
    r.read_exact(&mut buf)?;
    if &buf[0..4] != magic {
        return Err(Error::Malformed(format!(
            "bad magic: expected {:?}",
            std::str::from_utf8(magic).unwrap_or("?")
        )));
    }
    if buf[4] != FORMAT_VERSION {
        return Err(Error::Malformed(format!("unsupported format version {}", buf[4])));
    }
    let n = u16::from_le_bytes([buf[6], buf[7]]);
    let len = u32::from_le_bytes([buf[8], buf[9], buf[10], buf[11]]);
    if buf[12..16] != [0u8; 4] {
        return Err(Error::Malformed("reserved header bytes must be zero".into()));
    }
    let space = match buf[5] {
        0 => EdgeIndexSet::pairs(n)?,
        1 => EdgeIndexSet::pairs_loops(n)?,
        2 => {
            if n != 0 {
                return Err(Error::Malformed("generic spaces carry no vertex count".into()));
            }
            EdgeIndexSet::generic(len)?
        }
        k => return Err(Error::Malformed(format!("unknown space kind byte {k}"))),
    };
    if space.len() != len {
        return Err(Error::Malformed(format!(
            "position count {len} does not match the declared space ({})",
            space.len()
        )));
    }
    Ok(space)
}

/// Write a complex table (values or Fourier coefficients) as F2FT.
pub fn write_complex_table(
    w: &mut impl Write,
    space: EdgeIndexSet,
    values: &[Complex64],
) -> Result<()> {
    if values.len() != space.table_len()? {
        return Err(Error::Malformed("table length does not match the space".into()));
    }
    write_header(w, MAGIC_TABLE, space)?;
    let mut buf = Vec::with_capacity(values.len() * 16);
    for v in values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_complex_table(r: &mut impl Read) -> Result<(EdgeIndexSet, Vec<Complex64>)> {
    let space = read_header(r, MAGIC_TABLE)?;
    let len = space.table_len()?;
    let mut buf = vec![0u8; len * 16];
    r.read_exact(&mut buf)?;
    let mut values = Vec::with_capacity(len);
    for chunk in buf.chunks_exact(16) {
        let re = f64::from_le_bytes(chunk[0..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(chunk[8..16].try_into().expect("8 bytes"));
        values.push(Complex64::new(re, im));
    }
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(Error::Malformed("trailing bytes after table payload".into()));
    }
    Ok((space, values))
}

pub fn write_value_table(w: &mut impl Write, t: &ValueTable) -> Result<()> {
    write_complex_table(w, t.space(), t.values())
}

pub fn read_value_table(r: &mut impl Read) -> Result<ValueTable> {
    let (space, values) = read_complex_table(r)?;
    ValueTable::from_values(space, values)
}

pub fn write_spectrum(w: &mut impl Write, s: &Spectrum) -> Result<()> {
    write_complex_table(w, s.space(), s.coefficients())
}

pub fn read_spectrum(r: &mut impl Read) -> Result<Spectrum> {
    let (space, values) = read_complex_table(r)?;
    Spectrum::from_coefficients(space, values)
}

/// Write a family's membership bits as F2CF.
pub fn write_code_family(w: &mut impl Write, fam: &CodeFamily) -> Result<()> {
    write_header(w, MAGIC_FAMILY, fam.space())?;
    let n_bytes = (fam.len_points() as usize + 7) / 8;
    let mut bytes = Vec::with_capacity(n_bytes);
    for b in fam.blocks() {
        bytes.extend_from_slice(&b.to_le_bytes());
    }
    bytes.truncate(n_bytes);
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_code_family(r: &mut impl Read) -> Result<CodeFamily> {
    let space = read_header(r, MAGIC_FAMILY)?;
    let len = space.table_len()?;
    let n_bytes = (len + 7) / 8;
    let mut bytes = vec![0u8; n_bytes];
    r.read_exact(&mut bytes)?;
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(Error::Malformed("trailing bytes after family payload".into()));
    }
    bytes.resize(((n_bytes + 7) / 8) * 8, 0);
    let blocks: Vec<u64> = bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    CodeFamily::from_blocks(space, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_roundtrip_all_kinds() {
        for space in [
            EdgeIndexSet::pairs(4).unwrap(),
            EdgeIndexSet::pairs_loops(3).unwrap(),
            EdgeIndexSet::generic(5).unwrap(),
        ] {
            let t = ValueTable::from_fn(space, |x| {
                Complex64::new(x as f64 * 0.25 - 1.0, (x as f64).sin())
            })
            .unwrap();
            let mut buf = Vec::new();
            write_value_table(&mut buf, &t).unwrap();
            assert_eq!(buf.len(), 16 + t.values().len() * 16);
            let back = read_value_table(&mut buf.as_slice()).unwrap();
            assert_eq!(back.space(), space);
            assert_eq!(back.values(), t.values());
        }
    }

    #[test]
    fn family_roundtrip() {
        let space = EdgeIndexSet::pairs(5).unwrap();
        let fam = CodeFamily::from_fn(space, |x| x.count_ones() % 3 == 1).unwrap();
        let mut buf = Vec::new();
        write_code_family(&mut buf, &fam).unwrap();
        assert_eq!(buf.len(), 16 + 128);
        let back = read_code_family(&mut buf.as_slice()).unwrap();
        assert_eq!(back, fam);
    }

    #[test]
    fn family_roundtrip_sub_byte() {
        // N = 1: a single byte of payload with a zero tail
        let space = EdgeIndexSet::pairs_loops(1).unwrap();
        let fam = CodeFamily::from_members(space, &[1]).unwrap();
        let mut buf = Vec::new();
        write_code_family(&mut buf, &fam).unwrap();
        assert_eq!(buf.len(), 17);
        let back = read_code_family(&mut buf.as_slice()).unwrap();
        assert_eq!(back, fam);
    }

    #[test]
    fn header_rejections() {
        let space = EdgeIndexSet::pairs(3).unwrap();
        let t = ValueTable::constant(space, Complex64::new(1.0, 0.0)).unwrap();
        let mut buf = Vec::new();
        write_value_table(&mut buf, &t).unwrap();

        let mut wrong_magic = buf.clone();
        wrong_magic[0] = b'X';
        assert!(read_value_table(&mut wrong_magic.as_slice()).is_err());

        let mut wrong_version = buf.clone();
        wrong_version[4] = 9;
        assert!(read_value_table(&mut wrong_version.as_slice()).is_err());

        let mut wrong_reserved = buf.clone();
        wrong_reserved[13] = 1;
        assert!(read_value_table(&mut wrong_reserved.as_slice()).is_err());

        let mut bad_len = buf.clone();
        bad_len[8] = 7; // Pairs(3) must report 3 positions
        assert!(read_value_table(&mut bad_len.as_slice()).is_err());

        let mut truncated = buf.clone();
        truncated.truncate(buf.len() - 3);
        assert!(read_value_table(&mut truncated.as_slice()).is_err());

        let mut overlong = buf.clone();
        overlong.push(0);
        assert!(read_value_table(&mut overlong.as_slice()).is_err());

        // family magic on table payload
        assert!(read_code_family(&mut buf.as_slice()).is_err());
    }
}
