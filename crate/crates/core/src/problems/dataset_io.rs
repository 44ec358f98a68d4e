//! Binary matrix cache: a 16-byte header (magic `AMDS`, version, rows, cols
//! as little-endian u32) followed by `rows * cols` little-endian f64 values.

use std::io::{self, Read, Write};

pub const MAGIC: [u8; 4] = *b"AMDS";
pub const VERSION: u32 = 1;

pub fn write_matrix<W: Write>(mut w: W, rows: usize, cols: usize, values: &[f64]) -> io::Result<()> {
    if values.len() != rows * cols {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "value count does not match rows * cols"));
    }
    let dim = |v: usize| {
        u32::try_from(v).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "dimension exceeds u32"))
    };
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&dim(rows)?.to_le_bytes())?;
    w.write_all(&dim(cols)?.to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> io::Result<(usize, usize, Vec<f64>)> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if header[..4] != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes"));
    if word(4) != VERSION {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unsupported version {}", word(4))));
    }
    let (rows, cols) = (word(8) as usize, word(12) as usize);
    let mut buf = vec![0u8; rows * cols * 8];
    r.read_exact(&mut buf)?;
    let values = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((rows, cols, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write_matrix(&mut buf, 1, 2, &[1.0, -2.5]).unwrap();
        assert_eq!(buf.len(), 16 + 16);
        assert_eq!(&buf[..4], b"AMDS");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &1u32.to_le_bytes());
        assert_eq!(&buf[12..16], &2u32.to_le_bytes());
        assert_eq!(&buf[16..24], &1.0f64.to_le_bytes());
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(write_matrix(Vec::new(), 2, 2, &[1.0]).is_err());
        let mut buf = Vec::new();
        write_matrix(&mut buf, 1, 1, &[1.0]).unwrap();
        buf[0] = b'X';
        assert!(read_matrix(&buf[..]).is_err());
        let mut buf = Vec::new();
        write_matrix(&mut buf, 2, 1, &[1.0, 2.0]).unwrap();
        assert!(read_matrix(&buf[..buf.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn round_trips_bitwise(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
            let values: Vec<f64> = (0..rows * cols).map(|i| f64::from_bits(seed.rotate_left(i as u32) >> 2)).collect();
            let mut buf = Vec::new();
            write_matrix(&mut buf, rows, cols, &values).unwrap();
            let (r, c, back) = read_matrix(&buf[..]).unwrap();
            prop_assert_eq!((r, c), (rows, cols));
            prop_assert!(values.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
