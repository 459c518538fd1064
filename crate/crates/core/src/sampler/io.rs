//! Trajectory CSV export and the binary measure snapshot.
//!
//! Snapshot layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `IFSM` |
//! | 4 | version, `u32` (currently 1) |
//! | 4 | dimension `d`, `u32` |
//! | 8 | point count `n`, `u64` |
//! | 8·n·d | coordinates, `f64`, point after point |
//! | 8·n | raw weights, `f64` |

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::{EmpiricalMeasure, Trajectory};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"IFSM";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Writes `# `-prefixed header lines, then
/// `step,x1..xd,symbol,log_deriv,log_prob` with 1-based symbols.
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory, header: &[String]) -> Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    let coords: Vec<String> = (1..=traj.dim).map(|i| format!("x{i}")).collect();
    writeln!(w, "step,{},symbol,log_deriv,log_prob", coords.join(","))?;
    for n in 0..traj.len() {
        write!(w, "{}", traj.burn_in + n)?;
        for v in traj.point(n) {
            write!(w, ",{v:e}")?;
        }
        writeln!(
            w,
            ",{},{:e},{:e}",
            traj.symbols[n] + 1,
            traj.log_deriv[n],
            traj.log_prob[n]
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_snapshot<W: Write>(mut w: W, measure: &EmpiricalMeasure) -> Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&(measure.dim() as u32).to_le_bytes())?;
    w.write_all(&(measure.len() as u64).to_le_bytes())?;
    for v in measure.coords().iter().chain(measure.raw_weights()) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated snapshot: {e}")))?;
    Ok(buf)
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<EmpiricalMeasure> {
    if &read_exact::<_, 4>(&mut r)? != SNAPSHOT_MAGIC {
        return Err(Error::Format("not an IFSM snapshot".into()));
    }
    let version = u32::from_le_bytes(read_exact(&mut r)?);
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let dim = u32::from_le_bytes(read_exact(&mut r)?) as usize;
    let count = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    let values = count
        .checked_mul(dim + 1)
        .ok_or_else(|| Error::Format("snapshot size overflows".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != values * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            values * 8,
            bytes.len()
        )));
    }
    let mut floats: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let raw = floats.split_off(count * dim);
    EmpiricalMeasure::from_weighted(dim, floats, raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{IfsSystem, MapSpec, ProbabilityField};
    use crate::point::Point;
    use crate::sampler::chaos_game;

    #[test]
    fn snapshot_round_trip() {
        let m = EmpiricalMeasure::from_weighted(2, vec![0.5, -1.0, 3.0, 1e-300], vec![1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &m).unwrap();
        assert_eq!(&buf[..4], b"IFSM");
        assert_eq!(buf.len(), 20 + 8 * 6);
        let back = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert!(read_snapshot(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_snapshot(bad.as_slice()).is_err());
    }

    #[test]
    fn csv_has_one_row_per_step() {
        let s = IfsSystem::new(
            vec![MapSpec::affine_1d(0.5, 0.0), MapSpec::affine_1d(0.5, 0.5)],
            ProbabilityField::uniform(2),
        )
        .unwrap();
        let t = chaos_game(&s, &Point::scalar(0.1).unwrap(), 4, 2, 1).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &t, &["seed: 1".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed: 1");
        assert_eq!(lines[1], "step,x1,symbol,log_deriv,log_prob");
        assert_eq!(lines.len(), 6);
        assert!(lines[2].starts_with("2,"));
    }
}
