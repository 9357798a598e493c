//! Snapshot (CHF1), grayscale PGM and energy CSV writers.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use cahn_hilliard::diagnostics::EnergyRecord;
use cahn_hilliard::{Dim, Field, GridSpec};

use crate::error::CliError;

/// `CHF1 <mx> <my> <L> <t>\n`
pub fn snapshot_header(grid: &GridSpec, t: f64) -> String {
    let m = grid.points();
    format!("CHF1 {m} {m} {:?} {:?}\n", grid.length(), t)
}

pub fn encode_snapshot(field: &Field, t: f64) -> Vec<u8> {
    let mut buf = snapshot_header(field.grid(), t).into_bytes();
    buf.reserve(8 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn write_snapshot(field: &Field, t: f64, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, encode_snapshot(field, t)).map_err(|e| CliError::io(path, e))
}

/// Parses a CHF1 buffer into the field and its time.
pub fn decode_snapshot(bytes: &[u8], origin: &str) -> Result<(Field, f64), CliError> {
    let bad = |reason: String| CliError::Snapshot {
        path: origin.to_string(),
        reason,
    };
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not ASCII".into()))?;
    let parts: Vec<&str> = header.split(' ').collect();
    if parts.len() != 5 || parts[0] != "CHF1" {
        return Err(bad(format!("bad header {header:?}")));
    }
    let mx: usize = parts[1].parse().map_err(|_| bad(format!("bad mx {:?}", parts[1])))?;
    let my: usize = parts[2].parse().map_err(|_| bad(format!("bad my {:?}", parts[2])))?;
    let length: f64 = parts[3].parse().map_err(|_| bad(format!("bad L {:?}", parts[3])))?;
    let t: f64 = parts[4].parse().map_err(|_| bad(format!("bad t {:?}", parts[4])))?;
    if mx != my {
        return Err(bad(format!("only square grids are supported, got {mx} x {my}")));
    }
    let body = &bytes[nl + 1..];
    if body.len() != 8 * mx * my {
        return Err(bad(format!(
            "expected {} bytes of data, found {}",
            8 * mx * my,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let grid = GridSpec::new(length, mx, Dim::Two).map_err(|e| bad(e.to_string()))?;
    let field = Field::from_values(grid, values).map_err(|e| bad(e.to_string()))?;
    Ok((field, t))
}

pub fn read_snapshot(path: &Path) -> Result<(Field, f64), CliError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::io(path, e))?;
    decode_snapshot(&bytes, &path.display().to_string())
}

/// `round(255 (clamp(phi, -1, 1) + 1) / 2)`
pub fn gray_level(v: f64) -> u8 {
    (255.0 * (v.clamp(-1.0, 1.0) + 1.0) / 2.0).round() as u8
}

pub fn encode_pgm(field: &Field) -> Vec<u8> {
    let m = field.grid().points();
    let mut buf = format!("P5\n{m} {m}\n255\n").into_bytes();
    buf.extend(field.values().iter().map(|&v| gray_level(v)));
    buf
}

pub fn write_pgm(field: &Field, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, encode_pgm(field)).map_err(|e| CliError::io(path, e))
}

pub const ENERGY_HEADER: &str = "step,t,mass,E,E_mod,psd_iters,residual";

pub fn energy_row(r: &EnergyRecord) -> String {
    format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
        r.step, r.t, r.mass, r.energy, r.modified_energy, r.psd_iters, r.residual
    )
}

/// Line-buffered energy log; rows reach the disk as they are written so a
/// failed run keeps its history.
pub struct EnergyWriter {
    out: BufWriter<File>,
    path: String,
}

impl EnergyWriter {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path: path.display().to_string(),
        };
        w.line(ENERGY_HEADER)?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<(), CliError> {
        writeln!(self.out, "{s}")
            .and_then(|_| self.out.flush())
            .map_err(|e| CliError::io(&self.path, e))
    }

    pub fn record(&mut self, r: &EnergyRecord) -> Result<(), CliError> {
        self.line(&energy_row(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_format() {
        let g = GridSpec::square(12.8, 128).unwrap();
        assert_eq!(snapshot_header(&g, 1.0), "CHF1 128 128 12.8 1.0\n");
        let g = GridSpec::square(3.2, 16).unwrap();
        assert_eq!(snapshot_header(&g, 0.32), "CHF1 16 16 3.2 0.32\n");
    }

    #[test]
    fn snapshot_round_trip_is_bitwise() {
        let g = GridSpec::square(2.5, 9).unwrap();
        let f = Field::from_fn(g, |x, y| (x * 1.7).sin() * y.exp() / 3.0 + 1e-300);
        let t = 0.1 + 0.2;
        let (back, tb) = decode_snapshot(&encode_snapshot(&f, t), "mem").unwrap();
        assert_eq!(tb.to_bits(), t.to_bits());
        assert_eq!(back.grid(), f.grid());
        for (a, b) in back.values().iter().zip(f.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn malformed_snapshots_are_rejected() {
        let g = GridSpec::square(1.0, 6).unwrap();
        let good = encode_snapshot(&Field::zeros(g), 0.0);
        assert!(decode_snapshot(&good[..good.len() - 1], "x").is_err());
        assert!(decode_snapshot(b"CHF2 6 6 1.0 0.0\n", "x").is_err());
        assert!(decode_snapshot(b"CHF1 6 6 1.0\n", "x").is_err());
        assert!(decode_snapshot(b"no newline", "x").is_err());
        let e = decode_snapshot(b"CHF1 6 5 1.0 0.0\n", "x").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn gray_levels() {
        assert_eq!(gray_level(-1.0), 0);
        assert_eq!(gray_level(-7.0), 0);
        assert_eq!(gray_level(1.0), 255);
        assert_eq!(gray_level(3.0), 255);
        assert_eq!(gray_level(0.0), 128);
        let g = GridSpec::square(1.0, 5).unwrap();
        let pgm = encode_pgm(&Field::constant(g, 0.5));
        assert!(pgm.starts_with(b"P5\n5 5\n255\n"));
        assert_eq!(pgm.len(), 11 + 25);
        assert_eq!(*pgm.last().unwrap(), 191);
    }

    #[test]
    fn energy_rows_have_seventeen_digits() {
        let r = EnergyRecord {
            step: 3,
            t: 0.03,
            mass: 0.0,
            energy: 1.0 / 3.0,
            modified_energy: 0.5,
            psd_iters: 7,
            residual: 1e-12,
        };
        let row = energy_row(&r);
        assert_eq!(row.split(',').count(), 7);
        assert!(row.contains("3.3333333333333331e-1"));
        assert!(row.starts_with("3,"));
    }
}
