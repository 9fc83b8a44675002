//! File emission: JSON with round-trip exact numbers, CSV, SVG.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::Formatter;

use delta_nls_core::{Classification, GridSpec, GroundState, Residuals};

use crate::config::Format;
use crate::error::CliError;

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// serde_json formatter that writes every float with 17 significant digits
/// and non-finite values as `null`.
struct ExactFloats;

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            writer.write_all(num(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats);
    value
        .serialize(&mut ser)
        .expect("serializing to memory cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

/// The ground-state document.
#[derive(Debug, Serialize)]
pub struct GroundStateDoc<'a> {
    pub alpha: f64,
    pub omega: f64,
    pub omega_tilde: f64,
    pub beta: f64,
    pub lambda: f64,
    pub q: f64,
    pub level: f64,
    pub grid: GridSpec,
    pub phi: &'a [f64],
    pub v: &'a [f64],
    pub residuals: Residuals,
    pub classification: Classification,
}

impl<'a> GroundStateDoc<'a> {
    pub fn new(gs: &'a GroundState) -> Self {
        let s = &gs.state;
        let p = &s.params;
        Self {
            alpha: p.alpha,
            omega: p.omega,
            omega_tilde: p.omega_tilde,
            beta: p.beta,
            lambda: s.u.lambda,
            q: s.u.q,
            level: gs.level,
            grid: s.grid().spec(),
            phi: s.u.phi.samples(),
            v: s.v.samples(),
            residuals: gs.residuals,
            classification: gs.classification,
        }
    }
}

/// Writes the selected formats into one directory and remembers what it wrote.
#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    formats: Vec<Format>,
    pub written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path, formats: &[Format]) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            formats: formats.to_vec(),
            written: Vec::new(),
        })
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        if self.wants(Format::Json) {
            self.write(name, &to_json(value))?;
        }
        Ok(())
    }

    /// Always written, whatever the format selection.
    pub fn json_always<T: Serialize + ?Sized>(
        &mut self,
        name: &str,
        value: &T,
    ) -> Result<(), CliError> {
        self.write(name, &to_json(value))
    }

    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        if !self.wants(Format::Csv) {
            return Ok(());
        }
        let path = self.dir.join(name);
        let io = |e: csv::Error| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn svg(&mut self, name: &str, svg: impl FnOnce() -> String) -> Result<(), CliError> {
        if self.wants(Format::Svg) {
            self.write(name, &svg())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_seventeen_digits() {
        for x in [0.1f64, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 5e-324] {
            let s = to_json(&x);
            let back: f64 = serde_json::from_str(s.trim()).unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
            let mantissa = s.trim().split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17, "{s}");
        }
    }

    #[test]
    fn non_finite_becomes_null() {
        assert_eq!(
            to_json(&[f64::INFINITY, 1.0]).trim(),
            "[null,1.0000000000000000e0]"
        );
    }

    proptest::proptest! {
        #[test]
        fn any_finite_float_round_trips(bits in proptest::num::u64::ANY) {
            let x = f64::from_bits(bits);
            proptest::prop_assume!(x.is_finite());
            let back: f64 = serde_json::from_str(to_json(&x).trim()).unwrap();
            proptest::prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
