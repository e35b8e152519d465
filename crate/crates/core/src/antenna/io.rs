//! Antenna model files.
//!
//! ```text
//! pixcode-antenna v1
//! q_ports <Q>
//! k_samples <K>
//! gamma <g>
//! z_aa <re> <im>
//! z_pp <Q*Q>        row-major re/im pairs
//! z_pa <Q>
//! e_oc <2K*(Q+1)>   column-major re/im pairs (antenna port column first)
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::AntennaModel;
use crate::error::{Error, Result};
use crate::textfmt::{TextReader, TextWriter};

pub const TAG: &str = "pixcode-antenna";
pub const VERSION: u32 = 1;

pub fn to_text(model: &AntennaModel) -> String {
    let q = model.q_ports();
    let mut w = TextWriter::new(TAG, VERSION);
    w.field("q_ports", q);
    w.field("k_samples", model.k_samples());
    w.real("gamma", model.gamma());
    w.complex("z_aa", model.z_aa());
    w.complexes(
        "z_pp",
        (0..q * q).map(|i| model.z_pp()[(i / q, i % q)]),
    );
    w.complexes("z_pa", model.z_pa().iter().copied());
    // nalgebra storage is column-major
    w.complexes("e_oc", model.e_oc().iter().copied());
    w.finish()
}

pub fn from_text(text: &str) -> Result<AntennaModel> {
    let mut r = TextReader::new(text);
    let version = r.header(TAG)?;
    if version != VERSION {
        return Err(Error::parse(1, "header", format!("unsupported version {version}")));
    }
    let q: usize = r.parse_field("q_ports")?;
    let k: usize = r.parse_field("k_samples")?;
    let gamma: f64 = r.parse_field("gamma")?;
    let z_aa = r.complex("z_aa")?;
    let z_pp = r.complexes("z_pp")?;
    let z_pa = r.complexes("z_pa")?;
    let e_oc = r.complexes("e_oc")?;
    r.finish()?;

    let check = |name: &str, got: usize, want: usize| {
        if got == want {
            Ok(())
        } else {
            Err(Error::InvariantViolation(format!(
                "{name} has {got} entries, expected {want}"
            )))
        }
    };
    check("z_pp", z_pp.len(), q * q)?;
    check("z_pa", z_pa.len(), q)?;
    check("e_oc", e_oc.len(), 2 * k * (q + 1))?;

    AntennaModel::new(
        z_aa,
        DMatrix::from_row_slice(q, q, &z_pp),
        DVector::from_vec(z_pa),
        DMatrix::from_vec(2 * k, q + 1, e_oc),
        gamma,
    )
}

pub fn export(model: &AntennaModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(model)).map_err(|e| Error::file(path, e))
}

pub fn import(path: &Path) -> Result<AntennaModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    from_text(&text)
}
