//! Binary container for interferograms, AC maps, reconstructions and ground truth.
//!
//! Layout: the magic `MJSI1\n`, a little-endian `u32` header length, a JSON
//! header, then the raw arrays in the order the header lists them. Arrays are
//! row-major and little-endian: `uint32` counts, `complex128` as interleaved
//! `(re, im)` pairs of `f64`, `float64`, and `uint8` booleans.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::franson::{InterferogramSet, NoiseModel, ShearSchedule};
use crate::grid::FrequencyGrid;
use crate::mice::ReconstructionResult;
use crate::sideband::AcSet;
use crate::state::GroundTruth;

pub const MAGIC: &[u8; 6] = b"MJSI1\n";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    GroundTruth,
    Interferograms,
    Ac,
    Reconstruction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dtype {
    Uint32,
    Complex128,
    Float64,
    Uint8,
}

impl Dtype {
    pub fn item_size(self) -> usize {
        match self {
            Dtype::Uint32 => 4,
            Dtype::Complex128 => 16,
            Dtype::Float64 => 8,
            Dtype::Uint8 => 1,
        }
    }
}

/// One array declared in the header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayDesc {
    pub name: String,
    pub dtype: Dtype,
    pub shape: [usize; 2],
}

impl ArrayDesc {
    fn new(name: impl Into<String>, dtype: Dtype, shape: (usize, usize)) -> Self {
        Self { name: name.into(), dtype, shape: [shape.0, shape.1] }
    }

    fn byte_len(&self) -> Option<usize> {
        self.shape[0].checked_mul(self.shape[1])?.checked_mul(self.dtype.item_size())
    }
}

/// JSON header. Fields not relevant to a payload kind are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub kind: PayloadKind,
    pub grid: FrequencyGrid,
    pub array_order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ShearSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_removed: Option<bool>,
    /// Informational summary for reconstructions; the exact history is stored as an array.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    pub arrays: Vec<ArrayDesc>,
}

/// Anything that can live in a container.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    GroundTruth(GroundTruth),
    Interferograms(InterferogramSet),
    Ac(AcSet),
    Reconstruction(ReconstructionResult),
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::GroundTruth(_) => PayloadKind::GroundTruth,
            Payload::Interferograms(_) => PayloadKind::Interferograms,
            Payload::Ac(_) => PayloadKind::Ac,
            Payload::Reconstruction(_) => PayloadKind::Reconstruction,
        }
    }

    pub fn grid(&self) -> FrequencyGrid {
        match self {
            Payload::GroundTruth(g) => g.grid,
            Payload::Interferograms(s) => s.grid,
            Payload::Ac(a) => a.grid,
            Payload::Reconstruction(r) => *r.e1.grid(),
        }
    }

    pub fn into_ground_truth(self) -> Result<GroundTruth> {
        match self {
            Payload::GroundTruth(g) => Ok(g),
            other => Err(wrong_kind(PayloadKind::GroundTruth, other.kind())),
        }
    }

    pub fn into_interferograms(self) -> Result<InterferogramSet> {
        match self {
            Payload::Interferograms(s) => Ok(s),
            other => Err(wrong_kind(PayloadKind::Interferograms, other.kind())),
        }
    }

    pub fn into_ac(self) -> Result<AcSet> {
        match self {
            Payload::Ac(a) => Ok(a),
            other => Err(wrong_kind(PayloadKind::Ac, other.kind())),
        }
    }

    pub fn into_reconstruction(self) -> Result<ReconstructionResult> {
        match self {
            Payload::Reconstruction(r) => Ok(r),
            other => Err(wrong_kind(PayloadKind::Reconstruction, other.kind())),
        }
    }
}

fn wrong_kind(expected: PayloadKind, found: PayloadKind) -> Error {
    Error::Malformed(format!("expected a {expected:?} container, found {found:?}"))
}

fn base_header(kind: PayloadKind, grid: FrequencyGrid) -> Header {
    Header {
        format_version: FORMAT_VERSION,
        kind,
        grid,
        array_order: "row-major".into(),
        schedule: None,
        noise: None,
        seed: None,
        pairs: None,
        carrier_removed: None,
        final_error: None,
        iterations: None,
        arrays: Vec::new(),
    }
}

fn put_u32(out: &mut Vec<u8>, a: &Array2<u32>) {
    out.extend(a.iter().flat_map(|v| v.to_le_bytes()));
}

fn put_c128(out: &mut Vec<u8>, a: &Array2<Complex64>) {
    for z in a.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
}

fn put_f64<'a>(out: &mut Vec<u8>, values: impl IntoIterator<Item = &'a f64>) {
    out.extend(values.into_iter().flat_map(|v| v.to_le_bytes()));
}

fn put_bool(out: &mut Vec<u8>, a: &Array2<bool>) {
    out.extend(a.iter().map(|&b| b as u8));
}

/// Serializes a payload to bytes.
pub fn encode(payload: &Payload) -> Result<Vec<u8>> {
    let grid = payload.grid();
    let shape = grid.shape();
    let mut header = base_header(payload.kind(), grid);
    let mut body = Vec::new();
    match payload {
        Payload::GroundTruth(g) => {
            header.arrays.push(ArrayDesc::new("amplitude", Dtype::Float64, shape));
            header.arrays.push(ArrayDesc::new("phase", Dtype::Float64, shape));
            put_f64(&mut body, g.amplitude.iter());
            put_f64(&mut body, g.phase.iter());
        }
        Payload::Interferograms(s) => {
            check_pair_count(s.counts.len(), &s.schedule)?;
            header.schedule = Some(s.schedule.clone());
            header.noise = Some(s.noise);
            header.seed = Some(s.seed);
            header.pairs = Some(s.schedule.pairs().collect());
            for ((k, l), c) in s.schedule.pairs().zip(&s.counts) {
                check_shape(shape, c.dim())?;
                header.arrays.push(ArrayDesc::new(format!("counts_{k}_{l}"), Dtype::Uint32, shape));
                put_u32(&mut body, c);
            }
        }
        Payload::Ac(a) => {
            check_pair_count(a.ac.len(), &a.schedule)?;
            header.schedule = Some(a.schedule.clone());
            header.pairs = Some(a.schedule.pairs().collect());
            header.carrier_removed = Some(a.carrier_removed);
            for ((k, l), m) in a.schedule.pairs().zip(&a.ac) {
                check_shape(shape, m.dim())?;
                header.arrays.push(ArrayDesc::new(format!("ac_{k}_{l}"), Dtype::Complex128, shape));
                put_c128(&mut body, m);
            }
        }
        Payload::Reconstruction(r) => {
            if r.e2.grid() != &grid {
                return Err(Error::GridMismatch);
            }
            header.final_error = r.error_history.last().copied().filter(|e| e.is_finite());
            header.iterations = Some(r.iterations());
            header.arrays.push(ArrayDesc::new("e1", Dtype::Complex128, shape));
            header.arrays.push(ArrayDesc::new("e2", Dtype::Complex128, shape));
            header.arrays.push(ArrayDesc::new("mask_e1", Dtype::Uint8, shape));
            header.arrays.push(ArrayDesc::new("mask_e2", Dtype::Uint8, shape));
            header.arrays.push(ArrayDesc::new("error_history", Dtype::Float64, (1, r.error_history.len())));
            put_c128(&mut body, r.e1.values());
            put_c128(&mut body, r.e2.values());
            put_bool(&mut body, &r.mask_e1);
            put_bool(&mut body, &r.mask_e2);
            put_f64(&mut body, r.error_history.iter());
        }
    }
    let json = serde_json::to_vec(&header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::InvalidParameter("container header too large".into()))?;
    let mut out = Vec::with_capacity(MAGIC.len() + 4 + json.len() + body.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&body);
    Ok(out)
}

fn check_pair_count(maps: usize, schedule: &ShearSchedule) -> Result<()> {
    if maps != schedule.num_pairs() {
        return Err(Error::InvalidParameter(format!("{maps} maps for {} shear pairs", schedule.num_pairs())));
    }
    Ok(())
}

fn check_shape(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::ShapeMismatch { expected, actual });
    }
    Ok(())
}

/// Reads and validates the magic, length prefix and header.
pub fn decode_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    let prefix = &bytes[..bytes.len().min(MAGIC.len())];
    if prefix != &MAGIC[..prefix.len()] {
        return Err(Error::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 4 {
        return Err(Error::Truncated("file ends inside the preamble".into()));
    }
    let len_bytes: [u8; 4] = bytes[MAGIC.len()..MAGIC.len() + 4].try_into().expect("four bytes");
    let len = u32::from_le_bytes(len_bytes) as usize;
    let start = MAGIC.len() + 4;
    let Some(json) = bytes.get(start..start + len) else {
        return Err(Error::Truncated(format!("header declares {len} bytes, {} available", bytes.len() - start)));
    };
    let value: serde_json::Value =
        serde_json::from_slice(json).map_err(|e| Error::Malformed(format!("header is not JSON: {e}")))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Malformed("header lacks format_version".into()))?;
    if version != FORMAT_VERSION as u64 {
        return Err(Error::VersionMismatch { found: version.min(u32::MAX as u64) as u32, expected: FORMAT_VERSION });
    }
    let header: Header = serde_json::from_value(value).map_err(|e| Error::Malformed(format!("header: {e}")))?;
    FrequencyGrid::rectangular(header.grid.n_signal, header.grid.n_idler, header.grid.center_nm, header.grid.span_nm)
        .map_err(|e| Error::Malformed(format!("header grid: {e}")))?;
    Ok((header, &bytes[start + len..]))
}

struct Reader<'a> {
    body: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, desc: &ArrayDesc) -> Result<&'a [u8]> {
        let len = desc.byte_len().ok_or_else(|| Error::Malformed(format!("array {} too large", desc.name)))?;
        let chunk = self.body.get(self.pos..self.pos + len).ok_or_else(|| {
            Error::Truncated(format!(
                "array {} needs {len} bytes, {} available",
                desc.name,
                self.body.len().saturating_sub(self.pos)
            ))
        })?;
        self.pos += len;
        Ok(chunk)
    }
}

fn expect_array(desc: &ArrayDesc, name: &str, dtype: Dtype, shape: (usize, usize)) -> Result<()> {
    if desc.name != name || desc.dtype != dtype || desc.shape != [shape.0, shape.1] {
        return Err(Error::Malformed(format!(
            "expected array {name} {dtype:?} {shape:?}, header declares {} {:?} {:?}",
            desc.name, desc.dtype, desc.shape
        )));
    }
    Ok(())
}

fn to_array<T>(shape: [usize; 2], data: Vec<T>) -> Result<Array2<T>> {
    Array2::from_shape_vec((shape[0], shape[1]), data).map_err(|e| Error::Malformed(e.to_string()))
}

fn read_u32(desc: &ArrayDesc, raw: &[u8]) -> Result<Array2<u32>> {
    let data = raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    to_array(desc.shape, data)
}

fn read_f64_vec(raw: &[u8]) -> Vec<f64> {
    raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect()
}

fn read_c128(desc: &ArrayDesc, raw: &[u8]) -> Result<Array2<Complex64>> {
    let data = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    to_array(desc.shape, data)
}

fn read_bool(desc: &ArrayDesc, raw: &[u8]) -> Result<Array2<bool>> {
    let data = raw
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Malformed(format!("mask byte {other} in {}", desc.name))),
        })
        .collect::<Result<Vec<_>>>()?;
    to_array(desc.shape, data)
}

fn pair_arrays<'h>(header: &'h Header, prefix: &str, dtype: Dtype) -> Result<(ShearSchedule, &'h [ArrayDesc])> {
    let schedule = header.schedule.clone().ok_or_else(|| Error::Malformed("header lacks schedule".into()))?;
    let expected: Vec<(usize, usize)> = schedule.pairs().collect();
    if header.pairs.as_ref() != Some(&expected) {
        return Err(Error::Malformed("pair list does not match the schedule".into()));
    }
    if header.arrays.len() > expected.len() {
        return Err(Error::Malformed(format!(
            "{} arrays declared for {} shear pairs",
            header.arrays.len(),
            expected.len()
        )));
    }
    if header.arrays.len() < expected.len() {
        return Err(Error::Truncated(format!(
            "{} arrays declared for {} shear pairs",
            header.arrays.len(),
            expected.len()
        )));
    }
    for (desc, (k, l)) in header.arrays.iter().zip(&expected) {
        expect_array(desc, &format!("{prefix}_{k}_{l}"), dtype, header.grid.shape())?;
    }
    Ok((schedule, &header.arrays))
}

/// Parses a container from bytes.
pub fn decode(bytes: &[u8]) -> Result<Payload> {
    let (header, body) = decode_header(bytes)?;
    let grid = header.grid;
    let shape = grid.shape();
    let mut reader = Reader { body, pos: 0 };
    let payload = match header.kind {
        PayloadKind::GroundTruth => {
            let [amp, phase] = header.arrays.as_slice() else {
                return Err(Error::Malformed("ground truth needs amplitude and phase arrays".into()));
            };
            expect_array(amp, "amplitude", Dtype::Float64, shape)?;
            expect_array(phase, "phase", Dtype::Float64, shape)?;
            let amplitude = to_array(amp.shape, read_f64_vec(reader.take(amp)?))?;
            let phase = to_array(phase.shape, read_f64_vec(reader.take(phase)?))?;
            Payload::GroundTruth(GroundTruth::from_parts(grid, amplitude, phase)?)
        }
        PayloadKind::Interferograms => {
            let (schedule, arrays) = pair_arrays(&header, "counts", Dtype::Uint32)?;
            let noise = header.noise.ok_or_else(|| Error::Malformed("header lacks noise model".into()))?;
            let seed = header.seed.ok_or_else(|| Error::Malformed("header lacks seed".into()))?;
            let counts = arrays.iter().map(|d| read_u32(d, reader.take(d)?)).collect::<Result<_>>()?;
            Payload::Interferograms(InterferogramSet { grid, schedule, noise, seed, counts })
        }
        PayloadKind::Ac => {
            let (schedule, arrays) = pair_arrays(&header, "ac", Dtype::Complex128)?;
            let carrier_removed =
                header.carrier_removed.ok_or_else(|| Error::Malformed("header lacks carrier_removed".into()))?;
            let ac = arrays.iter().map(|d| read_c128(d, reader.take(d)?)).collect::<Result<_>>()?;
            Payload::Ac(AcSet { grid, schedule, ac, carrier_removed })
        }
        PayloadKind::Reconstruction => {
            let [e1, e2, m1, m2, hist] = header.arrays.as_slice() else {
                return Err(Error::Malformed("reconstruction needs five arrays".into()));
            };
            expect_array(e1, "e1", Dtype::Complex128, shape)?;
            expect_array(e2, "e2", Dtype::Complex128, shape)?;
            expect_array(m1, "mask_e1", Dtype::Uint8, shape)?;
            expect_array(m2, "mask_e2", Dtype::Uint8, shape)?;
            expect_array(hist, "error_history", Dtype::Float64, (1, hist.shape[1]))?;
            let e1 = ComplexField::new(grid, read_c128(e1, reader.take(e1)?)?)?;
            let e2 = ComplexField::new(grid, read_c128(e2, reader.take(e2)?)?)?;
            let mask_e1 = read_bool(m1, reader.take(m1)?)?;
            let mask_e2 = read_bool(m2, reader.take(m2)?)?;
            let error_history = read_f64_vec(reader.take(hist)?);
            Payload::Reconstruction(ReconstructionResult { e1, e2, mask_e1, mask_e2, error_history })
        }
    };
    if reader.pos != body.len() {
        return Err(Error::Malformed(format!("{} trailing bytes", body.len() - reader.pos)));
    }
    Ok(payload)
}

pub fn save_container(path: impl AsRef<Path>, payload: &Payload) -> Result<()> {
    let bytes = encode(payload)?;
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    file.sync_all()?;
    Ok(())
}

pub fn load_container(path: impl AsRef<Path>) -> Result<Payload> {
    decode(&fs::read(path)?)
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn nm_columns(grid: &FrequencyGrid, i: usize, j: usize) -> String {
    format!("{i},{j},{},{}", grid.signal_wavelength_nm(i), grid.idler_wavelength_nm(j))
}

/// Writes long-format CSV files into `dir`: one per shear pair for interferograms
/// and AC maps, one per field otherwise. Returns the written paths.
pub fn export_csv(payload: &Payload, dir: impl AsRef<Path>, stem: &str) -> Result<Vec<std::path::PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let grid = payload.grid();
    let cols = "i,j,signal_nm,idler_nm";
    let mut written = Vec::new();
    match payload {
        Payload::Interferograms(s) => {
            for ((k, l), c) in s.schedule.pairs().zip(&s.counts) {
                let path = dir.join(format!("{stem}_k{k}_l{l}.csv"));
                let rows = c.indexed_iter().map(|((i, j), v)| format!("{},{v}", nm_columns(&grid, i, j)));
                write_csv(&path, &format!("{cols},counts"), rows)?;
                written.push(path);
            }
        }
        Payload::Ac(a) => {
            for ((k, l), m) in a.schedule.pairs().zip(&a.ac) {
                let path = dir.join(format!("{stem}_k{k}_l{l}.csv"));
                let rows = m.indexed_iter().map(|((i, j), z)| format!("{},{},{}", nm_columns(&grid, i, j), z.re, z.im));
                write_csv(&path, &format!("{cols},re,im"), rows)?;
                written.push(path);
            }
        }
        Payload::GroundTruth(g) => {
            let path = dir.join(format!("{stem}.csv"));
            let rows = g.amplitude.indexed_iter().map(|((i, j), a)| {
                format!("{},{a},{}", nm_columns(&grid, i, j), g.phase[[i, j]])
            });
            write_csv(&path, &format!("{cols},amplitude,phase_rad"), rows)?;
            written.push(path);
        }
        Payload::Reconstruction(r) => {
            for (name, field, mask) in [("e1", &r.e1, &r.mask_e1), ("e2", &r.e2, &r.mask_e2)] {
                let path = dir.join(format!("{stem}_{name}.csv"));
                let rows = field.values().indexed_iter().map(|((i, j), z)| {
                    format!("{},{},{},{}", nm_columns(&grid, i, j), z.re, z.im, mask[[i, j]] as u8)
                });
                write_csv(&path, &format!("{cols},re,im,mask"), rows)?;
                written.push(path);
            }
            let path = dir.join(format!("{stem}_history.csv"));
            let rows = r.error_history.iter().enumerate().map(|(h, e)| format!("{h},{e}"));
            write_csv(&path, "half_step,model_error", rows)?;
            written.push(path);
        }
    }
    Ok(written)
}
