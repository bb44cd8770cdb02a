//! MRC2014 volume/stack files.
//!
//! Writing always uses mode 2 (little-endian 32-bit float, x fastest);
//! reading accepts modes 0 (int8), 1 (int16), and 2, promoting to f64.
//! Headers written by this module are fully deterministic: statistics are
//! recomputed from the payload and no timestamps are recorded.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::grid::{Projection, Volume};

const HEADER_LEN: usize = 1024;
const MAGIC_OFFSET: usize = 208;
const LABEL: &[u8] = b"resire-core mrc2014";

/// Raw contents of an MRC file, indexed `[x, y, z]`.
#[derive(Debug, Clone)]
pub struct MrcData {
    data: Array3<f64>,
}

impl MrcData {
    pub fn dims(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    /// Interprets the array as a single volume.
    pub fn into_volume(self) -> Result<Volume> {
        Volume::new(self.data)
    }

    /// Interprets the z axis as a stack of nz projections.
    pub fn into_projections(self) -> Result<Vec<Projection>> {
        let (nx, ny, nz) = self.data.dim();
        let mut out = Vec::with_capacity(nz);
        for k in 0..nz {
            let plane = self.data.slice(ndarray::s![.., .., k]).to_owned();
            debug_assert_eq!(plane.dim(), (nx, ny));
            out.push(Projection::new(plane)?);
        }
        Ok(out)
    }
}

fn put_i32(buf: &mut [u8], offset: usize, value: i32) {
    buf[offset..offset + 4].copy_from_slice(&value.to_le_bytes());
}

fn put_f32(buf: &mut [u8], offset: usize, value: f32) {
    buf[offset..offset + 4].copy_from_slice(&value.to_le_bytes());
}

fn get_i32(buf: &[u8], offset: usize) -> i32 {
    i32::from_le_bytes(buf[offset..offset + 4].try_into().unwrap())
}

struct Stats {
    min: f32,
    max: f32,
    mean: f32,
    rms: f32,
}

fn stats(values: impl Iterator<Item = f64> + Clone, count: usize) -> Stats {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for v in values.clone() {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    let mean = sum / count as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
    Stats {
        min: min as f32,
        max: max as f32,
        mean: mean as f32,
        rms: var.sqrt() as f32,
    }
}

fn build_header(dims: (usize, usize, usize), is_volume: bool, st: &Stats) -> Vec<u8> {
    let mut h = vec![0u8; HEADER_LEN];
    let (nx, ny, nz) = dims;
    put_i32(&mut h, 0, nx as i32);
    put_i32(&mut h, 4, ny as i32);
    put_i32(&mut h, 8, nz as i32);
    put_i32(&mut h, 12, 2); // mode 2: f32
    // nxstart/nystart/nzstart stay 0
    put_i32(&mut h, 28, nx as i32); // mx/my/mz
    put_i32(&mut h, 32, ny as i32);
    put_i32(&mut h, 36, nz as i32);
    put_f32(&mut h, 40, nx as f32); // cell dims, 1 unit per voxel
    put_f32(&mut h, 44, ny as f32);
    put_f32(&mut h, 48, nz as f32);
    put_f32(&mut h, 52, 90.0); // cell angles
    put_f32(&mut h, 56, 90.0);
    put_f32(&mut h, 60, 90.0);
    put_i32(&mut h, 64, 1); // mapc/mapr/maps: x, y, z
    put_i32(&mut h, 68, 2);
    put_i32(&mut h, 72, 3);
    put_f32(&mut h, 76, st.min);
    put_f32(&mut h, 80, st.max);
    put_f32(&mut h, 84, st.mean);
    put_i32(&mut h, 88, if is_volume { 1 } else { 0 }); // ispg
    put_i32(&mut h, 92, 0); // nsymbt
    h[104..108].copy_from_slice(b"MRCO"); // exttyp
    put_i32(&mut h, 108, 20140); // nversion
    // origin stays (0, 0, 0)
    h[MAGIC_OFFSET..MAGIC_OFFSET + 4].copy_from_slice(b"MAP ");
    h[212..216].copy_from_slice(&[0x44, 0x44, 0x00, 0x00]); // little-endian stamp
    put_f32(&mut h, 216, st.rms);
    put_i32(&mut h, 220, 1); // nlabl
    h[224..224 + LABEL.len()].copy_from_slice(LABEL);
    for b in h[224 + LABEL.len()..224 + 80].iter_mut() {
        *b = b' ';
    }
    h
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("mrc.tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_payload(bytes: &mut Vec<u8>, dims: (usize, usize, usize), value: impl Fn(usize, usize, usize) -> f64) {
    let (nx, ny, nz) = dims;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                bytes.extend_from_slice(&(value(x, y, z) as f32).to_le_bytes());
            }
        }
    }
}

/// Writes a volume as a mode-2 MRC file (atomic: temp file then rename).
pub fn write_mrc(path: impl AsRef<Path>, v: &Volume) -> Result<()> {
    let path = path.as_ref();
    let dims = v.dims();
    let count = dims.0 * dims.1 * dims.2;
    let st = stats(v.data().iter().copied(), count);
    let mut bytes = build_header(dims, true, &st);
    bytes.reserve(count * 4);
    write_payload(&mut bytes, dims, |x, y, z| v.data()[[x, y, z]]);
    write_atomic(path, &bytes)
}

/// Writes a projection stack as a mode-2 MRC file with nz = stack depth.
pub fn write_mrc_projections(path: impl AsRef<Path>, projections: &[Projection]) -> Result<()> {
    let path = path.as_ref();
    if projections.is_empty() {
        return Err(Error::invalid("cannot write an empty projection stack"));
    }
    let (nx, ny) = projections[0].dims();
    if projections.iter().any(|p| p.dims() != (nx, ny)) {
        return Err(Error::invalid("projections must share dimensions"));
    }
    let nz = projections.len();
    let count = nx * ny * nz;
    let st = stats(
        projections.iter().flat_map(|p| p.data().iter().copied()),
        count,
    );
    let mut bytes = build_header((nx, ny, nz), false, &st);
    bytes.reserve(count * 4);
    write_payload(&mut bytes, (nx, ny, nz), |x, y, z| {
        projections[z].data()[[x, y]]
    });
    write_atomic(path, &bytes)
}

/// Reads an MRC file, promoting the payload to f64.
pub fn read_mrc(path: impl AsRef<Path>) -> Result<MrcData> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            path,
            bytes.len() as u64,
            format!("header truncated: need {HEADER_LEN} bytes, found {}", bytes.len()),
        ));
    }
    if &bytes[MAGIC_OFFSET..MAGIC_OFFSET + 4] != b"MAP " {
        return Err(Error::format(
            path,
            MAGIC_OFFSET as u64,
            "bad magic: expected 'MAP '",
        ));
    }
    let nx = get_i32(&bytes, 0);
    let ny = get_i32(&bytes, 4);
    let nz = get_i32(&bytes, 8);
    if nx <= 0 || ny <= 0 || nz <= 0 {
        return Err(Error::format(
            path,
            0,
            format!("non-positive dimensions ({nx}, {ny}, {nz})"),
        ));
    }
    let mode = get_i32(&bytes, 12);
    let bytes_per: u64 = match mode {
        0 => 1,
        1 => 2,
        2 => 4,
        other => {
            return Err(Error::format(
                path,
                12,
                format!("unsupported mode {other} (expected 0, 1, or 2)"),
            ));
        }
    };
    let nsymbt = get_i32(&bytes, 92);
    if nsymbt < 0 {
        return Err(Error::format(path, 92, format!("negative nsymbt {nsymbt}")));
    }
    let (nx, ny, nz) = (nx as u64, ny as u64, nz as u64);
    let voxels = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nz))
        .filter(|&v| v <= (usize::MAX / 8) as u64)
        .ok_or_else(|| Error::format(path, 0, "dimension overflow"))?;
    let payload_len = voxels * bytes_per;
    let expected = HEADER_LEN as u64 + nsymbt as u64 + payload_len;
    if bytes.len() as u64 != expected {
        return Err(Error::format(
            path,
            bytes.len().min(HEADER_LEN) as u64,
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let payload = &bytes[HEADER_LEN + nsymbt as usize..];
    let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
    let mut data = Array3::zeros((nx, ny, nz));
    let mut idx = 0usize;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let v = match mode {
                    0 => payload[idx] as i8 as f64,
                    1 => i16::from_le_bytes([payload[idx], payload[idx + 1]]) as f64,
                    _ => f32::from_le_bytes(
                        payload[idx..idx + 4].try_into().unwrap(),
                    ) as f64,
                };
                data[[x, y, z]] = v;
                idx += bytes_per as usize;
            }
        }
    }
    Ok(MrcData { data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use tempfile::tempdir;

    fn random_volume(dims: (usize, usize, usize), seed: u64) -> Volume {
        let mut state = seed | 1;
        Volume::new(Array3::from_shape_fn(dims, |_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 20.0 - 10.0
        }))
        .unwrap()
    }

    #[test]
    fn round_trip_is_lossless_at_f32() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("vol.mrc");
        let v = random_volume((16, 16, 16), 5);
        write_mrc(&path, &v).unwrap();
        let back = read_mrc(&path).unwrap().into_volume().unwrap();
        for (a, b) in back.data().iter().zip(v.data().iter()) {
            assert_eq!(*a, *b as f32 as f64);
        }
    }

    #[test]
    fn file_size_formula_holds() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("vol.mrc");
        write_mrc(&path, &random_volume((64, 64, 64), 7)).unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, 1024 + 64 * 64 * 64 * 4);
    }

    #[test]
    fn zero_volume_has_zero_statistics() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("zero.mrc");
        write_mrc(&path, &Volume::zeros((4, 4, 4))).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        for off in [76, 80, 84, 216] {
            assert_eq!(f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()), 0.0);
        }
    }

    #[test]
    fn stack_round_trip_and_depth() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("stack.mrc");
        let mut projections = Vec::new();
        for i in 0..41 {
            projections
                .push(Projection::new(Array2::from_elem((8, 8), i as f64 * 0.5)).unwrap());
        }
        write_mrc_projections(&path, &projections).unwrap();
        let back = read_mrc(&path).unwrap();
        assert_eq!(back.dims(), (8, 8, 41));
        let ps = back.into_projections().unwrap();
        assert_eq!(ps.len(), 41);
        assert_eq!(ps[40].data()[[0, 0]], 20.0);
    }

    #[test]
    fn truncated_file_names_byte_counts() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trunc.mrc");
        write_mrc(&path, &random_volume((8, 8, 8), 9)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 100]).unwrap();
        let err = read_mrc(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(&format!("{}", 1024 + 8 * 8 * 8 * 4)), "{msg}");
        assert!(msg.contains(&format!("{}", bytes.len() - 100)), "{msg}");
    }

    #[test]
    fn rejects_bad_magic_and_mode() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.mrc");
        write_mrc(&path, &random_volume((4, 4, 4), 11)).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[208] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_mrc(&path), Err(Error::Format { .. })));

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[208] = b'M';
        bytes[12] = 7;
        std::fs::write(&path, &bytes).unwrap();
        let err = read_mrc(&path).unwrap_err();
        assert!(err.to_string().contains("mode 7"));
    }

    #[test]
    fn reads_integer_modes_with_promotion() {
        let dir = tempdir().unwrap();
        for (mode, payload, expect) in [
            (0i32, vec![0xFFu8, 0x02], vec![-1.0, 2.0]),
            (1i32, vec![0xFE, 0xFF, 0x03, 0x00], vec![-2.0, 3.0]),
        ] {
            let path = dir.path().join(format!("m{mode}.mrc"));
            // minimal 2x1x1 file of the given mode
            let st = Stats { min: 0.0, max: 0.0, mean: 0.0, rms: 0.0 };
            let mut bytes = build_header((2, 1, 1), true, &st);
            put_i32(&mut bytes, 12, mode);
            bytes.extend_from_slice(&payload);
            std::fs::write(&path, &bytes).unwrap();
            let data = read_mrc(&path).unwrap();
            assert_eq!(data.data()[[0, 0, 0]], expect[0]);
            assert_eq!(data.data()[[1, 0, 0]], expect[1]);
        }
    }

    #[test]
    fn payload_order_is_x_fastest() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("order.mrc");
        let mut v = Volume::zeros((2, 2, 2));
        v.data_mut()[[1, 0, 0]] = 1.0; // second value in file order
        write_mrc(&path, &v).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let second = f32::from_le_bytes(bytes[1024 + 4..1024 + 8].try_into().unwrap());
        assert_eq!(second, 1.0);
    }
}
