//! Raw little-endian payload plus JSON sidecar header.
//!
//! `<name>.json` holds `dims`, `spacing_mm`, `origin_mm`, `dtype` and `order`;
//! `<name>.raw` holds the voxels, x-fastest. Spacing and origin are written as
//! decimal strings so they survive a round trip without drift.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::{Geometry, MaskKind, MaskVolume, Volume};
use crate::error::{Error, Result};

const VOLUME_DTYPE: &str = "int16-le";
const MASK_DTYPE: &str = "uint8";
const ORDER: &str = "x-fastest";

fn pair_paths(path: &Path) -> (PathBuf, PathBuf) {
    let header = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("raw") => path.with_extension("json"),
        _ => append_ext(path, "json"),
    };
    let raw = header.with_extension("raw");
    (header, raw)
}

fn append_ext(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_header(path: &Path, expected_dtype: &'static str) -> Result<Geometry> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingHeader(path.to_path_buf()))
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    let value: Value = serde_json::from_str(&text).map_err(|e| malformed(path, e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| malformed(path, "header is not a JSON object"))?;

    let dtype = obj
        .get("dtype")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed(path, "missing string key `dtype`"))?;
    if dtype != expected_dtype {
        return Err(Error::UnsupportedDtype {
            found: dtype.to_string(),
            expected: expected_dtype,
        });
    }
    let order = obj
        .get("order")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed(path, "missing string key `order`"))?;
    if order != ORDER {
        return Err(malformed(path, format!("unsupported order {order:?}")));
    }

    let dims_v = obj
        .get("dims")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 3)
        .ok_or_else(|| malformed(path, "`dims` must be an array of 3 integers"))?;
    let mut dims = [0usize; 3];
    for (d, v) in dims.iter_mut().zip(dims_v) {
        *d = v
            .as_u64()
            .ok_or_else(|| malformed(path, "`dims` must be an array of 3 integers"))?
            as usize;
    }
    let spacing = real_triple(path, obj.get("spacing_mm"), "spacing_mm")?;
    let origin = real_triple(path, obj.get("origin_mm"), "origin_mm")?;
    Geometry::new(dims, spacing, origin).map_err(|e| malformed(path, e.to_string()))
}

/// Accepts decimal strings (the written form) or plain JSON numbers.
fn real_triple(path: &Path, v: Option<&Value>, key: &str) -> Result<[f64; 3]> {
    let arr = v
        .and_then(Value::as_array)
        .filter(|a| a.len() == 3)
        .ok_or_else(|| malformed(path, format!("`{key}` must be an array of 3 reals")))?;
    let mut out = [0.0; 3];
    for (o, item) in out.iter_mut().zip(arr) {
        *o = match item {
            Value::String(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| malformed(path, format!("`{key}` entry {s:?} is not a real")))?,
            Value::Number(n) => n
                .as_f64()
                .ok_or_else(|| malformed(path, format!("`{key}` entry is not a real")))?,
            _ => return Err(malformed(path, format!("`{key}` entries must be strings or numbers"))),
        };
    }
    Ok(out)
}

fn header_json(geometry: &Geometry, dtype: &str) -> String {
    let doc = json!({
        "dims": geometry.dims,
        "spacing_mm": geometry.spacing_strings(),
        "origin_mm": geometry.origin_strings(),
        "dtype": dtype,
        "order": ORDER,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("header serializes");
    s.push('\n');
    s
}

fn read_payload(path: &Path, expected: usize) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected {
        return Err(Error::PayloadLength {
            expected,
            found: bytes.len(),
        });
    }
    Ok(bytes)
}

/// Writes via a temporary sibling and a rename so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("path has no file name")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let (header, raw) = pair_paths(path.as_ref());
    let geometry = read_header(&header, VOLUME_DTYPE)?;
    let bytes = read_payload(&raw, geometry.len() * 2)?;
    let voxels = bytes
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect();
    Volume::new(geometry, voxels)
}

pub fn save_volume(volume: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let (header, raw) = pair_paths(path.as_ref());
    let mut bytes = Vec::with_capacity(volume.voxels().len() * 2);
    for v in volume.voxels() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(&raw, &bytes)?;
    write_atomic(&header, header_json(&volume.geometry, VOLUME_DTYPE).as_bytes())
}

pub fn load_mask(path: impl AsRef<Path>, kind: MaskKind) -> Result<MaskVolume> {
    let (header, raw) = pair_paths(path.as_ref());
    let geometry = read_header(&header, MASK_DTYPE)?;
    let bytes = read_payload(&raw, geometry.len())?;
    MaskVolume::new(geometry, kind, bytes)
}

pub fn save_mask(mask: &MaskVolume, path: impl AsRef<Path>) -> Result<()> {
    let (header, raw) = pair_paths(path.as_ref());
    write_atomic(&raw, mask.labels())?;
    write_atomic(&header, header_json(&mask.geometry, MASK_DTYPE).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_pair(dir: &Path, name: &str, header: &str, payload: &[u8]) -> PathBuf {
        let base = dir.join(name);
        fs::write(append_ext(&base, "json"), header).unwrap();
        fs::write(append_ext(&base, "raw"), payload).unwrap();
        base
    }

    const HEADER_221: &str = r#"{"dims":[2,2,1],"spacing_mm":[1,1,1],"origin_mm":[0,0,0],"dtype":"int16-le","order":"x-fastest"}"#;

    #[test]
    fn loads_zero_payload() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_pair(dir.path(), "v", HEADER_221, &[0u8; 8]);
        let v = load_volume(&p).unwrap();
        assert_eq!(v.voxels(), &[0, 0, 0, 0]);
        assert_eq!(v.geometry.dims, [2, 2, 1]);
    }

    #[test]
    fn short_payload_is_length_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_pair(dir.path(), "v", HEADER_221, &[0u8; 7]);
        assert!(matches!(
            load_volume(&p),
            Err(Error::PayloadLength { expected: 8, found: 7 })
        ));
    }

    #[test]
    fn distinct_header_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_volume(dir.path().join("nope")),
            Err(Error::MissingHeader(_))
        ));
        let p = write_pair(dir.path(), "bad", "{not json", &[0u8; 8]);
        assert!(matches!(load_volume(&p), Err(Error::MalformedHeader { .. })));
        let p = write_pair(
            dir.path(),
            "f32",
            &HEADER_221.replace("int16-le", "float32"),
            &[0u8; 16],
        );
        assert!(matches!(load_volume(&p), Err(Error::UnsupportedDtype { .. })));
        let p = write_pair(
            dir.path(),
            "nodims",
            r#"{"spacing_mm":[1,1,1],"origin_mm":[0,0,0],"dtype":"int16-le","order":"x-fastest"}"#,
            &[0u8; 8],
        );
        assert!(matches!(load_volume(&p), Err(Error::MalformedHeader { .. })));
    }

    #[test]
    fn roundtrip_preserves_spacing_strings() {
        let dir = tempfile::tempdir().unwrap();
        let g = Geometry::new([3, 2, 2], [0.5, 0.5, 3.0], [-10.25, 4.0, 0.1]).unwrap();
        let vox: Vec<i16> = (0..12).map(|i| i * 100 - 500).collect();
        let v = Volume::new(g, vox).unwrap();
        let p = dir.path().join("scan.json");
        save_volume(&v, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"0.5\"") && text.contains("\"3.0\""));
        let back = load_volume(&p).unwrap();
        assert_eq!(back, v);
        assert!(back.geometry.same_as(&g));
        let raw1 = fs::read(dir.path().join("scan.raw")).unwrap();
        save_volume(&back, dir.path().join("again")).unwrap();
        assert_eq!(raw1, fs::read(dir.path().join("again.raw")).unwrap());
    }

    #[test]
    fn mask_roundtrip_and_label_check() {
        let dir = tempfile::tempdir().unwrap();
        let g = Geometry::unit([2, 2, 1]).unwrap();
        let m = MaskVolume::new(g, MaskKind::Territory, vec![0, 1, 2, 4]).unwrap();
        save_mask(&m, dir.path().join("terr")).unwrap();
        assert_eq!(load_mask(dir.path().join("terr"), MaskKind::Territory).unwrap(), m);
        assert!(matches!(
            load_mask(dir.path().join("terr"), MaskKind::Binary),
            Err(Error::InvalidLabel { .. })
        ));
    }

    #[test]
    fn save_to_unwritable_path_fails() {
        let g = Geometry::unit([1, 1, 1]).unwrap();
        let v = Volume::filled(g, 0);
        let err = save_volume(&v, "/nonexistent-dir/sub/vol").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
