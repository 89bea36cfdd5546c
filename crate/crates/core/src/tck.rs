//! MRtrix `.tck` streamline files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::Vec3;

/// Contents of a track file: header fields (other than `count`, `datatype` and `file`)
/// in file order, and the streamlines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TckFile {
    pub properties: Vec<(String, String)>,
    pub tracks: Vec<Vec<Vec3>>,
}

fn header_text(count: usize, properties: &[(String, String)], offset: usize) -> String {
    let mut h = String::from("mrtrix tracks\n");
    for (k, v) in properties {
        h.push_str(&format!("{k}: {v}\n"));
    }
    h.push_str(&format!("count: {count}\ndatatype: Float32LE\nfile: . {offset}\nEND\n"));
    h
}

/// Writes streamlines as little-endian float32 triplets, each followed by a NaN triplet,
/// with an Inf triplet at the end. No timestamp is written, so equal input gives equal bytes.
pub fn write_tck<P: AsRef<[Vec3]>>(
    path: impl AsRef<Path>,
    tracks: &[P],
    properties: &[(String, String)],
) -> Result<()> {
    for (k, _) in properties {
        if matches!(k.as_str(), "count" | "datatype" | "file") || k.contains(':') || k.contains('\n') {
            return Err(Error::Parameter(format!("reserved or malformed header key {k:?}")));
        }
    }
    // The offset field counts its own digits, so settle it by iteration.
    let mut offset = 0;
    let header = loop {
        let h = header_text(tracks.len(), properties, offset);
        if h.len() == offset {
            break h;
        }
        offset = h.len();
    };
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(header.as_bytes())?;
    fn put(out: &mut impl Write, v: [f32; 3]) -> std::io::Result<()> {
        for c in v {
            out.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }
    for t in tracks {
        for p in t.as_ref() {
            put(&mut out, [p.x as f32, p.y as f32, p.z as f32])?;
        }
        put(&mut out, [f32::NAN; 3])?;
    }
    put(&mut out, [f32::INFINITY; 3])?;
    out.flush()?;
    Ok(())
}

pub fn read_tck(path: impl AsRef<Path>) -> Result<TckFile> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != "mrtrix tracks" {
        return Err(Error::Format("missing 'mrtrix tracks' magic".into()));
    }
    let mut properties = Vec::new();
    let mut offset = None;
    let mut datatype = None;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Format("header ends without END".into()));
        }
        let l = line.trim_end();
        if l == "END" {
            break;
        }
        let (k, v) = l
            .split_once(':')
            .ok_or_else(|| Error::Format(format!("bad header line {l:?}")))?;
        let v = v.trim();
        match k.trim() {
            "file" => {
                let off = v
                    .strip_prefix('.')
                    .map(str::trim)
                    .and_then(|o| o.parse::<u64>().ok())
                    .ok_or_else(|| Error::Format(format!("unsupported file field {v:?}")))?;
                offset = Some(off);
            }
            "datatype" => datatype = Some(v.to_string()),
            "count" => {}
            k => properties.push((k.to_string(), v.to_string())),
        }
    }
    let offset = offset.ok_or_else(|| Error::Format("header has no file field".into()))?;
    let (width, little) = match datatype.as_deref() {
        Some("Float32LE") => (4, true),
        Some("Float32BE") => (4, false),
        Some("Float64LE") => (8, true),
        Some("Float64BE") => (8, false),
        other => return Err(Error::Unsupported(format!("track datatype {other:?}"))),
    };

    reader.seek(SeekFrom::Start(offset))?;
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    let value = |b: &[u8]| -> f64 {
        match (width, little) {
            (4, true) => f32::from_le_bytes(b.try_into().unwrap()) as f64,
            (4, false) => f32::from_be_bytes(b.try_into().unwrap()) as f64,
            (_, true) => f64::from_le_bytes(b.try_into().unwrap()),
            (_, false) => f64::from_be_bytes(b.try_into().unwrap()),
        }
    };

    let mut tracks = Vec::new();
    let mut current = Vec::new();
    for triplet in body.chunks_exact(3 * width) {
        let p = Vec3::new(
            value(&triplet[..width]),
            value(&triplet[width..2 * width]),
            value(&triplet[2 * width..]),
        );
        if p.x.is_nan() {
            tracks.push(std::mem::take(&mut current));
        } else if p.x.is_infinite() {
            break;
        } else {
            current.push(p);
        }
    }
    if !current.is_empty() {
        tracks.push(current);
    }
    Ok(TckFile { properties, tracks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tck");
        let tracks = vec![
            vec![Vec3::new(0.0, 1.5, -2.25), Vec3::new(0.5, 1.5, -2.25)],
            vec![Vec3::new(10.0, 0.0, 0.0)],
            vec![],
        ];
        let props = vec![("step_size".to_string(), "0.6".to_string())];
        write_tck(&p, &tracks, &props).unwrap();
        let back = read_tck(&p).unwrap();
        assert_eq!(back.tracks, tracks);
        assert_eq!(back.properties, props);
    }

    #[test]
    fn header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tck");
        write_tck(&p, &[vec![Vec3::zeros()]], &[]).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.starts_with("mrtrix tracks\n"));
        let end = text.find("END\n").unwrap() + 4;
        assert!(text[..end].contains(&format!("file: . {end}\n")));
        assert!(text[..end].contains("count: 1\n"));
        // One point, a NaN separator and the Inf terminator.
        assert_eq!(bytes.len() - end, 3 * 12);
        let last = f32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        assert!(last.is_infinite());
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.tck");
        std::fs::write(&p, "not tracks\nEND\n").unwrap();
        assert!(matches!(read_tck(&p), Err(Error::Format(_))));
    }

    #[test]
    fn reserved_keys_refused() {
        let dir = tempfile::tempdir().unwrap();
        let props = vec![("count".to_string(), "3".to_string())];
        assert!(write_tck(dir.path().join("x.tck"), &[vec![Vec3::zeros()]], &props).is_err());
    }
}
