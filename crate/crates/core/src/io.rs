//! Point, coefficient and report files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::SampletBasis;
use crate::cluster_tree::PointCloud;
use crate::error::{Error, Result};
use crate::transform::CoefficientVector;

const POINTS_MAGIC: &[u8; 4] = b"SMPL";
const POINTS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Binary,
}

impl Format {
    /// `.bin` and `.smpl` files are binary, everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin" | "smpl") => Format::Binary,
            _ => Format::Csv,
        }
    }
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: line as usize,
        message: message.into(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => parse_error(path, line, format!("{kind:?}")),
    }
}

pub fn read_points(path: &Path, format: Format) -> Result<PointCloud> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    match format {
        Format::Csv => read_points_csv(path, BufReader::new(file)),
        Format::Binary => read_points_binary(path, BufReader::new(file)),
    }
}

/// CSV with header `x0,...,x{d-1}` and an optional trailing `value` column.
pub fn read_points_csv<R: Read>(path: &Path, reader: R) -> Result<PointCloud> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let has_values = names.last() == Some(&"value");
    let dim = names.len() - usize::from(has_values);
    if dim == 0 {
        return Err(parse_error(path, 1, "header has no coordinate columns"));
    }
    for (a, name) in names.iter().take(dim).enumerate() {
        if *name != format!("x{a}") {
            return Err(parse_error(path, 1, format!("expected column x{a}, found {name:?}")));
        }
    }

    let mut coords = Vec::new();
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != names.len() {
            return Err(parse_error(
                path,
                line,
                format!("expected {} fields, found {}", names.len(), record.len()),
            ));
        }
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_error(path, line, format!("invalid number {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_error(path, line, format!("non-finite value {field:?}")));
            }
            if i < dim {
                coords.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let cloud = PointCloud::new(dim, coords)?;
    if has_values {
        cloud.with_values(values)
    } else {
        Ok(cloud)
    }
}

fn read_exact_or<R: Read>(path: &Path, r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("{}: truncated point file", path.display())),
        _ => Error::Io(e),
    })
}

pub fn read_points_binary<R: Read>(path: &Path, mut r: R) -> Result<PointCloud> {
    let mut head = [0u8; 20];
    read_exact_or(path, &mut r, &mut head)?;
    if &head[..4] != POINTS_MAGIC {
        return Err(Error::Format(format!("{}: not a point file", path.display())));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != POINTS_VERSION {
        return Err(Error::Format(format!("unsupported point file version {version}")));
    }
    let dim = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(head[12..20].try_into().unwrap()) as usize;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let floats = |bytes: &[u8]| -> Vec<f64> {
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let need = dim * n * 8;
    if rest.len() != need && rest.len() != need + 8 * n {
        return Err(Error::Format(format!(
            "{}: expected {} or {} payload bytes, found {}",
            path.display(),
            need,
            need + 8 * n,
            rest.len()
        )));
    }
    let coords = floats(&rest[..need]);
    let cloud = PointCloud::new(dim, coords)?;
    if rest.len() > need {
        cloud.with_values(floats(&rest[need..]))
    } else {
        Ok(cloud)
    }
}

pub fn write_points(path: &Path, cloud: &PointCloud, format: Format) -> Result<()> {
    let w = BufWriter::new(File::create(path).map_err(|e| Error::file(path, e))?);
    match format {
        Format::Csv => write_points_csv(cloud, w),
        Format::Binary => write_points_binary(cloud, w),
    }
}

pub fn write_points_csv<W: Write>(cloud: &PointCloud, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..cloud.dim()).map(|a| format!("x{a}")).collect();
    if cloud.values().is_some() {
        header.push("value".into());
    }
    wtr.write_record(&header).map_err(csv_io)?;
    for (i, p) in cloud.iter().enumerate() {
        let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        if let Some(values) = cloud.values() {
            row.push(values[i].to_string());
        }
        wtr.write_record(&row).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_points_binary<W: Write>(cloud: &PointCloud, mut w: W) -> Result<()> {
    w.write_all(POINTS_MAGIC)?;
    w.write_all(&POINTS_VERSION.to_le_bytes())?;
    w.write_all(&(cloud.dim() as u32).to_le_bytes())?;
    w.write_all(&(cloud.len() as u64).to_le_bytes())?;
    for v in cloud.coords() {
        w.write_all(&v.to_le_bytes())?;
    }
    if let Some(values) = cloud.values() {
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Format(format!("{kind:?}")),
    }
}

/// Basis description stored next to a coefficient file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub n: usize,
    pub dim: usize,
    pub q: usize,
    pub q_hat: usize,
    pub leaf_size: usize,
    /// Original point index at each tree position.
    pub permutation: Vec<usize>,
}

impl Sidecar {
    pub fn of_basis(basis: &SampletBasis) -> Self {
        let tree = basis.tree();
        Self {
            n: basis.len(),
            dim: basis.dim(),
            q: basis.q(),
            q_hat: basis.q_hat(),
            leaf_size: tree.leaf_size(),
            permutation: tree.permutation().to_vec(),
        }
    }

    /// Whether `basis` is the basis these coefficients were computed in.
    pub fn matches(&self, basis: &SampletBasis) -> bool {
        *self == Self::of_basis(basis)
    }
}

pub fn sidecar_path(coefficients: &Path) -> PathBuf {
    let mut s = coefficients.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Coefficient CSV with columns `slot,cluster,level,kind,value`, plus the
/// JSON sidecar at `<path>.json`.
pub fn write_coefficients(path: &Path, basis: &SampletBasis, coeffs: &CoefficientVector) -> Result<()> {
    if coeffs.basis_id() != basis.id() {
        return Err(Error::BasisMismatch);
    }
    let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(path).map_err(|e| Error::file(path, e))?));
    wtr.write_record(["slot", "cluster", "level", "kind", "value"])
        .map_err(csv_io)?;
    let owners = basis.slot_clusters();
    for (slot, v) in coeffs.as_slice().iter().enumerate() {
        let c = owners[slot];
        let kind = if basis.is_scaling_slot(slot) {
            "scaling"
        } else {
            "samplet"
        };
        wtr.write_record([
            slot.to_string(),
            c.to_string(),
            basis.tree().cluster(c).level.to_string(),
            kind.to_string(),
            v.to_string(),
        ])
        .map_err(csv_io)?;
    }
    wtr.flush()?;
    let side = serde_json::to_string_pretty(&Sidecar::of_basis(basis)).map_err(|e| Error::Format(e.to_string()))?;
    let side_path = sidecar_path(path);
    std::fs::write(&side_path, side).map_err(|e| Error::file(&side_path, e))?;
    Ok(())
}

/// Reads coefficient values in slot order and the sidecar.
pub fn read_coefficients(path: &Path) -> Result<(Vec<f64>, Sidecar)> {
    let side_path = sidecar_path(path);
    let text = std::fs::read_to_string(&side_path).map_err(|e| Error::file(&side_path, e))?;
    let side: Sidecar =
        serde_json::from_str(&text).map_err(|e| parse_error(&side_path, e.line() as u64, e.to_string()))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(path).map_err(|e| Error::file(path, e))?));
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let value_col = header
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| parse_error(path, 1, "missing value column"))?;
    let mut values = Vec::with_capacity(side.n);
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = &record[value_col];
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| parse_error(path, line, format!("invalid number {field:?}")))?;
        if !v.is_finite() {
            return Err(parse_error(path, line, format!("non-finite value {field:?}")));
        }
        values.push(v);
    }
    if values.len() != side.n {
        return Err(Error::LengthMismatch {
            expected: side.n,
            got: values.len(),
        });
    }
    Ok((values, side))
}

/// Writes a header and rows of already formatted fields.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header).map_err(csv_io)?;
    for row in rows {
        wtr.write_record(row).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_samplet_basis;
    use crate::cluster_tree::build_cluster_tree;
    use crate::transform::forward_transform;

    fn csv(text: &str) -> Result<PointCloud> {
        read_points_csv(Path::new("test.csv"), text.as_bytes())
    }

    #[test]
    fn csv_examples() {
        let c = csv("x0\n0\n1\n").unwrap();
        assert_eq!((c.dim(), c.len()), (1, 2));
        let c = csv("x0,x1,value\n0.5,1,2\n1,2,3\n").unwrap();
        assert_eq!(c.dim(), 2);
        assert_eq!(c.values(), Some(&[2.0, 3.0][..]));
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        match csv("x0,x1\n0,1\n2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match csv("x0,x1\n0,1\n2,abc\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(csv("x0\nNaN\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(csv("x0\ninf\n"), Err(Error::Parse { .. })));
        assert!(matches!(csv("y0\n1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(csv("x0\n"), Err(Error::EmptyInput)));
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let cloud = PointCloud::new(3, vec![0.1, -2.5, 1e-300, 7.0, 8.0, f64::MIN_POSITIVE])
            .unwrap()
            .with_values(vec![1.0 / 3.0, -0.0])
            .unwrap();
        let mut buf = Vec::new();
        write_points_binary(&cloud, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"SMPL");
        let back = read_points_binary(Path::new("x.bin"), &buf[..]).unwrap();
        assert_eq!(back.coords(), cloud.coords());
        assert_eq!(
            back.values().unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            cloud.values().unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(read_points_binary(Path::new("x.bin"), &buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cloud = PointCloud::new(2, vec![0.1, 1.0 / 3.0, -7e-12, 2.5])
            .unwrap()
            .with_values(vec![std::f64::consts::PI, 1e300])
            .unwrap();
        let mut buf = Vec::new();
        write_points_csv(&cloud, &mut buf).unwrap();
        let back = csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.coords(), cloud.coords());
        assert_eq!(back.values(), cloud.values());
    }

    #[test]
    fn coefficient_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cloud = PointCloud::new(1, (0..50).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let basis = build_samplet_basis(build_cluster_tree(&cloud, 4).unwrap(), 1);
        let f: Vec<f64> = cloud.iter().map(|p| p[0].exp()).collect();
        let c = forward_transform(&basis, &f).unwrap();
        let path = dir.path().join("coeffs.csv");
        write_coefficients(&path, &basis, &c).unwrap();
        let (values, side) = read_coefficients(&path).unwrap();
        assert_eq!(values, c.as_slice());
        assert!(side.matches(&basis));
        assert_eq!(side.q, 1);
    }
}
