//! Binary I/O for grids, offset fields and weight tensors.
//!
//! Two grid encodings exist. The raw format is a headerless little-endian
//! u16 stream in flat index order, matching upstream dataset label dumps;
//! extents come from the caller. The container format is self-describing:
//! a 4-byte magic, a u32 version, the three extents as u32, then the same
//! payload. Offset fields and f64 weight tensors use sibling containers.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{Axis, GridDims, OffsetField, VoxelGrid, DEFAULT_VOXEL_SIZE_M, IGNORE_LABEL};

pub const GRID_MAGIC: [u8; 4] = *b"VXG1";
pub const OFFSET_MAGIC: [u8; 4] = *b"VXO1";
pub const WEIGHTS_MAGIC: [u8; 4] = *b"VXW1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridFormat {
    /// Headerless little-endian u16 stream; dims supplied by the caller.
    Raw,
    /// Self-describing "VXG1" container.
    Container,
}

impl std::str::FromStr for GridFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(GridFormat::Raw),
            "container" => Ok(GridFormat::Container),
            other => Err(Error::Config(format!("unknown grid format {other:?}"))),
        }
    }
}

/// Axis nesting of a raw payload, slowest to fastest. The canonical order
/// is (x, y, z): x outermost, z contiguous. Containers are always canonical.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AxisOrder(pub [Axis; 3]);

impl AxisOrder {
    pub fn canonical() -> Self {
        AxisOrder([Axis::X, Axis::Y, Axis::Z])
    }

    pub fn is_canonical(&self) -> bool {
        self.0 == [Axis::X, Axis::Y, Axis::Z]
    }
}

impl Default for AxisOrder {
    fn default() -> Self {
        AxisOrder::canonical()
    }
}

impl std::str::FromStr for AxisOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let axes: Vec<Axis> = s
            .chars()
            .map(|c| c.to_string().parse())
            .collect::<Result<_>>()?;
        if axes.len() != 3 || !Axis::ALL.iter().all(|a| axes.contains(a)) {
            return Err(Error::Config(format!(
                "axis order {s:?} is not a permutation of xyz"
            )));
        }
        Ok(AxisOrder([axes[0], axes[1], axes[2]]))
    }
}

#[derive(Clone, Debug)]
pub struct FormatOptions {
    pub format: GridFormat,
    pub axis_order: AxisOrder,
    pub num_classes: u16,
    pub voxel_size_m: f64,
    /// Sidecar of `dims.total()` 0/1 bytes; voxels marked 1 load as ignore.
    pub invalid_mask: Option<PathBuf>,
}

impl Default for FormatOptions {
    fn default() -> Self {
        FormatOptions {
            format: GridFormat::Container,
            axis_order: AxisOrder::canonical(),
            num_classes: 20,
            voxel_size_m: DEFAULT_VOXEL_SIZE_M,
            invalid_mask: None,
        }
    }
}

impl FormatOptions {
    pub fn raw(num_classes: u16) -> Self {
        FormatOptions {
            format: GridFormat::Raw,
            num_classes,
            ..Default::default()
        }
    }

    pub fn container(num_classes: u16) -> Self {
        FormatOptions {
            num_classes,
            ..Default::default()
        }
    }
}

/// Peek at the first bytes of a file to distinguish container from raw.
pub fn sniff_format(path: &Path) -> Result<GridFormat> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() >= 4 && bytes[..4] == GRID_MAGIC {
        Ok(GridFormat::Container)
    } else {
        Ok(GridFormat::Raw)
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn decode_labels_permuted(bytes: &[u8], dims: GridDims, order: AxisOrder) -> Vec<u16> {
    let total = dims.total();
    if order.is_canonical() {
        return bytes
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .collect();
    }
    let [a0, a1, a2] = order.0;
    let (n0, n1, n2) = (dims.axis_len(a0), dims.axis_len(a1), dims.axis_len(a2));
    let mut labels = vec![0u16; total];
    let mut src = bytes.chunks_exact(2);
    let mut coord = [0usize; 3];
    for c0 in 0..n0 {
        coord[a0.index()] = c0;
        for c1 in 0..n1 {
            coord[a1.index()] = c1;
            for c2 in 0..n2 {
                coord[a2.index()] = c2;
                let b = src.next().unwrap();
                labels[dims.index_of(coord[0], coord[1], coord[2])] =
                    u16::from_le_bytes([b[0], b[1]]);
            }
        }
    }
    labels
}

fn encode_labels_permuted(labels: &[u16], dims: GridDims, order: AxisOrder) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(labels.len() * 2);
    if order.is_canonical() {
        for l in labels {
            bytes.extend_from_slice(&l.to_le_bytes());
        }
        return bytes;
    }
    let [a0, a1, a2] = order.0;
    let (n0, n1, n2) = (dims.axis_len(a0), dims.axis_len(a1), dims.axis_len(a2));
    let mut coord = [0usize; 3];
    for c0 in 0..n0 {
        coord[a0.index()] = c0;
        for c1 in 0..n1 {
            coord[a1.index()] = c1;
            for c2 in 0..n2 {
                coord[a2.index()] = c2;
                let l = labels[dims.index_of(coord[0], coord[1], coord[2])];
                bytes.extend_from_slice(&l.to_le_bytes());
            }
        }
    }
    bytes
}

fn apply_invalid_mask(labels: &mut [u16], path: &Path) -> Result<()> {
    let mask = fs::read(path).map_err(|e| Error::io(path, e))?;
    if mask.len() != labels.len() {
        return Err(Error::Format(format!(
            "invalid-mask {}: expected {} bytes, found {}",
            path.display(),
            labels.len(),
            mask.len()
        )));
    }
    for (label, &flag) in labels.iter_mut().zip(&mask) {
        match flag {
            0 => {}
            1 => *label = IGNORE_LABEL,
            other => {
                return Err(Error::Format(format!(
                    "invalid-mask {}: byte value {other} is not 0 or 1",
                    path.display()
                )))
            }
        }
    }
    Ok(())
}

/// Load a grid. For the raw format `dims` describes the file; the container
/// format carries its own extents and the argument is ignored.
pub fn read_grid(path: &Path, dims: GridDims, opts: &FormatOptions) -> Result<VoxelGrid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (dims, payload) = match opts.format {
        GridFormat::Raw => {
            dims.validate()?;
            let expected = dims.total() * 2;
            if bytes.len() != expected {
                return Err(Error::Format(format!(
                    "{}: raw grid {dims} expects {expected} bytes, found {}",
                    path.display(),
                    bytes.len()
                )));
            }
            (dims, &bytes[..])
        }
        GridFormat::Container => {
            let (header_dims, payload) = parse_container_header(&bytes, GRID_MAGIC, path)?;
            let expected = header_dims.total() * 2;
            if payload.len() != expected {
                return Err(Error::Format(format!(
                    "{}: container grid {header_dims} expects {expected} payload bytes, found {}",
                    path.display(),
                    payload.len()
                )));
            }
            (header_dims, payload)
        }
    };
    let order = match opts.format {
        GridFormat::Raw => opts.axis_order,
        GridFormat::Container => AxisOrder::canonical(),
    };
    let mut labels = decode_labels_permuted(payload, dims, order);
    if let Some(mask_path) = &opts.invalid_mask {
        apply_invalid_mask(&mut labels, mask_path)?;
    }
    Ok(VoxelGrid::new(dims, labels, opts.num_classes)?.with_voxel_size(opts.voxel_size_m))
}

/// Byte-exact inverse of `read_grid` for the chosen format.
pub fn write_grid(grid: &VoxelGrid, path: &Path, opts: &FormatOptions) -> Result<()> {
    let dims = grid.dims();
    let bytes = match opts.format {
        GridFormat::Raw => encode_labels_permuted(grid.labels(), dims, opts.axis_order),
        GridFormat::Container => {
            let mut bytes = container_header(GRID_MAGIC, dims);
            bytes.extend(encode_labels_permuted(
                grid.labels(),
                dims,
                AxisOrder::canonical(),
            ));
            bytes
        }
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn container_header(magic: [u8; 4], dims: GridDims) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(20);
    bytes.extend_from_slice(&magic);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(dims.x as u32).to_le_bytes());
    bytes.extend_from_slice(&(dims.y as u32).to_le_bytes());
    bytes.extend_from_slice(&(dims.z as u32).to_le_bytes());
    bytes
}

fn parse_container_header<'a>(
    bytes: &'a [u8],
    magic: [u8; 4],
    path: &Path,
) -> Result<(GridDims, &'a [u8])> {
    if bytes.len() < 20 {
        return Err(Error::Format(format!(
            "{}: truncated header, {} bytes",
            path.display(),
            bytes.len()
        )));
    }
    if bytes[..4] != magic {
        return Err(Error::Format(format!(
            "{}: unknown magic {:?}, expected {:?}",
            path.display(),
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = read_u32(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let dims = GridDims::new(
        read_u32(bytes, 8) as usize,
        read_u32(bytes, 12) as usize,
        read_u32(bytes, 16) as usize,
    )?;
    Ok((dims, &bytes[20..]))
}

/// Write an offset field as a "VXO1" container: header, then six u32 LE
/// distances per voxel in flat index order.
pub fn write_offsets(field: &OffsetField, path: &Path) -> Result<()> {
    let mut bytes = container_header(OFFSET_MAGIC, field.dims());
    bytes.reserve(field.values().len() * 4);
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_offsets(path: &Path) -> Result<OffsetField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (dims, payload) = parse_container_header(&bytes, OFFSET_MAGIC, path)?;
    let expected = dims.total() * 6 * 4;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "{}: offset field {dims} expects {expected} payload bytes, found {}",
            path.display(),
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    OffsetField::new(dims, values)
}

/// Write an f64 tensor as a "VXW1" container: magic, version, rank, the
/// shape as u32 LE, then the payload as f64 LE.
pub fn write_tensor(path: &Path, shape: &[u32], data: &[f64]) -> Result<()> {
    let count: u64 = shape.iter().map(|&s| s as u64).product();
    if count != data.len() as u64 {
        return Err(Error::Invalid(format!(
            "tensor shape {shape:?} implies {count} values, got {}",
            data.len()
        )));
    }
    let mut bytes = Vec::with_capacity(12 + shape.len() * 4 + data.len() * 8);
    bytes.extend_from_slice(&WEIGHTS_MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for s in shape {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<(Vec<u32>, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 {
        return Err(Error::Format(format!(
            "{}: truncated header, {} bytes",
            path.display(),
            bytes.len()
        )));
    }
    if bytes[..4] != WEIGHTS_MAGIC {
        return Err(Error::Format(format!(
            "{}: unknown magic {:?}, expected \"VXW1\"",
            path.display(),
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    let version = read_u32(&bytes, 4);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let rank = read_u32(&bytes, 8) as usize;
    let payload_at = 12 + rank * 4;
    if bytes.len() < payload_at {
        return Err(Error::Format(format!(
            "{}: truncated shape header",
            path.display()
        )));
    }
    let shape: Vec<u32> = (0..rank).map(|r| read_u32(&bytes, 12 + r * 4)).collect();
    let count: u64 = shape.iter().map(|&s| s as u64).product();
    let expected = count as usize * 8;
    if bytes.len() - payload_at != expected {
        return Err(Error::Format(format!(
            "{}: tensor shape {shape:?} expects {expected} payload bytes, found {}",
            path.display(),
            bytes.len() - payload_at
        )));
    }
    let data = bytes[payload_at..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok((shape, data))
}
