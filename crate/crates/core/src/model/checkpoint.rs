//! Binary checkpoint format.
//!
//! ```text
//! magic    8 bytes   "SNTGCKPT"
//! version  u32 LE    1
//! count    u32 LE    number of arrays
//! then per array:
//!   name_len u32 LE, name (UTF-8)
//!   rows u64 LE, cols u64 LE
//!   rows*cols f64 LE values, row-major
//! ```
//!
//! The names and shapes form the manifest; values are stored bit-exact.

use std::io::{Read, Write};

use super::{Layer, Mlp};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const MAGIC: &[u8; 8] = b"SNTGCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub values: Matrix,
}

impl NamedArray {
    pub fn new(name: impl Into<String>, values: Matrix) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    pub fn scalar(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, Matrix::filled(1, 1, value))
    }
}

pub fn write_arrays<W: Write>(mut out: W, arrays: &[NamedArray]) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(arrays.len() as u32).to_le_bytes())?;
    for array in arrays {
        let name = array.name.as_bytes();
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name)?;
        out.write_all(&(array.values.rows() as u64).to_le_bytes())?;
        out.write_all(&(array.values.cols() as u64).to_le_bytes())?;
        for v in array.values.as_slice() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_exact<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("unexpected end of data: {e}")))?;
    Ok(buf)
}

pub fn read_arrays<R: Read>(mut input: R) -> Result<Vec<NamedArray>> {
    if &read_exact::<8, _>(&mut input)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_exact(&mut input)?);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = u32::from_le_bytes(read_exact(&mut input)?);
    let mut arrays = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = u32::from_le_bytes(read_exact(&mut input)?) as usize;
        let mut name = vec![0u8; len];
        input
            .read_exact(&mut name)
            .map_err(|e| Error::Checkpoint(format!("truncated name: {e}")))?;
        let name =
            String::from_utf8(name).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))?;
        let rows = u64::from_le_bytes(read_exact(&mut input)?) as usize;
        let cols = u64::from_le_bytes(read_exact(&mut input)?) as usize;
        let total = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Checkpoint(format!("{name}: shape overflow")))?;
        let mut values = Vec::with_capacity(total.min(1 << 24));
        for _ in 0..total {
            values.push(f64::from_le_bytes(read_exact(&mut input)?));
        }
        arrays.push(NamedArray::new(name, Matrix::from_vec(rows, cols, values)?));
    }
    Ok(arrays)
}

impl Mlp {
    /// Arrays `{prefix}meta` (leaky slope, layer count), `{prefix}layer{i}.weight`
    /// and `{prefix}layer{i}.bias` (a 1×out row).
    pub fn to_arrays(&self, prefix: &str) -> Vec<NamedArray> {
        let mut arrays = vec![NamedArray::new(
            format!("{prefix}meta"),
            Matrix::from_rows(&[[self.leaky_slope, self.layers.len() as f64]]).expect("1x2"),
        )];
        for (i, layer) in self.layers.iter().enumerate() {
            arrays.push(NamedArray::new(
                format!("{prefix}layer{i}.weight"),
                layer.weights.clone(),
            ));
            arrays.push(NamedArray::new(
                format!("{prefix}layer{i}.bias"),
                Matrix::from_vec(1, layer.bias.len(), layer.bias.clone()).expect("row"),
            ));
        }
        arrays
    }

    pub fn from_arrays(arrays: &[NamedArray], prefix: &str) -> Result<Self> {
        let find = |name: String| {
            arrays
                .iter()
                .find(|a| a.name == name)
                .map(|a| &a.values)
                .ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))
        };
        let meta = find(format!("{prefix}meta"))?;
        if meta.shape() != (1, 2) {
            return Err(Error::Checkpoint("meta must be 1x2".into()));
        }
        let slope = meta.get(0, 0);
        let count = meta.get(0, 1) as usize;
        let mut layers = Vec::with_capacity(count);
        for i in 0..count {
            let weights = find(format!("{prefix}layer{i}.weight"))?.clone();
            let bias = find(format!("{prefix}layer{i}.bias"))?;
            if bias.rows() != 1 {
                return Err(Error::Checkpoint(format!(
                    "layer {i} bias must be a single row"
                )));
            }
            layers.push(Layer {
                weights,
                bias: bias.as_slice().to_vec(),
            });
        }
        Mlp::from_layers(layers, slope)
    }
}
