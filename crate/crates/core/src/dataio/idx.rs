use std::path::Path;

use ndarray::{concatenate, Array2, Axis};

use super::bytes::{read_file, Reader};
use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn magic(r: &mut Reader<'_>, expected: u32) -> Result<()> {
    match r.u32_be() {
        Ok(m) if m == expected => Ok(()),
        _ => Err(Error::BadMagic {
            path: r.path().to_path_buf(),
            expected: format!("{expected:#010x}"),
        }),
    }
}

/// Reads an IDX image file and its label file. Pixels are scaled by 1/255,
/// one flattened image per row.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<(Array2<f32>, Vec<usize>)> {
    let buf = read_file(images_path)?;
    let mut r = Reader::new(&buf, images_path);
    magic(&mut r, IMAGE_MAGIC)?;
    let count = r.u32_be()? as usize;
    let rows = r.u32_be()? as usize;
    let cols = r.u32_be()? as usize;
    let pixels = r.take(count * rows * cols)?;
    let images = Array2::from_shape_vec(
        (count, rows * cols),
        pixels.iter().map(|&p| f32::from(p) / 255.0).collect(),
    )
    .expect("checked length");

    let buf = read_file(labels_path)?;
    let mut r = Reader::new(&buf, labels_path);
    magic(&mut r, LABEL_MAGIC)?;
    let num_labels = r.u32_be()? as usize;
    if num_labels != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: num_labels,
        });
    }
    let labels = r.take(num_labels)?.iter().map(|&c| usize::from(c)).collect();
    Ok((images, labels))
}

/// Concatenates several image/label file pairs in order.
pub fn load_idx_pairs<P: AsRef<Path>>(pairs: &[(P, P)]) -> Result<(Array2<f32>, Vec<usize>)> {
    let mut blocks = Vec::with_capacity(pairs.len());
    let mut labels = Vec::new();
    for (images, lab) in pairs {
        let (x, y) = load_idx(images.as_ref(), lab.as_ref())?;
        if let Some(first) = blocks.first().map(|b: &Array2<f32>| b.ncols()) {
            if x.ncols() != first {
                return Err(Error::DimensionMismatch(format!(
                    "image size {} differs from {first}",
                    x.ncols()
                )));
            }
        }
        blocks.push(x);
        labels.extend(y);
    }
    if blocks.is_empty() {
        return Ok((Array2::zeros((0, 0)), labels));
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    Ok((concatenate(Axis(0), &views).expect("matching widths"), labels))
}
