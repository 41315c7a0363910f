//! Datasets and file formats.
//!
//! * Image sources: the STL-10 binary layout, and a synthetic generator of
//!   smooth anisotropic textures for desk-scale runs.
//! * Sequence generators: a crop window random-walking one pixel per frame
//!   inside a source image, and a sprite bouncing across a dark canvas.
//! * CSV node series (rows are time points, columns are nodes).
//! * GTS1 tensors: `"GTS1"`, rank as `u32` LE, each dim as `u32` LE, then
//!   the values as `f32` LE in row-major order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{derive_seed, Rng};

/// Grayscale images with pixels in `[-1, 1]`, stored row-major one after
/// another.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl ImageSet {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroDimension { what: "image size" });
        }
        if !pixels.len().is_multiple_of(height * width) {
            return Err(Error::LengthMismatch {
                what: "image pixels (multiple of height*width)",
                expected: (pixels.len() / (height * width) + 1) * height * width,
                got: pixels.len(),
            });
        }
        if let Some(v) = pixels.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange {
                name: "pixel",
                range: "[-1, 1]",
                value: *v,
            });
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn count(&self) -> usize {
        self.pixels.len() / (self.height * self.width)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let size = self.height * self.width;
        &self.pixels[i * size..(i + 1) * size]
    }
}

pub const STL10_SIDE: usize = 96;
pub const STL10_IMAGE_BYTES: usize = 3 * STL10_SIDE * STL10_SIDE;

/// Decodes STL-10 binary image data: per image three 96x96 planes (R, G,
/// B), each stored column-major. Pixels become BT.601 luma mapped to
/// `[-1, 1]` by `v / 127.5 - 1`.
pub fn parse_stl10(bytes: &[u8], source: &str) -> Result<ImageSet> {
    if !bytes.len().is_multiple_of(STL10_IMAGE_BYTES) {
        return Err(Error::format(
            source,
            format!(
                "size {} is not a multiple of {STL10_IMAGE_BYTES} bytes per image",
                bytes.len()
            ),
        ));
    }
    let plane = STL10_SIDE * STL10_SIDE;
    let mut pixels = Vec::with_capacity(bytes.len() / 3);
    for img in bytes.chunks_exact(STL10_IMAGE_BYTES) {
        for row in 0..STL10_SIDE {
            for col in 0..STL10_SIDE {
                let at = col * STL10_SIDE + row;
                let (r, g, b) = (img[at] as f64, img[plane + at] as f64, img[2 * plane + at] as f64);
                // integer weights keep white exactly at 255
                let luma = (299.0 * r + 587.0 * g + 114.0 * b) / 1000.0;
                pixels.push((luma / 127.5 - 1.0).clamp(-1.0, 1.0));
            }
        }
    }
    ImageSet::new(STL10_SIDE, STL10_SIDE, pixels)
}

pub fn load_stl10(path: impl AsRef<Path>) -> Result<ImageSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_stl10(&bytes, &path.display().to_string())
}

/// Correlation lengths (Gaussian blur widths, in pixels) of the synthetic
/// textures along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextureParams {
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl Default for TextureParams {
    fn default() -> Self {
        Self {
            sigma_x: 4.0,
            sigma_y: 1.0,
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Smooth random textures: white noise blurred with an axis-aligned
/// Gaussian, then min-max normalized to `[-1, 1]` per image.
pub fn generate_texture_images(
    count: usize,
    height: usize,
    width: usize,
    params: TextureParams,
    seed: u64,
) -> Result<ImageSet> {
    if height == 0 || width == 0 {
        return Err(Error::ZeroDimension { what: "image size" });
    }
    let kx = gaussian_kernel(params.sigma_x);
    let ky = gaussian_kernel(params.sigma_y);
    let (px, py) = (kx.len() / 2, ky.len() / 2);
    let (ph, pw) = (height + 2 * py, width + 2 * px);

    let mut pixels = Vec::with_capacity(count * height * width);
    for i in 0..count {
        let mut rng = Rng::new(derive_seed(seed, i as u64));
        let noise: Vec<f64> = (0..ph * pw).map(|_| rng.normal()).collect();
        // horizontal pass: ph x width
        let mut tmp = vec![0.0; ph * width];
        for r in 0..ph {
            for c in 0..width {
                tmp[r * width + c] = kx.iter().enumerate().map(|(k, w)| w * noise[r * pw + c + k]).sum();
            }
        }
        // vertical pass: height x width
        let mut img = vec![0.0; height * width];
        for r in 0..height {
            for c in 0..width {
                img[r * width + c] = ky.iter().enumerate().map(|(k, w)| w * tmp[(r + k) * width + c]).sum();
            }
        }
        let lo = img.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = img.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        for v in &mut img {
            *v = if span > 0.0 {
                (2.0 * (*v - lo) / span - 1.0).clamp(-1.0, 1.0)
            } else {
                0.0
            };
        }
        pixels.extend(img);
    }
    ImageSet::new(height, width, pixels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Full,
    Train,
    Test,
}

/// Fixed-length sequences of frames; each sequence is a `T x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    sequences: Vec<Matrix>,
    frames: usize,
    frame_dim: usize,
    /// `(height, width)` when frames are images on a pixel grid.
    frame_shape: Option<(usize, usize)>,
    pub split: Split,
}

impl SequenceDataset {
    pub fn new(sequences: Vec<Matrix>, frame_shape: Option<(usize, usize)>) -> Result<Self> {
        let first = sequences.first().ok_or(Error::EmptyDataset)?;
        let (frames, frame_dim) = first.shape();
        for s in &sequences {
            if s.shape() != (frames, frame_dim) {
                return Err(Error::LengthMismatch {
                    what: "sequence shape (frames*dim)",
                    expected: frames * frame_dim,
                    got: s.rows() * s.cols(),
                });
            }
        }
        if let Some((h, w)) = frame_shape {
            if h * w != frame_dim {
                return Err(Error::LengthMismatch {
                    what: "frame shape",
                    expected: frame_dim,
                    got: h * w,
                });
            }
        }
        Ok(Self {
            sequences,
            frames,
            frame_dim,
            frame_shape,
            split: Split::Full,
        })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn frames_per_sequence(&self) -> usize {
        self.frames
    }

    pub fn frame_dim(&self) -> usize {
        self.frame_dim
    }

    pub fn frame_shape(&self) -> Option<(usize, usize)> {
        self.frame_shape
    }

    pub fn sequences(&self) -> &[Matrix] {
        &self.sequences
    }

    /// Every frame of every sequence, in order.
    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.sequences.iter().flat_map(|s| (0..s.rows()).map(move |r| s.row(r)))
    }

    /// All frames stacked as rows of one `(len·T) x n` matrix.
    pub fn stacked_frames(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.len() * self.frames * self.frame_dim);
        for s in &self.sequences {
            data.extend_from_slice(s.as_slice());
        }
        Matrix::new(self.len() * self.frames, self.frame_dim, data).expect("consistent shapes")
    }

    fn subset(&self, idx: &[usize], split: Split) -> Self {
        Self {
            sequences: idx.iter().map(|&i| self.sequences[i].clone()).collect(),
            frames: self.frames,
            frame_dim: self.frame_dim,
            frame_shape: self.frame_shape,
            split,
        }
    }

    /// Saves as a GTS1 tensor `[count, T, h, w]` (grid frames) or
    /// `[count, T, n]`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut dims = vec![self.len(), self.frames];
        match self.frame_shape {
            Some((h, w)) => dims.extend([h, w]),
            None => dims.push(self.frame_dim),
        }
        save_tensor(path, &dims, self.stacked_frames().as_slice())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (dims, values) = load_tensor(path)?;
        let (count, frames, shape) = match dims[..] {
            [c, t, _] => (c, t, None),
            [c, t, h, w] => (c, t, Some((h, w))),
            _ => {
                return Err(Error::format(
                    path.display(),
                    format!("dataset tensors have rank 3 or 4, got {}", dims.len()),
                ))
            }
        };
        if count == 0 || frames == 0 || values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = values.len() / (count * frames);
        let sequences = values
            .chunks(frames * n)
            .map(|chunk| Matrix::new(frames, n, chunk.to_vec()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(sequences, shape)
    }
}

/// Window offsets `(row, col)` for `t` frames: uniform start, then each
/// step moves one pixel left, right, up or down, chosen uniformly among the
/// moves that keep the window inside the image. A window as large as the
/// image cannot move and stays put.
pub fn crop_walk(rng: &mut Rng, height: usize, width: usize, crop: usize, t: usize) -> Vec<(usize, usize)> {
    let (max_r, max_c) = (height - crop, width - crop);
    let mut pos = (rng.below(max_r + 1), rng.below(max_c + 1));
    let mut walk = Vec::with_capacity(t);
    for step in 0..t {
        if step > 0 {
            let (r, c) = pos;
            let mut moves = Vec::with_capacity(4);
            if c > 0 {
                moves.push((r, c - 1));
            }
            if c < max_c {
                moves.push((r, c + 1));
            }
            if r > 0 {
                moves.push((r - 1, c));
            }
            if r < max_r {
                moves.push((r + 1, c));
            }
            if !moves.is_empty() {
                pos = moves[rng.below(moves.len())];
            }
        }
        walk.push(pos);
    }
    walk
}

/// One sequence per source image (the first `count` images): a `crop x
/// crop` window random-walking for `t` frames.
pub fn generate_moving_crop_dataset(
    images: &ImageSet,
    crop: usize,
    t: usize,
    count: usize,
    seed: u64,
) -> Result<SequenceDataset> {
    if crop == 0 {
        return Err(Error::ZeroDimension { what: "crop size" });
    }
    if t == 0 {
        return Err(Error::ZeroDimension { what: "frames per sequence" });
    }
    if crop > images.height() || crop > images.width() {
        return Err(Error::CropTooLarge {
            crop,
            height: images.height(),
            width: images.width(),
        });
    }
    if count > images.count() {
        return Err(Error::NotEnoughImages {
            requested: count,
            available: images.count(),
        });
    }
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    let w = images.width();
    let sequences = (0..count)
        .map(|i| {
            let mut rng = Rng::new(derive_seed(seed, i as u64));
            let walk = crop_walk(&mut rng, images.height(), w, crop, t);
            let img = images.image(i);
            let mut data = Vec::with_capacity(t * crop * crop);
            for &(r0, c0) in &walk {
                for r in r0..r0 + crop {
                    data.extend_from_slice(&img[r * w + c0..r * w + c0 + crop]);
                }
            }
            Matrix::new(t, crop * crop, data).expect("crop within bounds")
        })
        .collect();
    SequenceDataset::new(sequences, Some((crop, crop)))
}

/// A `size x size` stroke sprite: a short random walk with momentum,
/// painted at `1.0` on a transparent `-1.0` field.
pub fn random_sprite(rng: &mut Rng, size: usize) -> Vec<f64> {
    let mut sprite = vec![-1.0; size * size];
    if size == 0 {
        return sprite;
    }
    let s = size as f64;
    let (mut y, mut x) = (rng.uniform(0.25, 0.75) * s, rng.uniform(0.25, 0.75) * s);
    let mut heading = rng.uniform(0.0, std::f64::consts::TAU);
    let steps = 3 * size;
    for _ in 0..steps {
        let (r, c) = (y.floor() as isize, x.floor() as isize);
        for dr in -1..=1isize {
            for dc in -1..=1isize {
                if dr.abs() + dc.abs() > 1 && size > 6 {
                    continue;
                }
                let (rr, cc) = (r + dr, c + dc);
                if rr >= 0 && cc >= 0 && (rr as usize) < size && (cc as usize) < size {
                    sprite[rr as usize * size + cc as usize] = 1.0;
                }
            }
        }
        heading += rng.uniform(-0.6, 0.6);
        y += heading.sin() * 0.7;
        x += heading.cos() * 0.7;
        // turn back inside
        if y < 1.0 || y > s - 1.0 {
            heading = -heading;
            y = y.clamp(0.0, s - 1.0);
        }
        if x < 1.0 || x > s - 1.0 {
            heading = std::f64::consts::PI - heading;
            x = x.clamp(0.0, s - 1.0);
        }
    }
    sprite
}

fn bounce(pos: &mut usize, vel: &mut isize, max: usize) {
    if max == 0 {
        return;
    }
    let mut next = *pos as isize + *vel;
    if next < 0 {
        next = -next;
        *vel = -*vel;
    } else if next > max as isize {
        next = 2 * max as isize - next;
        *vel = -*vel;
    }
    *pos = next as usize;
}

/// Sprite sequences on a `canvas x canvas` field at `-1`: one rigid sprite
/// per sequence moving at a constant integer velocity and bouncing off the
/// edges.
pub fn generate_moving_sprite_dataset(
    canvas: usize,
    sprite: usize,
    t: usize,
    count: usize,
    seed: u64,
) -> Result<SequenceDataset> {
    if canvas == 0 || sprite == 0 {
        return Err(Error::ZeroDimension { what: "canvas/sprite size" });
    }
    if t == 0 {
        return Err(Error::ZeroDimension { what: "frames per sequence" });
    }
    if sprite > canvas {
        return Err(Error::CropTooLarge {
            crop: sprite,
            height: canvas,
            width: canvas,
        });
    }
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    let max = canvas - sprite;
    let speed_cap = max.min(2) as isize;
    let sequences = (0..count)
        .map(|i| {
            let mut rng = Rng::new(derive_seed(seed, i as u64));
            let shape = random_sprite(&mut rng, sprite);
            let velocity = |rng: &mut Rng| -> isize {
                if speed_cap == 0 {
                    return 0;
                }
                let mag = 1 + rng.below(speed_cap as usize) as isize;
                if rng.below(2) == 0 {
                    mag
                } else {
                    -mag
                }
            };
            let (mut r, mut c) = (rng.below(max + 1), rng.below(max + 1));
            let (mut vr, mut vc) = (velocity(&mut rng), velocity(&mut rng));
            let mut data = Vec::with_capacity(t * canvas * canvas);
            for step in 0..t {
                if step > 0 {
                    bounce(&mut r, &mut vr, max);
                    bounce(&mut c, &mut vc, max);
                }
                let mut frame = vec![-1.0; canvas * canvas];
                for sr in 0..sprite {
                    for sc in 0..sprite {
                        frame[(r + sr) * canvas + c + sc] = shape[sr * sprite + sc];
                    }
                }
                data.extend(frame);
            }
            Matrix::new(t, canvas * canvas, data).expect("sprite within canvas")
        })
        .collect();
    SequenceDataset::new(sequences, Some((canvas, canvas)))
}

/// Deterministic shuffled split into `⌊fraction·N⌋` training sequences and
/// the rest for testing.
pub fn split(dataset: &SequenceDataset, train_fraction: f64, seed: u64) -> Result<(SequenceDataset, SequenceDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::OutOfRange {
            name: "train_fraction",
            range: "(0, 1)",
            value: train_fraction,
        });
    }
    let n = dataset.len();
    let n_train = (train_fraction * n as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} of {n} sequences leaves an empty split"
        )));
    }
    let order = Rng::new(seed).permutation(n);
    Ok((
        dataset.subset(&order[..n_train], Split::Train),
        dataset.subset(&order[n_train..], Split::Test),
    ))
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses a rectangular numeric CSV (rows = time points, columns = nodes).
/// A first row containing any non-numeric cell is taken as a header.
pub fn parse_csv_series(text: &str, source: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::Csv {
            path: source.into(),
            row: line,
            msg: e.to_string(),
        })?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: Option<Vec<f64>> = record.iter().map(parse_cell).collect();
        let values = match parsed {
            Some(v) => v,
            None if i == 0 => continue,
            None => {
                let bad = record.iter().find(|c| parse_cell(c).is_none()).unwrap_or_default();
                return Err(Error::Csv {
                    path: source.into(),
                    row: line,
                    msg: format!("non-numeric cell {bad:?}"),
                });
            }
        };
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Csv {
                    path: source.into(),
                    row: line,
                    msg: format!("expected {w} columns, found {}", values.len()),
                })
            }
            _ => {}
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Csv {
            path: source.into(),
            row: 0,
            msg: "no numeric rows".into(),
        });
    }
    Ok(Matrix::from_rows(&rows))
}

pub fn load_csv_series(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv_series(&text, &path.display().to_string())
}

/// Writes values with Rust's shortest round-trip formatting.
pub fn write_csv_series(path: impl AsRef<Path>, series: &Matrix) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for r in 0..series.rows() {
        let line: Vec<String> = series.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

const TENSOR_MAGIC: &[u8; 4] = b"GTS1";

/// Serializes a tensor in the GTS1 layout.
pub fn encode_tensor(dims: &[usize], values: &[f64]) -> Result<Vec<u8>> {
    if dims.is_empty() {
        return Err(Error::format("<tensor>", "tensor must have at least one dimension"));
    }
    let count: usize = dims.iter().product();
    if count != values.len() {
        return Err(Error::LengthMismatch {
            what: "tensor values",
            expected: count,
            got: values.len(),
        });
    }
    let mut out = Vec::with_capacity(8 + 4 * dims.len() + 4 * count);
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::format("<tensor>", format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8], source: &str) -> Result<(Vec<usize>, Vec<f64>)> {
    let truncated = || Error::format(source, "truncated GTS1 tensor");
    if bytes.len() < 4 || &bytes[..4] != TENSOR_MAGIC {
        return Err(Error::format(source, "bad magic (expected \"GTS1\")"));
    }
    let word = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(truncated)
    };
    let rank = word(4)? as usize;
    if rank == 0 {
        return Err(Error::format(source, "tensor must have at least one dimension"));
    }
    let dims = (0..rank)
        .map(|k| word(8 + 4 * k).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format(source, "tensor size overflows"))?;
    let start = 8 + 4 * rank;
    let expected = count
        .checked_mul(4)
        .and_then(|b| b.checked_add(start))
        .ok_or_else(|| Error::format(source, "tensor size overflows"))?;
    if bytes.len() < expected {
        return Err(truncated());
    }
    if bytes.len() > expected {
        return Err(Error::format(
            source,
            format!("{} trailing bytes after tensor data", bytes.len() - expected),
        ));
    }
    let values = bytes[start..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok((dims, values))
}

pub fn save_tensor(path: impl AsRef<Path>, dims: &[usize], values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_tensor(dims, values).map_err(|e| match e {
        Error::Format { msg, .. } => Error::format(path.display(), msg),
        other => other,
    })?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<(Vec<usize>, Vec<f64>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes, &path.display().to_string())
}
