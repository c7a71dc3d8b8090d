//! File loading and saving: frame directories, detection lists, feature
//! matrices, flow caches, and selection files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use semff_core::detect::{BBox, Detection, DetectionSet};
use semff_core::features::FeatureMatrix;
use semff_core::flow::FlowField;
use semff_core::frame::{Frame, FrameSequence};
use serde::Deserialize;

use crate::error::{CliError, Result};

const FEATURE_MAGIC: [u8; 4] = *b"SFFM";
const FEATURE_VERSION: u32 = 1;

fn input_err(path: &Path, what: impl fmt::Display) -> CliError {
    CliError::Input(format!("{}: {what}", path.display()))
}

use std::fmt;

// ---------------------------------------------------------------------------
// Frame directories

/// Image files in `dir` with numeric stems, sorted by stem value.
pub fn frame_files(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::Input(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| input_err(dir, e))?;
        let path = entry.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        let is_image = matches!(ext.as_deref(), Some("png") | Some("ppm"));
        if !path.is_file() || !is_image {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let value: u64 = stem.parse().map_err(|_| {
            input_err(&path, "frame files must have integer stems like 000123.png")
        })?;
        files.push((value, path));
    }
    files.sort();
    for pair in files.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(input_err(
                &pair[1].1,
                format!("duplicate frame index {}", pair[1].0),
            ));
        }
    }
    Ok(files)
}

/// Loads every frame of a directory, enforcing uniform dimensions.
pub fn load_frame_sequence(dir: &Path) -> Result<FrameSequence> {
    let files = frame_files(dir)?;
    if files.len() < 2 {
        return Err(CliError::Input(format!(
            "{}: need at least 2 frames, found {}",
            dir.display(),
            files.len()
        )));
    }
    let mut frames = Vec::with_capacity(files.len());
    let mut dims: Option<(usize, usize)> = None;
    for (_, path) in &files {
        let frame = load_frame(path)?;
        match dims {
            None => dims = Some((frame.width(), frame.height())),
            Some((w, h)) => {
                if frame.width() != w || frame.height() != h {
                    return Err(input_err(
                        path,
                        format!(
                            "frame is {}x{}, expected {w}x{h}",
                            frame.width(),
                            frame.height()
                        ),
                    ));
                }
            }
        }
        frames.push(frame);
    }
    FrameSequence::new(frames).map_err(|e| input_err(dir, e))
}

/// Loads one PNG or binary-PPM image as an RGB frame.
pub fn load_frame(path: &Path) -> Result<Frame> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("png") => load_png(path),
        Some("ppm") => load_ppm(path),
        _ => Err(input_err(path, "unsupported image format")),
    }
}

fn load_png(path: &Path) -> Result<Frame> {
    let file = File::open(path).map_err(|e| input_err(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| input_err(path, e))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| input_err(path, e))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(input_err(path, "only 8-bit PNG frames are supported"));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    buf.truncate(info.buffer_size());
    let rgb = match info.color_type {
        png::ColorType::Rgb => buf,
        png::ColorType::Rgba => buf
            .chunks_exact(4)
            .flat_map(|p| [p[0], p[1], p[2]])
            .collect(),
        png::ColorType::Grayscale => buf.iter().flat_map(|&v| [v, v, v]).collect(),
        png::ColorType::GrayscaleAlpha => buf
            .chunks_exact(2)
            .flat_map(|p| [p[0], p[0], p[0]])
            .collect(),
        _ => return Err(input_err(path, "unsupported PNG color type")),
    };
    Frame::from_rgb8(w, h, rgb).map_err(|e| input_err(path, e))
}

fn load_ppm(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| input_err(path, e))?;
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        // Skip whitespace and `#` comments between header tokens.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(input_err(path, "truncated PPM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token(&bytes)? != "P6" {
        return Err(input_err(path, "not a binary PPM (expected P6)"));
    }
    let parse = |s: String| -> Result<usize> {
        s.parse()
            .map_err(|_| input_err(path, format!("bad PPM header token {s:?}")))
    };
    let w = parse(token(&bytes)?)?;
    let h = parse(token(&bytes)?)?;
    let maxval = parse(token(&bytes)?)?;
    if maxval == 0 || maxval > 255 {
        return Err(input_err(path, format!("unsupported PPM maxval {maxval}")));
    }
    pos += 1; // single whitespace byte after maxval
    let need = w * h * 3;
    let payload = bytes
        .get(pos..pos + need)
        .ok_or_else(|| input_err(path, "truncated PPM payload"))?;
    Frame::from_rgb8(w, h, payload.to_vec()).map_err(|e| input_err(path, e))
}

/// Writes a frame as an RGB8 PNG.
pub fn save_png(path: &Path, frame: &Frame) -> Result<()> {
    let file = File::create(path).map_err(|e| input_err(path, e))?;
    let mut encoder = png::Encoder::new(
        BufWriter::new(file),
        frame.width() as u32,
        frame.height() as u32,
    );
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| input_err(path, e))?;
    writer
        .write_image_data(frame.data())
        .map_err(|e| input_err(path, e))?;
    Ok(())
}

/// Writes a frame as a binary PPM (P6, maxval 255).
pub fn save_ppm(path: &Path, frame: &Frame) -> Result<()> {
    let mut out = Vec::with_capacity(frame.data().len() + 32);
    out.extend_from_slice(format!("P6\n{} {}\n255\n", frame.width(), frame.height()).as_bytes());
    out.extend_from_slice(frame.data());
    fs::write(path, out).map_err(|e| input_err(path, e))
}

// ---------------------------------------------------------------------------
// Detections

#[derive(Deserialize)]
struct DetectionRecord {
    frame: usize,
    class_id: usize,
    confidence: f64,
    bbox: [f64; 4],
}

/// Loads JSON-lines detections, validating ranges and bucketing per frame.
/// Boxes are clamped to the frame bounds.
pub fn load_detections(
    path: &Path,
    num_frames: usize,
    frame_width: usize,
    frame_height: usize,
) -> Result<DetectionSet> {
    let file = File::open(path).map_err(|e| input_err(path, e))?;
    let mut set = DetectionSet::empty(num_frames);
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| input_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |what: String| {
            CliError::Input(format!("{}:{}: {what}", path.display(), lineno + 1))
        };
        let rec: DetectionRecord =
            serde_json::from_str(&line).map_err(|e| at(format!("bad detection record: {e}")))?;
        if rec.frame >= num_frames {
            return Err(at(format!(
                "frame index {} out of range (video has {num_frames} frames)",
                rec.frame
            )));
        }
        if rec.class_id >= semff_core::detect::NUM_OBJECT_CLASSES {
            return Err(at(format!("class out of range: {}", rec.class_id)));
        }
        if !(0.0..=1.0).contains(&rec.confidence) || !rec.confidence.is_finite() {
            return Err(at(format!("confidence out of range: {}", rec.confidence)));
        }
        let [x, y, w, h] = rec.bbox;
        let bbox = BBox::new(x, y, w, h)
            .map_err(|e| at(e.to_string()))?
            .clamped_to(frame_width as f64, frame_height as f64);
        let det = Detection::new(rec.class_id, rec.confidence, bbox).map_err(|e| at(e.to_string()))?;
        set.push(rec.frame, det).map_err(|e| at(e.to_string()))?;
    }
    Ok(set)
}

// ---------------------------------------------------------------------------
// Feature matrices

/// Saves a feature matrix; `.csv` paths get the text form, everything else
/// the binary form (16-byte header + little-endian f32 columns).
pub fn save_feature_matrix(path: &Path, m: &FeatureMatrix) -> Result<()> {
    if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        return save_feature_csv(path, m);
    }
    let file = File::create(path).map_err(|e| input_err(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| input_err(path, e);
    w.write_all(&FEATURE_MAGIC).map_err(io)?;
    w.write_all(&FEATURE_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(m.rows() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(m.cols() as u32).to_le_bytes()).map_err(io)?;
    for v in m.data() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn save_feature_csv(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| input_err(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| input_err(path, e);
    writeln!(w, "{},{}", m.rows(), m.cols()).map_err(io)?;
    for j in 0..m.cols() {
        let col: Vec<String> = m.column(j).iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", col.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Loads a feature matrix saved by [`save_feature_matrix`], in either form.
pub fn load_feature_matrix(path: &Path) -> Result<FeatureMatrix> {
    if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        return load_feature_csv(path);
    }
    let file = File::open(path).map_err(|e| input_err(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| input_err(path, "truncated feature file header"))?;
    if header[0..4] != FEATURE_MAGIC {
        return Err(input_err(path, "not a feature matrix file (bad magic)"));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != FEATURE_VERSION {
        return Err(input_err(path, format!("unsupported version {version}")));
    }
    let rows = word(8) as usize;
    let cols = word(12) as usize;
    let count = rows
        .checked_mul(cols)
        .filter(|&c| c <= (u32::MAX as usize))
        .ok_or_else(|| input_err(path, "unreasonable matrix dimensions"))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(|e| input_err(path, e))?;
    if payload.len() != count * 4 {
        return Err(input_err(
            path,
            format!(
                "payload size mismatch: header says {rows}x{cols} ({} bytes), found {}",
                count * 4,
                payload.len()
            ),
        ));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    FeatureMatrix::new(rows, cols, data).map_err(|e| input_err(path, e))
}

fn load_feature_csv(path: &Path) -> Result<FeatureMatrix> {
    let text = fs::read_to_string(path).map_err(|e| input_err(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| input_err(path, "empty feature file"))?;
    let mut parts = header.split(',');
    let mut dim = |what: &str| -> Result<usize> {
        parts
            .next()
            .and_then(|p| p.trim().parse().ok())
            .ok_or_else(|| input_err(path, format!("bad header: missing {what}")))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let mut data = Vec::with_capacity(rows * cols);
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        for cell in line.split(',') {
            let v: f32 = cell
                .trim()
                .parse()
                .map_err(|_| input_err(path, format!("bad value {cell:?}")))?;
            data.push(v);
        }
    }
    if data.len() != rows * cols {
        return Err(input_err(
            path,
            format!(
                "payload size mismatch: header says {rows}x{cols} ({} values), found {}",
                rows * cols,
                data.len()
            ),
        ));
    }
    FeatureMatrix::new(rows, cols, data).map_err(|e| input_err(path, e))
}

// ---------------------------------------------------------------------------
// Flow caches

/// Saves block-flow fields: header (cells_x, cells_y, count as u32 LE),
/// then per field, per cell, dx and dy as f32 LE.
pub fn save_flows(path: &Path, flows: &[FlowField]) -> Result<()> {
    let first = flows
        .first()
        .ok_or_else(|| input_err(path, "no flow fields to save"))?;
    let (cx, cy) = (first.cells_x(), first.cells_y());
    let file = File::create(path).map_err(|e| input_err(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| input_err(path, e);
    w.write_all(&(cx as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(cy as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(flows.len() as u32).to_le_bytes()).map_err(io)?;
    for field in flows {
        if field.cells_x() != cx || field.cells_y() != cy {
            return Err(input_err(path, "flow fields have mixed grid sizes"));
        }
        for (dx, dy) in field.vectors() {
            w.write_all(&dx.to_le_bytes()).map_err(io)?;
            w.write_all(&dy.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Loads a flow cache written by [`save_flows`].
pub fn load_flows(path: &Path) -> Result<Vec<FlowField>> {
    let bytes = fs::read(path).map_err(|e| input_err(path, e))?;
    if bytes.len() < 12 {
        return Err(input_err(path, "truncated flow cache header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (cx, cy, count) = (word(0), word(4), word(8));
    let cells = cx
        .checked_mul(cy)
        .filter(|&c| c > 0)
        .ok_or_else(|| input_err(path, "bad flow grid dimensions"))?;
    let need = 12 + count * cells * 8;
    if bytes.len() != need {
        return Err(input_err(
            path,
            format!("payload size mismatch: expected {need} bytes, found {}", bytes.len()),
        ));
    }
    let mut flows = Vec::with_capacity(count);
    let mut pos = 12;
    for _ in 0..count {
        let mut dx = Vec::with_capacity(cells);
        let mut dy = Vec::with_capacity(cells);
        for _ in 0..cells {
            dx.push(f32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()));
            dy.push(f32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()));
            pos += 8;
        }
        let field = FlowField::from_vectors(cx, cy, dx, dy).map_err(|e| input_err(path, e))?;
        flows.push(field);
    }
    Ok(flows)
}

// ---------------------------------------------------------------------------
// Selections

/// Reads a selection file: either the plain-text one-index-per-line form or
/// the JSON export. Indices must be strictly increasing.
pub fn load_selection(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| input_err(path, e))?;
    let indices = if path.extension().and_then(|e| e.to_str()) == Some("json") {
        #[derive(Deserialize)]
        struct SegmentDoc {
            indices: Vec<usize>,
        }
        #[derive(Deserialize)]
        struct SelectionDoc {
            segments: Vec<SegmentDoc>,
        }
        let doc: SelectionDoc = serde_json::from_str(&text)
            .map_err(|e| input_err(path, format!("bad selection JSON: {e}")))?;
        doc.segments.into_iter().flat_map(|s| s.indices).collect()
    } else {
        let mut indices = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let idx: usize = line.trim().parse().map_err(|_| {
                input_err(path, format!("line {}: bad frame index {line:?}", lineno + 1))
            })?;
            indices.push(idx);
        }
        indices
    };
    if indices.is_empty() {
        return Err(input_err(path, "selection is empty"));
    }
    for pair in indices.windows(2) {
        if pair[1] <= pair[0] {
            return Err(input_err(
                path,
                format!("indices must be strictly increasing ({} then {})", pair[0], pair[1]),
            ));
        }
    }
    Ok(indices)
}

/// Reads per-frame locality weights, one positive number per line; the count
/// must match the frame count.
pub fn load_weights(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| input_err(path, e))?;
    let mut weights = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let w: f64 = line.trim().parse().map_err(|_| {
            input_err(path, format!("line {}: bad weight {line:?}", lineno + 1))
        })?;
        if !w.is_finite() || w <= 0.0 {
            return Err(input_err(
                path,
                format!("line {}: weight must be positive, got {w}", lineno + 1),
            ));
        }
        weights.push(w);
    }
    if weights.len() != expected {
        return Err(input_err(
            path,
            format!("{} weights for {expected} frames", weights.len()),
        ));
    }
    Ok(weights)
}
