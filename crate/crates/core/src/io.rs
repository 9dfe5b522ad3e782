//! File formats.
//!
//! Matrix file (`.miam`, little-endian):
//!
//! ```text
//! b"MIAM" | u32 version = 1 | u64 rows | u64 cols | u8 dtype (1 = f32, 2 = f64) | payload
//! ```
//!
//! The payload is row-major. Files ending in `.csv` are read as headerless
//! comma-separated rows instead. Score files are CSV with the header
//! `record_id,score`; membership manifests use `record_id,membership` with
//! values `train` / `test`.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};

use crate::data::ensure_finite;
use crate::scenarios::Membership;
use crate::{Error, Matrix, Origin, ReconstructionBatch, RecordSet, Result, ScoreVector};

pub const MAGIC: &[u8; 4] = b"MIAM";
pub const VERSION: u32 = 1;
/// Size in bytes of the binary header.
pub const HEADER_LEN: u64 = 4 + 4 + 8 + 8 + 1;

/// Element type of a binary matrix payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dtype {
    F32,
    #[default]
    F64,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::F32 => 1,
            Dtype::F64 => 2,
        }
    }

    pub fn width(self) -> u64 {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(Dtype::F32),
            2 => Ok(Dtype::F64),
            other => Err(Error::Format(format!("unknown dtype byte {other}"))),
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a matrix file (binary, or CSV by extension).
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    if is_csv(path) {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        return parse_csv_matrix(file);
    }
    let file = MatrixFile::open(path)?;
    let mut out = Vec::with_capacity(file.rows * file.cols);
    file.for_each_chunk(file.rows.max(1), |chunk| {
        out.extend(chunk.iter().copied());
        Ok(())
    })?;
    Array2::from_shape_vec((file.rows, file.cols), out).map_err(|e| Error::Format(e.to_string()))
}

/// Parses headerless CSV rows into a matrix.
pub fn parse_csv_matrix(reader: impl Read) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Format(format!(
                    "csv row {} has {} fields, expected {c}",
                    line + 1,
                    record.len()
                )))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Format(format!("csv row {}: bad number `{field}`", line + 1)))?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or(Error::EmptyMatrix)?;
    let m = Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Format(e.to_string()))?;
    ensure_finite(m.view(), "csv matrix")?;
    Ok(m)
}

/// Writes `matrix` as a binary f64 file.
pub fn write_matrix(matrix: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    write_matrix_as(matrix.view(), path, Dtype::F64)
}

/// Writes `matrix` with the given payload type. Values are narrowed for f32.
pub fn write_matrix_as(matrix: ArrayView2<'_, f64>, path: impl AsRef<Path>, dtype: Dtype) -> Result<()> {
    let path = path.as_ref();
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    ensure_finite(matrix, "matrix")?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(matrix.nrows() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(matrix.ncols() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&[dtype.code()]).map_err(io)?;
    for row in matrix.rows() {
        for &v in row {
            match dtype {
                Dtype::F32 => w.write_all(&(v as f32).to_le_bytes()),
                Dtype::F64 => w.write_all(&v.to_le_bytes()),
            }
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// A binary matrix file whose header has been validated; the payload is read
/// lazily in row chunks.
#[derive(Debug, Clone)]
pub struct MatrixFile {
    path: PathBuf,
    pub rows: usize,
    pub cols: usize,
    pub dtype: Dtype,
}

impl MatrixFile {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let mut header = [0u8; HEADER_LEN as usize];
        if len < 4 {
            return Err(Error::Format("file too short for magic".into()));
        }
        let n = read_up_to(&mut file, &mut header).map_err(|e| Error::io(&path, e))?;
        if &header[..4] != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected \"MIAM\"",
                String::from_utf8_lossy(&header[..4])
            )));
        }
        if (n as u64) < HEADER_LEN {
            return Err(Error::Truncation {
                expected: HEADER_LEN,
                found: n as u64,
            });
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let rows = u64::from_le_bytes(header[8..16].try_into().unwrap());
        let cols = u64::from_le_bytes(header[16..24].try_into().unwrap());
        let dtype = Dtype::from_code(header[24])?;
        let payload = rows
            .checked_mul(cols)
            .and_then(|c| c.checked_mul(dtype.width()))
            .ok_or_else(|| Error::Format("matrix shape overflows".into()))?;
        let found = len - HEADER_LEN;
        if found < payload {
            return Err(Error::Truncation {
                expected: payload,
                found,
            });
        }
        if found > payload {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                found - payload
            )));
        }
        Ok(Self {
            path,
            rows: rows as usize,
            cols: cols as usize,
            dtype,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Calls `f` on consecutive row blocks of at most `chunk_rows` rows.
    pub fn for_each_chunk(
        &self,
        chunk_rows: usize,
        mut f: impl FnMut(ArrayView2<'_, f64>) -> Result<()>,
    ) -> Result<()> {
        let chunk_rows = chunk_rows.max(1);
        let mut file = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        file.seek(SeekFrom::Start(HEADER_LEN))
            .map_err(|e| Error::io(&self.path, e))?;
        let mut reader = BufReader::with_capacity(1 << 20, file);
        let width = self.dtype.width() as usize;
        let mut bytes = Vec::new();
        let mut values = Vec::new();
        let mut done = 0usize;
        while done < self.rows {
            let take = chunk_rows.min(self.rows - done);
            bytes.resize(take * self.cols * width, 0);
            reader.read_exact(&mut bytes).map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => Error::Truncation {
                    expected: (self.rows * self.cols * width) as u64,
                    found: (done * self.cols * width) as u64,
                },
                _ => Error::io(&self.path, e),
            })?;
            values.clear();
            match self.dtype {
                Dtype::F32 => values.extend(
                    bytes
                        .chunks_exact(4)
                        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64),
                ),
                Dtype::F64 => values.extend(
                    bytes
                        .chunks_exact(8)
                        .map(|b| f64::from_le_bytes(b.try_into().unwrap())),
                ),
            }
            let view = ArrayView2::from_shape((take, self.cols), &values)
                .map_err(|e| Error::Format(e.to_string()))?;
            ensure_finite(view, "matrix payload")?;
            f(view)?;
            done += take;
        }
        Ok(())
    }
}

fn read_up_to(file: &mut File, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match file.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

/// Path of the id sidecar for a record matrix: `<file>.ids`.
pub fn ids_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

/// Reads a record matrix and its id sidecar. Without a sidecar, ids are
/// `<file stem>-<row>`.
pub fn read_record_set(path: impl AsRef<Path>, origin: Origin) -> Result<RecordSet> {
    let path = path.as_ref();
    let data = read_matrix(path)?;
    let sidecar = ids_sidecar(path);
    let ids = if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect()
    } else {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("record");
        (0..data.nrows()).map(|i| format!("{stem}-{i}")).collect()
    };
    RecordSet::new(ids, data, origin)
}

/// Writes a record matrix plus its id sidecar.
pub fn write_record_set(set: &RecordSet, path: impl AsRef<Path>, dtype: Dtype) -> Result<()> {
    let path = path.as_ref();
    write_matrix_as(set.data().view(), path, dtype)?;
    let sidecar = ids_sidecar(path);
    let mut text = set.ids().join("\n");
    text.push('\n');
    std::fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))
}

/// Reads a `record_id,score` CSV.
pub fn read_scores(path: impl AsRef<Path>) -> Result<ScoreVector> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_scores(file, "score-file", &format!("source={}", path.display()))
}

pub fn parse_scores(reader: impl Read, attack_name: &str, digest: &str) -> Result<ScoreVector> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Format(e.to_string()))?;
    if headers.len() != 2 || &headers[0] != "record_id" || &headers[1] != "score" {
        return Err(Error::Format(format!(
            "score file header must be `record_id,score`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut entries = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let score: f64 = record[1]
            .parse()
            .map_err(|_| Error::Format(format!("line {}: bad score `{}`", line + 2, &record[1])))?;
        if !score.is_finite() {
            return Err(Error::Data(format!(
                "line {}: non-finite score for `{}`",
                line + 2,
                &record[0]
            )));
        }
        entries.push((record[0].to_string(), score));
    }
    ScoreVector::new(entries, attack_name, digest)
}

/// Writes a `record_id,score` CSV. Scores use the shortest round-tripping
/// decimal representation.
pub fn write_scores(scores: &ScoreVector, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["record_id", "score"]).map_err(fmt)?;
    for (id, s) in scores.entries() {
        w.write_record([id.as_str(), &format!("{s:?}")]).map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a `record_id,membership` manifest.
pub fn read_membership(path: impl AsRef<Path>) -> Result<Membership> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        if record.len() != 2 {
            return Err(Error::Format(
                "membership rows must be `record_id,membership`".into(),
            ));
        }
        let id = record[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        match &record[1] {
            "train" => train.push(id),
            "test" => test.push(id),
            other => {
                return Err(Error::Format(format!(
                    "membership must be `train` or `test`, found `{other}`"
                )))
            }
        }
    }
    Ok(Membership { train, test })
}

pub fn write_membership(membership: &Membership, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("record_id,membership\n");
    for id in &membership.train {
        text.push_str(&format!("{id},train\n"));
    }
    for id in &membership.test {
        text.push_str(&format!("{id},test\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn check_id_is_filename(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
        return Err(Error::Config(format!(
            "record id `{id}` cannot name a reconstruction file"
        )));
    }
    Ok(())
}

/// Writes a batch as `<dir>/<record_id>.miam`.
pub fn write_reconstruction_batch(
    batch: &ReconstructionBatch,
    dir: impl AsRef<Path>,
    dtype: Dtype,
) -> Result<()> {
    check_id_is_filename(batch.record_id())?;
    let path = dir.as_ref().join(format!("{}.miam", batch.record_id()));
    write_matrix_as(batch.reconstructions().view(), path, dtype)
}

/// Loads every `<record_id>.miam` in `dir`.
pub fn read_reconstruction_dir(dir: impl AsRef<Path>) -> Result<HashMap<String, ReconstructionBatch>> {
    let dir = dir.as_ref();
    let mut out = HashMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("miam") {
            continue;
        }
        let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let batch = ReconstructionBatch::new(id, read_matrix(&path)?)?;
        out.insert(id.to_string(), batch);
    }
    Ok(out)
}
