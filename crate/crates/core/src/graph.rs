//! In-memory graph-structured stream: a `[time, node]` signal matrix plus an
//! optional adjacency, loaded from csv or a raw little-endian binary format,
//! and split along time into train/validation/test cursors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Magic sentinel is not used: the raw format is exactly a 16-byte header
/// (two little-endian u64: length, node count) followed by row-major f64.
pub const RAW_HEADER_BYTES: usize = 16;

/// On-disk encodings understood by [`load_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    /// Comma-separated, no header row, '.' decimal separator.
    /// Rows are time steps, columns are nodes.
    Csv,
    /// 16-byte header (two little-endian u64: `L_data`, `N_node`) followed by
    /// row-major little-endian f64.
    RawF64,
}

impl std::str::FromStr for GraphFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(GraphFormat::Csv),
            "raw_f64" | "raw" => Ok(GraphFormat::RawF64),
            other => Err(Error::BadConfig(format!("unknown format '{other}'"))),
        }
    }
}

/// A graph-structured stream held fully in memory.
///
/// `values` is `[L_data, N_node]`; the optional adjacency is `[N_node, N_node]`
/// with nonnegative weights. Immutable after construction, so it is safe to
/// share read-only across threads.
#[derive(Debug, Clone)]
pub struct Graph {
    values: Array2<f64>,
    adjacency: Option<Array2<f64>>,
}

impl Graph {
    /// Build a graph from a value matrix and optional adjacency, validating
    /// finiteness and shape.
    pub fn new(values: Array2<f64>, adjacency: Option<Array2<f64>>) -> Result<Self> {
        for ((row, col), v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { row, col });
            }
        }
        let n_node = values.ncols();
        if let Some(adj) = &adjacency {
            if adj.nrows() != n_node || adj.ncols() != n_node {
                return Err(Error::ShapeMismatch(format!(
                    "adjacency is {}x{}, expected {n_node}x{n_node}",
                    adj.nrows(),
                    adj.ncols()
                )));
            }
            for ((row, col), v) in adj.indexed_iter() {
                if !v.is_finite() || *v < 0.0 {
                    return Err(Error::NonFiniteEntry { row, col });
                }
            }
        }
        Ok(Graph { values, adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.values.ncols()
    }

    /// Stream length `L_data`.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn adjacency(&self) -> Option<ArrayView2<'_, f64>> {
        self.adjacency.as_ref().map(|a| a.view())
    }

    /// Slice `len` consecutive rows starting at `t0`, restricted to `nodes`.
    /// Returns a `[len, nodes.len()]` matrix.
    pub fn window(&self, t0: usize, len: usize, nodes: &[usize]) -> Result<Array2<f64>> {
        if t0 + len > self.len() {
            return Err(Error::TimeOutOfBounds { t: t0 + len, limit: self.len() });
        }
        for &n in nodes {
            if n >= self.node_count() {
                return Err(Error::NodeOutOfBounds { index: n, count: self.node_count() });
            }
        }
        let mut out = Array2::zeros((len, nodes.len()));
        for (i, row) in out.rows_mut().into_iter().enumerate() {
            let src = self.values.row(t0 + i);
            // indexed copy; nodes may repeat (train batches sample with replacement)
            for (j, &n) in nodes.iter().enumerate() {
                row[j] = src[n];
            }
        }
        Ok(out)
    }

    /// One time step restricted to `nodes`.
    pub fn row_at(&self, t: usize, nodes: &[usize]) -> Result<Array1<f64>> {
        Ok(self.window(t, 1, nodes)?.row(0).to_owned())
    }
}

/// Load a graph from disk. `values_path` holds the `[time, node]` signal;
/// `adjacency_path`, when given, holds a square `[node, node]` matrix in the
/// same format.
pub fn load_graph(
    values_path: &Path,
    adjacency_path: Option<&Path>,
    format: GraphFormat,
) -> Result<Graph> {
    let values = load_matrix(values_path, format)?;
    let adjacency = adjacency_path.map(|p| load_matrix(p, format)).transpose()?;
    Graph::new(values, adjacency)
}

/// Read a single matrix in the given format.
pub fn load_matrix(path: &Path, format: GraphFormat) -> Result<Array2<f64>> {
    match format {
        GraphFormat::Csv => read_csv_matrix(path),
        GraphFormat::RawF64 => read_raw_matrix(path),
    }
}

/// Write a matrix in the given format.
pub fn save_matrix(matrix: ArrayView2<'_, f64>, path: &Path, format: GraphFormat) -> Result<()> {
    match format {
        GraphFormat::Csv => write_csv_matrix(matrix, path),
        GraphFormat::RawF64 => write_raw_matrix(matrix, path),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn read_csv_matrix(path: &Path) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(BufReader::new(file));
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::CsvParse {
            path: path.to_path_buf(),
            row: row_idx,
            msg: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(record.len());
        for field in record.iter() {
            let v: f64 = field.trim().parse().map_err(|_| Error::CsvParse {
                path: path.to_path_buf(),
                row: row_idx,
                msg: format!("cannot parse '{field}' as a number"),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::ShapeMismatch(format!(
                    "row {row_idx} has {} columns, expected {}",
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, |r| r.len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n_rows, n_cols), flat)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))
}

fn write_csv_matrix(matrix: ArrayView2<'_, f64>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for row in matrix.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn read_raw_matrix(path: &Path) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; RAW_HEADER_BYTES];
    r.read_exact(&mut header).map_err(|e| io_err(path, e))?;
    let n_rows = u64::from_le_bytes(header[0..8].try_into().unwrap()) as usize;
    let n_cols = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let count = n_rows
        .checked_mul(n_cols)
        .ok_or_else(|| Error::ShapeMismatch("raw header dimensions overflow".into()))?;
    let mut data = vec![0u8; count * 8];
    r.read_exact(&mut data).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            io_err(path, std::io::Error::new(e.kind(), "file shorter than header declares"))
        } else {
            io_err(path, e)
        }
    })?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| io_err(path, e))? != 0 {
        return Err(Error::ShapeMismatch(format!(
            "file longer than the {n_rows}x{n_cols} header declares"
        )));
    }
    let flat: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((n_rows, n_cols), flat)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))
}

fn write_raw_matrix(matrix: ArrayView2<'_, f64>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&(matrix.nrows() as u64).to_le_bytes())
        .map_err(|e| io_err(path, e))?;
    w.write_all(&(matrix.ncols() as u64).to_le_bytes())
        .map_err(|e| io_err(path, e))?;
    for row in matrix.rows() {
        for v in row.iter() {
            w.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Contiguous train/validation/test ranges over `[0, L_data)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamSplit {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

/// Split the stream along time by integer ratios. Boundaries use floor
/// arithmetic and the test range absorbs the rounding remainder. Every range
/// must admit at least one `l_in + l_out` window.
pub fn split_stream(
    g: &Graph,
    ratios: (u32, u32, u32),
    l_in: usize,
    l_out: usize,
) -> Result<StreamSplit> {
    let (r_train, r_val, r_test) = ratios;
    if r_train == 0 || r_val == 0 || r_test == 0 {
        return Err(Error::BadConfig("split ratios must be positive".into()));
    }
    let l_data = g.len();
    let total = (r_train + r_val + r_test) as usize;
    let t1 = l_data * r_train as usize / total;
    let t2 = l_data * (r_train + r_val) as usize / total;
    let split = StreamSplit { train: 0..t1, val: t1..t2, test: t2..l_data };
    let need = l_in + l_out;
    for (which, range) in [
        ("train", &split.train),
        ("val", &split.val),
        ("test", &split.test),
    ] {
        if range.len() < need {
            return Err(Error::RangeTooShort {
                which,
                start: range.start,
                end: range.end,
                need,
            });
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn graph_of_len(l: usize) -> Graph {
        Graph::new(Array2::zeros((l, 2)), None).unwrap()
    }

    #[test]
    fn csv_shape_passthrough() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        std::fs::write(&path, "1,2,3\n4,5,6\n7,8,9\n10,11,12\n").unwrap();
        let g = load_graph(&path, None, GraphFormat::Csv).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.values()[[1, 2]], 6.0);
    }

    #[test]
    fn csv_rejects_nan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        std::fs::write(&path, "1,2\n3,nan\n").unwrap();
        let err = load_graph(&path, None, GraphFormat::Csv).unwrap_err();
        match err {
            Error::NonFiniteEntry { row, col } => {
                assert_eq!((row, col), (1, 1));
            }
            other => panic!("expected NonFiniteEntry, got {other:?}"),
        }
    }

    #[test]
    fn raw_header_matches_large_dims() {
        // Header-only check at the dimensions of the largest real deployment
        // we target (1498 x 10000) without materializing the payload.
        let header: Vec<u8> = 1498u64
            .to_le_bytes()
            .into_iter()
            .chain(10000u64.to_le_bytes())
            .collect();
        let rows = u64::from_le_bytes(header[0..8].try_into().unwrap());
        let cols = u64::from_le_bytes(header[8..16].try_into().unwrap());
        assert_eq!((rows, cols), (1498, 10000));

        // And a small end-to-end read with the same layout.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.raw");
        let m = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        save_matrix(m.view(), &path, GraphFormat::RawF64).unwrap();
        let g = load_graph(&path, None, GraphFormat::RawF64).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.values(), m.view());
    }

    #[test]
    fn raw_rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.raw");
        let mut bytes: Vec<u8> = 2u64.to_le_bytes().into_iter().chain(2u64.to_le_bytes()).collect();
        bytes.extend(1.0f64.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(load_graph(&path, None, GraphFormat::RawF64).is_err());
    }

    #[test]
    fn adjacency_must_be_square() {
        let values = Array2::zeros((4, 3));
        let adj = Array2::zeros((3, 2));
        assert!(Graph::new(values, Some(adj)).is_err());
    }

    #[test]
    fn split_milano_ratios() {
        // 1498 * 10/15 = 998.67 -> 998; 1498 * 12/15 = 1198.4 -> 1198
        let g = graph_of_len(1498);
        let s = split_stream(&g, (10, 2, 3), 36, 72).unwrap();
        assert_eq!(s.train, 0..998);
        assert_eq!(s.val, 998..1198);
        assert_eq!(s.test, 1198..1498);
    }

    #[test]
    fn split_exact_division() {
        let g = graph_of_len(15);
        let s = split_stream(&g, (10, 2, 3), 2, 1).unwrap();
        assert_eq!(s.train, 0..10);
        assert_eq!(s.val, 10..12);
        assert_eq!(s.test, 12..15);
    }

    #[test]
    fn split_rejects_short_range() {
        let g = graph_of_len(10);
        let err = split_stream(&g, (10, 2, 3), 4, 4).unwrap_err();
        match err {
            Error::RangeTooShort { which, .. } => assert_eq!(which, "val"),
            other => panic!("expected RangeTooShort, got {other:?}"),
        }
    }

    #[test]
    fn raw_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.raw");
        // values chosen to exercise non-trivial mantissas and signs
        let m = array![
            [0.1, -0.2, 1e-300],
            [f64::MIN_POSITIVE, 3.141592653589793, -1e300]
        ];
        save_matrix(m.view(), &path, GraphFormat::RawF64).unwrap();
        let back = load_matrix(&path, GraphFormat::RawF64).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    proptest! {
        #[test]
        fn split_partitions_whole_stream(
            l_data in 30usize..5000,
            r1 in 1u32..20, r2 in 1u32..20, r3 in 1u32..20,
        ) {
            let g = graph_of_len(l_data);
            if let Ok(s) = split_stream(&g, (r1, r2, r3), 1, 1) {
                prop_assert_eq!(s.train.start, 0);
                prop_assert_eq!(s.train.end, s.val.start);
                prop_assert_eq!(s.val.end, s.test.start);
                prop_assert_eq!(s.test.end, l_data);
            }
        }

        #[test]
        fn raw_round_trip_random(rows in 1usize..8, cols in 1usize..8, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>() * 2e3 - 1e3);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.raw");
            save_matrix(m.view(), &path, GraphFormat::RawF64).unwrap();
            let back = load_matrix(&path, GraphFormat::RawF64).unwrap();
            prop_assert_eq!(m, back);
        }
    }
}
