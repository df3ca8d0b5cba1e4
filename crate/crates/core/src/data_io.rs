//! Dataset ingestion and synthesis: libsvm text, synthetic benchmarks and
//! the `BWQ1` quantized dataset format.
//!
//! `BWQ1` layout (all integers unsigned LEB128 varints unless noted):
//!
//! ```text
//! "BWQ1"  bits:u8  len(scale) scale-as-decimal  dim  count
//! per sample: label:f64 LE  nnz  index deltas…  codes (bits/8 bytes each, LE)
//! trailer:    saturated  total
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::alecton::SpectralMatrix;
use crate::engine::stream_rng;
use crate::error::{contract, Error, Result};
use crate::fixedpoint::{dequantize, quantize, Bits, FixedPointSpec, QuantState, SaturationStats};
use crate::model::{Dataset, SparseExample};

const MAGIC: &[u8; 4] = b"BWQ1";

/// Parse libsvm text (`label idx:val …`, 1-based indices).
///
/// When every label is 0 or 1 the labels are mapped to ±1. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_libsvm<R: BufRead>(input: R, dim_hint: Option<usize>) -> Result<Dataset> {
    let mut examples = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse {
            line: lineno + 1,
            msg,
        };
        let mut fields = body.split_whitespace();
        let label_txt = fields.next().expect("non-empty line has a field");
        let label: f64 = label_txt
            .parse()
            .map_err(|_| bad(format!("bad label `{label_txt}`")))?;
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for f in fields {
            let (i, v) = f
                .split_once(':')
                .ok_or_else(|| bad(format!("expected idx:val, got `{f}`")))?;
            let i: usize = i.parse().map_err(|_| bad(format!("bad index `{i}`")))?;
            let v: f64 = v.parse().map_err(|_| bad(format!("bad value `{v}`")))?;
            if i == 0 {
                return Err(bad("indices are 1-based".into()));
            }
            if indices.last().is_some_and(|&last| i - 1 <= last) {
                return Err(bad("indices must be strictly increasing".into()));
            }
            max_index = max_index.max(i);
            indices.push(i - 1);
            values.push(v);
        }
        let ex = SparseExample::new(indices, values, label).map_err(|e| bad(e.to_string()))?;
        examples.push(ex);
    }
    let dim = match dim_hint {
        Some(d) if d < max_index => {
            return contract(format!("dimension hint {d} below max index {max_index}"))
        }
        Some(d) => d,
        None => max_index,
    };
    if examples.iter().all(|e| e.label == 0.0 || e.label == 1.0) {
        for e in &mut examples {
            if e.label == 0.0 {
                e.label = -1.0;
            }
        }
    }
    Dataset::new(dim, examples)
}

pub fn load_libsvm(path: impl AsRef<Path>, dim_hint: Option<usize>) -> Result<Dataset> {
    parse_libsvm(BufReader::new(File::open(path)?), dim_hint)
}

/// Write libsvm text; `{}` formatting makes the round trip exact.
pub fn write_libsvm<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for ex in &dataset.examples {
        write!(out, "{}", ex.label)?;
        for (&i, &v) in ex.indices.iter().zip(&ex.values) {
            write!(out, " {}:{}", i + 1, v)?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_libsvm(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_libsvm(dataset, File::create(path)?)
}

/// Synthetic logistic benchmark with planted weights drawn `N(0, 1)`.
pub fn gen_synthetic_logistic(
    n: usize,
    m: usize,
    nnz: usize,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    gen_synthetic_logistic_scaled(n, m, nnz, 1.0, seed)
}

/// As [`gen_synthetic_logistic`] with planted weights `weight_scale·N(0, 1)`;
/// scale 0 gives balanced coin-flip labels.
///
/// Features are uniform on `[−1, 1]` over a uniformly random support of
/// `nnz` coordinates; labels are `+1` with probability `σ(aᵀw)`.
pub fn gen_synthetic_logistic_scaled(
    n: usize,
    m: usize,
    nnz: usize,
    weight_scale: f64,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    if n == 0 || nnz == 0 || nnz > n {
        return contract(format!("need 1 ≤ nnz ≤ n, got nnz={nnz}, n={n}"));
    }
    let mut rng = stream_rng(seed, 0);
    let w: Vec<f64> = (0..n)
        .map(|_| weight_scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut examples = Vec::with_capacity(m);
    for _ in 0..m {
        let mut idx = sample_indices(&mut rng, n, nnz).into_vec();
        idx.sort_unstable();
        let values: Vec<f64> = idx.iter().map(|_| rng.random_range(-1.0..=1.0)).collect();
        let z: f64 = idx.iter().zip(&values).map(|(&i, &v)| w[i] * v).sum();
        let p = 1.0 / (1.0 + (-z).exp());
        let label = if rng.random::<f64>() < p { 1.0 } else { -1.0 };
        examples.push(SparseExample::new(idx, values, label)?);
    }
    Ok((Dataset::new(n, examples)?, w))
}

/// `k` eigenvalues log-spaced from `hi` down to `lo`.
pub fn log_spaced_spectrum(k: usize, lo: f64, hi: f64) -> Vec<f64> {
    if k == 1 {
        return vec![hi];
    }
    (0..k)
        .map(|i| hi * (lo / hi).powf(i as f64 / (k - 1) as f64))
        .collect()
}

/// Symmetric matrix with the given eigenvalues on a random orthonormal
/// basis (Gram-Schmidt on Gaussian vectors).
pub fn gen_spectral_matrix(n: usize, eigenvalues: &[f64], seed: u64) -> Result<SpectralMatrix> {
    if eigenvalues.len() < 2 {
        return contract("need at least two eigenvalues");
    }
    if eigenvalues.len() > n {
        return contract("more eigenvalues than dimensions");
    }
    let mut rng = stream_rng(seed, 1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(eigenvalues.len());
    while basis.len() < eigenvalues.len() {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        // two passes keep the basis orthonormal to machine precision
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= d * bi;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    SpectralMatrix::from_basis(eigenvalues.to_vec(), basis)
}

/// Stochastically round every feature value once; returns the dequantized
/// dataset and the saturation counts.
pub fn quantize_values(
    dataset: &Dataset,
    spec: &FixedPointSpec,
    seed: u64,
    stream: u64,
) -> Result<(Dataset, SaturationStats)> {
    let q = quantize_dataset_stream(dataset, spec, seed, stream)?;
    let stats = q.stats;
    Ok((q.to_dataset()?, stats))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSample {
    pub label: f64,
    pub indices: Vec<usize>,
    pub codes: Vec<i32>,
}

/// A dataset whose feature values are fixed-point codes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedDataset {
    pub spec: FixedPointSpec,
    pub dim: usize,
    pub samples: Vec<QuantizedSample>,
    pub stats: SaturationStats,
}

pub fn quantize_dataset(
    dataset: &Dataset,
    spec: &FixedPointSpec,
    seed: u64,
) -> Result<QuantizedDataset> {
    quantize_dataset_stream(dataset, spec, seed, 0)
}

fn quantize_dataset_stream(
    dataset: &Dataset,
    spec: &FixedPointSpec,
    seed: u64,
    stream: u64,
) -> Result<QuantizedDataset> {
    let mut state = QuantState::new(seed, stream);
    let mut samples = Vec::with_capacity(dataset.len());
    for ex in &dataset.examples {
        let codes = ex
            .values
            .iter()
            .map(|&v| quantize(v, spec, &mut state))
            .collect::<Result<Vec<_>>>()?;
        samples.push(QuantizedSample {
            label: ex.label,
            indices: ex.indices.clone(),
            codes,
        });
    }
    Ok(QuantizedDataset {
        spec: *spec,
        dim: dataset.dim,
        samples,
        stats: state.stats,
    })
}

impl QuantizedDataset {
    pub fn to_dataset(&self) -> Result<Dataset> {
        let examples = self
            .samples
            .iter()
            .map(|s| {
                let values = s
                    .codes
                    .iter()
                    .map(|&c| dequantize(c, &self.spec))
                    .collect::<Result<Vec<_>>>()?;
                SparseExample::new(s.indices.clone(), values, s.label)
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.dim, examples)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        out.write_all(MAGIC)?;
        out.write_all(&[self.spec.bits.count() as u8])?;
        let scale = format!("{:e}", self.spec.scale);
        write_varint(&mut out, scale.len() as u64)?;
        out.write_all(scale.as_bytes())?;
        write_varint(&mut out, self.dim as u64)?;
        write_varint(&mut out, self.samples.len() as u64)?;
        for s in &self.samples {
            out.write_all(&s.label.to_le_bytes())?;
            write_varint(&mut out, s.indices.len() as u64)?;
            let mut prev = 0usize;
            for (k, &i) in s.indices.iter().enumerate() {
                let d = if k == 0 { i } else { i - prev - 1 };
                write_varint(&mut out, d as u64)?;
                prev = i;
            }
            for &c in &s.codes {
                match self.spec.bits {
                    Bits::Eight => out.write_all(&(c as i8).to_le_bytes())?,
                    Bits::Sixteen => out.write_all(&(c as i16).to_le_bytes())?,
                }
            }
        }
        write_varint(&mut out, self.stats.saturated)?;
        write_varint(&mut out, self.stats.total)?;
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut r = BufReader::new(input);
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut b = [0u8; 1];
        read_exact(&mut r, &mut b)?;
        let bits = Bits::from_u32(b[0] as u32).map_err(|e| Error::Format(e.to_string()))?;
        let len = read_varint(&mut r)? as usize;
        if len > 64 {
            return Err(Error::Format("scale string too long".into()));
        }
        let mut buf = vec![0u8; len];
        read_exact(&mut r, &mut buf)?;
        let scale: f64 = std::str::from_utf8(&buf)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad scale".into()))?;
        let spec = FixedPointSpec::new(bits, scale).map_err(|e| Error::Format(e.to_string()))?;
        let dim = read_varint(&mut r)? as usize;
        let count = read_varint(&mut r)? as usize;
        let mut samples = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let mut lb = [0u8; 8];
            read_exact(&mut r, &mut lb)?;
            let label = f64::from_le_bytes(lb);
            let nnz = read_varint(&mut r)? as usize;
            let mut indices = Vec::with_capacity(nnz.min(dim));
            let mut prev = 0usize;
            for k in 0..nnz {
                let d = read_varint(&mut r)? as usize;
                let i = if k == 0 { d } else { prev + 1 + d };
                if i >= dim {
                    return Err(Error::Format(format!("index {i} outside dimension {dim}")));
                }
                indices.push(i);
                prev = i;
            }
            let mut codes = Vec::with_capacity(nnz);
            for _ in 0..nnz {
                codes.push(match bits {
                    Bits::Eight => {
                        let mut c = [0u8; 1];
                        read_exact(&mut r, &mut c)?;
                        i8::from_le_bytes(c) as i32
                    }
                    Bits::Sixteen => {
                        let mut c = [0u8; 2];
                        read_exact(&mut r, &mut c)?;
                        i16::from_le_bytes(c) as i32
                    }
                });
            }
            samples.push(QuantizedSample {
                label,
                indices,
                codes,
            });
        }
        let stats = SaturationStats {
            saturated: read_varint(&mut r)?,
            total: read_varint(&mut r)?,
        };
        Ok(QuantizedDataset {
            spec,
            dim,
            samples,
            stats,
        })
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format("truncated file".into())
        } else {
            Error::Io(e)
        }
    })
}

fn write_varint<W: Write>(out: &mut W, mut v: u64) -> Result<()> {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.write_all(&[byte])?;
            return Ok(());
        }
        out.write_all(&[byte | 0x80])?;
    }
}

fn read_varint<R: Read>(r: &mut R) -> Result<u64> {
    let mut v = 0u64;
    for shift in (0..64).step_by(7) {
        let mut b = [0u8; 1];
        read_exact(r, &mut b)?;
        v |= ((b[0] & 0x7f) as u64) << shift;
        if b[0] & 0x80 == 0 {
            return Ok(v);
        }
    }
    Err(Error::Format("varint overflow".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::storage_scale;

    #[test]
    fn parses_libsvm_line() {
        let d = parse_libsvm("+1 1:0.5 3:1.0\n".as_bytes(), None).unwrap();
        assert_eq!(d.dim, 3);
        let ex = &d.examples[0];
        assert_eq!(ex.label, 1.0);
        assert_eq!(ex.indices, vec![0, 2]);
        assert_eq!(ex.values, vec![0.5, 1.0]);
    }

    #[test]
    fn parse_errors_name_the_line() {
        for bad in ["1 2:a\n", "1 3:1 2:1\n", "x 1:1\n", "1 0:1\n"] {
            match parse_libsvm(bad.as_bytes(), None) {
                Err(Error::Parse { line: 1, .. }) => {}
                other => panic!("{bad:?}: {other:?}"),
            }
        }
        assert!(parse_libsvm("".as_bytes(), None).unwrap().is_empty());
    }

    #[test]
    fn binary_labels_are_mapped() {
        let d = parse_libsvm("0 1:1\n1 2:1\n".as_bytes(), Some(4)).unwrap();
        assert_eq!(d.dim, 4);
        assert_eq!(d.examples[0].label, -1.0);
        assert_eq!(d.examples[1].label, 1.0);
    }

    #[test]
    fn libsvm_round_trip() {
        let (d, _) = gen_synthetic_logistic(50, 40, 5, 3).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&d, &mut buf).unwrap();
        assert_eq!(parse_libsvm(&buf[..], Some(50)).unwrap(), d);
    }

    #[test]
    fn generator_is_deterministic() {
        let a = gen_synthetic_logistic(30, 20, 30, 9).unwrap();
        let b = gen_synthetic_logistic(30, 20, 30, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.0.examples.iter().all(|e| e.nnz() == 30));
        assert!(gen_synthetic_logistic(3, 2, 4, 0).is_err());
    }

    #[test]
    fn zero_weights_give_balanced_labels() {
        let m = 20_000;
        let (d, _) = gen_synthetic_logistic_scaled(10, m, 3, 0.0, 1).unwrap();
        let pos = d.examples.iter().filter(|e| e.label > 0.0).count() as f64;
        let sd = (m as f64 * 0.25).sqrt();
        assert!((pos - m as f64 / 2.0).abs() < 3.0 * sd);
    }

    #[test]
    fn bwq_round_trip_is_code_exact() {
        let (d, _) = gen_synthetic_logistic(200, 100, 7, 5).unwrap();
        for bits in [Bits::Eight, Bits::Sixteen] {
            let spec = storage_scale(d.max_abs_value(), bits).unwrap();
            let q = quantize_dataset(&d, &spec, 11).unwrap();
            let mut buf = Vec::new();
            q.write(&mut buf).unwrap();
            let back = QuantizedDataset::read(&buf[..]).unwrap();
            assert_eq!(back, q);
            assert!(QuantizedDataset::read(&buf[..buf.len() - 1]).is_err());
        }
    }

    #[test]
    fn on_grid_data_is_lossless() {
        let spec = FixedPointSpec::new(Bits::Eight, 0.25).unwrap();
        let ex = SparseExample::new(vec![0, 3], vec![0.5, -1.25], 1.0).unwrap();
        let d = Dataset::new(4, vec![ex]).unwrap();
        let (back, stats) = quantize_values(&d, &spec, 0, 0).unwrap();
        assert_eq!(back, d);
        assert_eq!(stats.saturated, 0);
    }

    #[test]
    fn rounding_error_is_within_half_step_on_average() {
        let (d, _) = gen_synthetic_logistic(100, 2000, 10, 2).unwrap();
        let spec = storage_scale(1.0, Bits::Eight).unwrap();
        let (q, _) = quantize_values(&d, &spec, 3, 0).unwrap();
        let errs: Vec<f64> = d
            .examples
            .iter()
            .zip(&q.examples)
            .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()))
            .collect();
        let mae = errs.iter().sum::<f64>() / errs.len() as f64;
        // each error is below s, so the per-draw sd is below s
        let margin = 3.0 * spec.scale / (errs.len() as f64).sqrt();
        assert!(mae <= spec.scale / 2.0 + margin, "{mae}");
    }

    #[test]
    fn spectrum_is_log_spaced() {
        let s = log_spaced_spectrum(10, 1.0, 2.0);
        assert_eq!(s.len(), 10);
        assert!((s[0] - 2.0).abs() < 1e-15 && (s[9] - 1.0).abs() < 1e-15);
        assert!(s.windows(2).all(|w| w[0] > w[1]));
    }
}
