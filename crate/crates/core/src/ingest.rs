//! Synthetic dataset generators and loaders: circles, XYZ point files, FASTA
//! sequences and their k-mer featurization.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::data::{euclidean, parse_numeric_rows, DistanceMatrix, PointCloud};
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, rng_from_seed};

/// `count` points on the circle of `radius` around `center`, with angles drawn
/// uniformly from `[0, 2π)`.
pub fn gen_circle(center: (f64, f64), radius: f64, count: usize, seed: u64) -> Result<PointCloud> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::param("radius", format!("must be positive, got {radius}")));
    }
    if count == 0 {
        return Err(Error::param("count", "must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let mut coords = Vec::with_capacity(2 * count);
    for _ in 0..count {
        let theta = rng.gen::<f64>() * TAU;
        coords.push(center.0 + radius * theta.cos());
        coords.push(center.1 + radius * theta.sin());
    }
    PointCloud::from_flat(coords, 2)
}

/// Two independently seeded circles of equal radius, concatenated in order.
pub fn gen_two_circles(
    centers: [(f64, f64); 2],
    radius: f64,
    count_each: usize,
    seed: u64,
) -> Result<PointCloud> {
    let first = gen_circle(centers[0], radius, count_each, derive_seed(seed, 0))?;
    let second = gen_circle(centers[1], radius, count_each, derive_seed(seed, 1))?;
    first.concat(&second)
}

/// Reads a 3-column point file (comma or whitespace separated).
pub fn load_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    parse_xyz(&fs::read_to_string(path)?)
}

pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let rows = parse_numeric_rows(text, false)?;
    if rows.is_empty() {
        return Err(Error::data("xyz file contains no points"));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 3 fields, found {}", row.len()),
            });
        }
    }
    PointCloud::from_rows(&rows)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceRecord {
    id: String,
    bases: String,
}

impl SequenceRecord {
    pub fn new(id: impl Into<String>, bases: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let bases = bases.into().to_ascii_uppercase();
        if id.trim().is_empty() {
            return Err(Error::data("sequence id must not be empty"));
        }
        if bases.is_empty() {
            return Err(Error::data(format!("sequence `{id}` has no bases")));
        }
        Ok(Self { id, bases })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn bases(&self) -> &str {
        &self.bases
    }
}

pub fn read_fasta(path: impl AsRef<Path>) -> Result<Vec<SequenceRecord>> {
    parse_fasta(&fs::read_to_string(path)?)
}

pub fn parse_fasta(text: &str) -> Result<Vec<SequenceRecord>> {
    let mut records = Vec::new();
    let mut current: Option<(String, String, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            if let Some((id, bases, at)) = current.take() {
                records.push(finish_record(id, bases, at)?);
            }
            let id = header.trim().to_string();
            if id.is_empty() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "empty FASTA header".into(),
                });
            }
            current = Some((id, String::new(), idx + 1));
        } else {
            match current.as_mut() {
                Some((_, bases, _)) => bases.push_str(line),
                None => {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: "sequence data before the first `>` header".into(),
                    })
                }
            }
        }
    }
    if let Some((id, bases, at)) = current {
        records.push(finish_record(id, bases, at)?);
    }
    Ok(records)
}

fn finish_record(id: String, bases: String, line: usize) -> Result<SequenceRecord> {
    if bases.is_empty() {
        return Err(Error::Parse {
            line,
            message: format!("record `{id}` has no sequence"),
        });
    }
    SequenceRecord::new(id, bases)
}

pub fn write_fasta(records: &[SequenceRecord], line_width: usize) -> String {
    let width = line_width.max(1);
    let mut out = String::new();
    for rec in records {
        let _ = writeln!(out, ">{}", rec.id);
        for chunk in rec.bases.as_bytes().chunks(width) {
            out.push_str(std::str::from_utf8(chunk).expect("ASCII bases"));
            out.push('\n');
        }
    }
    out
}

/// Normalized k-mer frequencies over `{A,C,G,T}^k`, indexed lexicographically
/// with A < C < G < T.
#[derive(Clone, Debug, PartialEq)]
pub struct KmerVector {
    freqs: Vec<f64>,
    k: usize,
}

impl KmerVector {
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

#[inline]
fn base_code(b: u8) -> Option<usize> {
    match b {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        _ => None,
    }
}

/// Index of a k-mer string in the lexicographic order used by [`KmerVector`].
pub fn encode_kmer(kmer: &str) -> Option<usize> {
    kmer.bytes()
        .try_fold(0usize, |acc, b| base_code(b.to_ascii_uppercase()).map(|c| acc * 4 + c))
}

/// Windows containing anything outside `{A,C,G,T}` are skipped, not counted.
pub fn kmer_freq(rec: &SequenceRecord, k: usize) -> Result<KmerVector> {
    if k == 0 || k > 16 {
        return Err(Error::param("k", format!("must be in 1..=16, got {k}")));
    }
    let bases = rec.bases.as_bytes();
    if bases.len() < k {
        return Err(Error::data(format!(
            "sequence `{}` has {} bases, shorter than k = {k}",
            rec.id,
            bases.len()
        )));
    }
    let dim = 1usize << (2 * k);
    let mask = dim - 1;
    let mut counts = vec![0u64; dim];
    let mut code = 0usize;
    // Length of the current run of valid bases ending at position i.
    let mut run = 0usize;
    let mut windows = 0u64;
    for &b in bases {
        match base_code(b) {
            Some(c) => {
                code = ((code << 2) | c) & mask;
                run += 1;
                if run >= k {
                    counts[code] += 1;
                    windows += 1;
                }
            }
            None => run = 0,
        }
    }
    if windows == 0 {
        return Err(Error::data(format!(
            "sequence `{}` has no valid {k}-mer window",
            rec.id
        )));
    }
    let total = windows as f64;
    Ok(KmerVector {
        freqs: counts.into_iter().map(|c| c as f64 / total).collect(),
        k,
    })
}

/// Euclidean distances between k-mer vectors.
pub fn pairwise_distance(vectors: &[KmerVector]) -> Result<DistanceMatrix> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::data("pairwise distances need at least two vectors"));
    }
    let dim = vectors[0].freqs.len();
    if let Some(i) = vectors.iter().position(|v| v.freqs.len() != dim) {
        return Err(Error::data(format!(
            "vector {i} has dimension {}, expected {dim}",
            vectors[i].freqs.len()
        )));
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&vectors[i].freqs, &vectors[j].freqs);
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    DistanceMatrix::from_flat(entries, n)
}

/// Synthetic sequence family: a random ancestor, `lineages` founders derived
/// from it by point mutation, and `count` sequences derived from the founders
/// round-robin. Sequences carry an occasional ambiguous `N`.
pub fn gen_sequences(
    count: usize,
    length: usize,
    lineages: usize,
    mutation_rate: f64,
    seed: u64,
) -> Result<Vec<SequenceRecord>> {
    if count == 0 {
        return Err(Error::param("count", "must be at least 1"));
    }
    if length == 0 {
        return Err(Error::param("length", "must be at least 1"));
    }
    if lineages == 0 {
        return Err(Error::param("lineages", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&mutation_rate) {
        return Err(Error::param("mutation_rate", "must lie in [0, 1]"));
    }
    const ALPHABET: [u8; 4] = *b"ACGT";
    let mut rng = rng_from_seed(seed);
    let ancestor: Vec<u8> = (0..length).map(|_| ALPHABET[rng.gen_range(0..4)]).collect();
    let mutate = |src: &[u8], rate: f64, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<u8> {
        src.iter()
            .map(|&b| {
                if rng.gen::<f64>() < rate {
                    ALPHABET[rng.gen_range(0..4)]
                } else {
                    b
                }
            })
            .collect()
    };
    let founders: Vec<Vec<u8>> = (0..lineages)
        .map(|_| mutate(&ancestor, 4.0 * mutation_rate, &mut rng))
        .collect();
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let lineage = i % lineages;
        let mut bases = mutate(&founders[lineage], mutation_rate, &mut rng);
        if rng.gen::<f64>() < 0.5 {
            let at = rng.gen_range(0..length);
            bases[at] = b'N';
        }
        let text = String::from_utf8(bases).expect("ASCII bases");
        records.push(SequenceRecord::new(format!("seq{i}_lineage{lineage}"), text)?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_points_lie_on_circle() {
        let pc = gen_circle((0.0, 0.0), 1.0, 5000, 7).unwrap();
        assert_eq!(pc.len(), 5000);
        for p in pc.rows() {
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-9);
        }
        let one = gen_circle((3.0, 0.0), 1.0, 1, 3).unwrap();
        let p = one.point(0);
        assert!(((p[0] - 3.0).hypot(p[1]) - 1.0).abs() < 1e-9);
        assert_eq!(gen_circle((0.0, 0.0), 1.0, 10, 5).unwrap(), gen_circle((0.0, 0.0), 1.0, 10, 5).unwrap());
    }

    #[test]
    fn circle_rejects_bad_parameters() {
        assert!(gen_circle((0.0, 0.0), 0.0, 10, 1).is_err());
        assert!(gen_circle((0.0, 0.0), -1.0, 10, 1).is_err());
        assert!(gen_circle((0.0, 0.0), 1.0, 0, 1).is_err());
        assert!(gen_two_circles([(0.0, 0.0), (3.0, 0.0)], 1.0, 0, 1).is_err());
    }

    #[test]
    fn disjoint_circles_span() {
        let pc = gen_two_circles([(0.0, 0.0), (3.0, 0.0)], 1.0, 5000, 11).unwrap();
        assert_eq!(pc.len(), 10000);
        let xs: Vec<f64> = pc.rows().map(|r| r[0]).collect();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((lo + 1.0).abs() < 1e-3 && lo >= -1.0);
        assert!((hi - 4.0).abs() < 1e-3 && hi <= 4.0);
    }

    #[test]
    fn intersecting_circles_share_the_lens() {
        let pc = gen_two_circles([(0.0, 0.0), (1.5, 0.0)], 1.0, 5000, 2).unwrap();
        let in_lens = |range: std::ops::Range<usize>| {
            range
                .filter(|&i| {
                    let x = pc.point(i)[0];
                    0.5 < x && x < 1.0
                })
                .count()
        };
        assert!(in_lens(0..5000) > 0);
        assert!(in_lens(5000..10000) > 0);
    }

    #[test]
    fn sub_seeds_are_independent_of_call_order() {
        let both = gen_two_circles([(0.0, 0.0), (3.0, 0.0)], 1.0, 20, 9).unwrap();
        let second = gen_circle((3.0, 0.0), 1.0, 20, derive_seed(9, 1)).unwrap();
        assert_eq!(both.select(&(20..40).collect::<Vec<_>>()), second);
    }

    #[test]
    fn xyz_parsing() {
        let pc = parse_xyz("0 0 0\n1 2 3").unwrap();
        assert_eq!(pc.as_flat(), &[0.0, 0.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(parse_xyz("0 0 0\r\n1 2 3\r\n").unwrap(), pc);
        assert_eq!(parse_xyz("0,0,0\n1,2,3\n").unwrap(), pc);
        match parse_xyz("a b c") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_xyz("").is_err());
        assert!(matches!(parse_xyz("1 2\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn fasta_parsing() {
        let recs = parse_fasta(">s1\nACGT").unwrap();
        assert_eq!(recs, vec![SequenceRecord::new("s1", "ACGT").unwrap()]);
        let recs = parse_fasta(">s1\nAC\ngt\n>s2\nTT\n").unwrap();
        assert_eq!(recs[0].bases(), "ACGT");
        assert_eq!(recs[1].id(), "s2");
        assert!(matches!(parse_fasta("ACGT"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_fasta(">s1\n>s2\nAC").is_err());
        let round = parse_fasta(&write_fasta(&recs, 3)).unwrap();
        assert_eq!(round, recs);
    }

    #[test]
    fn kmer_counts_by_hand() {
        let v = kmer_freq(&SequenceRecord::new("s", "ACGT").unwrap(), 3).unwrap();
        assert_eq!(v.freqs().len(), 64);
        let acg = encode_kmer("ACG").unwrap();
        let cgt = encode_kmer("CGT").unwrap();
        assert_eq!((acg, cgt), (6, 27));
        for (i, &f) in v.freqs().iter().enumerate() {
            let want = if i == acg || i == cgt { 0.5 } else { 0.0 };
            assert_eq!(f, want);
        }
        let ambiguous = SequenceRecord::new("s", "ANGT").unwrap();
        assert!(matches!(kmer_freq(&ambiguous, 3), Err(Error::Data(_))));
        let short = SequenceRecord::new("s", "AC").unwrap();
        assert!(kmer_freq(&short, 3).is_err());
        // N splits the windows but does not discard the record.
        let v = kmer_freq(&SequenceRecord::new("s", "ACGNACG").unwrap(), 3).unwrap();
        assert_eq!(v.freqs()[acg], 1.0);
    }

    #[test]
    fn pairwise_distances() {
        let rec = |s: &str| kmer_freq(&SequenceRecord::new("x", s).unwrap(), 1).unwrap();
        let same = pairwise_distance(&[rec("ACGT"), rec("TGCA")]).unwrap();
        assert_eq!(same.get(0, 1), 0.0);
        let basis = pairwise_distance(&[rec("AAAA"), rec("CCCC")]).unwrap();
        assert!((basis.get(0, 1) - 2f64.sqrt()).abs() < 1e-15);
        let mismatch = pairwise_distance(&[rec("AAAA"), kmer_freq(&SequenceRecord::new("y", "AAAA").unwrap(), 2).unwrap()]);
        assert!(mismatch.is_err());
    }

    #[test]
    fn synthetic_sequences_are_deterministic() {
        let a = gen_sequences(6, 300, 2, 0.02, 4).unwrap();
        assert_eq!(a, gen_sequences(6, 300, 2, 0.02, 4).unwrap());
        assert_eq!(a.len(), 6);
        assert!(a.iter().all(|r| r.bases().len() == 300));
    }
}
