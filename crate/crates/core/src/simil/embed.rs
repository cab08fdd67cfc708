use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Word vectors stored row-major in one buffer.
#[derive(Clone, Debug)]
pub struct EmbeddingTable<T> {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<T>,
    digest: String,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            index: HashMap::new(),
            data: Vec::new(),
            digest: String::new(),
        })
    }

    /// Inserts a vector unless the token is already present.
    pub fn insert(&mut self, token: &str, vector: &[T]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                context: "embedding vector",
                expected: self.dim,
                found: vector.len(),
            });
        }
        if self.index.contains_key(token) {
            return Ok(false);
        }
        self.index.insert(token.to_string(), self.index.len());
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[T]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// SHA-256 of the source file, or of the contents for tables built in memory.
    pub fn digest(&self) -> String {
        if !self.digest.is_empty() {
            return self.digest.clone();
        }
        let mut tokens: Vec<(&String, &usize)> = self.index.iter().collect();
        tokens.sort_by_key(|&(_, &i)| i);
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for (t, &i) in tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                h.update(v.to_f64_lossy().to_le_bytes());
            }
        }
        hex_digest(h.finalize().as_slice())
    }
}

pub fn load_embeddings<T: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingTable<T>> {
    load_embeddings_filtered(path, None)
}

/// Reads a whitespace-separated vector file with an optional `count dim` header.
/// Tokens are lowercased; the first occurrence wins. When `keep` is given, only
/// those tokens are stored (the digest still covers the whole file).
pub fn load_embeddings_filtered<T: Scalar>(
    path: impl AsRef<Path>,
    keep: Option<&HashSet<String>>,
) -> Result<EmbeddingTable<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut dim: Option<usize> = None;
    let mut table: Option<EmbeddingTable<T>> = None;
    let mut line = String::new();
    let mut line_no = 0usize;
    let mut buf: Vec<T> = Vec::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(line.as_bytes());
        line_no += 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if line_no == 1 && fields.len() == 2 {
            if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                dim = Some(d);
                continue;
            }
        }
        let d = *dim.get_or_insert(fields.len() - 1);
        if table.is_none() {
            table = Some(EmbeddingTable::new(d)?);
        }
        if fields.len() < d + 1 {
            return Err(Error::Dimension {
                context: "embedding file line",
                expected: d,
                found: fields.len() - 1,
            });
        }
        // tokens may themselves contain spaces
        let split = fields.len() - d;
        let token = fields[..split].join(" ").to_lowercase();
        if keep.is_some_and(|k| !k.contains(&token)) {
            continue;
        }
        buf.clear();
        for f in &fields[split..] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::Parse(format!("{}:{line_no}: bad float {f:?}", path.display())))?;
            buf.push(T::lit(v));
        }
        table.as_mut().unwrap().insert(&token, &buf)?;
    }
    let mut table = match table {
        Some(t) if !t.is_empty() || keep.is_some() => t,
        _ => return Err(Error::Empty("embedding table")),
    };
    table.digest = hex_digest(hasher.finalize().as_slice());
    Ok(table)
}

fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Mean vector of covered tokens; the zero vector when nothing is covered.
pub fn avg_embedding<T: Scalar>(tokens: &[String], table: &EmbeddingTable<T>) -> Vec<T> {
    let mut sum = vec![T::zero(); table.dim()];
    let mut covered = 0usize;
    for v in tokens.iter().filter_map(|t| table.get(t)) {
        for (s, &x) in sum.iter_mut().zip(v) {
            *s = *s + x;
        }
        covered += 1;
    }
    if covered > 0 {
        let n = T::from_usize_lossy(covered);
        for s in &mut sum {
            *s = *s / n;
        }
    }
    sum
}
