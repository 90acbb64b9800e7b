//! Vectors and incremental Gaussian elimination over the two-element field.

use std::fmt;

/// Fixed-dimension bit vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i >> 6] |= 1 << (i & 63);
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i >> 6] ^= 1 << (i & 63);
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(i * 64 + bit)
            })
        })
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

struct Row {
    vector: BitVec,
    /// Which inserted generators sum to `vector`.
    combination: BitVec,
}

/// Row-echelon basis of the span of a growing set of generators. Each row
/// remembers the generators it is built from, so membership queries can
/// return an explicit combination.
pub struct Basis {
    dim: usize,
    generators: usize,
    rows: Vec<Row>,
    /// pivot column -> row index
    pivots: Vec<Option<usize>>,
}

impl Basis {
    /// `dim` is the vector dimension, `generators` bounds the generator ids
    /// passed to [`Basis::insert`].
    pub fn new(dim: usize, generators: usize) -> Self {
        Basis {
            dim,
            generators,
            rows: Vec::new(),
            pivots: vec![None; dim],
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    fn reduce(&self, v: &BitVec) -> (BitVec, BitVec) {
        let mut v = v.clone();
        let mut comb = BitVec::zeros(self.generators);
        while let Some(p) = v.first_one() {
            match self.pivots[p] {
                Some(r) => {
                    v.xor_assign(&self.rows[r].vector);
                    comb.xor_assign(&self.rows[r].combination);
                }
                None => break,
            }
        }
        (v, comb)
    }

    /// Adds generator `id` with vector `v`. Returns false if `v` was
    /// already in the span.
    pub fn insert(&mut self, id: usize, v: &BitVec) -> bool {
        debug_assert_eq!(v.len(), self.dim);
        let (rest, mut comb) = self.reduce(v);
        let Some(p) = rest.first_one() else {
            return false;
        };
        comb.flip(id);
        self.pivots[p] = Some(self.rows.len());
        self.rows.push(Row {
            vector: rest,
            combination: comb,
        });
        true
    }

    /// Generator ids whose vectors sum to `v`, if `v` lies in the span.
    pub fn solve(&self, v: &BitVec) -> Option<Vec<usize>> {
        let (rest, comb) = self.reduce(v);
        rest.is_zero().then(|| comb.ones().collect())
    }

    pub fn contains(&self, v: &BitVec) -> bool {
        self.reduce(v).0.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(bits: &str) -> BitVec {
        let mut v = BitVec::zeros(bits.len());
        for (i, c) in bits.chars().enumerate() {
            if c == '1' {
                v.set(i);
            }
        }
        v
    }

    #[test]
    fn span_membership() {
        // basis (a, b, c)
        let mut basis = Basis::new(3, 3);
        assert!(basis.insert(0, &vec_of("110")));
        assert!(basis.insert(1, &vec_of("011")));
        assert!(!basis.insert(2, &vec_of("101")));
        assert_eq!(basis.rank(), 2);
        assert!(!basis.contains(&vec_of("100")));
        assert!(basis.contains(&vec_of("000")));
    }

    #[test]
    fn solve_returns_combination() {
        let mut basis = Basis::new(3, 3);
        basis.insert(0, &vec_of("110"));
        basis.insert(1, &vec_of("101"));
        basis.insert(2, &vec_of("100"));
        let target = vec_of("011");
        let comb = basis.solve(&target).unwrap();
        let mut sum = BitVec::zeros(3);
        let gens = [vec_of("110"), vec_of("101"), vec_of("100")];
        for i in &comb {
            sum.xor_assign(&gens[*i]);
        }
        assert_eq!(sum, target);
    }

    #[test]
    fn wide_vectors() {
        let mut v = BitVec::zeros(200);
        v.set(3);
        v.set(130);
        assert_eq!(v.ones().collect::<Vec<_>>(), vec![3, 130]);
        assert_eq!(v.first_one(), Some(3));
        assert_eq!(v.count_ones(), 2);
    }
}
