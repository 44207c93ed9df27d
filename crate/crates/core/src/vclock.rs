//! Vector timestamps: thread-indexed counters with pointwise join and order.

use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct VectorTimestamp(Vec<u64>);

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("vector width mismatch: {0} vs {1}")]
pub struct WidthMismatch(pub usize, pub usize);

impl VectorTimestamp {
    /// The bottom element of the given width.
    pub fn bottom(width: usize) -> Self {
        VectorTimestamp(vec![0; width])
    }

    pub fn from_vec(v: Vec<u64>) -> Self {
        VectorTimestamp(v)
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn get(&self, t: usize) -> u64 {
        self.0[t]
    }

    pub fn is_bottom(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// `V[t ↦ c]`
    pub fn with(&self, t: usize, c: u64) -> Self {
        let mut v = self.clone();
        v.0[t] = c;
        v
    }

    pub fn set(&mut self, t: usize, c: u64) {
        self.0[t] = c;
    }

    pub fn bump(&mut self, t: usize) {
        self.0[t] += 1;
    }

    pub fn bumped(&self, t: usize) -> Self {
        let mut v = self.clone();
        v.bump(t);
        v
    }

    pub fn join(&self, other: &Self) -> Result<Self, WidthMismatch> {
        let mut v = self.clone();
        v.try_join_assign(other)?;
        Ok(v)
    }

    pub fn try_join_assign(&mut self, other: &Self) -> Result<(), WidthMismatch> {
        if self.width() != other.width() {
            return Err(WidthMismatch(self.width(), other.width()));
        }
        self.join_assign(other);
        Ok(())
    }

    /// In-place join; widths must agree.
    pub fn join_assign(&mut self, other: &Self) {
        self.absorb(other);
    }

    /// In-place join that reports whether any component grew.
    pub fn absorb(&mut self, other: &Self) -> bool {
        assert_eq!(self.0.len(), other.0.len(), "vector width mismatch");
        let mut grew = false;
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            if b > *a {
                *a = b;
                grew = true;
            }
        }
        grew
    }

    pub fn leq(&self, other: &Self) -> Result<bool, WidthMismatch> {
        if self.width() != other.width() {
            return Err(WidthMismatch(self.width(), other.width()));
        }
        Ok(self.le(other))
    }

    /// Pointwise order `⊑`; widths must agree.
    pub fn le(&self, other: &Self) -> bool {
        assert_eq!(self.0.len(), other.0.len(), "vector width mismatch");
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl fmt::Display for VectorTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}
