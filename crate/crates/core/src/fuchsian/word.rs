//! Freely reduced words in a free group of finite rank.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// A generator or its inverse.
///
/// Encoded as `2·gen + inv`, so the derived order is `a < a⁻¹ < b < b⁻¹ < …`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Letter(u32);

impl Letter {
    #[inline]
    pub const fn new(gen: usize, inverse: bool) -> Self {
        Letter(((gen as u32) << 1) | inverse as u32)
    }

    #[inline]
    pub const fn gen(self) -> usize {
        (self.0 >> 1) as usize
    }

    #[inline]
    pub const fn is_inverse(self) -> bool {
        self.0 & 1 == 1
    }

    #[inline]
    pub const fn inverse(self) -> Self {
        Letter(self.0 ^ 1)
    }

    /// `+1` or `−1`.
    #[inline]
    pub const fn sign(self) -> i64 {
        if self.is_inverse() {
            -1
        } else {
            1
        }
    }

    /// One-based signed index: `a ↦ 1`, `a⁻¹ ↦ −1`, `b ↦ 2`, …
    pub fn to_signed(self) -> i64 {
        (self.gen() as i64 + 1) * self.sign()
    }

    pub fn from_signed(v: i64) -> Option<Self> {
        if v == 0 {
            return None;
        }
        Some(Letter::new((v.unsigned_abs() - 1) as usize, v < 0))
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = self.gen();
        if g < 26 {
            let base = if self.is_inverse() { b'A' } else { b'a' };
            write!(f, "{}", (base + g as u8) as char)
        } else if self.is_inverse() {
            write!(f, "X{}", g)
        } else {
            write!(f, "x{}", g)
        }
    }
}

/// A freely reduced word. Lower case letters are generators, upper case
/// their inverses.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    pub const fn identity() -> Self {
        Word { letters: Vec::new() }
    }

    pub fn new(letters: impl IntoIterator<Item = Letter>) -> Self {
        let mut w = Word::identity();
        for l in letters {
            w.push(l);
        }
        w
    }

    pub fn gen(gen: usize) -> Self {
        Word {
            letters: alloc::vec![Letter::new(gen, false)],
        }
    }

    /// Builds from one-based signed indices; `None` on a zero entry.
    pub fn from_signed(indices: &[i64]) -> Option<Self> {
        let mut w = Word::identity();
        for &v in indices {
            w.push(Letter::from_signed(v)?);
        }
        Some(w)
    }

    pub fn to_signed(&self) -> Vec<i64> {
        self.letters.iter().map(|l| l.to_signed()).collect()
    }

    /// Parses the `aBc` notation.
    pub fn parse(s: &str) -> Option<Self> {
        let mut w = Word::identity();
        for ch in s.chars() {
            if ch.is_whitespace() || ch == '.' || ch == '*' {
                continue;
            }
            let l = match ch {
                'a'..='z' => Letter::new(ch as usize - 'a' as usize, false),
                'A'..='Z' => Letter::new(ch as usize - 'A' as usize, true),
                _ => return None,
            };
            w.push(l);
        }
        Some(w)
    }

    #[inline]
    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Appends a letter, cancelling against the last one if needed.
    pub fn push(&mut self, l: Letter) {
        if self.letters.last() == Some(&l.inverse()) {
            self.letters.pop();
        } else {
            self.letters.push(l);
        }
    }

    pub fn mul(&self, other: &Word) -> Word {
        let mut w = self.clone();
        for &l in &other.letters {
            w.push(l);
        }
        w
    }

    pub fn inverse(&self) -> Word {
        Word {
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    pub fn pow(&self, n: i64) -> Word {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut w = Word::identity();
        for _ in 0..n.unsigned_abs() {
            w = w.mul(&base);
        }
        w
    }

    pub fn max_gen(&self) -> Option<usize> {
        self.letters.iter().map(|l| l.gen()).max()
    }

    /// Exponent-sum vector in `ℤ^rank`.
    pub fn abelianize(&self, rank: usize) -> Vec<i64> {
        let mut v = alloc::vec![0i64; rank];
        for l in &self.letters {
            v[l.gen()] += l.sign();
        }
        v
    }

    /// Strips matching inverse letters from both ends.
    pub fn cyclically_reduce(&self) -> Word {
        let n = self.letters.len();
        let mut i = 0;
        while 2 * i + 1 < n && self.letters[i] == self.letters[n - 1 - i].inverse() {
            i += 1;
        }
        Word {
            letters: self.letters[i..n - i].to_vec(),
        }
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        match (self.letters.first(), self.letters.last()) {
            (Some(&f), Some(&l)) => self.letters.len() == 1 || f != l.inverse(),
            _ => true,
        }
    }

    pub fn rotate(&self, k: usize) -> Word {
        let mut letters = self.letters.clone();
        if !letters.is_empty() {
            let k = k % letters.len();
            letters.rotate_left(k);
        }
        Word { letters }
    }

    /// Least rotation of the cyclic reduction: the canonical name of the
    /// conjugacy class.
    pub fn necklace(&self) -> Word {
        let c = self.cyclically_reduce();
        let k = least_rotation(&c.letters);
        c.rotate(k)
    }

    /// Writes the word as `root^k` with `k` maximal.
    pub fn root(&self) -> (Word, usize) {
        let n = self.letters.len();
        if n == 0 {
            return (Word::identity(), 1);
        }
        let p = smallest_period(&self.letters);
        if n % p == 0 {
            (
                Word {
                    letters: self.letters[..p].to_vec(),
                },
                n / p,
            )
        } else {
            (self.clone(), 1)
        }
    }

    /// True unless the conjugacy class is a proper power.
    pub fn is_primitive_class(&self) -> bool {
        self.cyclically_reduce().root().1 == 1
    }

    /// Maximal runs `g^n` as `(generator, n)`.
    pub fn syllables(&self) -> Vec<(usize, i64)> {
        let mut out: Vec<(usize, i64)> = Vec::new();
        for l in &self.letters {
            match out.last_mut() {
                Some((g, n)) if *g == l.gen() => *n += l.sign(),
                _ => out.push((l.gen(), l.sign())),
            }
        }
        out
    }

    pub fn to_notation(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        for l in &self.letters {
            let _ = write!(s, "{}", l);
        }
        s
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("1");
        }
        for l in &self.letters {
            write!(f, "{}", l)?;
        }
        Ok(())
    }
}

impl From<Letter> for Word {
    fn from(l: Letter) -> Self {
        Word { letters: alloc::vec![l] }
    }
}

/// Booth's algorithm.
pub(crate) fn least_rotation<T: Ord>(s: &[T]) -> usize {
    let n = s.len();
    if n == 0 {
        return 0;
    }
    let at = |i: usize| &s[i % n];
    let mut f = alloc::vec![usize::MAX; 2 * n];
    let mut k = 0usize;
    for j in 1..2 * n {
        let mut i = f[j - k - 1];
        while i != usize::MAX && at(j) != at(k + i + 1) {
            if at(j) < at(k + i + 1) {
                k = j - i - 1;
            }
            i = f[i];
        }
        if i == usize::MAX && at(j) != at(k) {
            if at(j) < at(k) {
                k = j;
            }
            f[j - k] = usize::MAX;
        } else {
            f[j - k] = i.wrapping_add(1);
        }
    }
    k
}

fn smallest_period<T: Eq>(s: &[T]) -> usize {
    let n = s.len();
    let mut fail = alloc::vec![0usize; n];
    let mut k = 0;
    for i in 1..n {
        while k > 0 && s[i] != s[k] {
            k = fail[k - 1];
        }
        if s[i] == s[k] {
            k += 1;
        }
        fail[i] = k;
    }
    n - fail[n - 1]
}
