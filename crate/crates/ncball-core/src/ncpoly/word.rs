use std::cmp::Ordering;
use std::fmt;

/// A letter `x_{row,col}` of a rectangular grid of variables, optionally
/// adjoined. Indices are zero-based; text forms are one-based.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Letter {
    pub row: usize,
    pub col: usize,
    pub star: bool,
}

impl Letter {
    pub fn new(row: usize, col: usize) -> Self {
        Letter { row, col, star: false }
    }

    pub fn starred(row: usize, col: usize) -> Self {
        Letter { row, col, star: true }
    }

    pub fn adjoint(self) -> Self {
        Letter { star: !self.star, ..self }
    }

    /// Render in the text grammar for a grid with the given dimensions.
    pub fn render(&self, gprime: usize, g: usize) -> String {
        let star = if self.star { "*" } else { "" };
        if gprime <= 9 && g <= 9 {
            format!("x{}{}{}", self.row + 1, self.col + 1, star)
        } else {
            format!("x{}_{}{}", self.row + 1, self.col + 1, star)
        }
    }
}

/// A word in the free monoid; the empty word is the unit.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Reverse the word and adjoin every letter.
    pub fn adjoint(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.adjoint()).collect())
    }

    pub fn has_star(&self) -> bool {
        self.0.iter().any(|l| l.star)
    }

    pub fn render(&self, gprime: usize, g: usize) -> String {
        self.0.iter().map(|l| l.render(gprime, g)).collect::<Vec<_>>().join(" ")
    }

    /// All unstarred words of length exactly `k` over a `gprime x g` grid, in
    /// graded-lex order.
    pub fn all_of_length(gprime: usize, g: usize, k: usize) -> Vec<Word> {
        let letters: Vec<Letter> = (0..gprime).flat_map(|r| (0..g).map(move |c| Letter::new(r, c))).collect();
        let mut out = vec![Word::empty()];
        for _ in 0..k {
            let mut next = Vec::with_capacity(out.len() * letters.len());
            for w in &out {
                for &l in &letters {
                    let mut v = w.0.clone();
                    v.push(l);
                    next.push(Word(v));
                }
            }
            out = next;
        }
        out
    }

    pub fn all_up_to(gprime: usize, g: usize, k: usize) -> Vec<Word> {
        (0..=k).flat_map(|i| Word::all_of_length(gprime, g, i)).collect()
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.0.iter().map(|l| l.render(10, 10)).collect();
        write!(f, "{}", parts.join(" "))
    }
}
