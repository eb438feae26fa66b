use crate::error::{Error, Result};

pub const BRANCHING: usize = 3;
pub const DEPTH: usize = 3;
pub const SPACE: char = ' ';

/// 27 characters in three levels of three blocks. Leaf order is
/// block-major: the leftmost top block covers `ABCDEFGHI`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterTree {
    leaves: [char; 27],
}

impl Default for CharacterTree {
    fn default() -> Self {
        let mut leaves = [SPACE; 27];
        for (slot, c) in leaves.iter_mut().zip('A'..='Z') {
            *slot = c;
        }
        CharacterTree { leaves }
    }
}

impl CharacterTree {
    pub fn new(leaves: [char; 27]) -> Result<Self> {
        for (i, c) in leaves.iter().enumerate() {
            if leaves[..i].contains(c) {
                return Err(Error::Config(format!("character `{c}` appears twice")));
            }
        }
        Ok(CharacterTree { leaves })
    }

    pub fn leaves(&self) -> &[char; 27] {
        &self.leaves
    }

    fn range(path: &[usize]) -> (usize, usize) {
        let mut lo = 0;
        let mut width = 27;
        for &b in path {
            width /= BRANCHING;
            lo += b * width;
        }
        (lo, lo + width)
    }

    /// Characters under `path` (empty path is the whole tree).
    pub fn characters(&self, path: &[usize]) -> String {
        let (lo, hi) = Self::range(path);
        self.leaves[lo..hi].iter().collect()
    }

    /// The three block labels shown at the interface reached by `path`.
    pub fn blocks(&self, path: &[usize]) -> [String; BRANCHING] {
        let mut p = path.to_vec();
        std::array::from_fn(|b| {
            p.push(b);
            let s = self.characters(&p);
            p.pop();
            s
        })
    }

    pub fn leaf(&self, path: &[usize; DEPTH]) -> char {
        self.leaves[Self::range(path).0]
    }

    pub fn path_of(&self, c: char) -> Option<[usize; DEPTH]> {
        let i = self.leaves.iter().position(|&l| l == c)?;
        Some([i / 9, (i / 3) % 3, i % 3])
    }
}
