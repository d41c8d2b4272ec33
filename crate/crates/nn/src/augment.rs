//! The eight rotations/reflections of a square grid.

use rand::Rng;

/// Optional horizontal flip followed by `quarter_turns` clockwise rotations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dihedral {
    pub flip: bool,
    pub quarter_turns: u8,
}

impl Dihedral {
    pub const IDENTITY: Dihedral = Dihedral {
        flip: false,
        quarter_turns: 0,
    };

    pub fn rotation(quarter_turns: u8) -> Self {
        Self {
            flip: false,
            quarter_turns: quarter_turns % 4,
        }
    }

    pub fn random<R: Rng>(rng: &mut R) -> Self {
        Self {
            flip: rng.random(),
            quarter_turns: rng.random_range(0..4),
        }
    }

    /// Whether rows and columns exchange roles.
    pub fn swaps_axes(&self) -> bool {
        self.quarter_turns % 2 == 1
    }

    /// Destination of cell `(r, c)` on an `n x n` grid.
    pub fn map(&self, mut r: usize, mut c: usize, n: usize) -> (usize, usize) {
        if self.flip {
            c = n - 1 - c;
        }
        for _ in 0..self.quarter_turns % 4 {
            (r, c) = (c, n - 1 - r);
        }
        (r, c)
    }

    /// Transforms a row-major `n x n` plane.
    pub fn apply<T: Copy + Default>(&self, plane: &[T], n: usize) -> Vec<T> {
        let mut out = vec![T::default(); n * n];
        for r in 0..n {
            for c in 0..n {
                let (r2, c2) = self.map(r, c, n);
                out[r2 * n + c2] = plane[r * n + c];
            }
        }
        out
    }
}
