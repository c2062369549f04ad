/// Row-major 2D binary image; pixel `(u, v)` lives at `v * width + u`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bitmap {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Bitmap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Option<Self> {
        (bits.len() == width * height).then_some(Self { width, height, bits })
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: bool) {
        self.bits[v * self.width + u] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_clear(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Set pixels as `(u, v)` in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter_map(move |(i, &b)| b.then_some((i % w, i / w)))
    }

    /// Clears every pixel not set in `keep`.
    pub fn intersect(&mut self, keep: &[bool]) {
        for (b, &k) in self.bits.iter_mut().zip(keep) {
            *b &= k;
        }
    }
}
