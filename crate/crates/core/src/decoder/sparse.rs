use crate::lfcore::Plane;

/// Row-compressed sparse plane: per row, the sorted columns and values of
/// its nonzero samples. Unlisted positions read as zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseImage {
    width: usize,
    height: usize,
    row_ptr: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<i16>,
}

impl SparseImage {
    pub fn from_plane(plane: &Plane) -> Self {
        let (w, h) = (plane.width(), plane.height());
        let mut row_ptr = Vec::with_capacity(h + 1);
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        row_ptr.push(0);
        for row in plane.samples().chunks_exact(w) {
            for (x, &v) in row.iter().enumerate().filter(|(_, &v)| v != 0) {
                cols.push(x as u32);
                vals.push(i16::try_from(v).expect("SRV samples fit in i16"));
            }
            row_ptr.push(cols.len() as u32);
        }
        SparseImage { width: w, height: h, row_ptr, cols, vals }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn heap_bytes(&self) -> usize {
        self.row_ptr.len() * 4 + self.cols.len() * 4 + self.vals.len() * 2
    }

    fn row(&self, y: usize) -> (&[u32], &[i16]) {
        let (a, b) = (self.row_ptr[y] as usize, self.row_ptr[y + 1] as usize);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, x: usize, y: usize) -> i32 {
        let (cols, vals) = self.row(y);
        cols.binary_search(&(x as u32)).map_or(0, |i| vals[i] as i32)
    }

    pub fn get_or_zero(&self, x: isize, y: isize) -> i32 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            0
        } else {
            self.get(x as usize, y as usize)
        }
    }

    /// Adds `sign · v` for the samples of row `y` in `[x0, x0 + out.len())`
    /// to `out`; positions outside the plane contribute nothing.
    #[inline]
    pub fn add_run(&self, y: isize, x0: isize, sign: i32, out: &mut [i32]) {
        if y < 0 || y as usize >= self.height {
            return;
        }
        let (cols, vals) = self.row(y as usize);
        let lo = x0.max(0) as u32;
        let hi = x0 + out.len() as isize;
        if hi <= 0 {
            return;
        }
        let start = cols.partition_point(|&c| c < lo);
        for (&c, &v) in cols[start..].iter().zip(&vals[start..]) {
            if c as isize >= hi {
                break;
            }
            out[(c as isize - x0) as usize] += sign * v as i32;
        }
    }

    pub fn to_plane(&self, range: crate::lfcore::ValueRange) -> Plane {
        Plane::from_fn(self.width, self.height, range, |x, y| self.get(x, y)).expect("values came from a plane")
    }
}
