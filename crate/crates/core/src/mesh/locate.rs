use super::{Point, Triangulation};

/// Uniform bucket grid over the mesh bounding box for point location.
pub struct PointLocator<'a> {
    mesh: &'a Triangulation,
    origin: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Triangulation) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &mesh.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v.coords[k]);
                hi[k] = hi[k].max(v.coords[k]);
            }
        }
        let n = ((mesh.num_cells() as f64).sqrt().ceil() as usize).max(1);
        let dims = [n, n];
        let cell = [
            ((hi[0] - lo[0]) / n as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / n as f64).max(f64::MIN_POSITIVE),
        ];
        let mut loc = Self {
            mesh,
            origin: lo,
            cell,
            dims,
            buckets: vec![Vec::new(); n * n],
        };
        for c in 0..mesh.num_cells() {
            let pts = mesh.cell_points(c);
            let (mut bl, mut bh) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in pts {
                for k in 0..2 {
                    bl[k] = bl[k].min(p[k]);
                    bh[k] = bh[k].max(p[k]);
                }
            }
            let [i0, j0] = loc.bucket_of(bl);
            let [i1, j1] = loc.bucket_of(bh);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    loc.buckets[i * dims[1] + j].push(c);
                }
            }
        }
        loc
    }

    fn bucket_of(&self, p: Point) -> [usize; 2] {
        let f = |k: usize| {
            let x = ((p[k] - self.origin[k]) / self.cell[k]).floor();
            (x.max(0.0) as usize).min(self.dims[k] - 1)
        };
        [f(0), f(1)]
    }

    /// A cell containing `p` (up to a small tolerance), preferring the cell
    /// in which `p` is deepest.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let [i, j] = self.bucket_of(p);
        let mut best: Option<(usize, f64)> = None;
        for &c in &self.buckets[i * self.dims[1] + j] {
            let lambda = self.mesh.barycentric(c, p);
            let depth = lambda[0].min(lambda[1]).min(lambda[2]);
            if depth >= -1e-10 && best.is_none_or(|(_, d)| depth > d) {
                best = Some((c, depth));
            }
        }
        best.map(|(c, _)| c)
    }

    /// Value of the P1 function with vertex values `u` at `p`.
    pub fn evaluate(&self, u: &[f64], p: Point) -> Option<f64> {
        self.locate(p).map(|c| self.mesh.eval_in_cell(c, u, p))
    }
}
