//! Per-node second jets of a metric: values, inverse, first and second
//! coordinate derivatives, and the Christoffel symbols built from them.

use crate::tensor::{sym_index, MetricField};

pub(crate) struct MetricJets<'a> {
    pub g: &'a MetricField,
    pub n: usize,
    /// `dg[k][c]`
    pub dg: Vec<Vec<Vec<f64>>>,
    /// `ddg[sym(k,l)][c]`, present when requested.
    pub ddg: Vec<Vec<Vec<f64>>>,
}

/// Dense local copy of a jet at one node.
#[derive(Clone, Debug)]
pub(crate) struct Local {
    pub n: usize,
    pub g: Vec<f64>,
    pub gi: Vec<f64>,
    /// `dg[(k*n + i)*n + j] = d_k g_ij`
    pub dg: Vec<f64>,
    /// `ddg[((k*n + l)*n + i)*n + j] = d_k d_l g_ij`
    pub ddg: Vec<f64>,
    /// `gam[(k*n + i)*n + j] = Gamma^k_ij`
    pub gam: Vec<f64>,
}

impl Local {
    pub fn new(n: usize) -> Local {
        Local {
            n,
            g: vec![0.0; n * n],
            gi: vec![0.0; n * n],
            dg: vec![0.0; n * n * n],
            ddg: vec![0.0; n * n * n * n],
            gam: vec![0.0; n * n * n],
        }
    }

    #[inline]
    pub fn i2(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    #[inline]
    pub fn i3(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.n + i) * self.n + j
    }

    #[inline]
    pub fn i4(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.n + b) * self.n + c) * self.n + d
    }

    /// Covariant Riemann tensor `R_ijkl` with `R_ijij` the sectional
    /// curvature times the area factor.
    pub fn riemann(&self, out: &mut [f64]) {
        let n = self.n;
        // first kind Christoffels [pq]_{jk} lowered: Gamma_{q,il} = g_qp Gamma^p_il
        let mut low = vec![0.0; n * n * n];
        for q in 0..n {
            for i in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for p in 0..n {
                        s += self.g[self.i2(q, p)] * self.gam[self.i3(p, i, l)];
                    }
                    low[self.i3(q, i, l)] = s;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = 0.5
                            * ((self.ddg[self.i4(j, k, i, l)] + self.ddg[self.i4(i, l, j, k)])
                                - (self.ddg[self.i4(i, k, j, l)] + self.ddg[self.i4(j, l, i, k)]));
                        for p in 0..n {
                            s += self.gam[self.i3(p, j, k)] * low[self.i3(p, i, l)]
                                - self.gam[self.i3(p, i, k)] * low[self.i3(p, j, l)];
                        }
                        out[self.i4(i, j, k, l)] = s;
                    }
                }
            }
        }
    }
}

impl<'a> MetricJets<'a> {
    pub fn new(g: &'a MetricField, second: bool) -> MetricJets<'a> {
        let grid = g.grid();
        let n = g.dim();
        let s = g.sym();
        let dg = (0..n)
            .map(|k| s.comps.iter().enumerate().map(|(c, f)| grid.d1(f, k, s.parity(c))).collect())
            .collect();
        let mut ddg = Vec::new();
        if second {
            for k in 0..n {
                for l in k..n {
                    ddg.push(
                        s.comps.iter().enumerate().map(|(c, f)| grid.d2(f, k, l, s.parity(c))).collect(),
                    );
                }
            }
        }
        MetricJets { g, n, dg, ddg }
    }

    pub fn fill(&self, node: usize, loc: &mut Local) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                loc.g[i * n + j] = self.g.get(i, j)[node];
                loc.gi[i * n + j] = self.g.inv(i, j)[node];
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    loc.dg[(k * n + i) * n + j] = self.dg[k][sym_index(n, i, j)][node];
                }
            }
        }
        if !self.ddg.is_empty() {
            for k in 0..n {
                for l in 0..n {
                    let kl = sym_index(n, k, l);
                    for i in 0..n {
                        for j in 0..n {
                            loc.ddg[((k * n + l) * n + i) * n + j] = self.ddg[kl][sym_index(n, i, j)][node];
                        }
                    }
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += loc.gi[k * n + l]
                            * ((loc.dg[(i * n + j) * n + l] + loc.dg[(j * n + i) * n + l])
                                - loc.dg[(l * n + i) * n + j]);
                    }
                    loc.gam[(k * n + i) * n + j] = 0.5 * s;
                }
            }
        }
    }
}
