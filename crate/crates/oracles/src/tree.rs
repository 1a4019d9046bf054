//! Exhaustive enumeration of binary hidden Markov trees.

/// A forest of binary state nodes. `parent[n]` is `None` for roots.
/// `p11[n]`/`p00[n]` are the transition probabilities on the edge into `n`
/// (ignored for roots); roots are active with probability `root_on`.
pub struct Forest {
    pub parent: Vec<Option<usize>>,
    pub p11: Vec<f64>,
    pub p00: Vec<f64>,
    pub root_on: f64,
}

impl Forest {
    /// Prior probability of the joint configuration encoded in `mask`.
    fn joint_prior(&self, mask: u32) -> f64 {
        let bit = |n: usize| (mask >> n) & 1 == 1;
        let mut p = 1.0;
        for n in 0..self.parent.len() {
            let on = bit(n);
            p *= match self.parent[n] {
                None => {
                    if on {
                        self.root_on
                    } else {
                        1.0 - self.root_on
                    }
                }
                Some(q) => match (bit(q), on) {
                    (true, true) => self.p11[n],
                    (true, false) => 1.0 - self.p11[n],
                    (false, false) => self.p00[n],
                    (false, true) => 1.0 - self.p00[n],
                },
            };
        }
        p
    }

    /// For each node `n`, `h(s_n) ∝ Σ_{s \ s_n} p(s) Π_{q≠n} d_q(s_q)`, normalized.
    /// Evidence must be strictly positive.
    pub fn extrinsic(&self, evidence: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let k = self.parent.len();
        assert!(k <= 24, "enumeration limited to 24 nodes");
        assert!(evidence.iter().all(|e| e[0] > 0.0 && e[1] > 0.0));
        let mut acc = vec![[0.0f64; 2]; k];
        for mask in 0u32..(1u32 << k) {
            let prior = self.joint_prior(mask);
            let mut all = prior;
            for (n, e) in evidence.iter().enumerate() {
                all *= e[((mask >> n) & 1) as usize];
            }
            for (n, e) in evidence.iter().enumerate() {
                let s = ((mask >> n) & 1) as usize;
                acc[n][s] += all / e[s];
            }
        }
        acc.iter()
            .map(|a| {
                let z = a[0] + a[1];
                [a[0] / z, a[1] / z]
            })
            .collect()
    }
}
