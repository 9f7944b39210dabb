//! Gauss-Laguerre rules for expectations over an Exp(1) variable.

use std::sync::OnceLock;

/// Nodes and weights of an `n`-point Gauss-Laguerre rule, so that
/// `E[f(U)] ≈ Σ w_i f(x_i)` for `U ~ Exp(1)`.
#[derive(Debug, Clone)]
pub struct LaguerreRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LaguerreRule {
    /// Builds the rule by Newton iteration on the Laguerre polynomial `L_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Laguerre rule needs at least one node");
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut z = 0.0f64;
        for i in 0..n {
            // Initial guesses for the i-th smallest root.
            z = match i {
                0 => 3.0 / (1.0 + 2.4 * nf),
                1 => z + 15.0 / (1.0 + 2.5 * nf),
                _ => {
                    let ai = (i - 1) as f64;
                    z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
                }
            };
            let mut p2 = 0.0;
            let mut pp = 1.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                p2 = 0.0;
                for j in 1..=n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * jf - 1.0 - z) * p2 - (jf - 1.0) * p3) / jf;
                }
                pp = nf * (p1 - p2) / z;
                let prev = z;
                z = prev - p1 / pp;
                if (z - prev).abs() <= 1e-15 * z.abs() {
                    break;
                }
            }
            nodes[i] = z;
            weights[i] = -1.0 / (pp * nf * p2);
        }
        LaguerreRule { nodes, weights }
    }

    /// `E[f(U)]` for `U ~ Exp(1)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Default number of nodes for fading expectations.
pub const FADING_NODES: usize = 32;

/// Shared 32-node rule.
pub fn fading_rule() -> &'static LaguerreRule {
    static RULE: OnceLock<LaguerreRule> = OnceLock::new();
    RULE.get_or_init(|| LaguerreRule::new(FADING_NODES))
}
