//! 2-D embeddings of the latent space and the neighbourhood label score.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::env::BehaviourId;
use crate::rng::{stream_rng, Stream};
use crate::Scalar;

/// A labelled point in the 2-D embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedPoint {
    pub z1: Scalar,
    pub z2: Scalar,
    pub behaviour_label: BehaviourId,
}

/// t-SNE settings; the defaults follow common practice.
#[derive(Debug, Clone, PartialEq)]
pub struct TsneParams {
    pub perplexity: Scalar,
    pub iterations: usize,
    pub learning_rate: Scalar,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams { perplexity: 30.0, iterations: 500, learning_rate: 200.0, seed: 0 }
    }
}

/// Embedding method: deterministic PCA (the default) or seeded t-SNE.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbedMethod {
    Pca,
    Tsne(TsneParams),
}

/// Project labelled latent vectors to two dimensions.
///
/// PCA projects onto the top-2 principal components of the mean-centered
/// latents with a deterministic sign convention (the largest-magnitude
/// loading of each component is positive). Panics with fewer than 3 points.
pub fn embed_latents(latents: &[(Vec<Scalar>, BehaviourId)], method: &EmbedMethod) -> Vec<EmbeddedPoint> {
    assert!(latents.len() >= 3, "embedding needs at least 3 points, got {}", latents.len());
    let dim = latents[0].0.len();
    assert!(latents.iter().all(|(v, _)| v.len() == dim), "latent dimension mismatch");
    match method {
        EmbedMethod::Pca => embed_pca(latents, dim),
        EmbedMethod::Tsne(params) => embed_tsne(latents, dim, params),
    }
}

fn embed_pca(latents: &[(Vec<Scalar>, BehaviourId)], dim: usize) -> Vec<EmbeddedPoint> {
    let n = latents.len();
    let mut mean = vec![0.0; dim];
    for (v, _) in latents {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as Scalar;
    }

    let mut cov = DMatrix::<Scalar>::zeros(dim, dim);
    for (v, _) in latents {
        let centered: Vec<Scalar> = v.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for i in 0..dim {
            if centered[i] == 0.0 {
                continue;
            }
            for j in i..dim {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    cov /= (n.max(2) - 1) as Scalar;

    let eigen = cov.symmetric_eigen();
    // top-2 eigenvectors by eigenvalue, sign-canonicalized
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].partial_cmp(&eigen.eigenvalues[a]).unwrap());
    let component = |idx: usize| -> Vec<Scalar> {
        let col = eigen.eigenvectors.column(order[idx]);
        let mut v: Vec<Scalar> = col.iter().cloned().collect();
        let lead = v
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if v[lead] < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        v
    };
    let (c1, c2) = (component(0), component(1));

    latents
        .iter()
        .map(|(v, label)| {
            let centered: Vec<Scalar> = v.iter().zip(&mean).map(|(x, m)| x - m).collect();
            EmbeddedPoint {
                z1: crate::nn::math::dot(&centered, &c1),
                z2: crate::nn::math::dot(&centered, &c2),
                behaviour_label: *label,
            }
        })
        .collect()
}

/// Exact (quadratic) t-SNE with early exaggeration and momentum.
fn embed_tsne(latents: &[(Vec<Scalar>, BehaviourId)], dim: usize, params: &TsneParams) -> Vec<EmbeddedPoint> {
    let n = latents.len();
    // pairwise squared distances in the input space
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let mut s = 0.0;
            for k in 0..dim {
                let d = latents[i].0[k] - latents[j].0[k];
                s += d * d;
            }
            d2[i * n + j] = s;
            d2[j * n + i] = s;
        }
    }

    // per-point bandwidths via binary search on perplexity
    let target_entropy = params.perplexity.max(2.0).ln();
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        let (mut lo, mut hi) = (1e-20, 1e20);
        let mut beta = 1.0;
        for _ in 0..50 {
            let mut sum = 0.0;
            let mut sum_dp = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = (-beta * d2[i * n + j]).exp();
                sum += w;
                sum_dp += w * d2[i * n + j];
            }
            if sum <= 0.0 {
                break;
            }
            let entropy = beta * sum_dp / sum + sum.ln();
            if (entropy - target_entropy).abs() < 1e-5 {
                break;
            }
            if entropy > target_entropy {
                lo = beta;
                beta = if hi >= 1e20 { beta * 2.0 } else { 0.5 * (beta + hi) };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        let mut sum = 0.0;
        for j in 0..n {
            if i != j {
                let w = (-beta * d2[i * n + j]).exp();
                p[i * n + j] = w;
                sum += w;
            }
        }
        if sum > 0.0 {
            for j in 0..n {
                p[i * n + j] /= sum;
            }
        }
    }
    // symmetrize
    let mut pij = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            pij[i * n + j] = ((p[i * n + j] + p[j * n + i]) / (2.0 * n as Scalar)).max(1e-12);
        }
    }

    let mut rng = stream_rng(params.seed, Stream::Init);
    let mut y: Vec<[Scalar; 2]> = (0..n)
        .map(|_| {
            let a: Scalar = rng.sample(StandardNormal);
            let b: Scalar = rng.sample(StandardNormal);
            [a * 1e-4, b * 1e-4]
        })
        .collect();
    let mut velocity = vec![[0.0; 2]; n];

    for iter in 0..params.iterations {
        let exaggeration = if iter < 100 { 12.0 } else { 1.0 };
        let momentum = if iter < 250 { 0.5 } else { 0.8 };

        // low-dimensional affinities (Student t, one degree of freedom)
        let mut q = vec![0.0; n * n];
        let mut q_sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                q[i * n + j] = w;
                q[j * n + i] = w;
                q_sum += 2.0 * w;
            }
        }

        for i in 0..n {
            let mut grad = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = q[i * n + j];
                let qij = (w / q_sum).max(1e-12);
                let coeff = 4.0 * (exaggeration * pij[i * n + j] - qij) * w;
                grad[0] += coeff * (y[i][0] - y[j][0]);
                grad[1] += coeff * (y[i][1] - y[j][1]);
            }
            for k in 0..2 {
                velocity[i][k] = momentum * velocity[i][k] - params.learning_rate * grad[k];
            }
        }
        for i in 0..n {
            y[i][0] += velocity[i][0];
            y[i][1] += velocity[i][1];
        }
    }

    latents
        .iter()
        .zip(&y)
        .map(|((_, label), pos)| EmbeddedPoint { z1: pos[0], z2: pos[1], behaviour_label: *label })
        .collect()
}

/// Fraction of points whose plurality label among the `k` nearest neighbours
/// (Euclidean, 2-D, self excluded) matches their own label. Ties go to the
/// lowest behaviour index.
pub fn label_structure_score(points: &[EmbeddedPoint], k: usize) -> Scalar {
    let n = points.len();
    assert!(k < n, "k = {k} must be smaller than the number of points {n}");
    assert!(k > 0, "k must be positive");
    let mut hits = 0usize;
    let mut dists: Vec<(Scalar, usize)> = Vec::with_capacity(n - 1);
    for (i, a) in points.iter().enumerate() {
        dists.clear();
        for (j, b) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let dx = a.z1 - b.z1;
            let dy = a.z2 - b.z2;
            dists.push((dx * dx + dy * dy, j));
        }
        dists.select_nth_unstable_by(k - 1, |x, y| x.partial_cmp(y).unwrap());
        let mut counts = [0usize; 3];
        for &(_, j) in &dists[..k] {
            counts[points[j].behaviour_label.index()] += 1;
        }
        let winner = (0..3).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap();
        if winner == a.behaviour_label.index() {
            hits += 1;
        }
    }
    hits as Scalar / n as Scalar
}
